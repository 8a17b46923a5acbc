"""Exception hierarchy shared across the toolkit.

Schema problems (anything wrong with a .ksy document) derive from
:class:`SchemaError`; problems with the binary payload derive from
:class:`DataError`; :class:`LayoutError` covers inconsistent builder state
and malformed form/buffer bundles. The CLI maps these families to exit
codes 2, 3 and 3 respectively.
"""

from __future__ import annotations


class KsyJagError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(KsyJagError):
    """A .ksy document is malformed or violates a structural rule."""

    def __init__(self, message: str, path: str | None = None):
        self.message = message
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class YamlSyntaxError(SchemaError):
    """The document is not well-formed YAML."""


class UnknownKeyError(SchemaError):
    """A key outside the supported subset was found (strict mode)."""


class MissingKeyError(SchemaError):
    """A mandatory key is absent."""


class UnknownPrimitiveError(SchemaError):
    """A primitive-looking type name is not a supported primitive."""


class IdentifierError(SchemaError):
    """An identifier does not match ``[a-z][a-z0-9_]*``."""


class AttrSizeError(SchemaError):
    """``size`` used on a non-str attribute, or missing on a str one."""


class RepeatError(SchemaError):
    """The repeat/repeat-expr/repeat-until keys are inconsistent."""


class DuplicateIdError(SchemaError):
    """Two attributes in one seq share an id."""


class UnresolvedTypeError(SchemaError):
    """A user type reference has no matching entry under ``types``."""


class TypeCycleError(SchemaError):
    """The type-reference graph contains a cycle."""

    def __init__(self, cycle: list[str], path: str | None = None):
        self.cycle = list(cycle)
        super().__init__("type cycle: " + " -> ".join(self.cycle), path)


class FieldReferenceError(SchemaError):
    """An expression references an unknown/later field or misuses ``_``."""


class NestedEosError(SchemaError):
    """repeat-eos occurs inside a counted or conditional repeat."""


class ExprSyntaxError(SchemaError):
    """An expression string could not be parsed."""

    def __init__(self, message: str, col: int | None = None, path: str | None = None):
        self.col = col
        if col is not None:
            message = f"{message} (column {col})"
        super().__init__(message, path)


class ExprEvalError(KsyJagError):
    """Expression evaluation failed (type mismatch, overflow, ...)."""


class DataError(KsyJagError):
    """The binary payload does not match the schema."""

    def __init__(self, message: str, path: str | None = None, offset: int | None = None):
        self.message = message
        self.path = path
        self.offset = offset
        text = f"{path}: {message}" if path else message
        if offset is not None:
            text = f"{text} (at byte {offset})"
        super().__init__(text)


class TruncatedStreamError(DataError):
    """The stream ended before a read could complete."""


class TrailingBytesError(DataError):
    """Bytes remained after the top-level seq was fully parsed."""


class StringDecodeError(DataError):
    """A string field holds invalid UTF-8."""


class LayoutError(KsyJagError):
    """Builder state or an exported bundle is internally inconsistent."""


class FormError(LayoutError):
    """A form description is malformed."""
