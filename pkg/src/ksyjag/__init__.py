"""ksyjag: interpret binary files into nested columnar data from KSY descriptions."""

from .errors import (
    DataError,
    ExprEvalError,
    ExprSyntaxError,
    FormError,
    KsyJagError,
    LayoutError,
    SchemaError,
    StringDecodeError,
    TrailingBytesError,
    TruncatedStreamError,
)
from .expr import Scope, eval_expr, parse_expr, render_expr
from .interp import (
    Cursor,
    LayoutPlan,
    compile_layout,
    mangle_name,
    parse_data,
    parse_file,
    read_primitive,
)
from .ksy import Endian, Schema, ValidatedSchema, parse_schema, validate_schema
from .layout import (
    FilledLayout,
    form_to_json,
    read_bundle,
    reconstruct,
    write_bundle,
)

__version__ = "0.1.0"

__all__ = [
    "Cursor",
    "DataError",
    "Endian",
    "ExprEvalError",
    "ExprSyntaxError",
    "FilledLayout",
    "FormError",
    "KsyJagError",
    "LayoutError",
    "LayoutPlan",
    "Schema",
    "SchemaError",
    "Scope",
    "StringDecodeError",
    "TrailingBytesError",
    "TruncatedStreamError",
    "ValidatedSchema",
    "compile_layout",
    "eval_expr",
    "form_to_json",
    "mangle_name",
    "parse_data",
    "parse_expr",
    "parse_file",
    "parse_schema",
    "read_bundle",
    "read_primitive",
    "reconstruct",
    "render_expr",
    "validate_schema",
    "write_bundle",
    "__version__",
]
