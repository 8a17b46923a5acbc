export { Reader, readBundle, SchemaError, DataError, CliError } from "./reader.js";
export type { NamingMode, ReaderOptions } from "./reader.js";
export { reconstruct, ReconstructError } from "./reconstruct.js";
export type { FormNode, NestedValue, Primitive } from "./reconstruct.js";
