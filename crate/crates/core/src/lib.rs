//! Front ends, linker, dependency graph and code generator for a family of
//! component DSLs: IDSL (interfaces), CDSL (components), PDSL (parameters)
//! and DDSL (deployments).

pub mod cdsl;
pub mod codegen;
pub mod ddsl;
pub mod diag;
pub mod idsl;
pub mod loader;
pub mod pdsl;
pub mod source;

pub use diag::{Diagnostic, Diagnostics, Severity};
pub use loader::{ComponentLoader, IdslLoader, ImportedModule, LoadedComponent, Workspace};
