//! Synthesizable Verilog subset: parsing, printing, elaboration and
//! emission.

mod ast;
mod elab;
mod emit;
mod parser;
mod print;

pub use ast::*;
pub use elab::{elaborate, elaborate_full, Elaborated};
pub use emit::{emit_module, emit_verilog, ClockReset};
pub use parser::parse;
pub use print::{ident, print, print_module};

use thiserror::Error;

use crate::ir::IrError;
use crate::syntax::{Pos, SyntaxError};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum VerilogError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("{pos}: in module `{module}`: {message}")]
    Elab {
        module: String,
        pos: Pos,
        message: String,
    },
    #[error("{0}")]
    Ir(#[from] IrError),
    #[error("module `{0}` defined in more than one file")]
    DuplicateModule(String),
}

/// Parses several sources into one file; module names must be unique.
pub fn parse_all<'t>(texts: impl IntoIterator<Item = &'t str>) -> Result<SourceFile, VerilogError> {
    let mut all = SourceFile::default();
    for t in texts {
        for m in parse(t)?.modules {
            if all.module(&m.name).is_some() {
                return Err(VerilogError::DuplicateModule(m.name));
            }
            all.modules.push(m);
        }
    }
    Ok(all)
}
