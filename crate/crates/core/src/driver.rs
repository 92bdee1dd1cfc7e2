//! The front-end pipeline: read, tokenize, parse, optimize, verify.

use std::io;
use std::path::Path;

use thiserror::Error;

use crate::ast::AstProgram;
use crate::lexer::{tokenize, LexError};
use crate::optimize::optimize_ast;
use crate::parser::{parse_program_named, FsLoader, IncludeLoader, ParseError};
use crate::semantics::{verify_program, Diagnostic};

/// Failure before verification could run.
#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}:{error}")]
    Lex { path: String, error: LexError },
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// Parses and optimizes `source`, resolving includes through `loader`.
pub fn load_source(
    name: &str,
    source: &str,
    loader: &mut dyn IncludeLoader,
) -> Result<AstProgram, LoadError> {
    let tokens = tokenize(source).map_err(|error| LoadError::Lex {
        path: name.to_owned(),
        error,
    })?;
    let program = parse_program_named(name, &tokens, loader)?;
    Ok(optimize_ast(program))
}

/// Reads a program file; includes resolve relative to it.
pub fn load_file(path: &Path) -> Result<AstProgram, LoadError> {
    let name = path.to_string_lossy().into_owned();
    let source = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: name.clone(),
        source,
    })?;
    load_source(&name, &source, &mut FsLoader)
}

/// Loads and verifies a program file.
pub fn check_file(path: &Path) -> Result<(AstProgram, Vec<Diagnostic>), LoadError> {
    let program = load_file(path)?;
    let diagnostics = verify_program(&program);
    Ok((program, diagnostics))
}
