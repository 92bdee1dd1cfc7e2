//! Interpreter for a small service-orchestration language with structural
//! message types, including choice types (`A | B`).
//!
//! The pipeline is [`lexer`] → [`parser`] → [`optimize`] → [`semantics`],
//! after which [`runtime`] builds an interpretation tree and executes it,
//! talking to other services through [`comm`].

pub mod ast;
pub mod comm;
pub mod console;
pub mod driver;
pub mod lexer;
pub mod optimize;
pub mod parser;
pub mod printer;
pub mod runtime;
pub mod semantics;
pub mod typesys;
pub mod value;

pub use ast::{AstProgram, Cardinality, NativeType, ProcessAst, TypeDefinitionAst};
pub use comm::{decode_message, encode_message, CommError, Location, Message};
pub use driver::{check_file, load_file, load_source, LoadError};
pub use lexer::{tokenize, LexError, Token, TokenKind};
pub use parser::{parse_program, parse_source, ParseError};
pub use runtime::{Fault, Interpreter, RunConfig, RuntimeError, ServerHandle};
pub use semantics::{verify_program, Diagnostic, Severity};
pub use typesys::{
    check_cardinality, conforms, resolve, resolve_decls, select_arm, ResolvedType, TypeError,
    TypeTable,
};
pub use value::{BasicValue, ValueTree};
