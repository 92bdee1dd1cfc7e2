//! Interpretation of verified programs: sessions, control flow and
//! communication statements.

mod exec;
mod expr;
mod router;
mod server;
mod tree;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;

use crate::comm::{CommError, LocationError, TraceFn, DEFAULT_TIMEOUT};
use crate::console::{ConsoleSink, Stdout};
use crate::typesys::TypeError;
use crate::value::ValueTree;

pub use expr::{eval_expr, read_root, values_equal, EvalError};
pub use server::{Interpreter, ServerHandle, Stats, Stopper};
pub use tree::{build_process_tree, starting_operations, Arm, BuildError, Guard, Node, ProcessTree};

/// Deepest chain of nested `define` calls before a `RecursionLimit` fault.
pub const MAX_CALL_DEPTH: usize = 10_000;

pub mod fault_names {
    pub const TYPE_MISMATCH: &str = "TypeMismatch";
    pub const RECURSION_LIMIT: &str = "RecursionLimit";
    pub const EVAL_ERROR: &str = "EvalError";
    pub const UNKNOWN_OPERATION: &str = "UnknownOperation";
    pub const CHANNEL_CLOSED: &str = "ChannelClosed";
    pub const CYCLIC_TYPE: &str = "CyclicTypeError";
}

/// Abnormal completion of a process.
#[derive(Debug, Clone, PartialEq)]
pub struct Fault {
    pub name: String,
    pub detail: ValueTree,
}

impl Fault {
    pub fn new(name: impl Into<String>, detail: impl Into<String>) -> Fault {
        Fault {
            name: name.into(),
            detail: ValueTree::leaf(detail.into()),
        }
    }
}

impl fmt::Display for Fault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let detail = self.detail.root().to_string();
        if detail.is_empty() {
            f.write_str(&self.name)
        } else {
            write!(f, "{}: {detail}", self.name)
        }
    }
}

impl From<CommError> for Fault {
    fn from(e: CommError) -> Fault {
        Fault::new(e.fault_name(), e.to_string())
    }
}

impl From<EvalError> for Fault {
    fn from(e: EvalError) -> Fault {
        Fault::new(fault_names::EVAL_ERROR, e.0)
    }
}

impl From<TypeError> for Fault {
    fn from(e: TypeError) -> Fault {
        Fault::new(fault_names::CYCLIC_TYPE, e.to_string())
    }
}

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error("port `{port}`: {error}")]
    Location { port: String, error: LocationError },
    #[error("port `{port}` has no Location")]
    MissingLocation { port: String },
    #[error("override for unknown port `{0}`")]
    UnknownPort(String),
    #[error(transparent)]
    Bind(CommError),
    #[error("{block} ended with fault {fault}")]
    Fault { block: &'static str, fault: Fault },
    #[error("cannot start thread: {0}")]
    Thread(#[from] std::io::Error),
}

/// Settings for running a program.
#[derive(Clone)]
pub struct RunConfig {
    /// Port name to `socket://` location, replacing the declared one.
    pub location_overrides: HashMap<String, String>,
    /// Reply timeout for solicit-response.
    pub timeout: Duration,
    pub trace: Option<Arc<TraceFn>>,
    pub console: Arc<dyn ConsoleSink>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            location_overrides: HashMap::new(),
            timeout: DEFAULT_TIMEOUT,
            trace: None,
            console: Arc::new(Stdout),
        }
    }
}

impl fmt::Debug for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RunConfig")
            .field("location_overrides", &self.location_overrides)
            .field("timeout", &self.timeout)
            .field("trace", &self.trace.is_some())
            .finish_non_exhaustive()
    }
}
