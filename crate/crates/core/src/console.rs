//! The in-process `Console` port.

use std::io::Write;
use std::sync::Mutex;

use crate::value::ValueTree;

pub const PRINTLN: &str = "println";

/// Destination of console lines. Each call writes one whole line.
pub trait ConsoleSink: Send + Sync {
    fn write_line(&self, line: &str);
}

/// Writes to the process's standard output.
#[derive(Debug, Default, Clone, Copy)]
pub struct Stdout;

impl ConsoleSink for Stdout {
    fn write_line(&self, line: &str) {
        // one write per line under the stdout lock keeps lines whole
        let mut out = std::io::stdout().lock();
        let mut buf = String::with_capacity(line.len() + 1);
        buf.push_str(line);
        buf.push('\n');
        let _ = out.write_all(buf.as_bytes());
        let _ = out.flush();
    }
}

/// Collects lines in memory.
#[derive(Debug, Default)]
pub struct CapturedConsole {
    lines: Mutex<Vec<String>>,
}

impl CapturedConsole {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn lines(&self) -> Vec<String> {
        self.lines.lock().unwrap().clone()
    }
}

impl ConsoleSink for CapturedConsole {
    fn write_line(&self, line: &str) {
        self.lines.lock().unwrap().push(line.to_owned());
    }
}

/// Prints the rendered root of `payload`; children are ignored.
pub fn println(sink: &dyn ConsoleSink, payload: &ValueTree) -> ValueTree {
    sink.write_line(&payload.root().to_string());
    ValueTree::new()
}
