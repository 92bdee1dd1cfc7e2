//! Well-formedness checks over a parsed program.
//!
//! All problems are collected; nothing stops at the first error.

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::ast::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Warning => "warning",
            Severity::Error => "error",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
    pub pos: Pos,
}

impl Diagnostic {
    fn error(pos: Pos, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            message: message.into(),
            pos,
        }
    }

    fn warning(pos: Pos, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            message: message.into(),
            pos,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }

    /// `severity: file:line:col: message`
    pub fn render(&self, program: &AstProgram) -> String {
        format!(
            "{}: {}:{}:{}: {}",
            self.severity,
            program.source_name(self.pos),
            self.pos.line,
            self.pos.column,
            self.message
        )
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(Diagnostic::is_error)
}

/// Protocol name served natively; other names are accepted with a warning.
pub const NATIVE_PROTOCOL: &str = "mop";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum OpKind {
    OneWay,
    RequestResponse,
}

struct Verifier<'p> {
    program: &'p AstProgram,
    diags: Vec<Diagnostic>,
    type_names: HashSet<&'p str>,
    /// op name -> kind, for every interface bound to an input port
    input_ops: HashMap<&'p str, OpKind>,
    /// output port name -> (op name -> kind)
    output_ops: HashMap<&'p str, HashMap<&'p str, OpKind>>,
}

pub fn verify_program(program: &AstProgram) -> Vec<Diagnostic> {
    let mut v = Verifier {
        program,
        diags: Vec::new(),
        type_names: HashSet::new(),
        input_ops: HashMap::new(),
        output_ops: HashMap::new(),
    };
    v.types();
    v.interfaces();
    v.ports();
    v.behavior();
    v.diags
}

fn is_type_ref(name: &str, types: &HashSet<&str>) -> bool {
    NativeType::from_keyword(name).is_some() || name == "undefined" || types.contains(name)
}

impl<'p> Verifier<'p> {
    fn types(&mut self) {
        for decl in &self.program.type_decls {
            if !self.type_names.insert(&decl.name) {
                self.diags.push(Diagnostic::error(
                    decl.pos,
                    format!("type `{}` is already defined", decl.name),
                ));
            }
        }
        for decl in &self.program.type_decls {
            self.type_def(&decl.def);
        }
    }

    fn type_def(&mut self, def: &TypeDefinitionAst) {
        match def {
            TypeDefinitionAst::Native(_)
            | TypeDefinitionAst::UntypedSubnodes(_)
            | TypeDefinitionAst::Undefined => {}
            TypeDefinitionAst::Link { name, pos } => {
                if !self.type_names.contains(name.as_str()) {
                    self.diags.push(Diagnostic::error(
                        *pos,
                        format!("type `{name}` is not defined"),
                    ));
                }
            }
            TypeDefinitionAst::Inline { subtypes, .. } => {
                let mut seen = HashSet::new();
                for st in subtypes {
                    if !seen.insert(st.name.as_str()) {
                        self.diags.push(Diagnostic::error(
                            st.pos,
                            format!("subtype `{}` is declared twice", st.name),
                        ));
                    }
                    if !st.cardinality.is_well_formed() {
                        self.diags.push(Diagnostic::error(
                            st.pos,
                            format!(
                                "cardinality of `{}` has minimum {} above maximum {}",
                                st.name,
                                st.cardinality.min,
                                st.cardinality.max.unwrap_or_default()
                            ),
                        ));
                    }
                    self.type_def(&st.def);
                }
            }
            TypeDefinitionAst::Choice(l, r) => {
                self.type_def(l);
                self.type_def(r);
            }
        }
    }

    fn check_type_ref(&mut self, name: &str, pos: Pos, what: &str) {
        if !is_type_ref(name, &self.type_names) {
            self.diags.push(Diagnostic::error(
                pos,
                format!("{what} type `{name}` is not defined"),
            ));
        }
    }

    fn interfaces(&mut self) {
        let mut seen = HashSet::new();
        for iface in &self.program.interfaces {
            if !seen.insert(iface.name.as_str()) {
                self.diags.push(Diagnostic::error(
                    iface.pos,
                    format!("interface `{}` is already defined", iface.name),
                ));
            }
            let mut ops = HashSet::new();
            for op in &iface.request_response_ops {
                if !ops.insert(op.name.as_str()) {
                    self.diags.push(Diagnostic::error(
                        op.pos,
                        format!("operation `{}` is declared twice in `{}`", op.name, iface.name),
                    ));
                }
                self.check_type_ref(&op.request_type, op.pos, "request");
                self.check_type_ref(&op.response_type, op.pos, "response");
            }
            for op in &iface.one_way_ops {
                if !ops.insert(op.name.as_str()) {
                    self.diags.push(Diagnostic::error(
                        op.pos,
                        format!("operation `{}` is declared twice in `{}`", op.name, iface.name),
                    ));
                }
                self.check_type_ref(&op.request_type, op.pos, "request");
            }
        }
    }

    fn port_ops(&mut self, port: &'p PortConfig) -> HashMap<&'p str, OpKind> {
        let mut ops = HashMap::new();
        for name in &port.interfaces {
            let Some(iface) = self.program.interface(name) else {
                self.diags.push(Diagnostic::error(
                    port.pos,
                    format!("port `{}` uses undefined interface `{name}`", port.name),
                ));
                continue;
            };
            for op in &iface.request_response_ops {
                ops.insert(op.name.as_str(), OpKind::RequestResponse);
            }
            for op in &iface.one_way_ops {
                ops.insert(op.name.as_str(), OpKind::OneWay);
            }
        }
        ops
    }

    fn ports(&mut self) {
        let program = self.program;
        let mut seen = HashSet::new();
        for port in program.input_ports.iter().chain(&program.output_ports) {
            let key = (port.direction, port.name.as_str());
            if !seen.insert(key) {
                self.diags.push(Diagnostic::error(
                    port.pos,
                    format!("port `{}` is already defined", port.name),
                ));
            }
            match &port.location {
                None => self.diags.push(Diagnostic::error(
                    port.pos,
                    format!("port `{}` has no Location", port.name),
                )),
                Some(loc) => {
                    if let Err(e) = crate::comm::Location::parse(loc) {
                        self.diags.push(Diagnostic::error(
                            port.pos,
                            format!("port `{}`: {e}", port.name),
                        ));
                    }
                }
            }
            if let Some(proto) = &port.protocol {
                if proto != NATIVE_PROTOCOL {
                    self.diags.push(Diagnostic::warning(
                        port.pos,
                        format!(
                            "protocol `{proto}` on port `{}` is served by {}",
                            port.name,
                            crate::comm::PROTOCOL_NAME
                        ),
                    ));
                }
            }
        }
        for port in &program.input_ports {
            let ops = self.port_ops(port);
            for (op, kind) in ops {
                self.input_ops.insert(op, kind);
            }
        }
        for port in &program.output_ports {
            if port.name == CONSOLE_PORT && program.uses_console() {
                self.diags.push(Diagnostic::error(
                    port.pos,
                    format!("port `{CONSOLE_PORT}` is reserved by the console include"),
                ));
            }
            let ops = self.port_ops(port);
            self.output_ops.insert(&port.name, ops);
        }
        if program.uses_console() {
            self.output_ops.insert(
                CONSOLE_PORT,
                HashMap::from([(crate::console::PRINTLN, OpKind::RequestResponse)]),
            );
        }
    }

    fn behavior(&mut self) {
        let program = self.program;
        let mut defines = HashSet::new();
        for d in &program.defines {
            if !defines.insert(d.name.as_str()) {
                self.diags.push(Diagnostic::error(
                    d.pos,
                    format!("define `{}` is already defined", d.name),
                ));
            }
        }
        if let Some(init) = &program.init_block {
            self.process(init);
        }
        for d in &program.defines {
            self.process(&d.body);
        }
        if let Some(main) = &program.main_block {
            self.process(main);
        }
        if program.execution_mode != ExecutionMode::Single {
            let starts_with_input = program
                .main_block
                .as_ref()
                .is_some_and(|m| !crate::runtime::starting_operations(m).is_empty());
            if !starts_with_input {
                let pos = program
                    .input_ports
                    .first()
                    .map(|p| p.pos)
                    .unwrap_or_default();
                self.diags.push(Diagnostic::error(
                    pos,
                    format!(
                        "execution mode `{}` requires main to begin with an input statement",
                        program.execution_mode.keyword()
                    ),
                ));
            }
        }
    }

    fn input(&mut self, op: &str, kind: OpKind, pos: Pos) {
        match self.input_ops.get(op) {
            None => self.diags.push(Diagnostic::error(
                pos,
                format!("operation `{op}` is not offered by any input port"),
            )),
            Some(&k) if k != kind => self.diags.push(Diagnostic::error(
                pos,
                format!("operation `{op}` is declared as {}", kind_name(k)),
            )),
            Some(_) => {}
        }
    }

    fn output(&mut self, op: &str, port: &str, kind: OpKind, pos: Pos) {
        let Some(ops) = self.output_ops.get(port) else {
            self.diags.push(Diagnostic::error(
                pos,
                format!("`{port}` is not a declared output port"),
            ));
            return;
        };
        match ops.get(op) {
            None => self.diags.push(Diagnostic::error(
                pos,
                format!("operation `{op}` is not available on output port `{port}`"),
            )),
            Some(&k) if k != kind => self.diags.push(Diagnostic::error(
                pos,
                format!("operation `{op}` on `{port}` is declared as {}", kind_name(k)),
            )),
            Some(_) => {}
        }
    }

    fn guard(&mut self, g: &InputStatementAst) {
        match g {
            InputStatementAst::OneWay(r) => self.input(&r.op, OpKind::OneWay, r.pos),
            InputStatementAst::RequestResponse(r) => {
                self.input(&r.op, OpKind::RequestResponse, r.pos);
                self.process(&r.body);
            }
        }
    }

    fn process(&mut self, p: &ProcessAst) {
        match p {
            ProcessAst::Sequence(items) => items.iter().for_each(|i| self.process(i)),
            ProcessAst::Parallel(l, r) => {
                self.process(l);
                self.process(r);
            }
            ProcessAst::InputChoice(branches) => {
                for b in branches {
                    self.guard(&b.guard);
                    self.process(&b.body);
                }
            }
            ProcessAst::OneWayRecv(r) => self.input(&r.op, OpKind::OneWay, r.pos),
            ProcessAst::RequestResponseRecv(r) => {
                self.input(&r.op, OpKind::RequestResponse, r.pos);
                self.process(&r.body);
            }
            ProcessAst::Notification { op, port, pos, .. } => {
                self.output(op, port, OpKind::OneWay, *pos)
            }
            ProcessAst::SolicitResponse { op, port, pos, .. } => {
                self.output(op, port, OpKind::RequestResponse, *pos)
            }
            ProcessAst::Assign { .. } => {}
            ProcessAst::If {
                then, otherwise, ..
            } => {
                self.process(then);
                if let Some(e) = otherwise {
                    self.process(e);
                }
            }
            ProcessAst::Match { arms, .. } => {
                for arm in arms {
                    self.check_type_ref(&arm.type_name, arm.pos, "match arm");
                    self.process(&arm.body);
                }
            }
            ProcessAst::CallDefine { name, pos } => {
                if self.program.define(name).is_none() {
                    self.diags.push(Diagnostic::error(
                        *pos,
                        format!("define `{name}` does not exist"),
                    ));
                }
            }
            ProcessAst::Nil => {}
        }
    }
}

fn kind_name(k: OpKind) -> &'static str {
    match k {
        OpKind::OneWay => "OneWay",
        OpKind::RequestResponse => "RequestResponse",
    }
}
