//! Canonical source rendering of ASTs.
//!
//! Output re-parses to a structurally equal AST. Includes other than the
//! console are not re-emitted because their declarations are already
//! spliced into the program.

use std::fmt::{self, Display, Write};

use crate::ast::*;
use crate::value::BasicValue;

impl Display for Cardinality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.min, self.max) {
            (1, Some(1)) => Ok(()),
            (0, Some(1)) => f.write_str("?"),
            (0, None) => f.write_str("*"),
            (min, Some(max)) => write!(f, "[{min},{max}]"),
            (min, None) => write!(f, "[{min},*]"),
        }
    }
}

impl Display for TypeDefinitionAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeDefinitionAst::Native(n) => write!(f, "{n}"),
            TypeDefinitionAst::Inline { native, subtypes } => {
                write!(f, "{native} {{")?;
                for st in subtypes {
                    write!(f, " .{}{}: {}", st.name, st.cardinality, st.def)?;
                }
                f.write_str(" }")
            }
            TypeDefinitionAst::UntypedSubnodes(n) => write!(f, "{n} {{ ? }}"),
            TypeDefinitionAst::Link { name, .. } => f.write_str(name),
            TypeDefinitionAst::Undefined => f.write_str("undefined"),
            TypeDefinitionAst::Choice(l, r) => {
                if matches!(**l, TypeDefinitionAst::Choice(..)) {
                    write!(f, "({l}) | {r}")
                } else {
                    write!(f, "{l} | {r}")
                }
            }
        }
    }
}

pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn literal(v: &BasicValue) -> String {
    match v {
        BasicValue::Empty => "\"\"".into(),
        BasicValue::Int(i) => i.to_string(),
        BasicValue::Long(l) => format!("{l}L"),
        BasicValue::Double(d) => format!("{d:?}"),
        BasicValue::Str(s) => quote(s),
        BasicValue::Bool(b) => b.to_string(),
        BasicValue::Bytes(_) => quote(&v.to_string()),
    }
}

impl Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Literal(v) => f.write_str(&literal(v)),
            Expr::Path(p) => write!(f, "{p}"),
            Expr::IsDefined(p) => write!(f, "is_defined({p})"),
            Expr::Unary(UnaryOp::Not, e) => write!(f, "!({e})"),
            Expr::Unary(UnaryOp::Neg, e) => write!(f, "-({e})"),
            Expr::Binary { op, lhs, rhs, .. } => write!(f, "({lhs} {} {rhs})", op.symbol()),
        }
    }
}

struct Printer {
    out: String,
    indent: usize,
}

impl Printer {
    fn line(&mut self, text: &str) {
        for _ in 0..self.indent {
            self.out.push_str("  ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn block(&mut self, header: &str, body: &ProcessAst, footer: &str) {
        if header.is_empty() {
            self.line("{");
        } else {
            self.line(&format!("{header} {{"));
        }
        self.indent += 1;
        self.process(body);
        self.indent -= 1;
        self.line(&format!("}}{footer}"));
    }

    /// Prints `p` wrapped in braces.
    fn braced(&mut self, p: &ProcessAst) {
        self.block("", p, "");
    }

    fn process(&mut self, p: &ProcessAst) {
        match p {
            ProcessAst::Sequence(items) if items.len() < 2 => {
                // not produced by the parser; keep the output parseable
                match items.first() {
                    Some(only) => self.braced(only),
                    None => self.line("nullProcess"),
                }
            }
            ProcessAst::Sequence(items) => {
                for (i, item) in items.iter().enumerate() {
                    let needs_braces =
                        matches!(item, ProcessAst::Sequence(_) | ProcessAst::Parallel(..));
                    if needs_braces {
                        self.braced(item);
                    } else {
                        self.process(item);
                    }
                    if i + 1 < items.len() {
                        // attach the separator to the previous line
                        self.out.pop();
                        self.out.push_str(";\n");
                    }
                }
            }
            ProcessAst::Parallel(l, r) => {
                if matches!(**l, ProcessAst::Parallel(..)) {
                    self.process(l);
                } else {
                    self.braced(l);
                }
                self.line("|");
                self.braced(r);
            }
            ProcessAst::InputChoice(branches) => {
                for b in branches {
                    let guard = match &b.guard {
                        InputStatementAst::OneWay(r) => one_way(r),
                        InputStatementAst::RequestResponse(r) => {
                            self.block(&format!("[{}", rr_header(r)), &r.body, "]");
                            self.block("", &b.body, "");
                            continue;
                        }
                    };
                    self.block(&format!("[{guard}]"), &b.body, "");
                }
            }
            ProcessAst::OneWayRecv(r) => self.line(&one_way(r)),
            ProcessAst::RequestResponseRecv(r) => self.block(&rr_header(r), &r.body, ""),
            ProcessAst::Notification { op, port, arg, .. } => {
                self.line(&format!("{op}@{port}({})", opt(arg)));
            }
            ProcessAst::SolicitResponse {
                op,
                port,
                arg,
                result,
                ..
            } => self.line(&format!("{op}@{port}({})({})", opt(arg), opt(result))),
            ProcessAst::Assign { path, expr } => self.line(&format!("{path} = {expr}")),
            ProcessAst::If {
                cond,
                then,
                otherwise,
            } => match otherwise {
                None => self.block(&format!("if ({cond})"), then, ""),
                Some(e) => {
                    self.block(&format!("if ({cond})"), then, "");
                    self.out.pop();
                    self.out.push_str(" else {\n");
                    self.indent += 1;
                    self.process(e);
                    self.indent -= 1;
                    self.line("}");
                }
            },
            ProcessAst::Match { subject, arms, .. } => {
                self.line(&format!("match ({subject}) {{"));
                self.indent += 1;
                for arm in arms {
                    self.block(&arm.type_name, &arm.body, "");
                }
                self.indent -= 1;
                self.line("}");
            }
            ProcessAst::CallDefine { name, .. } => self.line(name),
            ProcessAst::Nil => self.line("nullProcess"),
        }
    }
}

fn opt<T: Display>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

fn one_way(r: &OneWayRecv) -> String {
    format!("{}({})", r.op, opt(&r.var))
}

fn rr_header(r: &RequestResponseRecv) -> String {
    format!("{}({})({})", r.op, opt(&r.input), opt(&r.output))
}

pub fn print_process(p: &ProcessAst) -> String {
    let mut pr = Printer {
        out: String::new(),
        indent: 0,
    };
    pr.process(p);
    pr.out
}

fn print_port(out: &mut String, keyword: &str, port: &PortConfig) {
    let _ = writeln!(out, "{keyword} {} {{", port.name);
    if let Some(loc) = &port.location {
        let _ = writeln!(out, "  Location: {}", quote(loc));
    }
    if let Some(proto) = &port.protocol {
        if crate::lexer::is_identifier(proto) {
            let _ = writeln!(out, "  Protocol: {proto}");
        } else {
            let _ = writeln!(out, "  Protocol: {}", quote(proto));
        }
    }
    if !port.interfaces.is_empty() {
        let _ = writeln!(out, "  Interfaces: {}", port.interfaces.join(", "));
    }
    out.push_str("}\n\n");
}

pub fn print_program(p: &AstProgram) -> String {
    let mut out = String::new();
    if p.uses_console() {
        let _ = writeln!(out, "include {}\n", quote(CONSOLE_INCLUDE));
    }
    for t in &p.type_decls {
        let _ = writeln!(out, "type {}: {}", t.name, t.def);
    }
    if !p.type_decls.is_empty() {
        out.push('\n');
    }
    for iface in &p.interfaces {
        let _ = writeln!(out, "interface {} {{", iface.name);
        for op in &iface.request_response_ops {
            let _ = writeln!(
                out,
                "  RequestResponse: {}({})({})",
                op.name, op.request_type, op.response_type
            );
        }
        for op in &iface.one_way_ops {
            let _ = writeln!(out, "  OneWay: {}({})", op.name, op.request_type);
        }
        out.push_str("}\n\n");
    }
    for port in &p.input_ports {
        print_port(&mut out, "inputPort", port);
    }
    for port in &p.output_ports {
        print_port(&mut out, "outputPort", port);
    }
    if p.execution_mode != ExecutionMode::Single {
        let _ = writeln!(out, "execution {{ {} }}\n", p.execution_mode.keyword());
    }
    let mut pr = Printer {
        out,
        indent: 0,
    };
    if let Some(init) = &p.init_block {
        pr.block("init", init, "\n");
    }
    for d in &p.defines {
        pr.block(&format!("define {}", d.name), &d.body, "\n");
    }
    if let Some(main) = &p.main_block {
        pr.block("main", main, "");
    }
    pr.out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexer::tokenize;
    use crate::parser::{parse_process, parse_source};

    #[test]
    fn type_printing_keeps_grouping() {
        let t = TypeDefinitionAst::choice(
            TypeDefinitionAst::choice(
                TypeDefinitionAst::link("a"),
                TypeDefinitionAst::Native(NativeType::Int),
            ),
            TypeDefinitionAst::Undefined,
        );
        assert_eq!(t.to_string(), "(a | int) | undefined");
    }

    #[test]
    fn program_round_trip() {
        let src = r#"
            include "console.iol"
            type customer: void { .name: string .age?: int .tags[0,*]: string { ? } }
            type request: customer | void { .car_state: string }
            interface I { RequestResponse: get(request)(string) OneWay: ping(undefined) }
            inputPort P { Location: "socket://localhost:0" Protocol: sodep Interfaces: I }
            outputPort O { Location: "socket://localhost:1" Interfaces: I }
            execution { concurrent }
            define helper { x = x + 1 }
            main {
              [get(req)(resp) {
                match (req) { customer { resp = "c" } void { resp = -(x) } }
              }] { helper }
              [ping(p)];
              { a = 1 | b = 2.5; c = "q\"\n" };
              if (is_defined(a) && !(b == 2)) { println@Console(a + 1L)() } else { ping@O(a) }
            }
        "#;
        let p = parse_source(src).unwrap();
        let printed = print_program(&p);
        let reparsed = parse_source(&printed).unwrap();
        assert_eq!(p.type_decls, reparsed.type_decls);
        assert_eq!(p.interfaces, reparsed.interfaces);
        assert_eq!(p.input_ports, reparsed.input_ports);
        assert_eq!(p.output_ports, reparsed.output_ports);
        assert_eq!(p.main_block, reparsed.main_block);
        assert_eq!(p.defines, reparsed.defines);
        assert_eq!(p.execution_mode, reparsed.execution_mode);
        // printing is a fixed point after one round
        assert_eq!(printed, print_program(&reparsed));
    }

    #[test]
    fn process_round_trip_of_nested_blocks() {
        let src = "a = 1; { b = 2; c = 3 }; { d = 4 | e = 5 } | f = 6 | { g = 7 | h = 8 }";
        let p = parse_process(&tokenize(src).unwrap()).unwrap();
        let again = parse_process(&tokenize(&print_process(&p)).unwrap()).unwrap();
        assert_eq!(p, again);
    }
}
