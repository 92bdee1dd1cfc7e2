//! Recursive-descent parser for programs and include files.
//!
//! Deployment declarations and behavior blocks may appear in any order.
//! `include "file.iol"` splices the included file's declarations into the
//! program at the point of inclusion.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::ast::*;
use crate::lexer::{self, LexError, Token, TokenKind};
use crate::value::BasicValue;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{file}:{line}:{column}: expected {}, found {found}", expected.join(" or "))]
    Unexpected {
        expected: Vec<String>,
        found: String,
        file: String,
        line: u32,
        column: u32,
    },
    #[error("{file}:{line}:{column}: {message}")]
    Invalid {
        message: String,
        file: String,
        line: u32,
        column: u32,
    },
    #[error(transparent)]
    Include(#[from] IncludeError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IncludeError {
    #[error("{from}:{line}:{column}: cannot include {target:?}: {reason}")]
    Load {
        from: String,
        target: String,
        reason: String,
        line: u32,
        column: u32,
    },
    #[error("{from}:{line}:{column}: include cycle: {}", chain.join(" -> "))]
    Cycle {
        from: String,
        chain: Vec<String>,
        line: u32,
        column: u32,
    },
    #[error("{path}: {error}")]
    Lex { path: String, error: LexError },
}

/// Why a loader could not supply an include.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LoadFailure {
    NotFound(String),
    Lex(String, LexError),
}

/// Supplies the token streams of included files.
pub trait IncludeLoader {
    /// Resolves `target` as written inside the source named `from`. Returns
    /// the canonical name of the included source with its tokens.
    fn load(&mut self, from: &str, target: &str) -> Result<(String, Vec<Token>), LoadFailure>;
}

/// Loader for sources that must not include anything.
pub struct NoIncludes;

impl IncludeLoader for NoIncludes {
    fn load(&mut self, _from: &str, target: &str) -> Result<(String, Vec<Token>), LoadFailure> {
        Err(LoadFailure::NotFound(format!(
            "includes are not available here ({target})"
        )))
    }
}

/// Resolves includes relative to the directory of the including file.
#[derive(Debug, Default)]
pub struct FsLoader;

impl IncludeLoader for FsLoader {
    fn load(&mut self, from: &str, target: &str) -> Result<(String, Vec<Token>), LoadFailure> {
        let base = Path::new(from).parent().unwrap_or(Path::new(""));
        let path: PathBuf = base.join(target);
        let source = std::fs::read_to_string(&path)
            .map_err(|e| LoadFailure::NotFound(format!("{}: {e}", path.display())))?;
        let name = path.to_string_lossy().into_owned();
        let tokens = lexer::tokenize(&source).map_err(|e| LoadFailure::Lex(name.clone(), e))?;
        Ok((name, tokens))
    }
}

/// In-memory sources keyed by name; include targets are looked up verbatim.
#[derive(Debug, Default, Clone)]
pub struct MemoryLoader {
    pub files: HashMap<String, String>,
}

impl MemoryLoader {
    pub fn new<K: Into<String>, V: Into<String>>(files: impl IntoIterator<Item = (K, V)>) -> Self {
        MemoryLoader {
            files: files
                .into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
        }
    }
}

impl IncludeLoader for MemoryLoader {
    fn load(&mut self, _from: &str, target: &str) -> Result<(String, Vec<Token>), LoadFailure> {
        let source = self
            .files
            .get(target)
            .ok_or_else(|| LoadFailure::NotFound(format!("no source named {target:?}")))?;
        let tokens =
            lexer::tokenize(source).map_err(|e| LoadFailure::Lex(target.to_owned(), e))?;
        Ok((target.to_owned(), tokens))
    }
}

/// Parses a root source named `<input>`.
pub fn parse_program(
    tokens: &[Token],
    loader: &mut dyn IncludeLoader,
) -> Result<AstProgram, ParseError> {
    parse_program_named("<input>", tokens, loader)
}

pub fn parse_program_named(
    name: &str,
    tokens: &[Token],
    loader: &mut dyn IncludeLoader,
) -> Result<AstProgram, ParseError> {
    let mut builder = ProgramBuilder {
        program: AstProgram::default(),
        loader,
        stack: vec![name.to_owned()],
        loaded: vec![name.to_owned()],
    };
    builder.program.sources.push(name.to_owned());
    builder.parse_file(tokens, 0)?;
    Ok(builder.program)
}

/// Convenience: tokenize and parse `source` with no include support.
pub fn parse_source(source: &str) -> Result<AstProgram, ParseError> {
    let tokens = lexer::tokenize(source).map_err(|e| {
        let (line, column) = e.position();
        let text = e.to_string();
        ParseError::Invalid {
            // drop the `line:column: ` prefix, it is carried separately
            message: text.split_once(": ").map_or(text.clone(), |(_, m)| m.to_owned()),
            file: "<input>".into(),
            line,
            column,
        }
    })?;
    parse_program(&tokens, &mut NoIncludes)
}

/// Parses a standalone type expression such as `int | long`.
pub fn parse_type_definition(tokens: &[Token]) -> Result<TypeDefinitionAst, ParseError> {
    let mut p = Parser::new(tokens, 0, "<input>");
    let def = p.type_definition()?;
    p.expect_eof()?;
    Ok(def)
}

/// Parses a standalone process, as found inside `main { ... }`.
pub fn parse_process(tokens: &[Token]) -> Result<ProcessAst, ParseError> {
    let mut p = Parser::new(tokens, 0, "<input>");
    let process = p.process()?;
    p.expect_eof()?;
    Ok(process)
}

struct ProgramBuilder<'l> {
    program: AstProgram,
    loader: &'l mut dyn IncludeLoader,
    /// Sources currently being parsed, outermost first.
    stack: Vec<String>,
    /// Every source seen so far; a source is spliced in at most once.
    loaded: Vec<String>,
}

impl ProgramBuilder<'_> {
    fn parse_file(&mut self, tokens: &[Token], file: u16) -> Result<(), ParseError> {
        let name = self.program.sources[file as usize].clone();
        let mut p = Parser::new(tokens, file, &name);
        loop {
            let tok = p.peek().clone();
            if tok.is_eof() {
                return Ok(());
            }
            if tok.kind != TokenKind::Keyword {
                return Err(p.unexpected(&[
                    "include", "type", "interface", "inputPort", "outputPort", "execution",
                    "init", "define", "main",
                ]));
            }
            match tok.text.as_str() {
                "include" => {
                    p.bump();
                    let target = p.expect_string()?;
                    self.include(&name, &target, &tok)?;
                }
                "type" => {
                    p.bump();
                    let pos = p.pos_of(&tok);
                    let name = p.expect_ident()?;
                    p.expect_punct(":")?;
                    let def = p.type_definition()?;
                    self.program.type_decls.push(TypeDecl { name, def, pos });
                }
                "interface" => {
                    let iface = p.interface()?;
                    self.program.interfaces.push(iface);
                }
                "inputPort" => {
                    let port = p.port(PortDirection::Input)?;
                    self.program.input_ports.push(port);
                }
                "outputPort" => {
                    let port = p.port(PortDirection::Output)?;
                    self.program.output_ports.push(port);
                }
                "execution" => {
                    p.bump();
                    let braced = p.eat_punct("{");
                    if !braced {
                        p.expect_punct(":")?;
                    }
                    let mode = p.bump().clone();
                    self.program.execution_mode = match mode.text.as_str() {
                        "single" if mode.kind == TokenKind::Keyword => ExecutionMode::Single,
                        "concurrent" if mode.kind == TokenKind::Keyword => {
                            ExecutionMode::Concurrent
                        }
                        "sequential" if mode.kind == TokenKind::Keyword => {
                            ExecutionMode::Sequential
                        }
                        _ => {
                            p.i -= 1;
                            return Err(p.unexpected(&["single", "concurrent", "sequential"]));
                        }
                    };
                    if braced {
                        p.expect_punct("}")?;
                    }
                }
                "init" => {
                    p.bump();
                    let body = p.block()?;
                    if self.program.init_block.is_some() {
                        return Err(p.invalid_at(&tok, "duplicate init block"));
                    }
                    self.program.init_block = Some(body);
                }
                "define" => {
                    p.bump();
                    let pos = p.pos_of(&tok);
                    let name = p.expect_ident()?;
                    let body = p.block()?;
                    self.program.defines.push(DefineDecl { name, body, pos });
                }
                "main" => {
                    p.bump();
                    let body = p.block()?;
                    if self.program.main_block.is_some() {
                        return Err(p.invalid_at(&tok, "duplicate main block"));
                    }
                    self.program.main_block = Some(body);
                }
                _ => {
                    return Err(p.unexpected(&[
                        "include", "type", "interface", "inputPort", "outputPort", "execution",
                        "init", "define", "main",
                    ]))
                }
            }
        }
    }

    fn include(&mut self, from: &str, target: &str, at: &Token) -> Result<(), ParseError> {
        self.program.includes.push(target.to_owned());
        if is_console_include(target) {
            return Ok(());
        }
        let (canonical, tokens) = match self.loader.load(from, target) {
            Ok(loaded) => loaded,
            Err(LoadFailure::NotFound(reason)) => {
                return Err(IncludeError::Load {
                    from: from.to_owned(),
                    target: target.to_owned(),
                    reason,
                    line: at.line,
                    column: at.column,
                }
                .into())
            }
            Err(LoadFailure::Lex(path, error)) => {
                return Err(IncludeError::Lex { path, error }.into())
            }
        };
        if self.stack.contains(&canonical) {
            let mut chain = self.stack.clone();
            chain.push(canonical);
            return Err(IncludeError::Cycle {
                from: from.to_owned(),
                chain,
                line: at.line,
                column: at.column,
            }
            .into());
        }
        if self.loaded.contains(&canonical) {
            return Ok(());
        }
        let file = u16::try_from(self.program.sources.len()).map_err(|_| IncludeError::Load {
            from: from.to_owned(),
            target: target.to_owned(),
            reason: "too many included sources".into(),
            line: at.line,
            column: at.column,
        })?;
        self.program.sources.push(canonical.clone());
        self.loaded.push(canonical.clone());
        self.stack.push(canonical);
        let result = self.parse_file(&tokens, file);
        self.stack.pop();
        result
    }
}

struct Parser<'t> {
    toks: &'t [Token],
    i: usize,
    file: u16,
    name: String,
    eof: Token,
}

impl<'t> Parser<'t> {
    fn new(toks: &'t [Token], file: u16, name: &str) -> Self {
        let (line, column) = toks.last().map_or((1, 1), |t| (t.line, t.column));
        Parser {
            toks,
            i: 0,
            file,
            name: name.to_owned(),
            eof: Token {
                kind: TokenKind::EndOfInput,
                text: String::new(),
                line,
                column,
            },
        }
    }

    fn peek(&self) -> &Token {
        self.toks.get(self.i).unwrap_or(&self.eof)
    }

    fn peek_at(&self, n: usize) -> &Token {
        self.toks.get(self.i + n).unwrap_or(&self.eof)
    }

    fn bump(&mut self) -> &Token {
        let t = self.toks.get(self.i).unwrap_or(&self.eof);
        if self.i < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn pos_of(&self, t: &Token) -> Pos {
        Pos {
            file: self.file,
            line: t.line,
            column: t.column,
        }
    }

    fn pos(&self) -> Pos {
        self.pos_of(self.peek())
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        let t = self.peek();
        ParseError::Unexpected {
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: t.to_string(),
            file: self.name.clone(),
            line: t.line,
            column: t.column,
        }
    }

    fn invalid_at(&self, t: &Token, message: impl Into<String>) -> ParseError {
        ParseError::Invalid {
            message: message.into(),
            file: self.name.clone(),
            line: t.line,
            column: t.column,
        }
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.peek().is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_keyword(&mut self, k: &str) -> bool {
        if self.peek().is_keyword(k) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), ParseError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.unexpected(&[&format!("`{p}`")]))
        }
    }

    fn expect_keyword(&mut self, k: &str) -> Result<(), ParseError> {
        if self.eat_keyword(k) {
            Ok(())
        } else {
            Err(self.unexpected(&[&format!("`{k}`")]))
        }
    }

    fn expect_eof(&self) -> Result<(), ParseError> {
        if self.peek().is_eof() {
            Ok(())
        } else {
            Err(self.unexpected(&["end of input"]))
        }
    }

    fn expect_ident(&mut self) -> Result<String, ParseError> {
        if self.peek().kind == TokenKind::Identifier {
            Ok(self.bump().text.clone())
        } else {
            Err(self.unexpected(&["identifier"]))
        }
    }

    /// Member names after `.` may also be keywords.
    fn expect_member_name(&mut self) -> Result<String, ParseError> {
        if matches!(
            self.peek().kind,
            TokenKind::Identifier | TokenKind::Keyword
        ) {
            Ok(self.bump().text.clone())
        } else {
            Err(self.unexpected(&["member name"]))
        }
    }

    fn expect_string(&mut self) -> Result<String, ParseError> {
        if self.peek().kind == TokenKind::StringLiteral {
            Ok(self.bump().text.clone())
        } else {
            Err(self.unexpected(&["string literal"]))
        }
    }

    fn expect_u32(&mut self) -> Result<u32, ParseError> {
        let t = self.peek().clone();
        if t.kind == TokenKind::IntegerLiteral {
            self.bump();
            t.text
                .parse::<u32>()
                .map_err(|_| self.invalid_at(&t, format!("invalid cardinality bound {}", t.text)))
        } else {
            Err(self.unexpected(&["integer literal"]))
        }
    }

    /// A type reference in an operation signature or a match arm.
    fn type_name(&mut self) -> Result<String, ParseError> {
        let t = self.peek();
        let ok = t.kind == TokenKind::Identifier
            || (t.kind == TokenKind::Keyword
                && (NativeType::from_keyword(&t.text).is_some() || t.text == "undefined"));
        if ok {
            Ok(self.bump().text.clone())
        } else {
            Err(self.unexpected(&["type name"]))
        }
    }

    // ---- types -------------------------------------------------------

    fn type_definition(&mut self) -> Result<TypeDefinitionAst, ParseError> {
        let left = self.type_term()?;
        if self.eat_punct("|") {
            let right = self.type_definition()?;
            Ok(TypeDefinitionAst::choice(left, right))
        } else {
            Ok(left)
        }
    }

    fn type_term(&mut self) -> Result<TypeDefinitionAst, ParseError> {
        let t = self.peek().clone();
        if t.is_punct("(") {
            self.bump();
            let inner = self.type_definition()?;
            self.expect_punct(")")?;
            return Ok(inner);
        }
        if t.is_keyword("undefined") {
            self.bump();
            return Ok(TypeDefinitionAst::Undefined);
        }
        if t.kind == TokenKind::Identifier {
            self.bump();
            return Ok(TypeDefinitionAst::Link {
                pos: self.pos_of(&t),
                name: t.text,
            });
        }
        let Some(native) = NativeType::from_keyword(&t.text).filter(|_| t.kind == TokenKind::Keyword)
        else {
            return Err(self.unexpected(&["type"]));
        };
        self.bump();
        if !self.eat_punct("{") {
            return Ok(TypeDefinitionAst::Native(native));
        }
        if self.eat_punct("?") {
            self.expect_punct("}")?;
            return Ok(TypeDefinitionAst::UntypedSubnodes(native));
        }
        let mut subtypes = Vec::new();
        while self.peek().is_punct(".") {
            let dot = self.bump().clone();
            let name = self.expect_member_name()?;
            let cardinality = self.cardinality()?;
            self.expect_punct(":")?;
            let def = self.type_definition()?;
            subtypes.push(SubTypeAst {
                name,
                cardinality,
                def,
                pos: self.pos_of(&dot),
            });
        }
        if !self.eat_punct("}") {
            return Err(self.unexpected(&["`.`", "`}`"]));
        }
        Ok(TypeDefinitionAst::Inline { native, subtypes })
    }

    fn cardinality(&mut self) -> Result<Cardinality, ParseError> {
        if self.eat_punct("?") {
            return Ok(Cardinality::OPTIONAL);
        }
        if self.eat_punct("*") {
            return Ok(Cardinality::MANY);
        }
        if !self.eat_punct("[") {
            return Ok(Cardinality::ONE);
        }
        let min = self.expect_u32()?;
        self.expect_punct(",")?;
        let max = if self.eat_punct("*") {
            None
        } else {
            Some(self.expect_u32()?)
        };
        self.expect_punct("]")?;
        Ok(Cardinality { min, max })
    }

    // ---- deployment --------------------------------------------------

    fn interface(&mut self) -> Result<InterfaceDecl, ParseError> {
        let kw = self.bump().clone();
        let name = self.expect_ident()?;
        self.expect_punct("{")?;
        let mut decl = InterfaceDecl {
            name,
            request_response_ops: Vec::new(),
            one_way_ops: Vec::new(),
            pos: self.pos_of(&kw),
        };
        loop {
            if self.eat_punct("}") {
                return Ok(decl);
            }
            let request_response = if self.eat_keyword("RequestResponse") {
                true
            } else if self.eat_keyword("OneWay") {
                false
            } else {
                return Err(self.unexpected(&["RequestResponse", "OneWay", "`}`"]));
            };
            self.expect_punct(":")?;
            loop {
                let pos = self.pos();
                let op = self.expect_ident()?;
                self.expect_punct("(")?;
                let request_type = self.type_name()?;
                self.expect_punct(")")?;
                if request_response {
                    self.expect_punct("(")?;
                    let response_type = self.type_name()?;
                    self.expect_punct(")")?;
                    decl.request_response_ops.push(RequestResponseOp {
                        name: op,
                        request_type,
                        response_type,
                        pos,
                    });
                } else {
                    decl.one_way_ops.push(OneWayOp {
                        name: op,
                        request_type,
                        pos,
                    });
                }
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
    }

    fn port(&mut self, direction: PortDirection) -> Result<PortConfig, ParseError> {
        let kw = self.bump().clone();
        let name = self.expect_ident()?;
        self.expect_punct("{")?;
        let mut port = PortConfig {
            name,
            location: None,
            protocol: None,
            interfaces: Vec::new(),
            direction,
            pos: self.pos_of(&kw),
        };
        loop {
            if self.eat_punct("}") {
                return Ok(port);
            }
            if self.eat_keyword("Location") {
                self.expect_punct(":")?;
                port.location = Some(self.expect_string()?);
            } else if self.eat_keyword("Protocol") {
                self.expect_punct(":")?;
                let t = self.peek().clone();
                port.protocol = Some(match t.kind {
                    TokenKind::Identifier | TokenKind::StringLiteral => {
                        self.bump();
                        t.text
                    }
                    _ => return Err(self.unexpected(&["protocol name"])),
                });
            } else if self.eat_keyword("Interfaces") {
                self.expect_punct(":")?;
                loop {
                    port.interfaces.push(self.expect_ident()?);
                    if !self.eat_punct(",") {
                        break;
                    }
                }
            } else {
                return Err(self.unexpected(&["Location", "Protocol", "Interfaces", "`}`"]));
            }
        }
    }

    // ---- behavior ----------------------------------------------------

    fn block(&mut self) -> Result<ProcessAst, ParseError> {
        self.expect_punct("{")?;
        let body = self.process()?;
        self.expect_punct("}")?;
        Ok(body)
    }

    /// `seq ('|' seq)*`, left-associative. Sequence binds tighter.
    fn process(&mut self) -> Result<ProcessAst, ParseError> {
        let mut left = self.sequence()?;
        while self.eat_punct("|") {
            let right = self.sequence()?;
            left = ProcessAst::parallel(left, right);
        }
        Ok(left)
    }

    fn at_process_end(&self) -> bool {
        let t = self.peek();
        t.is_eof() || t.is_punct("}") || t.is_punct("]") || t.is_punct("|")
    }

    fn sequence(&mut self) -> Result<ProcessAst, ParseError> {
        if self.at_process_end() {
            return Ok(ProcessAst::Nil);
        }
        let mut items = vec![self.statement()?];
        while self.eat_punct(";") {
            // a trailing `;` before the end of a block is tolerated
            if self.at_process_end() {
                break;
            }
            items.push(self.statement()?);
        }
        Ok(if items.len() == 1 {
            items.pop().unwrap_or(ProcessAst::Nil)
        } else {
            ProcessAst::Sequence(items)
        })
    }

    fn statement(&mut self) -> Result<ProcessAst, ParseError> {
        let t = self.peek().clone();
        if t.is_punct("[") {
            return self.input_choice();
        }
        if t.is_punct("{") {
            return self.block();
        }
        if t.is_keyword("if") {
            return self.if_statement();
        }
        if t.is_keyword("match") {
            self.bump();
            let pos = self.pos_of(&t);
            self.expect_punct("(")?;
            let subject = self.var_path()?;
            self.expect_punct(")")?;
            let arms = self.match_arms()?;
            return Ok(ProcessAst::Match { subject, arms, pos });
        }
        if t.kind != TokenKind::Identifier {
            return Err(self.unexpected(&["statement"]));
        }
        let next = self.peek_at(1).clone();
        if t.text == "nullProcess" && !next.is_punct(".") && !next.is_punct("=") {
            self.bump();
            return Ok(ProcessAst::Nil);
        }
        if next.is_punct("@") {
            return self.output_statement();
        }
        if next.is_punct("(") {
            return Ok(match self.input_statement()? {
                InputStatementAst::OneWay(r) => ProcessAst::OneWayRecv(r),
                InputStatementAst::RequestResponse(r) => ProcessAst::RequestResponseRecv(r),
            });
        }
        let path = self.var_path()?;
        if self.eat_punct("=") {
            let expr = self.expr()?;
            return Ok(ProcessAst::assign(path, expr));
        }
        if self.peek().is_keyword("match") {
            let pos = self.pos();
            self.bump();
            let arms = self.match_arms()?;
            return Ok(ProcessAst::Match {
                subject: path,
                arms,
                pos,
            });
        }
        if path.segments.len() == 1 {
            return Ok(ProcessAst::CallDefine {
                pos: self.pos_of(&t),
                name: t.text,
            });
        }
        Err(self.unexpected(&["`=`", "`match`"]))
    }

    fn input_choice(&mut self) -> Result<ProcessAst, ParseError> {
        let mut branches = Vec::new();
        while self.eat_punct("[") {
            let guard = self.input_statement()?;
            self.expect_punct("]")?;
            let body = if self.peek().is_punct("{") {
                self.block()?
            } else {
                ProcessAst::Nil
            };
            branches.push(ChoiceBranch { guard, body });
        }
        Ok(ProcessAst::InputChoice(branches))
    }

    fn input_statement(&mut self) -> Result<InputStatementAst, ParseError> {
        let pos = self.pos();
        let op = self.expect_ident()?;
        self.expect_punct("(")?;
        let input = self.optional_path(")")?;
        if !self.eat_punct("(") {
            return Ok(InputStatementAst::OneWay(OneWayRecv {
                op,
                var: input,
                pos,
            }));
        }
        let output = self.optional_path(")")?;
        let body = if self.peek().is_punct("{") {
            self.block()?
        } else {
            ProcessAst::Nil
        };
        Ok(InputStatementAst::RequestResponse(RequestResponseRecv {
            op,
            input,
            output,
            body: Box::new(body),
            pos,
        }))
    }

    /// `path? close`
    fn optional_path(&mut self, close: &str) -> Result<Option<VarPath>, ParseError> {
        if self.eat_punct(close) {
            return Ok(None);
        }
        let path = self.var_path()?;
        self.expect_punct(close)?;
        Ok(Some(path))
    }

    fn output_statement(&mut self) -> Result<ProcessAst, ParseError> {
        let pos = self.pos();
        let op = self.expect_ident()?;
        self.expect_punct("@")?;
        let port = self.expect_ident()?;
        self.expect_punct("(")?;
        let arg = if self.eat_punct(")") {
            None
        } else {
            let e = self.expr()?;
            self.expect_punct(")")?;
            Some(e)
        };
        if !self.eat_punct("(") {
            return Ok(ProcessAst::Notification { op, port, arg, pos });
        }
        let result = self.optional_path(")")?;
        Ok(ProcessAst::SolicitResponse {
            op,
            port,
            arg,
            result,
            pos,
        })
    }

    fn if_statement(&mut self) -> Result<ProcessAst, ParseError> {
        self.expect_keyword("if")?;
        self.expect_punct("(")?;
        let cond = self.expr()?;
        self.expect_punct(")")?;
        let then = self.block()?;
        let otherwise = if self.eat_keyword("else") {
            if self.peek().is_keyword("if") {
                Some(Box::new(self.if_statement()?))
            } else {
                Some(Box::new(self.block()?))
            }
        } else {
            None
        };
        Ok(ProcessAst::If {
            cond,
            then: Box::new(then),
            otherwise,
        })
    }

    fn match_arms(&mut self) -> Result<Vec<MatchArm>, ParseError> {
        self.expect_punct("{")?;
        let mut arms = Vec::new();
        while !self.peek().is_punct("}") {
            let pos = self.pos();
            let type_name = self.type_name()?;
            let body = self.block()?;
            arms.push(MatchArm {
                type_name,
                body,
                pos,
            });
            self.eat_punct(";");
        }
        if arms.is_empty() {
            return Err(self.unexpected(&["match arm"]));
        }
        self.bump();
        Ok(arms)
    }

    fn var_path(&mut self) -> Result<VarPath, ParseError> {
        let pos = self.pos();
        let mut segments = vec![self.expect_ident()?];
        while self.eat_punct(".") {
            segments.push(self.expect_member_name()?);
        }
        Ok(VarPath { segments, pos })
    }

    // ---- expressions -------------------------------------------------

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.binary_level(0)
    }

    fn binary_level(&mut self, level: usize) -> Result<Expr, ParseError> {
        const LEVELS: &[&[(&str, BinaryOp)]] = &[
            &[("||", BinaryOp::Or)],
            &[("&&", BinaryOp::And)],
            &[
                ("==", BinaryOp::Eq),
                ("!=", BinaryOp::Ne),
                ("<", BinaryOp::Lt),
                ("<=", BinaryOp::Le),
                (">", BinaryOp::Gt),
                (">=", BinaryOp::Ge),
            ],
            &[("+", BinaryOp::Add), ("-", BinaryOp::Sub)],
            &[("*", BinaryOp::Mul), ("/", BinaryOp::Div), ("%", BinaryOp::Rem)],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary_level(level + 1)?;
        loop {
            let t = self.peek();
            let Some(&(_, op)) = LEVELS[level]
                .iter()
                .find(|(sym, _)| t.kind == TokenKind::Punctuation && t.text == *sym)
            else {
                return Ok(lhs);
            };
            let pos = self.pos();
            self.bump();
            let rhs = self.binary_level(level + 1)?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                pos,
            };
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat_punct("!") {
            return Ok(Expr::Unary(UnaryOp::Not, Box::new(self.unary()?)));
        }
        if self.peek().is_punct("-") {
            let next = self.peek_at(1).clone();
            if matches!(
                next.kind,
                TokenKind::IntegerLiteral | TokenKind::DoubleLiteral
            ) {
                self.bump();
                self.bump();
                return Ok(Expr::Literal(self.number(&next, true)?));
            }
            self.bump();
            return Ok(Expr::Unary(UnaryOp::Neg, Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn number(&self, t: &Token, negative: bool) -> Result<BasicValue, ParseError> {
        let sign = if negative { "-" } else { "" };
        if t.kind == TokenKind::DoubleLiteral {
            return format!("{sign}{}", t.text)
                .parse::<f64>()
                .map(BasicValue::Double)
                .map_err(|_| self.invalid_at(t, format!("invalid double literal {}", t.text)));
        }
        let out_of_range = || self.invalid_at(t, format!("integer literal {} out of range", t.text));
        if let Some(digits) = t.text.strip_suffix(['L', 'l']) {
            return format!("{sign}{digits}")
                .parse::<i64>()
                .map(BasicValue::Long)
                .map_err(|_| out_of_range());
        }
        let text = format!("{sign}{}", t.text);
        if let Ok(i) = text.parse::<i32>() {
            return Ok(BasicValue::Int(i));
        }
        text.parse::<i64>()
            .map(BasicValue::Long)
            .map_err(|_| out_of_range())
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let t = self.peek().clone();
        match t.kind {
            TokenKind::IntegerLiteral | TokenKind::DoubleLiteral => {
                self.bump();
                Ok(Expr::Literal(self.number(&t, false)?))
            }
            TokenKind::StringLiteral => {
                self.bump();
                Ok(Expr::Literal(BasicValue::Str(t.text)))
            }
            TokenKind::Punctuation if t.text == "(" => {
                self.bump();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            TokenKind::Identifier if t.text == "true" || t.text == "false" => {
                self.bump();
                Ok(Expr::Literal(BasicValue::Bool(t.text == "true")))
            }
            TokenKind::Identifier if t.text == "is_defined" && self.peek_at(1).is_punct("(") => {
                self.bump();
                self.bump();
                let path = self.var_path()?;
                self.expect_punct(")")?;
                Ok(Expr::IsDefined(path))
            }
            TokenKind::Identifier => Ok(Expr::Path(self.var_path()?)),
            _ => Err(self.unexpected(&["expression"])),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexer::tokenize;

    fn ty(src: &str) -> TypeDefinitionAst {
        parse_type_definition(&tokenize(src).unwrap()).unwrap()
    }

    fn process(src: &str) -> ProcessAst {
        parse_process(&tokenize(src).unwrap()).unwrap()
    }

    const CAR_RENT_INTERFACE: &str = r#"
        //Car rent interface
        type customer: void {
            .name: string
            .age: int
            .license: string
        }

        type car_return: void {
            .car_state: string
            .c?: customer
            .car_id: string
        }

        interface CarRentInterface {
            RequestResponse:
              get_car( customer )( string )
            RequestResponse:
              return_car( car_return )( string )
        }
    "#;

    #[test]
    fn car_rent_interface() {
        let p = parse_source(CAR_RENT_INTERFACE).unwrap();
        let names: Vec<_> = p.type_decls.iter().map(|t| t.name.as_str()).collect();
        assert_eq!(names, ["customer", "car_return"]);
        assert_eq!(p.interfaces.len(), 1);
        let iface = &p.interfaces[0];
        assert_eq!(iface.name, "CarRentInterface");
        let ops: Vec<_> = iface
            .request_response_ops
            .iter()
            .map(|o| (o.name.as_str(), o.request_type.as_str(), o.response_type.as_str()))
            .collect();
        assert_eq!(
            ops,
            [
                ("get_car", "customer", "string"),
                ("return_car", "car_return", "string")
            ]
        );
        assert!(p.main_block.is_none());
    }

    #[test]
    fn null_main() {
        let p = parse_source("main { nullProcess }").unwrap();
        assert_eq!(p.main_block, Some(ProcessAst::Nil));
    }

    #[test]
    fn request_choice_declaration() {
        let p = parse_source("type request: customer | car_return").unwrap();
        assert_eq!(
            p.type_decls[0].def,
            TypeDefinitionAst::choice(
                TypeDefinitionAst::link("customer"),
                TypeDefinitionAst::link("car_return")
            )
        );
    }

    #[test]
    fn native_choice() {
        assert_eq!(
            ty("int | long"),
            TypeDefinitionAst::choice(
                TypeDefinitionAst::Native(NativeType::Int),
                TypeDefinitionAst::Native(NativeType::Long)
            )
        );
    }

    #[test]
    fn inline_with_cardinalities() {
        assert_eq!(
            ty("void { .c?: customer .car_id: string }"),
            TypeDefinitionAst::Inline {
                native: NativeType::Void,
                subtypes: vec![
                    SubTypeAst {
                        name: "c".into(),
                        cardinality: Cardinality::new(0, Some(1)),
                        def: TypeDefinitionAst::link("customer"),
                        pos: Pos::default(),
                    },
                    SubTypeAst {
                        name: "car_id".into(),
                        cardinality: Cardinality::new(1, Some(1)),
                        def: TypeDefinitionAst::Native(NativeType::String),
                        pos: Pos::default(),
                    },
                ],
            }
        );
        let TypeDefinitionAst::Inline { subtypes, .. } =
            ty("any { .a*: int .b[2,5]: int .c[3,*]: int }")
        else {
            panic!("expected inline type");
        };
        let cards: Vec<_> = subtypes.iter().map(|s| s.cardinality).collect();
        assert_eq!(
            cards,
            [
                Cardinality::MANY,
                Cardinality::new(2, Some(5)),
                Cardinality::new(3, None)
            ]
        );
    }

    #[test]
    fn choice_is_right_associative() {
        use TypeDefinitionAst as T;
        let expected = T::choice(T::link("a"), T::choice(T::link("b"), T::link("c")));
        assert_eq!(ty("a | b | c"), expected);
        assert_ne!(
            ty("a | b | c"),
            T::choice(T::choice(T::link("a"), T::link("b")), T::link("c"))
        );
        // explicit grouping can still build a left-nested choice
        assert_eq!(
            ty("(a | b) | c"),
            T::choice(T::choice(T::link("a"), T::link("b")), T::link("c"))
        );
    }

    #[test]
    fn untyped_subnodes_and_undefined() {
        assert_eq!(
            ty("string { ? }"),
            TypeDefinitionAst::UntypedSubnodes(NativeType::String)
        );
        assert_eq!(ty("undefined"), TypeDefinitionAst::Undefined);
        assert_eq!(
            ty("void { .id: string | int }"),
            TypeDefinitionAst::Inline {
                native: NativeType::Void,
                subtypes: vec![SubTypeAst {
                    name: "id".into(),
                    cardinality: Cardinality::ONE,
                    def: TypeDefinitionAst::choice(
                        TypeDefinitionAst::Native(NativeType::String),
                        TypeDefinitionAst::Native(NativeType::Int)
                    ),
                    pos: Pos::default(),
                }],
            }
        );
    }

    #[test]
    fn malformed_types() {
        for src in ["void { .a }", "void { .a[1]: int }", "int |", "void { .a: int", "void { x }"] {
            assert!(
                parse_type_definition(&tokenize(src).unwrap()).is_err(),
                "{src} should not parse"
            );
        }
    }

    #[test]
    fn sequence_binds_tighter_than_parallel() {
        let p = process("a = 1; b = 2 | c = 3");
        let ProcessAst::Parallel(left, right) = p else {
            panic!("expected parallel");
        };
        assert!(matches!(*left, ProcessAst::Sequence(ref v) if v.len() == 2));
        assert!(matches!(*right, ProcessAst::Assign { .. }));
    }

    #[test]
    fn input_guarded_choice_both_forms() {
        let bracket_form = process(
            r#"[get_car( request )( response ){ response = "43535" }]
               [return_car( request )( response ){ response = "x" }]"#,
        );
        let ProcessAst::InputChoice(branches) = &bracket_form else {
            panic!("expected input choice");
        };
        assert_eq!(branches.len(), 2);
        assert_eq!(branches[1].guard.op(), "return_car");
        assert_eq!(branches[0].body, ProcessAst::Nil);

        let with_bodies = process("[ping(x)] { y = x } [stop()] { nullProcess }");
        let ProcessAst::InputChoice(branches) = &with_bodies else {
            panic!("expected input choice");
        };
        assert!(matches!(branches[0].guard, InputStatementAst::OneWay(_)));
        assert!(matches!(branches[0].body, ProcessAst::Assign { .. }));
    }

    #[test]
    fn communication_statements() {
        let p = process(
            r#"get_car@RentService( customer )( response );
               println@Console( "Car id is " + response )();
               log@Logger( x );
               ping( msg );
               op( a )( b ) { b = a }"#,
        );
        let ProcessAst::Sequence(items) = p else {
            panic!("expected sequence")
        };
        assert!(matches!(&items[0], ProcessAst::SolicitResponse { result: Some(r), .. } if r.segments == ["response"]));
        assert!(matches!(&items[1], ProcessAst::SolicitResponse { result: None, arg: Some(Expr::Binary { .. }), .. }));
        assert!(matches!(&items[2], ProcessAst::Notification { port, .. } if port == "Logger"));
        assert!(matches!(&items[3], ProcessAst::OneWayRecv(_)));
        assert!(matches!(&items[4], ProcessAst::RequestResponseRecv(_)));
    }

    #[test]
    fn match_forms() {
        let canonical = process(r#"match( request ) { customer { r = 1 } car_return { r = 2 } }"#);
        let postfix = process(r#"request match { customer { r = 1 }; car_return { r = 2 } }"#);
        assert_eq!(canonical, postfix);
        let ProcessAst::Match { subject, arms, .. } = canonical else {
            panic!("expected match");
        };
        assert_eq!(subject.segments, ["request"]);
        assert_eq!(arms.len(), 2);
        assert_eq!(arms[1].type_name, "car_return");
        assert!(parse_process(&tokenize("match(x) { }").unwrap()).is_err());
    }

    #[test]
    fn expressions() {
        let p = process(r#"x = "a" + 1 * 2 == 3 || !is_defined(y.z) && -4 < 5L"#);
        let ProcessAst::Assign { expr, .. } = p else {
            panic!()
        };
        let Expr::Binary { op: BinaryOp::Or, lhs, rhs, .. } = expr else {
            panic!("|| should be outermost")
        };
        assert!(matches!(*lhs, Expr::Binary { op: BinaryOp::Eq, .. }));
        let Expr::Binary { op: BinaryOp::And, lhs: l2, rhs: r2, .. } = *rhs else {
            panic!()
        };
        assert!(matches!(*l2, Expr::Unary(UnaryOp::Not, _)));
        let Expr::Binary { lhs: neg, rhs: long, .. } = *r2 else {
            panic!()
        };
        assert_eq!(*neg, Expr::Literal(BasicValue::Int(-4)));
        assert_eq!(*long, Expr::Literal(BasicValue::Long(5)));
    }

    #[test]
    fn integer_literal_ranges() {
        let lit = |src: &str| match process(&format!("x = {src}")) {
            ProcessAst::Assign { expr: Expr::Literal(v), .. } => v,
            other => panic!("{other:?}"),
        };
        assert_eq!(lit("-2147483648"), BasicValue::Int(i32::MIN));
        assert_eq!(lit("2147483648"), BasicValue::Long(2_147_483_648));
        assert_eq!(lit("1.5"), BasicValue::Double(1.5));
    }

    #[test]
    fn define_calls_and_if_else_chains() {
        let p = parse_source(
            "define f { x = 1 } main { f; if (x == 1) { f } else if (x == 2) { g } else { nullProcess } }",
        )
        .unwrap();
        assert_eq!(p.defines[0].name, "f");
        let Some(ProcessAst::Sequence(items)) = p.main_block else {
            panic!()
        };
        assert!(matches!(&items[0], ProcessAst::CallDefine { name, .. } if name == "f"));
        let ProcessAst::If { otherwise: Some(else_branch), .. } = &items[1] else {
            panic!()
        };
        assert!(matches!(**else_branch, ProcessAst::If { .. }));
    }

    #[test]
    fn ports_and_execution() {
        let p = parse_source(
            r#"inputPort RentService {
                 Location: "socket://localhost:2001"
                 Protocol: sodep
                 Interfaces: A, B
               }
               execution{ concurrent }
               main { nullProcess }"#,
        )
        .unwrap();
        let port = &p.input_ports[0];
        assert_eq!(port.location.as_deref(), Some("socket://localhost:2001"));
        assert_eq!(port.protocol.as_deref(), Some("sodep"));
        assert_eq!(port.interfaces, ["A", "B"]);
        assert_eq!(p.execution_mode, ExecutionMode::Concurrent);
    }

    #[test]
    fn parse_errors_report_expectations() {
        let err = parse_source("main { x = }").unwrap_err();
        match err {
            ParseError::Unexpected {
                expected,
                line,
                column,
                ..
            } => {
                assert_eq!(expected, ["expression"]);
                assert_eq!((line, column), (1, 12));
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_source("main { a } main { b }").is_err());
        assert!(parse_source("bogus").is_err());
    }

    #[test]
    fn includes_are_spliced_once_and_cycles_fail() {
        let mut loader = MemoryLoader::new([
            ("iface.iol", "type t: int"),
            ("a.iol", "include \"b.iol\""),
            ("b.iol", "include \"a.iol\""),
        ]);
        let tokens = tokenize(
            r#"include "iface.iol" include "iface.iol" include "console.iol" main { nullProcess }"#,
        )
        .unwrap();
        let p = parse_program_named("main.ol", &tokens, &mut loader).unwrap();
        assert_eq!(p.type_decls.len(), 1);
        assert_eq!(p.sources, ["main.ol", "iface.iol"]);
        assert_eq!(p.type_decls[0].pos.file, 1);
        assert!(p.uses_console());

        let tokens = tokenize(r#"include "a.iol""#).unwrap();
        let err = parse_program_named("main.ol", &tokens, &mut loader).unwrap_err();
        assert!(matches!(err, ParseError::Include(IncludeError::Cycle { .. })));

        let tokens = tokenize(r#"include "missing.iol""#).unwrap();
        let err = parse_program_named("main.ol", &tokens, &mut loader).unwrap_err();
        assert!(matches!(err, ParseError::Include(IncludeError::Load { .. })));
    }
}
