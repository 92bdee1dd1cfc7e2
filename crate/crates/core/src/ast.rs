//! Abstract syntax for programs: deployment declarations and behavior.

use std::fmt;

use crate::value::BasicValue;

/// Source position of a node: file index into [`AstProgram::sources`],
/// line and column.
///
/// Positions never take part in equality, so two ASTs parsed from
/// differently formatted text compare equal when their structure does.
#[derive(Debug, Clone, Copy, Default)]
pub struct Pos {
    pub file: u16,
    pub line: u32,
    pub column: u32,
}

impl PartialEq for Pos {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for Pos {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NativeType {
    Int,
    Long,
    Double,
    String,
    Raw,
    Void,
    Any,
}

impl NativeType {
    pub const ALL: [NativeType; 7] = [
        NativeType::Int,
        NativeType::Long,
        NativeType::Double,
        NativeType::String,
        NativeType::Raw,
        NativeType::Void,
        NativeType::Any,
    ];

    pub fn from_keyword(s: &str) -> Option<Self> {
        Some(match s {
            "int" => NativeType::Int,
            "long" => NativeType::Long,
            "double" => NativeType::Double,
            "string" => NativeType::String,
            "raw" => NativeType::Raw,
            "void" => NativeType::Void,
            "any" => NativeType::Any,
            _ => return None,
        })
    }

    pub fn keyword(self) -> &'static str {
        match self {
            NativeType::Int => "int",
            NativeType::Long => "long",
            NativeType::Double => "double",
            NativeType::String => "string",
            NativeType::Raw => "raw",
            NativeType::Void => "void",
            NativeType::Any => "any",
        }
    }
}

impl fmt::Display for NativeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// Allowed occurrence count of a named child. `max == None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cardinality {
    pub min: u32,
    pub max: Option<u32>,
}

impl Cardinality {
    /// No cardinality written: exactly one.
    pub const ONE: Cardinality = Cardinality { min: 1, max: Some(1) };
    /// `?`
    pub const OPTIONAL: Cardinality = Cardinality { min: 0, max: Some(1) };
    /// `*`
    pub const MANY: Cardinality = Cardinality { min: 0, max: None };

    pub fn new(min: u32, max: Option<u32>) -> Self {
        Cardinality { min, max }
    }

    pub fn is_well_formed(&self) -> bool {
        self.max.is_none_or(|max| self.min <= max)
    }
}

impl Default for Cardinality {
    fn default() -> Self {
        Cardinality::ONE
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypeDefinitionAst {
    Native(NativeType),
    Inline {
        native: NativeType,
        subtypes: Vec<SubTypeAst>,
    },
    /// `native { ? }`
    UntypedSubnodes(NativeType),
    Link {
        name: String,
        pos: Pos,
    },
    Undefined,
    Choice(Box<TypeDefinitionAst>, Box<TypeDefinitionAst>),
}

impl TypeDefinitionAst {
    pub fn link(name: impl Into<String>) -> Self {
        TypeDefinitionAst::Link {
            name: name.into(),
            pos: Pos::default(),
        }
    }

    pub fn choice(left: TypeDefinitionAst, right: TypeDefinitionAst) -> Self {
        TypeDefinitionAst::Choice(Box::new(left), Box::new(right))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubTypeAst {
    pub name: String,
    pub cardinality: Cardinality,
    pub def: TypeDefinitionAst,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeDecl {
    pub name: String,
    pub def: TypeDefinitionAst,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestResponseOp {
    pub name: String,
    pub request_type: String,
    pub response_type: String,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OneWayOp {
    pub name: String,
    pub request_type: String,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterfaceDecl {
    pub name: String,
    pub request_response_ops: Vec<RequestResponseOp>,
    pub one_way_ops: Vec<OneWayOp>,
    pub pos: Pos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PortDirection {
    Input,
    Output,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortConfig {
    pub name: String,
    pub location: Option<String>,
    pub protocol: Option<String>,
    pub interfaces: Vec<String>,
    pub direction: PortDirection,
    pub pos: Pos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecutionMode {
    #[default]
    Single,
    Concurrent,
    Sequential,
}

impl ExecutionMode {
    pub fn keyword(self) -> &'static str {
        match self {
            ExecutionMode::Single => "single",
            ExecutionMode::Concurrent => "concurrent",
            ExecutionMode::Sequential => "sequential",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarPath {
    pub segments: Vec<String>,
    pub pos: Pos,
}

impl VarPath {
    pub fn new<S: Into<String>>(segments: impl IntoIterator<Item = S>) -> Self {
        VarPath {
            segments: segments.into_iter().map(Into::into).collect(),
            pos: Pos::default(),
        }
    }
}

impl fmt::Display for VarPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.segments.join("."))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Rem => "%",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::And => "&&",
            BinaryOp::Or => "||",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Literal(BasicValue),
    Path(VarPath),
    IsDefined(VarPath),
    Unary(UnaryOp, Box<Expr>),
    Binary {
        op: BinaryOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
        pos: Pos,
    },
}

impl Expr {
    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
            pos: Pos::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OneWayRecv {
    pub op: String,
    pub var: Option<VarPath>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RequestResponseRecv {
    pub op: String,
    pub input: Option<VarPath>,
    pub output: Option<VarPath>,
    pub body: Box<ProcessAst>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputStatementAst {
    OneWay(OneWayRecv),
    RequestResponse(RequestResponseRecv),
}

impl InputStatementAst {
    pub fn op(&self) -> &str {
        match self {
            InputStatementAst::OneWay(r) => &r.op,
            InputStatementAst::RequestResponse(r) => &r.op,
        }
    }

    pub fn pos(&self) -> Pos {
        match self {
            InputStatementAst::OneWay(r) => r.pos,
            InputStatementAst::RequestResponse(r) => r.pos,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceBranch {
    pub guard: InputStatementAst,
    pub body: ProcessAst,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchArm {
    pub type_name: String,
    pub body: ProcessAst,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProcessAst {
    Sequence(Vec<ProcessAst>),
    Parallel(Box<ProcessAst>, Box<ProcessAst>),
    InputChoice(Vec<ChoiceBranch>),
    OneWayRecv(OneWayRecv),
    RequestResponseRecv(RequestResponseRecv),
    Notification {
        op: String,
        port: String,
        arg: Option<Expr>,
        pos: Pos,
    },
    SolicitResponse {
        op: String,
        port: String,
        arg: Option<Expr>,
        result: Option<VarPath>,
        pos: Pos,
    },
    Assign {
        path: VarPath,
        expr: Expr,
    },
    If {
        cond: Expr,
        then: Box<ProcessAst>,
        otherwise: Option<Box<ProcessAst>>,
    },
    Match {
        subject: VarPath,
        arms: Vec<MatchArm>,
        pos: Pos,
    },
    CallDefine {
        name: String,
        pos: Pos,
    },
    Nil,
}

impl ProcessAst {
    pub fn parallel(left: ProcessAst, right: ProcessAst) -> Self {
        ProcessAst::Parallel(Box::new(left), Box::new(right))
    }

    pub fn assign(path: VarPath, expr: Expr) -> Self {
        ProcessAst::Assign { path, expr }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefineDecl {
    pub name: String,
    pub body: ProcessAst,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AstProgram {
    /// Source names indexed by [`Pos::file`]; the root file is index 0.
    pub sources: Vec<String>,
    pub includes: Vec<String>,
    pub type_decls: Vec<TypeDecl>,
    pub interfaces: Vec<InterfaceDecl>,
    pub input_ports: Vec<PortConfig>,
    pub output_ports: Vec<PortConfig>,
    pub execution_mode: ExecutionMode,
    pub init_block: Option<ProcessAst>,
    pub defines: Vec<DefineDecl>,
    pub main_block: Option<ProcessAst>,
}

/// Include target that is served by the built-in console instead of a file.
pub const CONSOLE_INCLUDE: &str = "console.iol";
/// Output port name the console is registered under.
pub const CONSOLE_PORT: &str = "Console";

impl AstProgram {
    pub fn type_decl(&self, name: &str) -> Option<&TypeDecl> {
        self.type_decls.iter().find(|t| t.name == name)
    }

    pub fn interface(&self, name: &str) -> Option<&InterfaceDecl> {
        self.interfaces.iter().find(|i| i.name == name)
    }

    pub fn define(&self, name: &str) -> Option<&DefineDecl> {
        self.defines.iter().find(|d| d.name == name)
    }

    pub fn output_port(&self, name: &str) -> Option<&PortConfig> {
        self.output_ports.iter().find(|p| p.name == name)
    }

    pub fn uses_console(&self) -> bool {
        self.includes.iter().any(|i| is_console_include(i))
    }

    pub fn source_name(&self, pos: Pos) -> &str {
        self.sources
            .get(pos.file as usize)
            .map_or("<input>", String::as_str)
    }
}

pub fn is_console_include(path: &str) -> bool {
    std::path::Path::new(path)
        .file_name()
        .is_some_and(|f| f == CONSOLE_INCLUDE)
}
