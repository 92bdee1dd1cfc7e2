//! The executable tree built from a verified program.

use std::collections::HashMap;

use thiserror::Error;

use crate::ast::{AstProgram, Expr, InputStatementAst, ProcessAst, VarPath};
use crate::typesys::{ResolvedType, TypeTable};

pub type Path = Vec<String>;

#[derive(Debug, Clone, PartialEq)]
pub enum Guard {
    OneWay {
        op: String,
        var: Option<Path>,
    },
    RequestResponse {
        op: String,
        input: Option<Path>,
        output: Option<Path>,
        body: Box<Node>,
    },
}

impl Guard {
    pub fn op(&self) -> &str {
        match self {
            Guard::OneWay { op, .. } | Guard::RequestResponse { op, .. } => op,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arm {
    pub type_name: String,
    pub ty: ResolvedType,
    pub body: Node,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Nil,
    Sequence(Vec<Node>),
    Parallel(Box<Node>, Box<Node>),
    Receive(Guard),
    Choice(Vec<(Guard, Node)>),
    Notify {
        op: String,
        port: String,
        arg: Option<Expr>,
    },
    Solicit {
        op: String,
        port: String,
        arg: Option<Expr>,
        result: Option<Path>,
    },
    Assign {
        path: Path,
        expr: Expr,
    },
    If {
        cond: Expr,
        then: Box<Node>,
        otherwise: Option<Box<Node>>,
    },
    Match {
        subject: Path,
        arms: Vec<Arm>,
    },
    /// Call of `defines[index]`.
    Call {
        name: String,
        index: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessTree {
    pub init: Option<Node>,
    pub main: Node,
    pub defines: Vec<(String, Node)>,
    /// Operations that can open a new session: the guards main starts with.
    pub starters: Vec<String>,
}

impl ProcessTree {
    /// Body a `Call` node refers to.
    pub fn callee(&self, index: usize) -> &Node {
        &self.defines[index].1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BuildError {
    #[error("define `{0}` does not exist")]
    UnknownDefine(String),
    #[error("match arm type `{0}` is not defined")]
    UnknownType(String),
}

/// Operations of the input statement(s) a process begins with.
pub fn starting_operations(p: &ProcessAst) -> Vec<&str> {
    match p {
        ProcessAst::Sequence(items) => items.first().map(starting_operations).unwrap_or_default(),
        ProcessAst::InputChoice(branches) => branches.iter().map(|b| b.guard.op()).collect(),
        ProcessAst::OneWayRecv(r) => vec![r.op.as_str()],
        ProcessAst::RequestResponseRecv(r) => vec![r.op.as_str()],
        _ => Vec::new(),
    }
}

struct Builder<'a> {
    types: &'a TypeTable,
    defines: HashMap<&'a str, usize>,
}

fn path(p: &VarPath) -> Path {
    p.segments.clone()
}

impl Builder<'_> {
    fn guard(&self, g: &InputStatementAst) -> Result<Guard, BuildError> {
        Ok(match g {
            InputStatementAst::OneWay(r) => Guard::OneWay {
                op: r.op.clone(),
                var: r.var.as_ref().map(path),
            },
            InputStatementAst::RequestResponse(r) => Guard::RequestResponse {
                op: r.op.clone(),
                input: r.input.as_ref().map(path),
                output: r.output.as_ref().map(path),
                body: Box::new(self.node(&r.body)?),
            },
        })
    }

    fn node(&self, p: &ProcessAst) -> Result<Node, BuildError> {
        Ok(match p {
            ProcessAst::Nil => Node::Nil,
            ProcessAst::Sequence(items) => Node::Sequence(
                items.iter().map(|i| self.node(i)).collect::<Result<_, _>>()?,
            ),
            ProcessAst::Parallel(l, r) => {
                Node::Parallel(Box::new(self.node(l)?), Box::new(self.node(r)?))
            }
            ProcessAst::InputChoice(branches) => Node::Choice(
                branches
                    .iter()
                    .map(|b| Ok((self.guard(&b.guard)?, self.node(&b.body)?)))
                    .collect::<Result<_, _>>()?,
            ),
            ProcessAst::OneWayRecv(r) => {
                Node::Receive(self.guard(&InputStatementAst::OneWay(r.clone()))?)
            }
            ProcessAst::RequestResponseRecv(r) => {
                Node::Receive(self.guard(&InputStatementAst::RequestResponse(r.clone()))?)
            }
            ProcessAst::Notification { op, port, arg, .. } => Node::Notify {
                op: op.clone(),
                port: port.clone(),
                arg: arg.clone(),
            },
            ProcessAst::SolicitResponse {
                op,
                port,
                arg,
                result,
                ..
            } => Node::Solicit {
                op: op.clone(),
                port: port.clone(),
                arg: arg.clone(),
                result: result.as_ref().map(path),
            },
            ProcessAst::Assign { path: p, expr } => Node::Assign {
                path: path(p),
                expr: expr.clone(),
            },
            ProcessAst::If {
                cond,
                then,
                otherwise,
            } => Node::If {
                cond: cond.clone(),
                then: Box::new(self.node(then)?),
                otherwise: match otherwise {
                    Some(e) => Some(Box::new(self.node(e)?)),
                    None => None,
                },
            },
            ProcessAst::Match { subject, arms, .. } => Node::Match {
                subject: path(subject),
                arms: arms
                    .iter()
                    .map(|a| {
                        Ok(Arm {
                            type_name: a.type_name.clone(),
                            ty: self
                                .types
                                .lookup(&a.type_name)
                                .ok_or_else(|| BuildError::UnknownType(a.type_name.clone()))?,
                            body: self.node(&a.body)?,
                        })
                    })
                    .collect::<Result<_, BuildError>>()?,
            },
            ProcessAst::CallDefine { name, .. } => Node::Call {
                name: name.clone(),
                index: *self
                    .defines
                    .get(name.as_str())
                    .ok_or_else(|| BuildError::UnknownDefine(name.clone()))?,
            },
        })
    }
}

pub fn build_process_tree(
    program: &AstProgram,
    types: &TypeTable,
) -> Result<ProcessTree, BuildError> {
    let mut defines = HashMap::new();
    for (i, d) in program.defines.iter().enumerate() {
        defines.entry(d.name.as_str()).or_insert(i);
    }
    let b = Builder { types, defines };
    let main = match &program.main_block {
        Some(m) => b.node(m)?,
        None => Node::Nil,
    };
    Ok(ProcessTree {
        init: program.init_block.as_ref().map(|p| b.node(p)).transpose()?,
        main,
        defines: program
            .defines
            .iter()
            .map(|d| Ok((d.name.clone(), b.node(&d.body)?)))
            .collect::<Result<_, BuildError>>()?,
        starters: program
            .main_block
            .as_ref()
            .map(|m| starting_operations(m).into_iter().map(String::from).collect())
            .unwrap_or_default(),
    })
}
