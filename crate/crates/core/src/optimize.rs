//! Tree simplification run between parsing and verification.

use crate::ast::{AstProgram, ChoiceBranch, InputStatementAst, MatchArm, ProcessAst};

/// Splices nested sequences into their parent and drops `Nil` items.
/// A sequence left with no items becomes `Nil`. Idempotent.
pub fn optimize_process(p: ProcessAst) -> ProcessAst {
    match p {
        ProcessAst::Sequence(items) => {
            let mut flat = Vec::with_capacity(items.len());
            for item in items {
                match optimize_process(item) {
                    ProcessAst::Nil => {}
                    ProcessAst::Sequence(inner) => flat.extend(inner),
                    other => flat.push(other),
                }
            }
            if flat.is_empty() {
                ProcessAst::Nil
            } else {
                ProcessAst::Sequence(flat)
            }
        }
        ProcessAst::Parallel(l, r) => {
            ProcessAst::parallel(optimize_process(*l), optimize_process(*r))
        }
        ProcessAst::InputChoice(branches) => ProcessAst::InputChoice(
            branches
                .into_iter()
                .map(|b| ChoiceBranch {
                    guard: optimize_guard(b.guard),
                    body: optimize_process(b.body),
                })
                .collect(),
        ),
        ProcessAst::RequestResponseRecv(mut r) => {
            r.body = Box::new(optimize_process(*r.body));
            ProcessAst::RequestResponseRecv(r)
        }
        ProcessAst::If {
            cond,
            then,
            otherwise,
        } => ProcessAst::If {
            cond,
            then: Box::new(optimize_process(*then)),
            otherwise: otherwise.map(|e| Box::new(optimize_process(*e))),
        },
        ProcessAst::Match { subject, arms, pos } => ProcessAst::Match {
            subject,
            arms: arms
                .into_iter()
                .map(|a| MatchArm {
                    body: optimize_process(a.body),
                    ..a
                })
                .collect(),
            pos,
        },
        leaf => leaf,
    }
}

fn optimize_guard(g: InputStatementAst) -> InputStatementAst {
    match g {
        InputStatementAst::RequestResponse(mut r) => {
            r.body = Box::new(optimize_process(*r.body));
            InputStatementAst::RequestResponse(r)
        }
        one_way => one_way,
    }
}

pub fn optimize_ast(mut program: AstProgram) -> AstProgram {
    program.init_block = program.init_block.map(optimize_process);
    program.main_block = program.main_block.map(optimize_process);
    for d in &mut program.defines {
        d.body = optimize_process(std::mem::replace(&mut d.body, ProcessAst::Nil));
    }
    program
}
