//! Session execution of the interpretation tree.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc;
use std::sync::{Arc, Condvar, Mutex, MutexGuard, PoisonError};
use std::time::Duration;

use super::expr::{eval_expr, truth};
use super::fault_names::*;
use super::router::{Inbound, ReplyFn, Router};
use super::tree::{Guard, Node, Path, ProcessTree};
use super::{Fault, Stats, MAX_CALL_DEPTH};
use crate::ast::{ExecutionMode, Expr, CONSOLE_PORT};
use crate::comm::{self, Location, Message, TraceFn};
use crate::console::{self, ConsoleSink};
use crate::typesys::{ResolvedType, TypeTable};
use crate::value::ValueTree;

/// Stack reserved for every session and parallel branch. Deep `define`
/// recursion needs far more than the platform default.
pub(crate) const SESSION_STACK: usize = 256 << 20;

pub(crate) struct OpSignature {
    pub request: ResolvedType,
    /// `None` for one-way operations.
    pub response: Option<ResolvedType>,
}

pub(crate) struct Session {
    pub id: u64,
    state: Mutex<ValueTree>,
    /// The message that opened the session, until the first receive takes it.
    initial: Mutex<Option<Inbound>>,
}

impl Session {
    fn state(&self) -> MutexGuard<'_, ValueTree> {
        self.state.lock().unwrap_or_else(PoisonError::into_inner)
    }

    pub fn into_state(self) -> ValueTree {
        self.state.into_inner().unwrap_or_else(PoisonError::into_inner)
    }
}

#[derive(Default)]
struct Counters {
    sessions: AtomicU64,
    branches: AtomicU64,
    ids: Mutex<Vec<u64>>,
    active: Mutex<usize>,
    idle: Condvar,
}

pub(crate) struct Engine {
    pub tree: ProcessTree,
    pub types: TypeTable,
    pub mode: ExecutionMode,
    pub inputs: HashMap<String, OpSignature>,
    pub outputs: HashMap<String, Location>,
    pub console: Option<Arc<dyn ConsoleSink>>,
    pub timeout: Duration,
    pub trace: Option<Arc<TraceFn>>,
    pub router: Router,
    /// Initial state of every session: what `init` left behind.
    pub template: Mutex<ValueTree>,
    /// Queue of session-opening messages in sequential mode.
    pub sequential: Mutex<Option<mpsc::Sender<Inbound>>>,
    next_id: AtomicU64,
    counters: Counters,
}

fn rejection(op: &str, name: &str, detail: String) -> Message {
    Message::fault(op, name, ValueTree::leaf(detail))
}

impl Engine {
    pub fn new(
        tree: ProcessTree,
        types: TypeTable,
        mode: ExecutionMode,
        inputs: HashMap<String, OpSignature>,
        outputs: HashMap<String, Location>,
    ) -> Engine {
        Engine {
            tree,
            types,
            mode,
            inputs,
            outputs,
            console: None,
            timeout: comm::DEFAULT_TIMEOUT,
            trace: None,
            router: Router::default(),
            template: Mutex::default(),
            sequential: Mutex::default(),
            next_id: AtomicU64::new(1),
            counters: Counters::default(),
        }
    }

    pub fn stats(&self) -> Stats {
        Stats {
            sessions_started: self.counters.sessions.load(Ordering::SeqCst),
            branch_executions: self.counters.branches.load(Ordering::SeqCst),
            session_ids: self.counters.ids.lock().unwrap().clone(),
        }
    }

    pub fn new_session(&self, initial: Option<Inbound>) -> Session {
        let id = self.next_id.fetch_add(1, Ordering::SeqCst);
        self.counters.sessions.fetch_add(1, Ordering::SeqCst);
        self.counters.ids.lock().unwrap().push(id);
        Session {
            id,
            state: Mutex::new(self.template.lock().unwrap().clone()),
            initial: Mutex::new(initial),
        }
    }

    /// State for the `init` block; not counted as a session.
    pub fn init_session(&self) -> Session {
        Session {
            id: 0,
            state: Mutex::new(ValueTree::new()),
            initial: Mutex::new(None),
        }
    }

    /// Runs `main` in a fresh session.
    pub fn run_session(&self, initial: Option<Inbound>) -> Result<(), Fault> {
        let s = self.new_session(initial);
        let r = self.exec(&self.tree.main, &s, 0);
        if let Err(f) = &r {
            log::warn!("session {} ended with fault {f}", s.id);
        }
        if let Some(left) = s.initial.lock().unwrap().take() {
            let op = left.msg.operation.clone();
            left.respond(rejection(&op, UNKNOWN_OPERATION, format!("`{op}` was not received")));
        }
        r
    }

    fn enter(&self) {
        *self.counters.active.lock().unwrap() += 1;
    }

    fn leave(&self) {
        let mut n = self.counters.active.lock().unwrap();
        *n -= 1;
        if *n == 0 {
            self.counters.idle.notify_all();
        }
    }

    /// Blocks until no spawned session is running.
    pub fn wait_idle(&self) {
        let mut n = self.counters.active.lock().unwrap();
        while *n > 0 {
            n = self.counters.idle.wait(n).unwrap();
        }
    }

    fn spawn_session(self: &Arc<Self>, initial: Inbound) {
        self.enter();
        let engine = Arc::clone(self);
        let spawned = std::thread::Builder::new()
            .name("session".into())
            .stack_size(SESSION_STACK)
            .spawn(move || {
                let _ = engine.run_session(Some(initial));
                engine.leave();
            });
        if let Err(e) = spawned {
            log::error!("cannot start session: {e}");
            self.leave();
        }
    }

    /// Entry point of every inbound message: signature check, then delivery
    /// to a waiting session or a new one.
    pub fn dispatch(self: &Arc<Self>, msg: Message, reply: Option<ReplyFn>) {
        let op = msg.operation.clone();
        let Some(sig) = self.inputs.get(&op) else {
            log::warn!("dropping message for unknown operation `{op}`");
            if let Some(r) = reply {
                r(rejection(&op, UNKNOWN_OPERATION, format!("operation `{op}` is not offered")));
            }
            return;
        };
        let reply = if sig.response.is_some() { reply } else { None };
        let verdict = self.types.conforms(&msg.payload, &sig.request);
        if !matches!(verdict, Ok(true)) {
            let detail = match verdict {
                Err(e) => e.to_string(),
                _ => format!("request of `{op}` does not match its declared type"),
            };
            match reply {
                Some(r) => r(rejection(&op, TYPE_MISMATCH, detail)),
                None => log::warn!("dropping one-way message: {detail}"),
            }
            return;
        }
        let opens = self.mode != ExecutionMode::Single && self.tree.starters.contains(&op);
        let Some(inbound) = self.router.route(Inbound { msg, reply }, opens) else {
            return;
        };
        match self.mode {
            ExecutionMode::Sequential => {
                let queue = self.sequential.lock().unwrap();
                let unsent = match queue.as_ref() {
                    Some(q) => q.send(inbound).err().map(|mpsc::SendError(i)| i),
                    None => Some(inbound),
                };
                if let Some(inbound) = unsent {
                    reject_closed(inbound);
                }
            }
            _ => self.spawn_session(inbound),
        }
    }

    fn receive(&self, s: &Session, ops: &[&str]) -> Result<Inbound, Fault> {
        {
            let mut initial = s.initial.lock().unwrap();
            if initial
                .as_ref()
                .is_some_and(|m| ops.contains(&m.msg.operation.as_str()))
            {
                return Ok(initial.take().unwrap());
            }
        }
        self.router
            .wait(ops)
            .ok_or_else(|| Fault::new(CHANNEL_CLOSED, "service is shutting down"))
    }

    pub fn exec(&self, node: &Node, s: &Session, depth: usize) -> Result<(), Fault> {
        match node {
            Node::Nil => Ok(()),
            Node::Sequence(items) => items.iter().try_for_each(|i| self.exec(i, s, depth)),
            Node::Parallel(l, r) => self.parallel(l, r, s, depth),
            Node::Receive(g) => {
                let inbound = self.receive(s, &[g.op()])?;
                self.run_guard(g, inbound, s, depth)
            }
            Node::Choice(branches) => {
                let ops: Vec<&str> = branches.iter().map(|(g, _)| g.op()).collect();
                let inbound = self.receive(s, &ops)?;
                let (guard, body) = branches
                    .iter()
                    .find(|(g, _)| g.op() == inbound.msg.operation)
                    .expect("router delivers only requested operations");
                self.counters.branches.fetch_add(1, Ordering::SeqCst);
                self.run_guard(guard, inbound, s, depth)?;
                self.exec(body, s, depth)
            }
            Node::Notify { op, port, arg } => self.notify(op, port, arg.as_ref(), s),
            Node::Solicit {
                op,
                port,
                arg,
                result,
            } => self.solicit(op, port, arg.as_ref(), result.as_ref(), s),
            Node::Assign { path, expr } => {
                let mut st = s.state();
                let v = eval_expr(expr, &st)?;
                st.get_path_mut(path).set_root(v);
                Ok(())
            }
            Node::If {
                cond,
                then,
                otherwise,
            } => {
                let c = truth(&eval_expr(cond, &s.state())?, "if")?;
                match (c, otherwise) {
                    (true, _) => self.exec(then, s, depth),
                    (false, Some(e)) => self.exec(e, s, depth),
                    (false, None) => Ok(()),
                }
            }
            Node::Match { subject, arms } => {
                let selected = {
                    let st = s.state();
                    let empty = ValueTree::new();
                    let value = st.get_path(subject).unwrap_or(&empty);
                    let mut found = None;
                    for (i, arm) in arms.iter().enumerate() {
                        if self.types.conforms(value, &arm.ty)? {
                            found = Some(i);
                            break;
                        }
                    }
                    found
                };
                match selected {
                    Some(i) => self.exec(&arms[i].body, s, depth),
                    None => Err(Fault::new(
                        TYPE_MISMATCH,
                        format!("no arm of the match on `{}` accepts its value", subject.join(".")),
                    )),
                }
            }
            Node::Call { name, index } => {
                if depth >= MAX_CALL_DEPTH {
                    return Err(Fault::new(
                        RECURSION_LIMIT,
                        format!("calling `{name}` exceeds {MAX_CALL_DEPTH} nested calls"),
                    ));
                }
                self.exec(self.tree.callee(*index), s, depth + 1)
            }
        }
    }

    fn parallel(&self, l: &Node, r: &Node, s: &Session, depth: usize) -> Result<(), Fault> {
        std::thread::scope(|scope| {
            let right = std::thread::Builder::new()
                .stack_size(SESSION_STACK)
                .spawn_scoped(scope, || self.exec(r, s, depth));
            let right = match right {
                Ok(h) => h,
                Err(e) => return Err(Fault::new("ThreadError", e.to_string())),
            };
            let left = self.exec(l, s, depth);
            let right = right
                .join()
                .unwrap_or_else(|_| Err(Fault::new("Panic", "parallel branch panicked")));
            left.and(right)
        })
    }

    #[inline(never)]
    fn run_guard(&self, g: &Guard, inbound: Inbound, s: &Session, depth: usize) -> Result<(), Fault> {
        let Inbound { msg, reply } = inbound;
        match g {
            Guard::OneWay { var, .. } => {
                if let Some(p) = var {
                    *s.state().get_path_mut(p) = msg.payload;
                }
                Ok(())
            }
            Guard::RequestResponse {
                op,
                input,
                output,
                body,
            } => {
                if let Some(p) = input {
                    *s.state().get_path_mut(p) = msg.payload;
                }
                let outcome = self.exec(body, s, depth);
                let answer = match &outcome {
                    Err(f) => Message::fault(op.as_str(), f.name.as_str(), f.detail.clone()),
                    Ok(()) => self.response(op, output.as_ref(), s),
                };
                if let Some(r) = reply {
                    r(answer);
                }
                outcome
            }
        }
    }

    fn response(&self, op: &str, output: Option<&Path>, s: &Session) -> Message {
        let value = output
            .and_then(|p| s.state().get_path(p).cloned())
            .unwrap_or_default();
        let Some(ty) = self.inputs.get(op).and_then(|sig| sig.response.as_ref()) else {
            return Message::new(op, value);
        };
        match self.types.conforms(&value, ty) {
            Ok(true) => Message::new(op, value),
            Ok(false) => {
                log::warn!("reply of `{op}` does not match its declared response type");
                rejection(op, TYPE_MISMATCH, format!("reply of `{op}` does not match its declared type"))
            }
            Err(e) => rejection(op, CYCLIC_TYPE, e.to_string()),
        }
    }

    fn outbound(&self, arg: Option<&Expr>, s: &Session) -> Result<ValueTree, Fault> {
        let st = s.state();
        Ok(match arg {
            None => ValueTree::new(),
            Some(Expr::Path(p)) => st.get_path(&p.segments).cloned().unwrap_or_default(),
            Some(e) => ValueTree::leaf(eval_expr(e, &st)?),
        })
    }

    fn location(&self, port: &str) -> Result<&Location, Fault> {
        self.outputs
            .get(port)
            .ok_or_else(|| Fault::new(UNKNOWN_OPERATION, format!("no output port `{port}`")))
    }

    fn console_call(&self, op: &str, port: &str, payload: &ValueTree) -> Option<Result<ValueTree, Fault>> {
        if port != CONSOLE_PORT {
            return None;
        }
        let sink = self.console.as_ref()?;
        Some(if op == console::PRINTLN {
            Ok(console::println(sink.as_ref(), payload))
        } else {
            Err(Fault::new(UNKNOWN_OPERATION, format!("Console has no operation `{op}`")))
        })
    }

    #[inline(never)]
    fn notify(&self, op: &str, port: &str, arg: Option<&Expr>, s: &Session) -> Result<(), Fault> {
        let payload = self.outbound(arg, s)?;
        if let Some(done) = self.console_call(op, port, &payload) {
            return done.map(drop);
        }
        let loc = self.location(port)?;
        comm::notify(loc, &Message::new(op, payload), self.timeout, self.trace.as_deref())?;
        Ok(())
    }

    #[inline(never)]
    fn solicit(
        &self,
        op: &str,
        port: &str,
        arg: Option<&Expr>,
        result: Option<&Path>,
        s: &Session,
    ) -> Result<(), Fault> {
        let payload = self.outbound(arg, s)?;
        let reply = match self.console_call(op, port, &payload) {
            Some(done) => done?,
            None => {
                let loc = self.location(port)?;
                let m = comm::solicit(loc, &Message::new(op, payload), self.timeout, self.trace.as_deref())?;
                if let Some(name) = m.fault {
                    return Err(Fault {
                        name,
                        detail: m.payload,
                    });
                }
                m.payload
            }
        };
        if let Some(p) = result {
            *s.state().get_path_mut(p) = reply;
        }
        Ok(())
    }
}

fn reject_closed(inbound: Inbound) {
    let op = inbound.msg.operation.clone();
    inbound.respond(rejection(&op, CHANNEL_CLOSED, "service is shutting down".into()));
}
