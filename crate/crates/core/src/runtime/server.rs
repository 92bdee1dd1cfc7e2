//! Starting programs: init, port binding and execution modes.

use std::collections::HashMap;
use std::sync::mpsc;
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;

use super::exec::{Engine, OpSignature, SESSION_STACK};
use super::router::{Inbound, ReplyFn};
use super::tree::{build_process_tree, ProcessTree};
use super::{Fault, RunConfig, RuntimeError};
use crate::ast::{AstProgram, ExecutionMode, PortConfig};
use crate::comm::{listen, Channel, Listener, Location, Message, TraceDir};
use crate::typesys::{resolve_decls, TypeError, TypeTable};

/// Counters of a running service.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stats {
    pub sessions_started: u64,
    /// Input-choice branches taken, over all sessions.
    pub branch_executions: u64,
    pub session_ids: Vec<u64>,
}

/// An executable program.
pub struct Interpreter {
    engine: Arc<Engine>,
    input_ports: Vec<(String, Location)>,
}

fn port_location(
    port: &PortConfig,
    overrides: &HashMap<String, String>,
) -> Result<Location, RuntimeError> {
    let text = overrides
        .get(&port.name)
        .or(port.location.as_ref())
        .ok_or_else(|| RuntimeError::MissingLocation {
            port: port.name.clone(),
        })?;
    Location::parse(text).map_err(|error| RuntimeError::Location {
        port: port.name.clone(),
        error,
    })
}

fn lookup(types: &TypeTable, name: &str) -> Result<crate::typesys::ResolvedType, TypeError> {
    types
        .lookup(name)
        .ok_or_else(|| TypeError::UnresolvedLink(name.to_owned()))
}

impl Interpreter {
    /// Prepares a program that passed verification.
    pub fn new(program: &AstProgram, config: RunConfig) -> Result<Interpreter, RuntimeError> {
        let types = resolve_decls(&program.type_decls)?;
        let tree = build_process_tree(program, &types)?;
        let overrides = &config.location_overrides;
        if let Some(unknown) = overrides.keys().find(|name| {
            !program
                .input_ports
                .iter()
                .chain(&program.output_ports)
                .any(|p| &p.name == *name)
        }) {
            return Err(RuntimeError::UnknownPort(unknown.clone()));
        }

        let mut inputs = HashMap::new();
        let mut input_ports = Vec::new();
        for port in &program.input_ports {
            input_ports.push((port.name.clone(), port_location(port, overrides)?));
            for iface in port.interfaces.iter().filter_map(|i| program.interface(i)) {
                for op in &iface.request_response_ops {
                    inputs.insert(
                        op.name.clone(),
                        OpSignature {
                            request: lookup(&types, &op.request_type)?,
                            response: Some(lookup(&types, &op.response_type)?),
                        },
                    );
                }
                for op in &iface.one_way_ops {
                    inputs.insert(
                        op.name.clone(),
                        OpSignature {
                            request: lookup(&types, &op.request_type)?,
                            response: None,
                        },
                    );
                }
            }
        }
        let mut outputs = HashMap::new();
        for port in &program.output_ports {
            outputs.insert(port.name.clone(), port_location(port, overrides)?);
        }

        let mut engine = Engine::new(tree, types, program.execution_mode, inputs, outputs);
        engine.timeout = config.timeout;
        engine.trace = config.trace;
        if program.uses_console() {
            engine.console = Some(config.console);
        }
        Ok(Interpreter {
            engine: Arc::new(engine),
            input_ports,
        })
    }

    pub fn tree(&self) -> &ProcessTree {
        &self.engine.tree
    }

    pub fn types(&self) -> &TypeTable {
        &self.engine.types
    }

    /// Delivers a message without a network connection. `reply` receives
    /// the answer of a request-response operation or a fault.
    pub fn dispatch(&self, msg: Message, reply: impl FnOnce(Message) + Send + 'static) {
        self.engine.dispatch(msg, Some(Box::new(reply)));
    }

    /// Runs `init`, binds the input ports and starts executing.
    pub fn start(&self) -> Result<ServerHandle, RuntimeError> {
        let engine = Arc::clone(&self.engine);
        if engine.tree.init.is_some() {
            let e = Arc::clone(&engine);
            let state = std::thread::Builder::new()
                .name("init".into())
                .stack_size(SESSION_STACK)
                .spawn(move || {
                    let s = e.init_session();
                    e.exec(e.tree.init.as_ref().unwrap(), &s, 0)?;
                    Ok(s.into_state())
                })?
                .join()
                .unwrap_or_else(|_| Err(Fault::new("Panic", "init panicked")))
                .map_err(|fault| RuntimeError::Fault {
                    block: "init",
                    fault,
                })?;
            *engine.template.lock().unwrap() = state;
        }

        let mut handle = ServerHandle {
            engine: Arc::clone(&engine),
            listeners: Vec::new(),
            main: None,
            worker: None,
            stop: Arc::new((Mutex::new(false), Condvar::new())),
            finished: false,
        };

        if engine.mode == ExecutionMode::Sequential {
            let (tx, rx) = mpsc::channel::<Inbound>();
            *engine.sequential.lock().unwrap() = Some(tx);
            let e = Arc::clone(&engine);
            handle.worker = Some(
                std::thread::Builder::new()
                    .name("sequential".into())
                    .stack_size(SESSION_STACK)
                    .spawn(move || {
                        for inbound in rx {
                            let _ = e.run_session(Some(inbound));
                        }
                    })?,
            );
        }

        for (name, loc) in &self.input_ports {
            let e = Arc::clone(&engine);
            let listener = listen(loc, move |ch| serve_connection(&e, ch))
                .map_err(RuntimeError::Bind)?;
            handle.listeners.push((name.clone(), listener));
        }

        if engine.mode == ExecutionMode::Single {
            let e = Arc::clone(&engine);
            handle.main = Some(
                std::thread::Builder::new()
                    .name("main".into())
                    .stack_size(SESSION_STACK)
                    .spawn(move || e.run_session(None))?,
            );
        }
        Ok(handle)
    }

    /// Starts and blocks until the program is done.
    pub fn run(&self) -> Result<(), RuntimeError> {
        self.start()?.wait()
    }
}

fn serve_connection(engine: &Arc<Engine>, mut ch: Channel) {
    let sender = ch.sender();
    loop {
        let msg = match ch.receive() {
            Ok(Some((msg, bytes))) => {
                if let Some(t) = &engine.trace {
                    t(TraceDir::In, &msg, bytes);
                }
                msg
            }
            Ok(None) => break,
            Err(e) => {
                log::warn!("closing connection: {e}");
                ch.close();
                break;
            }
        };
        let sender = sender.clone();
        let trace = engine.trace.clone();
        let reply: ReplyFn = Box::new(move |m: Message| match sender.send(&m) {
            Ok(bytes) => {
                if let Some(t) = &trace {
                    t(TraceDir::Out, &m, bytes);
                }
            }
            Err(e) => log::warn!("cannot send reply of `{}`: {e}", m.operation),
        });
        engine.dispatch(msg, Some(reply));
    }
}

/// Requests a running service to stop; usable from any thread.
#[derive(Clone)]
pub struct Stopper {
    stop: Arc<(Mutex<bool>, Condvar)>,
}

impl Stopper {
    pub fn stop(&self) {
        *self.stop.0.lock().unwrap() = true;
        self.stop.1.notify_all();
    }
}

/// A started program.
pub struct ServerHandle {
    engine: Arc<Engine>,
    listeners: Vec<(String, Listener)>,
    main: Option<JoinHandle<Result<(), Fault>>>,
    worker: Option<JoinHandle<()>>,
    stop: Arc<(Mutex<bool>, Condvar)>,
    finished: bool,
}

impl ServerHandle {
    /// Input port names with their bound locations.
    pub fn bound(&self) -> Vec<(String, Location)> {
        self.listeners
            .iter()
            .map(|(n, l)| (n.clone(), l.location().clone()))
            .collect()
    }

    pub fn location(&self, port: &str) -> Option<Location> {
        self.listeners
            .iter()
            .find(|(n, _)| n == port)
            .map(|(_, l)| l.location().clone())
    }

    pub fn stats(&self) -> Stats {
        self.engine.stats()
    }

    pub fn stopper(&self) -> Stopper {
        Stopper {
            stop: Arc::clone(&self.stop),
        }
    }

    /// Blocks until `main` completes (single mode) or a stop is requested
    /// (concurrent and sequential modes), then shuts down.
    pub fn wait(mut self) -> Result<(), RuntimeError> {
        let result = match self.main.take() {
            Some(main) => main
                .join()
                .unwrap_or_else(|_| Err(Fault::new("Panic", "main panicked"))),
            None => {
                let (flag, cv) = &*self.stop;
                let mut stopped = flag.lock().unwrap();
                while !*stopped {
                    stopped = cv.wait(stopped).unwrap();
                }
                Ok(())
            }
        };
        self.finish();
        result.map_err(|fault| RuntimeError::Fault {
            block: "main",
            fault,
        })
    }

    /// Stops accepting, wakes blocked sessions and waits for all of them.
    pub fn shutdown(mut self) {
        self.finish();
    }

    fn finish(&mut self) {
        if self.finished {
            return;
        }
        self.finished = true;
        self.stopper().stop();
        for (_, l) in &mut self.listeners {
            l.shutdown();
        }
        self.engine.router.close();
        self.engine.sequential.lock().unwrap().take();
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
        self.engine.wait_idle();
        if let Some(m) = self.main.take() {
            let _ = m.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.finish();
    }
}
