//! Generators and reference checks shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::{mpsc, Arc};
use std::time::Duration;

use olive::ast::{Cardinality, NativeType};
use olive::comm::TraceFn;
use olive::console::CapturedConsole;
use olive::parser::NoIncludes;
use olive::semantics::has_errors;
use olive::{
    load_file, load_source, verify_program, AstProgram, BasicValue, Interpreter, Message,
    ResolvedType, RunConfig, ServerHandle, ValueTree,
};
use proptest::prelude::*;
use proptest::strategy::ValueTree as _;
use proptest::test_runner::TestRunner;

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn corpus(name: &str) -> PathBuf {
    corpus_dir().join(name)
}

/// Parses a self-contained program and insists it verifies.
pub fn program(src: &str) -> AstProgram {
    let p = load_source("<test>", src, &mut NoIncludes).unwrap_or_else(|e| panic!("{e}"));
    assert_verified(&p);
    p
}

pub fn corpus_program(name: &str) -> AstProgram {
    let p = load_file(&corpus(name)).unwrap_or_else(|e| panic!("{e}"));
    assert_verified(&p);
    p
}

fn assert_verified(p: &AstProgram) {
    let diags = verify_program(p);
    assert!(
        !has_errors(&diags),
        "{}",
        diags.iter().map(|d| d.render(p)).collect::<Vec<_>>().join("\n")
    );
}

/// A started server with every input port on an ephemeral port.
pub struct Service {
    pub interpreter: Interpreter,
    pub handle: ServerHandle,
    pub console: Arc<CapturedConsole>,
}

pub fn serve(program: &AstProgram) -> Service {
    let console = Arc::new(CapturedConsole::new());
    let config = RunConfig {
        location_overrides: program
            .input_ports
            .iter()
            .map(|p| (p.name.clone(), "socket://localhost:0".to_owned()))
            .collect(),
        console: console.clone(),
        ..RunConfig::default()
    };
    let interpreter = Interpreter::new(program, config).unwrap();
    let handle = interpreter.start().unwrap();
    Service {
        interpreter,
        handle,
        console,
    }
}

impl Service {
    /// In-process request; waits at most ten seconds for the reply.
    pub fn call(&self, op: &str, payload: ValueTree) -> Message {
        let (tx, rx) = mpsc::channel();
        self.interpreter.dispatch(Message::new(op, payload), move |m| {
            let _ = tx.send(m);
        });
        rx.recv_timeout(Duration::from_secs(10))
            .unwrap_or_else(|_| panic!("no reply to `{op}`"))
    }

    pub fn location(&self, port: &str) -> String {
        self.handle.location(port).unwrap().to_string()
    }
}

/// Runs a client program to completion with its output ports redirected.
pub fn run_client(program: &AstProgram, ports: &[(&str, String)]) -> (Result<(), olive::RuntimeError>, Vec<String>) {
    run_client_traced(program, ports, None)
}

pub fn run_client_traced(
    program: &AstProgram,
    ports: &[(&str, String)],
    trace: Option<Arc<TraceFn>>,
) -> (Result<(), olive::RuntimeError>, Vec<String>) {
    let console = Arc::new(CapturedConsole::new());
    let config = RunConfig {
        location_overrides: ports
            .iter()
            .map(|(n, l)| (n.to_string(), l.clone()))
            .collect::<HashMap<_, _>>(),
        console: console.clone(),
        timeout: Duration::from_secs(10),
        trace,
    };
    let result = Interpreter::new(program, config).and_then(|i| i.run());
    (result, console.lines())
}

/// Draws one value from `s`.
pub fn sample<S: Strategy>(s: &S, runner: &mut TestRunner) -> S::Value {
    s.new_tree(runner).expect("strategy rejected its input").current()
}

pub fn basic_value() -> impl Strategy<Value = BasicValue> {
    prop_oneof![
        Just(BasicValue::Empty),
        any::<i32>().prop_map(BasicValue::Int),
        any::<i64>().prop_map(BasicValue::Long),
        prop::num::f64::NORMAL
            .prop_union(prop::num::f64::ZERO)
            .or(prop::num::f64::SUBNORMAL)
            .prop_map(BasicValue::Double),
        any::<String>().prop_map(BasicValue::Str),
        any::<bool>().prop_map(BasicValue::Bool),
        prop::collection::vec(any::<u8>(), 0..16).prop_map(BasicValue::Bytes),
    ]
}

pub const CHILD_NAMES: [&str; 5] = ["a", "b", "id", "name", "car_state"];

fn child_name() -> impl Strategy<Value = String> {
    prop_oneof![
        prop::sample::select(&CHILD_NAMES[..]).prop_map(String::from),
        "[a-zA-Z_][a-zA-Z0-9_-]{0,8}",
    ]
}

pub fn value_tree() -> impl Strategy<Value = ValueTree> {
    let leaf = basic_value().prop_map(ValueTree::leaf);
    leaf.prop_recursive(4, 48, 4, |inner| {
        (
            basic_value(),
            prop::collection::btree_map(child_name(), prop::collection::vec(inner, 1..4), 0..4),
        )
            .prop_map(|(root, children)| {
                let mut t = ValueTree::leaf(root);
                for (name, list) in children {
                    t.set_children(name, list);
                }
                t
            })
    })
}

pub fn message() -> impl Strategy<Value = Message> {
    (
        "[a-z_][a-zA-Z0-9_]{0,12}",
        prop_oneof![Just("/".to_string()), "/[a-z/]{0,10}"],
        value_tree(),
        prop::option::of("[A-Za-z]{1,12}"),
    )
        .prop_map(|(operation, resource, payload, fault)| Message {
            resource,
            operation,
            payload,
            fault,
        })
}

fn native() -> impl Strategy<Value = NativeType> {
    prop::sample::select(&NativeType::ALL[..])
}

fn cardinality() -> impl Strategy<Value = Cardinality> {
    prop_oneof![
        Just(Cardinality::ONE),
        Just(Cardinality::OPTIONAL),
        Just(Cardinality::MANY),
        (0u32..3, 0u32..3).prop_map(|(min, extra)| Cardinality::new(min, Some(min + extra))),
        (0u32..3).prop_map(|min| Cardinality::new(min, None)),
    ]
}

/// Types without references. Depth counts type nodes, so `depth(4)`
/// never exceeds [`ResolvedType::depth`] 4.
pub fn resolved_type(depth: u32) -> BoxedStrategy<ResolvedType> {
    let leaf = prop_oneof![
        native().prop_map(ResolvedType::Basic),
        native().prop_map(ResolvedType::OpenTree),
    ];
    if depth <= 1 {
        return leaf.boxed();
    }
    let inner = resolved_type(depth - 1);
    prop_oneof![
        2 => leaf,
        3 => (inner.clone(), inner.clone()).prop_map(|(a, b)| ResolvedType::choice(a, b)),
        3 => (
            native(),
            prop::collection::btree_map(
                prop::sample::select(&CHILD_NAMES[..3]).prop_map(String::from),
                (cardinality(), inner),
                0..3,
            ),
        )
            .prop_map(|(n, subs)| ResolvedType::Tree(n, subs)),
    ]
    .boxed()
}

fn root_for(n: NativeType) -> BoxedStrategy<BasicValue> {
    match n {
        NativeType::Int => any::<i32>().prop_map(BasicValue::Int).boxed(),
        NativeType::Long => any::<i64>().prop_map(BasicValue::Long).boxed(),
        NativeType::Double => (-1e6f64..1e6).prop_map(BasicValue::Double).boxed(),
        NativeType::String => "[a-z]{0,4}".prop_map(BasicValue::Str).boxed(),
        NativeType::Raw => prop::collection::vec(any::<u8>(), 0..4)
            .prop_map(BasicValue::Bytes)
            .boxed(),
        NativeType::Void => Just(BasicValue::Empty).boxed(),
        NativeType::Any => prop_oneof![
            any::<i32>().prop_map(BasicValue::Int),
            any::<bool>().prop_map(BasicValue::Bool),
            "[a-z]{1,3}".prop_map(BasicValue::Str),
        ]
        .boxed(),
    }
}

/// Values shaped after `ty`: they conform most of the time, and the random
/// deviations (wrong roots, counts, stray children) hit the boundaries.
pub fn value_near(ty: &ResolvedType) -> BoxedStrategy<ValueTree> {
    let stray = (basic_value(), prop::bool::weighted(0.1));
    match ty {
        ResolvedType::Basic(n) | ResolvedType::OpenTree(n) => {
            let open = matches!(ty, ResolvedType::OpenTree(_));
            (root_for(*n), stray, prop::bool::weighted(if open { 0.5 } else { 0.1 }))
                .prop_map(|(root, (odd, flip), extra)| {
                    let mut t = ValueTree::leaf(if flip { odd } else { root });
                    if extra {
                        t.push_child("x", ValueTree::new());
                    }
                    t
                })
                .boxed()
        }
        ResolvedType::Choice(a, b) => prop_oneof![value_near(a), value_near(b)].boxed(),
        ResolvedType::Tree(n, subs) => {
            let kids: Vec<BoxedStrategy<(String, Vec<ValueTree>)>> = subs
                .iter()
                .map(|(name, (card, t))| {
                    let lo = card.min as usize;
                    let hi = card.max.map_or(lo + 3, |m| m as usize);
                    // occasionally one outside the allowed range
                    let count = prop_oneof![
                        9 => lo..=hi,
                        1 => Just(hi + 1),
                        1 => Just(lo.saturating_sub(1)),
                    ];
                    let name = name.clone();
                    let child = value_near(t);
                    count
                        .prop_flat_map(move |k| prop::collection::vec(child.clone(), k))
                        .prop_map(move |list| (name.clone(), list))
                        .boxed()
                })
                .collect();
            (root_for(*n), stray, kids, prop::bool::weighted(0.1))
                .prop_map(|(root, (odd, flip), kids, extra)| {
                    let mut t = ValueTree::leaf(if flip { odd } else { root });
                    for (name, list) in kids {
                        t.set_children(name, list);
                    }
                    if extra {
                        t.push_child("stray", ValueTree::new());
                    }
                    t
                })
                .boxed()
        }
        ResolvedType::Ref(_) => unreachable!("generated types have no references"),
    }
}

/// Reference conformance for reference-free types, written directly from
/// the typing rules and sharing no code with the library.
pub fn oracle_conforms(v: &ValueTree, ty: &ResolvedType) -> bool {
    fn root_ok(n: NativeType, root: &BasicValue) -> bool {
        match (n, root) {
            (NativeType::Any, r) => *r != BasicValue::Empty,
            (NativeType::Void, r) => *r == BasicValue::Empty,
            (NativeType::Int, BasicValue::Int(_))
            | (NativeType::Long, BasicValue::Long(_))
            | (NativeType::Double, BasicValue::Double(_))
            | (NativeType::String, BasicValue::Str(_))
            | (NativeType::Raw, BasicValue::Bytes(_)) => true,
            _ => false,
        }
    }
    match ty {
        ResolvedType::Basic(n) => root_ok(*n, v.root()) && v.children().is_empty(),
        ResolvedType::OpenTree(n) => root_ok(*n, v.root()),
        ResolvedType::Choice(a, b) => oracle_conforms(v, a) || oracle_conforms(v, b),
        ResolvedType::Tree(n, subs) => {
            root_ok(*n, v.root())
                && v.children().keys().all(|k| subs.contains_key(k))
                && subs.iter().all(|(name, (card, t))| {
                    let list = v.child_list(name);
                    let n = list.len() as u64;
                    n >= card.min as u64
                        && card.max.is_none_or(|m| n <= m as u64)
                        && list.iter().all(|c| oracle_conforms(c, t))
                })
        }
        ResolvedType::Ref(_) => unreachable!("generated types have no references"),
    }
}

/// Builds `void { name: int }`-style record types for hand-written cases.
pub fn record(fields: &[(&str, Cardinality, ResolvedType)]) -> ResolvedType {
    ResolvedType::Tree(
        NativeType::Void,
        fields
            .iter()
            .map(|(n, c, t)| (n.to_string(), (*c, t.clone())))
            .collect::<BTreeMap<_, _>>(),
    )
}
