//! The example programs under `corpus/`.

mod common;

use common::{corpus, corpus_program};
use olive::parser::NoIncludes;
use olive::printer::print_program;
use olive::runtime::{build_process_tree, Guard, Node};
use olive::{check_file, load_source, resolve_decls, Severity};

const PROGRAMS: [&str; 6] = [
    "server_process.ol",
    "server_data.ol",
    "client_process.ol",
    "client_data.ol",
    "client.ol",
    "choice_server.ol",
];

#[test]
fn every_program_verifies_without_errors() {
    for name in PROGRAMS {
        let (program, diags) = check_file(&corpus(name)).unwrap();
        for d in &diags {
            assert_eq!(d.severity, Severity::Warning, "{name}: {}", d.render(&program));
            assert!(d.message.contains("sodep"), "{name}: {}", d.render(&program));
        }
    }
}

#[test]
fn choice_server_has_no_diagnostics() {
    let (_, diags) = check_file(&corpus("choice_server.ol")).unwrap();
    assert!(diags.is_empty(), "{diags:?}");
}

#[test]
fn duplicate_type_is_reported_once() {
    let path = corpus("invalid/dup_types.ol");
    let (program, diags) = check_file(&path).unwrap();
    assert_eq!(diags.len(), 1);
    let d = &diags[0];
    assert_eq!(d.severity, Severity::Error);
    let line = d.render(&program);
    assert!(line.starts_with("error: "), "{line}");
    assert!(line.contains("dup_types.ol:5:1: "), "{line}");
    assert!(line.contains("customer"), "{line}");
}

#[test]
fn data_driven_server_builds_a_match_inside_process() {
    let program = corpus_program("server_data.ol");
    let types = resolve_decls(&program.type_decls).unwrap();
    let tree = build_process_tree(&program, &types).unwrap();
    let Node::Receive(Guard::RequestResponse { op, body, .. }) = &tree.main else {
        panic!("unexpected main: {:?}", tree.main);
    };
    assert_eq!(op, "process");
    let Node::Match { subject, arms } = body.as_ref() else {
        panic!("unexpected body: {body:?}");
    };
    assert_eq!(subject, &["request"]);
    let names: Vec<_> = arms.iter().map(|a| a.type_name.as_str()).collect();
    assert_eq!(names, ["customer", "car_return"]);
    assert_eq!(arms[0].ty, types.lookup("customer").unwrap());
}

#[test]
fn process_driven_server_builds_a_two_branch_choice() {
    let program = corpus_program("server_process.ol");
    let types = resolve_decls(&program.type_decls).unwrap();
    let tree = build_process_tree(&program, &types).unwrap();
    let Node::Choice(branches) = &tree.main else {
        panic!("unexpected main: {:?}", tree.main);
    };
    let ops: Vec<_> = branches.iter().map(|(g, _)| g.op()).collect();
    assert_eq!(ops, ["get_car", "return_car"]);
}

#[test]
fn printed_programs_reparse_to_the_same_tree() {
    for name in PROGRAMS {
        let program = corpus_program(name);
        let printed = print_program(&program);
        let again = load_source("<printed>", &printed, &mut NoIncludes)
            .unwrap_or_else(|e| panic!("{name}: {e}\n{printed}"));
        assert_eq!(again.type_decls, program.type_decls, "{name}");
        assert_eq!(again.interfaces, program.interfaces, "{name}");
        assert_eq!(again.input_ports, program.input_ports, "{name}");
        assert_eq!(again.output_ports, program.output_ports, "{name}");
        assert_eq!(again.execution_mode, program.execution_mode, "{name}");
        assert_eq!(again.defines, program.defines, "{name}");
        assert_eq!(again.init_block, program.init_block, "{name}");
        assert_eq!(again.main_block, program.main_block, "{name}");
    }
}
