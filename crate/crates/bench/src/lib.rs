//! Inputs shared by the benchmarks.

use olive::ast::{Cardinality, NativeType};
use olive::{Message, ResolvedType, ValueTree};
use std::collections::BTreeMap;

/// The data-driven car rental server, interface inlined.
pub const CAR_RENT_SERVER: &str = r#"
include "console.iol"

type customer: void { .name: string .age: int .license: string }
type car_return: void { .car_state: string .car_id: string }
type request: customer | car_return

interface CarRentInterface {
  RequestResponse: process(request)(string)
}

inputPort RentService {
  Location: "socket://localhost:2002"
  Protocol: sodep
  Interfaces: CarRentInterface
}

execution { concurrent }

main {
  process(request)(response) {
    match (request) {
      customer {
        println@Console("customer " + request.name)();
        response = "43535"
      }
      car_return {
        if (request.car_state == "damaged") {
          response = "Car is damaged!"
        } else {
          response = "Car is ok!"
        }
      }
    }
  }
}
"#;

pub fn customer() -> ValueTree {
    ValueTree::new()
        .with_child("name", "John Smith".into())
        .with_child("age", 25.into())
        .with_child("license", "B".into())
}

pub fn car_return() -> ValueTree {
    ValueTree::new()
        .with_child("car_state", "damaged".into())
        .with_child("car_id", "43535".into())
}

/// Right-nested choice of `arms` record types; only the last accepts
/// [`choice_probe`].
pub fn wide_choice(arms: usize) -> ResolvedType {
    let record = |field: String| {
        ResolvedType::Tree(
            NativeType::Void,
            BTreeMap::from([(field, (Cardinality::ONE, ResolvedType::Basic(NativeType::Int)))]),
        )
    };
    (0..arms)
        .rev()
        .map(|i| record(format!("f{i}")))
        .reduce(|acc, t| ResolvedType::choice(t, acc))
        .expect("at least one arm")
}

pub fn choice_probe(arms: usize) -> ValueTree {
    ValueTree::new().with_child(format!("f{}", arms - 1), 1.into())
}

/// A `width`-ary tree of string leaves, `depth` levels deep.
pub fn bushy_tree(width: usize, depth: usize) -> ValueTree {
    let mut t = ValueTree::leaf("node");
    if depth > 0 {
        for i in 0..width {
            t.push_child(format!("c{i}"), bushy_tree(width, depth - 1));
        }
    }
    t
}

pub fn bushy_message(width: usize, depth: usize) -> Message {
    Message::new("process", bushy_tree(width, depth))
}
