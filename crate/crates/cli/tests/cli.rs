use std::process::{Command, Output};

use outfn::moves::MoveKind;
use outfn::train_track::replay;
use outfn::TopRep;
use serde_json::Value;

fn outfn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_outfn")).args(args).output().expect("binary runs")
}

fn json_of(args: &[&str]) -> (Value, i32) {
    let out = outfn(args);
    let doc = serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)));
    (doc, out.status.code().unwrap())
}

#[test]
fn analyze_fibonacci() {
    let (doc, code) = json_of(&["analyze", "fib", "--json"]);
    assert_eq!(code, 0);
    assert_eq!(doc["status"], "complete");
    let stratum = &doc["result"]["representative"]["strata"][0];
    assert_eq!(stratum["class"], "EG");
    let lambda = stratum["lambda"].as_f64().unwrap();
    assert!((lambda - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-9);
    assert_eq!(doc["result"]["growth"]["upg"], false);
    assert!(doc["certificates"].is_object());
    let z = &doc["result"]["lamination"]["z"];
    assert_eq!(z["rho"].as_str().unwrap().len(), 4);
}

#[test]
fn growth_of_upg() {
    let (doc, code) = json_of(&["growth", "upg", "--json"]);
    assert_eq!(code, 0);
    assert_eq!(doc["result"]["upg"], true);
    assert_eq!(doc["result"]["pg"], true);
    assert_eq!(doc["result"]["unipotent"], true);
    assert_eq!(doc["result"]["mod3_trivial"], false);
}

#[test]
fn attraction_verdicts() {
    let (doc, code) = json_of(&["attract", "fib", "--circuit", "a", "--json"]);
    assert_eq!(code, 0);
    assert_eq!(doc["result"]["verdict"]["verdict"], "attracted");
    assert!(doc["result"]["verdict"]["k"].as_u64().is_some());
    let (doc, _) = json_of(&["attract", "fib", "--circuit", "abAB", "--json"]);
    assert_eq!(doc["result"]["verdict"]["verdict"], "in_groupoid");
    assert_eq!(doc["result"]["attracted"], false);
}

#[test]
fn certificates_replay() {
    let (doc, code) = json_of(&["rtt", "fib-twisted", "--json"]);
    assert_eq!(code, 0);
    let log: Vec<MoveKind> = serde_json::from_value(doc["certificates"]["moves"].clone()).unwrap();
    assert!(!log.is_empty());
    let phi = outfn::fixtures::fib_twisted();
    let start = TopRep::from_automorphism(&phi).unwrap();
    let end = replay(&start, &log).unwrap();
    let images: Vec<String> = doc["result"]["representative"]["edges"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["image"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(images.len(), end.edge_count());
    assert!(end.check_rtt().ok());
    let witnesses: Vec<outfn::moves::MoveWitness> = serde_json::from_value(doc["certificates"]["witnesses"].clone()).unwrap();
    assert!(witnesses.iter().all(|w| w.check().is_ok()));
}

#[test]
fn improvement_checklist() {
    let (doc, code) = json_of(&["rtt", "fib", "--improve", "--max-iterate", "4", "--json"]);
    assert_eq!(code, 0);
    let improved = &doc["result"]["improved"];
    assert_eq!(improved["iterate"], 2);
    assert_eq!(improved["eigenvalues_preserved"], true);
    let names: Vec<&str> = improved["checklist"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"eg-(i)"));
}

#[test]
fn exhausted_budgets_exit_two() {
    let (doc, code) = json_of(&["rtt", "fib-twisted", "--max-length", "2", "--json"]);
    assert_eq!(code, 2);
    assert_eq!(doc["status"], "partial");
    assert_eq!(doc["result"]["train_track"], "unknown");
    let (doc, code) = json_of(&["analyze", "fib-twisted", "--max-length", "2", "--json"]);
    assert_eq!(code, 2);
    for k in ["improved", "nielsen", "growth", "lamination"] {
        assert_eq!(doc["result"][k], "unknown", "{k}");
    }
    let (doc, code) = json_of(&["nielsen", "fib", "--budget", "1", "--json"]);
    assert_eq!(code, 2);
    assert_eq!(doc["result"]["nielsen"][0]["elements"]["rest"], "unknown");
}

#[test]
fn input_errors() {
    let out = outfn(&["growth", "gens: a; a -> a a"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not an automorphism"));
    let out = outfn(&["growth", "gens: a b; a -> b; b -> c"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("column"), "{err}");
    let out = outfn(&["growth", "no-such-fixture"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn dot_and_tiles() {
    let dir = std::env::temp_dir().join(format!("outfn-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("w.dot");
    let (doc, code) = json_of(&["tiles", "rank3", "--depth", "4", "--dot", path.to_str().unwrap(), "--json"]);
    assert_eq!(code, 0);
    assert_eq!(doc["result"]["counts_match_matrix"], true);
    let dot = std::fs::read_to_string(&path).unwrap();
    assert!(dot.starts_with("digraph") && dot.contains("crossings"));
    let freq: Vec<f64> = serde_json::from_value(doc["result"]["frequencies"].clone()).unwrap();
    assert!((freq.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn factors_and_pingpong() {
    let (doc, code) = json_of(&["factor", "upg", "--system", "a,b", "--meet", "b,c", "--json"]);
    assert_eq!(code, 0);
    assert_eq!(doc["result"]["system"]["invariant"], true);
    assert_eq!(doc["result"]["meet"]["complexity"], "1");
    let (doc, code) = json_of(&["pingpong", "fib", "--other", "gens: a b; a -> a b; b -> b", "--json"]);
    assert_eq!(code, 0);
    assert_eq!(doc["result"]["certificate"]["result"], "certificate");
    let (doc, code) = json_of(&["pingpong", "fib", "--other", "fib", "--json"]);
    assert_eq!(code, 2);
    assert_eq!(doc["result"]["free_rank_two"], "unknown");
}

#[test]
fn random_inputs_are_seeded() {
    let a = outfn(&["growth", "random", "--seed", "9", "--json"]);
    let b = outfn(&["growth", "random", "--seed", "9", "--json"]);
    assert_eq!(a.stdout, b.stdout);
    assert!(matches!(a.status.code(), Some(0) | Some(2)));
}
