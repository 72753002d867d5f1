use serde_json::Value;

use twl_wasm::{generate_json, levels_json, summary_json, verify_json};

fn parse(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn generate_is_deterministic() {
    let a = generate_json(1, 3, 1, "lognormal", 2.0, 2.0, 2.0).unwrap();
    let b = generate_json(1, 3, 1, "lognormal", 2.0, 2.0, 2.0).unwrap();
    assert_eq!(a, b);
    assert_eq!(parse(&a)["sigma"].as_array().unwrap().len(), 8);
}

#[test]
fn bad_input_is_an_error() {
    assert!(generate_json(1, 3, 1, "flat", 2.0, 2.0, 2.0).is_err());
    assert!(generate_json(1, 3, 1, "uniform", 2.0, 3.0, 2.0).is_err());
    assert!(summary_json("{}").is_err());
}

#[test]
fn summary_and_levels() {
    let inst = generate_json(4, 3, 2, "uniform", 3.0, 2.0, 2.0).unwrap();
    let s = parse(&summary_json(&inst).unwrap());
    assert_eq!(s["tbar"].as_array().unwrap().len(), 64);
    let ratio = s["ratio"].as_f64().unwrap();
    assert!(ratio >= 1.0 - 1e-6, "{ratio}");
    let l = parse(&levels_json(&inst, 0.01).unwrap());
    assert!(!l["levels"].as_array().unwrap().is_empty());
    assert!(l["max_occurrence"].as_u64().unwrap() <= 106);
}

#[test]
fn verify_passes() {
    let inst = generate_json(2, 2, 1, "spiky", 2.5, 1.5, 3.0).unwrap();
    let v = parse(&verify_json(&inst, 0.01).unwrap());
    assert_eq!(v["pass"], Value::Bool(true), "{}", v["table"]);
}
