use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn mavaltk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mavaltk")).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn square_support_function_has_one_atom_of_mass_four() {
    let path = data("square_supportfn.json");
    let out = mavaltk(&["ma", "--json-in", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    let atoms = v["measure"]["atoms"].as_array().unwrap();
    assert_eq!(atoms.len(), 1);
    assert!((atoms[0]["re"].as_f64().unwrap() - 4.0).abs() < 1e-12);
    assert!(atoms[0]["x"].as_array().unwrap().iter().all(|c| c.as_f64().unwrap().abs() < 1e-12));
}

#[test]
fn klain_of_hessian_form_on_a_line_is_one() {
    let (form, frame) = (data("hessian_k1.json"), data("e1.json"));
    let out = mavaltk(&["klain", "--form", form.to_str().unwrap(), "--frame", frame.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    assert!((v - 1.0).abs() < 1e-12);
}

#[test]
fn klain_writes_json_when_asked() {
    let dir = std::env::temp_dir().join(format!("mavaltk-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let target = dir.join("klain.json");
    let (form, frame) = (data("hessian_k1.json"), data("e1.json"));
    let out = mavaltk(&[
        "klain",
        "--form",
        form.to_str().unwrap(),
        "--frame",
        frame.to_str().unwrap(),
        "--json-out",
        target.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&target).unwrap()).unwrap();
    assert!((v["re"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(v["im"].as_f64(), Some(0.0));
}

#[test]
fn hessian_of_quadratic_integrates_the_trace() {
    let path = data("quadratic.json");
    let out = mavaltk(&["hessian", "--k", "1", "--json-in", path.to_str().unwrap(), "--grid", "8", "--box", "-1:1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert!((v["total_mass"]["re"].as_f64().unwrap() - 12.0).abs() < 1e-10);
}

#[test]
fn mixed_ma_runs_on_a_pair() {
    let path = data("mixed_pair.json");
    let out = mavaltk(&["mixed-ma", "--json-in", path.to_str().unwrap(), "--grid", "8"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout_json(&out)["total_mass"]["re"].as_f64().unwrap() > 0.0);
}

#[test]
fn extract_density_of_ma_is_its_weight() {
    let out = mavaltk(&["extract-density", "--x", "0.1,-0.2", "--weight", "-2.5"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert!((v["value"]["re"].as_f64().unwrap() + 2.5).abs() < 1e-9);
    assert!(v["volume_ratio"].as_f64().unwrap() < 1.0);
}

#[test]
fn positivity_check_passes() {
    let out = mavaltk(&["check", "positivity", "--n", "2", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert!(!v["cases"].as_array().unwrap().is_empty());
}

#[test]
fn malformed_json_is_an_input_error() {
    let dir = std::env::temp_dir().join(format!("mavaltk-cli-bad-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.json");
    std::fs::write(&bad, "{\"pieces\": [").unwrap();
    let out = mavaltk(&["ma", "--json-in", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn input_errors_exit_with_two() {
    let square = data("square_supportfn.json");
    assert_eq!(mavaltk(&["ma"]).status.code(), Some(2));
    assert_eq!(mavaltk(&["ma", "--json-in", square.to_str().unwrap(), "--n", "3"]).status.code(), Some(2));
    assert_eq!(mavaltk(&["hessian", "--k", "1", "--json-in", square.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(mavaltk(&["check", "nonsense"]).status.code(), Some(2));
    assert_eq!(mavaltk(&["ma", "--json-in", square.to_str().unwrap(), "--box", "1:0"]).status.code(), Some(2));
}
