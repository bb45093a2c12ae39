use std::path::PathBuf;
use std::process::Command;

use heatinv::cli::{run, Outcome};
use serde_json::Value;

fn heatinv(args: &[&str]) -> Outcome {
    run(std::iter::once("heatinv").chain(args.iter().copied()))
}

fn json_of(args: &[&str]) -> Value {
    let mut full = args.to_vec();
    full.extend(["--format", "json"]);
    let out = heatinv(&full);
    assert_eq!(out.code, 0, "{args:?}: {}", out.stderr);
    serde_json::from_str(&out.stdout).unwrap()
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../schemas").join(name);
    let text = std::fs::read_to_string(&path).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

fn assert_valid(schema_name: &str, doc: &Value) {
    let v = schema(schema_name);
    let errors: Vec<String> = v.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{schema_name}: {errors:?}\n{doc:#}");
}

fn densities(doc: &Value) -> Vec<String> {
    doc["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["density"].as_str().unwrap().to_string())
        .collect()
}

#[test]
fn local_examples() {
    let doc = json_of(&["local", "--dim", "1", "--order", "2"]);
    assert_valid("local.schema.json", &doc);
    assert_eq!(densities(&doc), ["-V", "1/2*V^2 - 1/6*D[2]V"]);
    assert!(doc["rows"].as_array().unwrap().iter().all(|r| r["routes_agree"] == true));

    let doc = json_of(&["local", "--dim", "3", "--order", "1"]);
    assert_eq!(densities(&doc), ["-V"]);

    let out = heatinv(&["local", "--dim", "1", "--order", "0"]);
    assert_eq!(out.code, 2);
    assert!(out.stdout.is_empty());

    let out = heatinv(&["local", "--order", "7"]);
    assert_eq!(out.code, 2);
    assert!(out.stderr.contains("--max-order"), "{}", out.stderr);
}

#[test]
fn alpha_examples() {
    let doc = json_of(&["alpha", "--dim", "1", "--epsilon", "1/3", "--order", "3"]);
    assert_valid("alpha.schema.json", &doc);
    assert_eq!(doc["N"], 3);
    assert_eq!(
        densities(&doc),
        ["0", "0", "-1/4*D[1]V^2 - 1/3*D[2]V*V + 3/20*D[4]V"]
    );
    let regimes: Vec<&str> = doc["rows"].as_array().unwrap().iter().map(|r| r["regime"].as_str().unwrap()).collect();
    assert_eq!(regimes, ["zero", "zero", "middle"]);

    let doc = json_of(&["alpha", "--dim", "1", "--epsilon", "1", "--order", "1"]);
    assert_eq!(doc["N"], 1);
    assert_eq!(densities(&doc), ["0"]);

    for bad in ["2", "0", "0.5", "1/0", "-1/3"] {
        let out = heatinv(&["alpha", "--epsilon", bad, "--order", "1"]);
        assert_eq!(out.code, 2, "epsilon {bad}");
    }
    assert_eq!(heatinv(&["alpha", "--order", "1"]).code, 2);
}

#[test]
fn coefficient_tables() {
    let doc = json_of(&["coeffs", "--dim", "1", "--potential", "exp(-x1^2)", "--order", "2"]);
    assert_valid("coefficients.schema.json", &doc);
    let a1 = doc["rows"][0]["value"].as_f64().unwrap();
    assert!((a1 + std::f64::consts::PI.sqrt()).abs() < 1e-6, "{a1}");
    assert!(doc["epsilon"].is_null());

    let doc = json_of(&["coeffs", "--dim", "2", "--potential", "exp(-x1^2 - x2^2)", "--order", "2", "--half-width", "8"]);
    assert_valid("coefficients.schema.json", &doc);
    for r in doc["rows"].as_array().unwrap() {
        assert!(r["b_or_beta"].is_null(), "b_j must be absent for even n, j >= n/2");
        assert!(r["value"].is_number());
    }
    let text = heatinv(&["coeffs", "--dim", "2", "--potential", "exp(-x1^2 - x2^2)", "--order", "1", "--half-width", "8"]);
    assert!(text.stdout.contains("absent"));

    let doc = json_of(&["coeffs", "--dim", "1", "--potential", "0", "--order", "3"]);
    for r in doc["rows"].as_array().unwrap() {
        assert_eq!(r["value"].as_f64(), Some(0.0));
        assert_eq!(r["b_or_beta"].as_f64(), Some(0.0));
    }

    let doc = json_of(&["regtrace", "--dim", "1", "--epsilon", "1/3", "--potential", "powr(1 + x1^2, -1, 6)", "--order", "3"]);
    assert_valid("coefficients.schema.json", &doc);
    assert_eq!(doc["epsilon"], "1/3");
    assert_eq!(doc["rows"][0]["b_or_beta"].as_f64(), Some(0.0));
    assert!(doc["rows"][2]["value"].as_f64().unwrap().abs() > 0.0);

    let doc = json_of(&["regtrace", "--dim", "2", "--epsilon", "1", "--potential", "exp(-x1^2 - x2^2)", "--order", "1", "--half-width", "8"]);
    assert!(doc["rows"][0]["b_or_beta"].is_null());
}

#[test]
fn csv_and_text_formats() {
    let out = heatinv(&["local", "--order", "2", "--format", "csv"]);
    assert_eq!(out.code, 0);
    assert_eq!(out.stdout.lines().next(), Some("j,route,routes_agree,density"));
    assert_eq!(out.stdout.lines().nth(1), Some("1,theorem31,true,\"-V\""));
    let out = heatinv(&["coeffs", "--potential", "exp(-x1^2)", "--order", "1", "--format", "csv"]);
    assert!(out.stdout.starts_with("j,density,value,b_or_beta,route,err\n"));
    let out = heatinv(&["alpha", "--epsilon", "1/2", "--order", "3"]);
    assert!(out.stdout.starts_with("dim 1  epsilon 1/2  N 2"), "{}", out.stdout);
}

#[test]
fn verify_suites() {
    let doc = json_of(&["verify", "routes", "--dim", "2", "--order", "3"]);
    assert_valid("verify.schema.json", &doc);
    assert_eq!(doc["pass"], true);

    let doc = json_of(&["verify", "routes", "--dim", "3", "--order", "4", "--modular", "2"]);
    assert_valid("verify.schema.json", &doc);
    assert_eq!(doc["pass"], true);

    let doc = json_of(&["verify", "taylor", "--order", "3"]);
    assert_valid("verify.schema.json", &doc);
    assert_eq!(doc["pass"], true);
    let slope = doc["reports"][0]["observed"].as_f64().unwrap();
    assert!((slope - 4.0).abs() < 0.3, "{slope}");

    let doc = json_of(&["verify", "trace"]);
    assert_valid("verify.schema.json", &doc);
    assert_eq!(doc["pass"], true);

    let doc = json_of(&["verify", "fk", "--potential", "exp(-x1^2)", "--t", "0.05", "--paths", "20000"]);
    assert_valid("verify.schema.json", &doc);
    assert_eq!(doc["pass"], true);

    assert_eq!(heatinv(&["verify", "nonsense"]).code, 2);
}

#[test]
fn verification_failure_exits_one() {
    // Without any correction terms the expansion is far outside 3 standard errors.
    let out = heatinv(&["verify", "fk", "--potential", "exp(-x1^2)", "--terms", "0", "--paths", "2000"]);
    assert_eq!(out.code, 1, "{}", out.stdout);
    assert!(out.stdout.contains("FAIL"));
}

#[test]
fn error_exit_codes() {
    let syntax = heatinv(&["coeffs", "--potential", "exp(-x1^2", "--order", "1"]);
    assert_eq!(syntax.code, 2);
    assert!(syntax.stderr.contains("byte"), "{}", syntax.stderr);
    assert_eq!(heatinv(&["coeffs", "--potential", "x2", "--order", "1"]).code, 2);
    assert_eq!(heatinv(&["coeffs", "--potential", "foo(x1)", "--order", "1"]).code, 2);
    assert_eq!(heatinv(&["verify", "fk", "--potential", "x1", "--x", "0,0"]).code, 2);
    assert_eq!(heatinv(&["--bogus"]).code, 2);

    // sqrt of a negative number along Brownian paths started at 0
    let numeric = heatinv(&["verify", "fk", "--potential", "sqrt(x1)", "--paths", "100"]);
    assert_eq!(numeric.code, 3, "{}", numeric.stderr);

    let help = heatinv(&["--help"]);
    assert_eq!(help.code, 0);
    assert!(help.stdout.contains("powr"));
}

#[test]
fn output_is_deterministic() {
    for args in [
        vec!["verify", "fk", "--potential", "exp(-x1^2)", "--paths", "5000", "--seed", "7", "--format", "json"],
        vec!["coeffs", "--potential", "tanh(x1)^2 - 1", "--order", "3", "--format", "json"],
        vec!["verify", "taylor", "--order", "1", "--format", "csv"],
    ] {
        let a = heatinv(&args);
        let b = heatinv(&args);
        assert_eq!(a, b);
    }
}

#[test]
fn output_file() {
    let dir = std::env::temp_dir().join(format!("heatinv-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("local.json");
    let out = heatinv(&["local", "--order", "1", "--format", "json", "--output", path.to_str().unwrap()]);
    assert_eq!(out.code, 0);
    assert!(out.stdout.is_empty());
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_valid("local.schema.json", &doc);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn binary_exit_codes_and_thread_cap() {
    let bin = env!("CARGO_BIN_EXE_heatinv");
    let out = Command::new(bin)
        .args(["local", "--order", "2"])
        .env("HEATINV_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("1/2*V^2 - 1/6*D[2]V"));
    let out = Command::new(bin).args(["alpha", "--epsilon", "3/2", "--order", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
