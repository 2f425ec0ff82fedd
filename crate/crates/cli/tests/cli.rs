use std::io::Write;
use std::process::Command;

use serde_json::Value;

const PARAMS: &str = r#"{"name":"st","delta1":{"k":3,"lambda":"5"},"delta2":{"k":0,"lambda":"1/5"},"L":"0"}
{"name":"ng","delta1":{"k":0,"lambda":"5"},"delta2":{"k":0,"lambda":"1/5"}}
{"name":"w=-1","delta1":{"k":0,"lambda":"5"},"delta2":{"k":1,"lambda":"1/5"}}
{"name":"cris","delta1":{"k":2,"lambda":"10"},"delta2":{"k":0,"lambda":"1/10"}}
{"name":"cris-exceptional","delta1":{"k":2,"lambda":"5"},"delta2":{"k":0,"lambda":"1/5"}}
"#;

fn file(text: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_robba")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn json(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

fn entries(v: &Value) -> &Vec<Value> {
    v["result"]["entries"].as_array().unwrap()
}

#[test]
fn classify_canonical_table() {
    let f = file(PARAMS);
    let (code, out, _) = run(&["classify", f.path().to_str().unwrap()]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["config"]["p"], 5);
    let classes: Vec<&str> = entries(&v).iter().map(|e| e["class"].as_str().unwrap()).collect();
    assert_eq!(classes, ["st", "ng", "ng", "cris", "cris-exceptional"]);
    assert_eq!(entries(&v)[2]["w"], -1);
    assert_eq!(entries(&v)[4]["exceptional"], true);
}

#[test]
fn classify_json_array_input() {
    let arr = format!("[{}]", PARAMS.trim().lines().collect::<Vec<_>>().join(",\n"));
    let f = file(&arr);
    let (code, out, _) = run(&["classify", f.path().to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(entries(&json(&out)).len(), 5);
}

#[test]
fn invalid_slope_is_rejected() {
    let f = file(r#"{"delta1":{"k":3,"lambda":"1"},"delta2":{"k":0,"lambda":"1"}}"#);
    let (code, out, _) = run(&["classify", f.path().to_str().unwrap()]);
    assert_eq!(code, 3);
    let v = json(&out);
    assert!(entries(&v)[0]["diagnostics"][0].as_str().unwrap().contains("v_p(δ1(p))"));
}

#[test]
fn empty_file_gives_empty_report() {
    let f = file("");
    let (code, out, _) = run(&["classify", f.path().to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(entries(&json(&out)).is_empty());
}

#[test]
fn parse_errors_name_the_line() {
    let f = file("{\"delta1\":{}}\n\n{oops\n");
    let (code, out, err) = run(&["classify", f.path().to_str().unwrap()]);
    assert_eq!(code, 3);
    let path = f.path().display().to_string();
    assert!(err.contains(&format!("{path}:3:")), "{err}");
    assert_eq!(json(&out)["status"], "input-error");
}

#[test]
fn bad_flags_are_input_errors() {
    let f = file("");
    let (code, _, err) = run(&["classify", f.path().to_str().unwrap(), "--p", "4"]);
    assert_eq!(code, 3);
    assert!(err.contains("p = 4"));
}

#[test]
fn jacquet_matches_on_canonical_parameters() {
    let f = file(PARAMS);
    let (code, out, _) = run(&["jacquet", f.path().to_str().unwrap()]);
    assert_eq!(code, 0);
    let v = json(&out);
    let dims: Vec<i64> = entries(&v).iter().map(|e| e["dim_x"].as_i64().unwrap()).collect();
    assert_eq!(dims, [1, 1, 2, 2, 2]);
    assert!(entries(&v).iter().all(|e| e["verdict"] == "match"));
    let cris = &entries(&v)[3];
    assert!(cris["eigendata"].as_array().unwrap().iter().any(|d| d["vector"] == "e2'"));
}

#[test]
fn st_cocycle_on_cris_parameter_is_flagged() {
    let p = file(PARAMS.lines().nth(3).unwrap());
    let c = file(r#"{"tag":"st"}"#);
    let (code, out, _) = run(&["jacquet", p.path().to_str().unwrap(), "--cocycles", c.path().to_str().unwrap()]);
    assert_eq!(code, 1);
    let v = json(&out);
    let e = &entries(&v)[0];
    assert_eq!(e["verdict"], "mismatch");
    assert_eq!(e["cocycle"]["consistent_with_class"], false);
    assert!(e["anchor"].is_string());
}

#[test]
fn cocycle_count_must_match() {
    let p = file(PARAMS);
    let c = file(r#"{"tag":"st"}"#);
    let (code, _, _) = run(&["jacquet", p.path().to_str().unwrap(), "--cocycles", c.path().to_str().unwrap()]);
    assert_eq!(code, 3);
}

#[test]
fn verify_kernel_passes_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let (code, _, _) = run(&["verify", "--suite", "kernel", "--out", a.to_str().unwrap()]);
    assert_eq!(code, 0);
    let (code, _, _) = run(&["verify", "--suite", "kernel", "--out", b.to_str().unwrap()]);
    assert_eq!(code, 0);
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let v: Value = serde_json::from_slice(&ta).unwrap();
    assert_eq!(v["status"], "pass");
    assert!(v["result"]["failures"].as_array().unwrap().is_empty());
}

#[test]
fn unknown_suite_is_an_input_error() {
    let (code, _, _) = run(&["verify", "--suite", "nope"]);
    assert_eq!(code, 3);
}
