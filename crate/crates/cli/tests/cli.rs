use std::process::{Command, Output};

fn lindiff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lindiff")).args(args).output().expect("spawn lindiff")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn example_round_trips_through_file() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["brownian_line", "brownian_01", "cantor_scale", "rational_windows"] {
        let out = lindiff(&["example", name]);
        assert!(out.status.success());
        let path = dir.path().join(format!("{name}.json"));
        std::fs::write(&path, &out.stdout).unwrap();
        let by_name = lindiff(&["classify", name]);
        let by_file = lindiff(&["classify", path.to_str().unwrap()]);
        assert_eq!(by_name.status.code(), Some(0));
        let a: serde_json::Value = serde_json::from_slice(&by_name.stdout).unwrap();
        let b: serde_json::Value = serde_json::from_slice(&by_file.stdout).unwrap();
        assert_eq!(a["report"], b["report"], "{name}");
    }
}

#[test]
fn example_output_is_sorted_canonical_json() {
    let out = stdout(&lindiff(&["example", "cantor_scale"]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(serde_json::to_string_pretty(&v).unwrap() + "\n", out);
    assert_eq!(v["name"], "cantor_scale");
}

#[test]
fn expect_mismatch_exits_one() {
    let ok = lindiff(&["membership", "cantor_scale", "--u", "c", "--expect", "yes"]);
    assert_eq!(ok.status.code(), Some(0));
    let bad = lindiff(&["membership", "brownian_01", "--u", "c", "--expect", "yes"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("singular"));
}

#[test]
fn bad_input_exits_two() {
    let out = lindiff(&["classify", "no_such_spec"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown example"));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, r#"{"name": "x", "interval": 3}"#).unwrap();
    assert_eq!(lindiff(&["classify", path.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn hitting_csv_has_header_and_row() {
    let out = stdout(&lindiff(&["hitting", "brownian_line", "--a", "-1", "--x", "0", "--b", "1", "--n", "200", "--seed", "1"]));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "spec_id,a,x,b,n,p_hat,ci,formula_p,pass");
    let row: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(row.len(), 9);
    assert_eq!(row[7], "0.5");
    let again = stdout(&lindiff(&["hitting", "brownian_line", "--a", "-1", "--x", "0", "--b", "1", "--n", "200", "--seed", "1"]));
    assert_eq!(out, again);
}
