//! Conformance of the harness protocol, exercised against the reference
//! executor in `tests/support/stub_harness.py`.

mod support;

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Stdio};

use mrt::harness::{Harness, ProcessHarness, TIMEOUT_ERROR};
use mrt_core::RawValue;
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};
use serde_json::Value;

use support::*;

const OK_FIELDS: &[&str] = &["id", "ok", "value", "value_kind"];
const ERR_FIELDS: &[&str] = &["id", "ok", "error_type", "error_message"];
const RAISE_FIELDS: &[&str] = &["id", "ok", "error_type", "error_message", "traceback"];

fn keys(v: &Value) -> BTreeSet<&str> {
    v.as_object().unwrap().keys().map(String::as_str).collect()
}

/// Drive the executor directly over its pipes and compare every reply's
/// field set with the protocol.
#[test]
fn raw_transcript_field_presence() {
    let dir = tempfile::tempdir().unwrap();
    let table = fixture("pokemon.csv");
    let out = dir.path().join("out.csv");
    let cmd = harness_command();
    let mut child = Command::new(&cmd[0])
        .args(&cmd[1..])
        .current_dir(dir.path())
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stdin = child.stdin.take().unwrap();
    let mut lines = BufReader::new(child.stdout.take().unwrap()).lines();
    let mut next = || serde_json::from_str::<Value>(&lines.next().unwrap().unwrap()).unwrap();
    assert_eq!(next(), serde_json::json!({"hello": 1}));

    let t = table.to_str().unwrap();
    let requests = [
        serde_json::json!({"id": 1, "op": "check", "code": "def parse_dataframe(df):\n    return 1\n"}),
        serde_json::json!({"id": 2, "op": "check", "code": "def parse_dataframe(df):\n    return (\n"}),
        serde_json::json!({"id": 3, "op": "run", "code": "def parse_dataframe(df):\n    return int(df['hp'].max())\n", "table_path": t, "timeout_s": 30}),
        serde_json::json!({"id": 4, "op": "run", "code": "def parse_dataframe(df):\n    return df['nope']\n", "table_path": t, "timeout_s": 30}),
        serde_json::json!({"id": 5, "op": "convert", "table_path": t, "out_path": out.to_str().unwrap()}),
    ];
    let mut replies = Vec::new();
    for r in &requests {
        writeln!(stdin, "{r}").unwrap();
        stdin.flush().unwrap();
        replies.push(next());
    }
    drop(stdin);
    child.wait().unwrap();

    let expect = [OK_FIELDS, ERR_FIELDS, OK_FIELDS, RAISE_FIELDS, OK_FIELDS];
    for (i, (reply, fields)) in replies.iter().zip(expect).enumerate() {
        assert_eq!(reply["id"], i as u64 + 1);
        assert_eq!(keys(reply), fields.iter().copied().collect(), "reply {}: {reply}", i + 1);
    }
    assert_eq!(replies[0]["ok"], true);
    assert_eq!(replies[1]["error_type"], "SyntaxError");
    assert!(replies[1]["error_message"].as_str().unwrap().contains("line 2"));
    assert_eq!((&replies[2]["value"], &replies[2]["value_kind"]), (&Value::from(255), &Value::from("int")));
    assert_eq!(replies[3]["error_type"], "KeyError");
    assert!(replies[3]["traceback"].as_str().unwrap().contains("Traceback"));
    assert_eq!(replies[4]["ok"], true);
}

#[test]
fn supervisor_kills_runaway_code_and_restarts() {
    let mut h = ProcessHarness::new(harness_settings());
    let table = fixture("pokemon.csv");
    let spin = "def parse_dataframe(df):\n    while True:\n        pass\n";
    let outcome = h.run(spin, &table, 1.0).unwrap();
    assert!(!outcome.ok && outcome.is_timeout());
    assert_eq!(outcome.error_type.as_deref(), Some(TIMEOUT_ERROR));
    assert!(outcome.wall_ms.unwrap() >= 1000);
    // The next request runs in a fresh process.
    let ok = h.run("def parse_dataframe(df):\n    return len(df)\n", &table, 30.0).unwrap();
    assert_eq!(ok.value, Some(RawValue::Int(30)));
    assert_eq!(h.restarts(), 1);
}

#[test]
fn crash_is_reported_and_recovered() {
    let mut h = ProcessHarness::new(harness_settings());
    let table = fixture("pokemon.csv");
    let err = h.run("import os\ndef parse_dataframe(df):\n    os._exit(3)\n", &table, 30.0).unwrap_err();
    assert!(matches!(err, mrt::harness::HarnessError::Crashed { .. }), "{err}");
    assert!(h.check("def parse_dataframe(df):\n    return 1\n").unwrap().ok);
}

#[test]
fn convert_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut h = ProcessHarness::new(harness_settings());
    let table = fixture("pokemon.csv");
    let out = dir.path().join("copy.csv");
    assert!(h.convert(&table, &out).unwrap().ok);
    let original = mrt::table_io::load_table(&table).unwrap();
    let copy = mrt::table_io::load_table(&out).unwrap();
    // Same columns, kinds and cells after the trip through pandas.
    assert_eq!(original.table.columns, copy.table.columns);
    assert_eq!(original.table.row_count, copy.table.row_count);

    let missing = h.convert(&dir.path().join("none.parquet"), &out).unwrap();
    assert!(!missing.ok);
    assert_eq!(missing.error_type.as_deref(), Some("ConvertError"));
}

/// Random Python values, nested up to `depth`.
fn python_value(rng: &mut StdRng, depth: u32) -> String {
    let leaf = [
        "None", "True", "False", "float('nan')", "float('inf')", "-0.0", "1e308", "2**70", "-17",
        "'caf\\u00e9 \\U0001F600'", "''", "'a\\nb\"c'", "np.int64(5)", "np.float32(1.5)", "np.bool_(True)",
        "np.nan", "pd.NA", "pd.NaT", "pd.Timestamp('2024-01-02')", "object()", "b'bytes'", "3+4j",
        "df['hp'].max()", "df['name'].iloc[0]", "df['type2'].iloc[2]",
    ];
    let container = [
        "df['hp']", "df[['name']]", "df[['name', 'hp']]", "df.index", "df['hp'].values",
        "np.zeros((2, 2))", "{'a': 1}", "df.iloc[0]", "range(3)",
    ];
    match rng.random_range(0..10) {
        0..=4 => leaf[rng.random_range(0..leaf.len())].to_string(),
        5 | 6 => container[rng.random_range(0..container.len())].to_string(),
        _ if depth == 0 => "1".to_string(),
        k => {
            let n = rng.random_range(0..4);
            let items: Vec<String> = (0..n).map(|_| python_value(rng, depth - 1)).collect();
            match k {
                7 => format!("[{}]", items.join(", ")),
                8 => format!("tuple([{}])", items.join(", ")),
                _ => format!("{{{}}}", items.iter().map(|i| format!("str({i})")).chain(["'x'".into()]).collect::<Vec<_>>().join(", ")),
            }
        }
    }
}

#[test]
fn serialization_is_total() {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut h = ProcessHarness::new(harness_settings());
    let table = fixture("pokemon.csv");
    let kinds: BTreeSet<&str> = ["null", "bool", "int", "float", "string", "list", "other"].into();
    for i in 0..500 {
        let expr = python_value(&mut rng, 2);
        let code = format!("def parse_dataframe(df):\n    return {expr}\n");
        let outcome = h.run(&code, &table, 30.0).unwrap();
        assert!(outcome.ok, "case {i}: `{expr}` -> {outcome:?}");
        assert!(outcome.value.is_some(), "case {i}: `{expr}`");
        assert!(kinds.contains(outcome.value_kind.as_deref().unwrap_or("")), "case {i}: {outcome:?}");
    }
    assert_eq!(h.restarts(), 0);
}

#[test]
fn working_directory_is_private() {
    let mut h = ProcessHarness::new(harness_settings());
    let code = "import os\ndef parse_dataframe(df):\n    open('scratch.txt', 'w').write('x')\n    return os.getcwd()\n";
    let outcome = h.run(code, &fixture("pokemon.csv"), 30.0).unwrap();
    let Some(RawValue::Str(cwd)) = outcome.value else { panic!("{outcome:?}") };
    assert!(fs::metadata(std::path::Path::new(&cwd).join("scratch.txt")).is_ok());
    assert!(!fixtures().join("scratch.txt").exists());
    drop(h);
    assert!(!std::path::Path::new(&cwd).exists());
}
