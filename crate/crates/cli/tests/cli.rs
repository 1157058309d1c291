use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn deob(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deob")).args(args).output().unwrap()
}

fn corpus(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/corpus").join(name).to_string_lossy().into_owned()
}

#[test]
fn eval_of_a_program_against_itself() {
    let p = corpus("group1/dfs.src");
    let out = deob(&["eval", "--original", &p, "--candidate", &p]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "dfs");
    assert_eq!(&row[6..], ["1.000000", "exact", "1.000000", "true", "ok"]);
}

#[test]
fn eval_of_unparsable_candidate_is_a_row_failure() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.src");
    fs::write(&bad, "int main() { print(x); return 0; }").unwrap();
    let out = deob(&["eval", "--original", &corpus("group1/dfs.src"), "--candidate", bad.to_str().unwrap(), "--format", "json"]);
    assert_eq!(out.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["report"]["status"]["kind"], "parse-error");
    assert!(v["report"]["similarity"].is_null());
}

#[test]
fn usage_errors_exit_1_with_synopsis() {
    for args in [&["obfuscate", "--mode", "nope", "--in", "x"][..], &["bench"], &["frobnicate"]] {
        let out = deob(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("Usage:"), "{args:?}");
    }
}

#[test]
fn unreadable_input_exits_1() {
    let out = deob(&["run", "--in", "/nonexistent/p.src"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_prints_program_output() {
    let out = deob(&["run", "--in", &corpus("group2/nqueens.src")]);
    assert_eq!(out.status.code(), Some(0));
    let golden = fs::read_to_string(corpus("group2/nqueens.out")).unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap(), golden);
}

#[test]
fn runtime_error_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("div.src");
    fs::write(&p, "int z = 0;\nint main() {\n  print(1 / z);\n  return 0;\n}\n").unwrap();
    let out = deob(&["run", "--in", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn obfuscate_then_deobfuscate_restores_output() {
    let dir = tempfile::tempdir().unwrap();
    let (obf, back) = (dir.path().join("o.src"), dir.path().join("d.src"));
    let src = corpus("group2/avl.src");
    let ok = |o: Output| assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    ok(deob(&["obfuscate", "--in", &src, "--mode", "opaque-cff", "--profile", "diverse", "--seed", "3", "--opaque-count", "25", "--out", obf.to_str().unwrap()]));
    ok(deob(&["deobfuscate", "--in", obf.to_str().unwrap(), "--out", back.to_str().unwrap()]));
    let out = deob(&["eval", "--original", &src, "--candidate", back.to_str().unwrap()]);
    ok(out.clone());
    assert!(String::from_utf8(out.stdout).unwrap().contains(",1.000000,exact,1.000000,true,ok"));
}

#[test]
fn dump_cfg_writes_dot_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = corpus("group1/bfs.src");
    let out = deob(&["eval", "--original", &p, "--candidate", &p, "--dump-cfg", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let main = fs::read_to_string(dir.path().join("candidate.main.dot")).unwrap();
    assert!(main.starts_with("digraph"), "{main}");
    assert!(dir.path().join("original.main.dot").exists());
}
