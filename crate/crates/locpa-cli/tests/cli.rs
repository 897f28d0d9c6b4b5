use std::io::Write;
use std::process::{Command, Output};

fn locpa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_locpa")).args(args).env_remove("LOCPA_SEED").output().expect("run locpa")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn temp_file(name: &str, body: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("locpa-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::File::create(&path).unwrap().write_all(body.as_bytes()).unwrap();
    path
}

#[test]
fn norm_distributes_choice_over_sequence() {
    let alph = temp_file("alph.cfg", "actions: a, b, c\n");
    let o = locpa(&["norm", "-a", alph.to_str().unwrap(), "(a+b);c"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "a ; c + b ; c");
}

#[test]
fn norm_drops_empty_location() {
    let o = locpa(&["norm", "eps::a"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "a");
}

#[test]
fn norm_parse_error_exits_2() {
    let o = locpa(&["norm", "x +"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("1:4"));
}

#[test]
fn norm_trace_is_json_lines() {
    let o = locpa(&["norm", "--trace", "(a+b);c"]);
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.last(), Some(&"a ; c + b ; c"));
    for l in &lines[..lines.len() - 1] {
        let v: serde_json::Value = serde_json::from_str(l).unwrap();
        for key in ["rule", "position", "before", "after"] {
            assert!(v.get(key).is_some(), "{key} missing in {l}");
        }
    }
    assert!(lines.len() > 1);
}

#[test]
fn norm_uses_definitions() {
    let o = locpa(&["norm", "-D", "P = a + a", "P ; b"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "a ; b");
}

#[test]
fn eq_exit_codes() {
    assert_eq!(locpa(&["eq", "--kind=step-sl-strong", "l1::a", "l2::a"]).status.code(), Some(0));
    let o = locpa(&["eq", "--kind=hhp-sl-strong", "(a+b)//c", "(a//c)+(b//c)"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("inequivalent"));
    assert_eq!(locpa(&["eq", "--kind=rb-step-sl", "a;tau", "a"]).status.code(), Some(0));
    assert_eq!(locpa(&["eq", "--kind=bogus", "a", "a"]).status.code(), Some(2));
    let tight = locpa(&["eq", "--bounds", "nodes=1", "a;b;c", "a;b;c"]);
    assert_eq!(tight.status.code(), Some(3));
}

#[test]
fn eq_json_verdict() {
    let o = locpa(&["eq", "--json", "--kind=hp-sl-strong", "(a+b)//c", "(a//c)+(b//c)"]);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["verdict"], "equivalent");
    assert_eq!(v["kind"], "hp-sl-strong");
    assert!(v.get("bounds_hit").is_some());
}

#[test]
fn eq_on_specifications() {
    let specs = temp_file("specs.lp", "spec E { X = a . X ; }\nspec F { Y = a . Z ; Z = a . Y ; }\n");
    let path = specs.to_str().unwrap();
    let o = locpa(&["eq", "--spec", path, "X@E", "Y@F"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let o = locpa(&["eq", "--spec", path, "--aip", "12", "X@E", "Y@F"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn laws_reports_seed_and_passes() {
    let o = locpa(&["laws", "--suite=batc", "-n", "20", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("suite batc seed 7 samples 20"));
    assert!(out.contains("0 failures"));
}

#[test]
fn laws_strong_checker_rejects_b1() {
    let o = locpa(&["laws", "--suite=tau", "--law", "B1", "--kind", "step-sl-strong", "-n", "20"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn laws_seed_from_environment() {
    let run = |seed: &str| {
        Command::new(env!("CARGO_BIN_EXE_locpa"))
            .args(["laws", "--suite=proj", "-n", "5", "--json"])
            .env("LOCPA_SEED", seed)
            .output()
            .unwrap()
    };
    let a = run("99");
    let v: serde_json::Value = serde_json::from_str(stdout(&a).trim()).unwrap();
    assert_eq!(v["seed"], 99);
    assert_eq!(a.stdout, run("99").stdout);
}

#[test]
fn laws_unknown_suite() {
    assert_eq!(locpa(&["laws", "--suite=nope"]).status.code(), Some(2));
}

#[test]
fn lts_dot_has_three_nodes() {
    let o = locpa(&["lts", "a;b", "--dot"]);
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.contains("label=") && !l.contains("->")).count(), 3);
    assert!(out.contains("doublecircle"));
}

#[test]
fn lts_dynamic_mints_locations() {
    let out = stdout(&locpa(&["lts", "--dyn", "a.0"]));
    assert!(out.contains("a@loc0"));
}

#[test]
fn lts_truncation_is_flagged() {
    let specs = temp_file("count.lp", "spec C { X = a . Y ; Y = b . X ; }\n");
    let o = locpa(&["lts", "--json", "--bounds", "states=1", "--spec", specs.to_str().unwrap(), "X@C || X@C"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["truncated"], true);
    assert!(String::from_utf8_lossy(&o.stderr).contains("truncated"));
}

#[test]
fn pes_of_independent_actions() {
    let o = locpa(&["pes", "a//b", "--json"]);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["events"].as_array().unwrap().len(), 2);
    assert!(v["causal"].as_array().unwrap().is_empty());
    assert!(v["conflict"].as_array().unwrap().is_empty());
}

#[test]
fn alphabet_violations_are_reported() {
    let bad = temp_file("bad.cfg", "actions: a, b\ncausal: a < b, b < a\n");
    let o = locpa(&["alphabet", "-a", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cycle"));
}

#[test]
fn clusters_report() {
    let specs = temp_file("cl.lp", "spec E { X = i . Y + a ; Y = i . X + b ; }\n");
    let o = locpa(&["clusters", "--spec", specs.to_str().unwrap(), "--hidden", "i", "--cfar", "X"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["clusters"][0]["vars"], serde_json::json!(["X", "Y"]));
    assert_eq!(v["clusters"][0]["exits"].as_array().unwrap().len(), 2);
    assert!(v["cfar"]["term"].as_str().unwrap().starts_with("tau ; hide("));
}

#[test]
fn exports_are_deterministic() {
    for args in [&["lts", "--json", "(a+b)//(c;d)"][..], &["pes", "(a+b)//(c;d)"][..]] {
        assert_eq!(locpa(args).stdout, locpa(args).stdout);
    }
}
