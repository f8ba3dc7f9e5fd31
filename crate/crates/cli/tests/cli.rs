use std::io::Write;
use std::process::{Command, Output, Stdio};

fn corpus(name: &str) -> String {
    format!("{}/../core/corpus/{name}.ir", env!("CARGO_MANIFEST_DIR"))
}

fn rvsdg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rvsdg")).args(args).output().unwrap()
}

fn rvsdg_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_rvsdg"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stat(text: &str, key: &str) -> String {
    text.lines().find_map(|l| l.strip_prefix(&format!("{key}="))).unwrap_or_else(|| panic!("no {key} in\n{text}")).to_string()
}

#[test]
fn gcd_roundtrip_succeeds() {
    let out = stdout(&rvsdg(&["roundtrip", &corpus("gcd"), "--samples", "100", "--seed", "7"]));
    assert!(out.ends_with("ok\n"), "{out}");
    assert!(out.contains("destructed agreed=100"), "{out}");
}

#[test]
fn cne_then_dne_leaves_three_multiplications() {
    let before = stdout(&rvsdg(&["stats", &corpus("cne_kernel")]));
    let after = stdout(&rvsdg(&["stats", &corpus("cne_kernel"), "--passes", "CNE,DNE"]));
    assert_eq!(stat(&before, "op.mul"), "4");
    assert_eq!(stat(&after, "op.mul"), "3");
}

#[test]
fn empty_pass_list_is_the_identity() {
    for name in ["gcd", "sieve", "mutual", "globals"] {
        let built = stdout(&rvsdg(&["construct", &corpus(name)]));
        let opt = stdout(&rvsdg(&["opt", &corpus(name), "--passes", ""]));
        assert_eq!(built, opt, "{name}");
    }
}

#[test]
fn outputs_are_deterministic() {
    let f = corpus("loop_cond_kernel");
    let commands: Vec<Vec<&str>> = vec![
        vec!["construct", &f],
        vec!["opt", &f],
        vec!["destruct", &f],
        vec!["dot", &f, "--level", "rvsdg", "--passes", "default"],
        vec!["dot", &f, "--level", "cfg"],
        vec!["dot", &f, "--level", "tree"],
        vec!["stats", &f, "--passes", "default"],
        vec!["roundtrip", &f, "--samples", "30", "--seed", "3"],
    ];
    for args in commands {
        assert_eq!(stdout(&rvsdg(&args)), stdout(&rvsdg(&args)), "{args:?}");
    }
}

#[test]
fn destructed_output_is_valid_input() {
    let text = stdout(&rvsdg(&["destruct", &corpus("fib")]));
    let check = stdout(&rvsdg_stdin(&["check", "-"], &text));
    assert!(check.starts_with("ok "), "{check}");
}

#[test]
fn run_agrees_across_evaluators() {
    let f = corpus("collatz");
    let name = std::fs::read_to_string(&f)
        .unwrap()
        .lines()
        .find_map(|l| l.strip_prefix("export define i64 @").map(|r| r.split('(').next().unwrap().to_string()))
        .unwrap();
    let outs: Vec<String> = ["source", "rvsdg", "destructed"]
        .iter()
        .map(|via| stdout(&rvsdg(&["run", &f, "--fn", &name, "--args", "27", "--via", via])))
        .collect();
    assert!(outs[0].starts_with("result "), "{}", outs[0]);
    assert_eq!(outs[0], outs[1]);
    assert_eq!(outs[0], outs[2]);
}

#[test]
fn traps_are_reported_as_outcomes() {
    let src = "export define i64 @f(i64 %a) {\n  %x = div i64 1, %a\n  ret %x\n}";
    let out = stdout(&rvsdg_stdin(&["run", "-", "--fn", "f", "--args", "0"], src));
    assert_eq!(out, "trap division by zero\n");
}

#[test]
fn bad_input_exits_with_one() {
    let o = rvsdg_stdin(&["check", "-"], "define i64 @f() {\n  %x = frob i64 1\n  ret %x\n}");
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("2:"), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(rvsdg(&["opt", &corpus("gcd"), "--passes", "NOPE"]).status.code(), Some(1));
    assert_eq!(rvsdg(&["dot", &corpus("gcd"), "--level", "ssa"]).status.code(), Some(1));
    assert_eq!(rvsdg(&["run", &corpus("gcd"), "--fn", "gcd", "--args", "1"]).status.code(), Some(1));
    assert_eq!(rvsdg(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(rvsdg(&["--help"]).status.code(), Some(0));
}
