use rvsdg_web::{construct_dump, default_passes, optimize, run};

const GCD: &str = include_str!("../../core/corpus/gcd.ir");
const CNE: &str = include_str!("../../core/corpus/cne_kernel.ir");

#[test]
fn construct_matches_empty_optimization() {
    let built = construct_dump(GCD).unwrap();
    let opt = optimize(GCD, "", 4).unwrap();
    assert!(opt.starts_with(&built), "{opt}");
}

#[test]
fn optimize_reports_each_pass() {
    let out = optimize(CNE, "CNE,DNE", 4).unwrap();
    assert!(out.starts_with("; pass=CNE"), "{out}");
    assert!(out.contains("; pass=DNE"), "{out}");
    assert!(out.contains("; destructed"), "{out}");
    let all = optimize(CNE, "default", 2).unwrap();
    assert_eq!(all.lines().filter(|l| l.starts_with("; pass=")).count(), default_passes().split_whitespace().count());
}

#[test]
fn run_agrees_everywhere() {
    let out = run(GCD, "gcd", "12, 8", "default", 4).unwrap();
    assert_eq!(out.matches("result i64 4").count(), 3, "{out}");
    assert!(out.contains("destructed agreed="), "{out}");
}

#[test]
fn errors_become_messages() {
    assert!(construct_dump("define").is_err());
    assert!(optimize(GCD, "XYZ", 4).is_err());
    assert!(optimize(GCD, "", 0).is_err());
    assert!(run(GCD, "gcd", "1", "", 4).unwrap_err().contains("arguments"));
}
