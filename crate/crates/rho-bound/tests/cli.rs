use rho_bound::cli::*;

fn corpus(name: &str) -> String {
    format!("{}/corpus/{name}.koat", env!("CARGO_MANIFEST_DIR"))
}

fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run_cli(std::iter::once("rho-bound").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn temp_file(name: &str, text: &str) -> String {
    let dir = std::env::temp_dir().join(format!("rho-bound-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn analyze_factsum() {
    let (code, out, _) = cli(&["analyze", &corpus("factsum")]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.lines().next(), Some("WORST_CASE(?, O(n^2))"));
    assert!(out.contains("t5: x^2"));
    assert!(out.contains("t1,y: y + x*x^x"));
}

#[test]
fn analyze_json() {
    let (code, out, _) = cli(&["analyze", &corpus("factsum"), "--format", "json"]);
    assert_eq!(code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["worst_case"], "WORST_CASE(?, O(n^2))");
    let runtime = v["runtime"].as_array().unwrap();
    assert_eq!(runtime.len(), 6);
    for r in runtime {
        for key in ["transition", "bound", "finite", "technique", "subprogram"] {
            assert!(r.get(key).is_some(), "{key}");
        }
    }
    let sizes = v["size"].as_array().unwrap();
    assert!(sizes.iter().any(|s| s["source"] == "rho1" && s["variable"] == "a" && s["bound"] == "x"));
}

#[test]
fn nonterminating_exit_code() {
    let (code, out, _) = cli(&["analyze", &corpus("nonterm")]);
    assert_eq!(code, EXIT_UNBOUNDED);
    assert_eq!(out.lines().next(), Some("WORST_CASE(?, ?)"));
    assert!(out.contains("Unbounded: t1"));
}

#[test]
fn input_errors() {
    let empty = temp_file("empty.koat", "(STARTTERM (FUNCTIONSYMBOLS l0))\n(VAR x)\n(RULES\n)\n");
    let (code, _, err) = cli(&["analyze", &empty]);
    assert_eq!(code, EXIT_INPUT);
    assert!(err.contains("no rules"));
    let bad = temp_file("bad.koat", "(RULES l0(x) -> l1(x)");
    let (code, _, err) = cli(&["analyze", &bad]);
    assert_eq!(code, EXIT_INPUT);
    assert!(err.starts_with("error:"));
    let (code, _, err) = cli(&["analyze", "/nonexistent.koat"]);
    assert_eq!(code, EXIT_INPUT);
    assert!(err.contains("cannot read"));
    let (code, _, _) = cli(&["frobnicate"]);
    assert_eq!(code, EXIT_INPUT);
    let (code, out, _) = cli(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("analyze"));
}

#[test]
fn run_counts() {
    let (code, out, _) = cli(&["run", &corpus("factsum"), "--init", "a=0,x=2,y=0"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("total: 12"));
    let (code, out, _) = cli(&["run", &corpus("factsum"), "--init", "a=0,x=2,y=0", "--fuel", "0"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("total: 0"));
    assert!(out.contains("exhausted"));
    let (code, out, _) = cli(&["run", &corpus("factsum"), "--init", "a=0,x=2,y=0", "--dot"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("f2 (2,2,0)"));
    let (code, out, _) = cli(&["run", &corpus("factsum"), "--init", "a=0,x=2,y=0", "--format", "json"]);
    assert_eq!(code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["total"], 12);
}

#[test]
fn run_init_errors() {
    let (code, _, err) = cli(&["run", &corpus("factsum"), "--init", "a=0,x=2"]);
    assert_eq!(code, EXIT_INPUT);
    assert!(err.contains("missing value for `y`"));
    let (code, _, err) = cli(&["run", &corpus("factsum"), "--init", "a=0,x=2,y=0,q=1"]);
    assert_eq!(code, EXIT_INPUT);
    assert!(err.contains("unknown variable `q`"));
    let (code, _, _) = cli(&["run", &corpus("factsum"), "--init", "a=zero,x=2,y=0"]);
    assert_eq!(code, EXIT_INPUT);
}

#[test]
fn check_exit_codes() {
    let (code, out, _) = cli(&["check", &corpus("factsum"), "--trials", "20"]);
    assert_eq!(code, EXIT_OK, "{out}");
    let (code, _, _) = cli(&["check", &corpus("factsum"), "--trials", "0"]);
    assert_eq!(code, EXIT_OK);
    let (code, out, _) = cli(&["check", &corpus("factsum"), "--inject"]);
    assert_eq!(code, EXIT_COUNTEREXAMPLE);
    assert!(out.starts_with("counterexample:"));
}

#[test]
fn graph_output() {
    let (code, a, _) = cli(&["graph", &corpus("factsum")]);
    assert_eq!(code, EXIT_OK);
    assert!(a.contains("\"t5,a\" -> \"t1,y\" [style=dashed];"));
    let (_, b, _) = cli(&["graph", &corpus("factsum")]);
    assert_eq!(a, b);
    let (_, c, _) = cli(&["graph", &corpus("countdown")]);
    assert!(c.starts_with("digraph"));
    assert!(!c.contains("dashed"));
    let (_, d, _) = cli(&["analyze", &corpus("factsum"), "--format", "dot"]);
    assert_eq!(a, d);
}

#[test]
fn parse_init_values() {
    let p = rho_bound::parser::parse(&std::fs::read_to_string(corpus("factsum")).unwrap()).unwrap();
    let s = parse_init(&p, " a = -3 , x=2,y=0 ").unwrap();
    assert_eq!(s["a"], (-3).into());
    assert!(parse_init(&p, "a").is_err());
}
