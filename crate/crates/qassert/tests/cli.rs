//! The `qassert` binary driven through its command line.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qassert::formats::{CountsFile, Manifest, RecommendFile, ReportFile};
use qassert_core::qasm::parse_flat;
use tempfile::TempDir;

const BV: &str = "\
gate oracle x0, x1, x2, y {
    assert-sup y;
    cx x0, y;
    cx x2, y;
}

qreg q[3];
qreg anc[1];
x anc[0];
h q; h anc[0];
oracle q[0], q[1], q[2], anc[0];
h q;
assert-eq q = |101>;
assert-eq anc[0] {
    qreg t[1];
    h t[0];
    z t[0];
}
";

const DEVICE: &str = r#"{"name": "example", "gate_error": {"default": 0.001, "cx": 0.01}, "measurement_error": {"default": 0.02}}"#;

fn qassert(args: &[&str]) -> Output {
    qassert_env(args, &[])
}

fn qassert_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qassert"));
    cmd.args(args).env_remove("QASSERT_SEED");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json<T: serde::de::DeserializeOwned>(p: &Path) -> T {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

/// `n` Bell pairs on `q[2k], q[2k+1]` and the Listing-style assertion over
/// the first and last pair. `mutate` turns the last pair's `h` into `x`.
fn bell_pairs(n: usize, mutate: bool) -> String {
    let mut src = format!("qreg q[{}];\n", 2 * n);
    for k in 0..n {
        let g = if mutate && k == n - 1 { "x" } else { "h" };
        src += &format!("{g} q[{}];\ncx q[{}], q[{}];\n", 2 * k, 2 * k, 2 * k + 1);
    }
    let last = 2 * n - 2;
    src += &format!(
        "assert-eq q[0], q[1], q[{last}], q[{}] = {{ 0.5, 0, 0, 0.5, 0, 0, 0, 0, 0, 0, 0, 0, 0.5, 0, 0, 0.5 }};\n",
        last + 1
    );
    src
}

#[test]
fn translate_writes_figure_listings() {
    let dir = TempDir::new().unwrap();
    let input = write(dir.path(), "bv.qasm", BV);
    let out = dir.path().join("opt");
    let o = qassert(&["translate", s(&input), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s1 = fs::read_to_string(out.join("slice_1.qasm")).unwrap();
    assert_eq!(
        s1,
        "OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg q[3];\nqreg anc[1];\ncreg test_y[1];\nx anc[0];\n\
         h q[0];\nh q[1];\nh q[2];\nh anc[0];\nmeasure anc[0] -> test_y[0];\n\n\
         // ASSERT 1: (test_y[0]) {superposition}\n"
    );
    let s2 = fs::read_to_string(out.join("slice_2.qasm")).unwrap();
    assert!(s2.ends_with(
        "// ASSERT 2: (test_q0[0], test_q1[0], test_q2[0]) {0, 0, 0, 0, 0, 1, 0, 0}\n\
         // ASSERT 3: (test_anc0[0]) {zero}\n"
    ));
    assert!(!out.join("slice_3.qasm").exists());

    let m: Manifest = read_json(&out.join("slices.json"));
    assert_eq!(m.slices.len(), 2);
    assert_eq!(m.slices[1].covered, [2, 3]);
    assert_eq!(m.slices[1].bit_order, ["test_q0[0]", "test_q1[0]", "test_q2[0]", "test_anc0[0]"]);
    assert_eq!(m.digest, qassert::files::sha256_hex(BV.as_bytes()));

    let plain = dir.path().join("plain");
    let o = qassert(&[
        "translate", s(&input), "--out", s(&plain), "--no-cancel", "--no-concat", "--no-move",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m: Manifest = read_json(&plain.join("slices.json"));
    assert_eq!(m.slices.len(), 3);
    assert!(fs::read_to_string(plain.join("slice_3.qasm")).unwrap().ends_with("// ASSERT 3: (test_anc0[0]) {zero}\n"));
}

#[test]
fn slice_listings_parse_again() {
    let dir = TempDir::new().unwrap();
    let input = write(dir.path(), "bv.qasm", BV);
    for flags in [&[][..], &["--no-cancel", "--no-concat", "--no-move", "--no-reapply"]] {
        let out = dir.path().join(format!("out{}", flags.len()));
        let mut args = vec!["translate", s(&input), "--out", s(&out)];
        args.extend_from_slice(flags);
        assert_eq!(code(&qassert(&args)), 0);
        let m: Manifest = read_json(&out.join("slices.json"));
        for r in &m.slices {
            let text = fs::read_to_string(out.join(&r.file)).unwrap();
            let prog = parse_flat(&text).unwrap();
            assert_eq!(prog.assertions().count(), 0);
            assert_eq!(prog.num_qubits(), r.num_qubits);
            assert_eq!(prog.instructions().filter(|i| i.is_measurement()).count(), r.bit_order.len());
        }
    }
}

#[test]
fn check_exit_codes_follow_the_verdicts() {
    let dir = TempDir::new().unwrap();
    let good = write(dir.path(), "good.qasm", BV);
    let out = dir.path().join("good");
    let o = qassert(&["check", s(&good), "--out", s(&out), "--ideal"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: ReportFile = read_json(&out.join("report.json"));
    assert_eq!(r.summary.satisfied, 3);

    // the oracle flips y on x1 instead of x2, so q measures 110
    let bug = write(dir.path(), "bug.qasm", &BV.replace("cx x2, y;", "cx x1, y;"));
    let out = dir.path().join("bug");
    let o = qassert(&["check", s(&bug), "--out", s(&out), "--ideal"]);
    assert_eq!(code(&o), 1);
    let r: ReportFile = read_json(&out.join("report.json"));
    assert_eq!(r.record(2).unwrap().verdict, "rejected");
    assert!(String::from_utf8_lossy(&o.stdout).contains("rejected"));
}

#[test]
fn verify_flags_a_flipped_qubit() {
    let dir = TempDir::new().unwrap();
    let src = BV.replace("assert-eq q = |101>;", "x q[1];\nassert-eq q = |101>;");
    let input = write(dir.path(), "x.qasm", &src);
    let out = dir.path().join("run");
    assert_eq!(code(&qassert(&["translate", s(&input), "--out", s(&out)])), 0);
    let manifest = out.join("slices.json");
    assert_eq!(code(&qassert(&["simulate", s(&manifest), "--shots", "8192", "--ideal"])), 0);
    let report = dir.path().join("r.json");
    let o = qassert(&["verify", s(&manifest), s(&out), "--report", s(&report)]);
    assert_eq!(code(&o), 1);
    let r: ReportFile = read_json(&report);
    assert_eq!(r.record(2).unwrap().verdict, "rejected");
    assert_eq!(r.record(1).unwrap().verdict, "satisfied");
    assert_eq!(r.config.model, "ideal");
    assert_eq!(r.config.seed, Some(0));
    assert_eq!(r.record(2).unwrap().f, Some(1.0));
}

#[test]
fn seeded_simulation_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let input = write(dir.path(), "bv.qasm", BV);
    let device = write(dir.path(), "dev.json", DEVICE);
    let run = |name: &str, extra: &[&str], env: &[(&str, &str)]| -> Vec<String> {
        let out = dir.path().join(name);
        assert_eq!(code(&qassert(&["translate", s(&input), "--out", s(&out)])), 0);
        let manifest = out.join("slices.json");
        let mut args = vec!["simulate", s(&manifest), "--shots", "1000", "--device", s(&device)];
        args.extend_from_slice(extra);
        let o = qassert_env(&args, env);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        (1..=2).map(|k| fs::read_to_string(out.join(format!("counts_{k}.json"))).unwrap()).collect()
    };
    let a = run("a", &["--seed", "42"], &[]);
    let b = run("b", &["--seed", "42", "--jobs", "4"], &[]);
    let c = run("c", &[], &[("QASSERT_SEED", "42")]);
    let d = run("d", &["--seed", "43"], &[]);
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert_ne!(a, d);
    let counts: CountsFile = serde_json::from_str(&a[1]).unwrap();
    assert_eq!(counts.shots, 1000);
    assert_eq!(counts.seed, Some(42));
    assert_eq!(counts.bit_order.len(), 4);
}

#[test]
fn verify_rejects_unusable_counts() {
    let dir = TempDir::new().unwrap();
    let input = write(dir.path(), "bv.qasm", BV);
    let out = dir.path().join("run");
    assert_eq!(code(&qassert(&["translate", s(&input), "--out", s(&out)])), 0);
    let manifest = out.join("slices.json");

    let o = qassert(&["verify", s(&manifest)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("missing"), "{}", stderr(&o));

    assert_eq!(code(&qassert(&["simulate", s(&manifest), "--shots", "100"])), 0);
    let path = out.join("counts_2.json");
    let mut c: CountsFile = read_json(&path);
    c.bit_order.swap(0, 1);
    fs::write(&path, serde_json::to_string(&c).unwrap()).unwrap();
    let o = qassert(&["verify", s(&manifest)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("bit order"), "{}", stderr(&o));

    c.bit_order.swap(0, 1);
    c.shots += 1;
    fs::write(&path, serde_json::to_string(&c).unwrap()).unwrap();
    assert_eq!(code(&qassert(&["verify", s(&manifest)])), 2);

    assert_eq!(code(&qassert(&["verify", s(&manifest), "--alpha", "1.5"])), 2);
}

#[test]
fn a_tampered_listing_is_refused() {
    let dir = TempDir::new().unwrap();
    let input = write(dir.path(), "bv.qasm", BV);
    let out = dir.path().join("run");
    assert_eq!(code(&qassert(&["translate", s(&input), "--out", s(&out)])), 0);
    let p = out.join("slice_1.qasm");
    let text = fs::read_to_string(&p).unwrap().replace("x anc[0];", "");
    fs::write(&p, text).unwrap();
    let o = qassert(&["simulate", s(&out.join("slices.json"))]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("digest"));
}

#[test]
fn input_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let none = write(dir.path(), "none.qasm", "qreg q[1]; h q[0];");
    let o = qassert(&["translate", s(&none), "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("no assertions found"));

    let bad = write(dir.path(), "bad.qasm", "qreg q[1];\nh q[0]\nassert-sup q[0];");
    let o = qassert(&["translate", s(&bad)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("bad.qasm:3:"), "{}", stderr(&o));

    let o = qassert(&["translate", s(&dir.path().join("missing.qasm"))]);
    assert_eq!(code(&o), 2);

    let input = write(dir.path(), "bv.qasm", BV);
    for (name, doc) in [
        ("empty.json", ""),
        ("nodefault.json", r#"{"gate_error": {}, "measurement_error": {"default": 0.02}}"#),
        ("high.json", r#"{"gate_error": {"default": 1.5}, "measurement_error": {"default": 0.02}}"#),
    ] {
        let device = write(dir.path(), name, doc);
        let o = qassert(&["check", s(&input), "--out", s(&dir.path().join("c")), "--device", s(&device)]);
        assert_eq!(code(&o), 2, "{name}");
        assert!(stderr(&o).contains(name), "{}", stderr(&o));
    }
}

#[test]
fn wide_slices_hit_the_simulation_cap() {
    let dir = TempDir::new().unwrap();
    let input = write(dir.path(), "wide.qasm", "qreg q[25];\nh q[0];\nassert-sup q[0];\n");
    let out = dir.path().join("run");
    assert_eq!(code(&qassert(&["translate", s(&input), "--out", s(&out)])), 0);
    let o = qassert(&["simulate", s(&out.join("slices.json"))]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("cap"), "{}", stderr(&o));
}

#[test]
fn bell_pair_mutation_is_caught() {
    let dir = TempDir::new().unwrap();
    for (mutate, want) in [(false, 0), (true, 1)] {
        let input = write(dir.path(), "pairs.qasm", &bell_pairs(8, mutate));
        let out = dir.path().join(format!("run{mutate}"));
        let o = qassert(&["check", s(&input), "--out", s(&out), "--shots", "400", "--seed", "3", "--ideal"]);
        assert_eq!(code(&o), want, "{}", String::from_utf8_lossy(&o.stdout));
    }
}

fn recommend(manifest: &Path, extra: &[&str]) -> RecommendFile {
    let mut args = vec!["recommend", s(manifest), "--json", "--seed", "5"];
    args.extend_from_slice(extra);
    let o = qassert(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn recommend_reports_every_assertion() {
    let dir = TempDir::new().unwrap();
    let input = write(dir.path(), "pairs.qasm", &bell_pairs(8, false));
    let device = write(dir.path(), "dev.json", DEVICE);
    let out = dir.path().join("run");
    assert_eq!(code(&qassert(&["translate", s(&input), "--out", s(&out)])), 0);
    let manifest = out.join("slices.json");

    let r = recommend(&manifest, &["--device", s(&device)]);
    assert_eq!(r.assertions.len(), 1);
    let n = r.program.unwrap();
    assert!((100..=1600).contains(&n), "{n}");
    assert_eq!(r.config.model, "example");
    assert!(r.assertions[0].f < 1.0);
    assert_eq!(recommend(&manifest, &["--device", s(&device), "--jobs", "3"]), r);

    let loose = recommend(&manifest, &["--alpha", "0.5"]).program.unwrap();
    let strict = recommend(&manifest, &["--alpha", "0.05"]).program.unwrap();
    assert!(loose >= strict, "{loose} < {strict}");

    let capped = recommend(&manifest, &["--cap", "32", "--device", s(&device)]);
    assert_eq!(capped.program, None);
    assert!(capped.assertions[0].warning.is_some());
}

#[test]
fn one_hot_program_needs_the_grid_start() {
    let dir = TempDir::new().unwrap();
    let input = write(dir.path(), "oh.qasm", "qreg q[3];\nx q[0];\nx q[2];\nassert-eq q = |101>;\n");
    let out = dir.path().join("run");
    assert_eq!(code(&qassert(&["translate", s(&input), "--out", s(&out)])), 0);
    let r = recommend(&out.join("slices.json"), &[]);
    assert_eq!(r.program, Some(16));
    let text = qassert(&["recommend", s(&out.join("slices.json"))]);
    assert!(String::from_utf8_lossy(&text.stdout).contains("program recommendation: 16 shots"));
}

#[test]
fn amplitudes_can_be_pasted_into_an_assertion() {
    let dir = TempDir::new().unwrap();
    let prep = "qreg q[2];\nh q[0];\ncx q[0], q[1];\ns q[1];\n";
    let input = write(dir.path(), "prep.qasm", prep);
    let o = qassert(&["amplitudes", s(&input)]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let list = text.lines().nth(1).unwrap();
    assert_eq!(text.lines().next().unwrap(), "// q[0], q[1]");

    let asserted = write(dir.path(), "a.qasm", &format!("{prep}assert-eq q[0], q[1] = {list};\n"));
    let o = qassert(&["check", s(&asserted), "--out", s(&dir.path().join("run")), "--ideal"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}
