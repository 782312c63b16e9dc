use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

fn vk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vk"))
        .args(args)
        .env_remove("VK_SEED")
        .output()
        .expect("binary runs")
}

fn vk_path(args: &[&str], path: &Path) -> Output {
    let mut all: Vec<&str> = args.to_vec();
    all.insert(1, path.to_str().unwrap());
    vk(&all)
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn f5_route_witness_connects_sort_and_type() {
    let o = vk_path(&["check", "--method", "route", "--witness"], &fixture("f5.json"));
    assert_eq!(code(&o), 1);
    let out = stdout(&o);
    assert!(out.starts_with("NotVK"), "{out}");
    assert!(out.contains("sort: V"), "{out}");
    for line in out.lines().filter(|l| l.starts_with("p1:") || l.starts_with("p2:")) {
        assert!(line.contains("(Sort,") && line.contains(",Type)"), "{line}");
    }
}

#[test]
fn f4_bruteforce_is_vk() {
    let o = vk_path(&["check", "--method", "bruteforce"], &fixture("f4.json"));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn f1_minimal_precondition_fails() {
    let o = vk_path(&["check", "--method", "minimal"], &fixture("f1.json"));
    assert_eq!(code(&o), 3);
}

#[test]
fn exit_codes_agree_across_methods() {
    let methods = ["route", "bruteforce", "combined", "cyclic", "minimal"];
    for (f, expected) in [
        ("f4.json", 0),
        ("f5prime.json", 0),
        ("f5.json", 1),
        ("f2.json", 1),
        ("f6.json", 1),
    ] {
        for m in methods {
            let o = vk_path(&["check", "--method", m], &fixture(f));
            let c = code(&o);
            assert!(c == expected || c == 3, "{f} {m}: exit {c}");
        }
        for cond in ["different", "disjoint", "disjoint-icf"] {
            let o = vk_path(&["check", "--method", "bruteforce", "--condition", cond], &fixture(f));
            assert_eq!(code(&o), expected, "{f} {cond}");
        }
    }
}

#[test]
fn json_verdict_carries_canonical_witness() {
    let o = vk_path(&["check", "--json"], &fixture("f1.json"));
    assert_eq!(code(&o), 1);
    let v = json(&o);
    assert_eq!(v["result"], "NotVK");
    assert_eq!(v["canonical"]["p1"]["text"], "[]");
    assert_eq!(v["canonical"]["p2"]["text"], "[(*2,d^op,*1),(*1,d',*2)]");
    assert_eq!(v["route"]["terminal"], "not VK");
}

#[test]
fn simplify_flag_keeps_the_verdict() {
    for (f, expected) in [("f6.json", 1), ("f5prime.json", 0), ("f4.json", 0)] {
        let o = vk_path(&["check", "--simplify"], &fixture(f));
        assert_eq!(code(&o), expected, "{f}");
    }
}

#[test]
fn dangling_edge_is_reported_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(
        &p,
        r#"{
  "base": { "sorts": ["X"] },
  "shape": { "vertices": ["a"], "edges": [{ "name": "loose", "source": "a", "target": "nowhere" }] },
  "components": { "a": { "carriers": { "X": ["p"] } } },
  "arrows": { "loose": { "X": { "p": "p" } } }
}"#,
    )
    .unwrap();
    let o = vk_path(&["validate"], &p);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("loose"), "{}", stderr(&o));
}

#[test]
fn malformed_json_is_invalid_input() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("broken.json");
    std::fs::write(&p, "{ \"base\": ").unwrap();
    assert_eq!(code(&vk_path(&["check"], &p)), 2);
    assert_eq!(code(&vk_path(&["validate"], &dir.path().join("missing.json"))), 2);
}

#[test]
fn validate_reports_sizes() {
    let o = vk_path(&["validate"], &fixture("f4.json"));
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "ok: 2 components, 2 edges\n");
    let o = vk_path(&["validate"], &fixture("f5.json"));
    assert_eq!(stdout(&o), "ok: 6 components, 6 edges\n");
}

#[test]
fn colimit_outputs() {
    let v = json(&vk_path(&["colimit"], &fixture("f1.json")));
    assert_eq!(v["apex"]["carriers"]["X"].as_array().unwrap().len(), 1);
    let v = json(&vk_path(&["colimit"], &fixture("f7.json")));
    assert_eq!(v["apex"]["carriers"]["V"].as_array().unwrap().len(), 1);
    assert_eq!(v["apex"]["carriers"]["E"].as_array().unwrap().len(), 0);
    let o = vk_path(&["colimit", "--method", "specialized"], &fixture("f3.json"));
    assert_eq!(code(&o), 3);
    let u = json(&vk_path(&["colimit"], &fixture("f5.json")));
    let s = json(&vk_path(&["colimit", "--method", "specialized"], &fixture("f5.json")));
    for sort in ["E", "V"] {
        assert_eq!(
            u["apex"]["carriers"][sort].as_array().unwrap().len(),
            s["apex"]["carriers"][sort].as_array().unwrap().len()
        );
    }
}

#[test]
fn output_flag_writes_file_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let o = vk_path(&["colimit", "-o", p.to_str().unwrap()], &fixture("f5.json"));
        assert_eq!(code(&o), 0);
        assert!(o.stdout.is_empty());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn classify_f6() {
    let v = json(&vk_path(&["classify"], &fixture("f6.json")));
    let names = |k: &str| -> Vec<String> {
        v[k].as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_str().unwrap().to_string())
            .collect()
    };
    assert_eq!(names("minimal"), ["3", "8", "10"]);
    assert_eq!(names("branching"), ["4", "6"]);
    assert_eq!(names("irrelevant"), ["1", "2", "7"]);
    assert_eq!(names("jump_over"), ["5", "9"]);
    assert_eq!(names("affected_minimal"), ["8", "10"]);
    assert!(v["route"]["terminal"].is_string());
}

#[test]
fn pullback_then_unit_roundtrip_passes() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(fixture("f1.json"), dir.path().join("f1.json")).unwrap();
    let out = dir.path().join("sigma.json");
    let o = vk(&[
        "pullback",
        dir.path().join("f1.json").to_str().unwrap(),
        "--instance",
        "sigma",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(code(&vk_path(&["validate"], &out)), 0);
    let o = vk_path(&["roundtrip", "--kind", "unit"], &out);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let o = vk_path(&["pushforward"], &out);
    let v = json(&o);
    assert_eq!(v["instance"]["carriers"]["X"].as_array().unwrap().len(), 2);
}

#[test]
fn f7_unit_roundtrip_fails() {
    let o = vk_path(&["roundtrip", "--kind", "unit"], &fixture("f7.json"));
    assert_eq!(code(&o), 1);
    let v = json(&o);
    assert_eq!(v["pass"], false);
}

#[test]
fn counit_roundtrips_pass() {
    let o = vk_path(
        &["roundtrip", "--kind", "counit", "--instance", "sigma"],
        &fixture("f1.json"),
    );
    assert_eq!(code(&o), 0);
    let o = vk_path(
        &["roundtrip", "--kind", "counit", "--samples", "30"],
        &fixture("f5.json"),
    );
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["failed"], 0);
}

#[test]
fn vk_seed_overrides_seed_flag() {
    let run = |env: Option<&str>, seed: &str| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_vk"));
        c.args(["selftest", "--count", "20", "--seed", seed])
            .env_remove("VK_SEED");
        if let Some(e) = env {
            c.env("VK_SEED", e);
        }
        c.output().unwrap()
    };
    let a = run(Some("42"), "1");
    let b = run(None, "42");
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(
        serde_json::from_slice::<serde_json::Value>(&a.stdout).unwrap()["seed"],
        42
    );
    let bad = run(Some("x"), "1");
    assert_eq!(code(&bad), 2);
}

#[test]
fn dot_exports() {
    let o = vk_path(&["export-dot"], &fixture("f6.json"));
    let dot = stdout(&o);
    assert_eq!(dot.lines().filter(|l| l.contains("->")).count(), 9);
    assert_eq!(dot.lines().filter(|l| l.trim_end().ends_with("\";")).count(), 10);
    let o = vk_path(&["export-dot", "--witness"], &fixture("f5.json"));
    assert_eq!(code(&o), 1);
    let dot = stdout(&o);
    assert!(dot.contains("style=dashed") && dot.contains("style=dotted"));
    let again = stdout(&vk_path(&["export-dot", "--witness"], &fixture("f5.json")));
    assert_eq!(dot, again);
    let o = vk_path(&["export-dot", "--witness"], &fixture("f4.json"));
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
}
