use std::path::Path;
use std::process::{Command, Output};

use resilient_optsim::reference::two_integrators;
use resilient_optsim::timefn::TimeFn;
use resilient_optsim::Scenario;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_resilient-optsim"));
    c.env_remove("RESILIENT_OPTSIM_SEED");
    c
}

fn run(cmd: &mut Command) -> (i32, String, String) {
    let Output { status, stdout, stderr } = cmd.output().unwrap();
    (
        status.code().unwrap(),
        String::from_utf8(stdout).unwrap(),
        String::from_utf8(stderr).unwrap(),
    )
}

fn write_scenario(dir: &Path, name: &str, s: &Scenario) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, s.to_json()).unwrap();
    p
}

fn quick() -> Scenario {
    let mut s = two_integrators();
    s.sim.horizon = 3.0;
    s
}

fn seed_in(dir: &Path) -> u64 {
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("metrics.json")).unwrap()).unwrap();
    m["seed"].as_u64().unwrap()
}

#[test]
fn graph_check_reports() {
    let (code, out, _) = run(bin().args(["graph-check", "--edges", "1-2", "--r", "1"]));
    assert_eq!(code, 0);
    assert!(out.contains("(1,1)-connected true"));
    assert!(out.contains("0-isolatable true"));
    assert!(out.contains("witnessed"));

    let (code, out, _) = run(bin().args(["graph-check", "--edges", "1-2,1-3,1-4,1-5", "--r", "2"]));
    assert_eq!(code, 0);
    assert!(out.contains("(2,1)-connected false"));

    let (code, out, _) = run(bin().args(["graph-check", "--edges", "1-2,1-3,1-4,2-3,2-4,3-4", "--r", "2"]));
    assert_eq!(code, 0);
    assert!(out.contains("lambda2 4.000000"));
    assert!(out.contains("(2,1)-connected true"));
    assert!(out.contains("1-isolatable true"));
}

#[test]
fn graph_check_reads_json_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("g.json");
    std::fs::write(&p, r#"{"nodes": 4, "edges": [[1, 2], [2, 3, 0.5], [3, 4]]}"#).unwrap();
    let (code, out, _) = run(bin().args(["graph-check", "--edges"]).arg(&p));
    assert_eq!(code, 0);
    assert!(out.contains("nodes 4, edges 3"));
    assert!(out.contains("connected true"));
}

#[test]
fn malformed_edges_exit_1() {
    for bad in ["1-x", "1-1", "0-2", "nothing"] {
        let (code, _, err) = run(bin().args(["graph-check", "--edges", bad]));
        assert_eq!(code, 1, "{bad}: {err}");
    }
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("g.json");
    std::fs::write(&p, "[[1, 2],").unwrap();
    let (code, _, _) = run(bin().args(["graph-check", "--edges"]).arg(&p));
    assert_eq!(code, 1);
}

#[test]
fn missing_or_unparsable_scenario_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run(bin().args(["simulate", "--scenario", "/no/such/file.json", "--out"]).arg(dir.path()));
    assert_eq!(code, 1);
    assert!(err.contains("/no/such/file.json"));
    let p = dir.path().join("bad.json");
    std::fs::write(&p, "{\"name\": 3").unwrap();
    let (code, _, _) = run(bin().args(["validate", "--scenario"]).arg(&p));
    assert_eq!(code, 1);
}

#[test]
fn simulate_writes_four_stable_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_scenario(dir.path(), "s.json", &quick());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let (code, stdout, err) = run(bin().args(["simulate", "--scenario"]).arg(&p).arg("--out").arg(out));
        assert_eq!(code, 0, "{err}");
        assert!(stdout.contains("two-integrators"));
    }
    for f in ["states.csv", "edges.csv", "events.csv", "metrics.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn low_thresholds_exit_2_with_the_time() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = quick();
    s.thresholds.f_delta = TimeFn::Const { value: 0.5 };
    let p = write_scenario(dir.path(), "s.json", &s);
    let (code, _, err) = run(bin().args(["simulate", "--scenario"]).arg(&p).arg("--out").arg(dir.path().join("o")));
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("t = 0"), "{err}");
    let (code, _, _) = run(bin().args(["validate", "--scenario"]).arg(&p));
    assert_eq!(code, 2);
}

#[test]
fn absurd_gains_exit_3_with_the_time() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = quick();
    s.gains.rho = 1e4;
    s.sim.dt = 0.01;
    let p = write_scenario(dir.path(), "s.json", &s);
    let (code, _, err) = run(bin().args(["simulate", "--scenario"]).arg(&p).arg("--out").arg(dir.path().join("o")));
    assert_eq!(code, 3, "{err}");
    assert!(err.contains("numerical abort at t ="), "{err}");
}

#[test]
fn seed_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = quick();
    s.sim.seed = 5;
    let p = write_scenario(dir.path(), "s.json", &s);
    let go = |out: &str, env: Option<&str>, flag: Option<&str>| {
        let mut cmd = bin();
        cmd.args(["simulate", "--scenario"]).arg(&p).arg("--out").arg(dir.path().join(out));
        if let Some(e) = env {
            cmd.env("RESILIENT_OPTSIM_SEED", e);
        }
        if let Some(f) = flag {
            cmd.args(["--seed", f]);
        }
        assert_eq!(run(&mut cmd).0, 0);
        seed_in(&dir.path().join(out))
    };
    assert_eq!(go("file", None, None), 5);
    assert_eq!(go("env", Some("11"), None), 11);
    assert_eq!(go("flag", Some("11"), Some("13")), 13);
}

#[test]
fn parallel_jobs_write_one_directory_per_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let p1 = write_scenario(dir.path(), "first.json", &quick());
    let mut other = quick();
    other.name = "other".into();
    let p2 = write_scenario(dir.path(), "second.json", &other);
    let out = dir.path().join("out");
    let (code, stdout, err) = run(bin()
        .args(["simulate", "--jobs", "2", "--dt", "0.002", "--scenario"])
        .arg(&p1)
        .arg(&p2)
        .arg("--out")
        .arg(&out));
    assert_eq!(code, 0, "{err}");
    assert!(stdout.find("two-integrators").unwrap() < stdout.find("scenario other").unwrap());
    for sub in ["first", "second"] {
        assert!(out.join(sub).join("metrics.json").exists());
    }
}

#[test]
fn paper_example_without_attacks() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, err) = run(bin().args(["paper-example", "--no-attack", "--out"]).arg(dir.path()));
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("0 isolations"));
    for f in ["states.csv", "edges.csv", "events.csv", "metrics.json", "plot.py", "scenario.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let s = Scenario::load(&dir.path().join("scenario.json")).unwrap();
    assert!(s.attacks.is_empty());
}

#[test]
fn paper_example_isolates_both_attackers() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, err) = run(bin().args(["paper-example", "--out"]).arg(dir.path()));
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("quarantined [1, 2]"), "{stdout}");
}
