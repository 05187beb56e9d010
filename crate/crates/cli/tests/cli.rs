use std::fs;
use std::path::Path;
use std::process::Command;

fn fracfp() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fracfp"))
}

fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn run(cfg: &Path, out: &Path, extra: &[&str]) -> i32 {
    let st = fracfp().arg("run").arg(cfg).arg("--out").arg(out).args(extra).status().unwrap();
    st.code().unwrap()
}

fn lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

#[test]
fn steady_suite_matches_the_cauchy_density() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "s.cfg", "name = s\nd = 1\nalpha = 1\ngamma = 2\nsuite = steady\n");
    let out = tmp.path().join("out");
    assert_eq!(run(&cfg, &out, &[]), 0);
    let report = lines(&out.join("report.txt"));
    assert!(report.iter().any(|l| l.starts_with("pass cauchy-L1-distance ")), "{report:?}");
    assert_eq!(report.last().unwrap(), "PASS");
    // n data rows plus the header; no run, so monitors.csv is the header alone
    let steady = lines(&out.join("steady.csv"));
    assert_eq!(steady.len(), 1024 + 1);
    assert_eq!(steady[0], "x,linear_solve,evolution,closed_form");
    assert_eq!(lines(&out.join("monitors.csv")), vec!["t,mass,min,L1m,L2m,Linfm,entropy"]);
}

#[test]
fn rates_suite_reports_a_positive_exponential_rate() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "r.cfg", "name = r\nalpha = 1\ngamma = 2.5\nn = 256\n");
    let out = tmp.path().join("out");
    let code = run(&cfg, &out, &["--suite", "rates"]);
    assert!(code == 0 || code == 1);
    let report = lines(&out.join("report.txt"));
    let rec = report.iter().find(|l| l.contains(" exponential-rate ")).expect("exponential-rate record");
    assert!(rec.starts_with("pass"), "{rec}");
    let a: f64 = rec.split("measured=").nth(1).unwrap().split(' ').next().unwrap().parse().unwrap();
    assert!(a > 0.0);
    let rates = lines(&out.join("rates.csv"));
    assert!(rates[0].starts_with("name,model,fitted"));
    assert!(rates.iter().any(|l| l.starts_with("exponential-rate,exponential,")));
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "e.json", "{\"name\": \"e\", \"alpha\": 1.5, \"gamma\": 2.5, \"n\": 128, \"horizon\": 2}");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let ca = run(&cfg, &a, &[]);
    let cb = run(&cfg, &b, &[]);
    assert_eq!(ca, cb);
    for f in ["monitors.csv", "steady.csv", "rates.csv", "report.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let mon = lines(&a.join("monitors.csv"));
    assert_eq!(mon.len(), 1 + 41);
    // 17 significant digits
    let first = mon[1].split(',').nth(1).unwrap();
    assert_eq!(first.split('e').next().unwrap().replace(['.', '-'], "").len(), 17, "{first}");
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let bad = write(tmp.path(), "bad.cfg", "d = 1\nalpha = 1\ngamma = 3\nk = 0.5\np = 2\n");
    let o = fracfp().arg("run").arg(&bad).arg("--out").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 5") && err.contains("p ≥ p_γ = 4/3"), "{err}");
    assert!(!out.exists());
    let unknown = write(tmp.path(), "u.cfg", "alpha = 1\ngamma = 2\ncolour = blue\n");
    assert_eq!(run(&unknown, &out, &[]), 2);
    let ok = write(tmp.path(), "ok.cfg", "alpha = 1\ngamma = 2\nn = 128\n");
    assert_eq!(run(&ok, &out, &["--suite", "bogus"]), 2);
    assert_eq!(run(&tmp.path().join("missing.cfg"), &out, &[]), 2);
    assert_eq!(fracfp().arg("run").status().unwrap().code(), Some(2));
}

#[test]
fn verification_failures_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    // too coarse for the closed-form comparison
    let cfg = write(tmp.path(), "c.cfg", "alpha = 1\ngamma = 2\nn = 64\nsuite = steady\n");
    let out = tmp.path().join("out");
    assert_eq!(run(&cfg, &out, &[]), 1);
    assert_eq!(lines(&out.join("report.txt")).last().unwrap(), "FAIL");
}

#[test]
fn batch_runs_each_scenario_into_its_own_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("cases");
    fs::create_dir(&dir).unwrap();
    write(&dir, "one.cfg", "name = one\nalpha = 1\ngamma = 2\nn = 128\nsuite = inequalities\n");
    write(&dir, "two.cfg", "name = two\nalpha = 1.5\ngamma = 2.5\nn = 128\nsuite = inequalities\n");
    let out = tmp.path().join("out");
    let pattern = format!("{}/*.cfg", dir.display());
    let st = fracfp().args(["run", "--batch", &pattern, "--out"]).arg(&out).status().unwrap();
    assert_eq!(st.code(), Some(0));
    for name in ["one", "two"] {
        assert_eq!(lines(&out.join(name).join("report.txt")).last().unwrap(), "PASS");
    }
}
