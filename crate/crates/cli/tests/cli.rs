use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn metamr(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metamr"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn job(dir: &Path, extra: &str) {
    let out = metamr(
        &["gen", "--out", "data", "--n", "120", "--distinct-keys", "15", "--zipf", "1.1", "--heavy-hitters", "1", "--seed", "5"],
        dir,
    );
    assert!(out.status.success());
    fs::write(
        dir.join("job.toml"),
        format!(
            "mode = \"meta\"\nq = 8192\nseed = 5\n{extra}\n\
             [[relations]]\npath = \"data/X.tsv\"\n\n[[relations]]\npath = \"data/Y.tsv\"\n\n\
             [[rounds]]\nleft = \"X\"\nright = \"Y\"\njoin = [\"B\"]\nstrategy = \"skew\"\n"
        ),
    )
    .unwrap();
}

#[test]
fn repeated_runs_write_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    job(dir.path(), "");
    for (name, flags) in [("a.json", vec![]), ("b.json", vec![]), ("c.json", vec!["--parallel"])] {
        let mut args = vec!["run", "job.toml", "--report", name];
        args.extend(flags);
        assert!(metamr(&args, dir.path()).status.success());
    }
    let a = fs::read(dir.path().join("a.json")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, fs::read(dir.path().join("b.json")).unwrap());
    assert_eq!(a, fs::read(dir.path().join("c.json")).unwrap());
}

#[test]
fn verify_accepts_a_correct_run() {
    let dir = tempfile::tempdir().unwrap();
    job(dir.path(), "hashed = true");
    let out = metamr(&["verify", "job.toml"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("verify: ok"));
    let out = metamr(&["verify", "job.toml", "--mode", "classic", "--unit-cost"], dir.path());
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn bad_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(metamr(&["run", "missing.toml"], dir.path()).status.code(), Some(2));
    assert_eq!(metamr(&["bound", "two-way", "--n", "3"], dir.path()).status.code(), Some(2));
    assert_eq!(metamr(&["bound", "no-such-kind"], dir.path()).status.code(), Some(2));
    fs::write(dir.path().join("bad.toml"), "q = 1\nsurprise = 2\nrelations = []\nrounds = []\n").unwrap();
    assert_eq!(metamr(&["run", "bad.toml"], dir.path()).status.code(), Some(2));
}

#[test]
fn bound_prints_the_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = metamr(&["bound", "two-way", "--n", "100", "--c", "16", "--w", "256", "--h", "10"], dir.path());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "5920");
}

#[test]
fn demos_reproduce_the_worked_examples() {
    let dir = tempfile::tempdir().unwrap();
    let report = |args: &[&str]| -> serde_json::Value {
        let out = metamr(args, dir.path());
        assert!(out.status.success(), "{args:?}");
        serde_json::from_slice(&out.stdout).unwrap()
    };
    let f2 = report(&["demo", "fig2"]);
    assert_eq!(f2["total"], 4);
    assert_eq!(f2["classic_total"], 12);
    assert_eq!(f2["savings"], 8);
    assert_eq!(report(&["demo", "fig5", "--mode", "classic"])["total"], 208);
    assert_eq!(report(&["demo", "fig5"])["total"], 36);
    assert_eq!(report(&["demo", "knn"])["neighbors"][0][1], serde_json::json!([7, 0]));
    assert_eq!(report(&["demo", "socialgraph"])["hops"], 5);
    let path = dir.path().join("fig2.json");
    assert!(metamr(&["demo", "fig2", "--report", path.to_str().unwrap()], dir.path()).status.success());
    assert!(fs::read_to_string(path).unwrap().contains("\"savings\": 8"));
}
