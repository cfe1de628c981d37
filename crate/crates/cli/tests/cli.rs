use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use shockdefault_cli::config::{Config, Overrides};
use shockdefault_cli::pipeline;
use shockdefault_cli::report::{self, Verdict};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_shockdefault"));
    c.env_remove("SHOCKDEFAULT_SEED");
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("config.toml");
    std::fs::write(&p, body).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn without_timing(jsonl: &str) -> String {
    jsonl.lines().filter(|l| !l.starts_with("{\"timing\"")).collect::<Vec<_>>().join("\n")
}

#[test]
fn geometric_fixture_prices_a_quarter() {
    let o = bin().args(["run"]).arg(configs().join("geometric.toml")).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.contains("predefault price at 0: 0.25"), "{}", text);
    assert!(text.lines().filter(|l| l.starts_with("PASS ")).count() >= 10);
    assert!(!text.contains("FAIL"));
}

#[test]
fn naive_formula_fails_on_jump_recovery_with_the_gap() {
    let o = bin().args(["run"]).arg(configs().join("jump-recovery.toml")).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.starts_with("PASS qtau-formula")), "{}", text);
    let naive = text.lines().find(|l| l.starts_with("FAIL naive-formula")).expect("naive line");
    let gap = text
        .lines()
        .find_map(|l| l.strip_prefix("naive formula gap at 0: "))
        .unwrap()
        .parse::<f64>()
        .unwrap();
    assert!(gap > 0.0);
    assert!(naive.contains(&format!("gap at time 0 = {}", shockdefault_cli::num::sig17(gap))), "{}", naive);
}

#[test]
fn csv_tables_have_the_fixed_headers() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["run", "--format", "csv", "--out"])
        .arg(dir.path())
        .arg(configs().join("geometric.toml"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let z = std::fs::read_to_string(dir.path().join("azema_z.csv")).unwrap();
    assert_eq!(z, "time_index,atom_id,value\n0,0,1\n1,0,0.5\n2,0,0.25\n");
    let split = std::fs::read_to_string(dir.path().join("premium_split.csv")).unwrap();
    assert!(split.starts_with("time_index,total_premium,idiosyncratic,shock_id,shock_premium\n"));
    assert!(split.contains("\n2,2,2,,0\n"), "{}", split);
    let checks = std::fs::read_to_string(dir.path().join("checks.csv")).unwrap();
    assert!(checks.lines().skip(1).all(|l| l.contains(",PASS,")));
}

#[test]
fn json_lines_round_trip_and_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let o = bin()
            .args(["run", "--format", "json-lines", "--out"])
            .arg(dir.path().join(sub))
            .arg(configs().join("random.toml"))
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0));
        std::fs::read_to_string(dir.path().join(sub).join("report.jsonl")).unwrap()
    };
    let (a, b) = (run("a"), run("a"));
    assert_eq!(without_timing(&a), without_timing(&b));
    let back = report::from_json_lines(a.as_bytes()).unwrap();
    assert_eq!(report::to_json_lines(&back), a);

    let cfg = Config::load(&configs().join("random.toml")).unwrap();
    let ov = Overrides {
        out: Some(dir.path().join("a").display().to_string()),
        ..Overrides::default()
    };
    let mut fresh = pipeline::run(&cfg.resolve(&ov, None).unwrap(), false).unwrap();
    fresh.timing_ms = back.timing_ms;
    assert_eq!(fresh, back);
}

#[test]
fn monte_carlo_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[model]\nfixture = \"cox-binomial\"\n[run]\nbackend = \"mc\"\narithmetic = \"double\"\npaths = 20000\nbatches = 50\nworkers = 3\n",
    );
    let run = || {
        let o = bin().args(["check", "--seed", "11", "--format", "json-lines"]).arg(&cfg).output().unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
        stdout(&o)
    };
    let a = run();
    assert!(a.contains("{\"mc\":"));
    assert!(!a.contains("{\"table\":"));
    assert_eq!(without_timing(&a), without_timing(&run()));
    let r = report::from_json_lines(a.as_bytes()).unwrap();
    assert!(r.mc.unwrap().within(3.0));
}

#[test]
fn seed_comes_from_the_environment_unless_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "checks = []\n[model.random]\nhorizon = 2\n");
    let o = bin().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let env = bin().arg("run").arg(&cfg).env("SHOCKDEFAULT_SEED", "5").output().unwrap();
    assert_eq!(env.status.code(), Some(0));
    assert!(stdout(&env).contains("model random-5"));
    let flag = bin().args(["run", "--seed", "6"]).arg(&cfg).env("SHOCKDEFAULT_SEED", "5").output().unwrap();
    assert!(stdout(&flag).contains("model random-6"));
}

#[test]
fn empty_check_list_gives_tables_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "checks = []\n[model]\nfixture = \"trinomial-two-shocks\"\n");
    let o = bin().args(["run", "--format", "json-lines"]).arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let r = report::from_json_lines(stdout(&o).as_bytes()).unwrap();
    assert!(r.checks.is_empty());
    assert!(r.tables.iter().any(|t| t.name == "shock_2_premium"));
}

#[test]
fn every_listed_check_appears_once() {
    let cfg = Config::parse("checks = [\"closed-form\", \"loss\", \"premium\"]\n[model]\nfixture = \"jump-recovery-shock\"\n")
        .unwrap();
    let r = pipeline::run(&cfg, true).unwrap();
    let names: Vec<&str> = r.checks.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(names, ["closed-form", "loss", "premium"]);
    assert_eq!(r.checks[0].verdict, Verdict::Skip);
    assert!(r.all_pass());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for body in [
        "[model]\nfixture = \"cox-binomial\"\ncolour = 1\n",
        "[model]\nfixture = \"no-such-fixture\"\n",
        "[model]\nfixture = \"cox-binomial\"\n[run]\nbackend = \"mc\"\n",
        "[model\n",
    ] {
        let cfg = write_config(dir.path(), body);
        let o = bin().arg("run").arg(&cfg).output().unwrap();
        assert_eq!(o.status.code(), Some(2), "{}", body);
        assert!(String::from_utf8_lossy(&o.stderr).contains("config error"));
    }
    let o = bin().arg("run").arg(dir.path().join("missing.toml")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_three_and_name_the_node() {
    // a positive hazard before the shock is announced leaves a negative
    // label weight where the shock then fails to occur
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
[model.custom]
horizon = 2
paths = [
  { moves = [0, 0], prob = "1/4" },
  { moves = [0, 1], prob = "1/4" },
  { moves = [1, 0], prob = "1/4" },
  { moves = [1, 1], prob = "1/4" },
]
target = [
  ["0", "1/10", "1/5"],
  ["0", "1/10", "9/20"],
  ["0", "1/10", "1/5"],
  ["0", "1/10", "9/20"],
]
shocks = [[-1, 2, -1, 2]]

[model.custom.claim]
maturity = 2
promised = 1
"#,
    );
    let o = bin().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("runtime error") && err.contains("node"), "{}", err);
}

#[test]
fn fixtures_are_listed() {
    let o = bin().arg("list-fixtures").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for name in shockdefault::fixtures::NAMES {
        assert!(text.contains(name));
    }
}
