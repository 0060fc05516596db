use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const GAUSSIAN_PRICE: &str = r#"
scenario_id = "g-price"
task = "price"

[model]
family = "gaussian"
d = { kind = "power", offset = 1.0, coef = 1.0, exponent = -1.0 }
gamma2 = { kind = "constant", value = 0.1 }

[grid]
n = [1, 4]
q = [0.0]
"#;

const GAUSSIAN_RATES: &str = r#"
scenario_id = "g-rates"
task = "rates"

[model]
family = "gaussian"
d = { kind = "power", offset = 1.0, coef = 1.0, exponent = -1.0 }
gamma2 = { kind = "power", coef = 1.0, exponent = -1.0 }
limit_d = 1.0

[schedules]
p_tilde = { kind = "constant", value = 0.7 }

[grid]
n = [10, 1000, 100000, 1000000, 10000000]
"#;

const MC_SWEEP: &str = r#"
scenario_id = "mc-sweep"
task = "sweep"
seed = 11

[model]
family = "basis_risk"
method = "monte_carlo"

[model.params]
mu = { kind = "constant", value = 0.1 }
sigma = { kind = "constant", value = 0.2 }
b = { kind = "constant", value = 0.0 }
a_y = { kind = "constant", value = 0.3 }
rho_schedule = { kind = "correlation_from_rate", rate = { kind = "power", coef = 1.0, exponent = 1.0 } }
maturity = 1.0
y0 = 0.0
payoff = { kind = "tanh" }
mc = { paths = 4000 }

[grid]
n = [4, 16]
ell = [0.5]
"#;

struct Scratch {
    dir: tempfile::TempDir,
}

impl Scratch {
    fn new() -> Self {
        Scratch {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn file(&self, name: &str, body: &str) -> PathBuf {
        let p = self.dir.path().join(name);
        fs::write(&p, body).unwrap();
        p
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn indiff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_indiff")).args(args).output().unwrap()
}

fn run_ok(config: &Path, extra: &[&str]) -> String {
    let mut args = vec!["--config", config.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = indiff(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// `(n, key, value)` triples of a CSV report.
fn parse_csv(text: &str) -> Vec<(String, String, String)> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(rd.headers().unwrap(), vec!["scenario_id", "n", "key", "value"]);
    rd.records()
        .map(|r| {
            let r = r.unwrap();
            (r[1].to_string(), r[2].to_string(), r[3].to_string())
        })
        .collect()
}

#[test]
fn missing_family_exits_with_config_status() {
    let s = Scratch::new();
    let cfg = s.file("c.toml", &GAUSSIAN_PRICE.replace("family = \"gaussian\"\n", ""));
    let out = indiff(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("family"));
}

#[test]
fn unknown_key_exits_with_config_status() {
    let s = Scratch::new();
    let cfg = s.file("c.toml", &GAUSSIAN_PRICE.replace("[grid]", "[grid]\nqs = [1.0]"));
    let out = indiff(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("qs"));
}

#[test]
fn model_error_exits_with_run_status_and_names_error() {
    let s = Scratch::new();
    let body = GAUSSIAN_PRICE.replace(
        "gamma2 = { kind = \"constant\", value = 0.1 }",
        "gamma2 = { kind = \"constant\", value = -1.0 }",
    );
    let cfg = s.file("c.toml", &body);
    let out = indiff(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: domain_error"));
}

#[test]
fn zero_quantity_price_is_marginal_price() {
    let s = Scratch::new();
    let rows = parse_csv(&run_ok(&s.file("c.toml", GAUSSIAN_PRICE), &[]));
    let price = |n: &str| {
        rows.iter()
            .find(|r| r.0 == n && r.1 == "price[q=0.0]")
            .map(|r| r.2.parse::<f64>().unwrap())
            .unwrap()
    };
    assert_eq!(price("1"), 2.0);
    assert_eq!(price("4"), 1.25);
}

#[test]
fn rates_final_ratio_approaches_limit() {
    let s = Scratch::new();
    let rows = parse_csv(&run_ok(&s.file("c.toml", GAUSSIAN_RATES), &[]));
    let last = rows.iter().rfind(|r| r.1 == "ratio").unwrap();
    assert_eq!(last.0, "10000000");
    let ratio: f64 = last.2.parse().unwrap();
    assert!((ratio - 0.3).abs() < 1e-6, "{ratio}");
    assert!(rows.iter().any(|r| r.1 == "q_hat"));
    assert!(rows.iter().any(|r| r.1 == "verdict"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let s = Scratch::new();
    for (name, body) in [("rates.toml", GAUSSIAN_RATES), ("mc.toml", MC_SWEEP)] {
        let cfg = s.file(name, body);
        let a = run_ok(&cfg, &[]);
        let b = run_ok(&cfg, &[]);
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn seed_flag_changes_monte_carlo_output() {
    let s = Scratch::new();
    let cfg = s.file("mc.toml", MC_SWEEP);
    let a = run_ok(&cfg, &[]);
    let b = run_ok(&cfg, &["--seed", "12"]);
    assert_ne!(a, b);
    assert!(parse_csv(&a).iter().any(|r| r.1 == "stderr[ell=0.5]"));
}

#[test]
fn file_output_writes_manifest() {
    let s = Scratch::new();
    let cfg = s.file("c.toml", GAUSSIAN_PRICE);
    let out = s.path("result.csv");
    let stdout = run_ok(&cfg, &["--out", out.to_str().unwrap()]);
    assert!(stdout.is_empty());
    let rows = parse_csv(&fs::read_to_string(&out).unwrap());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(s.path("result.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["scenario_id"], "g-price");
    assert_eq!(manifest["task"], "price");
    assert_eq!(manifest["family"], "gaussian");
    assert_eq!(manifest["rows"], rows.len());
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert!(manifest["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn jsonl_format_emits_one_object_per_row() {
    let s = Scratch::new();
    let cfg = s.file("c.toml", GAUSSIAN_PRICE);
    let csv_rows = parse_csv(&run_ok(&cfg, &[]));
    let text = run_ok(&cfg, &["--format", "jsonl"]);
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), csv_rows.len());
    assert!(lines.iter().all(|v| v["scenario_id"] == "g-price"));
    assert!(lines.iter().any(|v| v["key"] == "price[q=0.0]" && v["n"] == 1 && v["value"] == 2.0));
}
