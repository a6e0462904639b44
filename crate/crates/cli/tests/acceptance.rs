//! Acceptance suite: runs every config in `acceptance/` through the binary and
//! re-checks the reported numbers against tolerances pinned here, printing one
//! PASS/FAIL line per criterion.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use serde_json::Value;

struct Run {
    exit: i32,
    summary: Value,
    dir: PathBuf,
    elapsed: Duration,
}

impl Run {
    fn check(&self, name: &str) -> f64 {
        self.summary["checks"]
            .as_array()
            .and_then(|cs| cs.iter().find(|c| c["name"] == name))
            .and_then(|c| c["value"].as_f64())
            .unwrap_or(f64::NAN)
    }
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("acceptance").join(name)
}

fn run(name: &str, out: &Path, seed: Option<u64>) -> Run {
    let start = Instant::now();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_resolvent"));
    cmd.arg("--config").arg(config(name)).arg("--out").arg(out).arg("--quiet");
    if let Some(s) = seed {
        cmd.arg("--seed").arg(s.to_string());
    }
    let output = cmd.output().expect("binary runs");
    let elapsed = start.elapsed();
    if !output.stderr.is_empty() {
        eprint!("{}", String::from_utf8_lossy(&output.stderr));
    }
    let summary = std::fs::read_to_string(out.join("summary.json"))
        .ok()
        .and_then(|s| serde_json::from_str(&s).ok())
        .unwrap_or(Value::Null);
    Run { exit: output.status.code().unwrap_or(-1), summary, dir: out.to_path_buf(), elapsed }
}

fn csv_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).into_iter().flatten().flatten() {
        let name = entry.file_name().to_string_lossy().to_string();
        if name.ends_with(".csv") {
            out.insert(name, std::fs::read(entry.path()).unwrap_or_default());
        }
    }
    out
}

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, id: usize, title: &str, pass: bool, detail: String) {
        if !pass {
            self.failures += 1;
        }
        println!("[{}] {:>2}. {:<34} {}", if pass { "PASS" } else { "FAIL" }, id, title, detail);
    }
}

fn main() {
    let scratch = tempfile::tempdir().expect("temp dir");
    let dir = |tag: &str| scratch.path().join(tag);
    let mut report = Report { failures: 0 };
    println!("acceptance suite");

    let r = run("01-free-calibration.toml", &dir("01"), None);
    let dev = r.check("point_mass_amplitude_deviation");
    report.line(
        1,
        "free-propagator calibration",
        r.exit == 0 && dev <= 0.05 && r.elapsed <= Duration::from_secs(120),
        format!("max |ratio − 1| = {dev:.3e} (≤ 5e-2), {:.1}s (≤ 120s)", r.elapsed.as_secs_f64()),
    );

    let r = run("02-well-decay.toml", &dir("02"), None);
    let alpha = r.check("alpha");
    let oracle = r.check("oracle_max_relative_difference");
    report.line(
        2,
        "dispersive decay, unit well",
        r.exit == 0 && (1.35..=1.65).contains(&alpha) && oracle <= 0.05 && r.elapsed <= Duration::from_secs(600),
        format!(
            "alpha = {alpha:.4} (in [1.35, 1.65]), oracle diff = {oracle:.3e} (≤ 5e-2), {:.1}s (≤ 600s)",
            r.elapsed.as_secs_f64()
        ),
    );
    let well_decay = r;

    let r = run("03-resonance-threshold.toml", &dir("03"), None);
    let err = r.check("threshold_depth_relative_error");
    let depth = r.summary["metrics"]["threshold_depth"].as_f64().unwrap_or(f64::NAN);
    report.line(
        3,
        "resonance threshold depth",
        r.exit == 0 && err <= 0.02 && r.elapsed <= Duration::from_secs(120),
        format!("V0* = {depth:.6}, rel err vs π²/4 = {err:.3e} (≤ 2e-2), {:.1}s (≤ 120s)", r.elapsed.as_secs_f64()),
    );

    let r = run("04-kato-norm.toml", &dir("04"), None);
    let err = r.check("kato_relative_error");
    report.line(4, "Kato norm of unit-ball indicator", r.exit == 0 && err <= 0.01, format!("rel err vs 2π = {err:.3e} (≤ 1e-2)"));

    let r = run("05-statphase.toml", &dir("05"), None);
    let slack = r.check("min_slack");
    let expo = r.check("t_exponent");
    report.line(
        5,
        "stationary-phase constant",
        r.exit == 0 && slack >= 0.0 && (expo + 1.5).abs() <= 0.1,
        format!("min slack = {slack:.3e} (≥ 0), t-exponent = {expo:.4} (−1.5 ± 0.1)"),
    );

    let r = run("06-kato-iterated.toml", &dir("06"), None);
    let slack = r.check("iterated_bound_slack");
    let centre = r.check("centre_equality_relative_error");
    report.line(
        6,
        "iterated Kato integrals",
        r.exit == 0 && slack >= 0.0 && centre <= 0.01,
        format!("min relative slack = {slack:.3e} (≥ 0), k=1 centre vs 4π = {centre:.3e} (≤ 1e-2)"),
    );
    let iterated = r;

    let r = run("07-mapping-exponent.toml", &dir("07"), None);
    let e = r.check("mapping_exponent");
    report.line(7, "mapping-norm λ-exponent, p = 4/3", r.exit == 0 && (e + 0.5).abs() <= 0.1, format!("exponent = {e:.4} (−0.5 ± 0.1)"));

    let r = run("08-derivative-norm.toml", &dir("08"), None);
    let d = r.check("derivative_norm_deviation");
    report.line(8, "derivative-resolvent 1→∞ norm", r.exit == 0 && d <= 1e-10, format!("max |norm − 1/4π| = {d:.3e} (≤ 1e-10)"));

    let r = run("09-born-identity.toml", &dir("09"), None);
    let e = r.check("identity_max_relerr");
    report.line(9, "Born series + remainder identity", r.exit == 0 && e <= 1e-6, format!("max relerr = {e:.3e} (≤ 1e-6)"));

    let r = run("10-ibp.toml", &dir("10"), None);
    let e = r.check("relerr");
    let gain = r.check("refinement_gain");
    report.line(
        10,
        "integration by parts in λ",
        r.exit == 0 && e <= 1e-3 && gain >= 2.0,
        format!("relerr = {e:.3e} (≤ 1e-3), half-step gain = {gain:.2} (≥ 2)"),
    );

    let r = run("11-neumann.toml", &dir("11"), None);
    let e = r.check("neumann_max_difference");
    let found = r.check("neumann_crossing_found") == 1.0;
    let crossing = r.summary["metrics"]["crossing"].as_f64().unwrap_or(f64::NAN);
    report.line(
        11,
        "Neumann regime past the crossing",
        r.exit == 0 && found && e <= 1e-6,
        format!("crossing λ = {crossing:.3}, max |Neumann − direct| = {e:.3e} (≤ 1e-6)"),
    );

    let mut identical = true;
    let mut compared = 0;
    for (tag, first, name) in [("06b", &iterated, "06-kato-iterated.toml"), ("02b", &well_decay, "02-well-decay.toml")] {
        let again = run(name, &dir(tag), None);
        let (a, b) = (csv_bytes(&first.dir), csv_bytes(&again.dir));
        identical &= !a.is_empty() && a == b;
        compared += a.len();
    }
    let seeded_a = run("06-kato-iterated.toml", &dir("06c"), Some(99));
    let seeded_b = run("06-kato-iterated.toml", &dir("06d"), Some(99));
    let (a, b) = (csv_bytes(&seeded_a.dir), csv_bytes(&seeded_b.dir));
    identical &= !a.is_empty() && a == b;
    compared += a.len();
    report.line(12, "determinism of reruns", identical, format!("{compared} CSV files byte-compared across reruns"));

    println!("{} of 12 criteria passed", 12 - report.failures);
    if report.failures > 0 {
        std::process::exit(1);
    }
}
