//! Artifact writing: CSV curves, summary, gnuplot stubs and the manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Shortest round-trip formatting, so reruns are byte-identical.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: String,
    pub pass: bool,
}

#[derive(Debug, Default)]
pub struct Summary {
    pub metrics: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
}

impl Summary {
    pub fn metric(&mut self, key: &str, value: impl Into<Value>) {
        self.metrics.insert(key.to_string(), value.into());
    }

    pub fn float(&mut self, key: &str, value: f64) {
        self.metric(key, finite_or_null(value));
    }

    /// `value ≤ limit`.
    pub fn at_most(&mut self, name: &str, value: f64, limit: f64) {
        self.push(name, value, format!("<= {}", num(limit)), value <= limit);
    }

    /// `value ≥ limit`.
    pub fn at_least(&mut self, name: &str, value: f64, limit: f64) {
        self.push(name, value, format!(">= {}", num(limit)), value >= limit);
    }

    pub fn within(&mut self, name: &str, value: f64, lo: f64, hi: f64) {
        self.push(name, value, format!("in [{}, {}]", num(lo), num(hi)), (lo..=hi).contains(&value));
    }

    pub fn flag(&mut self, name: &str, pass: bool) {
        self.push(name, if pass { 1.0 } else { 0.0 }, "true".into(), pass);
    }

    fn push(&mut self, name: &str, value: f64, target: String, pass: bool) {
        self.checks.push(Check { name: name.to_string(), value, target, pass });
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self, command: &str) -> Value {
        let checks: Vec<Value> = self
            .checks
            .iter()
            .map(|c| json!({"name": c.name, "value": finite_or_null(c.value), "target": c.target, "pass": c.pass}))
            .collect();
        json!({"command": command, "pass": self.pass(), "metrics": self.metrics, "checks": checks})
    }
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

/// Output directory that remembers everything written to it.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::Io(format!("{}: {e}", root.display())))?;
        Ok(OutputDir { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        fs::write(self.path(name), bytes).map_err(|e| CliError::Io(format!("{name}: {e}")))?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    pub fn csv<R: AsRef<[String]>>(&mut self, name: &str, header: &[&str], rows: &[R]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r.as_ref())?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        self.write(name, &bytes)
    }

    pub fn json(&mut self, name: &str, value: &Value) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Two-column whitespace data file plus a gnuplot script that reads it by
    /// relative path. `guide_slope` adds a `t^{slope}` reference line anchored
    /// at the first sample.
    pub fn plot(
        &mut self,
        csv_name: &str,
        x: &str,
        y: &str,
        log_log: bool,
        guide_slope: Option<f64>,
    ) -> Result<(), CliError> {
        let (dat, script) = emit_plot_data(&self.path(csv_name), x, y, log_log, guide_slope)?;
        let stem = csv_name.trim_end_matches(".csv");
        self.write(&format!("{stem}.dat"), dat.as_bytes())?;
        let script = script.replace("@DATA@", &format!("{stem}.dat")).replace("@PNG@", &format!("{stem}.png"));
        self.write(&format!("{stem}.gp"), script.as_bytes())
    }

    /// Writes `manifest.json` listing every artifact with its checksum.
    pub fn manifest(&mut self, command: &str, config: &Value, input_hash: &str, seed: u64) -> Result<(), CliError> {
        let mut files = Vec::new();
        for name in &self.files {
            let bytes = fs::read(self.path(name))?;
            files.push(json!({"file": name, "bytes": bytes.len(), "sha256": sha256_hex(&bytes)}));
        }
        let manifest = json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "seed": seed,
            "input_sha256": input_hash,
            "config": config,
            "outputs": files,
        });
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.path("manifest.json"), text)?;
        Ok(())
    }
}

/// Reads `x`/`y` columns from a CSV and returns `(data, script)`; the script
/// uses `@DATA@`/`@PNG@` placeholders for the relative file names.
pub fn emit_plot_data(csv_path: &Path, x: &str, y: &str, log_log: bool, guide_slope: Option<f64>) -> Result<(String, String), CliError> {
    let mut reader = csv::Reader::from_path(csv_path).map_err(|e| CliError::Plot(format!("{}: {e}", csv_path.display())))?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| CliError::Plot(format!("{}: no column '{name}'", csv_path.display())))
    };
    let (ix, iy) = (col(x)?, col(y)?);
    let mut points = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let parse = |i: usize| rec.get(i).and_then(|s| s.parse::<f64>().ok());
        if let (Some(a), Some(b)) = (parse(ix), parse(iy)) {
            if !log_log || (a > 0.0 && b > 0.0) {
                points.push((a, b));
            }
        }
    }
    if points.is_empty() {
        return Err(CliError::Plot(format!("{}: no data rows", csv_path.display())));
    }
    let mut dat = format!("# {x} {y}\n");
    for (a, b) in &points {
        dat.push_str(&format!("{} {}\n", num(*a), num(*b)));
    }
    let mut script = String::from("set terminal pngcairo size 800,600\nset output '@PNG@'\n");
    if log_log {
        script.push_str("set logscale xy\n");
    }
    script.push_str(&format!("set xlabel '{x}'\nset ylabel '{y}'\n"));
    match guide_slope {
        Some(s) => {
            let (x0, y0) = points[0];
            script.push_str(&format!(
                "plot '@DATA@' using 1:2 with linespoints title '{y}', {} * (x / {})**({}) with lines dashtype 2 title 'slope {}'\n",
                num(y0),
                num(x0),
                num(s),
                s
            ));
        }
        None => script.push_str(&format!("plot '@DATA@' using 1:2 with linespoints title '{y}'\n")),
    }
    Ok((dat, script))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plot_data_and_guide() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        let rows = vec![vec![num(1.0), num(0.5)], vec![num(2.0), num(0.17)]];
        out.csv("decay.csv", &["t", "sup_norm"], &rows).unwrap();
        out.plot("decay.csv", "t", "sup_norm", true, Some(-1.5)).unwrap();
        let gp = fs::read_to_string(dir.path().join("decay.gp")).unwrap();
        assert!(gp.contains("'decay.dat'") && gp.contains("**(-1.5e0)"));
        let dat = fs::read_to_string(dir.path().join("decay.dat")).unwrap();
        assert_eq!(dat.lines().count(), 3);
    }

    #[test]
    fn empty_csv_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        out.csv::<Vec<String>>("empty.csv", &["lambda", "sigma_min"], &[]).unwrap();
        assert!(matches!(out.plot("empty.csv", "lambda", "sigma_min", false, None), Err(CliError::Plot(_))));
        assert!(out.plot("missing.csv", "lambda", "sigma_min", false, None).is_err());
    }

    #[test]
    fn manifest_lists_checksums() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        out.write("a.csv", b"x\n1\n").unwrap();
        out.manifest("audit", &json!({}), "00", 7).unwrap();
        let m: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m["outputs"][0]["sha256"], sha256_hex(b"x\n1\n"));
        assert_eq!(m["seed"], 7);
    }

    #[test]
    fn summary_pass_logic() {
        let mut s = Summary::default();
        s.at_most("err", 1e-7, 1e-6);
        s.within("alpha", 1.5, 1.35, 1.65);
        assert!(s.pass());
        s.at_least("gain", 1.0, 2.0);
        assert!(!s.pass());
        assert_eq!(s.to_json("x")["pass"], false);
    }
}
