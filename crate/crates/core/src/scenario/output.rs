//! CSV, JSON and plot-data writers, and the curve reader used by `fit`.
//! Column orders are frozen; see FORMATS.md.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::runs::{AdiabaticityReport, ChirpSummary, DetuningScan};
use super::sweep::{Provenance, SweepResult};
use crate::error::{Error, Result};
use crate::fitting::{FitResult, PeakMetrics, ScanCurve};

pub const SWEEP_COLUMNS: [&str; 12] = [
    "curve",
    "index",
    "x",
    "click_sum",
    "click_sum_stderr",
    "coincidence",
    "g2_measured",
    "p0",
    "p1",
    "p2",
    "p3",
    "config_hash",
];

pub const SUMMARY_COLUMNS: [&str; 11] = [
    "chirp_rate_u",
    "peak_position_pi",
    "peak_value",
    "width80_pi",
    "g2_at_peak",
    "robustness",
    "edge_peak",
    "plateau",
    "oscillating",
    "fit_converged",
    "config_hash",
];

pub const ADIABATICITY_COLUMNS: [&str; 4] = ["time_ns", "omega_n_mhz", "delta_mhz", "ratio"];

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| Error::Io(e.to_string()))?;
    for row in rows {
        w.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Refuses sweeps without any record.
pub fn ensure_non_empty(results: &[SweepResult]) -> Result<()> {
    if results.is_empty() || results.iter().any(|r| r.records.is_empty()) {
        return Err(Error::config("sweep", "refusing to write an empty sweep"));
    }
    Ok(())
}

/// One row per point of every curve.
pub fn sweep_csv(results: &[SweepResult]) -> Result<String> {
    ensure_non_empty(results)?;
    let rows = results.iter().flat_map(|r| {
        r.records.iter().enumerate().map(move |(i, p)| {
            let mut row = vec![
                r.curve.clone(),
                i.to_string(),
                p.x.to_string(),
                p.click_sum.to_string(),
                p.click_sum_stderr.to_string(),
                p.coincidence.to_string(),
                opt(p.g2_measured),
            ];
            row.extend((0..4).map(|n| p.distribution.get(n).copied().unwrap_or(0.0).to_string()));
            row.push(r.provenance.config_hash.clone());
            row
        })
    });
    csv_string(&SWEEP_COLUMNS, rows)
}

pub fn summary_csv(summary: &ChirpSummary) -> Result<String> {
    let rows = summary.rows.iter().map(|r| {
        vec![
            r.chirp_rate_u.to_string(),
            r.peak_position_pi.to_string(),
            r.peak_value.to_string(),
            r.width80_pi.to_string(),
            opt(r.g2_at_peak),
            r.robustness.to_string(),
            r.edge_peak.to_string(),
            r.plateau.to_string(),
            r.oscillating.to_string(),
            r.fit_converged.to_string(),
            summary.provenance.config_hash.clone(),
        ]
    });
    csv_string(&SUMMARY_COLUMNS, rows)
}

pub fn adiabaticity_csv(report: &AdiabaticityReport) -> Result<String> {
    let rows = (0..report.times_ns.len()).map(|k| {
        vec![
            report.times_ns[k].to_string(),
            report.omega_n_mhz[k].to_string(),
            report.delta_mhz[k].to_string(),
            report.ratio[k].to_string(),
        ]
    });
    csv_string(&ADIABATICITY_COLUMNS, rows)
}

#[derive(Debug, Serialize)]
struct CurveSummary<'a> {
    curve: &'a str,
    axis: String,
    parameters: &'a BTreeMap<String, f64>,
    points: usize,
    fit: &'a Option<FitResult>,
    metrics: &'a Option<PeakMetrics>,
    derived: &'a BTreeMap<String, f64>,
}

#[derive(Debug, Serialize)]
struct SweepSummary<'a> {
    provenance: &'a Provenance,
    curves: Vec<CurveSummary<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    comparison: Option<serde_json::Value>,
}

/// JSON sidecar of a set of curves: provenance, then per curve the fit,
/// peak metrics and derived scalars. `comparison` holds cross-curve results.
pub fn sweep_summary_json(results: &[SweepResult], comparison: Option<serde_json::Value>) -> Result<String> {
    ensure_non_empty(results)?;
    let curves = results
        .iter()
        .map(|r| CurveSummary {
            curve: &r.curve,
            axis: format!("{} [{}]", r.axis_name, r.axis_unit),
            parameters: &r.parameters,
            points: r.records.len(),
            fit: &r.fit,
            metrics: &r.metrics,
            derived: &r.derived,
        })
        .collect();
    Ok(to_json(&SweepSummary {
        provenance: &results[0].provenance,
        curves,
        comparison,
    }))
}

/// Sidecar for a detuning scan.
pub fn detuning_summary_json(scan: &DetuningScan) -> Result<String> {
    let comparison = serde_json::json!({
        "width_ratio": scan.width_ratio,
        "chirped_sigma_left_mhz": scan.chirped_sigma_left_mhz,
        "chirped_sigma_right_mhz": scan.chirped_sigma_right_mhz,
        "slower_falloff_toward_smaller_abs_delta1": scan.slower_falloff_toward_smaller_abs_delta1,
    });
    sweep_summary_json(&[scan.chirped.clone(), scan.pi_pulse.clone()], Some(comparison))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("outputs serialize");
    s.push('\n');
    s
}

pub fn write_file(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, body).map_err(|e| io_err(path, e))
}

/// File-name form of a curve label: signs spelled `p`/`m`, other
/// punctuation folded to single dashes.
fn slug(s: &str) -> String {
    let s = s.replace("=+", "-p").replace("=-", "-m");
    let mut out = String::new();
    for c in s.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    out.trim_matches('-').to_string()
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    scenario: &'a str,
    config_hash: &'a str,
    seed: u64,
    version: &'a str,
    files: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize)]
struct ManifestEntry {
    curve: String,
    file: String,
    points: usize,
}

/// Writes `<stem>_<curve>.dat` (columns `x y yerr`, `#` header with the
/// provenance) for every curve plus `<stem>.manifest.json`, and returns the
/// paths written.
pub fn emit_plot_data(results: &[SweepResult], dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    ensure_non_empty(results)?;
    let mut written = Vec::new();
    let mut entries = Vec::new();
    for r in results {
        let file = format!("{stem}_{}.dat", slug(&r.curve));
        let p = &r.provenance;
        let mut body = format!(
            "# scenario: {}\n# curve: {}\n# config: {}\n# config_hash: {}\n# seed: {}\n# version: {}\n# columns: {}_{} click_sum click_sum_stderr\n",
            p.scenario, r.curve, p.config_label, p.config_hash, p.seed, p.version, r.axis_name, r.axis_unit
        );
        for rec in &r.records {
            body.push_str(&format!("{} {} {}\n", rec.x, rec.click_sum, rec.click_sum_stderr));
        }
        let path = dir.join(&file);
        write_file(&path, &body)?;
        written.push(path);
        entries.push(ManifestEntry {
            curve: r.curve.clone(),
            file,
            points: r.records.len(),
        });
    }
    let p = &results[0].provenance;
    let manifest = Manifest {
        scenario: &p.scenario,
        config_hash: &p.config_hash,
        seed: p.seed,
        version: &p.version,
        files: entries,
    };
    let path = dir.join(format!("{stem}.manifest.json"));
    write_file(&path, &to_json(&manifest))?;
    written.push(path);
    Ok(written)
}

/// Reads `x,y[,sigma]` rows. Lines starting with `#` and a non-numeric
/// header row are skipped.
pub fn read_curve_csv(path: &Path) -> Result<ScanCurve> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_curve_csv(&text).map_err(|e| match e {
        Error::InvalidArgument(m) => Error::config("input", format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_curve_csv(text: &str) -> Result<ScanCurve> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let (mut x, mut y, mut sigma) = (Vec::new(), Vec::new(), Vec::new());
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::invalid(e.to_string()))?;
        let nums: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let nums = match nums {
            Ok(v) => v,
            Err(_) if line == 0 => continue,
            Err(_) => return Err(Error::invalid(format!("row {} is not numeric", line + 1))),
        };
        if !(2..=3).contains(&nums.len()) {
            return Err(Error::invalid(format!("row {} needs 2 or 3 columns", line + 1)));
        }
        x.push(nums[0]);
        y.push(nums[1]);
        if let Some(&s) = nums.get(2) {
            sigma.push(s);
        }
    }
    let sigma = match sigma.len() {
        0 => None,
        n if n == x.len() => Some(sigma),
        _ => return Err(Error::invalid("sigma column present on some rows only")),
    };
    ScanCurve::new(x, y, sigma)
}

#[cfg(test)]
mod tests {
    use super::super::sweep::PointRecord;
    use super::*;

    fn result(curve: &str, n: usize) -> SweepResult {
        SweepResult {
            curve: curve.into(),
            axis_name: "area".into(),
            axis_unit: "pi".into(),
            parameters: BTreeMap::new(),
            records: (0..n)
                .map(|k| PointRecord {
                    x: k as f64 * 0.5,
                    click_sum: 0.1 * k as f64,
                    click_sum_stderr: 0.0,
                    coincidence: 0.0,
                    g2_measured: if k == 0 { None } else { Some(0.25) },
                    distribution: vec![0.5, 0.5],
                })
                .collect(),
            fit: None,
            metrics: None,
            derived: BTreeMap::new(),
            provenance: Provenance {
                scenario: "area-scan".into(),
                config_label: "test".into(),
                config_hash: "abc123".into(),
                seed: 9,
                version: "0.0.0".into(),
            },
        }
    }

    #[test]
    fn sweep_csv_layout() {
        let csv = sweep_csv(&[result("alpha=0u", 3)]).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], SWEEP_COLUMNS.join(","));
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1], "alpha=0u,0,0,0,0,0,,0.5,0.5,0,0,abc123");
        assert!(lines[2].contains(",0.25,"));
    }

    #[test]
    fn plot_files_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_plot_data(&[result("alpha=+4u", 4), result("alpha=-4u", 4)], dir.path(), "area").unwrap();
        assert_eq!(files.len(), 3);
        let names: Vec<String> = files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into()).collect();
        assert_eq!(names, ["area_alpha-p4u.dat", "area_alpha-m4u.dat", "area.manifest.json"]);
        let body = fs::read_to_string(&files[0]).unwrap();
        assert!(body.lines().any(|l| l.starts_with('#') && l.contains("abc123")));
        assert_eq!(body.lines().filter(|l| !l.starts_with('#')).count(), 4);
    }

    #[test]
    fn summary_json_carries_provenance() {
        let json = sweep_summary_json(&[result("alpha=0u", 3)], None).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["provenance"]["config_hash"], "abc123");
        assert_eq!(v["curves"][0]["points"], 3);
        assert!(v.get("comparison").is_none());
    }

    #[test]
    fn empty_sweep_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(emit_plot_data(&[], dir.path(), "x"), Err(Error::Config { .. })));
        assert!(matches!(emit_plot_data(&[result("a", 0)], dir.path(), "x"), Err(Error::Config { .. })));
        assert!(sweep_csv(&[]).is_err());
    }

    #[test]
    fn curve_csv_parsing() {
        let c = parse_curve_csv("# synthetic\nx,y\n0,1\n1, 2\n2,3\n").unwrap();
        assert_eq!(c.x, vec![0.0, 1.0, 2.0]);
        assert!(c.sigma.is_none());
        let c = parse_curve_csv("0,1,0.1\n1,2,0.1\n").unwrap();
        assert_eq!(c.sigma, Some(vec![0.1, 0.1]));
        assert!(parse_curve_csv("0,1\nfoo,2\n").is_err());
        assert!(parse_curve_csv("0,1,0.1\n1,2\n").is_err());
    }

    #[test]
    fn slugs() {
        assert_eq!(slug("alpha=+4u"), "alpha-p4u");
        assert_eq!(slug("alpha=-2.5u"), "alpha-m2-5u");
        assert_eq!(slug("pi-pulse"), "pi-pulse");
    }
}
