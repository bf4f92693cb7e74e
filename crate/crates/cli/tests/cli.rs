use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_rydberg-arp");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("RYDBERG_ARP_OUT")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn defaults_file(dir: &Path) -> PathBuf {
    let path = dir.join("defaults.json");
    std::fs::copy(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/defaults.json"), &path).unwrap();
    path
}

fn fixture() -> &'static str {
    concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/damped_rabi.csv")
}

#[test]
fn rabi_writes_csv_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = defaults_file(tmp.path());
    let out = tmp.path().join("out");
    let o = run(&["rabi", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("rabi.csv")).unwrap();
    assert!(csv.starts_with("curve,index,x,click_sum,click_sum_stderr,coincidence,g2_measured,p0,p1,p2,p3,config_hash\n"));
    assert_eq!(csv.lines().count(), 51);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("rabi.summary.json")).unwrap()).unwrap();
    let hash = summary["provenance"]["config_hash"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert!(summary["curves"][0]["derived"]["omega_n_fit_mhz"].as_f64().unwrap() > 0.0);
    let dat = std::fs::read_to_string(out.join("plot/rabi_rabi.dat")).unwrap();
    assert!(dat.lines().any(|l| l == format!("# config_hash: {hash}")));
}

#[test]
fn identical_invocations_give_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let outputs: Vec<Vec<String>> = ["a", "b"]
        .iter()
        .map(|name| {
            let out = tmp.path().join(name);
            let o = run(&[
                "area-scan",
                "--out",
                out.to_str().unwrap(),
                "--set",
                "scans.area.chirp_rates_u=[0,4]",
                "--set",
                "scans.area.areas_pi.points=6",
                "--set",
                "trials=4",
                "--set",
                "noise.poisson_atoms=true",
                "--workers",
                if *name == "a" { "1" } else { "3" },
            ]);
            assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
            ["area_scan.csv", "area_scan.summary.json", "plot/area_scan.manifest.json"]
                .iter()
                .map(|f| std::fs::read_to_string(out.join(f)).unwrap())
                .collect()
        })
        .collect();
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn area_scan_with_two_rates_writes_two_data_files_and_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&[
        "area-scan",
        "--out",
        tmp.path().to_str().unwrap(),
        "--set",
        "scans.area.chirp_rates_u=[0,4]",
        "--set",
        "scans.area.areas_pi.points=5",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut files: Vec<String> = std::fs::read_dir(tmp.path().join("plot"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    assert_eq!(files, ["area_scan.manifest.json", "area_scan_alpha-0u.dat", "area_scan_alpha-p4u.dat"]);
}

#[test]
fn unknown_override_key_exits_2_and_names_it() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["rabi", "--out", tmp.path().to_str().unwrap(), "--set", "physics.bogus=1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("physics.bogus"), "{}", stderr(&o));
    assert!(!tmp.path().join("rabi.csv").exists());
}

#[test]
fn mistyped_override_exits_2() {
    let o = run(&["rabi", "--set", "physics.omega2_mhz=fast"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("physics.omega2_mhz"), "{}", stderr(&o));
}

#[test]
fn empty_chirp_list_is_refused() {
    let o = run(&["area-scan", "--set", "scans.area.chirp_rates_u=[]"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("scans.area.chirp_rates_u"), "{}", stderr(&o));
}

#[test]
fn unknown_subcommand_and_flag_exit_2() {
    assert_eq!(run(&["simulate"]).status.code(), Some(2));
    assert_eq!(run(&["rabi", "--bogus"]).status.code(), Some(2));
}

#[test]
fn numeric_failure_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&[
        "rabi",
        "--out",
        tmp.path().to_str().unwrap(),
        "--set",
        "integrator.norm_tolerance=1e-300",
        "--set",
        "integrator.step_ns=5",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("drift"), "{}", stderr(&o));
}

#[test]
fn unwritable_output_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = blocker.join("out");
    let o = run(&["adiabaticity", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn output_directory_defaults_to_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(BIN)
        .arg("adiabaticity")
        .env("RYDBERG_ARP_OUT", tmp.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(tmp.path().join("adiabaticity.csv")).unwrap();
    assert!(csv.starts_with("time_ns,omega_n_mhz,delta_mhz,ratio\n"));
    assert!(tmp.path().join("adiabaticity.summary.json").exists());
}

#[test]
fn fit_prints_parameters_and_width() {
    let o = run(&["fit", "--input", fixture(), "--model", "damped-rabi"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let value = |name: &str| -> f64 {
        text.lines()
            .find_map(|l| l.strip_prefix(&format!("{name} = ")))
            .unwrap_or_else(|| panic!("{name} missing in {text}"))
            .parse()
            .unwrap()
    };
    let truth = [("a", 0.06), ("b", 0.02), ("c", 0.5), ("d", std::f64::consts::PI)];
    for (name, t) in truth {
        assert!((value(name) - t).abs() < 0.05 * t, "{name} = {}", value(name));
    }
    assert!(value("width80") > 0.0);
}

#[test]
fn fit_of_missing_file_exits_4() {
    let o = run(&["fit", "--input", "/nonexistent/curve.csv", "--model", "asymmetric-gaussian"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn version_prints_crate_version() {
    let o = run(&["version"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("rydberg-arp "));
}
