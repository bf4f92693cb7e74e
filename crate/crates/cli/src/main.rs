//! `rydberg-arp` command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rydberg_arp::fitting::{fit_asymmetric_gaussian, fit_damped_rabi_auto, peak_metrics, FitResult};
use rydberg_arp::scenario::output::{
    adiabaticity_csv, detuning_summary_json, emit_plot_data, read_curve_csv, summary_csv, sweep_csv,
    sweep_summary_json, to_json, write_file,
};
use rydberg_arp::scenario::{
    run_adiabaticity, run_area_scan, run_chirp_summary, run_detuning_scan, run_rabi_scan, ScenarioConfig, VERSION,
};
use rydberg_arp::{Error, Result};

/// Default output directory when `--out` is absent.
const OUT_ENV: &str = "RYDBERG_ARP_OUT";

#[derive(Debug, Parser)]
#[command(name = "rydberg-arp", version = VERSION, about = "Chirped two-photon excitation of a blockaded Rydberg ensemble")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Square-pulse duration scan; writes rabi.csv and rabi.summary.json.
    Rabi(RunArgs),
    /// Pulse-area scan for every configured chirp rate.
    AreaScan(RunArgs),
    /// Area scan followed by the per-chirp peak metrics table.
    ChirpSummary(RunArgs),
    /// Click sum against single-photon detuning, chirped and unchirped.
    DetuningScan(RunArgs),
    /// Adiabaticity ratio along the configured schedule.
    Adiabaticity(RunArgs),
    /// Fits a curve file and prints the parameters and the 80% width.
    Fit(FitArgs),
    /// Prints the version.
    Version,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// JSON configuration file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration used when `--config` is absent.
    #[arg(long, value_enum, default_value_t = Preset::Defaults)]
    preset: Preset,
    /// Output directory [default: $RYDBERG_ARP_OUT or ./out].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a config value by dotted path, e.g. `physics.omega2_mhz=40`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Replaces the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the sweep (0 = all cores).
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    Defaults,
    Calibration,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// CSV with columns x,y[,sigma].
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    model: ModelArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelArg {
    DampedRabi,
    AsymmetricGaussian,
}

impl RunArgs {
    fn config(&self) -> Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(path) => ScenarioConfig::load(path)?,
            None => match self.preset {
                Preset::Defaults => ScenarioConfig::defaults(),
                Preset::Calibration => ScenarioConfig::calibration(),
            },
        };
        for item in &self.overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::config(item.as_str(), "override must be KEY=VALUE"))?;
            cfg = cfg.apply_override(key.trim(), value.trim())?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

/// Prints to stdout, ignoring a closed pipe.
fn say(line: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn write(dir: &Path, name: &str, body: &str) -> Result<()> {
    let path = dir.join(name);
    write_file(&path, body)?;
    say(&format!("wrote {}", path.display()));
    Ok(())
}

fn plots(results: &[rydberg_arp::scenario::SweepResult], dir: &Path, stem: &str) -> Result<()> {
    for path in emit_plot_data(results, &dir.join("plot"), stem)? {
        say(&format!("wrote {}", path.display()));
    }
    Ok(())
}

fn print_fit(fit: &FitResult) -> Result<()> {
    for (name, value) in fit.model.param_names().iter().zip(&fit.params) {
        say(&format!("{name} = {value:.6e}"));
    }
    let m = peak_metrics(fit)?;
    say(&format!("width80 = {:.6e}", m.width80));
    say(&format!("peak_position = {:.6e}", m.peak_position));
    say(&format!("peak_value = {:.6e}", m.peak_value));
    say(&format!("residual_norm = {:.6e}", fit.residual_norm));
    say(&format!("converged = {}", fit.converged));
    Ok(())
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Version => {
            say(&format!("rydberg-arp {VERSION}"));
            Ok(())
        }
        Command::Fit(args) => {
            let curve = read_curve_csv(&args.input)?;
            let fit = match args.model {
                ModelArg::DampedRabi => fit_damped_rabi_auto(&curve)?,
                ModelArg::AsymmetricGaussian => fit_asymmetric_gaussian(&curve)?,
            };
            print_fit(&fit)
        }
        Command::Rabi(args) => {
            let (cfg, out) = (args.config()?, args.out_dir());
            let result = run_rabi_scan(&cfg, args.workers)?;
            let results = [result];
            write(&out, "rabi.csv", &sweep_csv(&results)?)?;
            write(&out, "rabi.summary.json", &sweep_summary_json(&results, None)?)?;
            plots(&results, &out, "rabi")
        }
        Command::AreaScan(args) => {
            let (cfg, out) = (args.config()?, args.out_dir());
            let results = run_area_scan(&cfg, &cfg.scans.area.chirp_rates_u, args.workers)?;
            write(&out, "area_scan.csv", &sweep_csv(&results)?)?;
            write(&out, "area_scan.summary.json", &sweep_summary_json(&results, None)?)?;
            plots(&results, &out, "area_scan")
        }
        Command::ChirpSummary(args) => {
            let (cfg, out) = (args.config()?, args.out_dir());
            let results = run_area_scan(&cfg, &cfg.scans.area.chirp_rates_u, args.workers)?;
            let summary = run_chirp_summary(&results)?;
            write(&out, "area_scan.csv", &sweep_csv(&results)?)?;
            write(&out, "chirp_summary.csv", &summary_csv(&summary)?)?;
            write(&out, "chirp_summary.json", &to_json(&summary))?;
            plots(&results, &out, "area_scan")
        }
        Command::DetuningScan(args) => {
            let (cfg, out) = (args.config()?, args.out_dir());
            let scan = run_detuning_scan(&cfg, args.workers)?;
            let results = [scan.chirped.clone(), scan.pi_pulse.clone()];
            write(&out, "detuning_scan.csv", &sweep_csv(&results)?)?;
            write(&out, "detuning_scan.summary.json", &detuning_summary_json(&scan)?)?;
            plots(&results, &out, "detuning_scan")
        }
        Command::Adiabaticity(args) => {
            let (cfg, out) = (args.config()?, args.out_dir());
            let report = run_adiabaticity(&cfg)?;
            write(&out, "adiabaticity.csv", &adiabaticity_csv(&report)?)?;
            write(&out, "adiabaticity.summary.json", &to_json(&report))
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    if err.is_numeric() {
        return 3;
    }
    match err {
        Error::Io(_) => 4,
        Error::SweepPoint { source, .. } => exit_code(source),
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rydberg_arp::NumericFailure;

    #[test]
    fn exit_codes_follow_error_kind() {
        assert_eq!(exit_code(&Error::config("physics.bogus", "unknown key")), 2);
        assert_eq!(exit_code(&Error::Io("disk full".into())), 4);
        let drift = Error::Numeric(NumericFailure::NormDrift {
            drift: 1.0,
            tolerance: 1e-6,
            t: 0.1,
        });
        assert_eq!(exit_code(&drift), 3);
        let wrapped = Error::SweepPoint {
            index: 3,
            source: Box::new(Error::Io("x".into())),
        };
        assert_eq!(exit_code(&wrapped), 4);
    }

    #[test]
    fn grammar_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn overrides_need_an_equals_sign() {
        let cli = Cli::try_parse_from(["rydberg-arp", "rabi", "--set", "trials"]).unwrap();
        let Command::Rabi(args) = cli.command else { panic!() };
        let err = args.config().unwrap_err();
        assert_eq!(exit_code(&err), 2);
        assert!(err.to_string().contains("trials"));
    }

    #[test]
    fn unknown_subcommand_is_rejected() {
        assert!(Cli::try_parse_from(["rydberg-arp", "simulate"]).is_err());
        assert!(Cli::try_parse_from(["rydberg-arp", "rabi", "--bogus"]).is_err());
    }
}
