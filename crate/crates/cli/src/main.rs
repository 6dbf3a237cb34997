mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use config::{RunConfig, StageSection};
use triplet_core::analysis::{self, Coincidence2DHistogram, TripletReport};
use triplet_core::model::{self, ArmEfficiencies, PairNumberDistribution};
use triplet_core::phasematch;
use triplet_core::sim;
use triplet_core::stream::Channel;
use triplet_core::ttag;

#[derive(Parser)]
#[command(name = "triplet", version, about = "Photon-triplet source simulation and three-fold coincidence analysis")]
struct Cli {
    /// JSON run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "TRIPLET_THREADS", default_value_t = 0)]
    threads: usize,
    /// Repeat for more log output on stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a run and write a TTAG file plus a `.manifest.json` beside it.
    Simulate {
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Three-fold analysis of a TTAG file.
    Analyze {
        input: PathBuf,
        /// Directory for report.json, histogram.csv and occupancy.csv.
        /// Without it the report goes to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Phase-matching calculations for one conversion stage.
    Phasematch {
        #[command(subcommand)]
        action: PhaseAction,
        /// 1 = primary stage, 2 = secondary stage. Defaults to 1 for
        /// tune/solve and 2 for shg/acceptance.
        #[arg(long, global = true)]
        stage: Option<u8>,
        #[arg(long, global = true)]
        output: Option<PathBuf>,
        #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Model predictions for the configured source, optionally set against
    /// an analysis report.
    Report {
        /// report.json written by `analyze`.
        #[arg(long)]
        measured: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand, Clone, Copy)]
enum PhaseAction {
    /// Phase-matched signal and idler over the temperature range.
    Tune,
    /// Second-harmonic peak of the stage grating.
    Shg,
    /// Pump acceptance bandwidth.
    Acceptance,
    /// Phase-matched signal at the stage temperature.
    Solve,
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .context("configuring thread pool")?;
    }
    let cfg = RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Simulate { output, seed } => cmd_simulate(cfg, &output, seed),
        Command::Analyze { input, output } => cmd_analyze(&cfg, &input, output.as_deref()),
        Command::Phasematch {
            action,
            stage,
            output,
            format,
        } => cmd_phasematch(&cfg, action, stage, output.as_deref(), format),
        Command::Report { measured, output } => cmd_report(&cfg, measured.as_deref(), output.as_deref()),
    }
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn emit(output: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match output {
        Some(p) => write_atomic(p, bytes),
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

pub fn manifest_path(ttag: &Path) -> PathBuf {
    let mut s = ttag.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn cmd_simulate(mut cfg: RunConfig, output: &Path, seed: Option<u64>) -> Result<()> {
    if let Some(seed) = seed {
        cfg.simulate.seed = seed;
    }
    let sim_cfg = cfg.simulate.to_sim();
    sim_cfg.validate()?;
    for w in sim_cfg.warnings() {
        log::warn!("{w}");
    }
    let expected = sim::expected_rates(&sim_cfg);
    let stream = sim::simulate_run(&sim_cfg)?;
    let bytes = ttag::encode(&stream)?;
    write_atomic(output, &bytes)?;

    let counts: serde_json::Map<String, serde_json::Value> = Channel::ALL
        .iter()
        .map(|&c| (format!("{}", c as u8), json!(stream.count(c))))
        .collect();
    let manifest = json!({
        "schema_version": config::SCHEMA_VERSION,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "config_hash": cfg.hash(),
        "seed": cfg.simulate.seed,
        "n_pulses": sim_cfg.n_pulses,
        "resolution_fs": sim_cfg.resolution_fs,
        "records": stream.len(),
        "records_per_channel": counts,
        "expected_rates": expected,
        "config": cfg,
    });
    write_atomic(&manifest_path(output), &to_json(&manifest)?)?;
    log::info!("wrote {} records to {}", stream.len(), output.display());
    Ok(())
}

fn manifest_pulses(input: &Path) -> Option<u64> {
    let text = std::fs::read_to_string(manifest_path(input)).ok()?;
    serde_json::from_str::<serde_json::Value>(&text).ok()?.get("n_pulses")?.as_u64()
}

fn cmd_analyze(cfg: &RunConfig, input: &Path, output: Option<&Path>) -> Result<()> {
    let file = std::fs::File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let stream = ttag::read(std::io::BufReader::new(file))
        .with_context(|| format!("reading {}", input.display()))?;
    let mut acfg = cfg.analyze.to_analysis();
    if acfg.n_pulses.is_none() {
        acfg.n_pulses = manifest_pulses(input);
    }
    let (hist, report) = analysis::analyze(&stream, &acfg)?;
    match output {
        None => emit(None, &to_json(&report)?),
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            write_atomic(&dir.join("report.json"), &to_json(&report)?)?;
            write_atomic(&dir.join("histogram.csv"), &histogram_csv(&hist)?)?;
            write_atomic(&dir.join("occupancy.csv"), &occupancy_csv(&report)?)?;
            Ok(())
        }
    }
}

fn histogram_csv(h: &Coincidence2DHistogram) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["tau1_minus_tau2_ns", "tau3_minus_tau2_ns", "count"])?;
    for i1 in 0..h.side() {
        let d1 = h.delay(i1) * 1e9;
        for i3 in 0..h.side() {
            w.write_record([
                format!("{d1:.6}"),
                format!("{:.6}", h.delay(i3) * 1e9),
                h.get(i1, i3).to_string(),
            ])?;
        }
    }
    Ok(w.into_inner()?)
}

fn occupancy_csv(report: &TripletReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["count", "bins"])?;
    for (k, n) in &report.occupancy {
        w.write_record([k.to_string(), n.to_string()])?;
    }
    Ok(w.into_inner()?)
}

fn cmd_phasematch(
    cfg: &RunConfig,
    action: PhaseAction,
    stage: Option<u8>,
    output: Option<&Path>,
    format: Format,
) -> Result<()> {
    let stage_no = stage.unwrap_or(match action {
        PhaseAction::Tune | PhaseAction::Solve => 1,
        PhaseAction::Shg | PhaseAction::Acceptance => 2,
    });
    let pm = &cfg.phasematch;
    let st: &StageSection = pm.stage(stage_no)?;
    let dispersion = pm.dispersion();
    let grating = st.grating(&dispersion)?;
    let nm = |r: [f64; 2]| (r[0] * 1e-9, r[1] * 1e-9);
    let pump = st.pump_nm * 1e-9;
    let length = st.length_mm * 1e-3;

    let bytes = match action {
        PhaseAction::Solve => {
            let s = phasematch::solve_phasematched_signal(
                pump,
                &grating,
                st.temperature_C,
                &dispersion,
                nm(st.signal_bracket_nm),
            )?;
            if s.is_multiple() {
                log::warn!("{} roots in the bracket; reporting the one nearest its centre", s.roots_in_bracket);
            }
            match format {
                Format::Json => to_json(&json!({
                    "stage": stage_no,
                    "grating": grating,
                    "temperature_C": st.temperature_C,
                    "lambda_p_m": pump,
                    "lambda_s_m": s.lambda_s,
                    "lambda_i_m": s.lambda_i,
                    "delta_k_per_m": s.mismatch,
                    "roots_in_bracket": s.roots_in_bracket,
                }))?,
                Format::Csv => {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    w.write_record(["theta_C", "lambda_s_m", "lambda_i_m", "delta_k_per_m"])?;
                    w.write_record([
                        st.temperature_C.to_string(),
                        format!("{:e}", s.lambda_s),
                        format!("{:e}", s.lambda_i),
                        format!("{:e}", s.mismatch),
                    ])?;
                    w.into_inner()?
                }
            }
        }
        PhaseAction::Tune => {
            let curve = phasematch::temperature_tuning_curve(
                &grating,
                pump,
                (st.tune_range_C[0], st.tune_range_C[1]),
                st.tune_steps,
                &dispersion,
                nm(st.signal_bracket_nm),
            )?;
            match format {
                Format::Json => to_json(&json!({
                    "stage": stage_no,
                    "grating": grating,
                    "lambda_p_m": pump,
                    "points": curve,
                }))?,
                Format::Csv => {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    w.write_record(["theta_C", "lambda_s_m", "lambda_i_m"])?;
                    for p in &curve {
                        let (s, i) = match p.solution {
                            Some(s) => (format!("{:e}", s.lambda_s), format!("{:e}", s.lambda_i)),
                            None => (String::new(), String::new()),
                        };
                        w.write_record([p.temperature.to_string(), s, i])?;
                    }
                    w.into_inner()?
                }
            }
        }
        PhaseAction::Shg => {
            let peak = phasematch::shg_peak_wavelength(
                &grating,
                st.temperature_C,
                &dispersion,
                length,
                nm(st.shg_scan_nm),
                st.scan_points,
            )?;
            match format {
                Format::Json => to_json(&json!({
                    "stage": stage_no,
                    "grating": grating,
                    "temperature_C": st.temperature_C,
                    "length_m": length,
                    "fundamental_m": peak.fundamental,
                    "efficiency": peak.efficiency,
                    "at_boundary": peak.at_boundary,
                }))?,
                Format::Csv => curve_csv(["fundamental_m", "efficiency"], &peak.curve)?,
            }
        }
        PhaseAction::Acceptance => {
            let scan = match st.acceptance_scan_nm {
                Some(r) => nm(r),
                None => phasematch::acceptance_scan(pump, length),
            };
            let acc = phasematch::pump_acceptance_bandwidth(
                &grating,
                st.temperature_C,
                &dispersion,
                length,
                scan,
                st.scan_points,
            )?;
            match format {
                Format::Json => to_json(&json!({
                    "stage": stage_no,
                    "grating": grating,
                    "temperature_C": st.temperature_C,
                    "length_m": length,
                    "fwhm_m": acc.fwhm,
                    "peak_m": acc.peak,
                    "grid_peak_m": acc.grid_peak,
                    "degeneracy_pump_m": acc.degeneracy_pump,
                    "fit_relative_rms": acc.fit.relative_rms,
                    "signal_window_m": [acc.signal_window.0, acc.signal_window.1],
                }))?,
                Format::Csv => curve_csv(["lambda_p_m", "response_m"], &acc.curve)?,
            }
        }
    };
    emit(output, &bytes)
}

fn curve_csv(header: [&str; 2], points: &[(f64, f64)]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for (x, y) in points {
        w.write_record([format!("{x:e}"), format!("{y:e}")])?;
    }
    Ok(w.into_inner()?)
}

fn cmd_report(cfg: &RunConfig, measured: Option<&Path>, output: Option<&Path>) -> Result<()> {
    let sim_cfg = cfg.simulate.to_sim();
    sim_cfg.validate()?;
    let source = cfg.simulate.source();
    let arms = match cfg.report.arm_efficiency_product {
        Some(p) => {
            if !(p > 0.0 && p <= 1.0) {
                bail!("arm_efficiency_product must lie in (0, 1], got {p}");
            }
            let each = p.cbrt();
            ArmEfficiencies {
                eta_i1: each,
                eta_s2: each,
                eta_i2: each,
            }
        }
        None => sim_cfg.arm_efficiencies(),
    };
    let mu = model::mean_pairs_from_pump(&source, true);
    let dist = PairNumberDistribution::new(mu)?;
    let predicted_p = model::triplet_success_probability(&source, &arms);
    let expected = sim::expected_rates(&sim_cfg);
    let mut report = json!({
        "mean_pairs_generated": model::mean_pairs_from_pump(&source, false),
        "mean_pairs_injected": mu,
        "pair_probabilities": dist.probabilities.iter().take(6).collect::<Vec<_>>(),
        "genuine_triplet_fraction": model::genuine_triplet_fraction_with(mu, cfg.report.triplet_fraction_mode)?,
        "arm_efficiency_product": arms.product(),
        "triplet_success_probability": predicted_p,
        "expected_rates": expected,
    });
    if let Some(path) = measured {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let m: TripletReport =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let comparison = m.success_probability.map(|e| {
            json!({
                "measured": e.value,
                "measured_error": e.error,
                "predicted": predicted_p,
                "deviation_sigma": if e.error > 0.0 { (e.value - predicted_p) / e.error } else { f64::NAN },
            })
        });
        report["measured"] = json!({
            "central_count": m.central_count,
            "car": m.car,
            "snr": m.snr,
            "noise_mean_per_bin": m.noise_mean_per_bin,
            "success_probability": comparison,
        });
    }
    emit(output, &to_json(&report)?)
}
