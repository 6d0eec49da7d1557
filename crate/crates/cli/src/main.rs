//! `eraser`: batch front end for the quantum eraser simulator.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on runtime failures.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use eraser_core::analysis::{compare_scans, fit_fringe, fit_fringe_with_period, fringe_points, CountColumn, FringeFit};
use eraser_core::config::{load_config, ExperimentKind, RunManifest, FORMAT_VERSION};
use eraser_core::experiment::{
    configure_delay, fit_scan, run_beam_block, run_chsh_with, run_fringe_scan, run_overshoot_study,
    run_rotation_invariance, BenchConfig, ChshAngles, DelayMode, DelayOptions,
};
use eraser_core::io::{self, Metadata};
use eraser_core::{Error, Result};

/// Visibility accepted by `report` for the erasure scan.
const REPORT_BAND: (f64, f64) = (0.71, 0.77);
/// Visibility range measured on the optical bench.
const MEASURED_BAND: (f64, f64) = (0.72, 0.75);

#[derive(Parser)]
#[command(name = "eraser", version, about = "Delayed-choice quantum eraser simulator")]
struct Cli {
    /// Worker threads for scan points (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a run manifest and write CSV files.
    Run {
        manifest: PathBuf,
        /// Master seed, overriding the manifest and bench file.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory, overriding the manifest.
        #[arg(long, env = "ERASER_OUT_DIR")]
        out: Option<PathBuf>,
    },
    /// Fit the fringes of an existing scan CSV.
    Analyze {
        scan: PathBuf,
        /// Fix the fringe period (µm) instead of reading it from the metadata.
        #[arg(long)]
        period: Option<f64>,
        /// Fit the period freely.
        #[arg(long, conflicts_with = "period")]
        free_period: bool,
    },
    /// Summarize a run directory against the acceptance targets.
    Report { dir: PathBuf },
    /// Check a bench configuration without running it.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Run { manifest, seed, out } => run(&manifest, seed, out),
        Command::Analyze {
            scan,
            period,
            free_period,
        } => analyze(&scan, period, free_period),
        Command::Report { dir } => report(&dir),
        Command::Validate { config } => validate(&config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn metadata(kind: ExperimentKind, config: &BenchConfig) -> Metadata {
    vec![
        ("format_version".into(), FORMAT_VERSION.to_string()),
        ("experiment".into(), kind.label().into()),
        ("seed".into(), config.master_seed.to_string()),
        ("period_um".into(), config.fringe_period_um().to_string()),
    ]
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::write(dir.join(name), text)?;
    println!("wrote {}", dir.join(name).display());
    Ok(())
}

fn run(manifest_path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<()> {
    let manifest = RunManifest::load(manifest_path)?;
    let mut config = load_config(&manifest.config_path)?;
    if let Some(s) = seed.or(manifest.master_seed) {
        config.master_seed = s;
    }
    let dir = out.unwrap_or(manifest.output_dir.clone());
    fs::create_dir_all(&dir)?;
    let kind = manifest.experiment;
    let meta = metadata(kind, &config);
    match kind {
        ExperimentKind::Fringe => {
            let rows = run_fringe_scan(&config)?;
            write(&dir, "fringe.csv", &io::scan_csv(&meta, &rows))?;
            let fits = vec![
                ("n_AB".to_string(), fit_scan(&config, &rows, CountColumn::Ab)?),
                ("n_ApB".to_string(), fit_scan(&config, &rows, CountColumn::ApB)?),
            ];
            write(&dir, "fit.csv", &io::fit_csv(&meta, &fits))?;
        }
        ExperimentKind::DelayCompare => {
            let mut scans = Vec::new();
            let mut fits = Vec::new();
            for mode in DelayMode::ALL {
                let (cfg, added) = configure_delay(&config, mode, DelayOptions::default());
                let rows = run_fringe_scan(&cfg)?;
                let mut m = meta.clone();
                m.push(("delay_mode".into(), mode.label().into()));
                m.push(("added_delay_ps".into(), added.to_string()));
                write(&dir, &format!("delay_{}.csv", mode.label()), &io::scan_csv(&m, &rows))?;
                fits.push((mode.label().to_string(), fit_scan(&cfg, &rows, CountColumn::Ab)?));
                scans.push((mode, rows));
            }
            write(&dir, "fit.csv", &io::fit_csv(&meta, &fits))?;
            let mut text = String::from("a,b,chi2,dof,p_value\n");
            for i in 0..scans.len() {
                for j in i + 1..scans.len() {
                    let c = compare_scans(&scans[i].1, &scans[j].1)?;
                    let _ = writeln!(
                        text,
                        "{},{},{},{},{}",
                        scans[i].0.label(),
                        scans[j].0.label(),
                        c.chi2,
                        c.dof,
                        c.p_value
                    );
                }
            }
            write(&dir, "comparison.csv", &text)?;
        }
        ExperimentKind::Chsh => {
            let angles = ChshAngles::default();
            let result = run_chsh_with(&config, angles)?;
            write(&dir, "chsh.csv", &io::chsh_csv(&meta, &angles, &result))?;
        }
        ExperimentKind::BeamBlock => {
            let result = run_beam_block(&config)?;
            write(&dir, "beam_block.csv", &io::beam_block_csv(&meta, &result)?)?;
        }
        ExperimentKind::Rotation => {
            let summaries = run_rotation_invariance(&config, &manifest.rotation_angles_deg)?;
            let mut fits = Vec::new();
            for s in &summaries {
                let mut m = meta.clone();
                m.push(("rotation_deg".into(), s.angle_deg.to_string()));
                write(&dir, &format!("rotation_{}_erasure.csv", s.angle_deg), &io::scan_csv(&m, &s.erasure))?;
                write(
                    &dir,
                    &format!("rotation_{}_which_way.csv", s.angle_deg),
                    &io::scan_csv(&m, &s.which_way),
                )?;
                fits.push((format!("erasure_{}", s.angle_deg), s.erasure_fit));
                fits.push((format!("which_way_{}", s.angle_deg), s.which_way_fit));
            }
            write(&dir, "fit.csv", &io::fit_csv(&meta, &fits))?;
        }
        ExperimentKind::Overshoot => {
            let rows = run_overshoot_study(&config, manifest.overshoot_deg)?;
            let mut m = meta.clone();
            m.push(("overshoot_deg".into(), manifest.overshoot_deg.to_string()));
            write(&dir, "overshoot.csv", &io::scan_csv(&m, &rows))?;
            let fits = vec![("n_AB".to_string(), fit_scan(&config, &rows, CountColumn::Ab)?)];
            write(&dir, "fit.csv", &io::fit_csv(&m, &fits))?;
        }
    }
    Ok(())
}

fn metadata_period(meta: &Metadata) -> Option<f64> {
    io::metadata_value(meta, "period_um").and_then(|v| v.parse().ok())
}

fn analyze(path: &Path, period: Option<f64>, free_period: bool) -> Result<()> {
    let (meta, rows) = io::read_scan_csv(path)?;
    let period = period.or_else(|| metadata_period(&meta));
    let mut fits: Vec<(String, FringeFit)> = Vec::new();
    for (label, column) in [
        ("n_AB", CountColumn::Ab),
        ("n_ApB", CountColumn::ApB),
        ("n_ABp", CountColumn::ABp),
        ("n_ApBp", CountColumn::ApBp),
    ] {
        let points = fringe_points(&rows, column);
        let fit = match period {
            Some(p) if !free_period => fit_fringe_with_period(&points, p)?,
            _ => fit_fringe(&points)?,
        };
        fits.push((label.to_string(), fit));
    }
    print!("{}", io::fit_csv(&meta, &fits));
    Ok(())
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn report(dir: &Path) -> Result<()> {
    let mut lines = Vec::new();
    let fringe = dir.join("fringe.csv");
    if fringe.exists() {
        let (meta, rows) = io::read_scan_csv(&fringe)?;
        let points = fringe_points(&rows, CountColumn::Ab);
        let fit = match metadata_period(&meta) {
            Some(p) => fit_fringe_with_period(&points, p)?,
            None => fit_fringe(&points)?,
        };
        let v = fit.visibility;
        lines.push(format!(
            "erasure visibility {v:.4} ± {:.4}: {} (accepted [{}, {}], measured band [{}, {}])",
            fit.visibility_sigma,
            verdict((REPORT_BAND.0..=REPORT_BAND.1).contains(&v)),
            REPORT_BAND.0,
            REPORT_BAND.1,
            MEASURED_BAND.0,
            MEASURED_BAND.1
        ));
    }
    let chsh = dir.join("chsh.csv");
    if chsh.exists() {
        let text = fs::read_to_string(&chsh)?;
        let meta = text
            .lines()
            .filter_map(|l| l.strip_prefix('#'))
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
            .collect::<Vec<_>>();
        let get = |k| io::metadata_value(&meta, k).and_then(|v| v.parse::<f64>().ok());
        if let (Some(s), Some(sigma)) = (get("S"), get("sigma_S")) {
            lines.push(format!(
                "CHSH S = {s:.4} ± {sigma:.4}: {} (local bound 2)",
                if s > 2.0 + 3.0 * sigma { "violation" } else { "no violation" }
            ));
        }
    }
    let block = dir.join("beam_block.csv");
    if block.exists() {
        let text = fs::read_to_string(&block)?;
        if let Some(row) = text.lines().filter(|l| !l.starts_with('#')).nth(1) {
            let f: Vec<&str> = row.split(',').collect();
            if f.len() == 4 {
                lines.push(format!("beam block N_HH ratio {} ± {}", f[2], f[3]));
            }
        }
    }
    if lines.is_empty() {
        return Err(Error::Domain(format!("no recognized result files in {}", dir.display())));
    }
    for l in lines {
        println!("{l}");
    }
    Ok(())
}

fn validate(path: &Path) -> Result<()> {
    let config = load_config(path)?;
    println!(
        "{}: ok ({:?} source, {} steps × {} s, seed {})",
        path.display(),
        config.source.choice,
        config.scan.n_steps,
        config.scan.dwell_s,
        config.master_seed
    );
    Ok(())
}
