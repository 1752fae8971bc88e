use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use krflow::config::{parse_config, RunConfig, RunMode};
use krflow::driver::{self, Model};
use krflow::io::{self, SnapshotHeader, Summary};
use krflow::oracle::OracleReport;
use krflow::{analysis, Error};

/// Normalized Kähler-Ricci flow on a base times a flat torus.
#[derive(Parser)]
#[command(name = "krflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// INI-style run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding the configured one.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized oracle test fields.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Preflight oracles, then the monitored run.
    Simulate(Common),
    /// Every oracle check, printed as a table.
    OracleCheck {
        #[command(flatten)]
        common: Common,
        /// Scale the volume density by 1.01 before the stationary check.
        #[arg(long)]
        corrupt_omega: bool,
    },
    /// Decay fit on an existing monitor series.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Monitor CSV; defaults to `<out>/monitors.csv`.
        monitors: Option<PathBuf>,
    },
}

/// A failed run: exit status plus a one-line machine-readable reason.
struct Failure {
    code: u8,
    kind: String,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: 3, kind: e.kind().to_string(), message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

fn check_failed(message: impl Into<String>) -> Failure {
    Failure { code: 1, kind: "CheckFailed".into(), message: message.into() }
}

fn load(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure {
                code: 3,
                kind: "Io".into(),
                message: format!("{}: {e}", p.display()),
            })?;
            parse_config(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(o) = &common.out {
        cfg.output.directory = o.clone();
    }
    Ok(cfg)
}

fn print_reports(reports: &[OracleReport]) {
    println!("{:<36} {:>12} {:>12}  result", "oracle", "deviation", "tolerance");
    for r in reports {
        println!("{}", r);
    }
}

fn failed_names(reports: &[OracleReport]) -> Vec<String> {
    reports.iter().filter(|r| !r.pass).map(|r| r.name.clone()).collect()
}

fn write_snapshot(path: &Path, cfg: &RunConfig, nb: usize, state: &krflow::flow::FlowState) -> Result<(), Failure> {
    let g = &cfg.geometry;
    let header = SnapshotHeader { m: g.m as u32, n: g.n as u32, nb: nb as u32, nf: g.fiber_grid as u32 };
    io::write_snapshot(BufWriter::new(fs::File::create(path)?), header, state)?;
    Ok(())
}

fn simulate(common: &Common) -> Result<(), Failure> {
    let cfg = load(common)?;
    let out = cfg.output.directory.clone();
    fs::create_dir_all(&out)?;
    fs::write(out.join("config.ini"), cfg.to_text())?;

    let reports = driver::preflight(&cfg, common.seed, 1.0)?;
    io::write_oracle_reports(BufWriter::new(fs::File::create(out.join("oracle.csv"))?), &reports)?;
    if !common.quiet {
        print_reports(&reports);
    }
    let failed = failed_names(&reports);
    if !failed.is_empty() {
        return Err(check_failed(format!("preflight oracles failed: {}", failed.join(", "))));
    }

    let model = Model::build(&cfg)?;
    let every = cfg.output.snapshot_every;
    let snap_dir = out.join("snapshots");
    if every > 0 {
        fs::create_dir_all(&snap_dir)?;
    }
    let bolza = matches!(model, Model::Reduced { full: None, .. });
    // full-grid snapshots on the torus; fiber-factor snapshots (N_b = 1) on the octagon
    let snap_nb = if bolza { 1 } else { cfg.geometry.base_grid };
    let quiet = common.quiet;
    let result = driver::simulate(&model, &cfg, |s| {
        if every > 0 && s.index % every == 0 {
            let state = s.full.unwrap_or(&s.factors[s.factors.len() - 1]);
            write_snapshot(&snap_dir.join(format!("snap_{:05}.krfl", s.index)), &cfg, snap_nb, state)
                .map_err(|f| Error::Format { what: "snapshot", message: f.message })?;
        }
        if !quiet && s.index % 10 == 0 {
            eprintln!("t = {:8.3}  sup|phi| = {:.3e}  sup|phidot| = {:.3e}", s.record.t, s.record.sup_phi, s.record.sup_phidot);
        }
        Ok(())
    });
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            let mut s = Summary::default();
            s.push("pass", false);
            s.push("failure", e.kind());
            s.push("failure_message", &e);
            fs::write(out.join("summary.txt"), s.to_text())?;
            return Err(e.into());
        }
    };
    io::write_monitors(BufWriter::new(fs::File::create(out.join("monitors.csv"))?), &outcome.records)?;
    match (&outcome.final_full, outcome.final_factors.last()) {
        (Some(f), _) => write_snapshot(&out.join("final.krfl"), &cfg, cfg.geometry.base_grid, f)?,
        (None, Some(f)) if cfg.run_mode() == RunMode::Reduced => write_snapshot(&out.join("final_fiber.krfl"), &cfg, 1, f)?,
        _ => {}
    }

    let checks = driver::check_run(&cfg, &outcome)?;
    let summary = driver::summarize(&cfg, &outcome, &checks, &reports);
    fs::write(out.join("summary.txt"), summary.to_text())?;
    if !quiet {
        print!("{}", summary.to_text());
    }
    let bad = checks.failures();
    if !bad.is_empty() {
        return Err(check_failed(format!("invariant checks failed: {}", bad.join(", "))));
    }
    Ok(())
}

fn oracle_check(common: &Common, corrupt_omega: bool) -> Result<(), Failure> {
    let cfg = load(common)?;
    let scale = if corrupt_omega { 1.01 } else { 1.0 };
    let mut reports = driver::preflight(&cfg, common.seed, scale)?;
    reports.push(driver::refinement_order_oracle(cfg.geometry.fiber_modulus)?);
    print_reports(&reports);
    let failed = failed_names(&reports);
    if failed.is_empty() {
        Ok(())
    } else {
        Err(check_failed(format!("oracles failed: {}", failed.join(", "))))
    }
}

fn fit(common: &Common, monitors: Option<&Path>) -> Result<(), Failure> {
    let cfg = load(common)?;
    let path = monitors.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.directory.join("monitors.csv"));
    let text = fs::read_to_string(&path)
        .map_err(|e| Failure { code: 3, kind: "Io".into(), message: format!("{}: {e}", path.display()) })?;
    let records = io::read_monitors(&text)?;
    let series: Vec<(f64, f64)> = records.iter().map(|r| (r.t, r.sup_phi)).collect();
    let d = analysis::decay_fit(&series, cfg.analysis.fit_window)?;
    let mut s = Summary::default();
    s.push_f64("decay.window_start", d.window.0);
    s.push_f64("decay.window_end", d.window.1);
    s.push_f64("decay.constant", d.constant);
    s.push_f64("decay.log_slope", d.log_slope);
    s.push_f64("decay.ratio_spread", d.ratio_spread);
    s.push("decay.samples", d.samples);
    s.push("decay.pass", d.pass);
    // same rule as the run verdict: a roundoff series sits below every envelope
    let roundoff = series.iter().all(|p| p.1 < analysis::BLOW_UP_FLOOR);
    if roundoff {
        s.push("decay.gated", false);
    }
    print!("{}", s.to_text());
    if d.pass || roundoff {
        Ok(())
    } else {
        Err(check_failed(format!("ratio spread {} exceeds {}", d.ratio_spread, analysis::RATIO_BOUND)))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(c) => simulate(c),
        Command::OracleCheck { common, corrupt_omega } => oracle_check(common, *corrupt_omega),
        Command::Fit { common, monitors } => fit(common, monitors.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("status=fail kind={} message={:?}", f.kind, f.message);
            ExitCode::from(f.code)
        }
    }
}
