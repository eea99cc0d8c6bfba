//! `atom-diode` command-line front end.

mod format;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use atom_diode::config::ConfigError;
use atom_diode::diode::{
    boundary_full_reflection, boundary_left, classify, classify_combined, CombinedMode,
    CombinedVerdict, Verdict,
};
use atom_diode::fields::reduce_three_to_two;
use atom_diode::params::CM_PER_S;
use atom_diode::scheme::{Incidence, Scheme};
use atom_diode::sweep::{format_diagram, run_sweep_with_progress, VerdictCode};
use atom_diode::{presets, solve_with, RunConfig};
use clap::{Args, Parser, Subcommand};

use format::sig;

#[derive(Parser)]
#[command(name = "atom-diode", version, about = "Scattering and phase diagrams for laser atom diodes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// Configuration file.
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration, e.g. fig3b.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one incidence and print amplitudes, probabilities and verdict.
    Solve {
        #[command(flatten)]
        source: Source,
        /// Signed speed in cm/s; negative means incidence from the right.
        #[arg(long, allow_hyphen_values = true)]
        w: f64,
        /// Incidence angle in degrees.
        #[arg(long, allow_hyphen_values = true)]
        theta: f64,
        /// Classification threshold.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Classify every cell of the configured grid and write a diagram.
    Sweep {
        #[command(flatten)]
        source: Source,
        /// Output file; defaults to the configured path, else stdout.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Worker threads; defaults to the number of cores.
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Tabulate the analytic speed bounds against the angle.
    Boundaries {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Angle spacing in degrees.
        #[arg(long, default_value_t = 1.0)]
        step: f64,
    },
    /// Print the two-level configuration a far-detuned three-level one reduces to.
    Reduce {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
}

/// Failure classes with their exit codes.
enum Failure {
    Usage(anyhow::Error),
    Numerical(anyhow::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.into())
    }
}

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Solve { source, w, theta, threshold } => cmd_solve(&source, w, theta, threshold),
        Command::Sweep { source, out, jobs, threshold } => cmd_sweep(&source, out, jobs, threshold),
        Command::Boundaries { source, out, step } => cmd_boundaries(&source, out, step),
        Command::Reduce { source, out } => cmd_reduce(&source, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load(source: &Source) -> Result<RunConfig, Failure> {
    match (&source.config, &source.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(usage)?;
            RunConfig::parse(&text)
                .with_context(|| format!("in {}", path.display()))
                .map_err(usage)
        }
        (None, Some(name)) => Ok(presets::by_name(name)?),
        (None, None) => Err(usage(anyhow!(
            "one of --config or --preset is required (presets: {})",
            presets::names().collect::<Vec<_>>().join(", ")
        ))),
    }
}

fn check_threshold(t: Option<f64>) -> Result<Option<f64>, Failure> {
    match t {
        Some(x) if !(x > 0.0 && x < 1.0) => Err(usage(anyhow!("--threshold must lie in (0, 1), got {x}"))),
        _ => Ok(t),
    }
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(usage),
        None => io::stdout().write_all(text.as_bytes()).context("writing stdout").map_err(usage),
    }
}

fn verdict_name(v: Verdict) -> String {
    match v {
        Verdict::FullReflection => "full-reflection".into(),
        Verdict::FullTransmission(j) => format!("full-transmission-{}", j + 1),
        Verdict::FullAbsorption => "full-absorption".into(),
        Verdict::Undefined => "undefined".into(),
        Verdict::Other => "other".into(),
    }
}

fn cmd_solve(source: &Source, w: f64, theta: f64, threshold: Option<f64>) -> Result<(), Failure> {
    let cfg = load(source)?;
    let threshold = check_threshold(threshold)?.unwrap_or(atom_diode::diode::DEFAULT_THRESHOLD);
    if !(w.is_finite() && theta.is_finite() && theta.abs() < 90.0) {
        return Err(usage(anyhow!("need finite --w and |--theta| < 90")));
    }
    let scheme = cfg.scheme_config()?;
    let settings = cfg.solver.settings();
    let inc = Incidence::from_lab_units(w, theta, 0);
    let r = solve_with(&scheme, &inc, &settings).map_err(|e| Failure::Numerical(e.into()))?;
    let transfer = scheme.transfer_channel();
    let c = classify(&r, transfer, threshold);

    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        out.push_str(k);
        out.push('=');
        out.push_str(&v);
        out.push('\n');
    };
    kv("w_cm_per_s", sig(w));
    kv("theta_deg", sig(theta));
    kv("channels", r.wavenumbers.len().to_string());
    kv("incident_channel", "1".into());
    for (j, k) in r.wavenumbers.iter().enumerate() {
        let n = j + 1;
        kv(&format!("kx_{n}_re"), sig(k.re));
        kv(&format!("kx_{n}_im"), sig(k.im));
    }
    for j in 0..r.wavenumbers.len() {
        let n = j + 1;
        kv(&format!("R_{n}1_re"), sig(r.reflection[j].re));
        kv(&format!("R_{n}1_im"), sig(r.reflection[j].im));
        kv(&format!("T_{n}1_re"), sig(r.transmission[j].re));
        kv(&format!("T_{n}1_im"), sig(r.transmission[j].im));
    }
    for j in 0..r.wavenumbers.len() {
        kv(&format!("P_R_{}", j + 1), sig(r.prob_reflection[j]));
    }
    for j in 0..r.wavenumbers.len() {
        kv(&format!("P_T_{}", j + 1), sig(r.prob_transmission[j]));
    }
    kv("absorption", sig(r.absorption));
    kv("step_m", sig(r.grid.effective_step()));
    kv("error_estimate", r.error_estimate.map_or_else(|| "nan".into(), sig));
    kv("near_threshold", r.near_threshold.to_string());
    kv("verdict", verdict_name(c.verdict));
    kv("budget", sig(c.budget));
    kv("threshold", sig(threshold));
    if scheme.has_quench() && inc.from_left() {
        let combined = classify_combined(&scheme, &inc, &settings, threshold, CombinedMode::Staged)
            .map_err(|e| Failure::Numerical(e.into()))?;
        kv(
            "combined",
            match combined.verdict {
                CombinedVerdict::Works => "diode-works".into(),
                CombinedVerdict::Breakdown(reason) => format!("breakdown-{}", reason.as_char()),
                CombinedVerdict::Undefined => "undefined".into(),
            },
        );
    }
    write_output(None, &out)
}

fn cmd_sweep(source: &Source, out: Option<PathBuf>, jobs: Option<usize>, threshold: Option<f64>) -> Result<(), Failure> {
    let cfg = load(source)?;
    let mut spec = cfg
        .sweep
        .ok_or_else(|| usage(anyhow!("the configuration has no [sweep] section")))?;
    if let Some(t) = check_threshold(threshold)? {
        spec.threshold = t;
    }
    let jobs = match jobs {
        Some(0) => return Err(usage(anyhow!("--jobs must be positive"))),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let out = out.or_else(|| cfg.output.clone());
    let total = spec.cell_count().unwrap_or(0);
    let stride = (total / 100).max(1);
    let progress = |done: usize| {
        if done % stride == 0 || done == total {
            eprint!("\rswept {done}/{total} cells");
            if done == total {
                eprintln!();
            }
        }
    };
    let diagram = run_sweep_with_progress(&cfg, &spec, jobs, &progress).map_err(usage)?;
    let text = format_diagram(&diagram).map_err(usage)?;
    write_output(out.as_deref(), &text)?;

    let count = |code: VerdictCode| diagram.cells.iter().filter(|c| c.code == code).count();
    let summary: Vec<String> = [
        VerdictCode::R,
        VerdictCode::T,
        VerdictCode::A,
        VerdictCode::D,
        VerdictCode::O,
        VerdictCode::U,
        VerdictCode::X,
    ]
    .iter()
    .map(|c| format!("{}={}", c.as_char(), count(*c)))
    .collect();
    eprintln!("cells: {}", summary.join(" "));
    let failed = count(VerdictCode::X);
    if failed * 10 > diagram.cells.len() {
        return Err(Failure::Numerical(anyhow!(
            "{failed} of {} cells failed to converge",
            diagram.cells.len()
        )));
    }
    Ok(())
}

fn cmd_boundaries(source: &Source, out: Option<PathBuf>, step: f64) -> Result<(), Failure> {
    let cfg = load(source)?;
    let scheme = cfg.scheme_config()?;
    if !(step > 0.0 && step <= 90.0) {
        return Err(usage(anyhow!("--step must lie in (0, 90]")));
    }
    let mut text = String::from("theta_deg\tv_rbound_cm_per_s\tv_lbound_cm_per_s\tlbound_side\n");
    let n = (180.0 / step).round() as i64;
    for i in 0..=n {
        let theta_deg = (-90.0 + i as f64 * 180.0 / n as f64).clamp(-90.0, 90.0);
        let theta = theta_deg.to_radians();
        let rbound = if theta_deg.abs() == 90.0 {
            f64::INFINITY
        } else {
            boundary_full_reflection(theta, scheme.ground_mirror_peak(), &scheme.atom) / CM_PER_S
        };
        let left = boundary_left(&scheme, theta);
        let (lbound, side) = match (left.ceiling(), left.floor()) {
            (Some(v), _) => (v / CM_PER_S, "max"),
            (None, Some(v)) => (v / CM_PER_S, "min"),
            (None, None) => (f64::NAN, "-"),
        };
        text.push_str(&format!("{}\t{}\t{}\t{side}\n", sig(theta_deg), sig(rbound), sig(lbound)));
    }
    write_output(out.as_deref(), &text)
}

fn cmd_reduce(source: &Source, out: Option<PathBuf>) -> Result<(), Failure> {
    let cfg = load(source)?;
    let scheme = cfg.scheme_config()?;
    let Scheme::ThreeLevel(s) = &scheme.scheme else {
        return Err(usage(anyhow!("reduce needs a three-level configuration")));
    };
    let reduction = reduce_three_to_two(s, &scheme.atom).map_err(usage)?;
    let reduced = cfg.with_two_level(&reduction.scheme);
    let ratio = sig(reduction.validity_ratio);
    eprintln!("validity_ratio={ratio}");
    let text = format!(
        "# reduced from a three-level configuration\n# validity_ratio = {ratio} (max Rabi peak over |2 pump detuning|)\n{}\n",
        reduced.emit()
    );
    write_output(out.as_deref(), &text)
}
