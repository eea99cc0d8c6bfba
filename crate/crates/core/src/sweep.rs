//! Classification sweeps over a grid of signed speeds and incidence angles,
//! boundary extraction, and the tab-separated diagram format.

use std::fmt::Write as _;
use std::io;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use thiserror::Error;

pub use crate::config::{SweepMode, SweepSpec};
use crate::config::{ConfigError, RunConfig};
use crate::diode::{classify, classify_combined, CombinedMode, CombinedVerdict, Verdict};
use crate::scheme::{Incidence, SchemeConfig};
use crate::solver::{solve_with, ScatteringResult, SolveError, SolverSettings, GRAZING_SPEED};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "# atom-diode phase diagram v";

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("thread pool: {0}")]
    Pool(String),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("unsupported diagram version {0}")]
    Version(String),
    #[error("diagram line {line}: {message}")]
    Format { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VerdictCode {
    /// Full reflection.
    R,
    /// Full transmission.
    T,
    /// Full absorption.
    A,
    /// Diode works.
    D,
    O,
    /// Solver failed.
    X,
    U,
}

impl VerdictCode {
    pub fn as_char(&self) -> char {
        match self {
            VerdictCode::R => 'R',
            VerdictCode::T => 'T',
            VerdictCode::A => 'A',
            VerdictCode::D => 'D',
            VerdictCode::O => 'O',
            VerdictCode::X => 'X',
            VerdictCode::U => 'U',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        Some(match c {
            'R' => VerdictCode::R,
            'T' => VerdictCode::T,
            'A' => VerdictCode::A,
            'D' => VerdictCode::D,
            'O' => VerdictCode::O,
            'X' => VerdictCode::X,
            'U' => VerdictCode::U,
            _ => return None,
        })
    }

    fn of(verdict: Verdict) -> Self {
        match verdict {
            Verdict::FullReflection => VerdictCode::R,
            Verdict::FullTransmission(_) => VerdictCode::T,
            Verdict::FullAbsorption => VerdictCode::A,
            Verdict::Undefined => VerdictCode::U,
            Verdict::Other => VerdictCode::O,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Probabilities {
    pub reflection: Vec<f64>,
    pub transmission: Vec<f64>,
    pub absorption: f64,
}

impl Probabilities {
    fn of(r: &ScatteringResult) -> Self {
        Self {
            reflection: r.prob_reflection.clone(),
            transmission: r.prob_transmission.clone(),
            absorption: r.absorption,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub w_cm_s: f64,
    pub theta_deg: f64,
    pub code: VerdictCode,
    pub budget: Option<f64>,
    pub probabilities: Option<Probabilities>,
    /// Free-form tokens without whitespace or commas, e.g. `reason=A`.
    pub flags: Vec<String>,
}

impl Cell {
    pub fn flag_value(&self, key: &str) -> Option<&str> {
        self.flags
            .iter()
            .find_map(|f| f.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDiagram {
    pub spec: SweepSpec,
    pub channels: usize,
    /// The configuration the diagram was computed from, as file text.
    pub config: String,
    /// Angle-major: cell `(i_theta, i_w)` sits at `i_theta * w_count + i_w`.
    pub cells: Vec<Cell>,
}

/// `i`-th of `n` evenly spaced values from `lo` to `hi`.
pub fn grid_value(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
    if i + 1 == n {
        hi
    } else {
        lo + (hi - lo) * i as f64 / (n - 1) as f64
    }
}

impl SweepSpec {
    pub fn speeds(&self) -> Vec<f64> {
        (0..self.w_count)
            .map(|i| grid_value(self.w_min_cm_s, self.w_max_cm_s, self.w_count, i))
            .collect()
    }

    pub fn angles(&self) -> Vec<f64> {
        (0..self.theta_count)
            .map(|i| grid_value(self.theta_min_deg, self.theta_max_deg, self.theta_count, i))
            .collect()
    }

    pub fn cell_count(&self) -> Option<usize> {
        self.w_count.checked_mul(self.theta_count)
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        let bad = |m: &str| Err(SweepError::InvalidSpec(m.to_string()));
        if self.w_count < 2 || self.theta_count < 2 {
            return bad("speed and angle counts must be at least 2");
        }
        if self.cell_count().is_none() {
            return bad("too many cells");
        }
        let finite = [
            self.w_min_cm_s,
            self.w_max_cm_s,
            self.theta_min_deg,
            self.theta_max_deg,
            self.threshold,
        ];
        if finite.iter().any(|x| !x.is_finite()) {
            return bad("ranges must be finite");
        }
        if self.w_min_cm_s >= self.w_max_cm_s || self.theta_min_deg >= self.theta_max_deg {
            return bad("ranges must be increasing");
        }
        if self.theta_min_deg <= -90.0 || self.theta_max_deg >= 90.0 {
            return bad("angles must lie strictly inside (-90, 90) degrees");
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad("threshold must lie in (0, 1)");
        }
        let grazing = GRAZING_SPEED / 1e-2;
        if self.speeds().iter().any(|w| w.abs() < grazing) {
            return bad("a grid speed falls inside the grazing band");
        }
        let combined = matches!(self.mode, SweepMode::Combined | SweepMode::CombinedMonolithic);
        if combined && self.w_min_cm_s <= 0.0 {
            return bad("combined sweeps need incidence from the left (w > 0)");
        }
        Ok(())
    }
}

fn error_flag(e: &SolveError) -> (VerdictCode, &'static str) {
    match e {
        SolveError::ClosedIncidentChannel { .. } => (VerdictCode::U, "closed-incident"),
        SolveError::GrazingIncidence { .. } => (VerdictCode::U, "grazing"),
        SolveError::InvalidGrid(_) => (VerdictCode::X, "invalid-grid"),
        SolveError::NonConvergence { .. } => (VerdictCode::X, "nonconvergence"),
        SolveError::IllConditionedMatching { .. } => (VerdictCode::X, "ill-conditioned"),
        SolveError::UnsupportedDimension { .. } => (VerdictCode::X, "unsupported-dimension"),
    }
}

fn result_flags(r: &ScatteringResult, flags: &mut Vec<String>) {
    if r.near_threshold {
        flags.push("near-threshold".into());
    }
    if let Some(e) = r.error_estimate {
        flags.push(format!("err={e:e}"));
    }
}

/// Classifies one grid cell.
pub fn evaluate_cell(
    config: &SchemeConfig,
    settings: &SolverSettings,
    mode: SweepMode,
    threshold: f64,
    w_cm_s: f64,
    theta_deg: f64,
) -> Cell {
    let mut cell = Cell {
        w_cm_s,
        theta_deg,
        code: VerdictCode::X,
        budget: None,
        probabilities: None,
        flags: Vec::new(),
    };
    let transfer = config.transfer_channel();
    let single = |cfg: SchemeConfig, channel: usize, cell: &mut Cell| {
        let inc = Incidence::from_lab_units(w_cm_s, theta_deg, channel);
        match solve_with(&cfg, &inc, settings) {
            Ok(r) => {
                let c = classify(&r, transfer, threshold);
                cell.code = VerdictCode::of(c.verdict);
                cell.budget = Some(c.budget);
                cell.probabilities = Some(Probabilities::of(&r));
                result_flags(&r, &mut cell.flags);
            }
            Err(e) => {
                let (code, flag) = error_flag(&e);
                cell.code = code;
                cell.flags.push(flag.into());
            }
        }
    };
    let combined_mode = match mode {
        SweepMode::Transmit => {
            single(config.without_quench(), 0, &mut cell);
            return cell;
        }
        SweepMode::Quench => {
            single(config.quench_only(), transfer, &mut cell);
            return cell;
        }
        SweepMode::Combined => CombinedMode::Staged,
        SweepMode::CombinedMonolithic => CombinedMode::Monolithic,
    };
    let inc = Incidence::from_lab_units(w_cm_s, theta_deg, 0);
    match classify_combined(config, &inc, settings, threshold, combined_mode) {
        Ok(out) => {
            cell.budget = Some(out.budget());
            cell.code = match out.verdict {
                CombinedVerdict::Works => VerdictCode::D,
                CombinedVerdict::Breakdown(_) => VerdictCode::O,
                CombinedVerdict::Undefined => VerdictCode::U,
            };
            if let Some(r) = out.verdict.reason() {
                cell.flags.push(format!("reason={}", r.as_char()));
            }
            let last = match &out.quench {
                Some((r, _)) => {
                    cell.flags.push("stage=2".into());
                    r
                }
                None => &out.first.0,
            };
            cell.probabilities = Some(Probabilities::of(last));
            result_flags(last, &mut cell.flags);
        }
        Err(crate::diode::CombinedError::Solve(e)) => {
            let (code, flag) = error_flag(&e);
            cell.code = code;
            cell.flags.push(flag.into());
        }
        Err(crate::diode::CombinedError::RightIncidence) => {
            cell.code = VerdictCode::U;
            cell.flags.push("right-incidence".into());
        }
    }
    cell
}

pub fn run_sweep(config: &RunConfig, spec: &SweepSpec, jobs: usize) -> Result<PhaseDiagram, SweepError> {
    run_sweep_with_progress(config, spec, jobs, &|_| {})
}

/// As [`run_sweep`], calling `progress` with the number of finished cells.
/// The diagram does not depend on `jobs`.
pub fn run_sweep_with_progress(
    config: &RunConfig,
    spec: &SweepSpec,
    jobs: usize,
    progress: &(dyn Fn(usize) + Sync),
) -> Result<PhaseDiagram, SweepError> {
    spec.validate()?;
    if jobs == 0 {
        return Err(SweepError::InvalidSpec("jobs must be positive".into()));
    }
    let scheme = config.scheme_config()?;
    let settings = config.solver.settings();
    let speeds = spec.speeds();
    let angles = spec.angles();
    let n = speeds.len() * angles.len();
    let done = AtomicUsize::new(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| SweepError::Pool(e.to_string()))?;
    let cells: Vec<Cell> = pool.install(|| {
        (0..n)
            .into_par_iter()
            .map(|idx| {
                let theta = angles[idx / speeds.len()];
                let w = speeds[idx % speeds.len()];
                let cell = evaluate_cell(&scheme, &settings, spec.mode, spec.threshold, w, theta);
                progress(done.fetch_add(1, Ordering::Relaxed) + 1);
                cell
            })
            .collect()
    });
    let mut echo = config.clone();
    echo.sweep = Some(*spec);
    echo.output = None;
    Ok(PhaseDiagram {
        spec: *spec,
        channels: scheme.channel_count(),
        config: echo.emit(),
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanDirection {
    /// From the smallest speed upwards.
    Increasing,
    Decreasing,
}

/// For each angle column, the first speed at which membership in `code`
/// changes, scanning in `direction`. Undefined and failed cells are skipped.
pub fn extract_boundary(diagram: &PhaseDiagram, code: VerdictCode, direction: ScanDirection) -> Vec<(f64, f64)> {
    extract_boundary_where(diagram, code, direction, |_| true)
}

/// As [`extract_boundary`], restricted to the cells `keep` accepts.
pub fn extract_boundary_where(
    diagram: &PhaseDiagram,
    code: VerdictCode,
    direction: ScanDirection,
    keep: impl Fn(&Cell) -> bool,
) -> Vec<(f64, f64)> {
    let nw = diagram.spec.w_count;
    let mut out = Vec::new();
    for column in diagram.cells.chunks(nw) {
        let mut cells: Vec<&Cell> = column
            .iter()
            .filter(|c| !matches!(c.code, VerdictCode::U | VerdictCode::X) && keep(c))
            .collect();
        if direction == ScanDirection::Decreasing {
            cells.reverse();
        }
        let Some(first) = cells.first() else { continue };
        let start = first.code == code;
        if let Some(c) = cells.iter().find(|c| (c.code == code) != start) {
            out.push((c.theta_deg, c.w_cm_s));
        }
    }
    out
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".into(), num)
}

pub fn format_diagram(diagram: &PhaseDiagram) -> Result<String, SweepError> {
    if diagram.cells.is_empty() {
        return Err(SweepError::InvalidSpec("refusing to write an empty diagram".into()));
    }
    let s = &diagram.spec;
    let n = diagram.channels;
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}{FORMAT_VERSION}");
    let _ = writeln!(out, "# mode\t{}", s.mode.as_str());
    let _ = writeln!(out, "# channels\t{n}");
    let _ = writeln!(out, "# w_cm_per_s\t{}\t{}\t{}", num(s.w_min_cm_s), num(s.w_max_cm_s), s.w_count);
    let _ = writeln!(out, "# theta_deg\t{}\t{}\t{}", num(s.theta_min_deg), num(s.theta_max_deg), s.theta_count);
    let _ = writeln!(out, "# threshold\t{}", num(s.threshold));
    for line in diagram.config.split('\n') {
        let _ = writeln!(out, "# config\t{line}");
    }
    out.push_str("# columns\tw_cm_per_s\ttheta_deg\tverdict\tbudget");
    for j in 1..=n {
        let _ = write!(out, "\tPR_{j}");
    }
    for j in 1..=n {
        let _ = write!(out, "\tPT_{j}");
    }
    out.push_str("\tabsorption\tflags\n");
    for c in &diagram.cells {
        let _ = write!(out, "{}\t{}\t{}\t{}", num(c.w_cm_s), num(c.theta_deg), c.code.as_char(), opt_num(c.budget));
        match &c.probabilities {
            Some(p) => {
                if p.reflection.len() != n || p.transmission.len() != n {
                    return Err(SweepError::InvalidSpec("cell channel count mismatch".into()));
                }
                for x in p.reflection.iter().chain(&p.transmission) {
                    let _ = write!(out, "\t{}", num(*x));
                }
                let _ = write!(out, "\t{}", num(p.absorption));
            }
            None => {
                for _ in 0..2 * n + 1 {
                    out.push_str("\tnan");
                }
            }
        }
        if c.flags.iter().any(|f| f.is_empty() || f.contains(|ch: char| ch == ',' || ch.is_whitespace())) {
            return Err(SweepError::InvalidSpec("flags must be non-empty tokens without commas or whitespace".into()));
        }
        let flags = if c.flags.is_empty() { "-".to_string() } else { c.flags.join(",") };
        let _ = writeln!(out, "\t{flags}");
    }
    Ok(out)
}

pub fn write_diagram(diagram: &PhaseDiagram, path: &Path) -> Result<(), SweepError> {
    let text = format_diagram(diagram)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_diagram(path: &Path) -> Result<PhaseDiagram, SweepError> {
    parse_diagram(&std::fs::read_to_string(path)?)
}

fn format_err(line: usize, message: impl Into<String>) -> SweepError {
    SweepError::Format {
        line,
        message: message.into(),
    }
}

fn parse_f64(s: &str, line: usize) -> Result<f64, SweepError> {
    s.parse::<f64>()
        .map_err(|_| format_err(line, format!("`{s}` is not a number")))
}

fn parse_opt(s: &str, line: usize) -> Result<Option<f64>, SweepError> {
    if s == "nan" {
        Ok(None)
    } else {
        parse_f64(s, line).map(Some)
    }
}

/// Parses the text written by [`format_diagram`].
pub fn parse_diagram(text: &str) -> Result<PhaseDiagram, SweepError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines.next().ok_or_else(|| format_err(1, "empty file"))?;
    let version = first
        .strip_prefix(MAGIC)
        .ok_or_else(|| format_err(1, "not a phase diagram"))?;
    if version != FORMAT_VERSION.to_string() {
        return Err(SweepError::Version(version.to_string()));
    }

    let mut mode = None;
    let mut channels = None;
    let mut w = None;
    let mut theta = None;
    let mut threshold = None;
    let mut config: Vec<&str> = Vec::new();
    let mut columns = false;
    let mut cells = Vec::new();

    for (no, line) in lines {
        if let Some(header) = line.strip_prefix("# ") {
            if columns {
                return Err(format_err(no, "header after the column line"));
            }
            let (key, rest) = header.split_once('\t').unwrap_or((header, ""));
            let fields: Vec<&str> = rest.split('\t').collect();
            let range = |fields: &[&str]| -> Result<(f64, f64, usize), SweepError> {
                if fields.len() != 3 {
                    return Err(format_err(no, "expected min, max and count"));
                }
                let count = fields[2]
                    .parse()
                    .map_err(|_| format_err(no, "bad count"))?;
                Ok((parse_f64(fields[0], no)?, parse_f64(fields[1], no)?, count))
            };
            match key {
                "mode" if mode.is_none() => {
                    mode = Some(SweepMode::parse(rest).ok_or_else(|| format_err(no, "unknown mode"))?)
                }
                "channels" if channels.is_none() => {
                    let n: usize = rest.parse().map_err(|_| format_err(no, "bad channel count"))?;
                    if !(1..=4).contains(&n) {
                        return Err(format_err(no, "channel count must be 1 to 4"));
                    }
                    channels = Some(n);
                }
                "w_cm_per_s" if w.is_none() => w = Some(range(&fields)?),
                "theta_deg" if theta.is_none() => theta = Some(range(&fields)?),
                "threshold" if threshold.is_none() => threshold = Some(parse_f64(rest, no)?),
                "config" => config.push(rest),
                "columns" => columns = true,
                _ => return Err(format_err(no, format!("unexpected header `{key}`"))),
            }
            continue;
        }
        if !columns {
            return Err(format_err(no, "data before the column line"));
        }
        let n = channels.ok_or_else(|| format_err(no, "missing channel count"))?;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 * n + 6 {
            return Err(format_err(no, format!("expected {} columns, got {}", 2 * n + 6, fields.len())));
        }
        let code = {
            let mut chars = fields[2].chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => VerdictCode::from_char(c),
                _ => None,
            }
            .ok_or_else(|| format_err(no, "bad verdict code"))?
        };
        let probs: Vec<Option<f64>> = fields[4..4 + 2 * n + 1]
            .iter()
            .map(|f| parse_opt(f, no))
            .collect::<Result<_, _>>()?;
        let probabilities = if probs.iter().all(Option::is_none) {
            None
        } else if probs.iter().all(Option::is_some) {
            let v: Vec<f64> = probs.into_iter().flatten().collect();
            Some(Probabilities {
                reflection: v[..n].to_vec(),
                transmission: v[n..2 * n].to_vec(),
                absorption: v[2 * n],
            })
        } else {
            return Err(format_err(no, "partially missing probabilities"));
        };
        let flags_field = fields[2 * n + 5];
        let flags = if flags_field == "-" {
            Vec::new()
        } else {
            let f: Vec<String> = flags_field.split(',').map(str::to_string).collect();
            if f.iter().any(|t| t.is_empty() || t.contains(char::is_whitespace)) {
                return Err(format_err(no, "bad flags"));
            }
            f
        };
        cells.push(Cell {
            w_cm_s: parse_f64(fields[0], no)?,
            theta_deg: parse_f64(fields[1], no)?,
            code,
            budget: parse_opt(fields[3], no)?,
            probabilities,
            flags,
        });
    }

    let end = text.lines().count();
    let missing = |what: &str| format_err(end, format!("missing {what} header"));
    let (w_min, w_max, w_count) = w.ok_or_else(|| missing("w_cm_per_s"))?;
    let (t_min, t_max, t_count) = theta.ok_or_else(|| missing("theta_deg"))?;
    let spec = SweepSpec {
        mode: mode.ok_or_else(|| missing("mode"))?,
        w_min_cm_s: w_min,
        w_max_cm_s: w_max,
        w_count,
        theta_min_deg: t_min,
        theta_max_deg: t_max,
        theta_count: t_count,
        threshold: threshold.ok_or_else(|| missing("threshold"))?,
    };
    spec.validate()?;
    let channels = channels.ok_or_else(|| missing("channels"))?;
    if !columns {
        return Err(missing("columns"));
    }
    if Some(cells.len()) != spec.cell_count() {
        return Err(format_err(end, "cell count does not match the grid"));
    }
    for (idx, c) in cells.iter().enumerate() {
        let want_w = grid_value(w_min, w_max, w_count, idx % w_count);
        let want_t = grid_value(t_min, t_max, t_count, idx / w_count);
        if c.w_cm_s != want_w || c.theta_deg != want_t {
            return Err(format_err(end, format!("cell {idx} is off the grid")));
        }
    }
    Ok(PhaseDiagram {
        spec,
        channels,
        config: config.join("\n"),
        cells,
    })
}
