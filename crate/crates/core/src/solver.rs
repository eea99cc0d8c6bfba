//! Stationary coupled-channel scattering for `ψ'' = U(x) ψ` with
//! `U = (m/ħ) M(x) − k_x²`.
//!
//! The log-derivative `Y = ψ' ψ⁻¹` of the solutions that are purely outgoing
//! on the right is propagated leftwards across the interaction box with
//! Johnson's method. Alongside it the matrix `G(x)` with `ψ(x_R) = G(x) ψ(x)`
//! is accumulated, which gives the transmitted amplitudes once the reflected
//! ones are fixed by matching `Y` to plane waves at the left edge.

use nalgebra::{Const, SMatrix, SVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::fields::{assemble_three_level, assemble_two_level, PotentialMatrix, PotentialTerm};
use crate::params::CM_PER_S;
use crate::scheme::{
    channel_set, effective_detunings_three_level, effective_detunings_two_level, ChannelSet,
    Incidence, Scheme, SchemeConfig,
};

/// Largest allowed `h · max|Re k_j|`.
pub const MAX_PHASE_PER_STEP: f64 = 0.1;
/// Minimum number of grid points across the box.
pub const MIN_POINTS: usize = 100;
/// Default step in units of the narrowest profile width.
pub const STEPS_PER_WIDTH: f64 = 50.0;
/// Longitudinal speeds below this are rejected as grazing (m/s).
pub const GRAZING_SPEED: f64 = 0.05 * CM_PER_S;
/// Channels with `|k_j| σ_min` below this are flagged as near threshold.
pub const NEAR_THRESHOLD: f64 = 1e-3;
/// Grid refinement stops once no probability changes by more than this.
pub const CONVERGENCE_TOLERANCE: f64 = 1e-6;
/// Maximum number of step halvings in [`verify_convergence`].
pub const MAX_REFINEMENTS: usize = 4;
/// Largest accepted 1-norm condition number of the matching system.
pub const MAX_MATCHING_CONDITION: f64 = 1e12;

/// Box used when the coupling matrix is constant (m).
const FREE_BOX_HALF_WIDTH: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("incident channel {channel} is not an open channel")]
    ClosedIncidentChannel { channel: usize },
    #[error("grazing incidence: longitudinal speed {speed:e} m/s is below the {GRAZING_SPEED:e} m/s cutoff")]
    GrazingIncidence { speed: f64 },
    #[error("invalid solver grid: {0}")]
    InvalidGrid(String),
    #[error("grid refinement did not converge: last change {delta:e} at step {step:e} m")]
    NonConvergence { delta: f64, step: f64 },
    #[error("ill-conditioned matching system (condition number {condition:e})")]
    IllConditionedMatching { condition: f64 },
    #[error("{channels} channels are not supported by the propagator")]
    UnsupportedDimension { channels: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverGrid {
    pub x_min: f64,
    pub x_max: f64,
    /// Requested step (m); the effective step divides the box evenly into an
    /// even number of intervals and is never larger.
    pub step: f64,
}

impl SolverGrid {
    pub fn new(x_min: f64, x_max: f64, step: f64) -> Self {
        Self { x_min, x_max, step }
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn intervals(&self) -> usize {
        let pairs = (self.length() / (2.0 * self.step)).ceil().max(1.0) as usize;
        2 * pairs
    }

    pub fn points(&self) -> usize {
        self.intervals() + 1
    }

    pub fn effective_step(&self) -> f64 {
        self.length() / self.intervals() as f64
    }

    pub fn refined(&self) -> Self {
        Self {
            step: 0.5 * self.effective_step(),
            ..*self
        }
    }

    /// Default grid: the interaction box of `potential`, with
    /// `h = min(0.1 / k_max, σ_min / 50)` where `k_max` also covers the
    /// local wavenumber inside attractive wells.
    pub fn default_for(potential: &PotentialMatrix, channels: &ChannelSet) -> Self {
        let (x_min, x_max) = potential
            .interaction_box()
            .unwrap_or((-FREE_BOX_HALF_WIDTH, FREE_BOX_HALF_WIDTH));
        let mut step = MAX_PHASE_PER_STEP / max_wavenumber(potential, channels);
        if let Some(sigma) = potential.narrowest_width() {
            step = step.min(sigma / STEPS_PER_WIDTH);
        }
        step = step.min((x_max - x_min) / MIN_POINTS as f64);
        Self::new(x_min, x_max, step)
    }

    pub fn validate(&self, channels: &ChannelSet) -> Result<(), SolveError> {
        if !(self.x_min.is_finite() && self.x_max.is_finite() && self.x_max > self.x_min) {
            return Err(SolveError::InvalidGrid(format!(
                "box [{:e}, {:e}] is empty",
                self.x_min, self.x_max
            )));
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(SolveError::InvalidGrid(format!("step {:e} must be positive", self.step)));
        }
        if self.points() < MIN_POINTS {
            return Err(SolveError::InvalidGrid(format!(
                "{} points, need at least {MIN_POINTS}",
                self.points()
            )));
        }
        let kmax = channels
            .channels
            .iter()
            .map(|c| c.kx.re.abs())
            .fold(0.0, f64::max);
        if self.effective_step() * kmax > MAX_PHASE_PER_STEP * (1.0 + 1e-12) {
            return Err(SolveError::InvalidGrid(format!(
                "step {:e} resolves less than 1/{MAX_PHASE_PER_STEP} of the shortest wavelength",
                self.effective_step()
            )));
        }
        Ok(())
    }
}

/// Largest local wavenumber any channel can reach inside the box.
fn max_wavenumber(potential: &PotentialMatrix, channels: &ChannelSet) -> f64 {
    let moh = channels.mass_over_hbar;
    let mut kmax: f64 = 0.0;
    for (j, ch) in channels.channels.iter().enumerate() {
        let mut deepest = potential.asymptote()[j].re;
        for t in potential.terms() {
            if t.row == j && t.col == j && t.profile.peak < 0.0 {
                deepest += t.profile.peak;
            }
        }
        let local = channels.kx * channels.kx - moh * deepest;
        kmax = kmax.max(ch.kx.re.abs()).max(local.max(0.0).sqrt());
    }
    kmax.max(channels.kx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringResult {
    /// Zero-based incident channel.
    pub incident: usize,
    pub from_left: bool,
    /// Asymptotic longitudinal wavenumbers per channel.
    pub wavenumbers: Vec<Complex64>,
    /// Reflection amplitudes `R_{βα}`. Open channels are referenced to the
    /// origin; channels with complex wavenumber to the box edge.
    pub reflection: Vec<Complex64>,
    pub transmission: Vec<Complex64>,
    /// `Re(k_β)/k_α |R_{βα}|²`.
    pub prob_reflection: Vec<f64>,
    pub prob_transmission: Vec<f64>,
    /// `1 − Σ P^R − Σ P^T`.
    pub absorption: f64,
    pub grid: SolverGrid,
    /// Largest probability change seen in the last grid refinement.
    pub error_estimate: Option<f64>,
    /// Some coupled channel sits within `|k| σ < 1e-3` of its threshold.
    pub near_threshold: bool,
    /// 1-norm condition number of the matching system.
    pub matching_condition: f64,
}

impl ScatteringResult {
    pub fn total_reflection(&self) -> f64 {
        self.prob_reflection.iter().sum()
    }

    pub fn total_transmission(&self) -> f64 {
        self.prob_transmission.iter().sum()
    }

    /// Largest difference between corresponding probabilities.
    pub fn max_probability_change(&self, other: &ScatteringResult) -> f64 {
        self.prob_reflection
            .iter()
            .zip(&other.prob_reflection)
            .chain(self.prob_transmission.iter().zip(&other.prob_transmission))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Coupling matrix of `config` for one incidence.
pub fn potential_for(config: &SchemeConfig, incidence: &Incidence) -> PotentialMatrix {
    match &config.scheme {
        Scheme::TwoLevel(s) => {
            assemble_two_level(s, effective_detunings_two_level(s, incidence, &config.atom))
        }
        Scheme::ThreeLevel(s) => {
            assemble_three_level(s, effective_detunings_three_level(s, incidence, &config.atom))
        }
    }
}

/// Optional overrides of the default grid.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolverSettings {
    pub step: Option<f64>,
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
}

impl SolverSettings {
    pub fn grid(&self, potential: &PotentialMatrix, channels: &ChannelSet) -> SolverGrid {
        let d = SolverGrid::default_for(potential, channels);
        SolverGrid::new(
            self.x_min.unwrap_or(d.x_min),
            self.x_max.unwrap_or(d.x_max),
            self.step.unwrap_or(d.step),
        )
    }
}

/// Solves `config` at one incidence on the default grid and refines until
/// converged.
pub fn solve(config: &SchemeConfig, incidence: &Incidence) -> Result<ScatteringResult, SolveError> {
    solve_with(config, incidence, &SolverSettings::default())
}

pub fn solve_with(
    config: &SchemeConfig,
    incidence: &Incidence,
    settings: &SolverSettings,
) -> Result<ScatteringResult, SolveError> {
    let potential = potential_for(config, incidence);
    let channels = channel_set(config, incidence);
    let grid = settings.grid(&potential, &channels);
    let first = solve_scattering(&potential, &channels, incidence, &grid)?;
    verify_convergence(first, &potential, &channels, incidence)
}

/// Re-solves with halved steps until the probabilities change by less than
/// [`CONVERGENCE_TOLERANCE`].
pub fn verify_convergence(
    first: ScatteringResult,
    potential: &PotentialMatrix,
    channels: &ChannelSet,
    incidence: &Incidence,
) -> Result<ScatteringResult, SolveError> {
    let mut last = first;
    let mut delta = f64::INFINITY;
    for _ in 0..MAX_REFINEMENTS {
        let grid = last.grid.refined();
        let mut next = solve_scattering(potential, channels, incidence, &grid)?;
        delta = next.max_probability_change(&last);
        next.error_estimate = Some(delta);
        if delta <= CONVERGENCE_TOLERANCE {
            return Ok(next);
        }
        last = next;
    }
    Err(SolveError::NonConvergence {
        delta,
        step: last.grid.effective_step(),
    })
}

/// Solves the two-sided boundary value problem for one incident channel.
///
/// Right incidence (`w < 0`) is solved as left incidence on the mirrored
/// potential; the box is mirrored with it.
pub fn solve_scattering(
    potential: &PotentialMatrix,
    channels: &ChannelSet,
    incidence: &Incidence,
    grid: &SolverGrid,
) -> Result<ScatteringResult, SolveError> {
    let n = channels.len();
    if potential.dim() != n || n == 0 {
        return Err(SolveError::UnsupportedDimension { channels: n });
    }
    let alpha = incidence.channel;
    let k_in = channels
        .channels
        .get(alpha)
        .filter(|c| c.is_open())
        .ok_or(SolveError::ClosedIncidentChannel { channel: alpha })?
        .kx
        .re;
    let speed = k_in / channels.mass_over_hbar;
    if speed < GRAZING_SPEED {
        return Err(SolveError::GrazingIncidence { speed });
    }
    grid.validate(channels)?;

    let (potential, box_grid) = if incidence.from_left() {
        (potential.clone(), *grid)
    } else {
        (
            potential.mirrored(),
            SolverGrid::new(-grid.x_max, -grid.x_min, grid.step),
        )
    };

    let problem = Problem {
        terms: potential.terms(),
        asymptote: potential.asymptote(),
        wavenumbers: &channels.wavenumbers(),
        kx2: channels.kx * channels.kx,
        moh: channels.mass_over_hbar,
        grid: box_grid,
        incident: alpha,
    };
    let m = match n {
        1 => problem.run::<1>(),
        2 => problem.run::<2>(),
        3 => problem.run::<3>(),
        4 => problem.run::<4>(),
        _ => return Err(SolveError::UnsupportedDimension { channels: n }),
    }?;

    let ks = channels.wavenumbers();
    let (x_l, x_r) = (box_grid.x_min, box_grid.x_max);
    let incoming_phase = Complex64::new(0.0, k_in * x_l).exp();
    let mut reflection = Vec::with_capacity(n);
    let mut transmission = Vec::with_capacity(n);
    let mut prob_reflection = Vec::with_capacity(n);
    let mut prob_transmission = Vec::with_capacity(n);
    for j in 0..n {
        let k = ks[j];
        let weight = k.re / k_in;
        prob_reflection.push(weight * m.edge_reflection[j].norm_sqr());
        prob_transmission.push(weight * m.edge_transmission[j].norm_sqr());
        reflection.push(
            m.edge_reflection[j] * Complex64::new(0.0, k.re * x_l).exp() * incoming_phase,
        );
        transmission.push(
            m.edge_transmission[j] * Complex64::new(0.0, -k.re * x_r).exp() * incoming_phase,
        );
    }
    let absorption =
        1.0 - prob_reflection.iter().sum::<f64>() - prob_transmission.iter().sum::<f64>();

    Ok(ScatteringResult {
        incident: alpha,
        from_left: incidence.from_left(),
        wavenumbers: ks.clone(),
        reflection,
        transmission,
        prob_reflection,
        prob_transmission,
        absorption,
        grid: *grid,
        error_estimate: None,
        near_threshold: near_threshold(&potential, channels, alpha),
        matching_condition: m.condition,
    })
}

/// Whether a channel coupled (directly or not) to the incident one sits at
/// its threshold.
fn near_threshold(potential: &PotentialMatrix, channels: &ChannelSet, incident: usize) -> bool {
    let Some(sigma) = potential.narrowest_width() else {
        return false;
    };
    let n = channels.len();
    let mut active = vec![false; n];
    active[incident] = true;
    let mut changed = true;
    while changed {
        changed = false;
        for t in potential.terms().iter().filter(|t| t.row != t.col) {
            if active[t.row] != active[t.col] {
                active[t.row] = true;
                active[t.col] = true;
                changed = true;
            }
        }
    }
    channels
        .channels
        .iter()
        .zip(&active)
        .any(|(c, &on)| on && c.kx.norm() * sigma < NEAR_THRESHOLD)
}

struct Problem<'a> {
    terms: &'a [PotentialTerm],
    asymptote: &'a [Complex64],
    wavenumbers: &'a [Complex64],
    kx2: f64,
    moh: f64,
    grid: SolverGrid,
    incident: usize,
}

/// Edge-referenced amplitudes: reflected waves `r_j e^{−ik_j(x−x_L)}` and
/// transmitted waves `t_j e^{ik_j(x−x_R)}` for a unit incoming wave
/// `e^{ik_α(x−x_L)}`.
struct Matched {
    edge_reflection: Vec<Complex64>,
    edge_transmission: Vec<Complex64>,
    condition: f64,
}

type Mat<const N: usize> = SMatrix<Complex64, N, N>;

impl Problem<'_> {
    /// `U(x) = (m/ħ) M(x) − k_x²` with the Gaussian values taken from `walk`.
    #[inline]
    fn coupling<const N: usize>(&self, base: &Mat<N>, walk: &GaussianWalk) -> Mat<N> {
        let mut u = *base;
        for (t, &g) in self.terms.iter().zip(&walk.values) {
            let v = Complex64::new(self.moh * g, 0.0);
            u[(t.row, t.col)] += v;
            if t.row != t.col {
                u[(t.col, t.row)] += v;
            }
        }
        u
    }

    fn run<const N: usize>(&self) -> Result<Matched, SolveError> {
        let one = Mat::<N>::identity();
        let mut base = Mat::<N>::zeros();
        for j in 0..N {
            base[(j, j)] = self.asymptote[j] * self.moh - self.kx2;
        }
        let intervals = self.grid.intervals();
        let h = self.grid.effective_step();
        let mut walk = GaussianWalk::new(self.terms, self.grid.x_min, h, intervals);
        let third = h / 3.0;
        let ik = Mat::<N>::from_diagonal(&SVector::<Complex64, N>::from_fn(|j, _| {
            Complex64::new(0.0, 1.0) * self.wavenumbers[j]
        }));

        // outgoing waves on the right
        let mut y = ik;
        let mut g = one;
        y -= self.coupling(&base, &walk) * Complex64::new(third, 0.0);
        for i in (0..intervals).rev() {
            // free flight from x_{i+1} to x_i: ψ(x_{i+1}) = (1 − hY)⁻¹ ψ(x_i)
            let a = (one - y * Complex64::new(h, 0.0))
                .try_inverse()
                .ok_or_else(|| SolveError::InvalidGrid("singular propagation step".into()))?;
            y *= a;
            g *= a;
            walk.step_down();
            let u = self.coupling(&base, &walk);
            let kick = if i == 0 {
                u
            } else if i % 2 == 1 {
                // Johnson's corrected quadrature point
                let c = (one - u * Complex64::new(h * h / 6.0, 0.0))
                    .try_inverse()
                    .ok_or_else(|| SolveError::InvalidGrid("singular quadrature point".into()))?;
                (c * u) * Complex64::new(4.0, 0.0)
            } else {
                u * Complex64::new(2.0, 0.0)
            };
            y -= kick * Complex64::new(third, 0.0);
        }

        // ψ(x_L) = e_α + r, ψ'(x_L) = iK (e_α − r), ψ' = Y ψ
        let lhs = y + ik;
        let inv = lhs.try_inverse().ok_or(SolveError::IllConditionedMatching {
            condition: f64::INFINITY,
        })?;
        let condition = one_norm(&lhs) * one_norm(&inv);
        if !(condition <= MAX_MATCHING_CONDITION) {
            return Err(SolveError::IllConditionedMatching { condition });
        }
        let e = SVector::<Complex64, N>::from_fn(|j, _| {
            if j == self.incident {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let r = inv * ((ik - y) * e);
        let t = g * (e + r);
        Ok(Matched {
            edge_reflection: r.iter().copied().collect(),
            edge_transmission: t.iter().copied().collect(),
            condition,
        })
    }
}

/// Gaussian term values on the grid, walked from the right edge leftwards by
/// the recurrence `g(x − h) = g(x) r(x)`, `r(x − h) = r(x) e^{−h²/σ²}`, with
/// an exact restart every [`WALK_RESYNC`] points.
struct GaussianWalk<'a> {
    terms: &'a [PotentialTerm],
    x_min: f64,
    h: f64,
    index: usize,
    values: Vec<f64>,
    ratios: Vec<f64>,
    decay: Vec<f64>,
}

const WALK_RESYNC: usize = 512;

impl<'a> GaussianWalk<'a> {
    fn new(terms: &'a [PotentialTerm], x_min: f64, h: f64, index: usize) -> Self {
        let decay = terms
            .iter()
            .map(|t| (-(h * h) / (t.profile.width * t.profile.width)).exp())
            .collect();
        let mut walk = Self {
            terms,
            x_min,
            h,
            index,
            values: vec![0.0; terms.len()],
            ratios: vec![0.0; terms.len()],
            decay,
        };
        walk.resync();
        walk
    }

    fn resync(&mut self) {
        let x = self.x_min + self.h * self.index as f64;
        for (j, t) in self.terms.iter().enumerate() {
            let p = &t.profile;
            let s2 = 2.0 * p.width * p.width;
            self.values[j] = p.value(x);
            self.ratios[j] = ((2.0 * self.h * (x - p.center) - self.h * self.h) / s2).exp();
        }
    }

    #[inline]
    fn step_down(&mut self) {
        self.index -= 1;
        if self.index % WALK_RESYNC == 0 {
            self.resync();
            return;
        }
        for j in 0..self.values.len() {
            self.values[j] *= self.ratios[j];
            self.ratios[j] *= self.decay[j];
        }
    }
}

fn one_norm<const N: usize>(m: &SMatrix<Complex64, N, N>) -> f64
where
    Const<N>: nalgebra::DimName,
{
    (0..N)
        .map(|j| (0..N).map(|i| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}
