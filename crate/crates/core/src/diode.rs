//! Diodic classification of scattering results, the analytic speed bounds,
//! and the combined diode + quench verdict.

use thiserror::Error;

use crate::params::{Atom, HBAR, SPEED_OF_LIGHT};
use crate::scheme::{Incidence, Scheme, SchemeConfig};
use crate::solver::{solve_with, ScatteringResult, SolveError, SolverSettings};

/// Default budget below which a criterion counts as met.
pub const DEFAULT_THRESHOLD: f64 = 0.01;
/// Fitting constant of the crossing-time absorption estimate.
pub const ABSORPTION_BETA: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    FullReflection,
    /// Full transmission into the given zero-based channel.
    FullTransmission(usize),
    FullAbsorption,
    Undefined,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub verdict: Verdict,
    /// Left-hand side of the criterion that matched, or the smallest of the
    /// three when none did.
    pub budget: f64,
    pub threshold: f64,
}

/// The three criterion budgets `(reflection, transmission, absorption)`.
pub fn budgets(result: &ScatteringResult, transfer: usize) -> (f64, f64, f64) {
    let alpha = result.incident;
    let sum_r = result.total_reflection();
    let sum_t = result.total_transmission();
    let reflect = (1.0 - result.prob_reflection[alpha]) + (sum_r - result.prob_reflection[alpha]) + sum_t;
    let transmit = sum_r + (sum_t - result.prob_transmission[transfer]) + (1.0 - result.prob_transmission[transfer]);
    (reflect, transmit, sum_r + sum_t)
}

/// Applies the reflection, transmission and absorption criteria in that
/// order. `transfer` is the channel full transmission must end up in.
pub fn classify(result: &ScatteringResult, transfer: usize, threshold: f64) -> Classification {
    let (reflect, transmit, absorb) = budgets(result, transfer);
    let smallest = reflect.min(transmit).min(absorb);
    let (verdict, budget) = if result.near_threshold {
        (Verdict::Undefined, smallest)
    } else if reflect < threshold {
        (Verdict::FullReflection, reflect)
    } else if transmit < threshold {
        (Verdict::FullTransmission(transfer), transmit)
    } else if absorb < threshold {
        (Verdict::FullAbsorption, absorb)
    } else {
        (Verdict::Other, smallest)
    };
    Classification {
        verdict,
        budget,
        threshold,
    }
}

/// Highest speed fully reflected by a ground-state mirror of height
/// `mirror_peak` (rad/s): `√(ħŴ/m) / cos Θ`.
pub fn boundary_full_reflection(theta: f64, mirror_peak: f64, atom: &Atom) -> f64 {
    (HBAR * mirror_peak / atom.mass).sqrt() / theta.cos()
}

/// The set of speeds `v > 0` with `a v² + b v + c ≥ 0`, where the transfer
/// channel is open.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedBoundary {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Positive roots, ascending.
    pub roots: Vec<f64>,
}

impl SpeedBoundary {
    fn new(a: f64, b: f64, c: f64) -> Self {
        let mut roots = Vec::new();
        if a == 0.0 {
            if b != 0.0 {
                roots.push(-c / b);
            }
        } else {
            let disc = b * b - 4.0 * a * c;
            if disc >= 0.0 {
                // stable form; a may be tiny near |Θ| = 90°
                let q = -0.5 * (b + b.signum() * disc.sqrt());
                if q != 0.0 {
                    roots.push(q / a);
                    roots.push(c / q);
                } else {
                    roots.push(0.0);
                }
            }
        }
        // roots beyond c come from cos²Θ underflowing towards zero
        roots.retain(|r| r.is_finite() && *r > 0.0 && *r < SPEED_OF_LIGHT);
        roots.sort_by(f64::total_cmp);
        roots.dedup();
        Self { a, b, c, roots }
    }

    pub fn value(&self, v: f64) -> f64 {
        (self.a * v + self.b) * v + self.c
    }

    pub fn is_feasible(&self, v: f64) -> bool {
        self.value(v) >= 0.0
    }

    /// First root above which the transfer channel closes.
    pub fn ceiling(&self) -> Option<f64> {
        self.crossing(true)
    }

    /// First root below which the transfer channel is closed.
    pub fn floor(&self) -> Option<f64> {
        self.crossing(false)
    }

    fn crossing(&self, open_below: bool) -> Option<f64> {
        // near |Θ| = 90° the second root can be astronomically large, so the
        // sign is probed just beside each root
        self.roots.iter().copied().find(|&r| {
            let eps = 1e-9 * r;
            self.is_feasible(r - eps) == open_below && self.is_feasible(r + eps) != open_below
        })
    }
}

/// `v² cos²Θ − 2 v_P0 v sinΘ + 2cΔv_P − v_P0² ≥ 0`. `recoil` is the signed
/// pump recoil velocity along y (m/s), `detuning_velocity` is Δv_P (m/s).
pub fn boundary_left_two_level(theta: f64, recoil: f64, detuning_velocity: f64) -> SpeedBoundary {
    let cos = theta.cos();
    SpeedBoundary::new(
        cos * cos,
        -2.0 * recoil * theta.sin(),
        2.0 * SPEED_OF_LIGHT * detuning_velocity - recoil * recoil,
    )
}

/// The STIRAP analog with `v_PS` the signed two-photon recoil velocity and
/// `Δv_PS = Δv_P − Δv_S`.
pub fn boundary_left_three_level(theta: f64, recoil_ps: f64, detuning_velocity_ps: f64) -> SpeedBoundary {
    boundary_left_two_level(theta, recoil_ps, detuning_velocity_ps)
}

/// The left-incidence bound for whichever scheme `config` holds.
pub fn boundary_left(config: &SchemeConfig, theta: f64) -> SpeedBoundary {
    match &config.scheme {
        Scheme::TwoLevel(s) => boundary_left_two_level(
            theta,
            s.pump.direction * s.pump.recoil_velocity,
            s.pump.detuning_velocity,
        ),
        Scheme::ThreeLevel(s) => boundary_left_three_level(
            theta,
            s.pump.direction * s.pump.recoil_velocity + s.stokes.direction * s.stokes.recoil_velocity,
            s.pump.detuning_velocity - s.stokes.detuning_velocity,
        ),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BreakdownReason {
    /// Full reflection instead of transmission.
    A,
    /// Quenching fails.
    B,
    /// Pumping (or STIRAP) fails.
    C,
}

impl BreakdownReason {
    pub fn as_char(&self) -> char {
        match self {
            BreakdownReason::A => 'A',
            BreakdownReason::B => 'B',
            BreakdownReason::C => 'C',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombinedVerdict {
    Works,
    Breakdown(BreakdownReason),
    /// A stage was near threshold.
    Undefined,
}

impl CombinedVerdict {
    pub fn diode_works(&self) -> bool {
        matches!(self, CombinedVerdict::Works)
    }

    pub fn reason(&self) -> Option<BreakdownReason> {
        match self {
            CombinedVerdict::Breakdown(r) => Some(*r),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombinedMode {
    /// Diode without quench, then the quench laser alone with the atom
    /// incident in the transfer channel.
    Staged,
    /// A single solve with every laser on; the diode works iff the atom is
    /// fully absorbed.
    Monolithic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinedOutcome {
    pub verdict: CombinedVerdict,
    /// First stage (or the only solve in monolithic mode).
    pub first: (ScatteringResult, Classification),
    /// Quench stage, when it ran.
    pub quench: Option<(ScatteringResult, Classification)>,
}

impl CombinedOutcome {
    /// The larger budget of the stages that ran.
    pub fn budget(&self) -> f64 {
        let b = self.first.1.budget;
        self.quench.as_ref().map_or(b, |(_, c)| b.max(c.budget))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CombinedError {
    #[error("combined classification needs incidence from the left")]
    RightIncidence,
    #[error(transparent)]
    Solve(#[from] SolveError),
}

pub fn classify_combined(
    config: &SchemeConfig,
    incidence: &Incidence,
    settings: &SolverSettings,
    threshold: f64,
    mode: CombinedMode,
) -> Result<CombinedOutcome, CombinedError> {
    if !incidence.from_left() {
        return Err(CombinedError::RightIncidence);
    }
    let transfer = config.transfer_channel();
    let ground = Incidence {
        channel: 0,
        ..*incidence
    };
    match mode {
        CombinedMode::Staged => {
            let first = solve_with(&config.without_quench(), &ground, settings)?;
            let c1 = classify(&first, transfer, threshold);
            let reason = match c1.verdict {
                Verdict::Undefined => {
                    return Ok(CombinedOutcome {
                        verdict: CombinedVerdict::Undefined,
                        first: (first, c1),
                        quench: None,
                    })
                }
                Verdict::FullReflection => Some(BreakdownReason::A),
                Verdict::FullTransmission(_) => None,
                _ => Some(BreakdownReason::C),
            };
            if let Some(r) = reason {
                return Ok(CombinedOutcome {
                    verdict: CombinedVerdict::Breakdown(r),
                    first: (first, c1),
                    quench: None,
                });
            }
            let excited = Incidence {
                channel: transfer,
                ..*incidence
            };
            let second = solve_with(&config.quench_only(), &excited, settings)?;
            let c2 = classify(&second, transfer, threshold);
            let verdict = match c2.verdict {
                Verdict::FullAbsorption => CombinedVerdict::Works,
                Verdict::Undefined => CombinedVerdict::Undefined,
                _ => CombinedVerdict::Breakdown(BreakdownReason::B),
            };
            Ok(CombinedOutcome {
                verdict,
                first: (first, c1),
                quench: Some((second, c2)),
            })
        }
        CombinedMode::Monolithic => {
            let result = solve_with(config, &ground, settings)?;
            let c = classify(&result, transfer, threshold);
            let verdict = match c.verdict {
                Verdict::FullAbsorption => CombinedVerdict::Works,
                Verdict::Undefined => CombinedVerdict::Undefined,
                Verdict::FullReflection => CombinedVerdict::Breakdown(BreakdownReason::A),
                _ => {
                    // whatever survives unabsorbed: ground-state flux means
                    // the pump failed, excited flux means the quench did
                    let ground_left = result.prob_reflection[0] + result.prob_transmission[0];
                    let excited_left = result.total_reflection() + result.total_transmission() - ground_left;
                    if ground_left >= excited_left {
                        CombinedVerdict::Breakdown(BreakdownReason::C)
                    } else {
                        CombinedVerdict::Breakdown(BreakdownReason::B)
                    }
                }
            };
            Ok(CombinedOutcome {
                verdict,
                first: (result, c),
                quench: None,
            })
        }
    }
}
