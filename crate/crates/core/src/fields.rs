//! Gaussian laser and mirror profiles, the position-dependent coupling
//! matrix of each scheme, and the large-detuning reductions.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::params::Atom;
use crate::scheme::{LaserField, ThreeLevelScheme, TwoLevelScheme};

/// Half-width of the interaction box in units of the widest profile.
pub const BOX_HALF_WIDTH_SIGMAS: f64 = 8.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("zero detuning: adiabatic elimination is undefined")]
    ZeroDetuning,
    #[error("profile width must be positive and finite, got {0}")]
    BadWidth(f64),
    #[error("the ground-state mirror must be off to reduce the three-level scheme")]
    MirrorPresent,
}

/// `peak · exp(−(x − center)² / 2 width²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianProfile {
    pub peak: f64,
    pub center: f64,
    pub width: f64,
}

impl GaussianProfile {
    pub fn new(peak: f64, center: f64, width: f64) -> Result<Self, FieldError> {
        if !(width.is_finite() && width > 0.0) {
            return Err(FieldError::BadWidth(width));
        }
        Ok(Self {
            peak,
            center,
            width,
        })
    }

    /// A profile that is zero everywhere.
    pub fn zero() -> Self {
        Self {
            peak: 0.0,
            center: 0.0,
            width: 1e-6,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.peak == 0.0
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        let u = (x - self.center) / self.width;
        self.peak * (-0.5 * u * u).exp()
    }

    /// The square of the profile, again a Gaussian of width `σ/√2`.
    pub fn squared(&self) -> Self {
        Self {
            peak: self.peak * self.peak,
            center: self.center,
            width: self.width / std::f64::consts::SQRT_2,
        }
    }

    /// Pointwise product of two Gaussians.
    pub fn product(&self, other: &Self) -> Self {
        let (a, b) = (self.width * self.width, other.width * other.width);
        let var = a * b / (a + b);
        let center = (self.center * b + other.center * a) / (a + b);
        let dx = self.center - other.center;
        Self {
            peak: self.peak * other.peak * (-0.5 * dx * dx / (a + b)).exp(),
            center,
            width: var.sqrt(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            peak: self.peak * factor,
            ..*self
        }
    }

    /// Reflection `x → −x`.
    pub fn mirrored(&self) -> Self {
        Self {
            center: -self.center,
            ..*self
        }
    }
}

/// One Gaussian contribution to entry `(row, col)` (and `(col, row)`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialTerm {
    pub row: usize,
    pub col: usize,
    pub profile: GaussianProfile,
}

/// The matrix `M(x)` of the effective 1D equation
/// `(ħ²k_x²/2m) φ = [p_x²/2m + (ħ/2) M(x)] φ`, in rad/s.
///
/// `M(x)` is its constant asymptotic diagonal plus a list of Gaussian terms.
/// Off-diagonal terms are real and symmetric; the only non-Hermitian part is
/// the `−iγ` on the decaying level.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialMatrix {
    asymptote: Vec<Complex64>,
    terms: Vec<PotentialTerm>,
}

impl PotentialMatrix {
    pub fn new(asymptote: Vec<Complex64>) -> Self {
        Self {
            asymptote,
            terms: Vec::new(),
        }
    }

    /// Adds a Gaussian term; zero-peak terms are dropped.
    pub fn with_term(mut self, row: usize, col: usize, profile: GaussianProfile) -> Self {
        assert!(row < self.dim() && col < self.dim(), "term outside matrix");
        if !profile.is_zero() {
            self.terms.push(PotentialTerm { row, col, profile });
        }
        self
    }

    pub fn dim(&self) -> usize {
        self.asymptote.len()
    }

    pub fn asymptote(&self) -> &[Complex64] {
        &self.asymptote
    }

    pub fn terms(&self) -> &[PotentialTerm] {
        &self.terms
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn at(&self, x: f64) -> DMatrix<Complex64> {
        let n = self.dim();
        let mut m = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.asymptote[i]
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        for t in &self.terms {
            let v = t.profile.value(x);
            m[(t.row, t.col)] += v;
            if t.row != t.col {
                m[(t.col, t.row)] += v;
            }
        }
        m
    }

    /// The region outside of which every profile is treated as zero:
    /// `[min center − 8σ_max, max center + 8σ_max]`.
    pub fn interaction_box(&self) -> Option<(f64, f64)> {
        let sigma = self
            .terms
            .iter()
            .map(|t| t.profile.width)
            .fold(0.0, f64::max);
        let lo = self
            .terms
            .iter()
            .map(|t| t.profile.center)
            .fold(f64::INFINITY, f64::min);
        let hi = self
            .terms
            .iter()
            .map(|t| t.profile.center)
            .fold(f64::NEG_INFINITY, f64::max);
        (!self.terms.is_empty()).then(|| {
            (
                lo - BOX_HALF_WIDTH_SIGMAS * sigma,
                hi + BOX_HALF_WIDTH_SIGMAS * sigma,
            )
        })
    }

    pub fn narrowest_width(&self) -> Option<f64> {
        self.terms
            .iter()
            .map(|t| t.profile.width)
            .reduce(f64::min)
    }

    /// The same potential seen under `x → −x`.
    pub fn mirrored(&self) -> Self {
        Self {
            asymptote: self.asymptote.clone(),
            terms: self
                .terms
                .iter()
                .map(|t| PotentialTerm {
                    profile: t.profile.mirrored(),
                    ..*t
                })
                .collect(),
        }
    }
}

/// Coupling matrix of the two-level scheme for given effective detunings
/// `(Δ3d,2, Δ3d,3)`.
pub fn assemble_two_level(scheme: &TwoLevelScheme, detunings: [f64; 2]) -> PotentialMatrix {
    let [d2, d3] = detunings;
    PotentialMatrix::new(vec![
        Complex64::new(0.0, 0.0),
        Complex64::new(-2.0 * d2, 0.0),
        Complex64::new(-2.0 * (d2 + d3), -scheme.decay),
    ])
    .with_term(0, 0, scheme.mirror_ground)
    .with_term(1, 1, scheme.mirror_excited)
    .with_term(0, 1, scheme.pump.rabi)
    .with_term(1, 2, scheme.quench.rabi)
}

/// Coupling matrix of the STIRAP scheme for given `(Δ3d,2, Δ3d,3, Δ3d,4)`.
pub fn assemble_three_level(scheme: &ThreeLevelScheme, detunings: [f64; 3]) -> PotentialMatrix {
    let [d2, d3, d4] = detunings;
    PotentialMatrix::new(vec![
        Complex64::new(0.0, 0.0),
        Complex64::new(-2.0 * d2, 0.0),
        Complex64::new(-2.0 * (d2 + d3), 0.0),
        Complex64::new(-2.0 * (d2 + d3 + d4), -scheme.decay),
    ])
    .with_term(0, 0, scheme.mirror)
    .with_term(0, 1, scheme.pump.rabi)
    .with_term(1, 2, scheme.stokes.rabi)
    .with_term(2, 3, scheme.quench.rabi)
}

/// Ground-state mirror `W(x) = Ω(x)² / 2Δ` produced by a far-detuned laser.
pub fn mirror_from_detuned_laser(
    omega: &GaussianProfile,
    detuning: f64,
) -> Result<GaussianProfile, FieldError> {
    if detuning == 0.0 {
        return Err(FieldError::ZeroDetuning);
    }
    Ok(omega.squared().scaled(0.5 / detuning))
}

/// A two-level scheme obtained from a far-detuned STIRAP scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reduction {
    pub scheme: TwoLevelScheme,
    /// `max(Ω̂_P, Ω̂_S) / |2Δ_P|`; the reduction needs this to be small.
    pub validity_ratio: f64,
}

/// Eliminates the intermediate level of the three-level scheme.
///
/// The reduced pump has wavenumber `k_P − k_S` (signed along y) and
/// detuning `Δ_P − Δ_S`; the two mirrors are `Ω_P²/2Δ_P` and `Ω_S²/2Δ_P`.
pub fn reduce_three_to_two(scheme: &ThreeLevelScheme, atom: &Atom) -> Result<Reduction, FieldError> {
    let delta_p = scheme.pump.detuning(atom);
    if delta_p == 0.0 {
        return Err(FieldError::ZeroDetuning);
    }
    if !scheme.mirror.is_zero() {
        return Err(FieldError::MirrorPresent);
    }
    let inv = 0.5 / delta_p;
    let recoil = scheme.pump.direction * scheme.pump.recoil_velocity
        + scheme.stokes.direction * scheme.stokes.recoil_velocity;
    let pump = LaserField {
        rabi: scheme.pump.rabi.product(&scheme.stokes.rabi).scaled(inv),
        recoil_velocity: recoil.abs(),
        detuning_velocity: scheme.pump.detuning_velocity - scheme.stokes.detuning_velocity,
        direction: if recoil < 0.0 { -1.0 } else { 1.0 },
    };
    let reduced = TwoLevelScheme {
        mirror_ground: scheme.pump.rabi.squared().scaled(inv),
        mirror_excited: scheme.stokes.rabi.squared().scaled(inv),
        pump,
        quench: scheme.quench,
        decay: scheme.decay,
    };
    let validity_ratio =
        scheme.pump.rabi.peak.abs().max(scheme.stokes.rabi.peak.abs()) / (2.0 * delta_p.abs());
    Ok(Reduction {
        scheme: reduced,
        validity_ratio,
    })
}

/// The quench laser seen by the upper diode level after eliminating the
/// decaying level: `W_eff(x) = (2Δ − iγ) Ω_Q(x)² / (4Δ² + γ²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexQuenchPotential {
    /// `Ω_Q(x)²`.
    pub intensity: GaussianProfile,
    /// `(2Δ − iγ) / (4Δ² + γ²)`.
    pub coefficient: Complex64,
}

impl ComplexQuenchPotential {
    pub fn at(&self, x: f64) -> Complex64 {
        self.coefficient * self.intensity.value(x)
    }

    /// `γ_eff(x) = −Im W_eff(x)`.
    pub fn gamma_eff(&self, x: f64) -> f64 {
        -self.at(x).im
    }

    pub fn peak_gamma_eff(&self) -> f64 {
        -self.coefficient.im * self.intensity.peak
    }
}

pub fn quench_effective(omega_q: &GaussianProfile, delta3d: f64, gamma: f64) -> ComplexQuenchPotential {
    let denom = 4.0 * delta3d * delta3d + gamma * gamma;
    ComplexQuenchPotential {
        intensity: omega_q.squared(),
        coefficient: Complex64::new(2.0 * delta3d, -gamma) / denom,
    }
}

/// Crossing-time estimate for full absorption:
/// `γ Ω̂_Q² / (4Δ² + γ²) · σ / v_x > β`.
pub fn absorption_condition(
    omega_peak: f64,
    gamma: f64,
    delta3d: f64,
    width: f64,
    vx: f64,
    beta: f64,
) -> bool {
    let rate = gamma * omega_peak * omega_peak / (4.0 * delta3d * delta3d + gamma * gamma);
    rate * width / vx > beta
}

/// Longitudinal speed at which [`absorption_condition`] turns false.
pub fn absorption_boundary_speed(
    omega_peak: f64,
    gamma: f64,
    delta3d: f64,
    width: f64,
    beta: f64,
) -> f64 {
    gamma * omega_peak * omega_peak / (4.0 * delta3d * delta3d + gamma * gamma) * width / beta
}
