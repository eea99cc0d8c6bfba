//! Physical constants and the velocity-unit conventions used for laser
//! wavenumbers and detunings.
//!
//! Internally everything is SI. Wavenumbers are quoted as a recoil velocity
//! `v0 = ħk/m` and detunings as a "detuning velocity" `Δv = ħΔ/(mc)`, so a
//! laser can be described entirely in cm/s at the config boundary.

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Mass of a neon-20 atom (kg).
pub const NEON20_MASS: f64 = 3.3199e-26;

/// One centimetre per second, in m/s.
pub const CM_PER_S: f64 = 1e-2;
/// One micrometre, in m.
pub const MICROMETRE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    pub hbar: f64,
    pub c: f64,
}

impl Constants {
    pub const CODATA: Constants = Constants {
        hbar: HBAR,
        c: SPEED_OF_LIGHT,
    };
}

impl Default for Constants {
    fn default() -> Self {
        Self::CODATA
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub mass: f64,
}

impl Atom {
    pub fn new(mass: f64) -> Option<Self> {
        (mass.is_finite() && mass > 0.0).then_some(Self { mass })
    }

    pub fn neon20() -> Self {
        Self { mass: NEON20_MASS }
    }

    /// `m/ħ` in s/m², the factor converting velocities to wavenumbers.
    #[inline]
    pub fn mass_over_hbar(&self) -> f64 {
        self.mass / HBAR
    }
}

impl Default for Atom {
    fn default() -> Self {
        Self::neon20()
    }
}

/// `k = m v0 / ħ`.
pub fn wavenumber_from_velocity(v0: f64, atom: &Atom) -> f64 {
    atom.mass * v0 / HBAR
}

pub fn velocity_from_wavenumber(k: f64, atom: &Atom) -> f64 {
    HBAR * k / atom.mass
}

/// `Δ = m c Δv / ħ`.
pub fn detuning_from_velocity(dv: f64, atom: &Atom) -> f64 {
    atom.mass * SPEED_OF_LIGHT * dv / HBAR
}

pub fn velocity_from_detuning(detuning: f64, atom: &Atom) -> f64 {
    HBAR * detuning / (atom.mass * SPEED_OF_LIGHT)
}
