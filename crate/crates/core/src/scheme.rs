//! The two diode level schemes, incidence kinematics and the per-channel
//! asymptotic wavenumbers of the effective 1D problem.

use num_complex::Complex64;

use crate::fields::GaussianProfile;
use crate::params::{Atom, HBAR, SPEED_OF_LIGHT};

/// One laser sheet: a Gaussian Rabi profile plus the wavenumber and detuning
/// of the light, both given in velocity units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserField {
    pub rabi: GaussianProfile,
    /// `ħ k0 / m` (m/s).
    pub recoil_velocity: f64,
    /// `ħ Δ / (m c)` (m/s).
    pub detuning_velocity: f64,
    /// Propagation sign along y, +1 or -1.
    pub direction: f64,
}

impl LaserField {
    pub fn off() -> Self {
        Self {
            rabi: GaussianProfile::zero(),
            recoil_velocity: 0.0,
            detuning_velocity: 0.0,
            direction: 1.0,
        }
    }

    pub fn is_on(&self) -> bool {
        self.rabi.peak != 0.0
    }

    /// Detuning Δ in rad/s.
    pub fn detuning(&self, atom: &Atom) -> f64 {
        atom.mass * SPEED_OF_LIGHT * self.detuning_velocity / HBAR
    }

    /// Resonant wavenumber `k0 = m v0 / ħ`.
    pub fn bare_wavenumber(&self, atom: &Atom) -> f64 {
        atom.mass * self.recoil_velocity / HBAR
    }

    /// `k = k0 + Δ/c`.
    pub fn wavenumber(&self, atom: &Atom) -> f64 {
        self.bare_wavenumber(atom) + self.detuning(atom) / SPEED_OF_LIGHT
    }

    /// Signed transverse momentum (1/m) transferred along y.
    pub fn transverse_kick(&self, atom: &Atom) -> f64 {
        self.direction * self.wavenumber(atom)
    }
}

/// Two-level diode: ground mirror W1 on the right, excited mirror W2 on the
/// left, a pump coupling |1>-|2> in between and an optional quench laser
/// coupling |2>-|3> with decay of |3>.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelScheme {
    pub mirror_ground: GaussianProfile,
    pub mirror_excited: GaussianProfile,
    pub pump: LaserField,
    pub quench: LaserField,
    /// Decay rate of the quenched level (1/s).
    pub decay: f64,
}

/// Three-level STIRAP diode: ground mirror W, pump |1>-|2>, Stokes |2>-|3>
/// and an optional quench |3>-|4> with decay of |4>.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeLevelScheme {
    pub mirror: GaussianProfile,
    pub pump: LaserField,
    pub stokes: LaserField,
    pub quench: LaserField,
    pub decay: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    TwoLevelQuench,
    ThreeLevelQuench,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    TwoLevel(TwoLevelScheme),
    ThreeLevel(ThreeLevelScheme),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub atom: Atom,
    pub scheme: Scheme,
}

impl SchemeConfig {
    pub fn two_level(atom: Atom, scheme: TwoLevelScheme) -> Self {
        Self {
            atom,
            scheme: Scheme::TwoLevel(scheme),
        }
    }

    pub fn three_level(atom: Atom, scheme: ThreeLevelScheme) -> Self {
        Self {
            atom,
            scheme: Scheme::ThreeLevel(scheme),
        }
    }

    pub fn kind(&self) -> SchemeKind {
        match self.scheme {
            Scheme::TwoLevel(_) => SchemeKind::TwoLevelQuench,
            Scheme::ThreeLevel(_) => SchemeKind::ThreeLevelQuench,
        }
    }

    pub fn channel_count(&self) -> usize {
        match self.scheme {
            Scheme::TwoLevel(_) => 3,
            Scheme::ThreeLevel(_) => 4,
        }
    }

    /// Zero-based index of the channel the diode should transmit into
    /// (|2> for the two-level scheme, |3> for STIRAP).
    pub fn transfer_channel(&self) -> usize {
        match self.scheme {
            Scheme::TwoLevel(_) => 1,
            Scheme::ThreeLevel(_) => 2,
        }
    }

    /// Zero-based index of the decaying level.
    pub fn quenched_channel(&self) -> usize {
        self.channel_count() - 1
    }

    pub fn decay(&self) -> f64 {
        match &self.scheme {
            Scheme::TwoLevel(s) => s.decay,
            Scheme::ThreeLevel(s) => s.decay,
        }
    }

    /// Same configuration with the quench laser and decay switched off.
    pub fn without_quench(&self) -> Self {
        let mut out = *self;
        match &mut out.scheme {
            Scheme::TwoLevel(s) => {
                s.quench.rabi.peak = 0.0;
                s.decay = 0.0;
            }
            Scheme::ThreeLevel(s) => {
                s.quench.rabi.peak = 0.0;
                s.decay = 0.0;
            }
        }
        out
    }

    /// Only the quench laser: mirrors and pumping lasers switched off. The
    /// laser wavenumbers and detunings are kept since they still set the
    /// channel kinematics.
    pub fn quench_only(&self) -> Self {
        let mut out = *self;
        match &mut out.scheme {
            Scheme::TwoLevel(s) => {
                s.mirror_ground.peak = 0.0;
                s.mirror_excited.peak = 0.0;
                s.pump.rabi.peak = 0.0;
            }
            Scheme::ThreeLevel(s) => {
                s.mirror.peak = 0.0;
                s.pump.rabi.peak = 0.0;
                s.stokes.rabi.peak = 0.0;
            }
        }
        out
    }

    pub fn has_quench(&self) -> bool {
        match &self.scheme {
            Scheme::TwoLevel(s) => s.quench.is_on() || s.decay != 0.0,
            Scheme::ThreeLevel(s) => s.quench.is_on() || s.decay != 0.0,
        }
    }

    /// Peak height of the ground-state mirror (rad/s).
    pub fn ground_mirror_peak(&self) -> f64 {
        match &self.scheme {
            Scheme::TwoLevel(s) => s.mirror_ground.peak,
            Scheme::ThreeLevel(s) => s.mirror.peak,
        }
    }
}

/// An incoming plane wave. `w` is the signed speed: positive means incidence
/// from the left, negative from the right.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Incidence {
    /// Signed speed (m/s).
    pub w: f64,
    /// Incidence angle (rad), strictly inside (-π/2, π/2).
    pub theta: f64,
    /// Zero-based incident channel.
    pub channel: usize,
}

impl Incidence {
    pub fn new(w: f64, theta: f64, channel: usize) -> Self {
        Self { w, theta, channel }
    }

    /// Convenience constructor from cm/s and degrees.
    pub fn from_lab_units(w_cm_s: f64, theta_deg: f64, channel: usize) -> Self {
        Self::new(w_cm_s * 1e-2, theta_deg.to_radians(), channel)
    }

    pub fn from_left(&self) -> bool {
        self.w > 0.0
    }

    pub fn speed(&self) -> f64 {
        self.w.abs()
    }

    /// Longitudinal speed `v cos Θ` (m/s).
    pub fn longitudinal_speed(&self) -> f64 {
        self.w.abs() * self.theta.cos()
    }

    /// `k_x = (m/ħ) v cos Θ`.
    pub fn kx(&self, atom: &Atom) -> f64 {
        atom.mass_over_hbar() * self.longitudinal_speed()
    }

    /// `k_y = (m/ħ) v sin Θ`.
    pub fn ky(&self, atom: &Atom) -> f64 {
        atom.mass_over_hbar() * self.w.abs() * self.theta.sin()
    }
}

/// Asymptotic kinematics of one internal channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Channel {
    /// Transverse wavenumber (1/m).
    pub ky: f64,
    /// Effective detuning of the transition feeding this channel (rad/s);
    /// zero for the ground channel.
    pub delta3d: f64,
    /// Asymptotic diagonal entry of the coupling matrix (rad/s).
    pub diag: Complex64,
    /// Longitudinal wavenumber, branch with `Im >= 0`.
    pub kx: Complex64,
}

impl Channel {
    pub fn is_open(&self) -> bool {
        self.kx.im == 0.0 && self.kx.re > 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// Longitudinal wavenumber of the ground channel (1/m).
    pub kx: f64,
    /// `m/ħ` of the atom (s/m²).
    pub mass_over_hbar: f64,
    pub channels: Vec<Channel>,
}

impl ChannelSet {
    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn wavenumbers(&self) -> Vec<Complex64> {
        self.channels.iter().map(|c| c.kx).collect()
    }

    pub fn asymptotic_diagonal(&self) -> Vec<Complex64> {
        self.channels.iter().map(|c| c.diag).collect()
    }
}

/// Detuning shifted by the Doppler and recoil terms of one transition.
/// `sign` is +1 for an absorption step up the ladder and -1 for a stimulated
/// emission step down (Stokes).
fn shifted_detuning(sign: f64, detuning: f64, ky_from: f64, kick: f64, atom: &Atom) -> f64 {
    sign * detuning - HBAR / (2.0 * atom.mass) * (2.0 * ky_from * kick + kick * kick)
}

/// Effective detunings `(Δ3d,2, Δ3d,3)` of the two-level scheme.
pub fn effective_detunings_two_level(
    scheme: &TwoLevelScheme,
    incidence: &Incidence,
    atom: &Atom,
) -> [f64; 2] {
    let ky = incidence.ky(atom);
    let kick_p = scheme.pump.transverse_kick(atom);
    let kick_q = scheme.quench.transverse_kick(atom);
    let d2 = shifted_detuning(1.0, scheme.pump.detuning(atom), ky, kick_p, atom);
    let d3 = shifted_detuning(1.0, scheme.quench.detuning(atom), ky + kick_p, kick_q, atom);
    [d2, d3]
}

/// Effective detunings `(Δ3d,2, Δ3d,3, Δ3d,4)` of the STIRAP scheme.
pub fn effective_detunings_three_level(
    scheme: &ThreeLevelScheme,
    incidence: &Incidence,
    atom: &Atom,
) -> [f64; 3] {
    let ky = incidence.ky(atom);
    let kick_p = scheme.pump.transverse_kick(atom);
    let kick_s = scheme.stokes.transverse_kick(atom);
    let kick_q = scheme.quench.transverse_kick(atom);
    let d2 = shifted_detuning(1.0, scheme.pump.detuning(atom), ky, kick_p, atom);
    let d3 = shifted_detuning(-1.0, scheme.stokes.detuning(atom), ky + kick_p, kick_s, atom);
    let d4 = shifted_detuning(
        1.0,
        scheme.quench.detuning(atom),
        ky + kick_p + kick_s,
        kick_q,
        atom,
    );
    [d2, d3, d4]
}

/// Square root with `Im >= 0`, and `Re >= 0` on the real axis.
pub fn upper_sqrt(z: Complex64) -> Complex64 {
    let mut r = z.sqrt();
    if r.im < 0.0 || (r.im == 0.0 && r.re < 0.0) {
        r = -r;
    }
    r
}

/// Fills in `kx_j = sqrt(kx² − (m/ħ) diag_j)` for every channel.
pub fn channel_wavenumbers(channels: &mut [Channel], kx: f64, atom: &Atom) {
    let moh = atom.mass_over_hbar();
    for ch in channels.iter_mut() {
        ch.kx = if ch.diag == Complex64::new(0.0, 0.0) {
            Complex64::new(kx, 0.0)
        } else {
            upper_sqrt(Complex64::new(kx * kx, 0.0) - ch.diag * moh)
        };
    }
}

/// Builds the complete channel kinematics of `config` for one incidence.
pub fn channel_set(config: &SchemeConfig, incidence: &Incidence) -> ChannelSet {
    let atom = &config.atom;
    let ky = incidence.ky(atom);
    let kx = incidence.kx(atom);
    let decay = Complex64::new(0.0, -config.decay());
    let mut channels = Vec::with_capacity(config.channel_count());
    let zero = Complex64::new(0.0, 0.0);
    match &config.scheme {
        Scheme::TwoLevel(s) => {
            let [d2, d3] = effective_detunings_two_level(s, incidence, atom);
            let ky2 = ky + s.pump.transverse_kick(atom);
            let ky3 = ky2 + s.quench.transverse_kick(atom);
            channels.push(Channel { ky, delta3d: 0.0, diag: zero, kx: zero });
            channels.push(Channel {
                ky: ky2,
                delta3d: d2,
                diag: Complex64::new(-2.0 * d2, 0.0),
                kx: zero,
            });
            channels.push(Channel {
                ky: ky3,
                delta3d: d3,
                diag: Complex64::new(-2.0 * (d2 + d3), 0.0) + decay,
                kx: zero,
            });
        }
        Scheme::ThreeLevel(s) => {
            let [d2, d3, d4] = effective_detunings_three_level(s, incidence, atom);
            let ky2 = ky + s.pump.transverse_kick(atom);
            let ky3 = ky2 + s.stokes.transverse_kick(atom);
            let ky4 = ky3 + s.quench.transverse_kick(atom);
            channels.push(Channel { ky, delta3d: 0.0, diag: zero, kx: zero });
            channels.push(Channel {
                ky: ky2,
                delta3d: d2,
                diag: Complex64::new(-2.0 * d2, 0.0),
                kx: zero,
            });
            channels.push(Channel {
                ky: ky3,
                delta3d: d3,
                diag: Complex64::new(-2.0 * (d2 + d3), 0.0),
                kx: zero,
            });
            channels.push(Channel {
                ky: ky4,
                delta3d: d4,
                diag: Complex64::new(-2.0 * (d2 + d3 + d4), 0.0) + decay,
                kx: zero,
            });
        }
    }
    channel_wavenumbers(&mut channels, kx, atom);
    ChannelSet {
        kx,
        mass_over_hbar: atom.mass_over_hbar(),
        channels,
    }
}
