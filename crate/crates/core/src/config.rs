//! Sectioned `key = value` run configuration.
//!
//! ```text
//! [scheme]
//! kind = two-level
//! decay = 0
//!
//! [pump]
//! peak = 1e6
//! center_um = 0
//! width_um = 15
//! v0_cm_s = 3
//! dv_cm_s = 1.8e-9
//! direction = 1
//! ```
//!
//! Values are stored in file units (rad/s, μm, cm/s, degrees) so that
//! parse → emit → parse is the identity. Unknown sections and keys are
//! rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use thiserror::Error;

use crate::fields::GaussianProfile;
use crate::params::{Atom, CM_PER_S, MICROMETRE, NEON20_MASS};
use crate::scheme::{LaserField, SchemeConfig, SchemeKind, ThreeLevelScheme, TwoLevelScheme};
use crate::solver::SolverSettings;

pub use crate::diode::DEFAULT_THRESHOLD;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("unknown key `{key}` in [{section}]")]
    UnknownKey { section: String, key: String },
    #[error("duplicate {0}")]
    Duplicate(String),
    #[error("missing required {0}")]
    Missing(String),
    #[error("invalid value for `{key}` in [{section}]: {message}")]
    Invalid {
        section: String,
        key: String,
        message: String,
    },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileBlock {
    /// rad/s
    pub peak: f64,
    pub center_um: f64,
    pub width_um: f64,
}

impl ProfileBlock {
    pub fn profile(&self) -> GaussianProfile {
        GaussianProfile {
            peak: self.peak,
            center: self.center_um * MICROMETRE,
            width: self.width_um * MICROMETRE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserBlock {
    pub profile: ProfileBlock,
    pub v0_cm_s: f64,
    pub dv_cm_s: f64,
    pub direction: f64,
}

impl LaserBlock {
    pub fn field(&self) -> LaserField {
        LaserField {
            rabi: self.profile.profile(),
            recoil_velocity: self.v0_cm_s * CM_PER_S,
            detuning_velocity: self.dv_cm_s * CM_PER_S,
            direction: self.direction,
        }
    }

    pub fn from_field(field: &LaserField) -> Self {
        Self {
            profile: ProfileBlock::from_profile(&field.rabi),
            v0_cm_s: field.recoil_velocity / CM_PER_S,
            dv_cm_s: field.detuning_velocity / CM_PER_S,
            direction: field.direction,
        }
    }
}

impl ProfileBlock {
    pub fn from_profile(p: &GaussianProfile) -> Self {
        Self {
            peak: p.peak,
            center_um: p.center / MICROMETRE,
            width_um: p.width / MICROMETRE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    /// Reflection/transmission of the diode without quenching.
    Transmit,
    /// Quench laser alone, incident in the transfer channel.
    Quench,
    /// Diode then quench as two separate solves.
    Combined,
    /// One solve of the full configuration, diode works iff fully absorbed.
    CombinedMonolithic,
}

impl SweepMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepMode::Transmit => "transmit",
            SweepMode::Quench => "quench",
            SweepMode::Combined => "combined",
            SweepMode::CombinedMonolithic => "combined-monolithic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "transmit" => SweepMode::Transmit,
            "quench" => SweepMode::Quench,
            "combined" => SweepMode::Combined,
            "combined-monolithic" => SweepMode::CombinedMonolithic,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub mode: SweepMode,
    pub w_min_cm_s: f64,
    pub w_max_cm_s: f64,
    pub w_count: usize,
    pub theta_min_deg: f64,
    pub theta_max_deg: f64,
    pub theta_count: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolverBlock {
    pub step_nm: Option<f64>,
    pub x_min_um: Option<f64>,
    pub x_max_um: Option<f64>,
}

impl SolverBlock {
    pub fn settings(&self) -> SolverSettings {
        SolverSettings {
            step: self.step_nm.map(|s| s * 1e-9),
            x_min: self.x_min_um.map(|x| x * MICROMETRE),
            x_max: self.x_max_um.map(|x| x * MICROMETRE),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mass_kg: f64,
    pub kind: SchemeKind,
    /// Decay rate of the quenched level (1/s).
    pub decay: f64,
    /// Two-level ground mirror W1, or the three-level mirror W.
    pub mirror_ground: Option<ProfileBlock>,
    /// Two-level excited mirror W2.
    pub mirror_excited: Option<ProfileBlock>,
    pub pump: Option<LaserBlock>,
    pub stokes: Option<LaserBlock>,
    pub quench: Option<LaserBlock>,
    pub solver: SolverBlock,
    pub sweep: Option<SweepSpec>,
    pub output: Option<PathBuf>,
}

const SECTIONS: &[&str] = &[
    "atom",
    "scheme",
    "mirror_ground",
    "mirror_excited",
    "mirror",
    "pump",
    "stokes",
    "quench",
    "solver",
    "sweep",
    "output",
];

type Section = BTreeMap<String, (usize, String)>;

struct Reader {
    sections: BTreeMap<String, Section>,
}

impl Reader {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut sections: BTreeMap<String, Section> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::Syntax {
                        line: line_no,
                        message: "unterminated section header".into(),
                    })?
                    .trim()
                    .to_string();
                if !SECTIONS.contains(&name.as_str()) {
                    return Err(ConfigError::UnknownSection(name));
                }
                if sections.contains_key(&name) {
                    return Err(ConfigError::Duplicate(format!("section [{name}]")));
                }
                sections.insert(name.clone(), Section::new());
                current = Some(name);
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: line_no,
                message: "expected `key = value`".into(),
            })?;
            let section = current.as_ref().ok_or_else(|| ConfigError::Syntax {
                line: line_no,
                message: "key outside of any section".into(),
            })?;
            let key = key.trim().to_string();
            let entries = sections.get_mut(section).expect("section registered");
            if entries.contains_key(&key) {
                return Err(ConfigError::Duplicate(format!("key `{key}` in [{section}]")));
            }
            entries.insert(key, (line_no, value.trim().to_string()));
        }
        Ok(Self { sections })
    }

    fn take(&mut self, section: &str) -> Option<SectionReader> {
        self.sections.remove(section).map(|entries| SectionReader {
            name: section.to_string(),
            entries,
        })
    }
}

struct SectionReader {
    name: String,
    entries: Section,
}

impl SectionReader {
    fn invalid(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::Invalid {
            section: self.name.clone(),
            key: key.to_string(),
            message: message.into(),
        }
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).map(|(_, v)| v)
    }

    fn opt_f64(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        let Some(v) = self.raw(key) else {
            return Ok(None);
        };
        let x: f64 = v
            .parse()
            .map_err(|_| self.invalid(key, format!("`{v}` is not a number")))?;
        if !x.is_finite() {
            return Err(self.invalid(key, "must be finite"));
        }
        Ok(Some(x))
    }

    fn f64(&mut self, key: &str) -> Result<f64, ConfigError> {
        self.opt_f64(key)?
            .ok_or_else(|| ConfigError::Missing(format!("`{key}` in [{}]", self.name)))
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.opt_f64(key)?.unwrap_or(default))
    }

    fn count(&mut self, key: &str) -> Result<usize, ConfigError> {
        let v = self
            .raw(key)
            .ok_or_else(|| ConfigError::Missing(format!("`{key}` in [{}]", self.name)))?;
        v.parse()
            .map_err(|_| self.invalid(key, format!("`{v}` is not a count")))
    }

    fn positive(&mut self, key: &str) -> Result<f64, ConfigError> {
        let x = self.f64(key)?;
        if x <= 0.0 {
            return Err(self.invalid(key, "must be positive"));
        }
        Ok(x)
    }

    fn finish(self) -> Result<(), ConfigError> {
        match self.entries.into_keys().next() {
            Some(key) => Err(ConfigError::UnknownKey {
                section: self.name,
                key,
            }),
            None => Ok(()),
        }
    }

    fn profile(mut self) -> Result<ProfileBlock, ConfigError> {
        let p = self.profile_fields()?;
        self.finish()?;
        Ok(p)
    }

    fn profile_fields(&mut self) -> Result<ProfileBlock, ConfigError> {
        Ok(ProfileBlock {
            peak: self.f64("peak")?,
            center_um: self.f64("center_um")?,
            width_um: self.positive("width_um")?,
        })
    }

    fn laser(mut self) -> Result<LaserBlock, ConfigError> {
        let profile = self.profile_fields()?;
        let v0_cm_s = self.f64("v0_cm_s")?;
        if v0_cm_s < 0.0 {
            return Err(self.invalid("v0_cm_s", "must be non-negative"));
        }
        let dv_cm_s = self.f64_or("dv_cm_s", 0.0)?;
        let direction = self.f64_or("direction", 1.0)?;
        if direction != 1.0 && direction != -1.0 {
            return Err(self.invalid("direction", "must be 1 or -1"));
        }
        self.finish()?;
        Ok(LaserBlock {
            profile,
            v0_cm_s,
            dv_cm_s,
            direction,
        })
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut reader = Reader::parse(text)?;

        let mass_kg = match reader.take("atom") {
            Some(mut s) => {
                let m = s.f64_or("mass_kg", NEON20_MASS)?;
                if m <= 0.0 {
                    return Err(s.invalid("mass_kg", "must be positive"));
                }
                s.finish()?;
                m
            }
            None => NEON20_MASS,
        };

        let mut scheme = reader
            .take("scheme")
            .ok_or_else(|| ConfigError::Missing("section [scheme]".into()))?;
        let kind = match scheme.raw("kind").as_deref() {
            Some("two-level") => SchemeKind::TwoLevelQuench,
            Some("three-level") => SchemeKind::ThreeLevelQuench,
            Some(other) => {
                return Err(scheme.invalid("kind", format!("`{other}` is not two-level or three-level")))
            }
            None => return Err(ConfigError::Missing("`kind` in [scheme]".into())),
        };
        let decay = scheme.f64_or("decay", 0.0)?;
        if decay < 0.0 {
            return Err(scheme.invalid("decay", "must be non-negative"));
        }
        scheme.finish()?;

        let profile = |r: &mut Reader, name: &str| r.take(name).map(SectionReader::profile).transpose();
        let laser = |r: &mut Reader, name: &str| r.take(name).map(SectionReader::laser).transpose();

        let (mirror_ground, mirror_excited, stokes) = match kind {
            SchemeKind::TwoLevelQuench => {
                if reader.sections.contains_key("mirror") || reader.sections.contains_key("stokes") {
                    return Err(ConfigError::UnknownSection(
                        "mirror/stokes (three-level only)".into(),
                    ));
                }
                let g = profile(&mut reader, "mirror_ground")?
                    .ok_or_else(|| ConfigError::Missing("section [mirror_ground]".into()))?;
                let e = profile(&mut reader, "mirror_excited")?
                    .ok_or_else(|| ConfigError::Missing("section [mirror_excited]".into()))?;
                (Some(g), Some(e), None)
            }
            SchemeKind::ThreeLevelQuench => {
                if reader.sections.contains_key("mirror_ground")
                    || reader.sections.contains_key("mirror_excited")
                {
                    return Err(ConfigError::UnknownSection(
                        "mirror_ground/mirror_excited (two-level only)".into(),
                    ));
                }
                let w = profile(&mut reader, "mirror")?
                    .ok_or_else(|| ConfigError::Missing("section [mirror]".into()))?;
                let s = laser(&mut reader, "stokes")?
                    .ok_or_else(|| ConfigError::Missing("section [stokes]".into()))?;
                (Some(w), None, Some(s))
            }
        };
        let pump = Some(
            laser(&mut reader, "pump")?.ok_or_else(|| ConfigError::Missing("section [pump]".into()))?,
        );
        let quench = laser(&mut reader, "quench")?;

        let solver = match reader.take("solver") {
            Some(mut s) => {
                let b = SolverBlock {
                    step_nm: s.opt_f64("step_nm")?,
                    x_min_um: s.opt_f64("x_min_um")?,
                    x_max_um: s.opt_f64("x_max_um")?,
                };
                if b.step_nm.is_some_and(|h| h <= 0.0) {
                    return Err(s.invalid("step_nm", "must be positive"));
                }
                if let (Some(a), Some(b)) = (b.x_min_um, b.x_max_um) {
                    if a >= b {
                        return Err(s.invalid("x_max_um", "must exceed x_min_um"));
                    }
                }
                s.finish()?;
                b
            }
            None => SolverBlock::default(),
        };

        let sweep = match reader.take("sweep") {
            Some(mut s) => {
                let mode_raw = s.raw("mode").unwrap_or_else(|| "transmit".into());
                let mode = SweepMode::parse(&mode_raw)
                    .ok_or_else(|| s.invalid("mode", format!("unknown mode `{mode_raw}`")))?;
                let settings = SweepSpec {
                    mode,
                    w_min_cm_s: s.f64("w_min_cm_s")?,
                    w_max_cm_s: s.f64("w_max_cm_s")?,
                    w_count: s.count("w_count")?,
                    theta_min_deg: s.f64("theta_min_deg")?,
                    theta_max_deg: s.f64("theta_max_deg")?,
                    theta_count: s.count("theta_count")?,
                    threshold: s.f64_or("threshold", DEFAULT_THRESHOLD)?,
                };
                if !(settings.threshold > 0.0 && settings.threshold < 1.0) {
                    return Err(s.invalid("threshold", "must lie in (0, 1)"));
                }
                s.finish()?;
                Some(settings)
            }
            None => None,
        };

        let output = match reader.take("output") {
            Some(mut s) => {
                let p = s.raw("path").map(PathBuf::from);
                s.finish()?;
                p
            }
            None => None,
        };

        if let Some(name) = reader.sections.keys().next() {
            return Err(ConfigError::UnknownSection(name.clone()));
        }

        let cfg = RunConfig {
            mass_kg,
            kind,
            decay,
            mirror_ground,
            mirror_excited,
            pump,
            stokes,
            quench,
            solver,
            sweep,
            output,
        };
        Ok(cfg)
    }

    /// Writes the configuration back in the file format.
    pub fn emit(&self) -> String {
        let mut out = String::new();
        if self.mass_kg != NEON20_MASS {
            let _ = writeln!(out, "[atom]\nmass_kg = {}\n", num(self.mass_kg));
        }
        let kind = match self.kind {
            SchemeKind::TwoLevelQuench => "two-level",
            SchemeKind::ThreeLevelQuench => "three-level",
        };
        let _ = writeln!(out, "[scheme]\nkind = {kind}\ndecay = {}\n", num(self.decay));
        let (ground_name, excited_name) = match self.kind {
            SchemeKind::TwoLevelQuench => ("mirror_ground", "mirror_excited"),
            SchemeKind::ThreeLevelQuench => ("mirror", "mirror_excited"),
        };
        if let Some(p) = &self.mirror_ground {
            emit_profile(&mut out, ground_name, p);
        }
        if let Some(p) = &self.mirror_excited {
            emit_profile(&mut out, excited_name, p);
        }
        for (name, laser) in [("pump", &self.pump), ("stokes", &self.stokes), ("quench", &self.quench)] {
            if let Some(l) = laser {
                emit_profile(&mut out, name, &l.profile);
                // drop the blank line written by emit_profile
                out.pop();
                let _ = writeln!(
                    out,
                    "v0_cm_s = {}\ndv_cm_s = {}\ndirection = {}\n",
                    num(l.v0_cm_s),
                    num(l.dv_cm_s),
                    num(l.direction)
                );
            }
        }
        if self.solver != SolverBlock::default() {
            out.push_str("[solver]\n");
            for (k, v) in [
                ("step_nm", self.solver.step_nm),
                ("x_min_um", self.solver.x_min_um),
                ("x_max_um", self.solver.x_max_um),
            ] {
                if let Some(v) = v {
                    let _ = writeln!(out, "{k} = {}", num(v));
                }
            }
            out.push('\n');
        }
        if let Some(s) = &self.sweep {
            let _ = writeln!(
                out,
                "[sweep]\nmode = {}\nw_min_cm_s = {}\nw_max_cm_s = {}\nw_count = {}\ntheta_min_deg = {}\ntheta_max_deg = {}\ntheta_count = {}\nthreshold = {}\n",
                s.mode.as_str(),
                num(s.w_min_cm_s),
                num(s.w_max_cm_s),
                s.w_count,
                num(s.theta_min_deg),
                num(s.theta_max_deg),
                s.theta_count,
                num(s.threshold)
            );
        }
        if let Some(p) = &self.output {
            let _ = writeln!(out, "[output]\npath = {}\n", p.display());
        }
        while out.ends_with("\n\n") {
            out.pop();
        }
        out
    }

    pub fn atom(&self) -> Atom {
        Atom { mass: self.mass_kg }
    }

    /// Builds the physical scheme. Missing optional lasers are off.
    pub fn scheme_config(&self) -> Result<SchemeConfig, ConfigError> {
        let atom = Atom::new(self.mass_kg).ok_or_else(|| ConfigError::Invalid {
            section: "atom".into(),
            key: "mass_kg".into(),
            message: "must be positive".into(),
        })?;
        let field = |b: &Option<LaserBlock>| b.map(|l| l.field()).unwrap_or_else(LaserField::off);
        let profile = |b: &Option<ProfileBlock>| {
            b.map(|p| p.profile()).unwrap_or_else(GaussianProfile::zero)
        };
        let pump = self
            .pump
            .ok_or_else(|| ConfigError::Missing("section [pump]".into()))?;
        Ok(match self.kind {
            SchemeKind::TwoLevelQuench => SchemeConfig::two_level(
                atom,
                TwoLevelScheme {
                    mirror_ground: profile(&self.mirror_ground),
                    mirror_excited: profile(&self.mirror_excited),
                    pump: pump.field(),
                    quench: field(&self.quench),
                    decay: self.decay,
                },
            ),
            SchemeKind::ThreeLevelQuench => SchemeConfig::three_level(
                atom,
                ThreeLevelScheme {
                    mirror: profile(&self.mirror_ground),
                    pump: pump.field(),
                    stokes: self.stokes.map(|l| l.field()).ok_or_else(|| {
                        ConfigError::Missing("section [stokes]".into())
                    })?,
                    quench: field(&self.quench),
                    decay: self.decay,
                },
            ),
        })
    }

    /// A two-level configuration describing `scheme`, keeping this
    /// configuration's solver and sweep settings.
    pub fn with_two_level(&self, scheme: &TwoLevelScheme) -> RunConfig {
        RunConfig {
            mass_kg: self.mass_kg,
            kind: SchemeKind::TwoLevelQuench,
            decay: scheme.decay,
            mirror_ground: Some(ProfileBlock::from_profile(&scheme.mirror_ground)),
            mirror_excited: Some(ProfileBlock::from_profile(&scheme.mirror_excited)),
            pump: Some(LaserBlock::from_field(&scheme.pump)),
            stokes: None,
            quench: scheme.quench.is_on().then(|| LaserBlock::from_field(&scheme.quench)),
            solver: self.solver,
            sweep: self.sweep,
            output: None,
        }
    }
}

fn emit_profile(out: &mut String, name: &str, p: &ProfileBlock) {
    let _ = writeln!(
        out,
        "[{name}]\npeak = {}\ncenter_um = {}\nwidth_um = {}\n",
        num(p.peak),
        num(p.center_um),
        num(p.width_um)
    );
}

/// Shortest representation that parses back to the same value.
fn num(x: f64) -> String {
    let plain = format!("{x}");
    if plain.len() <= 12 {
        plain
    } else {
        format!("{x:e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn every_preset_round_trips() {
        for (name, text) in presets::ALL {
            let cfg = RunConfig::parse(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            cfg.scheme_config().unwrap();
            let again = RunConfig::parse(&cfg.emit()).unwrap();
            assert_eq!(cfg, again, "{name}");
            assert_eq!(cfg.emit(), again.emit());
        }
    }

    #[test]
    fn rejects_unknown_key_and_section() {
        let base = presets::ALL[0].1;
        let bad = format!("{base}\n[pump2]\npeak = 1\n");
        assert!(matches!(RunConfig::parse(&bad), Err(ConfigError::UnknownSection(_))));
        let bad = base.replace("[pump]", "[pump]\ncolour = red");
        assert!(matches!(RunConfig::parse(&bad), Err(ConfigError::UnknownKey { .. })));
    }

    #[test]
    fn rejects_missing_required_lasers() {
        let text = "[scheme]\nkind = three-level\n[mirror]\npeak = 4e7\ncenter_um = 85\nwidth_um = 15\n[pump]\npeak = 1\ncenter_um = 0\nwidth_um = 15\nv0_cm_s = 3\n";
        assert_eq!(
            RunConfig::parse(text),
            Err(ConfigError::Missing("section [stokes]".into()))
        );
    }

    #[test]
    fn rejects_nonpositive_lengths_and_garbage() {
        let base = presets::ALL[0].1;
        let bad = base.replacen("width_um = 15", "width_um = 0", 1);
        assert!(matches!(RunConfig::parse(&bad), Err(ConfigError::Invalid { .. })));
        assert!(matches!(
            RunConfig::parse("peak = 3"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            RunConfig::parse("[scheme\nkind = two-level"),
            Err(ConfigError::Syntax { .. })
        ));
        let bad = base.replacen("peak = ", "peak = nan # ", 1);
        assert!(RunConfig::parse(&bad).is_err());
    }

    #[test]
    fn number_formatting_is_lossless() {
        for x in [0.0, 1.0, -1.0, 50.0, 1.8e-9, 3.3199e-26, 4e7, 0.1 + 0.2, 123456789.125, -85.0] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }
}
