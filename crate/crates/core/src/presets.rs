//! Figure parameter sets shipped with the repository.

use crate::config::{ConfigError, RunConfig};

macro_rules! presets {
    ($($fn_name:ident => $name:literal),* $(,)?) => {
        /// `(name, file contents)` of every preset.
        pub const ALL: &[(&str, &str)] = &[
            $(($name, include_str!(concat!("../../../presets/", $name, ".ini"))),)*
        ];

        $(
            pub fn $fn_name() -> RunConfig {
                by_name($name).expect("shipped preset parses")
            }
        )*
    };
}

presets! {
    fig3a => "fig3a",
    fig3b => "fig3b",
    fig4a => "fig4a",
    fig4b => "fig4b",
    fig4c => "fig4c",
    fig5 => "fig5",
    fig7a => "fig7a",
    fig7b => "fig7b",
    fig8 => "fig8",
    reduce_demo => "reduce-demo",
}

pub fn names() -> impl Iterator<Item = &'static str> {
    ALL.iter().map(|(n, _)| *n)
}

pub fn text(name: &str) -> Option<&'static str> {
    ALL.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn by_name(name: &str) -> Result<RunConfig, ConfigError> {
    let text = text(name).ok_or_else(|| ConfigError::UnknownPreset(name.to_string()))?;
    RunConfig::parse(text)
}
