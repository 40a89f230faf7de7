//! Scenario files shipped with the library.

pub const PRESET_NAMES: [&str; 4] = [
    "table1_inh",
    "table1_diffusion",
    "figure3_collision",
    "figure4_coexistence",
];

/// TOML text of a named preset.
pub fn preset(name: &str) -> Option<&'static str> {
    Some(match name {
        "table1_inh" => include_str!("../presets/table1_inh.toml"),
        "table1_diffusion" => include_str!("../presets/table1_diffusion.toml"),
        "figure3_collision" => include_str!("../presets/figure3_collision.toml"),
        "figure4_coexistence" => include_str!("../presets/figure4_coexistence.toml"),
        _ => return None,
    })
}
