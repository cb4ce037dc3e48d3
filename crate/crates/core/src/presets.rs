//! Configurations shipped with the crate.

use crate::config::{parse_config, RunConfig};
use crate::error::{Error, Result};

pub const PRESET_NAMES: [&str; 5] = ["fig2", "fig3", "fig9", "homogeneous", "fig24"];

pub fn preset_text(name: &str) -> Option<&'static str> {
    Some(match name {
        "fig2" => include_str!("../presets/fig2.toml"),
        "fig3" => include_str!("../presets/fig3.toml"),
        "fig9" => include_str!("../presets/fig9.toml"),
        "homogeneous" => include_str!("../presets/homogeneous.toml"),
        "fig24" => include_str!("../presets/fig24.toml"),
        _ => return None,
    })
}

pub fn preset(name: &str) -> Result<RunConfig> {
    let text = preset_text(name).ok_or_else(|| {
        Error::Config(format!("unknown preset '{name}' (known: {})", PRESET_NAMES.join(", ")))
    })?;
    parse_config(text)
}

/// A preset name or the path of a configuration file.
pub fn load(source: &str) -> Result<RunConfig> {
    let path = std::path::Path::new(source);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        return parse_config(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        });
    }
    if preset_text(source).is_some() {
        return preset(source);
    }
    Err(Error::Config(format!(
        "'{source}' is neither a configuration file nor a preset ({})",
        PRESET_NAMES.join(", ")
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses() {
        for name in PRESET_NAMES {
            let c = preset(name).unwrap();
            assert_eq!(c.name, name);
        }
        assert!(preset("fig99").is_err());
    }

    #[test]
    fn fig2_preset_matches_model() {
        let c = preset("fig2").unwrap();
        let m = c.model().unwrap();
        assert_eq!(m.grid.n_cells, 3480);
        assert_eq!(m.grid.n_steps, 6264);
        assert_eq!((m.layers[0].start, m.layers[0].end), (1392, 2088));
        assert_eq!(c.variations.len(), 4);
    }
}
