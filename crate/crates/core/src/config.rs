//! TOML run configuration.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::cbit::{Calibration, EnergyNormalization, Normalization, Window};
use crate::error::{Error, Result};
use crate::model::{build_layered_model, natural_reference, GridSpec, LayerSpec, LayeredModel, Material, ParameterKind};
use crate::solver::{Boundaries, Excitation};

/// Snapshot times used when a config names none.
pub const DEFAULT_SNAPSHOT_TIMES_US: [f64; 6] = [4.16, 5.35, 6.53, 7.52, 8.91, 12.08];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub grid: GridConfig,
    pub matrix: Material,
    #[serde(default)]
    pub layers: Vec<LayerSpec>,
    #[serde(default)]
    pub boundaries: Boundaries,
    pub excitation: ExcitationConfig,
    #[serde(default)]
    pub variations: Vec<VariationConfig>,
    #[serde(default)]
    pub recording: RecordingConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_name() -> String {
    "run".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_cells: usize,
    /// Cell size [m].
    pub dx: f64,
    /// Time step [s].
    pub dt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
    /// Simulated duration [s]; alternative to `n_steps`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_time: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExcitationConfig {
    /// Centre frequency [Hz].
    pub center_frequency: f64,
    pub n_cycles: u32,
    /// Peak particle velocity of the outgoing pulse [m/s].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_velocity: Option<f64>,
    /// Force amplitude per area [Pa]; overrides `peak_velocity`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default)]
    pub injection_node: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariationConfig {
    pub name: String,
    pub kind: ParameterKind,
    #[serde(default)]
    pub layer: usize,
    /// P; defaults to the layer centre, thickness or material value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_value: Option<f64>,
    /// ΔP in the parameter's unit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// ΔP in cells, for geometric kinds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_cells: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecordingConfig {
    /// Defaults to the standard times that fall inside the record.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot_times_us: Option<Vec<f64>>,
    /// Keep every n-th level as a snapshot as well.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot_stride: Option<usize>,
    pub probe_cells: Vec<usize>,
}

impl Default for RecordingConfig {
    fn default() -> Self {
        RecordingConfig {
            snapshot_times_us: None,
            snapshot_stride: None,
            probe_cells: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub energy_normalization: EnergyNormalization,
    pub normalization: Normalization,
    /// Sensor analysis window [µs].
    pub window_us: [f64; 2],
    /// Interaction windows for self-interference and plateaus [µs].
    pub interaction_windows_us: Vec<[f64; 2]>,
    /// Cells excluded around every interface and at the ends.
    pub residual_margin: usize,
    pub residual_min_time_us: f64,
    /// Half-width in cells of the source windows around layer boundaries;
    /// defaults to one more than the geometric shift.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary_half_width: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration: Option<Calibration>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multiplier_reference: Option<String>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            energy_normalization: EnergyNormalization::Plateau,
            normalization: Normalization::Absolute,
            window_us: [0.0, 20.0],
            interaction_windows_us: vec![[4.0, 6.0], [6.22, 8.22], [8.45, 10.45]],
            residual_margin: 4,
            residual_min_time_us: 0.0,
            boundary_half_width: None,
            calibration: None,
            multiplier_reference: None,
        }
    }
}

impl AnalysisConfig {
    pub fn window(&self) -> Window {
        Window::new(self.window_us[0] * 1e-6, self.window_us[1] * 1e-6)
    }

    pub fn interaction_windows(&self) -> Vec<(f64, f64)> {
        self.interaction_windows_us.iter().map(|w| (w[0] * 1e-6, w[1] * 1e-6)).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
}

fn field_error(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{field}: {msg}"))
}

/// Parse and validate. Unknown keys and malformed values are reported with
/// their line and column; inconsistencies with the offending field.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_owned()))?;
    cfg.resolved()
}

impl RunConfig {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Copy with every default made explicit, after validation.
    pub fn resolved(&self) -> Result<RunConfig> {
        let mut cfg = self.clone();
        let g = &mut cfg.grid;
        match (g.n_steps, g.end_time) {
            (None, None) => return Err(field_error("grid", "one of n_steps or end_time is required")),
            (Some(n), Some(t)) => {
                if (n as f64 * g.dt - t).abs() > 0.5 * g.dt {
                    return Err(field_error(
                        "grid.end_time",
                        format!("{t:e} s disagrees with n_steps·dt = {:e} s", n as f64 * g.dt),
                    ));
                }
            }
            (None, Some(t)) => {
                if !(t > 0.0 && t.is_finite()) || !(g.dt > 0.0) {
                    return Err(field_error("grid.end_time", "must be positive"));
                }
                g.n_steps = Some((t / g.dt).round() as usize);
            }
            (Some(_), None) => {}
        }
        g.end_time = g.n_steps.map(|n| n as f64 * g.dt);

        if cfg.excitation.peak_velocity.is_none() && cfg.excitation.amplitude.is_none() {
            cfg.excitation.peak_velocity = Some(1.0);
        }

        let model = cfg.model()?;
        let n = model.grid.n_cells;
        if cfg.excitation.injection_node > n {
            return Err(field_error(
                "excitation.injection_node",
                format!("node {} beyond last node {n}", cfg.excitation.injection_node),
            ));
        }
        cfg.excitation()?;
        for (i, &c) in cfg.recording.probe_cells.iter().enumerate() {
            if c >= n {
                return Err(field_error(&format!("recording.probe_cells[{i}]"), format!("cell {c} outside 0..{n}")));
            }
        }
        if cfg.recording.snapshot_stride == Some(0) {
            return Err(field_error("recording.snapshot_stride", "must be at least 1"));
        }
        let end_us = model.grid.n_steps as f64 * model.grid.dt * 1e6;
        let times = cfg.recording.snapshot_times_us.get_or_insert_with(|| {
            DEFAULT_SNAPSHOT_TIMES_US.iter().copied().filter(|&t| t <= end_us).collect()
        });
        for (i, &t) in times.iter().enumerate() {
            if !(t >= 0.0 && t <= end_us) {
                return Err(field_error(
                    &format!("recording.snapshot_times_us[{i}]"),
                    format!("{t} µs outside the simulated {end_us:.4} µs"),
                ));
            }
        }
        let a = &cfg.analysis;
        if !(a.window_us[0] < a.window_us[1]) {
            return Err(field_error("analysis.window_us", "start must precede end"));
        }
        for (i, w) in a.interaction_windows_us.iter().enumerate() {
            if !(w[0] < w[1]) {
                return Err(field_error(&format!("analysis.interaction_windows_us[{i}]"), "start must precede end"));
            }
        }

        let mut names = BTreeSet::new();
        for (i, v) in cfg.variations.iter_mut().enumerate() {
            let path = format!("variations[{i}]");
            if !names.insert(v.name.clone()) {
                return Err(field_error(&format!("{path}.name"), format!("duplicate name '{}'", v.name)));
            }
            if v.name.is_empty() || v.name.contains(['/', '\\', ',']) {
                return Err(field_error(&format!("{path}.name"), "must be non-empty without '/', '\\' or ','"));
            }
            if v.layer >= cfg.layers.len() {
                return Err(field_error(&format!("{path}.layer"), format!("no layer {}", v.layer)));
            }
            if v.kind.is_geometric() {
                match (v.delta, v.delta_cells) {
                    // A resolved configuration carries both; they must agree.
                    (Some(d), Some(c)) => {
                        if (d - c as f64 * model.grid.dx).abs() > 1e-9 * model.grid.dx {
                            return Err(field_error(&path, "delta and delta_cells disagree"));
                        }
                    }
                    (Some(d), None) => {
                        let c = d / model.grid.dx;
                        if (c - c.round()).abs() > 1e-6 || c < 0.0 {
                            return Err(field_error(&format!("{path}.delta"), "must be a whole number of cells"));
                        }
                        v.delta_cells = Some(c.round() as usize);
                    }
                    (None, Some(_)) => {}
                    (None, None) => return Err(field_error(&path, "delta_cells is required")),
                }
                let cells = v.delta_cells.unwrap_or(0);
                v.delta = Some(cells as f64 * model.grid.dx);
                if v.kind == ParameterKind::LayerThickness && cells % 2 != 0 {
                    return Err(field_error(&format!("{path}.delta_cells"), "thickness needs an even number of cells"));
                }
            } else {
                if v.delta_cells.is_some() {
                    return Err(field_error(&format!("{path}.delta_cells"), "only geometric kinds take cells"));
                }
                match v.delta {
                    Some(d) if d > 0.0 && d.is_finite() => {}
                    Some(d) => return Err(field_error(&format!("{path}.delta"), format!("{d} must be positive"))),
                    None => return Err(field_error(&format!("{path}.delta"), "is required")),
                }
            }
            if v.reference_value.is_none() {
                v.reference_value = Some(natural_reference(&model, v.kind, v.layer)?);
            }
        }
        if let Some(c) = &cfg.analysis.calibration {
            if !names.contains(&c.example) {
                return Err(field_error("analysis.calibration.example", format!("no variation '{}'", c.example)));
            }
        }
        if let Some(r) = &cfg.analysis.multiplier_reference {
            if !names.contains(r) {
                return Err(field_error("analysis.multiplier_reference", format!("no variation '{r}'")));
            }
        }
        Ok(cfg)
    }

    pub fn grid(&self) -> Result<GridSpec> {
        let n_steps = self
            .grid
            .n_steps
            .or_else(|| self.grid.end_time.map(|t| (t / self.grid.dt).round() as usize))
            .ok_or_else(|| field_error("grid", "one of n_steps or end_time is required"))?;
        GridSpec::new(self.grid.n_cells, self.grid.dx, self.grid.dt, n_steps)
    }

    pub fn model(&self) -> Result<LayeredModel> {
        build_layered_model(self.grid()?, self.matrix, &self.layers)
    }

    pub fn excitation(&self) -> Result<Excitation> {
        let e = &self.excitation;
        match e.amplitude {
            Some(a) => Excitation::new(e.center_frequency, e.n_cycles, a, e.injection_node),
            None => Excitation::with_peak_velocity(
                e.center_frequency,
                e.n_cycles,
                e.peak_velocity.unwrap_or(1.0),
                &self.model()?.field,
                e.injection_node,
            ),
        }
    }

    pub fn variation(&self, name: &str) -> Option<&VariationConfig> {
        self.variations.iter().find(|v| v.name == name)
    }
}
