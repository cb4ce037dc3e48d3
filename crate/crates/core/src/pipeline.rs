//! Run orchestration: the base model, each variation pair and the analyses
//! that consume them.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::balance::{analyze_pair, CellWindow, InfoContext, PairSolvers, ResidualMask, StreamOutput, StreamPlan};
use crate::cbit::{cbit_report, normalization_energy, ExampleSeries, Normalization, SensorInput, Side, CbitReport};
use crate::config::{RunConfig, VariationConfig};
use crate::error::{Error, Result};
use crate::model::{
    with_layer_value, GridSpec, LayeredModel, MaterialField, ParameterKind, ParameterSpec, VariationPair,
};
use crate::solver::{node_densities, EnergyTrace, Excitation, RecordingPlan, SimulationRecord, Solver};

/// A validated configuration with its model and excitation.
#[derive(Clone, Debug)]
pub struct Study {
    pub config: RunConfig,
    pub model: LayeredModel,
    pub excitation: Excitation,
}

/// One variation with its reference model, ± pair and solvers.
#[derive(Clone, Debug)]
pub struct PreparedVariation {
    pub name: String,
    pub spec: ParameterSpec,
    pub reference: LayeredModel,
    /// True when the reference differs from the base model.
    pub separate_reference: bool,
    pub pair: VariationPair,
    pub reference_solver: Solver,
    pub plus_solver: Solver,
    pub minus_solver: Solver,
    /// Geometric shift of each moved boundary, in cells.
    pub shift_cells: usize,
}

/// Everything computed for one variation.
#[derive(Clone, Debug)]
pub struct VariationAnalysis {
    pub prepared: PreparedVariation,
    pub e_f: f64,
    pub context: InfoContext,
    pub output: StreamOutput,
}

#[derive(Clone, Debug)]
pub struct StudyAnalysis {
    pub base: SimulationRecord,
    pub variations: Vec<VariationAnalysis>,
}

impl StudyAnalysis {
    pub fn variation(&self, name: &str) -> Option<&VariationAnalysis> {
        self.variations.iter().find(|v| v.prepared.name == name)
    }
}

impl Study {
    pub fn new(config: &RunConfig) -> Result<Self> {
        let config = config.resolved()?;
        let model = config.model()?;
        let excitation = config.excitation()?;
        Ok(Study {
            config,
            model,
            excitation,
        })
    }

    pub fn grid(&self) -> GridSpec {
        self.model.grid
    }

    pub fn solver_for(&self, field: &MaterialField) -> Result<Solver> {
        Solver::with_boundaries(field, &self.model.grid, &self.excitation, self.config.boundaries)
    }

    pub fn snapshot_levels(&self) -> BTreeSet<usize> {
        let grid = self.grid();
        let mut levels: BTreeSet<usize> = self
            .config
            .recording
            .snapshot_times_us
            .iter()
            .flatten()
            .map(|&t| grid.level_at(t * 1e-6))
            .collect();
        if let Some(s) = self.config.recording.snapshot_stride {
            levels.extend((0..grid.n_steps).step_by(s.max(1)));
        }
        levels
    }

    pub fn recording_plan(&self) -> RecordingPlan {
        RecordingPlan {
            snapshot_levels: self.snapshot_levels(),
            snapshot_stride: None,
            probe_cells: self.config.recording.probe_cells.clone(),
            energy: true,
        }
    }

    pub fn run_base(&self) -> Result<SimulationRecord> {
        self.solver_for(&self.model.field)?
            .run(&self.recording_plan())
            .map_err(|e| e.in_run(format!("{}:base", self.config.name)))
    }

    pub fn prepare(&self, v: &VariationConfig) -> Result<PreparedVariation> {
        let tag = |e: Error| e.in_run(format!("{}:{}", self.config.name, v.name));
        let reference_value = v
            .reference_value
            .ok_or_else(|| Error::Config(format!("variation {} has no reference value", v.name)))?;
        let delta = v
            .delta
            .ok_or_else(|| Error::Config(format!("variation {} has no delta", v.name)))?;
        let spec = ParameterSpec::new(v.kind, v.layer, reference_value, delta).map_err(tag)?;
        let (reference, separate_reference) = if v.kind.is_geometric() {
            (self.model.clone(), false)
        } else {
            let r = with_layer_value(&self.model, v.kind, v.layer, reference_value).map_err(tag)?;
            let separate = r.field != self.model.field;
            (r, separate)
        };
        let pair = VariationPair::new(&reference, spec).map_err(tag)?;
        let shift_cells = match v.kind {
            ParameterKind::LayerPosition => spec.delta_cells(self.grid().dx).map_err(tag)?,
            ParameterKind::LayerThickness => spec.delta_cells(self.grid().dx).map_err(tag)? / 2,
            _ => 0,
        };
        Ok(PreparedVariation {
            name: v.name.clone(),
            spec,
            reference_solver: self.solver_for(&reference.field).map_err(tag)?,
            plus_solver: self.solver_for(&pair.plus.field).map_err(tag)?,
            minus_solver: self.solver_for(&pair.minus.field).map_err(tag)?,
            reference,
            separate_reference,
            pair,
            shift_cells,
        })
    }

    pub fn prepare_all(&self) -> Result<Vec<PreparedVariation>> {
        self.config.variations.iter().map(|v| self.prepare(v)).collect()
    }

    /// `E_f` of a variation's reference model.
    pub fn normalization_energy(&self, prepared: &PreparedVariation) -> Result<f64> {
        let duration = self.excitation.duration();
        let grid = self.grid();
        let levels = (grid.level_at(duration) + 2).min(grid.n_steps);
        let trace = energy_until(&prepared.reference_solver, levels)?;
        normalization_energy(&trace, duration, self.config.analysis.energy_normalization)
    }

    pub fn context(&self, prepared: &PreparedVariation, e_f: f64) -> Result<InfoContext> {
        Ok(
            InfoContext::new(&prepared.pair, e_f, self.excitation.injection_node, self.excitation.amplitude)?
                .with_boundaries(self.config.boundaries),
        )
    }

    /// Half-width of the source windows around the varied layer's
    /// boundaries.
    pub fn boundary_half_width(&self, prepared: &PreparedVariation) -> usize {
        self.config
            .analysis
            .boundary_half_width
            .unwrap_or_else(|| (prepared.shift_cells + 1).max(2))
    }

    pub fn stream_plan(&self, prepared: &PreparedVariation, ctx: &InfoContext) -> Result<StreamPlan> {
        let grid = self.grid();
        let n = grid.n_cells;
        let layer = prepared.reference.layer(prepared.spec.layer)?;
        let hw = self.boundary_half_width(prepared);
        let mut interfaces = Vec::new();
        for (label, node) in [("left", layer.start), ("right", layer.end)] {
            if node > 0 && node < n {
                interfaces.push(CellWindow::new(label, node.saturating_sub(hw), (node + hw).min(n)));
            }
        }
        let mut zones = Vec::new();
        if layer.start > hw {
            zones.push(CellWindow::new("left", 0, layer.start - hw));
        }
        // With the far edge on the grid end the transmitted side starts at
        // the near edge.
        let far = if layer.end < n { layer.end } else { layer.start };
        if far + hw < n {
            zones.push(CellWindow::new("right", far + hw + 1, n + 1));
        }
        let a = &self.config.analysis;
        Ok(StreamPlan {
            n_levels: grid.n_steps,
            mask: ResidualMask::around_interfaces(ctx, a.residual_margin, a.residual_min_time_us * 1e-6),
            interfaces,
            zones,
            snapshot_levels: self.snapshot_levels(),
        })
    }

    pub fn analyze_variation(&self, prepared: &PreparedVariation) -> Result<VariationAnalysis> {
        let run = || -> Result<VariationAnalysis> {
            let e_f = self.normalization_energy(prepared)?;
            let context = self.context(prepared, e_f)?;
            let plan = self.stream_plan(prepared, &context)?;
            let solvers = PairSolvers {
                reference: &prepared.reference_solver,
                plus: &prepared.plus_solver,
                minus: &prepared.minus_solver,
            };
            let output = analyze_pair(&solvers, &context, &plan)?;
            Ok(VariationAnalysis {
                prepared: prepared.clone(),
                e_f,
                context,
                output,
            })
        };
        run().map_err(|e| match e {
            Error::Run { .. } => e,
            other => other.in_run(format!("{}:{}", self.config.name, prepared.name)),
        })
    }

    /// Base run and every variation, concurrently.
    pub fn analyze(&self) -> Result<StudyAnalysis> {
        let prepared = self.prepare_all()?;
        log::info!(
            "{}: base run and {} variation pairs, {} levels each",
            self.config.name,
            prepared.len(),
            self.grid().n_steps
        );
        let (base, variations) = rayon::join(
            || self.run_base(),
            || {
                prepared
                    .par_iter()
                    .map(|p| self.analyze_variation(p))
                    .collect::<Result<Vec<_>>>()
            },
        );
        Ok(StudyAnalysis {
            base: base?,
            variations: variations?,
        })
    }

    /// Sensor information series of one analysed variation.
    pub fn example_series(&self, va: &VariationAnalysis, mode: Normalization) -> Result<ExampleSeries> {
        let window = self.config.analysis.window();
        let center = va.prepared.pair.center_field();
        let rho = node_densities(&center);
        let n = center.len();
        let out = &va.output;
        let series = |side: Side| {
            let (boundary, difference, base, rho) = match side {
                Side::Left => (self.config.boundaries.left, &out.sensors.diff_left, &out.sensors.base_left, rho[0]),
                Side::Right => (self.config.boundaries.right, &out.sensors.diff_right, &out.sensors.base_right, rho[n]),
            };
            crate::cbit::sensor_info(
                &SensorInput {
                    side,
                    boundary,
                    time: &out.trace.time,
                    difference,
                    base,
                    rho,
                },
                &va.prepared.spec,
                va.e_f,
                mode,
                window,
            )
        };
        Ok(ExampleSeries {
            name: va.prepared.name.clone(),
            left: series(Side::Left)?,
            right: series(Side::Right)?,
        })
    }

    pub fn cbit_report(&self, analysis: &StudyAnalysis, mode: Normalization) -> Result<CbitReport> {
        let examples = analysis
            .variations
            .iter()
            .map(|v| self.example_series(v, mode))
            .collect::<Result<Vec<_>>>()?;
        let a = &self.config.analysis;
        cbit_report(&examples, a.window(), a.calibration.as_ref(), a.multiplier_reference.as_deref())
    }

    /// The same study on a grid refined by `factor` in space and time, with
    /// the same physical ΔP and margins scaled along.
    pub fn refined(&self, factor: usize) -> Result<Study> {
        let mut cfg = self.config.clone();
        let g = self.grid().refined(factor)?;
        cfg.grid.n_cells = g.n_cells;
        cfg.grid.dx = g.dx;
        cfg.grid.dt = g.dt;
        cfg.grid.n_steps = Some(g.n_steps);
        cfg.grid.end_time = None;
        for v in cfg.variations.iter_mut() {
            if v.kind.is_geometric() {
                v.delta_cells = v.delta_cells.map(|c| c * factor);
                v.delta = None;
            }
        }
        cfg.analysis.residual_margin *= factor;
        cfg.analysis.boundary_half_width = cfg.analysis.boundary_half_width.map(|h| h * factor);
        cfg.recording.probe_cells = cfg.recording.probe_cells.iter().map(|c| c * factor).collect();
        cfg.recording.snapshot_stride = cfg.recording.snapshot_stride.map(|s| s * factor);
        cfg.excitation.injection_node *= factor;
        Study::new(&cfg)
    }
}

/// Energy trace of the first `levels` levels of a run.
pub fn energy_until(solver: &Solver, levels: usize) -> Result<EnergyTrace> {
    let mut stepper = solver.stepper();
    let mut trace = EnergyTrace::default();
    for k in 0..levels {
        let view = stepper.advance()?;
        let (ek, ep) = solver.energy(&view);
        trace.time.push(solver.grid().level_time(k));
        trace.kinetic.push(ek);
        trace.potential.push(ep);
        trace.total.push(ek + ep);
    }
    Ok(trace)
}
