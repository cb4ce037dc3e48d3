//! Staggered velocity-stress leapfrog for the 1D elastodynamic equations.
//!
//! Velocities live on the `n_cells + 1` nodes, stresses on the cell
//! centres. A state after `k` steps holds `v` at `(k − ½)·dt` and `T` at
//! `k·dt`. Step `k` applies the excitation force at `t_k = k·dt`.
//!
//! Recorded quantities are reported on *levels*: level `k` is written after
//! step `k + 1` and sits at `(k + ½)·dt`, where `v` is native and `T` is the
//! average of its two neighbouring time samples.
//!
//! Each node carries the mass of its half cells, so a boundary node has half
//! a cell of mass and no stress outside the grid. That is the stress-free
//! boundary.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GridSpec, MaterialField};

/// Raised-cosine windowed sine burst.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Excitation {
    pub center_frequency: f64,
    pub n_cycles: u32,
    /// Peak scale of the applied force per unit area [Pa].
    pub amplitude: f64,
    pub injection_node: usize,
}

impl Excitation {
    pub fn new(center_frequency: f64, n_cycles: u32, amplitude: f64, injection_node: usize) -> Result<Self> {
        if !(center_frequency > 0.0 && center_frequency.is_finite()) {
            return Err(Error::Config(format!("center frequency {center_frequency} must be positive")));
        }
        if n_cycles == 0 {
            return Err(Error::Config("n_cycles must be at least 1".into()));
        }
        if !amplitude.is_finite() {
            return Err(Error::Config("excitation amplitude must be finite".into()));
        }
        Ok(Excitation {
            center_frequency,
            n_cycles,
            amplitude,
            injection_node,
        })
    }

    /// Excitation whose outgoing pulse has peak particle velocity
    /// `peak_velocity` in the material next to `node`.
    ///
    /// A force on a free boundary node radiates a single wave of velocity
    /// `F/Z`; on an interior node it splits into two waves of `F/(2Z)`.
    pub fn with_peak_velocity(
        center_frequency: f64,
        n_cycles: u32,
        peak_velocity: f64,
        field: &MaterialField,
        node: usize,
    ) -> Result<Self> {
        let n = field.len();
        if node > n {
            return Err(Error::Config(format!("injection node {node} beyond last node {n}")));
        }
        let cell = node.min(n - 1);
        let z = field.impedance(cell);
        let split = if node == 0 || node == n { 1.0 } else { 2.0 };
        let unit = Excitation::new(center_frequency, n_cycles, 1.0, node)?;
        let amplitude = split * z * peak_velocity / unit.unit_peak();
        Excitation::new(center_frequency, n_cycles, amplitude, node)
    }

    pub fn duration(&self) -> f64 {
        self.n_cycles as f64 / self.center_frequency
    }

    pub fn signal(&self, t: f64) -> f64 {
        rc2_signal(t, self)
    }

    /// Maximum of the unit-amplitude waveform.
    pub fn unit_peak(&self) -> f64 {
        let unit = Excitation {
            amplitude: 1.0,
            ..*self
        };
        let d = self.duration();
        let samples = 20_000;
        (0..=samples)
            .map(|i| rc2_signal(d * i as f64 / samples as f64, &unit).abs())
            .fold(0.0, f64::max)
    }
}

/// `amplitude · ½(1 − cos(2πt/d)) · sin(2π f t)` on `[0, d]`, zero outside.
pub fn rc2_signal(t: f64, exc: &Excitation) -> f64 {
    let d = exc.duration();
    if !(0.0..=d).contains(&t) {
        return 0.0;
    }
    let window = 0.5 * (1.0 - (2.0 * PI * t / d).cos());
    exc.amplitude * window * (2.0 * PI * exc.center_frequency * t).sin()
}

/// Condition at one end of the grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    StressFree,
    /// Velocity held at zero.
    Rigid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Boundaries {
    pub left: Boundary,
    pub right: Boundary,
}

/// Fields after `step_index` steps.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveState {
    pub v: Vec<f64>,
    pub stress: Vec<f64>,
    pub step_index: usize,
}

impl WaveState {
    pub fn zeros(grid: &GridSpec) -> Self {
        WaveState {
            v: vec![0.0; grid.n_nodes()],
            stress: vec![0.0; grid.n_cells],
            step_index: 0,
        }
    }
}

/// Full fields at one level; `stress_prev` is the stress one step earlier,
/// so the co-located stress is `(stress + stress_prev) / 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub level: usize,
    pub v: Vec<f64>,
    pub stress: Vec<f64>,
    pub stress_prev: Vec<f64>,
}

impl Snapshot {
    pub fn view(&self) -> LevelView<'_> {
        LevelView {
            level: self.level,
            v: &self.v,
            stress: &self.stress,
            stress_prev: &self.stress_prev,
        }
    }
}

/// Borrowed fields at one level.
#[derive(Clone, Copy, Debug)]
pub struct LevelView<'a> {
    pub level: usize,
    pub v: &'a [f64],
    pub stress: &'a [f64],
    pub stress_prev: &'a [f64],
}

impl LevelView<'_> {
    pub fn colocated_stress(&self, j: usize) -> f64 {
        0.5 * (self.stress[j] + self.stress_prev[j])
    }

    pub fn stress_rate(&self, j: usize, dt: f64) -> f64 {
        (self.stress[j] - self.stress_prev[j]) / dt
    }
}

/// Time series at one probe cell: `v` at the cell's left node and the
/// co-located stress at `(k + ½)·dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeSeries {
    pub cell: usize,
    pub v: Vec<f64>,
    pub stress: Vec<f64>,
}

/// What to keep besides the boundary sensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RecordingPlan {
    /// Levels at which full snapshots are stored.
    pub snapshot_levels: BTreeSet<usize>,
    /// Store every `stride`-th level as well.
    pub snapshot_stride: Option<usize>,
    pub probe_cells: Vec<usize>,
    pub energy: bool,
}

impl RecordingPlan {
    pub fn sensors_only() -> Self {
        RecordingPlan::default()
    }

    pub fn every_level() -> Self {
        RecordingPlan {
            snapshot_stride: Some(1),
            ..RecordingPlan::default()
        }
    }

    pub fn at_levels(levels: impl IntoIterator<Item = usize>) -> Self {
        RecordingPlan {
            snapshot_levels: levels.into_iter().collect(),
            ..RecordingPlan::default()
        }
    }

    pub fn with_energy(mut self) -> Self {
        self.energy = true;
        self
    }

    fn wants_snapshot(&self, level: usize) -> bool {
        self.snapshot_levels.contains(&level) || self.snapshot_stride.is_some_and(|s| s > 0 && level % s == 0)
    }
}

/// Integrated energies per level [J/m²].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnergyTrace {
    pub time: Vec<f64>,
    pub kinetic: Vec<f64>,
    pub potential: Vec<f64>,
    pub total: Vec<f64>,
}

impl EnergyTrace {
    fn push(&mut self, time: f64, kinetic: f64, potential: f64) {
        self.time.push(time);
        self.kinetic.push(kinetic);
        self.potential.push(potential);
        self.total.push(kinetic + potential);
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }
}

/// Output of one simulation.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulationRecord {
    pub grid: GridSpec,
    /// `v` at node 0 per level.
    pub sensor_left: Vec<f64>,
    /// `v` at the last node per level.
    pub sensor_right: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub probes: Vec<ProbeSeries>,
    pub energy: Option<EnergyTrace>,
}

impl SimulationRecord {
    pub fn level_times(&self) -> Vec<f64> {
        (0..self.sensor_left.len()).map(|k| self.grid.level_time(k)).collect()
    }

    pub fn snapshot(&self, level: usize) -> Option<&Snapshot> {
        self.snapshots
            .binary_search_by_key(&level, |s| s.level)
            .ok()
            .map(|i| &self.snapshots[i])
    }
}

/// Precomputed update coefficients for one model.
#[derive(Clone, Debug)]
pub struct Solver {
    grid: GridSpec,
    node_mass: Vec<f64>,
    mass_dt: Vec<f64>,
    stiff_dt_dx: Vec<f64>,
    inv_stiffness: Vec<f64>,
    excitation: Excitation,
    boundaries: Boundaries,
}

impl Solver {
    pub fn new(field: &MaterialField, grid: &GridSpec, excitation: &Excitation) -> Result<Self> {
        Solver::with_boundaries(field, grid, excitation, Boundaries::default())
    }

    pub fn with_boundaries(
        field: &MaterialField,
        grid: &GridSpec,
        excitation: &Excitation,
        boundaries: Boundaries,
    ) -> Result<Self> {
        let n = grid.n_cells;
        if field.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "model has {} cells, grid {n}",
                field.len()
            )));
        }
        let c_max = field.max_c_p();
        if !grid.satisfies_cfl(c_max) {
            return Err(Error::Cfl {
                region: "model".into(),
                dt: grid.dt,
                limit: grid.cfl_limit(c_max),
                c_p: c_max,
            });
        }
        if excitation.injection_node > n {
            return Err(Error::Config(format!(
                "injection node {} beyond last node {n}",
                excitation.injection_node
            )));
        }
        let node_mass = node_masses(field, grid.dx);
        Ok(Solver {
            grid: *grid,
            mass_dt: node_mass.iter().map(|m| grid.dt / m).collect(),
            node_mass,
            stiff_dt_dx: field.stiffness.iter().map(|s| s * grid.dt / grid.dx).collect(),
            inv_stiffness: field.stiffness.iter().map(|s| 1.0 / s).collect(),
            excitation: *excitation,
            boundaries,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn excitation(&self) -> &Excitation {
        &self.excitation
    }

    pub fn boundaries(&self) -> Boundaries {
        self.boundaries
    }

    /// Mass per unit area carried by each node.
    pub fn node_mass(&self) -> &[f64] {
        &self.node_mass
    }

    /// Advance `state` by one step in place.
    pub fn advance(&self, state: &mut WaveState) -> Result<()> {
        let n = self.grid.n_cells;
        if state.v.len() != n + 1 || state.stress.len() != n {
            return Err(Error::ShapeMismatch("state does not match grid".into()));
        }
        let t = state.step_index as f64 * self.grid.dt;
        let force = self.excitation.signal(t);
        let (v, s) = (&mut state.v, &mut state.stress);

        v[0] += self.mass_dt[0] * s[0];
        for i in 1..n {
            v[i] += self.mass_dt[i] * (s[i] - s[i - 1]);
        }
        v[n] -= self.mass_dt[n] * s[n - 1];
        if force != 0.0 {
            let i = self.excitation.injection_node;
            v[i] += self.mass_dt[i] * force;
        }
        if self.boundaries.left == Boundary::Rigid {
            v[0] = 0.0;
        }
        if self.boundaries.right == Boundary::Rigid {
            v[n] = 0.0;
        }

        let mut check = 0.0;
        for j in 0..n {
            s[j] += self.stiff_dt_dx[j] * (v[j + 1] - v[j]);
            check += s[j].abs();
        }
        state.step_index += 1;
        if !check.is_finite() || !v[0].is_finite() {
            return Err(Error::Instability {
                step: state.step_index,
            });
        }
        Ok(())
    }

    /// One step returning a new state.
    pub fn step(&self, state: &WaveState) -> Result<WaveState> {
        let mut next = state.clone();
        self.advance(&mut next)?;
        Ok(next)
    }

    /// Kinetic and potential energy of a level.
    pub fn energy(&self, level: &LevelView<'_>) -> (f64, f64) {
        let kinetic: f64 = level
            .v
            .iter()
            .zip(&self.node_mass)
            .map(|(v, m)| 0.5 * m * v * v)
            .sum();
        let potential: f64 = (0..self.grid.n_cells)
            .map(|j| {
                let t = level.colocated_stress(j);
                0.5 * t * t * self.inv_stiffness[j]
            })
            .sum::<f64>()
            * self.grid.dx;
        (kinetic, potential)
    }

    pub fn stepper(&self) -> Stepper<'_> {
        Stepper::new(self)
    }

    /// Run all steps of the grid and record per `plan`.
    pub fn run(&self, plan: &RecordingPlan) -> Result<SimulationRecord> {
        let n_steps = self.grid.n_steps;
        for &c in &plan.probe_cells {
            if c >= self.grid.n_cells {
                return Err(Error::Config(format!("probe cell {c} outside the grid")));
            }
        }
        let mut record = SimulationRecord {
            grid: self.grid,
            sensor_left: Vec::with_capacity(n_steps),
            sensor_right: Vec::with_capacity(n_steps),
            snapshots: Vec::new(),
            probes: plan
                .probe_cells
                .iter()
                .map(|&cell| ProbeSeries {
                    cell,
                    v: Vec::with_capacity(n_steps),
                    stress: Vec::with_capacity(n_steps),
                })
                .collect(),
            energy: plan.energy.then(EnergyTrace::default),
        };
        let mut stepper = self.stepper();
        for _ in 0..n_steps {
            let level = stepper.advance()?;
            record.sensor_left.push(level.v[0]);
            record.sensor_right.push(level.v[self.grid.n_cells]);
            for probe in &mut record.probes {
                probe.v.push(level.v[probe.cell]);
                probe.stress.push(level.colocated_stress(probe.cell));
            }
            if let Some(trace) = record.energy.as_mut() {
                let (k, p) = self.energy(&level);
                trace.push(self.grid.level_time(level.level), k, p);
            }
            if plan.wants_snapshot(level.level) {
                record.snapshots.push(Snapshot {
                    level: level.level,
                    v: level.v.to_vec(),
                    stress: level.stress.to_vec(),
                    stress_prev: level.stress_prev.to_vec(),
                });
            }
        }
        Ok(record)
    }
}

/// Node masses per unit area: half of each adjacent cell.
pub fn node_masses(field: &MaterialField, dx: f64) -> Vec<f64> {
    let n = field.len();
    let mut m = vec![0.0; n + 1];
    for j in 0..n {
        let half = 0.5 * field.rho[j] * dx;
        m[j] += half;
        m[j + 1] += half;
    }
    m
}

/// Node densities: node mass divided by the node's control length.
pub fn node_densities(field: &MaterialField) -> Vec<f64> {
    let n = field.len();
    let mut r = Vec::with_capacity(n + 1);
    r.push(field.rho[0]);
    for i in 1..n {
        r.push(0.5 * (field.rho[i - 1] + field.rho[i]));
    }
    r.push(field.rho[n - 1]);
    r
}

/// Steps a solver one level at a time, keeping the previous stress so that
/// co-located levels can be read off.
pub struct Stepper<'a> {
    solver: &'a Solver,
    state: WaveState,
    stress_prev: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(solver: &'a Solver) -> Self {
        let state = WaveState::zeros(&solver.grid);
        Stepper {
            stress_prev: state.stress.clone(),
            solver,
            state,
        }
    }

    pub fn solver(&self) -> &'a Solver {
        self.solver
    }

    pub fn state(&self) -> &WaveState {
        &self.state
    }

    /// Advance one step and return the level it completes.
    pub fn advance(&mut self) -> Result<LevelView<'_>> {
        self.stress_prev.copy_from_slice(&self.state.stress);
        self.solver.advance(&mut self.state)?;
        Ok(self.view())
    }

    /// The most recently completed level.
    pub fn view(&self) -> LevelView<'_> {
        LevelView {
            level: self.state.step_index.saturating_sub(1),
            v: &self.state.v,
            stress: &self.state.stress,
            stress_prev: &self.stress_prev,
        }
    }
}

/// Kinetic, potential and total energy of each stored snapshot.
pub fn energy_in_model(record: &SimulationRecord, model: &MaterialField) -> Result<EnergyTrace> {
    if record.snapshots.is_empty() {
        return Err(Error::MissingData("record has no snapshots".into()));
    }
    let exc = Excitation::new(1.0, 1, 0.0, 0)?;
    let solver = Solver::new(model, &record.grid, &exc)?;
    let mut trace = EnergyTrace::default();
    for snap in &record.snapshots {
        let (k, p) = solver.energy(&snap.view());
        trace.push(record.grid.level_time(snap.level), k, p);
    }
    Ok(trace)
}
