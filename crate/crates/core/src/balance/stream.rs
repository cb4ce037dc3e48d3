//! Lockstep analysis of a reference run and a ± pair without storing
//! space-time arrays.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::model::ValidityCase;
use crate::solver::{EnergyTrace, LevelView, Snapshot, Solver, Stepper};

use super::info::{InfoContext, InfoLevel, LevelInput};
use super::residual::{level_residual, ResidualMask, ResidualReport};
use super::trace::{BalanceTrace, BoundaryTrace};

/// Cell window `[first, end)` with a label.
#[derive(Clone, Debug, PartialEq)]
pub struct CellWindow {
    pub label: String,
    pub first: usize,
    pub end: usize,
}

impl CellWindow {
    pub fn new(label: impl Into<String>, first: usize, end: usize) -> Self {
        CellWindow {
            label: label.into(),
            first,
            end,
        }
    }
}

/// What the analyser computes and keeps.
#[derive(Clone, Debug)]
pub struct StreamPlan {
    pub n_levels: usize,
    pub mask: ResidualMask,
    /// Windows over which boundary source traces are summed.
    pub interfaces: Vec<CellWindow>,
    /// Node ranges over which the largest difference amplitude is tracked.
    pub zones: Vec<CellWindow>,
    /// Levels at which the full information fields are kept.
    pub snapshot_levels: BTreeSet<usize>,
}

/// Boundary sensor series of the three runs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SensorSeries {
    pub base_left: Vec<f64>,
    pub base_right: Vec<f64>,
    /// `v₊ − v₋` at the left and right boundary nodes.
    pub diff_left: Vec<f64>,
    pub diff_right: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct StreamOutput {
    pub trace: BalanceTrace,
    /// Energy of the reference run.
    pub energy: EnergyTrace,
    pub residual: ResidualReport,
    pub info_snapshots: Vec<(usize, InfoLevel)>,
    /// Differential fields at the snapshot levels.
    pub diff_snapshots: Vec<Snapshot>,
    /// Base-run fields at the snapshot levels.
    pub base_snapshots: Vec<Snapshot>,
    /// `max_i |v₊ − v₋|` per level.
    pub max_difference: Vec<f64>,
    /// Largest `|v₊ − v₋|` over each zone, per level.
    pub zone_series: Vec<(String, Vec<f64>)>,
    pub sensors: SensorSeries,
    pub density_min: f64,
    pub density_max: f64,
    pub max_abs_q_f: f64,
    pub max_abs_active: f64,
}

impl StreamOutput {
    /// Largest difference amplitude in a zone up to time `t_end`.
    pub fn zone_peak(&self, label: &str, t_end: f64) -> Option<f64> {
        let (_, series) = self.zone_series.iter().find(|(l, _)| l == label)?;
        Some(
            series
                .iter()
                .zip(&self.trace.time)
                .filter(|(_, t)| **t <= t_end)
                .map(|(v, _)| *v)
                .fold(0.0, f64::max),
        )
    }
}

/// The three solvers stepped together.
pub struct PairSolvers<'a> {
    pub reference: &'a Solver,
    pub plus: &'a Solver,
    pub minus: &'a Solver,
}

fn to_snapshot(view: &LevelView<'_>) -> Snapshot {
    Snapshot {
        level: view.level,
        v: view.v.to_vec(),
        stress: view.stress.to_vec(),
        stress_prev: view.stress_prev.to_vec(),
    }
}

pub fn analyze_pair(solvers: &PairSolvers<'_>, ctx: &InfoContext, plan: &StreamPlan) -> Result<StreamOutput> {
    let grid = *solvers.reference.grid();
    if solvers.plus.grid() != &grid || solvers.minus.grid() != &grid {
        return Err(Error::ShapeMismatch("pair runs use different grids".into()));
    }
    let n = grid.n_cells;
    if ctx.n_cells() != n || plan.mask.excluded.len() != n {
        return Err(Error::ShapeMismatch("context or mask does not match grid".into()));
    }
    if plan.n_levels > grid.n_steps {
        return Err(Error::InvalidAnalysis(format!(
            "{} levels requested, grid has {}",
            plan.n_levels, grid.n_steps
        )));
    }
    for w in plan.interfaces.iter() {
        if w.end > n || w.first >= w.end {
            return Err(Error::InvalidAnalysis(format!("interface window {} is outside the grid", w.label)));
        }
    }
    for w in plan.zones.iter() {
        if w.end > n + 1 || w.first >= w.end {
            return Err(Error::InvalidAnalysis(format!("zone {} is outside the grid", w.label)));
        }
    }

    let exc = *solvers.reference.excitation();
    let inv2d = 1.0 / (2.0 * ctx.spec.delta);
    let (dx, dt) = (grid.dx, grid.dt);
    let mut base = Stepper::new(solvers.reference);
    let mut plus = Stepper::new(solvers.plus);
    let mut minus = Stepper::new(solvers.minus);

    let mut dv = vec![0.0; n + 1];
    let mut ds = vec![0.0; n];
    let mut ds_prev = vec![0.0; n];
    let mut cur = InfoLevel::new(n);
    let mut prev = InfoLevel::new(n);
    let mut cur_density = vec![0.0; n];
    let mut prev_density = vec![0.0; n];
    let mut prev2_density = vec![0.0; n];

    let mut trace = BalanceTrace {
        boundaries: plan
            .interfaces
            .iter()
            .map(|w| BoundaryTrace {
                label: w.label.clone(),
                first_cell: w.first,
                end_cell: w.end,
                source: Vec::with_capacity(plan.n_levels),
            })
            .collect(),
        ..BalanceTrace::default()
    };
    let mut energy = EnergyTrace::default();
    let mut residual = ResidualReport::default();
    let mut out_snaps = Vec::new();
    let mut diff_snaps = Vec::new();
    let mut base_snaps = Vec::new();
    let mut max_difference = Vec::with_capacity(plan.n_levels);
    let mut zone_series = vec![Vec::with_capacity(plan.n_levels); plan.zones.len()];
    let mut sensors = SensorSeries::default();
    let (mut dmin, mut dmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut max_qf, mut max_active) = (0.0f64, 0.0f64);

    for k in 0..plan.n_levels {
        let b = base.advance()?;
        let p = plus.advance()?;
        let m = minus.advance()?;
        let time = grid.level_time(k);

        let mut md = 0.0f64;
        for i in 0..=n {
            let d = p.v[i] - m.v[i];
            md = md.max(d.abs());
            dv[i] = d * inv2d;
        }
        for (z, w) in plan.zones.iter().enumerate() {
            let local = (w.first..w.end).map(|i| (p.v[i] - m.v[i]).abs()).fold(0.0, f64::max);
            zone_series[z].push(local);
        }
        max_difference.push(md);
        for j in 0..n {
            ds[j] = (p.stress[j] - m.stress[j]) * inv2d;
            ds_prev[j] = (p.stress_prev[j] - m.stress_prev[j]) * inv2d;
        }
        sensors.base_left.push(b.v[0]);
        sensors.base_right.push(b.v[n]);
        sensors.diff_left.push(p.v[0] - m.v[0]);
        sensors.diff_right.push(p.v[n] - m.v[n]);

        let (ek, ep) = solvers.reference.energy(&b);
        energy.time.push(time);
        energy.kinetic.push(ek);
        energy.potential.push(ep);
        energy.total.push(ek + ep);

        let diff_view = LevelView {
            level: k,
            v: &dv,
            stress: &ds,
            stress_prev: &ds_prev,
        };
        let waveform = if exc.amplitude != 0.0 {
            exc.signal(time) / exc.amplitude
        } else {
            0.0
        };
        ctx.evaluate(
            &LevelInput {
                base: b,
                diff: diff_view,
                waveform,
            },
            &mut cur,
        );

        let (mut ik, mut ip, mut src) = (0.0, 0.0, 0.0);
        let (mut qf, mut qv0, mut qv, mut qt0, mut qt) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for j in 0..n {
            let d = cur.i_kin[j] + cur.i_pot[j];
            cur_density[j] = d;
            dmin = dmin.min(d);
            dmax = dmax.max(d);
            ik += cur.i_kin[j];
            ip += cur.i_pot[j];
            src += cur.net_source[j];
            qf += cur.q_f[j];
            qv0 += cur.q_v0[j];
            qv += cur.q_v[j];
            qt0 += cur.q_t0[j];
            qt += cur.q_t[j];
            max_qf = max_qf.max(cur.q_f[j].abs());
            let active = match ctx.case() {
                ValidityCase::Case0 => cur.q_v0[j].abs().max(cur.q_t0[j].abs()),
                ValidityCase::Case1 => cur.q_t[j].abs(),
                ValidityCase::Case2 | ValidityCase::Case3 => cur.q_v[j].abs().max(cur.q_t[j].abs()),
            };
            max_active = max_active.max(active);
        }
        trace.time.push(time);
        trace.i_kin.push(ik * dx);
        trace.i_pot.push(ip * dx);
        trace.i_total.push((ik + ip) * dx);
        trace.source_total.push(src * dx);
        trace.q_f.push(qf * dx);
        trace.q_v0.push(qv0 * dx);
        trace.q_v.push(qv * dx);
        trace.q_t0.push(qt0 * dx);
        trace.q_t.push(qt * dx);
        for (bt, w) in trace.boundaries.iter_mut().zip(&plan.interfaces) {
            bt.source.push(cur.net_source[w.first..w.end].iter().sum::<f64>() * dx);
        }

        if k >= 2 {
            let t_prev = grid.level_time(k - 1);
            let (rm, tm) = level_residual(
                &cur_density,
                &prev2_density,
                &prev.i_flux,
                &prev.net_source,
                dx,
                dt,
                &plan.mask,
                None,
            );
            if t_prev >= plan.mask.min_time {
                residual.push(t_prev, rm, tm);
            }
        }

        if plan.snapshot_levels.contains(&k) {
            out_snaps.push((k, cur.clone()));
            diff_snaps.push(to_snapshot(&diff_view));
            base_snaps.push(to_snapshot(&b));
        }

        std::mem::swap(&mut prev2_density, &mut prev_density);
        std::mem::swap(&mut prev_density, &mut cur_density);
        std::mem::swap(&mut prev, &mut cur);
    }

    Ok(StreamOutput {
        trace,
        energy,
        residual,
        info_snapshots: out_snaps,
        diff_snapshots: diff_snaps,
        base_snapshots: base_snaps,
        max_difference,
        zone_series: plan.zones.iter().map(|z| z.label.clone()).zip(zone_series).collect(),
        sensors,
        density_min: if dmin.is_finite() { dmin } else { 0.0 },
        density_max: if dmax.is_finite() { dmax } else { 0.0 },
        max_abs_q_f: max_qf,
        max_abs_active: max_active,
    })
}
