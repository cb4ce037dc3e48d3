use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::MaterialField;
use crate::solver::{node_densities, Excitation, SimulationRecord};

/// Energy densities and fluxes per snapshot. Cell arrays have `n_cells`
/// columns, node arrays `n_cells + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyFields {
    pub levels: Vec<usize>,
    pub time: Vec<f64>,
    /// `(ρ/2) v²`, averaged from nodes to cells.
    pub kin: Array2<f64>,
    /// `T² / (2(λ+2µ))` on cells.
    pub pot: Array2<f64>,
    /// `−v T` on nodes.
    pub poynting: Array2<f64>,
    /// `v f − T ∂v/∂x` on cells.
    pub kin_source: Array2<f64>,
}

/// Stress at nodes: average of the adjacent cells, zero at stress-free ends.
pub(crate) fn stress_at_nodes(cells: &dyn Fn(usize) -> f64, n: usize, out: &mut [f64]) {
    out[0] = 0.0;
    for i in 1..n {
        out[i] = 0.5 * (cells(i - 1) + cells(i));
    }
    out[n] = 0.0;
}

pub fn energy_fields(record: &SimulationRecord, model: &MaterialField, excitation: &Excitation) -> Result<EnergyFields> {
    if record.snapshots.is_empty() {
        return Err(Error::MissingData("energy fields need snapshots".into()));
    }
    let grid = record.grid;
    let n = grid.n_cells;
    if model.len() != n {
        return Err(Error::ShapeMismatch("model does not match record grid".into()));
    }
    let rho_n = node_densities(model);
    let m = record.snapshots.len();
    let mut out = EnergyFields {
        levels: record.snapshots.iter().map(|s| s.level).collect(),
        time: record.snapshots.iter().map(|s| grid.level_time(s.level)).collect(),
        kin: Array2::zeros((m, n)),
        pot: Array2::zeros((m, n)),
        poynting: Array2::zeros((m, n + 1)),
        kin_source: Array2::zeros((m, n)),
    };
    let inj = excitation.injection_node;
    let w_inj = if inj == 0 || inj == n { 0.5 * grid.dx } else { grid.dx };
    let mut t_nodes = vec![0.0; n + 1];
    let mut kin_nodes = vec![0.0; n + 1];
    let mut work_nodes = vec![0.0; n + 1];
    for (row, snap) in record.snapshots.iter().enumerate() {
        let view = snap.view();
        let time = grid.level_time(snap.level);
        stress_at_nodes(&|j| view.colocated_stress(j), n, &mut t_nodes);
        for i in 0..=n {
            kin_nodes[i] = 0.5 * rho_n[i] * view.v[i] * view.v[i];
            out.poynting[[row, i]] = -view.v[i] * t_nodes[i];
            work_nodes[i] = 0.0;
        }
        work_nodes[inj] = view.v[inj] * excitation.signal(time) / w_inj;
        for j in 0..n {
            let t = view.colocated_stress(j);
            out.kin[[row, j]] = 0.5 * (kin_nodes[j] + kin_nodes[j + 1]);
            out.pot[[row, j]] = 0.5 * t * t / model.stiffness[j];
            let dvdx = (view.v[j + 1] - view.v[j]) / grid.dx;
            out.kin_source[[row, j]] = 0.5 * (work_nodes[j] + work_nodes[j + 1]) - t * dvdx;
        }
    }
    Ok(out)
}
