use crate::error::{Error, Result};

use super::info::{InfoContext, InfoFields};

/// Cells excluded from the residual check: interfaces (where distributional
/// sources concentrate) and the two model ends, each widened by a margin.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualMask {
    pub excluded: Vec<bool>,
    /// Levels before this time are ignored.
    pub min_time: f64,
}

impl ResidualMask {
    pub fn around_interfaces(ctx: &InfoContext, margin: usize, min_time: f64) -> Self {
        let n = ctx.n_cells();
        let c = &ctx.center;
        let d = &ctx.derivs;
        let differs = |a: &[f64], j: usize| a[j] != a[j + 1];
        let mut jump = vec![false; n];
        for j in 0..n - 1 {
            if differs(&c.rho, j)
                || differs(&c.stiffness, j)
                || differs(&d.drho, j)
                || differs(&d.dkappa, j)
                || differs(&d.dslowness, j)
            {
                jump[j] = true;
                jump[j + 1] = true;
            }
        }
        let mut excluded = vec![false; n];
        for j in 0..n {
            if j < margin || j + margin >= n {
                excluded[j] = true;
            }
            if jump[j] {
                let lo = j.saturating_sub(margin);
                let hi = (j + margin + 1).min(n);
                excluded[lo..hi].iter_mut().for_each(|e| *e = true);
            }
        }
        ResidualMask { excluded, min_time }
    }

    pub fn included(&self, j: usize) -> bool {
        !self.excluded[j]
    }
}

/// Max residual and max term magnitude over the unmasked region.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResidualReport {
    pub max_residual: f64,
    pub max_term: f64,
    /// Per evaluated level: time, max |r|, max term magnitude.
    pub per_level: Vec<(f64, f64, f64)>,
}

impl ResidualReport {
    /// `max |r| / max term`, zero when every term vanishes.
    pub fn normalized(&self) -> f64 {
        if self.max_term > 0.0 {
            self.max_residual / self.max_term
        } else {
            0.0
        }
    }

    pub(crate) fn push(&mut self, time: f64, residual: f64, term: f64) {
        self.max_residual = self.max_residual.max(residual);
        self.max_term = self.max_term.max(term);
        self.per_level.push((time, residual, term));
    }
}

/// Residual of one level from the densities of its two neighbours and its
/// own flux and sources. Returns (max |r|, max term) over unmasked cells.
pub(crate) fn level_residual(
    density_next: &[f64],
    density_prev: &[f64],
    flux: &[f64],
    source: &[f64],
    dx: f64,
    dt: f64,
    mask: &ResidualMask,
    out: Option<&mut [f64]>,
) -> (f64, f64) {
    let n = source.len();
    let (mut r_max, mut t_max) = (0.0f64, 0.0f64);
    let mut out = out;
    for j in 0..n {
        let dt_i = (density_next[j] - density_prev[j]) / (2.0 * dt);
        let dx_f = (flux[j + 1] - flux[j]) / dx;
        let r = dt_i + dx_f - source[j];
        if let Some(o) = out.as_deref_mut() {
            o[j] = r;
        }
        if mask.included(j) {
            r_max = r_max.max(r.abs());
            t_max = t_max.max(dt_i.abs()).max(dx_f.abs()).max(source[j].abs());
        }
    }
    (r_max, t_max)
}

/// Residual `∂t I + ∂x F − ΣQ` at every interior snapshot of stride-1
/// information fields. Returns the residual array (first and last rows are
/// zero) and the masked report.
pub fn balance_residual(fields: &InfoFields, dx: f64, dt: f64, mask: &ResidualMask) -> Result<(ndarray::Array2<f64>, ResidualReport)> {
    let m = fields.levels.len();
    if fields.levels.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(Error::InvalidAnalysis("balance residual needs snapshots at stride 1".into()));
    }
    let n = fields.i_density.ncols();
    if mask.excluded.len() != n {
        return Err(Error::ShapeMismatch("mask does not match field width".into()));
    }
    let mut r = ndarray::Array2::zeros((m, n));
    let mut report = ResidualReport::default();
    let mut row = vec![0.0; n];
    for k in 1..m.saturating_sub(1) {
        let next = fields.i_density.row(k + 1).to_vec();
        let prev = fields.i_density.row(k - 1).to_vec();
        let flux = fields.i_flux.row(k).to_vec();
        let src = fields.net_source.row(k).to_vec();
        let (rm, tm) = level_residual(&next, &prev, &flux, &src, dx, dt, mask, Some(&mut row));
        r.row_mut(k).iter_mut().zip(&row).for_each(|(a, b)| *a = *b);
        if fields.time[k] >= mask.min_time {
            report.push(fields.time[k], rm, tm);
        }
    }
    Ok((r, report))
}
