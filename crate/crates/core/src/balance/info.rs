//! Information density, flux and source terms of a differential wave field.
//!
//! All quantities are evaluated level by level by [`InfoContext::evaluate`],
//! which both the snapshot-based functions here and the streaming analyser
//! use. Node quantities (kinetic density, velocity-type sources) are averaged
//! onto cells so that every density and source shares the cell grid; the
//! flux stays on nodes, where its divergence lands on cells.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::{material_derivative, MaterialDerivatives, MaterialField, ParameterSpec, ValidityCase, VariationPair};
use crate::solver::{node_densities, Boundary, Boundaries, LevelView, SimulationRecord};
use crate::difffield::DifferentialField;

/// Everything about the model and normalisation that stays fixed in time.
#[derive(Clone, Debug)]
pub struct InfoContext {
    pub spec: ParameterSpec,
    pub e_f: f64,
    /// `P² / E_f`.
    pub scale: f64,
    pub dx: f64,
    pub dt: f64,
    pub center: MaterialField,
    pub derivs: MaterialDerivatives,
    pub boundaries: Boundaries,
    rho_node: Vec<f64>,
    inv_s: Vec<f64>,
    /// `(1/ρ) ∂ρ/∂P` on cells and nodes.
    r_cell: Vec<f64>,
    r_node: Vec<f64>,
    /// `∂x((1/ρ) ∂ρ/∂P)` on nodes.
    r_grad_node: Vec<f64>,
    /// `(1/ρ) ∂(ρ/(λ+2µ))/∂P` on cells.
    slowness_coef: Vec<f64>,
    extended_flux: bool,
    injection_node: usize,
    /// Force per area of the run and its parameter derivative, both as
    /// multiples of the unit waveform.
    force_amplitude: f64,
    force_amplitude_derivative: f64,
}

/// Per-level output of [`InfoContext::evaluate`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InfoLevel {
    pub i_kin: Vec<f64>,
    pub i_pot: Vec<f64>,
    pub i_flux: Vec<f64>,
    pub q_f: Vec<f64>,
    pub q_v0: Vec<f64>,
    pub q_v: Vec<f64>,
    pub q_t0: Vec<f64>,
    pub q_t: Vec<f64>,
    pub net_source: Vec<f64>,
}

impl InfoLevel {
    pub fn new(n_cells: usize) -> Self {
        let c = || vec![0.0; n_cells];
        InfoLevel {
            i_kin: c(),
            i_pot: c(),
            i_flux: vec![0.0; n_cells + 1],
            q_f: c(),
            q_v0: c(),
            q_v: c(),
            q_t0: c(),
            q_t: c(),
            net_source: c(),
        }
    }

    pub fn density(&self, j: usize) -> f64 {
        self.i_kin[j] + self.i_pot[j]
    }
}

/// The three algebraically equivalent potential densities for a density
/// change at constant sound speed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialForms {
    /// Cross term written with the density prefactor `−(1/ρ)(∂ρ/∂P) κ`.
    pub density_prefactor: f64,
    /// Cross term written with the stiffness prefactor `∂κ/∂P`.
    pub stiffness_prefactor: f64,
    /// `(κ/2)(∂T/∂P − (1/ρ)(∂ρ/∂P) T)²`.
    pub completed_square: f64,
}

/// Inputs of one level: base-run fields, differential fields and the unit
/// excitation waveform at the level time.
#[derive(Clone, Copy, Debug)]
pub struct LevelInput<'a> {
    pub base: LevelView<'a>,
    pub diff: LevelView<'a>,
    pub waveform: f64,
}

impl InfoContext {
    /// Build from a variation pair. `e_f` is the normalisation energy and
    /// `force_amplitude` the excitation amplitude shared by both runs.
    pub fn new(pair: &VariationPair, e_f: f64, injection_node: usize, force_amplitude: f64) -> Result<Self> {
        if !(e_f > 0.0 && e_f.is_finite()) {
            return Err(Error::InvalidAnalysis(format!("E_f = {e_f} must be positive")));
        }
        if !(pair.spec.delta > 0.0) {
            return Err(Error::InvalidVariation("delta must be positive".into()));
        }
        let grid = pair.plus.grid;
        let n = grid.n_cells;
        if injection_node > n {
            return Err(Error::Config(format!("injection node {injection_node} outside grid")));
        }
        let center = pair.center_field();
        let derivs = material_derivative(pair);
        let rho_node = node_densities(&center);
        let drho_node: Vec<f64> = {
            let mut d = Vec::with_capacity(n + 1);
            d.push(derivs.drho[0]);
            for i in 1..n {
                d.push(0.5 * (derivs.drho[i - 1] + derivs.drho[i]));
            }
            d.push(derivs.drho[n - 1]);
            d
        };
        let r_cell: Vec<f64> = (0..n).map(|j| derivs.drho[j] / center.rho[j]).collect();
        let r_node: Vec<f64> = (0..=n).map(|i| drho_node[i] / rho_node[i]).collect();
        let mut r_grad_node = vec![0.0; n + 1];
        for i in 1..n {
            r_grad_node[i] = (r_cell[i] - r_cell[i - 1]) / grid.dx;
        }
        let slowness_coef = (0..n).map(|j| derivs.dslowness[j] / center.rho[j]).collect();
        let case = pair.spec.validity_case;
        let has_drho = derivs.drho.iter().any(|&d| d != 0.0);
        let p = pair.spec.reference_value;
        Ok(InfoContext {
            spec: pair.spec,
            e_f,
            scale: p * p / e_f,
            dx: grid.dx,
            dt: grid.dt,
            inv_s: center.stiffness.iter().map(|s| 1.0 / s).collect(),
            rho_node,
            r_cell,
            r_node,
            r_grad_node,
            slowness_coef,
            extended_flux: has_drho && matches!(case, ValidityCase::Case2 | ValidityCase::Case3),
            center,
            derivs,
            boundaries: Boundaries::default(),
            injection_node,
            force_amplitude,
            force_amplitude_derivative: 0.0,
        })
    }

    /// Declare that the plus and minus runs used different force amplitudes.
    pub fn with_force_amplitudes(mut self, plus: f64, minus: f64) -> Self {
        self.force_amplitude_derivative = (plus - minus) / (2.0 * self.spec.delta);
        self
    }

    pub fn with_boundaries(mut self, boundaries: Boundaries) -> Self {
        self.boundaries = boundaries;
        self
    }

    pub fn n_cells(&self) -> usize {
        self.center.len()
    }

    pub fn case(&self) -> ValidityCase {
        self.spec.validity_case
    }

    pub fn has_extended_flux(&self) -> bool {
        self.extended_flux
    }

    fn stress_at_node(&self, view: &LevelView<'_>, i: usize) -> f64 {
        let n = self.n_cells();
        if i == 0 {
            match self.boundaries.left {
                Boundary::StressFree => 0.0,
                Boundary::Rigid => view.colocated_stress(0),
            }
        } else if i == n {
            match self.boundaries.right {
                Boundary::StressFree => 0.0,
                Boundary::Rigid => view.colocated_stress(n - 1),
            }
        } else {
            0.5 * (view.colocated_stress(i - 1) + view.colocated_stress(i))
        }
    }

    /// `∂T/∂x` at a node by the solver's stencil.
    fn stress_gradient_at_node(&self, view: &LevelView<'_>, i: usize) -> f64 {
        let n = self.n_cells();
        if i == 0 {
            view.colocated_stress(0) / (0.5 * self.dx)
        } else if i == n {
            -view.colocated_stress(n - 1) / (0.5 * self.dx)
        } else {
            (view.colocated_stress(i) - view.colocated_stress(i - 1)) / self.dx
        }
    }

    /// Potential density of a density change at constant sound speed in its
    /// three written forms.
    pub fn potential_forms(&self, j: usize, d_stress: f64, stress: f64) -> PotentialForms {
        let k = self.inv_s[j];
        let r = self.r_cell[j];
        let dk = self.derivs.dkappa[j];
        let common = 0.5 * k * d_stress * d_stress + 0.5 * k * r * r * stress * stress;
        let s = self.scale;
        let q = d_stress - r * stress;
        PotentialForms {
            density_prefactor: s * (common - r * k * d_stress * stress),
            stiffness_prefactor: s * (common + dk * d_stress * stress),
            completed_square: s * 0.5 * k * q * q,
        }
    }

    /// Evaluate every field of one level into `out`.
    pub fn evaluate(&self, input: &LevelInput<'_>, out: &mut InfoLevel) {
        let n = self.n_cells();
        let s = self.scale;
        let (base, diff) = (&input.base, &input.diff);
        let case = self.case();

        // Node quantities first, stored temporarily in the flux-sized vector
        // slots, then averaged onto cells.
        let mut prev_kin = 0.0;
        let mut prev_qv0 = 0.0;
        let mut prev_qv = 0.0;
        let mut prev_qf = 0.0;
        for i in 0..=n {
            let dv = diff.v[i];
            let d_t_node = self.stress_at_node(diff, i);
            let t_node = self.stress_at_node(base, i);
            let mut flux = -s * dv * d_t_node;
            if self.extended_flux {
                flux += s * self.r_node[i] * dv * t_node;
            }
            out.i_flux[i] = flux;

            let kin = s * 0.5 * self.rho_node[i] * dv * dv;
            let qv0 = if case == ValidityCase::Case0 && self.r_node[i] != 0.0 {
                s * self.r_node[i] * dv * self.stress_gradient_at_node(base, i)
            } else {
                0.0
            };
            let qv = if matches!(case, ValidityCase::Case2 | ValidityCase::Case3) {
                s * self.r_grad_node[i] * dv * t_node
            } else {
                0.0
            };
            let qf = if i == self.injection_node {
                let width = if i == 0 || i == n { 0.5 * self.dx } else { self.dx };
                let f = self.force_amplitude * input.waveform / width;
                let df = self.force_amplitude_derivative * input.waveform / width;
                s * dv * (df - self.r_node[i] * f)
            } else {
                0.0
            };
            if i > 0 {
                let j = i - 1;
                out.i_kin[j] = 0.5 * (prev_kin + kin);
                out.q_v0[j] = 0.5 * (prev_qv0 + qv0);
                out.q_v[j] = 0.5 * (prev_qv + qv);
                out.q_f[j] = 0.5 * (prev_qf + qf);
            }
            prev_kin = kin;
            prev_qv0 = qv0;
            prev_qv = qv;
            prev_qf = qf;
        }

        for j in 0..n {
            let d_t = diff.colocated_stress(j);
            let k = self.inv_s[j];
            out.i_pot[j] = match case {
                ValidityCase::Case2 => {
                    let q = d_t - self.r_cell[j] * base.colocated_stress(j);
                    s * 0.5 * k * q * q
                }
                _ => s * 0.5 * k * d_t * d_t,
            };
            out.q_t0[j] = if case == ValidityCase::Case0 && self.derivs.dkappa[j] != 0.0 {
                s * self.derivs.dkappa[j] * d_t * base.stress_rate(j, self.dt)
            } else {
                0.0
            };
            out.q_t[j] = match case {
                ValidityCase::Case1 | ValidityCase::Case2 if self.slowness_coef[j] != 0.0 => {
                    s * self.slowness_coef[j] * d_t * base.stress_rate(j, self.dt)
                }
                ValidityCase::Case3 if self.slowness_coef[j] != 0.0 => {
                    s * self.slowness_coef[j] * diff.stress_rate(j, self.dt) * base.colocated_stress(j)
                }
                _ => 0.0,
            };
            out.net_source[j] = match case {
                ValidityCase::Case0 => out.q_f[j] - out.q_v0[j] - out.q_t0[j],
                ValidityCase::Case1 => out.q_f[j] - out.q_t[j],
                ValidityCase::Case2 => out.q_f[j] + out.q_v[j] - out.q_t[j],
                ValidityCase::Case3 => out.q_f[j] + out.q_v[j] + out.q_t[j],
            };
        }
    }
}

/// Space-time information fields for every snapshot of a differential field.
#[derive(Clone, Debug, PartialEq)]
pub struct InfoFields {
    pub spec: ParameterSpec,
    pub e_f: f64,
    pub levels: Vec<usize>,
    pub time: Vec<f64>,
    pub i_kin: Array2<f64>,
    pub i_pot: Array2<f64>,
    pub i_density: Array2<f64>,
    /// On nodes.
    pub i_flux: Array2<f64>,
    pub q_f: Array2<f64>,
    pub q_v0: Array2<f64>,
    pub q_v: Array2<f64>,
    pub q_t0: Array2<f64>,
    pub q_t: Array2<f64>,
    pub net_source: Array2<f64>,
}

impl InfoFields {
    fn with_shape(ctx: &InfoContext, levels: Vec<usize>) -> Self {
        let (m, n) = (levels.len(), ctx.n_cells());
        let z = || Array2::zeros((m, n));
        InfoFields {
            spec: ctx.spec,
            e_f: ctx.e_f,
            time: levels.iter().map(|&k| (k as f64 + 0.5) * ctx.dt).collect(),
            levels,
            i_kin: z(),
            i_pot: z(),
            i_density: z(),
            i_flux: Array2::zeros((m, n + 1)),
            q_f: z(),
            q_v0: z(),
            q_v: z(),
            q_t0: z(),
            q_t: z(),
            net_source: z(),
        }
    }

    fn store(&mut self, row: usize, level: &InfoLevel) {
        let put = |a: &mut Array2<f64>, v: &[f64]| {
            a.row_mut(row).iter_mut().zip(v).for_each(|(x, y)| *x = *y);
        };
        put(&mut self.i_kin, &level.i_kin);
        put(&mut self.i_pot, &level.i_pot);
        put(&mut self.i_flux, &level.i_flux);
        put(&mut self.q_f, &level.q_f);
        put(&mut self.q_v0, &level.q_v0);
        put(&mut self.q_v, &level.q_v);
        put(&mut self.q_t0, &level.q_t0);
        put(&mut self.q_t, &level.q_t);
        put(&mut self.net_source, &level.net_source);
        let d: Vec<f64> = (0..level.i_kin.len()).map(|j| level.density(j)).collect();
        put(&mut self.i_density, &d);
    }
}

fn check_inputs(ctx: &InfoContext, dfield: &DifferentialField, base: &SimulationRecord) -> Result<()> {
    if dfield.spec != ctx.spec {
        return Err(Error::InvalidAnalysis("differential field and context vary different parameters".into()));
    }
    if base.grid != dfield.grid || ctx.n_cells() != base.grid.n_cells {
        return Err(Error::ShapeMismatch("base record, differential field and model disagree".into()));
    }
    if dfield.fields.snapshots.is_empty() {
        return Err(Error::MissingData("differential field has no snapshots".into()));
    }
    Ok(())
}

/// Evaluate all information fields at the snapshots of `dfield`; the base
/// record must hold the same snapshots. `waveform(t)` is the unit excitation
/// waveform.
pub fn info_fields(
    ctx: &InfoContext,
    dfield: &DifferentialField,
    base: &SimulationRecord,
    waveform: &dyn Fn(f64) -> f64,
) -> Result<InfoFields> {
    check_inputs(ctx, dfield, base)?;
    let levels: Vec<usize> = dfield.fields.snapshots.iter().map(|s| s.level).collect();
    let mut fields = InfoFields::with_shape(ctx, levels);
    let mut level = InfoLevel::new(ctx.n_cells());
    for (row, dsnap) in dfield.fields.snapshots.iter().enumerate() {
        let bsnap = base.snapshot(dsnap.level).ok_or_else(|| {
            Error::MissingData(format!("base T missing at level {}", dsnap.level))
        })?;
        let input = LevelInput {
            base: bsnap.view(),
            diff: dsnap.view(),
            waveform: waveform(fields.time[row]),
        };
        ctx.evaluate(&input, &mut level);
        fields.store(row, &level);
    }
    Ok(fields)
}

/// `I_P` at every snapshot.
pub fn info_density(
    ctx: &InfoContext,
    dfield: &DifferentialField,
    base: &SimulationRecord,
) -> Result<Array2<f64>> {
    Ok(info_fields(ctx, dfield, base, &|_| 0.0)?.i_density)
}

/// `F_P` at every snapshot, on nodes.
pub fn info_flux(ctx: &InfoContext, dfield: &DifferentialField, base: &SimulationRecord) -> Result<Array2<f64>> {
    Ok(info_fields(ctx, dfield, base, &|_| 0.0)?.i_flux)
}

/// Source terms that are active for the context's validity case.
#[derive(Clone, Debug, PartialEq)]
pub struct ActiveSources {
    pub q_f: Array2<f64>,
    pub terms: Vec<(&'static str, Array2<f64>)>,
    pub net: Array2<f64>,
}

pub fn info_sources(
    ctx: &InfoContext,
    dfield: &DifferentialField,
    base: &SimulationRecord,
    waveform: &dyn Fn(f64) -> f64,
) -> Result<ActiveSources> {
    let f = info_fields(ctx, dfield, base, waveform)?;
    let terms = match ctx.case() {
        ValidityCase::Case0 => vec![("q_v0", f.q_v0), ("q_t0", f.q_t0)],
        ValidityCase::Case1 => vec![("q_t", f.q_t)],
        ValidityCase::Case2 | ValidityCase::Case3 => vec![("q_v", f.q_v), ("q_t", f.q_t)],
    };
    Ok(ActiveSources {
        q_f: f.q_f,
        terms,
        net: f.net_source,
    })
}

/// Riemann sum over space of each row.
pub fn integrate_space(field: &Array2<f64>, dx: f64) -> Vec<f64> {
    field.rows().into_iter().map(|r| r.sum() * dx).collect()
}
