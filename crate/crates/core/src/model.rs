//! Discretised layered media and the perturbed model pairs used to form
//! differential wave fields.
//!
//! Cells are indexed `0..n_cells`; cell `j` covers `[j·dx, (j+1)·dx]`.
//! Layer boundaries therefore sit on velocity nodes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack applied to the CFL bound so that a time step quoted to the
/// printed precision of `dx / c_max` is accepted.
const CFL_SLACK: f64 = 1e-9;

/// Spatial and temporal discretisation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub n_cells: usize,
    pub dx: f64,
    pub dt: f64,
    pub n_steps: usize,
}

impl GridSpec {
    pub fn new(n_cells: usize, dx: f64, dt: f64, n_steps: usize) -> Result<Self> {
        if n_cells < 2 {
            return Err(Error::InvalidGrid(format!("n_cells = {n_cells}, need at least 2")));
        }
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::InvalidGrid(format!("dx = {dx} must be positive")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidGrid(format!("dt = {dt} must be positive")));
        }
        if n_steps < 1 {
            return Err(Error::InvalidGrid("n_steps must be at least 1".into()));
        }
        Ok(GridSpec {
            n_cells,
            dx,
            dt,
            n_steps,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    pub fn length(&self) -> f64 {
        self.n_cells as f64 * self.dx
    }

    pub fn node_x(&self, i: usize) -> f64 {
        i as f64 * self.dx
    }

    pub fn cell_center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dx
    }

    /// Time of the co-located level written after step `k + 1`.
    pub fn level_time(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.dt
    }

    /// Level index closest to time `t`, clamped to the recorded range.
    pub fn level_at(&self, t: f64) -> usize {
        let k = (t / self.dt - 0.5).round();
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.n_steps - 1)
        }
    }

    /// Largest stable time step for a given maximum speed.
    pub fn cfl_limit(&self, c_max: f64) -> f64 {
        self.dx / c_max
    }

    pub fn satisfies_cfl(&self, c_max: f64) -> bool {
        self.dt <= self.cfl_limit(c_max) * (1.0 + CFL_SLACK)
    }

    /// Grid with `dx` and `dt` divided by `factor` over the same physical
    /// extent and duration.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        GridSpec::new(
            self.n_cells * factor,
            self.dx / factor as f64,
            self.dt / factor as f64,
            self.n_steps * factor,
        )
    }
}

/// Isotropic material given by density and P-wave speed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    pub rho: f64,
    pub c_p: f64,
}

impl Material {
    pub fn new(rho: f64, c_p: f64) -> Self {
        Material { rho, c_p }
    }

    /// λ + 2µ.
    pub fn stiffness(&self) -> f64 {
        self.rho * self.c_p * self.c_p
    }

    pub fn impedance(&self) -> f64 {
        self.rho * self.c_p
    }

    fn validate(&self, what: &str) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidMaterial(format!("{what}: rho = {} must be positive", self.rho)));
        }
        if !(self.c_p > 0.0 && self.c_p.is_finite()) {
            return Err(Error::InvalidMaterial(format!("{what}: c_p = {} must be positive", self.c_p)));
        }
        Ok(())
    }
}

/// A homogeneous layer embedded in the matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub x_start: f64,
    pub x_end: f64,
    pub rho: f64,
    pub c_p: f64,
}

impl LayerSpec {
    pub fn material(&self) -> Material {
        Material::new(self.rho, self.c_p)
    }
}

/// Cell range `[start, end)` occupied by a layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CellRange {
    pub start: usize,
    pub end: usize,
}

impl CellRange {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, j: usize) -> bool {
        j >= self.start && j < self.end
    }
}

/// Per-cell density and stiffness (λ + 2µ).
#[derive(Clone, Debug, PartialEq)]
pub struct MaterialField {
    pub rho: Vec<f64>,
    pub stiffness: Vec<f64>,
}

impl MaterialField {
    pub fn uniform(n_cells: usize, material: Material) -> Self {
        MaterialField {
            rho: vec![material.rho; n_cells],
            stiffness: vec![material.stiffness(); n_cells],
        }
    }

    pub fn from_arrays(rho: Vec<f64>, stiffness: Vec<f64>) -> Result<Self> {
        if rho.len() != stiffness.len() {
            return Err(Error::ShapeMismatch(format!(
                "rho has {} cells, stiffness {}",
                rho.len(),
                stiffness.len()
            )));
        }
        let field = MaterialField { rho, stiffness };
        field.validate()?;
        Ok(field)
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn c_p(&self, j: usize) -> f64 {
        (self.stiffness[j] / self.rho[j]).sqrt()
    }

    pub fn c_p_profile(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.c_p(j)).collect()
    }

    pub fn max_c_p(&self) -> f64 {
        (0..self.len()).map(|j| self.c_p(j)).fold(0.0, f64::max)
    }

    pub fn impedance(&self, j: usize) -> f64 {
        (self.rho[j] * self.stiffness[j]).sqrt()
    }

    fn set(&mut self, j: usize, m: Material) {
        self.rho[j] = m.rho;
        self.stiffness[j] = m.stiffness();
    }

    fn validate(&self) -> Result<()> {
        for j in 0..self.len() {
            if !(self.rho[j] > 0.0 && self.rho[j].is_finite()) {
                return Err(Error::InvalidMaterial(format!("cell {j}: rho = {}", self.rho[j])));
            }
            if !(self.stiffness[j] > 0.0 && self.stiffness[j].is_finite()) {
                return Err(Error::InvalidMaterial(format!(
                    "cell {j}: stiffness = {}",
                    self.stiffness[j]
                )));
            }
        }
        Ok(())
    }
}

/// A material field together with the layout it was built from, which the
/// geometric variations need.
#[derive(Clone, Debug, PartialEq)]
pub struct LayeredModel {
    pub grid: GridSpec,
    pub matrix: Material,
    pub layers: Vec<CellRange>,
    pub field: MaterialField,
}

impl LayeredModel {
    pub fn layer(&self, index: usize) -> Result<CellRange> {
        self.layers.get(index).copied().ok_or_else(|| {
            Error::InvalidVariation(format!(
                "layer {index} does not exist ({} layers)",
                self.layers.len()
            ))
        })
    }

    fn check_cfl(&self, region: &str) -> Result<()> {
        let c_max = self.field.max_c_p();
        if self.grid.satisfies_cfl(c_max) {
            Ok(())
        } else {
            Err(Error::Cfl {
                region: region.to_string(),
                dt: self.grid.dt,
                limit: self.grid.cfl_limit(c_max),
                c_p: c_max,
            })
        }
    }
}

fn snap_boundary(x: f64, grid: &GridSpec, index: usize, which: &str) -> usize {
    let cells = x / grid.dx;
    let snapped = cells.round().max(0.0);
    let distance = (cells - snapped).abs() * grid.dx;
    if distance > grid.dx / 100.0 {
        log::warn!(
            "layer {index} {which} boundary at {x} m snapped by {distance:e} m to a cell boundary"
        );
    }
    snapped as usize
}

/// Build the per-cell field of a matrix with embedded layers.
pub fn build_layered_model(
    grid: GridSpec,
    matrix: Material,
    layers: &[LayerSpec],
) -> Result<LayeredModel> {
    matrix.validate("matrix")?;
    let mut field = MaterialField::uniform(grid.n_cells, matrix);
    let mut ranges: Vec<CellRange> = Vec::with_capacity(layers.len());
    let length = grid.length();
    let tol = 0.5 * grid.dx;

    for (index, layer) in layers.iter().enumerate() {
        layer.material().validate(&format!("layer {index}"))?;
        if !(layer.x_start < layer.x_end) {
            return Err(Error::InvalidMaterial(format!(
                "layer {index}: x_start = {} must be below x_end = {}",
                layer.x_start, layer.x_end
            )));
        }
        if layer.x_start < -tol || layer.x_end > length + tol {
            return Err(Error::LayerOutsideGrid {
                index,
                detail: format!(
                    "[{}, {}] m against grid [0, {}] m",
                    layer.x_start, layer.x_end, length
                ),
            });
        }
        let start = snap_boundary(layer.x_start, &grid, index, "left");
        let end = snap_boundary(layer.x_end, &grid, index, "right").min(grid.n_cells);
        if end <= start {
            return Err(Error::InvalidMaterial(format!(
                "layer {index} is thinner than one cell"
            )));
        }
        let range = CellRange { start, end };
        for (other, r) in ranges.iter().enumerate() {
            if range.start < r.end && r.start < range.end {
                return Err(Error::OverlappingLayers { index, other });
            }
        }
        for j in start..end {
            field.set(j, layer.material());
        }
        ranges.push(range);
    }

    let model = LayeredModel {
        grid,
        matrix,
        layers: ranges,
        field,
    };
    let c_matrix = matrix.c_p;
    if !grid.satisfies_cfl(c_matrix) {
        return Err(Error::Cfl {
            region: "matrix".into(),
            dt: grid.dt,
            limit: grid.cfl_limit(c_matrix),
            c_p: c_matrix,
        });
    }
    for (index, layer) in layers.iter().enumerate() {
        if !grid.satisfies_cfl(layer.c_p) {
            return Err(Error::Cfl {
                region: format!(
                    "layer {index} ([{} mm, {} mm])",
                    layer.x_start * 1e3,
                    layer.x_end * 1e3
                ),
                dt: grid.dt,
                limit: grid.cfl_limit(layer.c_p),
                c_p: layer.c_p,
            });
        }
    }
    Ok(model)
}

/// The varied system parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterKind {
    LayerPosition,
    LayerThickness,
    SoundSpeedConstRho,
    DensityConstCp,
    DensityConstStiffness,
    StiffnessConstRho,
}

impl ParameterKind {
    pub const ALL: [ParameterKind; 6] = [
        ParameterKind::LayerPosition,
        ParameterKind::LayerThickness,
        ParameterKind::SoundSpeedConstRho,
        ParameterKind::DensityConstCp,
        ParameterKind::DensityConstStiffness,
        ParameterKind::StiffnessConstRho,
    ];

    pub fn is_geometric(self) -> bool {
        matches!(self, ParameterKind::LayerPosition | ParameterKind::LayerThickness)
    }

    pub fn label(self) -> &'static str {
        match self {
            ParameterKind::LayerPosition => "layer_position",
            ParameterKind::LayerThickness => "layer_thickness",
            ParameterKind::SoundSpeedConstRho => "sound_speed_const_rho",
            ParameterKind::DensityConstCp => "density_const_cp",
            ParameterKind::DensityConstStiffness => "density_const_stiffness",
            ParameterKind::StiffnessConstRho => "stiffness_const_rho",
        }
    }
}

/// Material quantities that a variation request may touch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Density,
    SoundSpeed,
    Stiffness,
}

/// Which balance-equation family applies to a parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ValidityCase {
    /// Geometric parameter.
    Case0,
    /// Material change at constant density.
    Case1,
    /// Density change at constant sound speed.
    Case2,
    /// Density change at constant stiffness.
    Case3,
}

/// A variation as requested, before validation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VariationRequest {
    Single(ParameterKind),
    /// Two material quantities changed independently of each other.
    Independent(Quantity, Quantity),
}

/// Classify a request into its validity case; independent simultaneous
/// changes of two material quantities are outside the theory.
pub fn classify_parameter(request: VariationRequest) -> Result<ValidityCase> {
    match request {
        VariationRequest::Single(kind) => Ok(match kind {
            ParameterKind::LayerPosition | ParameterKind::LayerThickness => ValidityCase::Case0,
            ParameterKind::SoundSpeedConstRho | ParameterKind::StiffnessConstRho => {
                ValidityCase::Case1
            }
            ParameterKind::DensityConstCp => ValidityCase::Case2,
            ParameterKind::DensityConstStiffness => ValidityCase::Case3,
        }),
        VariationRequest::Independent(a, b) if a == b => {
            Err(Error::InvalidVariation(format!("{a:?} listed twice")))
        }
        VariationRequest::Independent(a, b) => Err(Error::UnsupportedParameterCombination(
            format!("{a:?} and {b:?} cannot both vary independently"),
        )),
    }
}

/// Definition of one parameter variation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParameterSpec {
    pub kind: ParameterKind,
    /// Index of the varied layer.
    pub layer: usize,
    /// P, in the parameter's unit (m, m/s, kg/m³ or Pa).
    pub reference_value: f64,
    /// ΔP, in the same unit. Geometric kinds use a whole number of cells.
    pub delta: f64,
    pub validity_case: ValidityCase,
}

impl ParameterSpec {
    pub fn new(kind: ParameterKind, layer: usize, reference_value: f64, delta: f64) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::InvalidVariation(format!("delta = {delta} must be non-negative")));
        }
        if !(reference_value.is_finite() && reference_value > 0.0) {
            return Err(Error::InvalidVariation(format!(
                "reference value {reference_value} must be positive"
            )));
        }
        Ok(ParameterSpec {
            kind,
            layer,
            reference_value,
            delta,
            validity_case: classify_parameter(VariationRequest::Single(kind))?,
        })
    }

    /// Geometric variation by `cells` whole cells.
    pub fn geometric(kind: ParameterKind, layer: usize, reference_value: f64, cells: usize, dx: f64) -> Result<Self> {
        if !kind.is_geometric() {
            return Err(Error::InvalidVariation(format!("{} is not geometric", kind.label())));
        }
        ParameterSpec::new(kind, layer, reference_value, cells as f64 * dx)
    }

    /// Geometric delta in cells, checked to be a whole (and for thickness,
    /// even) multiple of dx.
    pub fn delta_cells(&self, dx: f64) -> Result<usize> {
        let cells = self.delta / dx;
        let rounded = cells.round();
        if (cells - rounded).abs() > 1e-6 {
            return Err(Error::InvalidVariation(format!(
                "delta = {} m is not a whole multiple of dx = {dx} m",
                self.delta
            )));
        }
        let n = rounded as usize;
        if self.kind == ParameterKind::LayerThickness && n % 2 != 0 {
            return Err(Error::InvalidVariation(format!(
                "thickness delta of {n} cells must be even"
            )));
        }
        Ok(n)
    }
}

/// Sign of the perturbation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Natural reference value P of a parameter in a given model: the layer
/// centre or thickness for geometric kinds, the layer's material value
/// otherwise.
pub fn natural_reference(model: &LayeredModel, kind: ParameterKind, layer: usize) -> Result<f64> {
    let range = model.layer(layer)?;
    let dx = model.grid.dx;
    let j = range.start;
    Ok(match kind {
        ParameterKind::LayerPosition => 0.5 * (range.start + range.end) as f64 * dx,
        ParameterKind::LayerThickness => range.len() as f64 * dx,
        ParameterKind::SoundSpeedConstRho => model.field.c_p(j),
        ParameterKind::DensityConstCp | ParameterKind::DensityConstStiffness => model.field.rho[j],
        ParameterKind::StiffnessConstRho => model.field.stiffness[j],
    })
}

/// Set the varied layer's property to `value`, producing the model around
/// which a material variation is centred. Geometric kinds return the model
/// unchanged.
pub fn with_layer_value(model: &LayeredModel, kind: ParameterKind, layer: usize, value: f64) -> Result<LayeredModel> {
    let range = model.layer(layer)?;
    let mut out = model.clone();
    if kind.is_geometric() {
        return Ok(out);
    }
    for j in range.start..range.end {
        set_material_value(&mut out.field, j, kind, value);
    }
    out.field.validate()?;
    out.check_cfl(&format!("layer {layer} at reference value {value}"))?;
    Ok(out)
}

fn set_material_value(field: &mut MaterialField, j: usize, kind: ParameterKind, value: f64) {
    match kind {
        ParameterKind::SoundSpeedConstRho => {
            field.stiffness[j] = field.rho[j] * value * value;
        }
        ParameterKind::DensityConstCp => {
            let c = field.c_p(j);
            field.rho[j] = value;
            field.stiffness[j] = value * c * c;
        }
        ParameterKind::DensityConstStiffness => {
            field.rho[j] = value;
        }
        ParameterKind::StiffnessConstRho => {
            field.stiffness[j] = value;
        }
        ParameterKind::LayerPosition | ParameterKind::LayerThickness => {}
    }
}

fn material_value(field: &MaterialField, j: usize, kind: ParameterKind) -> f64 {
    match kind {
        ParameterKind::SoundSpeedConstRho => field.c_p(j),
        ParameterKind::DensityConstCp | ParameterKind::DensityConstStiffness => field.rho[j],
        ParameterKind::StiffnessConstRho => field.stiffness[j],
        ParameterKind::LayerPosition | ParameterKind::LayerThickness => 0.0,
    }
}

/// Perturb `base` by `sign · delta`.
///
/// A layer edge that coincides with the model boundary is not a layer
/// boundary and stays in place under geometric variations.
pub fn apply_variation(base: &LayeredModel, spec: &ParameterSpec, sign: Sign) -> Result<LayeredModel> {
    let range = base.layer(spec.layer)?;
    let mut out = base.clone();
    let n = base.grid.n_cells;

    if spec.kind.is_geometric() {
        let k = spec.delta_cells(base.grid.dx)? as isize;
        let (ds, de) = match (spec.kind, sign) {
            (ParameterKind::LayerPosition, Sign::Plus) => (k, k),
            (ParameterKind::LayerPosition, Sign::Minus) => (-k, -k),
            (_, Sign::Plus) => (-k / 2, k / 2),
            (_, Sign::Minus) => (k / 2, -k / 2),
        };
        let start = if range.start == 0 { 0 } else { range.start as isize + ds };
        let end = if range.end == n { n as isize } else { range.end as isize + de };
        if start < 0 || end > n as isize {
            return Err(Error::BoundaryCrossing(format!(
                "layer {} shifted to cells [{start}, {end}) leaves the grid",
                spec.layer
            )));
        }
        if end <= start {
            return Err(Error::BoundaryCrossing(format!(
                "layer {} boundaries cross (cells [{start}, {end}))",
                spec.layer
            )));
        }
        let new = CellRange {
            start: start as usize,
            end: end as usize,
        };
        for (other, r) in base.layers.iter().enumerate() {
            if other != spec.layer && new.start < r.end && r.start < new.end {
                return Err(Error::BoundaryCrossing(format!(
                    "layer {} shifted into layer {other}",
                    spec.layer
                )));
            }
        }
        let layer_rho = base.field.rho[range.start];
        let layer_stiffness = base.field.stiffness[range.start];
        for j in range.start.min(new.start)..range.end.max(new.end) {
            match (range.contains(j), new.contains(j)) {
                (true, false) => {
                    out.field.rho[j] = base.matrix.rho;
                    out.field.stiffness[j] = base.matrix.stiffness();
                }
                (false, true) => {
                    out.field.rho[j] = layer_rho;
                    out.field.stiffness[j] = layer_stiffness;
                }
                _ => {}
            }
        }
        out.layers[spec.layer] = new;
    } else {
        let d = sign.factor() * spec.delta;
        for j in range.start..range.end {
            let value = material_value(&base.field, j, spec.kind) + d;
            if !(value > 0.0) {
                return Err(Error::InvalidVariation(format!(
                    "cell {j}: perturbed {} value {value} is not positive",
                    spec.kind.label()
                )));
            }
            set_material_value(&mut out.field, j, spec.kind, value);
        }
    }
    out.field.validate()?;
    let region = format!(
        "layer {} under {} ({})",
        spec.layer,
        spec.kind.label(),
        if sign == Sign::Plus { "+" } else { "-" }
    );
    out.check_cfl(&region)?;
    Ok(out)
}

/// The two perturbed models of one variation.
#[derive(Clone, Debug, PartialEq)]
pub struct VariationPair {
    pub plus: LayeredModel,
    pub minus: LayeredModel,
    pub spec: ParameterSpec,
}

impl VariationPair {
    pub fn new(reference: &LayeredModel, spec: ParameterSpec) -> Result<Self> {
        Ok(VariationPair {
            plus: apply_variation(reference, &spec, Sign::Plus)?,
            minus: apply_variation(reference, &spec, Sign::Minus)?,
            spec,
        })
    }

    /// Coefficient field centred between the two models.
    ///
    /// Density and stiffness are geometric means of the plus and minus
    /// values. With that choice the discrete derivatives of `1/s` and `1/ρ`
    /// obey the same product rules as their continuous counterparts, so the
    /// alternative forms of the information density agree to rounding.
    pub fn center_field(&self) -> MaterialField {
        let (p, m) = (&self.plus.field, &self.minus.field);
        MaterialField {
            rho: p.rho.iter().zip(&m.rho).map(|(a, b)| (a * b).sqrt()).collect(),
            stiffness: p
                .stiffness
                .iter()
                .zip(&m.stiffness)
                .map(|(a, b)| (a * b).sqrt())
                .collect(),
        }
    }

    /// Cells where the two models differ.
    pub fn touched_cells(&self) -> Vec<usize> {
        (0..self.plus.field.len())
            .filter(|&j| {
                self.plus.field.rho[j] != self.minus.field.rho[j]
                    || self.plus.field.stiffness[j] != self.minus.field.stiffness[j]
            })
            .collect()
    }
}

/// Per-cell parameter derivatives of the material.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterialDerivatives {
    /// ∂ρ/∂P
    pub drho: Vec<f64>,
    /// ∂(λ+2µ)⁻¹/∂P
    pub dkappa: Vec<f64>,
    /// ∂(ρ/(λ+2µ))/∂P
    pub dslowness: Vec<f64>,
}

/// Central differences of the material fields of a pair.
pub fn material_derivative(pair: &VariationPair) -> MaterialDerivatives {
    let (p, m) = (&pair.plus.field, &pair.minus.field);
    let inv = 1.0 / (2.0 * pair.spec.delta);
    let n = p.len();
    let mut d = MaterialDerivatives {
        drho: vec![0.0; n],
        dkappa: vec![0.0; n],
        dslowness: vec![0.0; n],
    };
    for j in 0..n {
        if p.rho[j] == m.rho[j] && p.stiffness[j] == m.stiffness[j] {
            continue;
        }
        d.drho[j] = (p.rho[j] - m.rho[j]) * inv;
        d.dkappa[j] = (1.0 / p.stiffness[j] - 1.0 / m.stiffness[j]) * inv;
        d.dslowness[j] = (p.rho[j] / p.stiffness[j] - m.rho[j] / m.stiffness[j]) * inv;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig2_grid() -> GridSpec {
        GridSpec::new(3480, 14.367816e-6, 3.192848e-9, 10).unwrap()
    }

    fn fig2() -> LayeredModel {
        build_layered_model(
            fig2_grid(),
            Material::new(2400.0, 4000.0),
            &[LayerSpec {
                x_start: 20e-3,
                x_end: 30e-3,
                rho: 2600.0,
                c_p: 4500.0,
            }],
        )
        .unwrap()
    }

    fn toy() -> LayeredModel {
        let grid = GridSpec::new(10, 1.0, 0.1, 1).unwrap();
        build_layered_model(
            grid,
            Material::new(1.0, 1.0),
            &[LayerSpec {
                x_start: 4.0,
                x_end: 7.0,
                rho: 3.0,
                c_p: 2.0,
            }],
        )
        .unwrap()
    }

    #[test]
    fn fig2_layer_cells() {
        let m = fig2();
        assert_eq!(m.layers[0], CellRange { start: 1392, end: 2088 });
        assert_eq!(m.field.rho[1391], 2400.0);
        assert_eq!(m.field.rho[1392], 2600.0);
        assert_eq!(m.field.rho[2087], 2600.0);
        assert_eq!(m.field.rho[2088], 2400.0);
        assert!((m.field.c_p(1500) - 4500.0).abs() < 1e-9);
    }

    #[test]
    fn empty_layer_list_is_uniform() {
        let m = build_layered_model(fig2_grid(), Material::new(2400.0, 4000.0), &[]).unwrap();
        assert!(m.field.rho.iter().all(|&r| r == 2400.0));
        assert!(m.layers.is_empty());
    }

    #[test]
    fn two_layer_extends_to_last_cell() {
        let m = build_layered_model(
            fig2_grid(),
            Material::new(2400.0, 4000.0),
            &[LayerSpec {
                x_start: 20e-3,
                x_end: 50e-3,
                rho: 2600.0,
                c_p: 4500.0,
            }],
        )
        .unwrap();
        assert_eq!(m.layers[0].end, 3480);
        assert_eq!(m.field.rho[3479], 2600.0);
    }

    #[test]
    fn overlapping_and_outside_layers_rejected() {
        let l = |a: f64, b: f64| LayerSpec {
            x_start: a,
            x_end: b,
            rho: 2600.0,
            c_p: 4000.0,
        };
        let mat = Material::new(2400.0, 4000.0);
        assert!(matches!(
            build_layered_model(fig2_grid(), mat, &[l(0.01, 0.02), l(0.015, 0.03)]),
            Err(Error::OverlappingLayers { index: 1, other: 0 })
        ));
        assert!(matches!(
            build_layered_model(fig2_grid(), mat, &[l(0.04, 0.06)]),
            Err(Error::LayerOutsideGrid { .. })
        ));
        assert!(matches!(
            build_layered_model(fig2_grid(), Material::new(-1.0, 4000.0), &[]),
            Err(Error::InvalidMaterial(_))
        ));
    }

    #[test]
    fn cfl_violation_names_layer() {
        let grid = GridSpec::new(3480, 14.367816e-6, 1.1 * 14.367816e-6 / 4500.0, 10).unwrap();
        let err = build_layered_model(
            grid,
            Material::new(2400.0, 4000.0),
            &[LayerSpec {
                x_start: 20e-3,
                x_end: 30e-3,
                rho: 2600.0,
                c_p: 4500.0,
            }],
        )
        .unwrap_err();
        match err {
            Error::Cfl { region, c_p, .. } => {
                assert!(region.starts_with("layer 0"), "{region}");
                assert_eq!(c_p, 4500.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn position_variation_shifts_by_one_cell() {
        let base = fig2();
        let dx = base.grid.dx;
        let spec = ParameterSpec::geometric(ParameterKind::LayerPosition, 0, 25e-3, 1, dx).unwrap();
        let plus = apply_variation(&base, &spec, Sign::Plus).unwrap();
        let minus = apply_variation(&base, &spec, Sign::Minus).unwrap();
        assert_eq!(plus.layers[0], CellRange { start: 1393, end: 2089 });
        assert_eq!(minus.layers[0], CellRange { start: 1391, end: 2087 });
        assert_eq!(plus.field.rho[1392], 2400.0);
        assert_eq!(plus.field.rho[2088], 2600.0);
        assert_eq!(plus.layers[0].len(), minus.layers[0].len());
        assert_eq!(base, fig2());
    }

    #[test]
    fn thickness_variation_keeps_center() {
        let base = fig2();
        let spec = ParameterSpec::geometric(ParameterKind::LayerThickness, 0, 10e-3, 2, base.grid.dx).unwrap();
        let plus = apply_variation(&base, &spec, Sign::Plus).unwrap();
        let minus = apply_variation(&base, &spec, Sign::Minus).unwrap();
        assert_eq!(plus.layers[0], CellRange { start: 1391, end: 2089 });
        assert_eq!(minus.layers[0], CellRange { start: 1393, end: 2087 });
        let odd = ParameterSpec::geometric(ParameterKind::LayerThickness, 0, 10e-3, 1, base.grid.dx).unwrap();
        assert!(apply_variation(&base, &odd, Sign::Plus).is_err());
    }

    #[test]
    fn sound_speed_variation_around_reference() {
        let base = fig2();
        let reference = with_layer_value(&base, ParameterKind::SoundSpeedConstRho, 0, 4499.0).unwrap();
        let spec = ParameterSpec::new(ParameterKind::SoundSpeedConstRho, 0, 4499.0, 1.0).unwrap();
        let pair = VariationPair::new(&reference, spec).unwrap();
        assert!((pair.plus.field.c_p(1500) - 4500.0).abs() < 1e-9);
        assert!((pair.minus.field.c_p(1500) - 4498.0).abs() < 1e-9);
        assert_eq!(pair.plus.field.rho, reference.field.rho);
        let d = material_derivative(&pair);
        assert!(d.drho.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn sound_speed_above_cfl_rejected() {
        let base = fig2();
        let spec = ParameterSpec::new(ParameterKind::SoundSpeedConstRho, 0, 4500.0, 1.0).unwrap();
        assert!(matches!(
            apply_variation(&base, &spec, Sign::Plus),
            Err(Error::Cfl { .. })
        ));
    }

    #[test]
    fn density_derivative_is_one_in_layer() {
        let base = fig2();
        let spec = ParameterSpec::new(ParameterKind::DensityConstCp, 0, 2600.0, 1.0).unwrap();
        let pair = VariationPair::new(&base, spec).unwrap();
        let d = material_derivative(&pair);
        for j in 0..base.grid.n_cells {
            let expected = if (1392..2088).contains(&j) { 1.0 } else { 0.0 };
            assert!((d.drho[j] - expected).abs() < 1e-12, "cell {j}");
        }
        assert!((pair.plus.field.c_p(1500) - 4500.0).abs() < 1e-9);
    }

    #[test]
    fn density_const_stiffness_recomputes_speed() {
        let base = toy();
        let spec = ParameterSpec::new(ParameterKind::DensityConstStiffness, 0, 3.0, 0.5).unwrap();
        let plus = apply_variation(&base, &spec, Sign::Plus).unwrap();
        assert_eq!(plus.field.stiffness, base.field.stiffness);
        assert!((plus.field.c_p(5) - (12.0f64 / 3.5).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn position_derivative_on_toy_grid() {
        // Layer on cells 4..7 (rho 3) in matrix rho 1, shifted by one cell.
        let base = toy();
        let spec = ParameterSpec::geometric(ParameterKind::LayerPosition, 0, 5.5, 1, 1.0).unwrap();
        let pair = VariationPair::new(&base, spec).unwrap();
        let d = material_derivative(&pair);
        // plus: cells 5..8, minus: cells 3..6.
        let expected = [0.0, 0.0, 0.0, -1.0, -1.0, 0.0, 1.0, 1.0, 0.0, 0.0];
        assert_eq!(d.drho, expected);
        assert_eq!(pair.touched_cells(), vec![3, 4, 6, 7]);
    }

    #[test]
    fn zero_delta_returns_base() {
        let base = fig2();
        for kind in [
            ParameterKind::SoundSpeedConstRho,
            ParameterKind::DensityConstCp,
            ParameterKind::DensityConstStiffness,
            ParameterKind::StiffnessConstRho,
        ] {
            let spec = ParameterSpec::new(kind, 0, 1.0, 0.0).unwrap();
            assert_eq!(apply_variation(&base, &spec, Sign::Plus).unwrap().field, base.field);
        }
        let spec = ParameterSpec::geometric(ParameterKind::LayerPosition, 0, 25e-3, 0, base.grid.dx).unwrap();
        assert_eq!(apply_variation(&base, &spec, Sign::Minus).unwrap(), base);
    }

    #[test]
    fn classification_table() {
        use ParameterKind::*;
        let case = |k| classify_parameter(VariationRequest::Single(k)).unwrap();
        assert_eq!(case(LayerPosition), ValidityCase::Case0);
        assert_eq!(case(LayerThickness), ValidityCase::Case0);
        assert_eq!(case(SoundSpeedConstRho), ValidityCase::Case1);
        assert_eq!(case(StiffnessConstRho), ValidityCase::Case1);
        assert_eq!(case(DensityConstCp), ValidityCase::Case2);
        assert_eq!(case(DensityConstStiffness), ValidityCase::Case3);
        for (a, b) in [
            (Quantity::Density, Quantity::SoundSpeed),
            (Quantity::Density, Quantity::Stiffness),
            (Quantity::SoundSpeed, Quantity::Stiffness),
        ] {
            assert!(matches!(
                classify_parameter(VariationRequest::Independent(a, b)),
                Err(Error::UnsupportedParameterCombination(_))
            ));
        }
    }

    #[test]
    fn two_layer_position_moves_left_boundary_only() {
        let base = build_layered_model(
            fig2_grid(),
            Material::new(2400.0, 4000.0),
            &[LayerSpec {
                x_start: 20e-3,
                x_end: 50e-3,
                rho: 2600.0,
                c_p: 4500.0,
            }],
        )
        .unwrap();
        let spec = ParameterSpec::geometric(ParameterKind::LayerPosition, 0, 20e-3, 1, base.grid.dx).unwrap();
        let pair = VariationPair::new(&base, spec).unwrap();
        assert_eq!(pair.plus.layers[0], CellRange { start: 1393, end: 3480 });
        assert_eq!(pair.touched_cells(), vec![1391, 1392]);
    }

    #[test]
    fn natural_references() {
        let m = fig2();
        let p = natural_reference(&m, ParameterKind::LayerPosition, 0).unwrap();
        assert!((p - 25e-3).abs() < 1e-9);
        let t = natural_reference(&m, ParameterKind::LayerThickness, 0).unwrap();
        assert!((t - 10e-3).abs() < 1e-9);
        assert_eq!(natural_reference(&m, ParameterKind::DensityConstCp, 0).unwrap(), 2600.0);
    }
}
