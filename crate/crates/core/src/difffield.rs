//! Difference and differential wave fields from a ± variation pair.

use crate::error::{Error, Result};
use crate::model::{GridSpec, ParameterSpec};
use crate::solver::{ProbeSeries, SimulationRecord, Snapshot};

/// The recorded arrays of a run, or a linear combination of runs.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSet {
    pub sensor_left: Vec<f64>,
    pub sensor_right: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub probes: Vec<ProbeSeries>,
}

impl FieldSet {
    pub fn from_record(record: &SimulationRecord) -> Self {
        FieldSet {
            sensor_left: record.sensor_left.clone(),
            sensor_right: record.sensor_right.clone(),
            snapshots: record.snapshots.clone(),
            probes: record.probes.clone(),
        }
    }

    pub fn snapshot(&self, level: usize) -> Option<&Snapshot> {
        self.snapshots
            .binary_search_by_key(&level, |s| s.level)
            .ok()
            .map(|i| &self.snapshots[i])
    }

    fn zip_with(&self, other: &FieldSet, f: impl Fn(f64, f64) -> f64 + Copy) -> Result<FieldSet> {
        let pair = |a: &[f64], b: &[f64], what: &str| -> Result<Vec<f64>> {
            if a.len() != b.len() {
                return Err(Error::ShapeMismatch(format!("{what}: {} vs {} samples", a.len(), b.len())));
            }
            Ok(a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
        };
        if self.snapshots.len() != other.snapshots.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} vs {} snapshots",
                self.snapshots.len(),
                other.snapshots.len()
            )));
        }
        if self.probes.len() != other.probes.len() {
            return Err(Error::ShapeMismatch("probe sets differ".into()));
        }
        let mut snapshots = Vec::with_capacity(self.snapshots.len());
        for (a, b) in self.snapshots.iter().zip(&other.snapshots) {
            if a.level != b.level {
                return Err(Error::ShapeMismatch(format!("snapshot levels {} vs {}", a.level, b.level)));
            }
            snapshots.push(Snapshot {
                level: a.level,
                v: pair(&a.v, &b.v, "snapshot v")?,
                stress: pair(&a.stress, &b.stress, "snapshot stress")?,
                stress_prev: pair(&a.stress_prev, &b.stress_prev, "snapshot stress")?,
            });
        }
        let mut probes = Vec::with_capacity(self.probes.len());
        for (a, b) in self.probes.iter().zip(&other.probes) {
            if a.cell != b.cell {
                return Err(Error::ShapeMismatch(format!("probe cells {} vs {}", a.cell, b.cell)));
            }
            probes.push(ProbeSeries {
                cell: a.cell,
                v: pair(&a.v, &b.v, "probe v")?,
                stress: pair(&a.stress, &b.stress, "probe stress")?,
            });
        }
        Ok(FieldSet {
            sensor_left: pair(&self.sensor_left, &other.sensor_left, "left sensor")?,
            sensor_right: pair(&self.sensor_right, &other.sensor_right, "right sensor")?,
            snapshots,
            probes,
        })
    }

    fn map(&self, f: impl Fn(f64) -> f64 + Copy) -> FieldSet {
        let m = |a: &[f64]| a.iter().map(|&x| f(x)).collect::<Vec<_>>();
        FieldSet {
            sensor_left: m(&self.sensor_left),
            sensor_right: m(&self.sensor_right),
            snapshots: self
                .snapshots
                .iter()
                .map(|s| Snapshot {
                    level: s.level,
                    v: m(&s.v),
                    stress: m(&s.stress),
                    stress_prev: m(&s.stress_prev),
                })
                .collect(),
            probes: self
                .probes
                .iter()
                .map(|p| ProbeSeries {
                    cell: p.cell,
                    v: m(&p.v),
                    stress: m(&p.stress),
                })
                .collect(),
        }
    }

    /// Largest magnitude over all recorded values of `v`.
    pub fn max_abs_v(&self) -> f64 {
        let snaps = self.snapshots.iter().flat_map(|s| s.v.iter());
        let probes = self.probes.iter().flat_map(|p| p.v.iter());
        self.sensor_left
            .iter()
            .chain(&self.sensor_right)
            .chain(snaps)
            .chain(probes)
            .fold(0.0f64, |a, x| a.max(x.abs()))
    }
}

/// `W(S₊) − W(S₋)` for every recorded array.
#[derive(Clone, Debug, PartialEq)]
pub struct DifferenceField {
    pub grid: GridSpec,
    pub fields: FieldSet,
    pub spec: ParameterSpec,
}

/// The difference field divided by `2ΔP`: discrete `∂v/∂P` and `∂T/∂P`.
#[derive(Clone, Debug, PartialEq)]
pub struct DifferentialField {
    pub grid: GridSpec,
    pub fields: FieldSet,
    pub spec: ParameterSpec,
}

pub fn difference_field(
    rec_plus: &SimulationRecord,
    rec_minus: &SimulationRecord,
    spec: &ParameterSpec,
) -> Result<DifferenceField> {
    if rec_plus.grid != rec_minus.grid {
        return Err(Error::ShapeMismatch("records use different grids".into()));
    }
    let fields = FieldSet::from_record(rec_plus).zip_with(&FieldSet::from_record(rec_minus), |a, b| a - b)?;
    Ok(DifferenceField {
        grid: rec_plus.grid,
        fields,
        spec: *spec,
    })
}

pub fn differential_field(diff: &DifferenceField) -> Result<DifferentialField> {
    let delta = diff.spec.delta;
    if !(delta > 0.0) {
        return Err(Error::InvalidVariation(format!("delta = {delta} must be positive")));
    }
    let scale = 1.0 / (2.0 * delta);
    Ok(DifferentialField {
        grid: diff.grid,
        fields: diff.fields.map(|x| x * scale),
        spec: diff.spec,
    })
}

/// Deviation of one differential field from the reference (smallest ΔP).
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub delta: f64,
    /// `max |f − f_ref| / max |f_ref|` over unmasked points.
    pub normalized_max: f64,
    /// `max |f − f_ref| / |f_ref|` over unmasked points.
    pub pointwise_max: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub reference_delta: f64,
    pub mask_fraction: f64,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    pub fn is_monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].normalized_max >= w[0].normalized_max)
    }
}

/// Compare snapshot velocities of fields at increasing ΔP against the
/// first one. Points where the reference is below `mask_fraction` of its
/// own maximum are skipped.
pub fn convergence_report(fields: &[DifferentialField], mask_fraction: f64) -> Result<ConvergenceReport> {
    if fields.len() < 2 {
        return Err(Error::InvalidAnalysis("need at least two differential fields".into()));
    }
    let reference = &fields[0];
    if fields.iter().any(|f| f.spec.kind != reference.spec.kind) {
        return Err(Error::InvalidAnalysis("fields vary different parameter kinds".into()));
    }
    let ref_values: Vec<f64> = reference.fields.snapshots.iter().flat_map(|s| s.v.iter().copied()).collect();
    if ref_values.is_empty() {
        return Err(Error::MissingData("reference field has no snapshots".into()));
    }
    let ref_max = ref_values.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let threshold = mask_fraction * ref_max;
    let mut rows = Vec::new();
    for f in &fields[1..] {
        let values: Vec<f64> = f.fields.snapshots.iter().flat_map(|s| s.v.iter().copied()).collect();
        if values.len() != ref_values.len() {
            return Err(Error::ShapeMismatch("snapshot sets differ between fields".into()));
        }
        let (mut abs_max, mut rel_max, mut points) = (0.0f64, 0.0f64, 0usize);
        for (&r, &x) in ref_values.iter().zip(&values) {
            if r.abs() <= threshold || r == 0.0 {
                continue;
            }
            let e = (x - r).abs();
            abs_max = abs_max.max(e);
            rel_max = rel_max.max(e / r.abs());
            points += 1;
        }
        rows.push(ConvergenceRow {
            delta: f.spec.delta,
            normalized_max: if ref_max > 0.0 { abs_max / ref_max } else { 0.0 },
            pointwise_max: rel_max,
            points,
        });
    }
    Ok(ConvergenceReport {
        reference_delta: reference.spec.delta,
        mask_fraction,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ParameterKind;

    fn grid() -> GridSpec {
        GridSpec::new(4, 1.0, 0.5, 3).unwrap()
    }

    /// Record whose every value is `f(P)` evaluated at a point-dependent offset.
    fn record_at(p: f64, f: impl Fn(f64) -> f64) -> SimulationRecord {
        let g = grid();
        let snap = Snapshot {
            level: 1,
            v: (0..5).map(|i| f(p + i as f64)).collect(),
            stress: (0..4).map(|i| 2.0 * f(p - i as f64)).collect(),
            stress_prev: vec![0.0; 4],
        };
        SimulationRecord {
            grid: g,
            sensor_left: vec![f(p); 3],
            sensor_right: vec![-f(p); 3],
            snapshots: vec![snap],
            probes: vec![],
            energy: None,
        }
    }

    fn spec(delta: f64) -> ParameterSpec {
        ParameterSpec::new(ParameterKind::SoundSpeedConstRho, 0, 10.0, delta).unwrap()
    }

    fn differential(p: f64, delta: f64, f: impl Fn(f64) -> f64 + Copy) -> DifferentialField {
        let s = spec(delta);
        let d = difference_field(&record_at(p + delta, f), &record_at(p - delta, f), &s).unwrap();
        differential_field(&d).unwrap()
    }

    #[test]
    fn identical_records_give_zero() {
        let r = record_at(1.0, |x| x.sin());
        let d = difference_field(&r, &r, &spec(1.0)).unwrap();
        assert_eq!(d.fields.max_abs_v(), 0.0);
        let dd = differential_field(&d).unwrap();
        assert_eq!(dd.fields.max_abs_v(), 0.0);
    }

    #[test]
    fn linear_response_differential_independent_of_delta() {
        let f = |x: f64| 3.0 * x + 1.0;
        let a = differential(5.0, 0.5, f);
        let b = differential(5.0, 1.0, f);
        let diff_a = difference_field(&record_at(5.5, f), &record_at(4.5, f), &spec(0.5)).unwrap();
        let diff_b = difference_field(&record_at(6.0, f), &record_at(4.0, f), &spec(1.0)).unwrap();
        // Doubling ΔP doubles the difference and leaves the derivative alone.
        assert!((diff_b.fields.sensor_left[0] - 2.0 * diff_a.fields.sensor_left[0]).abs() < 1e-12);
        for (x, y) in a.fields.snapshots[0].v.iter().zip(&b.fields.snapshots[0].v) {
            assert!((x - 3.0).abs() < 1e-12 && (y - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cubic_response_converges_quadratically() {
        // Central difference of P³ errs by ΔP², so doubling ΔP quadruples it.
        let f = |x: f64| x * x * x;
        let fields: Vec<_> = [0.01, 0.1, 0.2].iter().map(|&d| differential(5.0, d, f)).collect();
        let report = convergence_report(&fields, 0.01).unwrap();
        let ratio = report.rows[1].normalized_max / report.rows[0].normalized_max;
        let expected = (0.2f64.powi(2) - 0.01f64.powi(2)) / (0.1f64.powi(2) - 0.01f64.powi(2));
        assert!((ratio - expected).abs() < 1e-6 * expected, "{ratio} vs {expected}");
        assert!(report.is_monotone());
    }

    #[test]
    fn quadratic_response_is_exact() {
        let f = |x: f64| x * x;
        let fields: Vec<_> = [0.1, 0.2, 0.4].iter().map(|&d| differential(5.0, d, f)).collect();
        let report = convergence_report(&fields, 0.01).unwrap();
        for row in &report.rows {
            assert!(row.normalized_max < 1e-12);
        }
    }

    #[test]
    fn identical_list_has_zero_deviation() {
        let f = |x: f64| x.sin();
        let a = differential(2.0, 0.1, f);
        let report = convergence_report(&[a.clone(), a], 0.01).unwrap();
        assert_eq!(report.rows[0].normalized_max, 0.0);
        assert_eq!(report.rows[0].pointwise_max, 0.0);
    }

    #[test]
    fn mismatched_kinds_rejected() {
        let f = |x: f64| x;
        let a = differential(2.0, 0.1, f);
        let mut b = a.clone();
        b.spec = ParameterSpec::new(ParameterKind::DensityConstCp, 0, 10.0, 0.1).unwrap();
        assert!(convergence_report(&[a.clone(), b], 0.01).is_err());
        assert!(convergence_report(&[a], 0.01).is_err());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let a = record_at(1.0, |x| x);
        let mut b = a.clone();
        b.sensor_left.pop();
        assert!(matches!(difference_field(&a, &b, &spec(1.0)), Err(Error::ShapeMismatch(_))));
    }
}
