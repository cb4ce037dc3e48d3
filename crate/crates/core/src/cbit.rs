//! Sensor-side information in Cbit units and the cross-example report.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ParameterSpec;
use crate::solver::{Boundary, EnergyTrace};

/// How the normalisation energy `E_f` is taken from the reference run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyNormalization {
    /// Total energy at the first level after the excitation has ended.
    #[default]
    Plateau,
    /// Total energy summed over the levels while the excitation acts.
    /// Scales with `1/dt`.
    ExcitationSum,
}

/// Normalisation energy of a reference run whose source acts for
/// `duration` seconds.
pub fn normalization_energy(trace: &EnergyTrace, duration: f64, mode: EnergyNormalization) -> Result<f64> {
    let value = match mode {
        EnergyNormalization::Plateau => {
            let k = trace
                .time
                .iter()
                .position(|&t| t >= duration)
                .ok_or_else(|| Error::MissingData("energy trace ends before the excitation does".into()))?;
            trace.total[k]
        }
        EnergyNormalization::ExcitationSum => {
            if trace.time.last().is_none_or(|&t| t < duration) {
                return Err(Error::MissingData("energy trace ends before the excitation does".into()));
            }
            trace
                .time
                .iter()
                .zip(&trace.total)
                .filter(|(t, _)| **t <= duration)
                .map(|(_, e)| e)
                .sum()
        }
    };
    if !(value > 0.0 && value.is_finite()) {
        return Err(Error::InvalidAnalysis(format!("normalisation energy {value} is not positive")));
    }
    Ok(value)
}

/// Absolute normalisation divides by `E_f`; relative normalisation by the
/// base-run sensor energy `M₀²` over the analysis window.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    Absolute,
    Relative,
}

impl Normalization {
    pub fn label(self) -> &'static str {
        match self {
            Normalization::Absolute => "absolute",
            Normalization::Relative => "relative",
        }
    }
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "absolute" => Ok(Normalization::Absolute),
            "relative" => Ok(Normalization::Relative),
            other => Err(Error::Config(format!("unknown normalization '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn label(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

/// Time window `[start, end]` in seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub fn new(start: f64, end: f64) -> Self {
        Window { start, end }
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t <= self.end
    }

    /// Whole 20 µs record.
    pub fn full_record() -> Self {
        Window::new(0.0, 20e-6)
    }

    /// The one-period echo windows of the three-layer model, in arrival
    /// order.
    pub fn echo_presets() -> Vec<(&'static str, Window)> {
        [
            ("echo1", 10.0, 11.0),
            ("echo2", 12.22, 13.22),
            ("echo3", 14.44, 15.44),
            ("echo4", 16.67, 17.67),
            ("echo5", 18.9, 19.9),
        ]
        .into_iter()
        .map(|(n, a, b)| (n, Window::new(a * 1e-6, b * 1e-6)))
        .collect()
    }
}

/// What a sensor series is computed from.
#[derive(Clone, Copy, Debug)]
pub struct SensorInput<'a> {
    pub side: Side,
    /// Condition of the boundary the sensor sits on.
    pub boundary: Boundary,
    pub time: &'a [f64],
    /// `v₊ − v₋` at the sensor node.
    pub difference: &'a [f64],
    /// `v` of the reference run at the sensor node; needed in relative mode.
    pub base: &'a [f64],
    /// Density at the sensor node.
    pub rho: f64,
}

/// Information density at one boundary sensor per level.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorInfoSeries {
    pub side: Side,
    pub spec: ParameterSpec,
    pub normalization: Normalization,
    pub time: Vec<f64>,
    pub series: Vec<f64>,
    /// `E_f` in absolute mode, `M₀²` in relative mode.
    pub normalizer: f64,
}

impl SensorInfoSeries {
    pub fn peak(&self, window: Window) -> f64 {
        self.time
            .iter()
            .zip(&self.series)
            .filter(|(t, _)| window.contains(**t))
            .map(|(_, v)| *v)
            .fold(0.0, f64::max)
    }
}

/// Mean of `v²` of the reference sensor over the window.
pub fn relative_normalizer(time: &[f64], base: &[f64], window: Window) -> Result<f64> {
    let (mut s, mut c) = (0.0, 0usize);
    for (t, v) in time.iter().zip(base) {
        if window.contains(*t) {
            s += v * v;
            c += 1;
        }
    }
    if c == 0 {
        return Err(Error::InvalidAnalysis("relative normalisation window holds no samples".into()));
    }
    let m2 = s / c as f64;
    if m2 == 0.0 {
        return Err(Error::InvalidAnalysis("reference sensor signal vanishes in the window".into()));
    }
    Ok(m2)
}

/// On a stress-free sensor only the kinetic term survives, so the series is
/// `(P²/E_f)(ρ/2)(∂v/∂P)²` in absolute mode and `P² (∂v/∂P)² / M₀²` in
/// relative mode.
pub fn sensor_info(
    input: &SensorInput<'_>,
    spec: &ParameterSpec,
    e_f: f64,
    mode: Normalization,
    window: Window,
) -> Result<SensorInfoSeries> {
    if input.boundary != Boundary::StressFree {
        return Err(Error::InvalidAnalysis(format!(
            "{} sensor sits on a rigid boundary",
            input.side.label()
        )));
    }
    if input.time.len() != input.difference.len() {
        return Err(Error::ShapeMismatch("sensor time and difference differ in length".into()));
    }
    if !(spec.delta > 0.0) {
        return Err(Error::InvalidVariation("delta must be positive".into()));
    }
    let p2 = spec.reference_value * spec.reference_value;
    let inv2d = 1.0 / (2.0 * spec.delta);
    let (normalizer, factor) = match mode {
        Normalization::Absolute => {
            if !(e_f > 0.0) {
                return Err(Error::InvalidAnalysis(format!("E_f = {e_f} must be positive")));
            }
            (e_f, p2 * 0.5 * input.rho / e_f)
        }
        Normalization::Relative => {
            if input.base.len() != input.time.len() {
                return Err(Error::ShapeMismatch("reference sensor record length differs".into()));
            }
            let m2 = relative_normalizer(input.time, input.base, window)?;
            (m2, p2 / m2)
        }
    };
    let series = input
        .difference
        .iter()
        .map(|d| {
            let dv = d * inv2d;
            factor * dv * dv
        })
        .collect();
    Ok(SensorInfoSeries {
        side: input.side,
        spec: *spec,
        normalization: mode,
        time: input.time.to_vec(),
        series,
        normalizer,
    })
}

/// `Σ I·dt` over the samples inside the window.
pub fn cbit_integral(series: &SensorInfoSeries, window: Window) -> Result<f64> {
    let mut it = series.time.iter().zip(&series.series).filter(|(t, _)| window.contains(**t));
    let first = it.next().ok_or_else(|| {
        Error::InvalidAnalysis(format!(
            "window [{:.4}, {:.4}] µs holds no samples",
            window.start * 1e6,
            window.end * 1e6
        ))
    })?;
    let dt = if series.time.len() > 1 {
        series.time[1] - series.time[0]
    } else {
        0.0
    };
    Ok((first.1 + it.map(|(_, v)| v).sum::<f64>()) * dt)
}

/// Reflection (left) and transmission (right) series of one example.
#[derive(Clone, Debug)]
pub struct ExampleSeries {
    pub name: String,
    pub left: SensorInfoSeries,
    pub right: SensorInfoSeries,
}

/// How raw integrals are mapped onto reported values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibration {
    pub example: String,
    pub side: Side,
    /// Reported integral the anchor maps onto.
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CbitEntry {
    pub example: String,
    pub side: Side,
    pub peak: f64,
    pub raw_integral: f64,
    /// Raw integral times the calibration factor.
    pub integral: f64,
    /// Share of this side in the example's total.
    pub percent: f64,
    pub window: Window,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CbitReport {
    pub normalization: Normalization,
    pub calibration_factor: f64,
    pub calibration: Option<Calibration>,
    pub entries: Vec<CbitEntry>,
    pub total_reflection: f64,
    pub total_transmission: f64,
    /// Example total over the reference example's total.
    pub multipliers: Vec<(String, f64)>,
    pub multiplier_reference: Option<String>,
}

impl CbitReport {
    pub fn entry(&self, example: &str, side: Side) -> Option<&CbitEntry> {
        self.entries.iter().find(|e| e.example == example && e.side == side)
    }

    pub fn example_total(&self, example: &str) -> Option<f64> {
        let l = self.entry(example, Side::Left)?;
        let r = self.entry(example, Side::Right)?;
        Some(l.integral + r.integral)
    }

    pub fn multiplier(&self, example: &str) -> Option<f64> {
        self.multipliers.iter().find(|(n, _)| n == example).map(|(_, m)| *m)
    }

    pub const CSV_HEADER: &'static str =
        "example,boundary,peak_cbits_per_m,integral_cbits_per_m,percent,window_start_us,window_end_us,normalization_mode";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for e in &self.entries {
            let _ = writeln!(
                s,
                "{},{},{:.8e},{:.8e},{:.8e},{:.4},{:.4},{}",
                e.example,
                e.side.label(),
                e.peak,
                e.integral,
                e.percent,
                e.window.start * 1e6,
                e.window.end * 1e6,
                self.normalization.label()
            );
        }
        s
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<12} {:<6} {:>14} {:>14} {:>8} {:>10}",
            "example", "side", "peak", "integral", "percent", "window_us"
        );
        for e in &self.entries {
            let _ = writeln!(
                s,
                "{:<12} {:<6} {:>14.4} {:>14.5} {:>7.1}% {:>4.1}-{:<5.1}",
                e.example,
                e.side.label(),
                e.peak,
                e.integral,
                e.percent,
                e.window.start * 1e6,
                e.window.end * 1e6
            );
        }
        let _ = writeln!(s, "total reflection    {:.5}", self.total_reflection);
        let _ = writeln!(s, "total transmission  {:.5}", self.total_transmission);
        if let Some(r) = &self.multiplier_reference {
            for (n, m) in &self.multipliers {
                let _ = writeln!(s, "multiplier {n} / {r}  {m:.1}");
            }
        }
        match &self.calibration {
            Some(c) => {
                let _ = writeln!(
                    s,
                    "integral factor {:.6e} ({} {} integral mapped to {})",
                    self.calibration_factor,
                    c.example,
                    c.side.label(),
                    c.value
                );
            }
            None => {
                let _ = writeln!(s, "integral factor 1 (raw sum of I dt)");
            }
        }
        let _ = writeln!(s, "normalization {}", self.normalization.label());
        s
    }
}

/// Peaks, integrals, splits, totals and multipliers over all examples.
pub fn cbit_report(
    examples: &[ExampleSeries],
    window: Window,
    calibration: Option<&Calibration>,
    multiplier_reference: Option<&str>,
) -> Result<CbitReport> {
    if examples.is_empty() {
        return Err(Error::MissingData("no examples for the Cbit report".into()));
    }
    let mode = examples[0].left.normalization;
    if examples
        .iter()
        .any(|e| e.left.normalization != mode || e.right.normalization != mode)
    {
        return Err(Error::InvalidAnalysis("examples use different normalisation modes".into()));
    }
    let mut raw = Vec::with_capacity(examples.len());
    for ex in examples {
        let l = cbit_integral(&ex.left, window)?;
        let r = cbit_integral(&ex.right, window)?;
        raw.push((l, r));
    }
    let factor = match calibration {
        None => 1.0,
        Some(c) => {
            let i = examples
                .iter()
                .position(|e| e.name == c.example)
                .ok_or_else(|| Error::MissingData(format!("calibration example '{}' missing", c.example)))?;
            let anchor = match c.side {
                Side::Left => raw[i].0,
                Side::Right => raw[i].1,
            };
            if !(anchor > 0.0) {
                return Err(Error::InvalidAnalysis("calibration anchor integral is zero".into()));
            }
            c.value / anchor
        }
    };
    let mut entries = Vec::new();
    let (mut tr, mut tt) = (0.0, 0.0);
    for (ex, &(l, r)) in examples.iter().zip(&raw) {
        let total = l + r;
        for (side, s, v) in [(Side::Left, &ex.left, l), (Side::Right, &ex.right, r)] {
            entries.push(CbitEntry {
                example: ex.name.clone(),
                side,
                peak: s.peak(window),
                raw_integral: v,
                integral: v * factor,
                percent: if total > 0.0 { 100.0 * v / total } else { 0.0 },
                window,
            });
        }
        tr += l * factor;
        tt += r * factor;
    }
    let multipliers = match multiplier_reference {
        None => Vec::new(),
        Some(name) => {
            let i = examples
                .iter()
                .position(|e| e.name == name)
                .ok_or_else(|| Error::MissingData(format!("multiplier reference '{name}' missing")))?;
            let base = raw[i].0 + raw[i].1;
            if !(base > 0.0) {
                return Err(Error::InvalidAnalysis("multiplier reference carries no information".into()));
            }
            examples
                .iter()
                .zip(&raw)
                .filter(|(e, _)| e.name != name)
                .map(|(e, (l, r))| (e.name.clone(), (l + r) / base))
                .collect()
        }
    };
    Ok(CbitReport {
        normalization: mode,
        calibration_factor: factor,
        calibration: calibration.cloned(),
        entries,
        total_reflection: tr,
        total_transmission: tt,
        multipliers,
        multiplier_reference: multiplier_reference.map(str::to_owned),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ParameterKind;

    fn spec() -> ParameterSpec {
        ParameterSpec::new(ParameterKind::DensityConstCp, 0, 2.0, 0.5).unwrap()
    }

    fn input<'a>(time: &'a [f64], diff: &'a [f64], base: &'a [f64]) -> SensorInput<'a> {
        SensorInput {
            side: Side::Left,
            boundary: Boundary::StressFree,
            time,
            difference: diff,
            base,
            rho: 3.0,
        }
    }

    #[test]
    fn zero_difference_gives_zero_series() {
        let t: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let z = vec![0.0; 10];
        let s = sensor_info(&input(&t, &z, &z), &spec(), 1.0, Normalization::Absolute, Window::new(0.0, 9.0)).unwrap();
        assert!(s.series.iter().all(|&x| x == 0.0));
        assert_eq!(cbit_integral(&s, Window::new(0.0, 9.0)).unwrap(), 0.0);
    }

    #[test]
    fn absolute_series_is_kinetic_term() {
        let t = [0.0, 1.0];
        let d = [1.0, -2.0];
        let s = sensor_info(&input(&t, &d, &d), &spec(), 4.0, Normalization::Absolute, Window::new(0.0, 1.0)).unwrap();
        // dv = d / (2·0.5) = d; scale P²/E_f = 1; ρ/2 = 1.5
        assert_eq!(s.series, vec![1.5, 6.0]);
        assert_eq!(s.normalizer, 4.0);
    }

    #[test]
    fn rigid_sensor_is_rejected() {
        let t = [0.0];
        let mut i = input(&t, &t, &t);
        i.boundary = Boundary::Rigid;
        assert!(sensor_info(&i, &spec(), 1.0, Normalization::Absolute, Window::new(0.0, 1.0)).is_err());
    }

    #[test]
    fn echo_scaling_absolute_vs_relative() {
        // Two echoes of amplitude 1 and ½; halving both leaves relative
        // content unchanged and cuts absolute content to a quarter.
        let t: Vec<f64> = (0..4).map(|i| i as f64).collect();
        let base = vec![1.0, 1.0, 0.5, 0.5];
        let diff: Vec<f64> = base.iter().map(|b| 0.5 * b).collect();
        let w1 = Window::new(0.0, 1.0);
        let w2 = Window::new(2.0, 3.0);
        let rel = |w| {
            let s = sensor_info(&input(&t, &diff, &base), &spec(), 1.0, Normalization::Relative, w).unwrap();
            cbit_integral(&s, w).unwrap()
        };
        assert!((rel(w1) - rel(w2)).abs() < 1e-15);
        let abs = sensor_info(&input(&t, &diff, &base), &spec(), 1.0, Normalization::Absolute, w1).unwrap();
        let r = cbit_integral(&abs, w1).unwrap() / cbit_integral(&abs, w2).unwrap();
        assert!((r - 4.0).abs() < 1e-12);
    }

    #[test]
    fn relative_mode_rejects_silent_reference() {
        let t = [0.0, 1.0];
        let z = [0.0, 0.0];
        let d = [1.0, 1.0];
        assert!(sensor_info(&input(&t, &d, &z), &spec(), 1.0, Normalization::Relative, Window::new(0.0, 1.0)).is_err());
    }

    #[test]
    fn empty_window_errors() {
        let t = [0.0, 1.0];
        let s = sensor_info(&input(&t, &t, &t), &spec(), 1.0, Normalization::Absolute, Window::new(0.0, 1.0)).unwrap();
        assert!(cbit_integral(&s, Window::new(5.0, 6.0)).is_err());
    }

    fn series(name: &str, l: f64, r: f64) -> ExampleSeries {
        let t: Vec<f64> = vec![0.0, 1.0];
        let mk = |side, v: f64| SensorInfoSeries {
            side,
            spec: spec(),
            normalization: Normalization::Absolute,
            time: t.clone(),
            series: vec![v, v],
            normalizer: 1.0,
        };
        ExampleSeries {
            name: name.into(),
            left: mk(Side::Left, l),
            right: mk(Side::Right, r),
        }
    }

    #[test]
    fn report_splits_and_multipliers() {
        let ex = vec![series("a", 3.0, 1.0), series("b", 0.1, 0.1)];
        let cal = Calibration {
            example: "a".into(),
            side: Side::Left,
            value: 12.0,
        };
        let r = cbit_report(&ex, Window::new(0.0, 1.0), Some(&cal), Some("b")).unwrap();
        assert_eq!(r.calibration_factor, 2.0);
        let a = r.entry("a", Side::Left).unwrap();
        assert_eq!(a.integral, 12.0);
        assert!((a.percent - 75.0).abs() < 1e-12);
        assert!((r.multiplier("a").unwrap() - 20.0).abs() < 1e-9);
        assert!((r.total_reflection - 12.4).abs() < 1e-9);
        let sum: f64 = ["a", "b"]
            .iter()
            .map(|n| r.entry(n, Side::Left).unwrap().percent + r.entry(n, Side::Right).unwrap().percent)
            .sum();
        assert!((sum - 200.0).abs() < 1e-9);
        assert!(r.to_csv().starts_with(CbitReport::CSV_HEADER));
        assert!(cbit_report(&ex, Window::new(0.0, 1.0), None, Some("missing")).is_err());
        assert!(cbit_report(&[], Window::new(0.0, 1.0), None, None).is_err());
    }

    #[test]
    fn plateau_and_sum_normalisation() {
        let trace = EnergyTrace {
            time: vec![0.5, 1.5, 2.5, 3.5],
            kinetic: vec![0.0; 4],
            potential: vec![0.0; 4],
            total: vec![1.0, 2.0, 3.0, 3.0],
        };
        assert_eq!(normalization_energy(&trace, 2.0, EnergyNormalization::Plateau).unwrap(), 3.0);
        assert_eq!(normalization_energy(&trace, 2.0, EnergyNormalization::ExcitationSum).unwrap(), 3.0);
        assert!(normalization_energy(&trace, 9.0, EnergyNormalization::Plateau).is_err());
    }
}
