use crate::error::{Error, Result};

/// Spatially integrated quantities per level.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BalanceTrace {
    pub time: Vec<f64>,
    pub i_kin: Vec<f64>,
    pub i_pot: Vec<f64>,
    pub i_total: Vec<f64>,
    /// Integral of the net source over the whole model.
    pub source_total: Vec<f64>,
    pub q_f: Vec<f64>,
    pub q_v0: Vec<f64>,
    pub q_v: Vec<f64>,
    pub q_t0: Vec<f64>,
    pub q_t: Vec<f64>,
    pub boundaries: Vec<BoundaryTrace>,
}

/// Net source integrated over a few cells around one interface.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryTrace {
    pub label: String,
    pub first_cell: usize,
    pub end_cell: usize,
    pub source: Vec<f64>,
}

impl BoundaryTrace {
    /// Time integral of the source trace up to each level.
    pub fn cumulative(&self, dt: f64) -> Vec<f64> {
        cumulative(&self.source, dt)
    }

    pub fn integral(&self, dt: f64) -> f64 {
        self.source.iter().sum::<f64>() * dt
    }
}

pub fn cumulative(series: &[f64], dt: f64) -> Vec<f64> {
    let mut acc = 0.0;
    series
        .iter()
        .map(|x| {
            acc += x * dt;
            acc
        })
        .collect()
}

impl BalanceTrace {
    pub fn boundary(&self, label: &str) -> Option<&BoundaryTrace> {
        self.boundaries.iter().find(|b| b.label == label)
    }

    /// Mean total over `[t0, t1]`.
    pub fn mean_total(&self, t0: f64, t1: f64) -> Option<f64> {
        mean_over(&self.time, &self.i_total, t0, t1)
    }
}

pub(crate) fn mean_over(time: &[f64], values: &[f64], t0: f64, t1: f64) -> Option<f64> {
    let (mut s, mut c) = (0.0, 0usize);
    for (t, v) in time.iter().zip(values) {
        if *t >= t0 && *t <= t1 {
            s += v;
            c += 1;
        }
    }
    (c > 0).then(|| s / c as f64)
}

/// Self-interference figures for one interaction window.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowReport {
    pub window: (f64, f64),
    /// Largest departure from equipartition, `max |kin − pot| / 2`.
    pub component_excursion: f64,
    /// Largest non-monotone excursion of the total.
    pub total_excursion: f64,
    /// Correlation of the kinetic and potential components after removing
    /// their running means.
    pub phase_correlation: f64,
}

impl WindowReport {
    pub fn ratio(&self) -> f64 {
        if self.component_excursion > 0.0 {
            self.total_excursion / self.component_excursion
        } else {
            0.0
        }
    }
}

/// Compare kinetic and potential excursions with the total inside each
/// window.
///
/// The total may legitimately ramp through a window when sources act, so
/// its excursion is measured against its running envelope in the window's
/// net direction rather than against a constant. The phase is judged on
/// what remains of each component after subtracting its centred running
/// mean over `smoothing` seconds, so slow growth from sources does not
/// count as an in-phase excursion.
pub fn self_interference_check(
    time: &[f64],
    kin: &[f64],
    pot: &[f64],
    windows: &[(f64, f64)],
    smoothing: f64,
) -> Result<Vec<WindowReport>> {
    if time.len() != kin.len() || kin.len() != pot.len() {
        return Err(Error::ShapeMismatch("trace components differ in length".into()));
    }
    if !(smoothing > 0.0) {
        return Err(Error::InvalidAnalysis(format!("smoothing span {smoothing} must be positive")));
    }
    let (hk, hp) = (high_pass(time, kin, smoothing), high_pass(time, pot, smoothing));
    let mut out = Vec::with_capacity(windows.len());
    for &(t0, t1) in windows {
        let idx: Vec<usize> = (0..time.len()).filter(|&i| time[i] >= t0 && time[i] <= t1).collect();
        if idx.len() < 3 {
            return Err(Error::InvalidAnalysis(format!("window [{t0}, {t1}] holds fewer than 3 samples")));
        }
        let total: Vec<f64> = idx.iter().map(|&i| kin[i] + pot[i]).collect();
        let component_excursion = idx.iter().map(|&i| 0.5 * (kin[i] - pot[i]).abs()).fold(0.0, f64::max);

        let rising = total[total.len() - 1] >= total[0];
        let mut envelope = total[0];
        let mut total_excursion = 0.0f64;
        for &x in &total {
            envelope = if rising { envelope.max(x) } else { envelope.min(x) };
            total_excursion = total_excursion.max((x - envelope).abs());
        }

        let dk: Vec<f64> = idx.iter().map(|&i| hk[i]).collect();
        let dp: Vec<f64> = idx.iter().map(|&i| hp[i]).collect();
        out.push(WindowReport {
            window: (t0, t1),
            component_excursion,
            total_excursion,
            phase_correlation: correlation(&dk, &dp),
        });
    }
    Ok(out)
}

/// `s` minus its running mean over `[t − span/2, t + span/2]`.
fn high_pass(time: &[f64], s: &[f64], span: f64) -> Vec<f64> {
    let mut prefix = Vec::with_capacity(s.len() + 1);
    prefix.push(0.0);
    for x in s {
        prefix.push(prefix.last().unwrap() + x);
    }
    let (mut lo, mut hi) = (0usize, 0usize);
    time.iter()
        .enumerate()
        .map(|(i, &t)| {
            while time[lo] < t - 0.5 * span {
                lo += 1;
            }
            while hi < time.len() && time[hi] <= t + 0.5 * span {
                hi += 1;
            }
            s[i] - (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_opposite_excursions_cancel() {
        let time: Vec<f64> = (0..200).map(|i| i as f64 * 0.01).collect();
        let bump: Vec<f64> = time.iter().map(|t| (-(t - 1.0f64).powi(2) / 0.02).exp()).collect();
        let kin: Vec<f64> = bump.iter().map(|b| 5.0 + b).collect();
        let pot: Vec<f64> = bump.iter().map(|b| 5.0 - b).collect();
        let r = self_interference_check(&time, &kin, &pot, &[(0.5, 1.5)], 0.5).unwrap();
        assert!((r[0].component_excursion - 1.0).abs() < 1e-3);
        assert!(r[0].total_excursion < 1e-12);
        assert!(r[0].phase_correlation < -0.999);
        assert!(r[0].ratio() < 1e-12);
    }

    #[test]
    fn ramping_total_is_not_an_excursion() {
        let time: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let kin = time.clone();
        let pot = kin.clone();
        let r = self_interference_check(&time, &kin, &pot, &[(10.0, 60.0)], 5.0).unwrap();
        assert_eq!(r[0].total_excursion, 0.0);
        assert_eq!(r[0].component_excursion, 0.0);
    }

    #[test]
    fn flat_components_outside_windows() {
        let time: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let kin = vec![2.0; 50];
        let r = self_interference_check(&time, &kin, &kin, &[(0.0, 49.0)], 5.0).unwrap();
        assert_eq!(r[0].component_excursion, 0.0);
        assert!(self_interference_check(&time, &kin, &kin, &[(100.0, 200.0)], 5.0).is_err());
        assert!(self_interference_check(&time, &kin, &kin, &[(0.0, 49.0)], 0.0).is_err());
    }

    #[test]
    fn common_growth_is_not_in_phase() {
        // Both components ramp up together while a fast opposite ripple
        // rides on them.
        let time: Vec<f64> = (0..2000).map(|i| i as f64 * 0.001).collect();
        let ramp = |t: f64| 1.0 / (1.0 + (-(t - 1.0) / 0.4).exp());
        let ripple = |t: f64| 0.05 * (-(t - 1.0f64).powi(2) / 0.05).exp() * (2.0 * std::f64::consts::PI * t / 0.25).sin();
        let kin: Vec<f64> = time.iter().map(|&t| ramp(t) + ripple(t)).collect();
        let pot: Vec<f64> = time.iter().map(|&t| ramp(t) - ripple(t)).collect();
        let r = self_interference_check(&time, &kin, &pot, &[(0.6, 1.4)], 0.5).unwrap();
        assert!(r[0].phase_correlation < -0.9, "{}", r[0].phase_correlation);
        assert!(r[0].ratio() < 1e-9);
    }

    #[test]
    fn cumulative_sums() {
        assert_eq!(cumulative(&[1.0, 2.0, 3.0], 0.5), vec![0.5, 1.5, 3.0]);
    }
}
