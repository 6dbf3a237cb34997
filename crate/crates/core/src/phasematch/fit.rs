//! Least-squares Gaussian fit (Levenberg–Marquardt) for unimodal curves.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub amplitude: f64,
    pub center: f64,
    pub sigma: f64,
    /// Root-mean-square residual relative to the amplitude.
    pub relative_rms: f64,
    pub iterations: usize,
}

impl GaussianFit {
    pub fn fwhm(&self) -> f64 {
        2.0 * (2.0 * std::f64::consts::LN_2).sqrt() * self.sigma
    }

    pub fn eval(&self, x: f64) -> f64 {
        let z = (x - self.center) / self.sigma;
        self.amplitude * (-0.5 * z * z).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitFailure {
    pub reason: String,
    pub relative_rms: f64,
}

/// Number of separated local maxima above half of the global maximum.
fn significant_peaks(y: &[f64]) -> usize {
    let max = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let half = 0.5 * max;
    let mut peaks = 0;
    let mut above = false;
    for &v in y {
        if v >= half && !above {
            peaks += 1;
        }
        above = v >= half;
    }
    peaks
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let factor = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Fits `A·exp(−(x−μ)²/2σ²)` to the samples.
pub fn fit_gaussian(x: &[f64], y: &[f64]) -> Result<GaussianFit, FitFailure> {
    let fail = |reason: &str| FitFailure {
        reason: reason.into(),
        relative_rms: f64::NAN,
    };
    if x.len() != y.len() || x.len() < 4 {
        return Err(fail("need at least four samples"));
    }
    let (imax, &ymax) = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    if !(ymax > 0.0) {
        return Err(fail("no positive signal"));
    }
    if significant_peaks(y) > 1 {
        return Err(fail("data is not unimodal"));
    }

    // Work in units centred on the grid and scaled by its span for conditioning.
    let x0 = x[imax];
    let scale = (x[x.len() - 1] - x[0]).abs().max(f64::MIN_POSITIVE);
    let u: Vec<f64> = x.iter().map(|v| (v - x0) / scale).collect();
    let above: Vec<f64> = u
        .iter()
        .zip(y)
        .filter(|(_, &v)| v >= 0.5 * ymax)
        .map(|(&ui, _)| ui)
        .collect();
    let width = above.last().unwrap() - above.first().unwrap();
    let mut p = [ymax, 0.0, (width / 2.3548).max(1.0 / x.len() as f64)];

    let sse = |p: &[f64; 3]| -> f64 {
        u.iter()
            .zip(y)
            .map(|(&ui, &yi)| {
                let z = (ui - p[1]) / p[2];
                let r = yi - p[0] * (-0.5 * z * z).exp();
                r * r
            })
            .sum()
    };
    let mut cost = sse(&p);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    for iter in 1..=500 {
        iterations = iter;
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for (&ui, &yi) in u.iter().zip(y) {
            let z = (ui - p[1]) / p[2];
            let g = (-0.5 * z * z).exp();
            let r = yi - p[0] * g;
            let jac = [g, p[0] * g * z / p[2], p[0] * g * z * z / p[2]];
            for i in 0..3 {
                jtr[i] += jac[i] * r;
                for k in 0..3 {
                    jtj[i][k] += jac[i] * jac[k];
                }
            }
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut a = jtj;
            for (i, row) in a.iter_mut().enumerate() {
                row[i] += lambda * jtj[i][i].max(1e-300);
            }
            let Some(step) = solve3(a, jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [p[0] + step[0], p[1] + step[1], (p[2] + step[2]).abs()];
            let trial_cost = sse(&trial);
            if trial_cost.is_finite() && trial_cost <= cost {
                let rel = (cost - trial_cost) / cost.max(f64::MIN_POSITIVE);
                p = trial;
                cost = trial_cost;
                lambda = (lambda * 0.1).max(1e-12);
                improved = true;
                if rel < 1e-14 {
                    lambda = 1e12;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved || lambda >= 1e12 {
            break;
        }
    }

    let relative_rms = (cost / x.len() as f64).sqrt() / p[0].abs();
    if !(p[0] > 0.0 && p[2] > 0.0) || !relative_rms.is_finite() {
        return Err(FitFailure {
            reason: "fit diverged".into(),
            relative_rms,
        });
    }
    Ok(GaussianFit {
        amplitude: p[0],
        center: x0 + p[1] * scale,
        sigma: p[2] * scale,
        relative_rms,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_gaussian() {
        let x: Vec<f64> = (0..201).map(|i| 790e-9 + i as f64 * 0.01e-9).collect();
        let truth = GaussianFit {
            amplitude: 3.5,
            center: 790.93e-9,
            sigma: 0.21e-9,
            relative_rms: 0.0,
            iterations: 0,
        };
        let y: Vec<f64> = x.iter().map(|&v| truth.eval(v)).collect();
        let fit = fit_gaussian(&x, &y).unwrap();
        assert!((fit.center - truth.center).abs() < 1e-15);
        assert!((fit.sigma / truth.sigma - 1.0).abs() < 1e-9);
        assert!((fit.amplitude / 3.5 - 1.0).abs() < 1e-9);
        assert!(fit.relative_rms < 1e-9);
    }

    #[test]
    fn symmetric_data_centres_on_grid_argmax() {
        // sinc² lobe sampled symmetrically about the 50th point.
        let x: Vec<f64> = (0..101).map(|i| i as f64).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&v| {
                let a = (v - 50.0) / 12.0;
                if a == 0.0 { 1.0 } else { (a.sin() / a).powi(2) }
            })
            .collect();
        let fit = fit_gaussian(&x, &y).unwrap();
        assert!((fit.center - 50.0).abs() < 1e-9, "{}", fit.center);
        assert!(fit.relative_rms > 0.0);
    }

    #[test]
    fn bimodal_data_is_rejected() {
        let x: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&v| (-(v - 25.0f64).powi(2) / 20.0).exp() + (-(v - 75.0f64).powi(2) / 20.0).exp())
            .collect();
        let err = fit_gaussian(&x, &y).unwrap_err();
        assert!(err.reason.contains("unimodal"));
    }
}
