//! Trajectory smoothing filters.

use super::matrix::{solve, Matrix};
use crate::error::{Error, Result};

/// Least-squares weights that, applied to samples at `positions`, evaluate the
/// best-fit polynomial of degree `order` at `at`.
fn poly_eval_weights(positions: &[f64], order: usize, at: f64) -> Result<Vec<f64>> {
    let p = order + 1;
    let mut ata = Matrix::zeros(p, p);
    for &z in positions {
        let pow: Vec<f64> = (0..p).map(|k| z.powi(k as i32)).collect();
        ata.add_outer(1.0, &pow, &pow);
    }
    let e: Vec<f64> = (0..p).map(|k| at.powi(k as i32)).collect();
    let c = solve(&ata, &e)?;
    Ok(positions
        .iter()
        .map(|&z| (0..p).map(|k| c[k] * z.powi(k as i32)).sum())
        .collect())
}

/// Savitzky–Golay smoothing. Interior points use the centred window; the first
/// and last `window / 2` points are evaluated from a single polynomial fitted to
/// the first (resp. last) `window` samples.
pub fn savgol_filter(signal: &[f64], window: usize, poly_order: usize) -> Result<Vec<f64>> {
    if window % 2 == 0 {
        return Err(Error::config(format!("Savitzky-Golay window must be odd, got {window}")));
    }
    if poly_order >= window {
        return Err(Error::config(format!(
            "Savitzky-Golay order {poly_order} must be below window {window}"
        )));
    }
    let n = signal.len();
    if window > n {
        return Err(Error::config(format!(
            "Savitzky-Golay window {window} exceeds signal length {n}"
        )));
    }
    let half = window / 2;
    let centred: Vec<f64> = (0..window).map(|j| j as f64 - half as f64).collect();
    let kernel = poly_eval_weights(&centred, poly_order, 0.0)?;
    let mut out = vec![0.0; n];
    for i in half..n - half {
        out[i] = kernel
            .iter()
            .zip(&signal[i - half..=i + half])
            .map(|(w, x)| w * x)
            .sum();
    }
    for i in 0..half {
        let w = poly_eval_weights(&centred, poly_order, i as f64 - half as f64)?;
        out[i] = w.iter().zip(&signal[..window]).map(|(a, b)| a * b).sum();
        let tail = &signal[n - window..];
        // Mirror position: sample n-1-i sits at offset half-i right of the last centre.
        let wt = poly_eval_weights(&centred, poly_order, (half - i) as f64)?;
        out[n - 1 - i] = wt.iter().zip(tail).map(|(a, b)| a * b).sum();
    }
    Ok(out)
}

/// Centred rolling median. Near the ends the window shrinks symmetrically so it
/// stays centred on the output sample. Even-sized windows average the two
/// middle values.
pub fn rolling_median(signal: &[f64], window: usize) -> Vec<f64> {
    let n = signal.len();
    let window = window.max(1);
    let before = window / 2;
    let after = window - 1 - before;
    let mut sorted: Vec<f64> = Vec::with_capacity(window);
    let mut out = Vec::with_capacity(n);
    let (mut lo, mut hi) = (0usize, 0usize); // current window is signal[lo..hi]
    for i in 0..n {
        let edge = i.min(n - 1 - i);
        let want_lo = i - before.min(edge);
        let want_hi = i + after.min(edge) + 1;
        while hi < want_hi {
            let x = signal[hi];
            let pos = sorted.partition_point(|&s| s.total_cmp(&x).is_lt());
            sorted.insert(pos, x);
            hi += 1;
        }
        while lo < want_lo {
            let x = signal[lo];
            let pos = sorted.partition_point(|&s| s.total_cmp(&x).is_lt());
            sorted.remove(pos);
            lo += 1;
        }
        let m = sorted.len();
        out.push(if m % 2 == 1 {
            sorted[m / 2]
        } else {
            0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn brute_median(signal: &[f64], window: usize) -> Vec<f64> {
        let n = signal.len() as isize;
        let before = (window / 2) as isize;
        let after = window as isize - 1 - before;
        (0..n)
            .map(|i| {
                let edge = i.min(n - 1 - i);
                let mut w: Vec<f64> = (i - before.min(edge)..=i + after.min(edge))
                    .map(|j| signal[j as usize])
                    .collect();
                w.sort_by(f64::total_cmp);
                let m = w.len();
                if m % 2 == 1 {
                    w[m / 2]
                } else {
                    (w[m / 2 - 1] + w[m / 2]) / 2.0
                }
            })
            .collect()
    }

    #[test]
    fn savgol_reproduces_cubic() {
        let x: Vec<f64> = (0..40)
            .map(|i| {
                let t = i as f64 * 0.1;
                0.3 * t * t * t - t * t + 2.0 * t - 5.0
            })
            .collect();
        let y = savgol_filter(&x, 11, 3).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn savgol_keeps_constant() {
        let y = savgol_filter(&[4.2; 15], 11, 3).unwrap();
        assert!(y.iter().all(|v| (v - 4.2).abs() < 1e-12));
    }

    #[test]
    fn savgol_reduces_noise_variance() {
        let normal = Normal::new(0.0, 1.0).unwrap();
        for seed in 0..100 {
            let mut rng = seeded(seed);
            let x: Vec<f64> = (0..200).map(|_| normal.sample(&mut rng)).collect();
            let y = savgol_filter(&x, 11, 3).unwrap();
            let var = |s: &[f64]| {
                let m = s.iter().sum::<f64>() / s.len() as f64;
                s.iter().map(|v| (v - m).powi(2)).sum::<f64>() / s.len() as f64
            };
            assert!(var(&y) < var(&x), "seed {seed}");
        }
    }

    #[test]
    fn savgol_argument_errors() {
        assert!(matches!(savgol_filter(&[0.0; 5], 11, 3), Err(Error::Config(_))));
        assert!(matches!(savgol_filter(&[0.0; 20], 10, 3), Err(Error::Config(_))));
        assert!(matches!(savgol_filter(&[0.0; 20], 5, 5), Err(Error::Config(_))));
    }

    #[test]
    fn median_monotone_unchanged() {
        let x: Vec<f64> = (0..30).map(|i| (i as f64).sqrt()).collect();
        assert_eq!(rolling_median(&x, 5), x);
    }

    #[test]
    fn median_removes_spike() {
        let mut x = vec![1.0; 20];
        x[10] = 50.0;
        assert!(rolling_median(&x, 5).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn median_matches_brute_force() {
        let mut rng = seeded(3);
        for window in [1, 2, 4, 5, 11, 51] {
            let x: Vec<f64> = (0..120).map(|_| rng.random_range(-5.0..5.0)).collect();
            assert_eq!(rolling_median(&x, window), brute_median(&x, window));
        }
    }
}
