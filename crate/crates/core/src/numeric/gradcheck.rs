//! Central finite-difference oracle used to audit every hand-written backward pass.

use super::params::Parameters;

/// Relative error with an absolute floor so that gradients that are
/// numerically zero do not blow up the ratio.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Central difference estimate of d loss / d theta for every parameter of `params`.
pub fn finite_difference<P, F>(params: &P, mut loss: F, h: f64) -> Vec<f64>
where
    P: Parameters + Clone,
    F: FnMut(&P) -> f64,
{
    let base = params.to_flat();
    let mut probe = params.clone();
    let mut out = Vec::with_capacity(base.len());
    let mut work = base.clone();
    for i in 0..base.len() {
        work[i] = base[i] + h;
        probe.set_flat(&work);
        let up = loss(&probe);
        work[i] = base[i] - h;
        probe.set_flat(&work);
        let down = loss(&probe);
        work[i] = base[i];
        out.push((up - down) / (2.0 * h));
    }
    out
}

/// Largest relative error between `analytic` and the finite-difference estimate.
pub fn max_rel_error<P, F>(params: &P, analytic: &P, loss: F, h: f64) -> f64
where
    P: Parameters + Clone,
    F: FnMut(&P) -> f64,
{
    let fd = finite_difference(params, loss, h);
    analytic
        .to_flat()
        .iter()
        .zip(&fd)
        .map(|(&a, &n)| rel_err(a, n))
        .fold(0.0, f64::max)
}

/// Panics with the offending index when any component exceeds `tol`.
pub fn check_gradient<P, F>(params: &P, analytic: &P, loss: F, h: f64, tol: f64)
where
    P: Parameters + Clone,
    F: FnMut(&P) -> f64,
{
    let fd = finite_difference(params, loss, h);
    for (i, (&a, &n)) in analytic.to_flat().iter().zip(&fd).enumerate() {
        let e = rel_err(a, n);
        assert!(e <= tol, "gradient component {i}: analytic {a:e} vs numeric {n:e} (rel err {e:e})");
    }
}

/// Like [`check_gradient`] for piecewise-smooth losses (ReLU networks): a
/// component that disagrees at step `h` is re-probed at `h/10` and `h/100`,
/// since a kink closer than `h` biases the central difference while a wrong
/// analytic gradient disagrees at every step.
pub fn check_gradient_piecewise<P, F>(params: &P, analytic: &P, mut loss: F, h: f64, tol: f64)
where
    P: Parameters + Clone,
    F: FnMut(&P) -> f64,
{
    let an = analytic.to_flat();
    let base = params.to_flat();
    let fd = finite_difference(params, &mut loss, h);
    let mut probe = params.clone();
    let mut work = base.clone();
    for (i, (&a, &n)) in an.iter().zip(&fd).enumerate() {
        if rel_err(a, n) <= tol {
            continue;
        }
        let mut best = n;
        for hh in [h / 10.0, h / 100.0] {
            work[i] = base[i] + hh;
            probe.set_flat(&work);
            let up = loss(&probe);
            work[i] = base[i] - hh;
            probe.set_flat(&work);
            let down = loss(&probe);
            work[i] = base[i];
            best = (up - down) / (2.0 * hh);
            if rel_err(a, best) <= tol {
                break;
            }
        }
        let e = rel_err(a, best);
        assert!(e <= tol, "gradient component {i}: analytic {a:e} vs numeric {best:e} (rel err {e:e})");
    }
}
