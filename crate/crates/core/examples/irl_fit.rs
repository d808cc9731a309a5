//! Recovers known Max-Ent reward weights from generated demonstrations and
//! predicts a T-Rear trajectory behind a merging vehicle.

use lanecoop::irl::{
    feature_expectations, fit_weights, predict, sample_demos, CandidateSet, FeatureNorm, FitConfig, LongState,
    DEFAULT_HORIZON,
};
use lanecoop::rng;

fn main() -> lanecoop::Result<()> {
    let omega_star = [1.0, -2.0, -0.5];
    let mut r = rng::seeded(3);
    let pilot = sample_demos(&[0.0; 3], &FeatureNorm::identity(DEFAULT_HORIZON), 50, &mut r)?;
    let sets: Vec<CandidateSet> = pilot.iter().map(|d| d.candidates.clone()).collect();
    let norm = FeatureNorm::fit(&sets)?;
    let demos = sample_demos(&omega_star, &norm, 400, &mut r)?;
    let (w, trace) = fit_weights(&demos, &FitConfig { max_iters: 20_000, ..FitConfig::default() })?;
    let (emp, exp) = feature_expectations(&demos, &w);
    println!("true omega {omega_star:?}");
    println!("fitted     {:?} ({} iterations, converged {})", w.omega, trace.iterations, trace.converged);
    println!("feature gap {:?}", [emp[0] - exp[0], emp[1] - exp[1], emp[2] - exp[2]]);

    // A merger 12 m ahead at 10 m/s; the follower starts at 13 m/s.
    let lead_x: Vec<f64> = (0..=DEFAULT_HORIZON).map(|k| 12.0 + 10.0 * 0.1 * k as f64).collect();
    let p = predict(LongState { x: 0.0, v: 13.0, a: 0.0 }, &lead_x, &w, DEFAULT_HORIZON)?;
    let e = &p.expected;
    println!(
        "predicted follower: x {:.1} m, v {:.2} m/s after {:.1} s (most likely candidate {})",
        e.x[DEFAULT_HORIZON],
        e.v[DEFAULT_HORIZON],
        DEFAULT_HORIZON as f64 * 0.1,
        p.argmax
    );
    Ok(())
}
