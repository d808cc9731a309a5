//! Detects a single noisy sigmoid lane change and compares the boundaries
//! with the ground truth.

use lanecoop::detect::{detect_event, DetectConfig, DT, LANE_WIDTH};
use lanecoop::rng;
use rand_distr::{Distribution, Normal};

fn main() -> lanecoop::Result<()> {
    let (mid, dur) = (20.0, 5.0);
    let k = 2.0 * 99f64.ln() / dur;
    let noise = Normal::new(0.0, 0.05).unwrap();
    let mut r = rng::seeded(1);
    let y: Vec<f64> = (0..400)
        .map(|i| {
            let t = i as f64 * DT;
            LANE_WIDTH / 2.0 + LANE_WIDTH / (1.0 + (-k * (t - mid)).exp()) + noise.sample(&mut r)
        })
        .collect();
    match detect_event(&y, &DetectConfig::default())? {
        Some(e) => println!(
            "{:?} change: start {:.1} s (true {:.1}), end {:.1} s (true {:.1}), peak {:.1} s, duration {:.2} s",
            e.direction,
            e.start_idx as f64 * DT,
            mid - dur / 2.0,
            e.end_idx as f64 * DT,
            mid + dur / 2.0,
            e.peak_idx as f64 * DT,
            e.duration
        ),
        None => println!("no lane change detected"),
    }
    Ok(())
}
