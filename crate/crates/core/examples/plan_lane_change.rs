//! Plans the case-study lane change: IRL prediction of the target-lane
//! follower, the sigmoid reference it implies and the tracked trajectory.

use lanecoop::sim::{case_study_scene, cooperative_demos, plan_lane_change, ReplayConfig};
use lanecoop::irl::{fit_weights, FitConfig};

fn main() -> lanecoop::Result<()> {
    let cfg = ReplayConfig::default();
    let demos = cooperative_demos(200, cfg.horizon, 42, &cfg.idm)?;
    let (w, _) = fit_weights(&demos, &FitConfig::default())?;
    let sc = case_study_scene();
    for (name, omega) in [("IRL prediction", Some(&w)), ("IDM prediction", None)] {
        let plan = plan_lane_change(&sc, omega, &cfg)?;
        let last = plan.steps.last().map(|s| s.state);
        println!(
            "{name}: d_long {:.1} m{}, tau {:.3}; {} tracked steps, final (x {:.1}, y {:.2})",
            plan.d_long,
            if plan.d_long_fallback { " (speed fallback)" } else { "" },
            plan.path.tau,
            plan.steps.len(),
            last.map_or(0.0, |s| s.x),
            last.map_or(0.0, |s| s.y)
        );
    }
    Ok(())
}
