//! Runs the gap-closing merge scene in all three modes and prints the
//! lane-change timing, safety margins and a coarse trace.
//!
//! The IRL weights are fitted on cooperative-follower demonstrations first.

use lanecoop::irl::{fit_weights, FitConfig, DEFAULT_HORIZON};
use lanecoop::sim::{case_study_scene, cooperative_demos, replay, IdmConfig, Mode, ReplayConfig, ScriptedPolicy};

fn main() -> lanecoop::Result<()> {
    let demos = cooperative_demos(200, DEFAULT_HORIZON, 7, &IdmConfig::default())?;
    let (w, trace) = fit_weights(&demos, &FitConfig { max_iters: 3000, ..FitConfig::default() })?;
    println!(
        "omega {:?} after {} iterations (converged: {})",
        w.omega, trace.iterations, trace.converged
    );
    let sc = case_study_scene();
    let cfg = ReplayConfig::default();
    for mode in Mode::ALL {
        let rep = replay(&sc, mode, &mut ScriptedPolicy { lc_from: Some(19) }, Some(&w), &cfg)?;
        let f = |o: Option<f64>| o.map_or("-".to_string(), |v| format!("{v:.2}"));
        println!(
            "{mode:26} start {:>5}  commit {:>5}  capture {:>5}  completion {:>5} s  d_long {:>6}  min gap {:>5} m  jerk {:.2}  collision {}",
            f(rep.maneuver_start_s),
            f(rep.commit_s),
            f(rep.capture_s),
            f(rep.completion_time_s),
            f(rep.d_long_m),
            f(rep.min_gap_m),
            rep.max_abs_jerk,
            rep.collision
        );
        for s in rep.snapshots.iter().step_by(2) {
            let tr = s.actors.iter().find(|a| a.id == 3).expect("T-Rear in scene");
            println!("    t {:5.1}  ego ({:6.1}, {:5.2})  t-rear x {:6.1}", s.t, s.ego[0], s.ego[1], tr.x);
        }
    }
    Ok(())
}
