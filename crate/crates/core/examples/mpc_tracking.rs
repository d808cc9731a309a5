//! Tracks a sigmoid lane-change path with the MPC, then avoids a stopped
//! obstacle with and without the artificial potential field.

use lanecoop::detect::LANE_WIDTH;
use lanecoop::planner::{lane_lines, track, BicycleState, Mpc, MpcConfig, RefPath, SigmoidPath, StraightPath};

fn main() -> lanecoop::Result<()> {
    let lines = lane_lines(2, 0.25);
    let s0 = BicycleState { x: 0.0, y: 0.0, psi: 0.0, v: 12.0 };
    let path = SigmoidPath::with_default_tau(0.0, 0.0, 60.0, LANE_WIDTH)?;
    let mut mpc = Mpc::new(MpcConfig::default())?;
    let run = track(&mut mpc, s0, &path, 12.0, &lines, 90, |_| Vec::new())?;
    for s in run.iter().step_by(10) {
        println!(
            "x {:6.2}  y {:5.2}  y_ref {:5.2}  v {:5.2}  steer {:+.3}",
            s.state.x,
            s.state.y,
            path.y(s.state.x),
            s.state.v,
            s.control.steer
        );
    }

    let obstacle = [40.0, 0.0];
    let reference = StraightPath { y: 0.0 };
    for w in [0.0, MpcConfig::default().w_potential] {
        let mut mpc = Mpc::new(MpcConfig { w_potential: w, ..MpcConfig::default() })?;
        let run = track(&mut mpc, s0, &reference, 12.0, &lines, 60, |_| vec![vec![obstacle]])?;
        let gap = run
            .iter()
            .map(|s| (s.state.x - obstacle[0]).hypot(s.state.y - obstacle[1]))
            .fold(f64::INFINITY, f64::min);
        println!("potential weight {w}: minimum distance to the obstacle {gap:.2} m");
    }
    Ok(())
}
