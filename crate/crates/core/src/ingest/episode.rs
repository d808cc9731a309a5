use serde::{Deserialize, Serialize};

use super::trajectory::{Trajectory, MARGIN_FRAMES};
use crate::detect::{LaneChangeDirection, LcEvent, DT};

/// Maximum distance behind the ego at which a target-lane follower counts as the T-Rear vehicle.
pub const NEIGHBOR_RANGE: f64 = 150.0;

/// An ego lane change together with the two vehicles that matter for it:
/// the leader in the original lane and the follower in the target lane.
/// Neighbour identities are fixed at the lane-change start frame and their
/// trajectories are resampled onto the ego's frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub id: u32,
    pub ego: Trajectory,
    pub lead: Trajectory,
    pub t_rear: Trajectory,
    pub lc_start_idx: usize,
    pub lc_end_idx: usize,
    pub direction: LaneChangeDirection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    TooShort,
    ImplausibleSpeed,
    NoEventDetected,
    InsufficientMargin,
    NoLead,
    NoTargetRear,
}

/// Resamples `nb` onto the ego's frames, extrapolating at constant velocity
/// outside the neighbour's recorded range.
fn resample(nb: &Trajectory, ego: &Trajectory) -> Trajectory {
    let n = ego.len();
    let mut out = Trajectory {
        vehicle_id: nb.vehicle_id,
        v_class: nb.v_class,
        frame0: ego.frame0,
        t: ego.t.clone(),
        x_long: Vec::with_capacity(n),
        y_lat: Vec::with_capacity(n),
        v: Vec::with_capacity(n),
        a: Vec::with_capacity(n),
        lane_id: Vec::with_capacity(n),
    };
    for i in 0..n {
        let f = ego.frame0 + i as u64;
        let (j, extra) = if f < nb.frame0 {
            (0, -((nb.frame0 - f) as f64))
        } else if f > nb.last_frame() {
            (nb.len() - 1, (f - nb.last_frame()) as f64)
        } else {
            ((f - nb.frame0) as usize, 0.0)
        };
        out.x_long.push(nb.x_long[j] + nb.v[j] * extra * DT);
        out.y_lat.push(nb.y_lat[j]);
        out.v.push(nb.v[j]);
        out.a.push(if extra == 0.0 { nb.a[j] } else { 0.0 });
        out.lane_id.push(nb.lane_id[j]);
    }
    out
}

/// Finds the leader (ahead, original lane) and T-Rear vehicle (behind, target
/// lane, within [`NEIGHBOR_RANGE`]) at the lane-change start frame. Ties on
/// distance go to the vehicle listed first in `all`.
pub fn attach_neighbors(ego: &Trajectory, all: &[Trajectory], event: &LcEvent) -> Result<Episode, DropReason> {
    if event.start_idx < MARGIN_FRAMES || ego.len() - 1 - event.end_idx < MARGIN_FRAMES {
        return Err(DropReason::InsufficientMargin);
    }
    let source_lane = ego.lane_id[event.start_idx];
    let target_lane = ego.lane_id[ego.len() - 1];
    let frame = ego.frame0 + event.start_idx as u64;
    let x_ego = ego.x_long[event.start_idx];

    let mut lead: Option<(f64, &Trajectory)> = None;
    let mut rear: Option<(f64, &Trajectory)> = None;
    for other in all {
        if other.vehicle_id == ego.vehicle_id {
            continue;
        }
        let Some(j) = other.index_of_frame(frame) else {
            continue;
        };
        let gap = other.x_long[j] - x_ego;
        if other.lane_id[j] == source_lane && gap > 0.0 && lead.is_none_or(|(g, _)| gap < g) {
            lead = Some((gap, other));
        }
        if other.lane_id[j] == target_lane
            && gap < 0.0
            && -gap <= NEIGHBOR_RANGE
            && rear.is_none_or(|(g, _)| -gap < g)
        {
            rear = Some((-gap, other));
        }
    }
    let (_, lead) = lead.ok_or(DropReason::NoLead)?;
    let (_, rear) = rear.ok_or(DropReason::NoTargetRear)?;
    Ok(Episode {
        id: ego.vehicle_id,
        ego: ego.clone(),
        lead: resample(lead, ego),
        t_rear: resample(rear, ego),
        lc_start_idx: event.start_idx,
        lc_end_idx: event.end_idx,
        direction: event.direction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::trajectory::tests::straight;

    fn ego_and_event() -> (Trajectory, LcEvent) {
        let mut ego = straight(1, 300, 200.0, 10.0, 1.8, 2);
        for l in &mut ego.lane_id[150..] {
            *l = 3;
        }
        let ev = LcEvent {
            start_idx: 120,
            end_idx: 170,
            peak_idx: 145,
            duration: 5.0,
            direction: LaneChangeDirection::Right,
        };
        (ego, ev)
    }

    #[test]
    fn nearest_neighbours_are_chosen() {
        let (ego, ev) = ego_and_event();
        let all = vec![
            ego.clone(),
            straight(2, 300, 240.0, 10.0, 1.8, 2),
            straight(3, 300, 225.0, 10.0, 1.8, 2),
            straight(4, 300, 180.0, 10.0, 5.5, 3),
            straight(5, 300, 150.0, 10.0, 5.5, 3),
            straight(6, 300, 205.0, 10.0, 5.5, 3),
        ];
        let ep = attach_neighbors(&ego, &all, &ev).unwrap();
        assert_eq!(ep.lead.vehicle_id, 3);
        assert_eq!(ep.t_rear.vehicle_id, 4);
        assert_eq!(ep.lead.len(), ego.len());
    }

    #[test]
    fn distant_rear_drops_episode() {
        let (ego, ev) = ego_and_event();
        let all = vec![
            straight(2, 300, 240.0, 10.0, 1.8, 2),
            straight(4, 300, 0.0, 10.0, 5.5, 3),
        ];
        assert_eq!(attach_neighbors(&ego, &all, &ev), Err(DropReason::NoTargetRear));
    }

    #[test]
    fn identity_fixed_at_start_frame() {
        let (ego, ev) = ego_and_event();
        // Vehicle 7 is the nearest follower at the start frame, then drops far back;
        // vehicle 8 becomes nearest later. The episode keeps vehicle 7.
        let mut v7 = straight(7, 300, 190.0, 10.0, 5.5, 3);
        for i in 130..300 {
            v7.x_long[i] = 100.0;
        }
        let v8 = straight(8, 300, 170.0, 10.0, 5.5, 3);
        let all = vec![straight(2, 300, 240.0, 10.0, 1.8, 2), v7, v8];
        let ep = attach_neighbors(&ego, &all, &ev).unwrap();
        assert_eq!(ep.t_rear.vehicle_id, 7);
    }

    #[test]
    fn resampling_extrapolates_at_constant_speed() {
        let (ego, ev) = ego_and_event();
        let mut short_lead = straight(2, 100, 340.0, 10.0, 1.8, 2);
        short_lead.frame0 = 100;
        let all = vec![short_lead, straight(4, 300, 180.0, 10.0, 5.5, 3)];
        let ep = attach_neighbors(&ego, &all, &ev).unwrap();
        // Frame 0 is 100 frames before the lead's first sample.
        assert!((ep.lead.x_long[0] - (340.0 - 100.0)).abs() < 1e-9);
        assert!((ep.lead.x_long[299] - (340.0 + 199.0)).abs() < 1e-9);
    }
}
