//! Closed-loop evaluation: IDM/MOBIL baseline, replay scenes, run reports.

pub mod idm;
pub mod replay;
pub mod report;
pub mod scenario;

pub use idm::{idm_accel, mobil_decide, Car, IdmConfig, MobilConfig, MobilContext, MobilDecision};
pub use replay::{
    plan_lane_change, replay, GapRulePolicy, PlanOutput, LaneChangePolicy, LearnedPolicy, Mode, Observation, PolicyDecision, ReplayConfig,
    RunReport, ScriptedPolicy,
};
pub use scenario::{blocked_scene, case_study_scene, open_gap_scene, cooperative_demos, scenario_from_episode, ActorTrack, Scenario};
