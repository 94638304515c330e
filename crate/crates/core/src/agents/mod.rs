//! Robot behaviors. Ground robots plan over a shared traversability belief;
//! the aerial robot maps from above and carries messages between them.

pub mod belief;
pub mod planner;
pub mod uav;
pub mod ugv;

pub use belief::{merge_inbound, BeliefCell, BeliefMap};
pub use planner::{costs_to, path_cost, plan_path, step_cost, Plan, PlanError, MIN_MULTIPLIER};
pub use uav::{lawnmower, reveal_footprint, uav_tick, UavMode, UavParams, UavPolicy, UavState};
pub use ugv::{ugv_tick, Claim, UgvParams, UgvState, UgvStatus};
