//! Quasi-static block world: tasks, rendering, pick-and-place, success metrics, the
//! scripted expert and demonstration recording.
//!
//! Blocks never topple or slide. A placed block rests on the highest block under its
//! footprint; anything left interpenetrating or floating marks the world `unstable`.

mod block;
mod episode;
mod oracle;
mod task;
mod world;

pub use block::{BlockKind, BlockState, Footprint, OVERLAP_TOL};
pub use episode::{record_demo, Episode, EpisodeStep, StepSource, Transition, EPISODE_FILE};
pub use oracle::{oracle_policy, random_action, sample_random_action};
pub use task::{
    load_task, mix_seed, shipped_tasks, task_by_name, task_names, GoalPose, Region, TaskSpec,
    TaskSplit, MAX_SPAWN_ATTEMPTS, SPAWN_CLEARANCE,
};
pub use world::{
    check_success, check_success_with, rate_of_progress, PickPlaceAction, SuccessTolerance,
    WorldState, TABLE_RGB,
};
