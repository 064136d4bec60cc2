//! Next-observation prediction from an observation and a pick-and-place action.

mod equivariance;
mod geometric;
mod oracle;

pub use equivariance::{
    augment_transition, equivariance_residual, run_equivariance_harness, write_residual_csv,
    EquivarianceCase, EquivarianceRecord, TransformKind,
};
pub use geometric::GeometricPredictor;
pub use oracle::OraclePredictor;

use crate::observation::Observation;
use crate::simulator::{PickPlaceAction, WorldState};

/// `o_{t+1} = f(o_t, a_t)`. Implementations are immutable after construction apart from
/// interior caches, and may be called from many threads at once.
pub trait ForesightPredictor: Send + Sync {
    fn predict(&self, o: &Observation, a: &PickPlaceAction) -> Observation;

    /// Called by the rollout loop with the true world before each planning step.
    fn sync(&self, _world: &WorldState) {}

    fn name(&self) -> &'static str;
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionSample {
    pub before: Observation,
    pub action: PickPlaceAction,
    pub after: Observation,
}
