//! Shared inputs for the benchmarks.

use std::sync::Arc;

use decor_core::pipeline::{Engine, JobRequest};
use decor_core::{DecorScene, RuleBasedStub};

pub fn offline_engine() -> Engine {
    Engine::new(Arc::new(RuleBasedStub))
}

/// A decorated scene to re-solve; panics if the fixture cannot be decorated.
pub fn sample_scene(mesh: &str, n: usize, seed: u64) -> DecorScene {
    offline_engine().decorate(&JobRequest::new(mesh, "study corner", n, seed)).expect("fixture decorates")
}
