use alloc::vec::Vec;

use super::{Feedback, Observation, Policy, PolicyDecision, PolicyKind};
use crate::learning::{ContextPosterior, PriorConfig};
use crate::rng::StreamRng;
use crate::sim::ContextVector;

/// Linear contextual Thompson sampling: ignores states and transitions and
/// ranks arms by `x_i . theta~_i`.
#[derive(Debug, Clone)]
pub struct StateThompson {
    posteriors: Vec<ContextPosterior>,
    rng: StreamRng,
}

impl StateThompson {
    pub fn new(n_arms: usize, prior: &PriorConfig, rng: StreamRng) -> Self {
        Self { posteriors: (0..n_arms).map(|_| ContextPosterior::new(ContextVector::DIM, prior)).collect(), rng }
    }

    pub fn from_posteriors(posteriors: Vec<ContextPosterior>, rng: StreamRng) -> Self {
        Self { posteriors, rng }
    }

    pub fn posteriors(&self) -> &[ContextPosterior] {
        &self.posteriors
    }
}

impl Policy for StateThompson {
    fn kind(&self) -> PolicyKind {
        PolicyKind::St
    }

    fn select(&mut self, obs: &Observation<'_>, budget: usize) -> PolicyDecision {
        let scores = self
            .posteriors
            .iter()
            .zip(obs.contexts)
            .map(|(p, x)| p.sample_score(&x.to_array(), &mut self.rng).expect("context dimension is fixed"))
            .collect();
        PolicyDecision::from_scores(scores, budget)
    }

    fn update(&mut self, fb: &Feedback<'_>) {
        for (i, post) in self.posteriors.iter_mut().enumerate() {
            if fb.active[i] {
                post.update(&fb.contexts[i].to_array(), fb.rewards[i]).expect("context dimension is fixed");
            }
        }
    }
}
