use alloc::vec::Vec;

use super::{Feedback, Observation, Policy, PolicyDecision, PolicyKind};
use crate::whittle::WhittleTable;

/// Whittle indices computed once from the true arm models, then looked up.
#[derive(Debug, Clone)]
pub struct OracleWhittle {
    tables: Vec<WhittleTable>,
}

impl OracleWhittle {
    pub fn new(tables: Vec<WhittleTable>) -> Self {
        Self { tables }
    }

    pub fn tables(&self) -> &[WhittleTable] {
        &self.tables
    }

    pub fn select_states(&self, states: &[usize], budget: usize) -> PolicyDecision {
        let scores = self.tables.iter().zip(states).map(|(t, &s)| t.index(s)).collect();
        PolicyDecision::from_scores(scores, budget)
    }
}

impl Policy for OracleWhittle {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Oracle
    }

    fn select(&mut self, obs: &Observation<'_>, budget: usize) -> PolicyDecision {
        self.select_states(obs.states, budget)
    }

    fn update(&mut self, _feedback: &Feedback<'_>) {}
}
