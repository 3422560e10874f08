use std::collections::BTreeMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::agents::{AgentRole, BackendError, ChatBackend, ChatMessage};

/// Call counts for one signal (or for stage 1, without a limit).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallLedger {
    pub limit: Option<u32>,
    pub total_calls: u32,
    pub calls_by_role: BTreeMap<AgentRole, u32>,
}

impl CallLedger {
    pub fn with_limit(limit: u32) -> Self {
        Self { limit: Some(limit), ..Default::default() }
    }

    pub fn unlimited() -> Self {
        Self::default()
    }

    pub fn remaining(&self) -> Option<u32> {
        self.limit.map(|l| l.saturating_sub(self.total_calls))
    }

    /// Counts one call, refusing to pass the limit.
    pub fn charge(&mut self, role: AgentRole) -> Result<(), BackendError> {
        if let Some(limit) = self.limit.filter(|l| self.total_calls >= *l) {
            return Err(BackendError::BudgetExceeded { limit });
        }
        self.total_calls += 1;
        *self.calls_by_role.entry(role).or_default() += 1;
        Ok(())
    }

    pub fn calls(&self, role: AgentRole) -> u32 {
        self.calls_by_role.get(&role).copied().unwrap_or(0)
    }
}

/// Charges `ledger` before forwarding each call. A call without a role is
/// charged to the generator.
pub struct Metered<'a> {
    inner: &'a dyn ChatBackend,
    ledger: &'a Mutex<CallLedger>,
}

impl<'a> Metered<'a> {
    pub fn new(inner: &'a dyn ChatBackend, ledger: &'a Mutex<CallLedger>) -> Self {
        Self { inner, ledger }
    }

    pub fn snapshot(&self) -> CallLedger {
        self.ledger.lock().unwrap_or_else(|p| p.into_inner()).clone()
    }
}

impl ChatBackend for Metered<'_> {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        self.complete_for(AgentRole::Sva, messages)
    }

    fn complete_for(&self, role: AgentRole, messages: &[ChatMessage]) -> Result<String, BackendError> {
        self.ledger.lock().unwrap_or_else(|p| p.into_inner()).charge(role)?;
        self.inner.complete_for(role, messages)
    }

    fn supports_files(&self) -> bool {
        self.inner.supports_files()
    }

    fn supports_images(&self) -> bool {
        self.inner.supports_images()
    }
}
