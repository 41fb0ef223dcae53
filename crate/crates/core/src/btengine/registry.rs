use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use super::{BlackboardAccess, BtError, NodeStatus, Permissions};

pub type BehaviorFn<V> =
    Arc<dyn Fn(&mut BlackboardAccess<'_, V>) -> Result<NodeStatus, BtError> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LeafKind {
    Condition,
    Action,
}

impl LeafKind {
    /// Conventional kind for an id: `?`-suffixed ids are conditions.
    pub fn from_id(id: &str) -> Self {
        if id.ends_with('?') {
            LeafKind::Condition
        } else {
            LeafKind::Action
        }
    }
}

pub struct Behavior<V> {
    pub kind: LeafKind,
    pub permissions: Permissions,
    pub run: BehaviorFn<V>,
}

impl<V> Clone for Behavior<V> {
    fn clone(&self) -> Self {
        Self {
            kind: self.kind,
            permissions: self.permissions.clone(),
            run: Arc::clone(&self.run),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("behavior `{0}` is already registered")]
    Duplicate(String),
    #[error("condition `{0}` declares write permissions")]
    ConditionWrites(String),
}

/// Map from behavior id to executable callback and its permission set.
pub struct BehaviorRegistry<V> {
    behaviors: BTreeMap<String, Behavior<V>>,
}

impl<V> Default for BehaviorRegistry<V> {
    fn default() -> Self {
        Self {
            behaviors: BTreeMap::new(),
        }
    }
}

impl<V> Clone for BehaviorRegistry<V> {
    fn clone(&self) -> Self {
        Self {
            behaviors: self.behaviors.clone(),
        }
    }
}

impl<V> fmt::Debug for BehaviorRegistry<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.behaviors.keys()).finish()
    }
}

impl<V> BehaviorRegistry<V> {
    pub fn new() -> Self {
        Self::default()
    }

    fn insert(&mut self, id: &str, behavior: Behavior<V>) -> Result<(), RegistryError> {
        if self.behaviors.contains_key(id) {
            return Err(RegistryError::Duplicate(id.to_string()));
        }
        self.behaviors.insert(id.to_string(), behavior);
        Ok(())
    }

    pub fn register_action<F>(
        &mut self,
        id: &str,
        permissions: Permissions,
        run: F,
    ) -> Result<(), RegistryError>
    where
        F: Fn(&mut BlackboardAccess<'_, V>) -> Result<NodeStatus, BtError> + Send + Sync + 'static,
    {
        self.insert(
            id,
            Behavior {
                kind: LeafKind::Action,
                permissions,
                run: Arc::new(run),
            },
        )
    }

    /// Conditions are side-effect free: their permission set may only contain reads.
    pub fn register_condition<F>(
        &mut self,
        id: &str,
        permissions: Permissions,
        run: F,
    ) -> Result<(), RegistryError>
    where
        F: Fn(&mut BlackboardAccess<'_, V>) -> Result<NodeStatus, BtError> + Send + Sync + 'static,
    {
        if permissions.has_writes() {
            return Err(RegistryError::ConditionWrites(id.to_string()));
        }
        self.insert(
            id,
            Behavior {
                kind: LeafKind::Condition,
                permissions,
                run: Arc::new(run),
            },
        )
    }

    pub fn get(&self, id: &str) -> Option<&Behavior<V>> {
        self.behaviors.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.behaviors.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.behaviors.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.behaviors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.behaviors.is_empty()
    }
}
