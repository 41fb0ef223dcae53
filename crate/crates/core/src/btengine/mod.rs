//! Generic behavior-tree engine.
//!
//! Trees are built from [`Sequence`](NodeKind::Sequence) and
//! [`Fallback`](NodeKind::Fallback) control nodes over
//! [`Condition`](NodeKind::Condition) and [`Action`](NodeKind::Action) leaves.
//! Leaves are resolved by id against a [`BehaviorRegistry`] and talk to the
//! outside world only through a permissioned [`Blackboard`].
//!
//! Control nodes are memoryless: every tick restarts at the root, and a
//! `Running` child halts its parent for the current tick.

mod blackboard;
mod registry;
mod tick;
mod tree;

pub use blackboard::{Access, Blackboard, BlackboardAccess, Permissions};
pub use registry::{Behavior, BehaviorFn, BehaviorRegistry, LeafKind, RegistryError};
pub use tick::{tick, tick_observed, NoopObserver, TickObserver, TickTrace};
pub use tree::{render, render_trace, validate, BehaviorNode, BehaviorTree, NodeKind, Violation};

use thiserror::Error;

/// Result of ticking a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeStatus {
    Success,
    Failure,
    Running,
}

impl std::fmt::Display for NodeStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            NodeStatus::Success => "Success",
            NodeStatus::Failure => "Failure",
            NodeStatus::Running => "Running",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BtError {
    #[error("unknown behavior `{0}`")]
    UnknownBehavior(String),
    #[error("behavior `{behavior}` is not permitted to access key `{key}`")]
    PermissionViolation { key: String, behavior: String },
    #[error("condition `{0}` returned Running")]
    ConditionRunning(String),
}
