use super::{BehaviorNode, BehaviorRegistry, BehaviorTree, Blackboard, BtError, LeafKind, NodeKind, NodeStatus};

/// Hook invoked as the engine walks the tree. Indices are pre-order positions.
pub trait TickObserver {
    fn enter(&mut self, _index: usize, _node: &BehaviorNode) {}
    fn exit(&mut self, _index: usize, _status: NodeStatus) {}
    fn failed(&mut self, _index: usize, _error: &BtError) {}
}

pub struct NoopObserver;

impl TickObserver for NoopObserver {}

/// Visitation order and per-node outcomes of a single tick.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TickTrace {
    pub visited: Vec<usize>,
    statuses: Vec<(usize, NodeStatus)>,
    errors: Vec<(usize, String)>,
}

impl TickTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn status_of(&self, index: usize) -> Option<NodeStatus> {
        self.statuses
            .iter()
            .find(|(i, _)| *i == index)
            .map(|(_, s)| *s)
    }

    pub fn error_at(&self, index: usize) -> Option<&str> {
        self.errors
            .iter()
            .find(|(i, _)| *i == index)
            .map(|(_, e)| e.as_str())
    }
}

impl TickObserver for TickTrace {
    fn enter(&mut self, index: usize, _node: &BehaviorNode) {
        self.visited.push(index);
    }

    fn exit(&mut self, index: usize, status: NodeStatus) {
        self.statuses.push((index, status));
    }

    fn failed(&mut self, index: usize, error: &BtError) {
        self.errors.push((index, error.to_string()));
    }
}

/// Ticks the tree once from the root and returns the root status.
pub fn tick<V>(
    tree: &BehaviorTree,
    bb: &mut Blackboard<V>,
    registry: &BehaviorRegistry<V>,
) -> Result<NodeStatus, BtError> {
    tick_observed(tree, bb, registry, &mut NoopObserver)
}

pub fn tick_observed<V, O: TickObserver>(
    tree: &BehaviorTree,
    bb: &mut Blackboard<V>,
    registry: &BehaviorRegistry<V>,
    observer: &mut O,
) -> Result<NodeStatus, BtError> {
    tick_node(&tree.root, 0, bb, registry, observer)
}

fn tick_node<V, O: TickObserver>(
    node: &BehaviorNode,
    index: usize,
    bb: &mut Blackboard<V>,
    registry: &BehaviorRegistry<V>,
    observer: &mut O,
) -> Result<NodeStatus, BtError> {
    observer.enter(index, node);
    let result = match &node.kind {
        NodeKind::Sequence => run_children(node, index, bb, registry, observer, NodeStatus::Success),
        NodeKind::Fallback => run_children(node, index, bb, registry, observer, NodeStatus::Failure),
        NodeKind::Condition(id) | NodeKind::Action(id) => run_leaf(id, bb, registry),
    };
    match &result {
        Ok(status) => observer.exit(index, *status),
        Err(e) => observer.failed(index, e),
    }
    result
}

/// `pass` is the status that lets traversal continue to the next child
/// (Success for Sequence, Failure for Fallback). Any other child status
/// halts traversal and becomes the parent's status.
fn run_children<V, O: TickObserver>(
    node: &BehaviorNode,
    index: usize,
    bb: &mut Blackboard<V>,
    registry: &BehaviorRegistry<V>,
    observer: &mut O,
    pass: NodeStatus,
) -> Result<NodeStatus, BtError> {
    let mut child_index = index + 1;
    for child in &node.children {
        let status = tick_node(child, child_index, bb, registry, observer)?;
        if status != pass {
            return Ok(status);
        }
        child_index += child.node_count();
    }
    Ok(pass)
}

fn run_leaf<V>(
    id: &str,
    bb: &mut Blackboard<V>,
    registry: &BehaviorRegistry<V>,
) -> Result<NodeStatus, BtError> {
    let behavior = registry
        .get(id)
        .ok_or_else(|| BtError::UnknownBehavior(id.to_string()))?;
    let mut view = bb.access(id, &behavior.permissions);
    let status = (behavior.run)(&mut view)?;
    if behavior.kind == LeafKind::Condition && status == NodeStatus::Running {
        return Err(BtError::ConditionRunning(id.to_string()));
    }
    Ok(status)
}
