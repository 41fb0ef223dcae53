use std::fmt::Write as _;

use super::{BehaviorRegistry, LeafKind, TickTrace};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Sequence,
    Fallback,
    Condition(String),
    Action(String),
}

impl NodeKind {
    pub fn is_control(&self) -> bool {
        matches!(self, NodeKind::Sequence | NodeKind::Fallback)
    }

    pub fn behavior_id(&self) -> Option<&str> {
        match self {
            NodeKind::Condition(id) | NodeKind::Action(id) => Some(id),
            _ => None,
        }
    }

    fn label(&self) -> String {
        match self {
            NodeKind::Sequence => "Sequence".to_string(),
            NodeKind::Fallback => "Fallback".to_string(),
            NodeKind::Condition(id) => format!("Condition {id}"),
            NodeKind::Action(id) => format!("Action {id}"),
        }
    }
}

/// A tree node. Leaves carry an empty child list; the representation does not
/// forbid leaf children so that [`validate`] can report them.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BehaviorNode {
    pub kind: NodeKind,
    pub children: Vec<BehaviorNode>,
}

impl BehaviorNode {
    pub fn sequence(children: Vec<BehaviorNode>) -> Self {
        Self {
            kind: NodeKind::Sequence,
            children,
        }
    }

    pub fn fallback(children: Vec<BehaviorNode>) -> Self {
        Self {
            kind: NodeKind::Fallback,
            children,
        }
    }

    pub fn condition(id: &str) -> Self {
        Self {
            kind: NodeKind::Condition(id.to_string()),
            children: Vec::new(),
        }
    }

    pub fn action(id: &str) -> Self {
        Self {
            kind: NodeKind::Action(id.to_string()),
            children: Vec::new(),
        }
    }

    /// Leaf whose kind follows the id suffix convention (`?` → condition).
    pub fn leaf(id: &str) -> Self {
        match LeafKind::from_id(id) {
            LeafKind::Condition => Self::condition(id),
            LeafKind::Action => Self::action(id),
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(Self::node_count).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(Self::depth).max().unwrap_or(0)
    }

    /// Nodes in pre-order; the position in this list is the node's index in a [`TickTrace`].
    pub fn preorder(&self) -> Vec<&BehaviorNode> {
        let mut out = Vec::with_capacity(self.node_count());
        fn walk<'a>(n: &'a BehaviorNode, out: &mut Vec<&'a BehaviorNode>) {
            out.push(n);
            for c in &n.children {
                walk(c, out);
            }
        }
        walk(self, &mut out);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BehaviorTree {
    pub root: BehaviorNode,
}

impl BehaviorTree {
    pub fn new(root: BehaviorNode) -> Self {
        Self { root }
    }

    pub fn node_count(&self) -> usize {
        self.root.node_count()
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Sequence or Fallback with no children, at the given pre-order index.
    EmptyControlNode(usize),
    LeafHasChildren(usize),
    UnknownBehavior { index: usize, id: String },
    /// A Condition node bound to an action behavior or vice versa.
    KindMismatch { index: usize, id: String },
}

pub fn validate<V>(tree: &BehaviorTree, registry: &BehaviorRegistry<V>) -> Vec<Violation> {
    let mut out = Vec::new();
    for (index, node) in tree.root.preorder().into_iter().enumerate() {
        match &node.kind {
            NodeKind::Sequence | NodeKind::Fallback => {
                if node.children.is_empty() {
                    out.push(Violation::EmptyControlNode(index));
                }
            }
            NodeKind::Condition(id) | NodeKind::Action(id) => {
                if !node.children.is_empty() {
                    out.push(Violation::LeafHasChildren(index));
                }
                match registry.get(id) {
                    None => out.push(Violation::UnknownBehavior {
                        index,
                        id: id.clone(),
                    }),
                    Some(b) => {
                        let expected = match node.kind {
                            NodeKind::Condition(_) => LeafKind::Condition,
                            _ => LeafKind::Action,
                        };
                        if b.kind != expected {
                            out.push(Violation::KindMismatch {
                                index,
                                id: id.clone(),
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

/// Plain indented rendering: one node per line, two spaces per depth level.
pub fn render(tree: &BehaviorTree) -> String {
    render_lines(tree, None)
}

/// Rendering annotated with the statuses (and errors) recorded during one tick.
/// Nodes that were not visited carry no annotation.
pub fn render_trace(tree: &BehaviorTree, trace: &TickTrace) -> String {
    render_lines(tree, Some(trace))
}

fn render_lines(tree: &BehaviorTree, trace: Option<&TickTrace>) -> String {
    let mut out = String::new();
    let mut index = 0usize;
    fn walk(
        node: &BehaviorNode,
        depth: usize,
        index: &mut usize,
        trace: Option<&TickTrace>,
        out: &mut String,
    ) {
        let me = *index;
        *index += 1;
        for _ in 0..depth {
            out.push_str("  ");
        }
        out.push_str(&node.kind.label());
        if let Some(trace) = trace {
            if let Some(status) = trace.status_of(me) {
                let _ = write!(out, " [{status}]");
            }
            if let Some(err) = trace.error_at(me) {
                let _ = write!(out, " [error: {err}]");
            }
        }
        out.push('\n');
        for c in &node.children {
            walk(c, depth + 1, index, trace, out);
        }
    }
    walk(&tree.root, 0, &mut index, trace, &mut out);
    out
}
