/// Node of a binary tree over binned features. Node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// Rows with `bin <= threshold_bin` go left.
    Split {
        feature: usize,
        threshold_bin: u32,
        left: usize,
        right: usize,
        /// Objective improvement credited to `feature`.
        gain: f64,
    },
    Leaf {
        value: f64,
    },
}

/// Missing values cannot occur, so the routing default is always left.
/// Kept as a type so the node layout stays stable if that ever changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DefaultDirection {
    #[default]
    Left,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64) -> Self {
        Self {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn default_direction(&self) -> DefaultDirection {
        DefaultDirection::Left
    }

    /// Index of the leaf reached by a binned row.
    pub fn leaf_index(&self, bins: &[u32]) -> usize {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                Node::Leaf { .. } => return id,
                Node::Split {
                    feature,
                    threshold_bin,
                    left,
                    right,
                    ..
                } => {
                    id = if bins[feature] <= threshold_bin {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    pub fn predict_binned(&self, bins: &[u32]) -> f64 {
        match self.nodes[self.leaf_index(bins)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("leaf_index returns leaves"),
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// Length of the longest root-to-leaf path, in edges.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaf_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { value } => Some(*value),
            Node::Split { .. } => None,
        })
    }

    /// Structure without leaf values or gains: `(feature, bin)` per split in node order.
    pub fn structure(&self) -> Vec<Option<(usize, u32, usize, usize)>> {
        self.nodes
            .iter()
            .map(|n| match *n {
                Node::Split {
                    feature,
                    threshold_bin,
                    left,
                    right,
                    ..
                } => Some((feature, threshold_bin, left, right)),
                Node::Leaf { .. } => None,
            })
            .collect()
    }
}
