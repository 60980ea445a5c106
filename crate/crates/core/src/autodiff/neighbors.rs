use serde::{Deserialize, Serialize};

/// Per-node neighbor lists in compressed row form.
///
/// Row `i` lists the nodes `j` that node `i` attends to. Edge-valued tensors
/// (attention logits, coefficients) are `E x 1` columns laid out in this
/// order, so `offsets[i]..offsets[i + 1]` addresses row `i`'s entries.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Neighborhoods {
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl Neighborhoods {
    /// Build from adjacency lists. Lists are sorted and deduplicated.
    pub fn from_lists(mut lists: Vec<Vec<usize>>) -> Self {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for list in lists.iter_mut() {
            list.sort_unstable();
            list.dedup();
            targets.extend_from_slice(list);
            offsets.push(targets.len());
        }
        Neighborhoods { offsets, targets }
    }

    /// Symmetric neighborhoods from an undirected edge list, with a self-loop
    /// on every node.
    pub fn with_self_loops(node_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut lists: Vec<Vec<usize>> = (0..node_count).map(|i| vec![i]).collect();
        for (i, j) in edges {
            lists[i].push(j);
            lists[j].push(i);
        }
        Self::from_lists(lists)
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    /// True when every row contains its own index.
    pub fn has_self_loops(&self) -> bool {
        (0..self.node_count()).all(|i| self.row(i).binary_search(&i).is_ok())
    }
}
