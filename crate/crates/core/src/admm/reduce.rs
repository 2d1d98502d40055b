use crate::sls::InterconnectionGraph;
use crate::Real;

/// Fixed-order aggregation of per-subsystem scalars along a breadth-first
/// spanning tree of the interconnection graph.
///
/// Partial sums travel leaf to root and the result is broadcast back, so the
/// floating point summation order depends only on the graph.
#[derive(Debug, Clone)]
pub struct ReductionTree {
    parent: Vec<Option<usize>>,
    /// every vertex after all of its descendants
    upward: Vec<usize>,
}

impl ReductionTree {
    pub fn new(graph: &InterconnectionGraph) -> Self {
        let parent = graph.spanning_tree();
        let n = parent.len();
        let mut children = vec![Vec::new(); n];
        for (v, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                children[*p].push(v);
            }
        }
        let mut bfs = Vec::with_capacity(n);
        for root in (0..n).filter(|&v| parent[v].is_none()) {
            let start = bfs.len();
            bfs.push(root);
            let mut k = start;
            while k < bfs.len() {
                let v = bfs[k];
                bfs.extend(children[v].iter().copied());
                k += 1;
            }
        }
        bfs.reverse();
        Self { parent, upward: bfs }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    /// Tree edges `(child, parent)`; each carries one message up and one down.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.parent.iter().enumerate().filter_map(|(v, p)| p.map(|p| (v, p)))
    }

    pub fn sum<T: Real>(&self, values: &[T]) -> T {
        assert_eq!(values.len(), self.len(), "one value per subsystem");
        let mut acc = values.to_vec();
        let mut total = T::zero();
        for &v in &self.upward {
            match self.parent[v] {
                Some(p) => {
                    let part = acc[v];
                    acc[p] += part;
                }
                None => total += acc[v],
            }
        }
        total
    }

    pub fn all(&self, flags: &[bool]) -> bool {
        assert_eq!(flags.len(), self.len(), "one flag per subsystem");
        flags.iter().all(|&f| f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sums_over_disconnected_graph() {
        let g = InterconnectionGraph::from_edges(5, &[(0, 1), (1, 2), (3, 4)]);
        let tree = ReductionTree::new(&g);
        assert_eq!(tree.sum(&[1.0, 2.0, 3.0, 4.0, 5.0]), 15.0);
        assert_eq!(tree.edges().count(), 3);
        assert!(!tree.all(&[true, true, false, true, true]));
    }

    #[test]
    fn children_before_parents() {
        let g = InterconnectionGraph::from_edges(4, &[(0, 1), (1, 0), (1, 2), (2, 1), (2, 3), (3, 2)]);
        let tree = ReductionTree::new(&g);
        let pos = |v: usize| tree.upward.iter().position(|&x| x == v).unwrap();
        for (c, p) in tree.edges() {
            assert!(pos(c) < pos(p));
        }
    }
}
