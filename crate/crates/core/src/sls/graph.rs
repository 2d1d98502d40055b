use std::collections::VecDeque;

use super::SlsError;

/// Directed interconnection graph over subsystems with all-pairs hop
/// distances precomputed by BFS (the topology is time-invariant).
///
/// Edge `j -> i` means subsystem `j` enters the dynamics of subsystem `i`.
#[derive(Debug, Clone)]
pub struct InterconnectionGraph {
    n: usize,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
    // dist[src * n + dst], usize::MAX when unreachable
    dist: Vec<usize>,
}

impl InterconnectionGraph {
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); n];
        for &(s, d) in edges {
            if s != d && !out_adj[s].contains(&d) {
                out_adj[s].push(d);
                in_adj[d].push(s);
            }
        }
        for adj in out_adj.iter_mut().chain(in_adj.iter_mut()) {
            adj.sort_unstable();
        }
        let mut dist = vec![usize::MAX; n * n];
        let mut queue = VecDeque::new();
        for src in 0..n {
            let row = &mut dist[src * n..(src + 1) * n];
            row[src] = 0;
            queue.clear();
            queue.push_back(src);
            while let Some(v) = queue.pop_front() {
                for &w in &out_adj[v] {
                    if row[w] == usize::MAX {
                        row[w] = row[v] + 1;
                        queue.push_back(w);
                    }
                }
            }
        }
        Self { n, out_adj, in_adj, dist }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn successors(&self, v: usize) -> &[usize] {
        &self.out_adj[v]
    }

    pub fn predecessors(&self, v: usize) -> &[usize] {
        &self.in_adj[v]
    }

    /// Hop distance along directed edges, `None` when unreachable.
    pub fn distance(&self, from: usize, to: usize) -> Option<usize> {
        match self.dist[from * self.n + to] {
            usize::MAX => None,
            d => Some(d),
        }
    }

    /// `true` when `to` is within `radius` hops downstream of `from`.
    pub fn within(&self, from: usize, to: usize, radius: usize) -> bool {
        self.dist[from * self.n + to] <= radius
    }

    /// Shortest hop count in either direction; used for auditing messages.
    pub fn hop_distance(&self, a: usize, b: usize) -> Option<usize> {
        match (self.distance(a, b), self.distance(b, a)) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (x, y) => x.or(y),
        }
    }

    /// The `d`-incoming and `d`-outgoing sets of subsystem `i`, both sorted.
    pub fn d_local_sets(&self, i: usize, d: usize) -> Result<(Vec<usize>, Vec<usize>), SlsError> {
        if i >= self.n {
            return Err(SlsError::InvalidSubsystem(i));
        }
        let incoming = (0..self.n).filter(|&j| self.within(j, i, d)).collect();
        let outgoing = (0..self.n).filter(|&j| self.within(i, j, d)).collect();
        Ok((incoming, outgoing))
    }

    /// Undirected breadth-first spanning tree rooted at 0. Returns the parent
    /// of every vertex (`None` for the root and for vertices in other
    /// components, which become roots of their own trees).
    pub fn spanning_tree(&self) -> Vec<Option<usize>> {
        let mut parent = vec![None; self.n];
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::new();
        for root in 0..self.n {
            if seen[root] {
                continue;
            }
            seen[root] = true;
            queue.push_back(root);
            while let Some(v) = queue.pop_front() {
                let mut nbrs: Vec<usize> =
                    self.out_adj[v].iter().chain(self.in_adj[v].iter()).copied().collect();
                nbrs.sort_unstable();
                nbrs.dedup();
                for w in nbrs {
                    if !seen[w] {
                        seen[w] = true;
                        parent[w] = Some(v);
                        queue.push_back(w);
                    }
                }
            }
        }
        parent
    }
}
