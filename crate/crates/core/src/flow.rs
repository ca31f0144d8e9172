//! Dinic max-flow on integer capacities, used for exact minimisation of the
//! relational predimension (a maximum-weight closure problem).

use std::collections::VecDeque;

pub(crate) const INF: i128 = i128::MAX / 4;

#[derive(Clone, Debug)]
struct Edge {
    to: usize,
    cap: i128,
}

#[derive(Clone, Debug)]
pub(crate) struct FlowNet {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
    level: Vec<i32>,
    it: Vec<usize>,
}

impl FlowNet {
    pub fn new(n: usize) -> Self {
        FlowNet { edges: Vec::new(), adj: vec![Vec::new(); n], level: vec![0; n], it: vec![0; n] }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: i128) {
        self.adj[from].push(self.edges.len());
        self.edges.push(Edge { to, cap });
        self.adj[to].push(self.edges.len());
        self.edges.push(Edge { to: from, cap: 0 });
    }

    fn bfs(&mut self, s: usize, t: usize) -> bool {
        self.level.iter_mut().for_each(|l| *l = -1);
        self.level[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &id in &self.adj[u] {
                let e = &self.edges[id];
                if e.cap > 0 && self.level[e.to] < 0 {
                    self.level[e.to] = self.level[u] + 1;
                    q.push_back(e.to);
                }
            }
        }
        self.level[t] >= 0
    }

    fn dfs(&mut self, u: usize, t: usize, f: i128) -> i128 {
        if u == t {
            return f;
        }
        while self.it[u] < self.adj[u].len() {
            let id = self.adj[u][self.it[u]];
            let (to, cap) = (self.edges[id].to, self.edges[id].cap);
            if cap > 0 && self.level[to] == self.level[u] + 1 {
                let d = self.dfs(to, t, f.min(cap));
                if d > 0 {
                    self.edges[id].cap -= d;
                    self.edges[id ^ 1].cap += d;
                    return d;
                }
            }
            self.it[u] += 1;
        }
        0
    }

    pub fn max_flow(&mut self, s: usize, t: usize) -> i128 {
        let mut total = 0;
        while self.bfs(s, t) {
            self.it.iter_mut().for_each(|i| *i = 0);
            loop {
                let f = self.dfs(s, t, INF);
                if f == 0 {
                    break;
                }
                total += f;
            }
        }
        total
    }

    /// Nodes reachable from `s` in the residual network (source side of a min cut).
    pub fn source_side(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        seen[s] = true;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &id in &self.adj[u] {
                let e = &self.edges[id];
                if e.cap > 0 && !seen[e.to] {
                    seen[e.to] = true;
                    q.push_back(e.to);
                }
            }
        }
        seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_network() {
        let mut g = FlowNet::new(4);
        g.add_edge(0, 1, 3);
        g.add_edge(0, 2, 2);
        g.add_edge(1, 2, 1);
        g.add_edge(1, 3, 2);
        g.add_edge(2, 3, 3);
        assert_eq!(g.max_flow(0, 3), 5);
        let side = g.source_side(0);
        assert!(side[0] && !side[3]);
    }
}
