//! Successive-shortest-path min-cost flow with integer costs.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

#[derive(Debug, Clone)]
struct Edge {
    to: usize,
    rev: usize,
    cap: i64,
    cost: i64,
}

#[derive(Debug, Clone)]
pub struct MinCostFlow {
    graph: Vec<Vec<Edge>>,
}

/// Handle to an edge added with [`MinCostFlow::add_edge`].
#[derive(Debug, Clone, Copy)]
pub struct EdgeRef {
    from: usize,
    index: usize,
}

impl MinCostFlow {
    pub fn new(nodes: usize) -> Self {
        Self {
            graph: vec![Vec::new(); nodes],
        }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: i64, cost: i64) -> EdgeRef {
        let index = self.graph[from].len();
        let rev = self.graph[to].len() + usize::from(from == to);
        self.graph[from].push(Edge { to, rev, cap, cost });
        self.graph[to].push(Edge {
            to: from,
            rev: index,
            cap: 0,
            cost: -cost,
        });
        EdgeRef { from, index }
    }

    /// Flow currently on an edge.
    pub fn flow(&self, e: EdgeRef) -> i64 {
        let edge = &self.graph[e.from][e.index];
        self.graph[edge.to][edge.rev].cap
    }

    /// Bellman-Ford distances from `s`; the residual graph must have no
    /// negative cycle.
    fn initial_potentials(&self, s: usize) -> Vec<i64> {
        let n = self.graph.len();
        let mut dist = vec![i64::MAX; n];
        dist[s] = 0;
        for _ in 0..n {
            let mut changed = false;
            for u in 0..n {
                if dist[u] == i64::MAX {
                    continue;
                }
                for e in &self.graph[u] {
                    if e.cap > 0 && dist[u] + e.cost < dist[e.to] {
                        dist[e.to] = dist[u] + e.cost;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        dist.iter()
            .map(|&d| if d == i64::MAX { 0 } else { d })
            .collect()
    }

    /// Sends up to `limit` units from `s` to `t` at minimum cost. Returns
    /// `(flow, cost)`. Dijkstra ties resolve toward the lower node index, so
    /// the result is deterministic for a fixed edge insertion order.
    pub fn run(&mut self, s: usize, t: usize, limit: i64) -> (i64, i64) {
        let n = self.graph.len();
        let mut potential = self.initial_potentials(s);
        let mut flow = 0;
        let mut cost = 0;
        let mut prev: Vec<(usize, usize)> = vec![(usize::MAX, usize::MAX); n];
        while flow < limit {
            let mut dist = vec![i64::MAX; n];
            dist[s] = 0;
            let mut heap = BinaryHeap::new();
            heap.push(Reverse((0_i64, s)));
            while let Some(Reverse((d, u))) = heap.pop() {
                if d > dist[u] {
                    continue;
                }
                for (i, e) in self.graph[u].iter().enumerate() {
                    if e.cap <= 0 {
                        continue;
                    }
                    let nd = d + e.cost + potential[u] - potential[e.to];
                    if nd < dist[e.to] {
                        dist[e.to] = nd;
                        prev[e.to] = (u, i);
                        heap.push(Reverse((nd, e.to)));
                    }
                }
            }
            if dist[t] == i64::MAX {
                break;
            }
            for v in 0..n {
                if dist[v] != i64::MAX {
                    potential[v] += dist[v];
                }
            }
            let mut push = limit - flow;
            let mut v = t;
            while v != s {
                let (u, i) = prev[v];
                push = push.min(self.graph[u][i].cap);
                v = u;
            }
            let mut v = t;
            while v != s {
                let (u, i) = prev[v];
                let rev = self.graph[u][i].rev;
                self.graph[u][i].cap -= push;
                self.graph[v][rev].cap += push;
                cost += push * self.graph[u][i].cost;
                v = u;
            }
            flow += push;
        }
        (flow, cost)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_assignment() {
        // 2 workers x 2 jobs, costs [[4, 1], [2, 3]] -> optimum 1 + 2 = 3
        let mut g = MinCostFlow::new(6);
        let (s, t) = (4, 5);
        for w in 0..2 {
            g.add_edge(s, w, 1, 0);
        }
        let costs = [[4, 1], [2, 3]];
        let mut arcs = Vec::new();
        for (w, row) in costs.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                arcs.push((w, j, g.add_edge(w, 2 + j, 1, c)));
            }
        }
        for j in 0..2 {
            g.add_edge(2 + j, t, 1, 0);
        }
        assert_eq!(g.run(s, t, 2), (2, 3));
        let chosen: Vec<(usize, usize)> = arcs
            .iter()
            .filter(|(_, _, e)| g.flow(*e) == 1)
            .map(|(w, j, _)| (*w, *j))
            .collect();
        assert_eq!(chosen, vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn negative_costs_enforce_lower_bounds() {
        // both units must go through the -100 arc of capacity 1 once
        let mut g = MinCostFlow::new(3);
        g.add_edge(0, 1, 2, 0);
        let low = g.add_edge(1, 2, 1, -100);
        let free = g.add_edge(1, 2, 5, 0);
        assert_eq!(g.run(0, 2, 2), (2, -100));
        assert_eq!((g.flow(low), g.flow(free)), (1, 1));
    }
}
