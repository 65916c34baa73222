//! Dinic's maximum flow over exact integer capacities.
//!
//! Generic over the capacity type so that small instances run on `i64` and
//! instances with large common denominators fall back to `BigInt`.

use std::collections::VecDeque;
use std::ops::{Add, Sub};

use num_traits::Zero;

pub trait Capacity: Clone + Ord + Zero + Add<Output = Self> + Sub<Output = Self> {}

impl<T: Clone + Ord + Zero + Add<Output = T> + Sub<Output = T>> Capacity for T {}

#[derive(Debug, Clone)]
struct Arc<C> {
    to: usize,
    rev: usize,
    cap: C,
}

#[derive(Debug, Clone)]
pub struct FlowNetwork<C> {
    graph: Vec<Vec<Arc<C>>>,
    arcs: Vec<(usize, usize)>,
    original: Vec<C>,
}

/// Handle to an arc returned by [`FlowNetwork::add_arc`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArcId(usize);

impl<C: Capacity> FlowNetwork<C> {
    pub fn new(nodes: usize) -> Self {
        FlowNetwork { graph: vec![Vec::new(); nodes], arcs: Vec::new(), original: Vec::new() }
    }

    pub fn add_arc(&mut self, from: usize, to: usize, cap: C) -> ArcId {
        let forward = self.graph[from].len();
        let backward = self.graph[to].len() + usize::from(from == to);
        self.graph[from].push(Arc { to, rev: backward, cap: cap.clone() });
        self.graph[to].push(Arc { to: from, rev: forward, cap: C::zero() });
        self.arcs.push((from, forward));
        self.original.push(cap);
        ArcId(self.arcs.len() - 1)
    }

    /// Flow currently routed through `arc`.
    pub fn flow_on(&self, arc: ArcId) -> C {
        let (from, idx) = self.arcs[arc.0];
        self.original[arc.0].clone() - self.graph[from][idx].cap.clone()
    }

    pub fn max_flow(&mut self, source: usize, sink: usize) -> C {
        let mut total = C::zero();
        if source == sink {
            return total;
        }
        loop {
            let level = self.levels(source);
            if level[sink].is_none() {
                return total;
            }
            let mut next = vec![0usize; self.graph.len()];
            while let Some(pushed) = self.augment(source, sink, &level, &mut next) {
                total = total + pushed;
            }
        }
    }

    /// Nodes reachable from `source` in the residual graph; after
    /// [`max_flow`](Self::max_flow) this is the source side of a minimum cut.
    pub fn residual_reachable(&self, source: usize) -> Vec<bool> {
        self.levels(source).iter().map(Option::is_some).collect()
    }

    fn levels(&self, source: usize) -> Vec<Option<usize>> {
        let mut level = vec![None; self.graph.len()];
        level[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(v) = queue.pop_front() {
            let here = level[v].unwrap_or(0);
            for arc in &self.graph[v] {
                if arc.cap > C::zero() && level[arc.to].is_none() {
                    level[arc.to] = Some(here + 1);
                    queue.push_back(arc.to);
                }
            }
        }
        level
    }

    // Iterative blocking-flow step: finds one augmenting path in the level
    // graph, pushes its bottleneck and returns it.
    fn augment(
        &mut self,
        source: usize,
        sink: usize,
        level: &[Option<usize>],
        next: &mut [usize],
    ) -> Option<C> {
        let mut path: Vec<(usize, usize)> = Vec::new();
        let mut v = source;
        loop {
            if v == sink {
                let bottleneck = path
                    .iter()
                    .map(|&(u, i)| self.graph[u][i].cap.clone())
                    .min()
                    .expect("path to sink is nonempty");
                for &(u, i) in &path {
                    let arc = &mut self.graph[u][i];
                    arc.cap = arc.cap.clone() - bottleneck.clone();
                    let (to, rev) = (arc.to, arc.rev);
                    let back = &mut self.graph[to][rev];
                    back.cap = back.cap.clone() + bottleneck.clone();
                }
                return Some(bottleneck);
            }
            let mut advanced = false;
            while next[v] < self.graph[v].len() {
                let arc = &self.graph[v][next[v]];
                let admissible = arc.cap > C::zero()
                    && matches!((level[v], level[arc.to]), (Some(a), Some(b)) if b == a + 1);
                if admissible {
                    path.push((v, next[v]));
                    v = arc.to;
                    advanced = true;
                    break;
                }
                next[v] += 1;
            }
            if !advanced {
                // Dead end: retreat one step and skip the arc that led here.
                let (u, _) = path.pop()?;
                next[u] += 1;
                v = u;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    #[test]
    fn small_network() {
        let mut net = FlowNetwork::new(4);
        let a = net.add_arc(0, 1, 3i64);
        net.add_arc(0, 2, 2);
        net.add_arc(1, 2, 5);
        net.add_arc(1, 3, 2);
        net.add_arc(2, 3, 3);
        assert_eq!(net.max_flow(0, 3), 5);
        assert_eq!(net.flow_on(a), 3);
        let side = net.residual_reachable(0);
        assert!(side[0] && !side[3]);
    }

    #[test]
    fn big_integer_capacities() {
        let huge: BigInt = BigInt::from(10).pow(40);
        let mut net = FlowNetwork::new(3);
        net.add_arc(0, 1, huge.clone());
        net.add_arc(1, 2, huge.clone() - BigInt::from(1));
        assert_eq!(net.max_flow(0, 2), huge - BigInt::from(1));
    }

    #[test]
    fn disconnected_sink() {
        let mut net = FlowNetwork::<i64>::new(3);
        net.add_arc(0, 1, 7);
        assert_eq!(net.max_flow(0, 2), 0);
    }
}
