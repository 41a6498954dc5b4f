//! Extended modularity (Q^E) and weighted overlapping community clustering
//! (WOCC): global values and exact incremental gains.
//!
//! Q^E of a cover is
//!
//! ```text
//! (1/2m) * sum_C sum_{i,j in C} [A_ij - k_i k_j / 2m] / (O_i O_j)
//! ```
//!
//! over ordered pairs including `i == j`, where `O_i` is the number of
//! communities holding `i`. Nodes in no community count as singletons.
//!
//! WOCC averages, over all nodes, `(1/O_x) * sum_{C containing x} WCC(x, C)`
//! with
//!
//! ```text
//! WCC(x, C) = t(x,C)/t(x,V) * vt(x,V) / (|C \ {x}| + vt(x, V \ C))
//! ```
//!
//! when `t(x,V) > 0` and 0 otherwise. `t(x,S)` counts triangles `x` closes
//! with two nodes of `S`; `vt(x,S)` counts nodes of `S` sharing at least one
//! triangle with `x`. Nodes in no community contribute 0.
//!
//! Gains `delta(v, C)` assume `v` is currently in no community and joins only
//! `C`, so `O_v = 1` afterwards. Both objectives are 0 on edgeless graphs.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::cover::{CommunityId, Cover};
use crate::error::{Error, Result};
use crate::graph::{stable_sum, Graph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObjectiveKind {
    /// Extended modularity Q^E.
    ExtendedModularity,
    /// Weighted overlapping community clustering.
    Wocc,
}

impl ObjectiveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ObjectiveKind::ExtendedModularity => "qe",
            ObjectiveKind::Wocc => "wocc",
        }
    }
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qe" | "q_e" | "modularity" => Ok(ObjectiveKind::ExtendedModularity),
            "wocc" => Ok(ObjectiveKind::Wocc),
            other => Err(Error::Config(format!("unknown objective `{other}`"))),
        }
    }
}

/// Gains of a detached node for each of its neighboring communities.
pub type GainTable = BTreeMap<CommunityId, f64>;

pub fn global(g: &Graph, cover: &Cover, kind: ObjectiveKind) -> f64 {
    match kind {
        ObjectiveKind::ExtendedModularity => qe_global(g, cover),
        ObjectiveKind::Wocc => wocc_global(g, cover),
    }
}

pub fn qe_global(g: &Graph, cover: &Cover) -> f64 {
    let m = g.edge_count();
    if m == 0 {
        return 0.0;
    }
    let two_m = 2.0 * m as f64;
    // Terms are grouped by membership counts so the result does not depend
    // on node labels or community order.
    let mut terms = Vec::with_capacity(cover.len() + 1);
    for (id, members) in cover.communities() {
        let mut degree_by_o: BTreeMap<usize, u64> = BTreeMap::new();
        let mut edges_by_o: BTreeMap<(usize, usize), u64> = BTreeMap::new();
        for &i in members {
            let oi = cover.membership_count(i);
            *degree_by_o.entry(oi).or_insert(0) += g.degree(i) as u64;
            for &j in g.neighbors(i) {
                if j > i && cover.contains(id, j) {
                    let oj = cover.membership_count(j);
                    *edges_by_o.entry((oi.min(oj), oi.max(oj))).or_insert(0) += 1;
                }
            }
        }
        let strength: f64 = degree_by_o.iter().map(|(&o, &k)| k as f64 / o as f64).sum();
        let internal: f64 = edges_by_o
            .iter()
            .map(|(&(a, b), &count)| count as f64 / (a as f64 * b as f64))
            .sum();
        terms.push(2.0 * internal - strength * strength / two_m);
    }
    let uncovered: u64 = (0..g.node_count())
        .filter(|&v| cover.membership_count(v) == 0)
        .map(|v| (g.degree(v) as u64).pow(2))
        .sum();
    terms.push(-(uncovered as f64) / two_m);
    stable_sum(terms) / two_m
}

pub fn wocc_global(g: &Graph, cover: &Cover) -> f64 {
    let n = g.node_count();
    if n == 0 || g.edge_count() == 0 {
        return 0.0;
    }
    let support = g.triangle_support();
    let mut terms = Vec::with_capacity(n);
    for x in 0..n {
        let o = cover.membership_count(x);
        if o == 0 || support.triangles(x) == 0 {
            continue;
        }
        let sum = stable_sum(
            cover
                .memberships(x)
                .iter()
                .map(|&c| {
                    let members = cover.community(c).expect("membership of live community");
                    let (t_in, vt_in) = local_triangles(g, cover, x, c);
                    wcc_value(g, x, t_in, vt_in, members.len() - 1)
                })
                .collect(),
        );
        terms.push(sum / o as f64);
    }
    stable_sum(terms) / n as f64
}

/// WCC of `x` in a community where it has `t_in` internal triangles,
/// `vt_in` triangle-sharing co-members and `others` other members.
pub(crate) fn wcc_value(g: &Graph, x: usize, t_in: u64, vt_in: u32, others: usize) -> f64 {
    let support = g.triangle_support();
    let t_all = support.triangles(x);
    if t_in == 0 || t_all == 0 {
        return 0.0;
    }
    let vt_all = support.triangle_degree(x);
    let vt_out = vt_all - vt_in;
    (t_in as f64 / t_all as f64) * (vt_all as f64 / (others as f64 + vt_out as f64))
}

/// `(t(x, C), |vt(x, C)|)` for community `c` by direct scan, counting only
/// members other than `x`.
fn local_triangles(g: &Graph, cover: &Cover, x: usize, c: CommunityId) -> (u64, u32) {
    let support = g.triangle_support().of(x);
    let mut inside = Vec::new();
    let mut vt = 0;
    for (idx, &y) in g.neighbors(x).iter().enumerate() {
        if y != x && cover.contains(c, y) {
            inside.push(y);
            if support[idx] > 0 {
                vt += 1;
            }
        }
    }
    let mut twice = 0u64;
    for &y in &inside {
        twice += crate::graph::sorted_intersection_len(g.neighbors(y), &inside) as u64;
    }
    (twice / 2, vt)
}

/// Communities holding at least one neighbor of `v`, ascending.
pub fn neighboring_communities(g: &Graph, cover: &Cover, v: usize) -> Vec<CommunityId> {
    let mut ids: Vec<CommunityId> = g
        .neighbors(v)
        .iter()
        .flat_map(|&u| cover.memberships(u).iter().copied())
        .collect();
    ids.sort_unstable();
    ids.dedup();
    ids
}

/// Exact change of the objective when the detached node `v` joins `c`.
pub fn delta_gain(
    g: &Graph,
    cover: &Cover,
    v: usize,
    c: CommunityId,
    kind: ObjectiveKind,
) -> Result<f64> {
    if v >= cover.node_count() || v >= g.node_count() {
        return Err(Error::NodeOutOfRange {
            node: v,
            node_count: g.node_count(),
        });
    }
    let members = cover.community(c).ok_or(Error::UnknownCommunity(c))?;
    if cover.contains(c, v) {
        return Err(Error::AlreadyMember {
            node: v,
            community: c,
        });
    }
    if cover.membership_count(v) != 0 {
        return Err(Error::NodeNotDetached(v));
    }
    if g.edge_count() == 0 {
        return Ok(0.0);
    }
    Ok(match kind {
        ObjectiveKind::ExtendedModularity => {
            let two_m = 2.0 * g.edge_count() as f64;
            let strength: f64 = members
                .iter()
                .map(|&i| g.degree(i) as f64 / cover.membership_count(i) as f64)
                .sum();
            let links: f64 = g
                .neighbors(v)
                .iter()
                .filter(|&&u| cover.contains(c, u))
                .map(|&u| 1.0 / cover.membership_count(u) as f64)
                .sum();
            (2.0 * links - 2.0 * strength * g.degree(v) as f64 / two_m) / two_m
        }
        ObjectiveKind::Wocc => {
            let support = g.triangle_support();
            let inside: Vec<usize> = g
                .neighbors(v)
                .iter()
                .copied()
                .filter(|&u| cover.contains(c, u))
                .collect();
            let (t_own, vt_own) = {
                let mut twice = 0u64;
                let mut vt = 0u32;
                for &y in &inside {
                    twice += crate::graph::sorted_intersection_len(g.neighbors(y), &inside) as u64;
                    if shares_triangle(g, v, y) {
                        vt += 1;
                    }
                }
                (twice / 2, vt)
            };
            let mut total = wcc_value(g, v, t_own, vt_own, members.len());
            for &y in members {
                if support.triangles(y) == 0 {
                    continue;
                }
                let (t, vt) = local_triangles(g, cover, y, c);
                let before = wcc_value(g, y, t, vt, members.len() - 1);
                let (t_after, vt_after) = if inside.binary_search(&y).is_ok() {
                    let common = g
                        .neighbors(y)
                        .iter()
                        .filter(|&&w| inside.binary_search(&w).is_ok())
                        .count() as u64;
                    (t + common, vt + shares_triangle(g, v, y) as u32)
                } else {
                    (t, vt)
                };
                let after = wcc_value(g, y, t_after, vt_after, members.len());
                total += (after - before) / cover.membership_count(y) as f64;
            }
            total / g.node_count() as f64
        }
    })
}

fn shares_triangle(g: &Graph, u: usize, v: usize) -> bool {
    match g.neighbors(u).binary_search(&v) {
        Ok(idx) => g.triangle_support().of(u)[idx] > 0,
        Err(_) => false,
    }
}

pub fn gain_table(g: &Graph, cover: &Cover, v: usize, kind: ObjectiveKind) -> Result<GainTable> {
    neighboring_communities(g, cover, v)
        .into_iter()
        .map(|c| delta_gain(g, cover, v, c, kind).map(|d| (c, d)))
        .collect()
}

/// A cover together with the per-community aggregates needed to evaluate
/// gains in time proportional to the community size.
///
/// For Q^E this is `sum_{i in C} k_i / O_i`; for WOCC it is, for every
/// membership `(y, C)`, the pair `(t(y, C), |vt(y, C)|)`.
#[derive(Debug, Clone)]
pub(crate) struct ObjectiveState<'g> {
    graph: &'g Graph,
    kind: ObjectiveKind,
    cover: Cover,
    strength: Vec<f64>,
    local: Vec<Vec<LocalEntry>>,
    mark: Vec<bool>,
}

#[derive(Debug, Clone, Copy)]
struct LocalEntry {
    community: CommunityId,
    triangles: u64,
    partners: u32,
}

impl<'g> ObjectiveState<'g> {
    pub fn new(graph: &'g Graph, cover: Cover, kind: ObjectiveKind) -> Self {
        let mut state = ObjectiveState {
            graph,
            kind,
            cover,
            strength: Vec::new(),
            local: Vec::new(),
            mark: vec![false; graph.node_count()],
        };
        state.rebuild();
        state
    }

    pub fn cover(&self) -> &Cover {
        &self.cover
    }

    pub fn into_cover(self) -> Cover {
        self.cover
    }

    /// Replaces the cover and recomputes every aggregate.
    pub fn reset(&mut self, cover: Cover) {
        self.cover = cover;
        self.rebuild();
    }

    fn rebuild(&mut self) {
        let g = self.graph;
        match self.kind {
            ObjectiveKind::ExtendedModularity => {
                self.strength = vec![0.0; self.cover.slot_count()];
                for (id, members) in self.cover.communities() {
                    self.strength[id] = members
                        .iter()
                        .map(|&i| g.degree(i) as f64 / self.cover.membership_count(i) as f64)
                        .sum();
                }
            }
            ObjectiveKind::Wocc => {
                self.local = (0..g.node_count())
                    .map(|y| {
                        self.cover
                            .memberships(y)
                            .iter()
                            .map(|&c| {
                                let (t, vt) = local_triangles(g, &self.cover, y, c);
                                LocalEntry {
                                    community: c,
                                    triangles: t,
                                    partners: vt,
                                }
                            })
                            .collect()
                    })
                    .collect();
            }
        }
    }

    fn entry_mut(&mut self, y: usize, c: CommunityId) -> &mut LocalEntry {
        self.local[y]
            .iter_mut()
            .find(|e| e.community == c)
            .expect("cached membership")
    }

    fn entry(&self, y: usize, c: CommunityId) -> LocalEntry {
        *self.local[y]
            .iter()
            .find(|e| e.community == c)
            .expect("cached membership")
    }

    /// Neighbors of `v` inside `c`, each paired with whether the edge closes
    /// a triangle, and marked in the scratch array.
    fn mark_inside(&mut self, v: usize, c: CommunityId) -> Vec<(usize, bool)> {
        let g = self.graph;
        let support = g.triangle_support().of(v);
        let inside: Vec<(usize, bool)> = g
            .neighbors(v)
            .iter()
            .enumerate()
            .filter(|(_, &u)| self.cover.contains(c, u))
            .map(|(idx, &u)| (u, support[idx] > 0))
            .collect();
        for &(u, _) in &inside {
            self.mark[u] = true;
        }
        inside
    }

    fn unmark(&mut self, inside: &[(usize, bool)]) {
        for &(u, _) in inside {
            self.mark[u] = false;
        }
    }

    fn common_marked(&self, y: usize) -> u64 {
        self.graph
            .neighbors(y)
            .iter()
            .filter(|&&w| self.mark[w])
            .count() as u64
    }

    /// Removes `v` from all of its communities and returns their ids.
    pub fn detach(&mut self, v: usize) -> Vec<CommunityId> {
        let ids = self.cover.memberships(v).to_vec();
        match self.kind {
            ObjectiveKind::ExtendedModularity => {
                let share = self.graph.degree(v) as f64 / ids.len().max(1) as f64;
                for &c in &ids {
                    self.strength[c] -= share;
                }
            }
            ObjectiveKind::Wocc => {
                for &c in &ids {
                    let inside = self.mark_inside(v, c);
                    for &(y, closes) in &inside {
                        let common = self.common_marked(y);
                        let e = self.entry_mut(y, c);
                        e.triangles -= common;
                        e.partners -= closes as u32;
                    }
                    self.unmark(&inside);
                }
                self.local[v].clear();
            }
        }
        self.cover.detach(v);
        for &c in &ids {
            if self.cover.community(c).is_none() && c < self.strength.len() {
                self.strength[c] = 0.0;
            }
        }
        ids
    }

    /// Gain of adding the detached node `v` to `c`; agrees with
    /// [`delta_gain`] up to rounding.
    pub fn gain(&mut self, v: usize, c: CommunityId) -> f64 {
        let g = self.graph;
        if g.edge_count() == 0 {
            return 0.0;
        }
        match self.kind {
            ObjectiveKind::ExtendedModularity => {
                let two_m = 2.0 * g.edge_count() as f64;
                let links: f64 = g
                    .neighbors(v)
                    .iter()
                    .filter(|&&u| self.cover.contains(c, u))
                    .map(|&u| 1.0 / self.cover.membership_count(u) as f64)
                    .sum();
                (2.0 * links - 2.0 * self.strength[c] * g.degree(v) as f64 / two_m) / two_m
            }
            ObjectiveKind::Wocc => {
                let support = g.triangle_support();
                let inside = self.mark_inside(v, c);
                let commons: Vec<u64> = inside.iter().map(|&(y, _)| self.common_marked(y)).collect();
                self.unmark(&inside);

                let size = self.cover.community(c).map_or(0, |m| m.len());
                let t_own = commons.iter().sum::<u64>() / 2;
                let vt_own = inside.iter().filter(|(_, closes)| *closes).count() as u32;
                let mut total = wcc_value(g, v, t_own, vt_own, size);

                let members = self.cover.community(c).unwrap_or(&[]);
                let mut next = 0;
                for &y in members {
                    // members and `inside` are both ascending
                    let adjacent = next < inside.len() && inside[next].0 == y;
                    if support.triangles(y) == 0 {
                        if adjacent {
                            next += 1;
                        }
                        continue;
                    }
                    let e = self.entry(y, c);
                    let before = wcc_value(g, y, e.triangles, e.partners, size - 1);
                    let after = if adjacent {
                        let (_, closes) = inside[next];
                        let t = e.triangles + commons[next];
                        next += 1;
                        wcc_value(g, y, t, e.partners + closes as u32, size)
                    } else {
                        wcc_value(g, y, e.triangles, e.partners, size)
                    };
                    total += (after - before) / self.cover.membership_count(y) as f64;
                }
                total / g.node_count() as f64
            }
        }
    }

    /// Adds the detached node `v` to every community in `targets`.
    pub fn attach(&mut self, v: usize, targets: &[CommunityId]) {
        let g = self.graph;
        if self.kind == ObjectiveKind::Wocc {
            for &c in targets {
                let inside = self.mark_inside(v, c);
                let mut twice = 0u64;
                let mut vt = 0u32;
                for &(y, closes) in &inside {
                    let common = self.common_marked(y);
                    twice += common;
                    vt += closes as u32;
                    let e = self.entry_mut(y, c);
                    e.triangles += common;
                    e.partners += closes as u32;
                }
                self.unmark(&inside);
                self.local[v].push(LocalEntry {
                    community: c,
                    triangles: twice / 2,
                    partners: vt,
                });
            }
        }
        for &c in targets {
            self.cover.add_node(c, v).expect("attach to existing slot");
        }
        if self.kind == ObjectiveKind::ExtendedModularity {
            let share = g.degree(v) as f64 / targets.len().max(1) as f64;
            for &c in targets {
                if c >= self.strength.len() {
                    self.strength.resize(c + 1, 0.0);
                }
                self.strength[c] += share;
            }
        }
    }

    /// Places the detached node `v` alone in a community, reusing `slot`
    /// when it is vacant, and returns the community id.
    pub fn attach_singleton(&mut self, v: usize, slot: Option<CommunityId>) -> CommunityId {
        let id = match slot.filter(|&s| self.cover.community(s).is_none()) {
            Some(s) => s,
            None => self.cover.vacant_slot(),
        };
        self.attach(v, &[id]);
        id
    }

    pub fn value(&self) -> f64 {
        global(self.graph, &self.cover, self.kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clique_edges(nodes: &[usize]) -> Vec<(usize, usize)> {
        let mut e = Vec::new();
        for (i, &u) in nodes.iter().enumerate() {
            for &v in &nodes[i + 1..] {
                e.push((u, v));
            }
        }
        e
    }

    fn two_k4() -> Graph {
        let mut e = clique_edges(&[0, 1, 2, 3]);
        e.extend(clique_edges(&[4, 5, 6, 7]));
        e.push((3, 4));
        Graph::from_edges(8, &e)
    }

    #[test]
    fn qe_of_single_triangle_community() {
        let g = Graph::from_edges(3, &clique_edges(&[0, 1, 2]));
        let c = Cover::from_communities(3, vec![vec![0, 1, 2]]).unwrap();
        // Ordered pairs including i == j: 6 off-diagonal pairs with A = 1,
        // all 9 pairs with k_i k_j / 2m = 4/6; the sum is 6 - 6 = 0.
        assert!(qe_global(&g, &c).abs() < 1e-15);
    }

    #[test]
    fn qe_two_cliques_is_high() {
        let g = two_k4();
        let c = Cover::from_communities(8, vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7]]).unwrap();
        // m = 13, each side has 6 internal edges and degree sum 13.
        let expected = 2.0 * (6.0 / 13.0 - (13.0f64 / 26.0).powi(2));
        assert!((qe_global(&g, &c) - expected).abs() < 1e-12);
        assert!(qe_global(&g, &c) > 0.3);
    }

    #[test]
    fn wocc_of_cliques() {
        let g = Graph::from_edges(4, &clique_edges(&[0, 1, 2, 3]));
        let c = Cover::from_communities(4, vec![vec![0, 1, 2, 3]]).unwrap();
        assert!((wocc_global(&g, &c) - 1.0).abs() < 1e-15);

        let mut e = clique_edges(&[0, 1, 2]);
        e.extend(clique_edges(&[3, 4, 5]));
        let g = Graph::from_edges(6, &e);
        let c = Cover::from_communities(6, vec![vec![0, 1, 2], vec![3, 4, 5]]).unwrap();
        assert!((wocc_global(&g, &c) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn triangle_free_node_contributes_zero() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)]);
        let c = Cover::from_communities(3, vec![vec![0, 1, 2]]).unwrap();
        assert_eq!(wocc_global(&g, &c), 0.0);
    }

    #[test]
    fn gain_without_links_is_negative_for_qe() {
        let g = two_k4();
        let mut c = Cover::from_communities(8, vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7]]).unwrap();
        c.detach(7);
        // 7 has no edges into community 0
        let d = delta_gain(&g, &c, 7, 0, ObjectiveKind::ExtendedModularity).unwrap();
        assert!(d < 0.0);
    }

    #[test]
    fn gain_matches_global_difference_on_k4() {
        let g = Graph::from_edges(4, &clique_edges(&[0, 1, 2, 3]));
        for kind in [ObjectiveKind::ExtendedModularity, ObjectiveKind::Wocc] {
            let before = Cover::from_communities(4, vec![vec![0, 1, 2]]).unwrap();
            let mut after = before.clone();
            after.add_node(0, 3).unwrap();
            let expected = global(&g, &after, kind) - global(&g, &before, kind);
            let d = delta_gain(&g, &before, 3, 0, kind).unwrap();
            assert!((d - expected).abs() <= 1e-12 * expected.abs().max(1e-300), "{kind}: {d} vs {expected}");
        }
    }

    #[test]
    fn gain_errors() {
        let g = two_k4();
        let c = Cover::from_communities(8, vec![vec![0, 1, 2, 3], vec![4, 5, 6]]).unwrap();
        let kind = ObjectiveKind::Wocc;
        assert!(matches!(delta_gain(&g, &c, 7, 5, kind), Err(Error::UnknownCommunity(5))));
        assert!(matches!(delta_gain(&g, &c, 0, 0, kind), Err(Error::AlreadyMember { .. })));
        assert!(matches!(delta_gain(&g, &c, 4, 0, kind), Err(Error::NodeNotDetached(4))));
    }

    #[test]
    fn neighboring_communities_scan() {
        let g = two_k4();
        let mut c = Cover::from_communities(8, vec![vec![0, 1, 2], vec![3], vec![4, 5, 6, 7]]).unwrap();
        assert_eq!(neighboring_communities(&g, &c, 3), vec![0, 2]);
        c.detach(3);
        assert_eq!(neighboring_communities(&g, &c, 3), vec![0, 2]);
        let lonely = Graph::from_edges(2, &[]);
        let c = Cover::from_communities(2, vec![vec![0], vec![1]]).unwrap();
        assert!(neighboring_communities(&lonely, &c, 0).is_empty());
    }

    #[test]
    fn cached_state_tracks_direct_gains() {
        let g = two_k4();
        for kind in [ObjectiveKind::ExtendedModularity, ObjectiveKind::Wocc] {
            let cover = Cover::from_communities(8, vec![vec![0, 1, 2, 3, 4], vec![3, 4, 5, 6, 7]]).unwrap();
            let mut state = ObjectiveState::new(&g, cover, kind);
            for v in [3, 4, 0, 7] {
                state.detach(v);
                let cover = state.cover().clone();
                for c in neighboring_communities(&g, &cover, v) {
                    let direct = delta_gain(&g, &cover, v, c, kind).unwrap();
                    let cached = state.gain(v, c);
                    assert!((direct - cached).abs() < 1e-12, "{kind} v={v} c={c}");
                }
                let targets = neighboring_communities(&g, &cover, v);
                state.attach(v, &targets);
            }
        }
    }
}
