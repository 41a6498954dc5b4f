//! The node-centric detection loop: objective selection, initialization,
//! per-node reassignment under the beta rule, and community merging.

use std::collections::HashSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::classifier::ModelEnsemble;
use crate::cover::{CommunityId, Cover};
use crate::error::{Error, Result};
use crate::graph::{extract_features, triangle_stats, Graph};
use crate::objectives::{neighboring_communities, ObjectiveKind, ObjectiveState};

pub const DEFAULT_ALPHA: f64 = 0.8;
pub const DEFAULT_MAX_ITER: usize = 20;
pub const DEFAULT_TR_RATE: f64 = 5.0;

/// How the objective function is chosen for a run.
#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveMode {
    ForceQe,
    ForceWocc,
    /// WOCC when triangles per node reach `tr_rate`, Q^E otherwise.
    Threshold { tr_rate: f64 },
    /// Ask a trained classifier; the path is informational, the loaded model
    /// is passed to [`run`] separately.
    Model(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub beta: f64,
    pub alpha: f64,
    pub max_iter: usize,
    pub objective_mode: ObjectiveMode,
    pub rng_seed: u64,
    pub init: InitStrategy,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            beta: 1.1,
            alpha: DEFAULT_ALPHA,
            max_iter: DEFAULT_MAX_ITER,
            objective_mode: ObjectiveMode::Threshold {
                tr_rate: DEFAULT_TR_RATE,
            },
            rng_seed: 0,
            init: InitStrategy::default(),
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 1.0) || !self.beta.is_finite() {
            return Err(Error::Config(format!("beta must be >= 1, got {}", self.beta)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be positive".into()));
        }
        if let ObjectiveMode::Threshold { tr_rate } = self.objective_mode {
            if !tr_rate.is_finite() {
                return Err(Error::Config("tr_rate must be finite".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub cover: Cover,
    pub iterations_used: usize,
    pub converged: bool,
    pub objective_chosen: ObjectiveKind,
    pub objective_value: f64,
}

pub fn select_objective(
    g: &Graph,
    config: &EngineConfig,
    classifier: Option<&ModelEnsemble>,
) -> Result<ObjectiveKind> {
    Ok(match &config.objective_mode {
        ObjectiveMode::ForceQe => ObjectiveKind::ExtendedModularity,
        ObjectiveMode::ForceWocc => ObjectiveKind::Wocc,
        ObjectiveMode::Threshold { tr_rate } => threshold_choice(g, *tr_rate),
        ObjectiveMode::Model(path) => {
            let model = classifier.ok_or_else(|| {
                Error::Config(format!("model mode needs a loaded model ({})", path.display()))
            })?;
            model.predict(&extract_features(g)).0
        }
    })
}

/// The fixed routing rule: WOCC iff triangles per node is at least `tr_rate`.
pub fn threshold_choice(g: &Graph, tr_rate: f64) -> ObjectiveKind {
    let n = g.node_count();
    let rate = if n == 0 {
        0.0
    } else {
        triangle_stats(g).total_triangles as f64 / n as f64
    };
    if rate >= tr_rate {
        ObjectiveKind::Wocc
    } else {
        ObjectiveKind::ExtendedModularity
    }
}

/// Starting cover of a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum InitStrategy {
    /// Singletons under Q^E, neighborhood partition under WOCC. A WOCC gain
    /// into a singleton closes no triangle, so WOCC cannot leave singletons.
    #[default]
    Auto,
    /// Every node alone in its own community.
    Singletons,
    /// Nodes visited by descending local clustering coefficient (then
    /// degree, then id); each unassigned node takes itself and its
    /// unassigned neighbors. See [`clustering_seeds`].
    Neighborhoods,
    /// Closed neighborhoods merged at alpha before being made disjoint, see
    /// [`initialize_cover`]. On dense graphs the merge can cascade into a
    /// single community.
    MergedNeighborhoods,
}

impl InitStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            InitStrategy::Auto => "auto",
            InitStrategy::Singletons => "singletons",
            InitStrategy::Neighborhoods => "neighborhoods",
            InitStrategy::MergedNeighborhoods => "merged-neighborhoods",
        }
    }
}

impl fmt::Display for InitStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InitStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(InitStrategy::Auto),
            "singletons" => Ok(InitStrategy::Singletons),
            "neighborhoods" => Ok(InitStrategy::Neighborhoods),
            "merged-neighborhoods" => Ok(InitStrategy::MergedNeighborhoods),
            other => Err(Error::Config(format!("unknown init strategy `{other}`"))),
        }
    }
}

pub fn initial_cover(g: &Graph, strategy: InitStrategy, kind: ObjectiveKind, alpha: f64) -> Cover {
    match strategy {
        InitStrategy::Auto => match kind {
            ObjectiveKind::ExtendedModularity => initial_cover(g, InitStrategy::Singletons, kind, alpha),
            ObjectiveKind::Wocc => initial_cover(g, InitStrategy::Neighborhoods, kind, alpha),
        },
        InitStrategy::Singletons => {
            Cover::from_communities(g.node_count(), (0..g.node_count()).map(|v| [v]))
                .expect("nodes are in range")
        }
        InitStrategy::Neighborhoods => clustering_seeds(g),
        InitStrategy::MergedNeighborhoods => initialize_cover(g, alpha),
    }
}

/// Initial cover: one closed neighborhood `{v} ∪ adj(v)` per node,
/// duplicates removed, merged at `alpha`, then made disjoint by handing each
/// node to the largest community holding it (ties to the lowest id).
pub fn initialize_cover(g: &Graph, alpha: f64) -> Cover {
    neighborhood_partition(g, alpha)
}

/// Disjoint seeds grown from nodes in order of local clustering coefficient,
/// so clique interiors claim their neighborhoods before bridge nodes do.
pub fn clustering_seeds(g: &Graph) -> Cover {
    let n = g.node_count();
    let support = g.triangle_support();
    let cc = |v: usize| {
        let d = g.degree(v) as f64;
        if d < 2.0 {
            0.0
        } else {
            support.triangles(v) as f64 / (d * (d - 1.0) / 2.0)
        }
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        cc(b)
            .total_cmp(&cc(a))
            .then(g.degree(b).cmp(&g.degree(a)))
            .then(a.cmp(&b))
    });
    let mut assigned = vec![false; n];
    let mut parts = Vec::new();
    for v in order {
        if assigned[v] {
            continue;
        }
        let mut part = vec![v];
        part.extend(g.neighbors(v).iter().copied().filter(|&u| !assigned[u]));
        for &u in &part {
            assigned[u] = true;
        }
        parts.push(part);
    }
    Cover::from_communities(n, parts).expect("partition is in range")
}

fn neighborhood_partition(g: &Graph, alpha: f64) -> Cover {
    let n = g.node_count();
    let mut seen = HashSet::new();
    let mut seeds = Vec::new();
    for v in 0..n {
        let mut hood = g.neighbors(v).to_vec();
        let pos = hood.binary_search(&v).unwrap_err();
        hood.insert(pos, v);
        if seen.insert(hood.clone()) {
            seeds.push(hood);
        }
    }
    let mut cover = Cover::from_communities(n, seeds).expect("neighborhoods are in range");
    merge_in_place(&mut cover, alpha);

    let mut order: Vec<(usize, CommunityId)> =
        cover.communities().map(|(id, m)| (m.len(), id)).collect();
    order.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut assigned = vec![false; n];
    let mut parts = Vec::new();
    for (_, id) in order {
        let part: Vec<usize> = cover
            .community(id)
            .unwrap()
            .iter()
            .copied()
            .filter(|&v| !assigned[v])
            .collect();
        for &v in &part {
            assigned[v] = true;
        }
        if !part.is_empty() {
            parts.push(part);
        }
    }
    Cover::from_communities(n, parts).expect("partition is in range")
}

/// Merges every pair of communities with `|A ∩ B| / min(|A|, |B|) >= alpha`
/// until none remains. Returns the merged cover and whether anything merged.
pub fn merge_cover(cover: &Cover, alpha: f64) -> (Cover, bool) {
    let mut out = cover.clone();
    let merged = merge_in_place(&mut out, alpha);
    (out, merged)
}

/// Pairs are examined in ascending `(size, id)` order of the smaller
/// community, partners likewise, and the scan restarts after every merge.
/// The union keeps the lower of the two ids.
pub(crate) fn merge_in_place(cover: &mut Cover, alpha: f64) -> bool {
    let start = cover.len();
    let mut counts = vec![0usize; cover.slot_count()];
    let mut touched = Vec::new();
    loop {
        let mut order: Vec<(usize, CommunityId)> =
            cover.communities().map(|(id, m)| (m.len(), id)).collect();
        order.sort_unstable();
        let mut rank = vec![usize::MAX; cover.slot_count()];
        for (pos, &(_, id)) in order.iter().enumerate() {
            rank[id] = pos;
        }

        let mut pair = None;
        for (pos, &(size, a)) in order.iter().enumerate() {
            for &v in cover.community(a).unwrap() {
                for &b in cover.memberships(v) {
                    if b != a {
                        if counts[b] == 0 {
                            touched.push(b);
                        }
                        counts[b] += 1;
                    }
                }
            }
            let partner = touched
                .iter()
                .copied()
                .filter(|&b| rank[b] > pos && counts[b] as f64 / size as f64 >= alpha)
                .min_by_key(|&b| rank[b]);
            for b in touched.drain(..) {
                counts[b] = 0;
            }
            if let Some(b) = partner {
                pair = Some((a.min(b), a.max(b)));
                break;
            }
        }

        match pair {
            None => break,
            Some((keep, absorb)) => {
                for v in cover.remove_community(absorb) {
                    if !cover.contains(keep, v) {
                        cover.add_node(keep, v).expect("live slot");
                    }
                }
            }
        }
    }
    cover.len() < start
}

/// Runs the detection loop after choosing the objective.
pub fn run(g: &Graph, config: &EngineConfig, classifier: Option<&ModelEnsemble>) -> Result<RunResult> {
    config.validate()?;
    let kind = select_objective(g, config, classifier)?;
    Ok(run_with_objective(g, config, kind))
}

/// Candidate set under the beta rule: every community whose gain times
/// `beta` reaches the maximum, provided the maximum is positive.
pub fn beta_candidates(gains: &[(CommunityId, f64)], beta: f64) -> Vec<CommunityId> {
    let max = gains.iter().map(|&(_, d)| d).fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return Vec::new();
    }
    let mut chosen: Vec<CommunityId> = gains
        .iter()
        .filter(|&&(_, d)| d * beta >= max)
        .map(|&(c, _)| c)
        .collect();
    chosen.sort_unstable();
    chosen
}

pub fn run_with_objective(g: &Graph, config: &EngineConfig, kind: ObjectiveKind) -> RunResult {
    let n = g.node_count();
    let mut state = ObjectiveState::new(g, initial_cover(g, config.init, kind, config.alpha), kind);
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut iterations = 0;
    let mut stable;

    loop {
        stable = 0;
        order.shuffle(&mut rng);
        for &v in &order {
            let before = state.detach(v);
            let candidates = neighboring_communities(g, state.cover(), v);
            let gains: Vec<(CommunityId, f64)> =
                candidates.iter().map(|&c| (c, state.gain(v, c))).collect();
            let mut chosen = beta_candidates(&gains, config.beta);
            if chosen.is_empty() {
                // A community v was alone in is vacant now; reuse it so an
                // unchanged singleton counts as stable.
                let slot = before
                    .iter()
                    .copied()
                    .find(|&c| state.cover().community(c).is_none());
                chosen = vec![state.attach_singleton(v, slot)];
            } else {
                state.attach(v, &chosen);
            }
            if chosen == before {
                stable += 1;
            }
        }

        let mut cover = state.cover().clone();
        if merge_in_place(&mut cover, config.alpha) {
            state.reset(cover);
            stable = 0;
        }
        iterations += 1;
        debug!(
            "iteration {iterations}: {stable}/{n} stable, {} communities",
            state.cover().len()
        );
        if stable == n || iterations == config.max_iter {
            break;
        }
    }

    let objective_value = state.value();
    RunResult {
        cover: state.into_cover().compact(),
        iterations_used: iterations,
        converged: stable == n,
        objective_chosen: kind,
        objective_value,
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

    fn cfg(beta: f64, mode: ObjectiveMode) -> EngineConfig {
        EngineConfig {
            beta,
            objective_mode: mode,
            ..EngineConfig::default()
        }
    }

    #[test]
    fn merge_at_exact_threshold() {
        let c = Cover::from_communities(7, vec![vec![1, 2, 3, 4, 5], vec![1, 2, 3, 4, 6]]).unwrap();
        let (m, merged) = merge_cover(&c, 0.8);
        assert!(merged);
        assert_eq!(m.canonical(), vec![vec![1, 2, 3, 4, 5, 6]]);
        let (m, merged) = merge_cover(&c, 0.81);
        assert!(!merged);
        assert_eq!(m, c);
    }

    #[test]
    fn merge_disjoint_and_nested() {
        let c = Cover::from_communities(6, vec![vec![0, 1, 2], vec![3, 4, 5]]).unwrap();
        assert!(!merge_cover(&c, 0.5).1);
        let c = Cover::from_communities(6, vec![vec![0, 1, 2, 3], vec![1, 2]]).unwrap();
        let (m, merged) = merge_cover(&c, 1.0);
        assert!(merged);
        assert_eq!(m.canonical(), vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn initialization_examples() {
        assert!(initialize_cover(&Graph::from_edges(0, &[]), 0.8).is_empty());
        let k3 = Graph::from_edges(3, &clique_edges(&[0, 1, 2]));
        assert_eq!(initialize_cover(&k3, 0.8).canonical(), vec![vec![0, 1, 2]]);
        // {0,1}, {0,1,2}, {1,2}: both pairs nest inside the middle set.
        let path = Graph::from_edges(3, &[(0, 1), (1, 2)]);
        assert_eq!(initialize_cover(&path, 0.8).canonical(), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn initialization_is_a_partition() {
        let g = two_k4();
        let c = initialize_cover(&g, 0.8);
        for v in 0..8 {
            assert_eq!(c.membership_count(v), 1);
        }
    }

    #[test]
    fn clustering_seeds_start_from_clique_interiors() {
        let g = two_k4();
        let c = clustering_seeds(&g);
        assert_eq!(c.canonical(), vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7]]);
        assert!(clustering_seeds(&Graph::from_edges(0, &[])).is_empty());
    }

    #[test]
    fn auto_init_depends_on_objective() {
        let g = two_k4();
        let qe = initial_cover(&g, InitStrategy::Auto, ObjectiveKind::ExtendedModularity, 0.8);
        assert_eq!(qe.len(), 8);
        let wocc = initial_cover(&g, InitStrategy::Auto, ObjectiveKind::Wocc, 0.8);
        assert_eq!(wocc, clustering_seeds(&g));
        let merged = initial_cover(&g, InitStrategy::MergedNeighborhoods, ObjectiveKind::Wocc, 0.8);
        assert_eq!(merged, initialize_cover(&g, 0.8));
    }

    #[test]
    fn init_strategy_names_round_trip() {
        for s in [
            InitStrategy::Auto,
            InitStrategy::Singletons,
            InitStrategy::Neighborhoods,
            InitStrategy::MergedNeighborhoods,
        ] {
            assert_eq!(s.as_str().parse::<InitStrategy>().unwrap(), s);
        }
        assert!("bogus".parse::<InitStrategy>().is_err());
    }

    #[test]
    fn wocc_recovers_two_cliques() {
        let g = two_k4();
        let r = run(&g, &cfg(1.01, ObjectiveMode::ForceWocc), None).unwrap();
        assert_eq!(r.cover.canonical(), vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7]]);
    }

    #[test]
    fn threshold_routing() {
        let k3 = Graph::from_edges(3, &clique_edges(&[0, 1, 2]));
        let c = cfg(1.1, ObjectiveMode::Threshold { tr_rate: 5.0 });
        assert_eq!(select_objective(&k3, &c, None).unwrap(), ObjectiveKind::ExtendedModularity);
        // K12 has 220 triangles over 12 nodes, about 18.3 per node.
        let nodes: Vec<usize> = (0..12).collect();
        let k12 = Graph::from_edges(12, &clique_edges(&nodes));
        assert_eq!(select_objective(&k12, &c, None).unwrap(), ObjectiveKind::Wocc);
        let forced = cfg(1.1, ObjectiveMode::ForceWocc);
        assert_eq!(select_objective(&k3, &forced, None).unwrap(), ObjectiveKind::Wocc);
        let model = cfg(1.1, ObjectiveMode::Model("missing.model".into()));
        assert!(select_objective(&k3, &model, None).is_err());
    }

    #[test]
    fn two_cliques_recovered() {
        let g = two_k4();
        let r = run(&g, &cfg(1.01, ObjectiveMode::ForceQe), None).unwrap();
        assert_eq!(r.cover.canonical(), vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7]]);
        assert!(r.converged);
        for v in 0..8 {
            assert_eq!(r.cover.membership_count(v), 1);
        }
    }

    #[test]
    fn beta_rule_admits_near_maxima() {
        let gains = [(0, 0.10), (1, 0.06), (2, -0.2), (3, 0.10)];
        assert_eq!(beta_candidates(&gains, 1.01), vec![0, 3]);
        assert_eq!(beta_candidates(&gains, 2.0), vec![0, 1, 3]);
        assert!(beta_candidates(&[(0, 0.0), (1, -1.0)], 2.0).is_empty());
        assert!(beta_candidates(&[], 2.0).is_empty());
    }

    #[test]
    fn single_iteration_bookkeeping() {
        let g = two_k4();
        let config = EngineConfig {
            max_iter: 1,
            ..cfg(1.01, ObjectiveMode::ForceWocc)
        };
        let r = run(&g, &config, None).unwrap();
        assert_eq!(r.iterations_used, 1);
        let again = run(&g, &config, None).unwrap();
        assert_eq!(r.converged, again.converged);
        assert_eq!(r.cover, again.cover);
    }

    #[test]
    fn rejects_bad_config() {
        let g = two_k4();
        for bad in [
            cfg(0.5, ObjectiveMode::ForceQe),
            EngineConfig { alpha: 0.0, ..cfg(1.0, ObjectiveMode::ForceQe) },
            EngineConfig { max_iter: 0, ..cfg(1.0, ObjectiveMode::ForceQe) },
        ] {
            assert!(run(&g, &bad, None).is_err());
        }
    }
}
