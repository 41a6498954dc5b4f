//! Planted overlapping partitions for desk-scale experiments.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cover::Cover;
use crate::error::{Error, Result};
use crate::cover::write_cover;
use crate::graph::{write_edge_list, Graph};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedSpec {
    pub n: usize,
    pub communities: usize,
    /// Fraction of nodes given a second community.
    pub overlap_fraction: f64,
    pub p_in: f64,
    pub p_out: f64,
    pub seed: u64,
}

/// Samples a graph around a planted cover.
///
/// Nodes are shuffled and dealt round-robin to communities; the first
/// `floor(overlap_fraction * n)` nodes of a second shuffle also join one
/// other community chosen uniformly. Each pair sharing a community is linked
/// with probability `p_in`, every other pair with `p_out`.
pub fn generate_test_network(spec: &PlantedSpec) -> Result<(Graph, Cover)> {
    let PlantedSpec {
        n,
        communities,
        overlap_fraction,
        p_in,
        p_out,
        seed,
    } = *spec;
    if !(0.0 <= p_out && p_out < p_in && p_in <= 1.0) {
        return Err(Error::Config(format!(
            "need 0 <= p_out < p_in <= 1, got p_out={p_out} p_in={p_in}"
        )));
    }
    if !(0.0..1.0).contains(&overlap_fraction) {
        return Err(Error::Config(format!("overlap fraction {overlap_fraction} outside [0, 1)")));
    }
    if communities == 0 || communities > n {
        return Err(Error::Config(format!("cannot plant {communities} communities in {n} nodes")));
    }
    let overlapping = (overlap_fraction * n as f64).floor() as usize;
    if overlapping > 0 && communities < 2 {
        return Err(Error::Config("overlap needs at least two communities".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); communities];
    let mut home = vec![0; n];
    for (i, &v) in order.iter().enumerate() {
        members[i % communities].push(v);
        home[v] = i % communities;
    }
    order.shuffle(&mut rng);
    for &v in &order[..overlapping] {
        let shift = rng.gen_range(1..communities);
        members[(home[v] + shift) % communities].push(v);
    }
    let cover = Cover::from_communities(n, members)?;

    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let shared = cover.memberships(u).iter().any(|c| cover.contains(*c, v));
            let p = if shared { p_in } else { p_out };
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Ok((Graph::from_edges(n, &edges), cover))
}

/// A small mixed corpus: even entries plant many small, dense, overlapping
/// communities; odd entries plant fewer, sparser, disjoint ones. Parameters
/// are jittered from `seed`.
pub fn toy_corpus(count: usize, seed: u64) -> Vec<(String, PlantedSpec)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let n = rng.gen_range(120..=180);
            let spec = if i % 2 == 0 {
                PlantedSpec {
                    n,
                    communities: n / rng.gen_range(5..=6),
                    overlap_fraction: rng.gen_range(0.25..0.35),
                    p_in: rng.gen_range(0.88..0.95),
                    p_out: rng.gen_range(0.002..0.0035),
                    seed: rng.gen(),
                }
            } else {
                PlantedSpec {
                    n,
                    communities: n / rng.gen_range(5..=25),
                    overlap_fraction: 0.0,
                    p_in: rng.gen_range(0.3..0.7),
                    p_out: rng.gen_range(0.01..0.05),
                    seed: rng.gen(),
                }
            };
            (format!("toy{i:03}"), spec)
        })
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?))
}

/// Writes each network as `graphs/<id>.txt` and `truth/<id>.txt` under
/// `dir`, plus a `manifest.tsv` readable by [`super::read_manifest`].
/// Returns the manifest path.
pub fn write_corpus(dir: &Path, specs: &[(String, PlantedSpec)], comments: &[String]) -> Result<PathBuf> {
    for sub in ["graphs", "truth"] {
        let path = dir.join(sub);
        fs::create_dir_all(&path).map_err(|e| Error::io(&path, e))?;
    }
    let manifest = dir.join("manifest.tsv");
    let mut out = create(&manifest)?;
    let io = |e| Error::io(&manifest, e);
    for line in comments {
        writeln!(out, "# {line}").map_err(io)?;
    }
    writeln!(out, "id\tgraph_path\ttruth_path\tn").map_err(io)?;
    for (id, spec) in specs {
        let (g, truth) = generate_test_network(spec)?;
        let graph_rel = format!("graphs/{id}.txt");
        let truth_rel = format!("truth/{id}.txt");
        for (rel, is_graph) in [(&graph_rel, true), (&truth_rel, false)] {
            let path = dir.join(rel);
            let mut w = create(&path)?;
            if is_graph {
                write_edge_list(&mut w, &g)
            } else {
                write_cover(&mut w, &truth, &g)
            }
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(&path, e))?;
        }
        writeln!(out, "{id}\t{graph_rel}\t{truth_rel}\t{}", spec.n).map_err(io)?;
    }
    out.flush().map_err(io)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> PlantedSpec {
        PlantedSpec {
            n: 60,
            communities: 3,
            overlap_fraction: 0.1,
            p_in: 0.5,
            p_out: 0.02,
            seed: 7,
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let (g1, c1) = generate_test_network(&spec()).unwrap();
        let (g2, c2) = generate_test_network(&spec()).unwrap();
        assert_eq!(g1.edges().collect::<Vec<_>>(), g2.edges().collect::<Vec<_>>());
        assert_eq!(c1, c2);
        let (g3, _) = generate_test_network(&PlantedSpec { seed: 8, ..spec() }).unwrap();
        assert_ne!(g1.edges().collect::<Vec<_>>(), g3.edges().collect::<Vec<_>>());
    }

    #[test]
    fn overlap_counts_match() {
        let (_, cover) = generate_test_network(&spec()).unwrap();
        let doubled = (0..60).filter(|&v| cover.membership_count(v) == 2).count();
        assert_eq!(doubled, 6);
        assert!((0..60).all(|v| cover.membership_count(v) >= 1));
    }

    #[test]
    fn no_overlap_gives_partition() {
        let (_, cover) = generate_test_network(&PlantedSpec {
            overlap_fraction: 0.0,
            ..spec()
        })
        .unwrap();
        assert!((0..60).all(|v| cover.membership_count(v) == 1));
        assert_eq!(cover.len(), 3);
    }

    #[test]
    fn zero_p_out_keeps_edges_inside_communities() {
        let (g, cover) = generate_test_network(&PlantedSpec { p_out: 0.0, ..spec() }).unwrap();
        for (u, v) in g.edges() {
            assert!(cover.memberships(u).iter().any(|&c| cover.contains(c, v)));
        }
    }

    #[test]
    fn toy_corpus_is_reproducible_and_mixed() {
        let a = toy_corpus(6, 3);
        assert_eq!(a, toy_corpus(6, 3));
        assert_ne!(a, toy_corpus(6, 4));
        assert!(a.iter().step_by(2).all(|(_, s)| s.overlap_fraction > 0.0));
        assert!(a.iter().skip(1).step_by(2).all(|(_, s)| s.overlap_fraction == 0.0));
        for (_, spec) in &a {
            assert!(generate_test_network(spec).is_ok());
        }
    }

    #[test]
    fn written_corpus_reads_back() {
        let dir = tempfile::tempdir().unwrap();
        let specs = toy_corpus(2, 1);
        let manifest = write_corpus(dir.path(), &specs, &["test".into()]).unwrap();
        let records = super::super::read_manifest(&manifest).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].lfr.n, Some(specs[0].1.n as f64));
        let (g, truth) = super::super::load_network(&records[1].graph_path, &records[1].truth_path).unwrap();
        let (g0, truth0) = generate_test_network(&specs[1].1).unwrap();
        assert_eq!(g.node_count(), g0.node_count());
        assert_eq!(g.edge_count(), g0.edge_count());
        assert_eq!(truth.len(), truth0.len());
    }

    #[test]
    fn rejects_infeasible_specs() {
        for bad in [
            PlantedSpec { p_in: 0.01, ..spec() },
            PlantedSpec { overlap_fraction: 1.0, ..spec() },
            PlantedSpec { communities: 0, ..spec() },
            PlantedSpec { communities: 61, ..spec() },
            PlantedSpec {
                communities: 1,
                overlap_fraction: 0.2,
                ..spec()
            },
        ] {
            assert!(generate_test_network(&bad).is_err(), "{bad:?}");
        }
    }
}
