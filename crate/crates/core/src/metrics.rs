//! Cover comparison: overlapping NMI (LFK variant), Omega index and average
//! F1, plus the best-match reduction used for real-world ground truth.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::cover::Cover;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MetricKind {
    Onmi,
    Omega,
    AvgF1,
    /// Arithmetic mean of the other three.
    Average,
}

impl MetricKind {
    pub const ALL: [MetricKind; 4] = [
        MetricKind::Onmi,
        MetricKind::Omega,
        MetricKind::AvgF1,
        MetricKind::Average,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Onmi => "onmi",
            MetricKind::Omega => "omega",
            MetricKind::AvgF1 => "avgf1",
            MetricKind::Average => "average",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "onmi" => Ok(MetricKind::Onmi),
            "omega" => Ok(MetricKind::Omega),
            "avgf1" | "avg_f1" | "f1" => Ok(MetricKind::AvgF1),
            "average" | "metrics_average" => Ok(MetricKind::Average),
            other => Err(Error::Config(format!("unknown metric `{other}`"))),
        }
    }
}

pub const ONMI_VARIANT: &str = "LFK";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreReport {
    pub onmi: f64,
    pub omega: f64,
    pub avg_f1: f64,
    pub metrics_average: f64,
}

impl ScoreReport {
    pub fn new(onmi: f64, omega: f64, avg_f1: f64) -> Self {
        ScoreReport {
            onmi,
            omega,
            avg_f1,
            metrics_average: (onmi + omega + avg_f1) / 3.0,
        }
    }

    pub fn get(&self, metric: MetricKind) -> f64 {
        match metric {
            MetricKind::Onmi => self.onmi,
            MetricKind::Omega => self.omega,
            MetricKind::AvgF1 => self.avg_f1,
            MetricKind::Average => self.metrics_average,
        }
    }

    pub fn onmi_variant(&self) -> &'static str {
        ONMI_VARIANT
    }
}

fn check_universe(cover: &Cover, universe: usize) -> Result<()> {
    for (_, members) in cover.communities() {
        if let Some(&v) = members.last() {
            if v >= universe {
                return Err(Error::NodeOutOfRange {
                    node: v,
                    node_count: universe,
                });
            }
        }
    }
    Ok(())
}

fn h(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

/// Intersection sizes of every community of `a` with the communities of
/// `b` it touches, keyed by position in `b`.
fn intersections(a: &Cover, b: &Cover) -> Vec<HashMap<usize, usize>> {
    let position: HashMap<usize, usize> = b
        .communities()
        .enumerate()
        .map(|(pos, (id, _))| (id, pos))
        .collect();
    a.communities()
        .map(|(_, members)| {
            let mut counts = HashMap::new();
            for &v in members {
                for id in b.memberships(v) {
                    *counts.entry(position[id]).or_insert(0) += 1;
                }
            }
            counts
        })
        .collect()
}

/// Normalized conditional entropy `H(X|Y)_norm` averaged over the
/// communities of `x`, with the LFK admissibility condition.
fn normalized_conditional_entropy(x: &Cover, y: &Cover, n: usize) -> f64 {
    let nf = n as f64;
    let y_sizes: Vec<usize> = y.communities().map(|(_, m)| m.len()).collect();
    let inter = intersections(x, y);
    let mut total = 0.0;
    for ((_, xk), overlaps) in x.communities().zip(&inter) {
        let size_x = xk.len();
        let px = size_x as f64 / nf;
        let hx = h(px) + h(1.0 - px);
        if hx == 0.0 {
            // X_k covers nothing or everything: fully determined.
            continue;
        }
        let mut best = hx;
        for (l, &size_y) in y_sizes.iter().enumerate() {
            let both = overlaps.get(&l).copied().unwrap_or(0);
            let p11 = both as f64 / nf;
            let p10 = (size_x - both) as f64 / nf;
            let p01 = (size_y - both) as f64 / nf;
            let p00 = (n + both - size_x - size_y) as f64 / nf;
            if h(p11) + h(p00) > h(p01) + h(p10) {
                let py = size_y as f64 / nf;
                let hy = h(py) + h(1.0 - py);
                let conditional = h(p11) + h(p10) + h(p01) + h(p00) - hy;
                if conditional < best {
                    best = conditional;
                }
            }
        }
        total += best / hx;
    }
    total / x.len() as f64
}

/// Overlapping NMI: `1 - (H(X|Y)_norm + H(Y|X)_norm) / 2`.
pub fn onmi(a: &Cover, b: &Cover, universe: usize) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Metric("ONMI of an empty cover".into()));
    }
    check_universe(a, universe)?;
    check_universe(b, universe)?;
    let hxy = normalized_conditional_entropy(a, b, universe);
    let hyx = normalized_conditional_entropy(b, a, universe);
    Ok((1.0 - 0.5 * (hxy + hyx)).clamp(0.0, 1.0))
}

/// Co-membership counts of every pair that shares at least one community.
fn pair_counts(cover: &Cover) -> HashMap<(usize, usize), usize> {
    let mut counts = HashMap::new();
    for (_, members) in cover.communities() {
        for (i, &u) in members.iter().enumerate() {
            for &v in &members[i + 1..] {
                *counts.entry((u, v)).or_insert(0) += 1;
            }
        }
    }
    counts
}

/// Omega index over all unordered pairs of the universe. Pairs outside every
/// community fall in `t_0`.
pub fn omega_index(a: &Cover, b: &Cover, universe: usize) -> Result<f64> {
    if universe < 2 {
        return Err(Error::Metric("Omega index needs at least two nodes".into()));
    }
    check_universe(a, universe)?;
    check_universe(b, universe)?;
    let pairs = universe as u64 * (universe as u64 - 1) / 2;
    let ca = pair_counts(a);
    let cb = pair_counts(b);

    let mut agree = 0u64;
    let mut union = ca.len() as u64;
    for (pair, &j) in &cb {
        match ca.get(pair) {
            Some(&i) if i == j => agree += 1,
            Some(_) => {}
            None => union += 1,
        }
    }
    // pairs in neither map sit in t_0 of both covers
    agree += pairs - union;

    let histogram = |counts: &HashMap<(usize, usize), usize>| {
        let mut hist = vec![pairs - counts.len() as u64];
        for &j in counts.values() {
            if hist.len() <= j {
                hist.resize(j + 1, 0);
            }
            hist[j] += 1;
        }
        hist
    };
    let expected: u128 = histogram(&ca)
        .iter()
        .zip(&histogram(&cb))
        .map(|(&x, &y)| x as u128 * y as u128)
        .sum();
    let omega_u = agree as f64 / pairs as f64;
    let omega_e = expected as f64 / (pairs as f64 * pairs as f64);

    if expected == pairs as u128 * pairs as u128 {
        return if agree == pairs {
            Ok(1.0)
        } else {
            Err(Error::Metric("degenerate null model".into()))
        };
    }
    Ok((omega_u - omega_e) / (1.0 - omega_e))
}

/// `F1` of two node sets given their intersection size.
pub fn f1_from_sizes(inter: usize, size_a: usize, size_b: usize) -> f64 {
    if inter == 0 {
        return 0.0;
    }
    let precision = inter as f64 / size_a as f64;
    let recall = inter as f64 / size_b as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Best F1 of each community of `a` against any community of `b`.
fn best_f1(a: &Cover, b: &Cover) -> Vec<(f64, Option<usize>)> {
    let b_sizes: Vec<usize> = b.communities().map(|(_, m)| m.len()).collect();
    a.communities()
        .zip(intersections(a, b))
        .map(|((_, members), overlaps)| {
            let mut best = (0.0, None);
            let mut touched: Vec<(usize, usize)> = overlaps.into_iter().collect();
            touched.sort_unstable();
            for (pos, inter) in touched {
                let f = f1_from_sizes(inter, members.len(), b_sizes[pos]);
                if best.1.is_none() || f > best.0 {
                    best = (f, Some(pos));
                }
            }
            best
        })
        .collect()
}

pub fn average_f1(a: &Cover, b: &Cover) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Metric("average F1 of an empty cover".into()));
    }
    let side = |x: &Cover, y: &Cover| {
        best_f1(x, y).iter().map(|(f, _)| f).sum::<f64>() / (2.0 * x.len() as f64)
    };
    Ok(side(a, b) + side(b, a))
}

/// For every ground-truth community, the detected community with the highest
/// F1 (first in slot order on ties), without duplicates.
pub fn best_match_subset(truth: &Cover, detected: &Cover) -> Result<Cover> {
    if detected.is_empty() {
        return Err(Error::Metric("best match against an empty cover".into()));
    }
    let detected_lists: Vec<&[usize]> = detected.communities().map(|(_, m)| m).collect();
    let mut picked: Vec<usize> = best_f1(truth, detected)
        .into_iter()
        .map(|(_, pos)| pos.unwrap_or(0))
        .collect();
    picked.sort_unstable();
    picked.dedup();
    Cover::from_communities(
        detected.node_count(),
        picked.into_iter().map(|pos| detected_lists[pos].iter().copied()),
    )
}

/// Scores `detected` against `truth`, optionally after reducing `detected`
/// to its best matches.
pub fn score(detected: &Cover, truth: &Cover, universe: usize, use_best_match: bool) -> Result<ScoreReport> {
    let reduced;
    let detected = if use_best_match {
        reduced = best_match_subset(truth, detected)?;
        &reduced
    } else {
        detected
    };
    Ok(ScoreReport::new(
        onmi(detected, truth, universe)?,
        omega_index(detected, truth, universe)?,
        average_f1(detected, truth)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cover(n: usize, c: &[&[usize]]) -> Cover {
        Cover::from_communities(n, c.iter().map(|m| m.to_vec())).unwrap()
    }

    #[test]
    fn identical_covers_score_one() {
        let c = cover(8, &[&[0, 1, 2], &[2, 3, 4, 5], &[6, 7]]);
        for best in [false, true] {
            let r = score(&c, &c, 8, best).unwrap();
            assert!((r.onmi - 1.0).abs() < 1e-12);
            assert!((r.omega - 1.0).abs() < 1e-12);
            assert!((r.avg_f1 - 1.0).abs() < 1e-12);
            assert!((r.metrics_average - (r.onmi + r.omega + r.avg_f1) / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn avg_f1_worked_example() {
        let a = cover(5, &[&[0, 1, 2]]);
        let b = cover(5, &[&[0, 1], &[3, 4]]);
        assert!((average_f1(&a, &b).unwrap() - 0.6).abs() < 1e-12);
        assert!((average_f1(&b, &a).unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn omega_two_pairings() {
        // On 6 pairs: c1 puts {0,1},{2,3} together, c2 puts {0,2},{1,3}.
        // Agreement on the 2 pairs absent from both: omega_u = 2/6.
        // t_0 sizes 4 and 4, t_1 sizes 2 and 2: omega_e = (16 + 4)/36.
        let a = cover(4, &[&[0, 1], &[2, 3]]);
        let b = cover(4, &[&[0, 2], &[1, 3]]);
        let wu = 2.0 / 6.0;
        let we = 20.0 / 36.0;
        let expected = (wu - we) / (1.0 - we);
        assert!((omega_index(&a, &b, 4).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn omega_degenerate_null_model() {
        // Every pair co-occurs exactly once in both covers.
        let a = cover(3, &[&[0, 1, 2]]);
        assert_eq!(omega_index(&a, &a, 3).unwrap(), 1.0);
        assert!(omega_index(&a, &a, 1).is_err());
    }

    #[test]
    fn onmi_universe_against_singletons() {
        // X = one community spanning the universe: H(X_1) = 0, term skipped.
        // Y = 8 singletons: the only partner of each Y_l is X_1, which has
        // zero entropy, so H(Y_l | X) = H(Y_l). ONMI = 1 - (0 + 1)/2.
        let all: Vec<usize> = (0..8).collect();
        let a = cover(8, &[&all]);
        let singles: Vec<Vec<usize>> = (0..8).map(|v| vec![v]).collect();
        let b = Cover::from_communities(8, singles).unwrap();
        assert!((onmi(&a, &b, 8).unwrap() - 0.5).abs() < 1e-12);
        assert!(onmi(&a, &Cover::new(8), 8).is_err());
    }

    #[test]
    fn best_match_dedups() {
        let truth = cover(6, &[&[0, 1, 2], &[0, 1, 3]]);
        let detected = cover(6, &[&[0, 1, 2, 3], &[4, 5]]);
        let d = best_match_subset(&truth, &detected).unwrap();
        assert_eq!(d.canonical(), vec![vec![0, 1, 2, 3]]);
        let d = best_match_subset(&truth, &truth).unwrap();
        assert_eq!(d, truth);
    }

    #[test]
    fn best_match_changes_scores_with_extra_communities() {
        let truth = cover(10, &[&[0, 1, 2, 3, 4], &[5, 6, 7, 8, 9]]);
        let detected = cover(
            10,
            &[&[0, 1, 2, 3, 4], &[5, 6, 7, 8, 9], &[0, 5], &[1, 6], &[2, 7], &[3, 8]],
        );
        let plain = score(&detected, &truth, 10, false).unwrap();
        let matched = score(&detected, &truth, 10, true).unwrap();
        assert!(matched.avg_f1 > plain.avg_f1);
        assert!((matched.avg_f1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn metric_names_round_trip() {
        for m in MetricKind::ALL {
            assert_eq!(m.as_str().parse::<MetricKind>().unwrap(), m);
        }
    }
}
