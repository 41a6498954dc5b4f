//! Per-feature information gain against the objective label.

use super::Sample;
use crate::error::{Error, Result};
use crate::graph::{FEATURE_COUNT, FEATURE_NAMES};
use crate::objectives::ObjectiveKind;

pub const DEFAULT_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct BinCount {
    pub lo: f64,
    pub hi: f64,
    pub qe: usize,
    pub wocc: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGain {
    pub feature: &'static str,
    pub gain: f64,
    pub bins: Vec<BinCount>,
}

fn entropy(qe: usize, wocc: usize) -> f64 {
    let n = (qe + wocc) as f64;
    [qe, wocc]
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Equal-width discretization over each feature's observed range, then
/// `H(label) - H(label | bin)` in bits. A constant feature gains 0.
pub fn information_gain(rows: &[Sample], bins: usize) -> Result<Vec<FeatureGain>> {
    if rows.is_empty() {
        return Err(Error::Config("information gain needs at least one row".into()));
    }
    if bins < 2 {
        return Err(Error::Config("bin count must be at least 2".into()));
    }
    let is_wocc = |r: &Sample| r.label == ObjectiveKind::Wocc;
    let wocc_total = rows.iter().filter(|r| is_wocc(r)).count();
    let h_label = entropy(rows.len() - wocc_total, wocc_total);
    let n = rows.len() as f64;

    let mut out = Vec::with_capacity(FEATURE_COUNT);
    for (f, name) in FEATURE_NAMES.iter().enumerate() {
        let lo = rows.iter().map(|r| r.features[f]).fold(f64::INFINITY, f64::min);
        let hi = rows.iter().map(|r| r.features[f]).fold(f64::NEG_INFINITY, f64::max);
        if !(hi > lo) {
            out.push(FeatureGain {
                feature: name,
                gain: 0.0,
                bins: vec![BinCount {
                    lo,
                    hi,
                    qe: rows.len() - wocc_total,
                    wocc: wocc_total,
                }],
            });
            continue;
        }
        let width = (hi - lo) / bins as f64;
        let mut table: Vec<BinCount> = (0..bins)
            .map(|b| BinCount {
                lo: lo + width * b as f64,
                hi: if b + 1 == bins { hi } else { lo + width * (b + 1) as f64 },
                qe: 0,
                wocc: 0,
            })
            .collect();
        for r in rows {
            let b = (((r.features[f] - lo) / width) as usize).min(bins - 1);
            if is_wocc(r) {
                table[b].wocc += 1;
            } else {
                table[b].qe += 1;
            }
        }
        let conditional: f64 = table
            .iter()
            .filter(|b| b.qe + b.wocc > 0)
            .map(|b| (b.qe + b.wocc) as f64 / n * entropy(b.qe, b.wocc))
            .sum();
        out.push(FeatureGain {
            feature: name,
            gain: (h_label - conditional).max(0.0),
            bins: table,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn row(features: [f64; 5], wocc: bool) -> Sample {
        Sample {
            features,
            label: if wocc { ObjectiveKind::Wocc } else { ObjectiveKind::ExtendedModularity },
            weight: 1.0,
        }
    }

    #[test]
    fn deterministic_binary_feature_recovers_label_entropy() {
        let rows: Vec<Sample> = (0..30)
            .map(|i| {
                let wocc = i % 3 == 0;
                row([if wocc { 1.0 } else { 0.0 }, 0.5, i as f64, 0.0, 0.0], wocc)
            })
            .collect();
        let ig = information_gain(&rows, 2).unwrap();
        assert_eq!(ig[0].gain, entropy(20, 10));
        assert_eq!(ig[1].gain, 0.0);
        assert_eq!(ig[1].bins.len(), 1);
    }

    #[test]
    fn independent_feature_gains_almost_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<Sample> = (0..1000)
            .map(|_| row([rng.gen(), rng.gen(), rng.gen(), rng.gen(), rng.gen()], rng.gen_bool(0.4)))
            .collect();
        // The plug-in estimate is biased upward by about (bins - 1) / (2 n ln 2).
        for g in information_gain(&rows, 10).unwrap() {
            assert!(g.gain < 0.02, "{} {}", g.feature, g.gain);
        }
    }

    #[test]
    fn rejects_degenerate_arguments() {
        assert!(information_gain(&[], 20).is_err());
        assert!(information_gain(&[row([0.0; 5], true)], 1).is_err());
    }
}
