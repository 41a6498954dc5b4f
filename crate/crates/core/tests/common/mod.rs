//! Independent reference implementations used by the property and
//! acceptance suites. Everything here works from plain edge lists and
//! community lists, never from library internals.

#![allow(dead_code)]

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::seq::SliceRandom;
use rand::Rng;

pub type Edges = Vec<(usize, usize)>;

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().expect("finite rational")
}

/// G(n, p) without self-loops, edges as (lo, hi).
pub fn random_graph<R: Rng>(rng: &mut R, n: usize, p: f64) -> Edges {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    edges
}

/// `k` random non-empty communities; every node lands in at least one and
/// each extra membership is added with probability `overlap`.
pub fn random_cover<R: Rng>(rng: &mut R, n: usize, k: usize, overlap: f64) -> Vec<Vec<usize>> {
    let k = k.clamp(1, n.max(1));
    let mut sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); k];
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    for (i, &v) in order.iter().enumerate() {
        let c = if i < k { i } else { rng.gen_range(0..k) };
        sets[c].insert(v);
    }
    for v in 0..n {
        for set in sets.iter_mut() {
            if rng.gen_bool(overlap) {
                set.insert(v);
            }
        }
    }
    sets.into_iter()
        .filter(|s| !s.is_empty())
        .map(|s| s.into_iter().collect())
        .collect()
}

pub fn adjacency(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut a = vec![vec![false; n]; n];
    for &(u, v) in edges {
        if u != v {
            a[u][v] = true;
            a[v][u] = true;
        }
    }
    a
}

fn membership_counts(n: usize, communities: &[Vec<usize>]) -> Vec<i64> {
    let mut o = vec![0i64; n];
    for c in communities {
        for &v in c {
            o[v] += 1;
        }
    }
    o
}

/// Q^E as a literal double sum over ordered pairs (including i = j) of
/// every community. Nodes in no community count as singletons.
pub fn exact_qe(n: usize, edges: &[(usize, usize)], communities: &[Vec<usize>]) -> BigRational {
    let a = adjacency(n, edges);
    let k: Vec<i64> = a.iter().map(|row| row.iter().filter(|&&x| x).count() as i64).collect();
    let two_m: i64 = k.iter().sum();
    if two_m == 0 {
        return rat(0, 1);
    }
    let mut comms: Vec<Vec<usize>> = communities.to_vec();
    let o = membership_counts(n, communities);
    for v in 0..n {
        if o[v] == 0 {
            comms.push(vec![v]);
        }
    }
    let o: Vec<i64> = o.iter().map(|&x| x.max(1)).collect();
    let mut total = rat(0, 1);
    for c in &comms {
        for &i in c {
            for &j in c {
                let aij = if a[i][j] { 1 } else { 0 };
                let term = rat(aij * two_m - k[i] * k[j], two_m) / rat(o[i] * o[j], 1);
                total += term;
            }
        }
    }
    total / rat(two_m, 1)
}

/// Newman modularity of a partition given as one label per node.
pub fn newman_modularity(n: usize, edges: &[(usize, usize)], part: &[usize]) -> f64 {
    let a = adjacency(n, edges);
    let k: Vec<f64> = a.iter().map(|row| row.iter().filter(|&&x| x).count() as f64).collect();
    let two_m: f64 = k.iter().sum();
    if two_m == 0.0 {
        return 0.0;
    }
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if part[i] == part[j] {
                let aij = if a[i][j] { 1.0 } else { 0.0 };
                q += aij - k[i] * k[j] / two_m;
            }
        }
    }
    q / two_m
}

/// Triangles through each node by triple enumeration, total triangles and
/// connected triplets.
pub fn brute_triangles(n: usize, edges: &[(usize, usize)]) -> (Vec<u64>, u64, u64) {
    let a = adjacency(n, edges);
    let mut per = vec![0u64; n];
    let mut total = 0;
    for x in 0..n {
        for y in x + 1..n {
            for z in y + 1..n {
                if a[x][y] && a[y][z] && a[x][z] {
                    per[x] += 1;
                    per[y] += 1;
                    per[z] += 1;
                    total += 1;
                }
            }
        }
    }
    let triplets = (0..n)
        .map(|v| {
            let d = a[v].iter().filter(|&&e| e).count() as u64;
            d * d.saturating_sub(1) / 2
        })
        .sum();
    (per, total, triplets)
}

/// WOCC from its definition: t(x, S) counts triangles x closes with two
/// nodes of S; a neighbor y is in vt(x, S) when y is in S and the edge
/// (x, y) lies on some triangle of the graph.
pub fn exact_wocc(n: usize, edges: &[(usize, usize)], communities: &[Vec<usize>]) -> BigRational {
    if n == 0 || edges.is_empty() {
        return rat(0, 1);
    }
    let a = adjacency(n, edges);
    let o = membership_counts(n, communities);
    let on_triangle = |x: usize, y: usize| a[x][y] && (0..n).any(|z| a[x][z] && a[y][z]);
    let t = |x: usize, s: &dyn Fn(usize) -> bool| -> i64 {
        let mut count = 0;
        for y in 0..n {
            for z in y + 1..n {
                if y != x && z != x && s(y) && s(z) && a[x][y] && a[x][z] && a[y][z] {
                    count += 1;
                }
            }
        }
        count
    };
    let vt = |x: usize, s: &dyn Fn(usize) -> bool| -> i64 {
        (0..n).filter(|&y| y != x && s(y) && on_triangle(x, y)).count() as i64
    };
    let mut total = rat(0, 1);
    for x in 0..n {
        if o[x] == 0 {
            continue;
        }
        let t_all = t(x, &|_| true);
        if t_all == 0 {
            continue;
        }
        let vt_all = vt(x, &|_| true);
        let mut node = rat(0, 1);
        for c in communities.iter().filter(|c| c.contains(&x)) {
            let inside = |y: usize| c.contains(&y);
            let outside = |y: usize| !c.contains(&y);
            let t_in = t(x, &inside);
            if t_in == 0 {
                continue;
            }
            let others = c.len() as i64 - 1;
            node += rat(t_in, t_all) * rat(vt_all, others + vt(x, &outside));
        }
        total += node / rat(o[x], 1);
    }
    total / rat(n as i64, 1)
}

fn co_membership(n: usize, communities: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut c = vec![vec![0usize; n]; n];
    for com in communities {
        for &u in com {
            for &v in com {
                if u != v {
                    c[u][v] += 1;
                }
            }
        }
    }
    c
}

/// Omega index by all-pairs enumeration with the printed formulas. When the
/// null model expects full agreement the index is 1 for covers that agree
/// on every pair and NaN otherwise.
pub fn brute_omega(n: usize, a: &[Vec<usize>], b: &[Vec<usize>]) -> f64 {
    let ca = co_membership(n, a);
    let cb = co_membership(n, b);
    let pairs = (n * (n - 1) / 2) as u64;
    let max_j = ca.iter().chain(&cb).flatten().copied().max().unwrap_or(0);
    let mut agree = 0u64;
    let mut ta = vec![0u64; max_j + 1];
    let mut tb = vec![0u64; max_j + 1];
    for u in 0..n {
        for v in u + 1..n {
            if ca[u][v] == cb[u][v] {
                agree += 1;
            }
            ta[ca[u][v]] += 1;
            tb[cb[u][v]] += 1;
        }
    }
    let expected: u128 = ta.iter().zip(&tb).map(|(&x, &y)| x as u128 * y as u128).sum();
    let omega_u = agree as f64 / pairs as f64;
    let omega_e = expected as f64 / (pairs as f64 * pairs as f64);
    if expected == pairs as u128 * pairs as u128 {
        return if agree == pairs { 1.0 } else { f64::NAN };
    }
    (omega_u - omega_e) / (1.0 - omega_e)
}

fn f1(x: &[usize], y: &[usize]) -> f64 {
    let inter = x.iter().filter(|v| y.contains(v)).count() as f64;
    if inter == 0.0 {
        return 0.0;
    }
    let p = inter / x.len() as f64;
    let r = inter / y.len() as f64;
    2.0 * p * r / (p + r)
}

/// Average F1 straight from its definition.
pub fn direct_average_f1(a: &[Vec<usize>], b: &[Vec<usize>]) -> f64 {
    let side = |x: &[Vec<usize>], y: &[Vec<usize>]| {
        x.iter()
            .map(|c| y.iter().map(|d| f1(c, d)).fold(0.0, f64::max))
            .sum::<f64>()
            / (2.0 * x.len() as f64)
    };
    side(a, b) + side(b, a)
}
