#![allow(dead_code)]

use std::sync::Arc;

use cantor_coarse::metric::FiniteMetricSpace;
use cantor_coarse::multimap::MultiMap;
use cantor_coarse::rational::{int, ratio, Rational};
use cantor_coarse::tower::{ScalingFunction, Tower};
use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Explicit pruned tower with at most `max_levels` levels and about `max_nodes` nodes.
pub fn random_tower(r: &mut ChaCha8Rng, max_levels: usize, max_nodes: usize) -> Tower {
    let levels = r.gen_range(1..=max_levels);
    let mut per_level: Vec<Vec<Option<usize>>> = vec![vec![None]];
    let mut total = 1;
    for _ in 1..levels {
        let above = per_level.last().unwrap().len();
        let mut row = Vec::new();
        for p in 0..above {
            let budget = max_nodes.saturating_sub(total + row.len() + (above - p - 1));
            let kids = r.gen_range(1..=3usize).min(budget.max(1));
            row.extend(std::iter::repeat(Some(p)).take(kids));
        }
        total += row.len();
        per_level.push(row);
    }
    per_level.reverse();
    Tower::from_parents(Tower::integer_labels(levels), per_level).expect("valid random tower")
}

/// Strictly increasing positive rationals.
pub fn random_scaling(r: &mut ChaCha8Rng, levels: usize) -> ScalingFunction {
    let mut acc = Rational::zero();
    let values = (0..levels)
        .map(|_| {
            acc += ratio(r.gen_range(1..=12), r.gen_range(1..=4));
            acc.clone()
        })
        .collect();
    ScalingFunction::new(values).unwrap()
}

/// Shortest-path metric of a random complete weighted graph.
pub fn random_space(r: &mut ChaCha8Rng, max_points: usize) -> FiniteMetricSpace {
    let n = r.gen_range(1..=max_points);
    let den = r.gen_range(1..=3i64);
    let mut d = vec![vec![0i64; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let w = r.gen_range(1..=24);
            d[i][j] = w;
            d[j][i] = w;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    let ids = (0..n).map(|i| format!("p{i}")).collect();
    FiniteMetricSpace::from_fn(ids, |i, j| ratio(d[i][j], den)).unwrap()
}

/// Boundary of a random tower under a random scaling.
pub fn random_ultrametric(r: &mut ChaCha8Rng, max_points: usize) -> FiniteMetricSpace {
    loop {
        let t = random_tower(r, 5, 3 * max_points);
        if t.nodes(0).len() > max_points {
            continue;
        }
        let f = random_scaling(r, t.level_count());
        return t.boundary(&f).unwrap().0;
    }
}

/// Random total surjective relation.
pub fn random_relation(r: &mut ChaCha8Rng, x: Arc<FiniteMetricSpace>, y: Arc<FiniteMetricSpace>) -> MultiMap {
    let mut pairs = Vec::new();
    for p in 0..x.len() {
        for _ in 0..r.gen_range(1..=2) {
            pairs.push((p, r.gen_range(0..y.len())));
        }
    }
    for q in 0..y.len() {
        pairs.push((r.gen_range(0..x.len()), q));
    }
    MultiMap::new(x, y, pairs).unwrap()
}

/// Random increasing level list drawn from the distance values of a space (plus one past the diameter).
pub fn random_levels(r: &mut ChaCha8Rng, space: &FiniteMetricSpace) -> Vec<Rational> {
    let mut pool: Vec<Rational> = space.distance_values().iter().filter(|d| !d.is_zero()).cloned().collect();
    pool.push(space.diameter() + int(1));
    pool.shuffle(r);
    let k = r.gen_range(1..=pool.len().min(5));
    let mut levels: Vec<Rational> = pool.into_iter().take(k).collect();
    levels.push(space.diameter() + int(1));
    levels.sort();
    levels.dedup();
    levels
}

/// Source tower and a target tower whose step degrees dominate the source's along `level_map`.
pub fn random_embedding_pair(r: &mut ChaCha8Rng, iso: bool) -> (Tower, Tower, Vec<usize>) {
    loop {
        let s = random_tower(r, 4, 60);
        let levels = s.level_count();
        let prof = s.degree_profile();
        let big: Vec<u64> = (0..levels - 1).map(|l| prof.big_deg(l, l + 1).to_string().parse().unwrap()).collect();
        let small: Vec<u64> = (0..levels - 1).map(|l| prof.deg(l, l + 1).to_string().parse().unwrap()).collect();
        if iso {
            if big != small {
                continue;
            }
            let t = Tower::homogeneous(Tower::integer_labels(levels), &big.iter().map(|&d| d.into()).collect::<Vec<_>>(), usize::MAX).unwrap();
            return (s, t, (0..levels).collect());
        }
        let degrees: Vec<num_bigint::BigUint> = big.iter().map(|&d| (d + r.gen_range(0..=1)).into()).collect();
        let extra = r.gen_range(0..=1usize);
        let mut tdeg = degrees.clone();
        let mut level_map: Vec<usize> = (0..levels).collect();
        if extra == 1 && levels > 1 {
            let at = r.gen_range(0..levels - 1);
            tdeg.insert(at, 2u32.into());
            let mut lm = Vec::new();
            for l in 0..levels {
                lm.push(if l <= at { l } else { l + 1 });
            }
            // The inserted level lies between two source levels, so that step composes two degrees.
            level_map = lm;
        }
        let t = Tower::homogeneous(Tower::integer_labels(tdeg.len() + 1), &tdeg, usize::MAX).unwrap();
        return (s, t, level_map);
    }
}
