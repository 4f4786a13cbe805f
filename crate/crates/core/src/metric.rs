//! Finite metric spaces with exact distances, threshold components, capacities and nets.

use std::collections::HashMap;
use std::sync::OnceLock;

use num_bigint::BigUint;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, precondition, Error, Result};
use crate::rational::{self, int, pow2, Rational};

/// Disjoint-set forest with path halving and union by rank.
#[derive(Clone, Debug)]
pub struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), rank: vec![0; n] }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Points with an exact symmetric distance matrix.
///
/// Distances are stored once per unordered pair as an index into the sorted table of
/// distinct values, so threshold queries compare small integers.
#[derive(Clone, Debug)]
pub struct FiniteMetricSpace {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    values: Vec<Rational>,
    cells: Vec<u32>,
    homogeneous: bool,
    ultrametric: OnceLock<bool>,
}

impl PartialEq for FiniteMetricSpace {
    fn eq(&self, other: &Self) -> bool {
        self.ids == other.ids
            && self.homogeneous == other.homogeneous
            && self.values == other.values
            && self.cells == other.cells
    }
}

impl Eq for FiniteMetricSpace {}

fn cell(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

impl FiniteMetricSpace {
    /// Builds a space from a distance function evaluated on unordered pairs.
    pub fn from_fn(ids: Vec<String>, mut dist: impl FnMut(usize, usize) -> Rational) -> Result<Self> {
        let n = ids.len();
        if n == 0 {
            return invalid("a metric space needs at least one point");
        }
        let mut index = HashMap::with_capacity(n);
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return invalid(format!("duplicate point identifier {id:?}"));
            }
        }
        let mut raw = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                let d = dist(i, j);
                if !d.is_positive() {
                    return invalid(format!("distance between {} and {} must be positive", ids[i], ids[j]));
                }
                raw.push(d);
            }
        }
        let mut values: Vec<Rational> = raw.clone();
        values.push(Rational::zero());
        values.sort();
        values.dedup();
        if values.len() > u32::MAX as usize {
            return invalid("too many distinct distances");
        }
        let cells = raw
            .iter()
            .map(|d| values.binary_search(d).expect("value present") as u32)
            .collect();
        Ok(Self { ids, index, values, cells, homogeneous: false, ultrametric: OnceLock::new() })
    }

    /// Builds a space from a full matrix, validating symmetry and the zero diagonal.
    pub fn from_matrix(ids: Vec<String>, matrix: &[Vec<Rational>]) -> Result<Self> {
        let n = ids.len();
        if matrix.len() != n || matrix.iter().any(|row| row.len() != n) {
            return invalid("distance matrix shape does not match the point list");
        }
        for i in 0..n {
            if !matrix[i][i].is_zero() {
                return invalid(format!("nonzero diagonal entry at {}", ids[i]));
            }
            for j in 0..i {
                if matrix[i][j] != matrix[j][i] {
                    return invalid(format!("asymmetric distance between {} and {}", ids[j], ids[i]));
                }
            }
        }
        Self::from_fn(ids, |i, j| matrix[i][j].clone())
    }

    /// Points on the real line with the absolute-difference metric.
    pub fn line(ids: Vec<String>, coords: &[Rational]) -> Result<Self> {
        if ids.len() != coords.len() {
            return invalid("coordinate list length does not match the point list");
        }
        Self::from_fn(ids, |i, j| (&coords[i] - &coords[j]).abs())
    }

    /// Line space whose identifiers are the coordinates themselves.
    pub fn line_from_coords(coords: &[Rational]) -> Result<Self> {
        let ids = coords.iter().map(|c| c.to_string()).collect();
        Self::line(ids, coords)
    }

    /// The truncated Cantor bi-cube {0,1}^{[low,high]} with d(x,y) = max 2^i |x_i − y_i|.
    ///
    /// Point identifiers are bit strings listing coordinates from `high` down to `low`.
    pub fn bicube(low: i64, high: i64) -> Result<Self> {
        if low > high {
            return invalid("bi-cube range is empty");
        }
        let width = (high - low + 1) as u32;
        if width > 16 {
            return invalid("bi-cube wider than 16 coordinates");
        }
        let count = 1usize << width;
        let ids = (0..count).map(|m| format!("{:0w$b}", m, w = width as usize)).collect();
        let scales: Vec<Rational> = (low..=high).map(pow2).collect();
        let mut space = Self::from_fn(ids, |i, j| {
            let top = usize::BITS - 1 - (i ^ j).leading_zeros();
            scales[top as usize].clone()
        })?;
        space.homogeneous = true;
        Ok(space)
    }

    pub fn with_homogeneous_flag(mut self, flag: bool) -> Self {
        self.homogeneous = flag;
        self
    }

    /// Declared vertex-transitivity (isometric homogeneity).
    pub fn homogeneous(&self) -> bool {
        self.homogeneous
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn dist(&self, i: usize, j: usize) -> &Rational {
        if i == j {
            &self.values[0]
        } else {
            &self.values[self.cells[cell(self.len(), i, j)] as usize]
        }
    }

    /// Position of d(i,j) in the sorted table of distinct distances (0 on the diagonal).
    pub fn rank(&self, i: usize, j: usize) -> u32 {
        if i == j {
            0
        } else {
            self.cells[cell(self.len(), i, j)]
        }
    }

    /// Distinct distance values, ascending, starting with 0.
    pub fn distance_values(&self) -> &[Rational] {
        &self.values
    }

    /// Largest rank whose value is ≤ s.
    pub fn rank_at_most(&self, s: &Rational) -> Option<u32> {
        match self.values.binary_search(s) {
            Ok(k) => Some(k as u32),
            Err(0) => None,
            Err(k) => Some((k - 1) as u32),
        }
    }

    pub fn diameter(&self) -> Rational {
        self.values.last().cloned().unwrap_or_else(Rational::zero)
    }

    pub fn subset_diameter(&self, subset: &[usize]) -> Rational {
        let mut best = 0u32;
        for (a, &i) in subset.iter().enumerate() {
            for &j in &subset[a + 1..] {
                best = best.max(self.rank(i, j));
            }
        }
        self.values[best as usize].clone()
    }

    /// Strong triangle inequality, checked in O(n²) through the minimum spanning tree:
    /// a space is ultrametric iff every distance equals the largest edge on its tree path.
    pub fn is_ultrametric(&self) -> bool {
        *self.ultrametric.get_or_init(|| self.compute_ultrametric())
    }

    fn compute_ultrametric(&self) -> bool {
        let n = self.len();
        if n <= 2 {
            return true;
        }
        let mut in_tree = vec![false; n];
        let mut best = vec![u32::MAX; n];
        let mut link = vec![usize::MAX; n];
        let mut adj: Vec<Vec<(usize, u32)>> = vec![Vec::new(); n];
        best[0] = 0;
        for _ in 0..n {
            let mut u = usize::MAX;
            for v in 0..n {
                if !in_tree[v] && (u == usize::MAX || best[v] < best[u]) {
                    u = v;
                }
            }
            in_tree[u] = true;
            if link[u] != usize::MAX {
                adj[u].push((link[u], best[u]));
                adj[link[u]].push((u, best[u]));
            }
            for v in 0..n {
                if !in_tree[v] && self.rank(u, v) < best[v] {
                    best[v] = self.rank(u, v);
                    link[v] = u;
                }
            }
        }
        let mut path_max = vec![0u32; n];
        let mut stack = Vec::new();
        for root in 0..n {
            let mut seen = vec![false; n];
            seen[root] = true;
            path_max[root] = 0;
            stack.push(root);
            while let Some(u) = stack.pop() {
                for &(v, w) in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        path_max[v] = path_max[u].max(w);
                        stack.push(v);
                    }
                }
            }
            for v in 0..n {
                if self.rank(root, v) != path_max[v] {
                    return false;
                }
            }
        }
        true
    }

    /// Subspace on the given point indices (kept in the given order).
    pub fn subspace(&self, points: &[usize]) -> Result<Self> {
        let ids = points.iter().map(|&i| self.ids[i].clone()).collect();
        Ok(Self::from_fn(ids, |a, b| self.dist(points[a], points[b]).clone())?.with_homogeneous_flag(false))
    }

    fn partition_at_rank(&self, cut: Option<u32>, scale: Rational) -> Partition {
        let n = self.len();
        let mut ds = DisjointSet::new(n);
        if let Some(cut) = cut {
            for i in 0..n {
                for j in i + 1..n {
                    if self.cells[cell(n, i, j)] <= cut {
                        ds.union(i, j);
                    }
                }
            }
        }
        let mut block_of = vec![usize::MAX; n];
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        let mut root_block = HashMap::new();
        for i in 0..n {
            let r = ds.find(i);
            let b = *root_block.entry(r).or_insert_with(|| {
                blocks.push(Vec::new());
                blocks.len() - 1
            });
            blocks[b].push(i);
            block_of[i] = b;
        }
        Partition { scale, blocks, block_of }
    }
}

/// The partition of a space into s-connected components.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    pub scale: Rational,
    /// Blocks ordered by their smallest point index; points inside a block ascend.
    pub blocks: Vec<Vec<usize>>,
    pub block_of: Vec<usize>,
}

impl Partition {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// True when every block of `self` lies inside one block of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        self.blocks.iter().all(|b| b.iter().all(|&p| coarser.block_of[p] == coarser.block_of[b[0]]))
    }
}

/// ε-components 𝒞_s(X): connected components of the graph joining pairs at distance ≤ s.
pub fn components(space: &FiniteMetricSpace, s: &Rational) -> Result<Partition> {
    if s.is_negative() {
        return precondition("component scale must be nonnegative");
    }
    Ok(space.partition_at_rank(space.rank_at_most(s), s.clone()))
}

/// Largest block diameter.
pub fn mesh(space: &FiniteMetricSpace, partition: &Partition) -> Rational {
    partition
        .blocks
        .iter()
        .map(|b| space.subset_diameter(b))
        .max()
        .unwrap_or_else(Rational::zero)
}

/// Number of blocks of `fine` inside each block of `coarse`, indexed by coarse block.
pub fn nested_counts(fine: &Partition, coarse: &Partition) -> Vec<usize> {
    let mut counts = vec![0usize; coarse.len()];
    for b in &fine.blocks {
        counts[coarse.block_of[b[0]]] += 1;
    }
    counts
}

/// (θ, Θ): min and max over points of the number of δ-blocks inside C_ε(x).
pub fn capacity(space: &FiniteMetricSpace, delta: &Rational, eps: &Rational) -> Result<(BigUint, BigUint)> {
    if !delta.is_positive() {
        return precondition("capacity needs δ > 0");
    }
    if delta > eps {
        return precondition(format!("capacity needs δ ≤ ε, got δ={delta} ε={eps}"));
    }
    let fine = components(space, delta)?;
    let coarse = components(space, eps)?;
    Ok(capacity_from_partitions(&fine, &coarse))
}

pub fn capacity_from_partitions(fine: &Partition, coarse: &Partition) -> (BigUint, BigUint) {
    let counts = nested_counts(fine, coarse);
    let lo = counts.iter().copied().min().unwrap_or(1);
    let hi = counts.iter().copied().max().unwrap_or(1);
    (BigUint::from(lo), BigUint::from(hi))
}

/// Capacities over all grid pairs δ ≤ ε.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CapacityTable {
    pub grid: Vec<Rational>,
    /// `entries[i][j]` holds (θ, Θ) for δ = grid[i], ε = grid[j], j ≥ i (indexed j − i).
    entries: Vec<Vec<(BigUint, BigUint)>>,
}

impl CapacityTable {
    pub fn build(space: &FiniteMetricSpace, grid: &[Rational]) -> Result<Self> {
        rational::check_grid(grid)?;
        let parts: Vec<Partition> = grid.iter().map(|s| components(space, s)).collect::<Result<_>>()?;
        let entries = (0..grid.len())
            .map(|i| (i..grid.len()).map(|j| capacity_from_partitions(&parts[i], &parts[j])).collect())
            .collect();
        Ok(Self { grid: grid.to_vec(), entries })
    }

    /// Entry for grid indices i ≤ j.
    pub fn get(&self, i: usize, j: usize) -> &(BigUint, BigUint) {
        &self.entries[i][j - i]
    }

    pub fn theta(&self, i: usize, j: usize) -> &BigUint {
        &self.get(i, j).0
    }

    pub fn big_theta(&self, i: usize, j: usize) -> &BigUint {
        &self.get(i, j).1
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRow {
    #[serde(with = "crate::rational::serde_rational")]
    pub scale: Rational,
    #[serde(with = "crate::rational::serde_rational")]
    pub mesh: Rational,
    pub blocks: usize,
    /// Smallest window scale ε with mesh ≤ ε.
    pub witness: Option<String>,
}

/// Window-relative dimension-zero report.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionZeroReport {
    pub rows: Vec<ReportRow>,
    /// Every window δ has a window ε with mesh 𝒞_δ ≤ ε.
    pub macro_witnessed_on_window: bool,
    /// Every window ε has a window δ with mesh 𝒞_δ ≤ ε.
    pub micro_witnessed_on_window: bool,
}

pub fn dimension_zero_report(space: &FiniteMetricSpace, scales: &[Rational]) -> Result<DimensionZeroReport> {
    rational::check_grid(scales)?;
    let mut rows = Vec::with_capacity(scales.len());
    let mut meshes = Vec::with_capacity(scales.len());
    for s in scales {
        let p = components(space, s)?;
        let m = mesh(space, &p);
        let witness = scales.iter().find(|e| **e >= m).map(|e| e.to_string());
        rows.push(ReportRow { scale: s.clone(), mesh: m.clone(), blocks: p.len(), witness });
        meshes.push(m);
    }
    let macro_ok = rows.iter().all(|r| r.witness.is_some());
    let micro_ok = scales.iter().all(|e| meshes.iter().any(|m| m <= e));
    Ok(DimensionZeroReport { rows, macro_witnessed_on_window: macro_ok, micro_witnessed_on_window: micro_ok })
}

/// Maximal S-separated subset, greedy over input order.
pub fn separated_net(space: &FiniteMetricSpace, sep: &Rational) -> Result<Vec<usize>> {
    if !sep.is_positive() {
        return precondition("net separation must be positive");
    }
    let mut net: Vec<usize> = Vec::new();
    for p in 0..space.len() {
        if net.iter().all(|&q| space.dist(p, q) >= sep) {
            net.push(p);
        }
    }
    Ok(net)
}

/// Smallest r with B_r(subset) = X.
pub fn largeness_radius(space: &FiniteMetricSpace, subset: &[usize]) -> Result<Rational> {
    if subset.is_empty() {
        return precondition("largeness radius needs a nonempty subset");
    }
    let mut worst = 0u32;
    for p in 0..space.len() {
        let near = subset.iter().map(|&q| space.rank(p, q)).min().unwrap();
        worst = worst.max(near);
    }
    Ok(space.distance_values()[worst as usize].clone())
}

/// Index of the point of `subset` nearest to `p` (first in subset order on ties).
pub fn nearest_in(space: &FiniteMetricSpace, subset: &[usize], p: usize) -> usize {
    *subset.iter().min_by_key(|&&q| space.rank(p, q)).expect("nonempty subset")
}

/// On-disk representation of a metric space.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpaceFile {
    pub points: Vec<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist: Option<Vec<Vec<serde_json::Value>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<serde_json::Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub low: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub high: Option<i64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub homogeneous: bool,
}

fn point_id(v: &serde_json::Value) -> Result<String> {
    match v {
        serde_json::Value::String(s) => Ok(s.clone()),
        serde_json::Value::Number(n) => Ok(n.to_string()),
        other => Err(Error::Parse(format!("point identifiers must be strings or numbers, found {other}"))),
    }
}

impl SpaceFile {
    pub fn into_space(self) -> Result<FiniteMetricSpace> {
        let flag = self.homogeneous;
        if self.metric.as_deref() == Some("bicube") {
            let (low, high) = match (self.low, self.high) {
                (Some(l), Some(h)) => (l, h),
                _ => return Err(Error::Parse("bicube metric needs \"low\" and \"high\"".into())),
            };
            return FiniteMetricSpace::bicube(low, high);
        }
        let ids: Vec<String> = self.points.iter().map(point_id).collect::<Result<_>>()?;
        let space = match (self.dist, self.coords, self.metric.as_deref()) {
            (Some(rows), None, None) => {
                let matrix: Vec<Vec<Rational>> = rows
                    .iter()
                    .map(|r| r.iter().map(rational::value_to_rational).collect::<Result<_>>())
                    .collect::<Result<_>>()?;
                FiniteMetricSpace::from_matrix(ids, &matrix)?
            }
            (None, Some(coords), Some("line")) => {
                let c: Vec<Rational> = coords.iter().map(rational::value_to_rational).collect::<Result<_>>()?;
                FiniteMetricSpace::line(ids, &c)?
            }
            (None, Some(_), other) => {
                return Err(Error::Parse(format!("unsupported coordinate metric {other:?}")));
            }
            _ => return Err(Error::Parse("space file needs either \"dist\" or \"coords\" with \"metric\"".into())),
        };
        Ok(space.with_homogeneous_flag(flag))
    }

    pub fn from_space(space: &FiniteMetricSpace) -> Self {
        let n = space.len();
        let dist = (0..n)
            .map(|i| (0..n).map(|j| serde_json::Value::String(space.dist(i, j).to_string())).collect())
            .collect();
        Self {
            points: space.ids().iter().map(|s| serde_json::Value::String(s.clone())).collect(),
            dist: Some(dist),
            coords: None,
            metric: None,
            low: None,
            high: None,
            homogeneous: space.homogeneous(),
        }
    }
}

pub fn space_from_json(text: &str) -> Result<FiniteMetricSpace> {
    let file: SpaceFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    file.into_space()
}

pub fn space_to_json(space: &FiniteMetricSpace) -> String {
    serde_json::to_string_pretty(&SpaceFile::from_space(space)).expect("serializable")
}

/// The four-point line {0,1,2,10}, used throughout the examples.
pub fn line_fixture() -> FiniteMetricSpace {
    FiniteMetricSpace::line_from_coords(&[int(0), int(1), int(2), int(10)]).expect("valid")
}
