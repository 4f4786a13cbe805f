//! Towers: leveled forests with single parents, explicit above a cutoff and counted below.
//!
//! Counted parts are stored as shapes: isomorphism classes of subtrees, each a multiset of
//! child shapes with big-integer multiplicities. Shapes are hash-consed, so towers with
//! astronomically many base nodes stay small as long as their subtrees repeat.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, precondition, Error, Result};
use crate::metric::{components, FiniteMetricSpace};
use crate::rational::{self, Rational};

pub type ShapeId = usize;

/// Level-0 shape: a single base node.
pub const LEAF: ShapeId = 0;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Shape {
    pub level: usize,
    /// Child shapes (one level down) with multiplicities; merged, ordered by descending deg₀ then id.
    pub children: Vec<(ShapeId, BigUint)>,
    /// `counts[λ]` = number of descendants on level λ, for λ ≤ level.
    pub counts: Vec<BigUint>,
}

impl Shape {
    pub fn deg0(&self) -> &BigUint {
        &self.counts[0]
    }
}

/// Hash-consed store of counted subtrees.
#[derive(Clone, Debug)]
pub struct ShapeArena {
    shapes: Vec<Shape>,
    lookup: HashMap<(usize, Vec<(ShapeId, BigUint)>), ShapeId>,
}

impl Default for ShapeArena {
    fn default() -> Self {
        let leaf = Shape { level: 0, children: Vec::new(), counts: vec![BigUint::one()] };
        let mut lookup = HashMap::new();
        lookup.insert((0, Vec::new()), LEAF);
        Self { shapes: vec![leaf], lookup }
    }
}

impl ShapeArena {
    pub fn get(&self, id: ShapeId) -> &Shape {
        &self.shapes[id]
    }

    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }

    pub fn deg0(&self, id: ShapeId) -> &BigUint {
        self.shapes[id].deg0()
    }

    /// Merges duplicates, drops zero multiplicities and orders by (deg₀ desc, id).
    pub fn normalize(&self, children: Vec<(ShapeId, BigUint)>) -> Vec<(ShapeId, BigUint)> {
        let mut merged: BTreeMap<ShapeId, BigUint> = BTreeMap::new();
        for (s, m) in children {
            if !m.is_zero() {
                *merged.entry(s).or_default() += m;
            }
        }
        let mut out: Vec<(ShapeId, BigUint)> = merged.into_iter().collect();
        out.sort_by(|a, b| self.deg0(b.0).cmp(self.deg0(a.0)).then(a.0.cmp(&b.0)));
        out
    }

    /// Interns a shape on `level` whose children all sit on `level − 1`.
    pub fn intern(&mut self, level: usize, children: Vec<(ShapeId, BigUint)>) -> Result<ShapeId> {
        if level == 0 {
            if children.iter().any(|(_, m)| !m.is_zero()) {
                return invalid("a level-0 shape cannot have children");
            }
            return Ok(LEAF);
        }
        if let Some((s, _)) = children.iter().find(|(s, _)| self.shapes[*s].level + 1 != level) {
            return invalid(format!("child shape {s} is not one level below level {level}"));
        }
        let children = self.normalize(children);
        let key = (level, children);
        if let Some(&id) = self.lookup.get(&key) {
            return Ok(id);
        }
        let mut counts = vec![BigUint::zero(); level + 1];
        counts[level] = BigUint::one();
        for (s, m) in &key.1 {
            for (lam, c) in self.shapes[*s].counts.iter().enumerate() {
                counts[lam] += c * m;
            }
        }
        let id = self.shapes.len();
        self.shapes.push(Shape { level, children: key.1.clone(), counts });
        self.lookup.insert(key, id);
        Ok(id)
    }

    /// A chain of single children from `level` down to level 1, whose level-1 node has `deg0` leaves.
    pub fn spine(&mut self, level: usize, deg0: &BigUint) -> Result<ShapeId> {
        if level == 0 {
            if !deg0.is_one() {
                return invalid(format!("a level-0 fiber must have deg₀ = 1, got {deg0}"));
            }
            return Ok(LEAF);
        }
        let mut s = self.intern(1, vec![(LEAF, deg0.clone())])?;
        for l in 2..=level {
            s = self.intern(l, vec![(s, BigUint::one())])?;
        }
        Ok(s)
    }

    /// A homogeneous shape: `degrees[k]` children per node on level k+1.
    pub fn homogeneous(&mut self, degrees: &[BigUint]) -> Result<ShapeId> {
        let mut s = LEAF;
        for (k, d) in degrees.iter().enumerate() {
            s = self.intern(k + 1, vec![(s, d.clone())])?;
        }
        Ok(s)
    }

    /// Descendants of a shape on `level` as a merged multiset.
    pub fn descendants(&self, id: ShapeId, level: usize) -> Vec<(ShapeId, BigUint)> {
        let s = &self.shapes[id];
        if s.level == level {
            return vec![(id, BigUint::one())];
        }
        if s.level < level {
            return Vec::new();
        }
        let mut out: Vec<(ShapeId, BigUint)> = Vec::new();
        for (c, m) in &s.children {
            for (d, k) in self.descendants(*c, level) {
                out.push((d, k * m));
            }
        }
        self.normalize(out)
    }

    /// Copies `id` from `other` into `self`, returning the new id.
    pub fn import(&mut self, other: &ShapeArena, id: ShapeId, memo: &mut HashMap<ShapeId, ShapeId>) -> Result<ShapeId> {
        if let Some(&v) = memo.get(&id) {
            return Ok(v);
        }
        let s = other.get(id);
        let mut children = Vec::with_capacity(s.children.len());
        for (c, m) in &s.children {
            children.push((self.import(other, *c, memo)?, m.clone()));
        }
        let v = self.intern(s.level, children)?;
        memo.insert(id, v);
        Ok(v)
    }

    fn structurally_equal(&self, a: ShapeId, other: &ShapeArena, b: ShapeId, memo: &mut HashMap<(ShapeId, ShapeId), bool>) -> bool {
        if let Some(&v) = memo.get(&(a, b)) {
            return v;
        }
        let (x, y) = (self.get(a), other.get(b));
        let mut eq = x.level == y.level && x.counts == y.counts && x.children.len() == y.children.len();
        if eq {
            // Children are ordered by (deg₀, id); ids differ between arenas, so match as multisets.
            let mut used = vec![false; y.children.len()];
            for (c, m) in &x.children {
                let found = y.children.iter().enumerate().position(|(i, (d, n))| {
                    !used[i] && n == m && self.structurally_equal(*c, other, *d, memo)
                });
                match found {
                    Some(i) => used[i] = true,
                    None => {
                        eq = false;
                        break;
                    }
                }
            }
        }
        memo.insert((a, b), eq);
        eq
    }
}

/// Reference to an explicit node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeRef {
    pub level: usize,
    pub index: usize,
}

impl NodeRef {
    pub fn new(level: usize, index: usize) -> Self {
        Self { level, index }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub name: String,
    pub parent: Option<usize>,
}

/// A validated tower. Levels are addressed by index 0..levels.len(); labels are rationals.
#[derive(Clone, Debug)]
pub struct Tower {
    labels: Vec<Rational>,
    nodes: Vec<Vec<Node>>,
    base: usize,
    bundles: Vec<Option<Vec<(ShapeId, BigUint)>>>,
    shapes: ShapeArena,
    children: Vec<Vec<Vec<usize>>>,
    counts: Vec<Vec<Vec<BigUint>>>,
    pruned: bool,
    homogeneous: bool,
}

impl PartialEq for Tower {
    fn eq(&self, other: &Self) -> bool {
        if self.labels != other.labels || self.nodes != other.nodes || self.base != other.base {
            return false;
        }
        let mut memo = HashMap::new();
        self.bundles.len() == other.bundles.len()
            && self.bundles.iter().zip(&other.bundles).all(|(a, b)| match (a, b) {
                (None, None) => true,
                (Some(a), Some(b)) => {
                    a.len() == b.len()
                        && a.iter().zip(b).all(|((s, m), (t, n))| {
                            m == n && self.shapes.structurally_equal(*s, &other.shapes, *t, &mut memo)
                        })
                }
                _ => false,
            })
    }
}

impl Eq for Tower {}

impl Tower {
    /// Validates a tower given parent indices per explicit level.
    ///
    /// `parents[l]` lists, for every node on explicit level `base + l`, the index of its parent on
    /// the next level (None only on the top level). Levels below `base` are counted and described
    /// by `bundles`, one optional multiset per node of level `base`.
    pub fn new(
        labels: Vec<Rational>,
        base: usize,
        names: Vec<Vec<String>>,
        parents: Vec<Vec<Option<usize>>>,
        bundles: Vec<Option<Vec<(ShapeId, BigUint)>>>,
        shapes: ShapeArena,
    ) -> Result<Self> {
        let n_levels = labels.len();
        if n_levels == 0 {
            return invalid("a tower needs at least one level");
        }
        if labels.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("level labels must be strictly increasing");
        }
        if base >= n_levels {
            return invalid("lowest explicit level outside the level list");
        }
        if parents.len() != n_levels - base || names.len() != parents.len() {
            return invalid("explicit level count does not match the level list");
        }
        let mut nodes: Vec<Vec<Node>> = vec![Vec::new(); n_levels];
        for (k, (ps, ns)) in parents.into_iter().zip(names).enumerate() {
            let l = base + k;
            if ps.len() != ns.len() {
                return invalid("name and parent lists differ in length");
            }
            nodes[l] = ns.into_iter().zip(ps).map(|(name, parent)| Node { name, parent }).collect();
        }
        let top = n_levels - 1;
        if nodes[top].len() != 1 {
            return invalid(format!(
                "top level must be a single node for the tower to be ↑-directed, found {}",
                nodes[top].len()
            ));
        }
        let mut seen = HashMap::new();
        for (l, level) in nodes.iter().enumerate() {
            if l >= base && level.is_empty() {
                return invalid(format!("explicit level {l} has no nodes"));
            }
            for (i, node) in level.iter().enumerate() {
                if seen.insert(node.name.clone(), (l, i)).is_some() {
                    return invalid(format!("duplicate node identifier {:?}", node.name));
                }
                match node.parent {
                    None if l != top => {
                        return invalid(format!("node {:?} has no parent below the top: maximal nodes do not merge", node.name))
                    }
                    Some(_) if l == top => return invalid("top node cannot have a parent"),
                    Some(p) if p >= nodes[l + 1].len() => {
                        return invalid(format!("parent of {:?} outside level {}", node.name, l + 1))
                    }
                    _ => {}
                }
            }
        }
        if base > 0 {
            if bundles.len() != nodes[base].len() {
                return invalid("one bundle entry is required per node of the lowest explicit level");
            }
            for b in bundles.iter().flatten() {
                for (s, _) in b {
                    if *s >= shapes.len() || shapes.get(*s).level + 1 != base {
                        return invalid("bundle shape is not one level below the lowest explicit level");
                    }
                }
            }
        } else if bundles.iter().any(|b| b.is_some()) {
            return invalid("bundles need counted levels below the lowest explicit level");
        }
        let bundles = if base > 0 { bundles.into_iter().map(|b| b.map(|v| shapes.normalize(v))).collect() } else { vec![None; nodes[0].len()] };
        let mut tower = Tower {
            labels,
            nodes,
            base,
            bundles,
            shapes,
            children: Vec::new(),
            counts: Vec::new(),
            pruned: false,
            homogeneous: false,
        };
        tower.derive();
        Ok(tower)
    }

    /// Fully explicit tower from parent indices, names generated as "level:index".
    pub fn from_parents(labels: Vec<Rational>, parents: Vec<Vec<Option<usize>>>) -> Result<Self> {
        let names = parents
            .iter()
            .enumerate()
            .map(|(l, ps)| (0..ps.len()).map(|i| format!("{l}:{i}")).collect())
            .collect();
        let n = parents.first().map(|p| p.len()).unwrap_or(0);
        Self::new(labels, 0, names, parents, vec![None; n], ShapeArena::default())
    }

    /// Integer labels 0..n.
    pub fn integer_labels(n: usize) -> Vec<Rational> {
        (0..n as i64).map(rational::int).collect()
    }

    /// Homogeneous tower with one top node and `degrees[k]` children per node on level k+1.
    /// Levels holding more than `cutoff` nodes are counted.
    pub fn homogeneous(labels: Vec<Rational>, degrees: &[BigUint], cutoff: usize) -> Result<Self> {
        if labels.len() != degrees.len() + 1 {
            return invalid("homogeneous tower needs one degree per step");
        }
        if degrees.iter().any(|d| d.is_zero()) {
            return invalid("degrees must be positive");
        }
        let n = labels.len();
        let mut sizes = vec![BigUint::one(); n];
        for l in (0..n - 1).rev() {
            sizes[l] = &sizes[l + 1] * &degrees[l];
        }
        let cutoff = BigUint::from(cutoff.max(1));
        let base = (0..n).find(|&l| sizes[l] <= cutoff).unwrap_or(n - 1);
        let mut parents: Vec<Vec<Option<usize>>> = Vec::new();
        for l in base..n {
            let count = sizes[l].to_usize().expect("explicit level fits");
            if l == n - 1 {
                parents.push(vec![None]);
            } else {
                let d = degrees[l].to_usize().expect("explicit degree fits");
                parents.push((0..count).map(|i| Some(i / d)).collect());
            }
        }
        let names = parents
            .iter()
            .enumerate()
            .map(|(k, ps)| (0..ps.len()).map(|i| format!("{}:{}", base + k, i)).collect())
            .collect();
        let mut shapes = ShapeArena::default();
        let bundles = if base > 0 {
            let child = shapes.homogeneous(&degrees[..base - 1])?;
            let b = vec![(child, degrees[base - 1].clone())];
            vec![Some(b); parents[0].len()]
        } else {
            vec![None; parents[0].len()]
        };
        Self::new(labels, base, names, parents, bundles, shapes)
    }

    fn derive(&mut self) {
        let n = self.labels.len();
        let mut children: Vec<Vec<Vec<usize>>> = self.nodes.iter().map(|lv| vec![Vec::new(); lv.len()]).collect();
        for l in self.base..n {
            for (i, node) in self.nodes[l].iter().enumerate() {
                if let Some(p) = node.parent {
                    children[l + 1][p].push(i);
                }
            }
        }
        let mut counts: Vec<Vec<Vec<BigUint>>> = self.nodes.iter().map(|lv| vec![Vec::new(); lv.len()]).collect();
        for l in self.base..n {
            for i in 0..self.nodes[l].len() {
                let mut c = vec![BigUint::zero(); l + 1];
                c[l] = BigUint::one();
                if l == self.base {
                    if let Some(b) = &self.bundles[i] {
                        for (s, m) in b {
                            for (lam, v) in self.shapes.get(*s).counts.iter().enumerate() {
                                c[lam] += v * m;
                            }
                        }
                    }
                } else {
                    for &ch in &children[l][i] {
                        for (lam, v) in counts[l - 1][ch].iter().enumerate() {
                            c[lam] += v;
                        }
                    }
                }
                counts[l][i] = c;
            }
        }
        self.children = children;
        self.counts = counts;
        let explicit_pruned = (self.base.max(1)..n).all(|l| (0..self.nodes[l].len()).all(|i| !self.children[l][i].is_empty()))
            && (self.base == 0 || self.bundles.iter().all(|b| b.as_ref().map(|v| !v.is_empty()).unwrap_or(false)));
        let counted_pruned = self.counted_shapes().iter().all(|&s| {
            let sh = self.shapes.get(s);
            sh.level == 0 || !sh.children.is_empty()
        });
        self.pruned = explicit_pruned && counted_pruned;
        let profile = self.degree_profile();
        self.homogeneous = profile.is_homogeneous();
    }

    /// Shapes reachable from the bundles.
    pub fn counted_shapes(&self) -> Vec<ShapeId> {
        let mut seen = vec![false; self.shapes.len()];
        let mut stack: Vec<ShapeId> = self.bundles.iter().flatten().flat_map(|b| b.iter().map(|(s, _)| *s)).collect();
        let mut out = Vec::new();
        while let Some(s) = stack.pop() {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            out.push(s);
            stack.extend(self.shapes.get(s).children.iter().map(|(c, _)| *c));
        }
        out.sort();
        out
    }

    pub fn labels(&self) -> &[Rational] {
        &self.labels
    }

    pub fn level_count(&self) -> usize {
        self.labels.len()
    }

    pub fn top(&self) -> usize {
        self.labels.len() - 1
    }

    /// Lowest explicit level.
    pub fn base(&self) -> usize {
        self.base
    }

    pub fn is_counted(&self) -> bool {
        self.base > 0
    }

    pub fn shapes(&self) -> &ShapeArena {
        &self.shapes
    }

    pub fn bundle(&self, index: usize) -> Option<&[(ShapeId, BigUint)]> {
        self.bundles.get(index).and_then(|b| b.as_deref())
    }

    pub fn nodes(&self, level: usize) -> &[Node] {
        &self.nodes[level]
    }

    pub fn node(&self, x: NodeRef) -> &Node {
        &self.nodes[x.level][x.index]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.iter().map(Vec::len).sum()
    }

    pub fn explicit_nodes(&self) -> impl Iterator<Item = NodeRef> + '_ {
        (self.base..self.labels.len()).flat_map(move |l| (0..self.nodes[l].len()).map(move |i| NodeRef::new(l, i)))
    }

    pub fn find(&self, name: &str) -> Option<NodeRef> {
        self.explicit_nodes().find(|x| self.node(*x).name == name)
    }

    pub fn name_index(&self) -> HashMap<String, NodeRef> {
        self.explicit_nodes().map(|x| (self.node(x).name.clone(), x)).collect()
    }

    pub fn parent(&self, x: NodeRef) -> Option<NodeRef> {
        self.node(x).parent.map(|p| NodeRef::new(x.level + 1, p))
    }

    /// Explicit children (empty for nodes on the lowest explicit level).
    pub fn children(&self, x: NodeRef) -> impl Iterator<Item = NodeRef> + '_ {
        let l = x.level;
        self.children[l][x.index].iter().map(move |&i| NodeRef::new(l - 1, i))
    }

    pub fn child_count(&self, x: NodeRef) -> usize {
        self.children[x.level][x.index].len()
    }

    /// `counts(x)[λ]` = deg_λ(x) for λ ≤ lev(x).
    pub fn counts(&self, x: NodeRef) -> &[BigUint] {
        &self.counts[x.level][x.index]
    }

    pub fn deg0(&self, x: NodeRef) -> &BigUint {
        &self.counts[x.level][x.index][0]
    }

    pub fn is_pruned(&self) -> bool {
        self.pruned
    }

    pub fn is_homogeneous(&self) -> bool {
        self.homogeneous
    }

    /// Ancestor of x on `level` (≥ lev(x)).
    pub fn ancestor(&self, x: NodeRef, level: usize) -> NodeRef {
        let mut y = x;
        while y.level < level {
            y = self.parent(y).expect("validated tower has parents below the top");
        }
        y
    }

    pub fn is_below(&self, x: NodeRef, y: NodeRef) -> bool {
        x.level <= y.level && self.ancestor(x, y.level) == y
    }

    /// Smallest common upper bound, by equalizing levels and ascending in lockstep.
    pub fn meet(&self, x: NodeRef, y: NodeRef) -> NodeRef {
        let l = x.level.max(y.level);
        let (mut a, mut b) = (self.ancestor(x, l), self.ancestor(y, l));
        while a != b {
            a = self.parent(a).expect("top is single");
            b = self.parent(b).expect("top is single");
        }
        a
    }

    /// e_θ labels per level: |[x, x∧θ]| − |[θ, x∧θ]| for any x on the level.
    pub fn level_labeling(&self, theta: NodeRef) -> Vec<i64> {
        (0..self.labels.len()).map(|l| l as i64 - theta.level as i64).collect()
    }

    /// Explicit nodes without explicit children and without bundles: the branch ends.
    pub fn minimal_nodes(&self) -> Vec<NodeRef> {
        self.explicit_nodes()
            .filter(|&x| {
                if x.level == self.base && self.base > 0 {
                    self.bundle(x.index).map(|b| b.is_empty()).unwrap_or(true)
                } else {
                    x.level == 0 || self.child_count(x) == 0
                }
            })
            .collect()
    }

    pub fn degree_profile(&self) -> DegreeProfile {
        let n = self.labels.len();
        let mut table: Vec<Vec<Option<(BigUint, BigUint)>>> = (0..n).map(|l| vec![None; l + 1]).collect();
        let mut absorb = |l: usize, counts: &[BigUint]| {
            for (lam, c) in counts.iter().enumerate() {
                let slot = &mut table[l][lam];
                match slot {
                    None => *slot = Some((c.clone(), c.clone())),
                    Some((lo, hi)) => {
                        if c < lo {
                            *lo = c.clone();
                        }
                        if c > hi {
                            *hi = c.clone();
                        }
                    }
                }
            }
        };
        for x in self.explicit_nodes() {
            absorb(x.level, self.counts(x));
        }
        for s in self.counted_shapes() {
            let sh = self.shapes.get(s);
            absorb(sh.level, &sh.counts);
        }
        DegreeProfile {
            table: table
                .into_iter()
                .map(|row| row.into_iter().map(|e| e.unwrap_or((BigUint::zero(), BigUint::zero()))).collect())
                .collect(),
        }
    }

    /// Ultrametric ρ_f on the branch ends: ρ(p,q) = f(lev(p∧q)).
    pub fn boundary(&self, scaling: &ScalingFunction) -> Result<(FiniteMetricSpace, Vec<NodeRef>)> {
        if self.base > 0 {
            return precondition("boundary needs an explicit lowest level; materialize the bundles first");
        }
        scaling.check(self)?;
        let points = self.minimal_nodes();
        let ids = points.iter().map(|&x| self.node(x).name.clone()).collect();
        let space = FiniteMetricSpace::from_fn(ids, |i, j| scaling.values[self.meet(points[i], points[j]).level].clone())?;
        Ok((space, points))
    }

    /// Nodes on the levels in `keep` (ascending level indices, containing the top), parents composed.
    pub fn level_subtower(&self, keep: &[usize]) -> Result<Tower> {
        if keep.is_empty() {
            return invalid("level subtower needs at least one level");
        }
        if keep.windows(2).any(|w| w[0] >= w[1]) || *keep.last().unwrap() >= self.labels.len() {
            return invalid("kept levels must be ascending level indices of the tower");
        }
        if *keep.last().unwrap() != self.top() {
            return invalid("kept levels must contain the top level");
        }
        let labels: Vec<Rational> = keep.iter().map(|&l| self.labels[l].clone()).collect();
        let explicit: Vec<usize> = keep.iter().copied().filter(|&l| l >= self.base).collect();
        let counted: Vec<usize> = keep.iter().copied().filter(|&l| l < self.base).collect();
        let new_base = counted.len();
        let mut names = Vec::new();
        let mut parents = Vec::new();
        for (k, &l) in explicit.iter().enumerate() {
            names.push(self.nodes[l].iter().map(|n| n.name.clone()).collect());
            let ps = (0..self.nodes[l].len())
                .map(|i| explicit.get(k + 1).map(|&up| self.ancestor(NodeRef::new(l, i), up).index))
                .collect();
            parents.push(ps);
        }
        let mut shapes = ShapeArena::default();
        let lowest = explicit[0];
        let bundles: Vec<Option<Vec<(ShapeId, BigUint)>>> = if new_base == 0 {
            vec![None; self.nodes[lowest].len()]
        } else {
            let mut memo: HashMap<ShapeId, ShapeId> = HashMap::new();
            let below = *counted.last().unwrap();
            let mut out = Vec::with_capacity(self.nodes[lowest].len());
            for i in 0..self.nodes[lowest].len() {
                let desc = self.explicit_descendant_shapes(NodeRef::new(lowest, i), below);
                let mut b = Vec::with_capacity(desc.len());
                for (s, m) in desc {
                    b.push((self.reshape(s, &counted, &mut shapes, &mut memo)?, m));
                }
                out.push(Some(b));
            }
            out
        };
        Tower::new(labels, new_base, names, parents, bundles, shapes)
    }

    /// Descendants on counted level `level` of an explicit node, as shapes of `self.shapes`.
    fn explicit_descendant_shapes(&self, x: NodeRef, level: usize) -> Vec<(ShapeId, BigUint)> {
        let mut out = Vec::new();
        let mut stack = vec![x];
        while let Some(y) = stack.pop() {
            if y.level == self.base {
                if let Some(b) = self.bundle(y.index) {
                    for (s, m) in b {
                        for (d, k) in self.shapes.descendants(*s, level) {
                            out.push((d, k * m));
                        }
                    }
                }
            } else {
                stack.extend(self.children(y));
            }
        }
        self.shapes.normalize(out)
    }

    /// Rebuilds shape `s` (on a kept counted level) keeping only the counted levels in `kept`.
    fn reshape(&self, s: ShapeId, kept: &[usize], out: &mut ShapeArena, memo: &mut HashMap<ShapeId, ShapeId>) -> Result<ShapeId> {
        if let Some(&v) = memo.get(&s) {
            return Ok(v);
        }
        let level = self.shapes.get(s).level;
        let pos = kept.iter().position(|&l| l == level).expect("kept level");
        let v = if pos == 0 {
            LEAF
        } else {
            let below = kept[pos - 1];
            let mut ch = Vec::new();
            for (d, m) in self.shapes.descendants(s, below) {
                ch.push((self.reshape(d, kept, out, memo)?, m));
            }
            out.intern(pos, ch)?
        };
        memo.insert(s, v);
        Ok(v)
    }

    /// Expands counted levels into explicit nodes when the total node count stays ≤ `cutoff`.
    pub fn materialize(&self, cutoff: usize) -> Result<Tower> {
        if self.base == 0 {
            return Ok(self.clone());
        }
        let mut total = BigUint::from(self.node_count());
        for i in 0..self.nodes[self.base].len() {
            let c = self.counts(NodeRef::new(self.base, i));
            for v in &c[..self.base] {
                total += v;
            }
        }
        if total > BigUint::from(cutoff) {
            return precondition(format!("materializing needs {total} nodes, above the cutoff {cutoff}"));
        }
        // Expand level by level downward; each expanded node remembers its shape.
        let n = self.labels.len();
        let mut parents: Vec<Vec<Option<usize>>> = vec![Vec::new(); n];
        let mut names: Vec<Vec<String>> = vec![Vec::new(); n];
        for l in self.base..n {
            parents[l] = self.nodes[l].iter().map(|x| x.parent).collect();
            names[l] = self.nodes[l].iter().map(|x| x.name.clone()).collect();
        }
        let mut frontier: Vec<(usize, Vec<(ShapeId, BigUint)>)> = (0..self.nodes[self.base].len())
            .map(|i| (i, self.bundle(i).map(|b| b.to_vec()).unwrap_or_default()))
            .collect();
        for l in (0..self.base).rev() {
            let mut next = Vec::new();
            for (p, kids) in frontier {
                for (s, m) in kids {
                    let m = m.to_usize().expect("bounded by the cutoff");
                    for _ in 0..m {
                        let idx = parents[l].len();
                        parents[l].push(Some(p));
                        names[l].push(format!("{l}:{idx}"));
                        next.push((idx, self.shapes.get(s).children.clone()));
                    }
                }
            }
            frontier = next;
        }
        let bundles = vec![None; parents[0].len()];
        let mut taken = std::collections::HashSet::new();
        for l in self.base..n {
            for nm in &names[l] {
                taken.insert(nm.clone());
            }
        }
        for l in 0..self.base {
            for (i, nm) in names[l].iter_mut().enumerate() {
                if taken.contains(nm.as_str()) {
                    *nm = format!("{l}:{i}#");
                }
            }
        }
        Tower::new(self.labels.clone(), 0, names, parents, bundles, ShapeArena::default())
    }

    /// Per-step degrees of a homogeneous tower, bottom first.
    pub fn step_degrees(&self) -> Result<Vec<BigUint>> {
        if !self.homogeneous {
            return precondition("step degrees need a homogeneous tower");
        }
        let p = self.degree_profile();
        Ok((0..self.top()).map(|l| p.deg(l, l + 1).clone()).collect())
    }
}

/// Strictly increasing positive threshold per level index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScalingFunction {
    pub values: Vec<Rational>,
}

impl ScalingFunction {
    pub fn new(values: Vec<Rational>) -> Result<Self> {
        if values.iter().any(|v| !v.is_positive()) {
            return invalid("scaling values must be positive");
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("scaling values must be strictly increasing");
        }
        Ok(Self { values })
    }

    /// Scaling equal to the level labels (requires positive labels).
    pub fn labels(tower: &Tower) -> Result<Self> {
        Self::new(tower.labels().to_vec())
    }

    /// f(l) = 2^l on level indices.
    pub fn dyadic(levels: usize) -> Self {
        Self { values: (0..levels as i64).map(rational::pow2).collect() }
    }

    fn check(&self, tower: &Tower) -> Result<()> {
        if self.values.len() != tower.level_count() {
            return invalid("scaling function needs one value per level");
        }
        Ok(())
    }
}

/// (deg_λ^l, Deg_λ^l) for λ ≤ l.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DegreeProfile {
    table: Vec<Vec<(BigUint, BigUint)>>,
}

impl DegreeProfile {
    pub fn levels(&self) -> usize {
        self.table.len()
    }

    pub fn get(&self, lambda: usize, l: usize) -> &(BigUint, BigUint) {
        &self.table[l][lambda]
    }

    pub fn deg(&self, lambda: usize, l: usize) -> &BigUint {
        &self.table[l][lambda].0
    }

    pub fn big_deg(&self, lambda: usize, l: usize) -> &BigUint {
        &self.table[l][lambda].1
    }

    pub fn is_homogeneous(&self) -> bool {
        self.table.iter().all(|row| row.iter().all(|(a, b)| a == b))
    }

    pub fn to_file(&self) -> DegreeProfileFile {
        let mut entries = Vec::new();
        for (l, row) in self.table.iter().enumerate() {
            for (lambda, (lo, hi)) in row.iter().enumerate() {
                entries.push(DegreeEntry { lambda, level: l, deg: lo.to_string(), big_deg: hi.to_string() });
            }
        }
        DegreeProfileFile { entries }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeEntry {
    pub lambda: usize,
    pub level: usize,
    pub deg: String,
    #[serde(rename = "Deg")]
    pub big_deg: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeProfileFile {
    pub entries: Vec<DegreeEntry>,
}

/// Tower of (component, scale) pairs over the level set L, with the canonical map x ↦ base node.
pub fn canonical_tower(space: &FiniteMetricSpace, levels: &[Rational]) -> Result<(Tower, Vec<usize>)> {
    rational::check_grid(levels)?;
    let parts = levels.iter().map(|s| components(space, s)).collect::<Result<Vec<_>>>()?;
    let top = parts.last().unwrap();
    if top.len() != 1 {
        return precondition(format!(
            "largest level {} leaves {} components: the top would not be a single node",
            levels.last().unwrap(),
            top.len()
        ));
    }
    let mut parents = Vec::with_capacity(levels.len());
    for (k, p) in parts.iter().enumerate() {
        let ps = match parts.get(k + 1) {
            Some(up) => p.blocks.iter().map(|b| Some(up.block_of[b[0]])).collect(),
            None => vec![None; p.len()],
        };
        parents.push(ps);
    }
    let tower = Tower::from_parents(levels.to_vec(), parents)?;
    Ok((tower, parts[0].block_of.clone()))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalBoundVerdict {
    pub pass: bool,
    pub checked_pairs: usize,
    pub witness: Option<(String, String)>,
}

/// dist(C_L(x), C_L(y)) ≤ inf{λ ∈ L : λ ≥ d(x,y)} under the identity scaling.
pub fn canonical_map_bound_check(space: &FiniteMetricSpace, levels: &[Rational]) -> Result<CanonicalBoundVerdict> {
    let (tower, map) = canonical_tower(space, levels)?;
    let scaling = ScalingFunction::new(levels.to_vec())?;
    let (boundary, points) = tower.boundary(&scaling)?;
    let mut slot = vec![usize::MAX; tower.nodes(0).len()];
    for (k, p) in points.iter().enumerate() {
        slot[p.index] = k;
    }
    let mut checked = 0;
    for x in 0..space.len() {
        for y in x + 1..space.len() {
            checked += 1;
            let lhs = boundary.dist(slot[map[x]], slot[map[y]]);
            let d = space.dist(x, y);
            let ok = match levels.iter().find(|l| *l >= d) {
                Some(rhs) => lhs <= rhs,
                None => true,
            };
            if !ok {
                return Ok(CanonicalBoundVerdict {
                    pass: false,
                    checked_pairs: checked,
                    witness: Some((space.id(x).to_string(), space.id(y).to_string())),
                });
            }
        }
    }
    Ok(CanonicalBoundVerdict { pass: true, checked_pairs: checked, witness: None })
}

/// Strictly increasing orders 1 = o₀ | o₁ | o₂ | …
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupChain {
    pub orders: Vec<BigUint>,
}

impl GroupChain {
    pub fn new(orders: Vec<BigUint>) -> Result<Self> {
        if orders.first().map(|o| !o.is_one()).unwrap_or(true) {
            return invalid("a group chain starts with the trivial group (order 1)");
        }
        for w in orders.windows(2) {
            if w[1] <= w[0] {
                return invalid(format!("orders must strictly increase: {} then {}", w[0], w[1]));
            }
            if !w[1].is_multiple_of(&w[0]) {
                return invalid(format!("{} does not divide {}", w[0], w[1]));
            }
        }
        Ok(Self { orders })
    }

    pub fn from_u64(orders: &[u64]) -> Result<Self> {
        Self::new(orders.iter().map(|&o| BigUint::from(o)).collect())
    }

    /// o_{k+1}/o_k.
    pub fn quotients(&self) -> Vec<BigUint> {
        self.orders.windows(2).map(|w| &w[1] / &w[0]).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ChainFile { orders: self.orders.iter().map(|o| serde_json::Value::String(o.to_string())).collect() })
            .expect("serializable")
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainFile {
    pub orders: Vec<serde_json::Value>,
}

pub fn chain_from_json(text: &str) -> Result<GroupChain> {
    let file: ChainFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let orders = file.orders.iter().map(rational::value_to_natural).collect::<Result<_>>()?;
    GroupChain::new(orders)
}

/// Coset tower of a chain: homogeneous with deg_k^{k+1} = o_{k+1}/o_k, levels above `cutoff` width explicit.
pub fn group_chain_tower(chain: &GroupChain, cutoff: usize) -> Result<Tower> {
    let q = chain.quotients();
    Tower::homogeneous(Tower::integer_labels(q.len() + 1), &q, cutoff)
}

/// On-disk tower format.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TowerFile {
    pub levels: Vec<serde_json::Value>,
    pub nodes: Vec<NodeEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bundles: Vec<BundleEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NodeEntry {
    pub id: String,
    pub level: serde_json::Value,
    #[serde(default)]
    pub parent: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BundleEntry {
    pub node: String,
    /// `[deg0, multiplicity]`, or `[{"fibers": [...]}, multiplicity]` for nested counted subtrees.
    pub fibers: Vec<(serde_json::Value, serde_json::Value)>,
}

fn parse_fiber(arena: &mut ShapeArena, level: usize, entry: &serde_json::Value) -> Result<ShapeId> {
    match entry {
        serde_json::Value::Object(map) => {
            let fibers = map
                .get("fibers")
                .and_then(|v| v.as_array())
                .ok_or_else(|| Error::Parse("nested fiber needs a \"fibers\" array".into()))?;
            if level == 0 {
                return Err(Error::Parse("nested fibers below level 0".into()));
            }
            let mut children = Vec::with_capacity(fibers.len());
            for f in fibers {
                let pair = f.as_array().filter(|a| a.len() == 2).ok_or_else(|| Error::Parse("fiber entries are pairs".into()))?;
                let s = parse_fiber(arena, level - 1, &pair[0])?;
                children.push((s, rational::value_to_natural(&pair[1])?));
            }
            arena.intern(level, children)
        }
        other => {
            let v = rational::value_to_natural(other)?;
            arena.spine(level, &v)
        }
    }
}

fn write_fiber(arena: &ShapeArena, s: ShapeId) -> serde_json::Value {
    let sh = arena.get(s);
    if sh.level == 0 {
        return serde_json::Value::String("1".into());
    }
    let fibers: Vec<serde_json::Value> = sh
        .children
        .iter()
        .map(|(c, m)| serde_json::Value::Array(vec![write_fiber(arena, *c), serde_json::Value::String(m.to_string())]))
        .collect();
    serde_json::json!({ "fibers": fibers })
}

impl TowerFile {
    pub fn into_tower(self) -> Result<Tower> {
        let labels: Vec<Rational> = self.levels.iter().map(rational::value_to_rational).collect::<Result<_>>()?;
        let level_of = |v: &serde_json::Value| -> Result<usize> {
            let r = rational::value_to_rational(v)?;
            labels.iter().position(|l| *l == r).ok_or_else(|| Error::Invalid(format!("node level {r} is not a listed level")))
        };
        let n = labels.len();
        let mut per_level: Vec<Vec<&NodeEntry>> = vec![Vec::new(); n];
        for e in &self.nodes {
            per_level[level_of(&e.level)?].push(e);
        }
        let base = per_level.iter().position(|v| !v.is_empty()).ok_or_else(|| Error::Invalid("tower has no nodes".into()))?;
        let mut index: HashMap<&str, (usize, usize)> = HashMap::new();
        for (l, v) in per_level.iter().enumerate() {
            for (i, e) in v.iter().enumerate() {
                if index.insert(e.id.as_str(), (l, i)).is_some() {
                    return invalid(format!("duplicate node identifier {:?}", e.id));
                }
            }
        }
        let mut parents = Vec::new();
        let mut names = Vec::new();
        for l in base..n {
            let mut ps = Vec::new();
            for e in &per_level[l] {
                let p = match &e.parent {
                    None => None,
                    Some(pid) => {
                        let &(pl, pi) = index
                            .get(pid.as_str())
                            .ok_or_else(|| Error::Invalid(format!("unknown parent {pid:?} of {:?}", e.id)))?;
                        if pl != l + 1 {
                            return invalid(format!("level gap: parent {pid:?} of {:?} is not on the next level", e.id));
                        }
                        Some(pi)
                    }
                };
                ps.push(p);
            }
            parents.push(ps);
            names.push(per_level[l].iter().map(|e| e.id.clone()).collect());
        }
        if (base..n).any(|l| per_level[l].is_empty()) {
            return invalid("level gap: an explicit level between the lowest and the top has no nodes");
        }
        let mut shapes = ShapeArena::default();
        let mut bundles: Vec<Option<Vec<(ShapeId, BigUint)>>> = vec![None; per_level[base].len()];
        for b in &self.bundles {
            let &(l, i) = index
                .get(b.node.as_str())
                .ok_or_else(|| Error::Invalid(format!("bundle for unknown node {:?}", b.node)))?;
            if l != base {
                return invalid("bundles attach to nodes of the lowest explicit level only");
            }
            if base == 0 {
                return invalid("bundles need counted levels below the lowest explicit level");
            }
            let mut v = Vec::new();
            for (f, m) in &b.fibers {
                v.push((parse_fiber(&mut shapes, base - 1, f)?, rational::value_to_natural(m)?));
            }
            bundles[i] = Some(v);
        }
        Tower::new(labels, base, names, parents, bundles, shapes)
    }

    pub fn from_tower(t: &Tower) -> Self {
        let levels = t.labels().iter().map(|l| serde_json::Value::String(l.to_string())).collect();
        let mut nodes = Vec::new();
        for x in t.explicit_nodes() {
            nodes.push(NodeEntry {
                id: t.node(x).name.clone(),
                level: serde_json::Value::String(t.labels()[x.level].to_string()),
                parent: t.parent(x).map(|p| t.node(p).name.clone()),
            });
        }
        let mut bundles = Vec::new();
        if t.base() > 0 {
            for (i, node) in t.nodes(t.base()).iter().enumerate() {
                if let Some(b) = t.bundle(i) {
                    bundles.push(BundleEntry {
                        node: node.name.clone(),
                        fibers: b
                            .iter()
                            .map(|(s, m)| (write_fiber(t.shapes(), *s), serde_json::Value::String(m.to_string())))
                            .collect(),
                    });
                }
            }
        }
        Self { levels, nodes, bundles }
    }
}

pub fn tower_from_json(text: &str) -> Result<Tower> {
    let file: TowerFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    file.into_tower()
}

pub fn tower_to_json(t: &Tower) -> String {
    serde_json::to_string_pretty(&TowerFile::from_tower(t)).expect("serializable")
}

/// The three-level example p,q,r → u,v → w with pred(u) = {p,q}, pred(v) = {r}.
pub fn example_tower() -> Tower {
    let names = vec![
        vec!["p".to_string(), "q".to_string(), "r".to_string()],
        vec!["u".to_string(), "v".to_string()],
        vec!["w".to_string()],
    ];
    let parents = vec![vec![Some(0), Some(0), Some(1)], vec![Some(0), Some(0)], vec![None]];
    Tower::new(Tower::integer_labels(3), 0, names, parents, vec![None; 3], ShapeArena::default()).expect("valid")
}

/// Binary tower with `depth` steps, fully explicit.
pub fn binary_tower(depth: usize) -> Tower {
    let d = vec![BigUint::from(2u32); depth];
    Tower::homogeneous(Tower::integer_labels(depth + 1), &d, usize::MAX).expect("valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{capacity, line_fixture};
    use crate::rational::int;

    fn n(v: u64) -> BigUint {
        BigUint::from(v)
    }

    #[test]
    fn example_flags_and_meets() {
        let t = example_tower();
        assert!(t.is_pruned());
        assert!(!t.is_homogeneous());
        let p = t.find("p").unwrap();
        let q = t.find("q").unwrap();
        let r = t.find("r").unwrap();
        assert_eq!(t.node(t.meet(p, q)).name, "u");
        assert_eq!(t.node(t.meet(p, r)).name, "w");
        assert_eq!(t.meet(p, p), p);
        let prof = t.degree_profile();
        assert_eq!(prof.deg(0, 2), &n(3));
        assert_eq!(prof.big_deg(0, 1), &n(2));
        assert_eq!(prof.deg(0, 1), &n(1));
    }

    #[test]
    fn labels() {
        let t = example_tower();
        assert_eq!(t.level_labeling(t.find("p").unwrap()), vec![0, 1, 2]);
        assert_eq!(t.level_labeling(t.find("u").unwrap()), vec![-1, 0, 1]);
    }

    #[test]
    fn rejects_bad_towers() {
        let bad = r#"{"levels":[0,1],"nodes":[{"id":"a","level":0,"parent":"t"},{"id":"b","level":0,"parent":"t"},{"id":"t","level":1},{"id":"s","level":1}]}"#;
        assert!(tower_from_json(bad).is_err());
        let gap = r#"{"levels":[0,1,2],"nodes":[{"id":"a","level":0,"parent":"t"},{"id":"t","level":2}]}"#;
        assert!(tower_from_json(gap).is_err());
        let dup = r#"{"levels":[0,1],"nodes":[{"id":"a","level":0,"parent":"t"},{"id":"a","level":0,"parent":"t"},{"id":"t","level":1}]}"#;
        assert!(tower_from_json(dup).is_err());
    }

    #[test]
    fn binary_profile() {
        let t = binary_tower(4);
        assert!(t.is_homogeneous());
        let p = t.degree_profile();
        for l in 0..=4 {
            for k in 0..=l {
                assert_eq!(p.deg(k, l), &n(1 << (l - k)));
            }
        }
    }

    #[test]
    fn boundary_of_example() {
        let t = example_tower();
        let f = ScalingFunction::new(vec![int(1), int(2), int(4)]).unwrap();
        let (x, _) = t.boundary(&f).unwrap();
        assert_eq!(x.dist(0, 1), &int(2));
        assert_eq!(x.dist(0, 2), &int(4));
        assert_eq!(x.dist(1, 2), &int(4));
        assert!(x.is_ultrametric());
    }

    #[test]
    fn binary_boundary_capacities() {
        let t = binary_tower(3);
        let (x, _) = t.boundary(&ScalingFunction::dyadic(4)).unwrap();
        for l in 0..=3i64 {
            for k in 0..=l {
                let c = capacity(&x, &crate::rational::pow2(k), &crate::rational::pow2(l)).unwrap();
                assert_eq!(c, (n(1 << (l - k)), n(1 << (l - k))));
            }
        }
    }

    #[test]
    fn subtowers() {
        let t = binary_tower(4);
        assert_eq!(t.level_subtower(&[0, 1, 2, 3, 4]).unwrap(), t);
        let s = t.level_subtower(&[0, 2, 4]).unwrap();
        assert!(s.is_homogeneous());
        assert_eq!(s.step_degrees().unwrap(), vec![n(4), n(4)]);
        assert_eq!(t.level_subtower(&[4]).unwrap().node_count(), 1);
        assert!(t.level_subtower(&[0, 2]).is_err());
    }

    #[test]
    fn counted_subtower_conserves_totals() {
        let t = Tower::homogeneous(Tower::integer_labels(5), &[n(3), n(5), n(2), n(7)], 10).unwrap();
        assert!(t.is_counted());
        let top = NodeRef::new(4, 0);
        assert_eq!(t.deg0(top), &n(210));
        let s = t.level_subtower(&[0, 1, 3, 4]).unwrap();
        assert_eq!(s.deg0(NodeRef::new(s.top(), 0)), &n(210));
        assert_eq!(s.step_degrees().unwrap(), vec![n(3), n(10), n(7)]);
        let m = t.materialize(1000).unwrap();
        assert_eq!(m.degree_profile(), t.degree_profile());
    }

    #[test]
    fn canonical_line_tower() {
        let x = line_fixture();
        let (t, map) = canonical_tower(&x, &[int(1), int(8)]).unwrap();
        assert_eq!(t.nodes(0).len(), 2);
        assert_eq!(t.nodes(1).len(), 1);
        assert_eq!(map, vec![0, 0, 0, 1]);
        assert_eq!(t.degree_profile().deg(0, 1), &n(2));
        assert!(canonical_map_bound_check(&x, &[int(1), int(8)]).unwrap().pass);
        assert!(canonical_tower(&x, &[int(1), int(5)]).is_err());
    }

    #[test]
    fn chains() {
        let t = group_chain_tower(&GroupChain::from_u64(&[1, 2, 6]).unwrap(), 100).unwrap();
        assert_eq!(t.step_degrees().unwrap(), vec![n(2), n(3)]);
        let b = group_chain_tower(&GroupChain::from_u64(&[1, 2, 4, 8]).unwrap(), 100).unwrap();
        assert_eq!(b, binary_tower(3));
        assert!(GroupChain::from_u64(&[1, 3, 5]).is_err());
        assert!(GroupChain::from_u64(&[2, 4]).is_err());
    }

    #[test]
    fn file_round_trip() {
        for t in [example_tower(), binary_tower(3), Tower::homogeneous(Tower::integer_labels(4), &[n(4), n(3), n(2)], 5).unwrap()] {
            assert_eq!(tower_from_json(&tower_to_json(&t)).unwrap(), t);
        }
        let counted = r#"{"levels":[0,1,2],"nodes":[{"id":"a","level":1,"parent":"t"},{"id":"b","level":1,"parent":"t"},{"id":"t","level":2}],
            "bundles":[{"node":"a","fibers":[[1,"5"]]},{"node":"b","fibers":[[1,3]]}]}"#;
        let t = tower_from_json(counted).unwrap();
        assert_eq!(t.deg0(NodeRef::new(2, 0)), &n(8));
        assert_eq!(t.degree_profile().get(0, 1), &(n(3), n(5)));
        assert_eq!(tower_from_json(&tower_to_json(&t)).unwrap(), t);
    }
}
