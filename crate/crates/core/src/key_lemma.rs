//! Surjective tower immersions T → H under the Key Lemma degree hypotheses.
//!
//! Plateaus are multisets of items (explicit nodes or counted shapes). A placement maps a plateau
//! onto one target node and its lower cone onto the target's lower cone: quotas split the target's
//! children among plateau points, each point's children are dealt into that many groups, and each
//! group is placed recursively onto its own target child. Counted placements are memoized by
//! composition, so astronomically large bases cost only as much as their distinct group shapes.

use std::collections::HashMap;
use std::sync::OnceLock;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};
use crate::morphism::{classify_map, MapFlags, TowerMap};
use crate::rational::{self, Rational};
use crate::tower::{NodeRef, ShapeId, Tower};

/// Prefix length used for the infinite products in the ratio bounds.
pub const PRODUCT_PREFIX: u32 = 64;

/// ε_k = 4^{−k}.
pub fn epsilon(k: u32) -> Rational {
    Rational::new(BigUint::one().into(), rational::pow4_natural(k).into())
}

/// Π_{i=a}^{b} (1+ε_i)/(1−ε_i); empty ranges give 1.
pub fn epsilon_products(a: u32, b: u32) -> Rational {
    let mut p = rational::int(1);
    for i in a.max(1)..=b {
        let q = rational::pow4_natural(i);
        p *= Rational::new((&q + 1u32).into(), (&q - 1u32).into());
    }
    p
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisRow {
    pub k: usize,
    /// deg₀^k(T) and 4^{k+5}·deg₀^{k−1}(H).
    pub base_degree: String,
    pub base_required: String,
    #[serde(with = "crate::rational::serde_rational")]
    pub base_margin: Rational,
    pub base_pass: bool,
    /// deg₀^k(H) and 4^k·Deg₀^k(T).
    pub target_degree: String,
    pub target_required: String,
    #[serde(with = "crate::rational::serde_rational")]
    pub target_margin: Rational,
    pub target_pass: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub rows: Vec<HypothesisRow>,
    pub pass: bool,
}

/// Evaluates both degree conditions exactly for k = 1..=depth.
pub fn check_hypotheses(t: &Tower, h: &Tower, depth: usize) -> Result<HypothesisReport> {
    if !h.is_homogeneous() {
        return precondition("the receiving tower must be homogeneous");
    }
    if t.level_count() < depth + 1 || h.level_count() < depth + 1 {
        return precondition(format!("both towers need at least {} levels", depth + 1));
    }
    let (pt, ph) = (t.degree_profile(), h.degree_profile());
    let mut rows = Vec::new();
    for k in 1..=depth {
        let lhs1 = pt.deg(0, k).clone();
        let rhs1 = rational::pow4_natural(k as u32 + 5) * ph.deg(0, k - 1);
        let lhs2 = ph.deg(0, k).clone();
        let rhs2 = rational::pow4_natural(k as u32) * pt.big_deg(0, k);
        let margin = |a: &BigUint, b: &BigUint| {
            if b.is_zero() {
                rational::from_natural(a)
            } else {
                Rational::new(a.clone().into(), b.clone().into())
            }
        };
        rows.push(HypothesisRow {
            k,
            base_margin: margin(&lhs1, &rhs1),
            base_pass: lhs1 >= rhs1,
            base_degree: lhs1.to_string(),
            base_required: rhs1.to_string(),
            target_margin: margin(&lhs2, &rhs2),
            target_pass: lhs2 >= rhs2,
            target_degree: lhs2.to_string(),
            target_required: rhs2.to_string(),
        });
    }
    let pass = rows.iter().all(|r| r.base_pass && r.target_pass);
    Ok(HypothesisReport { rows, pass })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatioAudit {
    pub level: usize,
    #[serde(with = "crate::rational::serde_rational")]
    pub ratio: Rational,
    #[serde(with = "crate::rational::serde_rational")]
    pub lower: Rational,
    #[serde(with = "crate::rational::serde_rational")]
    pub upper: Rational,
    pub pass: bool,
}

/// deg₀(A)/deg₀^k(H) against [8/Π, 16·Π] with Π the prefix Π_{i=k+1}^{64}(1+ε_i)/(1−ε_i).
///
/// The prefix is below the infinite product, so both comparisons are conservative.
pub fn ratio_bounds_check(base_count: &BigUint, target_base: &BigUint, level: usize) -> RatioAudit {
    let ratio = Rational::new(base_count.clone().into(), target_base.clone().into());
    static BOUNDS: OnceLock<Vec<(Rational, Rational)>> = OnceLock::new();
    let table = BOUNDS.get_or_init(|| {
        (0..=PRODUCT_PREFIX)
            .map(|k| {
                let p = epsilon_products(k + 1, PRODUCT_PREFIX);
                (rational::int(8) / &p, rational::int(16) * &p)
            })
            .collect()
    });
    let (lower, upper) = table[level.min(PRODUCT_PREFIX as usize)].clone();
    let pass = ratio >= lower && ratio <= upper;
    RatioAudit { level, ratio, lower, upper, pass }
}

/// Largest-remainder quotas: Σ d = total, |d_a − total·w_a/W| < 1, ties to the earlier point.
pub fn choose_quota(weights: &[BigUint], total: &BigUint) -> Result<Vec<BigUint>> {
    let classes: Vec<(BigUint, BigUint)> = weights.iter().map(|w| (w.clone(), BigUint::one())).collect();
    let q = apportion(&classes, total)?;
    Ok(q.into_iter().map(|v| v[0].0.clone()).collect())
}

/// Class-aware apportionment: for each (weight, instances), a list of (quota, instances) entries.
fn apportion(classes: &[(BigUint, BigUint)], total: &BigUint) -> Result<Vec<Vec<(BigUint, BigUint)>>> {
    let w_sum: BigUint = classes.iter().map(|(w, m)| w * m).sum();
    if w_sum.is_zero() {
        return precondition("quota needs a plateau with positive base count");
    }
    let mut floors = Vec::with_capacity(classes.len());
    let mut assigned = BigUint::zero();
    for (w, m) in classes {
        let (f, r) = (total * w).div_rem(&w_sum);
        assigned += &f * m;
        floors.push((f, r));
    }
    let mut remainder = total - &assigned;
    let mut order: Vec<usize> = (0..classes.len()).collect();
    order.sort_by(|&a, &b| floors[b].1.cmp(&floors[a].1).then(a.cmp(&b)));
    let mut bumps = vec![BigUint::zero(); classes.len()];
    for i in order {
        if remainder.is_zero() {
            break;
        }
        let take = remainder.clone().min(classes[i].1.clone());
        remainder -= &take;
        bumps[i] = take;
    }
    Ok(classes
        .iter()
        .zip(floors)
        .zip(bumps)
        .map(|(((_, m), (f, _)), b)| {
            let mut v = Vec::new();
            if !b.is_zero() {
                v.push((&f + 1u32, b.clone()));
            }
            if *m > b {
                v.push((f, m - &b));
            }
            v
        })
        .collect())
}

/// Near-uniform split of a multiset of sizes into `groups` bins by cyclic dealing in descending size.
///
/// Returns runs of identical bins in bin order: (per-class counts, run length). Every bin total
/// lies within the largest size of the mean.
pub fn split_plateau(sizes: &[(BigUint, BigUint)], groups: &BigUint) -> Result<Vec<(Vec<(usize, BigUint)>, BigUint)>> {
    if groups.is_zero() {
        return precondition("a plateau split needs at least one group");
    }
    let items: BigUint = sizes.iter().map(|(_, m)| m.clone()).sum();
    if items < *groups {
        return precondition(format!("{items} children cannot fill {groups} nonempty groups"));
    }
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| sizes[b].0.cmp(&sizes[a].0).then(a.cmp(&b)));
    let classes: Vec<(usize, BigUint)> = order.into_iter().map(|i| (i, sizes[i].1.clone())).collect();
    Ok(deal(&classes, groups))
}

/// Cyclic dealing of (class, multiplicity) in the given order into `d` bins, as runs.
fn deal<K: Clone + PartialEq>(classes: &[(K, BigUint)], d: &BigUint) -> Vec<(Vec<(K, BigUint)>, BigUint)> {
    // Segments: (start, composition); segment i covers [start_i, start_{i+1}).
    let mut segs: Vec<(BigUint, Vec<(K, BigUint)>)> = vec![(BigUint::zero(), Vec::new())];
    let split_at = |segs: &mut Vec<(BigUint, Vec<(K, BigUint)>)>, pos: &BigUint| {
        if pos.is_zero() || pos >= d {
            return;
        }
        let i = segs.partition_point(|(s, _)| s <= pos) - 1;
        if segs[i].0 != *pos {
            let comp = segs[i].1.clone();
            segs.insert(i + 1, (pos.clone(), comp));
        }
    };
    let add = |comp: &mut Vec<(K, BigUint)>, k: &K, n: &BigUint| {
        if let Some(last) = comp.last_mut() {
            if last.0 == *k {
                last.1 += n;
                return;
            }
        }
        comp.push((k.clone(), n.clone()));
    };
    let mut cursor = BigUint::zero();
    for (k, m) in classes {
        if m.is_zero() {
            continue;
        }
        let (q, r) = m.div_rem(d);
        let s = &cursor % d;
        let e = &s + &r;
        let ranges: Vec<(BigUint, BigUint)> = if r.is_zero() {
            Vec::new()
        } else if e <= *d {
            vec![(s.clone(), e.clone())]
        } else {
            vec![(s.clone(), d.clone()), (BigUint::zero(), &e - d)]
        };
        for (a, b) in &ranges {
            split_at(&mut segs, a);
            split_at(&mut segs, b);
        }
        if q.is_zero() {
            for (a, b) in &ranges {
                let lo = segs.partition_point(|(s, _)| s < a);
                let hi = segs.partition_point(|(s, _)| s < b);
                for seg in &mut segs[lo..hi] {
                    add(&mut seg.1, k, &BigUint::one());
                }
            }
        } else {
            for seg in segs.iter_mut() {
                let extra = ranges.iter().any(|(a, b)| seg.0 >= *a && seg.0 < *b);
                let total = if extra { &q + 1u32 } else { q.clone() };
                add(&mut seg.1, k, &total);
            }
        }
        cursor += m;
    }
    let mut runs: Vec<(Vec<(K, BigUint)>, BigUint)> = Vec::new();
    for i in 0..segs.len() {
        let end = segs.get(i + 1).map(|s| s.0.clone()).unwrap_or_else(|| d.clone());
        let len = &end - &segs[i].0;
        match runs.last_mut() {
            Some(last) if last.0 == segs[i].1 => last.1 += len,
            _ => runs.push((segs[i].1.clone(), len)),
        }
    }
    runs
}

/// A plateau point: an explicit node or one instance of a counted shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Item {
    Node(NodeRef),
    Shape(ShapeId),
}

pub type PlacementId = usize;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupClass {
    pub members: Vec<(Item, BigUint)>,
    /// Number of identical consecutive groups.
    pub count: BigUint,
    pub child: PlacementId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ItemPlan {
    pub item: Item,
    pub instances: BigUint,
    pub quota: BigUint,
    /// Per-instance layout; consecutive group runs take consecutive target offsets.
    pub groups: Vec<GroupClass>,
}

/// A plateau mapped onto one target node of `level`, its cone onto the target's cone.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Placement {
    pub level: usize,
    pub plateau: Vec<(Item, BigUint)>,
    pub plans: Vec<ItemPlan>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuotaAudit {
    pub level: usize,
    pub plateau_base: String,
    pub target_degree: String,
    /// max |d_a − deg(w)·deg₀(a)/deg₀(A)|.
    #[serde(with = "crate::rational::serde_rational")]
    pub max_deviation: Rational,
    pub sum_matches: bool,
    pub all_positive: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAudit {
    pub level: usize,
    pub groups: String,
    #[serde(with = "crate::rational::serde_rational")]
    pub mean: Rational,
    #[serde(with = "crate::rational::serde_rational")]
    pub max_deviation: Rational,
    pub bound: String,
    pub conserved: bool,
    /// The remainder split beside a pinned group (mean taken over the remainder).
    pub pinned_remainder: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionAudit {
    pub k: usize,
    pub points: String,
    #[serde(with = "crate::rational::serde_rational")]
    pub ratio: Rational,
    pub in_window: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditLog {
    pub selections: Vec<SelectionAudit>,
    pub ratios: Vec<RatioAudit>,
    pub quotas: Vec<QuotaAudit>,
    pub splits: Vec<SplitAudit>,
}

impl AuditLog {
    pub fn all_pass(&self) -> bool {
        self.selections.iter().all(|s| s.in_window)
            && self.ratios.iter().all(|r| r.pass)
            && self.quotas.iter().all(|q| q.sum_matches && q.all_positive && q.max_deviation <= rational::int(1))
            && self.splits.iter().all(|s| s.conserved && s.max_deviation <= rational::from_natural(&s.bound.parse::<BigUint>().unwrap()))
    }

    /// Structured text, one audit per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.selections {
            out.push_str(&format!("select k={} points={} ratio={} window={}\n", s.k, s.points, s.ratio, s.in_window));
        }
        for r in &self.ratios {
            out.push_str(&format!(
                "ratio level={} value={} lower≈{:.6} upper≈{:.6} pass={}\n",
                r.level,
                r.ratio,
                r.lower.to_f64().unwrap_or(f64::NAN),
                r.upper.to_f64().unwrap_or(f64::NAN),
                r.pass
            ));
        }
        for q in &self.quotas {
            out.push_str(&format!(
                "quota level={} base={} degree={} max_dev={} sum={} positive={}\n",
                q.level, q.plateau_base, q.target_degree, q.max_deviation, q.sum_matches, q.all_positive
            ));
        }
        for s in &self.splits {
            out.push_str(&format!(
                "split level={} groups={} mean={} max_dev={} bound={} conserved={} pinned={}\n",
                s.level, s.groups, s.mean, s.max_deviation, s.bound, s.conserved, s.pinned_remainder
            ));
        }
        out
    }
}

/// Recursive placement engine over a source tower and a homogeneous target degree sequence.
pub struct Builder<'a> {
    t: &'a Tower,
    /// deg₀^k(H).
    target_base: Vec<BigUint>,
    /// deg_{k−1}^k(H) (index 0 unused).
    target_step: Vec<BigUint>,
    /// Deg₀^k(T).
    source_big: Vec<BigUint>,
    pub placements: Vec<Placement>,
    memo: HashMap<(usize, Vec<(Item, BigUint)>), PlacementId>,
    pub audit: AuditLog,
}

impl<'a> Builder<'a> {
    pub fn new(t: &'a Tower, h: &Tower) -> Result<Self> {
        if !h.is_homogeneous() {
            return precondition("the receiving tower must be homogeneous");
        }
        let ph = h.degree_profile();
        let pt = t.degree_profile();
        let target_base: Vec<BigUint> = (0..h.level_count()).map(|k| ph.deg(0, k).clone()).collect();
        let mut target_step = vec![BigUint::zero()];
        target_step.extend((1..h.level_count()).map(|k| ph.deg(k - 1, k).clone()));
        let source_big = (0..t.level_count()).map(|k| pt.big_deg(0, k).clone()).collect();
        Ok(Self { t, target_base, target_step, source_big, placements: Vec::new(), memo: HashMap::new(), audit: AuditLog::default() })
    }

    pub fn deg0(&self, item: Item) -> BigUint {
        match item {
            Item::Node(x) => self.t.deg0(x).clone(),
            Item::Shape(s) => self.t.shapes().deg0(s).clone(),
        }
    }

    pub fn level_of(&self, item: Item) -> usize {
        match item {
            Item::Node(x) => x.level,
            Item::Shape(s) => self.t.shapes().get(s).level,
        }
    }

    /// pred(item) as classes in identifier order.
    pub fn children(&self, item: Item) -> Vec<(Item, BigUint)> {
        match item {
            Item::Node(x) if x.level == self.t.base() => self
                .t
                .bundle(x.index)
                .map(|b| b.iter().map(|(s, m)| (Item::Shape(*s), m.clone())).collect())
                .unwrap_or_default(),
            Item::Node(x) => self.t.children(x).map(|c| (Item::Node(c), BigUint::one())).collect(),
            Item::Shape(s) => self.t.shapes().get(s).children.iter().map(|(c, m)| (Item::Shape(*c), m.clone())).collect(),
        }
    }

    fn base_count(&self, items: &[(Item, BigUint)]) -> BigUint {
        items.iter().map(|(i, m)| self.deg0(*i) * m).sum()
    }

    fn audit_ratio(&mut self, items: &[(Item, BigUint)], level: usize) -> Result<()> {
        let a = ratio_bounds_check(&self.base_count(items), &self.target_base[level], level);
        let pass = a.pass;
        let ratio = a.ratio.clone();
        self.audit.ratios.push(a);
        if !pass {
            return Err(Error::Construction(format!("ratio {ratio} outside the admissible bounds at level {level}")));
        }
        Ok(())
    }

    fn quotas(&mut self, plateau: &[(Item, BigUint)], level: usize) -> Result<Vec<Vec<(BigUint, BigUint)>>> {
        let d = self.target_step[level].clone();
        let weights: Vec<(BigUint, BigUint)> = plateau.iter().map(|(i, m)| (self.deg0(*i), m.clone())).collect();
        let total: BigUint = weights.iter().map(|(w, m)| w * m).sum();
        let q = apportion(&weights, &d)?;
        let mut max_dev = rational::int(0);
        let mut sum = BigUint::zero();
        let mut positive = true;
        for ((w, _), entries) in weights.iter().zip(&q) {
            let target = Rational::new((&d * w).into(), total.clone().into());
            for (quota, inst) in entries {
                let dev = (rational::from_natural(quota) - &target).abs();
                if dev > max_dev {
                    max_dev = dev;
                }
                sum += quota * inst;
                positive &= !quota.is_zero();
            }
        }
        let audit = QuotaAudit {
            level,
            plateau_base: total.to_string(),
            target_degree: d.to_string(),
            max_deviation: max_dev,
            sum_matches: sum == d,
            all_positive: positive,
        };
        self.audit.quotas.push(audit);
        if !positive {
            return Err(Error::Construction(format!(
                "a plateau point on level {level} received no target children (ratio bounds violated)"
            )));
        }
        Ok(q)
    }

    /// Deals `children` into `groups` bins and audits the deviation from the mean.
    fn split(&mut self, children: &[(Item, BigUint)], groups: &BigUint, level: usize, pinned: bool) -> Result<Vec<(Vec<(Item, BigUint)>, BigUint)>> {
        let mut order: Vec<usize> = (0..children.len()).collect();
        let sizes: Vec<BigUint> = children.iter().map(|(i, _)| self.deg0(*i)).collect();
        order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(a.cmp(&b)));
        let count: BigUint = children.iter().map(|(_, m)| m.clone()).sum();
        if count < *groups || groups.is_zero() {
            return Err(Error::Construction(format!(
                "{count} children on level {level} cannot fill {groups} nonempty groups"
            )));
        }
        let classes: Vec<(Item, BigUint)> = order.iter().map(|&i| children[i].clone()).collect();
        let runs = deal(&classes, groups);
        let total = self.base_count(children);
        let mean = Rational::new(total.clone().into(), groups.clone().into());
        let mut max_dev = rational::int(0);
        let mut recount = BigUint::zero();
        for (members, len) in &runs {
            let s = self.base_count(members);
            recount += &s * len;
            let dev = (rational::from_natural(&s) - &mean).abs();
            if dev > max_dev {
                max_dev = dev;
            }
        }
        let bound = self.source_big[level].clone();
        let ok = max_dev <= rational::from_natural(&bound);
        self.audit.splits.push(SplitAudit {
            level,
            groups: groups.to_string(),
            mean,
            max_deviation: max_dev.clone(),
            bound: bound.to_string(),
            conserved: recount == total,
            pinned_remainder: pinned,
        });
        if !ok || recount != total {
            return Err(Error::Construction(format!(
                "plateau split on level {level}: deviation {max_dev} exceeds Deg₀ = {bound}"
            )));
        }
        Ok(runs)
    }

    /// Admissible immersion of the trapezium below `plateau` (all on `level`) onto a target node's cone.
    pub fn place(&mut self, plateau: Vec<(Item, BigUint)>, level: usize) -> Result<PlacementId> {
        let key = (level, plateau.clone());
        if let Some(&id) = self.memo.get(&key) {
            return Ok(id);
        }
        if level >= self.target_base.len() {
            return precondition(format!("receiving tower has no level {level}"));
        }
        self.audit_ratio(&plateau, level)?;
        let mut plans = Vec::new();
        if level == 0 {
            for (item, m) in &plateau {
                plans.push(ItemPlan { item: *item, instances: m.clone(), quota: BigUint::zero(), groups: Vec::new() });
            }
        } else {
            let q = self.quotas(&plateau, level)?;
            for ((item, _), entries) in plateau.iter().zip(q) {
                let children = self.children(*item);
                for (quota, inst) in entries {
                    let runs = self.split(&children, &quota, level - 1, false)?;
                    let mut groups = Vec::with_capacity(runs.len());
                    for (members, count) in runs {
                        let child = self.place(members.clone(), level - 1)?;
                        groups.push(GroupClass { members, count, child });
                    }
                    plans.push(ItemPlan { item: *item, instances: inst, quota, groups });
                }
            }
        }
        let id = self.placements.len();
        self.placements.push(Placement { level, plateau, plans });
        self.memo.insert(key, id);
        Ok(id)
    }

    /// Placement of `plateau` whose first point (one instance) keeps `pinned` as its first group.
    fn place_pinned(&mut self, plateau: Vec<(Item, BigUint)>, level: usize, pinned: (Vec<(Item, BigUint)>, PlacementId)) -> Result<PlacementId> {
        self.audit_ratio(&plateau, level)?;
        let q = self.quotas(&plateau, level)?;
        let mut plans = Vec::new();
        for (idx, ((item, _), entries)) in plateau.iter().zip(q).enumerate() {
            let children = self.children(*item);
            for (quota, inst) in entries {
                let mut groups = Vec::new();
                if idx == 0 {
                    let rest = subtract(&children, &pinned.0)?;
                    groups.push(GroupClass { members: pinned.0.clone(), count: BigUint::one(), child: pinned.1 });
                    let left = &quota - 1u32;
                    if left.is_zero() {
                        if !rest.is_empty() {
                            return Err(Error::Construction(format!("branch point on level {level} has no quota left for its remaining children")));
                        }
                    } else {
                        for (members, count) in self.split(&rest, &left, level - 1, true)? {
                            let child = self.place(members.clone(), level - 1)?;
                            groups.push(GroupClass { members, count, child });
                        }
                    }
                } else {
                    for (members, count) in self.split(&children, &quota, level - 1, false)? {
                        let child = self.place(members.clone(), level - 1)?;
                        groups.push(GroupClass { members, count, child });
                    }
                }
                plans.push(ItemPlan { item: *item, instances: inst, quota, groups });
            }
        }
        let id = self.placements.len();
        self.placements.push(Placement { level, plateau, plans });
        Ok(id)
    }
}

/// Multiset difference `a − b`, preserving the order of `a`.
fn subtract(a: &[(Item, BigUint)], b: &[(Item, BigUint)]) -> Result<Vec<(Item, BigUint)>> {
    let mut need: HashMap<Item, BigUint> = HashMap::new();
    for (i, m) in b {
        *need.entry(*i).or_default() += m;
    }
    let mut out = Vec::new();
    for (i, m) in a {
        let take = need.get(i).cloned().unwrap_or_default().min(m.clone());
        if let Some(n) = need.get_mut(i) {
            *n -= &take;
        }
        let left = m - &take;
        if !left.is_zero() {
            out.push((*i, left));
        }
    }
    if need.values().any(|v| !v.is_zero()) {
        return Err(Error::Construction("pinned group is not contained in the branch point's children".into()));
    }
    Ok(out)
}

fn merge(items: &[(Item, BigUint)]) -> Vec<(Item, BigUint)> {
    let mut m: std::collections::BTreeMap<Item, BigUint> = std::collections::BTreeMap::new();
    for (i, c) in items {
        if !c.is_zero() {
            *m.entry(*i).or_default() += c;
        }
    }
    m.into_iter().collect()
}

/// Output of the main construction.
#[derive(Clone, Debug)]
pub struct KeyLemmaImmersion {
    pub depth: usize,
    /// a_0 … a_{depth+1}.
    pub branch: Vec<Item>,
    /// A_0 … A_depth, each listing its branch point first as a single instance.
    pub plateaus: Vec<Vec<(Item, BigUint)>>,
    pub placements: Vec<Placement>,
    /// Placement of A_k onto b_k for every k.
    pub roots: Vec<PlacementId>,
    pub hypotheses: HypothesisReport,
    pub audit: AuditLog,
    target_step: Vec<BigUint>,
    target_base: Vec<BigUint>,
}

/// Surjective immersion ↓A_K → ↓b_K along the first branches of T and H.
///
/// A_k ⊂ pred(a_{k+1}) grows greedily from a_k until deg₀(A_k)/deg₀^k(H) ≥ 11. The placement of
/// A_{k+1} keeps A_k as the first group of a_{k+1}, mapped onto b_k (offset 0), so φ_{k+1}
/// extends φ_k; the rest of pred(a_{k+1}) and the other points of A_{k+1} are split as usual.
pub fn main_immersion(t: &Tower, h: &Tower, depth: usize, anchor: Option<NodeRef>) -> Result<KeyLemmaImmersion> {
    let hypotheses = check_hypotheses(t, h, depth)?;
    if !hypotheses.pass {
        let bad = hypotheses.rows.iter().find(|r| !r.base_pass || !r.target_pass).unwrap();
        return precondition(format!(
            "degree hypotheses fail at k = {}: deg₀^k(T) = {} vs {} required, deg₀^k(H) = {} vs {} required",
            bad.k, bad.base_degree, bad.base_required, bad.target_degree, bad.target_required
        ));
    }
    if t.level_count() < depth + 2 {
        return precondition(format!("source tower needs level {} above the window", depth + 1));
    }
    let mut b = Builder::new(t, h)?;
    for k in 0..=depth {
        if b.source_big[k] > b.target_base[k] {
            return precondition(format!("Deg₀^{k}(T) exceeds deg₀^{k}(H): the 11–13 window could overshoot"));
        }
    }
    // Branch: descend by first children from the anchor (default: the top) down to level 0.
    let start = anchor.unwrap_or(NodeRef::new(t.top(), 0));
    if start.level < depth + 1 {
        return precondition("anchor must sit at or above level depth + 1");
    }
    let mut branch_rev = vec![Item::Node(start)];
    while b.level_of(*branch_rev.last().unwrap()) > 0 {
        let cur = *branch_rev.last().unwrap();
        let first = b.children(cur).first().map(|c| c.0);
        match first {
            Some(c) => branch_rev.push(c),
            None => return precondition("branch reaches a node without children before level 0"),
        }
    }
    branch_rev.reverse();
    let branch: Vec<Item> = branch_rev[..=depth + 1].to_vec();
    let mut plateaus = Vec::new();
    let mut roots = Vec::new();
    let mut prev: Option<(Vec<(Item, BigUint)>, PlacementId)> = None;
    for k in 0..=depth {
        let children = b.children(branch[k + 1]);
        let need = BigUint::from(11u32) * &b.target_base[k];
        let mut plateau: Vec<(Item, BigUint)> = vec![(branch[k], BigUint::one())];
        let mut acc = b.deg0(branch[k]);
        let mut first = true;
        for (item, m) in &children {
            let mut avail = m.clone();
            if first {
                avail -= 1u32;
                first = false;
            }
            if acc >= need {
                break;
            }
            if avail.is_zero() {
                continue;
            }
            let size = b.deg0(*item);
            let want = (&need - &acc).div_ceil(&size);
            let take = want.min(avail);
            acc += &size * &take;
            plateau.push((*item, take));
        }
        let ratio = Rational::new(acc.clone().into(), b.target_base[k].clone().into());
        let in_window = ratio >= rational::int(11) && ratio <= rational::int(13);
        let points: BigUint = plateau.iter().map(|(_, m)| m.clone()).sum();
        b.audit.selections.push(SelectionAudit { k, points: points.to_string(), ratio: ratio.clone(), in_window });
        if !in_window {
            return Err(Error::Construction(format!("ratio window [11,13] unreachable at k = {k}: reached {ratio}")));
        }
        let id = match prev.take() {
            None => b.place(plateau.clone(), 0)?,
            Some(pinned) => b.place_pinned(plateau.clone(), k, pinned)?,
        };
        roots.push(id);
        prev = Some((plateau.clone(), id));
        plateaus.push(plateau);
    }
    Ok(KeyLemmaImmersion {
        depth,
        branch,
        plateaus,
        placements: b.placements,
        roots,
        hypotheses,
        audit: b.audit,
        target_step: b.target_step,
        target_base: b.target_base,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImmersionVerdict {
    /// Groups partition each point's children and sit under that single point.
    pub groups_partition_children: bool,
    /// Group offsets tile pred(w) exactly.
    pub offsets_biject: bool,
    /// Child placements carry exactly their group's members, one level down.
    pub levels_consistent: bool,
    /// A_{k−1} sits inside A_k's placement as the offset-0 group of a_k.
    pub extends_previous: bool,
    /// Image counts per level equal the target cone sizes.
    pub image_counts: Vec<String>,
    pub surjective_by_counts: bool,
    pub immersion: bool,
    pub detail: Option<String>,
}

impl KeyLemmaImmersion {
    pub fn root(&self) -> PlacementId {
        *self.roots.last().unwrap()
    }

    /// Independent structural audit of the placement DAG.
    pub fn verify(&self, t: &Tower) -> ImmersionVerdict {
        let ctx = ChildLister { t };
        let mut detail = None;
        let mut partition = true;
        let mut tiling = true;
        let mut levels = true;
        for (pid, p) in self.placements.iter().enumerate() {
            let mut listed: Vec<(Item, BigUint)> = Vec::new();
            let mut sum = BigUint::zero();
            for plan in &p.plans {
                listed.push((plan.item, plan.instances.clone()));
                sum += &plan.quota * &plan.instances;
                let mut per_instance = BigUint::zero();
                let mut union: Vec<(Item, BigUint)> = Vec::new();
                for g in &plan.groups {
                    per_instance += &g.count;
                    let c = &self.placements[g.child];
                    if c.level + 1 != p.level || merge(&c.plateau) != merge(&g.members) || g.members.is_empty() {
                        levels = false;
                        detail.get_or_insert(format!("placement {pid}: child placement mismatch"));
                    }
                    for (i, m) in &g.members {
                        union.push((*i, m * &g.count));
                    }
                }
                if per_instance != plan.quota {
                    tiling = false;
                    detail.get_or_insert(format!("placement {pid}: groups do not fill the quota"));
                }
                if p.level > 0 && merge(&union) != merge(&ctx.children(plan.item)) {
                    partition = false;
                    detail.get_or_insert(format!("placement {pid}: groups do not partition pred of {:?}", plan.item));
                }
            }
            if merge(&listed) != merge(&p.plateau) {
                levels = false;
                detail.get_or_insert(format!("placement {pid}: plans do not cover the plateau"));
            }
            let want = if p.level == 0 { BigUint::zero() } else { self.target_step[p.level].clone() };
            if sum != want {
                tiling = false;
                detail.get_or_insert(format!("placement {pid}: offsets cover {sum} of {want} children"));
            }
        }
        let mut extends = true;
        for k in 1..self.roots.len() {
            let p = &self.placements[self.roots[k]];
            let first = p.plans.first().and_then(|pl| pl.groups.first());
            let ok = p.plans.first().map(|pl| pl.item == self.branch[k] && pl.instances.is_one()).unwrap_or(false)
                && first.map(|g| g.child == self.roots[k - 1] && g.count.is_one()).unwrap_or(false);
            if !ok {
                extends = false;
                detail.get_or_insert(format!("A_{} is not pinned inside A_{k}", k - 1));
            }
        }
        let top = self.placements[self.root()].level;
        let top_plateau_ok = {
            let kids = merge(&ctx.children(self.branch[self.depth + 1]));
            merge(&self.plateaus[self.depth]).iter().all(|(i, m)| kids.iter().any(|(j, n)| i == j && m <= n))
        };
        if !top_plateau_ok {
            partition = false;
            detail.get_or_insert("top plateau is not inside pred of the branch point".into());
        }
        let counts = self.image_counts();
        let root_counts = &counts[self.root()];
        let surjective = (0..=top).all(|j| root_counts[j] == &self.target_base[top] / &self.target_base[j]);
        let immersion = partition && tiling && levels && extends;
        ImmersionVerdict {
            groups_partition_children: partition,
            offsets_biject: tiling,
            levels_consistent: levels,
            extends_previous: extends,
            image_counts: root_counts.iter().map(|c| c.to_string()).collect(),
            surjective_by_counts: surjective,
            immersion,
            detail,
        }
    }

    /// Number of distinct target nodes hit per level, for every placement.
    pub fn image_counts(&self) -> Vec<Vec<BigUint>> {
        let mut out: Vec<Vec<BigUint>> = Vec::with_capacity(self.placements.len());
        for p in &self.placements {
            let mut c = vec![BigUint::zero(); p.level + 1];
            c[p.level] = BigUint::one();
            for plan in &p.plans {
                let mut per = vec![BigUint::zero(); p.level];
                for g in &plan.groups {
                    for (j, v) in out[g.child].iter().enumerate() {
                        per[j] += v * &g.count;
                    }
                }
                for (j, v) in per.into_iter().enumerate() {
                    c[j] += v * &plan.instances;
                }
            }
            out.push(c);
        }
        out
    }

    /// Images of the explicit source nodes in ↓A_K, as (node, target level, index) with the target
    /// numbered homogeneously (child = parent·deg + offset) and b_K = index 0.
    pub fn explicit_images(&self) -> Vec<(NodeRef, usize, BigUint)> {
        let mut out = Vec::new();
        let mut stack: Vec<(PlacementId, BigUint)> = vec![(self.root(), BigUint::zero())];
        while let Some((pid, w)) = stack.pop() {
            let p = &self.placements[pid];
            let mut offset = BigUint::zero();
            for plan in &p.plans {
                let explicit = matches!(plan.item, Item::Node(_));
                if let Item::Node(x) = plan.item {
                    out.push((x, p.level, w.clone()));
                }
                if !explicit {
                    offset += &plan.quota * &plan.instances;
                    continue;
                }
                for g in &plan.groups {
                    if g.members.iter().any(|(i, _)| matches!(i, Item::Node(_))) {
                        let step = &self.target_step[p.level];
                        for j in 0..g.count.to_u64().expect("explicit groups are single") {
                            stack.push((g.child, &w * step + &offset + j));
                        }
                    }
                    offset += &g.count;
                }
            }
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    /// Materialized cross-check for fully explicit sources: builds {a_{K+1}} ∪ ↓A_K and the target
    /// cone ↓b_K under one extra top node, then runs the general classifier.
    pub fn explicit_classification(&self, t: &Tower) -> Result<(MapFlags, bool)> {
        if t.is_counted() {
            return precondition("explicit classification needs a fully explicit source");
        }
        let k = self.depth;
        let images = self.explicit_images();
        let mut per_level: Vec<Vec<NodeRef>> = vec![Vec::new(); k + 2];
        for (x, _, _) in &images {
            per_level[x.level].push(*x);
        }
        let anchor = match self.branch[k + 1] {
            Item::Node(x) => x,
            Item::Shape(_) => return precondition("branch point must be explicit"),
        };
        per_level[k + 1] = vec![anchor];
        let index: HashMap<NodeRef, usize> =
            per_level.iter().flat_map(|v| v.iter().enumerate().map(|(i, x)| (*x, i))).collect();
        let parents: Vec<Vec<Option<usize>>> = per_level
            .iter()
            .enumerate()
            .map(|(l, v)| v.iter().map(|x| if l == k + 1 { None } else { Some(index[&t.parent(*x).unwrap()]) }).collect())
            .collect();
        let source = Tower::from_parents(Tower::integer_labels(k + 2), parents)?;
        let mut degrees: Vec<BigUint> = (1..=k).map(|l| self.target_step[l].clone()).collect();
        degrees.push(BigUint::one());
        let target = Tower::homogeneous(Tower::integer_labels(k + 2), &degrees, usize::MAX)?;
        let mut node_map: Vec<Vec<NodeRef>> = per_level.iter().map(|v| vec![NodeRef::new(0, 0); v.len()]).collect();
        for (x, lvl, idx) in &images {
            node_map[x.level][index[x]] = NodeRef::new(*lvl, idx.to_usize().expect("materialized"));
        }
        node_map[k + 1][0] = NodeRef::new(k + 1, 0);
        let phi = TowerMap { level_map: (0..k + 2).collect(), node_map };
        let flags = classify_map(&source, &target, &phi)?;
        let hit: std::collections::HashSet<NodeRef> = phi.node_map.iter().flatten().copied().collect();
        let onto = hit.len() == target.explicit_nodes().count();
        Ok((flags, onto))
    }

    /// Summary file: explicit node images plus counted placement statistics and the audit.
    pub fn to_json(&self, t: &Tower) -> String {
        let images: Vec<(String, String)> = self
            .explicit_images()
            .into_iter()
            .map(|(x, l, i)| (t.node(x).name.clone(), format!("{l}:{i}")))
            .collect();
        let file = serde_json::json!({
            "depth": self.depth,
            "node_map": images,
            "placements": self.placements.len(),
            "image_counts": self.image_counts()[self.root()].iter().map(|c| c.to_string()).collect::<Vec<_>>(),
            "hypotheses": self.hypotheses,
            "audit": self.audit,
        });
        serde_json::to_string_pretty(&file).expect("serializable")
    }
}

struct ChildLister<'a> {
    t: &'a Tower,
}

impl ChildLister<'_> {
    fn children(&self, item: Item) -> Vec<(Item, BigUint)> {
        match item {
            Item::Node(x) if x.level == self.t.base() => self
                .t
                .bundle(x.index)
                .map(|b| b.iter().map(|(s, m)| (Item::Shape(*s), m.clone())).collect())
                .unwrap_or_default(),
            Item::Node(x) => self.t.children(x).map(|c| (Item::Node(c), BigUint::one())).collect(),
            Item::Shape(s) => self.t.shapes().get(s).children.iter().map(|(c, m)| (Item::Shape(*c), m.clone())).collect(),
        }
    }
}

/// Admissible immersion of a plateau of explicit nodes on `level` of T onto a node of H.
pub fn admissible_immersion(t: &Tower, h: &Tower, plateau: &[NodeRef]) -> Result<(Vec<Placement>, PlacementId, AuditLog)> {
    let level = plateau.first().map(|x| x.level).ok_or_else(|| Error::Invalid("empty plateau".into()))?;
    if plateau.iter().any(|x| x.level != level) {
        return Err(Error::Invalid("plateau points must share a level".into()));
    }
    if level < t.top() {
        let p = t.parent(plateau[0]);
        if plateau.iter().any(|x| t.parent(*x) != p) {
            return Err(Error::Invalid("plateau points must share a parent".into()));
        }
    }
    let mut b = Builder::new(t, h)?;
    let items = plateau.iter().map(|x| (Item::Node(*x), BigUint::one())).collect();
    let root = b.place(items, level)?;
    Ok((b.placements, root, b.audit))
}
