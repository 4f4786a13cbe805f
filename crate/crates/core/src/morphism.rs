//! Tower maps: classification, boundary relations, embedding construction and immersion extraction.

use std::collections::HashMap;
use std::sync::Arc;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, precondition, Error, Result};
use crate::metric::FiniteMetricSpace;
use crate::multimap::{uniformity_certificate, MultiMap, UniformityCertificate};
use crate::rational::{Extended, Rational};
use crate::tower::{NodeRef, ScalingFunction, Tower};

/// A map between the explicit parts of two towers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TowerMap {
    /// Source level index → target level index.
    pub level_map: Vec<usize>,
    /// `node_map[l][i]` = image of explicit source node (l, i); empty on counted source levels.
    pub node_map: Vec<Vec<NodeRef>>,
}

impl TowerMap {
    pub fn image(&self, x: NodeRef) -> NodeRef {
        self.node_map[x.level][x.index]
    }

    pub fn identity(t: &Tower) -> Self {
        let level_map = (0..t.level_count()).collect();
        let node_map = (0..t.level_count())
            .map(|l| if l < t.base() { Vec::new() } else { (0..t.nodes(l).len()).map(|i| NodeRef::new(l, i)).collect() })
            .collect();
        Self { level_map, node_map }
    }

    fn check_total(&self, s: &Tower, t: &Tower) -> Result<()> {
        if self.level_map.len() != s.level_count() || self.node_map.len() != s.level_count() {
            return invalid("tower map needs one entry per source level");
        }
        for l in s.base()..s.level_count() {
            if self.node_map[l].len() != s.nodes(l).len() {
                return invalid(format!("node map is not total on source level {l}"));
            }
            for y in &self.node_map[l] {
                if y.level >= t.level_count() || y.level < t.base() || y.index >= t.nodes(y.level).len() {
                    return invalid("node map points outside the explicit target nodes");
                }
            }
        }
        if self.level_map.iter().any(|&l| l >= t.level_count()) {
            return invalid("level map points outside the target levels");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapFlags {
    pub monotone: bool,
    pub level_preserving: bool,
    pub embedding: bool,
    pub immersion: bool,
    pub isomorphism: bool,
    /// Whether counted levels were present (flags then describe the explicit part).
    pub explicit_only: bool,
}

/// Exact evaluation of the morphism predicates on the explicit nodes.
pub fn classify_map(s: &Tower, t: &Tower, phi: &TowerMap) -> Result<MapFlags> {
    phi.check_total(s, t)?;
    let lm = &phi.level_map;
    let level_injective_monotone = lm.windows(2).all(|w| w[0] < w[1]);
    let commutes = s.explicit_nodes().all(|x| phi.image(x).level == lm[x.level]);
    let level_preserving = level_injective_monotone && commutes;
    let monotone = s.explicit_nodes().all(|x| match s.parent(x) {
        None => true,
        Some(p) => {
            let (a, b) = (phi.image(x), phi.image(p));
            a != b && t.is_below(a, b)
        }
    });
    let mut preimages: HashMap<NodeRef, Vec<NodeRef>> = HashMap::new();
    for x in s.explicit_nodes() {
        preimages.entry(phi.image(x)).or_default().push(x);
    }
    let injective = preimages.values().all(|v| v.len() == 1);
    let almost_injective = preimages.values().all(|v| {
        v.iter().all(|&x| {
            v.iter().all(|&y| {
                let m = s.meet(x, y);
                m.level <= x.level.max(y.level) + 1
            })
        })
    });
    let embedding = monotone && level_preserving && injective;
    let immersion = monotone && level_preserving && almost_injective;
    let all_levels = {
        let mut v = lm.clone();
        v.dedup();
        v.len() == t.level_count()
    };
    let onto = preimages.len() == t.explicit_nodes().count();
    let isomorphism = embedding && all_levels && onto && s.base() == t.base();
    Ok(MapFlags {
        monotone,
        level_preserving,
        embedding,
        immersion,
        isomorphism,
        explicit_only: s.is_counted() || t.is_counted(),
    })
}

/// For every explicit node, the branch ends (minimal nodes) below it, as boundary point indices.
fn branches_below(t: &Tower, minimal: &[NodeRef]) -> HashMap<NodeRef, Vec<usize>> {
    let mut out: HashMap<NodeRef, Vec<usize>> = HashMap::new();
    for (k, &m) in minimal.iter().enumerate() {
        let mut y = Some(m);
        while let Some(z) = y {
            out.entry(z).or_default().push(k);
            y = t.parent(z);
        }
    }
    out
}

/// ∂φ: each source branch relates to every target branch containing the image of the branch.
pub fn boundary_map(s: &Tower, t: &Tower, phi: &TowerMap, fs: &ScalingFunction, ft: &ScalingFunction) -> Result<MultiMap> {
    phi.check_total(s, t)?;
    if s.is_counted() || t.is_counted() {
        return precondition("boundary map needs explicit lowest levels on both towers");
    }
    let (bs, ms) = s.boundary(fs)?;
    let (bt, mt) = t.boundary(ft)?;
    let below = branches_below(t, &mt);
    let mut images = Vec::with_capacity(ms.len());
    for &m in &ms {
        let chain: Vec<NodeRef> = std::iter::successors(Some(m), |&z| s.parent(z)).map(|z| phi.image(z)).collect();
        let lowest = *chain.iter().min_by_key(|z| z.level).unwrap();
        let candidates = below.get(&lowest).cloned().unwrap_or_default();
        let img: Vec<usize> = candidates
            .into_iter()
            .filter(|&k| chain.iter().all(|&c| t.is_below(mt[k], c)))
            .collect();
        images.push(img);
    }
    MultiMap::new(
        Arc::new(bs),
        Arc::new(bt),
        images.into_iter().enumerate().flat_map(|(x, ys)| ys.into_iter().map(move |y| (x, y))),
    )
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryReport {
    pub flags: MapFlags,
    pub certificate: UniformityCertificate,
    /// (∂φ)⁻¹(∂T) = ∂S.
    pub total: bool,
    /// For immersions: ω_{(∂φ)⁻¹}(g(φ(ν))) ≤ f(ν+1) on every non-top level ν.
    pub inverse_bound_holds: Option<bool>,
    pub down_cofinal_image: bool,
    /// ↓-cofinal image ⇒ ∂φ surjective.
    pub cofinal_implies_surjective: bool,
}

/// Oscillation certificates of ∂φ and its inverse, cross-checked against the immersion bounds.
pub fn check_boundary_properties(
    s: &Tower,
    t: &Tower,
    phi: &TowerMap,
    fs: &ScalingFunction,
    ft: &ScalingFunction,
) -> Result<BoundaryReport> {
    let flags = classify_map(s, t, phi)?;
    let rel = boundary_map(s, t, phi, fs, ft)?;
    let mut grid: Vec<Rational> = fs.values.iter().chain(&ft.values).cloned().collect();
    grid.sort();
    grid.dedup();
    let certificate = uniformity_certificate(&rel, &grid)?;
    let inverse_bound_holds = if flags.immersion {
        let inv = rel.invert().oscillation_profile();
        Some((0..s.top()).all(|nu| inv.at(&ft.values[phi.level_map[nu]]).le_rational(&fs.values[nu + 1])))
    } else {
        None
    };
    let image: std::collections::HashSet<NodeRef> = s.explicit_nodes().map(|x| phi.image(x)).collect();
    let down_cofinal_image = t.minimal_nodes().iter().all(|&m| {
        std::iter::successors(Some(m), |&z| t.parent(z)).any(|z| image.contains(&z))
            && image.iter().any(|&y| t.is_below(y, m))
    });
    let cofinal_implies_surjective = !down_cofinal_image || rel.is_surjective();
    Ok(BoundaryReport {
        flags,
        total: rel.is_total(),
        certificate,
        inverse_bound_holds,
        down_cofinal_image,
        cofinal_implies_surjective,
    })
}

/// Descendants of y on `level` in identifier order.
fn descendants_on(t: &Tower, y: NodeRef, level: usize) -> Vec<NodeRef> {
    let mut frontier = vec![y];
    while frontier[0].level > level {
        let mut next = Vec::new();
        for z in &frontier {
            next.extend(t.children(*z));
        }
        if next.is_empty() {
            return next;
        }
        frontier = next;
    }
    frontier.sort();
    frontier
}

/// f-embedding (or f-isomorphism) S → T built top-down with injections in identifier order.
pub fn build_embedding(s: &Tower, t: &Tower, level_map: &[usize], isomorphism: bool) -> Result<TowerMap> {
    if s.is_counted() || t.is_counted() {
        return precondition("embedding construction needs explicit towers; materialize first");
    }
    if level_map.len() != s.level_count() || level_map.iter().any(|&l| l >= t.level_count()) {
        return invalid("level map needs one target level per source level");
    }
    if level_map.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("level map must be injective and monotone");
    }
    if isomorphism && (level_map.len() != t.level_count()) {
        return precondition("isomorphism mode needs a surjective level map");
    }
    let ps = s.degree_profile();
    let pt = t.degree_profile();
    for l in 0..s.top() {
        let (fl, fl1) = (level_map[l], level_map[l + 1]);
        let big = ps.big_deg(l, l + 1);
        let small = pt.deg(fl, fl1);
        if big > small {
            return precondition(format!(
                "degree condition fails at level {l}: Deg(S) = {big} > deg(T) = {small} on target levels {fl}..{fl1}"
            ));
        }
        if isomorphism {
            let (lo, hi) = (ps.deg(l, l + 1), pt.big_deg(fl, fl1));
            if lo < hi {
                return precondition(format!("isomorphism condition fails at level {l}: deg(S) = {lo} < Deg(T) = {hi}"));
            }
        }
    }
    let mut node_map: Vec<Vec<NodeRef>> = (0..s.level_count()).map(|l| vec![NodeRef::new(0, 0); s.nodes(l).len()]).collect();
    let top_s = NodeRef::new(s.top(), 0);
    let anchor = descendants_on(t, NodeRef::new(t.top(), 0), level_map[s.top()]);
    if anchor.is_empty() {
        return precondition("target has no node on the image of the source top level");
    }
    node_map[top_s.level][0] = anchor[0];
    for l in (0..s.top()).rev() {
        for i in 0..s.nodes(l + 1).len() {
            let x = NodeRef::new(l + 1, i);
            let y = node_map[x.level][x.index];
            let targets = descendants_on(t, y, level_map[l]);
            let kids: Vec<NodeRef> = s.children(x).collect();
            if kids.len() > targets.len() {
                return Err(Error::Construction(format!("no injection below {:?}", s.node(x).name)));
            }
            for (c, z) in kids.into_iter().zip(targets) {
                node_map[l][c.index] = z;
            }
        }
    }
    Ok(TowerMap { level_map: level_map.to_vec(), node_map })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum IsoDecision {
    Isomorphic(TowerMap),
    /// First step (bottom-aligned) whose degrees differ, with both values; None when lengths differ.
    Mismatch { step: usize, source: Option<BigUint>, target: Option<BigUint> },
}

/// Decides whether two homogeneous towers are isomorphic with bottom-aligned levels.
pub fn decide_homogeneous_iso(s: &Tower, t: &Tower) -> Result<IsoDecision> {
    let (ds, dt) = (s.step_degrees()?, t.step_degrees()?);
    for k in 0..ds.len().max(dt.len()) {
        if ds.get(k) != dt.get(k) {
            return Ok(IsoDecision::Mismatch { step: k, source: ds.get(k).cloned(), target: dt.get(k).cloned() });
        }
    }
    let ident: Vec<usize> = (0..s.level_count()).collect();
    Ok(IsoDecision::Isomorphic(build_embedding(s, t, &ident, true)?))
}

/// Level windows and the immersion extracted from a boundary relation.
#[derive(Clone, Debug)]
pub struct Extraction {
    pub source_levels: Vec<usize>,
    pub target_levels: Vec<usize>,
    pub source_window: Tower,
    pub target_window: Tower,
    pub map: TowerMap,
}

/// Greedy level sequences with g(β_n) ≥ ω_Φ(f(α_n)) and f(α_{n+1}) ≥ ω_{Φ⁻¹}(g(β_n)), then the induced immersion.
pub fn extract_immersion(
    s: &Tower,
    t: &Tower,
    phi: &MultiMap,
    fs: &ScalingFunction,
    ft: &ScalingFunction,
    length: usize,
) -> Result<Extraction> {
    if s.is_counted() || t.is_counted() {
        return precondition("extraction needs explicit boundaries");
    }
    if !s.is_pruned() || !t.is_pruned() {
        return precondition("extraction needs pruned towers");
    }
    if length == 0 {
        return invalid("requested window length must be positive");
    }
    let (bs, ms) = s.boundary(fs)?;
    let (bt, mt) = t.boundary(ft)?;
    if *phi.source().as_ref() != bs || *phi.target().as_ref() != bt {
        return invalid("relation must run between the two tower boundaries");
    }
    if !phi.is_total() {
        return precondition("extraction needs a total relation");
    }
    let fwd = phi.oscillation_profile();
    let inv = phi.invert().oscillation_profile();
    let first_level = |scaling: &ScalingFunction, from: usize, bound: &Extended| -> Option<usize> {
        (from..scaling.values.len()).find(|&l| bound.le_rational(&scaling.values[l]))
    };
    let (mut alphas, mut betas) = (vec![0usize], Vec::new());
    loop {
        let a = *alphas.last().unwrap();
        let from_b = betas.last().map(|b| b + 1).unwrap_or(0);
        let b = match first_level(ft, from_b, &fwd.at(&fs.values[a])) {
            Some(b) => b,
            None => break,
        };
        if b == t.top() && a != s.top() {
            break;
        }
        betas.push(b);
        if a == s.top() || alphas.len() == length {
            break;
        }
        match first_level(fs, a + 1, &inv.at(&ft.values[b])) {
            Some(a2) => alphas.push(a2),
            None => break,
        }
    }
    alphas.truncate(betas.len());
    if alphas.last() != Some(&s.top()) {
        alphas.push(s.top());
        betas.push(t.top());
    }
    if alphas.len() < length {
        return precondition(format!("window exhausted: only {} admissible level pairs, {} requested", alphas.len(), length));
    }
    let sw = s.level_subtower(&alphas)?;
    let tw = t.level_subtower(&betas)?;
    let below_s = branches_below(s, &ms);
    let mut node_map = Vec::with_capacity(alphas.len());
    for (k, (&a, &b)) in alphas.iter().zip(&betas).enumerate() {
        let mut row = Vec::with_capacity(s.nodes(a).len());
        for i in 0..s.nodes(a).len() {
            let branches = &below_s[&NodeRef::new(a, i)];
            let mut meet: Option<NodeRef> = None;
            for &p in branches {
                for &q in phi.image(p) {
                    meet = Some(match meet {
                        None => mt[q],
                        Some(m) => t.meet(m, mt[q]),
                    });
                }
            }
            let m = meet.expect("total relation");
            if m.level > b {
                return Err(Error::Construction(format!(
                    "image of the cone below {:?} is not inside a single node of level {b}",
                    s.node(NodeRef::new(a, i)).name
                )));
            }
            row.push(NodeRef::new(k, t.ancestor(m, b).index));
        }
        node_map.push(row);
    }
    let map = TowerMap { level_map: (0..alphas.len()).collect(), node_map };
    Ok(Extraction { source_levels: alphas, target_levels: betas, source_window: sw, target_window: tw, map })
}

impl Extraction {
    /// Checks ∂φ = (∂id_T)⁻¹∘Φ∘∂id_S as relations between the window boundaries' branch ends.
    pub fn round_trip_holds(&self, s: &Tower, t: &Tower, phi: &MultiMap, fs: &ScalingFunction, ft: &ScalingFunction) -> Result<bool> {
        let (_, ms) = s.boundary(fs)?;
        let (_, mt) = t.boundary(ft)?;
        let (a0, b0) = (self.source_levels[0], self.target_levels[0]);
        let below_s = branches_below(s, &ms);
        for i in 0..s.nodes(a0).len() {
            let mut composite: Vec<usize> = below_s[&NodeRef::new(a0, i)]
                .iter()
                .flat_map(|&p| phi.image(p).iter().map(|&q| t.ancestor(mt[q], b0).index))
                .collect();
            composite.sort();
            composite.dedup();
            if composite != vec![self.map.node_map[0][i].index] {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// On-disk tower map format.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TowerMapFile {
    pub source: String,
    pub target: String,
    pub level_map: Vec<(serde_json::Value, serde_json::Value)>,
    pub node_map: Vec<(String, String)>,
}

impl TowerMapFile {
    pub fn from_map(s: &Tower, t: &Tower, phi: &TowerMap, source: &str, target: &str) -> Self {
        let level_map = phi
            .level_map
            .iter()
            .enumerate()
            .map(|(a, &b)| {
                (serde_json::Value::String(s.labels()[a].to_string()), serde_json::Value::String(t.labels()[b].to_string()))
            })
            .collect();
        let node_map = s.explicit_nodes().map(|x| (s.node(x).name.clone(), t.node(phi.image(x)).name.clone())).collect();
        Self { source: source.into(), target: target.into(), level_map, node_map }
    }

    pub fn into_map(self, s: &Tower, t: &Tower) -> Result<TowerMap> {
        let mut level_map = vec![usize::MAX; s.level_count()];
        for (a, b) in &self.level_map {
            let (a, b) = (crate::rational::value_to_rational(a)?, crate::rational::value_to_rational(b)?);
            let i = s.labels().iter().position(|l| *l == a).ok_or_else(|| Error::Invalid(format!("unknown source level {a}")))?;
            let j = t.labels().iter().position(|l| *l == b).ok_or_else(|| Error::Invalid(format!("unknown target level {b}")))?;
            level_map[i] = j;
        }
        if level_map.contains(&usize::MAX) {
            return invalid("level map is not total");
        }
        let (si, ti) = (s.name_index(), t.name_index());
        let mut node_map: Vec<Vec<Option<NodeRef>>> = (0..s.level_count()).map(|l| vec![None; s.nodes(l).len()]).collect();
        for (a, b) in &self.node_map {
            let x = si.get(a).ok_or_else(|| Error::Invalid(format!("unknown source node {a:?}")))?;
            let y = ti.get(b).ok_or_else(|| Error::Invalid(format!("unknown target node {b:?}")))?;
            node_map[x.level][x.index] = Some(*y);
        }
        let node_map = node_map
            .into_iter()
            .map(|row| row.into_iter().collect::<Option<Vec<_>>>())
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Invalid("node map is not total on explicit source nodes".into()))?;
        Ok(TowerMap { level_map, node_map })
    }
}

pub fn tower_map_to_json(s: &Tower, t: &Tower, phi: &TowerMap, source: &str, target: &str) -> String {
    serde_json::to_string_pretty(&TowerMapFile::from_map(s, t, phi, source, target)).expect("serializable")
}

pub fn tower_map_from_json(text: &str, s: &Tower, t: &Tower) -> Result<TowerMap> {
    let file: TowerMapFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    file.into_map(s, t)
}

/// Boundary space of a tower paired with its branch ends, for callers that need both.
pub fn boundary_with_points(t: &Tower, f: &ScalingFunction) -> Result<(Arc<FiniteMetricSpace>, Vec<NodeRef>)> {
    let (b, p) = t.boundary(f)?;
    Ok((Arc::new(b), p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;
    use crate::tower::{binary_tower, example_tower, ShapeArena};

    fn single_branch(depth: usize) -> Tower {
        let parents = (0..=depth).map(|l| if l == depth { vec![None] } else { vec![Some(0)] }).collect();
        Tower::from_parents(Tower::integer_labels(depth + 1), parents).unwrap()
    }

    fn collapse(s: &Tower) -> TowerMap {
        TowerMap {
            level_map: (0..s.level_count()).collect(),
            node_map: (0..s.level_count()).map(|l| vec![NodeRef::new(l, 0); s.nodes(l).len()]).collect(),
        }
    }

    #[test]
    fn identity_is_isomorphism() {
        let t = binary_tower(3);
        let f = classify_map(&t, &t, &TowerMap::identity(&t)).unwrap();
        assert!(f.isomorphism && f.embedding && f.immersion);
    }

    #[test]
    fn collapse_is_not_immersion() {
        let s = binary_tower(3);
        let t = single_branch(3);
        let f = classify_map(&s, &t, &collapse(&s)).unwrap();
        assert!(f.monotone && f.level_preserving);
        assert!(!f.immersion && !f.embedding);
    }

    #[test]
    fn sibling_merge_is_immersion() {
        let s = binary_tower(1);
        let t = single_branch(1);
        let f = classify_map(&s, &t, &collapse(&s)).unwrap();
        assert!(f.immersion && !f.embedding);
        let fs = ScalingFunction::dyadic(2);
        let rel = boundary_map(&s, &t, &collapse(&s), &fs, &fs).unwrap();
        assert!(rel.is_single_valued() && rel.is_surjective());
        let rep = check_boundary_properties(&s, &t, &collapse(&s), &fs, &fs).unwrap();
        assert_eq!(rep.inverse_bound_holds, Some(true));
        assert!(rep.down_cofinal_image && rep.cofinal_implies_surjective);
    }

    #[test]
    fn boundary_map_into_taller_tower_is_multivalued() {
        let s = single_branch(1);
        let t = binary_tower(2);
        let phi = TowerMap { level_map: vec![1, 2], node_map: vec![vec![NodeRef::new(1, 0)], vec![NodeRef::new(2, 0)]] };
        let f = classify_map(&s, &t, &phi).unwrap();
        assert!(f.embedding);
        let rel = boundary_map(&s, &t, &phi, &ScalingFunction::dyadic(2), &ScalingFunction::dyadic(3)).unwrap();
        assert_eq!(rel.image(0), &[0, 1]);
    }

    #[test]
    fn embeddings() {
        let s = binary_tower(2);
        let t = Tower::homogeneous(Tower::integer_labels(3), &[BigUint::from(4u32), BigUint::from(4u32)], 1000).unwrap();
        let phi = build_embedding(&s, &t, &[0, 1, 2], false).unwrap();
        let f = classify_map(&s, &t, &phi).unwrap();
        assert!(f.embedding && !f.isomorphism);
        let b = binary_tower(3);
        let iso = build_embedding(&b, &b, &[0, 1, 2, 3], true).unwrap();
        assert!(classify_map(&b, &b, &iso).unwrap().isomorphism);
        let three = Tower::homogeneous(Tower::integer_labels(2), &[BigUint::from(3u32)], 10).unwrap();
        let two = binary_tower(1);
        assert!(build_embedding(&three, &two, &[0, 1], false).is_err());
    }

    #[test]
    fn homogeneous_iso_decisions() {
        use crate::tower::{group_chain_tower, GroupChain};
        let a = group_chain_tower(&GroupChain::from_u64(&[1, 2, 6]).unwrap(), 100).unwrap();
        let b = group_chain_tower(&GroupChain::from_u64(&[1, 3, 6]).unwrap(), 100).unwrap();
        match decide_homogeneous_iso(&a, &a).unwrap() {
            IsoDecision::Isomorphic(m) => assert!(classify_map(&a, &a, &m).unwrap().isomorphism),
            other => panic!("{other:?}"),
        }
        assert!(matches!(decide_homogeneous_iso(&a, &b).unwrap(), IsoDecision::Mismatch { step: 0, .. }));
        let t = binary_tower(4);
        let sub = t.level_subtower(&[0, 2, 4]).unwrap();
        assert!(matches!(decide_homogeneous_iso(&t, &sub).unwrap(), IsoDecision::Mismatch { .. }));
        assert!(decide_homogeneous_iso(&example_tower(), &t).is_err());
    }

    #[test]
    fn extraction_from_identity() {
        let t = binary_tower(4);
        let f = ScalingFunction::dyadic(5);
        let (b, _) = t.boundary(&f).unwrap();
        let id = MultiMap::identity(Arc::new(b));
        let ex = extract_immersion(&t, &t, &id, &f, &f, 3).unwrap();
        let fl = classify_map(&ex.source_window, &ex.target_window, &ex.map).unwrap();
        assert!(fl.immersion);
        assert!(ex.round_trip_holds(&t, &t, &id, &f, &f).unwrap());
        assert!(extract_immersion(&t, &t, &id, &f, &f, 9).is_err());
    }

    #[test]
    fn map_file_round_trip() {
        let s = binary_tower(2);
        let t = Tower::homogeneous(Tower::integer_labels(3), &[BigUint::from(3u32), BigUint::from(3u32)], 1000).unwrap();
        let phi = build_embedding(&s, &t, &[0, 1, 2], false).unwrap();
        let text = tower_map_to_json(&s, &t, &phi, "s.json", "t.json");
        assert_eq!(tower_map_from_json(&text, &s, &t).unwrap(), phi);
        let _ = (int(0), ShapeArena::default());
    }
}
