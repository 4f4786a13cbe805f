//! Finite relations between metric spaces, oscillation moduli and uniformity certificates.

use std::collections::BTreeSet;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, precondition, Error, Result};
use crate::metric::{self, components, FiniteMetricSpace, SpaceFile};
use crate::rational::{self, Extended, Rational};

/// A relation Φ ⊆ X × Y, stored as sorted image lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiMap {
    source: Arc<FiniteMetricSpace>,
    target: Arc<FiniteMetricSpace>,
    images: Vec<Vec<usize>>,
}

impl MultiMap {
    pub fn new(
        source: Arc<FiniteMetricSpace>,
        target: Arc<FiniteMetricSpace>,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut images = vec![BTreeSet::new(); source.len()];
        for (x, y) in pairs {
            if x >= source.len() || y >= target.len() {
                return invalid(format!("pair ({x},{y}) outside source × target"));
            }
            images[x].insert(y);
        }
        let images = images.into_iter().map(|s| s.into_iter().collect()).collect();
        Ok(Self { source, target, images })
    }

    pub fn from_function(source: Arc<FiniteMetricSpace>, target: Arc<FiniteMetricSpace>, f: &[usize]) -> Result<Self> {
        if f.len() != source.len() {
            return invalid("function table length differs from the source size");
        }
        Self::new(source, target, f.iter().enumerate().map(|(x, &y)| (x, y)))
    }

    pub fn identity(space: Arc<FiniteMetricSpace>) -> Self {
        let n = space.len();
        Self { source: space.clone(), target: space, images: (0..n).map(|i| vec![i]).collect() }
    }

    pub fn full(source: Arc<FiniteMetricSpace>, target: Arc<FiniteMetricSpace>) -> Self {
        let all: Vec<usize> = (0..target.len()).collect();
        Self { images: vec![all; source.len()], source, target }
    }

    pub fn source(&self) -> &Arc<FiniteMetricSpace> {
        &self.source
    }

    pub fn target(&self) -> &Arc<FiniteMetricSpace> {
        &self.target
    }

    pub fn image(&self, x: usize) -> &[usize] {
        &self.images[x]
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.images.iter().enumerate().flat_map(|(x, ys)| ys.iter().map(move |&y| (x, y)))
    }

    pub fn pair_count(&self) -> usize {
        self.images.iter().map(Vec::len).sum()
    }

    /// Every source point has an image.
    pub fn is_total(&self) -> bool {
        self.images.iter().all(|ys| !ys.is_empty())
    }

    /// Every target point is hit.
    pub fn is_surjective(&self) -> bool {
        let mut hit = vec![false; self.target.len()];
        for ys in &self.images {
            for &y in ys {
                hit[y] = true;
            }
        }
        hit.into_iter().all(|h| h)
    }

    pub fn is_single_valued(&self) -> bool {
        self.images.iter().all(|ys| ys.len() <= 1)
    }

    pub fn invert(&self) -> Self {
        let mut images = vec![Vec::new(); self.target.len()];
        for (x, y) in self.pairs() {
            images[y].push(x);
        }
        Self { source: self.target.clone(), target: self.source.clone(), images }
    }

    /// Ψ∘Φ where Φ = self.
    pub fn compose(&self, psi: &MultiMap) -> Result<Self> {
        if *self.target != *psi.source {
            return invalid("composition needs target of the first relation = source of the second");
        }
        let images = self
            .images
            .iter()
            .map(|ys| {
                let mut out = BTreeSet::new();
                for &y in ys {
                    out.extend(psi.images[y].iter().copied());
                }
                out.into_iter().collect()
            })
            .collect();
        Ok(Self { source: self.source.clone(), target: psi.target.clone(), images })
    }

    /// Restriction of the relation to a subset of source points and target points.
    pub fn restrict(
        &self,
        source_points: &[usize],
        target_points: &[usize],
        source: Arc<FiniteMetricSpace>,
        target: Arc<FiniteMetricSpace>,
    ) -> Result<Self> {
        let mut position = vec![usize::MAX; self.target.len()];
        for (i, &y) in target_points.iter().enumerate() {
            position[y] = i;
        }
        let pairs: Vec<(usize, usize)> = source_points
            .iter()
            .enumerate()
            .flat_map(|(i, &x)| {
                self.images[x].iter().filter(|&&y| position[y] != usize::MAX).map(move |&y| (i, y)).collect::<Vec<_>>()
            })
            .map(|(i, y)| (i, position[y]))
            .collect();
        Self::new(source, target, pairs)
    }

    fn image_diameter_rank(&self, x: usize) -> u32 {
        let ys = &self.images[x];
        let mut best = 0;
        for (a, &y) in ys.iter().enumerate() {
            for &z in &ys[a + 1..] {
                best = best.max(self.target.rank(y, z));
            }
        }
        best
    }

    fn union_diameter_rank(&self, x: usize, x2: usize, diam: &[u32]) -> u32 {
        let mut best = diam[x].max(diam[x2]);
        for &y in &self.images[x] {
            for &z in &self.images[x2] {
                best = best.max(self.target.rank(y, z));
            }
        }
        best
    }

    /// Oscillation modulus of the relation (sources with empty image contribute nothing).
    pub fn oscillation_profile(&self) -> OscillationProfile {
        let n = self.source.len();
        let diam: Vec<u32> = (0..n).map(|x| self.image_diameter_rank(x)).collect();
        let ranks = self.source.distance_values().len();
        let mut by_rank = vec![0u32; ranks];
        for x in 0..n {
            by_rank[0] = by_rank[0].max(diam[x]);
            for x2 in x + 1..n {
                let r = self.source.rank(x, x2) as usize;
                let v = self.union_diameter_rank(x, x2, &diam);
                if v > by_rank[r] {
                    by_rank[r] = v;
                }
            }
        }
        let mut running = 0;
        for v in by_rank.iter_mut() {
            running = running.max(*v);
            *v = running;
        }
        OscillationProfile {
            source_values: self.source.distance_values().to_vec(),
            target_values: self.target.distance_values().to_vec(),
            prefix_max: by_rank,
        }
    }

    /// Lexicographically least image identifier for every source point.
    pub fn selection(&self) -> Result<Self> {
        if !self.is_total() {
            return precondition("selection needs a total relation");
        }
        let images = self
            .images
            .iter()
            .map(|ys| vec![*ys.iter().min_by(|a, b| self.target.id(**a).cmp(self.target.id(**b))).unwrap()])
            .collect();
        Ok(Self { source: self.source.clone(), target: self.target.clone(), images })
    }

    /// Function table of a single-valued total relation.
    pub fn as_function(&self) -> Option<Vec<usize>> {
        self.images.iter().map(|ys| if ys.len() == 1 { Some(ys[0]) } else { None }).collect()
    }
}

/// ω_Φ as a step function of δ.
#[derive(Clone, Debug)]
pub struct OscillationProfile {
    source_values: Vec<Rational>,
    target_values: Vec<Rational>,
    prefix_max: Vec<u32>,
}

impl OscillationProfile {
    pub fn at(&self, delta: &Rational) -> Extended {
        match self.source_values.binary_search(delta) {
            Ok(k) => Extended::Finite(self.target_values[self.prefix_max[k] as usize].clone()),
            Err(0) => Extended::zero(),
            Err(k) => Extended::Finite(self.target_values[self.prefix_max[k - 1] as usize].clone()),
        }
    }

    pub fn at_extended(&self, delta: &Extended) -> Extended {
        match delta {
            Extended::Finite(d) => self.at(d),
            Extended::Infinite => self.at(self.source_values.last().unwrap()),
        }
    }
}

/// ω_Φ(δ) for a total relation.
pub fn oscillation(phi: &MultiMap, delta: &Rational) -> Result<Extended> {
    if !phi.is_total() {
        return precondition("oscillation needs a total relation");
    }
    Ok(phi.oscillation_profile().at(delta))
}

/// Oscillation table over a list of samples.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OscillationTable {
    pub samples: Vec<(String, Extended)>,
}

/// Least r with Φ(x) ⊆ B_r(Ψ(x)) and Ψ(x) ⊆ B_r(Φ(x)) for all x.
pub fn multimap_distance(phi: &MultiMap, psi: &MultiMap) -> Result<Extended> {
    if *phi.source != *psi.source || *phi.target != *psi.target {
        return invalid("distance between relations needs common source and target");
    }
    let y = &phi.target;
    let mut worst = 0u32;
    for x in 0..phi.source.len() {
        let (a, b) = (&phi.images[x], &psi.images[x]);
        match (a.is_empty(), b.is_empty()) {
            (true, true) => continue,
            (true, false) | (false, true) => return Ok(Extended::Infinite),
            _ => {}
        }
        for (from, to) in [(a, b), (b, a)] {
            for &p in from {
                let near = to.iter().map(|&q| y.rank(p, q)).min().unwrap();
                worst = worst.max(near);
            }
        }
    }
    Ok(Extended::Finite(y.distance_values()[worst as usize].clone()))
}

/// Outcome of the component image check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentImageVerdict {
    pub pass: bool,
    /// (x, y ∈ Φ(x), z ∈ Φ(C_δ(x)) outside C_ε(y)) when the check fails.
    pub counterexample: Option<(String, String, String)>,
}

/// Verifies Φ(C_δ(x)) ⊆ C_ε(y) for all x and y ∈ Φ(x).
pub fn component_image_check(phi: &MultiMap, delta: &Rational, eps: &Rational) -> Result<ComponentImageVerdict> {
    let omega = oscillation(phi, delta)?;
    if !omega.le_rational(eps) {
        return precondition(format!("ε={eps} is below ω_Φ(δ)={omega}; the lemma's hypothesis fails"));
    }
    let src = components(&phi.source, delta)?;
    let tgt = components(&phi.target, eps)?;
    for block in &src.blocks {
        let mut reached: Vec<usize> = Vec::new();
        for &x in block {
            reached.extend(phi.images[x].iter().copied());
        }
        for &x in block {
            for &y in &phi.images[x] {
                if let Some(&z) = reached.iter().find(|&&z| tgt.block_of[z] != tgt.block_of[y]) {
                    return Ok(ComponentImageVerdict {
                        pass: false,
                        counterexample: Some((
                            phi.source.id(x).to_string(),
                            phi.target.id(y).to_string(),
                            phi.target.id(z).to_string(),
                        )),
                    });
                }
            }
        }
    }
    Ok(ComponentImageVerdict { pass: true, counterexample: None })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapacityMonotonicityVerdict {
    pub pass: bool,
    pub source: (String, String),
    pub target: (String, String),
}

/// Asserts θ_δ^ε(X) ≤ θ_{δ'}^{ε'}(Y) and Θ_δ^ε(X) ≤ Θ_{δ'}^{ε'}(Y).
pub fn capacity_monotonicity_check(
    phi: &MultiMap,
    delta: &Rational,
    eps: &Rational,
    delta2: &Rational,
    eps2: &Rational,
) -> Result<CapacityMonotonicityVerdict> {
    if !phi.is_total() || !phi.is_surjective() {
        return precondition("capacity transport needs a total surjective relation");
    }
    let forward = phi.oscillation_profile().at(eps);
    if !forward.le_rational(eps2) {
        return precondition(format!("ε'={eps2} is below ω_Φ(ε)={forward}"));
    }
    let backward = phi.invert().oscillation_profile().at(delta2);
    if !backward.le_rational(delta) {
        return precondition(format!("δ={delta} is below ω_Φ⁻¹(δ')={backward}"));
    }
    let (t, tt) = metric::capacity(&phi.source, delta, eps)?;
    let (s, ss) = metric::capacity(&phi.target, delta2, eps2)?;
    Ok(CapacityMonotonicityVerdict {
        pass: t <= s && tt <= ss,
        source: (t.to_string(), tt.to_string()),
        target: (s.to_string(), ss.to_string()),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateRow {
    #[serde(with = "crate::rational::serde_rational")]
    pub delta: Rational,
    pub forward: Extended,
    pub inverse: Extended,
}

/// Window-relative uniformity flags of a relation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniformityFlags {
    pub micro: bool,
    pub macro_: bool,
    pub bi: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniformityCertificate {
    pub rows: Vec<CertificateRow>,
    pub forward: UniformityFlags,
    pub inverse: UniformityFlags,
    pub total: bool,
    pub surjective: bool,
    /// Total, surjective, and both directions macro-uniform on the window.
    pub macro_equivalence: bool,
    pub bi_equivalence: bool,
    pub micro_equivalence: bool,
}

fn flags(values: &[Extended], grid: &[Rational]) -> UniformityFlags {
    let micro = grid.iter().all(|e| values.iter().any(|w| w.le_rational(e)));
    let top = grid.last().unwrap();
    let macro_ = values.iter().all(|w| w.le_rational(top));
    UniformityFlags { micro, macro_, bi: micro && macro_ }
}

/// Table of (δ, ω_Φ(δ), ω_Φ⁻¹(δ)) on the grid plus window-relative flags.
pub fn uniformity_certificate(phi: &MultiMap, grid: &[Rational]) -> Result<UniformityCertificate> {
    rational::check_grid(grid)?;
    let fwd = phi.oscillation_profile();
    let inv = phi.invert().oscillation_profile();
    let rows: Vec<CertificateRow> = grid
        .iter()
        .map(|d| CertificateRow { delta: d.clone(), forward: fwd.at(d), inverse: inv.at(d) })
        .collect();
    let fw: Vec<Extended> = rows.iter().map(|r| r.forward.clone()).collect();
    let iv: Vec<Extended> = rows.iter().map(|r| r.inverse.clone()).collect();
    let forward = flags(&fw, grid);
    let inverse = flags(&iv, grid);
    let total = phi.is_total();
    let surjective = phi.is_surjective();
    let both = total && surjective;
    Ok(UniformityCertificate {
        rows,
        forward,
        inverse,
        total,
        surjective,
        macro_equivalence: both && forward.macro_ && inverse.macro_,
        bi_equivalence: both && forward.bi && inverse.bi,
        micro_equivalence: both && forward.micro && inverse.micro,
    })
}

/// Selection bound from a relation with total surjective inverse.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SelectionBound {
    pub f: MultiMap,
    pub g: MultiMap,
    /// max_x diam Φ⁻¹∘Φ(x).
    pub bound_x: Rational,
    /// max_y diam Φ∘Φ⁻¹(y).
    pub bound_y: Rational,
    pub dist_gf: Extended,
    pub dist_fg: Extended,
}

impl SelectionBound {
    pub fn holds(&self) -> bool {
        self.dist_gf.le_rational(&self.bound_x) && self.dist_fg.le_rational(&self.bound_y)
    }
}

fn max_image_diameter(phi: &MultiMap) -> Rational {
    (0..phi.source.len())
        .map(|x| phi.target.subset_diameter(phi.image(x)))
        .max()
        .unwrap_or_else(Rational::zero)
}

/// Selections f ∈ Φ, g ∈ Φ⁻¹ with dist(g∘f, id) ≤ max diam Φ⁻¹∘Φ(x) (and symmetrically).
pub fn selection_bound(phi: &MultiMap) -> Result<SelectionBound> {
    if !phi.is_total() || !phi.is_surjective() {
        return precondition("selection bound needs a total surjective relation");
    }
    let inv = phi.invert();
    let f = phi.selection()?;
    let g = inv.selection()?;
    let gf = f.compose(&g)?;
    let fg = g.compose(&f)?;
    let id_x = MultiMap::identity(phi.source.clone());
    let id_y = MultiMap::identity(phi.target.clone());
    Ok(SelectionBound {
        bound_x: max_image_diameter(&phi.compose(&inv)?),
        bound_y: max_image_diameter(&inv.compose(phi)?),
        dist_gf: multimap_distance(&gf, &id_x)?,
        dist_fg: multimap_distance(&fg, &id_y)?,
        f,
        g,
    })
}

/// Large subspaces X' ⊆ X, Y' ⊆ Y with a bijection h: X' → Y' built from a coarse equivalence f, g.
#[derive(Clone, Debug)]
pub struct NetConstruction {
    /// S = 1 + ω_f(1).
    pub separation: Rational,
    pub net_y: Vec<usize>,
    pub net_x: Vec<usize>,
    pub h: MultiMap,
    /// Largeness radius of Y' inside f(X); below S by maximality.
    pub radius_image: Rational,
    pub radius_y: Rational,
    pub radius_x: Rational,
}

impl NetConstruction {
    /// Y' is S-separated and large in Y with radius < S relative to f(X); X' is 1-separated.
    pub fn separated(&self, x: &FiniteMetricSpace, y: &FiniteMetricSpace) -> bool {
        let sep_y = self
            .net_y
            .iter()
            .enumerate()
            .all(|(a, &p)| self.net_y[a + 1..].iter().all(|&q| y.dist(p, q) >= &self.separation));
        let one = Rational::one();
        let sep_x = self
            .net_x
            .iter()
            .enumerate()
            .all(|(a, &p)| self.net_x[a + 1..].iter().all(|&q| x.dist(p, q) >= &one));
        sep_y && sep_x
    }
}

/// The net step: maximal S-separated Y' ⊆ f(X), then X' choosing the first preimage of each y ∈ Y'.
pub fn net_construction(f: &MultiMap) -> Result<NetConstruction> {
    let table = f.as_function().ok_or_else(|| Error::Precondition("net construction needs a function".into()))?;
    let omega = f.oscillation_profile().at(&Rational::one());
    let separation = Rational::one() + omega.finite().cloned().unwrap_or_else(Rational::zero);
    let y = f.target();
    let mut image: Vec<usize> = table.clone();
    image.sort();
    image.dedup();
    let mut net_y: Vec<usize> = Vec::new();
    for &p in &image {
        if net_y.iter().all(|&q| y.dist(p, q) >= &separation) {
            net_y.push(p);
        }
    }
    let net_x: Vec<usize> = net_y.iter().map(|&q| table.iter().position(|&v| v == q).unwrap()).collect();
    let sub_x = Arc::new(f.source().subspace(&net_x)?);
    let sub_y = Arc::new(y.subspace(&net_y)?);
    let h = MultiMap::from_function(sub_x, sub_y, &(0..net_x.len()).collect::<Vec<_>>())?;
    let image_space = y.subspace(&image)?;
    let net_in_image: Vec<usize> = net_y.iter().map(|q| image.iter().position(|p| p == q).unwrap()).collect();
    Ok(NetConstruction {
        radius_image: metric::largeness_radius(&image_space, &net_in_image)?,
        radius_y: metric::largeness_radius(y, &net_y)?,
        radius_x: metric::largeness_radius(f.source(), &net_x)?,
        separation,
        net_y,
        net_x,
        h,
    })
}

/// ψ⁻¹∘h∘φ where φ, ψ retract X, Y onto the large subsets X', Y' by nearest points.
pub fn composed_equivalence(x: Arc<FiniteMetricSpace>, y: Arc<FiniteMetricSpace>, net: &NetConstruction) -> Result<MultiMap> {
    let retract_x: Vec<usize> = (0..x.len()).map(|p| metric::nearest_in(&x, &net.net_x, p)).collect();
    let retract_y: Vec<usize> = (0..y.len()).map(|p| metric::nearest_in(&y, &net.net_y, p)).collect();
    let mut pairs = Vec::new();
    for (p, &px) in retract_x.iter().enumerate() {
        let k = net.net_x.iter().position(|&v| v == px).unwrap();
        let target = net.net_y[k];
        for (q, &qy) in retract_y.iter().enumerate() {
            if qy == target {
                pairs.push((p, q));
            }
        }
    }
    MultiMap::new(x, y, pairs)
}

/// On-disk representation of a relation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RelationFile {
    pub source: SpaceFile,
    pub target: SpaceFile,
    pub pairs: Vec<(String, String)>,
}

impl RelationFile {
    pub fn into_relation(self) -> Result<MultiMap> {
        let source = Arc::new(self.source.into_space()?);
        let target = Arc::new(self.target.into_space()?);
        let mut pairs = Vec::with_capacity(self.pairs.len());
        for (s, t) in &self.pairs {
            let x = source.index_of(s).ok_or_else(|| Error::Invalid(format!("unknown source point {s:?}")))?;
            let y = target.index_of(t).ok_or_else(|| Error::Invalid(format!("unknown target point {t:?}")))?;
            pairs.push((x, y));
        }
        MultiMap::new(source, target, pairs)
    }

    pub fn from_relation(phi: &MultiMap) -> Self {
        Self {
            source: SpaceFile::from_space(phi.source()),
            target: SpaceFile::from_space(phi.target()),
            pairs: phi.pairs().map(|(x, y)| (phi.source.id(x).to_string(), phi.target.id(y).to_string())).collect(),
        }
    }
}

pub fn relation_from_json(text: &str) -> Result<MultiMap> {
    let file: RelationFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    file.into_relation()
}

pub fn relation_to_json(phi: &MultiMap) -> String {
    serde_json::to_string_pretty(&RelationFile::from_relation(phi)).expect("serializable")
}

/// Capacity pair as naturals, used by transported-capacity audits.
pub fn capacity_pair(space: &FiniteMetricSpace, delta: &Rational, eps: &Rational) -> Result<(BigUint, BigUint)> {
    metric::capacity(space, delta, eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::line_fixture;
    use crate::rational::{int, ratio};

    fn line() -> Arc<FiniteMetricSpace> {
        Arc::new(line_fixture())
    }

    #[test]
    fn identity_oscillation() {
        let id = MultiMap::identity(line());
        assert_eq!(oscillation(&id, &int(1)).unwrap(), Extended::Finite(int(1)));
        assert_eq!(oscillation(&id, &int(0)).unwrap(), Extended::zero());
        assert_eq!(oscillation(&id, &int(5)).unwrap(), Extended::Finite(int(2)));
        assert_eq!(oscillation(&id, &int(100)).unwrap(), Extended::Finite(int(10)));
    }

    #[test]
    fn full_relation_oscillation() {
        let full = MultiMap::full(line(), line());
        assert_eq!(oscillation(&full, &int(0)).unwrap(), Extended::Finite(int(10)));
    }

    #[test]
    fn non_total_rejected() {
        let x = line();
        let phi = MultiMap::new(x.clone(), x, [(0, 0)]).unwrap();
        assert!(oscillation(&phi, &int(1)).is_err());
        assert!(phi.selection().is_err());
    }

    #[test]
    fn algebra() {
        let x = line();
        let phi = MultiMap::new(x.clone(), x.clone(), [(0, 1), (0, 2), (1, 3), (2, 0), (3, 3)]).unwrap();
        assert_eq!(phi.invert().invert(), phi);
        assert_eq!(phi.compose(&MultiMap::identity(x.clone())).unwrap(), phi);
        let full = MultiMap::full(x.clone(), x.clone());
        assert_eq!(full.compose(&full).unwrap(), full);
    }

    #[test]
    fn selections() {
        let x = line();
        let ab = Arc::new(FiniteMetricSpace::from_fn(vec!["b".into(), "a".into()], |_, _| int(1)).unwrap());
        let full = MultiMap::full(x.clone(), ab.clone());
        let f = full.selection().unwrap();
        assert!(f.pairs().all(|(_, y)| ab.id(y) == "a"));
        let id = MultiMap::identity(x);
        assert_eq!(id.selection().unwrap(), id);
    }

    #[test]
    fn distances() {
        let x = line();
        let c0 = MultiMap::from_function(x.clone(), x.clone(), &[0, 0, 0, 0]).unwrap();
        let c2 = MultiMap::from_function(x.clone(), x.clone(), &[2, 2, 2, 2]).unwrap();
        assert_eq!(multimap_distance(&c0, &c0).unwrap(), Extended::zero());
        assert_eq!(multimap_distance(&c0, &c2).unwrap(), Extended::Finite(int(2)));
        let partial = MultiMap::new(x.clone(), x.clone(), [(0, 0)]).unwrap();
        assert_eq!(multimap_distance(&c0, &partial).unwrap(), Extended::Infinite);
    }

    #[test]
    fn two_block_collapse() {
        let x = Arc::new(
            FiniteMetricSpace::line_from_coords(&[int(0), int(1), int(10), int(11)]).unwrap(),
        );
        let y = Arc::new(FiniteMetricSpace::line_from_coords(&[int(0), int(10)]).unwrap());
        let phi = MultiMap::from_function(x, y, &[0, 0, 1, 1]).unwrap();
        let cert = uniformity_certificate(&phi, &[ratio(1, 2), int(1), int(5), int(20)]).unwrap();
        assert_eq!(cert.rows[1].forward, Extended::zero());
        assert_eq!(cert.rows[2].forward, Extended::zero());
        assert_eq!(cert.rows[3].forward, Extended::Finite(int(10)));
        assert!(cert.macro_equivalence);
    }

    #[test]
    fn component_images_and_capacities() {
        let x = line();
        let id = MultiMap::identity(x.clone());
        assert!(component_image_check(&id, &int(1), &int(1)).unwrap().pass);
        assert!(component_image_check(&MultiMap::full(x.clone(), x.clone()), &int(1), &int(1)).is_err());
        let v = capacity_monotonicity_check(&id, &int(1), &int(8), &int(1), &int(8)).unwrap();
        assert!(v.pass);
        assert_eq!(v.source, v.target);
    }

    #[test]
    fn selection_bound_on_collapse() {
        let x = Arc::new(FiniteMetricSpace::line_from_coords(&[int(0), int(1), int(10), int(11)]).unwrap());
        let y = Arc::new(FiniteMetricSpace::line_from_coords(&[int(0), int(10)]).unwrap());
        let phi = MultiMap::from_function(x, y, &[0, 0, 1, 1]).unwrap();
        let b = selection_bound(&phi).unwrap();
        assert!(b.holds());
        assert_eq!(b.bound_x, int(1));
        assert_eq!(b.dist_gf, Extended::Finite(int(1)));
    }

    #[test]
    fn nets_from_identity() {
        let x = line();
        let id = MultiMap::identity(x.clone());
        let net = net_construction(&id).unwrap();
        assert_eq!(net.separation, int(2));
        assert_eq!(net.net_y, vec![0, 2, 3]);
        assert!(net.separated(&x, &x));
        assert!(net.radius_y < net.separation);
        assert_eq!(net.radius_image, net.radius_y);
        let phi = composed_equivalence(x.clone(), x.clone(), &net).unwrap();
        let cert = uniformity_certificate(&phi, &[int(1), int(2), int(16)]).unwrap();
        assert!(cert.macro_equivalence);
    }

    #[test]
    fn relation_round_trip() {
        let x = line();
        let phi = MultiMap::new(x.clone(), x, [(0, 1), (3, 2)]).unwrap();
        assert_eq!(relation_from_json(&relation_to_json(&phi)).unwrap(), phi);
    }
}
