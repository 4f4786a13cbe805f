//! Characterization checks, schedules and certified equivalence pipelines, the universality
//! embedding, and the prime-profile classification of homogeneous spaces.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{construction, invalid, precondition, Error, Result};
use crate::key_lemma::{self, AuditLog};
use crate::metric::{self, components, CapacityTable, FiniteMetricSpace};
use crate::morphism::{self, classify_map, IsoDecision, MapFlags, TowerMap};
use crate::multimap::{capacity_monotonicity_check, uniformity_certificate, MultiMap, UniformityCertificate};
use crate::rational::{self, Extended, Rational};
use crate::tower::{self, GroupChain, NodeRef, ScalingFunction, Tower};

fn stage(name: &'static str) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Parse(m) => Error::Parse(format!("[{name}] {m}")),
        Error::Invalid(m) => Error::Invalid(format!("[{name}] {m}")),
        Error::Precondition(m) => Error::Precondition(format!("[{name}] {m}")),
        Error::Construction(m) => Error::Construction(format!("[{name}] {m}")),
        Error::Io(m) => Error::Io(format!("[{name}] {m}")),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Universal,
    Micro,
    Macro,
    Bi,
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "universal" => Ok(Mode::Universal),
            "micro" => Ok(Mode::Micro),
            "macro" => Ok(Mode::Macro),
            "bi" => Ok(Mode::Bi),
            other => Err(Error::Parse(format!("unknown mode {other:?} (universal, micro, macro, bi)"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mode::Universal => "universal",
            Mode::Micro => "micro",
            Mode::Macro => "macro",
            Mode::Bi => "bi",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub pass: bool,
    pub witness: String,
}

/// Window-relative verdict: limits are replaced by growth toward the window edges.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharacterizationVerdict {
    pub mode: Mode,
    pub conditions: Vec<Condition>,
    pub pass: bool,
    pub window_relative: bool,
}

/// δ indices whose θ_δ^ε keeps growing over the last grid step.
fn macro_growth(table: &CapacityTable) -> Vec<(usize, bool, String)> {
    let n = table.grid.len();
    (0..n - 1)
        .map(|i| {
            let (a, b) = (table.theta(i, n - 2), table.theta(i, n - 1));
            (i, b > a, format!("θ(δ={}, ε={})={a} → θ(δ={}, ε={})={b}", table.grid[i], table.grid[n - 2], table.grid[i], table.grid[n - 1]))
        })
        .collect()
}

/// ε indices whose θ_δ^ε keeps growing over the first grid step.
fn micro_growth(table: &CapacityTable) -> Vec<(usize, bool, String)> {
    let n = table.grid.len();
    (1..n)
        .map(|j| {
            let (a, b) = (table.theta(1, j), table.theta(0, j));
            (j, b > a, format!("θ(δ={}, ε={})={a} → θ(δ={}, ε={})={b}", table.grid[1], table.grid[j], table.grid[0], table.grid[j]))
        })
        .collect()
}

fn summarize(rows: &[(usize, bool, String)], all: bool) -> (bool, String) {
    let pass = if all { rows.iter().all(|r| r.1) } else { rows.iter().any(|r| r.1) };
    let pick = if all { rows.iter().find(|r| !r.1).or(rows.first()) } else { rows.iter().find(|r| r.1).or(rows.first()) };
    (pass, pick.map(|r| r.2.clone()).unwrap_or_default())
}

pub fn characterization_check(space: &FiniteMetricSpace, grid: &[Rational], mode: Mode) -> Result<CharacterizationVerdict> {
    if grid.len() < 3 {
        return invalid("a characterization window needs at least 3 scales");
    }
    let table = CapacityTable::build(space, grid)?;
    let n = grid.len();
    let mut max_theta = BigUint::zero();
    for i in 0..n {
        for j in i..n {
            max_theta = max_theta.max(table.big_theta(i, j).clone());
        }
    }
    let dz = metric::dimension_zero_report(space, grid)?;
    let mut conditions = Vec::new();
    let finite = Condition { name: "capacity_finite".into(), pass: true, witness: format!("max Θ on window = {max_theta}") };
    let dim = |name: &str, pass: bool| Condition { name: name.into(), pass, witness: format!("{} scales checked", grid.len()) };
    match mode {
        Mode::Universal => {
            conditions.push(dim("dimension_zero", dz.micro_witnessed_on_window && dz.macro_witnessed_on_window));
            conditions.push(finite);
        }
        Mode::Micro => {
            conditions.push(dim("micro_dimension_zero", dz.micro_witnessed_on_window));
            conditions.push(finite);
            let (pass, witness) = summarize(&micro_growth(&table), false);
            conditions.push(Condition { name: "theta_growth_small_scales_some_eps".into(), pass, witness });
        }
        Mode::Macro => {
            conditions.push(dim("macro_dimension_zero", dz.macro_witnessed_on_window));
            conditions.push(finite);
            let (pass, witness) = summarize(&macro_growth(&table), false);
            conditions.push(Condition { name: "theta_growth_large_scales_some_delta".into(), pass, witness });
        }
        Mode::Bi => {
            conditions.push(dim("dimension_zero", dz.micro_witnessed_on_window && dz.macro_witnessed_on_window));
            conditions.push(finite);
            let (pass, witness) = summarize(&macro_growth(&table), true);
            conditions.push(Condition { name: "theta_growth_large_scales_all_delta".into(), pass, witness });
            let (pass, witness) = summarize(&micro_growth(&table), true);
            conditions.push(Condition { name: "theta_growth_small_scales_all_eps".into(), pass, witness });
        }
    }
    let pass = conditions.iter().all(|c| c.pass);
    Ok(CharacterizationVerdict { mode, conditions, pass, window_relative: true })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    /// Upward: θ_δ^{λ_k} ≥ 4^{k+5}·2^{m_{k−1}}, 2^{m_k} ≥ 4^k·Θ_δ^{λ_k}.
    Macro,
    /// Downward from the single-component scale: Θ^{λ_{k+1}}_{λ_k} ≤ 2^{m_k−m_{k−1}} ≤ θ^{λ_k}_{λ_{k−1}}.
    Bi,
    /// Two spaces: θ^{α_k}_{α_{k−1}}(X) ≥ Θ^{β_k}_{β_{k−1}}(Y), θ^{β_k}_{β_{k−1}}(Y) ≥ Θ^{α_{k+1}}_{α_k}(X).
    TwoSpace,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub kind: ScheduleKind,
    /// Ascending scales of the first space.
    #[serde(with = "crate::rational::serde_rational_vec")]
    pub lambdas: Vec<Rational>,
    /// Ascending binary levels (macro and bi).
    pub ms: Vec<i64>,
    /// Ascending scales of the second space (two-space).
    #[serde(with = "crate::rational::serde_rational_vec")]
    pub betas: Vec<Rational>,
}

impl Schedule {
    /// Step degrees 2^{m_k − m_{k−1}} bottom-up.
    pub fn binary_steps(&self) -> Vec<BigUint> {
        self.ms.windows(2).map(|w| BigUint::one() << ((w[1] - w[0]) as usize)).collect()
    }
}

fn cap(space: &FiniteMetricSpace, delta: &Rational, eps: &Rational) -> Result<(BigUint, BigUint)> {
    metric::capacity(space, delta, eps)
}

/// Smallest window scale (or the diameter) at which the space is one component.
fn single_component_scale(space: &FiniteMetricSpace, grid: &[Rational]) -> Result<Rational> {
    for s in grid {
        if components(space, s)?.len() == 1 {
            return Ok(s.clone());
        }
    }
    let d = space.diameter();
    if d.is_zero() {
        return precondition("a one-point space has no scales to schedule");
    }
    Ok(d)
}

fn log2_ceil(n: &BigUint) -> i64 {
    rational::ceil_log2(n) as i64
}

pub fn build_schedule(space: &FiniteMetricSpace, grid: &[Rational], kind: ScheduleKind, depth: Option<usize>) -> Result<Schedule> {
    rational::check_grid(grid)?;
    match kind {
        ScheduleKind::Macro => {
            let depth = depth.unwrap_or(0);
            let delta = grid[0].clone();
            let mut lambdas = vec![delta.clone()];
            let mut ms = vec![0i64];
            for k in 1..=depth {
                let need = rational::pow4_natural(k as u32 + 5) << (ms[k - 1] as usize);
                let mut chosen = None;
                for s in grid.iter().filter(|s| *s > lambdas.last().unwrap()) {
                    let (t, big) = cap(space, &delta, s)?;
                    if t >= need {
                        chosen = Some((s.clone(), big));
                        break;
                    }
                }
                let Some((s, big)) = chosen else {
                    return precondition(format!(
                        "window exhausted at k = {k}: no scale reaches θ_δ^λ ≥ 4^{}·2^{} = {need}",
                        k + 5,
                        ms[k - 1]
                    ));
                };
                let m = log2_ceil(&(rational::pow4_natural(k as u32) * big));
                lambdas.push(s);
                ms.push(m);
            }
            Ok(Schedule { kind, lambdas, ms, betas: Vec::new() })
        }
        ScheduleKind::Bi => {
            let top = single_component_scale(space, grid)?;
            let mut lambdas = vec![top];
            let mut ms = vec![0i64];
            let mut above = BigUint::one();
            loop {
                if depth.map(|d| lambdas.len() > d).unwrap_or(false) {
                    break;
                }
                let cur = lambdas.last().unwrap().clone();
                let step = log2_ceil(&above).max(1);
                let need = BigUint::one() << (step as usize);
                let mut chosen = None;
                for s in grid.iter().rev().filter(|s| **s < cur) {
                    let (t, _) = cap(space, s, &cur)?;
                    if t >= need {
                        chosen = Some(s.clone());
                        break;
                    }
                }
                let Some(next) = chosen else {
                    if let Some(d) = depth {
                        return precondition(format!(
                            "window exhausted at downward step {}: no scale below {cur} splits into {need} components (requested depth {d})",
                            lambdas.len()
                        ));
                    }
                    break;
                };
                above = cap(space, &next, &cur)?.1;
                lambdas.push(next);
                ms.push(ms.last().unwrap() - step);
            }
            lambdas.reverse();
            ms.reverse();
            Ok(Schedule { kind, lambdas, ms, betas: Vec::new() })
        }
        ScheduleKind::TwoSpace => invalid("two-space schedules need both spaces; use build_two_space_schedule"),
    }
}

/// Downward schedule for a pair of spaces.
pub fn build_two_space_schedule(
    x: &FiniteMetricSpace,
    gx: &[Rational],
    y: &FiniteMetricSpace,
    gy: &[Rational],
    depth: Option<usize>,
) -> Result<Schedule> {
    rational::check_grid(gx)?;
    rational::check_grid(gy)?;
    let mut alphas = vec![single_component_scale(x, gx)?];
    let mut betas = vec![single_component_scale(y, gy)?];
    let mut above = BigUint::one();
    loop {
        if depth.map(|d| alphas.len() > d).unwrap_or(false) {
            break;
        }
        let (a, b) = (alphas.last().unwrap().clone(), betas.last().unwrap().clone());
        let mut chosen = None;
        'search: for bs in gy.iter().rev().filter(|s| **s < b) {
            let (ty, big_y) = cap(y, bs, &b)?;
            if ty < above || ty < BigUint::from(2u32) {
                continue;
            }
            for as_ in gx.iter().rev().filter(|s| **s < a) {
                let (tx, big_x) = cap(x, as_, &a)?;
                if tx >= big_y {
                    chosen = Some((as_.clone(), bs.clone(), big_x));
                    break 'search;
                }
            }
        }
        let Some((na, nb, big_x)) = chosen else {
            if let Some(d) = depth {
                return precondition(format!("window exhausted at downward step {} (requested depth {d})", alphas.len()));
            }
            break;
        };
        above = big_x;
        alphas.push(na);
        betas.push(nb);
    }
    alphas.reverse();
    betas.reverse();
    Ok(Schedule { kind: ScheduleKind::TwoSpace, lambdas: alphas, ms: Vec::new(), betas })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub k: i64,
    pub relation: String,
    pub lhs: String,
    pub rhs: String,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleAudit {
    pub checks: Vec<InequalityCheck>,
    pub pass: bool,
}

fn ge(k: i64, relation: String, lhs: BigUint, rhs: BigUint) -> InequalityCheck {
    InequalityCheck { k, relation, pass: lhs >= rhs, lhs: lhs.to_string(), rhs: rhs.to_string() }
}

/// Re-evaluates every schedule inequality from the space, independently of the builder.
pub fn audit_schedule(space: &FiniteMetricSpace, schedule: &Schedule, other: Option<&FiniteMetricSpace>) -> Result<ScheduleAudit> {
    let mut checks = Vec::new();
    let l = &schedule.lambdas;
    match schedule.kind {
        ScheduleKind::Macro => {
            for k in 1..l.len() {
                let (t, big) = cap(space, &l[0], &l[k])?;
                let prev = BigUint::one() << (schedule.ms[k - 1] as usize);
                checks.push(ge(k as i64, "θ_δ^λk ≥ 4^(k+5)·2^m(k−1)".into(), t, rational::pow4_natural(k as u32 + 5) * prev));
                let mk = BigUint::one() << (schedule.ms[k] as usize);
                checks.push(ge(k as i64, "2^mk ≥ 4^k·Θ_δ^λk".into(), mk, rational::pow4_natural(k as u32) * big));
            }
            if schedule.ms.windows(2).any(|w| w[0] >= w[1]) || l.windows(2).any(|w| w[0] >= w[1]) {
                checks.push(InequalityCheck { k: 0, relation: "strictly increasing".into(), lhs: String::new(), rhs: String::new(), pass: false });
            }
        }
        ScheduleKind::Bi => {
            let n = l.len();
            for i in 1..n {
                // i is the upper level of the step i−1 → i, k = i − (n − 1) ≤ 0.
                let k = i as i64 - (n as i64 - 1);
                let step = BigUint::one() << ((schedule.ms[i] - schedule.ms[i - 1]) as usize);
                let above = if i + 1 < n { cap(space, &l[i], &l[i + 1])?.1 } else { BigUint::one() };
                let below = cap(space, &l[i - 1], &l[i])?.0;
                checks.push(ge(k, "2^(mk−m(k−1)) ≥ Θ^λ(k+1)_λk".into(), step.clone(), above));
                checks.push(ge(k, "θ^λk_λ(k−1) ≥ 2^(mk−m(k−1))".into(), below, step));
            }
        }
        ScheduleKind::TwoSpace => {
            let y = other.ok_or_else(|| Error::Invalid("two-space audit needs the second space".into()))?;
            let (a, b) = (l, &schedule.betas);
            let n = a.len();
            if b.len() != n {
                return invalid("two-space schedule sequences differ in length");
            }
            for i in 1..n {
                let k = i as i64 - (n as i64 - 1);
                let tx = cap(space, &a[i - 1], &a[i])?.0;
                let (ty, big_y) = cap(y, &b[i - 1], &b[i])?;
                checks.push(ge(k, "θ^αk_α(k−1)(X) ≥ Θ^βk_β(k−1)(Y)".into(), tx, big_y));
                let big_x = if i + 1 < n { cap(space, &a[i], &a[i + 1])?.1 } else { BigUint::one() };
                checks.push(ge(k, "θ^βk_β(k−1)(Y) ≥ Θ^α(k+1)_αk(X)".into(), ty, big_x));
            }
        }
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(ScheduleAudit { checks, pass })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurjectionAudit {
    /// Target level index of the step (children live one level lower).
    pub level: usize,
    pub max_preimage: usize,
    pub min_target_children: usize,
    pub max_assigned: usize,
    pub min_source_children: usize,
    pub feasible: bool,
}

/// Extends top ↦ top to a surjective immersion level by level: each target child set is dealt
/// round-robin onto the preimages, then each preimage's children round-robin onto its share.
pub fn downward_extension(source: &Tower, target: &Tower) -> Result<(TowerMap, Vec<SurjectionAudit>)> {
    if source.is_counted() || target.is_counted() {
        return precondition("downward extension needs explicit towers");
    }
    if source.level_count() != target.level_count() {
        return invalid("downward extension pairs levels one to one");
    }
    let n = source.level_count();
    let mut node_map: Vec<Vec<NodeRef>> = (0..n).map(|l| vec![NodeRef::new(l, usize::MAX); source.nodes(l).len()]).collect();
    let top = source.top();
    node_map[top][0] = NodeRef::new(top, 0);
    let mut audits = Vec::new();
    for l in (1..n).rev() {
        let mut pre: Vec<Vec<usize>> = vec![Vec::new(); target.nodes(l).len()];
        for (i, y) in node_map[l].iter().enumerate() {
            pre[y.index].push(i);
        }
        let mut audit = SurjectionAudit {
            level: l,
            max_preimage: 0,
            min_target_children: usize::MAX,
            max_assigned: 0,
            min_source_children: usize::MAX,
            feasible: true,
        };
        for (yi, xs) in pre.iter().enumerate() {
            let ykids: Vec<NodeRef> = target.children(NodeRef::new(l, yi)).collect();
            audit.max_preimage = audit.max_preimage.max(xs.len());
            audit.min_target_children = audit.min_target_children.min(ykids.len());
            if xs.is_empty() {
                return construction(format!("target node {l}:{yi} has no preimage"));
            }
            if ykids.len() < xs.len() {
                return construction(format!(
                    "level {l}: {} preimages but only {} target children",
                    xs.len(),
                    ykids.len()
                ));
            }
            for (r, &xi) in xs.iter().enumerate() {
                let share: Vec<NodeRef> = ykids.iter().skip(r).step_by(xs.len()).copied().collect();
                let xkids: Vec<NodeRef> = source.children(NodeRef::new(l, xi)).collect();
                audit.max_assigned = audit.max_assigned.max(share.len());
                audit.min_source_children = audit.min_source_children.min(xkids.len());
                if xkids.len() < share.len() {
                    return Err(Error::Construction(format!(
                        "level {l}: node {xi} has {} children for {} assigned targets",
                        xkids.len(),
                        share.len()
                    )));
                }
                for (j, c) in xkids.iter().enumerate() {
                    node_map[l - 1][c.index] = share[j % share.len()];
                }
            }
        }
        audits.push(audit);
    }
    Ok((TowerMap { level_map: (0..n).collect(), node_map }, audits))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransportAudit {
    pub checked: usize,
    pub skipped: usize,
    pub pass: bool,
}

/// Lemma-style capacity transport on all grid pairs where admissible target scales exist.
pub fn transport_audit(phi: &MultiMap, grid: &[Rational]) -> Result<TransportAudit> {
    let target = phi.target();
    let mut candidates: Vec<Rational> = target.distance_values().iter().filter(|d| !d.is_zero()).cloned().collect();
    if let Some(min) = candidates.first().cloned() {
        candidates.insert(0, min / rational::int(2));
    } else {
        candidates.push(rational::int(1));
    }
    let fwd = phi.oscillation_profile();
    let inv = phi.invert().oscillation_profile();
    let (mut checked, mut skipped, mut pass) = (0, 0, true);
    for (i, delta) in grid.iter().enumerate() {
        for eps in &grid[i..] {
            let w = fwd.at(eps);
            let eps2 = candidates.iter().find(|c| w.le_rational(c)).cloned();
            let delta2 = eps2.as_ref().and_then(|e2| {
                candidates.iter().rev().find(|c| *c <= e2 && inv.at(c).le_rational(delta)).cloned()
            });
            match (eps2, delta2) {
                (Some(e2), Some(d2)) => {
                    let v = capacity_monotonicity_check(phi, delta, eps, &d2, &e2)?;
                    checked += 1;
                    pass &= v.pass;
                }
                _ => skipped += 1,
            }
        }
    }
    Ok(TransportAudit { checked, skipped, pass: pass && checked > 0 })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndChecks {
    /// ω at the smallest grid scale stays below the smallest scheduled scale, both ways.
    pub small_end: bool,
    /// ω finite on the whole grid, both ways.
    pub large_end: bool,
}

/// A synthesized relation with its construction record.
#[derive(Clone, Debug)]
pub struct Synthesis {
    pub schedule: Schedule,
    pub schedule_audit: ScheduleAudit,
    pub relation: MultiMap,
    pub certificate: UniformityCertificate,
    pub ends: EndChecks,
    pub transport: TransportAudit,
    pub surjections: Vec<SurjectionAudit>,
    pub key_lemma: Option<AuditLog>,
    pub map_flags: Option<MapFlags>,
}

impl Synthesis {
    pub fn audit_json(&self) -> String {
        serde_json::to_string_pretty(&serde_json::json!({
            "schedule": self.schedule,
            "schedule_audit": self.schedule_audit,
            "certificate": self.certificate,
            "ends": self.ends,
            "transport": self.transport,
            "surjections": self.surjections,
            "key_lemma": self.key_lemma,
            "map_flags": self.map_flags,
        }))
        .expect("serializable")
    }
}

fn end_checks(cert: &UniformityCertificate, smallest: &Rational) -> EndChecks {
    let first = &cert.rows[0];
    EndChecks {
        small_end: first.forward.le_rational(smallest) && first.inverse.le_rational(smallest),
        large_end: cert.rows.iter().all(|r| r.forward.is_finite() && r.inverse.is_finite()),
    }
}

fn one_point() -> Result<Arc<FiniteMetricSpace>> {
    Ok(Arc::new(FiniteMetricSpace::from_fn(vec!["*".into()], |_, _| rational::int(0))?))
}

/// Binary-tower macro pipeline: canonical tower, Key Lemma immersion onto the binary level
/// subtower, boundary identification. Depth 0 collapses the space onto a single point.
pub fn synthesize_macro(space: &FiniteMetricSpace, grid: &[Rational], depth: usize, cutoff: usize) -> Result<Synthesis> {
    let schedule = build_schedule(space, grid, ScheduleKind::Macro, Some(depth)).map_err(stage("schedule"))?;
    let schedule_audit = audit_schedule(space, &schedule, None).map_err(stage("schedule audit"))?;
    let source = Arc::new(space.clone());
    if depth == 0 {
        let relation = MultiMap::from_function(source, one_point()?, &vec![0; space.len()])?;
        let certificate = uniformity_certificate(&relation, grid).map_err(stage("certificate"))?;
        let ends = end_checks(&certificate, &schedule.lambdas[0]);
        let transport = transport_audit(&relation, grid).map_err(stage("transport"))?;
        return Ok(Synthesis {
            schedule,
            schedule_audit,
            relation,
            certificate,
            ends,
            transport,
            surjections: Vec::new(),
            key_lemma: None,
            map_flags: None,
        });
    }
    let mut levels = schedule.lambdas.clone();
    let last = levels.last().unwrap().clone();
    let top = space.diameter().max(last * rational::int(2));
    levels.push(top);
    let (t, base_of) = tower::canonical_tower(space, &levels).map_err(stage("canonical tower"))?;
    let steps = schedule.binary_steps();
    let h = Tower::homogeneous(schedule.lambdas.clone(), &steps, cutoff).map_err(stage("binary subtower"))?;
    let im = key_lemma::main_immersion(&t, &h, depth, None).map_err(stage("key lemma"))?;
    let verdict = im.verify(&t);
    if !verdict.immersion || !verdict.surjective_by_counts {
        return Err(Error::Construction(format!("[key lemma] immersion audit failed: {:?}", verdict.detail)));
    }
    if h.is_counted() {
        return precondition(format!("[boundary] binary target with 2^{} leaves exceeds the materialization cutoff", schedule.ms[depth]));
    }
    let images = im.explicit_images();
    let leaf_of: BTreeMap<usize, usize> =
        images.iter().filter(|(x, _, _)| x.level == 0).map(|(x, _, i)| (x.index, i.to_usize().unwrap())).collect();
    let kept: Vec<usize> = (0..space.len()).filter(|p| leaf_of.contains_key(&base_of[*p])).collect();
    let sub = Arc::new(space.subspace(&kept)?);
    let (bspace, leaves) = morphism::boundary_with_points(&h, &ScalingFunction::labels(&h)?).map_err(stage("boundary"))?;
    let pos: BTreeMap<usize, usize> = leaves.iter().enumerate().map(|(i, x)| (x.index, i)).collect();
    let f: Vec<usize> = kept.iter().map(|p| pos[&leaf_of[&base_of[*p]]]).collect();
    let relation = MultiMap::from_function(sub, bspace, &f)?;
    let certificate = uniformity_certificate(&relation, grid).map_err(stage("certificate"))?;
    let ends = end_checks(&certificate, &schedule.lambdas[0]);
    let transport = transport_audit(&relation, grid).map_err(stage("transport"))?;
    Ok(Synthesis {
        schedule,
        schedule_audit,
        relation,
        certificate,
        ends,
        transport,
        surjections: Vec::new(),
        key_lemma: Some(im.audit),
        map_flags: None,
    })
}

/// Relation through canonical towers and a tower map between them on their lowest levels.
fn relation_through(
    x: &FiniteMetricSpace,
    base_x: &[usize],
    y: &FiniteMetricSpace,
    base_y: &[usize],
    phi: &TowerMap,
) -> Result<MultiMap> {
    let mut pairs = Vec::new();
    let mut by_leaf: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (q, &b) in base_y.iter().enumerate() {
        by_leaf.entry(b).or_default().push(q);
    }
    for (p, &b) in base_x.iter().enumerate() {
        let target = phi.node_map[0][b].index;
        for &q in by_leaf.get(&target).map(|v| v.as_slice()).unwrap_or(&[]) {
            pairs.push((p, q));
        }
    }
    MultiMap::new(Arc::new(x.clone()), Arc::new(y.clone()), pairs)
}

/// Downward pipeline onto the binary level subtower over the bi-mode schedule.
pub fn synthesize_bi(space: &FiniteMetricSpace, grid: &[Rational], depth: Option<usize>, cutoff: usize) -> Result<Synthesis> {
    let schedule = build_schedule(space, grid, ScheduleKind::Bi, depth).map_err(stage("schedule"))?;
    let schedule_audit = audit_schedule(space, &schedule, None).map_err(stage("schedule audit"))?;
    let (t, base_of) = tower::canonical_tower(space, &schedule.lambdas).map_err(stage("canonical tower"))?;
    let steps = schedule.binary_steps();
    let h = Tower::homogeneous(schedule.lambdas.clone(), &steps, cutoff).map_err(stage("binary subtower"))?;
    if h.is_counted() {
        return precondition("[binary subtower] target exceeds the materialization cutoff");
    }
    let (phi, surjections) = downward_extension(&t, &h).map_err(stage("downward extension"))?;
    let flags = classify_map(&t, &h, &phi).map_err(stage("immersion audit"))?;
    if !flags.immersion {
        return Err(Error::Construction("[immersion audit] downward extension is not an immersion".into()));
    }
    let (bspace, leaves) = morphism::boundary_with_points(&h, &ScalingFunction::labels(&h)?).map_err(stage("boundary"))?;
    let pos: BTreeMap<usize, usize> = leaves.iter().enumerate().map(|(i, x)| (x.index, i)).collect();
    let f: Vec<usize> = base_of.iter().map(|b| pos[&phi.node_map[0][*b].index]).collect();
    let relation = MultiMap::from_function(Arc::new(space.clone()), bspace, &f)?;
    let certificate = uniformity_certificate(&relation, grid).map_err(stage("certificate"))?;
    let ends = end_checks(&certificate, &schedule.lambdas[0]);
    let transport = transport_audit(&relation, grid).map_err(stage("transport"))?;
    Ok(Synthesis { schedule, schedule_audit, relation, certificate, ends, transport, surjections, key_lemma: None, map_flags: Some(flags) })
}

/// Two-space downward pipeline X → Y over a two-space schedule.
pub fn synthesize_two_space(
    x: &FiniteMetricSpace,
    gx: &[Rational],
    y: &FiniteMetricSpace,
    gy: &[Rational],
    depth: Option<usize>,
) -> Result<Synthesis> {
    let schedule = build_two_space_schedule(x, gx, y, gy, depth).map_err(stage("schedule"))?;
    let schedule_audit = audit_schedule(x, &schedule, Some(y)).map_err(stage("schedule audit"))?;
    let (tx, bx) = tower::canonical_tower(x, &schedule.lambdas).map_err(stage("canonical tower"))?;
    let (ty, by) = tower::canonical_tower(y, &schedule.betas).map_err(stage("canonical tower"))?;
    let (phi, surjections) = downward_extension(&tx, &ty).map_err(stage("downward extension"))?;
    let flags = classify_map(&tx, &ty, &phi).map_err(stage("immersion audit"))?;
    if !flags.immersion {
        return Err(Error::Construction("[immersion audit] downward extension is not an immersion".into()));
    }
    let relation = relation_through(x, &bx, y, &by, &phi)?;
    let certificate = uniformity_certificate(&relation, gx).map_err(stage("certificate"))?;
    let ends = end_checks(&certificate, &schedule.lambdas[0].clone().max(schedule.betas[0].clone()));
    let transport = transport_audit(&relation, gx).map_err(stage("transport"))?;
    Ok(Synthesis { schedule, schedule_audit, relation, certificate, ends, transport, surjections, key_lemma: None, map_flags: Some(flags) })
}

#[derive(Clone, Debug)]
pub struct UniversalityEmbedding {
    pub levels: Vec<Rational>,
    pub source: Tower,
    pub receiving: Tower,
    pub receiving_degrees: Vec<BigUint>,
    pub map: TowerMap,
    pub flags: MapFlags,
    pub relation: MultiMap,
    pub certificate: UniformityCertificate,
}

/// Canonical tower on the dyadic scales of the window, embedded into the homogeneous tower with
/// step degrees max(2, Deg); the boundary relation carries the certificate.
pub fn universality_embed(space: &FiniteMetricSpace, grid: &[Rational], cutoff: usize) -> Result<UniversalityEmbedding> {
    rational::check_grid(grid)?;
    let lo = grid[0].clone();
    let hi = grid.last().unwrap().clone();
    let mut e = 0i64;
    while rational::pow2(e) < lo {
        e += 1;
    }
    while rational::pow2(e - 1) >= lo {
        e -= 1;
    }
    let mut levels = Vec::new();
    while rational::pow2(e) <= hi {
        levels.push(rational::pow2(e));
        e += 1;
    }
    if levels.is_empty() {
        return invalid("window contains no power of two");
    }
    while components(space, levels.last().unwrap())?.len() > 1 {
        levels.push(rational::pow2(e));
        e += 1;
    }
    let (t, base_of) = tower::canonical_tower(space, &levels).map_err(stage("canonical tower"))?;
    let prof = t.degree_profile();
    let degrees: Vec<BigUint> = (0..t.top()).map(|l| prof.big_deg(l, l + 1).clone().max(BigUint::from(2u32))).collect();
    let h = Tower::homogeneous(levels.clone(), &degrees, cutoff).map_err(stage("receiving tower"))?;
    if h.is_counted() {
        return precondition("[receiving tower] exceeds the materialization cutoff");
    }
    let ident: Vec<usize> = (0..t.level_count()).collect();
    let map = morphism::build_embedding(&t, &h, &ident, false).map_err(stage("embedding"))?;
    let flags = classify_map(&t, &h, &map)?;
    let f = ScalingFunction::new(levels.clone())?;
    let (tb, tleaves) = morphism::boundary_with_points(&t, &f)?;
    let (hb, _) = morphism::boundary_with_points(&h, &f)?;
    let dphi = morphism::boundary_map(&t, &h, &map, &f, &f)?;
    debug_assert!(*dphi.target() == hb);
    let pos: BTreeMap<usize, usize> = tleaves.iter().enumerate().map(|(i, x)| (x.index, i)).collect();
    let canon: Vec<usize> = base_of.iter().map(|b| pos[b]).collect();
    let c = MultiMap::from_function(Arc::new(space.clone()), tb, &canon)?;
    let relation = c.compose(&dphi)?;
    let certificate = uniformity_certificate(&relation, grid)?;
    Ok(UniversalityEmbedding { levels, source: t, receiving: h, receiving_degrees: degrees, map, flags, relation, certificate })
}

/// Per-prime exponents observed in component sizes; "≥" semantics on finite windows.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimeProfile {
    /// Exponent per prime; None is unbounded.
    pub exponents: BTreeMap<u64, Option<u64>>,
    pub open_ended: bool,
}

impl PrimeProfile {
    pub fn finite(entries: &[(u64, u64)]) -> Self {
        Self { exponents: entries.iter().map(|&(p, e)| (p, Some(e))).collect(), open_ended: false }
    }

    pub fn exponent(&self, p: u64) -> Option<u64> {
        match self.exponents.get(&p) {
            None => Some(0),
            Some(e) => *e,
        }
    }

    fn nonzero(&self) -> BTreeMap<u64, Option<u64>> {
        self.exponents.iter().filter(|(_, e)| **e != Some(0)).map(|(p, e)| (*p, *e)).collect()
    }
}

impl fmt::Display for PrimeProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rel = if self.open_ended { "≥" } else { "" };
        let parts: Vec<String> = self
            .nonzero()
            .iter()
            .map(|(p, e)| match e {
                Some(e) => format!("{p}:{rel}{e}"),
                None => format!("{p}:∞"),
            })
            .collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// Input to the prime-profile machinery.
#[derive(Clone, Copy, Debug)]
pub enum ProfileInput<'a> {
    Space(&'a FiniteMetricSpace, &'a [Rational]),
    Chain(&'a GroupChain),
}

impl ProfileInput<'_> {
    /// Distinct component cardinalities over the window.
    pub fn component_sizes(&self) -> Result<Vec<BigUint>> {
        let mut sizes: Vec<BigUint> = match self {
            ProfileInput::Space(space, grid) => {
                let mut v = Vec::new();
                for s in grid.iter() {
                    for b in components(space, s)?.blocks {
                        v.push(BigUint::from(b.len()));
                    }
                }
                v
            }
            ProfileInput::Chain(c) => c.orders.clone(),
        };
        sizes.sort();
        sizes.dedup();
        Ok(sizes)
    }

    fn homogeneous(&self) -> bool {
        match self {
            ProfileInput::Space(s, _) => s.homogeneous(),
            ProfileInput::Chain(_) => true,
        }
    }
}

fn factor(n: &BigUint) -> Result<BTreeMap<u64, u64>> {
    let mut out = BTreeMap::new();
    if n.is_one() || n.is_zero() {
        return Ok(out);
    }
    for (p, e) in num_prime::nt_funcs::factorize(n.clone()) {
        let p = p.to_u64().ok_or_else(|| Error::Precondition(format!("prime factor {p} exceeds 64 bits")))?;
        out.insert(p, e as u64);
    }
    Ok(out)
}

pub fn f_invariant(input: ProfileInput<'_>) -> Result<PrimeProfile> {
    let mut exponents: BTreeMap<u64, Option<u64>> = BTreeMap::new();
    for s in input.component_sizes()? {
        for (p, e) in factor(&s)? {
            let slot = exponents.entry(p).or_insert(Some(0));
            if slot.map(|v| e > v).unwrap_or(false) {
                *slot = Some(e);
            }
        }
    }
    Ok(PrimeProfile { exponents, open_ended: true })
}

/// Canonical chain: one cyclic p-factor at a time, primes ascending, exponents round-robin;
/// unbounded exponents are truncated at `cutoff`.
pub fn zf_chain(profile: &PrimeProfile, cutoff: u64) -> GroupChain {
    let want: Vec<(u64, u64)> = profile.nonzero().into_iter().map(|(p, e)| (p, e.unwrap_or(cutoff))).collect();
    let mut orders = vec![BigUint::one()];
    let rounds = want.iter().map(|w| w.1).max().unwrap_or(0);
    for r in 1..=rounds {
        for &(p, e) in &want {
            if e >= r {
                let next = orders.last().unwrap() * p;
                orders.push(next);
            }
        }
    }
    GroupChain { orders }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivisibilityCertificate {
    pub prime: u64,
    pub exponent_x: String,
    pub exponent_y: String,
    /// Component size on the larger side attaining its exponent.
    pub witness_size: String,
    /// All component sizes on the other side; none is divisible by prime^exponent.
    pub other_sizes: Vec<String>,
}

#[derive(Clone, Debug)]
pub enum ClassifyVerdict {
    /// Equal profiles; the witness is an isomorphism of the normalized chain towers.
    Equivalent { profile: PrimeProfile, chain: GroupChain, source: Tower, target: Tower, map: TowerMap, flags: MapFlags },
    Distinct { x: PrimeProfile, y: PrimeProfile, certificate: DivisibilityCertificate },
}

/// Compares prime profiles; equal profiles ship an isomorphism of the normalized chain towers.
pub fn classify_pair(x: ProfileInput<'_>, y: ProfileInput<'_>, cutoff: usize) -> Result<ClassifyVerdict> {
    if !x.homogeneous() || !y.homogeneous() {
        return precondition("classification needs inputs flagged homogeneous (vertex-transitive)");
    }
    let (px, py) = (f_invariant(x)?, f_invariant(y)?);
    if px.nonzero() == py.nonzero() {
        let chain = zf_chain(&px, 0);
        let source = tower::group_chain_tower(&chain, cutoff)?;
        let target = tower::group_chain_tower(&zf_chain(&py, 0), cutoff)?;
        let map = match morphism::decide_homogeneous_iso(&source, &target)? {
            IsoDecision::Isomorphic(m) => m,
            IsoDecision::Mismatch { step, .. } => {
                return Err(Error::Construction(format!("normalized chains differ at step {step}")));
            }
        };
        let flags = classify_map(&source, &target, &map)?;
        return Ok(ClassifyVerdict::Equivalent { profile: px, chain, source, target, map, flags });
    }
    let (nx, ny) = (px.nonzero(), py.nonzero());
    let only: Vec<u64> = nx.keys().filter(|p| !ny.contains_key(p)).chain(ny.keys().filter(|p| !nx.contains_key(p))).copied().collect();
    let prime = match only.iter().min() {
        Some(p) => *p,
        None => *nx.keys().chain(ny.keys()).filter(|p| nx.get(p) != ny.get(p)).min().expect("profiles differ"),
    };
    let (ex, ey) = (px.exponent(prime), py.exponent(prime));
    let x_larger = match (ex, ey) {
        (None, _) => true,
        (_, None) => false,
        (Some(a), Some(b)) => a > b,
    };
    let (big, small, e) = if x_larger { (&x, &y, ex) } else { (&y, &x, ey) };
    let e = e.unwrap_or(1);
    let pe = num_traits::pow(BigUint::from(prime), e as usize);
    let witness = big.component_sizes()?.into_iter().find(|s| (s % &pe).is_zero()).map(|s| s.to_string()).unwrap_or_default();
    let other_sizes = small.component_sizes()?.iter().map(|s| s.to_string()).collect();
    let show = |v: Option<u64>| v.map(|e| e.to_string()).unwrap_or_else(|| "∞".into());
    Ok(ClassifyVerdict::Distinct {
        x: px.clone(),
        y: py.clone(),
        certificate: DivisibilityCertificate { prime, exponent_x: show(ex), exponent_y: show(ey), witness_size: witness, other_sizes },
    })
}

/// Boundary of the coset tower of a chain with f(l) = 2^l.
pub fn chain_space(chain: &GroupChain) -> Result<FiniteMetricSpace> {
    let t = tower::group_chain_tower(chain, usize::MAX)?;
    let f = ScalingFunction::dyadic(t.level_count());
    Ok(t.boundary(&f)?.0.with_homogeneous_flag(true))
}

/// Verdicts of the untruncated product (Cantor set × countable discrete space × finitely supported
/// binary sequences) against the binary boundary model. A finite window cannot witness the bi failure.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceVerdicts {
    pub micro: bool,
    pub macro_: bool,
    pub bi: bool,
}

pub const DISCRETE_FACTOR_REFERENCE: ReferenceVerdicts = ReferenceVerdicts { micro: true, macro_: true, bi: false };

/// Truncated product: binary coordinates on low..=-1 and 1..=high with weights 2^i, and a
/// coordinate 0 ranging over `copies` values at mutual distance 1. Max metric.
pub fn discrete_factor_fixture(low: i64, copies: usize, high: i64) -> Result<(FiniteMetricSpace, ReferenceVerdicts)> {
    if low > -1 || high < 1 || copies == 0 {
        return invalid("fixture needs low ≤ −1, high ≥ 1 and at least one copy");
    }
    let bits = (high - low) as u32;
    if bits > 16 {
        return invalid("fixture too large");
    }
    let mut pts: Vec<(u64, usize)> = Vec::new();
    for k in 0..copies {
        for b in 0..(1u64 << bits) {
            pts.push((b, k));
        }
    }
    let coord = |b: u64, j: u32| (b >> j) & 1;
    let weight = |j: u32| {
        let i = low + j as i64;
        if i < 0 { i } else { i + 1 }
    };
    let ids = pts
        .iter()
        .map(|(b, k)| {
            let lo: String = (0..(-low) as u32).map(|j| char::from(b'0' + coord(*b, j) as u8)).collect();
            let hi: String = ((-low) as u32..bits).map(|j| char::from(b'0' + coord(*b, j) as u8)).collect();
            format!("{lo}|{k}|{hi}")
        })
        .collect();
    let space = FiniteMetricSpace::from_fn(ids, |x, y| {
        let ((bx, kx), (by, ky)) = (pts[x], pts[y]);
        let mut top: Option<i64> = if kx != ky { Some(0) } else { None };
        for j in 0..bits {
            if coord(bx, j) != coord(by, j) {
                top = Some(top.map_or(weight(j), |t| t.max(weight(j))));
            }
        }
        top.map_or_else(|| rational::int(0), rational::pow2)
    })?;
    Ok((space, DISCRETE_FACTOR_REFERENCE))
}

/// Window-grid ω values at the small end, as used by the end checks.
pub fn small_end_values(cert: &UniformityCertificate) -> (Extended, Extended) {
    (cert.rows[0].forward.clone(), cert.rows[0].inverse.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, parse_grid, ratio};

    fn line(n: i64) -> FiniteMetricSpace {
        FiniteMetricSpace::line_from_coords(&(0..=n).map(int).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn bicube_passes_every_mode() {
        let x = FiniteMetricSpace::bicube(-3, 3).unwrap();
        let g = parse_grid("dyadic:-3..3").unwrap();
        for mode in [Mode::Universal, Mode::Micro, Mode::Macro, Mode::Bi] {
            let v = characterization_check(&x, &g, mode).unwrap();
            assert!(v.pass, "{mode}: {v:?}");
        }
    }

    #[test]
    fn line_fails_macro() {
        let x = line(4);
        let g = parse_grid("1/2,1,2,4,8").unwrap();
        assert!(!characterization_check(&x, &g, Mode::Macro).unwrap().pass);
        assert!(characterization_check(&x, &g[..2], Mode::Macro).is_err());
    }

    #[test]
    fn schedules() {
        let x = FiniteMetricSpace::bicube(-2, 2).unwrap();
        let g = parse_grid("dyadic:-2..2").unwrap();
        let s = build_schedule(&x, &g, ScheduleKind::Macro, Some(0)).unwrap();
        assert_eq!((s.lambdas.clone(), s.ms.clone()), (vec![ratio(1, 4)], vec![0]));
        assert!(build_schedule(&x, &g, ScheduleKind::Macro, Some(1)).is_err());
        let b = build_schedule(&x, &g, ScheduleKind::Bi, None).unwrap();
        assert_eq!(b.lambdas, g);
        assert_eq!(b.ms, vec![-4, -3, -2, -1, 0]);
        assert!(audit_schedule(&x, &b, None).unwrap().pass);
    }

    #[test]
    fn bi_synthesis_on_bicube() {
        let x = FiniteMetricSpace::bicube(-2, 2).unwrap();
        let g = parse_grid("dyadic:-2..2").unwrap();
        let s = synthesize_bi(&x, &g, None, 100_000).unwrap();
        assert!(s.certificate.bi_equivalence, "{:?}", s.certificate);
        assert!(s.ends.small_end && s.ends.large_end);
        assert!(s.schedule_audit.pass && s.transport.pass);
    }

    #[test]
    fn macro_depth_zero() {
        let x = FiniteMetricSpace::bicube(-2, 2).unwrap();
        let g = parse_grid("dyadic:-2..2").unwrap();
        let s = synthesize_macro(&x, &g, 0, 100_000).unwrap();
        assert!(s.certificate.macro_equivalence);
        assert_eq!(s.relation.target().len(), 1);
    }

    #[test]
    fn profiles_and_chains() {
        let c = GroupChain::from_u64(&[1, 2, 6]).unwrap();
        let p = f_invariant(ProfileInput::Chain(&c)).unwrap();
        assert_eq!(p.to_string(), "{2:≥1, 3:≥1}");
        assert_eq!(zf_chain(&p, 0), c);
        assert_eq!(zf_chain(&PrimeProfile::default(), 5).orders, vec![BigUint::one()]);
        let inf = PrimeProfile { exponents: [(2, None)].into_iter().collect(), open_ended: false };
        assert_eq!(zf_chain(&inf, 3), GroupChain::from_u64(&[1, 2, 4, 8]).unwrap());
        let c8 = GroupChain::from_u64(&[1, 2, 4, 8]).unwrap();
        assert_eq!(f_invariant(ProfileInput::Chain(&c8)).unwrap().exponent(2), Some(3));
    }

    #[test]
    fn classification() {
        let a = GroupChain::from_u64(&[1, 2, 6]).unwrap();
        let b = GroupChain::from_u64(&[1, 6]).unwrap();
        match classify_pair(ProfileInput::Chain(&a), ProfileInput::Chain(&b), 1000).unwrap() {
            ClassifyVerdict::Equivalent { flags, .. } => assert!(flags.isomorphism),
            other => panic!("{other:?}"),
        }
        let c = GroupChain::from_u64(&[1, 2, 4]).unwrap();
        match classify_pair(ProfileInput::Chain(&c), ProfileInput::Chain(&a), 1000).unwrap() {
            ClassifyVerdict::Distinct { certificate, .. } => {
                assert_eq!(certificate.prime, 3);
                assert_eq!(certificate.witness_size, "6");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn universality_on_binary_boundary() {
        let x = FiniteMetricSpace::bicube(-2, 2).unwrap();
        let g = parse_grid("dyadic:-3..2").unwrap();
        let u = universality_embed(&x, &g, 100_000).unwrap();
        assert!(u.receiving_degrees.iter().all(|d| *d == BigUint::from(2u32)));
        assert!(u.flags.embedding && u.flags.isomorphism);
        assert!(u.relation.is_single_valued() && u.relation.is_surjective());
    }
}
