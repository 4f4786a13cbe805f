//! Command line frontend. Every subcommand reads module file formats and writes structured text.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_bigint::BigUint;
use serde_json::json;

use crate::error::{Error, Result};
use crate::key_lemma;
use crate::metric::{self, FiniteMetricSpace};
use crate::morphism;
use crate::multimap;
use crate::rational;
use crate::synthesis::{self, ClassifyVerdict, Mode, PrimeProfile, ProfileInput, ScheduleKind};
use crate::tower::{self, GroupChain, NodeRef, ScalingFunction, Tower};

pub const CUTOFF_ENV: &str = "COARSE_MATERIALIZE_CUTOFF";
pub const DEFAULT_CUTOFF: usize = 100_000;

#[derive(Parser, Debug)]
#[command(name = "cantor-coarse", version, about = "Coarse invariants of zero-dimensional metric spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// s-components of a space
    Components {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        scale: String,
        #[command(flatten)]
        out: Output,
    },
    /// θ and Θ at a pair of scales
    Capacity {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        delta: String,
        #[arg(long)]
        eps: String,
    },
    /// Dimension-zero report over a grid
    Report {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        grid: String,
        #[command(flatten)]
        out: Output,
    },
    /// Maximal separated subset and its largeness radius
    Net {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        sep: String,
        #[command(flatten)]
        out: Output,
    },
    /// Oscillation of a relation (or its inverse)
    Oscillation {
        #[arg(long)]
        relation: PathBuf,
        #[arg(long, conflicts_with = "grid")]
        delta: Option<String>,
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        inverse: bool,
        /// Print the full uniformity certificate on the grid
        #[arg(long, requires = "grid")]
        certificate: bool,
    },
    /// Build a tower file from a space, a group chain, or a degree list
    TowerBuild {
        #[command(flatten)]
        source: TowerSource,
        #[command(flatten)]
        out: Output,
    },
    /// Boundary ultrametric space of a tower
    TowerBoundary {
        #[arg(long)]
        tower: PathBuf,
        #[arg(long, default_value = "auto")]
        scaling: String,
        #[command(flatten)]
        out: Output,
    },
    /// Degree profile of a tower
    TowerDegrees {
        #[arg(long)]
        tower: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Embedding (or isomorphism) between two towers along a level map
    Embed {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        /// Comma-separated target level indices; identity by default
        #[arg(long)]
        level_map: Option<String>,
        #[arg(long)]
        iso: bool,
        #[command(flatten)]
        out: Output,
    },
    /// Classify a tower map and audit its boundary relation
    Immerse {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        map: PathBuf,
        #[arg(long, default_value = "auto")]
        source_scaling: String,
        #[arg(long, default_value = "auto")]
        target_scaling: String,
        #[command(flatten)]
        out: Output,
    },
    /// Extract an immersion from a relation between two tower boundaries
    Extract {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        relation: PathBuf,
        #[arg(long)]
        length: usize,
        #[arg(long, default_value = "auto")]
        source_scaling: String,
        #[arg(long, default_value = "auto")]
        target_scaling: String,
        #[command(flatten)]
        out: Output,
    },
    /// Main immersion (or a single plateau placement) between counted towers
    Keylemma {
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        depth: usize,
        /// Node name to anchor the branch at
        #[arg(long)]
        anchor: Option<String>,
        /// Comma-separated sibling node names to place instead of the main branch
        #[arg(long, conflicts_with = "anchor")]
        plateau: Option<String>,
        /// Only evaluate the degree hypotheses
        #[arg(long)]
        hypotheses_only: bool,
        #[command(flatten)]
        out: Output,
        #[arg(long)]
        audit: Option<PathBuf>,
    },
    /// Certified equivalence to a binary boundary (or between two spaces)
    Synthesize {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        grid: String,
        #[arg(long)]
        mode: Mode,
        #[arg(long)]
        depth: Option<usize>,
        /// Second space for the two-space micro pipeline
        #[arg(long, requires = "other_grid")]
        other: Option<PathBuf>,
        #[arg(long)]
        other_grid: Option<String>,
        /// Only build and audit the schedule
        #[arg(long)]
        schedule_only: bool,
        #[command(flatten)]
        out: Output,
        #[arg(long)]
        certificate: Option<PathBuf>,
        #[arg(long)]
        audit: Option<PathBuf>,
    },
    /// Window-relative characterization conditions
    Check {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        mode: Mode,
        #[arg(long)]
        grid: String,
        #[command(flatten)]
        out: Output,
    },
    /// Compare prime profiles of two homogeneous inputs
    Classify {
        #[arg(long)]
        chain: Vec<PathBuf>,
        #[arg(long)]
        space: Vec<PathBuf>,
        #[arg(long)]
        grid: Option<String>,
        /// Where to write the witness tower map
        #[arg(long)]
        witness: Option<PathBuf>,
        #[command(flatten)]
        out: Output,
    },
    /// Prime profile and its normalized chain
    Zf {
        /// e.g. "2:1,3:inf"
        #[arg(long)]
        profile: Option<String>,
        #[arg(long)]
        chain: Option<PathBuf>,
        #[arg(long)]
        space: Option<PathBuf>,
        #[arg(long)]
        grid: Option<String>,
        #[arg(long, default_value_t = 3)]
        cutoff: u64,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Args, Debug)]
pub struct Output {
    /// Write the main result here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TowerSource {
    /// Canonical tower of a space over --levels
    #[arg(long, requires = "levels")]
    space: Option<PathBuf>,
    #[arg(long)]
    levels: Option<String>,
    /// Coset tower of a group chain
    #[arg(long)]
    chain: Option<PathBuf>,
    /// Homogeneous tower with these comma-separated step degrees
    #[arg(long)]
    degrees: Option<String>,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn load_space(path: &Path) -> Result<FiniteMetricSpace> {
    metric::space_from_json(&read(path)?)
}

fn load_tower(path: &Path) -> Result<Tower> {
    tower::tower_from_json(&read(path)?)
}

fn load_chain(path: &Path) -> Result<GroupChain> {
    tower::chain_from_json(&read(path)?)
}

fn pretty<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

/// Materialization cutoff from the environment, or the default.
pub fn cutoff() -> Result<usize> {
    match std::env::var(CUTOFF_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| Error::Parse(format!("{CUTOFF_ENV} must be a nonnegative integer, got {v:?}"))),
        Err(_) => Ok(DEFAULT_CUTOFF),
    }
}

fn scaling(spec: &str, t: &Tower) -> Result<ScalingFunction> {
    match spec {
        "labels" => ScalingFunction::labels(t),
        "auto" => ScalingFunction::labels(t).or_else(|_| Ok(ScalingFunction::dyadic(t.level_count()))),
        "dyadic" => Ok(ScalingFunction::dyadic(t.level_count())),
        other => ScalingFunction::new(rational::parse_grid(other)?),
    }
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|s| s.trim().parse().map_err(|_| Error::Parse(format!("bad {what} {s:?}"))))
        .collect()
}

fn parse_profile(text: &str) -> Result<PrimeProfile> {
    let mut p = PrimeProfile::default();
    for entry in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (prime, exp) = entry.split_once(':').ok_or_else(|| Error::Parse(format!("profile entry {entry:?} needs p:e")))?;
        let prime: u64 = prime.trim().parse().map_err(|_| Error::Parse(format!("bad prime {prime:?}")))?;
        if prime < 2 || !num_prime::nt_funcs::is_prime64(prime) {
            return Err(Error::Invalid(format!("{prime} is not prime")));
        }
        let exp = match exp.trim() {
            "inf" | "∞" => None,
            e => Some(e.parse().map_err(|_| Error::Parse(format!("bad exponent {e:?}")))?),
        };
        p.exponents.insert(prime, exp);
    }
    Ok(p)
}

fn find_node(t: &Tower, name: &str) -> Result<NodeRef> {
    t.find(name).ok_or_else(|| Error::Invalid(format!("no node named {name:?}")))
}

/// Result text plus whether every requested verdict passed.
struct Outcome {
    text: String,
    pass: bool,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Self { text, pass: true }
    }
}

fn emit(out: &Output, outcome: Outcome, stdout: &mut dyn Write, summary: Option<String>) -> Result<bool> {
    match &out.out {
        Some(path) => {
            write_file(path, &outcome.text)?;
            if let Some(s) = summary {
                writeln!(stdout, "{s}").map_err(|e| Error::Io(e.to_string()))?;
            }
        }
        None => writeln!(stdout, "{}", outcome.text).map_err(|e| Error::Io(e.to_string()))?,
    }
    Ok(outcome.pass)
}

fn say(stdout: &mut dyn Write, text: impl AsRef<str>) -> Result<()> {
    writeln!(stdout, "{}", text.as_ref()).map_err(|e| Error::Io(e.to_string()))
}

fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<bool> {
    match cli.command {
        Command::Components { space, scale, out } => {
            let x = load_space(&space)?;
            let s = rational::parse_rational(&scale)?;
            let p = metric::components(&x, &s)?;
            let blocks: Vec<Vec<&str>> = p.blocks.iter().map(|b| b.iter().map(|&i| x.id(i)).collect()).collect();
            let text = pretty(&json!({
                "scale": s.to_string(),
                "count": p.len(),
                "mesh": metric::mesh(&x, &p).to_string(),
                "blocks": blocks,
            }));
            emit(&out, Outcome::ok(text), stdout, Some(format!("{} components", p.len())))
        }
        Command::Capacity { space, delta, eps } => {
            let x = load_space(&space)?;
            let (t, big) = metric::capacity(&x, &rational::parse_rational(&delta)?, &rational::parse_rational(&eps)?)?;
            say(stdout, format!("θ={t} Θ={big}"))?;
            Ok(true)
        }
        Command::Report { space, grid, out } => {
            let x = load_space(&space)?;
            let r = metric::dimension_zero_report(&x, &rational::parse_grid(&grid)?)?;
            let summary = format!("macro witnessed: {}, micro witnessed: {}", r.macro_witnessed_on_window, r.micro_witnessed_on_window);
            emit(&out, Outcome::ok(pretty(&r)), stdout, Some(summary))
        }
        Command::Net { space, sep, out } => {
            let x = load_space(&space)?;
            let net = metric::separated_net(&x, &rational::parse_rational(&sep)?)?;
            let radius = metric::largeness_radius(&x, &net)?;
            let ids: Vec<&str> = net.iter().map(|&i| x.id(i)).collect();
            let text = pretty(&json!({ "net": ids, "largeness_radius": radius.to_string() }));
            emit(&out, Outcome::ok(text), stdout, Some(format!("{} points, largeness radius {radius}", net.len())))
        }
        Command::Oscillation { relation, delta, grid, inverse, certificate } => {
            let phi = multimap::relation_from_json(&read(&relation)?)?;
            let phi = if inverse { phi.invert() } else { phi };
            match (delta, grid) {
                (Some(d), None) => {
                    let d = rational::parse_rational(&d)?;
                    say(stdout, format!("ω({d})={}", multimap::oscillation(&phi, &d)?))?;
                    Ok(true)
                }
                (None, Some(g)) => {
                    let g = rational::parse_grid(&g)?;
                    if certificate {
                        let c = multimap::uniformity_certificate(&phi, &g)?;
                        say(stdout, pretty(&c))?;
                        return Ok(true);
                    }
                    for d in &g {
                        say(stdout, format!("ω({d})={}", multimap::oscillation(&phi, d)?))?;
                    }
                    Ok(true)
                }
                _ => Err(Error::Invalid("give --delta or --grid".into())),
            }
        }
        Command::TowerBuild { source, out } => {
            let t = match (source.space, source.chain, source.degrees) {
                (Some(space), None, None) => {
                    let x = load_space(&space)?;
                    let levels = rational::parse_grid(source.levels.as_deref().unwrap_or_default())?;
                    tower::canonical_tower(&x, &levels)?.0
                }
                (None, Some(chain), None) => tower::group_chain_tower(&load_chain(&chain)?, cutoff()?)?,
                (None, None, Some(degrees)) => {
                    let d: Vec<BigUint> = parse_list(&degrees, "degree")?;
                    let labels = match source.levels.as_deref() {
                        Some(g) => rational::parse_grid(g)?,
                        None => Tower::integer_labels(d.len() + 1),
                    };
                    Tower::homogeneous(labels, &d, cutoff()?)?
                }
                _ => return Err(Error::Invalid("give exactly one of --space, --chain, --degrees".into())),
            };
            let summary = format!("{} levels, {} explicit nodes, counted: {}", t.level_count(), t.node_count(), t.is_counted());
            emit(&out, Outcome::ok(tower::tower_to_json(&t)), stdout, Some(summary))
        }
        Command::TowerBoundary { tower: path, scaling: spec, out } => {
            let t = load_tower(&path)?;
            let f = scaling(&spec, &t)?;
            let (space, _) = t.boundary(&f)?;
            let summary = format!("{} boundary points", space.len());
            emit(&out, Outcome::ok(metric::space_to_json(&space)), stdout, Some(summary))
        }
        Command::TowerDegrees { tower: path, out } => {
            let t = load_tower(&path)?;
            let prof = t.degree_profile();
            emit(&out, Outcome::ok(pretty(&prof.to_file())), stdout, Some(format!("homogeneous: {}", prof.is_homogeneous())))
        }
        Command::Embed { source, target, level_map, iso, out } => {
            let (s, t) = (load_tower(&source)?, load_tower(&target)?);
            let lm: Vec<usize> = match level_map {
                Some(m) => parse_list(&m, "level index")?,
                None => (0..s.level_count()).collect(),
            };
            let phi = morphism::build_embedding(&s, &t, &lm, iso)?;
            let flags = morphism::classify_map(&s, &t, &phi)?;
            let pass = flags.embedding && (!iso || flags.isomorphism);
            let text = morphism::tower_map_to_json(&s, &t, &phi, &source.display().to_string(), &target.display().to_string());
            emit(&out, Outcome { text, pass }, stdout, Some(pretty(&flags)))
        }
        Command::Immerse { source, target, map, source_scaling, target_scaling, out } => {
            let (s, t) = (load_tower(&source)?, load_tower(&target)?);
            let phi = morphism::tower_map_from_json(&read(&map)?, &s, &t)?;
            let report = morphism::check_boundary_properties(&s, &t, &phi, &scaling(&source_scaling, &s)?, &scaling(&target_scaling, &t)?)?;
            let pass = report.flags.immersion && report.inverse_bound_holds.unwrap_or(false);
            emit(&out, Outcome { text: pretty(&report), pass }, stdout, Some(format!("immersion: {pass}")))
        }
        Command::Extract { source, target, relation, length, source_scaling, target_scaling, out } => {
            let (s, t) = (load_tower(&source)?, load_tower(&target)?);
            let phi = multimap::relation_from_json(&read(&relation)?)?;
            let (fs, ft) = (scaling(&source_scaling, &s)?, scaling(&target_scaling, &t)?);
            let ex = morphism::extract_immersion(&s, &t, &phi, &fs, &ft, length)?;
            let flags = morphism::classify_map(&ex.source_window, &ex.target_window, &ex.map)?;
            let round_trip = ex.round_trip_holds(&s, &t, &phi, &fs, &ft)?;
            let map: serde_json::Value =
                serde_json::from_str(&morphism::tower_map_to_json(&ex.source_window, &ex.target_window, &ex.map, "source window", "target window"))
                    .expect("valid json");
            let text = pretty(&json!({
                "source_levels": ex.source_levels.iter().map(|&l| s.labels()[l].to_string()).collect::<Vec<_>>(),
                "target_levels": ex.target_levels.iter().map(|&l| t.labels()[l].to_string()).collect::<Vec<_>>(),
                "flags": flags,
                "round_trip": round_trip,
                "map": map,
            }));
            emit(&out, Outcome { text, pass: flags.immersion && round_trip }, stdout, Some(format!("immersion: {}", flags.immersion)))
        }
        Command::Keylemma { base, target, depth, anchor, plateau, hypotheses_only, out, audit } => {
            let (t, h) = (load_tower(&base)?, load_tower(&target)?);
            if hypotheses_only {
                let r = key_lemma::check_hypotheses(&t, &h, depth)?;
                let pass = r.pass;
                return emit(&out, Outcome { text: pretty(&r), pass }, stdout, Some(format!("hypotheses: {pass}")));
            }
            if let Some(names) = plateau {
                let nodes: Vec<NodeRef> = names.split(',').map(|n| find_node(&t, n.trim())).collect::<Result<_>>()?;
                let (placements, root, log) = key_lemma::admissible_immersion(&t, &h, &nodes)?;
                if let Some(p) = &audit {
                    write_file(p, &log.to_text())?;
                }
                let text = pretty(&json!({
                    "plateau": names,
                    "placements": placements.len(),
                    "root_level": placements[root].level,
                    "root_items": placements[root].plans.len(),
                    "audit": log,
                }));
                let pass = log.all_pass();
                return emit(&out, Outcome { text, pass }, stdout, Some(format!("placed {} nodes, audit pass: {pass}", nodes.len())));
            }
            let anchor = anchor.map(|a| find_node(&t, &a)).transpose()?;
            let im = key_lemma::main_immersion(&t, &h, depth, anchor)?;
            let verdict = im.verify(&t);
            if let Some(p) = &audit {
                write_file(p, &im.audit.to_text())?;
            }
            let pass = verdict.immersion && verdict.surjective_by_counts && im.audit.all_pass();
            let summary = format!("immersion: {}, surjective by counts: {}, image counts: {}", verdict.immersion, verdict.surjective_by_counts, verdict.image_counts.join(" "));
            emit(&out, Outcome { text: im.to_json(&t), pass }, stdout, Some(summary))
        }
        Command::Synthesize { space, grid, mode, depth, other, other_grid, schedule_only, out, certificate, audit } => {
            let x = load_space(&space)?;
            let g = rational::parse_grid(&grid)?;
            if mode == Mode::Universal {
                let u = synthesis::universality_embed(&x, &g, cutoff()?)?;
                if let Some(p) = &certificate {
                    write_file(p, &pretty(&u.certificate))?;
                }
                if let Some(p) = &audit {
                    let text = pretty(&json!({
                        "levels": u.levels.iter().map(|l| l.to_string()).collect::<Vec<_>>(),
                        "receiving_degrees": u.receiving_degrees.iter().map(|d| d.to_string()).collect::<Vec<_>>(),
                        "flags": u.flags,
                    }));
                    write_file(p, &text)?;
                }
                let pass = u.flags.embedding && u.certificate.forward.bi && u.certificate.total;
                let summary = format!("embedding: {}, certificate forward bi: {}", u.flags.embedding, u.certificate.forward.bi);
                return emit(&out, Outcome { text: multimap::relation_to_json(&u.relation), pass }, stdout, Some(summary));
            }
            let y = other.as_deref().map(load_space).transpose()?;
            let gy = other_grid.as_deref().map(rational::parse_grid).transpose()?;
            if schedule_only {
                let sched = match (&y, &gy) {
                    (Some(y), Some(gy)) => synthesis::build_two_space_schedule(&x, &g, y, gy, depth)?,
                    _ => {
                        let kind = if mode == Mode::Macro { ScheduleKind::Macro } else { ScheduleKind::Bi };
                        synthesis::build_schedule(&x, &g, kind, depth)?
                    }
                };
                let a = synthesis::audit_schedule(&x, &sched, y.as_ref())?;
                let pass = a.pass;
                let text = pretty(&json!({ "schedule": sched, "audit": a }));
                return emit(&out, Outcome { text, pass }, stdout, Some(format!("schedule audit: {pass}")));
            }
            let s = match (mode, &y, &gy) {
                (Mode::Macro, _, _) => synthesis::synthesize_macro(&x, &g, depth.unwrap_or(0), cutoff()?)?,
                (Mode::Bi, _, _) => synthesis::synthesize_bi(&x, &g, depth, cutoff()?)?,
                (Mode::Micro, Some(y), Some(gy)) => synthesis::synthesize_two_space(&x, &g, y, gy, depth)?,
                (Mode::Micro, _, _) => synthesis::synthesize_bi(&x, &g, depth, cutoff()?)?,
                (Mode::Universal, _, _) => unreachable!(),
            };
            if let Some(p) = &certificate {
                write_file(p, &pretty(&s.certificate))?;
            }
            if let Some(p) = &audit {
                write_file(p, &s.audit_json())?;
            }
            let cert_ok = match mode {
                Mode::Macro => s.certificate.macro_equivalence,
                Mode::Bi => s.certificate.bi_equivalence,
                _ => s.certificate.micro_equivalence,
            };
            let pass = cert_ok && s.schedule_audit.pass && s.ends.large_end && (mode == Mode::Macro || s.ends.small_end) && s.transport.pass;
            let summary = format!(
                "certificate: {cert_ok}, schedule audit: {}, ends: small {} large {}, transport {}/{} checked",
                s.schedule_audit.pass, s.ends.small_end, s.ends.large_end, s.transport.checked, s.transport.checked + s.transport.skipped
            );
            emit(&out, Outcome { text: multimap::relation_to_json(&s.relation), pass }, stdout, Some(summary))
        }
        Command::Check { space, mode, grid, out } => {
            let x = load_space(&space)?;
            let v = synthesis::characterization_check(&x, &rational::parse_grid(&grid)?, mode)?;
            let mut lines = vec![format!("{} (window-relative): {}", v.mode, if v.pass { "pass" } else { "fail" })];
            for c in &v.conditions {
                lines.push(format!("  {} {}: {}", if c.pass { "pass" } else { "FAIL" }, c.name, c.witness));
            }
            let pass = v.pass;
            say(stdout, lines.join("\n"))?;
            if let Some(p) = &out.out {
                write_file(p, &pretty(&v))?;
            }
            Ok(pass)
        }
        Command::Classify { chain, space, grid, witness, out } => {
            let g = grid.as_deref().map(rational::parse_grid).transpose()?;
            let chains: Vec<GroupChain> = chain.iter().map(|p| load_chain(p)).collect::<Result<_>>()?;
            let spaces: Vec<FiniteMetricSpace> = space.iter().map(|p| load_space(p)).collect::<Result<_>>()?;
            if chains.len() + spaces.len() != 2 {
                return Err(Error::Invalid("classify takes exactly two inputs".into()));
            }
            if !spaces.is_empty() && g.is_none() {
                return Err(Error::Invalid("space inputs need --grid".into()));
            }
            let gs = g.unwrap_or_default();
            let mut inputs: Vec<ProfileInput> = chains.iter().map(ProfileInput::Chain).collect();
            inputs.extend(spaces.iter().map(|s| ProfileInput::Space(s, &gs)));
            let verdict = synthesis::classify_pair(inputs[0], inputs[1], cutoff()?)?;
            let text = match verdict {
                ClassifyVerdict::Equivalent { profile, chain, source, target, map, flags } => {
                    say(stdout, format!("equivalent (window evidence): profile {profile}"))?;
                    if let Some(p) = &witness {
                        write_file(p, &morphism::tower_map_to_json(&source, &target, &map, "first", "second"))?;
                    }
                    pretty(&json!({
                        "verdict": "equivalent",
                        "profile": profile.to_string(),
                        "normalized_chain": chain.orders.iter().map(|o| o.to_string()).collect::<Vec<_>>(),
                        "witness_flags": flags,
                    }))
                }
                ClassifyVerdict::Distinct { x, y, certificate } => {
                    say(stdout, format!("distinct: profiles {x} vs {y}, witness prime {}", certificate.prime))?;
                    pretty(&json!({
                        "verdict": "distinct",
                        "profiles": [x.to_string(), y.to_string()],
                        "certificate": certificate,
                    }))
                }
            };
            if let Some(p) = &out.out {
                write_file(p, &text)?;
            }
            Ok(true)
        }
        Command::Zf { profile, chain, space, grid, cutoff: c, out } => {
            let p = match (profile, chain, space) {
                (Some(text), None, None) => parse_profile(&text)?,
                (None, Some(path), None) => synthesis::f_invariant(ProfileInput::Chain(&load_chain(&path)?))?,
                (None, None, Some(path)) => {
                    let x = load_space(&path)?;
                    let g = rational::parse_grid(grid.as_deref().ok_or_else(|| Error::Invalid("space input needs --grid".into()))?)?;
                    synthesis::f_invariant(ProfileInput::Space(&x, &g))?
                }
                _ => return Err(Error::Invalid("give exactly one of --profile, --chain, --space".into())),
            };
            let chain = synthesis::zf_chain(&p, c);
            say(stdout, format!("profile {p}"))?;
            emit(&out, Outcome::ok(chain.to_json()), stdout, None)
        }
    }
}

/// Runs one invocation; returns the process exit code. Diagnostics go to `stderr` as one JSON line.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if code == 0 { write!(stdout, "{e}") } else { write!(stderr, "{e}") };
            return code;
        }
    };
    match execute(cli, stdout) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            let kind = match &e {
                Error::Parse(_) => "parse",
                Error::Invalid(_) => "invalid",
                Error::Precondition(_) => "precondition",
                Error::Construction(_) => "construction",
                Error::Io(_) => "io",
            };
            let line = json!({ "error": kind, "code": e.exit_code(), "message": e.to_string() });
            let _ = writeln!(stderr, "{line}");
            e.exit_code()
        }
    }
}
