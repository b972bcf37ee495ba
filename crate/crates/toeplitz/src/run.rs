//! Command implementations. Each returns a JSON report plus named file
//! artifacts; nothing here touches the filesystem.

use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;
use toeplitz_core::expansion::CarryRange;
use toeplitz_core::fiber::{
    birkhoff_stats, critical_point, domain_similarity, enumerate_fiber, similarity_classes, FiberLabel,
    SimilarityReport,
};
use toeplitz_core::model_set::{domain_patch, emit_patch, regularity};
use toeplitz_core::odometer::sample_point;
use toeplitz_core::window::{
    boundary_measure, build_k, build_ktilde, build_perf, check_genericity, check_irredundancy,
    check_self_similarity, vanhove_boundary, BuildError, Built, DigitClass, PerfParams, SpecError,
};
use toeplitz_core::{
    ChainError, ChainGroup, DomainError, DomainSequence, GroupKind, Heisenberg, Integers, OdometerPoint, Plane,
    Rational, Window, WindowKind,
};

use crate::config::{ConfigError, RunConfig, XiChoice};
use crate::format::{FormatError, WindowFile};
use crate::patch_io::{write_jsonl, write_pgm};

/// Enumeration budget for the element-wise genericity scan.
pub const GENERICITY_BUDGET: u64 = 1 << 22;
/// Largest `#D_n` for which the van Hove diagnostic is enumerated.
pub const VANHOVE_BUDGET: u64 = 1 << 18;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("{0}")]
    Chain(#[from] ChainError),
    #[error("{0}")]
    Domain(#[from] DomainError),
    #[error("{0}")]
    Spec(#[from] SpecError),
    #[error("{0}")]
    Unsupported(String),
}

/// Command-line values that override the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub cap: Option<usize>,
    pub seed: Option<u64>,
    pub patch_level: Option<usize>,
    pub mode: Option<String>,
    pub strict_e_rule: bool,
}

impl Overrides {
    pub fn apply(&self, config: &mut RunConfig) -> Result<(), ConfigError> {
        if let Some(cap) = self.cap {
            config.window.cap = cap;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(level) = self.patch_level {
            config.patch.level = Some(level);
        }
        if let Some(mode) = &self.mode {
            config.window.kind = mode.clone();
        }
        if self.strict_e_rule {
            config.window.e_rule = "single".into();
        }
        config.validate()
    }
}

/// What a command produced.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub report: Value,
    pub files: Vec<(String, Vec<u8>)>,
    /// False when a verification criterion failed.
    pub pass: bool,
}

pub fn rational_json(r: &Rational) -> Value {
    json!({ "num": r.numer().to_string(), "den": r.denom().to_string() })
}

macro_rules! with_group {
    ($kind:expr, $moduli:expr, |$g:ident| $body:expr) => {
        match $kind {
            GroupKind::Lattice(1) => {
                let $g = Integers::new($moduli)?;
                $body
            }
            GroupKind::Lattice(2) => {
                let $g = Plane::new($moduli)?;
                $body
            }
            GroupKind::Heisenberg => {
                let $g = Heisenberg::new($moduli)?;
                $body
            }
            other => Err(RunError::Unsupported(format!("no chain for {}", other.name()))),
        }
    };
}

/// The perfect window and the configured variant.
struct Session<G: ChainGroup> {
    built: Built<G>,
    window: Window,
}

fn session<G: ChainGroup>(config: &RunConfig, raw: &G) -> Result<Session<G>, RunError> {
    let params = PerfParams {
        epsilon: config.epsilon()?,
        a: config.window.a.clone(),
        cap: config.window.cap,
        telescope: config.window.telescope,
    };
    let built = build_perf(raw, &params)?;
    let window = variant(&built.window, config)?;
    Ok(Session { built, window })
}

fn variant(perf: &Window, config: &RunConfig) -> Result<Window, RunError> {
    let l = config.window.partition_level;
    Ok(match config.window_kind()? {
        WindowKind::Perf => perf.clone(),
        WindowKind::K(k) => build_k(perf, k, l)?,
        WindowKind::KTilde(k) => build_ktilde(&build_k(perf, k, l)?, config.e_rule()?)?,
    })
}

pub fn build(config: &RunConfig) -> Result<Outcome, RunError> {
    with_group!(config.group_kind()?, config.moduli()?, |g| build_with(config, &g))
}

fn build_with<G: ChainGroup>(config: &RunConfig, raw: &G) -> Result<Outcome, RunError> {
    let s = session(config, raw)?;
    let ds = &s.built.domains;
    let spec = s.window.spec();
    let mut levels = Vec::new();
    for (n, r) in (1..=spec.cap()).zip(&s.built.levels) {
        let census = s.window.census(n);
        let vanhove = (ds.size(n) <= VANHOVE_BUDGET).then(|| {
            let k_inv: Vec<G::Elem> = s.built.carries.set(n).map(|k| ds.group().inv(k)).collect();
            let count = vanhove_boundary(ds, &k_inv, n).len();
            rational_json(&Rational::new(count as i128, ds.size(n) as i128))
        });
        levels.push(json!({
            "level": n,
            "modulus": r.modulus,
            "raw_levels_merged": r.raw_levels,
            "transversal": r.transversal,
            "A": spec.count(n, DigitClass::A),
            "B": spec.count(n, DigitClass::B),
            "C": spec.count(n, DigitClass::C),
            "carry_range": r.carry_range,
            "vanhove_boundary_in_transversal": r.boundary,
            "vanhove_ratio": vanhove,
            "pending": census.pending,
            "pending_by_class": census.pending_by_class,
            "boundary_measure": rational_json(&s.window.pending_measure(n)),
        }));
    }
    let eps = spec.epsilon;
    let report = json!({
        "command": "build",
        "group": ds.group().kind().name(),
        "kind": kind_name(spec.kind),
        "epsilon": rational_json(&eps),
        "cap": spec.cap(),
        "levels": levels,
        "boundary_measure_at_cap": rational_json(&s.window.pending_measure(spec.cap())),
        "meets_one_minus_epsilon": s.window.pending_measure(spec.cap()) >= Rational::from_integer(1) - eps,
    });
    let text = WindowFile::from_built(ds, spec).render();
    Ok(Outcome { report, files: vec![("window.txt".into(), text.into_bytes())], pass: true })
}

fn kind_name(kind: WindowKind) -> String {
    match kind {
        WindowKind::Perf => "perf".into(),
        WindowKind::K(k) => format!("k{k}"),
        WindowKind::KTilde(k) => format!("ktilde{k}"),
    }
}

/// Parses a window file, rebuilds its domains and runs every check.
pub fn verify(text: &str) -> Result<Outcome, RunError> {
    let file = WindowFile::parse(text)?;
    with_group!(file.group, file.moduli.clone(), |g| verify_with(&file, g))
}

fn verify_with<G: ChainGroup>(file: &WindowFile, group: G) -> Result<Outcome, RunError> {
    let cap = file.spec.cap();
    let ds = DomainSequence::build(group, cap)?;
    for n in 1..=cap {
        let coords: Vec<Vec<i64>> = ds.transversal(n).iter().map(|t| ds.group().coordinates(t)).collect();
        if coords != file.transversals[n - 1] {
            return Err(RunError::Unsupported(format!(
                "level {n}: the stored transversal is not the canonical one for this chain"
            )));
        }
    }
    let window = Window::new(file.spec.clone())?;
    let carries = ds.carry_ranges(cap);
    Ok(verify_window(&window, &ds, &carries))
}

/// The four window criteria plus the boundary-measure identity.
pub fn verify_window<G: ChainGroup>(window: &Window, ds: &DomainSequence<G>, carries: &CarryRange<G::Elem>) -> Outcome {
    let grp = ds.group();
    let coords = |e: &G::Elem| grp.coordinates(e);
    let spec = window.spec();
    let structure: Vec<usize> = (1..=spec.cap())
        .filter(|&n| {
            spec.count(n, DigitClass::B) != 1 || spec.count(n, DigitClass::A) < 2 || spec.count(n, DigitClass::C) == 0
        })
        .collect();

    let generic = check_genericity(window, ds, GENERICITY_BUDGET);
    let irredundant = check_irredundancy(window);
    let similar = check_self_similarity(window, ds, carries);
    let measure: Vec<Value> = (0..=spec.cap())
        .map(|n| match boundary_measure(window, n) {
            Ok(r) => json!({ "level": n, "measure": rational_json(&r) }),
            Err(e) => json!({ "level": n, "error": e.to_string() }),
        })
        .collect();
    let measure_ok = (0..=spec.cap()).all(|n| boundary_measure(window, n).is_ok());

    let failing_level = irredundant.levels.iter().find(|l| l.witness.is_none()).map(|l| l.level);
    let report = json!({
        "command": "verify",
        "kind": kind_name(spec.kind),
        "cap": spec.cap(),
        "partition": { "pass": structure.is_empty(), "failing_levels": structure },
        "genericity": {
            "pass": generic.pass,
            "identity_in_c": generic.identity_in_c,
            "identity_witness": generic.identity_witness,
            "element_witness": generic.element_witness,
            "checked": generic.checked,
            "exhaustive": generic.exhaustive,
        },
        "irredundancy": {
            "pass": irredundant.pass,
            "failing_level": failing_level,
            "witnesses": irredundant.levels.iter().map(|l| json!({
                "level": l.level, "cylinder": l.witness, "in_last_class": l.in_last_class,
            })).collect::<Vec<_>>(),
        },
        "self_similarity": {
            "pass": similar.pass,
            "witness": similar.failure.as_ref().map(|(n, k, c)| json!({
                "level": n, "carry": coords(k), "digit": coords(c),
            })),
        },
        "boundary_measure": { "pass": measure_ok, "levels": measure },
    });
    let pass = structure.is_empty() && generic.pass && irredundant.pass && similar.pass && measure_ok;
    Outcome { report, files: Vec::new(), pass }
}

fn patch_elements<G: ChainGroup>(config: &RunConfig, ds: &DomainSequence<G>) -> Result<Vec<G::Elem>, RunError> {
    match &config.patch.elements {
        Some(list) => list
            .iter()
            .map(|c| {
                ds.group()
                    .from_coordinates(c)
                    .ok_or_else(|| RunError::Unsupported(format!("{c:?} is not an element of the group")))
            })
            .collect(),
        None => Ok(domain_patch(ds, config.patch_level())),
    }
}

fn choose_xi<G: ChainGroup>(config: &RunConfig, window: &Window, ds: &DomainSequence<G>) -> Result<OdometerPoint, RunError> {
    let cap = window.cap();
    Ok(match config.xi()? {
        XiChoice::Identity => OdometerPoint::identity(cap),
        XiChoice::Critical => critical_point(window.spec(), Some(config.seed)),
        XiChoice::Random => sample_point(ds, config.seed, cap),
    })
}

pub fn emit(config: &RunConfig) -> Result<Outcome, RunError> {
    with_group!(config.group_kind()?, config.moduli()?, |g| emit_with(config, &g))
}

fn emit_with<G: ChainGroup>(config: &RunConfig, raw: &G) -> Result<Outcome, RunError> {
    let s = session(config, raw)?;
    let ds = &s.built.domains;
    let xi = choose_xi(config, &s.window, ds)?;
    let patch = emit_patch(&s.window, ds, &xi, &patch_elements(config, ds)?);
    let mut lines = Vec::new();
    write_jsonl(ds.group(), &patch, &mut lines).expect("writing to memory");
    let report = json!({
        "command": "emit",
        "xi": xi.digits(),
        "level": patch.level,
        "elements": patch.entries.len(),
        "undecided": patch.undecided(),
    });
    Ok(Outcome { report, files: vec![("patch.jsonl".into(), lines)], pass: true })
}

pub fn render(config: &RunConfig) -> Result<Outcome, RunError> {
    if config.group_kind()? != GroupKind::Lattice(2) {
        return Err(RunError::Unsupported("render needs group Z2".into()));
    }
    if config.patch.elements.is_some() {
        return Err(RunError::Unsupported("render draws the box D_m; drop patch.elements".into()));
    }
    let s = session(config, &Plane::new(config.moduli()?)?)?;
    let ds = &s.built.domains;
    let xi = choose_xi(config, &s.window, ds)?;
    let m = config.patch_level();
    let patch = emit_patch(&s.window, ds, &xi, &domain_patch(ds, m));
    let side = ds.group().modulus(m) as usize;
    let mut image = Vec::new();
    write_pgm(&patch, side, &mut image).expect("D_m is the box [0, m)²");
    let report = json!({ "command": "render", "width": side, "height": side, "undecided": patch.undecided() });
    Ok(Outcome { report, files: vec![("patch.pgm".into(), image)], pass: true })
}

/// Similarity classes and fiber candidates at `ξ`, plus class coverage over
/// Haar-sampled points for every patch `D_m` from the partition level up.
pub fn fiber(config: &RunConfig) -> Result<Outcome, RunError> {
    with_group!(config.group_kind()?, config.moduli()?, |g| fiber_with(config, &g))
}

fn fiber_with<G: ChainGroup>(config: &RunConfig, raw: &G) -> Result<Outcome, RunError> {
    let s = session(config, raw)?;
    let ds = &s.built.domains;
    let grp = ds.group();
    let xi = choose_xi(config, &s.window, ds)?;
    let (report, patch_size) = match config.patch.elements {
        Some(_) => {
            let patch = patch_elements(config, ds)?;
            (similarity_classes(&s.window, ds, &xi, &patch), patch.len() as u64)
        }
        None => {
            let m = config.patch_level();
            (domain_similarity(&s.window, ds, &xi, m), ds.size(m))
        }
    };
    let fiber = enumerate_fiber(report);
    let classes: Vec<Value> = (1..=fiber.report.k())
        .map(|j| json!(fiber.report.class_elements(j).iter().map(|e| grp.coordinates(e)).collect::<Vec<_>>()))
        .collect();
    let candidates: Vec<Value> = fiber
        .labels
        .iter()
        .enumerate()
        .map(|(index, labels)| {
            let names: Vec<String> = labels
                .iter()
                .map(|l| match l {
                    FiberLabel::Level(j) => format!("x_{j}"),
                    FiberLabel::Dropped(i) => format!("x~_{:?}", grp.coordinates(&fiber.report.hitters[*i].element)),
                })
                .collect();
            json!({ "labels": names, "ones_on_hitters": fiber.ones(index) })
        })
        .collect();

    // Coverage of the full window by nested patches D_m: one similarity pass
    // at the cap per sample, restricted to each D_m, so counts grow with m.
    let cap = s.window.cap();
    let first = s.window.spec().partition_level.max(1);
    let samples = config.patch.samples;
    let per_sample: Vec<Vec<bool>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let xi = sample_point(ds, config.seed.wrapping_add(i), cap);
            let all = domain_similarity(&s.window, ds, &xi, cap);
            (first..=cap)
                .map(|m| {
                    let hitters = all.hitters.iter().filter(|h| ds.contains(&h.element, m)).cloned().collect();
                    SimilarityReport { kind: all.kind, level: all.level, hitters }.covers_all()
                })
                .collect()
        })
        .collect();
    let coverage: Vec<Value> = (first..=cap)
        .enumerate()
        .map(|(i, m)| {
            let covered = per_sample.iter().filter(|row| row[i]).count();
            json!({ "patch_level": m, "samples": samples, "covered": covered,
                    "fraction": rational_json(&Rational::new(covered as i128, samples.max(1) as i128)) })
        })
        .collect();

    let monotone = fiber.monotone_violation().is_none();
    let report = json!({
        "command": "fiber",
        "kind": kind_name(s.window.kind()),
        "xi": xi.digits(),
        "patch_size": patch_size,
        "classes": classes,
        "candidates": candidates,
        "fiber_size": fiber.len(),
        "monotone": monotone,
        "coverage": coverage,
    });
    Ok(Outcome { report, files: Vec::new(), pass: monotone })
}

/// Exact Birkhoff counts and regularity per level.
pub fn stats(config: &RunConfig) -> Result<Outcome, RunError> {
    with_group!(config.group_kind()?, config.moduli()?, |g| stats_with(config, &g))
}

fn stats_with<G: ChainGroup>(config: &RunConfig, raw: &G) -> Result<Outcome, RunError> {
    let s = session(config, raw)?;
    let ds = &s.built.domains;
    let xi = choose_xi(config, &s.window, ds)?;
    let mut pass = true;
    let mut levels = Vec::new();
    for n in 1..=s.window.cap() {
        let b = birkhoff_stats(&s.window, ds, &xi, n);
        let d = regularity(&s.window, ds, n);
        pass &= b.matches_census() && d.is_ok();
        levels.push(json!({
            "level": n,
            "size": b.size,
            "inside": b.inside,
            "outside": b.outside,
            "pending_by_class": b.pending,
            "candidate_frequency": b.candidate_frequency.iter().map(rational_json).collect::<Vec<_>>(),
            "candidate_density": b.candidate_density.iter().map(rational_json).collect::<Vec<_>>(),
            "matches_census": b.matches_census(),
            "regularity": d.as_ref().map(rational_json).unwrap_or_else(|e| json!(e.to_string())),
        }));
    }
    let report = json!({ "command": "stats", "kind": kind_name(s.window.kind()), "xi": xi.digits(), "levels": levels });
    Ok(Outcome { report, files: Vec::new(), pass })
}

/// Exit status: 0 all pass, 1 a criterion failed, 2 bad input.
pub fn exit_code(result: &Result<Outcome, RunError>) -> i32 {
    match result {
        Ok(o) if o.pass => 0,
        Ok(_) => 1,
        Err(_) => 2,
    }
}

