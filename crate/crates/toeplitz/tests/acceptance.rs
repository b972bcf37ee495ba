//! Acceptance suite: one line per criterion, non-zero exit on any failure.
//!
//! Every check is exact. Oracles are computed here from coset labels and
//! element enumeration, never from the digit routines under test.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use toeplitz::format::WindowFile;
use toeplitz::run::{self, verify_window};
use toeplitz::RunConfig;
use toeplitz_core::fiber::{
    birkhoff_stats, critical_point, domain_similarity, enumerate_fiber, t_region, FiberSet,
    Hitter, SimilarityReport,
};
use toeplitz_core::model_set::{per_sets, regularity};
use toeplitz_core::odometer::sample_point;
use toeplitz_core::window::{
    boundary_measure, build_k, build_ktilde, build_perf, check_genericity, check_irredundancy,
    check_self_similarity, pending_diff, Built, PerfParams,
};
use toeplitz_core::{
    ChainGroup, DigitClass, DomainSequence, ERule, Heisenberg, Integers, OdometerPoint, Plane, Rational, Window,
    WindowKind,
};

/// Haar samples per fiber statistic.
const SAMPLES: u64 = 100;
/// Largest `#D_n` enumerated for Per-set counts.
const ENUMERATION_BUDGET: u64 = 1 << 20;
/// Pairs drawn for chains whose `D_4 × D_4` is out of reach.
const SAMPLED_PAIRS: u64 = 200_000;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rat(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

struct Suite {
    failed: Vec<usize>,
}

impl Suite {
    fn run(&mut self, id: usize, title: &str, check: impl FnOnce() -> Check) {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {id:>2} PASS  {title}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                println!("criterion {id:>2} FAIL  {title}: {detail} [{secs:.1}s]");
                self.failed.push(id);
            }
        }
    }
}

// Presets.

fn perf<G: ChainGroup>(raw: G, epsilon: Rational, cap: usize) -> Built<G> {
    let params = PerfParams { epsilon, a: vec![3], cap, telescope: true };
    build_perf(&raw, &params).expect("preset builds")
}

/// `Z`, `ε = 1 - 10⁻⁹`, cap 6: transversals 4, 8, 8, 8, 16, 16.
fn fiber_preset() -> Built<Integers> {
    perf(Integers::powers(2, 60).unwrap(), Rational::new(999_999_999, 1_000_000_000), 6)
}

/// `Z`, `ε = 1/2`, cap 4.
fn half_preset() -> Built<Integers> {
    perf(Integers::powers(2, 40).unwrap(), Rational::new(1, 2), 4)
}

/// `Z²`, `ε = 1/2`, cap 3.
fn plane_preset() -> Built<Plane> {
    perf(Plane::powers(2, 30).unwrap(), Rational::new(1, 2), 3)
}

/// Heisenberg, `ε = 999/1000`, cap 2: transversals 8 and 4096.
fn heis_preset() -> Built<Heisenberg> {
    perf(Heisenberg::powers(2, 12).unwrap(), Rational::new(999, 1000), 2)
}

/// Perf, K(1..=3) and KTilde(1..=3) with the single removal rule.
fn variants(perf: &Window, partition_level: usize) -> Vec<(String, Window)> {
    let mut out = vec![("perf".to_string(), perf.clone())];
    for k in 1..=3 {
        let kwin = build_k(perf, k, partition_level).expect("K window builds");
        let kt = build_ktilde(&kwin, ERule::Single).expect("KTilde window builds");
        out.push((format!("K({k})"), kwin));
        out.push((format!("KTilde({k})"), kt));
    }
    out
}

struct Presets {
    fiber: Built<Integers>,
    half: Built<Integers>,
    plane: Built<Plane>,
    heis: Built<Heisenberg>,
}

/// Runs `f` on every window of every preset.
macro_rules! each_window {
    ($p:expr, |$name:ident, $w:ident, $b:ident| $body:block) => {{
        let mut count = 0usize;
        for ($name, $w) in variants(&$p.fiber.window, 2) {
            let $b = &$p.fiber;
            let $name = format!("fiber {}", $name);
            $body;
            count += 1;
        }
        for ($name, $w) in variants(&$p.half.window, 2) {
            let $b = &$p.half;
            let $name = format!("half {}", $name);
            $body;
            count += 1;
        }
        for ($name, $w) in variants(&$p.plane.window, 2) {
            let $b = &$p.plane;
            let $name = format!("plane {}", $name);
            $body;
            count += 1;
        }
        for ($name, $w) in variants(&$p.heis.window, 2) {
            let $b = &$p.heis;
            let $name = format!("heisenberg {}", $name);
            $body;
            count += 1;
        }
        count
    }};
}

// Label oracles.

/// `ψ_j` by coset lookup: the element of `D_j` with the same level-`j`
/// label, found by enumerating `D_j`.
struct PsiTable<G: ChainGroup> {
    levels: Vec<HashMap<u64, G::Elem>>,
}

impl<G: ChainGroup> PsiTable<G> {
    fn new(ds: &DomainSequence<G>, n: usize) -> Self {
        let grp = ds.group();
        let levels = (1..=n)
            .map(|j| ds.elements(j).map(|(_, g)| (grp.project(&g, j).label, g)).collect())
            .collect();
        PsiTable { levels }
    }

    fn psi(&self, grp: &G, g: &G::Elem, j: usize) -> G::Elem {
        if j == 0 {
            return grp.identity();
        }
        self.levels[j - 1][&grp.project(g, j).label].clone()
    }

    /// `π_j = ψ_{j-1}^{-1} ψ_j`.
    fn pi(&self, grp: &G, g: &G::Elem, j: usize) -> G::Elem {
        grp.mul(&grp.inv(&self.psi(grp, g, j - 1)), &self.psi(grp, g, j))
    }
}

fn digit_elements<G: ChainGroup>(ds: &DomainSequence<G>, indices: &[u32]) -> Vec<G::Elem> {
    indices.iter().enumerate().map(|(j, &i)| ds.digit(j + 1, i).clone()).collect()
}

// Criterion 1.

struct CarryCount {
    pairs: u64,
    twists: u64,
}

/// Compares `carry_mul` on `(g, h)` with the label oracle for `gh`, and
/// every carry `d_j` with `K_j`.
fn carry_pair<G: ChainGroup>(
    ds: &DomainSequence<G>,
    table: &PsiTable<G>,
    ranges: &toeplitz_core::CarryRange<G::Elem>,
    n: usize,
    (g, dg): (&G::Elem, &[G::Elem]),
    (h, dh): (&G::Elem, &[G::Elem]),
) -> Result<usize, String> {
    let grp = ds.group();
    let trace = ds.carry_mul(dg, dh, n);
    let gh = grp.mul(g, h);
    let mut psi = grp.identity();
    for j in 1..=n {
        psi = grp.mul(&psi, &trace.digits[j - 1]);
        let want = table.psi(grp, &gh, j);
        if psi != want {
            return Err(format!("g={g:?} h={h:?}: psi_{j} is {psi:?}, oracle {want:?}"));
        }
    }
    if grp.mul(&psi, trace.carry()) != gh {
        return Err(format!("g={g:?} h={h:?}: prefix times carry is not gh"));
    }
    for (j, d) in trace.carries.iter().enumerate().map(|(i, d)| (i + 1, d)) {
        if j <= ranges.depth() && !ranges.contains(j, d) {
            return Err(format!("g={g:?} h={h:?}: d_{j} = {d:?} lies outside K_{j}"));
        }
    }
    Ok(trace.twists.len())
}

fn carry_exhaustive<G: ChainGroup>(raw: G, n: usize) -> Result<CarryCount, String> {
    let ds = DomainSequence::build(raw, n + 1).map_err(|e| e.to_string())?;
    let table = PsiTable::new(&ds, n);
    let ranges = ds.carry_ranges(n + 1);
    let elems: Vec<(G::Elem, Vec<G::Elem>)> =
        ds.elements(n).map(|(idx, g)| (g, digit_elements(&ds, &idx))).collect();
    let mut count = CarryCount { pairs: 0, twists: 0 };
    for (g, dg) in &elems {
        for (h, dh) in &elems {
            count.twists += carry_pair(&ds, &table, &ranges, n, (g, dg), (h, dh))? as u64;
            count.pairs += 1;
        }
    }
    check_witnesses(&ds, &ranges)?;
    Ok(count)
}

/// Seeded pairs from `D_n`, for chains whose exhaustive square is too big.
fn carry_sampled<G: ChainGroup>(ds: &DomainSequence<G>, ranges: &toeplitz_core::CarryRange<G::Elem>, n: usize) -> Result<CarryCount, String> {
    let table = PsiTable::new(ds, n);
    let mut count = CarryCount { pairs: 0, twists: 0 };
    for seed in 0..SAMPLED_PAIRS {
        let x = sample_point(ds, 2 * seed, n);
        let y = sample_point(ds, 2 * seed + 1, n);
        let (g, h) = (ds.compose(x.digits()), ds.compose(y.digits()));
        let (dg, dh) = (digit_elements(ds, x.digits()), digit_elements(ds, y.digits()));
        count.twists += carry_pair(ds, &table, ranges, n, (&g, &dg), (&h, &dh))? as u64;
        count.pairs += 1;
    }
    Ok(count)
}

/// Every element of `K_j` is the carry of its recorded witness pair.
fn check_witnesses<G: ChainGroup>(ds: &DomainSequence<G>, ranges: &toeplitz_core::CarryRange<G::Elem>) -> Result<(), String> {
    for j in 1..=ranges.depth() {
        for d in ranges.set(j) {
            let (g, h) = ranges.witness(j, d).expect("every carry has a witness");
            let (ig, rg) = ds.digit_indices(g, j - 1);
            let (ih, rh) = ds.digit_indices(h, j - 1);
            ensure(rg == ds.group().identity() && rh == ds.group().identity(), || {
                format!("K_{j} witness ({g:?}, {h:?}) is not in D_{}", j - 1)
            })?;
            let trace = ds.carry_mul(&digit_elements(ds, &ig), &digit_elements(ds, &ih), j - 1);
            ensure(trace.carries[j - 1] == *d, || format!("K_{j} witness does not realize {d:?}"))?;
        }
    }
    Ok(())
}

fn criterion_carry(p: &Presets) -> Check {
    let mut lines = Vec::new();
    let mut record = |name: &str, c: CarryCount| lines.push(format!("{name} {} pairs", c.pairs));
    let quarter = Integers::new((0..12).map(|n| 2 * 4u64.pow(n)).collect()).unwrap();
    let c = carry_exhaustive(quarter, 4)?;
    ensure(c.pairs >= 10_000, || format!("only {} pairs on the Z preset", c.pairs))?;
    record("Z(2*4^n)", c);
    record("Z(2^n)", carry_exhaustive(Integers::powers(2, 12).unwrap(), 4)?);
    let telescoped = Integers::new(p.fiber.domains.group().moduli()[..5].to_vec()).unwrap();
    record("Z(fiber chain)", carry_exhaustive(telescoped, 4)?);
    record("Z2(2^n)", carry_exhaustive(Plane::powers(2, 8).unwrap(), 4)?);
    let heis = carry_exhaustive(Heisenberg::powers(2, 8).unwrap(), 4)?;
    ensure(heis.twists > 0, || "no conjugation twist on Heisenberg".into())?;
    record("Heisenberg(2^n)", heis);
    let h = &p.heis;
    record("Heisenberg(built chain, sampled)", carry_sampled(&h.domains, &h.carries, h.window.cap())?);
    Ok(format!("0 mismatches; {}", lines.join(", ")))
}

// Criterion 2.

/// The five basic properties on `D_3` and its inverses, plus uniqueness.
fn expansion_laws<G: ChainGroup>(raw: G) -> Result<usize, String> {
    const N: usize = 3;
    let ds = DomainSequence::build(raw, N + 2).map_err(|e| e.to_string())?;
    let grp = ds.group();
    let table = PsiTable::new(&ds, N);
    let domain: Vec<G::Elem> = ds.elements(N).map(|(_, g)| g).collect();
    let mut sample = domain.clone();
    sample.extend(domain.iter().map(|g| grp.inv(g)));
    // Elements of Γ_n: digits of deeper levels, their inverses, and φ_n of the sample.
    let gammas = |n: usize| -> Vec<G::Elem> {
        let mut out: Vec<G::Elem> = ds.transversal(n + 1).iter().chain(ds.transversal(n + 2)).cloned().collect();
        out.extend(out.clone().iter().map(|t| grp.inv(t)));
        out.extend(sample.iter().step_by(7).map(|g| ds.decompose(g, n).1));
        out
    };
    let digits = |g: &G::Elem, n: usize| -> Vec<G::Elem> { digit_elements(&ds, &ds.digit_indices(g, n).0) };
    let mut checks = 0usize;
    for n in 1..=N {
        let gamma = gammas(n);
        for g in &sample {
            let pis = digits(g, n);
            // π_j agrees with the ψ_{j-1}^{-1}ψ_j oracle.
            for j in 1..=n {
                ensure(pis[j - 1] == table.pi(grp, g, j), || format!("pi_{j}({g:?}) disagrees with the oracle"))?;
            }
            // (1) ψ_n(g) = π_1(g)…π_n(g).
            let product = pis.iter().fold(grp.identity(), |acc, p| grp.mul(&acc, p));
            ensure(product == table.psi(grp, g, n), || format!("(1) fails at n={n}, g={g:?}"))?;
            // (3) π_n(γg) = π_n(gγ) = π_n(g).
            for c in &gamma {
                let left = digits(&grp.mul(c, g), n);
                let right = digits(&grp.mul(g, c), n);
                ensure(left[n - 1] == pis[n - 1] && right[n - 1] == pis[n - 1], || {
                    format!("(3) fails at n={n}, g={g:?}, gamma={c:?}")
                })?;
                checks += 1;
            }
            // (4) π_j(g) = π_j(ψ_n(g)).
            let psi = table.psi(grp, g, n);
            ensure(digits(&psi, n) == pis, || format!("(4) fails at n={n}, g={g:?}"))?;
            // (5b) ψ_n(g⁻¹) = ψ_n(ψ_n(g)⁻¹).
            ensure(
                table.psi(grp, &grp.inv(g), n) == table.psi(grp, &grp.inv(&psi), n),
                || format!("(5) inverse form fails at n={n}, g={g:?}"),
            )?;
            checks += 3;
        }
        let labels: Vec<(u64, Vec<G::Elem>, G::Elem)> =
            sample.iter().map(|g| (grp.project(g, n).label, digits(g, n), table.psi(grp, g, n))).collect();
        for (a, g) in labels.iter().zip(&sample) {
            for (b, h) in labels.iter().zip(&sample) {
                // (2) ψ_n(g) = ψ_n(h) ⟺ π_j(g) = π_j(h) for j ≤ n.
                ensure((a.0 == b.0) == (a.1 == b.1), || format!("(2) fails at n={n}, g={g:?}, h={h:?}"))?;
                // (5a) ψ_n(gh) = ψ_n(ψ_n(g)ψ_n(h)).
                let direct = grp.project(&grp.mul(g, h), n);
                let reduced = grp.project(&grp.mul(&a.2, &b.2), n);
                ensure(direct == reduced, || format!("(5) product form fails at n={n}, g={g:?}, h={h:?}"))?;
                checks += 2;
            }
        }
    }
    // Uniqueness: every digit tuple recomposes to an element whose digits are that tuple.
    let mut seen = HashSet::new();
    let mut tuple = vec![0u32; N];
    loop {
        let g = ds.compose(&tuple);
        let (back, rest) = ds.digit_indices(&g, N);
        ensure(back == tuple && rest == grp.identity(), || format!("tuple {tuple:?} recomposes to digits {back:?}"))?;
        seen.insert(g);
        checks += 1;
        let mut j = 0;
        while j < N {
            tuple[j] += 1;
            if (tuple[j] as usize) < ds.radix(j + 1) {
                break;
            }
            tuple[j] = 0;
            j += 1;
        }
        if j == N {
            break;
        }
    }
    ensure(seen.len() as u64 == ds.size(N), || "distinct digit tuples give equal elements".into())?;
    Ok(checks)
}

fn criterion_expansion() -> Check {
    let quarter = Integers::new((0..8).map(|n| 2 * 4u64.pow(n)).collect()).unwrap();
    let results = [
        ("Z(2*4^n)", expansion_laws(quarter)?),
        ("Z(10^n)", expansion_laws(Integers::powers(10, 8).unwrap())?),
        ("Z2(2^n)", expansion_laws(Plane::powers(2, 8).unwrap())?),
        ("Heisenberg(2^n)", expansion_laws(Heisenberg::powers(2, 8).unwrap())?),
    ];
    let parts: Vec<String> = results.iter().map(|(n, c)| format!("{n} {c} checks")).collect();
    Ok(format!("items (1)-(5) and uniqueness hold on D_3; {}", parts.join(", ")))
}

// Criterion 3.

fn measure_matches<G: ChainGroup>(name: &str, w: &Window, ds: &DomainSequence<G>) -> Result<usize, String> {
    let mut enumerated = 0;
    for n in 0..=w.cap() {
        let formula = boundary_measure(w, n).map_err(|e| format!("{name}: {e}"))?;
        if n >= 1 && ds.size(n) <= ENUMERATION_BUDGET {
            let pending = per_sets(w, ds, n).aperiodic.len() as i128;
            let counted = Rational::new(pending, ds.size(n) as i128);
            ensure(counted == formula, || {
                format!("{name} level {n}: enumeration {} against formula {}", rat(&counted), rat(&formula))
            })?;
            enumerated += 1;
        }
    }
    Ok(enumerated)
}

fn criterion_boundary(p: &Presets) -> Check {
    let mut enumerated = 0;
    let windows = each_window!(p, |name, w, b| {
        enumerated += measure_matches(&name, &w, &b.domains)?;
    });
    let half = &p.half.window;
    let nu = boundary_measure(half, half.cap()).map_err(|e| e.to_string())?;
    ensure(nu >= Rational::new(1, 2), || format!("nu(Z_cap) = {} < 1/2 at epsilon 1/2", rat(&nu)))?;
    Ok(format!(
        "{windows} windows, formula equals the tree census at every level, {enumerated} levels also enumerated over D_n; epsilon 1/2 gives nu(Z_{}) = {}",
        half.cap(),
        rat(&nu)
    ))
}

// Criterion 4.

fn criterion_regularity(p: &Presets) -> Check {
    let mut levels = 0;
    let windows = each_window!(p, |name, w, b| {
        let mut previous = Rational::from_integer(0);
        for n in 1..=w.cap() {
            if b.domains.size(n) > ENUMERATION_BUDGET {
                continue;
            }
            let d = regularity(&w, &b.domains, n).map_err(|e| format!("{name}: {e}"))?;
            ensure(d >= previous, || format!("{name}: d_{n} = {} below d_{} = {}", rat(&d), n - 1, rat(&previous)))?;
            previous = d;
            levels += 1;
        }
    });
    Ok(format!("d_n + nu(Z_n) = 1 and d_n nondecreasing on {levels} levels of {windows} windows"))
}

// Criterion 5.

fn criterion_quartet(p: &Presets) -> Check {
    let windows = each_window!(p, |name, w, b| {
        let spec = w.spec();
        for n in 1..=w.cap() {
            ensure(
                spec.count(n, DigitClass::B) == 1 && spec.count(n, DigitClass::A) >= 2 && spec.count(n, DigitClass::C) >= 1,
                || format!("{name}: level {n} partition is not A/B/C shaped"),
            )?;
        }
        let generic = check_genericity(&w, &b.domains, u64::MAX);
        ensure(generic.pass && generic.exhaustive, || format!("{name}: genericity {generic:?}"))?;
        let irr = check_irredundancy(&w);
        ensure(irr.pass, || format!("{name}: no irredundancy witness at {:?}", irr.levels.iter().find(|l| l.witness.is_none())))?;
        if w.kind() != WindowKind::Perf {
            let l = spec.partition_level;
            if let Some(bad) = irr.levels.iter().find(|lv| lv.level >= l && !lv.in_last_class) {
                return Err(format!("{name}: level {} witness lies outside H_k", bad.level));
            }
        }
        let similar = check_self_similarity(&w, &b.domains, &b.carries);
        ensure(similar.pass, || format!("{name}: K_n C_n not in D_n: {:?}", similar.failure))?;
    });
    Ok(format!("genericity, irredundancy (H_k witnesses from level L), K_n C_n in D_n on {windows} windows"))
}

// Criterion 6.

fn criterion_stability(p: &Presets) -> Check {
    let mut compared = 0;
    fn check(name: &str, perf: &Window, l: usize) -> Result<usize, String> {
        let mut c = 0;
        for k in 1..=3 {
            let kwin = build_k(perf, k, l).map_err(|e| e.to_string())?;
            let windows = [
                (format!("K({k})"), kwin.clone()),
                (format!("KTilde({k}) single"), build_ktilde(&kwin, ERule::Single).map_err(|e| e.to_string())?),
                (format!("KTilde({k}) per-parent"), build_ktilde(&kwin, ERule::PerParent).map_err(|e| e.to_string())?),
            ];
            for (label, w) in windows {
                ensure(pending_diff(perf, &w).is_none(), || {
                    format!("{name} {label}: pending tree differs at level {:?}", pending_diff(perf, &w))
                })?;
                c += 1;
            }
        }
        Ok(c)
    }
    compared += check("fiber", &p.fiber.window, 2)?;
    compared += check("half", &p.half.window, 2)?;
    compared += check("plane", &p.plane.window, 2)?;
    compared += check("heisenberg", &p.heis.window, 2)?;
    Ok(format!("{compared} windows share Perf's pending tree at every level"))
}

// Criterion 7.

fn reclassify<E: Clone>(w: &Window, hitters: &[Hitter<E>], keep: impl Fn(&Hitter<E>) -> bool) -> SimilarityReport<E> {
    let spec = w.spec();
    let hitters = hitters
        .iter()
        .filter(|h| keep(h))
        .map(|h| Hitter { class: spec.class_of(&h.digits), ..h.clone() })
        .collect();
    SimilarityReport { kind: spec.kind, level: w.cap(), hitters }
}

/// Size and labels of a K-window fiber; `None` when they are as expected.
fn k_fiber_problem<E: Clone + Ord>(fiber: &FiberSet<E>) -> Option<String> {
    let k = fiber.report.k();
    let nonempty = fiber.report.class_sizes().iter().filter(|&&c| c > 0).count();
    let expected = if fiber.report.hitters.is_empty() { 1 } else { nonempty + 1 };
    if fiber.len() != expected {
        return Some(format!("{} candidates, expected {expected}", fiber.len()));
    }
    if fiber.report.covers_all() {
        if fiber.len() != k + 1 {
            return Some(format!("full coverage but {} candidates", fiber.len()));
        }
        let distinct: BTreeSet<_> = (0..fiber.len()).map(|i| fiber.row(i)).collect();
        if distinct.len() != k + 1 {
            return Some("candidates are not pairwise distinct".into());
        }
    }
    if let Some(v) = fiber.monotone_violation() {
        return Some(format!("monotone violation {v:?}"));
    }
    None
}

fn ktilde_problem<E: Clone + Ord>(fiber: &FiberSet<E>) -> Option<String> {
    let k = fiber.report.k();
    let atoms = fiber.report.class_sizes()[k - 1];
    if fiber.report.covers_all() && atoms >= 2 && fiber.len() != k + 1 + atoms {
        return Some(format!("{} candidates with #S_k = {atoms}", fiber.len()));
    }
    fiber.monotone_violation().map(|v| format!("monotone violation {v:?}"))
}

fn criterion_fiber(p: &Presets) -> Check {
    let b = &p.fiber;
    let ds = &b.domains;
    let cap = b.window.cap();
    let ks: Vec<Window> = (1..=3).map(|k| build_k(&b.window, k, 2).unwrap()).collect();
    let kts: Vec<Window> = ks.iter().map(|w| build_ktilde(w, ERule::Single).unwrap()).collect();
    // covered[k-1][m-3]: samples whose patch D_m meets every class of the
    // cap-6 window. The same samples serve every m, so the counts can only grow.
    let patches: Vec<usize> = (3..=cap).collect();
    let mut covered = vec![vec![0u64; patches.len()]; 3];
    for seed in 0..SAMPLES {
        let xi = sample_point(ds, seed, cap);
        let all = domain_similarity(&ks[0], ds, &xi, cap);
        for (i, &m) in patches.iter().enumerate() {
            let in_patch = |h: &Hitter<[i64; 1]>| ds.contains(&h.element, m);
            for k in 1..=3 {
                let fiber = enumerate_fiber(reclassify(&ks[k - 1], &all.hitters, in_patch));
                if let Some(problem) = k_fiber_problem(&fiber) {
                    return Err(format!("K({k}) seed {seed} patch D_{m}: {problem}"));
                }
                covered[k - 1][i] += fiber.report.covers_all() as u64;
                let tilde = enumerate_fiber(reclassify(&kts[k - 1], &all.hitters, in_patch));
                if let Some(problem) = ktilde_problem(&tilde) {
                    return Err(format!("KTilde({k}) seed {seed} patch D_{m}: {problem}"));
                }
            }
        }
    }
    let mut fractions = Vec::new();
    for (k, row) in (1..).zip(&covered) {
        ensure(row.windows(2).all(|p| p[0] <= p[1]), || format!("K({k}) coverage over D_3..D_{cap} decreases: {row:?}"))?;
        fractions.push(format!("K({k}) {row:?}"));
    }
    // KTilde growth at a critical point over nested patches.
    let mut growth = Vec::new();
    for k in 1..=3 {
        let xi = critical_point(kts[k - 1].spec(), Some(11));
        let sizes: Vec<usize> = (cap - 2..=cap)
            .map(|m| enumerate_fiber(domain_similarity(&kts[k - 1], ds, &xi, m)).len())
            .collect();
        let fiber = enumerate_fiber(domain_similarity(&kts[k - 1], ds, &xi, cap));
        if let Some(problem) = ktilde_problem(&fiber) {
            return Err(format!("KTilde({k}) critical point: {problem}"));
        }
        ensure(sizes.windows(2).all(|p| p[0] < p[1]), || format!("KTilde({k}) fiber sizes over D_4, D_5, D_6 do not grow: {sizes:?}"))?;
        growth.push(format!("KTilde({k}) {sizes:?}"));
    }
    Ok(format!(
        "{SAMPLES} Haar points at cap {cap}: k+1 candidates whenever covered; covered samples over patches D_3..D_{cap} out of {SAMPLES}: {}; KTilde fiber sizes over D_4..D_6: {}",
        fractions.join(", "),
        growth.join(", ")
    ))
}

// Criterion 8.

/// Last level at which the digits differ; 0 when equal.
fn split_level(a: &[u32], b: &[u32]) -> usize {
    (0..a.len()).rev().find(|&i| a[i] != b[i]).map_or(0, |i| i + 1)
}

/// Up to `per_level` hitter pairs for each split level `e < cap`, accepted by `want`.
fn hitter_pairs<E>(
    hitters: &[Hitter<E>],
    cap: usize,
    per_level: usize,
    want: impl Fn(&Hitter<E>, &Hitter<E>) -> bool,
) -> Vec<(usize, &Hitter<E>, &Hitter<E>)> {
    let mut out = Vec::new();
    let mut taken = vec![0usize; cap];
    for (i, a) in hitters.iter().enumerate() {
        for b in &hitters[i + 1..] {
            let e = split_level(&a.digits, &b.digits);
            if e > 0 && e < cap && taken[e] < per_level && want(a, b) {
                taken[e] += 1;
                out.push((e, a, b));
            }
        }
        if taken[1..].iter().all(|&t| t >= per_level) {
            break;
        }
    }
    out
}

fn criterion_order(p: &Presets) -> Check {
    let b = &p.fiber;
    let ds = &b.domains;
    let cap = b.window.cap();
    let mut certificates = 0;

    // Perf: hitters whose shifted digits split at level e cannot be separated
    // inside any ball of depth ≥ e.
    let xi = critical_point(b.window.spec(), Some(5));
    let report = domain_similarity(&b.window, ds, &xi, cap);
    let pairs = hitter_pairs(&report.hitters, cap, 2, |_, _| true);
    ensure(!pairs.is_empty(), || "no same-class hitter pairs".into())?;
    for (e, x, y) in &pairs {
        for depth in *e..cap {
            for (inside, outside) in [(x, y), (y, x)] {
                let region = t_region(&b.window, ds, &[inside.element], &[outside.element], &xi, depth);
                ensure(region.is_empty(), || {
                    format!("Perf pair {:?}/{:?} separated inside depth {depth}", inside.element, outside.element)
                })?;
                certificates += 1;
            }
        }
    }

    // K(k): the higher class can be one while the lower is zero exactly when a
    // level beyond the ball assigns A digits to a class in between.
    for k in 2..=3 {
        let w = build_k(&b.window, k, 2).map_err(|e| e.to_string())?;
        let spec = w.spec();
        let l = spec.partition_level;
        let xi = critical_point(spec, Some(5));
        let report = domain_similarity(&w, ds, &xi, cap);
        let pairs = hitter_pairs(&report.hitters, cap, 2, |a, b| a.class != b.class);
        ensure(!pairs.is_empty(), || format!("K({k}): no cross-class pairs"))?;
        for (e, x, y) in &pairs {
            let (lo, hi) = if x.class < y.class { (x, y) } else { (y, x) };
            for depth in *e..cap {
                let separating = (depth + 1..=cap)
                    .any(|n| n > l && lo.class < spec.level_classes[n - 1] && spec.level_classes[n - 1] <= hi.class);
                let up = t_region(&w, ds, &[hi.element], &[lo.element], &xi, depth);
                ensure(up.is_empty() != separating, || {
                    format!(
                        "K({k}) S_{} over S_{} at depth {depth}: region empty = {}, separating level exists = {separating}",
                        hi.class,
                        lo.class,
                        up.is_empty()
                    )
                })?;
                let down = t_region(&w, ds, &[lo.element], &[hi.element], &xi, depth);
                ensure(down.is_empty(), || format!("K({k}) S_{} over S_{} at depth {depth}", lo.class, hi.class))?;
                certificates += 2;
            }
        }
        let fiber = enumerate_fiber(report);
        ensure(fiber.monotone_violation().is_none(), || format!("K({k}) fiber breaks monotone determination"))?;
        let kt = build_ktilde(&w, ERule::Single).map_err(|e| e.to_string())?;
        let fiber = enumerate_fiber(domain_similarity(&kt, ds, &xi, cap));
        ensure(fiber.monotone_violation().is_none(), || format!("KTilde({k}) fiber breaks monotone determination"))?;
    }
    Ok(format!("{certificates} t_region certificates agree with the class order; monotone determination holds"))
}

// Criterion 9.

fn criterion_density(p: &Presets) -> Check {
    let b = &p.fiber;
    let ds = &b.domains;
    let cap = b.window.cap();
    let mut detail = Vec::new();
    for k in 1..=3 {
        let w = build_k(&b.window, k, 2).map_err(|e| e.to_string())?;
        let mut points = vec![sample_point(ds, 100 + k as u64, cap)];
        if k == 3 {
            points.push(critical_point(w.spec(), Some(2)));
            points.push(OdometerPoint::identity(cap));
        }
        let mut densities = Vec::new();
        for xi in &points {
            for n in 1..=cap {
                let stats = birkhoff_stats(&w, ds, xi, n);
                ensure(stats.matches_census(), || {
                    format!("K({k}) level {n}: frequencies {:?} against densities {:?}", stats.candidate_frequency, stats.candidate_density)
                })?;
                if n == cap {
                    densities = stats.candidate_density;
                }
            }
        }
        for j in 1..=k {
            let gap = densities[j - 1] - densities[j];
            ensure(gap > Rational::from_integer(0), || format!("K({k}): d_{j} <= d_{}", j + 1))?;
            ensure(gap == w.pending_measure_in(cap, j), || format!("K({k}): gap d_{j} - d_{} is not nu(Z cap H_{j})", j + 1))?;
        }
        detail.push(format!("K({k}) d = [{}]", densities.iter().map(rat).collect::<Vec<_>>().join(", ")));
    }
    Ok(format!("Birkhoff counts over D_n equal the census at every level; {}", detail.join("; ")))
}

// Criterion 10.

fn criterion_heisenberg() -> Check {
    let ds = DomainSequence::build(Heisenberg::powers(2, 8).unwrap(), 3).map_err(|e| e.to_string())?;
    for (ig, g) in ds.elements(2) {
        for (ih, h) in ds.elements(2) {
            let trace = ds.carry_mul(&digit_elements(&ds, &ig), &digit_elements(&ds, &ih), 2);
            if let Some(t) = trace.twists.iter().find(|t| t.conjugate != t.digit) {
                return Ok(format!(
                    "g={g:?} h={h:?}: level {} digit {:?} conjugated by {:?} becomes {:?}",
                    t.level, t.digit, t.prefix, t.conjugate
                ));
            }
        }
    }
    Err("no carry computation on D_2 moved a digit under conjugation".into())
}

// Criterion 11.

const CONFIGS: [&str; 3] = [
    r#"
seed = 4
[group]
kind = "Z"
base = 2
levels = 60
[window]
kind = "k"
k = 3
epsilon = "999999999/1000000000"
partition_level = 2
cap = 5
[patch]
samples = 20
"#,
    r#"
seed = 9
[group]
kind = "Z2"
base = 2
levels = 30
[window]
kind = "ktilde"
k = 2
epsilon = "1/2"
partition_level = 2
cap = 2
[patch]
xi = "random"
samples = 10
"#,
    r#"
seed = 1
[group]
kind = "Heisenberg"
base = 2
levels = 12
[window]
kind = "ktilde"
k = 2
epsilon = "999/1000"
partition_level = 2
cap = 2
e_rule = "per-parent"
[patch]
level = 1
samples = 5
"#,
];

fn artifacts(config: &RunConfig) -> Result<Vec<u8>, String> {
    let mut bytes = Vec::new();
    let commands: [fn(&RunConfig) -> Result<run::Outcome, toeplitz::RunError>; 4] = [run::build, run::emit, run::fiber, run::stats];
    for command in commands {
        let outcome = command(config).map_err(|e| e.to_string())?;
        bytes.extend(serde_json::to_vec(&outcome.report).unwrap());
        for (name, data) in &outcome.files {
            bytes.extend(name.as_bytes());
            bytes.extend(data);
        }
    }
    if config.group.kind == "Z2" {
        let outcome = run::render(config).map_err(|e| e.to_string())?;
        bytes.extend(&outcome.files[0].1);
    }
    Ok(bytes)
}

fn round_trip<G: ChainGroup>(name: &str, w: &Window, b: &Built<G>) -> Result<(), String> {
    let file = WindowFile::from_built(&b.domains, w.spec());
    let text = file.render();
    let parsed = WindowFile::parse(&text).map_err(|e| format!("{name}: {e}"))?;
    ensure(parsed == file, || format!("{name}: parse(render) differs"))?;
    ensure(parsed.render() == text, || format!("{name}: render is not stable"))?;
    let from_text = run::verify(&text).map_err(|e| format!("{name}: {e}"))?;
    let in_memory = verify_window(w, &b.domains, &b.carries);
    ensure(from_text == in_memory, || format!("{name}: verify(file) differs from the in-memory report"))?;
    ensure(from_text.pass, || format!("{name}: verify fails: {}", from_text.report))?;
    Ok(())
}

fn criterion_determinism(p: &Presets) -> Check {
    let mut total = 0;
    for text in CONFIGS {
        let config = RunConfig::parse(text).map_err(|e| e.to_string())?;
        let first = artifacts(&config)?;
        let second = artifacts(&RunConfig::parse(text).unwrap())?;
        ensure(first == second, || format!("{} artifacts differ between runs", config.group.kind))?;
        total += first.len();
    }
    let mut trips = 0;
    for (name, w) in variants(&p.fiber.window, 2) {
        round_trip(&name, &w, &p.fiber)?;
        trips += 1;
    }
    for (name, w) in variants(&p.heis.window, 2) {
        round_trip(&name, &w, &p.heis)?;
        trips += 1;
    }
    let kwin = build_k(&p.plane.window, 2, 2).map_err(|e| e.to_string())?;
    round_trip("plane KTilde(2) per-parent", &build_ktilde(&kwin, ERule::PerParent).unwrap(), &p.plane)?;
    trips += 1;
    Ok(format!("{} configs give byte-identical artifacts ({total} bytes each pass); {trips} window files round-trip and re-verify", CONFIGS.len()))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let presets = Presets { fiber: fiber_preset(), half: half_preset(), plane: plane_preset(), heis: heis_preset() };
    println!("presets built [{:.1}s]", start.elapsed().as_secs_f64());
    let p = &presets;
    let mut suite = Suite { failed: Vec::new() };
    suite.run(1, "carry arithmetic matches the label oracle", || criterion_carry(p));
    suite.run(2, "expansion laws", criterion_expansion);
    suite.run(3, "boundary measure", || criterion_boundary(p));
    suite.run(4, "regularity", || criterion_regularity(p));
    suite.run(5, "criteria quartet", || criterion_quartet(p));
    suite.run(6, "boundary stability", || criterion_stability(p));
    suite.run(7, "fiber cardinality", || criterion_fiber(p));
    suite.run(8, "order structure", || criterion_order(p));
    suite.run(9, "density chain", || criterion_density(p));
    suite.run(10, "non-commutative carries", criterion_heisenberg);
    suite.run(11, "determinism and round trip", || criterion_determinism(p));
    println!("total {:.1}s", start.elapsed().as_secs_f64());
    if suite.failed.is_empty() {
        println!("all 11 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("failing criteria: {:?}", suite.failed);
        ExitCode::FAILURE
    }
}
