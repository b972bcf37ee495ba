//! Fibers over critical odometer points.
//!
//! A boundary-hitting position `l` (with `τ(l)·ξ` pending at the cap) falls
//! into the class `S_j` of the `H_j` containing `τ(l)·ξ`. The fiber elements
//! agree off the hitters; on them, `x_j` is one exactly on `S_j ∪ … ∪ S_k`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use fixedbitset::FixedBitSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::expansion::DomainSequence;
use crate::group::ChainGroup;
use crate::model_set::{shifted_digits, Membership, Symbol, SymbolicPatch};
use crate::odometer::{odo_inv, odo_mul, Cylinder, OdometerPoint};
use crate::window::{DigitClass, Window, WindowKind, WindowSpec};
use crate::Rational;

/// A point whose digits all lie in the `C` sets, so `τ(1_G)·ξ ∈ Z_cap`.
///
/// With a seed each `C` digit is drawn uniformly; without one the first `C`
/// digit is taken at every level.
pub fn critical_point(spec: &WindowSpec, seed: Option<u64>) -> OdometerPoint {
    let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
    let digits = (1..=spec.cap())
        .map(|n| {
            let c = spec.positions(n, DigitClass::C);
            match rng.as_mut() {
                Some(r) => c[r.gen_range(0..c.len())],
                None => c[0],
            }
        })
        .collect();
    OdometerPoint::new(digits, false)
}

/// A patch position `l` with `τ(l)·ξ` pending at the cap.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hitter<E> {
    pub element: E,
    /// Digits of `τ(l)·ξ`.
    pub digits: Vec<u32>,
    /// `j` with `τ(l)·ξ ∈ H_j`.
    pub class: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimilarityReport<E> {
    pub kind: WindowKind,
    pub level: usize,
    /// Boundary-hitting positions in patch order.
    pub hitters: Vec<Hitter<E>>,
}

impl<E: Clone> SimilarityReport<E> {
    pub fn k(&self) -> usize {
        self.kind.classes()
    }

    /// `classes()[j-1]` holds the hitter indices of `S_j`.
    pub fn classes(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k()];
        for (i, h) in self.hitters.iter().enumerate() {
            out[h.class - 1].push(i);
        }
        out
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        self.classes().iter().map(Vec::len).collect()
    }

    pub fn class_elements(&self, j: usize) -> Vec<E> {
        self.hitters.iter().filter(|h| h.class == j).map(|h| h.element.clone()).collect()
    }

    /// Every class meets the patch.
    pub fn covers_all(&self) -> bool {
        self.class_sizes().iter().all(|&c| c > 0)
    }

    /// `KTilde` splits `S_k` into incomparable singletons.
    pub fn atoms(&self) -> Vec<E> {
        match self.kind {
            WindowKind::KTilde(k) => self.class_elements(k),
            _ => Vec::new(),
        }
    }
}

/// Scans `patch` for boundary hitters.
pub fn similarity_classes<G: ChainGroup>(
    window: &Window,
    ds: &DomainSequence<G>,
    xi: &OdometerPoint,
    patch: &[G::Elem],
) -> SimilarityReport<G::Elem> {
    let spec = window.spec();
    let level = window.cap();
    let hitters = patch
        .iter()
        .filter_map(|g| {
            let digits = shifted_digits(ds, g, xi, level);
            let pending = spec.classify_digits(&digits) == Membership::Pending(level);
            pending.then(|| Hitter { element: g.clone(), class: spec.class_of(&digits), digits })
        })
        .collect();
    SimilarityReport { kind: spec.kind, level, hitters }
}

/// Hitters inside the patch `D_m`, found from the pending cylinders: the
/// unique `l ∈ D_cap` with `τ(l)·ξ` in a cylinder `Z` is `ψ_cap(Z·ξ^{-1})`.
///
/// Equal to `similarity_classes` on `domain_patch(ds, m)`, at a cost
/// proportional to the pending count instead of `#D_m`.
pub fn domain_similarity<G: ChainGroup>(
    window: &Window,
    ds: &DomainSequence<G>,
    xi: &OdometerPoint,
    m: usize,
) -> SimilarityReport<G::Elem> {
    let spec = window.spec();
    let level = window.cap();
    let xi_inv = odo_inv(ds, &xi.truncate(level), level).expect("ξ must reach the window cap");
    let mut found: Vec<(Vec<u32>, Hitter<G::Elem>)> = Vec::new();
    spec.for_each_pending(level, |cylinder| {
        let z = OdometerPoint::new(cylinder.to_vec(), false);
        let l = odo_mul(ds, &z, &xi_inv, level).expect("precision is the cap");
        if l.digits()[m..].iter().all(|&d| d == 0) {
            let mut order: Vec<u32> = l.digits()[..m].to_vec();
            order.reverse();
            let hitter = Hitter {
                element: ds.compose(l.digits()),
                digits: cylinder.to_vec(),
                class: spec.class_of(cylinder),
            };
            found.push((order, hitter));
        }
    });
    // Canonical order of `D_m` is mixed radix with the first digit fastest.
    found.sort_by(|a, b| a.0.cmp(&b.0));
    SimilarityReport { kind: spec.kind, level, hitters: found.into_iter().map(|f| f.1).collect() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FiberLabel {
    /// `x_j`, one on `S_j ∪ … ∪ S_k`.
    Level(usize),
    /// `x̃_{k,l}`: `x_k` with the hitter of this index set to zero.
    Dropped(usize),
}

/// The fiber candidates on the hitters, deduplicated. Off the hitters every
/// candidate agrees with the decided values.
///
/// Candidates `0..levels.len()` are the distinct `x_j`; the rest are
/// `x̃_{k,l}` for `l` in `dropped`, kept implicit since `S_k` can hold every
/// hitter.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiberSet<E> {
    pub report: SimilarityReport<E>,
    /// Hitter values of each distinct `x_j`, bit `i` for hitter `i`.
    pub levels: Vec<FixedBitSet>,
    /// Hitters `l` whose `x̃_{k,l}` differs from every `x_j`.
    pub dropped: Vec<usize>,
    /// Every label producing the candidate with the same index.
    pub labels: Vec<Vec<FiberLabel>>,
}

impl<E: Clone + Ord> FiberSet<E> {
    pub fn len(&self) -> usize {
        self.levels.len() + self.dropped.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `x_k`, which every dropped candidate starts from.
    fn top(&self) -> FixedBitSet {
        at_least(&self.report, self.report.k())
    }

    /// Hitter values of candidate `index`.
    pub fn row(&self, index: usize) -> FixedBitSet {
        match index.checked_sub(self.levels.len()) {
            None => self.levels[index].clone(),
            Some(d) => {
                let mut row = self.top();
                row.set(self.dropped[d], false);
                row
            }
        }
    }

    /// Number of hitters on which candidate `index` is one.
    pub fn ones(&self, index: usize) -> usize {
        match index.checked_sub(self.levels.len()) {
            None => self.levels[index].count_ones(..),
            Some(_) => self.report.hitters.iter().filter(|h| h.class >= self.report.k()).count() - 1,
        }
    }

    /// Candidate `index` written over an emitted patch containing the hitters.
    pub fn patch(&self, base: &SymbolicPatch<E>, index: usize) -> SymbolicPatch<E> {
        let row = self.row(index);
        let at: BTreeMap<&E, bool> =
            self.report.hitters.iter().enumerate().map(|(i, h)| (&h.element, row.contains(i))).collect();
        let mut patch = base.clone();
        let level = patch.level;
        for entry in &mut patch.entries {
            if let Some(&v) = at.get(&entry.element) {
                entry.membership = if v { Membership::In(level) } else { Membership::Out(level) };
            }
        }
        patch
    }

    pub fn value(&self, index: usize, hitter: usize) -> Symbol {
        let one = match index.checked_sub(self.levels.len()) {
            None => self.levels[index].contains(hitter),
            Some(d) => self.report.hitters[hitter].class >= self.report.k() && self.dropped[d] != hitter,
        };
        if one { Symbol::One } else { Symbol::Zero }
    }

    /// Two hitters are ordered when their classes are, except inside `S_k`
    /// of a `KTilde` window.
    pub fn comparable(&self, i1: usize, i2: usize) -> bool {
        match self.report.kind {
            WindowKind::KTilde(k) => i1 < i2 || (i1 == i2 && i1 < k),
            _ => i1 <= i2,
        }
    }

    /// A candidate with `x(g_1) = 1`, `x(g_2) = 0` for comparable
    /// `class(g_1) ≤ class(g_2)`, as `(candidate, hitter, hitter)`.
    pub fn monotone_violation(&self) -> Option<(usize, usize, usize)> {
        let k = self.report.k();
        let n = self.report.hitters.len();
        let mut masks = vec![FixedBitSet::with_capacity(n); k + 1];
        for (i, h) in self.report.hitters.iter().enumerate() {
            masks[h.class].insert(i);
        }
        // Per-class counts of ones and zeros decide a row; witnesses come from the row itself.
        let violating = |ones: &[usize], zeros: &[usize]| {
            (1..=k).any(|i1| ones[i1] > 0 && (i1..=k).any(|i2| zeros[i2] > 0 && self.comparable(i1, i2)))
        };
        let counts = |row: &FixedBitSet| -> (Vec<usize>, Vec<usize>) {
            let ones: Vec<usize> = masks.iter().map(|m| m.intersection(row).count()).collect();
            let zeros = masks.iter().zip(&ones).map(|(m, o)| m.count_ones(..) - o).collect();
            (ones, zeros)
        };
        let witness = |c: usize| {
            let row = self.row(c);
            for i1 in 1..=k {
                for i2 in i1..=k {
                    if !self.comparable(i1, i2) {
                        continue;
                    }
                    if let (Some(a), Some(b)) = (row.intersection(&masks[i1]).next(), masks[i2].difference(&row).next()) {
                        return Some((c, a, b));
                    }
                }
            }
            None
        };
        for (c, row) in self.levels.iter().enumerate() {
            let (ones, zeros) = counts(row);
            if violating(&ones, &zeros) {
                return witness(c);
            }
        }
        if !self.dropped.is_empty() {
            let (ones, zeros) = counts(&self.top());
            for (d, &l) in self.dropped.iter().enumerate() {
                let (mut ones, mut zeros) = (ones.clone(), zeros.clone());
                let class = self.report.hitters[l].class;
                ones[class] -= 1;
                zeros[class] += 1;
                if violating(&ones, &zeros) {
                    return witness(self.levels.len() + d);
                }
            }
        }
        None
    }

    /// Candidates are totally ordered coordinatewise on the hitters.
    pub fn is_chain(&self) -> bool {
        let rows: Vec<FixedBitSet> = (0..self.len()).map(|i| self.row(i)).collect();
        rows.iter().enumerate().all(|(i, x)| rows[i + 1..].iter().all(|y| x.is_subset(y) || y.is_subset(x)))
    }
}

/// Hitters of class at least `j`.
fn at_least<E>(report: &SimilarityReport<E>, j: usize) -> FixedBitSet {
    let mut row = FixedBitSet::with_capacity(report.hitters.len());
    row.extend(report.hitters.iter().enumerate().filter(|(_, h)| h.class >= j).map(|(i, _)| i));
    row
}

/// `x_1, …, x_{k+1}` and, for `KTilde`, `x̃_{k,l}` for every `l ∈ S_k`.
pub fn enumerate_fiber<E: Clone>(report: SimilarityReport<E>) -> FiberSet<E> {
    let k = report.k();
    let mut index: BTreeMap<FixedBitSet, usize> = BTreeMap::new();
    let mut levels: Vec<FixedBitSet> = Vec::new();
    let mut labels: Vec<Vec<FiberLabel>> = Vec::new();
    for j in 1..=k + 1 {
        let row = at_least(&report, j);
        match index.get(&row) {
            Some(&i) => labels[i].push(FiberLabel::Level(j)),
            None => {
                index.insert(row.clone(), levels.len());
                levels.push(row);
                labels.push(vec![FiberLabel::Level(j)]);
            }
        }
    }
    let mut dropped = Vec::new();
    if let WindowKind::KTilde(_) = report.kind {
        let top: Vec<usize> = (0..report.hitters.len()).filter(|&i| report.hitters[i].class >= k).collect();
        for &l in top.iter().filter(|&&l| report.hitters[l].class == k) {
            // `x_k` minus one hitter is some `x_j` only when it is empty, i.e. `x_{k+1}`.
            if top.len() == 1 {
                labels[index[&at_least(&report, k + 1)]].push(FiberLabel::Dropped(l));
            } else {
                dropped.push(l);
                labels.push(vec![FiberLabel::Dropped(l)]);
            }
        }
    }
    FiberSet { report, levels, dropped, labels }
}

/// Cylinders certifying `T_W(N, M)` near `ξ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegionReport {
    /// Cylinders on which every `τ(l)·η`, `l ∈ N`, is inside and every
    /// `τ(j)·η`, `j ∈ M`, is outside.
    pub cylinders: Vec<Cylinder>,
    /// Level-cap cylinders still undecided.
    pub unresolved: usize,
}

impl RegionReport {
    pub fn is_empty(&self) -> bool {
        self.cylinders.is_empty()
    }
}

/// Searches the ball `[ξ]_{eps_level}` for cylinders inside
/// `⋂_{l∈N} τ(l)^{-1}W ∖ ⋃_{j∈M} τ(j)^{-1}W`, down to the window cap.
pub fn t_region<G: ChainGroup>(
    window: &Window,
    ds: &DomainSequence<G>,
    inside: &[G::Elem],
    outside: &[G::Elem],
    xi: &OdometerPoint,
    eps_level: usize,
) -> RegionReport {
    let cap = window.cap();
    let taus: Vec<(OdometerPoint, bool)> = inside
        .iter()
        .map(|l| (OdometerPoint::embed(ds, l, cap), true))
        .chain(outside.iter().map(|j| (OdometerPoint::embed(ds, j, cap), false)))
        .collect();
    let mut report = RegionReport { cylinders: Vec::new(), unresolved: 0 };
    let mut prefix: Vec<u32> = xi.digits()[..eps_level].to_vec();
    region_walk(window, ds, &taus, &mut prefix, &mut report);
    report
}

fn region_walk<G: ChainGroup>(
    window: &Window,
    ds: &DomainSequence<G>,
    taus: &[(OdometerPoint, bool)],
    prefix: &mut Vec<u32>,
    report: &mut RegionReport,
) {
    let n = prefix.len();
    let eta = OdometerPoint::new(prefix.clone(), false);
    let mut decided = true;
    for (tau, want_in) in taus {
        let y = odo_mul(ds, &tau.truncate(n), &eta, n).expect("precision is n");
        match window.spec().classify_digits(y.digits()) {
            Membership::In(_) if !want_in => return,
            Membership::Out(_) if *want_in => return,
            Membership::Pending(_) => decided = false,
            _ => {}
        }
    }
    if decided {
        report.cylinders.push(Cylinder { digits: prefix.clone() });
        return;
    }
    if n == window.cap() {
        report.unresolved += 1;
        return;
    }
    for d in 0..ds.radix(n + 1) as u32 {
        prefix.push(d);
        region_walk(window, ds, taus, prefix, report);
        prefix.pop();
    }
}

/// Exact counts over `D_n` of where `τ(g)·ξ` lands at level `n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BirkhoffLevel {
    pub level: usize,
    pub size: u64,
    pub inside: u64,
    pub outside: u64,
    /// Pending hits per `H_j`.
    pub pending: Vec<u64>,
    /// Value-one frequency of `x_j` over `D_n`, `j = 1..=k+1`.
    pub candidate_frequency: Vec<Rational>,
    /// `ν([W]_n) + Σ_{i ≥ j} ν(Z_n ∩ H_i)` from the window census.
    pub candidate_density: Vec<Rational>,
}

impl BirkhoffLevel {
    pub fn matches_census(&self) -> bool {
        self.candidate_frequency == self.candidate_density
    }
}

pub fn birkhoff_stats<G: ChainGroup>(
    window: &Window,
    ds: &DomainSequence<G>,
    xi: &OdometerPoint,
    n: usize,
) -> BirkhoffLevel {
    let spec = window.spec();
    let k = spec.kind.classes();
    let mut level = BirkhoffLevel {
        level: n,
        size: ds.size(n),
        inside: 0,
        outside: 0,
        pending: vec![0; k],
        candidate_frequency: Vec::new(),
        candidate_density: Vec::new(),
    };
    let xi_n = xi.truncate(n);
    for (_, g) in ds.elements(n) {
        let tau = OdometerPoint::embed(ds, &g, n);
        let y = odo_mul(ds, &tau, &xi_n, n).expect("precision is n");
        match spec.classify_digits(y.digits()) {
            Membership::In(_) => level.inside += 1,
            Membership::Out(_) => level.outside += 1,
            Membership::Pending(_) => level.pending[spec.class_of(y.digits()) - 1] += 1,
        }
    }
    let size = level.size as i128;
    for j in 1..=k + 1 {
        let ones = level.inside + level.pending[j - 1..].iter().sum::<u64>();
        level.candidate_frequency.push(Rational::new(ones as i128, size));
        let exact = (j..=k).fold(window.inside_measure(n), |acc, i| acc + window.pending_measure_in(n, i));
        level.candidate_density.push(exact);
    }
    level
}
