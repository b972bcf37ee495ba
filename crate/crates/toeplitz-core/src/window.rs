//! Cylinder-tree windows.
//!
//! A window is described level by level: every digit of `T_{n-1}` is
//! classed `A`, `B` or `C`. A point walks its digits; the first non-`C`
//! digit decides it (`A` inside, `B` outside), and a point whose digits stay
//! in `C` forever lies on the boundary. The `K(k)` and `KTilde(k)` variants
//! only change which `A`-children count as inside, never the pending tree.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigUint;

use crate::expansion::{CarryClosure, CarryRange, DomainError, DomainSequence};
use crate::group::{ChainError, ChainGroup};
use crate::model_set::Membership;
use crate::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DigitClass {
    A,
    B,
    C,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WindowKind {
    Perf,
    K(usize),
    KTilde(usize),
}

impl WindowKind {
    /// Number of boundary classes `H_1, …, H_k`.
    pub fn classes(self) -> usize {
        match self {
            WindowKind::Perf => 1,
            WindowKind::K(k) | WindowKind::KTilde(k) => k,
        }
    }
}

/// How `KTilde` picks the removed cylinders `E_n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ERule {
    /// One cylinder per level, targeted by a dovetailed schedule.
    Single,
    /// The first `A`-child under every pending parent.
    PerParent,
    /// Remove nothing.
    Keep,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Removal {
    PerParent { digit: u32 },
    Single { cylinder: Vec<u32> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    In,
    Out,
    Pending,
}

/// Full description of a window up to its cap.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WindowSpec {
    pub kind: WindowKind,
    /// `classes[n-1][i]` classes the `i`-th element of `T_{n-1}`.
    pub classes: Vec<Vec<DigitClass>>,
    /// `a_n`, the number of eligible digits kept out of `C_n`.
    pub a: Vec<usize>,
    pub epsilon: Rational,
    /// `L`; zero for `Perf`.
    pub partition_level: usize,
    /// Pending level-`L` cylinders and their class `j` (`H_j`). Every other
    /// level-`L` cylinder is in `H_1`.
    pub boundary_classes: BTreeMap<Vec<u32>, usize>,
    /// `level_classes[n-1] = j` with `n ∈ N_j`.
    pub level_classes: Vec<usize>,
    /// `E_n` for `n ∈ N_k` (`KTilde` only).
    pub removals: Vec<Option<Removal>>,
}

impl WindowSpec {
    pub fn cap(&self) -> usize {
        self.classes.len()
    }

    pub fn radix(&self, n: usize) -> usize {
        self.classes[n - 1].len()
    }

    pub fn count(&self, n: usize, class: DigitClass) -> usize {
        self.classes[n - 1].iter().filter(|&&c| c == class).count()
    }

    /// Positions of `T_{n-1}` in the given class, in canonical order.
    pub fn positions(&self, n: usize, class: DigitClass) -> Vec<u32> {
        (0..self.radix(n) as u32).filter(|&i| self.classes[n - 1][i as usize] == class).collect()
    }

    /// `j` with the cylinder inside `H_j`; meaningful from level `L` on.
    pub fn class_of(&self, prefix: &[u32]) -> usize {
        let l = self.partition_level;
        if l == 0 || prefix.len() < l {
            return 1;
        }
        self.boundary_classes.get(&prefix[..l]).copied().unwrap_or(1)
    }

    /// Status of the child `prefix ++ [digit]` of a pending cylinder.
    pub fn child_status(&self, prefix: &[u32], digit: u32) -> Status {
        let n = prefix.len() + 1;
        match self.classes[n - 1][digit as usize] {
            DigitClass::C => Status::Pending,
            DigitClass::B => Status::Out,
            DigitClass::A => {
                let inside = n <= self.partition_level || self.level_classes[n - 1] <= self.class_of(prefix);
                if inside && !self.removed(prefix, digit) {
                    Status::In
                } else {
                    Status::Out
                }
            }
        }
    }

    fn removed(&self, prefix: &[u32], digit: u32) -> bool {
        match &self.removals[prefix.len()] {
            None => false,
            Some(Removal::PerParent { digit: d }) => *d == digit,
            Some(Removal::Single { cylinder }) => {
                cylinder[..prefix.len()] == *prefix && cylinder[prefix.len()] == digit
            }
        }
    }

    /// Walks the digits until one leaves `C`.
    pub fn classify_digits(&self, digits: &[u32]) -> Membership {
        let depth = digits.len().min(self.cap());
        for n in 1..=depth {
            match self.child_status(&digits[..n - 1], digits[n - 1]) {
                Status::In => return Membership::In(n),
                Status::Out => return Membership::Out(n),
                Status::Pending => {}
            }
        }
        Membership::Pending(depth)
    }

    /// Calls `f` on every pending level-`n` cylinder in lexicographic order.
    pub fn for_each_pending(&self, n: usize, mut f: impl FnMut(&[u32])) {
        let c: Vec<Vec<u32>> = (1..=n).map(|j| self.positions(j, DigitClass::C)).collect();
        let mut prefix = Vec::with_capacity(n);
        walk(&c, &mut prefix, &mut f);
    }

    pub fn pending_cylinders(&self, n: usize) -> Vec<Vec<u32>> {
        let mut out = Vec::new();
        self.for_each_pending(n, |p| out.push(p.to_vec()));
        out
    }

    /// `#D_n` implied by the transversal sizes.
    pub fn size(&self, n: usize) -> u64 {
        (1..=n).map(|j| self.radix(j) as u64).product()
    }
}

fn walk(c: &[Vec<u32>], prefix: &mut Vec<u32>, f: &mut impl FnMut(&[u32])) {
    if prefix.len() == c.len() {
        f(prefix);
        return;
    }
    for &d in &c[prefix.len()] {
        prefix.push(d);
        walk(c, prefix, f);
        prefix.pop();
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpecError {
    pub level: usize,
    pub reason: &'static str,
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "window level {}: {}", self.level, self.reason)
    }
}

impl core::error::Error for SpecError {}

/// Exact cylinder counts at one level.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelCensus {
    pub inside: u64,
    pub outside: u64,
    pub pending: u64,
    /// Pending cylinders inside each `H_j`; empty below level `L`.
    pub pending_by_class: Vec<u64>,
}

/// A validated window with its per-level cylinder census.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Window {
    spec: WindowSpec,
    census: Vec<LevelCensus>,
}

impl Window {
    /// Validates the structure of `spec` and counts its cylinder tree.
    ///
    /// The lemma-level properties (`#B = 1`, `1 ∉ C`, …) are not enforced
    /// here; the `check_*` functions report them.
    pub fn new(spec: WindowSpec) -> Result<Window, SpecError> {
        validate(&spec)?;
        let census = count_tree(&spec);
        Ok(Window { spec, census })
    }

    pub fn spec(&self) -> &WindowSpec {
        &self.spec
    }

    pub fn kind(&self) -> WindowKind {
        self.spec.kind
    }

    pub fn cap(&self) -> usize {
        self.spec.cap()
    }

    pub fn census(&self, n: usize) -> &LevelCensus {
        &self.census[n]
    }

    /// `ν(Z_n)` from the pending count.
    pub fn pending_measure(&self, n: usize) -> Rational {
        Rational::new(self.census[n].pending as i128, self.spec.size(n) as i128)
    }

    /// `ν(Z_n ∩ H_j)`; below `L` everything counts as `H_1`.
    pub fn pending_measure_in(&self, n: usize, j: usize) -> Rational {
        let c = &self.census[n];
        let count = if c.pending_by_class.is_empty() {
            if j == 1 { c.pending } else { 0 }
        } else {
            c.pending_by_class[j - 1]
        };
        Rational::new(count as i128, self.spec.size(n) as i128)
    }

    /// The same window cut off at level `cap`.
    pub fn truncated(&self, cap: usize) -> Result<Window, SpecError> {
        let s = &self.spec;
        if cap == 0 || cap > s.cap() || cap < s.partition_level {
            return Err(SpecError { level: cap, reason: "truncation level outside partition level..=cap" });
        }
        Window::new(WindowSpec {
            classes: s.classes[..cap].to_vec(),
            a: s.a[..cap].to_vec(),
            level_classes: s.level_classes[..cap].to_vec(),
            removals: s.removals[..cap].to_vec(),
            ..s.clone()
        })
    }

    /// Measure of the level-`n` cylinders already decided inside.
    pub fn inside_measure(&self, n: usize) -> Rational {
        Rational::new(self.census[n].inside as i128, self.spec.size(n) as i128)
    }
}

fn validate(spec: &WindowSpec) -> Result<(), SpecError> {
    let cap = spec.cap();
    let err = |level, reason| Err(SpecError { level, reason });
    if cap == 0 {
        return err(0, "window has no levels");
    }
    if spec.level_classes.len() != cap || spec.removals.len() != cap || spec.a.len() != cap {
        return err(0, "per-level tables disagree with the number of levels");
    }
    let k = spec.kind.classes();
    if k == 0 {
        return err(0, "k must be at least 1");
    }
    for n in 1..=cap {
        if spec.classes[n - 1].is_empty() {
            return err(n, "empty transversal");
        }
        let j = spec.level_classes[n - 1];
        if j == 0 || j > k {
            return err(n, "level class outside 1..=k");
        }
        if n <= spec.partition_level && j != 1 {
            return err(n, "levels up to L must lie in N_1");
        }
    }
    let l = spec.partition_level;
    match spec.kind {
        WindowKind::Perf => {
            if l != 0 || !spec.boundary_classes.is_empty() {
                return err(0, "a perfect window has no boundary partition");
            }
        }
        WindowKind::K(_) | WindowKind::KTilde(_) => {
            if l == 0 || l > cap {
                return err(0, "partition level must lie in 1..=cap");
            }
        }
    }
    for (cyl, &j) in &spec.boundary_classes {
        if cyl.len() != l || j == 0 || j > k {
            return err(l, "malformed boundary class entry");
        }
        for (i, &d) in cyl.iter().enumerate() {
            if spec.classes[i].get(d as usize) != Some(&DigitClass::C) {
                return err(l, "boundary class entry is not a pending cylinder");
            }
        }
    }
    for n in 1..=cap {
        let Some(removal) = &spec.removals[n - 1] else { continue };
        if !matches!(spec.kind, WindowKind::KTilde(_)) || spec.level_classes[n - 1] != k {
            return err(n, "removals only happen in KTilde windows at levels of N_k");
        }
        match removal {
            Removal::PerParent { digit } => {
                if spec.classes[n - 1].get(*digit as usize) != Some(&DigitClass::A) {
                    return err(n, "removed digit is not an A digit");
                }
            }
            Removal::Single { cylinder } => {
                if cylinder.len() != n {
                    return err(n, "removed cylinder has the wrong level");
                }
                for (i, &d) in cylinder.iter().enumerate() {
                    let want = if i + 1 == n { DigitClass::A } else { DigitClass::C };
                    if spec.classes[i].get(d as usize) != Some(&want) {
                        return err(n, "removed cylinder is not an A-child of a pending cylinder");
                    }
                }
                let prefix = &cylinder[..n - 1];
                if n > l && spec.level_classes[n - 1] > spec.class_of(prefix) {
                    return err(n, "removed cylinder is not inside the window");
                }
            }
        }
    }
    Ok(())
}

fn count_tree(spec: &WindowSpec) -> Vec<LevelCensus> {
    let k = spec.kind.classes();
    let l = spec.partition_level;
    let by_class = |n: usize| l == 0 || n >= l;
    let mut census = Vec::with_capacity(spec.cap() + 1);
    census.push(LevelCensus {
        inside: 0,
        outside: 0,
        pending: 1,
        pending_by_class: if by_class(0) { alloc::vec![1] } else { Vec::new() },
    });
    for n in 1..=spec.cap() {
        let prev = &census[n - 1];
        let t = spec.radix(n) as u64;
        let mut level = LevelCensus {
            inside: prev.inside * t,
            outside: prev.outside * t,
            pending: 0,
            pending_by_class: if by_class(n) { alloc::vec![0; k] } else { Vec::new() },
        };
        let mut child = Vec::with_capacity(n);
        spec.for_each_pending(n - 1, |prefix| {
            child.clear();
            child.extend_from_slice(prefix);
            child.push(0);
            for d in 0..t as u32 {
                match spec.child_status(prefix, d) {
                    Status::In => level.inside += 1,
                    Status::Out => level.outside += 1,
                    Status::Pending => {
                        level.pending += 1;
                        if by_class(n) {
                            child[n - 1] = d;
                            level.pending_by_class[spec.class_of(&child) - 1] += 1;
                        }
                    }
                }
            }
        });
        census.push(level);
    }
    census
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BuildError {
    Chain(ChainError),
    Domain(DomainError),
    Parameter(String),
    Unsatisfiable { level: usize, detail: String },
    TooFewBoundaryCylinders { level: usize, found: usize, needed: usize },
    Spec(SpecError),
}

impl fmt::Display for BuildError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuildError::Chain(e) => write!(f, "{e}"),
            BuildError::Domain(e) => write!(f, "{e}"),
            BuildError::Parameter(s) => write!(f, "{s}"),
            BuildError::Unsatisfiable { level, detail } => {
                write!(f, "level {level} cannot be built: {detail}")
            }
            BuildError::TooFewBoundaryCylinders { level, found, needed } => write!(
                f,
                "only {found} pending cylinders at level {level}, need {needed}; use a larger partition level"
            ),
            BuildError::Spec(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for BuildError {}

impl From<ChainError> for BuildError {
    fn from(e: ChainError) -> Self {
        BuildError::Chain(e)
    }
}

impl From<DomainError> for BuildError {
    fn from(e: DomainError) -> Self {
        BuildError::Domain(e)
    }
}

impl From<SpecError> for BuildError {
    fn from(e: SpecError) -> Self {
        BuildError::Spec(e)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PerfParams {
    pub epsilon: Rational,
    /// `a_n` per level; the last entry repeats.
    pub a: Vec<usize>,
    pub cap: usize,
    /// Merge raw chain levels when a level cannot meet its constraints.
    pub telescope: bool,
}

impl PerfParams {
    fn a_at(&self, n: usize) -> usize {
        *self.a.get(n - 1).or(self.a.last()).unwrap_or(&3)
    }
}

/// What the builder decided at one level.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelReport {
    pub level: usize,
    pub modulus: u64,
    /// Raw chain levels merged into this one (1 when nothing was merged).
    pub raw_levels: usize,
    pub transversal: usize,
    pub boundary: usize,
    pub a: usize,
    pub c: usize,
    pub carry_range: usize,
}

/// A perfect window together with the domains it was built on.
#[derive(Clone, Debug)]
pub struct Built<G: ChainGroup> {
    pub domains: DomainSequence<G>,
    pub carries: CarryRange<G::Elem>,
    pub window: Window,
    pub levels: Vec<LevelReport>,
}

/// `(c/t)^{2^n} > 1 - ε`, i.e. `c/t > exp(-δ/2^n)` with `δ = -ln(1-ε)`.
pub fn level_ratio_ok(c: u64, t: u64, n: usize, epsilon: Rational) -> bool {
    let (p, q) = (*epsilon.numer() as u128, *epsilon.denom() as u128);
    let mut lhs = BigUint::from(c);
    let mut rhs = BigUint::from(t);
    for _ in 0..n {
        lhs = &lhs * &lhs;
        rhs = &rhs * &rhs;
    }
    lhs * BigUint::from(q) > rhs * BigUint::from(q - p)
}

/// Builds the perfectly self-similar window on `raw`, merging raw levels as
/// needed.
pub fn build_perf<G: ChainGroup>(raw: &G, params: &PerfParams) -> Result<Built<G>, BuildError> {
    let zero = Rational::from_integer(0);
    let one = Rational::from_integer(1);
    if params.epsilon <= zero || params.epsilon >= one {
        return Err(BuildError::Parameter("epsilon must lie strictly between 0 and 1".into()));
    }
    if params.cap == 0 || params.cap > 24 {
        return Err(BuildError::Parameter("cap must lie in 1..=24".into()));
    }
    for n in 1..=params.cap {
        if params.a_at(n) < 3 {
            return Err(BuildError::Parameter(alloc::format!(
                "a_{n} = {} but at least 3 is required so two A digits remain",
                params.a_at(n)
            )));
        }
    }

    let mut chosen: Vec<u64> = Vec::new();
    let mut next_raw = 0usize;
    let mut closure = CarryClosure::new(raw);
    let mut ranges = Vec::new();
    let mut classes = Vec::new();
    let mut reports = Vec::new();
    let mut a_used = Vec::new();

    for n in 1..=params.cap {
        let carries: Vec<G::Elem> = closure.range().into_keys().collect();
        ranges.push(closure.range());
        let a = params.a_at(n);
        let mut r = next_raw;
        let mut last_failure = String::from("the raw chain has no levels left");
        let (ds, level_classes, report) = loop {
            if r >= raw.depth() {
                return Err(BuildError::Unsatisfiable { level: n, detail: last_failure });
            }
            let mut moduli = chosen.clone();
            moduli.push(raw.moduli()[r]);
            let ds = DomainSequence::build(raw.with_moduli(moduli)?, n)?;
            let t = ds.transversal(n);
            let on_boundary: Vec<bool> = t
                .iter()
                .map(|x| carries.iter().any(|k| !ds.contains(&ds.group().mul(k, x), n)))
                .collect();
            let eligible: Vec<usize> = (0..t.len()).filter(|&i| !on_boundary[i]).collect();
            let boundary = t.len() - eligible.len();
            if eligible.len() > a {
                let c = eligible.len() - a;
                if level_ratio_ok(c as u64, t.len() as u64, n, params.epsilon) {
                    let mut cls = alloc::vec![DigitClass::A; t.len()];
                    for &i in &eligible[a..] {
                        cls[i] = DigitClass::C;
                    }
                    let b = eligible[..a].iter().copied().find(|&i| i != 0).expect("a >= 3");
                    cls[b] = DigitClass::B;
                    let report = LevelReport {
                        level: n,
                        modulus: raw.moduli()[r],
                        raw_levels: r + 1 - next_raw,
                        transversal: t.len(),
                        boundary,
                        a,
                        c,
                        carry_range: carries.len(),
                    };
                    break (ds, cls, report);
                }
                last_failure = alloc::format!(
                    "(#C/#T)^(2^{n}) = ({c}/{})^{} must exceed 1 - epsilon = {}",
                    t.len(),
                    1u64 << n,
                    one - params.epsilon
                );
            } else {
                last_failure = alloc::format!(
                    "#T - #boundary = {} - {boundary} leaves no C digits after a_{n} = {a}",
                    t.len()
                );
            }
            if !params.telescope {
                return Err(BuildError::Unsatisfiable { level: n, detail: last_failure });
            }
            r += 1;
        };
        chosen.push(report.modulus);
        next_raw = r + 1;
        if n < params.cap {
            closure.advance(&ds, n);
        }
        classes.push(level_classes);
        reports.push(report);
        a_used.push(a);
    }

    let domains = DomainSequence::build(raw.with_moduli(chosen)?, params.cap)?;
    let spec = WindowSpec {
        kind: WindowKind::Perf,
        classes,
        a: a_used,
        epsilon: params.epsilon,
        partition_level: 0,
        boundary_classes: BTreeMap::new(),
        level_classes: alloc::vec![1; params.cap],
        removals: alloc::vec![None; params.cap],
    };
    Ok(Built {
        domains,
        carries: CarryRange::from_levels(ranges),
        window: Window::new(spec)?,
        levels: reports,
    })
}

/// `∂_K(D_n) = {g : K^{-1}g meets both D_n and its complement}`.
pub fn vanhove_boundary<G: ChainGroup>(ds: &DomainSequence<G>, k: &[G::Elem], n: usize) -> Vec<G::Elem> {
    let grp = ds.group();
    let k_inv: Vec<G::Elem> = k.iter().map(|x| grp.inv(x)).collect();
    let mut out = BTreeSet::new();
    for (_, d) in ds.elements(n) {
        for x in k {
            let g = grp.mul(x, &d);
            if k_inv.iter().any(|y| !ds.contains(&grp.mul(y, &g), n)) {
                out.insert(g);
            }
        }
    }
    out.into_iter().collect()
}

/// `W^(k)`: boundary classes `H_1..H_k` at level `L` and level classes
/// `N_j`, keeping the pending tree of `perf`.
pub fn build_k(perf: &Window, k: usize, partition_level: usize) -> Result<Window, BuildError> {
    let cap = perf.cap();
    if perf.kind() != WindowKind::Perf {
        return Err(BuildError::Parameter("build_k needs a perfect window".into()));
    }
    if k == 0 {
        return Err(BuildError::Parameter("k must be at least 1".into()));
    }
    if partition_level == 0 || partition_level > cap {
        return Err(BuildError::Parameter("partition level must lie in 1..=cap".into()));
    }
    let l = partition_level;
    let pending = perf.spec().pending_cylinders(l);
    let needed = (k + 1).max(2);
    if pending.len() < needed {
        return Err(BuildError::TooFewBoundaryCylinders { level: l, found: pending.len(), needed });
    }
    let split = pending.len() - 2;
    let boundary_classes = pending
        .into_iter()
        .enumerate()
        .map(|(i, cyl)| (cyl, if i >= split { k } else { 1 + i % k }))
        .collect();
    let level_classes = (1..=cap).map(|n| if n <= l { 1 } else { 1 + (n - l - 1) % k }).collect();
    let spec = WindowSpec {
        kind: WindowKind::K(k),
        partition_level: l,
        boundary_classes,
        level_classes,
        ..perf.spec().clone()
    };
    Ok(Window::new(spec)?)
}

/// `W̃^(k)`: flips the cylinders `E_n` of `rule` from inside to outside at
/// every level of `N_k` beyond `L`.
pub fn build_ktilde(kwin: &Window, rule: ERule) -> Result<Window, BuildError> {
    let WindowKind::K(k) = kwin.kind() else {
        return Err(BuildError::Parameter("build_ktilde needs a K(k) window".into()));
    };
    let base = kwin.spec();
    let l = base.partition_level;
    let mut removals = alloc::vec![None; base.cap()];
    let mut round = 0usize;
    let mut visits: BTreeMap<usize, usize> = BTreeMap::new();
    for n in 1..=base.cap() {
        // A removal at or below L would sit under the only witness of some
        // lower level when k = 1; finitely many levels do not affect the boundary.
        if n <= l || base.level_classes[n - 1] != k || rule == ERule::Keep {
            continue;
        }
        let first_a = base.positions(n, DigitClass::A)[0];
        removals[n - 1] = Some(match rule {
            ERule::PerParent => Removal::PerParent { digit: first_a },
            _ => {
                // Ruler-sequence depths visit every level infinitely often and
                // each visit moves to the next pending cylinder there.
                let depth = (l + (round + 1).trailing_zeros() as usize).min(n - 1);
                let targets: Vec<Vec<u32>> =
                    base.pending_cylinders(depth).into_iter().filter(|c| base.class_of(c) == k).collect();
                let seen = visits.entry(depth).or_insert(0);
                let mut cylinder = targets[*seen % targets.len()].clone();
                *seen += 1;
                for j in depth + 1..n {
                    cylinder.push(base.positions(j, DigitClass::C)[0]);
                }
                cylinder.push(first_a);
                Removal::Single { cylinder }
            }
        });
        round += 1;
    }
    let spec = WindowSpec { kind: WindowKind::KTilde(k), removals, ..base.clone() };
    Ok(Window::new(spec)?)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenericityReport {
    /// Levels with `1_G ∈ C_n`.
    pub identity_in_c: Vec<usize>,
    /// Digits of `τ(1_G)` when it stays pending to the cap.
    pub identity_witness: Option<Vec<u32>>,
    /// Digits of some `g ∈ D_{cap-1}` with `τ(g) ∈ Z_cap`.
    pub element_witness: Option<Vec<u32>>,
    pub checked: u64,
    pub exhaustive: bool,
    pub pass: bool,
}

/// `1_G ∉ C_n` at every level, and `τ(g) ∉ Z_cap` for every `g ∈ D_{cap-1}`
/// (at most `budget` of them).
pub fn check_genericity<G: ChainGroup>(window: &Window, ds: &DomainSequence<G>, budget: u64) -> GenericityReport {
    let spec = window.spec();
    let cap = spec.cap();
    let identity_in_c: Vec<usize> =
        (1..=cap).filter(|&n| spec.classes[n - 1][0] == DigitClass::C).collect();
    let zeros = alloc::vec![0u32; cap];
    let identity_witness = matches!(spec.classify_digits(&zeros), Membership::Pending(_)).then_some(zeros);
    let mut element_witness = None;
    let mut checked = 0u64;
    let total = ds.size(cap - 1);
    for (_, g) in ds.elements(cap - 1).take(budget as usize) {
        checked += 1;
        let (digits, _) = ds.digit_indices(&g, cap);
        if matches!(spec.classify_digits(&digits), Membership::Pending(_)) {
            element_witness = Some(digits);
            break;
        }
    }
    let pass = identity_in_c.is_empty() && identity_witness.is_none() && element_witness.is_none();
    GenericityReport { identity_in_c, identity_witness, element_witness, checked, exhaustive: checked == total, pass }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IrredundancyLevel {
    /// Level of the parent cylinder.
    pub level: usize,
    /// A pending cylinder with exactly one outside child.
    pub witness: Option<Vec<u32>>,
    /// Whether the witness lies in `H_k`.
    pub in_last_class: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IrredundancyReport {
    pub levels: Vec<IrredundancyLevel>,
    pub pass: bool,
}

/// Finds, for every level `n < cap`, a pending cylinder with exactly one
/// outside child. From level `L` on the search starts inside `H_k`.
pub fn check_irredundancy(window: &Window) -> IrredundancyReport {
    let spec = window.spec();
    let k = spec.kind.classes();
    let l = spec.partition_level;
    let mut levels = Vec::new();
    for n in 0..spec.cap() {
        let t = spec.radix(n + 1) as u32;
        let mut in_class = None;
        let mut any = None;
        spec.for_each_pending(n, |prefix| {
            if in_class.is_some() {
                return;
            }
            let out = (0..t).filter(|&d| spec.child_status(prefix, d) == Status::Out).count();
            if out == 1 {
                let last = l > 0 && n >= l && spec.class_of(prefix) == k;
                if last {
                    in_class = Some(prefix.to_vec());
                } else if any.is_none() {
                    any = Some(prefix.to_vec());
                }
            }
        });
        let in_last_class = in_class.is_some();
        levels.push(IrredundancyLevel { level: n, witness: in_class.or(any), in_last_class });
    }
    let pass = levels.iter().all(|l| l.witness.is_some());
    IrredundancyReport { levels, pass }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SelfSimilarityReport<E> {
    pub levels: usize,
    /// `(n, k, c)` with `k ∈ K_n`, `c ∈ C_n` and `k·c ∉ D_n`.
    pub failure: Option<(usize, E, E)>,
    pub pass: bool,
}

/// `K_n · C_n ⊆ D_n` at every level, by enumeration.
pub fn check_self_similarity<G: ChainGroup>(
    window: &Window,
    ds: &DomainSequence<G>,
    carries: &CarryRange<G::Elem>,
) -> SelfSimilarityReport<G::Elem> {
    let spec = window.spec();
    let levels = spec.cap().min(carries.depth());
    for n in 1..=levels {
        for i in spec.positions(n, DigitClass::C) {
            let c = ds.digit(n, i);
            for k in carries.set(n) {
                if !ds.contains(&ds.group().mul(k, c), n) {
                    return SelfSimilarityReport { levels, failure: Some((n, k.clone(), c.clone())), pass: false };
                }
            }
        }
    }
    SelfSimilarityReport { levels, failure: None, pass: levels == spec.cap() }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConsistencyError {
    pub level: usize,
    pub formula: Rational,
    pub counted: Rational,
}

impl fmt::Display for ConsistencyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "level {}: product formula {} differs from count {}", self.level, self.formula, self.counted)
    }
}

impl core::error::Error for ConsistencyError {}

/// `ν(Z_n) = ∏ #C_k/#T_{k-1}`, cross-checked against the pending count.
pub fn boundary_measure(window: &Window, n: usize) -> Result<Rational, ConsistencyError> {
    let spec = window.spec();
    let formula = (1..=n).fold(Rational::from_integer(1), |acc, j| {
        acc * Rational::new(spec.count(j, DigitClass::C) as i128, spec.radix(j) as i128)
    });
    let counted = window.pending_measure(n);
    if formula == counted {
        Ok(formula)
    } else {
        Err(ConsistencyError { level: n, formula, counted })
    }
}

/// First level where the pending cylinders of two windows differ.
pub fn pending_diff(a: &Window, b: &Window) -> Option<usize> {
    if a.cap() != b.cap() {
        return Some(a.cap().min(b.cap()) + 1);
    }
    (1..=a.cap()).find(|&n| a.spec().pending_cylinders(n) != b.spec().pending_cylinders(n))
}
