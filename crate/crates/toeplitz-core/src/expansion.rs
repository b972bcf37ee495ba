//! Fundamental domains `D_n = D_{n-1}·T_{n-1}`, digit expansions
//! `g = π_1(g)·π_2(g)⋯`, and digitwise multiplication with carries.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;

use crate::group::{ChainGroup, CosetLabel};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DomainError {
    /// The requested cap exceeds the chain's schedule.
    ChainTooShort { cap: usize, depth: usize },
    Transversal { level: usize, reason: &'static str },
    /// `g` has no finite expansion within the built levels.
    NotInDomain { cap: usize },
}

impl fmt::Display for DomainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainError::ChainTooShort { cap, depth } => {
                write!(f, "cap {cap} exceeds the {depth} levels of the chain")
            }
            DomainError::Transversal { level, reason } => {
                write!(f, "transversal at level {level}: {reason}")
            }
            DomainError::NotInDomain { cap } => write!(f, "element does not lie in D_{cap}"),
        }
    }
}

impl core::error::Error for DomainError {}

/// The finite digit list `(π_1(g), …, π_{N(g)+1}(g))`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Digits<E> {
    pub coefficients: Vec<E>,
}

impl<E> Digits<E> {
    /// `N(g)`: the least `N` with `g ∈ D_{N+1}`.
    pub fn top(&self) -> usize {
        self.coefficients.len() - 1
    }
}

/// One level of a carry computation where conjugation moved the digit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Twist<E> {
    pub level: usize,
    pub digit: E,
    pub prefix: E,
    pub conjugate: E,
}

/// Output of [`DomainSequence::carry_mul`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CarryTrace<E> {
    /// `π_1(gh), …, π_n(gh)`.
    pub digits: Vec<E>,
    /// `d_1, …, d_{n+1}`.
    pub carries: Vec<E>,
    pub twists: Vec<Twist<E>>,
}

impl<E: Clone> CarryTrace<E> {
    pub fn carry(&self) -> &E {
        self.carries.last().expect("carry chain starts with d_1")
    }
}

/// The sets `K_1, …, K_n` of attainable carries, each element with a pair
/// `(g, h)` realizing it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CarryRange<E> {
    levels: Vec<BTreeMap<E, (E, E)>>,
}

impl<E: Ord + Clone> CarryRange<E> {
    pub(crate) fn from_levels(levels: Vec<BTreeMap<E, (E, E)>>) -> Self {
        CarryRange { levels }
    }

    /// Highest `j` with `K_j` computed.
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn set(&self, j: usize) -> impl Iterator<Item = &E> {
        self.levels[j - 1].keys()
    }

    pub fn len(&self, j: usize) -> usize {
        self.levels[j - 1].len()
    }

    pub fn contains(&self, j: usize, d: &E) -> bool {
        self.levels[j - 1].contains_key(d)
    }

    pub fn witness(&self, j: usize, d: &E) -> Option<&(E, E)> {
        self.levels[j - 1].get(d)
    }
}

/// Fundamental domains built from canonical residue transversals.
#[derive(Clone, Debug)]
pub struct DomainSequence<G: ChainGroup> {
    group: G,
    transversals: Vec<Vec<G::Elem>>,
}

impl<G: ChainGroup> DomainSequence<G> {
    /// Builds `D_1 ⊆ … ⊆ D_cap`, validating every transversal.
    pub fn build(group: G, cap: usize) -> Result<Self, DomainError> {
        if cap > group.depth() {
            return Err(DomainError::ChainTooShort { cap, depth: group.depth() });
        }
        let mut transversals = Vec::with_capacity(cap);
        for n in 1..=cap {
            let t = group.transversal(n);
            check_transversal(&group, &t, n)?;
            transversals.push(t);
        }
        Ok(DomainSequence { group, transversals })
    }

    pub fn group(&self) -> &G {
        &self.group
    }

    pub fn cap(&self) -> usize {
        self.transversals.len()
    }

    /// `T_{n-1}`.
    pub fn transversal(&self, n: usize) -> &[G::Elem] {
        &self.transversals[n - 1]
    }

    pub fn radix(&self, n: usize) -> usize {
        self.transversals[n - 1].len()
    }

    /// `#D_n`.
    pub fn size(&self, n: usize) -> u64 {
        self.group.index(n)
    }

    pub fn digit(&self, n: usize, index: u32) -> &G::Elem {
        &self.transversals[n - 1][index as usize]
    }

    /// Position of `t ∈ T_{n-1}`. Panics if `t` is not a level-`n` digit.
    pub fn digit_index(&self, t: &G::Elem, n: usize) -> u32 {
        self.group.transversal_position(t, n).expect("not a transversal element") as u32
    }

    pub fn project(&self, g: &G::Elem, n: usize) -> CosetLabel {
        self.group.project(g, n)
    }

    /// `(ψ_n(g), φ_n(g))` with `g = ψ_n(g)·φ_n(g)`.
    pub fn decompose(&self, g: &G::Elem, n: usize) -> (G::Elem, G::Elem) {
        let mut psi = self.group.identity();
        let mut phi = g.clone();
        for j in 1..=n {
            let t = self.group.reduce(&phi, j);
            phi = self.group.mul(&self.group.inv(&t), &phi);
            psi = self.group.mul(&psi, &t);
        }
        (psi, phi)
    }

    /// `π_1(g), …, π_n(g)` as transversal positions, and `φ_n(g)`.
    pub fn digit_indices(&self, g: &G::Elem, n: usize) -> (Vec<u32>, G::Elem) {
        let mut out = Vec::with_capacity(n);
        let mut phi = g.clone();
        for j in 1..=n {
            let t = self.group.reduce(&phi, j);
            out.push(self.digit_index(&t, j));
            phi = self.group.mul(&self.group.inv(&t), &phi);
        }
        (out, phi)
    }

    pub fn contains(&self, g: &G::Elem, n: usize) -> bool {
        self.decompose(g, n).1 == self.group.identity()
    }

    /// The finite expansion of `g`, if `g ∈ D_cap`.
    pub fn expand(&self, g: &G::Elem) -> Result<Digits<G::Elem>, DomainError> {
        let e = self.group.identity();
        if *g == e {
            return Ok(Digits { coefficients: alloc::vec![e] });
        }
        let mut coefficients = Vec::new();
        let mut phi = g.clone();
        for j in 1..=self.cap() {
            let t = self.group.reduce(&phi, j);
            phi = self.group.mul(&self.group.inv(&t), &phi);
            coefficients.push(t);
            if phi == e {
                return Ok(Digits { coefficients });
            }
        }
        Err(DomainError::NotInDomain { cap: self.cap() })
    }

    /// Product of the digits with the given positions.
    pub fn compose(&self, indices: &[u32]) -> G::Elem {
        indices
            .iter()
            .enumerate()
            .fold(self.group.identity(), |acc, (j, &i)| self.group.mul(&acc, self.digit(j + 1, i)))
    }

    /// All of `D_n` in mixed-radix order, first digit fastest.
    pub fn elements(&self, n: usize) -> DomainIter<'_, G> {
        DomainIter::new(self, n)
    }

    /// Digitwise product: returns `π_1(gh), …, π_n(gh)` and the carries,
    /// using only the recursion
    /// `c_j = d_j · ψ_{j-1}(h)^{-1} π_j(g) ψ_{j-1}(h) · π_j(h)`,
    /// `π_j(gh) = ψ_j(c_j)`, `d_{j+1} = φ_j(c_j)`, `d_1 = 1`.
    ///
    /// Missing digits are the identity.
    pub fn carry_mul(&self, dg: &[G::Elem], dh: &[G::Elem], n: usize) -> CarryTrace<G::Elem> {
        let g = &self.group;
        let e = g.identity();
        let mut d = e.clone();
        let mut prefix = e.clone();
        let mut digits = Vec::with_capacity(n);
        let mut carries = Vec::with_capacity(n + 1);
        let mut twists = Vec::new();
        carries.push(d.clone());
        for j in 1..=n {
            let p = dg.get(j - 1).unwrap_or(&e);
            let q = dh.get(j - 1).unwrap_or(&e);
            let moved = g.conj(p, &prefix);
            if moved != *p {
                twists.push(Twist {
                    level: j,
                    digit: p.clone(),
                    prefix: prefix.clone(),
                    conjugate: moved.clone(),
                });
            }
            let c = g.mul(&g.mul(&d, &moved), q);
            // c ∈ Γ_{j-1}, so ψ_j(c) is its residue and lies in T_{j-1}.
            let t = g.reduce(&c, j);
            d = g.mul(&g.inv(&t), &c);
            digits.push(t);
            carries.push(d.clone());
            prefix = g.mul(&prefix, q);
        }
        CarryTrace { digits, carries, twists }
    }

    /// Exact `K_1, …, K_up_to` by closing the reachable states
    /// `(d_j, ψ_{j-1}(h))` under one more pair of digits.
    pub fn carry_ranges(&self, up_to: usize) -> CarryRange<G::Elem> {
        let mut closure = CarryClosure::new(&self.group);
        let mut levels = alloc::vec![closure.range()];
        for j in 1..up_to {
            closure.advance(self, j);
            levels.push(closure.range());
        }
        CarryRange::from_levels(levels)
    }

    /// Exhaustive check of the domain axioms at level `n`: `D_n` meets every
    /// coset of `Γ_n` once, contains `D_{n-1}`, and `D_n ∩ Γ_{n-1} = T_{n-1}`.
    pub fn verify_level(&self, n: usize) -> Result<(), DomainError> {
        let err = |reason| Err(DomainError::Transversal { level: n, reason });
        let mut labels = BTreeSet::new();
        let mut in_previous = 0u64;
        for (digits, g) in self.elements(n) {
            if !labels.insert(self.project(&g, n).label) {
                return err("two elements of D_n share a coset");
            }
            if self.decompose(&g, n).0 != g {
                return err("element of D_n is not its own representative");
            }
            if self.group.in_subgroup(&g, n - 1) {
                in_previous += 1;
                if digits[..n - 1].iter().any(|&i| i != 0) {
                    return err("D_n meets Γ_{n-1} outside T_{n-1}");
                }
            }
        }
        if labels.len() as u64 != self.size(n) {
            return err("D_n misses a coset");
        }
        if in_previous != self.radix(n) as u64 {
            return err("D_n ∩ Γ_{n-1} has the wrong size");
        }
        if n > 1 {
            for (_, g) in self.elements(n - 1) {
                if !self.contains(&g, n) {
                    return err("D_{n-1} is not contained in D_n");
                }
            }
        }
        Ok(())
    }
}

fn check_transversal<G: ChainGroup>(group: &G, t: &[G::Elem], n: usize) -> Result<(), DomainError> {
    let err = |reason| Err(DomainError::Transversal { level: n, reason });
    if t.first() != Some(&group.identity()) {
        return err("identity must come first");
    }
    if t.len() as u64 != group.radix(n) {
        return err("size differs from the subgroup index");
    }
    let mut seen = BTreeSet::new();
    for x in t {
        if n > 1 && !group.in_subgroup(x, n - 1) {
            return err("element outside Γ_{n-1}");
        }
        if !seen.insert(group.project(x, n).label) {
            return err("two elements in the same coset");
        }
    }
    Ok(())
}

/// Iterator over `D_n` yielding digit positions and the element.
pub struct DomainIter<'a, G: ChainGroup> {
    ds: &'a DomainSequence<G>,
    digits: Vec<u32>,
    // prefixes[j] = product of the first j digits
    prefixes: Vec<G::Elem>,
    done: bool,
}

impl<'a, G: ChainGroup> DomainIter<'a, G> {
    fn new(ds: &'a DomainSequence<G>, n: usize) -> Self {
        let e = ds.group.identity();
        DomainIter { ds, digits: alloc::vec![0; n], prefixes: alloc::vec![e; n + 1], done: false }
    }
}

impl<G: ChainGroup> Iterator for DomainIter<'_, G> {
    type Item = (Vec<u32>, G::Elem);

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let n = self.digits.len();
        let item = (self.digits.clone(), self.prefixes[n].clone());
        let mut j = 0;
        loop {
            if j == n {
                self.done = true;
                break;
            }
            self.digits[j] += 1;
            if (self.digits[j] as usize) < self.ds.radix(j + 1) {
                break;
            }
            self.digits[j] = 0;
            j += 1;
        }
        if !self.done {
            let g = &self.ds.group;
            for i in 0..n {
                self.prefixes[i + 1] = g.mul(&self.prefixes[i], self.ds.digit(i + 1, self.digits[i]));
            }
        }
        Some(item)
    }
}

/// Reachable carry states `(d_j, ψ_{j-1}(h))`, each with a witness pair
/// `(ψ_{j-1}(g), ψ_{j-1}(h))`.
pub(crate) struct CarryClosure<G: ChainGroup> {
    states: BTreeMap<(G::Elem, G::Elem), (G::Elem, G::Elem)>,
}

impl<G: ChainGroup> CarryClosure<G> {
    pub(crate) fn new(group: &G) -> Self {
        let e = group.identity();
        let mut states = BTreeMap::new();
        states.insert((e.clone(), e.clone()), (e.clone(), e));
        CarryClosure { states }
    }

    pub(crate) fn range(&self) -> BTreeMap<G::Elem, (G::Elem, G::Elem)> {
        let mut out = BTreeMap::new();
        for ((d, _), w) in &self.states {
            out.entry(d.clone()).or_insert_with(|| w.clone());
        }
        out
    }

    /// Moves from states at level `j` to level `j + 1` using `T_{j-1}`.
    pub(crate) fn advance(&mut self, ds: &DomainSequence<G>, j: usize) {
        let g = ds.group();
        let t = ds.transversal(j);
        let abelian = g.is_abelian();
        let e = g.identity();
        let mut next = BTreeMap::new();
        for ((d, s), (wg, wh)) in &self.states {
            for p in t {
                let moved = g.conj(p, s);
                let left = g.mul(d, &moved);
                for q in t {
                    let c = g.mul(&left, q);
                    let r = g.reduce(&c, j);
                    let d_next = g.mul(&g.inv(&r), &c);
                    // Abelian carries do not depend on ψ_{j-1}(h).
                    let s_next = if abelian { e.clone() } else { g.mul(s, q) };
                    next.entry((d_next, s_next)).or_insert_with(|| (g.mul(wg, p), g.mul(wh, q)));
                }
            }
        }
        self.states = next;
    }
}
