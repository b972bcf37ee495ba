//! Model sets cut out by a window: `x_W(g) = 1` iff `τ(g)·ξ ∈ W`.

use alloc::vec::Vec;

use crate::expansion::DomainSequence;
use crate::group::ChainGroup;
use crate::odometer::{odo_mul, OdometerPoint};
use crate::window::{boundary_measure, ConsistencyError, Window};
use crate::Rational;

/// Where a point lands, with the level that decided it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Membership {
    In(usize),
    Out(usize),
    /// Every digit up to this level stayed in the `C` sets.
    Pending(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Symbol {
    Zero,
    One,
    /// The point sits on the boundary at the certified level.
    Undecided,
}

impl From<Membership> for Symbol {
    fn from(m: Membership) -> Self {
        match m {
            Membership::In(_) => Symbol::One,
            Membership::Out(_) => Symbol::Zero,
            Membership::Pending(_) => Symbol::Undecided,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatchEntry<E> {
    pub element: E,
    /// Digits of `τ(g)·ξ` at the patch level.
    pub digits: Vec<u32>,
    pub membership: Membership,
}

impl<E> PatchEntry<E> {
    pub fn value(&self) -> Symbol {
        self.membership.into()
    }
}

/// A finite restriction of the shifted array `g ↦ [τ(g)·ξ ∈ W]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolicPatch<E> {
    pub xi: OdometerPoint,
    /// Precision at which every entry was classified.
    pub level: usize,
    pub entries: Vec<PatchEntry<E>>,
}

impl<E: PartialEq> SymbolicPatch<E> {
    pub fn value_at(&self, g: &E) -> Option<Symbol> {
        self.entries.iter().find(|e| e.element == *g).map(PatchEntry::value)
    }

    pub fn undecided(&self) -> usize {
        self.entries.iter().filter(|e| e.membership == Membership::Pending(self.level)).count()
    }
}

/// First level at which the digits of `x` leave the pending tree.
pub fn classify(window: &Window, x: &OdometerPoint) -> Membership {
    window.spec().classify_digits(x.digits())
}

/// Digits of `τ(g)·ξ` at the window cap.
pub fn shifted_digits<G: ChainGroup>(ds: &DomainSequence<G>, g: &G::Elem, xi: &OdometerPoint, n: usize) -> Vec<u32> {
    let tau = OdometerPoint::embed(ds, g, n);
    let y = odo_mul(ds, &tau, xi, n).expect("ξ must carry at least the window cap in digits");
    y.digits().to_vec()
}

/// Values of the array shifted by `ξ` on `patch`.
pub fn emit_patch<G: ChainGroup>(
    window: &Window,
    ds: &DomainSequence<G>,
    xi: &OdometerPoint,
    patch: &[G::Elem],
) -> SymbolicPatch<G::Elem> {
    let level = window.cap();
    let entries = patch
        .iter()
        .map(|g| {
            let digits = shifted_digits(ds, g, xi, level);
            let membership = window.spec().classify_digits(&digits);
            PatchEntry { element: g.clone(), digits, membership }
        })
        .collect();
    SymbolicPatch { xi: xi.truncate(level), level, entries }
}

/// `D_m` in canonical order, the default patch.
pub fn domain_patch<G: ChainGroup>(ds: &DomainSequence<G>, m: usize) -> Vec<G::Elem> {
    ds.elements(m).map(|(_, g)| g).collect()
}

/// `D_n` split by periodicity at level `n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PerSets<E> {
    /// `[τ(g)]_n ⊆ int W`.
    pub ones: Vec<E>,
    /// `[τ(g)]_n ∩ W = ∅`.
    pub zeros: Vec<E>,
    /// `[τ(g)]_n ⊆ Z_n`.
    pub aperiodic: Vec<E>,
}

pub fn per_sets<G: ChainGroup>(window: &Window, ds: &DomainSequence<G>, n: usize) -> PerSets<G::Elem> {
    let mut sets = PerSets { ones: Vec::new(), zeros: Vec::new(), aperiodic: Vec::new() };
    for (digits, g) in ds.elements(n) {
        match window.spec().classify_digits(&digits) {
            Membership::In(_) => sets.ones.push(g),
            Membership::Out(_) => sets.zeros.push(g),
            Membership::Pending(_) => sets.aperiodic.push(g),
        }
    }
    sets
}

/// Smallest `n` with `g ∈ Per(x_W, Γ_n)`, if it is at most the cap.
pub fn period_level<G: ChainGroup>(window: &Window, ds: &DomainSequence<G>, g: &G::Elem) -> Option<usize> {
    let (digits, _) = ds.digit_indices(g, window.cap());
    match window.spec().classify_digits(&digits) {
        Membership::In(n) | Membership::Out(n) => Some(n),
        Membership::Pending(_) => None,
    }
}

/// `d_n = #(D_n ∩ Per(x_W, Γ_n))/#D_n`, checked against `1 - ν(Z_n)`.
pub fn regularity<G: ChainGroup>(window: &Window, ds: &DomainSequence<G>, n: usize) -> Result<Rational, ConsistencyError> {
    let sets = per_sets(window, ds, n);
    let size = ds.size(n) as i128;
    let periodic = Rational::new((sets.ones.len() + sets.zeros.len()) as i128, size);
    let boundary = boundary_measure(window, n)?;
    let complement = Rational::from_integer(1) - boundary;
    if periodic == complement {
        Ok(periodic)
    } else {
        Err(ConsistencyError { level: n, formula: complement, counted: periodic })
    }
}
