//! Concrete residually finite groups together with a descending chain of
//! finite-index normal subgroups `Γ_1 ⊇ Γ_2 ⊇ …` with trivial intersection.
//!
//! Every shipped chain is a congruence chain: `Γ_n` is the kernel of
//! reduction modulo `m_n`, where `m_1 | m_2 | …` strictly increase. Coset
//! representatives are the componentwise nonnegative residues.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::hash::Hash;

/// Label of the coset `gΓ_n`. The identity coset has label 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CosetLabel {
    pub level: usize,
    pub label: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ChainError {
    Empty,
    NotRefining { level: usize, previous: u64, next: u64 },
    IndexOverflow { level: usize },
}

impl fmt::Display for ChainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChainError::Empty => write!(f, "modulus schedule is empty"),
            ChainError::NotRefining { level, previous, next } => write!(
                f,
                "modulus {next} at level {level} is not a proper multiple of {previous}"
            ),
            ChainError::IndexOverflow { level } => {
                write!(f, "subgroup index at level {level} does not fit in 64 bits")
            }
        }
    }
}

impl core::error::Error for ChainError {}

/// Which shipped family a chain belongs to. Used by file formats.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GroupKind {
    Lattice(usize),
    Heisenberg,
}

impl GroupKind {
    pub fn name(self) -> String {
        match self {
            GroupKind::Lattice(1) => String::from("Z"),
            GroupKind::Lattice(d) => alloc::format!("Z{d}"),
            GroupKind::Heisenberg => String::from("Heisenberg"),
        }
    }

    /// Number of integer coordinates of an element.
    pub fn dimension(self) -> usize {
        match self {
            GroupKind::Lattice(d) => d,
            GroupKind::Heisenberg => 3,
        }
    }
}

/// A group with a congruence-style subgroup chain.
///
/// Levels are 1-based. `transversal(n)` is `T_{n-1}`, a set of canonical
/// representatives of `Γ_{n-1}/Γ_n` lying in `Γ_{n-1}`, identity first.
pub trait ChainGroup: Clone + fmt::Debug + Send + Sync {
    type Elem: Clone + Eq + Ord + Hash + fmt::Debug + Send + Sync;

    fn kind(&self) -> GroupKind;
    fn identity(&self) -> Self::Elem;
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn inv(&self, a: &Self::Elem) -> Self::Elem;
    fn is_abelian(&self) -> bool;

    /// `g^{-1} h g`.
    fn conj(&self, h: &Self::Elem, g: &Self::Elem) -> Self::Elem {
        let g_inv = self.inv(g);
        self.mul(&self.mul(&g_inv, h), g)
    }

    /// The moduli `m_1, m_2, …` of the chain. `m_0 = 1` is implicit.
    fn moduli(&self) -> &[u64];

    /// A chain of the same family with a different modulus schedule.
    fn with_moduli(&self, moduli: Vec<u64>) -> Result<Self, ChainError>;

    /// `[G : Γ_n]`, with `[G : Γ_0] = 1`.
    fn index(&self, n: usize) -> u64;

    fn project(&self, g: &Self::Elem, n: usize) -> CosetLabel;

    /// The canonical representative of `gΓ_n`: coordinates reduced mod `m_n`.
    fn reduce(&self, g: &Self::Elem, n: usize) -> Self::Elem;

    /// `T_{n-1}` in canonical order, identity first.
    fn transversal(&self, n: usize) -> Vec<Self::Elem>;

    /// Position of `t` inside `transversal(n)`, if it is there.
    fn transversal_position(&self, t: &Self::Elem, n: usize) -> Option<usize>;

    fn coordinates(&self, g: &Self::Elem) -> Vec<i64>;
    fn from_coordinates(&self, coords: &[i64]) -> Option<Self::Elem>;

    fn depth(&self) -> usize {
        self.moduli().len()
    }

    fn modulus(&self, n: usize) -> u64 {
        if n == 0 {
            1
        } else {
            self.moduli()[n - 1]
        }
    }

    /// `#T_{n-1} = [Γ_{n-1} : Γ_n]`.
    fn radix(&self, n: usize) -> u64 {
        self.index(n) / self.index(n - 1)
    }

    fn in_subgroup(&self, g: &Self::Elem, n: usize) -> bool {
        self.project(g, n).label == 0
    }
}

fn add(a: i64, b: i64) -> i64 {
    a.checked_add(b).expect("group arithmetic overflow")
}

fn times(a: i64, b: i64) -> i64 {
    a.checked_mul(b).expect("group arithmetic overflow")
}

fn neg(a: i64) -> i64 {
    a.checked_neg().expect("group arithmetic overflow")
}

fn residue(x: i64, m: u64) -> i64 {
    x.rem_euclid(m as i64)
}

fn check_moduli(moduli: &[u64], dim: u32) -> Result<(), ChainError> {
    if moduli.is_empty() {
        return Err(ChainError::Empty);
    }
    let mut previous = 1u64;
    for (i, &m) in moduli.iter().enumerate() {
        if m <= previous || m % previous != 0 || m > i64::MAX as u64 {
            return Err(ChainError::NotRefining { level: i + 1, previous, next: m });
        }
        if m.checked_pow(dim).is_none() {
            return Err(ChainError::IndexOverflow { level: i + 1 });
        }
        previous = m;
    }
    Ok(())
}

/// `Z^D` with `Γ_n = m_n Z^D`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lattice<const D: usize> {
    moduli: Vec<u64>,
}

/// The integers with `Γ_n = m_n Z`.
pub type Integers = Lattice<1>;
/// The plane lattice with `Γ_n = m_n Z²`.
pub type Plane = Lattice<2>;

impl<const D: usize> Lattice<D> {
    pub fn new(moduli: Vec<u64>) -> Result<Self, ChainError> {
        check_moduli(&moduli, D as u32)?;
        Ok(Lattice { moduli })
    }

    /// The chain `m_n = base^n` for `n = 1..=levels`.
    pub fn powers(base: u64, levels: usize) -> Result<Self, ChainError> {
        Self::new(power_schedule(base, levels, D as u32)?)
    }
}

/// `base, base², …, base^levels`, stopping early rather than overflowing.
pub fn power_schedule(base: u64, levels: usize, dim: u32) -> Result<Vec<u64>, ChainError> {
    let mut out = Vec::with_capacity(levels);
    let mut m = 1u64;
    for level in 1..=levels {
        m = m
            .checked_mul(base)
            .filter(|v| v.checked_pow(dim).is_some() && *v <= i64::MAX as u64)
            .ok_or(ChainError::IndexOverflow { level })?;
        out.push(m);
    }
    Ok(out)
}

impl<const D: usize> ChainGroup for Lattice<D> {
    type Elem = [i64; D];

    fn kind(&self) -> GroupKind {
        GroupKind::Lattice(D)
    }

    fn identity(&self) -> [i64; D] {
        [0; D]
    }

    fn mul(&self, a: &[i64; D], b: &[i64; D]) -> [i64; D] {
        core::array::from_fn(|i| add(a[i], b[i]))
    }

    fn inv(&self, a: &[i64; D]) -> [i64; D] {
        core::array::from_fn(|i| neg(a[i]))
    }

    fn is_abelian(&self) -> bool {
        true
    }

    fn conj(&self, h: &[i64; D], _g: &[i64; D]) -> [i64; D] {
        *h
    }

    fn moduli(&self) -> &[u64] {
        &self.moduli
    }

    fn with_moduli(&self, moduli: Vec<u64>) -> Result<Self, ChainError> {
        Self::new(moduli)
    }

    fn index(&self, n: usize) -> u64 {
        self.modulus(n).pow(D as u32)
    }

    fn project(&self, g: &[i64; D], n: usize) -> CosetLabel {
        let m = self.modulus(n);
        let mut label = 0u64;
        for i in (0..D).rev() {
            label = label * m + residue(g[i], m) as u64;
        }
        CosetLabel { level: n, label }
    }

    fn reduce(&self, g: &[i64; D], n: usize) -> [i64; D] {
        let m = self.modulus(n);
        core::array::from_fn(|i| residue(g[i], m))
    }

    fn transversal(&self, n: usize) -> Vec<[i64; D]> {
        let step = self.modulus(n - 1) as i64;
        let r = (self.modulus(n) / self.modulus(n - 1)) as usize;
        let count = r.pow(D as u32);
        (0..count)
            .map(|mut idx| {
                core::array::from_fn(|_| {
                    let digit = idx % r;
                    idx /= r;
                    digit as i64 * step
                })
            })
            .collect()
    }

    fn transversal_position(&self, t: &[i64; D], n: usize) -> Option<usize> {
        let step = self.modulus(n - 1) as i64;
        let r = (self.modulus(n) / self.modulus(n - 1)) as i64;
        let mut pos = 0usize;
        for i in (0..D).rev() {
            if t[i] % step != 0 {
                return None;
            }
            let q = t[i] / step;
            if !(0..r).contains(&q) {
                return None;
            }
            pos = pos * r as usize + q as usize;
        }
        Some(pos)
    }

    fn coordinates(&self, g: &[i64; D]) -> Vec<i64> {
        g.to_vec()
    }

    fn from_coordinates(&self, coords: &[i64]) -> Option<[i64; D]> {
        coords.try_into().ok()
    }
}

/// An element `(a, b, c)` of the discrete Heisenberg group, i.e. the matrix
/// `[[1, a, c], [0, 1, b], [0, 0, 1]]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Heis {
    pub a: i64,
    pub b: i64,
    pub c: i64,
}

impl Heis {
    pub const fn new(a: i64, b: i64, c: i64) -> Self {
        Heis { a, b, c }
    }
}

/// `H₃(Z)` with `Γ_n` the kernel of reduction mod `m_n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Heisenberg {
    moduli: Vec<u64>,
}

impl Heisenberg {
    pub fn new(moduli: Vec<u64>) -> Result<Self, ChainError> {
        check_moduli(&moduli, 3)?;
        Ok(Heisenberg { moduli })
    }

    pub fn powers(base: u64, levels: usize) -> Result<Self, ChainError> {
        Self::new(power_schedule(base, levels, 3)?)
    }
}

impl ChainGroup for Heisenberg {
    type Elem = Heis;

    fn kind(&self) -> GroupKind {
        GroupKind::Heisenberg
    }

    fn identity(&self) -> Heis {
        Heis::new(0, 0, 0)
    }

    fn mul(&self, x: &Heis, y: &Heis) -> Heis {
        Heis {
            a: add(x.a, y.a),
            b: add(x.b, y.b),
            c: add(add(x.c, y.c), times(x.a, y.b)),
        }
    }

    fn inv(&self, x: &Heis) -> Heis {
        Heis { a: neg(x.a), b: neg(x.b), c: add(neg(x.c), times(x.a, x.b)) }
    }

    fn is_abelian(&self) -> bool {
        false
    }

    fn moduli(&self) -> &[u64] {
        &self.moduli
    }

    fn with_moduli(&self, moduli: Vec<u64>) -> Result<Self, ChainError> {
        Self::new(moduli)
    }

    fn index(&self, n: usize) -> u64 {
        self.modulus(n).pow(3)
    }

    fn project(&self, g: &Heis, n: usize) -> CosetLabel {
        let m = self.modulus(n);
        let r = self.reduce(g, n);
        let label = r.a as u64 + m * (r.b as u64 + m * r.c as u64);
        CosetLabel { level: n, label }
    }

    // Reduction mod m is a homomorphism onto H₃(Z/m), and the residue triple
    // differs from g by an element of its kernel.
    fn reduce(&self, g: &Heis, n: usize) -> Heis {
        let m = self.modulus(n);
        Heis { a: residue(g.a, m), b: residue(g.b, m), c: residue(g.c, m) }
    }

    fn transversal(&self, n: usize) -> Vec<Heis> {
        let step = self.modulus(n - 1) as i64;
        let r = (self.modulus(n) / self.modulus(n - 1)) as usize;
        let mut out = Vec::with_capacity(r * r * r);
        for c in 0..r {
            for b in 0..r {
                for a in 0..r {
                    out.push(Heis::new(a as i64 * step, b as i64 * step, c as i64 * step));
                }
            }
        }
        out
    }

    fn transversal_position(&self, t: &Heis, n: usize) -> Option<usize> {
        let step = self.modulus(n - 1) as i64;
        let r = (self.modulus(n) / self.modulus(n - 1)) as i64;
        let mut pos = 0usize;
        for x in [t.c, t.b, t.a] {
            if x % step != 0 || !(0..r).contains(&(x / step)) {
                return None;
            }
            pos = pos * r as usize + (x / step) as usize;
        }
        Some(pos)
    }

    fn coordinates(&self, g: &Heis) -> Vec<i64> {
        alloc::vec![g.a, g.b, g.c]
    }

    fn from_coordinates(&self, coords: &[i64]) -> Option<Heis> {
        match coords {
            [a, b, c] => Some(Heis::new(*a, *b, *c)),
            _ => None,
        }
    }
}
