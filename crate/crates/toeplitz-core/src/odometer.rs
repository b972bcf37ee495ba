//! Points of the odometer at finite precision, stored as digit positions.
//!
//! A point `ξ` is the digit stream `π_1(ξ), π_2(ξ), …` with
//! `π_j(ξ) ∈ T_{j-1}`; position `0` is always the identity digit.

use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::expansion::DomainSequence;
use crate::group::ChainGroup;
use crate::Rational;

/// A truncated odometer point.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct OdometerPoint {
    digits: Vec<u32>,
    /// Every digit past the stored ones is known to be the identity,
    /// i.e. the point is `τ(g)` for `g = ψ_m(ξ)`.
    terminates: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrecisionError {
    pub required: usize,
    pub available: usize,
}

impl fmt::Display for PrecisionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "needs precision {} but only {} digits are known", self.required, self.available)
    }
}

impl core::error::Error for PrecisionError {}

impl OdometerPoint {
    pub fn new(digits: Vec<u32>, terminates: bool) -> Self {
        OdometerPoint { digits, terminates }
    }

    /// `τ(1_G)` at precision `n`.
    pub fn identity(n: usize) -> Self {
        OdometerPoint { digits: alloc::vec![0; n], terminates: true }
    }

    /// `τ(g)` at precision `n`.
    pub fn embed<G: ChainGroup>(ds: &DomainSequence<G>, g: &G::Elem, n: usize) -> Self {
        let (digits, phi) = ds.digit_indices(g, n);
        let terminates = phi == ds.group().identity();
        OdometerPoint { digits, terminates }
    }

    pub fn precision(&self) -> usize {
        self.digits.len()
    }

    pub fn digits(&self) -> &[u32] {
        &self.digits
    }

    pub fn terminates(&self) -> bool {
        self.terminates
    }

    pub fn truncate(&self, n: usize) -> Self {
        let terminates = self.terminates && self.digits[n.min(self.digits.len())..].iter().all(|&d| d == 0);
        OdometerPoint { digits: self.digits[..n.min(self.digits.len())].to_vec(), terminates }
    }

    /// `ψ_n(ξ) ∈ D_n`.
    pub fn prefix_element<G: ChainGroup>(&self, ds: &DomainSequence<G>, n: usize) -> G::Elem {
        ds.compose(&self.digits[..n])
    }

    pub fn cylinder(&self, n: usize) -> Cylinder {
        Cylinder { digits: self.digits[..n].to_vec() }
    }

    fn require(&self, n: usize) -> Result<(), PrecisionError> {
        if self.digits.len() < n && !self.terminates {
            Err(PrecisionError { required: n, available: self.digits.len() })
        } else {
            Ok(())
        }
    }

    // Digits past a terminating point's precision are the identity.
    fn digit(&self, j: usize) -> u32 {
        self.digits.get(j - 1).copied().unwrap_or(0)
    }
}

/// The level-`n` cylinder `[ξ]_n`, identified with its digit prefix.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cylinder {
    pub digits: Vec<u32>,
}

impl Cylinder {
    pub fn level(&self) -> usize {
        self.digits.len()
    }
}

/// Haar measure of any level-`n` cylinder: `1/[G:Γ_n]`.
pub fn haar<G: ChainGroup>(ds: &DomainSequence<G>, cylinder: &Cylinder) -> Rational {
    Rational::new(1, ds.size(cylinder.level()) as i128)
}

/// Result of comparing two truncated points.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Distance {
    /// Known equal: both points terminate with the same digits.
    Zero,
    /// `2^{-level}`, where `level` is the first differing digit.
    Separated { level: usize },
    /// All known digits agree, but equality cannot be decided.
    Unresolved { precision: usize },
}

impl Distance {
    /// The distance as an exact rational, or `None` when unresolved.
    pub fn value(self) -> Option<Rational> {
        match self {
            Distance::Zero => Some(Rational::from_integer(0)),
            Distance::Separated { level } => Some(Rational::new(1, 1i128 << level)),
            Distance::Unresolved { .. } => None,
        }
    }
}

pub fn metric(x: &OdometerPoint, y: &OdometerPoint) -> Distance {
    let shared = x.precision().min(y.precision());
    // Terminating points have known identity digits beyond their precision.
    let known = match (x.terminates, y.terminates) {
        (true, true) => x.precision().max(y.precision()),
        (true, false) => y.precision(),
        (false, true) => x.precision(),
        (false, false) => shared,
    };
    for j in 1..=known {
        if x.digit(j) != y.digit(j) {
            return Distance::Separated { level: j };
        }
    }
    if x.terminates && y.terminates {
        Distance::Zero
    } else {
        Distance::Unresolved { precision: known }
    }
}

/// Digits of `xy` to level `n` via the carry recursion.
pub fn odo_mul<G: ChainGroup>(
    ds: &DomainSequence<G>,
    x: &OdometerPoint,
    y: &OdometerPoint,
    n: usize,
) -> Result<OdometerPoint, PrecisionError> {
    x.require(n)?;
    y.require(n)?;
    let g = ds.group();
    let e = g.identity();
    let mut d = e.clone();
    let mut prefix = e.clone();
    let mut digits = Vec::with_capacity(n);
    for j in 1..=n {
        let p = ds.digit(j, x.digit(j));
        let q = ds.digit(j, y.digit(j));
        let c = g.mul(&g.mul(&d, &g.conj(p, &prefix)), q);
        let t = g.reduce(&c, j);
        digits.push(ds.digit_index(&t, j));
        d = g.mul(&g.inv(&t), &c);
        prefix = g.mul(&prefix, q);
    }
    // Past level n both factors only contribute identity digits, so the
    // product terminates exactly when no carry is left.
    let terminates = x.terminates && y.terminates && n >= x.precision().max(y.precision()) && d == e;
    Ok(OdometerPoint { digits, terminates })
}

/// Digits of `ξ^{-1}` to level `n`, using `ψ_n(ξ^{-1}) = ψ_n(ψ_n(ξ)^{-1})`.
pub fn odo_inv<G: ChainGroup>(
    ds: &DomainSequence<G>,
    x: &OdometerPoint,
    n: usize,
) -> Result<OdometerPoint, PrecisionError> {
    x.require(n)?;
    let g = ds.group();
    let prefix = ds.compose(&(1..=n).map(|j| x.digit(j)).collect::<Vec<_>>());
    let (digits, phi) = ds.digit_indices(&g.inv(&prefix), n);
    let exact = x.terminates && n >= x.precision();
    Ok(OdometerPoint { digits, terminates: exact && phi == g.identity() })
}

/// A Haar-random point at precision `n`: each digit uniform on `T_{j-1}`.
pub fn sample_point<G: ChainGroup>(ds: &DomainSequence<G>, seed: u64, n: usize) -> OdometerPoint {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(ds, &mut rng, n)
}

pub fn sample_with<G: ChainGroup, R: Rng>(ds: &DomainSequence<G>, rng: &mut R, n: usize) -> OdometerPoint {
    let digits = (1..=n).map(|j| rng.gen_range(0..ds.radix(j) as u32)).collect();
    OdometerPoint { digits, terminates: n == 0 }
}
