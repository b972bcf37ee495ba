//! Line-based window files.
//!
//! ```text
//! toeplitz-window 1
//! group Z
//! moduli 4 32 256
//! kind ktilde 3
//! epsilon 999/1000
//! partition-level 2
//! level 1
//! transversal 0 1 2 3
//! classes A B A C
//! a 3
//! index-class 1
//! remove -
//! boundary-class 3.1 1
//! end
//! ```
//!
//! Group elements are comma-joined coordinates; cylinders are dot-joined
//! digit positions. Rendering a parsed file reproduces it byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;
use toeplitz_core::window::Removal;
use toeplitz_core::{ChainGroup, DigitClass, DomainSequence, GroupKind, WindowKind, WindowSpec};

use crate::config::{format_rational, parse_rational};

const HEADER: &str = "toeplitz-window 1";

#[derive(Debug, Error, PartialEq, Eq)]
#[error("window file line {line}: {reason}")]
pub struct FormatError {
    pub line: usize,
    pub reason: String,
}

/// A window together with the chain and transversals it was built on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WindowFile {
    pub group: GroupKind,
    pub moduli: Vec<u64>,
    /// Coordinates of `T_{n-1}`, in canonical order.
    pub transversals: Vec<Vec<Vec<i64>>>,
    pub spec: WindowSpec,
}

impl WindowFile {
    pub fn from_built<G: ChainGroup>(ds: &DomainSequence<G>, spec: &WindowSpec) -> WindowFile {
        let grp = ds.group();
        WindowFile {
            group: grp.kind(),
            moduli: grp.moduli()[..spec.cap()].to_vec(),
            transversals: (1..=spec.cap())
                .map(|n| ds.transversal(n).iter().map(|t| grp.coordinates(t)).collect())
                .collect(),
            spec: spec.clone(),
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let spec = &self.spec;
        let join = |xs: &[u32]| xs.iter().map(u32::to_string).collect::<Vec<_>>().join(".");
        writeln!(out, "{HEADER}").unwrap();
        writeln!(out, "group {}", self.group.name()).unwrap();
        writeln!(out, "moduli {}", words(&self.moduli)).unwrap();
        match spec.kind {
            WindowKind::Perf => writeln!(out, "kind perf"),
            WindowKind::K(k) => writeln!(out, "kind k {k}"),
            WindowKind::KTilde(k) => writeln!(out, "kind ktilde {k}"),
        }
        .unwrap();
        writeln!(out, "epsilon {}", format_rational(&spec.epsilon)).unwrap();
        writeln!(out, "partition-level {}", spec.partition_level).unwrap();
        for n in 1..=spec.cap() {
            writeln!(out, "level {n}").unwrap();
            let coords: Vec<String> = self.transversals[n - 1]
                .iter()
                .map(|c| c.iter().map(i64::to_string).collect::<Vec<_>>().join(","))
                .collect();
            writeln!(out, "transversal {}", coords.join(" ")).unwrap();
            let classes: Vec<&str> = spec.classes[n - 1]
                .iter()
                .map(|c| match c {
                    DigitClass::A => "A",
                    DigitClass::B => "B",
                    DigitClass::C => "C",
                })
                .collect();
            writeln!(out, "classes {}", classes.join(" ")).unwrap();
            writeln!(out, "a {}", spec.a[n - 1]).unwrap();
            writeln!(out, "index-class {}", spec.level_classes[n - 1]).unwrap();
            match &spec.removals[n - 1] {
                None => writeln!(out, "remove -"),
                Some(Removal::PerParent { digit }) => writeln!(out, "remove digit {digit}"),
                Some(Removal::Single { cylinder }) => writeln!(out, "remove cylinder {}", join(cylinder)),
            }
            .unwrap();
        }
        for (cylinder, j) in &spec.boundary_classes {
            writeln!(out, "boundary-class {} {j}", join(cylinder)).unwrap();
        }
        writeln!(out, "end").unwrap();
        out
    }

    pub fn parse(text: &str) -> Result<WindowFile, FormatError> {
        Parser { lines: text.lines().enumerate().peekable() }.file()
    }
}

fn words<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
}

struct Parser<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Parser<'a> {
    fn fail<T>(&self, line: usize, reason: impl Into<String>) -> Result<T, FormatError> {
        Err(FormatError { line: line + 1, reason: reason.into() })
    }

    /// Next line, which must start with `key`; returns the rest.
    fn field(&mut self, key: &str) -> Result<(usize, &'a str), FormatError> {
        let Some((i, line)) = self.lines.next() else {
            return Err(FormatError { line: 0, reason: format!("missing {key:?}") });
        };
        if line == key {
            return Ok((i, ""));
        }
        match line.strip_prefix(key).and_then(|rest| rest.strip_prefix(' ')) {
            Some(rest) => Ok((i, rest)),
            None => self.fail(i, format!("expected {key:?}")),
        }
    }

    fn number<T: std::str::FromStr>(&self, i: usize, word: &str) -> Result<T, FormatError> {
        word.parse().or_else(|_| self.fail(i, format!("bad number {word:?}")))
    }

    fn cylinder(&self, i: usize, word: &str) -> Result<Vec<u32>, FormatError> {
        if word.is_empty() {
            return Ok(Vec::new());
        }
        word.split('.').map(|d| self.number(i, d)).collect()
    }

    fn file(mut self) -> Result<WindowFile, FormatError> {
        let (i, rest) = self.field(HEADER)?;
        if !rest.is_empty() {
            return self.fail(i, "trailing text after header");
        }
        let (i, name) = self.field("group")?;
        let group = match name {
            "Z" => GroupKind::Lattice(1),
            "Z2" => GroupKind::Lattice(2),
            "Heisenberg" => GroupKind::Heisenberg,
            _ => return self.fail(i, format!("unknown group {name:?}")),
        };
        let (i, rest) = self.field("moduli")?;
        let moduli: Vec<u64> = rest.split(' ').map(|w| self.number(i, w)).collect::<Result<_, _>>()?;
        let (i, rest) = self.field("kind")?;
        let kind = match rest.split_once(' ') {
            None if rest == "perf" => WindowKind::Perf,
            Some(("k", k)) => WindowKind::K(self.number(i, k)?),
            Some(("ktilde", k)) => WindowKind::KTilde(self.number(i, k)?),
            _ => return self.fail(i, format!("unknown window kind {rest:?}")),
        };
        let (i, rest) = self.field("epsilon")?;
        let Some(epsilon) = parse_rational(rest).filter(|_| rest.contains('/')) else {
            return self.fail(i, "epsilon must be p/q");
        };
        let (i, rest) = self.field("partition-level")?;
        let partition_level = self.number(i, rest)?;

        let mut transversals = Vec::new();
        let mut classes = Vec::new();
        let mut a = Vec::new();
        let mut level_classes = Vec::new();
        let mut removals = Vec::new();
        while self.lines.peek().is_some_and(|(_, l)| l.starts_with("level ")) {
            let (i, rest) = self.field("level")?;
            if self.number::<usize>(i, rest)? != transversals.len() + 1 {
                return self.fail(i, "levels must be numbered 1, 2, …");
            }
            let (i, rest) = self.field("transversal")?;
            let t: Vec<Vec<i64>> = rest
                .split(' ')
                .map(|e| e.split(',').map(|c| self.number(i, c)).collect())
                .collect::<Result<_, _>>()?;
            let (i, rest) = self.field("classes")?;
            let c: Vec<DigitClass> = rest
                .split(' ')
                .map(|w| match w {
                    "A" => Ok(DigitClass::A),
                    "B" => Ok(DigitClass::B),
                    "C" => Ok(DigitClass::C),
                    _ => self.fail(i, format!("unknown digit class {w:?}")),
                })
                .collect::<Result<_, _>>()?;
            if c.len() != t.len() {
                return self.fail(i, "classes and transversal differ in length");
            }
            let (i, rest) = self.field("a")?;
            a.push(self.number(i, rest)?);
            let (i, rest) = self.field("index-class")?;
            level_classes.push(self.number(i, rest)?);
            let (i, rest) = self.field("remove")?;
            removals.push(match rest.split_once(' ') {
                None if rest == "-" => None,
                Some(("digit", d)) => Some(Removal::PerParent { digit: self.number(i, d)? }),
                Some(("cylinder", c)) => Some(Removal::Single { cylinder: self.cylinder(i, c)? }),
                _ => return self.fail(i, format!("bad removal {rest:?}")),
            });
            transversals.push(t);
            classes.push(c);
        }
        let mut boundary_classes = BTreeMap::new();
        while self.lines.peek().is_some_and(|(_, l)| l.starts_with("boundary-class ")) {
            let (i, rest) = self.field("boundary-class")?;
            let Some((cyl, j)) = rest.rsplit_once(' ') else {
                return self.fail(i, "boundary-class needs a cylinder and a class");
            };
            if boundary_classes.insert(self.cylinder(i, cyl)?, self.number(i, j)?).is_some() {
                return self.fail(i, "duplicate boundary-class entry");
            }
        }
        let (i, rest) = self.field("end")?;
        if !rest.is_empty() {
            return self.fail(i, "trailing text after end");
        }
        if let Some((i, _)) = self.lines.next() {
            return self.fail(i, "content after end");
        }
        if moduli.len() != transversals.len() {
            return self.fail(i, "one modulus per level is required");
        }
        let spec = WindowSpec {
            kind,
            classes,
            a,
            epsilon,
            partition_level,
            boundary_classes,
            level_classes,
            removals,
        };
        Ok(WindowFile { group, moduli, transversals, spec })
    }
}
