//! Patch output: JSON lines for every group, PGM images for `Z²`.

use std::io::{self, Write};

use serde_json::{json, Value};
use toeplitz_core::{ChainGroup, Symbol, SymbolicPatch};

pub fn symbol_json(s: Symbol) -> Value {
    match s {
        Symbol::Zero => json!(0),
        Symbol::One => json!(1),
        Symbol::Undecided => json!("?"),
    }
}

/// One record per element: coordinates, digits of `τ(g)·ξ`, value.
pub fn write_jsonl<G: ChainGroup, W: Write>(group: &G, patch: &SymbolicPatch<G::Elem>, out: &mut W) -> io::Result<()> {
    for e in &patch.entries {
        let record = json!({
            "g": group.coordinates(&e.element),
            "digits": e.digits,
            "value": symbol_json(e.value()),
        });
        writeln!(out, "{record}")?;
    }
    Ok(())
}

/// Binary PGM over the box `[0, side)²`: 0 black, 1 white, `?` gray.
///
/// Every patch element must be a point of the box; points missing from the
/// patch are an error.
pub fn write_pgm<W: Write>(patch: &SymbolicPatch<[i64; 2]>, side: usize, out: &mut W) -> io::Result<()> {
    let mut pixels = vec![None; side * side];
    for e in &patch.entries {
        let [x, y] = e.element;
        if x < 0 || y < 0 || x as usize >= side || y as usize >= side {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, format!("({x},{y}) lies outside the box")));
        }
        pixels[y as usize * side + x as usize] = Some(match e.value() {
            Symbol::Zero => 0u8,
            Symbol::One => 255,
            Symbol::Undecided => 128,
        });
    }
    let bytes: Option<Vec<u8>> = pixels.into_iter().collect();
    let bytes = bytes.ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "patch does not cover the box"))?;
    write!(out, "P5\n{side} {side}\n255\n")?;
    out.write_all(&bytes)
}
