//! A deliberately tiny layout domain for exhaustive checks.
//!
//! A box on a 2×2 grid filled with one of two objects:
//! `[Left, Right, Top, Bottom, Object]` with arities `[2, 2, 2, 2, 2]` and
//! validity `Left ≤ Right`, `Top ≤ Bottom`, giving 18 programs. Utterance
//! `((y·2 + x)·2 + object)` reveals the object at `(x, y)`; empty cells are
//! not utterable.

use crate::space::{ProgramSpace, UttId};

pub const SIDE: usize = 2;
pub const ARITIES: [usize; 5] = [2, 2, 2, 2, 2];
pub const NUM_UTTERANCES: usize = SIDE * SIDE * 2;

pub fn utterance(x: usize, y: usize, object: usize) -> UttId {
    ((y * SIDE + x) * 2 + object) as UttId
}

pub fn programs() -> Vec<[u8; 5]> {
    let mut out = Vec::new();
    for l in 0..2u8 {
        for r in 0..2u8 {
            for t in 0..2u8 {
                for b in 0..2u8 {
                    for o in 0..2u8 {
                        if l <= r && t <= b {
                            out.push([l, r, t, b, o]);
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn truths(p: &[u8; 5]) -> Vec<UttId> {
    let [l, r, t, b, o] = p.map(usize::from);
    let mut out = Vec::new();
    for y in t..=b {
        for x in l..=r {
            out.push(utterance(x, y, o));
        }
    }
    out
}

pub fn box_2x2() -> ProgramSpace {
    let programs = programs();
    let truths = programs.iter().map(truths).collect();
    ProgramSpace::new(
        ["Left", "Right", "Top", "Bottom", "Object"].map(String::from).to_vec(),
        ARITIES.to_vec(),
        programs.iter().map(|p| p.to_vec()).collect(),
        NUM_UTTERANCES,
        truths,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eighteen_programs() {
        let space = box_2x2();
        assert_eq!(space.len(), 18);
        assert_eq!(space.num_classes(), 18);
        assert_eq!(space.truths(space.index_of(&[0, 1, 0, 1, 1]).unwrap()).len(), 4);
    }
}
