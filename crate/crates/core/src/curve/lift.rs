//! Real lifts of circle-valued graphs and the monotone lift `Γ`.

use std::cmp::Ordering;

use serde::Serialize;

use crate::torus::from_signed;

/// A real number stored as `turns + off` with `off in [-1/2, 1/2)`.
///
/// Offsets close to zero keep full relative precision, which matters for
/// fiber values squeezed onto the S-pole from either side. Ordering is
/// lexicographic, which agrees with the order of the represented reals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lift {
    pub turns: i64,
    pub off: f64,
}

impl Lift {
    pub const ZERO: Lift = Lift { turns: 0, off: 0.0 };

    pub fn new(v: f64) -> Self {
        Lift { turns: 0, off: 0.0 }.add(0, v)
    }

    /// The lattice point `j / 2`.
    pub fn half(j: i64) -> Self {
        if j.rem_euclid(2) == 0 {
            Lift { turns: j.div_euclid(2), off: 0.0 }
        } else {
            Lift { turns: j.div_euclid(2) + 1, off: -0.5 }
        }
    }

    /// Adds `turns + v` for a moderate real `v`.
    #[inline]
    pub fn add(self, turns: i64, v: f64) -> Self {
        let w = self.off + v;
        let t = (w + 0.5).floor();
        let mut out = Lift { turns: self.turns + turns + t as i64, off: w - t };
        if out.off >= 0.5 {
            out.off -= 1.0;
            out.turns += 1;
        } else if out.off < -0.5 {
            out.off += 1.0;
            out.turns -= 1;
        }
        out
    }

    pub fn shifted(self, k: i64) -> Self {
        Lift { turns: self.turns + k, off: self.off }
    }

    pub fn value(&self) -> f64 {
        self.turns as f64 + self.off
    }

    /// Point of the circle in `[0, 1)`.
    pub fn circle(&self) -> f64 {
        from_signed(self.off)
    }

    /// Whether the point lies in `[1/2, 1)` mod 1, i.e. just right of it the
    /// value is in the inhibiting arc.
    #[inline]
    pub fn upper(&self) -> bool {
        self.off < 0.0
    }

    /// `self - other` as a real.
    pub fn minus(&self, other: &Lift) -> f64 {
        (self.turns - other.turns) as f64 + (self.off - other.off)
    }

    /// `self - other` reduced to `[-1/2, 1/2)`, exact for tiny differences.
    pub fn signed_gap(&self, other: &Lift) -> f64 {
        signed_frac(self.off - other.off)
    }
}

impl PartialOrd for Lift {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.turns.cmp(&other.turns) {
            Ordering::Equal => self.off.partial_cmp(&other.off),
            o => Some(o),
        }
    }
}

/// Reduces `d in (-1, 1)` to `[-1/2, 1/2)` without touching tiny values.
#[inline]
pub(crate) fn signed_frac(d: f64) -> f64 {
    if d >= 0.5 {
        d - 1.0
    } else if d < -0.5 {
        d + 1.0
    } else {
        d
    }
}

/// All lattice values `m + c` (`c` from `offs`, each in `[-1/2, 1/2)`)
/// strictly between `lo` and `hi`, ascending.
pub(crate) fn targets_between(lo: &Lift, hi: &Lift, offs: &[f64]) -> Vec<Lift> {
    let mut out = Vec::new();
    if !(lo < hi) {
        return out;
    }
    for m in lo.turns..=hi.turns {
        for &c in offs {
            let t = Lift { turns: m, off: c };
            if *lo < t && t < *hi {
                out.push(t);
            }
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

/// A continuous, non-decreasing piece of a circle-valued graph, given by its
/// real lift at both ends. The lift's integer part is arbitrary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonotonePiece {
    pub u_a: f64,
    pub u_b: f64,
    pub left: Lift,
    pub right: Lift,
}

/// `Γh`: each piece of `h` shifted by an integer so the result starts in
/// `[0, 1)`, is non-decreasing and jumps by less than one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiftedGraph {
    pub pieces: Vec<MonotonePiece>,
    pub shifts: Vec<i64>,
    /// Jump at the start of piece `k + 1`.
    pub jumps: Vec<f64>,
    pub start: f64,
}

impl LiftedGraph {
    pub fn left(&self, k: usize) -> Lift {
        self.pieces[k].left.shifted(self.shifts[k])
    }

    pub fn right(&self, k: usize) -> Lift {
        self.pieces[k].right.shifted(self.shifts[k])
    }

    /// Number of downward jumps of the source, i.e. jumps the lift had to
    /// turn into increments close to one.
    pub fn down_jumps(&self) -> usize {
        self.jumps.iter().filter(|&&j| j > 0.5).count()
    }
}

/// `Γ` with jump directions read off the one-sided values.
pub fn lift(pieces: &[MonotonePiece]) -> LiftedGraph {
    lift_with_signs(pieces, None)
}

/// `Γ` with explicit jump directions: `signs[k]` describes the boundary at
/// the start of piece `k` (`signs[0]` is ignored). Negative forces a down
/// jump, zero a continuous junction, positive an up jump.
pub fn lift_with_signs(pieces: &[MonotonePiece], signs: Option<&[i8]>) -> LiftedGraph {
    if pieces.is_empty() {
        return LiftedGraph { pieces: Vec::new(), shifts: Vec::new(), jumps: Vec::new(), start: 0.0 };
    }
    let first = pieces[0].left;
    let mut shift = i64::from(first.off < 0.0) - first.turns;
    let mut shifts = vec![shift];
    let mut jumps = Vec::with_capacity(pieces.len() - 1);
    for k in 1..pieces.len() {
        let (prev, next) = (pieces[k - 1].right, pieces[k].left);
        let d = next.minus(&prev);
        let whole = d.round();
        let delta = d - whole;
        let down = match signs.map(|s| s[k]) {
            Some(s) => s < 0,
            None => delta < 0.0,
        };
        let continuous = signs.map(|s| s[k] == 0).unwrap_or(false);
        shift -= whole as i64;
        if down && !continuous {
            shift += 1;
        }
        shifts.push(shift);
        jumps.push(next.shifted(shift).minus(&prev.shifted(shifts[k - 1])));
    }
    let start = first.shifted(shifts[0]).value();
    LiftedGraph { pieces: pieces.to_vec(), shifts, jumps, start }
}

/// Length of the shortest interval containing the image of `l`.
pub fn range_of(l: &LiftedGraph) -> f64 {
    if l.pieces.is_empty() {
        return 0.0;
    }
    let mut lo = l.left(0);
    let mut hi = lo;
    for k in 0..l.pieces.len() {
        for v in [l.left(k), l.right(k)] {
            if v < lo {
                lo = v;
            }
            if v > hi {
                hi = v;
            }
        }
    }
    hi.minus(&lo)
}
