//! Circle coordinates. Points of `T = R/Z` are stored in `[0, 1)`.

/// Reduces `x` into `[0, 1)`.
#[inline]
pub fn wrap(x: f64) -> f64 {
    let r = x - x.floor();
    // x = -1e-20 gives 1.0 after rounding
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Shortest distance between two points of the circle.
#[inline]
pub fn circle_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    let d = d - d.floor();
    d.min(1.0 - d)
}

/// Signed representative of `z` in `[-1/2, 1/2)`.
#[inline]
pub fn to_signed(z: f64) -> f64 {
    let z = wrap(z);
    if z >= 0.5 {
        z - 1.0
    } else {
        z
    }
}

/// Inverse of [`to_signed`]. Negative offsets map into `(1/2, 1)`; an offset
/// so small that `1 + u` rounds to `1` is kept just below `1` so the point
/// stays on its side of the S-pole.
#[inline]
pub fn from_signed(u: f64) -> f64 {
    if u < 0.0 {
        let z = 1.0 + u;
        if z >= 1.0 {
            PREV_ONE
        } else {
            z
        }
    } else {
        u
    }
}

/// Largest `f64` below one.
pub const PREV_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// True iff `z` lies in the open arc `(1/2, 1)`.
#[inline]
pub fn in_upper_arc(z: f64) -> bool {
    z > 0.5 && z < 1.0
}

/// True iff `z` lies in the closed arc of half-width `delta` centred at `center`.
#[inline]
pub fn in_arc(z: f64, center: f64, delta: f64) -> bool {
    circle_dist(z, center) <= delta
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_handles_tiny_negatives() {
        assert_eq!(wrap(-1e-20), 0.0);
        assert_eq!(wrap(1.25), 0.25);
        assert_eq!(wrap(-0.25), 0.75);
    }

    #[test]
    fn circle_distance_is_symmetric_and_short() {
        assert!((circle_dist(0.05, 0.95) - 0.1).abs() < 1e-15);
        assert!((circle_dist(0.95, 0.05) - 0.1).abs() < 1e-15);
        assert_eq!(circle_dist(0.3, 0.3), 0.0);
        assert!((circle_dist(0.0, 0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn signed_round_trip() {
        for &z in &[0.0, 0.1, 0.49, 0.5, 0.75, 0.999] {
            assert!((from_signed(to_signed(z)) - z).abs() < 1e-15);
        }
        assert!(from_signed(-1e-30) < 1.0);
        assert!(in_upper_arc(from_signed(-1e-30)));
    }

    #[test]
    fn upper_arc_is_open() {
        assert!(!in_upper_arc(0.5));
        assert!(!in_upper_arc(0.0));
        assert!(in_upper_arc(0.6));
    }
}
