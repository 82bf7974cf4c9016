use serde::Serialize;

use crate::error::{Error, Result};

/// Lift `r: [0,1) -> R` of a degree-`kappa` circle map, stored as a C1
/// spline whose derivative is piecewise linear between knots.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RotationMapSpec {
    pub kappa: u32,
    pub epsilon: f64,
    /// Half-margin `d`: the steep arcs map onto `[d + l, 1 - d + l]`.
    pub d: f64,
    /// Lower bound on the slope everywhere.
    pub connector_slope_floor: f64,
    /// Steep arcs as `(start, end)` in x, possibly wrapping past 1.
    pub steep_arcs: Vec<(f64, f64)>,
    knots: Vec<f64>,
    slopes: Vec<f64>,
    values: Vec<f64>,
}

/// Builds the steep piecewise map: `kappa` affine arcs of length
/// `epsilon (1 - 2d)` and slope `1/epsilon`, joined by connectors whose slope
/// ramps linearly down to a plateau above `connector_slope_floor` and back.
pub fn build_rotation_map(
    kappa: u32,
    epsilon: f64,
    d: f64,
    connector_slope_floor: f64,
) -> Result<RotationMapSpec> {
    build_rotation_map_with_phase(kappa, epsilon, d, connector_slope_floor, 0.0)
}

/// As [`build_rotation_map`], with the first steep arc starting at `phase`.
pub fn build_rotation_map_with_phase(
    kappa: u32,
    epsilon: f64,
    d: f64,
    floor: f64,
    phase: f64,
) -> Result<RotationMapSpec> {
    if kappa == 0 {
        return Err(Error::InvalidParams("degree must be >= 1".into()));
    }
    if !(d > 0.0 && d < 0.5) {
        return Err(Error::InvalidParams(format!("d = {d} not in (0, 1/2)")));
    }
    if !(epsilon > 0.0) || !(floor > 0.0) {
        return Err(Error::InvalidParams("epsilon and slope floor must be positive".into()));
    }
    let k = kappa as f64;
    let arc = epsilon * (1.0 - 2.0 * d);
    if k * arc >= 1.0 {
        return Err(Error::InfeasibleGeometry(format!(
            "{kappa} arcs of length {arc} do not fit disjointly on the circle"
        )));
    }
    let period = 1.0 / k;
    let conn = period - arc;
    let steep = 1.0 / epsilon;
    let s_max = 2.0 * d / conn;
    if s_max <= floor {
        return Err(Error::InfeasibleGeometry(format!(
            "connector of length {conn} rising 2d = {} cannot keep slope above {floor}",
            2.0 * d
        )));
    }
    let plateau = 0.5 * (floor + s_max);
    if plateau >= steep {
        return Err(Error::InfeasibleGeometry(format!(
            "connector slope {plateau} exceeds the steep slope {steep}; epsilon is not small"
        )));
    }
    let ramp = (2.0 * d - plateau * conn) / (steep - plateau);
    if 2.0 * ramp > conn {
        return Err(Error::InfeasibleGeometry("ramps overlap inside the connector".into()));
    }

    // knots in the arc-aligned coordinate xi = x - phase
    let mut xi = Vec::new();
    let mut sl = Vec::new();
    for l in 0..kappa {
        let s = l as f64 * period;
        xi.extend([s, s + arc, s + arc + ramp, s + period - ramp]);
        sl.extend([steep, steep, plateau, plateau]);
    }
    xi.push(1.0);
    sl.push(steep);
    let mut vals = vec![d];
    for i in 1..xi.len() {
        vals.push(vals[i - 1] + 0.5 * (sl[i - 1] + sl[i]) * (xi[i] - xi[i - 1]));
    }
    // the arc ends are exact by construction; pin them against drift
    for l in 0..kappa as usize {
        vals[4 * l] = d + l as f64;
        vals[4 * l + 1] = 1.0 - d + l as f64;
    }
    *vals.last_mut().unwrap() = d + k;

    let phase = phase - phase.floor();
    let (knots, slopes, values) = rotate_to_origin(&xi, &sl, &vals, phase, k);
    let steep_arcs = (0..kappa)
        .map(|l| {
            let s = phase + l as f64 * period;
            let s = s - s.floor();
            (s, s + arc)
        })
        .collect();
    let spec = RotationMapSpec {
        kappa,
        epsilon,
        d,
        connector_slope_floor: floor,
        steep_arcs,
        knots,
        slopes,
        values,
    };
    spec.check_structure()?;
    Ok(spec)
}

/// Re-expresses a spline given on `xi in [0,1]` with `x = phase + xi mod 1`
/// as a spline on `x in [0,1]` whose value at 0 lies in `[0,1)`.
fn rotate_to_origin(
    xi: &[f64],
    sl: &[f64],
    vals: &[f64],
    phase: f64,
    k: f64,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    if phase == 0.0 {
        let shift = vals[0].floor();
        return (xi.to_vec(), sl.to_vec(), vals.iter().map(|v| v - shift).collect());
    }
    let cut = 1.0 - phase;
    let (v_cut, s_cut) = eval_spline(xi, sl, vals, cut);
    let mut knots = vec![0.0];
    let mut slopes = vec![s_cut];
    let mut values = vec![v_cut];
    for i in 0..xi.len() {
        if xi[i] > cut && xi[i] < 1.0 {
            knots.push(xi[i] - cut);
            slopes.push(sl[i]);
            values.push(vals[i]);
        }
    }
    for i in 0..xi.len() {
        if xi[i] < cut {
            knots.push(xi[i] + phase);
            slopes.push(sl[i]);
            values.push(vals[i] + k);
        }
    }
    knots.push(1.0);
    slopes.push(s_cut);
    values.push(v_cut + k);
    let shift = values[0].floor();
    for v in &mut values {
        *v -= shift;
    }
    (knots, slopes, values)
}

fn eval_spline(knots: &[f64], slopes: &[f64], values: &[f64], x: f64) -> (f64, f64) {
    let i = match knots.partition_point(|&k| k <= x) {
        0 => 0,
        p => (p - 1).min(knots.len() - 2),
    };
    let h = knots[i + 1] - knots[i];
    let t = x - knots[i];
    let (m0, m1) = (slopes[i], slopes[i + 1]);
    if h <= 0.0 {
        return (values[i], m0);
    }
    let dm = (m1 - m0) / h;
    (values[i] + m0 * t + 0.5 * dm * t * t, m0 + dm * t)
}

impl RotationMapSpec {
    /// Builds a map from explicit knots, knot slopes and `r(0)`; the values
    /// follow by integrating the piecewise-linear derivative.
    pub fn from_spline(
        knots: Vec<f64>,
        slopes: Vec<f64>,
        value_at_zero: f64,
        epsilon: f64,
        d: f64,
        connector_slope_floor: f64,
    ) -> Result<Self> {
        if knots.len() < 2 || knots.len() != slopes.len() {
            return Err(Error::InvalidParams("spline needs >= 2 knots with one slope each".into()));
        }
        if knots[0] != 0.0 || *knots.last().unwrap() != 1.0 {
            return Err(Error::InvalidParams("spline knots must start at 0 and end at 1".into()));
        }
        let mut values = vec![value_at_zero];
        for i in 1..knots.len() {
            values.push(values[i - 1] + 0.5 * (slopes[i - 1] + slopes[i]) * (knots[i] - knots[i - 1]));
        }
        let total = values.last().unwrap() - value_at_zero;
        let kappa = total.round();
        if (total - kappa).abs() > 1e-9 || kappa < 1.0 {
            return Err(Error::InvalidParams(format!("spline degree {total} is not a positive integer")));
        }
        let spec = Self {
            kappa: kappa as u32,
            epsilon,
            d,
            connector_slope_floor,
            steep_arcs: Vec::new(),
            knots,
            slopes,
            values,
        };
        spec.check_structure()?;
        Ok(spec)
    }

    fn check_structure(&self) -> Result<()> {
        if self.knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParams("spline knots not sorted".into()));
        }
        if self.slopes.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::InvalidParams("lift is not strictly increasing".into()));
        }
        if (self.slopes[0] - self.slopes[self.slopes.len() - 1]).abs() > 1e-9 * self.slopes[0] {
            return Err(Error::InvalidParams("derivative does not match across x = 0".into()));
        }
        if !(self.values[0] >= 0.0 && self.values[0] < 1.0) {
            return Err(Error::InvalidParams("lift must satisfy r(0) in [0,1)".into()));
        }
        Ok(())
    }

    /// Lift value and derivative at `x in [0, 1)`.
    #[inline]
    pub fn eval(&self, x: f64) -> (f64, f64) {
        eval_spline(&self.knots, &self.slopes, &self.values, x)
    }

    /// Lift value `r(x)`, `x in [0,1)`.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        self.eval(x).0
    }

    /// Continuous extension to the real line, `r(x + 1) = r(x) + kappa`.
    #[inline]
    pub fn eval_real(&self, x: f64) -> (f64, f64) {
        let fl = x.floor();
        let (v, dv) = self.eval(x - fl);
        (v + self.kappa as f64 * fl, dv)
    }

    pub fn value_at_zero(&self) -> f64 {
        self.values[0]
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    /// Largest `|r''|`, i.e. the Lipschitz constant of the derivative.
    pub fn max_curvature(&self) -> f64 {
        self.knots
            .windows(2)
            .zip(self.slopes.windows(2))
            .filter(|(k, _)| k[1] > k[0])
            .map(|(k, s)| (s[1] - s[0]).abs() / (k[1] - k[0]))
            .fold(0.0, f64::max)
    }

    /// Distance to the nearest interior knot (a point where `r''` jumps) or to `x = 0`.
    pub fn breakpoint_distance(&self, x: f64) -> f64 {
        let x = x - x.floor();
        let mut best = x.min(1.0 - x);
        for &k in &self.knots[1..self.knots.len() - 1] {
            best = best.min((x - k).abs());
        }
        best
    }
}
