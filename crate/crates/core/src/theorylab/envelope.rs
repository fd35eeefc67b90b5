use crate::error::{Error, Result};

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Vertices of the upper convex hull of `(i, values[i])`, left to right
/// (monotone chain). Collinear interior points are dropped.
pub fn upper_hull(values: &[f64]) -> Vec<usize> {
    let mut hull: Vec<usize> = Vec::with_capacity(values.len());
    for i in 0..values.len() {
        while hull.len() >= 2 {
            let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            // cross of (a - o) x (i - o); >= 0 means `a` is not above the chord
            let cross =
                (a - o) as f64 * (values[i] - values[o]) - (i - o) as f64 * (values[a] - values[o]);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    hull
}

/// Least concave majorant of `values` on the integer grid.
pub fn concave_envelope_1d(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::InvalidArgument(
            "envelope of an empty sequence".into(),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("envelope input".into()));
    }
    let hull = upper_hull(values);
    let mut env = vec![0.0; values.len()];
    for w in hull.windows(2) {
        let (l, r) = (w[0], w[1]);
        let slope = (values[r] - values[l]) / (r - l) as f64;
        for (k, e) in env[l..r].iter_mut().enumerate() {
            *e = if k == 0 {
                values[l]
            } else {
                values[l] + slope * k as f64
            };
        }
    }
    let last = *hull.last().unwrap();
    env[last] = values[last];
    Ok(env)
}

/// Piecewise-linear extension of `env` beyond its ends using the end
/// slopes.
fn extended(env: &[f64], x: f64) -> f64 {
    let m = env.len();
    if m == 1 {
        return env[0];
    }
    if x <= 0.0 {
        return env[0] + x * (env[1] - env[0]);
    }
    let top = (m - 1) as f64;
    if x >= top {
        return env[m - 1] + (x - top) * (env[m - 1] - env[m - 2]);
    }
    let i = x.floor() as usize;
    let t = x - i as f64;
    if t == 0.0 {
        env[i]
    } else {
        env[i] + t * (env[i + 1] - env[i])
    }
}

/// Translates the envelope along the index axis so that its argmax lands on
/// the argmax of `values`.
pub fn argmax_preserving_shift(values: &[f64], envelope: &[f64]) -> Result<Vec<f64>> {
    if values.len() != envelope.len() || values.is_empty() {
        return Err(Error::InvalidArgument(
            "values and envelope must be non-empty and equally long".into(),
        ));
    }
    let shift = argmax(values) as isize - argmax(envelope) as isize;
    if shift == 0 {
        return Ok(envelope.to_vec());
    }
    Ok((0..envelope.len() as isize)
        .map(|j| extended(envelope, (j - shift) as f64))
        .collect())
}
