//! Growth diagnostic for formal solutions.
//!
//! The slope is the least-squares slope of the running minimum
//! e_n = min_{1≤j≤n} v_p(u_j), fitted over n ∈ [M/2, M]. Logarithmic losses
//! (t^k and friends) give slopes near 0, accumulated divisions by n give
//! slopes near −1/(p−1).

use serde::Serialize;
use serde_json::{json, Value};

use crate::padic::Padic;

/// Exact rational, denominator positive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Rational {
    pub num: i128,
    pub den: i128,
}

impl Rational {
    pub fn new(num: i128, den: i128) -> Rational {
        assert!(den != 0, "zero denominator");
        let (num, den) = if den < 0 { (-num, -den) } else { (num, den) };
        let g = gcd(num.abs(), den);
        Rational { num: num / g.max(1), den: den / g.max(1) }
    }

    pub fn scale(&self, a: i128, b: i128) -> Rational {
        Rational::new(self.num * a, self.den * b)
    }

    pub fn neg(&self) -> Rational {
        Rational::new(-self.num, self.den)
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl PartialOrd for Rational {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rational {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Default threshold θ = 1/(2(p−1)).
pub fn default_theta(p: u32) -> Rational {
    Rational::new(1, 2 * (p as i128 - 1))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Convergent,
    Divergent,
    Inconclusive,
}

#[derive(Clone, Debug)]
pub struct GrowthReport {
    /// v_p(u_n) for n = 0..=M; None where u_n vanishes at its precision.
    pub valuations: Vec<Option<i64>>,
    pub window: (i64, i64),
    /// None when no coefficient in the window is nonzero.
    pub slope: Option<Rational>,
    pub verdict: Verdict,
}

impl GrowthReport {
    pub fn to_json(&self) -> Value {
        json!({
            "window": [self.window.0, self.window.1],
            "slope": self.slope.map(|s| json!({"num": s.num as i64, "den": s.den as i64, "approx": s.to_f64()})),
            "verdict": self.verdict,
            "valuations": self.valuations,
        })
    }
}

/// Least-squares slope of the running-minimum envelope over [from, to].
pub fn envelope_slope(vals: &[Option<i64>], from: usize, to: usize) -> Option<Rational> {
    let mut cur: Option<i64> = None;
    let (mut n, mut sx, mut sy, mut sxx, mut sxy) = (0i128, 0i128, 0i128, 0i128, 0i128);
    for (j, v) in vals.iter().enumerate().take(to + 1).skip(1) {
        if let Some(v) = v {
            cur = Some(cur.map_or(*v, |c| c.min(*v)));
        }
        if j >= from {
            if let Some(e) = cur {
                let (x, y) = (j as i128, e as i128);
                n += 1;
                sx += x;
                sy += y;
                sxx += x * x;
                sxy += x * y;
            }
        }
    }
    if n < 2 {
        return None;
    }
    let den = n * sxx - sx * sx;
    if den == 0 {
        return None;
    }
    // an envelope that never moves inside the window carries no divergence
    let window_has_data = vals.iter().take(to + 1).skip(from).any(Option::is_some);
    if !window_has_data {
        return None;
    }
    Some(Rational::new(n * sxy - sx * sy, den))
}

/// Verdict from a slope: convergent iff slope ≥ −θ; slopes within θ/2 of the
/// threshold are inconclusive.
pub fn classify_slope(slope: Option<Rational>, theta: Rational) -> Verdict {
    let Some(s) = slope else { return Verdict::Convergent };
    let hi = theta.scale(-1, 2); // −θ/2
    let lo = theta.scale(-3, 2); // −3θ/2
    if s >= hi {
        Verdict::Convergent
    } else if s <= lo {
        Verdict::Divergent
    } else {
        Verdict::Inconclusive
    }
}

/// Assess coefficients u_0..u_M.
pub fn assess(coeffs: &[Padic], theta: Rational) -> GrowthReport {
    let vals: Vec<Option<i64>> = coeffs.iter().map(|c| (!c.is_zero()).then(|| c.valuation())).collect();
    let m = vals.len().saturating_sub(1);
    let from = m / 2;
    let slope = envelope_slope(&vals, from, m);
    GrowthReport { valuations: vals, window: (from as i64, m as i64), slope, verdict: classify_slope(slope, theta) }
}

/// Slope of a pair of coefficient lists: the worse of the two.
pub fn worst(a: Option<Rational>, b: Option<Rational>) -> Option<Rational> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(x), Some(y)) => Some(x.min(y)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_order() {
        assert!(Rational::new(-1, 4) < Rational::new(-1, 8));
        assert_eq!(Rational::new(2, -4), Rational::new(-1, 2));
    }

    #[test]
    fn bands() {
        let th = default_theta(5);
        assert_eq!(classify_slope(None, th), Verdict::Convergent);
        assert_eq!(classify_slope(Some(Rational::new(-1, 4)), th), Verdict::Divergent);
        assert_eq!(classify_slope(Some(Rational::new(-1, 8)), th), Verdict::Inconclusive);
        assert_eq!(classify_slope(Some(Rational::new(-1, 100)), th), Verdict::Convergent);
    }
}
