//! JSON literals for series.

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::padic::{Qp, INF};
use crate::series::{Series, TAIL_EXACT};

/// `{"trunc": M, "coeffs": [[k, literal], ...]}`; exact zeros are omitted and
/// a finite tail bound is written as `"tail"`.
pub fn series_to_json(f: &Series) -> Value {
    let coeffs: Vec<Value> = f
        .terms()
        .filter(|(_, c)| !c.is_exact_zero())
        .map(|(k, c)| json!([k, c.to_literal()]))
        .collect();
    let mut v = json!({"trunc": f.trunc(), "coeffs": coeffs});
    if f.tail() < INF {
        v["tail"] = if f.tail() <= -INF / 2 { Value::from("unbounded") } else { Value::from(f.tail()) };
    }
    v
}

pub fn series_from_json(qp: Qp, v: &Value) -> Result<Series> {
    let trunc = v
        .get("trunc")
        .and_then(Value::as_i64)
        .ok_or_else(|| Error::Parse("series: missing integer \"trunc\"".into()))?;
    let pairs = v
        .get("coeffs")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Parse("series: missing \"coeffs\" list".into()))?;
    let mut terms = Vec::with_capacity(pairs.len());
    for (n, pr) in pairs.iter().enumerate() {
        let arr = pr.as_array().filter(|a| a.len() == 2).ok_or_else(|| Error::Parse(format!("series: coefficient {n} is not a pair")))?;
        let k = arr[0].as_i64().ok_or_else(|| Error::Parse(format!("series: exponent {n}")))?;
        let c = match &arr[1] {
            Value::String(s) => qp.parse(s)?,
            Value::Number(x) => qp.int(x.as_i64().ok_or_else(|| Error::Parse(format!("series: coefficient {n}")))?),
            _ => return Err(Error::Parse(format!("series: coefficient {n}"))),
        };
        if k > trunc {
            return Err(Error::Parse(format!("series: exponent {k} above truncation {trunc}")));
        }
        terms.push((k, c));
    }
    let low = terms.iter().map(|(k, _)| *k).min().unwrap_or(0).min(0);
    let mut f = Series::from_coeffs(qp, low, vec![qp.zero(); (trunc - low + 1).max(1) as usize], TAIL_EXACT);
    for (k, c) in terms {
        let cur = f.coeff(k);
        f.set_coeff(k, cur.add_ref(&c));
    }
    let tail = match v.get("tail") {
        None => TAIL_EXACT,
        Some(Value::String(s)) if s == "unbounded" => crate::series::TAIL_UNBOUNDED,
        Some(x) => x.as_i64().ok_or_else(|| Error::Parse("series: tail".into()))?,
    };
    Ok(f.with_tail(tail))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let k = Qp::new(5, 40).unwrap();
        let f = Series::monomial(k, k.rat(1, 3), -2, 6).add(&Series::log1p_t(k, 6));
        let g = series_from_json(k, &series_to_json(&f)).unwrap();
        assert!(f.agrees_with(&g));
        assert_eq!(series_to_json(&f), series_to_json(&g));
    }
}
