//! Characters of Q_p^* of the shape δ(p^m u) = λ^m u^k ω(u)^j, trianguline
//! parameters and their classification.

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::padic::{Padic, Qp};

#[derive(Clone, Debug)]
pub struct Character {
    qp: Qp,
    pub k: i64,
    pub teich: i64,
    pub lambda: Padic,
}

impl PartialEq for Character {
    fn eq(&self, other: &Self) -> bool {
        self.qp.p == other.qp.p && self.k == other.k && self.teich == other.teich && self.lambda == other.lambda
    }
}

impl Character {
    pub fn new(qp: Qp, k: i64, teich: i64, lambda: Padic) -> Result<Character> {
        if lambda.is_zero() {
            return Err(Error::InvalidParameter("δ(p) must be nonzero".into()));
        }
        let m = qp.p as i64 - 1;
        Ok(Character { qp, k, teich: teich.rem_euclid(m), lambda })
    }

    pub fn trivial(qp: Qp) -> Character {
        Character { qp, k: 0, teich: 0, lambda: qp.one() }
    }

    /// χ(x) = x|x|.
    pub fn chi(qp: Qp) -> Character {
        Character { qp, k: 1, teich: 0, lambda: qp.one() }
    }

    /// x ↦ x^m.
    pub fn x_pow(qp: Qp, m: i64) -> Character {
        Character { qp, k: m, teich: 0, lambda: qp.p_pow(m) }
    }

    pub fn qp(&self) -> Qp {
        self.qp
    }

    /// w(δ) = δ'(1).
    pub fn weight(&self) -> i64 {
        self.k
    }

    pub fn eval(&self, x: &Padic) -> Result<Padic> {
        if x.is_zero() {
            return Err(Error::Domain("character evaluated at 0".into()));
        }
        let m = x.valuation();
        let u = x.checked_div(&self.qp.p_pow(m))?;
        let mut out = self.lambda.pow(m)?.mul_ref(&u.pow(self.k)?);
        if self.teich != 0 {
            out = out.mul_ref(&u.teichmuller_of().pow(self.teich)?);
        }
        Ok(out)
    }

    pub fn eval_int(&self, n: i64) -> Result<Padic> {
        self.eval(&self.qp.int(n))
    }

    /// δ(−1) as ±1.
    pub fn sign(&self) -> i64 {
        if (self.k + self.teich).rem_euclid(2) == 0 {
            1
        } else {
            -1
        }
    }

    pub fn mul(&self, other: &Character) -> Character {
        assert_eq!(self.qp.p, other.qp.p, "mixed-prime characters");
        Character {
            qp: self.qp,
            k: self.k + other.k,
            teich: (self.teich + other.teich).rem_euclid(self.qp.p as i64 - 1),
            lambda: self.lambda.mul_ref(&other.lambda),
        }
    }

    pub fn inv(&self) -> Character {
        Character {
            qp: self.qp,
            k: -self.k,
            teich: (-self.teich).rem_euclid(self.qp.p as i64 - 1),
            lambda: self.lambda.inv().expect("nonzero λ"),
        }
    }

    pub fn pow(&self, e: i64) -> Character {
        Character {
            qp: self.qp,
            k: self.k * e,
            teich: (self.teich * e).rem_euclid(self.qp.p as i64 - 1),
            lambda: self.lambda.pow(e).expect("nonzero λ"),
        }
    }

    /// δ · x^m.
    pub fn twist_x(&self, m: i64) -> Character {
        self.mul(&Character::x_pow(self.qp, m))
    }

    pub fn to_json(&self) -> Value {
        json!({"k": self.k, "teich": self.teich, "lambda": self.lambda.to_literal()})
    }

    pub fn from_json(qp: Qp, v: &Value) -> Result<Character> {
        let k = v.get("k").and_then(Value::as_i64).ok_or_else(|| Error::Parse("character: missing integer \"k\"".into()))?;
        let teich = v.get("teich").and_then(Value::as_i64).unwrap_or(0);
        let lambda = match v.get("lambda") {
            Some(Value::String(s)) => qp.parse(s)?,
            Some(Value::Number(n)) => qp.int(n.as_i64().ok_or_else(|| Error::Parse("character: lambda".into()))?),
            _ => return Err(Error::Parse("character: missing \"lambda\"".into())),
        };
        Character::new(qp, k, teich, lambda)
    }
}

/// s = (δ1, δ2, L); `linv = None` stands for L = ∞.
#[derive(Clone, Debug)]
pub struct TriangulineParameter {
    pub delta1: Character,
    pub delta2: Character,
    pub linv: Option<Padic>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Class {
    Cris,
    CrisExceptional,
    St,
    Ng,
}

impl Class {
    pub fn label(&self) -> &'static str {
        match self {
            Class::Cris => "cris",
            Class::CrisExceptional => "cris-exceptional",
            Class::St => "st",
            Class::Ng => "ng",
        }
    }
}

impl TriangulineParameter {
    pub fn new(delta1: Character, delta2: Character, linv: Option<Padic>) -> Result<TriangulineParameter> {
        let s = TriangulineParameter { delta1, delta2, linv };
        s.validate()?;
        Ok(s)
    }

    pub fn qp(&self) -> Qp {
        self.delta1.qp
    }

    pub fn validate(&self) -> Result<()> {
        if self.delta1.qp.p != self.delta2.qp.p {
            return Err(Error::MixedPrime(self.delta1.qp.p, self.delta2.qp.p));
        }
        let v1 = self.delta1.lambda.valuation();
        let v2 = self.delta2.lambda.valuation();
        if v1 <= 0 {
            return Err(Error::InvalidParameter(format!("v_p(δ1(p)) = {v1} must be positive")));
        }
        if v1 + v2 != 0 {
            return Err(Error::InvalidParameter(format!("v_p(δ1(p)) + v_p(δ2(p)) = {} must vanish", v1 + v2)));
        }
        if self.linv.is_some() && self.x_k_chi_exponent().is_none() {
            return Err(Error::InvalidParameter("finite L needs δ1 = x^k χ δ2 with k ≥ 0".into()));
        }
        let w = self.w();
        if w >= 1 && w <= v1 {
            return Err(Error::InvalidParameter(format!("w(s) = {w} ≤ v_p(δ1(p)) = {v1}: not irreducible")));
        }
        Ok(())
    }

    /// w(s) = w(δ1) − w(δ2).
    pub fn w(&self) -> i64 {
        self.delta1.k - self.delta2.k
    }

    /// k ≥ 0 with δ1 = x^k χ δ2, if any.
    pub fn x_k_chi_exponent(&self) -> Option<i64> {
        let q = self.delta1.mul(&self.delta2.inv());
        let k = q.k - 1;
        if k < 0 || q.teich != 0 {
            return None;
        }
        (q.lambda == self.qp().p_pow(k)).then_some(k)
    }

    /// δ1 = x^{w(s)} δ2.
    pub fn is_exceptional(&self) -> bool {
        self.delta1 == self.delta2.twist_x(self.w())
    }

    pub fn classify(&self) -> Result<Class> {
        self.validate()?;
        let w = self.w();
        if w < 1 {
            return Ok(Class::Ng);
        }
        if self.linv.is_some() {
            return Ok(Class::St);
        }
        Ok(if self.is_exceptional() { Class::CrisExceptional } else { Class::Cris })
    }

    /// δ_D = δ1 δ2 χ^{-1}.
    pub fn delta_d(&self) -> Character {
        self.delta1.mul(&self.delta2).mul(&Character::chi(self.qp()).inv())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "delta1": self.delta1.to_json(),
            "delta2": self.delta2.to_json(),
            "L": match &self.linv { None => Value::from("inf"), Some(l) => Value::from(l.to_literal()) },
        })
    }

    pub fn from_json(qp: Qp, v: &Value) -> Result<TriangulineParameter> {
        let d1 = Character::from_json(qp, v.get("delta1").ok_or_else(|| Error::Parse("missing \"delta1\"".into()))?)?;
        let d2 = Character::from_json(qp, v.get("delta2").ok_or_else(|| Error::Parse("missing \"delta2\"".into()))?)?;
        let linv = match v.get("L") {
            None => None,
            Some(Value::String(s)) if s == "inf" => None,
            Some(Value::String(s)) => Some(qp.parse(s)?),
            Some(Value::Number(n)) => Some(qp.int(n.as_i64().ok_or_else(|| Error::Parse("L".into()))?)),
            Some(_) => return Err(Error::Parse("\"L\" must be \"inf\" or a literal".into())),
        };
        TriangulineParameter::new(d1, d2, linv)
    }

    /// The five reference parameters at prime p: st (w=3), ng (w=0), w=−1,
    /// cris non-exceptional (w=2), cris exceptional (w=2).
    pub fn canonical(qp: Qp) -> Vec<(&'static str, TriangulineParameter)> {
        let p = qp.p_pow(1);
        let pinv = qp.p_pow(-1);
        let two_p = p.mul_int(2);
        let inv_two_p = two_p.inv().expect("nonzero");
        let c = |k, l: &Padic| Character::new(qp, k, 0, l.clone()).expect("valid");
        vec![
            ("st", TriangulineParameter::new(c(3, &p), c(0, &pinv), Some(qp.zero())).expect("valid")),
            ("ng", TriangulineParameter::new(c(0, &p), c(0, &pinv), None).expect("valid")),
            ("w=-1", TriangulineParameter::new(c(0, &p), c(1, &pinv), None).expect("valid")),
            ("cris", TriangulineParameter::new(c(2, &two_p), c(0, &inv_two_p), None).expect("valid")),
            ("cris-exceptional", TriangulineParameter::new(c(2, &p), c(0, &pinv), None).expect("valid")),
        ]
    }
}

/// Predicted (∇-weight, φ-eigenvalue) of a basis vector of X.
#[derive(Clone, Debug)]
pub struct Eigendatum {
    pub label: &'static str,
    pub weight: i64,
    pub eigenvalue: Padic,
}

#[derive(Clone, Debug)]
pub struct JacquetDescription {
    pub class: Class,
    /// Torus characters η1 ⊗ η2.
    pub characters: Vec<(Character, Character)>,
    /// Exceptional case: the single character carries a unipotent block.
    pub non_semisimple: bool,
    pub eigendata: Vec<Eigendatum>,
}

impl JacquetDescription {
    pub fn to_json(&self) -> Value {
        json!({
            "class": self.class.label(),
            "characters": self.characters.iter().map(|(a, b)| json!([a.to_json(), b.to_json()])).collect::<Vec<_>>(),
            "non_semisimple": self.non_semisimple,
            "eigendata": self.eigendata.iter().map(|e| json!({
                "vector": e.label, "weight": e.weight, "eigenvalue": e.eigenvalue.to_literal()
            })).collect::<Vec<_>>(),
        })
    }
}

pub fn jacquet_expected(s: &TriangulineParameter) -> Result<JacquetDescription> {
    let class = s.classify()?;
    let qp = s.qp();
    let w = s.w();
    let chi = Character::chi(qp);
    let (d1, d2) = (&s.delta1, &s.delta2);
    let base = (d1.inv(), d2.inv().mul(&chi));
    let e1 = Eigendatum { label: "e1", weight: d1.k, eigenvalue: d1.lambda.clone() };
    let mut out = JacquetDescription { class, characters: vec![base], non_semisimple: false, eigendata: vec![e1] };
    match class {
        Class::St => {}
        Class::Ng if w >= 0 => {}
        Class::Ng => {
            out.characters.push((d1.inv().twist_x(w), d2.inv().mul(&chi).twist_x(-w)));
            out.eigendata.push(Eigendatum {
                label: "t^{-w}e1",
                weight: d2.k,
                eigenvalue: qp.p_pow(-w).mul_ref(&d1.lambda),
            });
        }
        Class::Cris | Class::CrisExceptional => {
            if class == Class::Cris {
                out.characters.push((d2.inv().twist_x(-w), d1.inv().mul(&chi).twist_x(w)));
            } else {
                out.non_semisimple = true;
            }
            out.eigendata.push(Eigendatum {
                label: "e2'",
                weight: d1.k,
                eigenvalue: qp.p_pow(w).mul_ref(&d2.lambda),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q() -> Qp {
        Qp::new(5, 40).unwrap()
    }

    #[test]
    fn chi_values() {
        let k = q();
        let chi = Character::chi(k);
        assert_eq!(chi.eval(&k.p_pow(1)).unwrap(), k.one());
        assert_eq!(chi.eval_int(7).unwrap(), k.int(7));
        assert_eq!(chi.weight(), 1);
        let d = Character::new(k, 2, 0, k.p_pow(1)).unwrap();
        assert_eq!(d.eval_int(5 * 3).unwrap(), k.int(45));
    }

    #[test]
    fn combine() {
        let k = q();
        let d1 = Character::new(k, 2, 0, k.p_pow(1)).unwrap();
        let d2 = Character::new(k, 0, 0, k.p_pow(-1)).unwrap();
        assert_eq!(d1.mul(&d1.inv()), Character::trivial(k));
        let s = TriangulineParameter::new(d1.clone(), d2, None).unwrap();
        assert_eq!(s.delta_d(), Character::new(k, 1, 0, k.one()).unwrap());
        let e = s.delta_d().mul(&d1.pow(-2));
        assert_eq!((e.k, e.teich), (-3, 0));
        assert_eq!(e.lambda, k.p_pow(-2));
    }

    #[test]
    fn classification_table() {
        let k = q();
        let got: Vec<(String, Class)> = TriangulineParameter::canonical(k)
            .into_iter()
            .map(|(n, s)| (n.to_string(), s.classify().unwrap()))
            .collect();
        assert_eq!(got[0].1, Class::St);
        assert_eq!(got[1].1, Class::Ng);
        assert_eq!(got[2].1, Class::Ng);
        assert_eq!(got[3].1, Class::Cris);
        assert_eq!(got[4].1, Class::CrisExceptional);
    }

    #[test]
    fn bad_slopes_rejected() {
        let k = q();
        let c = |kk, l: Padic| Character::new(k, kk, 0, l).unwrap();
        let r = TriangulineParameter::new(c(0, k.one()), c(0, k.one()), None);
        assert!(matches!(r, Err(Error::InvalidParameter(m)) if m.contains("v_p(δ1(p))")));
        let r = TriangulineParameter::new(c(2, k.p_pow(1)), c(0, k.p_pow(-1)), Some(k.zero()));
        assert!(r.is_err());
    }
}
