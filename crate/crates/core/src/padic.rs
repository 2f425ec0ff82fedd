//! Capped-precision arithmetic in Q_p.
//!
//! A value is `p^val * unit` with the unit known modulo `p^(prec - val)`.
//! Exact zero carries infinite valuation and precision; an inexact zero
//! `O(p^k)` reports valuation `k`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Stand-in for +infinity in valuations and precisions.
pub const INF: i64 = i64::MAX / 4;

/// Primes the library accepts.
pub const SUPPORTED_PRIMES: [u32; 5] = [3, 5, 7, 11, 13];

thread_local! {
    static POWERS: RefCell<HashMap<u32, Vec<BigUint>>> = RefCell::new(HashMap::new());
}

/// `p^k` from a per-thread cache.
pub fn ppow(p: u32, k: i64) -> BigUint {
    assert!(k >= 0, "negative exponent {k}");
    let k = k as usize;
    POWERS.with(|cell| {
        let mut map = cell.borrow_mut();
        let v = map.entry(p).or_insert_with(|| vec![BigUint::one()]);
        while v.len() <= k {
            let next = v.last().unwrap() * p;
            v.push(next);
        }
        v[k].clone()
    })
}

/// Run `f` on a borrowed `p^k` from the cache.
pub fn with_ppow<R>(p: u32, k: i64, f: impl FnOnce(&BigUint) -> R) -> R {
    assert!(k >= 0, "negative exponent {k}");
    let k = k as usize;
    POWERS.with(|cell| {
        let mut map = cell.borrow_mut();
        let v = map.entry(p).or_insert_with(|| vec![BigUint::one()]);
        while v.len() <= k {
            let next = v.last().unwrap() * p;
            v.push(next);
        }
        f(&v[k])
    })
}

/// v_p of a nonzero machine integer.
pub fn vp_i64(p: u32, n: i64) -> i64 {
    assert!(n != 0);
    let mut n = n.unsigned_abs();
    let mut k = 0;
    while n % p as u64 == 0 {
        n /= p as u64;
        k += 1;
    }
    k
}

/// v_p(n!) by Legendre's formula.
pub fn vp_factorial(p: u32, n: u64) -> i64 {
    let mut s = 0;
    let mut q = n;
    while q > 0 {
        q /= p as u64;
        s += q as i64;
    }
    s
}

/// The field Q_p together with the relative precision given to new constants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Qp {
    pub p: u32,
    pub prec: i64,
}

impl Qp {
    pub fn new(p: u32, prec: i64) -> Result<Self> {
        if !SUPPORTED_PRIMES.contains(&p) {
            return Err(Error::InvalidParameter(format!(
                "prime {p} not in {SUPPORTED_PRIMES:?}"
            )));
        }
        if !(2..=1000).contains(&prec) {
            return Err(Error::InvalidParameter(format!("precision {prec} out of range")));
        }
        Ok(Qp { p, prec })
    }

    pub fn zero(&self) -> Padic {
        Padic::exact_zero(self.p)
    }

    pub fn one(&self) -> Padic {
        self.int(1)
    }

    /// Inexact zero `O(p^k)`.
    pub fn big_o(&self, k: i64) -> Padic {
        Padic { p: self.p, val: k, unit: BigUint::zero(), prec: k }
    }

    pub fn int(&self, n: i64) -> Padic {
        self.bigint(&BigInt::from(n))
    }

    pub fn bigint(&self, n: &BigInt) -> Padic {
        if n.is_zero() {
            return self.zero();
        }
        let p = self.p;
        let mut m = n.magnitude().clone();
        let mut v = 0i64;
        let pb = BigUint::from(p);
        loop {
            let (q, r) = m.div_rem(&pb);
            if !r.is_zero() {
                break;
            }
            m = q;
            v += 1;
        }
        let modulus = ppow(p, self.prec);
        let mut u = m % &modulus;
        if n.sign() == Sign::Minus {
            u = &modulus - u;
        }
        Padic { p, val: v, unit: u, prec: v + self.prec }
    }

    /// `num / den` as a p-adic number.
    pub fn rat(&self, num: i64, den: i64) -> Padic {
        assert!(den != 0, "zero denominator");
        self.int(num).div_exact(&self.int(den))
    }

    /// `p^k` with full relative precision.
    pub fn p_pow(&self, k: i64) -> Padic {
        Padic { p: self.p, val: k, unit: BigUint::one(), prec: k + self.prec }
    }

    /// Build from base-p digits of the unit part (little-endian).
    pub fn from_digits(&self, val: i64, digits: &[u32], prec: i64) -> Result<Padic> {
        let p = self.p;
        let mut u = BigUint::zero();
        for &d in digits.iter().rev() {
            if d >= p {
                return Err(Error::Parse(format!("digit {d} out of range for p = {p}")));
            }
            u = u * p + d;
        }
        if prec < val {
            return Err(Error::Parse(format!("precision {prec} below valuation {val}")));
        }
        Ok(Padic::normalize(p, val, u, prec))
    }

    /// Teichmüller representative of `r mod p`.
    pub fn teichmuller(&self, r: i64) -> Padic {
        let p = self.p as i64;
        let r = r.rem_euclid(p);
        assert!(r != 0, "teichmuller of a non-unit residue");
        let modulus = ppow(self.p, self.prec);
        let pb = BigUint::from(self.p);
        let mut x = BigUint::from(r as u64);
        for _ in 0..self.prec {
            let y = x.modpow(&pb, &modulus);
            if y == x {
                break;
            }
            x = y;
        }
        Padic { p: self.p, val: 0, unit: x, prec: self.prec }
    }

    /// Parse a literal: `v=..;digits=..;prec=..`, an integer, or `a/b`.
    pub fn parse(&self, s: &str) -> Result<Padic> {
        let s = s.trim();
        if s.starts_with("v=") {
            let mut val = None;
            let mut digits = None;
            let mut prec = None;
            for part in s.split(';') {
                let (k, v) = part
                    .split_once('=')
                    .ok_or_else(|| Error::Parse(format!("bad field `{part}`")))?;
                match k.trim() {
                    "v" => val = Some(parse_ext_int(v)?),
                    "prec" => prec = Some(parse_ext_int(v)?),
                    "digits" => {
                        let ds: Result<Vec<u32>> = v
                            .split(',')
                            .map(str::trim)
                            .filter(|d| !d.is_empty())
                            .map(|d| d.parse::<u32>().map_err(|e| Error::Parse(e.to_string())))
                            .collect();
                        digits = Some(ds?);
                    }
                    other => return Err(Error::Parse(format!("unknown field `{other}`"))),
                }
            }
            let val = val.ok_or_else(|| Error::Parse("missing v".into()))?;
            let prec = prec.ok_or_else(|| Error::Parse("missing prec".into()))?;
            let digits = digits.unwrap_or_default();
            if val == INF {
                return Ok(self.zero());
            }
            return self.from_digits(val, &digits, prec);
        }
        if let Some((a, b)) = s.split_once('/') {
            let a: BigInt = a.trim().parse().map_err(|_| Error::Parse(format!("bad rational `{s}`")))?;
            let b: BigInt = b.trim().parse().map_err(|_| Error::Parse(format!("bad rational `{s}`")))?;
            if b.is_zero() {
                return Err(Error::Parse("zero denominator".into()));
            }
            return self.bigint(&a).checked_div(&self.bigint(&b));
        }
        let n: BigInt = s.parse().map_err(|_| Error::Parse(format!("bad p-adic literal `{s}`")))?;
        Ok(self.bigint(&n))
    }
}

fn parse_ext_int(s: &str) -> Result<i64> {
    let s = s.trim();
    if s == "inf" {
        return Ok(INF);
    }
    s.parse::<i64>().map_err(|e| Error::Parse(format!("`{s}`: {e}")))
}

/// An element of Q_p at capped precision.
#[derive(Clone)]
pub struct Padic {
    p: u32,
    val: i64,
    unit: BigUint,
    prec: i64,
}

impl Padic {
    pub fn exact_zero(p: u32) -> Self {
        Padic { p, val: INF, unit: BigUint::zero(), prec: INF }
    }

    fn normalize(p: u32, mut val: i64, mut unit: BigUint, prec: i64) -> Self {
        if unit.is_zero() {
            if prec >= INF {
                return Padic::exact_zero(p);
            }
            return Padic { p, val: prec, unit, prec };
        }
        while (&unit % p).is_zero() {
            unit /= p;
            val += 1;
        }
        if val >= prec {
            return Padic { p, val: prec, unit: BigUint::zero(), prec };
        }
        with_ppow(p, prec - val, |m| {
            if &unit >= m {
                unit %= m;
            }
        });
        Padic { p, val, unit, prec }
    }

    pub fn prime(&self) -> u32 {
        self.p
    }

    /// v_p; `INF` for exact zero, `k` for `O(p^k)`.
    pub fn valuation(&self) -> i64 {
        self.val
    }

    /// Absolute precision: the value is known modulo `p^precision()`.
    pub fn precision(&self) -> i64 {
        self.prec
    }

    pub fn relative_precision(&self) -> i64 {
        if self.unit.is_zero() {
            0
        } else {
            self.prec - self.val
        }
    }

    pub fn unit_part(&self) -> &BigUint {
        &self.unit
    }

    /// Zero at the known precision (exact or inexact).
    pub fn is_zero(&self) -> bool {
        self.unit.is_zero()
    }

    pub fn is_exact_zero(&self) -> bool {
        self.unit.is_zero() && self.prec >= INF
    }

    /// Agreement modulo `p^min(precisions)`.
    pub fn eq_within(&self, other: &Padic) -> bool {
        (self - other).is_zero()
    }

    /// Lower the absolute precision to at most `abs`.
    pub fn with_cap(&self, abs: i64) -> Padic {
        if abs >= self.prec {
            return self.clone();
        }
        if self.unit.is_zero() || self.val >= abs {
            return Padic { p: self.p, val: abs, unit: BigUint::zero(), prec: abs };
        }
        let m = ppow(self.p, abs - self.val);
        Padic { p: self.p, val: self.val, unit: &self.unit % m, prec: abs }
    }

    fn check(&self, other: &Padic) {
        assert_eq!(self.p, other.p, "mixed-prime arithmetic");
    }

    pub fn neg_ref(&self) -> Padic {
        if self.unit.is_zero() {
            return self.clone();
        }
        let m = ppow(self.p, self.prec - self.val);
        Padic { p: self.p, val: self.val, unit: m - &self.unit, prec: self.prec }
    }

    pub fn add_ref(&self, other: &Padic) -> Padic {
        self.check(other);
        if self.is_exact_zero() {
            return other.clone();
        }
        if other.is_exact_zero() {
            return self.clone();
        }
        let prec = self.prec.min(other.prec);
        let v = self.val.min(other.val);
        if v >= prec {
            return Padic { p: self.p, val: prec, unit: BigUint::zero(), prec };
        }
        let mut s = BigUint::zero();
        for x in [self, other] {
            if !x.unit.is_zero() && x.val < prec {
                let shift = x.val - v;
                if shift == 0 {
                    s += &x.unit;
                } else {
                    s += with_ppow(self.p, shift, |m| &x.unit * m);
                }
            }
        }
        Padic::normalize(self.p, v, s, prec)
    }

    pub fn sub_ref(&self, other: &Padic) -> Padic {
        self.check(other);
        if other.is_exact_zero() {
            return self.clone();
        }
        let prec = self.prec.min(other.prec);
        self.add_ref(&other.with_cap(prec).neg_ref())
    }

    pub fn mul_ref(&self, other: &Padic) -> Padic {
        self.check(other);
        if self.is_exact_zero() || other.is_exact_zero() {
            return Padic::exact_zero(self.p);
        }
        let val = self.val + other.val;
        if self.unit.is_zero() || other.unit.is_zero() {
            // O(p^a) * y has precision a + v(y)
            let prec = if self.unit.is_zero() && other.unit.is_zero() {
                self.prec + other.prec
            } else if self.unit.is_zero() {
                self.prec + other.val
            } else {
                other.prec + self.val
            };
            return Padic { p: self.p, val: prec, unit: BigUint::zero(), prec };
        }
        let r = (self.prec - self.val).min(other.prec - other.val);
        let u = with_ppow(self.p, r, |m| (&self.unit * &other.unit) % m);
        Padic { p: self.p, val, unit: u, prec: val + r }
    }

    /// Multiplicative inverse; fails on values indistinguishable from zero.
    pub fn inv(&self) -> Result<Padic> {
        if self.unit.is_zero() {
            return Err(Error::PrecisionZeroDivisor);
        }
        let r = self.prec - self.val;
        let m = ppow(self.p, r);
        let u = self.unit.modinv(&m).expect("unit is invertible");
        Ok(Padic { p: self.p, val: -self.val, unit: u, prec: -self.val + r })
    }

    pub fn checked_div(&self, other: &Padic) -> Result<Padic> {
        self.check(other);
        Ok(self.mul_ref(&other.inv()?))
    }

    /// Division that panics on a precision-zero divisor.
    pub fn div_exact(&self, other: &Padic) -> Padic {
        self.checked_div(other).expect("precision-zero divisor")
    }

    /// Multiplication by an exact machine integer.
    pub fn mul_int(&self, n: i64) -> Padic {
        if n == 1 {
            return self.clone();
        }
        if n == 0 || self.is_exact_zero() {
            return Padic::exact_zero(self.p);
        }
        let v = vp_i64(self.p, n);
        if self.unit.is_zero() {
            let k = self.prec + v;
            return Padic { p: self.p, val: k, unit: BigUint::zero(), prec: k };
        }
        let u = n.unsigned_abs() / (self.p as u64).pow(v as u32);
        let r = self.prec - self.val;
        let unit = (&self.unit * u) % ppow(self.p, r);
        let out = Padic { p: self.p, val: self.val + v, unit, prec: self.prec + v };
        if n < 0 {
            out.neg_ref()
        } else {
            out
        }
    }

    /// Division by an exact nonzero machine integer.
    pub fn div_int(&self, n: i64) -> Padic {
        assert!(n != 0, "division by zero");
        if n == 1 || self.is_exact_zero() {
            return self.clone();
        }
        let v = vp_i64(self.p, n);
        if self.unit.is_zero() {
            let k = self.prec - v;
            return Padic { p: self.p, val: k, unit: BigUint::zero(), prec: k };
        }
        let u = n.unsigned_abs() / (self.p as u64).pow(v as u32);
        let r = self.prec - self.val;
        let m = ppow(self.p, r);
        let inv = BigUint::from(u).modinv(&m).expect("unit");
        let unit = (&self.unit * inv) % m;
        let out = Padic { p: self.p, val: self.val - v, unit, prec: self.prec - v };
        if n < 0 {
            out.neg_ref()
        } else {
            out
        }
    }

    pub fn pow(&self, mut e: i64) -> Result<Padic> {
        let mut base = if e < 0 {
            e = -e;
            self.inv()?
        } else {
            self.clone()
        };
        let mut acc: Option<Padic> = None;
        while e > 0 {
            if e & 1 == 1 {
                acc = Some(match acc {
                    None => base.clone(),
                    Some(a) => a.mul_ref(&base),
                });
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_ref(&base);
            }
        }
        Ok(acc.unwrap_or_else(|| Padic::one_exactish(self.p)))
    }

    /// Integer with the smallest representative (nonnegative valuation required).
    pub fn to_bigint(&self) -> Option<BigInt> {
        if self.val < 0 {
            return None;
        }
        if self.unit.is_zero() {
            return Some(BigInt::zero());
        }
        Some(BigInt::from(&self.unit * ppow(self.p, self.val)))
    }

    /// Signed representative in (-p^prec/2, p^prec/2].
    pub fn to_centered_bigint(&self) -> Option<BigInt> {
        let n = self.to_bigint()?;
        if self.prec >= INF {
            return Some(n);
        }
        let m = BigInt::from(ppow(self.p, self.prec));
        if &n * 2 > m {
            Some(n - m)
        } else {
            Some(n)
        }
    }

    pub fn to_i64_centered(&self) -> Option<i64> {
        self.to_centered_bigint()?.to_i64()
    }

    /// Residue modulo p of a value with nonnegative valuation.
    pub fn residue(&self) -> u32 {
        if self.val > 0 || self.unit.is_zero() {
            return 0;
        }
        (&self.unit % self.p).to_u32().unwrap()
    }

    /// Residue modulo p^k of an integral value.
    pub fn residue_mod(&self, k: i64) -> BigUint {
        assert!(self.val >= 0, "residue of a non-integral value");
        if self.unit.is_zero() || self.val >= k {
            return BigUint::zero();
        }
        (&self.unit * ppow(self.p, self.val)) % ppow(self.p, k)
    }

    /// Literal `v=..;digits=..;prec=..`.
    pub fn to_literal(&self) -> String {
        if self.is_exact_zero() {
            return "v=inf;digits=;prec=inf".to_string();
        }
        let mut digits = Vec::new();
        let mut u = self.unit.clone();
        let n = if self.unit.is_zero() { 0 } else { self.prec - self.val };
        for _ in 0..n {
            let (q, r) = u.div_rem(&BigUint::from(self.p));
            digits.push(r.to_string());
            u = q;
        }
        format!("v={};digits={};prec={}", self.val, digits.join(","), self.prec)
    }

    /// Teichmüller residue class exponent of a unit is not needed elsewhere;
    /// this returns ω(x) for a unit `x`.
    pub fn teichmuller_of(&self) -> Padic {
        assert_eq!(self.val, 0, "teichmuller of a non-unit");
        Qp { p: self.p, prec: self.prec }.teichmuller(self.residue() as i64)
    }

    /// p-adic logarithm of a unit, through its principal part ⟨x⟩ = x/ω(x).
    pub fn log_unit(&self) -> Padic {
        assert_eq!(self.val, 0, "log of a non-unit");
        let w = self.teichmuller_of();
        let z = self.div_exact(&w).sub_ref(&Padic::one_exactish(self.p));
        log1p_small(&z, self.prec)
    }

    /// exp(x) for v(x) ≥ 1.
    pub fn exp_small(&self) -> Padic {
        assert!(self.val >= 1, "exp needs v(x) >= 1");
        let p = self.p;
        let target = self.prec;
        let one = Padic::one_exactish(p);
        let mut sum = one.clone();
        let mut term = one;
        let mut n: i64 = 1;
        loop {
            let lower = n * self.val.min(INF / 4) - vp_factorial(p, n as u64);
            if self.is_exact_zero() || lower >= target + 2 {
                break;
            }
            term = term.mul_ref(self).div_int(n);
            sum = sum.add_ref(&term);
            n += 1;
        }
        sum.with_cap(target)
    }
}

fn log1p_small(z: &Padic, target: i64) -> Padic {
    let p = z.prime();
    if z.is_zero() {
        return Padic::exact_zero(p).with_cap(z.precision().min(target));
    }
    let v = z.valuation();
    assert!(v >= 1, "log series needs v(z) >= 1");
    let mut sum = Padic::exact_zero(p);
    let mut zn = z.clone();
    let mut n: i64 = 1;
    loop {
        let lower = n * v - (n as f64).log(p as f64).floor() as i64;
        if lower >= target + 2 {
            break;
        }
        let mut term = zn.div_int(n);
        if n % 2 == 0 {
            term = term.neg_ref();
        }
        sum = sum.add_ref(&term);
        zn = zn.mul_ref(z);
        n += 1;
    }
    sum.with_cap(target)
}

impl Padic {
    /// The integer 1 with a relative precision that never binds.
    fn one_exactish(p: u32) -> Padic {
        Padic { p, val: 0, unit: BigUint::one(), prec: 2048 }
    }
}

impl Qp {
    /// `ω(a)^(b mod (p-1)) · exp(b · log⟨a⟩)` for a unit `a` and `b ∈ Z_p`.
    ///
    /// The Teichmüller exponent uses the centred representative of `b`, so the
    /// result is multiplicative in `b` for integer exponents and for all `b`
    /// when `a` is a principal unit.
    pub fn unit_power(&self, a: &Padic, b: &Padic) -> Padic {
        assert_eq!(a.valuation(), 0, "unit_power base must be a unit");
        assert!(b.valuation() >= 0, "unit_power exponent must lie in Z_p");
        let p = self.p;
        let w = a.teichmuller_of();
        let e = b
            .to_centered_bigint()
            .unwrap_or_else(BigInt::zero)
            .mod_floor(&BigInt::from(p - 1))
            .to_i64()
            .unwrap();
        let wpow = w.pow(e).unwrap();
        let l = a.log_unit();
        let x = b.mul_ref(&l);
        let ex = if x.is_zero() { self.one().with_cap(x.precision().max(1)) } else { x.exp_small() };
        wpow.mul_ref(&ex).with_cap(a.precision())
    }

    /// C(b, n) = b(b-1)...(b-n+1)/n! for b ∈ Z_p.
    pub fn binomial(&self, b: &Padic, n: u64) -> Padic {
        let mut acc = self.one();
        for j in 0..n {
            acc = acc.mul_ref(&b.sub_ref(&self.int(j as i64)));
        }
        let mut f = BigInt::one();
        for j in 1..=n {
            f *= j;
        }
        acc.div_exact(&self.bigint(&f))
    }
}

impl fmt::Debug for Padic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_exact_zero() {
            return write!(f, "0");
        }
        if self.unit.is_zero() {
            return write!(f, "O({}^{})", self.p, self.prec);
        }
        write!(f, "{}*{}^{} + O({}^{})", self.unit, self.p, self.val, self.p, self.prec)
    }
}

impl fmt::Display for Padic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(n) = self.to_centered_bigint() {
            if n.abs() < BigInt::from(1_000_000u32) {
                if self.prec >= INF {
                    return write!(f, "{n}");
                }
                return write!(f, "{n} + O({}^{})", self.p, self.prec);
            }
        }
        write!(f, "{}", self.to_literal())
    }
}

impl PartialEq for Padic {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.eq_within(other)
    }
}

impl serde::Serialize for Padic {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_literal())
    }
}

macro_rules! forward_binop {
    ($tr:ident, $m:ident, $imp:ident) => {
        impl $tr<&Padic> for &Padic {
            type Output = Padic;
            fn $m(self, rhs: &Padic) -> Padic {
                self.$imp(rhs)
            }
        }
        impl $tr<Padic> for Padic {
            type Output = Padic;
            fn $m(self, rhs: Padic) -> Padic {
                (&self).$imp(&rhs)
            }
        }
        impl $tr<&Padic> for Padic {
            type Output = Padic;
            fn $m(self, rhs: &Padic) -> Padic {
                (&self).$imp(rhs)
            }
        }
        impl $tr<Padic> for &Padic {
            type Output = Padic;
            fn $m(self, rhs: Padic) -> Padic {
                self.$imp(&rhs)
            }
        }
    };
}

forward_binop!(Add, add, add_ref);
forward_binop!(Sub, sub, sub_ref);
forward_binop!(Mul, mul, mul_ref);
forward_binop!(Div, div, div_exact);

impl Neg for &Padic {
    type Output = Padic;
    fn neg(self) -> Padic {
        self.neg_ref()
    }
}

impl Neg for Padic {
    type Output = Padic;
    fn neg(self) -> Padic {
        self.neg_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q() -> Qp {
        Qp::new(5, 40).unwrap()
    }

    #[test]
    fn add_small_integers() {
        let k = q();
        let s = k.int(2) + k.int(3);
        assert_eq!(s, k.int(5));
        assert_eq!(s.valuation(), 1);
        assert_eq!(s.precision(), 40);
    }

    #[test]
    fn valuations() {
        let k = q();
        assert_eq!((k.p_pow(2) * k.int(7)).valuation(), 2);
        assert_eq!(k.int(125 * 7).valuation(), 3);
        assert_eq!(k.zero().valuation(), INF);
        assert_eq!(k.rat(1, 5).valuation(), -1);
    }

    #[test]
    fn geometric_series_inverse() {
        let k = q();
        let r = k.one().checked_div(&(k.one() - k.int(5))).unwrap();
        let mut s = k.zero();
        for i in 0..40 {
            s = s + k.p_pow(i);
        }
        assert_eq!(r, s);
        assert_eq!((k.one() - k.int(5)) * r, k.one());
    }

    #[test]
    fn division_by_inexact_zero_fails() {
        let k = q();
        let z = k.int(3) - k.int(3);
        assert!(z.is_zero() && !z.is_exact_zero());
        assert_eq!(k.one().checked_div(&z), Err(Error::PrecisionZeroDivisor));
    }

    #[test]
    fn teichmuller_lifts() {
        let k = q();
        assert_eq!(k.teichmuller(1), k.one());
        assert_eq!(k.teichmuller(4), k.int(-1));
        let x = k.teichmuller(2);
        assert_eq!(x.residue(), 2);
        assert_eq!(x.pow(4).unwrap(), k.one());
    }

    #[test]
    fn unit_power_basics() {
        let k = q();
        let a = k.int(7);
        assert_eq!(k.unit_power(&a, &k.zero()), k.one());
        assert_eq!(k.unit_power(&a, &k.one()), a);
        assert_eq!(k.unit_power(&a, &k.int(2)), a.clone() * a.clone());
        assert_eq!(k.unit_power(&a, &k.int(-1)), k.one() / a);
    }

    #[test]
    fn binomials() {
        let k = q();
        assert_eq!(k.binomial(&k.int(9), 0), k.one());
        assert_eq!(k.binomial(&k.int(5), 2), k.int(10));
        assert_eq!(k.binomial(&k.rat(1, 2), 2), k.rat(-1, 8));
    }

    #[test]
    fn literal_roundtrip() {
        let k = q();
        for x in [k.rat(3, 25), k.int(-7), k.int(250), k.zero(), k.big_o(6)] {
            let s = x.to_literal();
            let y = k.parse(&s).unwrap();
            assert_eq!(x.valuation(), y.valuation(), "{s}");
            assert_eq!(x.precision(), y.precision(), "{s}");
            assert!(x.eq_within(&y));
        }
        assert_eq!(k.parse("-4").unwrap(), k.int(-4));
        assert_eq!(k.parse("1/2").unwrap(), k.rat(1, 2));
        assert!(k.parse("v=0;digits=7;prec=1").is_err());
    }

    #[test]
    fn log_exp_inverse() {
        let k = q();
        let x = k.int(10);
        let e = x.exp_small();
        let l = e.log_unit();
        assert_eq!(l, x);
    }

    #[test]
    #[should_panic(expected = "mixed-prime")]
    fn mixed_primes_panic() {
        let a = Qp::new(5, 10).unwrap().int(1);
        let b = Qp::new(7, 10).unwrap().int(1);
        let _ = a + b;
    }
}
