//! Truncated Laurent series in T over Q_p.
//!
//! Coefficients are known for exponents `low..=trunc`. Coefficients above
//! `trunc` are unknown; `tail` is a lower bound for their valuations
//! (`TAIL_EXACT` means they vanish, i.e. the series is an exact polynomial,
//! `TAIL_UNBOUNDED` means nothing is known). The tail bound is what lets ψ
//! report honest precision on truncated input.

use std::cell::RefCell;
use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::padic::{vp_i64, Padic, Qp, INF};

pub const TAIL_EXACT: i64 = INF;
pub const TAIL_UNBOUNDED: i64 = -INF;
/// Precision assigned to coefficients about which nothing is known.
pub const PREC_FLOOR: i64 = -(1 << 20);

fn bound_add(a: i64, b: i64) -> i64 {
    if a >= INF || b >= INF {
        INF
    } else if a <= PREC_FLOOR || b <= PREC_FLOOR {
        TAIL_UNBOUNDED
    } else {
        a + b
    }
}

fn clamp_cap(c: i64) -> i64 {
    if c <= PREC_FLOOR {
        PREC_FLOOR
    } else {
        c
    }
}

fn ceil_div(a: i64, b: i64) -> i64 {
    assert!(b > 0);
    -((-a).div_euclid(b))
}

#[derive(Clone, Debug)]
pub struct Series {
    qp: Qp,
    low: i64,
    coeffs: Vec<Padic>,
    tail: i64,
}

impl Series {
    /// Series from coefficients of exponents `low, low+1, ...`.
    pub fn from_coeffs(qp: Qp, low: i64, coeffs: Vec<Padic>, tail: i64) -> Series {
        assert!(!coeffs.is_empty(), "empty coefficient vector");
        Series { qp, low, coeffs, tail }
    }

    /// Exact polynomial `Σ c_k T^k`, padded with exact zeros up to `trunc`.
    pub fn from_poly(qp: Qp, coeffs: &[Padic], trunc: i64) -> Series {
        let n = (trunc + 1).max(1) as usize;
        let mut c: Vec<Padic> = coeffs.iter().take(n).cloned().collect();
        let tail = if coeffs.len() > n {
            coeffs[n..].iter().map(|x| x.valuation()).min().unwrap_or(INF)
        } else {
            TAIL_EXACT
        };
        while c.len() < n {
            c.push(qp.zero());
        }
        Series { qp, low: 0, coeffs: c, tail }
    }

    pub fn zero(qp: Qp, trunc: i64) -> Series {
        Series::from_poly(qp, &[], trunc)
    }

    pub fn constant(qp: Qp, c: Padic, trunc: i64) -> Series {
        Series::from_poly(qp, &[c], trunc)
    }

    pub fn one(qp: Qp, trunc: i64) -> Series {
        Series::constant(qp, qp.one(), trunc)
    }

    /// `c T^k` known up to `trunc`.
    pub fn monomial(qp: Qp, c: Padic, k: i64, trunc: i64) -> Series {
        assert!(k <= trunc, "monomial beyond truncation");
        let low = k.min(0);
        let mut coeffs = vec![qp.zero(); (trunc - low + 1) as usize];
        coeffs[(k - low) as usize] = c;
        Series { qp, low, coeffs, tail: TAIL_EXACT }
    }

    /// The variable T.
    pub fn var(qp: Qp, trunc: i64) -> Series {
        Series::monomial(qp, qp.one(), 1, trunc)
    }

    pub fn qp(&self) -> Qp {
        self.qp
    }

    pub fn low(&self) -> i64 {
        self.low
    }

    pub fn trunc(&self) -> i64 {
        self.low + self.coeffs.len() as i64 - 1
    }

    pub fn tail(&self) -> i64 {
        self.tail
    }

    pub fn with_tail(mut self, tail: i64) -> Series {
        self.tail = tail;
        self
    }

    /// Coefficient of `T^k`; exact zero below `low`.
    pub fn coeff(&self, k: i64) -> Padic {
        if k < self.low {
            return self.qp.zero();
        }
        assert!(k <= self.trunc(), "coefficient {k} beyond truncation {}", self.trunc());
        self.coeffs[(k - self.low) as usize].clone()
    }

    pub fn coeff_ref(&self, k: i64) -> Option<&Padic> {
        if k < self.low || k > self.trunc() {
            None
        } else {
            Some(&self.coeffs[(k - self.low) as usize])
        }
    }

    pub fn set_coeff(&mut self, k: i64, c: Padic) {
        assert!(k >= self.low && k <= self.trunc());
        let i = (k - self.low) as usize;
        self.coeffs[i] = c;
    }

    /// Pairs `(exponent, coefficient)`.
    pub fn terms(&self) -> impl Iterator<Item = (i64, &Padic)> {
        self.coeffs.iter().enumerate().map(move |(i, c)| (self.low + i as i64, c))
    }

    /// Lowest exponent whose coefficient is nonzero at its precision.
    pub fn order(&self) -> Option<i64> {
        self.terms().find(|(_, c)| !c.is_zero()).map(|(k, _)| k)
    }

    /// Length of the principal part (0 for power series).
    pub fn principal_len(&self) -> i64 {
        match self.order() {
            Some(k) if k < 0 => -k,
            _ => 0,
        }
    }

    pub fn is_power_series(&self) -> bool {
        self.principal_len() == 0
    }

    /// Drop negative exponents that vanish at precision.
    pub fn trim_principal(&self) -> Series {
        if self.low >= 0 {
            return self.clone();
        }
        let new_low = match self.order() {
            Some(k) if k < 0 => k,
            _ => 0,
        };
        if new_low == self.low {
            return self.clone();
        }
        let start = (new_low - self.low) as usize;
        Series { qp: self.qp, low: new_low, coeffs: self.coeffs[start..].to_vec(), tail: self.tail }
    }

    /// Power part `Σ_{k≥0} c_k T^k`.
    pub fn power_part(&self) -> Series {
        if self.low >= 0 {
            return self.clone();
        }
        let start = (-self.low) as usize;
        Series { qp: self.qp, low: 0, coeffs: self.coeffs[start..].to_vec(), tail: self.tail }
    }

    /// Principal part `Σ_{k<0} c_k T^k` (exact zeros up to `trunc`).
    pub fn principal_part(&self) -> Series {
        let mut out = self.clone();
        for k in 0..=self.trunc() {
            out.set_coeff(k, self.qp.zero());
        }
        out.tail = TAIL_EXACT;
        out
    }

    /// Minimal valuation among known coefficients (INF if all exact zero).
    pub fn valuation_min(&self) -> i64 {
        self.coeffs.iter().map(|c| c.valuation()).min().unwrap_or(INF)
    }

    /// Minimal absolute precision among known coefficients.
    pub fn precision_min(&self) -> i64 {
        self.coeffs.iter().map(|c| c.precision()).min().unwrap_or(INF)
    }

    /// Lower bound for the valuation of every coefficient, known or not.
    pub fn bound(&self) -> i64 {
        self.valuation_min().min(self.tail)
    }

    /// Highest exponent with a coefficient that is not an exact zero.
    fn degree_exact(&self) -> i64 {
        self.terms()
            .filter(|(_, c)| !c.is_exact_zero())
            .map(|(k, _)| k)
            .last()
            .unwrap_or(i64::MIN / 4)
    }

    pub fn truncate(&self, trunc: i64) -> Series {
        if trunc >= self.trunc() {
            return self.clone();
        }
        assert!(trunc >= self.low, "truncation below the principal part");
        let keep = (trunc - self.low + 1) as usize;
        let dropped = self.coeffs[keep..].iter().map(|c| c.valuation()).min().unwrap_or(INF);
        Series {
            qp: self.qp,
            low: self.low,
            coeffs: self.coeffs[..keep].to_vec(),
            tail: self.tail.min(dropped),
        }
    }

    /// Extend the known range with zeros; `force` allows it for inexact tails
    /// (the caller accounts for the neglected part).
    fn extend_to(&self, low: i64, trunc: i64, force: bool) -> Series {
        let low = low.min(self.low);
        let mut coeffs = Vec::with_capacity((trunc - low + 1) as usize);
        for k in low..=trunc {
            if k < self.low {
                coeffs.push(self.qp.zero());
            } else if k <= self.trunc() {
                coeffs.push(self.coeffs[(k - self.low) as usize].clone());
            } else {
                assert!(force || self.tail >= INF, "cannot extend a series with unknown tail");
                coeffs.push(self.qp.zero());
            }
        }
        Series { qp: self.qp, low, coeffs, tail: self.tail }
    }

    /// Lower every coefficient's precision to at most `abs`.
    pub fn cap_precision(&self, abs: i64) -> Series {
        let mut out = self.clone();
        for c in out.coeffs.iter_mut() {
            *c = c.with_cap(abs);
        }
        out
    }

    pub fn add(&self, other: &Series) -> Series {
        assert_eq!(self.qp.p, other.qp.p, "mixed-prime arithmetic");
        let trunc = self.trunc().min(other.trunc());
        let a = self.truncate(trunc);
        let b = other.truncate(trunc);
        let low = a.low.min(b.low);
        let mut coeffs = Vec::with_capacity((trunc - low + 1) as usize);
        for k in low..=trunc {
            coeffs.push(a.coeff(k).add_ref(&b.coeff(k)));
        }
        Series { qp: self.qp, low, coeffs, tail: a.tail.min(b.tail) }
    }

    pub fn neg(&self) -> Series {
        Series {
            qp: self.qp,
            low: self.low,
            coeffs: self.coeffs.iter().map(|c| c.neg_ref()).collect(),
            tail: self.tail,
        }
    }

    pub fn sub(&self, other: &Series) -> Series {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &Padic) -> Series {
        let tail = if self.tail >= INF {
            INF
        } else if c.is_exact_zero() {
            INF
        } else {
            bound_add(self.tail, c.valuation())
        };
        Series {
            qp: self.qp,
            low: self.low,
            coeffs: self.coeffs.iter().map(|x| x.mul_ref(c)).collect(),
            tail,
        }
    }

    pub fn scale_int(&self, n: i64) -> Series {
        let tail = if self.tail >= INF || n == 0 {
            INF
        } else {
            bound_add(self.tail, vp_i64(self.qp.p, n))
        };
        Series {
            qp: self.qp,
            low: self.low,
            coeffs: self.coeffs.iter().map(|x| x.mul_int(n)).collect(),
            tail,
        }
    }

    /// Multiply by `T^k`.
    pub fn shift(&self, k: i64) -> Series {
        Series { qp: self.qp, low: self.low + k, coeffs: self.coeffs.clone(), tail: self.tail }
    }

    pub fn mul(&self, other: &Series) -> Series {
        assert_eq!(self.qp.p, other.qp.p, "mixed-prime arithmetic");
        let (la, lb) = (self.low, other.low);
        let trunc = (self.trunc() + lb).min(other.trunc() + la);
        let low = la + lb;
        let n = (trunc - low + 1).max(1) as usize;
        let mut acc: Vec<Option<Padic>> = vec![None; n];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_exact_zero() {
                continue;
            }
            let ea = la + i as i64;
            for (j, b) in other.coeffs.iter().enumerate() {
                let e = ea + lb + j as i64;
                if e > trunc {
                    break;
                }
                if b.is_exact_zero() {
                    continue;
                }
                let idx = (e - low) as usize;
                let prod = a.mul_ref(b);
                acc[idx] = Some(match acc[idx].take() {
                    None => prod,
                    Some(s) => s.add_ref(&prod),
                });
            }
        }
        let coeffs: Vec<Padic> = acc.into_iter().map(|c| c.unwrap_or_else(|| self.qp.zero())).collect();
        let tail = if self.tail >= INF
            && other.tail >= INF
            && self.degree_exact() + other.degree_exact() <= trunc
        {
            TAIL_EXACT
        } else {
            bound_add(self.bound(), other.bound())
        };
        Series { qp: self.qp, low, coeffs, tail }
    }

    /// Same series viewed with a different truncation when the tail is exact.
    pub fn padded(&self, trunc: i64) -> Series {
        if trunc <= self.trunc() {
            self.truncate(trunc)
        } else {
            self.extend_to(self.low, trunc, false)
        }
    }

    /// Formal derivative d/dT.
    pub fn derivative(&self) -> Series {
        let coeffs: Vec<Padic> = self.terms().map(|(k, c)| c.mul_int(k)).collect();
        Series { qp: self.qp, low: self.low - 1, coeffs, tail: self.tail }
    }

    /// `Σ a_k` over known coefficients with `k ≤ -1` of `f/(1+T)`, i.e. res_0(f dT/(1+T)).
    pub fn residue0(&self) -> Padic {
        let mut s = self.qp.zero();
        for (k, c) in self.terms() {
            if k >= 0 {
                break;
            }
            let j = -1 - k;
            s = if j % 2 == 0 { s.add_ref(c) } else { s.sub_ref(c) };
        }
        s
    }

    /// True when every coefficient of `self - other` vanishes at its precision.
    pub fn agrees_with(&self, other: &Series) -> bool {
        self.sub(other).coeffs.iter().all(|c| c.is_zero())
    }

    /// Defect summary of `self - other`: (min valuation of nonzero defects, min precision).
    pub fn defect(&self, other: &Series) -> Defect {
        Defect::of(&self.sub(other))
    }

    /// `(v, n)` minimising `v(c_n)/n` over `n ∈ [from, to]` with `c_n ≠ 0` at precision.
    pub fn growth_slope(&self, from: i64, to: i64) -> Option<(i64, i64)> {
        let mut best: Option<(i64, i64)> = None;
        for n in from.max(1)..=to.min(self.trunc()) {
            let c = self.coeff(n);
            if c.is_zero() {
                continue;
            }
            let v = c.valuation();
            best = match best {
                None => Some((v, n)),
                Some((bv, bn)) => {
                    if (v as i128) * (bn as i128) < (bv as i128) * (n as i128) {
                        Some((v, n))
                    } else {
                        Some((bv, bn))
                    }
                }
            };
        }
        best
    }
}

/// Summary of a difference of two series.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Defect {
    /// Smallest valuation among coefficients that are nonzero at precision (None: all vanish).
    pub nonzero_valuation: Option<i64>,
    /// Smallest absolute precision among compared coefficients.
    pub precision: i64,
    pub pass: bool,
}

impl Defect {
    pub fn of(d: &Series) -> Defect {
        let nz = d.coeffs.iter().filter(|c| !c.is_zero()).map(|c| c.valuation()).min();
        Defect { nonzero_valuation: nz, precision: d.precision_min(), pass: nz.is_none() }
    }

    pub fn merge(&self, other: &Defect) -> Defect {
        let nz = match (self.nonzero_valuation, other.nonzero_valuation) {
            (None, x) | (x, None) => x,
            (Some(a), Some(b)) => Some(a.min(b)),
        };
        Defect { nonzero_valuation: nz, precision: self.precision.min(other.precision), pass: self.pass && other.pass }
    }
}

// ---------------------------------------------------------------------------
// Special series and operators
// ---------------------------------------------------------------------------

impl Series {
    /// t = log(1+T) up to `trunc`.
    pub fn log1p_t(qp: Qp, trunc: i64) -> Series {
        let mut c = vec![qp.zero()];
        for n in 1..=trunc {
            let x = qp.one().div_int(n);
            c.push(if n % 2 == 1 { x } else { x.neg_ref() });
        }
        Series::from_coeffs(qp, 0, c, TAIL_UNBOUNDED)
    }

    /// t^k; for k < 0 the formal expansion T^k (T/t)^{-k} at 0.
    pub fn t_pow(qp: Qp, k: i64, trunc: i64) -> Series {
        if k >= 0 {
            let t = Series::log1p_t(qp, trunc);
            let mut out = Series::one(qp, trunc);
            for _ in 0..k {
                out = out.mul(&t);
            }
            return out;
        }
        let j = -k;
        let inv = t_over_t_inverse(qp, trunc + j);
        let mut out = Series::one(qp, trunc + j);
        for _ in 0..j {
            out = out.mul(&inv);
        }
        out.shift(k).with_tail(TAIL_UNBOUNDED)
    }

    /// (1+T)^b = Σ C(b,n) T^n for b ∈ Z_p.
    pub fn one_plus_t_pow(qp: Qp, b: &Padic, trunc: i64) -> Series {
        assert!(b.valuation() >= 0, "exponent must lie in Z_p");
        let mut c = Vec::with_capacity((trunc + 1) as usize);
        let mut cur = qp.one();
        c.push(cur.clone());
        for n in 1..=trunc {
            cur = cur.mul_ref(&b.sub_ref(&qp.int(n - 1))).div_int(n);
            c.push(cur.clone());
        }
        let tail = match b.to_i64_centered() {
            Some(k) if b.precision() >= INF && k >= 0 && k <= trunc => TAIL_EXACT,
            _ => 0,
        };
        Series::from_coeffs(qp, 0, c, tail)
    }

    /// (1+T)^k for a machine integer k ≥ 0, exact.
    pub fn one_plus_t_int(qp: Qp, k: u64, trunc: i64) -> Series {
        let mut c = Vec::with_capacity((trunc + 1) as usize);
        let mut cur = num_bigint::BigInt::from(1);
        for n in 0..=trunc {
            if n as u64 > k {
                c.push(qp.zero());
                continue;
            }
            c.push(qp.bigint(&cur));
            cur = cur * (k - n as u64) / (n as u64 + 1);
        }
        let tail = if (k as i64) <= trunc { TAIL_EXACT } else { 0 };
        Series::from_coeffs(qp, 0, c, tail)
    }

    /// f(g(T)); f a power series, g a power series with v(g(0)) > 0.
    pub fn compose(&self, g: &Series) -> Result<Series> {
        let f = self.trim_principal();
        if !f.is_power_series() {
            return Err(Error::NonComposable("outer series has a principal part".into()));
        }
        let g = g.trim_principal();
        if !g.is_power_series() {
            return Err(Error::NonComposable("inner series has a principal part".into()));
        }
        let g0 = g.coeff(0);
        if !g0.is_zero() && g0.valuation() <= 0 {
            return Err(Error::NonComposable("constant term of valuation 0".into()));
        }
        let f = f.power_part();
        let g = g.power_part();
        let g0_exact = g0.is_exact_zero();
        let trunc = if g0_exact { f.trunc().min(g.trunc()) } else { g.trunc() };
        let mut acc = Series::zero(self.qp, trunc);
        for k in (0..=f.trunc()).rev() {
            acc = acc.mul(&g).add(&Series::constant(self.qp, f.coeff(k), trunc));
            acc = acc.truncate(trunc);
        }
        let gb = g.bound();
        let tail = if f.tail >= INF && g.tail >= INF && (f.degree_exact().max(0) * g.degree_exact().max(0)) <= trunc {
            TAIL_EXACT
        } else if gb >= 0 {
            f.bound()
        } else {
            TAIL_UNBOUNDED
        };
        let mut out = acc.with_tail(tail);
        if !g0_exact && f.tail < INF {
            // unknown f_k (k > trunc_f) reach every degree through g(0)^k
            let cap = bound_add(f.tail, (f.trunc() + 1) * g0.valuation().min(INF / 8));
            out = out.cap_precision(clamp_cap(cap));
        }
        Ok(out)
    }

    /// σ_a f = f((1+T)^a − 1) for a unit a; principal parts expand formally at 0.
    pub fn sigma(&self, a: &Padic) -> Result<Series> {
        if a.valuation() != 0 {
            return Err(Error::Domain("σ_a needs a unit".into()));
        }
        let trunc = self.trunc();
        let f = self.trim_principal();
        let depth = f.principal_len();
        let mut g = Series::one_plus_t_pow(self.qp, a, trunc + depth + 1).with_tail(0);
        g.set_coeff(0, self.qp.zero());
        let pos = f.power_part().compose(&g.truncate(trunc))?;
        if depth == 0 {
            return Ok(pos);
        }
        let ginv = laurent_inverse_of_order_one(&g)?;
        let mut out = pos.truncate(trunc - depth);
        let mut pw = ginv.clone();
        for j in 1..=depth {
            let c = f.coeff(-j);
            if !c.is_exact_zero() {
                out = out.add(&pw.scale(&c));
            }
            pw = pw.mul(&ginv);
        }
        Ok(out.truncate(trunc - depth))
    }

    /// φ f = f((1+T)^p − 1) on power series.
    pub fn phi(&self) -> Result<Series> {
        let f = self.trim_principal();
        if !f.is_power_series() {
            return Err(Error::Domain("φ on the power part only; use phi_boundary".into()));
        }
        let trunc = self.trunc();
        f.power_part().compose(&phi_t(self.qp, trunc))
    }

    /// φ(f) extended to truncation `target`, with precision caps for the
    /// unknown coefficients of f above its truncation.
    pub fn phi_extend(&self, target: i64) -> Result<Series> {
        let f = self.trim_principal();
        if !f.is_power_series() {
            return Err(Error::Domain("φ on the power part only".into()));
        }
        let f = f.power_part();
        let p = self.qp.p as i64;
        let k = f.trunc();
        let poly = f.extend_to(0, target.max(k), true).with_tail(TAIL_EXACT);
        let mut out = poly.truncate(target).compose(&phi_t(self.qp, target))?;
        if f.tail < INF {
            for d in 0..=target {
                let cap = bound_add(f.tail, ceil_div(p * (k + 1) - d, p - 1).max(0));
                let c = out.coeff(d).with_cap(clamp_cap(cap));
                out.set_coeff(d, c);
            }
        }
        let tail = if f.tail >= INF && f.degree_exact().max(0) * p <= target { TAIL_EXACT } else { f.bound() };
        Ok(out.with_tail(tail))
    }

    /// ψ by back-substitution in the basis (1+T)^i φ(T)^k.
    pub fn psi(&self) -> Result<Series> {
        let f = self.trim_principal();
        if !f.is_power_series() {
            return Err(Error::Domain("ψ on the power part only".into()));
        }
        let f = f.power_part();
        let p = self.qp.p as i64;
        let m = f.trunc();
        let basis = psi_basis(self.qp, m);
        let mut r: Vec<Padic> = f.coeffs.clone();
        let kmax = m / p;
        let mut out = vec![self.qp.zero(); (kmax + 1) as usize];
        for d in (0..=m).rev() {
            let c = r[d as usize].clone();
            if c.is_exact_zero() {
                continue;
            }
            let (i, k) = (d % p, d / p);
            if i == 0 {
                out[k as usize] = c.clone();
            }
            for (e, b) in basis[d as usize].iter().enumerate() {
                if e as i64 >= d {
                    break;
                }
                if b.is_exact_zero() {
                    continue;
                }
                r[e] = r[e].sub_ref(&c.mul_ref(b));
            }
            r[d as usize] = self.qp.zero();
        }
        let mut res = Series::from_coeffs(self.qp, 0, out, TAIL_EXACT);
        if f.tail < INF {
            for k in 0..=kmax {
                let cap = bound_add(f.tail, ceil_div(m + 1 - p * k - (p - 1), p - 1));
                let c = res.coeff(k).with_cap(clamp_cap(cap));
                res.set_coeff(k, c);
            }
            res.tail = f.bound();
        }
        Ok(res)
    }

    /// Res_{Z_p^*} f = f − φψ f at the truncation of f.
    pub fn res_units(&self) -> Result<Series> {
        let g = self.psi()?;
        Ok(self.sub(&g.phi_extend(self.trunc())?))
    }

    /// Restriction to i + p^n Z_p: (1+T)^i φ^n ψ^n (1+T)^{-i} f.
    pub fn res_coset(&self, i: i64, n: u32) -> Result<Series> {
        let trunc = self.trunc();
        let qp = self.qp;
        let shift = |e: i64| Series::one_plus_t_pow(qp, &qp.int(e), trunc);
        let mut g = self.mul(&shift(-i));
        for _ in 0..n {
            g = g.psi()?;
        }
        for _ in 0..n {
            let tgt = (g.trunc() * qp.p as i64 + qp.p as i64 - 1).min(trunc);
            g = g.phi_extend(tgt)?;
        }
        let g = g.phi_extend(trunc).unwrap_or(g);
        Ok(g.mul(&shift(i)).truncate(trunc))
    }

    /// ∇f = t(1+T) f'.
    pub fn nabla(&self) -> Series {
        let trunc = self.trunc();
        let low = self.low;
        let mut d = self.clone();
        for (idx, c) in d.coeffs.iter_mut().enumerate() {
            let k = low + idx as i64;
            *c = c.mul_int(k);
        }
        let q = nabla_kernel(self.qp, trunc - low.min(0));
        let mut out = d.with_tail(TAIL_EXACT).mul(&q);
        out = out.truncate(trunc);
        let exact_const = self.terms().all(|(k, c)| k == 0 || c.is_exact_zero()) && self.tail >= INF;
        out.tail = if exact_const { TAIL_EXACT } else { TAIL_UNBOUNDED };
        out
    }

    /// g with t·g = f; one order of truncation is lost.
    pub fn divide_by_t(&self) -> Result<Series> {
        let f = self.trim_principal();
        if f.is_power_series() {
            let c0 = f.coeff(0);
            if !c0.is_zero() {
                return Err(Error::NotDivisibleByT);
            }
        }
        let trunc = f.trunc();
        let mut h = f.clone();
        if h.low <= 0 && f.is_power_series() {
            h.set_coeff(0, self.qp.zero());
        }
        let g = h.shift(-1).trim_principal();
        let inv = t_over_t_inverse(self.qp, trunc - 1 - g.low.min(0));
        let out = g.with_tail(TAIL_EXACT).mul(&inv).truncate(trunc - 1);
        Ok(out.with_tail(TAIL_UNBOUNDED))
    }

    /// Boundary expansion of φ on a Laurent series: negative powers map to
    /// Σ_k C(-j,k) u^k T^{-pj} with u = Σ_{0<i<p} C(p,i) T^{i-p}, truncated at
    /// depth `depth`; coefficients below `-depth` have valuation at least
    /// `ceil((depth + 1 - p j)/(p-1))` and are reported through `lost`.
    pub fn phi_boundary(&self, depth: i64) -> Result<(Series, i64)> {
        let f = self.trim_principal();
        let pos = f.power_part().phi()?;
        let pl = f.principal_len();
        if pl == 0 {
            return Ok((pos, INF));
        }
        let qp = self.qp;
        let p = qp.p as i64;
        let trunc = pos.trunc();
        // X = T^{-1}; u(X) = Σ_{i=1}^{p-1} C(p,i) X^{p-i}
        let mut ucoef = vec![qp.zero(); p as usize];
        let mut binom = num_bigint::BigInt::from(1);
        for i in 0..p {
            if i >= 1 {
                ucoef[(p - i) as usize] = qp.bigint(&binom);
            }
            binom = binom * (p - i) / (i + 1);
        }
        let u = Series::from_coeffs(qp, 0, ucoef, TAIL_EXACT);
        let xdepth = depth.max(p * pl);
        let one_u = Series::one(qp, xdepth).add(&u.padded(xdepth));
        let inv = power_series_inverse(&one_u)?;
        let mut neg = vec![qp.zero(); (depth + 1) as usize];
        let mut lost = INF;
        let mut pw = inv.clone();
        for j in 1..=pl {
            let c = f.coeff(-j);
            if !c.is_exact_zero() {
                for (k, a) in pw.terms() {
                    let e = p * j + k;
                    if e > depth {
                        break;
                    }
                    neg[e as usize] = neg[e as usize].add_ref(&c.mul_ref(a));
                }
                let cut = ceil_div(depth + 1 - p * j, p - 1).max(0);
                lost = lost.min(bound_add(c.valuation(), cut));
            }
            pw = pw.mul(&inv);
        }
        let mut coeffs = Vec::with_capacity((depth + trunc + 1) as usize);
        for e in (1..=depth).rev() {
            coeffs.push(neg[e as usize].clone());
        }
        for k in 0..=trunc {
            coeffs.push(pos.coeff(k));
        }
        Ok((Series::from_coeffs(qp, -depth, coeffs, pos.tail), lost))
    }
}

/// q = (1+T) t / T, the multiplier in ∇T^n = n T^n q.
pub fn nabla_kernel(qp: Qp, len: i64) -> Series {
    NABLA_CACHE.with(|cell| {
        let key = (qp.p, qp.prec, len);
        if let Some(s) = cell.borrow().get(&key) {
            return s.clone();
        }
        let mut c = Vec::with_capacity((len + 1) as usize);
        for n in 0..=len {
            // coefficient of T^n in (1+T) Σ (-1)^m T^m/(m+1)
            let a = qp.one().div_int(n + 1);
            let a = if n % 2 == 0 { a } else { a.neg_ref() };
            let b = if n >= 1 {
                let x = qp.one().div_int(n);
                if (n - 1) % 2 == 0 {
                    x
                } else {
                    x.neg_ref()
                }
            } else {
                qp.zero()
            };
            c.push(a.add_ref(&b));
        }
        let s = Series::from_coeffs(qp, 0, c, TAIL_UNBOUNDED);
        cell.borrow_mut().insert(key, s.clone());
        s
    })
}

/// T/t as a power series.
fn t_over_t_inverse(qp: Qp, len: i64) -> Series {
    let mut c = Vec::with_capacity((len + 1) as usize);
    for n in 0..=len {
        let a = qp.one().div_int(n + 1);
        c.push(if n % 2 == 0 { a } else { a.neg_ref() });
    }
    power_series_inverse(&Series::from_coeffs(qp, 0, c, TAIL_UNBOUNDED)).expect("unit constant term")
}

/// Inverse of a power series with invertible constant term.
pub fn power_series_inverse(f: &Series) -> Result<Series> {
    let qp = f.qp;
    let f = f.power_part();
    let c0inv = f.coeff(0).inv()?;
    let n = f.trunc();
    let mut out: Vec<Padic> = Vec::with_capacity((n + 1) as usize);
    out.push(c0inv.clone());
    for k in 1..=n {
        let mut s = qp.zero();
        for j in 1..=k {
            let a = f.coeff(j);
            if a.is_exact_zero() {
                continue;
            }
            s = s.add_ref(&a.mul_ref(&out[(k - j) as usize]));
        }
        out.push(s.neg_ref().mul_ref(&c0inv));
    }
    let tail = if f.tail >= INF && f.degree_exact() == 0 { TAIL_EXACT } else { TAIL_UNBOUNDED };
    Ok(Series::from_coeffs(qp, 0, out, tail))
}

/// 1/g for g = c T + O(T^2) with c a unit, as a Laurent series at 0.
fn laurent_inverse_of_order_one(g: &Series) -> Result<Series> {
    let g = g.power_part();
    if !g.coeff(0).is_zero() {
        return Err(Error::Domain("expected a series of T-adic order 1".into()));
    }
    let h = Series::from_coeffs(g.qp, 0, g.coeffs[1..].to_vec(), g.tail);
    Ok(power_series_inverse(&h)?.shift(-1))
}

thread_local! {
    static NABLA_CACHE: RefCell<HashMap<(u32, i64, i64), Series>> = RefCell::new(HashMap::new());
    static PSI_CACHE: RefCell<HashMap<(u32, i64, i64), std::rc::Rc<Vec<Vec<Padic>>>>> = RefCell::new(HashMap::new());
}

/// Coefficient lists of (1+T)^i φ(T)^k for d = i + p k = 0..=m.
fn psi_basis(qp: Qp, m: i64) -> std::rc::Rc<Vec<Vec<Padic>>> {
    PSI_CACHE.with(|cell| {
        let key = (qp.p, qp.prec, m);
        if let Some(b) = cell.borrow().get(&key) {
            return b.clone();
        }
        let p = qp.p as i64;
        let phi_t = phi_t(qp, m);
        let one_t = Series::one_plus_t_int(qp, 1, m);
        let mut out = vec![Vec::new(); (m + 1) as usize];
        let mut pk = Series::one(qp, m);
        let mut k = 0;
        while k * p <= m {
            let mut cur = pk.clone();
            for i in 0..p {
                let d = k * p + i;
                if d > m {
                    break;
                }
                out[d as usize] = (0..=d).map(|e| cur.coeff(e)).collect();
                cur = cur.mul(&one_t);
            }
            pk = pk.mul(&phi_t);
            k += 1;
        }
        let rc = std::rc::Rc::new(out);
        cell.borrow_mut().insert(key, rc.clone());
        rc
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q() -> Qp {
        Qp::new(5, 40).unwrap()
    }

    fn poly(k: Qp, c: &[i64], m: i64) -> Series {
        let v: Vec<Padic> = c.iter().map(|&x| k.int(x)).collect();
        Series::from_poly(k, &v, m)
    }

    #[test]
    fn compose_examples() {
        let k = q();
        let t = Series::var(k, 10);
        let f = poly(k, &[1, 2, 0, 3], 10);
        assert!(f.compose(&t).unwrap().agrees_with(&f));
        let g = poly(k, &[0, 1, 1], 10);
        assert!(t.compose(&g).unwrap().agrees_with(&g));
        let sq = poly(k, &[0, 0, 1], 10);
        assert!(sq.compose(&g).unwrap().agrees_with(&poly(k, &[0, 0, 1, 2, 1], 10)));
        assert!(matches!(sq.compose(&poly(k, &[1, 1], 10)), Err(Error::NonComposable(_))));
    }

    #[test]
    fn binomial_powers() {
        let k = q();
        assert!(Series::one_plus_t_pow(k, &k.zero(), 8).agrees_with(&Series::one(k, 8)));
        assert!(Series::one_plus_t_pow(k, &k.one(), 8).agrees_with(&poly(k, &[1, 1], 8)));
        let a = k.rat(3, 7);
        let prod = Series::one_plus_t_pow(k, &a, 20).mul(&Series::one_plus_t_pow(k, &a.neg_ref(), 20));
        assert!(prod.agrees_with(&Series::one(k, 20)));
    }

    #[test]
    fn phi_and_t() {
        let k = q();
        let m = 30;
        let t = Series::log1p_t(k, m);
        assert_eq!(t.coeff(1), k.one());
        assert_eq!(t.coeff(5).valuation(), -1);
        assert!(t.phi().unwrap().agrees_with(&t.scale_int(5)));
        let x = poly(k, &[1, 1], m);
        assert!(x.phi().unwrap().agrees_with(&Series::one_plus_t_int(k, 5, m)));
        let a = k.int(7);
        assert!(t.sigma(&a).unwrap().agrees_with(&t.scale(&a)));
    }

    #[test]
    fn psi_examples() {
        let k = q();
        let m = 40;
        let f = poly(k, &[3, -1, 4, 1, 5, 9, 2, 6], m);
        let back = f.phi_extend(m).unwrap().psi().unwrap();
        assert!(back.agrees_with(&f.truncate(m / 5)));
        let a = k.int(7);
        let d = Series::one_plus_t_pow(k, &a, m).psi().unwrap();
        assert!(d.agrees_with(&Series::zero(k, m / 5)));
        let pa = Series::one_plus_t_pow(k, &k.int(35), m).psi().unwrap();
        assert!(pa.agrees_with(&Series::one_plus_t_pow(k, &a, m / 5)));
    }

    #[test]
    fn nabla_examples() {
        let k = q();
        let m = 30;
        assert!(Series::constant(k, k.int(4), m).nabla().agrees_with(&Series::zero(k, m)));
        let t = Series::log1p_t(k, m);
        let t2 = t.mul(&t);
        assert!(t2.nabla().agrees_with(&t2.scale_int(2)));
    }

    #[test]
    fn divide_by_t_examples() {
        let k = q();
        let m = 30;
        let t = Series::log1p_t(k, m);
        assert!(t.divide_by_t().unwrap().agrees_with(&Series::one(k, m - 1)));
        assert_eq!(Series::one(k, m).divide_by_t().unwrap_err(), Error::NotDivisibleByT);
    }

    #[test]
    fn residues() {
        let k = q();
        assert_eq!(Series::monomial(k, k.one(), -1, 5).residue0(), k.one());
        assert_eq!(Series::one(k, 5).residue0(), k.zero());
        assert_eq!(Series::monomial(k, k.one(), -2, 5).residue0(), k.int(-1));
    }
}

/// φ(T) = (1+T)^p − 1 with an exactly vanishing constant term.
fn phi_t(qp: Qp, trunc: i64) -> Series {
    let mut g = Series::one_plus_t_int(qp, qp.p as u64, trunc);
    g.set_coeff(0, qp.zero());
    g
}
