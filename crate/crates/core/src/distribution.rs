//! Distributions on Z_p.
//!
//! Three views are kept:
//! * [`Distribution`]: the Amice transform as a truncated series;
//! * [`LocalDist`]: at level n, each coset i + p^n Z_p carries the Mahler
//!   coefficients b_{i,k} = ∫ C(y,k) dν_i of the pulled-back piece
//!   (x = i + p^n y), k ≤ M', plus a valuation bound for the unknown b_{i,k};
//! * [`PointMeasure`]: finite combinations of Dirac masses, on which every
//!   operation is exact.
//!
//! w_δ is computed in the local view. Moving a piece along y ↦ F(y) with a
//! weight W replaces ν by the Dirac combination agreeing with it on
//! polynomials of degree ≤ M' and pushes that forward; the neglected part is
//! bounded by the Mahler decay of C(F(y),k)·W(y).

use serde_json::{json, Value};

use crate::characters::Character;
use crate::error::{Error, Result};
use crate::padic::{vp_factorial, Padic, Qp, INF};
use crate::series::Series;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Support {
    Zp,
    Units,
}

/// Distribution through its Amice transform.
#[derive(Clone, Debug)]
pub struct Distribution {
    pub amice: Series,
    pub support: Support,
}

impl Distribution {
    pub fn new(amice: Series) -> Result<Distribution> {
        if !amice.is_power_series() {
            return Err(Error::Domain("Amice transform must be a power series".into()));
        }
        let support = if amice.psi()?.agrees_with(&Series::zero(amice.qp(), 0)) && supports_units(&amice)? {
            Support::Units
        } else {
            Support::Zp
        };
        Ok(Distribution { amice, support })
    }

    /// δ_a ↦ (1+T)^a.
    pub fn dirac(qp: Qp, a: &Padic, trunc: i64) -> Distribution {
        let amice = Series::one_plus_t_pow(qp, a, trunc);
        let support = if a.valuation() == 0 { Support::Units } else { Support::Zp };
        Distribution { amice, support }
    }

    pub fn restrict_units(&self) -> Result<Distribution> {
        Ok(Distribution { amice: self.amice.res_units()?, support: Support::Units })
    }

    pub fn restrict_coset(&self, i: i64, n: u32) -> Result<Distribution> {
        let amice = self.amice.res_coset(i, n)?;
        let support = if i.rem_euclid(self.amice.qp().p as i64) != 0 { Support::Units } else { Support::Zp };
        Ok(Distribution { amice, support })
    }

    /// ∫ P(x) dμ for P given by its monomial coefficients.
    pub fn integrate_poly(&self, poly: &[Padic]) -> Result<Padic> {
        let qp = self.amice.qp();
        let mahler = poly_to_mahler(qp, poly);
        if mahler.len() as i64 - 1 > self.amice.trunc() {
            return Err(Error::InsufficientTruncation(format!(
                "degree {} exceeds truncation {}",
                mahler.len() - 1,
                self.amice.trunc()
            )));
        }
        let mut s = qp.zero();
        for (n, a) in mahler.iter().enumerate() {
            s = s.add_ref(&a.mul_ref(&self.amice.coeff(n as i64)));
        }
        Ok(s)
    }

    pub fn to_local(&self, level: u32, moments: usize) -> Result<LocalDist> {
        LocalDist::from_amice(&self.amice, level, moments)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "amice": crate::io::series_to_json(&self.amice),
            "support": match self.support { Support::Zp => "Zp", Support::Units => "Zp*" },
        })
    }
}

fn supports_units(f: &Series) -> Result<bool> {
    Ok(f.res_units()?.agrees_with(f))
}

/// Mahler coefficients Δ^j P(0) of a polynomial.
pub fn poly_to_mahler(qp: Qp, poly: &[Padic]) -> Vec<Padic> {
    let d = poly.len();
    let vals: Vec<Padic> = (0..d)
        .map(|l| {
            let x = qp.int(l as i64);
            let mut s = qp.zero();
            for c in poly.iter().rev() {
                s = s.mul_ref(&x).add_ref(c);
            }
            s
        })
        .collect();
    forward_differences(qp, &vals)
}

/// a_j = Σ_l (−1)^{j−l} C(j,l) v_l.
fn forward_differences(qp: Qp, vals: &[Padic]) -> Vec<Padic> {
    let mut out = Vec::with_capacity(vals.len());
    let mut row = vals.to_vec();
    for _ in 0..vals.len() {
        out.push(row[0].clone());
        row = row.windows(2).map(|w| w[1].sub_ref(&w[0])).collect();
        if row.is_empty() {
            break;
        }
    }
    while out.len() < vals.len() {
        out.push(qp.zero());
    }
    out
}

/// c_l = Σ_{j≥l} (−1)^{j−l} C(j,l) b_j: Dirac weights at 0..=M' matching b.
fn dirac_weights(qp: Qp, b: &[Padic]) -> Vec<Padic> {
    let m = b.len();
    let mut c = vec![qp.zero(); m];
    for (l, cl) in c.iter_mut().enumerate() {
        let mut binom = num_bigint::BigInt::from(1);
        for j in l..m {
            if j > l {
                binom = binom * j / (j - l);
            }
            let term = b[j].mul_ref(&qp.bigint(&binom));
            *cl = if (j - l) % 2 == 0 { cl.add_ref(&term) } else { cl.sub_ref(&term) };
        }
    }
    c
}

/// Local coset model at level n.
#[derive(Clone, Debug)]
pub struct LocalDist {
    qp: Qp,
    level: u32,
    pieces: Vec<Vec<Padic>>,
    tail: i64,
}

impl LocalDist {
    pub fn zero(qp: Qp, level: u32, moments: usize) -> LocalDist {
        let pn = qp.p.pow(level) as usize;
        LocalDist { qp, level, pieces: vec![vec![qp.zero(); moments + 1]; pn], tail: INF }
    }

    pub fn qp(&self) -> Qp {
        self.qp
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn moments(&self) -> usize {
        self.pieces[0].len() - 1
    }

    pub fn tail(&self) -> i64 {
        self.tail
    }

    pub fn modulus(&self) -> i64 {
        (self.qp.p as i64).pow(self.level)
    }

    pub fn piece(&self, i: i64) -> &[Padic] {
        &self.pieces[i.rem_euclid(self.modulus()) as usize]
    }

    pub fn from_pieces(qp: Qp, level: u32, pieces: Vec<Vec<Padic>>, tail: i64) -> Result<LocalDist> {
        let pn = qp.p.pow(level) as usize;
        if pieces.len() != pn || pieces.iter().any(|v| v.len() != pieces[0].len()) {
            return Err(Error::InvalidParameter("piece table shape".into()));
        }
        Ok(LocalDist { qp, level, pieces, tail })
    }

    /// δ_a at level n with M' known Mahler coefficients.
    pub fn dirac(qp: Qp, a: &Padic, level: u32, moments: usize) -> LocalDist {
        let mut out = LocalDist::zero(qp, level, moments);
        let pn = out.modulus();
        let i = a.residue_mod(level as i64);
        let i = i64::try_from(i).expect("small residue");
        let y = a.sub_ref(&qp.int(i)).checked_div(&qp.p_pow(level as i64)).expect("unit divisor");
        let mut c = qp.one();
        for k in 0..=moments {
            out.pieces[i as usize][k] = c.clone();
            c = c.mul_ref(&y.sub_ref(&qp.int(k as i64))).div_int(k as i64 + 1);
        }
        out.tail = 0;
        debug_assert!(i < pn);
        out
    }

    pub fn from_points(pm: &PointMeasure, level: u32, moments: usize) -> LocalDist {
        let mut out = LocalDist::zero(pm.qp, level, moments);
        for (c, a) in &pm.atoms {
            let d = LocalDist::dirac(pm.qp, a, level, moments).scale(c);
            out = out.add(&d);
        }
        out
    }

    /// Pieces ν_i with Amice transform ψ^n((1+T)^{-i} f).
    pub fn from_amice(f: &Series, level: u32, moments: usize) -> Result<LocalDist> {
        let qp = f.qp();
        let pn = (qp.p as i64).pow(level);
        let avail = f.trunc() / pn;
        if moments as i64 > avail {
            return Err(Error::InsufficientTruncation(format!(
                "M' = {moments} needs truncation ≥ {} at level {level}",
                (moments as i64 + 1) * pn - 1
            )));
        }
        let mut pieces = Vec::with_capacity(pn as usize);
        let mut tail = INF;
        for i in 0..pn {
            let mut g = f.mul(&Series::one_plus_t_pow(qp, &qp.int(-i), f.trunc()));
            for _ in 0..level {
                g = g.psi()?;
            }
            tail = tail.min(g.bound());
            pieces.push((0..=moments as i64).map(|k| g.coeff(k)).collect());
        }
        Ok(LocalDist { qp, level, pieces, tail })
    }

    /// Σ_i (1+T)^i φ^n(A_i) up to `trunc`.
    pub fn amice(&self, trunc: i64) -> Result<Series> {
        let qp = self.qp;
        let mut out = Series::zero(qp, trunc);
        for (i, b) in self.pieces.iter().enumerate() {
            if b.iter().all(|c| c.is_exact_zero()) {
                continue;
            }
            let mut a = Series::from_coeffs(qp, 0, b.clone(), self.tail);
            for _ in 0..self.level {
                a = a.phi_extend(trunc)?;
            }
            out = out.add(&a.mul(&Series::one_plus_t_pow(qp, &qp.int(i as i64), trunc)));
        }
        Ok(out)
    }

    pub fn add(&self, other: &LocalDist) -> LocalDist {
        assert_eq!((self.level, self.moments()), (other.level, other.moments()), "incompatible levels");
        let pieces = self
            .pieces
            .iter()
            .zip(&other.pieces)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x.add_ref(y)).collect())
            .collect();
        LocalDist { qp: self.qp, level: self.level, pieces, tail: self.tail.min(other.tail) }
    }

    pub fn sub(&self, other: &LocalDist) -> LocalDist {
        self.add(&other.scale(&self.qp.int(-1)))
    }

    pub fn scale(&self, c: &Padic) -> LocalDist {
        let pieces = self.pieces.iter().map(|v| v.iter().map(|x| x.mul_ref(c)).collect()).collect();
        let tail = if self.tail >= INF || c.is_exact_zero() { INF } else { self.tail + c.valuation() };
        LocalDist { qp: self.qp, level: self.level, pieces, tail }
    }

    /// Restriction to Z_p^*.
    pub fn restrict_units(&self) -> LocalDist {
        let mut out = self.clone();
        let p = self.qp.p as usize;
        for (i, v) in out.pieces.iter_mut().enumerate() {
            if i % p == 0 {
                v.iter_mut().for_each(|x| *x = self.qp.zero());
            }
        }
        out
    }

    /// Restriction to i + p^m Z_p, m ≤ n.
    pub fn restrict_coset(&self, i: i64, m: u32) -> Result<LocalDist> {
        if m > self.level {
            return Err(Error::InsufficientTruncation(format!("coset level {m} above model level {}", self.level)));
        }
        let pm = (self.qp.p as i64).pow(m);
        let mut out = self.clone();
        for (j, v) in out.pieces.iter_mut().enumerate() {
            if (j as i64 - i).rem_euclid(pm) != 0 {
                v.iter_mut().for_each(|x| *x = self.qp.zero());
            }
        }
        Ok(out)
    }

    pub fn is_unit_supported(&self) -> bool {
        let p = self.qp.p as usize;
        self.pieces.iter().enumerate().all(|(i, v)| i % p != 0 || v.iter().all(|x| x.is_zero()))
    }

    /// Moment table ∫ (x − i)^m dμ|_{i+p^n Z_p}, m ≤ M'.
    pub fn coset_moments(&self) -> Vec<Vec<Padic>> {
        let qp = self.qp;
        let mm = self.moments();
        let st = stirling2_factorial(qp, mm);
        self.pieces
            .iter()
            .map(|b| {
                (0..=mm)
                    .map(|m| {
                        let mut s = qp.zero();
                        for j in 0..=m {
                            s = s.add_ref(&st[m][j].mul_ref(&b[j]));
                        }
                        s.mul_ref(&qp.p_pow(self.level as i64 * m as i64))
                    })
                    .collect()
            })
            .collect()
    }

    pub fn from_coset_moments(qp: Qp, level: u32, table: &[Vec<Padic>], tail: i64) -> Result<LocalDist> {
        let pn = qp.p.pow(level) as usize;
        if table.len() != pn {
            return Err(Error::InvalidParameter(format!("expected {pn} cosets, got {}", table.len())));
        }
        let mm = table[0].len() - 1;
        let s1 = stirling1_over_factorial(qp, mm);
        let pieces = table
            .iter()
            .map(|mu| {
                let ym: Vec<Padic> = mu
                    .iter()
                    .enumerate()
                    .map(|(m, x)| x.checked_div(&qp.p_pow(level as i64 * m as i64)).expect("unit divisor"))
                    .collect();
                (0..=mm)
                    .map(|j| {
                        let mut s = qp.zero();
                        for m in 0..=j {
                            s = s.add_ref(&s1[j][m].mul_ref(&ym[m]));
                        }
                        s
                    })
                    .collect()
            })
            .collect();
        LocalDist::from_pieces(qp, level, pieces, tail)
    }

    /// ∫ P(x) dμ, deg P ≤ M'.
    pub fn integrate_poly(&self, poly: &[Padic]) -> Result<Padic> {
        let qp = self.qp;
        if poly.len() > self.moments() + 1 {
            return Err(Error::InsufficientTruncation(format!(
                "degree {} exceeds M' = {}",
                poly.len() - 1,
                self.moments()
            )));
        }
        let pn = qp.p_pow(self.level as i64);
        let mut total = qp.zero();
        for (i, b) in self.pieces.iter().enumerate() {
            if b.iter().all(|c| c.is_exact_zero()) {
                continue;
            }
            // P(i + p^n y) in y
            let shifted = taylor_shift(qp, poly, &qp.int(i as i64), &pn);
            let mahler = poly_to_mahler(qp, &shifted);
            for (j, a) in mahler.iter().enumerate() {
                total = total.add_ref(&a.mul_ref(&b[j]));
            }
        }
        Ok(total)
    }

    /// Move piece `i` to piece `target` along y ↦ f(y), with weight w(y).
    /// `affine` marks maps for which C(f(y),k)·w(y) is a polynomial of degree ≤ k.
    fn push_piece(
        &self,
        b: &[Padic],
        f: impl Fn(i64) -> Padic,
        w: impl Fn(i64) -> Padic,
        affine: bool,
    ) -> Vec<Padic> {
        let qp = self.qp;
        let mm = b.len() - 1;
        let c = dirac_weights(qp, b);
        let mut out = vec![qp.zero(); mm + 1];
        for (l, cl) in c.iter().enumerate() {
            if cl.is_exact_zero() {
                continue;
            }
            let y = f(l as i64);
            let mut term = cl.mul_ref(&w(l as i64));
            for (k, o) in out.iter_mut().enumerate() {
                *o = o.add_ref(&term);
                term = term.mul_ref(&y.sub_ref(&qp.int(k as i64))).div_int(k as i64 + 1);
            }
        }
        if !affine && self.tail < INF {
            let n = self.level as i64;
            let vtop = vp_factorial(qp.p, mm as u64 + 1);
            for (k, o) in out.iter_mut().enumerate() {
                let cap = self.tail + n * (mm as i64 + 1 - k as i64) + vtop - vp_factorial(qp.p, k as u64);
                *o = o.with_cap(cap);
            }
        }
        out
    }

    /// Pushforward along x ↦ a x for a unit a.
    pub fn sigma(&self, a: &Padic) -> Result<LocalDist> {
        if a.valuation() != 0 {
            return Err(Error::Domain("σ_a needs a unit".into()));
        }
        let qp = self.qp;
        let pn = self.modulus();
        let ppow = qp.p_pow(self.level as i64);
        let mut out = LocalDist::zero(qp, self.level, self.moments());
        out.tail = self.tail;
        for (i, b) in self.pieces.iter().enumerate() {
            if b.iter().all(|c| c.is_exact_zero()) {
                continue;
            }
            let x0 = a.mul_int(i as i64);
            let j = i64::try_from(x0.residue_mod(self.level as i64)).expect("small residue");
            let shift = x0.sub_ref(&qp.int(j)).checked_div(&ppow)?;
            let moved = self.push_piece(b, |l| a.mul_int(l).add_ref(&shift), |_| qp.one(), true);
            let tgt = &mut out.pieces[j.rem_euclid(pn) as usize];
            for (t, m) in tgt.iter_mut().zip(moved) {
                *t = t.add_ref(&m);
            }
        }
        Ok(out)
    }

    /// w_δ: ∫ P d(w_δ μ) = ∫ δ(x) P(1/x) dμ on Z_p^*.
    pub fn w_delta(&self, delta: &Character) -> Result<LocalDist> {
        if self.level == 0 {
            return Err(Error::InvalidParameter("w_δ needs level n ≥ 1".into()));
        }
        if !self.is_unit_supported() {
            return Err(Error::Domain("w_δ needs support in Z_p^*".into()));
        }
        let qp = self.qp;
        let pn = self.modulus();
        let ppow = qp.p_pow(self.level as i64);
        let mut out = LocalDist::zero(qp, self.level, self.moments());
        out.tail = self.tail.min(self.pieces.iter().flatten().map(|c| c.valuation()).min().unwrap_or(INF));
        let p = qp.p as i64;
        for i in 0..pn {
            if i % p == 0 {
                continue;
            }
            let b = &self.pieces[i as usize];
            if b.iter().all(|c| c.is_exact_zero()) {
                continue;
            }
            let ip = inverse_mod(i, pn);
            let x = |l: i64| qp.int(i + pn * l);
            let moved = self.push_piece(
                b,
                |l| x(l).inv().expect("unit").sub_ref(&qp.int(ip)).checked_div(&ppow).expect("unit divisor"),
                |l| delta.eval(&x(l)).expect("unit argument"),
                false,
            );
            let tgt = &mut out.pieces[ip as usize];
            for (t, m) in tgt.iter_mut().zip(moved) {
                *t = t.add_ref(&m);
            }
        }
        Ok(out)
    }

    /// Defect of `self − other` on every known coefficient.
    pub fn defect(&self, other: &LocalDist) -> crate::series::Defect {
        let d = self.sub(other);
        let all: Vec<Padic> = d.pieces.into_iter().flatten().collect();
        let nz = all.iter().filter(|c| !c.is_zero()).map(|c| c.valuation()).min();
        crate::series::Defect {
            nonzero_valuation: nz,
            precision: all.iter().map(|c| c.precision()).min().unwrap_or(INF),
            pass: nz.is_none(),
        }
    }

    pub fn agrees_with(&self, other: &LocalDist) -> bool {
        self.defect(other).pass
    }

    pub fn to_json(&self) -> Value {
        json!({
            "level": self.level,
            "moments": self.moments(),
            "tail": if self.tail >= INF { Value::from("inf") } else { Value::from(self.tail) },
            "pieces": self.pieces.iter().map(|v| v.iter().map(|c| c.to_literal()).collect::<Vec<_>>()).collect::<Vec<_>>(),
        })
    }
}

/// ∫ P d(w_δ μ) − ∫ δ(x) P(1/x) dμ, the right side by Taylor expansion in y
/// on each coset (independent of the Mahler-interpolation path). Returns
/// (left, right).
pub fn duality_sides(mu: &LocalDist, delta: &Character, poly: &[Padic]) -> Result<(Padic, Padic)> {
    let qp = mu.qp;
    let left = mu.w_delta(delta)?.integrate_poly(poly)?;
    let pn = mu.modulus();
    let n = mu.level as i64;
    let mm = mu.moments();
    let p = qp.p as i64;
    // Taylor depth: terms beyond carry p^{n·depth}
    let depth = ((qp.prec + 2 * n) / n.max(1)).max(mm as i64 + 1) as usize;
    let mut right = qp.zero();
    for i in 0..pn {
        if i % p == 0 {
            continue;
        }
        let b = mu.piece(i);
        if b.iter().all(|c| c.is_exact_zero()) {
            continue;
        }
        let ii = qp.int(i);
        let iinv = ii.inv()?;
        let h = qp.p_pow(n).mul_ref(&iinv); // x = i(1 + h y)
        // 1/x = i^{-1} Σ (−h y)^m
        let mut recip = Vec::with_capacity(depth + 1);
        let mut c = iinv.clone();
        for _ in 0..=depth {
            recip.push(c.clone());
            c = c.mul_ref(&h).neg_ref();
        }
        // P(1/x) truncated at y^depth
        let mut pv = vec![qp.zero(); depth + 1];
        for coef in poly.iter().rev() {
            pv = poly_mul_trunc(qp, &pv, &recip, depth);
            pv[0] = pv[0].add_ref(coef);
        }
        // δ(x) = δ(i) (1 + h y)^k
        let di = delta.eval(&ii)?;
        let mut wv = Vec::with_capacity(depth + 1);
        let kk = qp.int(delta.k);
        let mut c = di;
        for m in 0..=depth {
            wv.push(c.clone());
            c = c.mul_ref(&kk.sub_ref(&qp.int(m as i64))).div_int(m as i64 + 1).mul_ref(&h);
        }
        let g = poly_mul_trunc(qp, &pv, &wv, depth);
        let mahler = poly_to_mahler_long(qp, &g, mm);
        for (j, a) in mahler.iter().enumerate() {
            right = right.add_ref(&a.mul_ref(&b[j]));
        }
    }
    Ok((left, right))
}

fn poly_mul_trunc(qp: Qp, a: &[Padic], b: &[Padic], deg: usize) -> Vec<Padic> {
    let mut out = vec![qp.zero(); deg + 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_exact_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            if i + j > deg {
                break;
            }
            out[i + j] = out[i + j].add_ref(&x.mul_ref(y));
        }
    }
    out
}

/// Mahler coefficients j ≤ mm of a long polynomial, y^m = Σ_j S(m,j) j! C(y,j).
fn poly_to_mahler_long(qp: Qp, poly: &[Padic], mm: usize) -> Vec<Padic> {
    let st = stirling2_factorial(qp, poly.len().max(1) - 1);
    (0..=mm)
        .map(|j| {
            let mut s = qp.zero();
            for (m, c) in poly.iter().enumerate().skip(j) {
                s = s.add_ref(&c.mul_ref(&st[m][j]));
            }
            s
        })
        .collect()
}

/// P(c + h y) as a polynomial in y.
fn taylor_shift(qp: Qp, poly: &[Padic], c: &Padic, h: &Padic) -> Vec<Padic> {
    let lin = [c.clone(), h.clone()];
    let mut out = vec![qp.zero()];
    for coef in poly.iter().rev() {
        let mut next = vec![qp.zero(); out.len() + 1];
        for (i, x) in out.iter().enumerate() {
            next[i] = next[i].add_ref(&x.mul_ref(&lin[0]));
            next[i + 1] = next[i + 1].add_ref(&x.mul_ref(&lin[1]));
        }
        next[0] = next[0].add_ref(coef);
        out = next;
    }
    out.truncate(poly.len().max(1));
    out
}

/// S(m,j)·j! for m, j ≤ n.
fn stirling2_factorial(qp: Qp, n: usize) -> Vec<Vec<Padic>> {
    use num_bigint::BigInt;
    let mut s = vec![vec![BigInt::from(0); n + 1]; n + 1];
    s[0][0] = BigInt::from(1);
    for m in 1..=n {
        for j in 1..=m {
            s[m][j] = BigInt::from(j) * &s[m - 1][j] + &s[m - 1][j - 1];
        }
    }
    let mut out = vec![vec![qp.zero(); n + 1]; n + 1];
    for m in 0..=n {
        let mut fact = BigInt::from(1);
        for j in 0..=m {
            if j > 0 {
                fact *= j;
            }
            out[m][j] = qp.bigint(&(&s[m][j] * &fact));
        }
    }
    out
}

/// s(j,m)/j! (signed Stirling numbers of the first kind): C(y,j) = Σ_m s(j,m)/j! y^m.
fn stirling1_over_factorial(qp: Qp, n: usize) -> Vec<Vec<Padic>> {
    use num_bigint::BigInt;
    let mut s = vec![vec![BigInt::from(0); n + 1]; n + 1];
    s[0][0] = BigInt::from(1);
    for j in 1..=n {
        for m in 1..=j {
            s[j][m] = &s[j - 1][m - 1] - BigInt::from(j - 1) * &s[j - 1][m];
        }
    }
    let mut out = vec![vec![qp.zero(); n + 1]; n + 1];
    let mut fact = BigInt::from(1);
    for j in 0..=n {
        if j > 0 {
            fact *= j;
        }
        for m in 0..=j {
            out[j][m] = qp.bigint(&s[j][m]).div_exact(&qp.bigint(&fact));
        }
    }
    out
}

pub fn inverse_mod(i: i64, m: i64) -> i64 {
    let (mut a, mut b, mut x0, mut x1) = (i.rem_euclid(m), m, 1i64, 0i64);
    while b != 0 {
        let q = a / b;
        (a, b) = (b, a - q * b);
        (x0, x1) = (x1, x0 - q * x1);
    }
    assert_eq!(a, 1, "{i} not invertible mod {m}");
    x0.rem_euclid(m)
}

/// Finite combination Σ c_j δ_{a_j} of Dirac masses on Z_p.
#[derive(Clone, Debug)]
pub struct PointMeasure {
    pub qp: Qp,
    pub atoms: Vec<(Padic, Padic)>,
}

impl PointMeasure {
    pub fn dirac(qp: Qp, a: Padic) -> PointMeasure {
        PointMeasure { qp, atoms: vec![(qp.one(), a)] }
    }

    pub fn amice(&self, trunc: i64) -> Series {
        let mut out = Series::zero(self.qp, trunc);
        for (c, a) in &self.atoms {
            out = out.add(&Series::one_plus_t_pow(self.qp, a, trunc).scale(c));
        }
        out
    }

    pub fn w_delta(&self, delta: &Character) -> Result<PointMeasure> {
        let mut atoms = Vec::with_capacity(self.atoms.len());
        for (c, a) in &self.atoms {
            if a.valuation() != 0 {
                return Err(Error::Domain("w_δ needs support in Z_p^*".into()));
            }
            atoms.push((c.mul_ref(&delta.eval(a)?), a.inv()?));
        }
        Ok(PointMeasure { qp: self.qp, atoms })
    }

    /// Level-n partial sum Σ_i δ(i^{-1}) (1+T)^i σ_{−i²} φ^nψ^n((1+T)^{−i^{-1}} f),
    /// i over 0 < i < p^n prime to p, evaluated atom by atom.
    pub fn limit_approx(&self, delta: &Character, level: u32) -> Result<PointMeasure> {
        let qp = self.qp;
        let pn = (qp.p as i64).pow(level);
        let mut atoms = Vec::new();
        for (c, a) in &self.atoms {
            if a.valuation() != 0 {
                return Err(Error::Domain("limit formula needs support in Z_p^*".into()));
            }
            for i in 1..pn {
                if i % qp.p as i64 == 0 {
                    continue;
                }
                let iinv = qp.int(i).inv()?;
                if a.sub_ref(&iinv).valuation() < level as i64 {
                    continue;
                }
                let point = qp.int(2 * i).sub_ref(&qp.int(i * i).mul_ref(a));
                atoms.push((c.mul_ref(&delta.eval(&iinv)?), point));
            }
        }
        Ok(PointMeasure { qp, atoms })
    }
}

/// Level-n partial sum of the limit formula on a truncated series; the
/// truncation shrinks by p^n through ψ^n.
pub fn w_delta_limit_approx(f: &Series, delta: &Character, level: u32) -> Result<Series> {
    let qp = f.qp();
    let m = f.trunc();
    let pn = (qp.p as i64).pow(level);
    let mut out = Series::zero(qp, m);
    for i in 1..pn {
        if i % qp.p as i64 == 0 {
            continue;
        }
        let iinv = qp.int(i).inv()?;
        let mut g = f.mul(&Series::one_plus_t_pow(qp, &iinv.neg_ref(), m));
        for _ in 0..level {
            g = g.psi()?;
        }
        for _ in 0..level {
            g = g.phi_extend(m)?;
        }
        let g = g.sigma(&qp.int(-i * i))?;
        let term = g.mul(&Series::one_plus_t_pow(qp, &qp.int(i), m)).scale(&delta.eval(&iinv)?);
        out = out.add(&term);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q() -> Qp {
        Qp::new(5, 40).unwrap()
    }

    fn chars(k: Qp) -> Vec<Character> {
        vec![
            Character::trivial(k),
            Character::chi(k),
            Character::new(k, -3, 0, k.p_pow(-2)).unwrap(),
            Character::new(k, 2, 1, k.int(3)).unwrap(),
            Character::new(k, 1, 3, k.p_pow(1)).unwrap(),
        ]
    }

    #[test]
    fn amice_examples() {
        let k = q();
        let d0 = Distribution::dirac(k, &k.zero(), 20);
        assert!(d0.amice.agrees_with(&Series::one(k, 20)));
        assert!(d0.restrict_units().unwrap().amice.agrees_with(&Series::zero(k, 20)));
        let a = k.int(7);
        let da = Distribution::dirac(k, &a, 40);
        assert_eq!(da.support, Support::Units);
        assert!(da.restrict_units().unwrap().amice.agrees_with(&da.amice));
        let x2 = [k.zero(), k.zero(), k.one()];
        assert_eq!(da.integrate_poly(&x2).unwrap(), k.int(49));
    }

    #[test]
    fn partition_of_unity() {
        let k = q();
        let f = Series::from_poly(k, &[k.int(3), k.int(-2), k.int(7), k.int(1)], 30);
        let mut s = Series::zero(k, 30);
        for i in 0..5 {
            s = s.add(&f.res_coset(i, 1).unwrap());
        }
        assert!(s.agrees_with(&f));
    }

    #[test]
    fn moments_roundtrip() {
        let k = q();
        let mu = LocalDist::dirac(k, &k.rat(3, 7), 2, 16).add(&LocalDist::dirac(k, &k.int(11), 2, 16));
        let table = mu.coset_moments();
        let back = LocalDist::from_coset_moments(k, 2, &table, mu.tail()).unwrap();
        assert!(back.agrees_with(&mu));
        let a = k.int(11);
        let row = &table[11];
        assert_eq!(row[2], a.sub_ref(&k.int(11)).pow(2).unwrap());
    }

    #[test]
    fn w_delta_dirac_and_involution() {
        let k = q();
        let a = k.rat(2, 3);
        for d in chars(k) {
            let mu = LocalDist::dirac(k, &a, 2, 16);
            let w = mu.w_delta(&d).unwrap();
            let expect = LocalDist::dirac(k, &a.inv().unwrap(), 2, 16).scale(&d.eval(&a).unwrap());
            assert!(w.agrees_with(&expect), "{:?}", w.defect(&expect));
            assert!(w.w_delta(&d).unwrap().agrees_with(&mu));
        }
    }

    #[test]
    fn duality_against_taylor() {
        let k = q();
        let mu = LocalDist::dirac(k, &k.rat(2, 3), 2, 8).add(&LocalDist::dirac(k, &k.int(6), 2, 8).scale(&k.int(5)));
        let d = Character::new(k, 2, 1, k.int(3)).unwrap();
        let poly = [k.int(1), k.int(-2), k.int(0), k.int(4)];
        let (l, r) = duality_sides(&mu, &d, &poly).unwrap();
        assert!(l.sub_ref(&r).is_zero(), "{} vs {}", l.to_literal(), r.to_literal());
    }

    #[test]
    fn limit_formula_on_points() {
        let k = q();
        let d = Character::chi(k);
        let mu = PointMeasure::dirac(k, k.rat(2, 3));
        let exact = mu.w_delta(&d).unwrap().amice(20);
        let mut last = i64::MIN;
        for n in 1..=3 {
            let approx = mu.limit_approx(&d, n).unwrap().amice(20);
            let v = approx.sub(&exact).valuation_min();
            assert!(v >= last);
            last = v;
        }
    }
}
