//! Exact linear algebra over Q_p at tracked precision: parametric solves of
//! lower-triangular systems, nullspaces and coordinate solves.

use crate::error::{Error, Result};
use crate::padic::{Padic, Qp};

/// Square system whose row r involves only unknowns ≤ r.
#[derive(Clone, Debug)]
pub struct LowerSystem {
    qp: Qp,
    rows: Vec<Vec<(usize, Padic)>>,
}

/// Every unknown as a linear form in the free parameters, plus the linear
/// constraints the parameters must satisfy.
#[derive(Clone, Debug)]
pub struct ParamSolution {
    pub values: Vec<Vec<Padic>>,
    /// Unknown index that introduced each parameter.
    pub params: Vec<usize>,
    pub constraints: Vec<Constraint>,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    /// Row (= unknown index) where the zero pivot occurred.
    pub row: usize,
    pub form: Vec<Padic>,
}

impl LowerSystem {
    pub fn new(qp: Qp, n: usize) -> LowerSystem {
        LowerSystem { qp, rows: vec![Vec::new(); n] }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Set the entry at (row, col), col ≤ row.
    pub fn push(&mut self, row: usize, col: usize, v: Padic) {
        assert!(col <= row, "entry above the diagonal");
        if !v.is_exact_zero() {
            self.rows[row].push((col, v));
        }
    }

    pub fn solve(&self) -> ParamSolution {
        let qp = self.qp;
        let n = self.rows.len();
        let mut values: Vec<Vec<Padic>> = Vec::with_capacity(n);
        let mut params = Vec::new();
        let mut constraints = Vec::new();
        for r in 0..n {
            let mut sum: Vec<Padic> = vec![qp.zero(); params.len()];
            let mut diag = qp.zero();
            for (c, v) in &self.rows[r] {
                if *c == r {
                    diag = diag.add_ref(v);
                    continue;
                }
                for (k, x) in values[*c].iter().enumerate() {
                    if !x.is_exact_zero() {
                        sum[k] = sum[k].add_ref(&v.mul_ref(x));
                    }
                }
            }
            if !diag.is_zero() {
                let inv = diag.inv().expect("nonzero pivot");
                values.push(sum.iter().map(|x| x.mul_ref(&inv).neg_ref()).collect());
            } else {
                if sum.iter().any(|x| !x.is_exact_zero()) {
                    constraints.push(Constraint { row: r, form: sum });
                }
                params.push(r);
                let mut e = vec![qp.zero(); params.len()];
                e[params.len() - 1] = qp.one();
                values.push(e);
            }
        }
        let k = params.len();
        for v in values.iter_mut() {
            v.resize(k, qp.zero());
        }
        for c in constraints.iter_mut() {
            c.form.resize(k, qp.zero());
        }
        ParamSolution { values, params, constraints }
    }
}

impl ParamSolution {
    /// Kernel vectors: one per basis vector of the constraint nullspace.
    pub fn kernel(&self, qp: Qp) -> Vec<Vec<Padic>> {
        let forms: Vec<Vec<Padic>> = self.constraints.iter().map(|c| c.form.clone()).collect();
        let null = nullspace(qp, &forms, self.params.len());
        null.iter()
            .map(|nu| {
                self.values
                    .iter()
                    .map(|form| {
                        let mut s = qp.zero();
                        for (a, b) in form.iter().zip(nu) {
                            if !a.is_exact_zero() && !b.is_exact_zero() {
                                s = s.add_ref(&a.mul_ref(b));
                            }
                        }
                        s
                    })
                    .collect()
            })
            .collect()
    }
}

/// Row reduction with minimal-valuation pivots. Returns (reduced rows, pivot columns).
pub fn row_reduce(qp: Qp, rows: &[Vec<Padic>], k: usize) -> (Vec<Vec<Padic>>, Vec<usize>) {
    let mut m: Vec<Vec<Padic>> = rows.to_vec();
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..k {
        let mut best: Option<(usize, i64)> = None;
        for (i, row) in m.iter().enumerate().skip(r) {
            if !row[col].is_zero() {
                let v = row[col].valuation();
                if best.is_none_or(|(_, bv)| v < bv) {
                    best = Some((i, v));
                }
            }
        }
        let Some((i, _)) = best else { continue };
        m.swap(r, i);
        let inv = m[r][col].inv().expect("nonzero pivot");
        let pr: Vec<Padic> = m[r].iter().map(|x| x.mul_ref(&inv)).collect();
        m[r] = pr.clone();
        for (j, row) in m.iter_mut().enumerate() {
            if j == r || row[col].is_exact_zero() {
                continue;
            }
            let f = row[col].clone();
            for c in 0..k {
                if !pr[c].is_exact_zero() {
                    row[c] = row[c].sub_ref(&f.mul_ref(&pr[c]));
                }
            }
            row[col] = qp.zero();
        }
        pivots.push(col);
        r += 1;
        if r == m.len() {
            break;
        }
    }
    m.truncate(r);
    (m, pivots)
}

/// Basis of {x ∈ Q_p^k : rows · x = 0}.
pub fn nullspace(qp: Qp, rows: &[Vec<Padic>], k: usize) -> Vec<Vec<Padic>> {
    let (red, pivots) = row_reduce(qp, rows, k);
    let free: Vec<usize> = (0..k).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut x = vec![qp.zero(); k];
            x[f] = qp.one();
            for (row, &pc) in red.iter().zip(&pivots) {
                x[pc] = row[f].neg_ref();
            }
            x
        })
        .collect()
}

/// Solve a square system by elimination with minimal-valuation pivots.
pub fn solve_square(qp: Qp, a: &[Vec<Padic>], b: &[Padic]) -> Result<Vec<Padic>> {
    let n = b.len();
    let rows: Vec<Vec<Padic>> = a
        .iter()
        .zip(b)
        .map(|(r, y)| {
            let mut v = r.clone();
            v.push(y.clone());
            v
        })
        .collect();
    let (red, pivots) = row_reduce(qp, &rows, n);
    if pivots.len() < n {
        return Err(Error::PrecisionZeroDivisor);
    }
    Ok(red.iter().map(|r| r[n].clone()).collect())
}

/// Coordinates chosen so that `basis` restricted to them is invertible;
/// candidates limited to `allowed` coordinates.
pub fn pivot_coordinates(qp: Qp, basis: &[Vec<Padic>], allowed: &[usize]) -> Result<Vec<usize>> {
    let mut work: Vec<Vec<Padic>> = basis.to_vec();
    let mut chosen = Vec::new();
    for i in 0..work.len() {
        let mut best: Option<(usize, i64)> = None;
        for &c in allowed {
            if chosen.contains(&c) || work[i][c].is_zero() {
                continue;
            }
            let v = work[i][c].valuation();
            if best.is_none_or(|(_, bv)| v < bv) {
                best = Some((c, v));
            }
        }
        let (c, _) = best.ok_or_else(|| Error::Inconclusive("basis vectors dependent at precision".into()))?;
        chosen.push(c);
        let inv = work[i][c].inv()?;
        let pv = work[i].clone();
        for row in work.iter_mut().skip(i + 1) {
            if row[c].is_exact_zero() {
                continue;
            }
            let f = row[c].mul_ref(&inv);
            for (x, y) in row.iter_mut().zip(&pv) {
                if !y.is_exact_zero() {
                    *x = x.sub_ref(&f.mul_ref(y));
                }
            }
        }
    }
    let _ = qp;
    Ok(chosen)
}

/// x with Σ x_k basis_k = target on the pivot coordinates.
pub fn coordinates_in(qp: Qp, basis: &[Vec<Padic>], coords: &[usize], target: &[Padic]) -> Result<Vec<Padic>> {
    let a: Vec<Vec<Padic>> = coords.iter().map(|&c| basis.iter().map(|b| b[c].clone()).collect()).collect();
    let b: Vec<Padic> = coords.iter().map(|&c| target[c].clone()).collect();
    solve_square(qp, &a, &b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nullspace_small() {
        let k = Qp::new(5, 20).unwrap();
        let rows = vec![vec![k.int(1), k.int(2), k.int(3)], vec![k.int(2), k.int(4), k.int(6)]];
        let ns = nullspace(k, &rows, 3);
        assert_eq!(ns.len(), 2);
        for v in ns {
            let s = k.int(1).mul_ref(&v[0]).add_ref(&k.int(2).mul_ref(&v[1])).add_ref(&k.int(3).mul_ref(&v[2]));
            assert!(s.is_zero());
        }
    }

    #[test]
    fn triangular_kernel() {
        // u0 free; u1 = -u0; row 2 diag 0 → constraint u1 = 0
        let k = Qp::new(5, 20).unwrap();
        let mut sys = LowerSystem::new(k, 3);
        sys.push(0, 0, k.zero());
        sys.push(1, 0, k.one());
        sys.push(1, 1, k.one());
        sys.push(2, 1, k.one());
        let sol = sys.solve();
        assert_eq!(sol.params, vec![0, 2]);
        let ker = sol.kernel(k);
        assert_eq!(ker.len(), 1);
        assert!(ker[0][0].is_zero() && ker[0][1].is_zero() && !ker[0][2].is_zero());
    }
}
