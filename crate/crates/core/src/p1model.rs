//! Sections over P^1: an exact point model (finite combinations of Dirac
//! masses on P^1(Q_p), acted on by all of GL_2(Q_p)), series-level pairs for
//! compatibility checks, and the rank-two constructions u^+, w_D on graded
//! pieces and the dévissage maps.
//!
//! Conventions. A measure on P^1 is a list of atoms; an atom in chart 0 sits
//! at x ∈ Z_p, an atom in chart ∞ at y ∈ pZ_p and stands for w·δ_y. The
//! action is g·δ_x = δ(cx+d)·δ_{gx} for g = (a b; c d), times twist(det g).
//! Words are written as products and applied right to left.

use std::fmt;

use serde_json::{json, Value};

use crate::characters::{Character, TriangulineParameter};
use crate::config::RunConfig;
use crate::distribution::{LocalDist, PointMeasure};
use crate::error::{Error, Result};
use crate::padic::{Padic, Qp};
use crate::phigamma::{Elem, Trianguline};
use crate::series::{Defect, Series};

// ---------------------------------------------------------------------------
// Matrices and words
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct Mat2 {
    pub a: Padic,
    pub b: Padic,
    pub c: Padic,
    pub d: Padic,
}

impl Mat2 {
    pub fn new(a: Padic, b: Padic, c: Padic, d: Padic) -> Mat2 {
        Mat2 { a, b, c, d }
    }

    pub fn identity(qp: Qp) -> Mat2 {
        Mat2::new(qp.one(), qp.zero(), qp.zero(), qp.one())
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        Mat2 {
            a: self.a.mul_ref(&o.a).add_ref(&self.b.mul_ref(&o.c)),
            b: self.a.mul_ref(&o.b).add_ref(&self.b.mul_ref(&o.d)),
            c: self.c.mul_ref(&o.a).add_ref(&self.d.mul_ref(&o.c)),
            d: self.c.mul_ref(&o.b).add_ref(&self.d.mul_ref(&o.d)),
        }
    }

    pub fn det(&self) -> Padic {
        self.a.mul_ref(&self.d).sub_ref(&self.b.mul_ref(&self.c))
    }

    pub fn agrees_with(&self, o: &Mat2) -> bool {
        [(&self.a, &o.a), (&self.b, &o.b), (&self.c, &o.c), (&self.d, &o.d)]
            .iter()
            .all(|(x, y)| x.sub_ref(y).is_zero())
    }
}

/// Supported generators.
#[derive(Clone, Debug)]
pub enum Gen {
    /// a·I
    Center(Padic),
    /// diag(a, 1), a ∈ Z_p^*
    Torus(Padic),
    /// (1 b; 0 1), b ∈ Z_p
    Unip(Padic),
    /// diag(p, 1)
    DiagP,
    /// (0 1; 1 0)
    W,
}

impl Gen {
    pub fn validate(&self) -> Result<()> {
        match self {
            Gen::Center(a) if a.is_zero() => Err(Error::Domain("center(a) needs a ≠ 0".into())),
            Gen::Torus(a) if a.is_zero() || a.valuation() != 0 => {
                Err(Error::Domain("torus(a) needs a ∈ Z_p^*".into()))
            }
            Gen::Unip(b) if b.valuation() < 0 => Err(Error::Unsupported(
                "unip(b) with b ∉ Z_p needs a Bruhat decomposition".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn matrix(&self, qp: Qp) -> Mat2 {
        let (o, z) = (qp.one(), qp.zero());
        match self {
            Gen::Center(a) => Mat2::new(a.clone(), z.clone(), z, a.clone()),
            Gen::Torus(a) => Mat2::new(a.clone(), z.clone(), z, o),
            Gen::Unip(b) => Mat2::new(o.clone(), b.clone(), z, o),
            Gen::DiagP => Mat2::new(qp.int(qp.p as i64), z.clone(), z, o),
            Gen::W => Mat2::new(z.clone(), o.clone(), o, z),
        }
    }
}

impl fmt::Display for Gen {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lit = |x: &Padic| x.to_i64_centered().map_or_else(|| x.to_literal(), |n| n.to_string());
        match self {
            Gen::Center(a) => write!(f, "c({})", lit(a)),
            Gen::Torus(a) => write!(f, "t({})", lit(a)),
            Gen::Unip(b) => write!(f, "u({})", lit(b)),
            Gen::DiagP => write!(f, "p"),
            Gen::W => write!(f, "w"),
        }
    }
}

/// Parse "u(1);w;t(-1)". Tokens: c(x), t(x), u(x), p, w.
pub fn parse_word(qp: Qp, s: &str) -> Result<Vec<Gen>> {
    let mut out = Vec::new();
    for tok in s.split(';').map(str::trim).filter(|t| !t.is_empty()) {
        let g = match tok {
            "w" => Gen::W,
            "p" => Gen::DiagP,
            _ => {
                let (name, rest) = tok.split_at(1);
                let arg = rest
                    .strip_prefix('(')
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| Error::Parse(format!("bad generator {tok:?}")))?;
                let x = qp.parse(arg)?;
                match name {
                    "c" => Gen::Center(x),
                    "t" => Gen::Torus(x),
                    "u" => Gen::Unip(x),
                    _ => return Err(Error::Parse(format!("unknown generator {tok:?}"))),
                }
            }
        };
        g.validate()?;
        out.push(g);
    }
    Ok(out)
}

pub fn word_to_string(word: &[Gen]) -> String {
    word.iter().map(Gen::to_string).collect::<Vec<_>>().join(";")
}

pub fn word_matrix(qp: Qp, word: &[Gen]) -> Mat2 {
    word.iter().fold(Mat2::identity(qp), |m, g| m.mul(&g.matrix(qp)))
}

// ---------------------------------------------------------------------------
// Point model
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Chart {
    Zero,
    Inf,
}

#[derive(Clone, Debug)]
pub struct Atom {
    pub chart: Chart,
    pub point: Padic,
    pub weight: Padic,
}

/// Section of (R ⊠_δ P^1) ⊗ twist given by finitely many atoms.
#[derive(Clone, Debug)]
pub struct PointSection {
    pub delta: Character,
    pub twist: Character,
    pub atoms: Vec<Atom>,
}

impl PointSection {
    pub fn empty(delta: Character, twist: Character) -> PointSection {
        PointSection { delta, twist, atoms: Vec::new() }
    }

    pub fn qp(&self) -> Qp {
        self.delta.qp()
    }

    /// c·δ_x, x ∈ Z_p.
    pub fn with_point(mut self, x: Padic, c: Padic) -> Result<PointSection> {
        if x.valuation() < 0 {
            return Err(Error::Domain("chart-0 atoms live in Z_p".into()));
        }
        self.atoms.push(Atom { chart: Chart::Zero, point: x, weight: c });
        Ok(self)
    }

    /// c·w·δ_y, y ∈ pZ_p (y = 0 is the point ∞).
    pub fn with_infinity(mut self, y: Padic, c: Padic) -> Result<PointSection> {
        if !y.is_zero() && y.valuation() < 1 {
            return Err(Error::Domain("chart-∞ atoms live in pZ_p".into()));
        }
        self.atoms.push(Atom { chart: Chart::Inf, point: y, weight: c });
        Ok(self)
    }

    fn map_atom(&self, m: &Mat2, at: &Atom) -> Result<Atom> {
        let qp = self.qp();
        // chart-∞ atoms are w·δ_y: act with g·w on y
        let m = match at.chart {
            Chart::Zero => m.clone(),
            Chart::Inf => m.mul(&Gen::W.matrix(qp)),
        };
        let x = &at.point;
        let u = m.c.mul_ref(x).add_ref(&m.d);
        let v = m.a.mul_ref(x).add_ref(&m.b);
        if !u.is_zero() && (v.is_zero() || v.valuation() >= u.valuation()) {
            let gx = v.checked_div(&u)?;
            Ok(Atom { chart: Chart::Zero, point: gx, weight: at.weight.mul_ref(&self.delta.eval(&u)?) })
        } else {
            let y = if u.is_zero() { qp.zero() } else { u.checked_div(&v)? };
            Ok(Atom { chart: Chart::Inf, point: y, weight: at.weight.mul_ref(&self.delta.eval(&v)?) })
        }
    }

    pub fn act_matrix(&self, m: &Mat2) -> Result<PointSection> {
        let tw = self.twist.eval(&m.det())?;
        let mut atoms = Vec::with_capacity(self.atoms.len());
        for at in &self.atoms {
            let mut a = self.map_atom(m, at)?;
            a.weight = a.weight.mul_ref(&tw);
            atoms.push(a);
        }
        Ok(PointSection { delta: self.delta.clone(), twist: self.twist.clone(), atoms })
    }

    pub fn act(&self, g: &Gen) -> Result<PointSection> {
        g.validate()?;
        self.act_matrix(&g.matrix(self.qp()))
    }

    /// g_1 ⋯ g_k · self (g_k applied first).
    pub fn act_word(&self, word: &[Gen]) -> Result<PointSection> {
        let mut s = self.clone();
        for g in word.iter().rev() {
            s = s.act(g)?;
        }
        Ok(s)
    }

    /// Drop the mass on p^{-1}Z_p − Z_p (chart-∞ atoms with v(y) = 1).
    pub fn without_boundary_shell(&self) -> PointSection {
        let atoms = self
            .atoms
            .iter()
            .filter(|a| !(a.chart == Chart::Inf && !a.point.is_zero() && a.point.valuation() == 1))
            .cloned()
            .collect();
        PointSection { delta: self.delta.clone(), twist: self.twist.clone(), atoms }
    }

    pub fn add(&self, o: &PointSection) -> PointSection {
        let mut atoms = self.atoms.clone();
        atoms.extend(o.atoms.iter().cloned());
        PointSection { delta: self.delta.clone(), twist: self.twist.clone(), atoms }
    }

    pub fn scale(&self, c: &Padic) -> PointSection {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom { chart: a.chart, point: a.point.clone(), weight: a.weight.mul_ref(c) })
            .collect();
        PointSection { delta: self.delta.clone(), twist: self.twist.clone(), atoms }
    }

    /// Res_{Z_p} of the section.
    pub fn z1_measure(&self) -> PointMeasure {
        let atoms = self
            .atoms
            .iter()
            .filter(|a| a.chart == Chart::Zero)
            .map(|a| (a.weight.clone(), a.point.clone()))
            .collect();
        PointMeasure { qp: self.qp(), atoms }
    }

    /// Res_{Z_p}(w · section).
    pub fn z2_measure(&self) -> Result<PointMeasure> {
        let mut atoms = Vec::new();
        for a in &self.atoms {
            match a.chart {
                Chart::Inf => atoms.push((a.weight.clone(), a.point.clone())),
                Chart::Zero if a.point.valuation() == 0 && !a.point.is_zero() => {
                    atoms.push((a.weight.mul_ref(&self.delta.eval(&a.point)?), a.point.inv()?));
                }
                Chart::Zero => {}
            }
        }
        Ok(PointMeasure { qp: self.qp(), atoms })
    }

    pub fn z1(&self, trunc: i64) -> Series {
        self.z1_measure().amice(trunc)
    }

    pub fn z2(&self, trunc: i64) -> Result<Series> {
        Ok(self.z2_measure()?.amice(trunc))
    }

    pub fn pair(&self, trunc: i64) -> Result<SeriesSection> {
        Ok(SeriesSection { delta: self.delta.clone(), z1: self.z1(trunc), z2: self.z2(trunc)? })
    }

    pub fn to_json(&self, trunc: i64) -> Result<Value> {
        let p = self.pair(trunc)?;
        Ok(json!({
            "z1": crate::io::series_to_json(&p.z1),
            "z2": crate::io::series_to_json(&p.z2),
            "context": {"delta": self.delta.to_json(), "twist": self.twist.to_json()},
        }))
    }
}

/// Random point section: chart-0 atoms at small integers, chart-∞ atoms at
/// multiples of p, small integer weights.
pub fn random_point_section<R: rand::Rng>(delta: &Character, twist: &Character, rng: &mut R) -> Result<PointSection> {
    let qp = delta.qp();
    let p = qp.p as i64;
    let mut s = PointSection::empty(delta.clone(), twist.clone());
    for _ in 0..rng.gen_range(1..=3) {
        s = s.with_point(qp.int(rng.gen_range(0..p * p * p)), qp.int(rng.gen_range(1..=9)))?;
    }
    for _ in 0..rng.gen_range(0..=2) {
        s = s.with_infinity(qp.int(p * rng.gen_range(0..p * p)), qp.int(rng.gen_range(1..=9)))?;
    }
    Ok(s)
}

// ---------------------------------------------------------------------------
// Series-level pairs
// ---------------------------------------------------------------------------

/// A pair (z1, z2) in R × R with context δ.
#[derive(Clone, Debug)]
pub struct SeriesSection {
    pub delta: Character,
    pub z1: Series,
    pub z2: Series,
}

impl SeriesSection {
    /// Closed forms for w, center and torus; unip and diagp move mass between
    /// the charts and are available on point sections only.
    pub fn act(&self, g: &Gen) -> Result<SeriesSection> {
        g.validate()?;
        let d = &self.delta;
        let (z1, z2) = match g {
            Gen::W => (self.z2.clone(), self.z1.clone()),
            Gen::Center(a) => {
                let c = d.eval(a)?;
                (self.z1.scale(&c), self.z2.scale(&c))
            }
            Gen::Torus(a) => (self.z1.sigma(a)?, self.z2.sigma(&a.inv()?)?.scale(&d.eval(a)?)),
            Gen::Unip(_) | Gen::DiagP => {
                return Err(Error::Unsupported(format!("{g} on series pairs: use the point model")));
            }
        };
        Ok(SeriesSection { delta: d.clone(), z1, z2 })
    }

    /// First-slot closed forms: unip(b): (1+T)^b z1, diagp: φ(z1). The
    /// latter needs z to carry no mass on p^{-1}Z_p − Z_p, which diag(p,1)
    /// would move into Z_p.
    pub fn act_slot1(&self, g: &Gen) -> Result<Series> {
        g.validate()?;
        let qp = self.delta.qp();
        match g {
            Gen::Unip(b) => Ok(self.z1.mul(&Series::one_plus_t_pow(qp, b, self.z1.trunc()))),
            Gen::DiagP => self.z1.phi(),
            _ => Ok(self.act(g)?.z1),
        }
    }

    pub fn act_word(&self, word: &[Gen]) -> Result<SeriesSection> {
        let mut s = self.clone();
        for g in word.iter().rev() {
            s = s.act(g)?;
        }
        Ok(s)
    }

    pub fn defect(&self, o: &SeriesSection) -> Defect {
        self.z1.defect(&o.z1).merge(&self.z2.defect(&o.z2))
    }
}

/// Compatibility report.
#[derive(Clone, Debug)]
pub struct SectionReport {
    pub level: u32,
    pub moments: usize,
    pub defect: Defect,
    pub pass: bool,
}

impl SectionReport {
    pub fn to_json(&self) -> Value {
        json!({"level": self.level, "moments": self.moments, "defect": self.defect, "pass": self.pass})
    }
}

/// Finest level ≤ the configured one whose moment order M' = ⌊(M+1)/p^n⌋ − 1
/// is at least min(configured M', 8); level 1 is accepted with any M' ≥ 1.
pub fn local_shape(p: u32, trunc: i64, cfg_level: u32, cfg_moments: usize) -> Result<(u32, usize)> {
    let want = cfg_moments.min(8) as i64;
    let mut level = cfg_level.max(1);
    loop {
        let pn = (p as i64).pow(level);
        let m = (trunc + 1) / pn - 1;
        if m >= want || (level == 1 && m >= 1) {
            return Ok((level, cfg_moments.min(m as usize)));
        }
        if level == 1 {
            return Err(Error::InsufficientTruncation(format!("truncation {trunc} too small for level 1")));
        }
        level -= 1;
    }
}

/// Res_{Z_p^*}(z2) against w_δ(Res_{Z_p^*}(z1)) in the local coset model.
pub fn section_check(sec: &SeriesSection, cfg: &RunConfig) -> Result<SectionReport> {
    let qp = sec.delta.qp();
    let trunc = sec.z1.trunc().min(sec.z2.trunc());
    let (level, moments) = local_shape(qp.p, trunc, cfg.level, cfg.moments)?;
    let l1 = LocalDist::from_amice(&sec.z1.power_part_or_err()?, level, moments)?.restrict_units();
    let l2 = LocalDist::from_amice(&sec.z2.power_part_or_err()?, level, moments)?.restrict_units();
    let defect = l1.w_delta(&sec.delta)?.defect(&l2);
    Ok(SectionReport { level, moments, pass: defect.pass, defect })
}

impl Series {
    fn power_part_or_err(&self) -> Result<Series> {
        let f = self.trim_principal();
        if f.is_power_series() {
            Ok(f.power_part())
        } else {
            Err(Error::Domain("section_check needs power series slots".into()))
        }
    }
}

/// res_0(f · dT/(1+T)).
pub fn residue_dlog(f: &Series) -> Padic {
    let qp = f.qp();
    let mut s = qp.zero();
    for k in 1..=(-f.low()).max(0) {
        let c = f.coeff(-k);
        s = if (k - 1) % 2 == 0 { s.add_ref(&c) } else { s.sub_ref(&c) };
    }
    s
}

/// φ_z(g) = res_0(Res_{Z_p}(w g z) dT/(1+T)) for a series pair.
pub fn induced_pairing(sec: &SeriesSection, word: &[Gen]) -> Result<Padic> {
    let g = sec.act_word(word)?;
    Ok(residue_dlog(&g.z2))
}

/// The same pairing on a point section; always a power series, hence 0.
pub fn induced_pairing_points(sec: &PointSection, word: &[Gen], trunc: i64) -> Result<Padic> {
    let g = sec.act_word(word)?;
    Ok(residue_dlog(&g.z2(trunc)?))
}

// ---------------------------------------------------------------------------
// Rank two
// ---------------------------------------------------------------------------

/// (z1, z2) with z_j ∈ D_rig written in (e1, ê2).
#[derive(Clone, Debug)]
pub struct Rank2Pair {
    pub z1: Elem,
    pub z2: Elem,
}

impl Rank2Pair {
    pub fn sub(&self, o: &Rank2Pair) -> Rank2Pair {
        Rank2Pair { z1: self.z1.sub(&o.z1), z2: self.z2.sub(&o.z2) }
    }

    pub fn scale(&self, c: &Padic) -> Rank2Pair {
        Rank2Pair { z1: self.z1.scale(c), z2: self.z2.scale(c) }
    }

    pub fn defect(&self, o: &Rank2Pair) -> Defect {
        self.z1.defect(&o.z1).merge(&self.z2.defect(&o.z2))
    }

    pub fn to_json(&self) -> Value {
        json!({"z1": self.z1.to_json(), "z2": self.z2.to_json()})
    }
}

/// Context (δ_Dδ_1^{-2}, δ_1) of the e1-line.
pub fn e1_line_context(s: &TriangulineParameter) -> (Character, Character) {
    let d1 = &s.delta1;
    (s.delta_d().mul(&d1.pow(-2)), d1.clone())
}

/// Context (δ_Dδ_2^{-2}, δ_2) of the quotient line.
pub fn e2_line_context(s: &TriangulineParameter) -> (Character, Character) {
    let d2 = &s.delta2;
    (s.delta_d().mul(&d2.pow(-2)), d2.clone())
}

fn sign_padic(qp: Qp, c: &Character) -> Padic {
    qp.int(c.sign())
}

/// i: (f1, f2) ↦ (f1·e1, δ1(−1) f2·e1).
pub fn dev_i(s: &TriangulineParameter, f1: &Series, f2: &Series) -> Rank2Pair {
    let qp = s.qp();
    let sg = sign_padic(qp, &s.delta1);
    Rank2Pair {
        z1: Elem { a: f1.clone(), b: Series::zero(qp, f1.trunc()) },
        z2: Elem { a: f2.scale(&sg), b: Series::zero(qp, f2.trunc()) },
    }
}

/// pr: (A_j e1 + B_j φ(ê2))_j ↦ (B_1, δ2(−1)B_2); with ê2-coordinates B̂ the
/// φ(ê2)-coordinate is B̂/δ2(p).
pub fn dev_pr(tri: &Trianguline, z: &Rank2Pair) -> Result<(Series, Series)> {
    let qp = tri.qp();
    let binv = tri.s.delta2.lambda.inv()?;
    let sg = sign_padic(qp, &tri.s.delta2);
    Ok((z.z1.b.scale(&binv), z.z2.b.scale(&binv.mul_ref(&sg))))
}

/// A preimage of (B1, B2) under pr.
pub fn dev_preimage(tri: &Trianguline, b1: &Series, b2: &Series) -> Rank2Pair {
    let qp = tri.qp();
    let beta = &tri.s.delta2.lambda;
    let sg = sign_padic(qp, &tri.s.delta2);
    Rank2Pair {
        z1: Elem { a: Series::zero(qp, b1.trunc()), b: b1.scale(beta) },
        z2: Elem { a: Series::zero(qp, b2.trunc()), b: b2.scale(&beta.mul_ref(&sg)) },
    }
}

/// Rank-two pair of a point section of the e1-line.
pub fn embed_points(s: &TriangulineParameter, sec: &PointSection, trunc: i64) -> Result<Rank2Pair> {
    Ok(dev_i(s, &sec.z1(trunc), &sec.z2(trunc)?))
}

fn nabla_minus(tri: &Trianguline, z: &Elem, c: i64) -> Elem {
    tri.nabla(z).sub(&z.scale(&tri.qp().int(c)))
}

/// u^+(z) = (t z1, −(∇−w1)(∇−w2) z2 / t).
pub fn u_plus(tri: &Trianguline, z: &Rank2Pair) -> Result<Rank2Pair> {
    let qp = tri.qp();
    let t = Series::log1p_t(qp, z.z1.a.trunc().max(z.z1.b.trunc()));
    let z1 = Elem { a: z.z1.a.mul(&t), b: z.z1.b.mul(&t) };
    let y = nabla_minus(tri, &nabla_minus(tri, &z.z2, tri.w2()), tri.w1());
    let div = |f: &Series| -> Result<Series> {
        f.divide_by_t().map_err(|_| Error::Domain("u^+ undefined at this precision".into()))
    };
    let z2 = Elem { a: div(&y.a)?.neg(), b: div(&y.b)?.neg() };
    Ok(Rank2Pair { z1, z2 })
}

/// (unip(p^n)·sec − sec)/p^n on an e1-line point section, as a rank-two pair.
pub fn u_plus_numeric(s: &TriangulineParameter, sec: &PointSection, n: u32, trunc: i64) -> Result<Rank2Pair> {
    let qp = s.qp();
    let pn = qp.p_pow(n as i64);
    let moved = sec.act(&Gen::Unip(pn.clone()))?;
    let a = embed_points(s, &moved, trunc)?;
    let b = embed_points(s, sec, trunc)?;
    Ok(a.sub(&b).scale(&pn.inv()?))
}

/// Rank-one difference quotient (unip(p^n)·sec − sec)/p^n.
pub fn u_plus_numeric_rank1(sec: &PointSection, n: u32, trunc: i64) -> Result<SeriesSection> {
    let qp = sec.qp();
    let pn = qp.p_pow(n as i64);
    let a = sec.act(&Gen::Unip(pn.clone()))?.pair(trunc)?;
    let b = sec.pair(trunc)?;
    let inv = pn.inv()?;
    Ok(SeriesSection { delta: sec.delta.clone(), z1: a.z1.sub(&b.z1).scale(&inv), z2: a.z2.sub(&b.z2).scale(&inv) })
}

/// Rank-one closed form with weights {0, w(δ)+1}: (t z1, −∇(∇ − w(δ) − 1) z2 / t).
pub fn u_plus_rank1(sec: &SeriesSection) -> Result<SeriesSection> {
    let qp = sec.delta.qp();
    let t = Series::log1p_t(qp, sec.z1.trunc());
    let k1 = sec.delta.weight() + 1;
    let n1 = sec.z2.nabla().sub(&sec.z2.scale_int(k1));
    let y = n1.nabla();
    let z2 = y.divide_by_t().map_err(|_| Error::Domain("u^+ undefined at this precision".into()))?.neg();
    Ok(SeriesSection { delta: sec.delta.clone(), z1: sec.z1.mul(&t), z2 })
}

/// Loss allowed when comparing difference quotients up to degree M: the
/// T^k coefficient converges like p^{n − 2⌊log_p k⌋}.
pub fn uplus_loss(p: u32, trunc: i64) -> i64 {
    let mut l = 0;
    let mut q = p as i64;
    while q <= trunc {
        l += 1;
        q *= p as i64;
    }
    2 * l
}

#[derive(Clone, Debug)]
pub struct UplusReport {
    pub n: u32,
    pub defect: Defect,
    /// Required valuation n − uplus_loss.
    pub bound: i64,
    pub pass: bool,
}

impl UplusReport {
    pub fn to_json(&self) -> Value {
        json!({"n": self.n, "defect": self.defect, "bound": self.bound, "pass": self.pass})
    }
}

/// Closed-form u^+ against the difference quotient at p^n.
pub fn uplus_agreement(tri: &Trianguline, sec: &PointSection, n: u32, trunc: i64) -> Result<UplusReport> {
    let s = &tri.s;
    let exact = u_plus(tri, &embed_points(s, sec, trunc)?)?;
    let num = u_plus_numeric(s, sec, n, trunc)?;
    let defect = num.defect(&exact);
    let bound = n as i64 - uplus_loss(s.qp().p, trunc);
    let pass = defect.nonzero_valuation.is_none_or(|v| v >= bound);
    Ok(UplusReport { n, defect, bound, pass })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Line {
    E1,
    E2,
}

impl Line {
    pub fn parse(s: &str) -> Result<Line> {
        match s {
            "e1" => Ok(Line::E1),
            "e2" => Ok(Line::E2),
            _ => Err(Error::Parse(format!("line must be e1 or e2, got {s:?}"))),
        }
    }
}

/// Character and sign of w_D on a graded piece: (δ_Dδ_j^{-2}, δ_j(−1)).
pub fn graded_data(s: &TriangulineParameter, line: Line) -> (Character, Padic) {
    let qp = s.qp();
    let (d, tw) = match line {
        Line::E1 => e1_line_context(s),
        Line::E2 => e2_line_context(s),
    };
    (d, sign_padic(qp, &tw))
}

/// w_D on a graded piece, in the local coset model.
pub fn w_d_graded_local(mu: &LocalDist, line: Line, s: &TriangulineParameter) -> Result<LocalDist> {
    if !mu.is_unit_supported() {
        return Err(Error::Domain("w_D on graded pieces needs ψf = 0".into()));
    }
    let (d, sg) = graded_data(s, line);
    Ok(mu.w_delta(&d)?.scale(&sg))
}

/// Series version: f with ψf = 0, converted at the finest level the
/// truncation supports.
pub fn w_d_graded(f: &Series, line: Line, s: &TriangulineParameter, cfg: &RunConfig) -> Result<Series> {
    let psi = f.psi()?;
    if !psi.terms().all(|(_, c)| c.is_zero()) {
        return Err(Error::Domain("w_D on graded pieces needs ψf = 0".into()));
    }
    let (level, moments) = local_shape(s.qp().p, f.trunc(), cfg.level, cfg.moments)?;
    let mu = LocalDist::from_amice(f, level, moments)?.restrict_units();
    w_d_graded_local(&mu, line, s)?.amice(f.trunc())
}

/// The matrix identity used for w_D((1+T)e1): both words, applied to e1.
#[derive(Clone, Debug)]
pub struct InvReport {
    pub lhs_word: String,
    pub rhs_word: String,
    pub matrices_agree: bool,
    /// lhs(e1) − rhs(e1) as rank-two pairs.
    pub words_defect: Defect,
    /// First slot of rhs(e1) − δ1(−1)(1+T)e1.
    pub value_defect: Defect,
}

impl InvReport {
    pub fn pass(&self) -> bool {
        self.matrices_agree && self.words_defect.pass && self.value_defect.pass
    }

    pub fn to_json(&self) -> Value {
        json!({
            "lhs": self.lhs_word,
            "rhs": self.rhs_word,
            "matrices_agree": self.matrices_agree,
            "words_defect": self.words_defect,
            "value_defect": self.value_defect,
            "pass": self.pass(),
        })
    }
}

pub const INV_LHS: &str = "u(1);w;c(-1);t(-1);u(1);w";
pub const INV_RHS: &str = "w;u(1)";

/// e1 as a section: δ_0 in the e1-line.
pub fn e1_section(s: &TriangulineParameter) -> Result<PointSection> {
    let (d, tw) = e1_line_context(s);
    let qp = s.qp();
    PointSection::empty(d, tw).with_point(qp.zero(), qp.one())
}

pub fn weyl_word_identity(s: &TriangulineParameter, trunc: i64) -> Result<InvReport> {
    let qp = s.qp();
    let lhs = parse_word(qp, INV_LHS)?;
    let rhs = parse_word(qp, INV_RHS)?;
    let matrices_agree = word_matrix(qp, &lhs).agrees_with(&word_matrix(qp, &rhs));
    let e1 = e1_section(s)?;
    let l = embed_points(s, &e1.act_word(&lhs)?, trunc)?;
    let r = embed_points(s, &e1.act_word(&rhs)?, trunc)?;
    let expect = Series::one_plus_t_int(qp, 1, trunc).scale(&sign_padic(qp, &s.delta1));
    Ok(InvReport {
        lhs_word: INV_LHS.into(),
        rhs_word: INV_RHS.into(),
        matrices_agree,
        words_defect: l.defect(&r),
        value_defect: r.z1.a.defect(&expect).merge(&Defect::of(&r.z1.b)),
    })
}

/// Named generator relations, each as (name, lhs word, rhs word).
pub fn relation_words(qp: Qp, a: &Padic, a2: &Padic, b: &Padic, b1: &Padic, b2: &Padic) -> Vec<(String, Vec<Gen>, Vec<Gen>)> {
    let ab = a.mul_ref(b);
    let aa2 = a.mul_ref(a2);
    let pb = b.mul_int(qp.p as i64);
    let t = |x: &Padic| Gen::Torus(x.clone());
    let u = |x: &Padic| Gen::Unip(x.clone());
    vec![
        ("w∘w = id".into(), vec![Gen::W, Gen::W], vec![]),
        ("unip(0) = id".into(), vec![u(&qp.zero())], vec![]),
        ("torus(1) = id".into(), vec![t(&qp.one())], vec![]),
        ("torus(a)torus(a') = torus(aa')".into(), vec![t(a), t(a2)], vec![t(&aa2)]),
        ("unip(b1)unip(b2) = unip(b1+b2)".into(), vec![u(b1), u(b2)], vec![u(&b1.add_ref(b2))]),
        ("torus(a)unip(b) = unip(ab)torus(a)".into(), vec![t(a), u(b)], vec![u(&ab), t(a)]),
        ("diagp unip(b) = unip(pb) diagp".into(), vec![Gen::DiagP, u(b)], vec![u(&pb), Gen::DiagP]),
        ("w center(a) = center(a) w".into(), vec![Gen::W, Gen::Center(a.clone())], vec![Gen::Center(a.clone()), Gen::W]),
    ]
}

/// Each relation applied to a point section; defects of the z-pairs.
/// `a`, `a2` units, `b`, `b1`, `b2` in Z_p.
pub fn relation_checks(sec: &PointSection, a: &Padic, a2: &Padic, b: &Padic, b1: &Padic, b2: &Padic, trunc: i64) -> Result<Vec<(String, Defect)>> {
    let qp = sec.qp();
    let mut out = Vec::new();
    for (name, l, r) in relation_words(qp, a, a2, b, b1, b2) {
        let x = sec.act_word(&l)?.pair(trunc)?;
        let y = sec.act_word(&r)?.pair(trunc)?;
        out.push((name, x.defect(&y)));
    }
    Ok(out)
}

/// Central character check: center(a) acts by δ_D(a) on D_rig ⊠ P^1.
pub fn central_character_defect(s: &TriangulineParameter, sec: &PointSection, a: &Padic, trunc: i64) -> Result<Defect> {
    let x = embed_points(s, &sec.act(&Gen::Center(a.clone()))?, trunc)?;
    let y = embed_points(s, sec, trunc)?.scale(&s.delta_d().eval(a)?);
    Ok(x.defect(&y))
}

#[derive(Clone, Debug)]
pub struct DevissageReport {
    pub pr_i_zero: Defect,
    pub preimages_found: usize,
    pub basis_size: usize,
    pub preimage_defect: Defect,
    /// Pairs with vanishing ê2-parts come from i.
    pub kernel_in_image: Defect,
}

impl DevissageReport {
    pub fn pass(&self) -> bool {
        self.pr_i_zero.pass && self.preimages_found == self.basis_size && self.preimage_defect.pass && self.kernel_in_image.pass
    }

    pub fn to_json(&self) -> Value {
        json!({
            "pr_i_zero": self.pr_i_zero,
            "preimages_found": self.preimages_found,
            "basis_size": self.basis_size,
            "preimage_defect": self.preimage_defect,
            "kernel_in_image": self.kernel_in_image,
            "pass": self.pass(),
        })
    }
}

/// pr∘i = 0 on `sections`, preimages of (T^m, 0) and (0, T^m) for m ≤ M, and
/// ker pr ⊂ im i on pairs (A1 e1, A2 e1).
pub fn devissage_check(tri: &Trianguline, sections: &[SeriesSection], trunc: i64) -> Result<DevissageReport> {
    let qp = tri.qp();
    let s = &tri.s;
    let mut pr_i = Defect { nonzero_valuation: None, precision: crate::padic::INF, pass: true };
    let mut ker = pr_i.clone();
    for sec in sections {
        let z = dev_i(s, &sec.z1, &sec.z2);
        let (b1, b2) = dev_pr(tri, &z)?;
        pr_i = pr_i.merge(&Defect::of(&b1)).merge(&Defect::of(&b2));
        // z has zero ê2-parts; recover the source pair and map back
        let sg = sign_padic(qp, &s.delta1);
        let back = dev_i(s, &z.z1.a, &z.z2.a.scale(&sg));
        ker = ker.merge(&back.defect(&z));
    }
    let mut found = 0;
    let mut pre = Defect { nonzero_valuation: None, precision: crate::padic::INF, pass: true };
    let zero = Series::zero(qp, trunc);
    for m in 0..=trunc {
        let tm = Series::monomial(qp, qp.one(), m, trunc);
        for (b1, b2) in [(&tm, &zero), (&zero, &tm)] {
            let z = dev_preimage(tri, b1, b2);
            let (c1, c2) = dev_pr(tri, &z)?;
            let d = c1.defect(b1).merge(&c2.defect(b2));
            if d.pass {
                found += 1;
            }
            pre = pre.merge(&d);
        }
    }
    Ok(DevissageReport {
        pr_i_zero: pr_i,
        preimages_found: found,
        basis_size: 2 * (trunc as usize + 1),
        preimage_defect: pre,
        kernel_in_image: ker,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phigamma::reference_module;

    fn setup() -> (RunConfig, Qp) {
        let c = RunConfig::default();
        let q = c.qp();
        (c, q)
    }

    #[test]
    fn words_parse() {
        let (_, q) = setup();
        let w = parse_word(q, INV_LHS).unwrap();
        assert_eq!(w.len(), 6);
        assert_eq!(word_to_string(&w), INV_LHS);
        assert!(parse_word(q, "u(1/5)").is_err());
        assert!(parse_word(q, "t(5)").is_err());
        assert!(parse_word(q, "x(1)").is_err());
    }

    #[test]
    fn inv_identity_on_samples() {
        let (c, q) = setup();
        for (name, s) in TriangulineParameter::canonical(q) {
            let r = weyl_word_identity(&s, c.trunc).unwrap();
            assert!(r.pass(), "{name}: {:?}", r);
        }
    }

    #[test]
    fn dirac_pair_is_compatible() {
        let (c, q) = setup();
        let d = Character::new(q, 2, 1, q.int(5)).unwrap();
        let a = q.int(2);
        let sec = SeriesSection {
            delta: d.clone(),
            z1: Series::one_plus_t_pow(q, &a, c.trunc),
            z2: Series::one_plus_t_pow(q, &a.inv().unwrap(), c.trunc).scale(&d.eval(&a).unwrap()),
        };
        assert!(section_check(&sec, &c).unwrap().pass);
        let bad = SeriesSection { z2: sec.z1.clone(), ..sec };
        assert!(!section_check(&bad, &c).unwrap().pass);
    }

    #[test]
    fn u_plus_matches_difference_quotient() {
        let (c, q) = setup();
        assert_eq!(uplus_loss(5, 64), 4);
        for (name, s) in TriangulineParameter::canonical(q) {
            let tri = reference_module(&s, &c).unwrap();
            let (d, tw) = e1_line_context(&s);
            let sec = PointSection::empty(d, tw)
                .with_point(q.int(2), q.one())
                .unwrap()
                .with_infinity(q.int(5), q.int(3))
                .unwrap();
            for n in [2u32, 3, 4] {
                let r = uplus_agreement(&tri, &sec, n, c.trunc).unwrap();
                assert!(r.pass, "{name} n={n}: {r:?}");
            }
        }
    }

    #[test]
    fn u_plus_kills_x() {
        let (c, q) = setup();
        for (name, s) in TriangulineParameter::canonical(q) {
            let x = crate::phigamma::compute_x(&reference_module(&s, &c).unwrap(), &c).unwrap();
            let tri = reference_module(&s, &c).unwrap();
            for v in &x.vectors {
                let zero = Elem::e1(q, c.trunc).scale(&q.zero());
                let r = u_plus(&tri, &Rank2Pair { z1: zero, z2: v.z.clone() }).unwrap();
                assert!(Defect::of(&r.z2.a).merge(&Defect::of(&r.z2.b)).pass, "{name} {}", v.label);
            }
        }
    }

    #[test]
    fn unip_invariant_section_has_zero_derivative() {
        let (c, q) = setup();
        let d = Character::trivial(q);
        let empty = PointSection::empty(d.clone(), d);
        let r = u_plus_numeric_rank1(&empty, 2, c.trunc).unwrap();
        assert!(Defect::of(&r.z1).pass && Defect::of(&r.z2).pass);
    }
}
