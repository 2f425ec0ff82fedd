//! Run configuration shared by the solvers, the suites and the CLI.

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::growth::{default_theta, Rational};
use crate::padic::{Qp, SUPPORTED_PRIMES};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Series,
    Wdelta,
    Kernel,
    P1,
    All,
}

impl Suite {
    pub fn parse(s: &str) -> Result<Suite> {
        match s {
            "series" => Ok(Suite::Series),
            "wdelta" => Ok(Suite::Wdelta),
            "kernel" => Ok(Suite::Kernel),
            "p1" => Ok(Suite::P1),
            "all" => Ok(Suite::All),
            _ => Err(Error::InvalidParameter(format!("unknown suite {s:?}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Series => "series",
            Suite::Wdelta => "wdelta",
            Suite::Kernel => "kernel",
            Suite::P1 => "p1",
            Suite::All => "all",
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub p: u32,
    /// Truncation order M.
    pub trunc: i64,
    /// Working precision N.
    pub prec: i64,
    /// Coset level n.
    pub level: u32,
    /// Moment order M'.
    pub moments: usize,
    /// Convergence threshold θ.
    pub theta: Rational,
    pub suite: Suite,
    /// Seed for randomized property checks.
    pub seed: u64,
    /// Make the limit-formula cross-check gating.
    pub gate_limit: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            p: 5,
            trunc: 64,
            prec: 40,
            level: 2,
            moments: 16,
            theta: default_theta(5),
            suite: Suite::All,
            seed: 20240601,
            gate_limit: false,
        }
    }
}

impl RunConfig {
    pub fn with_prime(p: u32) -> RunConfig {
        RunConfig { p, theta: default_theta(p), ..RunConfig::default() }
    }

    pub fn qp(&self) -> Qp {
        Qp::new(self.p, self.prec).expect("validated configuration")
    }

    pub fn validate(&self) -> Result<()> {
        if !SUPPORTED_PRIMES.contains(&self.p) {
            return Err(Error::InvalidParameter(format!("p = {} not in {:?}", self.p, SUPPORTED_PRIMES)));
        }
        if self.trunc < 8 {
            return Err(Error::InvalidParameter(format!("truncation {} below 8", self.trunc)));
        }
        if self.prec < 8 {
            return Err(Error::InvalidParameter(format!("precision {} below 8", self.prec)));
        }
        if self.level == 0 {
            return Err(Error::InvalidParameter("coset level must be ≥ 1".into()));
        }
        if self.moments == 0 {
            return Err(Error::InvalidParameter("moment order must be ≥ 1".into()));
        }
        if self.theta.num <= 0 {
            return Err(Error::InvalidParameter("threshold must be positive".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "p": self.p,
            "trunc": self.trunc,
            "prec": self.prec,
            "level": self.level,
            "moments": self.moments,
            "theta": format!("{}/{}", self.theta.num, self.theta.den),
            "suite": self.suite.name(),
            "seed": self.seed,
            "gate_limit": self.gate_limit,
        })
    }
}

/// Threshold literal: `a/b` or a decimal.
pub fn parse_threshold(s: &str) -> Result<Rational> {
    if let Some((a, b)) = s.split_once('/') {
        let a: i128 = a.trim().parse().map_err(|_| Error::Parse(format!("threshold {s:?}")))?;
        let b: i128 = b.trim().parse().map_err(|_| Error::Parse(format!("threshold {s:?}")))?;
        if b == 0 {
            return Err(Error::Parse("threshold denominator 0".into()));
        }
        return Ok(Rational::new(a, b));
    }
    let x: f64 = s.trim().parse().map_err(|_| Error::Parse(format!("threshold {s:?}")))?;
    Ok(Rational::new((x * 1e6).round() as i128, 1_000_000))
}
