use proptest::prelude::*;
use robba::characters::{jacquet_expected, Character, Class, TriangulineParameter};
use robba::config::RunConfig;
use robba::phigamma::{cocycle_validate, kernel_bound_check, nabla_eigenspace, reference_module, Ambient, CocycleTag, ExtensionCocycle};
use robba::verify::{expected_dim, scenario_table};
use robba::Qp;

fn cfg() -> RunConfig {
    RunConfig::default()
}

fn qp() -> Qp {
    cfg().qp()
}

fn param(k1: i64, v1: i64, k2: i64) -> robba::Result<TriangulineParameter> {
    let q = qp();
    let d1 = Character::new(q, k1, 0, q.int(2).mul_ref(&q.p_pow(v1)))?;
    let d2 = Character::new(q, k2, 0, q.int(3).mul_ref(&q.p_pow(-v1)))?;
    TriangulineParameter::new(d1, d2, None)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Class follows from w(s) alone when L = ∞ and δ1 ≠ x^w δ2.
    #[test]
    fn classification_by_weight(k1 in -4i64..8, k2 in -4i64..8, v1 in 1i64..3) {
        let w = k1 - k2;
        match param(k1, v1, k2) {
            Ok(s) => {
                prop_assert!(!(1..=v1).contains(&w));
                let expect = if w < 1 { Class::Ng } else { Class::Cris };
                prop_assert_eq!(s.classify().unwrap(), expect);
            }
            Err(_) => prop_assert!((1..=v1).contains(&w)),
        }
    }
}

#[test]
fn eigenspaces_on_r_plus() {
    let cfg = cfg();
    let q = qp();
    for c in 0..5 {
        assert_eq!(nabla_eigenspace(&q.int(c), &Ambient::RPlus, &cfg).unwrap().dim(), 1, "c = {c}");
    }
    for c in [-1, -2, -3] {
        assert_eq!(nabla_eigenspace(&q.int(c), &Ambient::RPlus, &cfg).unwrap().dim(), 0, "c = {c}");
    }
    assert_eq!(nabla_eigenspace(&q.rat(1, 2), &Ambient::RPlus, &cfg).unwrap().dim(), 0);
}

#[test]
fn reference_cocycles_are_valid() {
    let cfg = cfg();
    for (name, s) in TriangulineParameter::canonical(qp()) {
        let c = ExtensionCocycle::for_parameter(&s, cfg.trunc).unwrap();
        assert!(cocycle_validate(&c, &s).unwrap().valid, "{name}");
    }
}

#[test]
fn st_cocycle_needs_positive_weight() {
    let s = TriangulineParameter::canonical(qp()).into_iter().find(|(n, _)| *n == "ng").unwrap().1;
    assert!(ExtensionCocycle::of_type(&s, CocycleTag::St, 64).is_err());
}

#[test]
fn expected_and_numeric_dimensions() {
    let cfg = RunConfig::default();
    for (name, s) in TriangulineParameter::canonical(cfg.qp()) {
        assert_eq!(jacquet_expected(&s).unwrap().eigendata.len(), expected_dim(name), "{name}");
    }
    for row in scenario_table(&cfg) {
        assert!(row.matches, "{}: {}", row.name, row.report);
        assert_eq!(row.dim, Some(expected_dim(&row.name)));
    }
}

#[test]
fn bound_on_rank_one_and_rank_two() {
    let cfg = cfg();
    let q = qp();
    // (X)(X − 1)(X − 2) on R^+: kernel {1, t, t^2}, exactly at the bound.
    let poly = [q.zero(), q.int(2), q.int(-3), q.one()];
    let r = kernel_bound_check(&Ambient::RPlus, &poly, &cfg).unwrap();
    assert_eq!((r.dim, r.bound), (3, 3));
    let s = TriangulineParameter::canonical(q).into_iter().find(|(n, _)| *n == "cris").unwrap().1;
    let tri = reference_module(&s, &cfg).unwrap();
    let r = kernel_bound_check(&Ambient::Trianguline(Box::new(tri)), &poly, &cfg).unwrap();
    assert!(r.holds);
    assert_eq!(r.bound, 6);
}

/// Below M = 48 the envelope slope of t^2 falls in the gap; that must be
/// reported, never turned into dim 0 silently.
#[test]
fn short_truncation_is_inconclusive_not_wrong() {
    let cfg = RunConfig { trunc: 40, ..RunConfig::default() };
    let r = nabla_eigenspace(&cfg.qp().int(2), &Ambient::RPlus, &cfg).unwrap();
    assert!(r.dim() == 1 || r.inconclusive.is_some());
    let c = robba::verify::check_nabla_eigenspace(&cfg);
    assert_ne!(c.status, robba::verify::Status::Fail);
}
