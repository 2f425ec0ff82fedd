use num_bigint::BigInt;
use proptest::prelude::*;
use robba::padic::{vp_factorial, vp_i64};
use robba::Qp;

fn qp() -> Qp {
    Qp::new(5, 30).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn integer_arithmetic_matches_i128(a in -1_000_000_000i64..1_000_000_000, b in -1_000_000_000i64..1_000_000_000) {
        let q = qp();
        let prod = q.bigint(&(BigInt::from(a) * BigInt::from(b)));
        prop_assert!(q.int(a).mul_ref(&q.int(b)).eq_within(&prod));
        prop_assert!(q.int(a).add_ref(&q.int(b)).eq_within(&q.int(a + b)));
        prop_assert!(q.int(a).sub_ref(&q.int(b)).eq_within(&q.int(a - b)));
    }

    #[test]
    fn ring_laws(a in any::<i32>(), b in any::<i32>(), c in any::<i32>(), k in -3i64..3) {
        let q = qp();
        let s = q.p_pow(k);
        let (a, b, c) = (q.int(a as i64).mul_ref(&s), q.int(b as i64), q.int(c as i64));
        prop_assert!(a.mul_ref(&b.add_ref(&c)).eq_within(&a.mul_ref(&b).add_ref(&a.mul_ref(&c))));
        prop_assert!(a.add_ref(&b).add_ref(&c).eq_within(&a.add_ref(&b.add_ref(&c))));
    }

    #[test]
    fn valuation_of_scaled_unit(u in 1i64..100_000, k in -10i64..10) {
        prop_assume!(u % 5 != 0);
        let q = qp();
        let x = q.int(u).mul_ref(&q.p_pow(k));
        prop_assert_eq!(x.valuation(), k);
        prop_assert_eq!(vp_i64(5, u * 25), 2);
    }

    #[test]
    fn inverse_of_unit(u in 1i64..1_000_000) {
        prop_assume!(u % 5 != 0);
        let q = qp();
        let x = q.int(u);
        prop_assert!(x.mul_ref(&x.inv().unwrap()).eq_within(&q.one()));
    }

    #[test]
    fn rationals_survive_literals(n in -10_000i64..10_000, d in 1i64..10_000) {
        let q = qp();
        let x = q.rat(n, d);
        let back = q.parse(&x.to_literal()).unwrap();
        prop_assert!(back.eq_within(&x));
        prop_assert!(x.mul_int(d).eq_within(&q.int(n)));
    }

    #[test]
    fn log_exp_inverse(m in 1i64..10_000) {
        let q = qp();
        let x = q.int(5 * m);
        prop_assert!(x.exp_small().log_unit().eq_within(&x));
    }
}

#[test]
fn teichmuller_roots_of_unity() {
    let q = qp();
    for r in 1..5 {
        let w = q.teichmuller(r);
        assert_eq!(w.residue(), r as u32);
        assert!(w.pow(4).unwrap().eq_within(&q.one()));
    }
}

#[test]
fn legendre_formula() {
    for n in 0..400u64 {
        let naive: i64 = (1..=n as i64).map(|k| vp_i64(5, k)).sum();
        assert_eq!(vp_factorial(5, n), naive);
    }
}

#[test]
fn parse_rejects_junk() {
    assert!(qp().parse("1/0").is_err());
    assert!(qp().parse("abc").is_err());
}
