use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use robba::verify::random_series;
use robba::{Qp, Series};

const TRUNC: i64 = 20;

fn qp() -> Qp {
    Qp::new(5, 30).unwrap()
}

fn series(seed: u64) -> Series {
    random_series(qp(), TRUNC, &mut ChaCha8Rng::seed_from_u64(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn psi_left_inverse_of_phi(seed in any::<u64>()) {
        let f = series(seed);
        prop_assert!(f.phi().unwrap().psi().unwrap().defect(&f).pass);
    }

    #[test]
    fn res_units_idempotent(seed in any::<u64>()) {
        let f = series(seed);
        let r = f.res_units().unwrap();
        prop_assert!(r.res_units().unwrap().defect(&r).pass);
    }

    #[test]
    fn nabla_commutes_with_phi(seed in any::<u64>()) {
        let f = series(seed);
        let lhs = f.phi().unwrap().nabla();
        let rhs = f.nabla().phi().unwrap();
        prop_assert!(lhs.defect(&rhs).pass);
    }

    #[test]
    fn sigma_multiplicative(seed in any::<u64>(), a in 1i64..200, b in 1i64..200) {
        prop_assume!(a % 5 != 0 && b % 5 != 0);
        let q = qp();
        let f = series(seed);
        let lhs = f.sigma(&q.int(b)).unwrap().sigma(&q.int(a)).unwrap();
        let rhs = f.sigma(&q.int(a * b)).unwrap();
        prop_assert!(lhs.defect(&rhs).pass);
    }

    #[test]
    fn psi_on_powers_of_one_plus_t(a in 0u64..60) {
        let q = qp();
        let f = Series::one_plus_t_int(q, a, TRUNC);
        let expect = if a % 5 == 0 { Series::one_plus_t_int(q, a / 5, TRUNC) } else { Series::zero(q, TRUNC) };
        let got = f.psi().unwrap();
        for k in 0..TRUNC / 5 {
            prop_assert!(got.coeff(k).eq_within(&expect.coeff(k)), "a={} k={}", a, k);
        }
    }
}

#[test]
fn binomial_expansion_matches_repeated_product() {
    let q = qp();
    let base = Series::one_plus_t_int(q, 1, TRUNC);
    let mut acc = Series::one(q, TRUNC);
    for a in 0..12u64 {
        let direct = Series::one_plus_t_pow(q, &q.int(a as i64), TRUNC);
        assert!(direct.defect(&acc).pass, "a = {a}");
        acc = acc.mul(&base);
    }
}

#[test]
fn log_coefficients() {
    let q = qp();
    let t = Series::log1p_t(q, TRUNC);
    for n in 1..TRUNC {
        let sign = if n % 2 == 1 { 1 } else { -1 };
        assert!(t.coeff(n).eq_within(&q.rat(sign, n)), "n = {n}");
    }
}

#[test]
fn t_powers_are_nabla_eigenvectors() {
    let q = qp();
    for k in 0..5 {
        let tk = Series::t_pow(q, k, TRUNC);
        assert!(tk.nabla().defect(&tk.scale_int(k)).pass, "k = {k}");
    }
}

#[test]
fn sigma_on_one_plus_t() {
    let q = qp();
    let f = Series::one_plus_t_int(q, 1, TRUNC);
    let a = q.int(7);
    assert!(f.sigma(&a).unwrap().defect(&Series::one_plus_t_pow(q, &a, TRUNC)).pass);
}
