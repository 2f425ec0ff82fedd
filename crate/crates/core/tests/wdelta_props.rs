use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use robba::characters::Character;
use robba::distribution::{duality_sides, LocalDist};
use robba::verify::{random_measure, sample_characters};
use robba::Qp;

const LEVEL: u32 = 2;
const MOMENTS: usize = 8;

fn qp() -> Qp {
    Qp::new(5, 30).unwrap()
}

fn characters() -> Vec<Character> {
    sample_characters(qp())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn involution(seed in any::<u64>(), which in 0usize..5) {
        let d = &characters()[which];
        let mu = random_measure(qp(), LEVEL, MOMENTS, &mut ChaCha8Rng::seed_from_u64(seed));
        let back = mu.w_delta(d).unwrap().w_delta(d).unwrap();
        prop_assert!(back.defect(&mu).pass);
    }

    #[test]
    fn sigma_equivariance(seed in any::<u64>(), which in 0usize..5, a in 1i64..500) {
        prop_assume!(a % 5 != 0);
        let q = qp();
        let d = &characters()[which];
        let a = q.int(a);
        let mu = random_measure(q, LEVEL, MOMENTS, &mut ChaCha8Rng::seed_from_u64(seed));
        let lhs = mu.sigma(&a).unwrap().w_delta(d).unwrap();
        let rhs = mu.w_delta(d).unwrap().sigma(&a.inv().unwrap()).unwrap().scale(&d.eval(&a).unwrap());
        prop_assert!(lhs.defect(&rhs).pass);
    }

    #[test]
    fn dirac_masses(a in 1i64..10_000, which in 0usize..5) {
        prop_assume!(a % 5 != 0);
        let q = qp();
        let d = &characters()[which];
        let a = q.int(a);
        let lhs = LocalDist::dirac(q, &a, LEVEL, MOMENTS).w_delta(d).unwrap();
        let rhs = LocalDist::dirac(q, &a.inv().unwrap(), LEVEL, MOMENTS).scale(&d.eval(&a).unwrap());
        prop_assert!(lhs.defect(&rhs).pass);
    }

    #[test]
    fn duality(seed in any::<u64>(), which in 0usize..5, c0 in -50i64..50, c1 in -50i64..50, c2 in -50i64..50) {
        let q = qp();
        let d = &characters()[which];
        let mu = random_measure(q, LEVEL, MOMENTS, &mut ChaCha8Rng::seed_from_u64(seed));
        let (l, r) = duality_sides(&mu, d, &[q.int(c0), q.int(c1), q.int(c2)]).unwrap();
        prop_assert!(l.eq_within(&r));
    }
}

/// A wrong normalization of w_δ must be caught.
#[test]
fn negative_control_scaled_output() {
    let q = qp();
    let wrong = q.int(6);
    let mut caught = 0;
    for seed in 0..20 {
        let mu = random_measure(q, LEVEL, MOMENTS, &mut ChaCha8Rng::seed_from_u64(seed));
        for d in characters() {
            let good = mu.w_delta(&d).unwrap();
            let bad = good.scale(&wrong);
            if !bad.w_delta(&d).unwrap().defect(&mu).pass {
                caught += 1;
            }
        }
    }
    assert_eq!(caught, 100);
}

#[test]
fn restriction_to_units_is_idempotent() {
    let mu = random_measure(qp(), LEVEL, MOMENTS, &mut ChaCha8Rng::seed_from_u64(3));
    let r = mu.restrict_units();
    assert!(r.is_unit_supported());
    assert!(r.restrict_units().defect(&r).pass);
}
