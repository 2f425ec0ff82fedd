use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use robba::characters::TriangulineParameter;
use robba::p1model::*;
use robba::phigamma::reference_module;
use robba::config::RunConfig;
use robba::{Padic, Qp};

const TRUNC: i64 = 24;

fn qp() -> Qp {
    Qp::new(5, 30).unwrap()
}

fn param(name: &str) -> TriangulineParameter {
    TriangulineParameter::canonical(qp()).into_iter().find(|(n, _)| *n == name).unwrap().1
}

fn gen_strategy() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("w".to_string()),
        (-20i64..20).prop_map(|b| format!("u({b})")),
        (1i64..30).prop_filter("unit", |a| a % 5 != 0).prop_map(|a| format!("t({a})")),
        (1i64..30).prop_filter("unit", |a| a % 5 != 0).prop_map(|a| format!("c(-{a})")),
    ]
}

fn word_strategy() -> impl Strategy<Value = String> {
    prop::collection::vec(gen_strategy(), 1..5).prop_map(|v| v.join(";"))
}

fn section(seed: u64) -> PointSection {
    let (d, tw) = e1_line_context(&param("cris"));
    random_point_section(&d, &tw, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn words_print_and_parse(w in word_strategy()) {
        let g = parse_word(qp(), &w).unwrap();
        prop_assert_eq!(word_to_string(&g), w);
    }

    /// Acting by a word letter by letter equals acting by its matrix.
    #[test]
    fn point_action_is_a_homomorphism(seed in any::<u64>(), w in word_strategy()) {
        let q = qp();
        let word = parse_word(q, &w).unwrap();
        let sec = section(seed);
        let by_letters = sec.act_word(&word).unwrap().pair(TRUNC).unwrap();
        let by_matrix = sec.act_matrix(&word_matrix(q, &word)).unwrap().pair(TRUNC).unwrap();
        prop_assert!(by_letters.defect(&by_matrix).pass);
    }

    /// Closed-form series actions of w, center and torus match the point model.
    #[test]
    fn series_action_matches_points(seed in any::<u64>(), g in gen_strategy().prop_filter("closed form", |g| !g.starts_with('u'))) {
        let q = qp();
        let gen = parse_word(q, &g).unwrap().remove(0);
        // series pairs carry no central twist
        let (d, _) = e1_line_context(&param("cris"));
        let sec = random_point_section(&d, &robba::characters::Character::trivial(q), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let lhs = sec.pair(TRUNC).unwrap().act(&gen).unwrap();
        let rhs = sec.act(&gen).unwrap().pair(TRUNC).unwrap();
        prop_assert!(lhs.defect(&rhs).pass);
    }

    #[test]
    fn relations_hold(seed in any::<u64>(), a in 1i64..50, a2 in 1i64..50, b in -30i64..30, b1 in -30i64..30, b2 in -30i64..30) {
        prop_assume!(a % 5 != 0 && a2 % 5 != 0);
        let q = qp();
        let sec = section(seed);
        let (a, a2, b, b1, b2): (Padic, Padic, Padic, Padic, Padic) = (q.int(a), q.int(a2), q.int(b), q.int(b1), q.int(b2));
        for (name, d) in relation_checks(&sec, &a, &a2, &b, &b1, &b2, TRUNC).unwrap() {
            prop_assert!(d.pass, "{}", name);
        }
    }
}

#[test]
fn inverse_word_identity_on_canonical_parameters() {
    for (name, s) in TriangulineParameter::canonical(qp()) {
        let r = weyl_word_identity(&s, TRUNC).unwrap();
        assert!(r.pass(), "{name}: {}", r.to_json());
    }
}

#[test]
fn unsupported_generators_are_rejected() {
    let q = qp();
    assert!(parse_word(q, "u(1/5)").is_err());
    assert!(parse_word(q, "t(5)").is_err());
    assert!(parse_word(q, "x(1)").is_err());
}

#[test]
fn uplus_agrees_with_difference_quotients() {
    let cfg = RunConfig::default();
    let s = param("cris");
    let tri = reference_module(&s, &cfg).unwrap();
    let (d, tw) = e1_line_context(&s);
    for seed in 0..3 {
        let sec = random_point_section(&d, &tw, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        for n in [2, 3, 4] {
            let r = uplus_agreement(&tri, &sec, n, cfg.trunc).unwrap();
            assert!(r.pass, "seed {seed}: {}", r.to_json());
        }
    }
}

#[test]
fn section_check_flags_incompatible_pairs() {
    let cfg = RunConfig::default();
    let sec = section(11).pair(cfg.trunc).unwrap();
    assert!(section_check(&sec, &cfg).unwrap().pass);
    let mut bad = sec.clone();
    bad.z2 = bad.z2.add(&robba::Series::one_plus_t_int(qp(), 1, cfg.trunc));
    assert!(!section_check(&bad, &cfg).unwrap().pass);
}
