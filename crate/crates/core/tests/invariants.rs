use ipslab_core::harness::{
    exact_upower64_acceptance, exact_usquare_acceptance, exhaustive_tape_detection, TrialPlan,
};
use ipslab_core::langspace::{dima2_member, is_positive_power_of_64, is_positive_square};
use ipslab_core::protocols::{expected_membership, ProtocolContext, ProtocolId};
use ipslab_core::provers::{cheat_catalog, ProverSpec};
use ipslab_core::runtime::{Decision, WalkMode};
use num_rational::BigRational;
use proptest::prelude::*;

fn unary(n: u64) -> Vec<u8> {
    vec![b'a'; n as usize]
}

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

/// Largest exact acceptance any finite catalog certificate reaches on `a^n`.
fn worst_finite_cheat(protocol: ProtocolId, n: u64) -> BigRational {
    let input = unary(n);
    cheat_catalog(protocol, &input)
        .iter()
        .filter_map(|p| p.finite_certificate(protocol, &input).unwrap())
        .map(|y| match protocol {
            ProtocolId::Usquare => exact_usquare_acceptance(n, &y, WalkMode::Calibrated),
            _ => exact_upower64_acceptance(n, &y, WalkMode::Calibrated),
        })
        .max()
        .unwrap_or_else(|| ratio(0, 1))
}

#[test]
fn finite_usquare_cheats_reject_three_sixteenths() {
    for n in (2..=400u64).filter(|&n| !is_positive_square(n)) {
        let worst = worst_finite_cheat(ProtocolId::Usquare, n);
        assert!(worst <= ratio(13, 16), "n = {n}: {worst}");
    }
}

#[test]
fn finite_upower64_cheats_reject_a_third() {
    let sizes = (2..=300u64).chain([4031, 4032, 4033, 4095, 4097, 4160, 262_143, 262_145]);
    for n in sizes.filter(|&n| !is_positive_power_of_64(n)) {
        let worst = worst_finite_cheat(ProtocolId::Upower64, n);
        assert!(worst < ratio(67, 100), "n = {n}: {worst}");
    }
}

#[test]
fn honest_certificates_are_always_accepted() {
    for m in 1..=40u64 {
        let n = m * m;
        let y = ProverSpec::Honest
            .finite_certificate(ProtocolId::Usquare, &unary(n))
            .unwrap()
            .unwrap();
        assert_eq!(
            exact_usquare_acceptance(n, &y, WalkMode::Calibrated),
            ratio(1, 1),
            "n = {n}"
        );
    }
    let y = ProverSpec::Honest
        .finite_certificate(ProtocolId::Upower64, &unary(4096))
        .unwrap()
        .unwrap();
    assert_eq!(
        exact_upower64_acceptance(4096, &y, WalkMode::Calibrated),
        ratio(1, 1)
    );
}

#[test]
fn tape_tampering_detected_with_q_minus_one_over_q() {
    for word in [&b"a"[..], b"b", b"ab", b"ba"] {
        // q must exceed twice the alphabet size
        let moduli: &[u64] = if word.len() == 1 { &[5, 7] } else { &[5] };
        for &q in moduli {
            for strategy in cheat_catalog(ProtocolId::SignedTape, word) {
                let d = exhaustive_tape_detection(word, q, &strategy).unwrap();
                let bound = ratio(q as i64 - 1, q as i64);
                let label = format!("{word:?} q={q} {strategy:?}");
                assert!(d >= bound, "{label}: {d}");
                if word.len() == 2 {
                    assert_eq!(d, bound, "{label}");
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn honest_dima2_accepts_on_every_path(k in 1u32..=2, seed in any::<u64>()) {
        let w = dima2_member(k);
        let plan = TrialPlan::new(ProtocolId::Dima2, w, ProverSpec::Honest, ProtocolContext::default());
        let o = plan.run_one(seed, 0).unwrap();
        prop_assert_eq!(o.decision, Decision::Accept);
        prop_assert!(o.sweeping_ok);
    }

    #[test]
    fn usquare_members_accept_on_every_path(m in 1u64..=12, seed in any::<u64>()) {
        let plan = TrialPlan::new(ProtocolId::Usquare, unary(m * m), ProverSpec::Honest, ProtocolContext::default());
        prop_assert_eq!(plan.run_one(seed, 0).unwrap().decision, Decision::Accept);
    }

    #[test]
    fn cheats_never_win_on_short_non_squares(n in 2u64..=30, seed in any::<u64>()) {
        prop_assume!(!is_positive_square(n));
        let input = unary(n);
        prop_assert_eq!(expected_membership(ProtocolId::Usquare, &input, None).unwrap(), Some(false));
        // an accept is possible, but only through the length-checking walk
        for p in cheat_catalog(ProtocolId::Usquare, &input) {
            let finite = p.finite_certificate(ProtocolId::Usquare, &input).unwrap();
            let plan = TrialPlan::new(ProtocolId::Usquare, input.clone(), p, ProtocolContext::default())
                .with_budget(ipslab_core::runtime::ResourceBudget::with_steps(1 << 20));
            let o = plan.run_one(seed, 0).unwrap();
            if let (Some(y), Decision::Accept) = (finite, o.decision) {
                prop_assert!(exact_usquare_acceptance(n, &y, WalkMode::Calibrated) > ratio(0, 1));
            }
        }
    }
}
