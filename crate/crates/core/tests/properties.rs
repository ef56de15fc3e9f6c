use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use turbo_bec::codec::{detect_stopping_set, exhaustive_decode, peel_decode, ReceivedWord, TurboCode};
use turbo_bec::density::{coding_rate, puncture_fraction_for_rate, punctured_rate, DegreeProfile};
use turbo_bec::erasure::{ErasureAnalysis, PuncturePattern};
use turbo_bec::peg::Interleaver;
use turbo_bec::trellis::RscSpec;

fn analysis(code: &str) -> ErasureAnalysis {
    ErasureAnalysis::new(code.parse::<RscSpec>().unwrap()).unwrap()
}

fn profile_strategy() -> impl Strategy<Value = DegreeProfile> {
    prop::collection::vec(0.0f64..1.0, 11).prop_filter_map("all-zero weights", |w| {
        if w.iter().sum::<f64>() < 1e-3 {
            return None;
        }
        DegreeProfile::normalized((2..=12).zip(w)).ok()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transition_matrices_are_row_stochastic(p in 0.0f64..=1.0, q in 0.0f64..=1.0, code in prop::sample::select(vec!["1,5/7", "1,15/13", "1,17/15"])) {
        let a = analysis(code);
        for m in [a.forward_matrix(), a.backward_matrix()] {
            let e = m.eval(p, q);
            prop_assert!(e.max_row_sum_error() < 1e-12);
            for i in 0..e.dim() {
                prop_assert!(e.row(i).iter().all(|&x| x >= -1e-15));
            }
        }
    }

    #[test]
    fn entries_are_bilinear(p in 0.0f64..=1.0, q in 0.0f64..=1.0, p2 in 0.0f64..=1.0, t in 0.0f64..=1.0) {
        // Affine in p along a line at fixed q.
        let a = analysis("1,5/7");
        let m = a.forward_matrix();
        let pm = t * p + (1.0 - t) * p2;
        let (e1, e2, em) = (m.eval(p, q), m.eval(p2, q), m.eval(pm, q));
        for i in 0..m.dim() {
            for j in 0..m.dim() {
                let lin = t * e1.get(i, j) + (1.0 - t) * e2.get(i, j);
                prop_assert!((em.get(i, j) - lin).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn extrinsic_probability_is_monotone(p in 0.01f64..0.99, q in 0.01f64..0.99, dp in 0.0f64..0.2, dq in 0.0f64..0.2, x in prop::sample::select(vec!["1", "1,0", "1,1,0", "1,0,0,0,1,0"])) {
        let a = analysis("1,5/7");
        let x: PuncturePattern = x.parse().unwrap();
        let base = a.punctured_extrinsic_probability(p, q, &x).unwrap();
        let more_p = a.punctured_extrinsic_probability((p + dp).min(1.0), q, &x).unwrap();
        let more_q = a.punctured_extrinsic_probability(p, (q + dq).min(1.0), &x).unwrap();
        prop_assert!(more_p >= base - 1e-9, "p: {base} -> {more_p}");
        prop_assert!(more_q >= base - 1e-9, "q: {base} -> {more_q}");
    }

    #[test]
    fn rate_round_trip(profile in profile_strategy(), target in 0.2f64..0.6) {
        match puncture_fraction_for_rate(&profile, 0.5, target) {
            Ok(phi) => {
                let rho = punctured_rate(0.5, phi).unwrap();
                prop_assert!((coding_rate(&profile, rho) - target).abs() < 1e-9);
            }
            Err(turbo_bec::Error::InfeasibleRate { .. }) => {
                // Only rates below the unpunctured rate or above the all-punctured limit are refused.
                prop_assert!(target < 1.0 / (1.0 + profile.average_degree()) + 1e-9 || target > 0.5);
            }
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn profile_text_round_trip(profile in profile_strategy()) {
        let back: DegreeProfile = profile.to_string().parse().unwrap();
        prop_assert_eq!(back, profile);
    }

    #[test]
    fn pattern_text_round_trip(bits in prop::collection::vec(0u8..=1, 1..20)) {
        prop_assume!(bits.contains(&1));
        let x = PuncturePattern::new(bits).unwrap();
        prop_assert_eq!(x.to_string().parse::<PuncturePattern>().unwrap(), x);
    }

    #[test]
    fn degree_counts_sum_to_length(profile in profile_strategy(), k in 1usize..5000) {
        let counts = profile.degree_counts(k);
        prop_assert_eq!(counts.iter().map(|&(_, n)| n).sum::<usize>(), k);
        for (d, n) in counts {
            prop_assert!((n as f64 - profile.fraction(d) * k as f64).abs() < 1.0);
        }
    }

    #[test]
    fn nested_erasures_resolve_less(seed in any::<u64>()) {
        // Erasing more symbols never lets the peeling decoder resolve more bits.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.gen_range(4..40);
        let degrees: Vec<usize> = (0..k).map(|_| rng.gen_range(2..=4)).collect();
        let mut perm: Vec<usize> = (0..degrees.iter().sum()).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
        let code = TurboCode::new("1,5/7".parse().unwrap(), degrees, Interleaver::new(perm).unwrap(), "1,0".parse().unwrap()).unwrap();
        let info: Vec<u8> = (0..k).map(|_| rng.gen_range(0..=1)).collect();
        let cw = code.encode(&info).unwrap();
        let mut light = ReceivedWord::clean(&cw);
        for s in light.systematic.iter_mut().chain(light.parity.iter_mut()) {
            if rng.gen_bool(0.3) {
                *s = None;
            }
        }
        let mut heavy = light.clone();
        for s in heavy.systematic.iter_mut().chain(heavy.parity.iter_mut()) {
            if rng.gen_bool(0.3) {
                *s = None;
            }
        }
        let a = peel_decode(&code, &light, 200).unwrap();
        let b = peel_decode(&code, &heavy, 200).unwrap();
        for (i, (x, y)) in a.decoded.iter().zip(&b.decoded).enumerate() {
            if y.is_some() {
                prop_assert_eq!(*x, *y, "bit {} resolved only under heavier erasure", i);
            }
            prop_assert!(x.is_none_or(|v| v == info[i]));
        }
    }
}

#[test]
fn two_bit_stopping_set() {
    // Trellis inputs a, a, b, b with only the last parity bit received:
    // from an unknown state one parity bit cannot separate the inputs.
    let code = TurboCode::new("1,5/7".parse().unwrap(), vec![2, 2], Interleaver::identity(4), PuncturePattern::unpunctured(1)).unwrap();
    let cw = code.encode(&[1, 0]).unwrap();
    let mut rx = ReceivedWord::clean(&cw);
    rx.systematic = vec![None, None];
    for s in &mut rx.parity[..3] {
        *s = None;
    }
    let peeled = peel_decode(&code, &rx, 200).unwrap();
    assert!(!peeled.resolved_all);
    let set = detect_stopping_set(&code, &peeled).unwrap();
    assert_eq!(set.bits, vec![0, 1]);
    assert_eq!(set.degrees, vec![2, 2]);
    assert_eq!(set.steps, vec![0, 1, 2, 3]);
    // Two information words share the received parity bit.
    assert!(!exhaustive_decode(&code, &rx).unwrap().resolved_all);
}
