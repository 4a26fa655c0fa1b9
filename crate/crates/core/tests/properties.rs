use coordsim_core::osrb::{exact_induced_pmf, make_code, CodeRates, ExactOptions, MapId, ProtocolModel};
use coordsim_core::prob::{entropy, entropy_of, mutual_information, total_variation, Axis, DenseJoint};
use coordsim_core::region::{
    assemble_joint, padding_embed, theorem1_eval, validate_t_r, AuxScheme, ChannelSpec, RatePoint, Sizes,
};
use coordsim_core::rng::Stream;
use proptest::prelude::*;

fn random_joint(sizes: &[usize], seed: u64) -> DenseJoint {
    let names = ["A", "B", "C", "D"];
    let axes: Vec<Axis> = sizes.iter().zip(names).map(|(&k, n)| Axis::indexed(n, k)).collect();
    let cells: usize = sizes.iter().product();
    let mut rng = Stream::new(seed, 0);
    // sprinkle exact zeros so the 0·log 0 paths are exercised
    let mass: Vec<f64> = rng.simplex(cells).into_iter().enumerate().map(|(i, p)| if i % 5 == 3 { 0.0 } else { p }).collect();
    DenseJoint::normalized(axes, mass).unwrap()
}

fn random_setup(seed: u64, rounds: usize) -> (ChannelSpec, AuxScheme) {
    let mut rng = Stream::new(seed, 1);
    let s = Sizes { x1: 2 + (seed % 2) as usize, x2: 2, y1: 2, y2: 1 + (seed % 3 == 0) as usize };
    let qx = rng.simplex(s.x1 * s.x2);
    let ch_tmp = ChannelSpec::from_tables(&qx, s.x1, s.x2, vec![1.0 / s.y() as f64; s.x() * s.y()], s.y1, s.y2).unwrap();
    let f_sizes: Vec<usize> = (0..rounds).map(|i| 2 + (i + seed as usize) % 2).collect();
    let scheme = AuxScheme::random(s, &f_sizes, &mut rng).unwrap();
    // the target is whatever the scheme induces, so T(r) holds by construction
    let ch = coordsim_core::region::induced_channel(ch_tmp.q_x(), &scheme).unwrap();
    (ch, scheme)
}

fn dims() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..4, 3..=4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chain_rule(d in dims(), seed in any::<u64>()) {
        let p = random_joint(&d, seed);
        let h_ab_c = entropy(&p, &["A", "B"], &["C"]).unwrap().bits;
        let h_a_c = entropy(&p, &["A"], &["C"]).unwrap().bits;
        let h_b_ac = entropy(&p, &["B"], &["A", "C"]).unwrap().bits;
        prop_assert!((h_ab_c - h_a_c - h_b_ac).abs() < 1e-10);
    }

    #[test]
    fn information_is_nonnegative_and_tv_bounded(d in dims(), s1 in any::<u64>(), s2 in any::<u64>()) {
        let p = random_joint(&d, s1);
        let q = random_joint(&d, s2);
        prop_assert!(mutual_information(&p, &["A"], &["B"], &["C"]).unwrap().bits >= -1e-9);
        prop_assert!(mutual_information(&p, &["A", "C"], &["B"], &[]).unwrap().bits >= -1e-9);
        let tv = total_variation(&p, &q).unwrap();
        prop_assert!((0.0..=1.0).contains(&tv));
        prop_assert!(total_variation(&p, &p).unwrap() == 0.0);
    }

    #[test]
    fn marginal_entropy_is_consistent(d in dims(), seed in any::<u64>()) {
        let p = random_joint(&d, seed);
        let m = p.marginal(&["C", "A"]).unwrap();
        let on_joint = entropy_of(&p, &["A", "C"]).unwrap();
        prop_assert!((m.entropy_bits() - on_joint).abs() < 1e-12);
    }

    /// `‖p_X p_{Y|X} − q_X p_{Y|X}‖ = ‖p_X − q_X‖ ≤ ‖p_X p_{Y|X} − q_X q_{Y|X}‖`.
    #[test]
    fn tv_of_a_shared_kernel(nx in 1usize..5, ny in 1usize..5, s in any::<[u64; 4]>()) {
        let mut r = Stream::new(s[0], 9);
        let px = r.simplex(nx);
        let qx = Stream::new(s[1], 9).simplex(nx);
        let k1: Vec<Vec<f64>> = (0..nx).map(|x| Stream::new(s[2], x as u64).simplex(ny)).collect();
        let k2: Vec<Vec<f64>> = (0..nx).map(|x| Stream::new(s[3], x as u64).simplex(ny)).collect();
        let axes = || vec![Axis::indexed("X", nx), Axis::indexed("Y", ny)];
        let build = |m: &[f64], k: &[Vec<f64>]| DenseJoint::from_fn(axes(), |i| m[i[0]] * k[i[0]][i[1]]).unwrap();
        let marg = |m: &[f64]| DenseJoint::new(vec![Axis::indexed("X", nx)], m.to_vec()).unwrap();
        let tv_x = total_variation(&marg(&px), &marg(&qx)).unwrap();
        let shared = total_variation(&build(&px, &k1), &build(&qx, &k1)).unwrap();
        let split = total_variation(&build(&px, &k1), &build(&qx, &k2)).unwrap();
        prop_assert!((shared - tv_x).abs() < 1e-12);
        prop_assert!(tv_x <= split + 1e-12);
    }

    #[test]
    fn region_right_hand_sides_are_ordered(seed in any::<u64>(), r in 1usize..4) {
        let (ch, sch) = random_setup(seed, r);
        let joint = assemble_joint(&ch, &sch).unwrap();
        let e = theorem1_eval(&joint).unwrap();
        prop_assert!(e.rhs[2] >= e.rhs[0] - 1e-12);
        prop_assert!(e.rhs[3] >= e.rhs[0] + e.rhs[1] - 1e-12);
    }

    #[test]
    fn membership_is_monotone_and_exchange_holds(
        seed in any::<u64>(),
        p in prop::array::uniform3(0.0f64..3.0),
        bump in prop::array::uniform3(0.0f64..1.0),
        frac in 0.0f64..=1.0,
    ) {
        let (ch, sch) = random_setup(seed, 2);
        let e = theorem1_eval(&assemble_joint(&ch, &sch).unwrap()).unwrap();
        let pt = RatePoint::new(p[0], p[1], p[2]).unwrap();
        if e.contains(&pt).member {
            let up = RatePoint::new(p[0] + bump[0], p[1] + bump[1], p[2] + bump[2]).unwrap();
            prop_assert!(e.contains(&up).member);
            let a = frac * p[0];
            let moved = RatePoint::new(p[0] - a, p[1] + a, p[2]).unwrap();
            prop_assert!(e.contains(&moved).member);
        }
    }

    #[test]
    fn padding_keeps_validity_and_rates(seed in any::<u64>(), r in 1usize..3) {
        let (ch, sch) = random_setup(seed, r);
        let padded = padding_embed(&sch);
        let j0 = assemble_joint(&ch, &sch).unwrap();
        let j1 = assemble_joint(&ch, &padded).unwrap();
        prop_assert!(validate_t_r(&ch, &j1, 1e-9).unwrap().pass);
        let (a, b) = (theorem1_eval(&j0).unwrap(), theorem1_eval(&j1).unwrap());
        for k in [0, 1, 3] {
            prop_assert!((a.rhs[k] - b.rhs[k]).abs() < 1e-10);
        }
        prop_assert!((b.rhs[2] - b.rhs[0]).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bins_are_in_range_and_deterministic(seed in any::<u64>(), n in 1usize..20, r in prop::array::uniform3(0.0f64..2.0)) {
        let (_, sch) = random_setup(seed, 2);
        let rates = CodeRates::new(r[0], vec![r[1], r[2]], vec![r[2], r[0]]).unwrap();
        let a = make_code(&sch, &rates, n, seed).unwrap();
        let b = make_code(&sch, &rates, n, seed).unwrap();
        let mut rng = Stream::new(seed, 5);
        let f: Vec<u32> = (0..n).map(|_| rng.below(2) as u32).collect();
        let prefix: Vec<u32> = (0..n).map(|_| rng.below(sch.f_sizes()[0] as u64) as u32).collect();
        for id in [MapId::Omega, MapId::B(1), MapId::K(1)] {
            let v = a.bin(id, &[], &f);
            prop_assert!(a.in_range(id, &v));
            prop_assert_eq!(v, b.bin(id, &[], &f));
        }
        for id in [MapId::B(2), MapId::K(2)] {
            let v = a.bin(id, &prefix, &f);
            prop_assert!(a.in_range(id, &v));
        }
    }

    #[test]
    fn exact_mode_conserves_probability(seed in any::<u64>(), n in 1usize..5, r in prop::array::uniform3(0.0f64..1.5)) {
        let (ch, sch) = random_setup(seed, 1 + (seed % 2) as usize);
        let model = ProtocolModel::new(&ch, &sch).unwrap();
        let rounds = sch.rounds();
        let rates = CodeRates::new(r[0], vec![r[1]; rounds], vec![r[2]; rounds]).unwrap();
        let code = make_code(&sch, &rates, n, seed).unwrap();
        let res = exact_induced_pmf(&model, &code, &ExactOptions::default()).unwrap();
        prop_assert!((res.total_mass.unwrap() - 1.0).abs() < 1e-9);
        let tv = res.tv_to_target.unwrap();
        prop_assert!((0.0..=1.0).contains(&tv));
        prop_assert!(res.sw_error_rate.iter().chain(&res.decode_failure_rate).all(|e| (0.0..=1.0).contains(e)));
        prop_assert_eq!(res, exact_induced_pmf(&model, &code, &ExactOptions::default()).unwrap());
    }
}
