use coordsim_core::osrb::*;
use coordsim_core::region::{AuxScheme, ChannelSpec, CondTable, Sizes};
use coordsim_core::rng::Stream;

/// `X1` uniform, `F1 = X1`, `X2` sees `X1` through an erasure channel.
fn erasure_setup(e: f64) -> (ChannelSpec, AuxScheme) {
    let qx = [0.5 * (1.0 - e), 0.0, 0.5 * e, 0.0, 0.5 * (1.0 - e), 0.5 * e];
    let ch = ChannelSpec::from_tables(&qx, 2, 3, vec![1.0; 6], 1, 1).unwrap();
    let s = Sizes { x1: 2, x2: 3, y1: 1, y2: 1 };
    let sch = AuxScheme::new(
        s,
        vec![2],
        vec![CondTable::deterministic(2, 2, |x| x).unwrap()],
        CondTable::repeated(4, &[1.0]).unwrap(),
        CondTable::repeated(6, &[1.0]).unwrap(),
    )
    .unwrap();
    (ch, sch)
}

/// `F ~ BSC(a)` of `X1`, `Y2 ~ BSC(b)` of `F`, nothing at terminal 2's input.
fn bsc_chain(a: f64, b: f64) -> (ChannelSpec, AuxScheme) {
    let s = Sizes { x1: 2, x2: 1, y1: 1, y2: 2 };
    let sch = AuxScheme::new(
        s,
        vec![2],
        vec![CondTable::new(2, 2, vec![1.0 - a, a, a, 1.0 - a]).unwrap()],
        CondTable::repeated(4, &[1.0]).unwrap(),
        CondTable::new(2, 2, vec![1.0 - b, b, b, 1.0 - b]).unwrap(),
    )
    .unwrap();
    let p = a * (1.0 - b) + (1.0 - a) * b;
    let ch = ChannelSpec::from_tables(&[0.5, 0.5], 2, 1, vec![1.0 - p, p, p, 1.0 - p], 1, 2).unwrap();
    (ch, sch)
}

fn index(v: BinValue) -> u64 {
    match v {
        BinValue::Index(i) => i,
        BinValue::Syndrome(_) => panic!("hashed family expected"),
    }
}

fn random_seq(n: usize, rng: &mut Stream) -> Vec<u32> {
    (0..n).map(|_| rng.below(2) as u32).collect()
}

#[test]
fn hashed_bins_pass_chi_square() {
    let (_, sch) = erasure_setup(0.4);
    let code = make_code(&sch, &CodeRates::new(0.0, vec![3.0 / 16.0], vec![0.0]).unwrap(), 16, 77).unwrap();
    assert_eq!(code.count(MapId::K(1)), Some(8));
    let mut rng = Stream::new(1, 0);
    let probes = 10_000;
    let mut hist = [0usize; 8];
    for _ in 0..probes {
        hist[index(code.bin(MapId::K(1), &[], &random_seq(16, &mut rng))) as usize] += 1;
    }
    let expect = probes as f64 / 8.0;
    let chi2: f64 = hist.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
    // 0.999 quantile of chi-square with 7 degrees of freedom
    assert!(chi2 < 24.32, "chi2 = {chi2}, {hist:?}");
}

#[test]
fn different_seeds_give_unrelated_assignments() {
    let (_, sch) = erasure_setup(0.4);
    let rates = CodeRates::new(0.0, vec![0.25], vec![0.0]).unwrap();
    let a = make_code(&sch, &rates, 16, 1).unwrap();
    let b = make_code(&sch, &rates, 16, 2).unwrap();
    let bins = a.count(MapId::K(1)).unwrap();
    assert_eq!(bins, 16);
    let mut rng = Stream::new(3, 0);
    let probes = 10_000;
    let same = (0..probes)
        .filter(|_| {
            let f = random_seq(16, &mut rng);
            a.bin(MapId::K(1), &[], &f) == b.bin(MapId::K(1), &[], &f)
        })
        .count();
    let frac = same as f64 / probes as f64;
    // expected 1/16 with standard deviation about 0.0024
    assert!((frac - 1.0 / bins as f64).abs() < 0.01, "overlap {frac}");
}

fn sw_error(rates: &CodeRates, n: usize, trials: usize) -> f64 {
    let (ch, sch) = erasure_setup(0.4);
    let model = ProtocolModel::new(&ch, &sch).unwrap();
    let code = make_code(&sch, rates, n, 31).unwrap();
    let mut rng = Stream::new(17, 0);
    let mut errors = 0;
    for _ in 0..trials {
        let f = random_seq(n, &mut rng);
        let x2: Vec<u32> = f.iter().map(|&v| if rng.uniform() < 0.4 { 2 } else { v }).collect();
        let bins = ObservedBins {
            b: code.bin(MapId::B(1), &[], &f),
            k: code.bin(MapId::K(1), &[], &f),
            omega: Some(code.bin(MapId::Omega, &[], &f)),
        };
        let d = sw_decode(&model, &code, 1, &bins, &SideInfo { x_other: &x2, prefix: &[] }, &TypicalityParams::default())
            .unwrap();
        if d.status.is_error() || d.estimate != f {
            errors += 1;
        }
    }
    errors as f64 / trials as f64
}

#[test]
fn sw_error_does_not_grow_with_any_bin_rate() {
    let (n, trials) = (24, 2000);
    let grid = [0.1, 0.3, 0.5, 0.7];
    let sweeps: [(&str, fn(f64) -> CodeRates); 3] = [
        ("R1", |r| CodeRates::new(0.05, vec![r], vec![0.05]).unwrap()),
        ("Rt1", |r| CodeRates::new(0.05, vec![0.05], vec![r]).unwrap()),
        ("R0", |r| CodeRates::new(r, vec![0.05], vec![0.05]).unwrap()),
    ];
    for (name, make) in sweeps {
        let errs: Vec<f64> = grid.iter().map(|&r| sw_error(&make(r), n, trials)).collect();
        for w in errs.windows(2) {
            // one-sided 95% test on the difference of two proportions
            let sd = ((w[0] * (1.0 - w[0]) + w[1] * (1.0 - w[1])) / trials as f64).sqrt();
            assert!(w[1] <= w[0] + 1.645 * sd + 1e-12, "{name}: {errs:?}");
        }
        assert!(errs[0] > errs[3] + 0.2, "{name}: {errs:?}");
    }
}

#[test]
fn fixed_b_stays_close_to_the_averaged_code() {
    // the interior point used by the acceptance suite, at n = 8
    let (ch, sch) = bsc_chain(0.3160193463236077, 0.2604800206475818);
    let model = ProtocolModel::new(&ch, &sch).unwrap();
    let code = make_code(&sch, &CodeRates::new(0.0, vec![1.0], vec![0.25]).unwrap(), 8, 1).unwrap();
    let averaged = exact_induced_pmf(&model, &code, &ExactOptions::default()).unwrap().tv_to_target.unwrap();
    let good = find_good_b(&model, &code, &ExactOptions::default(), 16, 1).unwrap();
    assert!(good.exhaustive);
    assert!(good.tv <= good.mean_tv);
    // pinning b gives up the averaging over shared bins; at this length the price
    // measured 2.36x for seed 1, so the factor allowed here is 3
    assert!(good.tv <= 3.0 * averaged, "{} vs {averaged}", good.tv);
}

#[test]
fn both_omega_modes_are_reported() {
    let (ch, sch) = bsc_chain(0.25, 0.1);
    let model = ProtocolModel::new(&ch, &sch).unwrap();
    let code = make_code(&sch, &CodeRates::new(0.5, vec![0.75], vec![0.25]).unwrap(), 6, 5).unwrap();
    let gap = omega_mode_gap(&model, &code, &ExactOptions::default()).unwrap();
    assert!((gap.gap - (gap.tv_exogenous - gap.tv_bin_of_f)).abs() < 1e-15);
    for tv in [gap.tv_exogenous, gap.tv_bin_of_f] {
        assert!((0.0..=1.0).contains(&tv));
    }
}

#[test]
fn monte_carlo_agrees_with_exact_mode() {
    let (ch, sch) = bsc_chain(0.25, 0.1);
    let model = ProtocolModel::new(&ch, &sch).unwrap();
    let code = make_code(&sch, &CodeRates::new(0.5, vec![0.75], vec![0.25]).unwrap(), 6, 5).unwrap();
    let b = vec![0u64];
    let exact = exact_induced_pmf(&model, &code, &ExactOptions { b_fixed: Some(b.clone()), ..Default::default() }).unwrap();
    let (mc, traces) = monte_carlo(&model, &code, &TypicalityParams::default(), 4000, 3, Some(&vec![BinValue::Index(0)])).unwrap();
    assert_eq!(traces.len(), 4000);
    let (e, m) = (exact.sw_error_rate[0], mc.sw_error_rate[0]);
    // binomial standard deviation is at most 0.008 at 4000 trials
    assert!((e - m).abs() < 0.035, "exact {e} vs sampled {m}");
    let (e, m) = (exact.empirical.unwrap().mean, mc.empirical.unwrap().mean);
    assert!((e - m).abs() < 0.02, "exact {e} vs sampled {m}");
}
