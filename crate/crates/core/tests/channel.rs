use noma_core::channel::*;
use noma_core::grid::{ResourceGrid, NUM_SUBCARRIERS};
use noma_core::ofdm::{OfdmModem, OfdmNumerology};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_grid(ns: usize, seed: u64) -> ResourceGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..ns * NUM_SUBCARRIERS)
        .map(|_| complex_gaussian(&mut rng, 1.0))
        .collect();
    ResourceGrid::from_vec(ns, data).unwrap()
}

#[test]
fn fading_has_unit_mean_power() {
    for kind in [ChannelKind::Tdla, ChannelKind::Bu] {
        let setup = ChannelSetup::new(kind, 2, PowerMode::Equal).unwrap();
        let mut acc = 0.0;
        let mut n = 0usize;
        for t in 0..500 {
            let r = setup.draw(2, 3, t).unwrap();
            for h in r.responses.iter().flatten() {
                acc += h.iter().map(|x| x.norm_sqr()).sum::<f64>();
                n += h.len();
            }
        }
        let mean = acc / n as f64;
        assert!((mean - 1.0).abs() < 0.05, "{kind}: {mean}");
    }
}

#[test]
fn realizations_are_reproducible_and_independent() {
    let setup = ChannelSetup::new(ChannelKind::Tdla, 2, PowerMode::interval_2db()).unwrap();
    let a = setup.draw(3, 9, 4).unwrap();
    assert_eq!(a, setup.draw(3, 9, 4).unwrap());
    assert_ne!(a.responses, setup.draw(3, 9, 5).unwrap().responses);
    assert_ne!(a.responses[0][0], a.responses[0][1]);
    // Drawing more users leaves the first users' channels unchanged.
    assert_eq!(setup.draw(5, 9, 4).unwrap().responses[..3], a.responses[..]);
}

#[test]
fn time_path_matches_frequency_path_for_integer_delays() {
    let num = OfdmNumerology::default();
    let ts = 1.0 / num.sample_rate();
    let text = format!(
        "name two\n0 0\n{} -3\n{} -6\n",
        2.0 * ts * 1e9,
        7.0 * ts * 1e9
    );
    let profile = PowerDelayProfile::parse(&text, "two").unwrap();
    let setup =
        ChannelSetup::with_profile(ChannelKind::Tdla, profile, 2, PowerMode::interval_2db())
            .unwrap();
    let real = setup.draw(2, 1, 0).unwrap();
    let tx = vec![random_grid(4, 1), random_grid(4, 2)];
    let modem = OfdmModem::new(num).unwrap();
    let f = apply_channel_freq(&tx, &real, 0.0, 1, 0).unwrap();
    let t = apply_channel_time(&tx, &real, &modem, 0.0, 1, 0).unwrap();
    for (a, b) in f.iter().zip(&t) {
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).norm() < 1e-9);
        }
    }
}

#[test]
fn noise_variance_per_element() {
    let setup = ChannelSetup::new(ChannelKind::Awgn, 1, PowerMode::Equal).unwrap();
    let real = setup.draw(1, 0, 0).unwrap();
    let tx = vec![ResourceGrid::zeros(64)];
    let y = apply_channel_freq(&tx, &real, 0.5, 0, 0).unwrap();
    let v = y[0].energy() / y[0].len() as f64;
    assert!((v - 0.5).abs() < 0.02, "{v}");
}

#[test]
fn genie_csi_includes_power_offset() {
    let setup = ChannelSetup::new(ChannelKind::Awgn, 2, PowerMode::interval_2db()).unwrap();
    let real = setup.draw(3, 2, 0).unwrap();
    let csi = genie_csi(&real);
    for (u, imp) in real.impairments.iter().enumerate() {
        let a = 10f64.powf(imp.power_offset_db / 20.0);
        assert!((csi[u][1][17] - Complex64::new(a, 0.0)).norm() < 1e-12);
    }
}

#[test]
fn cfo_scenario_draws_bounded_offsets() {
    let setup = ChannelSetup::new(ChannelKind::AwgnCfo, 1, PowerMode::Equal).unwrap();
    let mut seen = 0.0f64;
    for t in 0..200 {
        for imp in setup.draw(4, 5, t).unwrap().impairments {
            assert!(imp.cfo_hz.abs() <= 200.0);
            seen = seen.max(imp.cfo_hz.abs());
        }
    }
    assert!(seen > 150.0);
    let plain = ChannelSetup::new(ChannelKind::Awgn, 1, PowerMode::Equal).unwrap();
    assert!(plain
        .draw(4, 5, 0)
        .unwrap()
        .impairments
        .iter()
        .all(|i| i.cfo_hz == 0.0));
}

#[test]
fn mmse_estimate_error_matches_reported_variance() {
    let sigma2 = 0.1;
    let setup = ChannelSetup::new(ChannelKind::Tdla, 1, PowerMode::Equal).unwrap();
    let layout = PilotLayout::new(6, 3).unwrap();
    let est = MmseEstimator::new(
        &setup.profile,
        layout.clone(),
        sigma2,
        &OfdmNumerology::default(),
    )
    .unwrap();
    let mut err = vec![0.0; 6];
    let trials = 300;
    for t in 0..trials {
        let real = setup.draw(6, 8, t).unwrap();
        let tx: Vec<ResourceGrid> = (0..6).map(|u| layout.pilot_grid(u)).collect();
        let rx = apply_channel_freq(&tx, &real, sigma2, 8, t).unwrap();
        let e = est.estimate(&rx).unwrap();
        for u in 0..6 {
            err[u] += e.responses[u][0]
                .iter()
                .zip(&real.responses[u][0])
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                / NUM_SUBCARRIERS as f64;
        }
    }
    let e = est.estimate(&[ResourceGrid::zeros(1)]).unwrap();
    for u in 0..6 {
        let measured = err[u] / trials as f64;
        let reported = e.error_variance[u];
        assert!(
            (measured / reported - 1.0).abs() < 0.15,
            "user {u}: {measured} vs {reported}"
        );
    }
}

#[test]
fn noiseless_flat_estimate_is_exact() {
    let setup = ChannelSetup::new(ChannelKind::Awgn, 2, PowerMode::interval_2db()).unwrap();
    let layout = PilotLayout::new(4, 1).unwrap();
    let real = setup.draw(4, 1, 0).unwrap();
    let tx: Vec<ResourceGrid> = (0..4).map(|u| layout.pilot_grid(u)).collect();
    let rx = apply_channel_freq(&tx, &real, 0.0, 1, 0).unwrap();
    let e = mmse_channel_estimate(&rx, &layout, &setup.profile, 1e-9).unwrap();
    let g = genie_csi(&real);
    for u in 0..4 {
        for a in 0..2 {
            for s in 0..NUM_SUBCARRIERS {
                assert!((e.responses[u][a][s] - g[u][a][s]).norm() < 1e-6);
            }
        }
    }
}

#[test]
fn coherence_bandwidth_orders_profiles() {
    let num = OfdmNumerology::default();
    let bw = |kind| {
        let setup = ChannelSetup::new(kind, 1, PowerMode::Equal).unwrap();
        let resp: Vec<Vec<Complex64>> = (0..300)
            .map(|t| setup.draw(1, 2, t).unwrap().responses[0][0].clone())
            .collect();
        coherence_bandwidth(
            &empirical_frequency_correlation(&resp, 256),
            num.subcarrier_spacing(),
            0.5,
        )
    };
    let bu = bw(ChannelKind::Bu).expect("BU decorrelates within the band");
    let tdla = bw(ChannelKind::Tdla).unwrap_or(f64::INFINITY);
    assert!(bu < tdla, "{bu} vs {tdla}");
}

#[test]
fn bu_profile_values() {
    let bu = PowerDelayProfile::bu();
    assert_eq!(bu.delays.len(), 6);
    assert!((bu.max_delay() - 6.6e-6).abs() < 1e-15);
    // Closed form from the table: powers -3,0,-3,-5,-2,-4 dB.
    let p: Vec<f64> = [-3.0f64, 0.0, -3.0, -5.0, -2.0, -4.0]
        .iter()
        .map(|d| 10f64.powf(d / 10.0))
        .collect();
    let d = [0.0, 0.4e-6, 1.0e-6, 1.6e-6, 5.0e-6, 6.6e-6];
    assert!((rms_delay_spread(&d, &p) - bu.rms_delay_spread()).abs() < 1e-15);
    assert!(bu.rms_delay_spread() > 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cfo_preserves_energy(seed in any::<u64>(), cfo in -200.0f64..200.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Complex64> = (0..300).map(|_| Complex64::new(rng.gen(), rng.gen())).collect();
        let y = apply_cfo(&x, cfo, 8.5e6);
        let ex: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        let ey: f64 = y.iter().map(|v| v.norm_sqr()).sum();
        prop_assert!((ex - ey).abs() < 1e-9 * ex);
    }

    #[test]
    fn interval_offsets_stay_in_interval(seed in any::<u64>(), width in 0.0f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let o = draw_user_powers(20, PowerMode::Interval { width_db: width }, &mut rng).unwrap();
        prop_assert!(o.iter().all(|&x| x.abs() <= width / 2.0));
    }

    #[test]
    fn rescaling_hits_target_rms(target in 1e-9f64..2e-6) {
        let p = PowerDelayProfile::tdla().scaled_to_rms(target).unwrap();
        prop_assert!((p.rms_delay_spread() / target - 1.0).abs() < 1e-12);
    }
}
