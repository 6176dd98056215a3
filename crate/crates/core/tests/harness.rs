use noma_core::channel::{ChannelKind, PowerMode};
use noma_core::schemes::Scheme;
use noma_core::sim::*;
use statrs::distribution::{ContinuousCDF, Normal};

fn q(x: f64) -> f64 {
    1.0 - Normal::new(0.0, 1.0).unwrap().cdf(x)
}

fn quick(scheme: Scheme, channel: ChannelKind) -> ScenarioConfig {
    let mut c = ScenarioConfig::new(scheme, channel);
    c.trials = 20;
    c.workers = Some(1);
    c
}

#[test]
fn minimal_file_gets_documented_defaults() {
    let c = ScenarioConfig::parse("schemes = [\"musa\"]\nchannel = \"tdla\"\n").unwrap();
    assert_eq!(c.trials, DEFAULT_TRIALS);
    assert_eq!(c.trials, 10_000);
    assert_eq!(c.rx_antennas, 2);
    assert_eq!(c.se, SpectralEfficiency::Quarter);
    assert_eq!(c.csi, CsiMode::Ideal);
    assert_eq!(c.power_mode, PowerMode::Interval { width_db: 2.0 });
    assert_eq!(c.receiver, ReceiverConfig::default());
    assert!(c.early_stop);
    let cfo = ScenarioConfig::parse("schemes = [\"pdma\"]\nchannel = \"awgn_cfo\"\n").unwrap();
    assert_eq!(cfo.csi, CsiMode::Mmse);
}

#[test]
fn scma_above_150_is_rejected_with_reason() {
    let err = ScenarioConfig::parse(
        "schemes = [\"scma\"]\nchannel = \"awgn\"\noverload_pct = [150, 300]\n",
    )
    .unwrap_err()
    .to_string();
    assert!(
        err.contains("SCMA") && err.contains("150%") && err.contains("300%"),
        "{err}"
    );
    assert!(ScenarioConfig::parse(
        "schemes = [\"scma\"]\nchannel = \"awgn\"\noverload_pct = [150]\n"
    )
    .is_ok());
}

#[test]
fn schema_errors_are_reported() {
    let err = ScenarioConfig::parse("schemes = [\"noma\"]\nchannel = \"awgn\"\n")
        .unwrap_err()
        .to_string();
    assert!(err.contains("scma, pdma, rdma, musa, pcbma, ofdm"), "{err}");
    assert!(ScenarioConfig::parse("schemes = [\"musa\"]\nchannel = \"rayleigh\"\n").is_err());
    assert!(
        ScenarioConfig::parse("schemes = [\"musa\"]\nchannel = \"awgn\"\nbogus = 1\n").is_err()
    );
    assert!(
        ScenarioConfig::parse("schemes = [\"musa\"]\nchannel = \"awgn\"\nse = \"1/3\"\n").is_err()
    );
    let err = ScenarioConfig::parse(
        "schemes = []\nchannel = \"awgn\"\noverload_pct = [110]\ntrials = 0\nrx_antennas = 4\n",
    )
    .unwrap_err()
    .to_string();
    for needle in ["schemes", "110", "trials", "rx_antennas"] {
        assert!(err.contains(needle), "{needle} missing from {err}");
    }
}

#[test]
fn resolved_config_roundtrips_through_toml() {
    let mut c = ScenarioConfig::new(Scheme::Pdma, ChannelKind::Bu);
    c.schemes.push(Scheme::Musa);
    c.snr_db = vec![-2.0, 0.5];
    c.overload_pct = vec![100, 300];
    c.se = SpectralEfficiency::Sixth;
    c.workers = Some(3);
    assert_eq!(ScenarioConfig::parse(&c.to_toml()).unwrap(), c);
}

#[test]
fn sweep_parsers() {
    assert_eq!(parse_snr_range("-4:0:2").unwrap(), vec![-4.0, -2.0, 0.0]);
    assert_eq!(parse_snr_range("0:1:0.1").unwrap().len(), 11);
    assert_eq!(parse_snr_range("3").unwrap(), vec![3.0]);
    assert!(parse_snr_range("1:0:1").is_err());
    assert!(parse_snr_range("a:b:c").is_err());
    assert_eq!(
        parse_overload_list("100, 150%,500").unwrap(),
        vec![100, 150, 500]
    );
    assert!(parse_overload_list("x").is_err());
}

#[test]
fn noiseless_single_user_never_errs() {
    for scheme in Scheme::ALL {
        let sim = Simulator::new(quick(scheme, ChannelKind::Tdla)).unwrap();
        let r = sim.run_point(scheme, 25, 60.0, 1).unwrap();
        assert_eq!(r.avg_bler(), 0.0, "{scheme}");
        assert_eq!(r.trials, 1);
    }
}

#[test]
fn trials_are_deterministic() {
    let sim = Simulator::new(quick(Scheme::Musa, ChannelKind::Tdla)).unwrap();
    let a = sim.run_trial(Scheme::Musa, 300, -2.0, 7).unwrap();
    assert_eq!(a, sim.run_trial(Scheme::Musa, 300, -2.0, 7).unwrap());
    assert_eq!(a.len(), 12);
}

#[test]
fn worker_count_does_not_change_results() {
    let mut c = quick(Scheme::Pdma, ChannelKind::AwgnCfo);
    c.snr_db = vec![-6.0, 0.0];
    c.overload_pct = vec![300];
    c.trials = 40;
    let one = Simulator::new(c.clone()).unwrap().run_sweep().unwrap();
    c.workers = Some(4);
    let four = Simulator::new(c).unwrap().run_sweep().unwrap();
    assert_eq!(csv_string(&one).unwrap(), csv_string(&four).unwrap());
}

#[test]
fn early_stop_needs_errors_and_minimum_trials() {
    let mut c = quick(Scheme::Musa, ChannelKind::Awgn);
    c.trials = 5000;
    let sim = Simulator::new(c).unwrap();
    // Every block fails at this SNR: stop at the 1000-trial floor.
    let r = sim.run_point(Scheme::Musa, 150, -30.0, 5000).unwrap();
    assert_eq!(r.trials, 1000);
    assert_eq!(r.avg_bler(), 1.0);
}

#[test]
fn stderr_follows_binomial_law() {
    let r = BlerRecord {
        scenario: "s".into(),
        scheme: Scheme::Musa,
        snr_db: 0.0,
        overload_pct: 50,
        per_user_bler: vec![0.2, 0.0],
        trials: 400,
        wall_time: 1.0,
    };
    assert!((r.stderr(0) - (0.2f64 * 0.8 / 400.0).sqrt()).abs() < 1e-15);
    let mut r4 = r.clone();
    r4.trials = 1600;
    assert!((r.stderr(0) / r4.stderr(0) - 2.0).abs() < 1e-12);
    assert_eq!(r.stderr(1), 0.0);
    assert!((r.avg_bler() - 0.1).abs() < 1e-15);
}

#[test]
fn csv_has_exact_header_and_roundtrips() {
    let mut c = quick(Scheme::Pcbma, ChannelKind::Bu);
    c.schemes.push(Scheme::Musa);
    c.snr_db = vec![-2.5, 0.0];
    c.overload_pct = vec![50];
    c.trials = 3;
    let sim = Simulator::new(c.clone()).unwrap();
    let recs = sim.run_sweep().unwrap();
    assert_eq!(recs.len(), 4);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    emit_csv(&recs, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "scenario,scheme,snr_db,overload_pct,user,bler,trials,stderr"
    );
    assert_eq!(lines.count(), 4 * 2);
    let back = parse_csv(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(back, recs);
    assert!(emit_csv(&[], &path).is_err());
    assert!(emit_csv(&recs, &dir.path().join("missing/out.csv")).is_err());

    let one = vec![recs[0].clone()];
    assert_eq!(
        csv_string(&one).unwrap().lines().count(),
        1 + one[0].num_users()
    );

    let m = dir.path().join("m.txt");
    emit_manifest(&c, &recs, &m).unwrap();
    let mt = std::fs::read_to_string(&m).unwrap();
    assert!(mt.contains(SNR_DEFINITION) && mt.contains("channel = \"bu\""));
}

#[test]
fn plot_clamps_zero_bler() {
    let recs: Vec<BlerRecord> = [(-4.0, 0.5), (-2.0, 0.05), (0.0, 0.0)]
        .iter()
        .map(|&(snr, b)| BlerRecord {
            scenario: "p".into(),
            scheme: Scheme::Musa,
            snr_db: snr,
            overload_pct: 150,
            per_user_bler: vec![b; 6],
            trials: 1000,
            wall_time: 0.0,
        })
        .collect();
    assert_eq!(plot_value(&recs[2]), 1e-4);
    let svg = render_svg(&recs, "t").unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert!(!svg.contains("NaN") && !svg.contains("inf"));
    // Lowest decade reaches the clamp value.
    assert!(svg.contains("1e-4"));
    assert_eq!(svg.matches("<circle").count(), 3);
    assert!(render_svg(&[], "t").is_err());
}

#[test]
fn uncoded_qpsk_matches_q_function_at_4db() {
    let (errs, bits) = uncoded_qpsk_ber(4.0, 100_000, 3).unwrap();
    let p = q((2.0 * 10f64.powf(0.4)).sqrt());
    assert!((p - 1.25e-2).abs() < 1e-4);
    let ber = errs as f64 / bits as f64;
    let sigma = (p * (1.0 - p) / bits as f64).sqrt();
    assert!((ber - p).abs() < 3.0 * sigma, "{ber} vs {p}");
}
