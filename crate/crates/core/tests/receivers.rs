use nalgebra::{DMatrix, DVector};
use noma_core::channel::{
    apply_channel_freq, complex_gaussian, genie_csi, ChannelKind, ChannelSetup, PowerMode,
};
use noma_core::grid::ResourceGrid;
use noma_core::polar::{polar_encode, PolarCodeConfig, SclDecoder};
use noma_core::receiver::*;
use noma_core::schemes::{build_users, modulate_user, Scheme, SignatureTables, UserTxConfig};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_signatures(users: usize, dim: usize, seed: u64) -> Vec<Vec<Complex64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..users)
        .map(|_| (0..dim).map(|_| complex_gaussian(&mut rng, 1.0)).collect())
        .collect()
}

/// SINR of `target` by explicit inversion of the interference-plus-noise covariance.
fn sinr_oracle(sigs: &[Vec<Complex64>], sigma2: f64, target: usize) -> f64 {
    let d = sigs[0].len();
    let mut r = DMatrix::<Complex64>::identity(d, d) * Complex64::new(sigma2, 0.0);
    for (u, s) in sigs.iter().enumerate() {
        if u != target {
            let v = DVector::from_column_slice(s);
            r += &v * v.adjoint();
        }
    }
    let s = DVector::from_column_slice(&sigs[target]);
    let inv = r.try_inverse().unwrap();
    (s.adjoint() * inv * &s)[(0, 0)].re
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mmse_sinr_matches_matrix_inverse(seed in any::<u64>(), users in 1usize..13, dim in 1usize..9, snr_db in -10.0f64..30.0) {
        let sigs = random_signatures(users, dim, seed);
        let sigma2 = 10f64.powf(-snr_db / 10.0);
        for t in 0..users {
            let f = build_mmse(&sigs, sigma2, t).unwrap();
            let o = sinr_oracle(&sigs, sigma2, t);
            prop_assert!((f.sinr - o).abs() <= 1e-9 * o.max(1.0), "{} vs {}", f.sinr, o);
        }
    }

    #[test]
    fn cancellation_update_matches_fresh_filter(seed in any::<u64>(), users in 2usize..10, snr_db in -5.0f64..20.0) {
        // The rank-one downdate used by SIC: after removing user c,
        // t_u' = t_u + t_c (t_cᴴ s_u)/(1 - μ_c) and μ_u' = μ_u + |t_cᴴ s_u|²/(1 - μ_c).
        let sigs = random_signatures(users, 4, seed);
        let sigma2 = 10f64.powf(-snr_db / 10.0);
        let c = 0;
        let fc = build_mmse(&sigs, sigma2, c).unwrap();
        let rest: Vec<Vec<Complex64>> = sigs[1..].to_vec();
        for u in 1..users {
            let fu = build_mmse(&sigs, sigma2, u).unwrap();
            let beta: Complex64 = fc.weights.iter().zip(&sigs[u]).map(|(a, b)| a.conj() * b).sum();
            let denom = 1.0 - fc.gain;
            let fresh = build_mmse(&rest, sigma2, u - 1).unwrap();
            for (i, w) in fresh.weights.iter().enumerate() {
                let upd = fu.weights[i] + fc.weights[i] * beta / denom;
                prop_assert!((upd - w).norm() < 1e-8 * (1.0 + w.norm()));
            }
            prop_assert!((fu.gain + beta.norm_sqr() / denom - fresh.gain).abs() < 1e-9);
        }
    }
}

#[test]
fn matched_filter_sinr_oracle() {
    let sigs = random_signatures(5, 4, 2);
    let sigma2 = 0.3;
    let f = build_mf(&sigs, sigma2, 1).unwrap();
    let s = &sigs[1];
    let n2: f64 = s.iter().map(|x| x.norm_sqr()).sum();
    let mut interf = 0.0;
    for (u, o) in sigs.iter().enumerate() {
        if u != 1 {
            let c: Complex64 = s.iter().zip(o).map(|(a, b)| a.conj() * b).sum();
            interf += c.norm_sqr();
        }
    }
    let oracle = n2 * n2 / (interf + sigma2 * n2);
    assert!((f.sinr - oracle).abs() < 1e-12 * oracle);
}

fn exhaustive_posteriors(obs: &[Vec<Complex64>], users: &[MpaUser], sigma2: f64) -> Vec<Vec<f64>> {
    let j = users[0].codewords.len();
    let nu = users.len();
    let total = j.pow(nu as u32);
    let mut logp = Vec::with_capacity(total);
    for c in 0..total {
        let choice: Vec<usize> = (0..nu).map(|u| (c / j.pow(u as u32)) % j).collect();
        let mut d = 0.0;
        for (re, o) in obs.iter().enumerate() {
            for (a, y) in o.iter().enumerate() {
                let mut s = Complex64::new(0.0, 0.0);
                for (u, user) in users.iter().enumerate() {
                    if let Some(p) = user.resources.iter().position(|&r| r == re) {
                        s += user.codewords[choice[u]][p][a];
                    }
                }
                d += (y - s).norm_sqr();
            }
        }
        logp.push(-d / sigma2);
    }
    let m = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut post = vec![vec![0.0; j]; nu];
    for (c, lp) in logp.iter().enumerate() {
        let p = (lp - m).exp();
        for (u, row) in post.iter_mut().enumerate() {
            row[(c / j.pow(u as u32)) % j] += p;
        }
    }
    for row in &mut post {
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= s);
    }
    post
}

fn random_users(
    supports: &[Vec<usize>],
    j: usize,
    num_rx: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<MpaUser> {
    supports
        .iter()
        .map(|s| MpaUser {
            resources: s.clone(),
            codewords: (0..j)
                .map(|_| {
                    s.iter()
                        .map(|_| (0..num_rx).map(|_| complex_gaussian(rng, 1.0)).collect())
                        .collect()
                })
                .collect(),
        })
        .collect()
}

#[test]
fn mpa_equals_enumeration_on_tree() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let users = random_users(&[vec![0, 1], vec![1]], 4, 2, &mut rng);
        let obs: Vec<Vec<Complex64>> = (0..2)
            .map(|_| (0..2).map(|_| complex_gaussian(&mut rng, 2.0)).collect())
            .collect();
        let sigma2 = rng.gen_range(0.3..3.0);
        let cfg = MpaConfig {
            max_iterations: 20,
            tolerance: 1e-12,
        };
        let out = mpa_detect(&obs, &users, sigma2, &cfg).unwrap();
        let want = exhaustive_posteriors(&obs, &users, sigma2);
        for (a, b) in out.posteriors.iter().flatten().zip(want.iter().flatten()) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len())
        .max_by(|&a, &b| v[a].total_cmp(&v[b]).then(b.cmp(&a)))
        .unwrap()
}

#[test]
fn mpa_noiseless_six_users_matches_joint_ml() {
    let tables = SignatureTables::default();
    let book = &tables.scma;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for trial in 0..40 {
        let num_rx = 1 + trial % 2;
        let h: Vec<Vec<Vec<Complex64>>> = (0..6)
            .map(|_| {
                (0..4)
                    .map(|_| {
                        (0..num_rx)
                            .map(|_| complex_gaussian(&mut rng, 1.0))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let users: Vec<MpaUser> = (0..6)
            .map(|u| {
                let s = book.support(u);
                MpaUser {
                    codewords: book
                        .user(u)
                        .iter()
                        .map(|cw| {
                            s.iter()
                                .map(|&r| (0..num_rx).map(|a| cw[r] * h[u][r][a]).collect())
                                .collect()
                        })
                        .collect(),
                    resources: s,
                }
            })
            .collect();
        let sent: Vec<usize> = (0..6).map(|_| rng.gen_range(0..4)).collect();
        let mut obs = vec![vec![Complex64::new(0.0, 0.0); num_rx]; 4];
        for (u, user) in users.iter().enumerate() {
            for (p, &re) in user.resources.iter().enumerate() {
                for a in 0..num_rx {
                    obs[re][a] += user.codewords[sent[u]][p][a];
                }
            }
        }
        let sigma2 = 1e-3;
        let out = mpa_detect(&obs, &users, sigma2, &MpaConfig::default()).unwrap();
        let ml = exhaustive_posteriors(&obs, &users, sigma2);
        for u in 0..6 {
            assert_eq!(
                argmax(&out.posteriors[u]),
                sent[u],
                "trial {trial} user {u}"
            );
            assert_eq!(argmax(&ml[u]), sent[u]);
        }
    }
}

#[test]
fn bit_llrs_from_posteriors() {
    // Codeword index = 2*b0 + b1.
    let l = codeword_bit_llrs(&[0.7, 0.1, 0.1, 0.1]);
    assert!((l[0] - (0.8f64 / 0.2).ln()).abs() < 1e-12);
    assert!((l[1] - (0.8f64 / 0.2).ln()).abs() < 1e-12);
    let l = codeword_bit_llrs(&[0.0, 0.0, 1.0, 0.0]);
    assert!(l[0] < -10.0 && l[1] > 10.0 && l.iter().all(|x| x.is_finite()));
}

struct Frame {
    users: Vec<UserTxConfig>,
    payloads: Vec<Vec<u8>>,
    rx: Vec<ResourceGrid>,
    csi: Vec<Vec<Vec<Complex64>>>,
    code: PolarCodeConfig,
}

fn frame(scheme: Scheme, n: usize, kind: ChannelKind, sigma2: f64, seed: u64) -> Frame {
    let tables = SignatureTables::default();
    let code = PolarCodeConfig::new(scheme.block_length(), 256, 16).unwrap();
    let users = build_users(scheme, n, seed, &code, &tables).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut payloads = Vec::new();
    let mut tx = Vec::new();
    for u in &users {
        let p: Vec<u8> = (0..code.payload_len())
            .map(|_| rng.gen::<bool>() as u8)
            .collect();
        let cw = polar_encode(&code.attach_crc(&p).unwrap(), &code, &u.frozen).unwrap();
        tx.push(modulate_user(u, &cw, &tables).unwrap());
        payloads.push(p);
    }
    let setup = ChannelSetup::new(kind, 2, PowerMode::interval_2db()).unwrap();
    let real = setup.draw(n, seed, 0).unwrap();
    let rx = apply_channel_freq(&tx, &real, sigma2, seed, 0).unwrap();
    Frame {
        users,
        payloads,
        rx,
        csi: genie_csi(&real),
        code,
    }
}

fn detect(f: &Frame, sigma2: f64, trace: Option<&mut Vec<String>>) -> Vec<UserDecision> {
    let tables = SignatureTables::default();
    let ctx = RxContext {
        users: &f.users,
        csi: &f.csi,
        sigma2,
        tables: &tables,
    };
    let mut dec = SclDecoder::new(&f.code, 16).unwrap();
    if f.users[0].scheme == Scheme::Scma {
        scma_detect(&f.rx, &ctx, &mut dec, &MpaConfig::default()).unwrap()
    } else {
        sic_detect(&f.rx, &ctx, &mut dec, &SicConfig::default(), trace).unwrap()
    }
}

#[test]
fn near_noiseless_frames_decode_every_user() {
    let cases = [
        (Scheme::Musa, 12, ChannelKind::Tdla),
        (Scheme::Pdma, 6, ChannelKind::Awgn),
        (Scheme::Rdma, 4, ChannelKind::Tdla),
        (Scheme::Pcbma, 4, ChannelKind::Bu),
        (Scheme::Ofdm, 2, ChannelKind::Bu),
        (Scheme::OfdmMatched, 1, ChannelKind::Awgn),
        (Scheme::Scma, 6, ChannelKind::Tdla),
    ];
    for (scheme, n, kind) in cases {
        let sigma2 = 1e-3;
        let f = frame(scheme, n, kind, sigma2, 21);
        let d = detect(&f, sigma2, None);
        for (u, (dec, p)) in d.iter().zip(&f.payloads).enumerate() {
            assert!(dec.crc_ok && &dec.payload == p, "{scheme} user {u}");
            assert!(dec.attempts >= 1);
        }
    }
}

#[test]
fn sic_trace_orders_by_sinr_and_stops_when_stuck() {
    let sigma2 = 1e-3;
    let f = frame(Scheme::Musa, 6, ChannelKind::Tdla, sigma2, 4);
    let mut trace = Vec::new();
    detect(&f, sigma2, Some(&mut trace));
    assert_eq!(trace.len(), 6);
    assert!(trace
        .iter()
        .all(|l| l.starts_with("pass=0") && l.ends_with("crc_ok=true")));

    // Hopeless noise: one pass of failures, then nothing changes.
    let f = frame(Scheme::Musa, 6, ChannelKind::Awgn, 100.0, 4);
    let mut trace = Vec::new();
    let d = detect(&f, 100.0, Some(&mut trace));
    assert_eq!(trace.len(), 6);
    assert!(d.iter().all(|x| !x.crc_ok && x.attempts == 1));
}

#[test]
fn mismatched_inputs_are_rejected() {
    let f = frame(Scheme::Musa, 2, ChannelKind::Awgn, 0.1, 1);
    let tables = SignatureTables::default();
    let mut dec = SclDecoder::new(&f.code, 4).unwrap();
    let ctx = RxContext {
        users: &f.users,
        csi: &f.csi[..1],
        sigma2: 0.1,
        tables: &tables,
    };
    assert!(sic_detect(&f.rx, &ctx, &mut dec, &SicConfig::default(), None).is_err());
    let ctx = RxContext {
        users: &f.users,
        csi: &f.csi,
        sigma2: 0.0,
        tables: &tables,
    };
    assert!(sic_detect(&f.rx, &ctx, &mut dec, &SicConfig::default(), None).is_err());
    assert!(mpa_detect(&[], &[], 1.0, &MpaConfig::default()).is_err());
}
