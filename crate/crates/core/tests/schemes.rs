use noma_core::grid::{ResourceGrid, NUM_DATA_RES};
use noma_core::polar::PolarCodeConfig;
use noma_core::qpsk::{qpsk_map, qpsk_soft_demap, SoftSymbol};
use noma_core::schemes::*;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_bits(n: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen::<bool>() as u8).collect()
}

fn symbols(seed: u64) -> Vec<Complex64> {
    qpsk_map(&random_bits(2 * SPREAD_SYMBOLS, seed)).unwrap()
}

#[test]
fn every_scheme_radiates_equal_frame_energy() {
    let tables = SignatureTables::default();
    for scheme in Scheme::ALL {
        let code = PolarCodeConfig::new(scheme.block_length(), 256, 16).unwrap();
        let n = if scheme == Scheme::Scma { 6 } else { 12 };
        let users = build_users(scheme, n, 3, &code, &tables).unwrap();
        for u in &users {
            let cw = random_bits(scheme.block_length(), u.user_id as u64);
            let g = modulate_user(u, &cw, &tables).unwrap();
            assert!(
                (g.energy() - NUM_DATA_RES as f64).abs() < 1e-9,
                "{scheme} user {} energy {}",
                u.user_id,
                g.energy()
            );
        }
    }
}

#[test]
fn scma_book_structure() {
    let book = ScmaCodebook::default();
    assert_eq!(book.num_users(), 6);
    assert_eq!(book.codewords(), 4);
    let mut load = [0usize; GROUP_SIZE];
    let mut supports = Vec::new();
    for u in 0..6 {
        let s = book.support(u);
        assert_eq!(s.len(), 2);
        for &r in &s {
            load[r] += 1;
        }
        for cw in book.user(u) {
            let e: f64 = cw.iter().map(|x| x.norm_sqr()).sum();
            assert!((e - 1.0).abs() < 1e-12);
        }
        supports.push(s);
    }
    assert_eq!(load, [3; GROUP_SIZE]);
    supports.sort();
    supports.dedup();
    assert_eq!(supports.len(), 6);
}

#[test]
fn pdma_tables_and_assignment() {
    let small = PdmaTable::default_150();
    let large = PdmaTable::default_300();
    assert_eq!(small.columns.len(), 6);
    assert_eq!(large.columns.len(), 12);
    assert_eq!(large.row_sums(), [6; GROUP_SIZE]);
    let p = pdma_patterns(14, &small, &large);
    assert_eq!(p[12].column, p[0].column);
    assert!((p[12].phase - Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4)).norm() < 1e-12);
    assert_eq!(pdma_patterns(6, &small, &large)[5].column, small.columns[5]);
    assert!(PdmaTable::parse("1 1 0\n", "t").is_err());
    assert!(PdmaTable::parse("1 1 0 2\n", "t").is_err());
}

#[test]
fn scma_rejects_more_than_six_users() {
    let code = PolarCodeConfig::new(512, 256, 16).unwrap();
    let err = build_users(Scheme::Scma, 8, 0, &code, &SignatureTables::default()).unwrap_err();
    assert!(err.to_string().contains("6 users"));
    let wrong_n = PolarCodeConfig::new(2048, 256, 16).unwrap();
    assert!(build_users(Scheme::Musa, 2, 0, &wrong_n, &SignatureTables::default()).is_err());
}

#[test]
fn rdma_repetitions_land_on_shifted_subcarriers() {
    let s = symbols(1);
    let g = rdma_map(&s, 42).unwrap();
    for k in [0usize, 17, 255] {
        for r in 0..RDMA_REPETITIONS {
            assert_eq!(g.get((k + 42 * r) % 256, r), s[k] * 0.5);
        }
    }
}

#[test]
fn pcbma_users_have_distinct_frozen_patterns() {
    let code = PolarCodeConfig::new(2048, 256, 16).unwrap();
    let users = build_users(Scheme::Pcbma, 6, 11, &code, &SignatureTables::default()).unwrap();
    for (i, a) in users.iter().enumerate() {
        assert!(!a.frozen.is_zero());
        for b in &users[i + 1..] {
            assert_ne!(a.frozen.values, b.frozen.values);
        }
    }
    let ofdm = build_users(Scheme::Ofdm, 2, 11, &code, &SignatureTables::default()).unwrap();
    assert!(ofdm.iter().all(|u| u.frozen.is_zero()));
}

#[test]
fn superpose_scales_by_offset() {
    let a = musa_map(&symbols(2), &[Complex64::new(0.5, 0.0); 4]).unwrap();
    let b = direct_map(&qpsk_map(&random_bits(2 * NUM_DATA_RES, 3)).unwrap()).unwrap();
    let s = superpose(&[a.clone(), b.clone()], &[0.0, 6.0]).unwrap();
    let gain = 10f64.powf(6.0 / 20.0);
    for i in 0..s.len() {
        let want = a.as_slice()[i] + b.as_slice()[i] * gain;
        assert!((s.as_slice()[i] - want).norm() < 1e-12);
    }
    assert!(superpose(&[a], &[]).is_err());
}

#[test]
fn soft_demap_signs_follow_bits() {
    let bits = random_bits(64, 9);
    let obs: Vec<SoftSymbol> = qpsk_map(&bits)
        .unwrap()
        .into_iter()
        .map(|y| SoftSymbol::new(y, 1.0, 0.1))
        .collect();
    let llr = qpsk_soft_demap(&obs).unwrap();
    for (l, b) in llr.iter().zip(&bits) {
        assert_eq!(*l < 0.0, *b == 1);
    }
    assert!(qpsk_soft_demap(&[SoftSymbol::new(Complex64::new(1.0, 0.0), 1.0, 0.0)]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn group_unmap_inverts_group_map(seed in any::<u64>(), re in proptest::array::uniform4(-1.0f64..1.0), im in proptest::array::uniform4(-1.0f64..1.0)) {
        let w: [Complex64; 4] = std::array::from_fn(|i| Complex64::new(re[i], im[i]));
        prop_assume!(w.iter().map(|x| x.norm_sqr()).sum::<f64>() > 1e-3);
        let s = symbols(seed);
        let back = group_unmap(&group_map(&s, &w).unwrap(), &w).unwrap();
        for (a, b) in s.iter().zip(&back) {
            prop_assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn rdma_unmap_inverts_rdma_map(seed in any::<u64>(), shift in 0usize..256) {
        let s = symbols(seed);
        let back = rdma_unmap(&rdma_map(&s, shift).unwrap(), shift).unwrap();
        for (a, b) in s.iter().zip(&back) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn scma_hard_decode_inverts_encode(seed in any::<u64>(), user in 0usize..6) {
        let book = ScmaCodebook::default();
        let bits = random_bits(2 * SPREAD_SYMBOLS, seed);
        let g = scma_encode(&bits, book.user(user)).unwrap();
        prop_assert_eq!(scma_decode_hard(&g, book.user(user)).unwrap(), bits);
    }

    #[test]
    fn direct_map_is_row_major(seed in any::<u64>()) {
        let s = qpsk_map(&random_bits(2 * NUM_DATA_RES, seed)).unwrap();
        let g = direct_map(&s).unwrap();
        prop_assert_eq!(g.get(3, 2), s[2 * 256 + 3]);
        prop_assert_eq!(direct_unmap(&g).unwrap(), s);
    }

    #[test]
    fn overload_mapping_roundtrips(users in 1usize..40) {
        let pct = overload_factor(users, Scheme::Musa);
        prop_assert_eq!(users_for_overload(pct as u32).unwrap(), users);
    }
}

#[test]
fn grid_concat_and_slice() {
    let a = ResourceGrid::zeros(1);
    let b = direct_map(&qpsk_map(&random_bits(2 * NUM_DATA_RES, 5)).unwrap()).unwrap();
    let c = a.concat(&b);
    assert_eq!(c.num_symbols(), 5);
    assert_eq!(c.symbols(1, 4), b);
}
