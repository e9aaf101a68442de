mod common;

use common::hankel_by_definition;
use nalgebra::DMatrix;
use proptest::prelude::*;
use stpod_core::analysis::{captured_energy, mode_similarity};
use stpod_core::timeseries::io::{decode_csv, decode_stpd, encode_csv, encode_stpd};
use stpod_core::timeseries::subtract_temporal_mean;
use stpod_core::*;

fn series_strategy(max_n: usize, max_l: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (1..=max_n, 1..=max_l).prop_flat_map(|(n, l)| {
        prop::collection::vec(-10.0f64..10.0, n * l).prop_map(move |v| DMatrix::from_vec(n, l, v))
    })
}

fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.1f64..4.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn embedding_matches_definition_and_hankel_structure(x in series_strategy(3, 20), d in 1usize..6, s in 1usize..5) {
        prop_assume!(x.ncols() >= d);
        let series = SnapshotSeries::new(x.clone(), 1.0).unwrap();
        let n = x.nrows();
        let data = build_embedded(&series, d, s).unwrap();
        prop_assert_eq!(data.ncols(), (x.ncols() - d) / s + 1);
        prop_assert_eq!(data.values(), &hankel_by_definition(&x, d, s));
        let hankel = build_embedded(&series, d, 1).unwrap();
        let h = hankel.values();
        for i in 0..d - 1 {
            for j in 1..hankel.ncols() {
                prop_assert_eq!(h.view((i * n, j), (n, 1)), h.view(((i + 1) * n, j - 1), (n, 1)));
            }
        }
        for (k, col) in data.values().column_iter().enumerate() {
            prop_assert_eq!(col, h.column(k * s));
        }
    }

    #[test]
    fn reshape_round_trips(n in 1usize..5, d in 1usize..7, seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let mode = common::gaussian_matrix(n * d, 1, &mut r);
        let field = reshape_mode(mode.as_slice(), n, d).unwrap();
        prop_assert_eq!(field.shape(), (n, d));
        prop_assert_eq!(field.as_slice(), mode.as_slice());
        prop_assert!(reshape_mode(mode.as_slice(), n, d + 1).is_err());
    }

    #[test]
    fn stpd_and_csv_round_trip(x in series_strategy(4, 12), dt in 1e-3f64..10.0) {
        let series = SnapshotSeries::new(x, dt).unwrap();
        let back = decode_stpd(&encode_stpd(&series)).unwrap();
        prop_assert_eq!(back.values(), series.values());
        prop_assert_eq!(back.dt(), dt);
        let text = decode_csv(&encode_csv(&series)).unwrap();
        prop_assert_eq!(text.values(), series.values());
    }

    #[test]
    fn mean_subtraction_zeroes_the_mean(x in series_strategy(3, 15)) {
        let series = SnapshotSeries::new(x.clone(), 1.0).unwrap();
        let (centred, mean) = subtract_temporal_mean(&series);
        for a in 0..x.nrows() {
            let row_mean = centred.values().row(a).sum() / x.ncols() as f64;
            prop_assert!(row_mean.abs() <= 1e-12 * (1.0 + mean[a].abs()));
        }
    }

    #[test]
    fn mode_sets_satisfy_their_invariants(x in series_strategy(3, 16), d in 1usize..4, s in 1usize..3, w in weights(3)) {
        prop_assume!(x.ncols() >= d);
        let n = x.nrows();
        let series = SnapshotSeries::new(x, 1.0).unwrap();
        let weight = WeightSpec::diagonal(w[..n].to_vec()).unwrap();
        let Ok(modes) = spacetime_pod(&series, d, s, &weight) else {
            // all-zero data is the only rejected input
            prop_assert!(series.values().iter().all(|v| *v == 0.0));
            return Ok(());
        };
        prop_assert!(modes.orthonormality_defect() <= 1e-10);
        prop_assert!(modes.energies.windows(2).all(|e| e[0] >= e[1]));
        prop_assert!(modes.energies.iter().all(|&e| e >= 1e-12 * modes.energies[0]));
        for k in 0..modes.len() {
            let m = modes.mode(k);
            let big = m.iter().copied().fold(0.0f64, |acc, v| acc.max(v.abs()));
            let first = m.iter().find(|v| v.abs() == big).unwrap();
            prop_assert!(*first > 0.0);
        }
        prop_assert_eq!(modes.window(), (d - 1) as f64);
    }

    #[test]
    fn toeplitz_assembly_is_exactly_block_toeplitz(n in 1usize..5, d in 1usize..9, seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let blocks: Vec<DMatrix<f64>> = (0..d).map(|_| common::gaussian_matrix(n, n, &mut r)).collect();
        let lags = LagCorrelationSet::from_blocks(blocks.clone(), vec![100; d], 1.0).unwrap();
        let c = assemble_block_toeplitz(&lags);
        for i in 0..d {
            for j in 0..d {
                let expect = if j >= i { blocks[j - i].clone() } else { blocks[i - j].transpose() };
                prop_assert_eq!(c.block(i, j), expect);
            }
        }
        prop_assert!(c.same_lag_spread().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn similarity_is_symmetric_and_scale_invariant(seed in any::<u64>(), len in 1usize..12, scale in -5.0f64..5.0) {
        prop_assume!(scale.abs() > 1e-3);
        let mut r = common::rng(seed);
        let a = common::gaussian_matrix(len, 1, &mut r);
        let b = common::gaussian_matrix(len, 1, &mut r);
        let w = WeightSpec::uniform(1);
        let ab = mode_similarity(a.as_slice(), b.as_slice(), &w).unwrap();
        let ba = mode_similarity(b.as_slice(), a.as_slice(), &w).unwrap();
        let scaled: Vec<f64> = b.iter().map(|v| v * scale).collect();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
        prop_assert!((ab - ba).abs() <= 1e-12);
        prop_assert!((ab - mode_similarity(a.as_slice(), &scaled, &w).unwrap()).abs() <= 1e-12);
        prop_assert!((mode_similarity(a.as_slice(), a.as_slice(), &w).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn captured_energy_obeys_rayleigh_bound(x in series_strategy(4, 10), seed in any::<u64>()) {
        let series = SnapshotSeries::new(x, 1.0).unwrap();
        let Ok(reference) = space_only_pod(&series, &WeightSpec::uniform(series.dim())) else { return Ok(()); };
        let mut r = common::rng(seed);
        let phi = common::gaussian_matrix(series.dim(), 1, &mut r);
        let e = captured_energy(phi.as_slice(), &reference).unwrap();
        prop_assert!(e >= -1e-12 && e <= reference.energies[0] * (1.0 + 1e-12));
    }
}

#[test]
fn hankel_product_has_positive_same_lag_spread_on_generic_data() {
    let mut r = common::rng(5);
    let x = common::gaussian_matrix(2, 30, &mut r);
    let series = SnapshotSeries::new(x, 1.0).unwrap();
    let h = hankel_correlation(&build_embedded(&series, 5, 1).unwrap());
    let spread = h.same_lag_spread();
    assert!(spread.iter().copied().fold(0.0, f64::max) > 0.0);
}
