use frap_core::hier::combined_trend;
use frap_core::io::{read_panel, write_panel};
use frap_core::longmem::{binary_acf, conditional_persistence, fgn_cov_matrix};
use frap_core::mcmc::{sample_simplex_gaussian_precision, SignConstraint, TruncatedMvnGibbs};
use frap_core::mmpp::{mmpp_interval_matrices, mmpp_loglik};
use frap_core::rng::seeded;
use frap_core::{BinaryPanel, HurstCoeff, MmppParams};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn simplex_point(raw: &[f64]) -> DVector<f64> {
    let s: f64 = raw.iter().sum();
    DVector::from_iterator(raw.len(), raw.iter().map(|v| v / s))
}

fn spd(k: usize, entries: &[f64]) -> DMatrix<f64> {
    let a = DMatrix::from_column_slice(k, k, &entries[..k * k]);
    &a * a.transpose() + DMatrix::identity(k, k) * 0.5
}

fn random_mmpp(k: usize, off: &[f64], rates: &[f64]) -> MmppParams {
    let mut g = DMatrix::zeros(k, k);
    let mut idx = 0;
    for i in 0..k {
        for j in 0..k {
            if i != j {
                g[(i, j)] = off[idx];
                idx += 1;
            }
        }
        g[(i, i)] = -g.row(i).sum();
    }
    MmppParams::new(g, rates[..k].to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn simplex_draws_stay_on_simplex(
        k in 2usize..5,
        mean in prop::collection::vec(-1.0f64..2.0, 5),
        entries in prop::collection::vec(-1.0f64..1.0, 25),
        start in prop::collection::vec(0.05f64..1.0, 5),
        seed in any::<u64>(),
    ) {
        let precision = spd(k, &entries);
        let mean = DVector::from_column_slice(&mean[..k]);
        let mut state = simplex_point(&start[..k]);
        let mut rng = seeded(seed);
        for _ in 0..5 {
            state = sample_simplex_gaussian_precision(&mean, &precision, &state, &mut rng).unwrap();
            prop_assert!((state.sum() - 1.0).abs() < 1e-12);
            prop_assert!(state.iter().all(|&w| w >= 0.0));
        }
    }

    #[test]
    fn orthant_gibbs_respects_signs(
        z in prop::collection::vec(0u8..2, 2..30),
        h in 0.1f64..0.95,
        shift in -2.0f64..2.0,
        seed in any::<u64>(),
    ) {
        let n = z.len();
        let cov = fgn_cov_matrix(n, HurstCoeff::new(h).unwrap()).unwrap();
        let gibbs = TruncatedMvnGibbs::from_precision(cov.precision()).unwrap();
        let constraint = SignConstraint::from_binary(&z);
        let mean = DVector::from_element(n, shift);
        let mut state = constraint.interior_point(1.0);
        gibbs.sweep(&mean, &constraint, &mut state, 3, &mut seeded(seed)).unwrap();
        for (x, zi) in state.iter().zip(&z) {
            prop_assert!(if *zi == 1 { *x > 0.0 } else { *x <= 0.0 }, "z={zi} x={x}");
        }
    }

    #[test]
    fn combined_trend_is_linear_in_memberships(
        profiles in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 12), 3),
        a_raw in prop::collection::vec(0.01f64..1.0, 3),
        b_raw in prop::collection::vec(0.01f64..1.0, 3),
        t in 0.0f64..1.0,
    ) {
        let a = simplex_point(&a_raw);
        let b = simplex_point(&b_raw);
        let mix: Vec<f64> = a.iter().zip(b.iter()).map(|(x, y)| t * x + (1.0 - t) * y).collect();
        let fa = combined_trend(&profiles, a.as_slice()).unwrap();
        let fb = combined_trend(&profiles, b.as_slice()).unwrap();
        let fm = combined_trend(&profiles, &mix).unwrap();
        for i in 0..12 {
            prop_assert!((fm[i] - (t * fa[i] + (1.0 - t) * fb[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn mmpp_interval_matrices_are_stochastic(
        k in 1usize..4,
        off in prop::collection::vec(0.01f64..3.0, 6),
        rates in prop::collection::vec(0.0f64..4.0, 3),
        delta in 0.1f64..3.0,
    ) {
        let p = random_mmpp(k, &off, &rates);
        let (m0, m1) = mmpp_interval_matrices(&p, delta).unwrap();
        let total = &m0 + &m1;
        for i in 0..k {
            prop_assert!((total.row(i).sum() - 1.0).abs() < 1e-10);
        }
        prop_assert!(m0.iter().chain(m1.iter()).all(|&v| v >= 0.0));
    }

    #[test]
    fn mmpp_loglik_ignores_state_labels(
        k in 2usize..4,
        off in prop::collection::vec(0.01f64..2.0, 6),
        rates in prop::collection::vec(0.05f64..3.0, 3),
        rows in prop::collection::vec(prop::collection::vec(0u8..2, 15), 1..4),
        rot in 1usize..3,
    ) {
        let p = random_mmpp(k, &off, &rates);
        let perm: Vec<usize> = (0..k).map(|i| (i + rot) % k).collect();
        let panel = BinaryPanel::on_unit_grid(rows).unwrap();
        let a = mmpp_loglik(&panel, &p).unwrap();
        let b = mmpp_loglik(&panel, &p.permuted(&perm).unwrap()).unwrap();
        prop_assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }

    #[test]
    fn binary_laws_are_bounded(h in 0.01f64..0.99, k in 1usize..50) {
        let hc = HurstCoeff::new(h).unwrap();
        let c = conditional_persistence(hc);
        prop_assert!(c > 0.0 && c < 1.0);
        prop_assert!((c > 0.5) == (h > 0.5) || (h - 0.5).abs() < 1e-12);
        prop_assert!(binary_acf(k, hc).abs() <= 0.25);
        prop_assert!((binary_acf(0, hc) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn panel_csv_round_trips(rows in prop::collection::vec(prop::collection::vec(0u8..2, 7), 1..6)) {
        let mut buf = Vec::new();
        write_panel(&mut buf, &rows).unwrap();
        let back = read_panel(buf.as_slice(), None).unwrap();
        prop_assert_eq!(back.rows(), rows.as_slice());
    }
}
