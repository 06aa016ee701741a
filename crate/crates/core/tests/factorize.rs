mod common;

use std::path::PathBuf;

use common::{jacobi_svd, max_abs, rng, singular_values};
use ppmi_lowrank::factorize::{nmf_from, nmf_objective, NmfStop, SpectrumRatio, DEFAULT_RRQR_TAU};
use ppmi_lowrank::{
    approximation_error, build_vocabulary, compute_ppmi, count_cooccurrences, nmf, nndsvd_init, pivoted_qr,
    pivoted_qr_full, rrqr_spectrum_check, tokenize_file, truncated_svd, DMatrix, Error, FactorizationResult,
    SparseMatrix, TokenizerConfig,
};

fn sparse(m: &DMatrix<f64>) -> SparseMatrix {
    SparseMatrix::from_dense(m).unwrap()
}

fn diag(v: &[f64]) -> SparseMatrix {
    SparseMatrix::from_triplets(v.len(), v.len(), v.iter().enumerate().map(|(i, &x)| (i, i, x))).unwrap()
}

fn orthonormality_error(q: &DMatrix<f64>) -> f64 {
    max_abs(&(q.transpose() * q - DMatrix::identity(q.ncols(), q.ncols())))
}

fn dense_error(a: &SparseMatrix, f: &FactorizationResult) -> f64 {
    let (x, y) = f.low_rank_pair();
    (a.to_dense() - x * y).norm()
}

/// PPMI of the fixture corpus restricted to its `k` most frequent words.
fn fixture_ppmi(k: usize) -> SparseMatrix {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/corpus.txt");
    let c = tokenize_file(path, &TokenizerConfig::default()).unwrap();
    let v = build_vocabulary(&c, 20).unwrap();
    let a = compute_ppmi(&count_cooccurrences(&c, &v, 2).unwrap()).unwrap();
    let k = k.min(a.n_rows());
    SparseMatrix::from_triplets(k, k, a.iter().filter(|&(i, j, _)| i < k && j < k)).unwrap()
}

#[test]
fn identity_spectrum() {
    let a = diag(&[1.0; 5]);
    let f = truncated_svd(&a, 3).unwrap();
    assert!(f.s.iter().all(|&s| (s - 1.0).abs() < 1e-12));
    let p = &f.u * DMatrix::from_diagonal(&f.s) * f.v.transpose();
    // rank-3 orthogonal projector
    assert!(max_abs(&(&p * &p - &p)) < 1e-10);
    assert!(max_abs(&(&p - p.transpose())) < 1e-10);
    assert!((p.trace() - 3.0).abs() < 1e-10);
    let err = approximation_error(&a, &f.into()).unwrap();
    assert!((err - 2f64.sqrt()).abs() < 1e-10);
}

#[test]
fn diagonal_eckart_young() {
    let a = diag(&[3.0, 2.0, 1.0]);
    let f = truncated_svd(&a, 2).unwrap();
    assert!((f.s[0] - 3.0).abs() < 1e-12 && (f.s[1] - 2.0).abs() < 1e-12);
    let ad = &f.u * DMatrix::from_diagonal(&f.s) * f.v.transpose();
    let want = DMatrix::from_diagonal(&ppmi_lowrank::DVector::from_vec(vec![3.0, 2.0, 0.0]));
    assert!(max_abs(&(ad - want)) < 1e-12);
    assert!((approximation_error(&a, &f.into()).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn constructed_spectrum_is_recovered() {
    let mut g = rng(60);
    let n = 60;
    let sigma: Vec<f64> = (0..n).map(|k| 10.0 * 0.85f64.powi(k as i32)).collect();
    let u = common::random_orthonormal(&mut g, n, n);
    let v = common::random_orthonormal(&mut g, n, n);
    let dense = &u * DMatrix::from_diagonal(&ppmi_lowrank::DVector::from_vec(sigma.clone())) * v.transpose();
    let a = sparse(&dense);
    for d in [5, 12, 30] {
        let f = truncated_svd(&a, d).unwrap();
        for (k, &want) in sigma.iter().enumerate().take(d) {
            assert!((f.s[k] - want).abs() <= 1e-8, "d = {d}, k = {k}: {} vs {want}", f.s[k]);
        }
        assert!(orthonormality_error(&f.u) <= 1e-8);
        assert!(orthonormality_error(&f.v) <= 1e-8);
        assert!(f.s.as_slice().windows(2).all(|w| w[0] >= w[1]));
    }
}

#[test]
fn svd_residual_identity_against_jacobi() {
    let mut g = rng(3);
    for trial in 0..5 {
        let a = common::random_sparse_nonneg(&mut g, 40, 35, 0.2);
        let sigma = singular_values(&a.to_dense());
        let total = a.frobenius_norm_sq();
        for d in [3, 8] {
            let f = truncated_svd(&a, d).unwrap();
            let err = approximation_error(&a, &f.clone().into()).unwrap();
            let kept: f64 = f.s.iter().map(|s| s * s).sum();
            assert!((err * err + kept - total).abs() <= 1e-6 * total, "trial {trial}");
            let tail: f64 = sigma[d..].iter().map(|s| s * s).sum::<f64>().sqrt();
            assert!((err - tail).abs() <= 1e-6 * tail, "trial {trial}: {err} vs {tail}");
            for k in 0..d {
                assert!((f.s[k] - sigma[k]).abs() <= 1e-8 * sigma[0]);
            }
        }
    }
}

#[test]
fn factorizations_are_deterministic() {
    let a = fixture_ppmi(150);
    let s1 = truncated_svd(&a, 10).unwrap();
    let s2 = truncated_svd(&a, 10).unwrap();
    assert_eq!(s1, s2);
    assert_eq!(pivoted_qr(&a, 10).unwrap(), pivoted_qr(&a, 10).unwrap());
    assert_eq!(nmf(&a, 5, 30, 1e-4).unwrap(), nmf(&a, 5, 30, 1e-4).unwrap());
}

#[test]
fn degenerate_ranks_rejected() {
    let a = diag(&[1.0, 2.0, 3.0]);
    assert!(matches!(truncated_svd(&a, 0), Err(Error::Argument(_))));
    assert!(matches!(truncated_svd(&a, 3), Err(Error::Argument(_))));
    assert!(matches!(pivoted_qr(&a, 4), Err(Error::Argument(_))));
    assert!(matches!(nmf(&a, 3, 10, 1e-4), Err(Error::Argument(_))));
    assert!(matches!(truncated_svd(&SparseMatrix::zeros(0, 0), 1), Err(Error::Argument(_))));
}

#[test]
fn qr_of_orthogonal_matrix() {
    let q0 = common::random_orthonormal(&mut rng(8), 8, 8);
    let f = pivoted_qr_full(&sparse(&q0)).unwrap();
    for i in 0..8 {
        for j in 0..8 {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((f.r[(i, j)].abs() - want).abs() < 1e-12, "R[{i},{j}] = {}", f.r[(i, j)]);
        }
    }
}

#[test]
fn qr_pivots_largest_column_first() {
    let f = pivoted_qr(&diag(&[1.0, 2.0, 3.0]), 3).unwrap();
    assert_eq!(f.perm[0], 2);
    assert!((f.r[(0, 0)].abs() - 3.0).abs() < 1e-15);
}

#[test]
fn qr_reconstructs_random_dense() {
    let dense = common::gaussian_matrix(&mut rng(40), 40, 40);
    let a = sparse(&dense);
    let f = pivoted_qr(&a, 40).unwrap();
    let ap = DMatrix::from_fn(40, 40, |i, k| dense[(i, f.perm[k])]);
    let err = max_abs(&(ap - f.reconstruct_permuted()));
    assert!(err <= 1e-8 * dense.norm(), "{err:e}");
    assert!(orthonormality_error(&f.q) <= 1e-8);
    for i in 0..40 {
        for j in 0..i {
            assert_eq!(f.r[(i, j)], 0.0);
        }
    }
    // unpermuted form reconstructs A itself
    assert!(max_abs(&(dense - &f.q * f.r_unpermuted(40))) <= 1e-8 * a.frobenius_norm());
}

#[test]
fn qr_pivot_diagonal_is_monotone() {
    let a = fixture_ppmi(200);
    let f = pivoted_qr(&a, 120).unwrap();
    let d: Vec<f64> = (0..120).map(|i| f.r[(i, i)].abs()).collect();
    assert!(d.windows(2).all(|w| w[0] >= w[1]), "{d:?}");
    assert!(orthonormality_error(&f.q) <= 1e-8);
}

#[test]
fn qr_reports_rank_deficiency() {
    let mut g = rng(2);
    let low = common::uniform_matrix(&mut g, 6, 2) * common::uniform_matrix(&mut g, 2, 6);
    match pivoted_qr(&sparse(&low), 3) {
        Err(Error::RankDeficient { achieved, requested }) => assert_eq!((achieved, requested), (2, 3)),
        other => panic!("{other:?}"),
    }
}

/// `sigma_min(R11) / sigma_d` and `sigma_max(R22) / sigma_{d+1}` by Jacobi.
fn oracle_ratios(a: &SparseMatrix, r: &DMatrix<f64>, d: usize) -> (f64, f64) {
    let n = r.nrows();
    let sigma = singular_values(&a.to_dense());
    let s11 = singular_values(&r.view((0, 0), (d, d)).into_owned());
    let s22 = singular_values(&r.view((d, d), (n - d, r.ncols() - d)).into_owned());
    (s11[d - 1] / sigma[d - 1], s22[0] / sigma[d])
}

#[test]
fn rrqr_ratios_with_spectral_gap() {
    let mut v = vec![10.0; 5];
    v.extend([1e-3; 5]);
    let a = diag(&v);
    let f = pivoted_qr_full(&a).unwrap();
    let rep = rrqr_spectrum_check(&f, &a, 5, DEFAULT_RRQR_TAU).unwrap();
    assert!((rep.ratio_min - 1.0).abs() < 1e-12);
    assert!(matches!(rep.ratio_max, SpectrumRatio::Finite(r) if (r - 1.0).abs() < 1e-12));
    assert!(rep.rank_revealing);

    // exact rank d: the trailing singular value is zero
    let a = diag(&[4.0, 3.0, 0.0]);
    let f = pivoted_qr_full(&a).unwrap();
    assert_eq!(rrqr_spectrum_check(&f, &a, 2, DEFAULT_RRQR_TAU).unwrap().ratio_max, SpectrumRatio::ExactRank);
}

#[test]
fn rrqr_ratios_match_dense_oracle() {
    let mut g = rng(30);
    let flat = common::random_orthonormal(&mut g, 30, 30);
    let random = common::gaussian_matrix(&mut g, 30, 30);
    for (name, dense) in [("flat", flat), ("random", random)] {
        let a = sparse(&dense);
        let f = pivoted_qr_full(&a).unwrap();
        let rep = rrqr_spectrum_check(&f, &a, 10, DEFAULT_RRQR_TAU).unwrap();
        let (lo, hi) = oracle_ratios(&a, &f.r, 10);
        let SpectrumRatio::Finite(ratio_max) = rep.ratio_max else { panic!("{rep:?}") };
        assert!((rep.ratio_min - lo).abs() <= 1e-8 * lo);
        assert!((ratio_max - hi).abs() <= 1e-8 * hi);
        assert!(rep.ratio_min.is_finite() && rep.ratio_min >= f64::EPSILON);
        assert!(ratio_max.is_finite() && ratio_max >= f64::EPSILON);
        // interlacing bounds sigma_min(R11) <= sigma_d and sigma_max(R22) >= sigma_{d+1}
        assert!(rep.ratio_min <= 1.0 + 1e-8 && ratio_max >= 1.0 - 1e-8);
        println!(
            "rrqr {name} 30x30 d=10: ratio_min={:.4} ratio_max={:.4} rank_revealing={}",
            rep.ratio_min, ratio_max, rep.rank_revealing
        );
    }
}

#[test]
fn nndsvd_rank_one_is_exact() {
    let mut g = rng(11);
    let x = common::uniform_matrix(&mut g, 12, 1);
    let y = common::uniform_matrix(&mut g, 1, 9);
    let a = sparse(&(&x * &y));
    let (w, h) = nndsvd_init(&a, 1).unwrap();
    assert!(max_abs(&(a.to_dense() - &w * &h)) <= 1e-8);
    // W is proportional to x
    let ratio: Vec<f64> = (0..12).map(|i| w[(i, 0)] / x[(i, 0)]).collect();
    assert!(ratio.iter().all(|r| (r - ratio[0]).abs() < 1e-8 * ratio[0]));
}

#[test]
fn nndsvd_beats_all_ones_on_fixture() {
    let a = fixture_ppmi(100);
    let (w, h) = nndsvd_init(&a, 10).unwrap();
    assert!(w.iter().chain(h.iter()).all(|&v| v > 0.0), "zero entries are filled");
    let dense = a.to_dense();
    let obj = |w: &DMatrix<f64>, h: &DMatrix<f64>| (&dense - w * h).norm_squared();
    let ones = obj(&DMatrix::from_element(100, 10, 1.0), &DMatrix::from_element(10, 100, 1.0));
    let init = obj(&w, &h);
    assert!(init < ones, "{init} vs {ones}");
    assert!((nmf_objective(&a, &w, &h) - init).abs() <= 1e-9 * init);
}

#[test]
fn nmf_recovers_exact_factorization() {
    let mut g = rng(5);
    let w0 = common::uniform_matrix(&mut g, 30, 3);
    let h0 = common::uniform_matrix(&mut g, 3, 25);
    let a = sparse(&(&w0 * &h0));
    let f = nmf(&a, 3, 50_000, 1e-14).unwrap();
    let total = a.frobenius_norm_sq();
    assert!(f.final_objective() <= 1e-6 * total, "{} vs {} after {} ({:?})", f.final_objective(), total, f.iterations(), f.stop);
    assert!((dense_error(&a, &f.clone().into()).powi(2) - f.final_objective()).abs() <= 1e-8 * total);
}

#[test]
fn nmf_trace_is_monotone_on_fixture() {
    let a = fixture_ppmi(400);
    let f = nmf(&a, 50, 200, 1e-4).unwrap();
    let t = &f.objective_trace;
    assert!(t.windows(2).all(|w| w[1] <= w[0] + 1e-10 * t[0]));
    assert!(f.w.min() >= 0.0 && f.h.min() >= 0.0);
    assert_eq!(f.iterations(), t.len() - 1);
    if f.stop == NmfStop::Converged {
        let (p, l) = (t[t.len() - 2], t[t.len() - 1]);
        assert!((p - l) / p < 1e-4);
    } else {
        assert_eq!(f.iterations(), 200);
    }
}

#[test]
fn nmf_of_zero_matrix() {
    let a = SparseMatrix::zeros(6, 6);
    let f = nmf(&a, 2, 50, 1e-4).unwrap();
    assert!(f.objective_trace.iter().all(|&v| v == 0.0));
    assert_eq!(f.stop, NmfStop::Exact);
    assert_eq!(f.final_objective(), 0.0);
}

#[test]
fn nmf_rejects_negative_input_and_reports_nonfinite_updates() {
    let a = SparseMatrix::from_triplets(3, 3, [(0, 0, -1.0), (1, 1, 1.0)]).unwrap();
    assert!(matches!(nmf(&a, 1, 10, 1e-4), Err(Error::Argument(_))));
    let big = diag(&[f64::MAX, f64::MAX, 0.0]);
    let r = nmf_from(&big, DMatrix::from_element(3, 1, 1.0), DMatrix::from_element(1, 3, 1.0), 10, 1e-4);
    assert!(matches!(r, Err(Error::Numerical { .. })), "{r:?}");
}

#[test]
fn approximation_error_matches_dense_and_eckart_young() {
    let mut g = rng(50);
    for _ in 0..3 {
        let a = common::random_sparse_nonneg(&mut g, 50, 50, 0.15);
        let svd: FactorizationResult = truncated_svd(&a, 10).unwrap().into();
        let qr: FactorizationResult = pivoted_qr(&a, 10).unwrap().into();
        let nm: FactorizationResult = nmf(&a, 10, 200, 1e-4).unwrap().into();
        let mut errs = Vec::new();
        for f in [&svd, &qr, &nm] {
            let fast = approximation_error(&a, f).unwrap();
            let slow = dense_error(&a, f);
            assert!((fast - slow).abs() <= 1e-8 * slow, "{:?}: {fast} vs {slow}", f.method());
            errs.push(fast);
        }
        assert!(errs[0] <= errs[1] + 1e-9 && errs[0] <= errs[2] + 1e-9, "{errs:?}");
        // the optimum equals the Jacobi tail
        let (_, s, _) = jacobi_svd(&a.to_dense());
        let tail = s[10..].iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((errs[0] - tail).abs() <= 1e-8 * tail);
    }
}

#[test]
fn exact_factorization_has_zero_error() {
    let q0 = common::gaussian_matrix(&mut rng(9), 7, 7);
    let a = sparse(&q0);
    let f: FactorizationResult = pivoted_qr(&a, 7).unwrap().into();
    assert!(approximation_error(&a, &f).unwrap() <= 1e-10 * a.frobenius_norm());
}

#[test]
fn full_qr_deflates_numerically_zero_trailing_block() {
    let mut g = rng(2);
    let low = common::uniform_matrix(&mut g, 6, 2) * common::uniform_matrix(&mut g, 2, 6);
    let f = pivoted_qr_full(&sparse(&low)).unwrap();
    assert!(f.r.rows(2, 4).iter().all(|&v| v == 0.0));
    assert!(max_abs(&(DMatrix::from_fn(6, 6, |i, k| low[(i, f.perm[k])]) - f.reconstruct_permuted())) <= 1e-12);
    assert!(orthonormality_error(&f.q) <= 1e-12);

    // the fixture PPMI is numerically rank-deficient; its diagonal stays ordered throughout
    let a = fixture_ppmi(1000);
    let f = pivoted_qr_full(&a).unwrap();
    let d: Vec<f64> = (0..f.r.nrows()).map(|i| f.r[(i, i)].abs()).collect();
    assert!(d.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn nmf_without_tolerance_runs_to_budget_or_exact_fit() {
    let mut g = rng(500);
    let w0 = common::uniform_matrix(&mut g, 30, 3);
    let h0 = common::uniform_matrix(&mut g, 3, 25);
    let a = sparse(&(&w0 * &h0));
    let f = nmf(&a, 3, 40_000, 0.0).unwrap();
    assert_eq!(f.stop, NmfStop::MaxIterations);
    assert_eq!(f.iterations(), 40_000);
    assert!(f.final_objective() <= 1e-6 * a.frobenius_norm_sq());
}
