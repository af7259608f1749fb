use std::collections::HashSet;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use riplb::bounds::{coupon_exact, family_failure_lower_tuned, tuned_family_size};
use riplb::family::{build_family, random_subspace, verify_family};
use riplb::fourier::{apply, fourier_submatrix, norm2, rip_epsilon, unit_root};
use riplb::shattering::{kernel_certificate, shatters};
use riplb::{FieldParams, FpVector, SampleSeq, Subspace};

fn params_strategy() -> impl Strategy<Value = FieldParams> {
    prop_oneof![
        (1usize..=6).prop_map(|n| FieldParams::new(2, n).unwrap()),
        (1usize..=4).prop_map(|n| FieldParams::new(3, n).unwrap()),
        (1usize..=3).prop_map(|n| FieldParams::new(5, n).unwrap()),
    ]
}

fn vectors(params: FieldParams, count: usize) -> impl Strategy<Value = Vec<FpVector>> {
    let p = params.p();
    proptest::collection::vec(proptest::collection::vec(0..p, params.n()), count)
        .prop_map(move |rows| rows.into_iter().map(|r| params.vector(r).unwrap()).collect())
}

/// Random invertible `d x d` recombination of the rows, drawn as a product of
/// elementary operations.
fn recombine(params: &FieldParams, rows: &[FpVector], rng: &mut ChaCha8Rng) -> Vec<FpVector> {
    use rand::Rng;
    let mut out = rows.to_vec();
    let d = out.len();
    if d == 0 {
        return out;
    }
    for _ in 0..(4 * d) {
        let i = rng.random_range(0..d);
        let j = rng.random_range(0..d);
        match rng.random_range(0..3) {
            0 => out.swap(i, j),
            1 => {
                let s = rng.random_range(1..params.p());
                out[i] = params.scale(&out[i], s);
            }
            _ if i != j => {
                let s = rng.random_range(0..params.p());
                out[i] = params.add(&out[i], &params.scale(&out[j], s));
            }
            _ => {}
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn canonical_form_ignores_recombination(
        (params, rows) in params_strategy().prop_flat_map(|p| (Just(p), vectors(p, 3))),
        seed in any::<u64>(),
    ) {
        let a = Subspace::from_spanning(&params, &rows).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = a.basis_rows();
        if !basis.is_empty() {
            let b = Subspace::from_spanning(&params, &recombine(&params, &basis, &mut rng)).unwrap();
            prop_assert_eq!(&a, &b);
        }
        let mut shuffled = rows.clone();
        shuffled.reverse();
        prop_assert_eq!(a, Subspace::from_spanning(&params, &shuffled).unwrap());
    }

    #[test]
    fn dimension_formula(
        (params, r1, r2) in params_strategy().prop_flat_map(|p| (Just(p), vectors(p, 3), vectors(p, 2))),
    ) {
        let v1 = Subspace::from_spanning(&params, &r1).unwrap();
        let v2 = Subspace::from_spanning(&params, &r2).unwrap();
        let sum = v1.sum(&v2).unwrap();
        prop_assert_eq!(v1.dim() + v2.dim() - sum.dim(), v1.intersection_dim(&v2).unwrap());
        // cross-check the intersection size directly for small cases
        if params.size() <= 256 {
            let e1: HashSet<_> = v1.enumerate().unwrap().into_iter().collect();
            let common = v2.enumerate().unwrap().into_iter().filter(|x| e1.contains(x)).count() as u64;
            prop_assert_eq!(common, (params.p() as u64).pow(v1.intersection_dim(&v2).unwrap() as u32));
        }
    }

    #[test]
    fn appending_rows_keeps_shattering(
        (params, rows, extra) in params_strategy().prop_flat_map(|p| (Just(p), vectors(p, 12), vectors(p, 4))),
        d in 0usize..=2,
    ) {
        let d = d.min(params.n());
        let v = Subspace::coordinate(&params, d).unwrap();
        let mut seq = SampleSeq::new(&params, rows).unwrap();
        let before = shatters(&seq, &v).unwrap().shattered;
        for e in extra {
            seq.push(e).unwrap();
        }
        if before {
            prop_assert!(shatters(&seq, &v).unwrap().shattered);
        }
    }

    #[test]
    fn certificates_are_annihilated(
        (params, rows) in params_strategy().prop_flat_map(|p| (Just(p), vectors(p, 6))),
        seed in any::<u64>(),
        d in 0usize..=3,
    ) {
        let d = d.min(params.n());
        let v = random_subspace(&params, d, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let seq = SampleSeq::new(&params, rows).unwrap();
        let report = shatters(&seq, &v).unwrap();
        if let Some(missing) = &report.missing {
            // the missing signature is really unattained
            for r in seq.rows() {
                prop_assert_ne!(&v.signature(r).unwrap(), missing);
            }
            let cert = kernel_certificate(&seq, &v, &report).unwrap();
            let k = cert.sparsity();
            prop_assert_eq!(k as u64, v.cardinality().unwrap());
            let distinct: HashSet<_> = cert.support.iter().collect();
            prop_assert_eq!(distinct.len(), k);
            for s in &cert.support {
                prop_assert!(v.contains(s).unwrap());
            }
            for c in &cert.coefficients {
                prop_assert!((c.norm() - 1.0).abs() < 1e-12);
            }
            prop_assert!((cert.norm_sqr() - k as f64).abs() < 1e-9);
            let a = fourier_submatrix(seq.rows(), &cert.support, &params).unwrap();
            let res = norm2(&apply(&a, &cert.coefficients).unwrap());
            prop_assert!(res <= 1e-9 * ((seq.len() * k) as f64).sqrt().max(1.0));
        }
    }

    #[test]
    fn rip_is_row_order_invariant(rows in vectors(FieldParams::new(2, 3).unwrap(), 5), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let params = FieldParams::new(2, 3).unwrap();
        let a = rip_epsilon(&SampleSeq::new(&params, rows.clone()).unwrap(), 3, &params).unwrap();
        let mut shuffled = rows;
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let b = rip_epsilon(&SampleSeq::new(&params, shuffled).unwrap(), 3, &params).unwrap();
        prop_assert!((a.epsilon - b.epsilon).abs() < 1e-12);
    }
}

#[test]
fn signature_kernel_is_the_dual_space() {
    // exhaustive over F_2^n, n <= 4, and all subspaces built from pairs of vectors
    for n in 1..=4 {
        let params = FieldParams::new(2, n).unwrap();
        let all: Vec<_> = params.all_vectors().collect();
        for a in &all {
            for b in &all {
                let v = Subspace::from_spanning(&params, &[a.clone(), b.clone()]).unwrap();
                let basis = v.basis_rows();
                let in_dual = |x: &FpVector| basis.iter().all(|bi| params.dot(x, bi) == 0);
                for r in &all {
                    for w in &all {
                        let same = v.signature(r).unwrap() == v.signature(w).unwrap();
                        assert_eq!(same, in_dual(&params.sub(r, w)));
                    }
                }
                // surjectivity onto F_2^d
                let sigs: HashSet<_> = all.iter().map(|r| v.signature(r).unwrap()).collect();
                assert_eq!(sigs.len() as u64, v.cardinality().unwrap());
            }
        }
    }
}

#[test]
fn signatures_determine_fourier_rows() {
    let params = FieldParams::new(3, 3).unwrap();
    let v = Subspace::from_spanning(
        &params,
        &[params.vector(vec![1, 2, 0]).unwrap(), params.vector(vec![0, 1, 1]).unwrap()],
    )
    .unwrap();
    let cols = v.enumerate().unwrap();
    let all: Vec<_> = params.all_vectors().collect();
    let a = fourier_submatrix(&all, &cols, &params).unwrap();
    for i in 0..all.len() {
        for j in 0..all.len() {
            let rows_equal = (0..cols.len()).all(|c| (a.get(i, c) - a.get(j, c)).norm() < 1e-12);
            let sig_equal = v.signature(&all[i]).unwrap() == v.signature(&all[j]).unwrap();
            assert_eq!(rows_equal, sig_equal);
        }
    }
}

#[test]
fn character_orthogonality() {
    for p in [2u32, 3, 5] {
        for d in 0..=3usize {
            let k = (p as u64).pow(d as u32);
            let decode = |mut i: u64| {
                let mut out = vec![0u32; d];
                for c in out.iter_mut().rev() {
                    *c = (i % p as u64) as u32;
                    i /= p as u64;
                }
                out
            };
            for ai in 0..k {
                for wi in 0..k {
                    let a = decode(ai);
                    let w = decode(wi);
                    let total: Complex64 = (0..k)
                        .map(|ci| {
                            let c = decode(ci);
                            let e = a
                                .iter()
                                .zip(&w)
                                .zip(&c)
                                .map(|((x, y), z)| ((x + p - y) % p) as u64 * *z as u64)
                                .sum::<u64>()
                                % p as u64;
                            unit_root(p, e as u32)
                        })
                        .sum();
                    let want = if ai == wi { k as f64 } else { 0.0 };
                    assert!((total - Complex64::new(want, 0.0)).norm() < 1e-10, "p={p} d={d}");
                }
            }
        }
    }
}

#[test]
fn certificate_forces_rip_failure() {
    let params = FieldParams::new(2, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut found = 0;
    for _ in 0..40 {
        let seq = SampleSeq::random(&params, 6, &mut rng);
        let v = random_subspace(&params, 2, &mut rng).unwrap();
        let report = shatters(&seq, &v).unwrap();
        if report.shattered {
            continue;
        }
        found += 1;
        let est = rip_epsilon(&seq, 4, &params).unwrap();
        assert!(est.epsilon >= 1.0 - 1e-9);
        assert!(est.min_eigenvalue <= 1e-9);
        assert!(est.min_eigenvalue >= -1e-10);
    }
    assert!(found > 5);
}

#[test]
fn normalized_energy_concentrates() {
    // E ||M v||^2 = ||v||^2 for uniform rows; average over many Q at q = 200
    use rand::Rng;
    let params = FieldParams::new(3, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let cols: Vec<_> = params.all_vectors().collect();
    let mut v: Vec<Complex64> = (0..cols.len())
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let nv = norm2(&v);
    for z in v.iter_mut() {
        *z /= nv;
    }
    let q = 200;
    let reps = 200;
    let mut total = 0.0;
    for _ in 0..reps {
        let seq = SampleSeq::random(&params, q, &mut rng);
        let m = fourier_submatrix(seq.rows(), &cols, &params).unwrap().scaled(1.0 / (q as f64).sqrt());
        total += norm2(&apply(&m, &v).unwrap()).powi(2);
    }
    let mean = total / reps as f64;
    assert!((mean - 1.0).abs() < 0.05, "mean = {mean}");
}

#[test]
fn coupon_monotonicity() {
    for k in 1..=30u64 {
        let mut prev = f64::INFINITY;
        for q in 0..=10 * k {
            let c = coupon_exact(k, q).unwrap();
            assert!(c <= prev + 1e-15, "k={k} q={q}");
            prev = c;
            if q >= 1 && k >= 2 {
                assert!(coupon_exact(k, q).unwrap() + 1e-15 >= coupon_exact(k - 1, q).unwrap());
            }
        }
    }
}

#[test]
fn tuned_family_bound_identity() {
    for k in [2u64, 3, 4, 8, 9, 16, 25, 27, 64] {
        for q in [0u64, 1, 5, 10, 30, 60, 100, 200] {
            let kf = k as f64;
            let c_eff = 1.0 - (-1.0f64).exp() - kf * (1.0 - 1.0 / (kf - 1.0)).powf(q as f64);
            let simplified = c_eff * ((q as f64) / (kf + kf.sqrt()) - 1.0).exp() * (1.0 - 1.0 / kf).powf(q as f64);
            let chain = family_failure_lower_tuned(k, q).unwrap().raw;
            let scale = simplified.abs().max(1.0);
            assert!((chain - simplified).abs() <= 1e-12 * scale, "k={k} q={q}: {chain} vs {simplified}");
            assert!(tuned_family_size(k, q) > 0.0);
        }
    }
}

#[test]
fn built_families_verify() {
    for (p, n, d, cap, target, seed) in [(2u32, 6usize, 2usize, 1usize, 20usize, 1u64), (3, 4, 2, 1, 10, 2), (2, 8, 3, 1, 15, 3), (2, 8, 4, 2, 10, 4)] {
        let params = FieldParams::new(p, n).unwrap();
        let b = build_family(&params, d, cap, target, seed, 1000 * target).unwrap();
        assert!(verify_family(&b.family));
        assert_eq!(b, build_family(&params, d, cap, target, seed, 1000 * target).unwrap());
    }
}
