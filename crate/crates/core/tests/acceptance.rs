//! Acceptance suite. Each criterion prints one `PASS`/`FAIL` line; the test fails if
//! any criterion fails.
//!
//! cargo test -p riplb --test acceptance -- --nocapture

use std::collections::HashSet;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riplb::bounds::{
    coupon_exact, coupon_exact_rational, family_failure_lower, family_failure_lower_tuned,
    joint_miss_upper, miss_probability_lower, miss_probability_lower_rational, subspace_count,
    tuned_family_size,
};
use riplb::cli::coordinate_pair;
use riplb::family::{build_family, enumerate_subspaces, random_subspace, verify_family};
use riplb::fourier::{apply, binomial_capped, fourier_submatrix, norm2, rip_epsilon, MAX_SUPPORTS};
use riplb::harness::{
    hoeffding_halfwidth, mc_boost_split, mc_family_failure, mc_pair_subspaces, mc_single_subspace,
    ExperimentConfig, FamilySource,
};
use riplb::shattering::{kernel_certificate, shatters};
use riplb::{FieldParams, SampleSeq};

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: u32, name: &str, budget: Duration, run: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = run();
    let elapsed = start.elapsed();
    let in_time = elapsed <= budget;
    let pass = out.pass && in_time;
    println!(
        "[{}] criterion {id}: {name} :: {} ({:.1}s of {}s)",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    pass
}

fn harmonic(k: u64) -> f64 {
    (1..=k).map(|i| 1.0 / i as f64).sum()
}

fn certificates_are_sound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let instances = 10_000;
    let mut unshattered = 0;
    let mut rip_checked = 0;
    let mut failures = Vec::new();
    let mut worst_residual: f64 = 0.0;
    let mut worst_eps: f64 = f64::INFINITY;
    for i in 0..instances {
        let p = if rng.random_bool(0.5) { 2 } else { 3 };
        let n = rng.random_range(1..=8usize);
        let d = rng.random_range(1..=n.min(3));
        let params = FieldParams::new(p, n).unwrap();
        let k = (p as u64).pow(d as u32);
        let q_max = (k as f64 * harmonic(k)).ceil() as usize + 1;
        let q = rng.random_range(1..=q_max);
        let seq = SampleSeq::random(&params, q, &mut rng);
        let v = random_subspace(&params, d, &mut rng).unwrap();
        let report = shatters(&seq, &v).unwrap();
        if report.shattered {
            continue;
        }
        unshattered += 1;
        let cert = kernel_certificate(&seq, &v, &report).unwrap();
        if cert.sparsity() as u64 != k {
            failures.push(format!("#{i}: sparsity {}", cert.sparsity()));
        }
        let a = fourier_submatrix(seq.rows(), &cert.support, &params).unwrap();
        let residual = norm2(&apply(&a, &cert.coefficients).unwrap());
        let tol = 1e-9 * ((q as u64 * k) as f64).sqrt();
        worst_residual = worst_residual.max(residual / ((q as u64 * k) as f64).sqrt());
        if residual > tol {
            failures.push(format!("#{i}: residual {residual:e}"));
        }
        if binomial_capped(params.size(), k, MAX_SUPPORTS).is_some() {
            rip_checked += 1;
            let est = rip_epsilon(&seq, k as usize, &params).unwrap();
            worst_eps = worst_eps.min(est.epsilon);
            if est.epsilon < 1.0 - 1e-9 || est.min_eigenvalue > 1e-9 {
                failures.push(format!("#{i}: epsilon {} lambda_min {}", est.epsilon, est.min_eigenvalue));
            }
        }
    }
    Outcome {
        pass: failures.is_empty() && unshattered > 0 && rip_checked > 0,
        detail: format!(
            "{instances} pairs, {unshattered} unshattered, {rip_checked} brute-forced, \
             max residual/sqrt(qk) = {worst_residual:.2e}, min epsilon = {worst_eps:.12}, failures = {:?}",
            failures.iter().take(3).collect::<Vec<_>>()
        ),
    }
}

fn miss_bound_dominated() -> Outcome {
    let mut violations = Vec::new();
    let mut exact_checked = 0;
    let mut float_checked = 0;
    for k in 2..=64u64 {
        for q in 0..=20 * k {
            if k <= 16 {
                exact_checked += 1;
                let lower = miss_probability_lower_rational(k, q).unwrap();
                let coupon = coupon_exact_rational(k, q).unwrap();
                if lower > coupon {
                    violations.push((k, q));
                }
            } else {
                float_checked += 1;
                let lower = miss_probability_lower(k, q).unwrap().raw;
                let coupon = coupon_exact(k, q).unwrap();
                if lower > coupon + 1e-12 {
                    violations.push((k, q));
                }
            }
        }
    }
    Outcome {
        pass: violations.is_empty(),
        detail: format!("{exact_checked} exact + {float_checked} float grid points, violations = {violations:?}"),
    }
}

/// Fraction of `k^q` sequences that miss at least one of `k` symbols, by listing them.
fn enumerated_miss_fraction(k: u64, q: u32) -> BigRational {
    let total = k.pow(q);
    let full: u32 = (1u32 << k) - 1;
    let mut missing = 0u64;
    for mut code in 0..total {
        let mut seen = 0u32;
        for _ in 0..q {
            seen |= 1 << (code % k);
            code /= k;
        }
        if seen != full {
            missing += 1;
        }
    }
    BigRational::new(BigInt::from(missing), BigInt::from(total))
}

fn coupon_matches_enumeration() -> Outcome {
    let mut mismatches = Vec::new();
    let mut checked = 0;
    for k in 1..=4u64 {
        for q in 0..=10u32 {
            checked += 1;
            if coupon_exact_rational(k, q as u64).unwrap() != enumerated_miss_fraction(k, q) {
                mismatches.push((k, q));
            }
        }
    }
    Outcome {
        pass: mismatches.is_empty(),
        detail: format!("{checked} (k, q) cells, mismatches = {mismatches:?}"),
    }
}

fn single_subspace_mc() -> Outcome {
    let cfg = ExperimentConfig::new(2, 8, 4, 10, 100_000, 4).unwrap();
    let s = mc_single_subspace(&cfg).unwrap();
    let ci = hoeffding_halfwidth(100_000);
    let exact = coupon_exact(4, 10).unwrap();
    let lower = miss_probability_lower(4, 10).unwrap().raw;
    let pass = (s.estimate - exact).abs() <= ci && s.estimate >= lower - ci;
    Outcome {
        pass,
        detail: format!(
            "estimate {:.5} ± {ci:.5}, coupon_exact {exact:.5}, miss_lower {lower:.5}",
            s.estimate
        ),
    }
}

fn pair_mc() -> Outcome {
    let params = FieldParams::new(2, 6).unwrap();
    let (v1, v2) = coordinate_pair(&params, 2, 1).unwrap();
    let verified = v1.dim() == 2 && v2.dim() == 2 && v1.intersection_dim(&v2).unwrap() == 1;
    let cfg = ExperimentConfig::new(2, 6, 4, 10, 100_000, 5).unwrap();
    let s = mc_pair_subspaces(&cfg, &v1, &v2).unwrap();
    let ci = hoeffding_halfwidth(100_000);
    let upper = joint_miss_upper(2, 4, 1, 10).unwrap().raw;
    Outcome {
        pass: verified && s.estimate - ci <= upper,
        detail: format!(
            "pair verified = {verified}, joint estimate {:.5} ± {ci:.5}, joint_miss_upper {upper:.5}",
            s.estimate
        ),
    }
}

fn family_config(q: usize) -> ExperimentConfig {
    ExperimentConfig::new(2, 8, 4, q, 100_000, 6)
        .unwrap()
        .with_family(FamilySource::Build { ell: 8, max_int_dim: 1, seed: 6 })
}

fn family_mc() -> Outcome {
    let cfg = family_config(30);
    let fam = cfg.resolve_family().unwrap();
    let verified = fam.len() == 8 && fam.dim() == 2 && fam.max_int_dim() == 1 && verify_family(&fam);
    let s = mc_family_failure(&cfg.with_family(FamilySource::Given(fam))).unwrap();
    let ci = hoeffding_halfwidth(100_000);
    let chain = family_failure_lower(4, 30, 8.0).unwrap().raw;
    let mc_ok = chain <= 0.0 || s.estimate + ci >= chain;

    let mut worst: f64 = 0.0;
    for k in [2u64, 3, 4, 5, 8, 9, 16, 25, 27, 32, 64] {
        for q in (0..=20 * k).step_by(((k as usize) / 2).max(1)) {
            let kf = k as f64;
            let qf = q as f64;
            let c_eff = 1.0 - (-1.0f64).exp() - kf * (1.0 - 1.0 / (kf - 1.0)).powf(qf);
            let simplified = c_eff * (qf / (kf + kf.sqrt()) - 1.0).exp() * (1.0 - 1.0 / kf).powf(qf);
            let tuned = family_failure_lower_tuned(k, q).unwrap().raw;
            assert!(tuned_family_size(k, q) > 0.0);
            worst = worst.max((tuned - simplified).abs() / simplified.abs().max(1.0));
        }
    }
    let certs_ok = s.certificates.as_ref().is_none_or(|c| c.failures == 0);
    Outcome {
        pass: verified && mc_ok && worst <= 1e-12 && certs_ok,
        detail: format!(
            "family verified = {verified}, estimate {:.5} ± {ci:.5}, chain(ell=8) {chain:.5}, \
             tuned identity max error {worst:.2e}",
            s.estimate
        ),
    }
}

fn subspace_counts() -> Outcome {
    let mut mismatches = Vec::new();
    let mut cells = 0;
    for p in [2u32, 3] {
        for n in 1..=4usize {
            let params = FieldParams::new(p, n).unwrap();
            for d in 0..=n {
                cells += 1;
                let listed = enumerate_subspaces(&params, d).unwrap();
                let distinct: HashSet<_> = listed.iter().collect();
                let count = subspace_count(p, n, d).unwrap();
                if distinct.len() != listed.len() || listed.len() as u128 != count {
                    mismatches.push((p, n, d, listed.len(), count));
                }
            }
        }
    }
    let planes = subspace_count(2, 4, 2).unwrap();
    let params = FieldParams::new(2, 4).unwrap();
    let built = build_family(&params, 2, 1, 35, 7, 35_000).unwrap();
    let all_ok = built.family.len() == 35 && !built.exhausted && verify_family(&built.family);
    Outcome {
        pass: mismatches.is_empty() && planes == 35 && all_ok,
        detail: format!(
            "{cells} (p, n, d) cells, mismatches = {mismatches:?}, planes in F_2^4 = {planes}, \
             family of {} built in {} attempts, verified = {all_ok}",
            built.family.len(),
            built.attempts
        ),
    }
}

fn boost_mc() -> Outcome {
    let cfg = family_config(60).with_split(2);
    let s = mc_boost_split(&cfg).unwrap();
    let ci = hoeffding_halfwidth(100_000);
    let chunk = s.secondary_estimate.unwrap();
    let root = (s.estimate - ci).max(0.0).sqrt();
    Outcome {
        pass: chunk + ci >= root,
        detail: format!(
            "full q=60 estimate {:.5}, chunk q=30 estimate {chunk:.5} ± {ci:.5}, root {root:.5}",
            s.estimate
        ),
    }
}

fn full_sample_isometry() -> Outcome {
    let params = FieldParams::new(2, 4).unwrap();
    let seq = SampleSeq::full(&params);
    let eps: Vec<f64> = [1usize, 2, 4]
        .iter()
        .map(|&k| rip_epsilon(&seq, k, &params).unwrap().epsilon)
        .collect();
    Outcome {
        pass: eps.iter().all(|e| e.abs() <= 1e-10),
        detail: format!("epsilon for k = 1, 2, 4: {eps:?}"),
    }
}

#[test]
fn acceptance() {
    let results = [
        report(1, "certificate soundness", Duration::from_secs(300), certificates_are_sound),
        report(2, "miss bound below coupon probability", Duration::from_secs(60), miss_bound_dominated),
        report(3, "coupon oracle vs enumeration", Duration::from_secs(60), coupon_matches_enumeration),
        report(4, "single-subspace Monte Carlo", Duration::from_secs(60), single_subspace_mc),
        report(5, "pair Monte Carlo", Duration::from_secs(60), pair_mc),
        report(6, "family Monte Carlo and tuned identity", Duration::from_secs(120), family_mc),
        report(7, "subspace counts and complete plane family", Duration::from_secs(60), subspace_counts),
        report(8, "boosting across chunks", Duration::from_secs(120), boost_mc),
        report(9, "full-sample isometry", Duration::from_secs(60), full_sample_isometry),
    ];
    let passed = results.iter().filter(|r| **r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    assert_eq!(passed, results.len());
}
