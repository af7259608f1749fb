//! Monte Carlo experiments comparing empirical non-shattering frequencies with the
//! closed-form bounds.
//!
//! Each trial draws its rows from its own ChaCha stream keyed by
//! `(master_seed, trial_index)`, and aggregation is an integer count, so estimates are
//! bit-identical for any thread count or scheduling order.
//!
//! Verdicts always include the 99% Hoeffding half-width as slack, applied in the
//! direction that can only produce false alarms.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    coupon_exact, family_failure_lower, joint_miss_upper, miss_probability_lower, BoundKind, BoundValue,
};
use crate::error::{Error, Result};
use crate::family::{build_family, default_max_attempts, verify_family, SubspaceFamily};
use crate::field::{exact_log, FieldParams, Subspace};
use crate::fourier::{apply, fourier_submatrix, norm2};
use crate::shattering::{kernel_certificate, shatters, shatters_flat, SampleSeq};

/// Two-sided failure probability of the reported confidence interval.
pub const CI_ALPHA: f64 = 0.01;

/// Relative residual allowed for a kernel certificate: `‖A_{Q,·}v‖ <= tol·√(qk)`.
pub const CERTIFICATE_TOLERANCE: f64 = 1e-9;

pub const DESK_SCALE_NOTE: &str =
    "desk-scale run: checks the exact finite-q formulas, not the asymptotic regime k = Omega(log^2 N)";

/// `sqrt(ln(2/α) / (2·trials))` at `α = 0.01`.
pub fn hoeffding_halfwidth(trials: u64) -> f64 {
    ((2.0 / CI_ALPHA).ln() / (2.0 * trials as f64)).sqrt()
}

/// The RNG for one trial. Independent of every other trial's stream.
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}

/// Appends `q` uniform rows of F_p^n to `buf`, `n` residues each.
fn sample_rows<R: Rng>(rng: &mut R, params: &FieldParams, q: usize, buf: &mut Vec<u32>) {
    let size = params.size();
    let p = params.p() as u64;
    let n = params.n();
    buf.clear();
    for _ in 0..q {
        let mut idx = rng.random_range(0..size);
        let start = buf.len();
        buf.resize(start + n, 0);
        for c in buf[start..].iter_mut().rev() {
            *c = (idx % p) as u32;
            idx /= p;
        }
    }
}

fn rows_to_seq(params: &FieldParams, flat: &[u32]) -> Result<SampleSeq> {
    let rows = flat
        .chunks_exact(params.n())
        .map(|r| params.vector(r.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    SampleSeq::new(params, rows)
}

/// Where the subspace family for family/boost experiments comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FamilySource {
    Given(SubspaceFamily),
    Build {
        ell: usize,
        max_int_dim: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentConfig {
    pub params: FieldParams,
    pub k: u64,
    pub d: usize,
    pub q: usize,
    pub trials: u64,
    pub master_seed: u64,
    /// Fixed subspace for single-subspace runs; `None` means `span{e_1..e_d}`.
    pub subspace: Option<Subspace>,
    pub family: Option<FamilySource>,
    pub split_s: usize,
    /// Failing trials with index below this get a certificate spot-check.
    pub certificate_trials: u64,
}

impl ExperimentConfig {
    pub fn new(p: u32, n: usize, k: u64, q: usize, trials: u64, master_seed: u64) -> Result<Self> {
        let params = FieldParams::new(p, n)?;
        let d = exact_log(p, k)?;
        if d > n {
            return Err(Error::InvalidDimension(format!("k = {k} = {p}^{d} needs d <= n = {n}")));
        }
        if trials == 0 {
            return Err(Error::Precondition("trials must be at least 1".into()));
        }
        Ok(Self {
            params,
            k,
            d,
            q,
            trials,
            master_seed,
            subspace: None,
            family: None,
            split_s: 1,
            certificate_trials: 200,
        })
    }

    pub fn with_subspace(mut self, v: Subspace) -> Self {
        self.subspace = Some(v);
        self
    }

    pub fn with_family(mut self, source: FamilySource) -> Self {
        self.family = Some(source);
        self
    }

    pub fn with_split(mut self, s: usize) -> Self {
        self.split_s = s;
        self
    }

    /// Resolves the family source into a verified family of `d`-dimensional members
    /// with intersection cap at most `floor(d/2)`.
    pub fn resolve_family(&self) -> Result<SubspaceFamily> {
        let family = match &self.family {
            None => return Err(Error::Precondition("experiment needs a subspace family".into())),
            Some(FamilySource::Given(f)) => f.clone(),
            Some(FamilySource::Build { ell, max_int_dim, seed }) => {
                let built = build_family(
                    &self.params,
                    self.d,
                    *max_int_dim,
                    *ell,
                    *seed,
                    default_max_attempts(*ell),
                )?;
                if built.exhausted {
                    return Err(Error::Precondition(format!(
                        "found only {} of {ell} subspaces after {} attempts",
                        built.family.len(),
                        built.attempts
                    )));
                }
                built.family
            }
        };
        if family.params() != &self.params || family.dim() != self.d {
            return Err(Error::Family("family does not match the experiment parameters".into()));
        }
        if family.max_int_dim() > self.d / 2 {
            return Err(Error::Family(format!(
                "intersection cap {} exceeds floor(d/2) = {}",
                family.max_int_dim(),
                self.d / 2
            )));
        }
        if family.is_empty() || !verify_family(&family) {
            return Err(Error::Family("family failed verification".into()));
        }
        Ok(family)
    }

    fn check_subspace(&self, v: &Subspace) -> Result<()> {
        if v.params() != &self.params {
            return Err(Error::AmbientMismatch("subspace ambient differs from config".into()));
        }
        if v.dim() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: v.dim(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    McSingle,
    McPair,
    McFamily,
    McBoost,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::McSingle => "mc_single",
            ExperimentKind::McPair => "mc_pair",
            ExperimentKind::McFamily => "mc_family",
            ExperimentKind::McBoost => "mc_boost",
        }
    }
}

/// Certificate spot-check results from a family run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateCheck {
    pub checked: u64,
    pub failures: u64,
    /// Largest `‖A_{Q,·}v‖ / √(qk)` seen.
    pub max_relative_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub experiment: ExperimentKind,
    pub p: u32,
    pub n: usize,
    pub k: u64,
    pub q: usize,
    pub trials: u64,
    pub seed: u64,
    /// Fraction of trials in which the monitored event occurred.
    pub estimate: f64,
    /// Second monitored event where the experiment has one (the single-chunk failure
    /// rate for boost runs).
    pub secondary_estimate: Option<f64>,
    pub ci_halfwidth: f64,
    /// The bound the verdict compares against comes first.
    pub bound_values: Vec<BoundValue>,
    pub intersection_dim: Option<usize>,
    pub family_size: Option<usize>,
    pub split_s: Option<usize>,
    pub certificates: Option<CertificateCheck>,
    pub verdict: bool,
    pub notes: Vec<String>,
}

impl TrialSummary {
    pub fn primary_bound(&self) -> Option<&BoundValue> {
        self.bound_values.first()
    }

    fn bound(&self, kind: BoundKind) -> Option<&BoundValue> {
        self.bound_values.iter().find(|b| b.kind == kind)
    }

    /// Recomputes the verdict from the recorded fields alone.
    pub fn recheck(&self) -> bool {
        let est = self.estimate;
        let ci = self.ci_halfwidth;
        match self.experiment {
            ExperimentKind::McSingle => match (self.bound(BoundKind::MissLower), self.bound(BoundKind::CouponExact)) {
                (Some(lower), Some(exact)) => single_verdict(est, ci, lower.raw, exact.raw),
                _ => false,
            },
            ExperimentKind::McPair => self
                .bound(BoundKind::JointMissUpper)
                .is_some_and(|b| est - ci <= b.raw),
            ExperimentKind::McFamily => {
                let certs_ok = self.certificates.is_none_or(|c| c.failures == 0);
                certs_ok
                    && self
                        .bound(BoundKind::FamilyFailureLower)
                        .is_some_and(|b| b.raw <= 0.0 || est + ci >= b.raw)
            }
            ExperimentKind::McBoost => match (self.secondary_estimate, self.split_s) {
                (Some(chunk), Some(s)) => boost_verdict(est, chunk, ci, s),
                _ => false,
            },
        }
    }

    pub fn csv_header() -> &'static [&'static str] {
        &[
            "experiment",
            "p",
            "n",
            "k",
            "q",
            "trials",
            "seed",
            "estimate",
            "ci99",
            "bound_kind",
            "bound_value",
            "verdict",
        ]
    }

    pub fn csv_record(&self) -> Vec<String> {
        let (kind, value) = match self.primary_bound() {
            Some(b) => (b.kind.as_str().to_string(), format!("{}", b.raw)),
            None => (String::new(), String::new()),
        };
        vec![
            self.experiment.as_str().to_string(),
            self.p.to_string(),
            self.n.to_string(),
            self.k.to_string(),
            self.q.to_string(),
            self.trials.to_string(),
            self.seed.to_string(),
            format!("{}", self.estimate),
            format!("{}", self.ci_halfwidth),
            kind,
            value,
            if self.verdict { "pass" } else { "fail" }.to_string(),
        ]
    }

    /// Human-readable multi-line summary.
    pub fn describe(&self) -> String {
        let mut out = format!(
            "{}: p={} n={} k={} q={} trials={} seed={}\n  estimate = {:.6} ± {:.6} (99% Hoeffding)\n",
            self.experiment.as_str(),
            self.p,
            self.n,
            self.k,
            self.q,
            self.trials,
            self.seed,
            self.estimate,
            self.ci_halfwidth
        );
        if let Some(s) = self.secondary_estimate {
            out.push_str(&format!("  single-chunk estimate = {s:.6}\n"));
        }
        if let Some(m) = self.intersection_dim {
            out.push_str(&format!("  intersection dim m = {m}\n"));
        }
        if let Some(l) = self.family_size {
            out.push_str(&format!("  family size = {l}\n"));
        }
        for b in &self.bound_values {
            out.push_str(&format!("  {:<22} {:.6}\n", b.kind.as_str(), b.raw));
        }
        if let Some(c) = &self.certificates {
            out.push_str(&format!(
                "  certificates checked = {} failures = {} max residual/sqrt(qk) = {:.3e}\n",
                c.checked, c.failures, c.max_relative_residual
            ));
        }
        out.push_str(&format!("  verdict: {}\n", if self.verdict { "pass" } else { "fail" }));
        for note in &self.notes {
            out.push_str(&format!("  note: {note}\n"));
        }
        out
    }
}

fn single_verdict(est: f64, ci: f64, lower: f64, exact: f64) -> bool {
    est + ci >= lower && (est - exact).abs() <= ci
}

fn boost_verdict(full: f64, chunk: f64, ci: f64, s: usize) -> bool {
    chunk + ci >= (full - ci).max(0.0).powf(1.0 / s as f64)
}

fn summary(config: &ExperimentConfig, experiment: ExperimentKind, estimate: f64) -> TrialSummary {
    TrialSummary {
        experiment,
        p: config.params.p(),
        n: config.params.n(),
        k: config.k,
        q: config.q,
        trials: config.trials,
        seed: config.master_seed,
        estimate,
        secondary_estimate: None,
        ci_halfwidth: hoeffding_halfwidth(config.trials),
        bound_values: Vec::new(),
        intersection_dim: None,
        family_size: None,
        split_s: None,
        certificates: None,
        verdict: false,
        notes: vec![DESK_SCALE_NOTE.to_string()],
    }
}

/// Counts trials for which `event` holds. `event` gets the trial's rows and a scratch
/// buffer sized for the signature space.
fn count_events<F>(config: &ExperimentConfig, rows_per_trial: usize, event: F) -> u64
where
    F: Fn(&[u32], &mut [bool]) -> bool + Sync,
{
    let k = config.k as usize;
    (0..config.trials)
        .into_par_iter()
        .map_init(
            || (Vec::with_capacity(rows_per_trial * config.params.n()), vec![false; k]),
            |(buf, seen), t| {
                let mut rng = trial_rng(config.master_seed, t);
                sample_rows(&mut rng, &config.params, rows_per_trial, buf);
                event(buf, seen) as u64
            },
        )
        .sum()
}

/// Estimates `Pr[Q does not shatter V]` for the configured subspace (default
/// `span{e_1..e_d}`) and compares with the lower bound and the exact coupon value.
pub fn mc_single_subspace(config: &ExperimentConfig) -> Result<TrialSummary> {
    let v = match &config.subspace {
        Some(v) => v.clone(),
        None => Subspace::coordinate(&config.params, config.d)?,
    };
    config.check_subspace(&v)?;
    let n = config.params.n();
    let misses = count_events(config, config.q, |rows, seen| !shatters_flat(rows, n, &v, seen));
    let mut s = summary(config, ExperimentKind::McSingle, misses as f64 / config.trials as f64);
    let exact = BoundValue::new(BoundKind::CouponExact, coupon_exact(config.k, config.q as u64)?);
    if config.k >= 2 {
        s.bound_values.push(miss_probability_lower(config.k, config.q as u64)?);
    } else {
        // one signature: the lower bound is undefined, compare with the exact value
        s.bound_values.push(BoundValue::new(BoundKind::MissLower, exact.raw));
        s.notes.push("k = 1: lower bound undefined, exact value used".into());
    }
    s.bound_values.push(exact);
    s.verdict = s.recheck();
    Ok(s)
}

/// Estimates `Pr[Q shatters neither v1 nor v2]` and compares with the joint upper
/// bound at `m = dim(v1 ∩ v2)`.
pub fn mc_pair_subspaces(config: &ExperimentConfig, v1: &Subspace, v2: &Subspace) -> Result<TrialSummary> {
    config.check_subspace(v1)?;
    config.check_subspace(v2)?;
    if config.k < 2 {
        return Err(Error::Precondition("pair experiments need k >= 2".into()));
    }
    let m = v1.intersection_dim(v2)?;
    let n = config.params.n();
    let both = count_events(config, config.q, |rows, seen| {
        !shatters_flat(rows, n, v1, seen) && !shatters_flat(rows, n, v2, seen)
    });
    let mut s = summary(config, ExperimentKind::McPair, both as f64 / config.trials as f64);
    s.intersection_dim = Some(m);
    s.bound_values
        .push(joint_miss_upper(config.params.p(), config.k, m, config.q as u64)?);
    s.bound_values.push(BoundValue::new(
        BoundKind::CouponExact,
        coupon_exact(config.k, config.q as u64)?,
    ));
    if v1 == v2 {
        s.notes.push("identical subspaces: event reduces to a single miss".into());
    }
    s.verdict = s.recheck();
    Ok(s)
}

fn first_unshattered(rows: &[u32], n: usize, family: &SubspaceFamily, seen: &mut [bool]) -> Option<usize> {
    family
        .members()
        .iter()
        .position(|v| !shatters_flat(rows, n, v, seen))
}

/// Builds the certificate for `(Q, v)` and returns `‖A_{Q,·}v‖ / √(qk)`. Columns
/// outside the support multiply zero coefficients, so only support columns are formed.
pub fn certificate_residual(q_seq: &SampleSeq, v: &Subspace) -> Result<f64> {
    let report = shatters(q_seq, v)?;
    let cert = kernel_certificate(q_seq, v, &report)?;
    let a = fourier_submatrix(q_seq.rows(), &cert.support, q_seq.params())?;
    let out = apply(&a, &cert.coefficients)?;
    let scale = ((q_seq.len() * cert.sparsity()) as f64).sqrt();
    Ok(if scale == 0.0 { 0.0 } else { norm2(&out) / scale })
}

/// Estimates `Pr[some family member is not shattered]` and compares with the
/// inclusion–exclusion lower bound at the actual family size. Failing trials with
/// index below `certificate_trials` get an explicit kernel certificate checked.
pub fn mc_family_failure(config: &ExperimentConfig) -> Result<TrialSummary> {
    let family = config.resolve_family()?;
    let n = config.params.n();
    let k = config.k as usize;
    let (misses, checked, failures, worst) = (0..config.trials)
        .into_par_iter()
        .map_init(
            || (Vec::with_capacity(config.q * n), vec![false; k]),
            |(buf, seen), t| -> Result<(u64, u64, u64, f64)> {
                let mut rng = trial_rng(config.master_seed, t);
                sample_rows(&mut rng, &config.params, config.q, buf);
                let Some(idx) = first_unshattered(buf, n, &family, seen) else {
                    return Ok((0, 0, 0, 0.0));
                };
                if t >= config.certificate_trials {
                    return Ok((1, 0, 0, 0.0));
                }
                let seq = rows_to_seq(&config.params, buf)?;
                let r = certificate_residual(&seq, &family.members()[idx])?;
                Ok((1, 1, (r > CERTIFICATE_TOLERANCE) as u64, r))
            },
        )
        .try_reduce(
            || (0, 0, 0, 0.0),
            |a, b| Ok((a.0 + b.0, a.1 + b.1, a.2 + b.2, a.3.max(b.3))),
        )?;
    let mut s = summary(config, ExperimentKind::McFamily, misses as f64 / config.trials as f64);
    s.family_size = Some(family.len());
    if config.k >= 2 {
        s.bound_values.push(family_failure_lower(
            config.k,
            config.q as u64,
            family.len() as f64,
        )?);
    } else {
        s.bound_values.push(BoundValue::new(BoundKind::FamilyFailureLower, 0.0));
    }
    s.bound_values.push(BoundValue::new(
        BoundKind::CouponExact,
        coupon_exact(config.k, config.q as u64)?,
    ));
    s.certificates = Some(CertificateCheck {
        checked,
        failures,
        max_relative_residual: worst,
    });
    if s.bound_values[0].is_vacuous() {
        s.notes.push("family bound is non-positive at these parameters; comparison is vacuous".into());
    }
    s.verdict = s.recheck();
    Ok(s)
}

/// Splits each length-`q` sequence into `split_s` equal chunks and estimates
/// (a) `Pr[the full sequence fails to shatter some family member]` and
/// (b) `Pr[the first chunk fails to shatter some family member]`. Chunks are i.i.d.,
/// so `(b)^s >= (a)`; the verdict checks `b + ci >= (a - ci)^{1/s}`.
pub fn mc_boost_split(config: &ExperimentConfig) -> Result<TrialSummary> {
    let s_chunks = config.split_s;
    if s_chunks == 0 || !config.q.is_multiple_of(s_chunks) {
        return Err(Error::Precondition(format!(
            "q = {} is not divisible by s = {s_chunks}",
            config.q
        )));
    }
    let family = config.resolve_family()?;
    let n = config.params.n();
    let k = config.k as usize;
    let chunk_len = config.q / s_chunks;
    let (full, chunk) = (0..config.trials)
        .into_par_iter()
        .map_init(
            || (Vec::with_capacity(config.q * n), vec![false; k]),
            |(buf, seen), t| {
                let mut rng = trial_rng(config.master_seed, t);
                sample_rows(&mut rng, &config.params, config.q, buf);
                let full = first_unshattered(buf, n, &family, seen).is_some();
                let chunk = first_unshattered(&buf[..chunk_len * n], n, &family, seen).is_some();
                (full as u64, chunk as u64)
            },
        )
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let trials = config.trials as f64;
    let mut s = summary(config, ExperimentKind::McBoost, full as f64 / trials);
    s.secondary_estimate = Some(chunk as f64 / trials);
    s.split_s = Some(s_chunks);
    s.family_size = Some(family.len());
    let root = (s.estimate - s.ci_halfwidth).max(0.0).powf(1.0 / s_chunks as f64);
    s.bound_values.push(BoundValue::new(BoundKind::BoostRoot, root));
    s.verdict = s.recheck();
    Ok(s)
}

/// Writes summaries as CSV with the standard header.
pub fn write_csv<W: Write>(out: W, summaries: &[TrialSummary]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TrialSummary::csv_header())?;
    for s in summaries {
        w.write_record(s.csv_record())?;
    }
    w.flush()
}
