//! The `riplb` command line.
//!
//! Exit codes: 0 on success or a passing verdict, 1 on a failing verdict, 2 on usage
//! or configuration errors.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::bounds::{
    coupon_exact, family_failure_lower, family_failure_lower_tuned, family_threshold, joint_miss_upper,
    max_rows_derivation, max_rows_statement, miss_probability_lower, tuned_family_size, BoundKind, BoundValue,
};
use crate::error::Error;
use crate::family::{build_family, default_max_attempts, random_subspace_seeded, SubspaceFamily};
use crate::field::{exact_log, FieldParams, Subspace};
use crate::fourier::{apply, fourier_submatrix, norm2, rip_epsilon};
use crate::harness::{
    mc_boost_split, mc_family_failure, mc_pair_subspaces, mc_single_subspace, write_csv, ExperimentConfig,
    FamilySource, TrialSummary, CERTIFICATE_TOLERANCE,
};
use crate::shattering::{kernel_certificate, shatters, SampleSeq};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "riplb", about = "Shattering, kernel certificates and RIP-failure bounds for subsampled F_p^n Fourier matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct Output {
    /// Output format for --out.
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Write results to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[arg(long)]
    p: u32,
    #[arg(long)]
    n: usize,
    /// Sparsity; must be a power of p.
    #[arg(long)]
    k: u64,
    /// Number of sampled rows.
    #[arg(long, default_value_t = 0)]
    q: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use every row of F_p^n once instead of q random rows.
    #[arg(long)]
    full_rows: bool,
    /// Test a random subspace drawn with this seed instead of span{e_1..e_d}.
    #[arg(long)]
    subspace_seed: Option<u64>,
}

#[derive(Debug, Args)]
struct McArgs {
    #[arg(long)]
    p: u32,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: u64,
    #[arg(long)]
    q: usize,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct FamilyArgs {
    /// Family size to build.
    #[arg(long, default_value_t = 8)]
    ell: usize,
    /// Intersection cap; defaults to floor(d/2).
    #[arg(long)]
    max_int_dim: Option<usize>,
    /// Load a family document instead of building one.
    #[arg(long)]
    family: Option<PathBuf>,
    /// Seed for family construction; defaults to --seed.
    #[arg(long)]
    family_seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate the closed-form bounds.
    Bounds {
        #[arg(long)]
        p: u32,
        #[arg(long)]
        k: u64,
        #[arg(long)]
        q: u64,
        /// Ambient dimension, enables the family-size and row-budget rows.
        #[arg(long)]
        n: Option<usize>,
        /// Intersection dimension for the joint bound; defaults to floor(d/2).
        #[arg(long)]
        m: Option<usize>,
        /// Family size for the family bound.
        #[arg(long, default_value_t = 1.0)]
        ell: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Test whether a row sample shatters a subspace.
    ShatterCheck {
        #[command(flatten)]
        sample: SampleArgs,
        #[command(flatten)]
        output: Output,
    },
    /// Build and check the kernel certificate for a non-shattered subspace.
    Certificate {
        #[command(flatten)]
        sample: SampleArgs,
        #[command(flatten)]
        output: Output,
    },
    /// Brute-force RIP constant of the normalized row sample.
    RipBruteforce {
        #[command(flatten)]
        sample: SampleArgs,
        #[command(flatten)]
        output: Output,
    },
    /// Build a pairwise-low-intersection family of log_p(k)-dimensional subspaces.
    FamilyBuild {
        #[arg(long)]
        p: u32,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: u64,
        #[arg(long)]
        ell: usize,
        #[arg(long)]
        max_int_dim: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        max_attempts: Option<usize>,
        /// Write the family document (JSON) here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo: single-subspace non-shattering.
    McSingle {
        #[command(flatten)]
        mc: McArgs,
        #[arg(long)]
        subspace_seed: Option<u64>,
        #[command(flatten)]
        output: Output,
    },
    /// Monte Carlo: joint non-shattering of two subspaces meeting in dimension m.
    McPair {
        #[command(flatten)]
        mc: McArgs,
        /// Intersection dimension; defaults to floor(d/2).
        #[arg(long)]
        m: Option<usize>,
        #[command(flatten)]
        output: Output,
    },
    /// Monte Carlo: some member of a family is not shattered.
    McFamily {
        #[command(flatten)]
        mc: McArgs,
        #[command(flatten)]
        family: FamilyArgs,
        #[command(flatten)]
        output: Output,
    },
    /// Monte Carlo: failure of the full sequence vs one of s equal chunks.
    McBoost {
        #[command(flatten)]
        mc: McArgs,
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long, default_value_t = 2)]
        split_s: usize,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Io(std::io::Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.into())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

type CliResult = std::result::Result<i32, CliError>;

/// Parses `args` (including the program name) and runs the subcommand, writing the
/// human-readable summary to `out`. Returns the process exit code.
pub fn run<W: Write>(args: Vec<String>, out: &mut W) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_PASS,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Io(e)) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn verdict_code(pass: bool) -> i32 {
    if pass {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

fn create(path: &Path) -> std::io::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json(path: &Path, value: &serde_json::Value) -> std::io::Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()
}

fn dimension_of(p: u32, n: usize, k: u64) -> Result<(FieldParams, usize), Error> {
    let params = FieldParams::new(p, n)?;
    let d = exact_log(p, k)?;
    if d > n {
        return Err(Error::InvalidDimension(format!("k = {k} needs d = {d} <= n = {n}")));
    }
    Ok((params, d))
}

fn dispatch<W: Write>(command: Command, out: &mut W) -> CliResult {
    match command {
        Command::Bounds {
            p,
            k,
            q,
            n,
            m,
            ell,
            output,
        } => cmd_bounds(p, k, q, n, m, ell, &output, out),
        Command::ShatterCheck { sample, output } => cmd_shatter(&sample, &output, out),
        Command::Certificate { sample, output } => cmd_certificate(&sample, &output, out),
        Command::RipBruteforce { sample, output } => cmd_rip(&sample, &output, out),
        Command::FamilyBuild {
            p,
            n,
            k,
            ell,
            max_int_dim,
            seed,
            max_attempts,
            out: path,
        } => {
            let (params, d) = dimension_of(p, n, k)?;
            let cap = max_int_dim.unwrap_or(d / 2);
            let attempts = max_attempts.unwrap_or_else(|| default_max_attempts(ell));
            let built = build_family(&params, d, cap, ell, seed, attempts)?;
            writeln!(
                out,
                "family: p={p} n={n} d={d} max_int_dim={cap} size={} target={ell} attempts={} exhausted={}",
                built.family.len(),
                built.attempts,
                built.exhausted
            )?;
            for (i, m) in built.family.members().iter().enumerate() {
                writeln!(out, "  V{i} = {m}")?;
            }
            if let Some(path) = path {
                let mut w = create(&path)?;
                writeln!(w, "{}", built.family.to_json())?;
                w.flush()?;
            }
            Ok(verdict_code(!built.exhausted))
        }
        Command::McSingle {
            mc,
            subspace_seed,
            output,
        } => {
            let mut config = mc_config(&mc)?;
            if let Some(seed) = subspace_seed {
                let v = random_subspace_seeded(&config.params, config.d, seed)?;
                config = config.with_subspace(v);
            }
            let s = mc_single_subspace(&config)?;
            emit_summary(&s, None, &output, out)
        }
        Command::McPair { mc, m, output } => {
            let config = mc_config(&mc)?;
            let m = m.unwrap_or(config.d / 2);
            let (v1, v2) = coordinate_pair(&config.params, config.d, m)?;
            let s = mc_pair_subspaces(&config, &v1, &v2)?;
            emit_summary(&s, None, &output, out)
        }
        Command::McFamily { mc, family, output } => {
            let config = mc_config(&mc)?.with_family(family_source(&family, &mc)?);
            let fam = config.resolve_family()?;
            let config = config.with_family(FamilySource::Given(fam.clone()));
            let s = mc_family_failure(&config)?;
            emit_summary(&s, Some(&fam), &output, out)
        }
        Command::McBoost {
            mc,
            family,
            split_s,
            output,
        } => {
            let config = mc_config(&mc)?
                .with_family(family_source(&family, &mc)?)
                .with_split(split_s);
            let fam = config.resolve_family()?;
            let config = config.with_family(FamilySource::Given(fam.clone()));
            let s = mc_boost_split(&config)?;
            emit_summary(&s, Some(&fam), &output, out)
        }
    }
}

fn mc_config(mc: &McArgs) -> Result<ExperimentConfig, Error> {
    ExperimentConfig::new(mc.p, mc.n, mc.k, mc.q, mc.trials, mc.seed)
}

fn family_source(args: &FamilyArgs, mc: &McArgs) -> Result<FamilySource, CliError> {
    if let Some(path) = &args.family {
        let text = std::fs::read_to_string(path)?;
        return Ok(FamilySource::Given(SubspaceFamily::from_json(&text)?));
    }
    let d = exact_log(mc.p, mc.k)?;
    Ok(FamilySource::Build {
        ell: args.ell,
        max_int_dim: args.max_int_dim.unwrap_or(d / 2),
        seed: args.family_seed.unwrap_or(mc.seed),
    })
}

/// `span{e_1..e_d}` and `span{e_1..e_m, e_{d+1}..e_{2d-m}}`, which meet in dimension
/// exactly `m`.
pub fn coordinate_pair(params: &FieldParams, d: usize, m: usize) -> Result<(Subspace, Subspace), Error> {
    if m > d || 2 * d - m > params.n() {
        return Err(Error::InvalidDimension(format!(
            "a coordinate pair with d = {d}, m = {m} needs n >= {}",
            2 * d - m
        )));
    }
    let v1 = Subspace::coordinate(params, d)?;
    if d == 0 {
        return Ok((v1.clone(), v1));
    }
    let rows: Vec<_> = (0..m).chain(d..2 * d - m).map(|i| params.unit(i)).collect();
    let v2 = Subspace::from_spanning(params, &rows)?;
    Ok((v1, v2))
}

fn emit_summary<W: Write>(s: &TrialSummary, family: Option<&SubspaceFamily>, output: &Output, out: &mut W) -> CliResult {
    write!(out, "{}", s.describe())?;
    if let Some(path) = &output.out {
        match output.format {
            Format::Csv => write_csv(create(path)?, std::slice::from_ref(s))?,
            Format::Json => {
                let mut value = serde_json::to_value(s).expect("summary serializes");
                if let Some(f) = family {
                    value["family"] = serde_json::to_value(f.to_document()).expect("family serializes");
                }
                write_json(path, &value)?;
            }
        }
    }
    Ok(verdict_code(s.verdict))
}

#[allow(clippy::too_many_arguments)]
fn cmd_bounds<W: Write>(
    p: u32,
    k: u64,
    q: u64,
    n: Option<usize>,
    m: Option<usize>,
    ell: f64,
    output: &Output,
    out: &mut W,
) -> CliResult {
    if !crate::field::is_prime(p) {
        return Err(Error::NotPrime(p).into());
    }
    let d = exact_log(p, k)?;
    let m = m.unwrap_or(d / 2);
    let mut rows = vec![
        miss_probability_lower(k, q)?,
        BoundValue::new(BoundKind::CouponExact, coupon_exact(k, q)?),
        joint_miss_upper(p, k, m, q)?,
        family_failure_lower(k, q, ell)?,
        family_failure_lower_tuned(k, q)?,
    ];
    let labels = [
        "miss_lower".to_string(),
        "coupon_exact".to_string(),
        format!("joint_miss_upper(m={m})"),
        format!("family_failure_lower(ell={ell})"),
        format!("family_failure_lower(ell={:.4})", tuned_family_size(k, q)),
    ];
    writeln!(out, "bounds: p={p} k={k} (d={d}) q={q}")?;
    for (label, b) in labels.iter().zip(&rows) {
        writeln!(out, "  {label:<34} {:.6}", b.raw)?;
    }
    if let Some(n) = n {
        let params = FieldParams::new(p, n)?;
        let size = params.size();
        match family_threshold(p, size, k) {
            Ok(t) => {
                writeln!(
                    out,
                    "  {:<34} {:.6}{}",
                    "family_threshold",
                    t.raw,
                    if t.is_vacuous() { " (vacuous: < 1)" } else { "" }
                )?;
                rows.push(t);
            }
            Err(e) => writeln!(out, "  family_threshold unavailable: {e}")?,
        }
        writeln!(out, "  {:<34} {:.3}", "row_budget_statement", max_rows_statement(p, size, k))?;
        writeln!(out, "  {:<34} {:.3}", "row_budget_derivation", max_rows_derivation(p, size, k))?;
    }
    if let Some(path) = &output.out {
        match output.format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(create(path)?);
                w.write_record(["label", "bound_kind", "raw", "value"])?;
                for (i, b) in rows.iter().enumerate() {
                    let label = labels.get(i).cloned().unwrap_or_else(|| b.kind.as_str().to_string());
                    w.write_record([label, b.kind.as_str().to_string(), b.raw.to_string(), b.value.to_string()])?;
                }
                w.flush()?;
            }
            Format::Json => write_json(path, &json!({"p": p, "k": k, "q": q, "m": m, "ell": ell, "bounds": rows}))?,
        }
    }
    Ok(EXIT_PASS)
}

fn sample_and_subspace(args: &SampleArgs) -> Result<(SampleSeq, Subspace), Error> {
    let (params, d) = dimension_of(args.p, args.n, args.k)?;
    let seq = if args.full_rows {
        SampleSeq::full(&params)
    } else {
        SampleSeq::random(&params, args.q, &mut ChaCha8Rng::seed_from_u64(args.seed))
    };
    let v = match args.subspace_seed {
        Some(s) => random_subspace_seeded(&params, d, s)?,
        None => Subspace::coordinate(&params, d)?,
    };
    Ok((seq, v))
}

fn cmd_shatter<W: Write>(args: &SampleArgs, output: &Output, out: &mut W) -> CliResult {
    let (seq, v) = sample_and_subspace(args)?;
    let report = shatters(&seq, &v)?;
    writeln!(out, "subspace: {v}")?;
    writeln!(out, "rows: {}", seq.len())?;
    writeln!(out, "shattered: {}", report.shattered)?;
    if let Some(m) = &report.missing {
        writeln!(out, "missing signature: {m}")?;
    }
    if let Some(path) = &output.out {
        let value = json!({
            "p": args.p, "n": args.n, "k": args.k, "q": seq.len(), "seed": args.seed,
            "subspace": v.basis_rows(),
            "shattered": report.shattered,
            "missing": report.missing,
        });
        match output.format {
            Format::Json => write_json(path, &value)?,
            Format::Csv => {
                let mut w = csv::Writer::from_writer(create(path)?);
                w.write_record(["p", "n", "k", "q", "seed", "shattered", "missing"])?;
                w.write_record([
                    args.p.to_string(),
                    args.n.to_string(),
                    args.k.to_string(),
                    seq.len().to_string(),
                    args.seed.to_string(),
                    report.shattered.to_string(),
                    report.missing.as_ref().map(|m| m.to_string()).unwrap_or_default(),
                ])?;
                w.flush()?;
            }
        }
    }
    Ok(EXIT_PASS)
}

fn cmd_certificate<W: Write>(args: &SampleArgs, output: &Output, out: &mut W) -> CliResult {
    let (seq, v) = sample_and_subspace(args)?;
    let report = shatters(&seq, &v)?;
    writeln!(out, "subspace: {v}")?;
    writeln!(out, "shattered: {}", report.shattered)?;
    if report.shattered {
        writeln!(out, "no certificate: every signature is attained")?;
        return Ok(EXIT_FAIL);
    }
    let cert = kernel_certificate(&seq, &v, &report)?;
    let a = fourier_submatrix(seq.rows(), &cert.support, seq.params())?;
    let residual = norm2(&apply(&a, &cert.coefficients)?);
    let scale = ((seq.len() * cert.sparsity()) as f64).sqrt();
    let ok = residual <= CERTIFICATE_TOLERANCE * scale.max(1.0);
    writeln!(out, "missing signature: {}", report.missing.as_ref().expect("not shattered"))?;
    writeln!(out, "sparsity: {}  norm^2: {:.12}", cert.sparsity(), cert.norm_sqr())?;
    for (s, c) in cert.support.iter().zip(&cert.coefficients) {
        writeln!(out, "  {s}  {:+.12} {:+.12}i", c.re, c.im)?;
    }
    writeln!(out, "||A_Q v||_2 = {residual:.3e}  (tolerance {:.3e})", CERTIFICATE_TOLERANCE * scale)?;
    writeln!(out, "verdict: {}", if ok { "pass" } else { "fail" })?;
    if let Some(path) = &output.out {
        let coeffs: Vec<[f64; 2]> = cert.coefficients.iter().map(|c| [c.re, c.im]).collect();
        let value = json!({
            "p": args.p, "n": args.n, "k": args.k, "q": seq.len(), "seed": args.seed,
            "subspace": v.basis_rows(),
            "missing": report.missing,
            "certificate": {"support": cert.support, "coefficients": coeffs},
            "residual": residual,
            "verdict": ok,
        });
        match output.format {
            Format::Json => write_json(path, &value)?,
            Format::Csv => {
                let mut w = csv::Writer::from_writer(create(path)?);
                w.write_record(["support", "re", "im"])?;
                for (s, c) in cert.support.iter().zip(&cert.coefficients) {
                    w.write_record([s.to_string(), c.re.to_string(), c.im.to_string()])?;
                }
                w.flush()?;
            }
        }
    }
    Ok(verdict_code(ok))
}

fn cmd_rip<W: Write>(args: &SampleArgs, output: &Output, out: &mut W) -> CliResult {
    let (seq, _) = sample_and_subspace(args)?;
    let est = rip_epsilon(&seq, args.k as usize, seq.params())?;
    writeln!(out, "rows: {}  k: {}  supports: {}", seq.len(), est.k, est.supports_checked)?;
    writeln!(out, "epsilon: {:.12}", est.epsilon)?;
    let support: Vec<String> = est.witness_support.iter().map(|s| s.to_string()).collect();
    writeln!(out, "witness support: {}", support.join(" "))?;
    writeln!(out, "eigenvalue range: [{:.12}, {:.12}]", est.min_eigenvalue, est.max_eigenvalue)?;
    if let Some(path) = &output.out {
        let value = json!({
            "p": args.p, "n": args.n, "k": args.k, "q": seq.len(), "seed": args.seed,
            "epsilon": est.epsilon,
            "witness_support": est.witness_support,
            "min_eigenvalue": est.min_eigenvalue,
            "min_eigen_support": est.min_eigen_support,
            "max_eigenvalue": est.max_eigenvalue,
        });
        match output.format {
            Format::Json => write_json(path, &value)?,
            Format::Csv => {
                let mut w = csv::Writer::from_writer(create(path)?);
                w.write_record(["p", "n", "k", "q", "seed", "epsilon", "min_eigenvalue", "max_eigenvalue"])?;
                w.write_record([
                    args.p.to_string(),
                    args.n.to_string(),
                    args.k.to_string(),
                    seq.len().to_string(),
                    args.seed.to_string(),
                    est.epsilon.to_string(),
                    est.min_eigenvalue.to_string(),
                    est.max_eigenvalue.to_string(),
                ])?;
                w.flush()?;
            }
        }
    }
    Ok(EXIT_PASS)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String) {
        let mut buf = Vec::new();
        let mut argv = vec!["riplb".to_string()];
        argv.extend(args.iter().map(|s| s.to_string()));
        let code = run(argv, &mut buf);
        (code, String::from_utf8(buf).unwrap())
    }

    #[test]
    fn coordinate_pair_intersection() {
        let params = FieldParams::new(2, 6).unwrap();
        for m in 0..=2 {
            let (a, b) = coordinate_pair(&params, 2, m).unwrap();
            assert_eq!(a.intersection_dim(&b).unwrap(), m);
        }
        assert!(coordinate_pair(&FieldParams::new(2, 3).unwrap(), 2, 0).is_err());
    }

    #[test]
    fn bounds_prints_rows() {
        let (code, text) = run_args(&["bounds", "--p", "2", "--k", "4", "--q", "10"]);
        assert_eq!(code, 0);
        assert!(text.contains("miss_lower"));
        assert!(text.contains("coupon_exact"));
        assert!(text.contains("joint_miss_upper(m=1)"));
        assert!(text.contains("0.2193"));
        assert!(text.contains("0.17018"));
    }

    #[test]
    fn composite_modulus_is_usage_error() {
        assert_eq!(run_args(&["bounds", "--p", "4", "--k", "4", "--q", "10"]).0, 2);
        assert_eq!(run_args(&["mc-single", "--p", "4", "--n", "3", "--k", "4", "--q", "3"]).0, 2);
        assert_eq!(run_args(&["bounds", "--p", "2", "--k", "6", "--q", "10"]).0, 2);
        assert_eq!(run_args(&["no-such-command"]).0, 2);
    }

    #[test]
    fn full_rows_shatter() {
        let (code, text) = run_args(&["shatter-check", "--p", "3", "--n", "3", "--k", "9", "--full-rows"]);
        assert_eq!(code, 0);
        assert!(text.contains("shattered: true"));
    }
}
