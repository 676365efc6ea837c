use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use detsft::artifact::Artifact;
use detsft::formats::{self, describe};
use detsft::signal::{read_signal, SignalFormat};
use detsft_core::bucket::{sample_positions, RestrictedSamples};
use detsft_core::explicit::{
    quadratic_residue_rows, subgroup_rows, weyl_polynomial_rows, Construction, ExplicitSelection,
};
use detsft_core::filter::build_filter;
use detsft_core::forge::{
    bucket_count, forge_derandomized, forge_sample_verify, lambda_for_d, verify_condition,
    ForgeParams, DEFAULT_BUCKET_FACTOR,
};
use detsft_core::oracle::{check_guarantee, exact_dft};
use detsft_core::recovery::{
    recover_linear, recover_sublinear, CertifiedPlan, EstimateMode, ModulationSet, RecoveryParams,
    SublinearConfig, DEFAULT_QUORUM,
};
use detsft_core::subsample::{
    minimal_oversampling, subsample_derandomized, verify_incoherence, DftMatrix, EntryMatrix,
    InitialRule, SubsampleParams, DEFAULT_KAPPA,
};

#[derive(Parser)]
#[command(
    name = "detsft",
    version,
    about = "Deterministic sparse Fourier transform toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build or check hashing schedules.
    #[command(subcommand)]
    Schedule(ScheduleCmd),
    /// List the time indices a pipeline reads under a schedule.
    Samples(SamplesArgs),
    /// Approximate a signal's spectrum from a certified schedule.
    Recover(RecoverArgs),
    #[command(subcommand)]
    Verify(VerifyCmd),
    /// Row selections of the DFT matrix with small coherence.
    #[command(subcommand)]
    Forge(ForgeCmd),
    #[command(subcommand)]
    Filter(FilterCmd),
}

#[derive(Subcommand)]
enum ScheduleCmd {
    Build(BuildArgs),
    /// Recheck the bucket-noise condition exhaustively; exit 1 if it fails.
    Verify {
        #[arg(long)]
        schedule: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ForgeMode {
    Derandomized,
    SampleVerify,
}

#[derive(clap::Args)]
struct BuildArgs {
    #[arg(long)]
    n: u64,
    /// Target sparsity; the schedule is sized for recovery at 2k.
    #[arg(long)]
    k: u64,
    #[arg(long, default_value_t = 2)]
    sharpness: u32,
    #[arg(long, value_enum, default_value = "derandomized")]
    mode: ForgeMode,
    /// Only used by sample-verify.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Repetition count; chosen automatically when absent.
    #[arg(long)]
    d: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_BUCKET_FACTOR)]
    bucket_factor: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Pipeline {
    Linear,
    Sublinear,
}

impl Pipeline {
    fn name(self) -> &'static str {
        match self {
            Pipeline::Linear => "linear",
            Pipeline::Sublinear => "sublinear",
        }
    }

    fn modulations(self, n: u64) -> Result<Vec<u64>> {
        Ok(match self {
            Pipeline::Linear => vec![0],
            Pipeline::Sublinear => ModulationSet::new(n)?.values().to_vec(),
        })
    }
}

#[derive(clap::Args)]
struct SamplesArgs {
    #[arg(long)]
    schedule: PathBuf,
    #[arg(long, value_enum, default_value = "linear")]
    pipeline: Pipeline,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Estimate {
    /// Median over the repetitions that located the frequency.
    Located,
    /// Median over every repetition.
    All,
}

#[derive(clap::Args)]
struct RecoverArgs {
    #[arg(long, value_enum, default_value = "linear")]
    pipeline: Pipeline,
    #[arg(long)]
    schedule: PathBuf,
    #[arg(long)]
    signal: PathBuf,
    #[arg(long, value_enum)]
    format: Option<SignalFormat>,
    /// Target sparsity; recovery runs at 2k.
    #[arg(long)]
    k: u64,
    /// Upper bound on the tail level `‖x̂_{-2k}‖₁/(2k)`.
    #[arg(long)]
    mu: f64,
    /// Upper bound on `‖x̂‖₁/μ`.
    #[arg(long)]
    snr_bound: f64,
    /// Sample-set file; when given only those indices are readable.
    #[arg(long)]
    samples: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_QUORUM)]
    quorum: f64,
    #[arg(long, value_enum, default_value = "located")]
    estimate: Estimate,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum VerifyCmd {
    /// Compare an approximation with the exact spectrum; exit 1 unless the
    /// ℓ∞/ℓ1 guarantee holds.
    Guarantee {
        #[arg(long)]
        signal: PathBuf,
        #[arg(long, value_enum)]
        format: Option<SignalFormat>,
        /// Approximation artifact from `recover`.
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1e-9)]
        slack: f64,
        #[arg(short = 'o', long = "report")]
        report: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    Split,
    Total,
}

#[derive(Subcommand)]
enum ForgeCmd {
    /// Quadratic residues modulo a prime.
    Gauss {
        #[arg(long)]
        p: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Values of a polynomial at `0..rows`.
    Weyl {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        degree: usize,
        #[arg(long)]
        rows: usize,
        /// Comma-separated coefficients, constant term first.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        coeffs: Option<Vec<i64>>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// A multiplicative subgroup of the given order.
    Subgroup {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        order: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Derandomized row subsampling of the n-point DFT.
    Subsample {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        /// Constant in `m = C·k²·⌈ln n⌉`; the smallest feasible one when absent.
        #[arg(long)]
        oversampling: Option<f64>,
        #[arg(long, value_enum, default_value = "split")]
        rule: Rule,
        #[arg(long, default_value_t = DEFAULT_KAPPA)]
        kappa: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum FilterCmd {
    Export {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        buckets: u64,
        #[arg(long, default_value_t = 2)]
        sharpness: u32,
        #[arg(long, value_enum, default_value = "frequency")]
        domain: Domain,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Domain {
    Time,
    Frequency,
}

/// Exit 1: the command ran but its output is not certified.
#[derive(Debug)]
struct Uncertified(String);

impl std::fmt::Display for Uncertified {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Uncertified {}

fn uncertified(msg: impl Into<String>) -> anyhow::Error {
    Uncertified(msg.into()).into()
}

fn is_certification_failure(err: &anyhow::Error) -> bool {
    use detsft_core::Error as E;
    err.chain().any(|e| {
        e.is::<Uncertified>()
            || matches!(
                e.downcast_ref::<E>(),
                Some(
                    E::InitialCondition { .. }
                        | E::ScheduleNotCertified { .. }
                        | E::FilterUncertified { .. }
                        | E::BudgetExhausted { .. }
                )
            )
    })
}

fn emit(artifact: &Artifact, output: Option<&Path>) -> Result<()> {
    match output {
        Some(path) => {
            artifact.write(path)?;
            eprint!("{}", describe(artifact));
            eprintln!("wrote {}", path.display());
        }
        None => print!("{}", artifact.render()),
    }
    Ok(())
}

fn load_plan(path: &Path) -> Result<CertifiedPlan> {
    let a = Artifact::read(path)?.expect_kind(formats::SCHEDULE)?;
    let schedule = formats::read_schedule(&a)?;
    let filter = build_filter(schedule.n(), schedule.buckets(), schedule.sharpness())?;
    Ok(CertifiedPlan::certify(schedule, filter)?)
}

fn schedule_build(args: BuildArgs) -> Result<()> {
    let design_k = 2 * args.k;
    let buckets = bucket_count(args.n, design_k, args.bucket_factor);
    let filter = build_filter(args.n, buckets, args.sharpness)?;
    let params = match args.d {
        Some(d) => ForgeParams::with(&filter, design_k, d, lambda_for_d(&filter, d)?.0),
        None => ForgeParams::auto(&filter, design_k)?,
    };
    let schedule = match args.mode {
        ForgeMode::Derandomized => forge_derandomized(&params, &filter)?.schedule,
        ForgeMode::SampleVerify => forge_sample_verify(&params, &filter, args.seed)?,
    };
    let report = verify_condition(&schedule, &filter)?;
    let mut a = formats::schedule_artifact(&schedule, &report);
    a.set("k", args.k)
        .set("design_k", design_k)
        .set("lambda", params.lambda)
        .set("c_threshold", params.c_threshold)
        .set("bucket_factor", args.bucket_factor);
    match args.mode {
        ForgeMode::Derandomized => a.set("mode", "derandomized"),
        ForgeMode::SampleVerify => a.set("mode", "sample-verify").set("seed", args.seed),
    };
    emit(&a, args.output.as_deref())?;
    if !report.passed {
        return Err(uncertified(format!(
            "schedule fails the condition: {} > {}",
            report.worst_sum, report.threshold
        )));
    }
    Ok(())
}

fn schedule_verify(path: &Path) -> Result<()> {
    let a = Artifact::read(path)?.expect_kind(formats::SCHEDULE)?;
    let schedule = formats::read_schedule(&a)?;
    let filter = build_filter(schedule.n(), schedule.buckets(), schedule.sharpness())?;
    let report = verify_condition(&schedule, &filter)?;
    let (f, f2) = report.worst_pair;
    println!(
        "worst pair ({f}, {f2}): {} against threshold {}",
        report.worst_sum, report.threshold
    );
    if !report.passed {
        return Err(uncertified("schedule is not certified"));
    }
    println!("certified");
    Ok(())
}

fn samples(args: SamplesArgs) -> Result<()> {
    let plan = load_plan(&args.schedule)?;
    let n = plan.n();
    let modulations = args.pipeline.modulations(n)?;
    let set = sample_positions(plan.schedule(), plan.filter(), &modulations);
    let a = formats::samples_artifact(&set, n, args.pipeline.name(), &modulations);
    emit(&a, args.output.as_deref())
}

fn recover(args: RecoverArgs) -> Result<()> {
    let plan = load_plan(&args.schedule)?;
    let n = plan.n();
    let signal = read_signal(&args.signal, args.format)?;
    if signal.len() as u64 != n {
        bail!("signal has {} samples, schedule expects {n}", signal.len());
    }
    let params = RecoveryParams::new(2 * args.k, args.mu, args.snr_bound)?;
    let config = SublinearConfig {
        mode: match args.estimate {
            Estimate::Located => EstimateMode::LocatedSubset,
            Estimate::All => EstimateMode::AllRepetitions,
        },
        quorum: args.quorum,
    };
    let z = match &args.samples {
        Some(path) => {
            let a = Artifact::read(path)?.expect_kind(formats::SAMPLES)?;
            if a.get_u64("n")? != n {
                bail!(
                    "sample set is for n={}, schedule for n={n}",
                    a.get_u64("n")?
                );
            }
            let allowed = formats::read_samples(&a)?;
            let values: BTreeMap<u64, _> =
                allowed.iter().map(|&i| (i, signal[i as usize])).collect();
            let server = RestrictedSamples::new(n, values);
            run_pipeline(args.pipeline, &server, &params, &plan, &config)
                .context("sample-server mode: the pipeline read outside the sample set")?
        }
        None => run_pipeline(args.pipeline, &signal, &params, &plan, &config)?,
    };
    let mut a = formats::approximation_artifact(&z);
    a.set("pipeline", args.pipeline.name())
        .set("k", args.k)
        .set("mu", args.mu)
        .set("snr_bound", args.snr_bound)
        .set("buckets", plan.schedule().buckets())
        .set("d", plan.schedule().len() as u64)
        .set("sample_server", args.samples.is_some());
    if args.pipeline == Pipeline::Sublinear {
        a.set("quorum", args.quorum).set(
            "estimate",
            match args.estimate {
                Estimate::Located => "located",
                Estimate::All => "all",
            },
        );
    }
    emit(&a, args.output.as_deref())
}

fn run_pipeline<S: detsft_core::bucket::SampleSource + ?Sized>(
    pipeline: Pipeline,
    x: &S,
    params: &RecoveryParams,
    plan: &CertifiedPlan,
    config: &SublinearConfig,
) -> Result<detsft_core::SparseApproximation> {
    Ok(match pipeline {
        Pipeline::Linear => recover_linear(x, params, plan)?,
        Pipeline::Sublinear => recover_sublinear(x, params, plan, config)?,
    })
}

fn verify_guarantee(
    signal: &Path,
    format: Option<SignalFormat>,
    output: &Path,
    k: usize,
    slack: f64,
    report: Option<&Path>,
) -> Result<()> {
    let x = read_signal(signal, format)?;
    let a = Artifact::read(output)?.expect_kind(formats::APPROXIMATION)?;
    let z = formats::read_approximation(&a)?;
    if z.n() != x.len() as u64 {
        bail!("approximation is for n={}, signal has {}", z.n(), x.len());
    }
    let rep = check_guarantee(&exact_dft(&x), &z.to_dense(), k, slack)?;
    let mut out = formats::guarantee_artifact(&rep);
    out.set("slack", slack).set("pass", rep.linf_pass);
    emit(&out, report)?;
    if !rep.linf_pass {
        return Err(uncertified(format!(
            "ℓ∞ error {} exceeds {}",
            rep.linf_error, rep.linf_bound
        )));
    }
    Ok(())
}

fn explicit_artifact(sel: &ExplicitSelection) -> Artifact {
    let measured = sel.incoherence().max_inner;
    let mut a = formats::rows_artifact(sel.p, &sel.rows, sel.certified_bound, measured);
    match &sel.construction {
        Construction::QuadraticResidues => {
            a.set("construction", "gauss");
        }
        Construction::Polynomial {
            degree,
            coeffs,
            envelope,
        } => {
            a.set("construction", "weyl")
                .set("degree", *degree as u64)
                .set("coeffs", coeffs.clone())
                .set("envelope", *envelope);
        }
        Construction::Subgroup { order, generator } => {
            a.set("construction", "subgroup")
                .set("order", *order)
                .set("generator", *generator);
        }
    }
    a
}

fn finish_rows(a: &Artifact, output: Option<&Path>) -> Result<()> {
    emit(a, output)?;
    if a.header.get("certified").and_then(|v| v.as_bool()) != Some(true) {
        return Err(uncertified(
            "measured incoherence exceeds the certified bound",
        ));
    }
    Ok(())
}

fn forge(cmd: ForgeCmd) -> Result<()> {
    match cmd {
        ForgeCmd::Gauss { p, output } => finish_rows(
            &explicit_artifact(&quadratic_residue_rows(p)?),
            output.as_deref(),
        ),
        ForgeCmd::Weyl {
            p,
            degree,
            rows,
            coeffs,
            output,
        } => {
            let sel = weyl_polynomial_rows(p, degree, rows, coeffs.as_deref())?;
            finish_rows(&explicit_artifact(&sel), output.as_deref())
        }
        ForgeCmd::Subgroup { p, order, output } => finish_rows(
            &explicit_artifact(&subgroup_rows(p, order)?),
            output.as_deref(),
        ),
        ForgeCmd::Subsample {
            n,
            k,
            oversampling,
            rule,
            kappa,
            output,
        } => {
            let rule = match rule {
                Rule::Split => InitialRule::Split,
                Rule::Total => InitialRule::Total,
            };
            let dft = DftMatrix::new(n);
            let c = match oversampling {
                Some(c) => c,
                None => minimal_oversampling(&dft, k, kappa, rule)
                    .ok_or_else(|| uncertified("no feasible oversampling constant in range"))?,
            };
            let params = SubsampleParams::new(n, k, c, dft.entry_bound())?
                .with_kappa(kappa)?
                .with_rule(rule);
            let out = subsample_derandomized(&dft, params)?;
            let measured = verify_incoherence(&out.selection, &dft).max_inner;
            let rows: Vec<u64> = out.selection.rows.iter().map(|&r| r as u64).collect();
            let mut a = formats::rows_artifact(n as u64, &rows, out.certified_bound, measured);
            a.set("construction", "subsample")
                .set("k", k as u64)
                .set("oversampling", c)
                .set("m", out.params.m)
                .set("kappa", kappa)
                .set(
                    "rule",
                    match rule {
                        InitialRule::Split => "split",
                        InitialRule::Total => "total",
                    },
                )
                .set("raw_bound", out.raw_bound);
            finish_rows(&a, output.as_deref())
        }
    }
}

fn filter_export(
    n: u64,
    buckets: u64,
    sharpness: u32,
    domain: Domain,
    output: Option<&Path>,
) -> Result<()> {
    let filter = build_filter(n, buckets, sharpness)?;
    let a = formats::filter_artifact(&filter, matches!(domain, Domain::Time));
    emit(&a, output)?;
    if a.header.get("certified").and_then(|v| v.as_bool()) != Some(true) {
        return Err(uncertified("filter is not certified"));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Schedule(ScheduleCmd::Build(args)) => schedule_build(args),
        Command::Schedule(ScheduleCmd::Verify { schedule }) => schedule_verify(&schedule),
        Command::Samples(args) => samples(args),
        Command::Recover(args) => recover(args),
        Command::Verify(VerifyCmd::Guarantee {
            signal,
            format,
            output,
            k,
            slack,
            report,
        }) => verify_guarantee(&signal, format, &output, k, slack, report.as_deref()),
        Command::Forge(cmd) => forge(cmd),
        Command::Filter(FilterCmd::Export {
            n,
            buckets,
            sharpness,
            domain,
            output,
        }) => filter_export(n, buckets, sharpness, domain, output.as_deref()),
    }
}

fn main() -> ExitCode {
    // clap exits with 2 on its own for malformed command lines.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_certification_failure(&e) => {
            eprintln!("not certified: {e:#}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
