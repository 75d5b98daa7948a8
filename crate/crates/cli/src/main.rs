//! `latppt`: build lattice states and positive maps, check PPT exactly, evaluate
//! witnesses, and write or verify bound-entanglement certificates.
//!
//! Exit status: 0 when a verdict is produced, 2 when it is inconclusive, 1 on usage,
//! file or contract errors.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use latppt::certificate::{certify_pptes, verify_certificate, Certificate, CertifyOptions, Verdict};
use latppt::dense::{self, DEFAULT_DENSE_CAP};
use latppt::enumerate::{enumerate_ppt_els, EnumerateOptions, Mode};
use latppt::lattice::{LatticeShape, MultiIndex};
use latppt::maps::{self, lambda_beta0, tensor_sum_map, DensityInput, MapRep, TensorSumSpec, WitnessVerdict};
use latppt::scalar::{fmt_rational, parse_rational};
use latppt::states::{build_ibe, build_ic, dense_pt_eigenvalues, is_ppt, j_spectrum, LatticeState, SiteSet};
use latppt::{ExactMap, Rational};

#[derive(Parser)]
#[command(name = "latppt", version, about = "Exact PPT and bound-entanglement certificates for N+N qubit lattice states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a lattice state file
    BuildState(BuildStateArgs),
    /// Write a map file
    BuildMap(BuildMapArgs),
    /// Exact PPT test of a lattice state
    CheckPpt(CheckPptArgs),
    /// Witness value Tr(choi * rho)
    Witness(WitnessArgs),
    /// Certify a PPT entangled state with a positive map
    Certify(CertifyArgs),
    /// Recompute a certificate and check every recorded value
    VerifyCertificate(VerifyArgs),
    /// Enumerate equidistributed lattice states
    Enumerate(EnumerateArgs),
    /// Compare exact results with the dense oracle on random lattice states
    CrossValidate(CrossValidateArgs),
    /// Site coordinates and roles of I_BE as CSV, for lattice plots
    ExportFigure(ExportFigureArgs),
}

#[derive(Args, Clone)]
struct ShapeArgs {
    #[arg(short = 'm', long = "m")]
    m: Option<usize>,
    #[arg(short = 'n', long = "n")]
    n: Option<usize>,
}

impl ShapeArgs {
    fn shape(&self) -> Result<LatticeShape> {
        match (self.m, self.n) {
            (Some(m), Some(n)) => Ok(LatticeShape::new(m, n)?),
            _ => bail!("both -m and -n are required"),
        }
    }
}

#[derive(Args)]
struct StateSource {
    /// Lattice state file
    #[arg(long)]
    state: Option<PathBuf>,
    /// Equidistributed state on I_C
    #[arg(long, conflicts_with_all = ["state", "sites"])]
    ic: bool,
    /// Equidistributed state on the listed sites, e.g. "0|2 1|1"
    #[arg(long, conflicts_with = "state")]
    sites: Option<String>,
}

#[derive(Args)]
struct OutputArg {
    /// Output file (stdout when absent)
    #[arg(short = 'o', long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BuildStateArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    /// I_BE(beta0), e.g. --beta0 2 or --beta0 1,3
    #[arg(long)]
    beta0: Option<String>,
    #[arg(long, conflicts_with = "beta0")]
    ic: bool,
    #[arg(long, conflicts_with_all = ["beta0", "ic"])]
    sites: Option<String>,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Args)]
struct BuildMapArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    /// Lambda_beta0
    #[arg(long)]
    beta0: Option<String>,
    /// Tensor-sum factor coefficients over L^(m), space separated rationals
    #[arg(long, requires_all = ["lambda2", "neg"], conflicts_with = "beta0")]
    lambda1: Option<String>,
    #[arg(long)]
    lambda2: Option<String>,
    /// Index of the negative entry of lambda2
    #[arg(long)]
    neg: Option<usize>,
    /// Transposition map (no positivity proof is carried)
    #[arg(long, conflicts_with_all = ["beta0", "lambda1"])]
    transposition: bool,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Args)]
struct CheckPptArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    #[command(flatten)]
    source: StateSource,
    #[arg(long)]
    beta0: Option<String>,
    /// Also run the dense partial-transpose eigensolve
    #[arg(long)]
    dense: bool,
    #[arg(long, default_value_t = DEFAULT_DENSE_CAP)]
    dense_cap: usize,
}

#[derive(Args)]
struct WitnessArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    #[command(flatten)]
    source: StateSource,
    /// Dense density-matrix file (matrix text format)
    #[arg(long, conflicts_with_all = ["state", "ic", "sites"])]
    rho: Option<PathBuf>,
    /// Map file
    #[arg(long)]
    map: Option<PathBuf>,
    #[arg(long)]
    beta0: Option<String>,
    #[arg(long, default_value_t = DEFAULT_DENSE_CAP)]
    dense_cap: usize,
}

#[derive(Args)]
struct CertifyArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    /// Map Lambda_beta0; also selects the default state I_BE(beta0)
    #[arg(long)]
    beta0: Option<String>,
    #[command(flatten)]
    source: StateSource,
    /// Map file instead of Lambda_beta0
    #[arg(long)]
    map: Option<PathBuf>,
    /// Largest N for dense cross-checks
    #[arg(long, default_value_t = 4)]
    dense_cap: usize,
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Args)]
struct VerifyArgs {
    certificate: PathBuf,
}

#[derive(Args)]
struct EnumerateArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    /// Random sampling with this many subsets (exhaustive when absent)
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// One record per symmetry orbit
    #[arg(long)]
    symmetry: bool,
    /// Only print PPT sets
    #[arg(long)]
    ppt_only: bool,
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Args)]
struct CrossValidateArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    #[arg(long)]
    samples: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1e-10)]
    tolerance: f64,
    #[arg(long, default_value_t = DEFAULT_DENSE_CAP)]
    dense_cap: usize,
}

#[derive(Args)]
struct ExportFigureArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    #[arg(long)]
    beta0: String,
    #[command(flatten)]
    out: OutputArg,
}

/// Result of a command: the text to emit and whether the verdict was conclusive.
struct Outcome {
    text: String,
    conclusive: bool,
}

impl Outcome {
    fn done(text: String) -> Self {
        Outcome { text, conclusive: true }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(out) => {
            print!("{}", out.text);
            if out.conclusive {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<Outcome> {
    match command {
        Command::BuildState(a) => build_state(a),
        Command::BuildMap(a) => build_map(a),
        Command::CheckPpt(a) => check_ppt(a),
        Command::Witness(a) => witness(a),
        Command::Certify(a) => certify(a),
        Command::VerifyCertificate(a) => verify(a),
        Command::Enumerate(a) => enumerate(a),
        Command::CrossValidate(a) => cross_validate(a),
        Command::ExportFigure(a) => export_figure(a),
    }
}

fn parse_beta0(text: &str) -> Result<MultiIndex> {
    text.parse::<MultiIndex>().with_context(|| format!("bad --beta0 {text:?}"))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

/// Writes `text` to the output file, or returns it for stdout.
fn emit(out: &OutputArg, text: String, summary: impl FnOnce() -> String) -> Result<String> {
    match &out.output {
        Some(path) => {
            let mut f = fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
            f.write_all(text.as_bytes())?;
            Ok(summary())
        }
        None => Ok(text),
    }
}

fn load_state(shape: &ShapeArgs, src: &StateSource, beta0: Option<&str>) -> Result<LatticeState> {
    if let Some(path) = &src.state {
        let st = LatticeState::from_text(&read(path)?).with_context(|| format!("in {}", path.display()))?;
        if let (Some(m), Some(n)) = (shape.m, shape.n) {
            if (m, n) != (st.shape().m(), st.shape().n()) {
                bail!("state file has shape {}, flags ask for m={m} n={n}", st.shape());
            }
        }
        return Ok(st);
    }
    let sh = shape.shape()?;
    let set = if src.ic {
        build_ic(sh)
    } else if let Some(sites) = &src.sites {
        SiteSet::parse(sh, sites)?
    } else if let Some(b) = beta0 {
        build_ibe(sh, &parse_beta0(b)?)?
    } else {
        bail!("no state given: use --state, --ic, --sites or --beta0")
    };
    Ok(LatticeState::from_set(&set)?)
}

fn load_map(path: &Path) -> Result<ExactMap> {
    MapRep::<Rational>::from_text(&read(path)?).with_context(|| format!("in {}", path.display()))
}

fn build_state(a: BuildStateArgs) -> Result<Outcome> {
    let src = StateSource { state: None, ic: a.ic, sites: a.sites };
    let st = load_state(&a.shape, &src, a.beta0.as_deref())?;
    let n = st.support().len();
    let text = emit(&a.out, st.to_text(), || format!("wrote lattice state with {n} sites\n"))?;
    Ok(Outcome::done(text))
}

fn parse_rationals(text: &str, what: &str) -> Result<Vec<Rational>> {
    text.split_whitespace()
        .map(|t| parse_rational(t).with_context(|| format!("bad rational {t:?} in {what}")))
        .collect()
}

fn build_map(a: BuildMapArgs) -> Result<Outcome> {
    let rep: ExactMap = if let Some(l1) = &a.lambda1 {
        let factors = TensorSumSpec {
            lambda1: parse_rationals(l1, "--lambda1")?,
            lambda2: parse_rationals(a.lambda2.as_deref().unwrap_or_default(), "--lambda2")?,
            neg_index: a.neg.unwrap_or_default(),
        };
        let rep = tensor_sum_map(&factors)?;
        if let (Some(_), Some(_)) = (a.shape.m, a.shape.n) {
            if a.shape.shape()? != rep.shape() {
                bail!("factor lengths give shape {}, flags ask for another", rep.shape());
            }
        }
        rep
    } else if a.transposition {
        MapRep::transposition(a.shape.shape()?)
    } else if let Some(b) = &a.beta0 {
        lambda_beta0(a.shape.shape()?, &parse_beta0(b)?)?
    } else {
        bail!("choose a map: --beta0, --lambda1/--lambda2/--neg or --transposition")
    };
    let text = emit(&a.out, rep.to_text(), || format!("wrote map on {}\n", rep.shape()))?;
    Ok(Outcome::done(text))
}

fn check_ppt(a: CheckPptArgs) -> Result<Outcome> {
    let st = load_state(&a.shape, &a.source, a.beta0.as_deref())?;
    let report = is_ppt(&st);
    let sh = st.shape();
    let mut text = format!(
        "{}\nj-min {}\nj-argmin {}\npt-min-eigenvalue {}\n",
        if report.ppt { "PPT" } else { "NPT" },
        fmt_rational(&report.j_min),
        sh.site_label(report.argmin),
        fmt_rational(&(report.j_min / Rational::from_integer(sh.dim() as i64))),
    );
    if a.dense {
        let ev = dense_pt_eigenvalues(&st, a.dense_cap)?;
        let exact = j_spectrum(&st).pt_eigenvalues();
        let worst = ev
            .iter()
            .zip(&exact)
            .map(|(x, y)| (x - to_f64(y)).abs())
            .fold(0.0, f64::max);
        text += &format!("dense-min-eigenvalue {:.16e}\ndense-max-deviation {:.16e}\n", ev[0], worst);
        if worst > 1e-10 {
            bail!("dense spectrum deviates from the exact one by {worst:e}");
        }
    }
    Ok(Outcome::done(text))
}

fn to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn resolve_map(shape: Option<LatticeShape>, map: Option<&Path>, beta0: Option<&str>) -> Result<ExactMap> {
    match (map, beta0) {
        (Some(path), _) => load_map(path),
        (None, Some(b)) => {
            let sh = shape.context("-m and -n are needed to build Lambda_beta0")?;
            Ok(lambda_beta0(sh, &parse_beta0(b)?)?)
        }
        (None, None) => bail!("no map given: use --map or --beta0"),
    }
}

fn witness(a: WitnessArgs) -> Result<Outcome> {
    let verdict_word = |v: WitnessVerdict| match v {
        WitnessVerdict::Detected => "detected",
        WitnessVerdict::Inconclusive => "inconclusive",
        WitnessVerdict::NotDetected => "not-detected",
    };
    if let Some(path) = &a.rho {
        let rho = dense::matrix_from_text(&read(path)?).with_context(|| format!("in {}", path.display()))?;
        let shape = a.shape.shape().ok();
        let rep = resolve_map(shape, a.map.as_deref(), a.beta0.as_deref())?;
        let report = maps::witness_value(&rep, DensityInput::Dense(&rho), a.dense_cap)?;
        let d = report.dense.expect("dense input");
        return Ok(Outcome {
            text: format!("witness-dense {d:.16e}\nverdict {}\n", verdict_word(report.verdict)),
            conclusive: report.verdict != WitnessVerdict::Inconclusive,
        });
    }
    let st = load_state(&a.shape, &a.source, a.beta0.as_deref())?;
    let rep = resolve_map(Some(st.shape()), a.map.as_deref(), a.beta0.as_deref())?;
    let cap = a.dense_cap.min(4);
    let report = maps::witness_value(&rep, DensityInput::Lattice(&st), cap)?;
    let mut text = format!("witness {}\n", fmt_rational(&report.exact.expect("lattice input")));
    if let Some(d) = report.dense {
        text += &format!("witness-dense {d:.16e}\n");
    }
    if !rep.provenance().is_positive_by_construction() {
        text += "# map carries no positivity proof; a negative value is not an entanglement claim\n";
    }
    text += &format!("verdict {}\n", verdict_word(report.verdict));
    Ok(Outcome { text, conclusive: report.verdict != WitnessVerdict::Inconclusive })
}

fn certify(a: CertifyArgs) -> Result<Outcome> {
    let st = load_state(&a.shape, &a.source, a.beta0.as_deref())?;
    let rep = resolve_map(Some(st.shape()), a.map.as_deref(), a.beta0.as_deref())?;
    let opts = CertifyOptions { dense_max_qubits: a.dense_cap, tolerance: a.tolerance };
    let mut cert = certify_pptes(&st, &rep, &opts)?;
    cert.map_source = a.map.as_ref().map(|p| p.display().to_string());
    if cert.verdict == Verdict::Unsupported {
        bail!("{}", Verdict::Unsupported.describe());
    }
    let verdict = cert.verdict;
    let text = emit(&a.out, cert.to_text(), || {
        format!(
            "verdict {verdict}\nwitness {}\nj-min {}\n",
            fmt_rational(&cert.witness),
            fmt_rational(&cert.j_min)
        )
    })?;
    Ok(Outcome { text, conclusive: verdict != Verdict::Inconclusive })
}

fn verify(a: VerifyArgs) -> Result<Outcome> {
    let cert = Certificate::from_text(&read(&a.certificate)?)
        .with_context(|| format!("in {}", a.certificate.display()))?;
    let fresh = verify_certificate(&cert)?;
    Ok(Outcome {
        text: format!("certificate verified\nverdict {}\n", fresh.verdict),
        conclusive: fresh.verdict != Verdict::Inconclusive,
    })
}

fn enumerate(a: EnumerateArgs) -> Result<Outcome> {
    let shape = a.shape.shape()?;
    let mode = match (a.samples, a.seed) {
        (Some(samples), Some(seed)) => Mode::Random { samples, seed },
        (Some(_), None) => bail!("--samples needs an explicit --seed"),
        (None, _) => Mode::Exhaustive,
    };
    let opts = EnumerateOptions { mode, symmetry_reduction: a.symmetry, workers: a.workers };
    let records = enumerate_ppt_els(shape, &opts)?;
    let mut text = String::from("# sites\tppt\tj-min\twitness\tbeta0\torbit\n");
    let mut ppt = 0usize;
    let mut detected = 0usize;
    for r in &records {
        if r.ppt {
            ppt += 1;
            if r.witness.is_some_and(|w| w < Rational::from_integer(0)) {
                detected += 1;
            }
        }
        if a.ppt_only && !r.ppt {
            continue;
        }
        text += &format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            r.set,
            if r.ppt { "PPT" } else { "NPT" },
            fmt_rational(&r.j_min),
            r.witness.as_ref().map_or("-".into(), fmt_rational),
            r.witness_beta0.as_ref().map_or("-".into(), |b| b.to_string()),
            r.orbit_size.map_or("-".into(), |s| s.to_string()),
        );
    }
    text += &format!("# records {} ppt {} ppt-with-negative-witness {}\n", records.len(), ppt, detected);
    let summary = text.lines().last().unwrap_or_default().to_string() + "\n";
    Ok(Outcome::done(emit(&a.out, text, || summary)?))
}

fn cross_validate(a: CrossValidateArgs) -> Result<Outcome> {
    let shape = a.shape.shape()?;
    let seed = a.seed.context("cross-validate samples random states and needs --seed")?;
    dense::check_dense_cap(shape.qubits(), a.dense_cap)?;
    let beta0s: Vec<MultiIndex> = if shape.m() >= shape.n() {
        MultiIndex::all(shape.n()).filter(|b| !b.is_zero()).collect()
    } else {
        Vec::new()
    };
    let mut agree = 0usize;
    let mut failures = String::new();
    for i in 0..a.samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let mut weights: Vec<i64> = (0..shape.size()).map(|_| rng.gen_range(0..4)).collect();
        if weights.iter().all(|&w| w == 0) {
            weights[0] = 1;
        }
        let total = weights.iter().sum();
        let st = LatticeState::from_weights(shape, weights, total)?;
        let exact = j_spectrum(&st).pt_eigenvalues();
        let ev = dense_pt_eigenvalues(&st, a.dense_cap)?;
        let spectrum_ok = ev.iter().zip(&exact).all(|(x, y)| (x - to_f64(y)).abs() <= a.tolerance);
        let ppt_ok = is_ppt(&st).ppt == (ev[0] >= -a.tolerance);
        let witness_ok = match beta0s.get(i % beta0s.len().max(1)) {
            Some(b) => {
                let rep: ExactMap = lambda_beta0(shape, b)?;
                let w = maps::witness_lattice(&rep, &st)?;
                let d = maps::witness_dense(&rep, &st.materialize_dense_with_cap(a.dense_cap)?)?;
                (d - to_f64(&w)).abs() <= a.tolerance
            }
            None => true,
        };
        if spectrum_ok && ppt_ok && witness_ok {
            agree += 1;
        } else {
            failures += &format!("# sample {i} disagrees\n");
        }
    }
    let text = format!("{failures}{agree}/{} agree\n", a.samples);
    if agree != a.samples {
        print!("{text}");
        bail!("{} of {} samples disagree with the dense oracle", a.samples - agree, a.samples);
    }
    Ok(Outcome::done(text))
}

fn export_figure(a: ExportFigureArgs) -> Result<Outcome> {
    let shape = a.shape.shape()?;
    let beta0 = parse_beta0(&a.beta0)?;
    let ibe = build_ibe(shape, &beta0)?;
    let ic = build_ic(shape);
    let q = shape.qubits();
    let mut text = String::from("index");
    for c in 0..shape.m() {
        text += &format!(",alpha{}", c + 1);
    }
    for c in 0..shape.n() {
        text += &format!(",beta{}", c + 1);
    }
    text += ",role\n";
    for s in 0..shape.size() {
        let role = if ic.contains(s) {
            "ic"
        } else if ibe.contains(s) {
            "extra"
        } else {
            "empty"
        };
        text += &s.to_string();
        for c in 0..q {
            text += &format!(",{}", shape.coord(s, c));
        }
        text += &format!(",{role}\n");
    }
    let n = ibe.len();
    Ok(Outcome::done(emit(&a.out, text, || format!("wrote {} sites, {n} in I_BE\n", shape.size()))?))
}
