use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use gmac_core::bht::{self, FiniteDistribution};
use gmac_core::bounds::{self, BoundInputs};
use gmac_core::expurgation::{self, CodeErrorProfile};
use gmac_core::macsim::{
    self, Codebook, CodebookKind, GaussianMacConfig, IcConfig, ScanOptions, DEFAULT_CAP,
};
use gmac_core::regions::{self, IcParams, PowerVector, RateTuple, SubsetSpec, DEFAULT_TOLERANCE};
use gmac_core::wringing::{self, ProductApproxInstance, SparsePmf};
use gmac_core::Error;
use serde::{Deserialize, Serialize};

use crate::output::Run;

#[derive(Debug, Parser)]
#[command(name = "gmac", version, about = "Gaussian MAC converse toolkit")]
pub struct Cli {
    /// Worker threads for simulations (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Capacity-region constraints as CSV, or membership of a rate tuple as JSON.
    Region(RegionArgs),
    /// Finite-blocklength upper bound on the sum rate over a subset of sources.
    Bound(BoundArgs),
    /// The bound over a logarithmic grid of blocklengths, as CSV.
    BoundScan(BoundScanArgs),
    /// Optimal type-II error of a binary hypothesis test.
    Bht(InputArgs),
    /// Product approximation of a joint distribution by coordinate fixing.
    Wring(InputArgs),
    /// Low-error subcode with a common tail.
    Expurgate(InputArgs),
    /// Monte-Carlo error probability of a random MAC code.
    Simulate(SimulateArgs),
    /// Plain and multicast error probabilities on the interference channel.
    IcSimulate(IcSimulateArgs),
    /// Error probability across rate multipliers and blocklengths, as CSV.
    Scan(ScanArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct RegionArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    powers: Vec<f64>,
    /// Rate tuple to test; exit status 0 when inside, 1 when outside.
    #[arg(long, value_delimiter = ',')]
    rates: Option<Vec<f64>>,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,
    /// CSV destination (default stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct BoundArgs {
    #[arg(long)]
    n: u64,
    /// Asymptotic average error probability of the code, in [0, 1).
    #[arg(long)]
    epsilon: f64,
    #[arg(long, value_delimiter = ',', required = true)]
    powers: Vec<f64>,
    /// 1-based source labels (default: all sources).
    #[arg(long, value_delimiter = ',')]
    subset: Option<Vec<usize>>,
}

#[derive(Debug, Args, Serialize)]
pub struct BoundScanArgs {
    #[arg(long)]
    epsilon: f64,
    #[arg(long, value_delimiter = ',', required = true)]
    powers: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    subset: Option<Vec<usize>>,
    #[arg(long, default_value_t = 1000)]
    n_min: u64,
    #[arg(long, default_value_t = 1_000_000_000)]
    n_max: u64,
    /// Grid points per factor of ten.
    #[arg(long, default_value_t = 1)]
    per_decade: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct InputArgs {
    /// JSON input document (`-` for stdin).
    #[arg(long, default_value = "-")]
    input: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args, Serialize)]
#[group(id = "code_size", required = true, multiple = false, args = ["rates", "sizes"])]
pub struct SizeArgs {
    /// Per-source rates in bits per channel use; `M_i = ⌈2^{nR_i}⌉`.
    #[arg(long, value_delimiter = ',')]
    rates: Option<Vec<f64>>,
    /// Per-source message-set sizes.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<u64>>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    powers: Vec<f64>,
    #[command(flatten)]
    size: SizeArgs,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "sphere")]
    codebook: CodebookKind,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    out: Format,
    /// Largest message-tuple count for exhaustive decoding.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: u128,
    /// Read the codebook from a binary file instead of generating it.
    #[arg(long)]
    load_codebook: Option<PathBuf>,
    /// Write the codebook used to a binary file.
    #[arg(long)]
    save_codebook: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct IcSimulateArgs {
    #[arg(long)]
    n: usize,
    /// `P₁,P₂`.
    #[arg(long, value_delimiter = ',', required = true)]
    powers: Vec<f64>,
    /// Cross gains `g₁₂,g₂₁`.
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    gains: Vec<f64>,
    #[command(flatten)]
    size: SizeArgs,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    /// Trials per message when choosing the anchor messages.
    #[arg(long, default_value_t = 500)]
    anchor_trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "sphere")]
    codebook: CodebookKind,
    /// Correlation of the two noise processes.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    rho: f64,
    /// Samples for the distributional check of the multicast construction (0 skips it).
    #[arg(long, default_value_t = 0)]
    ks_samples: usize,
    #[arg(long, default_value_t = 0)]
    ks_coordinate: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    out: Format,
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: u128,
    #[arg(long)]
    load_codebook: Option<PathBuf>,
    #[arg(long)]
    save_codebook: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ScanArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    powers: Vec<f64>,
    /// Multiples of the per-source share of the sum capacity.
    #[arg(long, value_delimiter = ',', required = true)]
    multipliers: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    n_list: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "sphere")]
    codebook: CodebookKind,
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: u128,
    /// CSV destination (default stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

pub enum Failure {
    Domain(String),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Domain(format!("i/o failure: {e}"))
    }
}

type Outcome = Result<u8, Failure>;

pub fn run(command: Command) -> Outcome {
    match command {
        Command::Region(a) => region(&a),
        Command::Bound(a) => bound(&a),
        Command::BoundScan(a) => bound_scan(&a),
        Command::Bht(a) => bht_cmd(&a),
        Command::Wring(a) => wring(&a),
        Command::Expurgate(a) => expurgate(&a),
        Command::Simulate(a) => simulate(&a),
        Command::IcSimulate(a) => ic_simulate(&a),
        Command::Scan(a) => scan(&a),
    }
}

#[derive(Serialize)]
struct WithDocument<'a, D: Serialize> {
    input: &'a Path,
    document: &'a D,
}

fn read_document<D: for<'de> Deserialize<'de>>(path: &Path) -> Result<D, Failure> {
    let mut text = String::new();
    let read = if path == Path::new("-") {
        io::stdin().read_to_string(&mut text)
    } else {
        File::open(path).and_then(|mut f| f.read_to_string(&mut text))
    };
    read.map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::Usage(format!("malformed input document {}: {e}", path.display())))
}

fn subset_for(labels: &Option<Vec<usize>>, sources: usize) -> Result<SubsetSpec, Failure> {
    Ok(match labels {
        Some(l) => SubsetSpec::from_labels(l, sources)?,
        None => SubsetSpec::full(sources),
    })
}

fn region(a: &RegionArgs) -> Outcome {
    let powers = PowerVector::new(a.powers.clone())?;
    let run = Run::new("region", a, None);
    match &a.rates {
        None => {
            let mut csv = String::from("subset_bitmask,bound_bits\n");
            for c in regions::cover_wyner_constraints(&powers)? {
                csv.push_str(&format!("{},{}\n", c.subset.mask(), c.bound));
            }
            run.emit_csv(&csv, a.out.as_deref())?;
            Ok(0)
        }
        Some(rates) => {
            let rates = RateTuple::new(rates.clone())?;
            let membership = regions::contains_with_tolerance(&powers, &rates, a.tolerance)?;
            run.emit_json(&membership, a.out.as_deref())?;
            Ok(if membership.inside { 0 } else { 1 })
        }
    }
}

fn bound(a: &BoundArgs) -> Outcome {
    let powers = PowerVector::new(a.powers.clone())?;
    let subset = subset_for(&a.subset, powers.len())?;
    let run = Run::new("bound", a, None);
    let report = bounds::sum_rate_upper_bound(&BoundInputs::new(a.n, a.epsilon, powers, subset)?)?;
    run.emit_json(&report, None)?;
    Ok(0)
}

fn log_grid(n_min: u64, n_max: u64, per_decade: u32) -> Result<Vec<u64>, Failure> {
    if n_min < 2 || n_max < n_min || per_decade == 0 {
        return Err(Failure::Usage(
            "need 2 ≤ n-min ≤ n-max and at least one point per decade".into(),
        ));
    }
    let mut grid = Vec::new();
    for k in 0.. {
        let n = (n_min as f64 * 10f64.powf(k as f64 / per_decade as f64)).round() as u64;
        if n > n_max {
            break;
        }
        if grid.last() != Some(&n) {
            grid.push(n);
        }
    }
    Ok(grid)
}

fn bound_scan(a: &BoundScanArgs) -> Outcome {
    let powers = PowerVector::new(a.powers.clone())?;
    let subset = subset_for(&a.subset, powers.len())?;
    let run = Run::new("bound-scan", a, None);
    let mut csv = String::from("n,per_symbol_bound,second_order_gap\n");
    for n in log_grid(a.n_min, a.n_max, a.per_decade)? {
        let r = bounds::sum_rate_upper_bound(&BoundInputs::new(n, a.epsilon, powers.clone(), subset)?)?;
        csv.push_str(&format!("{},{},{}\n", n, r.per_symbol_rate_upper, r.second_order_gap));
    }
    run.emit_csv(&csv, a.out.as_deref())?;
    Ok(0)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BhtDocument {
    p: Vec<f64>,
    q: Vec<f64>,
    delta: f64,
}

fn bht_cmd(a: &InputArgs) -> Outcome {
    let doc: BhtDocument = read_document(&a.input)?;
    let params = WithDocument { input: &a.input, document: &doc };
    let run = Run::new("bht", &params, None);
    let p = FiniteDistribution::new(doc.p.clone())?;
    let q = FiniteDistribution::new(doc.q.clone())?;
    let result = bht::beta(doc.delta, &p, &q)?;
    run.emit_json(&result, None)?;
    Ok(0)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WringDocument {
    n: usize,
    alphabet: u32,
    p: SparsePmf,
    u: SparsePmf,
    c: f64,
    delta: f64,
    lambda: f64,
}

#[derive(Serialize)]
struct Certified<R: Serialize, C: Serialize> {
    result: R,
    check: C,
}

fn wring(a: &InputArgs) -> Outcome {
    let doc: WringDocument = read_document(&a.input)?;
    let params = WithDocument { input: &a.input, document: &doc };
    let run = Run::new("wring", &params, None);
    let inst = ProductApproxInstance::new(
        doc.n,
        doc.alphabet,
        doc.p.clone(),
        doc.u.clone(),
        doc.c,
        doc.lambda,
        doc.delta,
    )?;
    let (result, check) = wringing::wring_verified(&inst)?;
    run.emit_json(&Certified { result, check }, None)?;
    Ok(0)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExpurgateDocument {
    #[serde(rename = "M")]
    message_sizes: Vec<u64>,
    epsilon: f64,
    errors: Vec<f64>,
    /// 1-based labels; all sources when absent.
    #[serde(default)]
    subset: Option<Vec<usize>>,
}

fn expurgate(a: &InputArgs) -> Outcome {
    let doc: ExpurgateDocument = read_document(&a.input)?;
    let params = WithDocument { input: &a.input, document: &doc };
    let run = Run::new("expurgate", &params, None);
    let profile = CodeErrorProfile::new(doc.message_sizes.clone(), doc.errors.clone())?;
    let subset = subset_for(&doc.subset, profile.sources())?;
    let result = expurgation::expurgate(&profile, doc.epsilon, subset)?;
    let check = expurgation::verify(&profile, &result);
    run.emit_json(&Certified { result, check }, None)?;
    Ok(0)
}

fn message_sizes(size: &SizeArgs, n: usize, sources: usize) -> Result<Vec<u64>, Failure> {
    let sizes = match (&size.sizes, &size.rates) {
        (Some(s), _) => s.clone(),
        (None, Some(rates)) => {
            if let Some(r) = rates.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
                return Err(Failure::Domain(format!("rates must be non-negative, got {r}")));
            }
            let sizes: Vec<f64> = rates.iter().map(|&r| macsim::message_size_for_rate(n, r)).collect();
            if let Some(m) = sizes.iter().find(|&&m| m > u64::MAX as f64 / 2.0) {
                return Err(Error::CapExceeded { count: *m as u128, cap: DEFAULT_CAP }.into());
            }
            sizes.into_iter().map(|m| m as u64).collect()
        }
        (None, None) => return Err(Failure::Usage("either --rates or --sizes is required".into())),
    };
    if sizes.len() != sources {
        return Err(Error::DimensionMismatch {
            expected: sources,
            got: sizes.len(),
        }
        .into());
    }
    Ok(sizes)
}

fn load_or_generate(
    cfg: &GaussianMacConfig,
    kind: CodebookKind,
    seed: u64,
    load: Option<&Path>,
    save: Option<&Path>,
) -> Result<Codebook, Failure> {
    let book = match load {
        Some(path) => {
            let file = File::open(path)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
            let book = Codebook::read_from(BufReader::new(file))?;
            book.matches(cfg)?;
            book
        }
        None => macsim::generate_codebook(cfg, kind, seed)?,
    };
    if let Some(path) = save {
        book.write_to(BufWriter::new(File::create(path)?))?;
    }
    Ok(book)
}

fn simulate(a: &SimulateArgs) -> Outcome {
    let run = Run::new("simulate", a, Some(a.seed));
    let powers = PowerVector::new(a.powers.clone())?;
    let sizes = message_sizes(&a.size, a.n, powers.len())?;
    let cfg = GaussianMacConfig::new(a.n, powers, sizes)?.with_cap(a.cap);
    cfg.require_within_cap()?;
    let book = load_or_generate(&cfg, a.codebook, a.seed, a.load_codebook.as_deref(), a.save_codebook.as_deref())?;
    let result = macsim::simulate_mac_error(&cfg, &book, a.trials, a.seed)?;
    match a.out {
        Format::Json => run.emit_json(&result, None)?,
        Format::Csv => {
            let mi: Vec<String> = cfg.message_sizes().iter().map(u64::to_string).collect();
            let csv = format!(
                "n,Mi,trials,errors,error,ci_lo,ci_hi,seed\n{},{},{},{},{},{},{},{}\n",
                a.n,
                mi.join(";"),
                result.trials,
                result.errors,
                result.error_probability,
                result.ci_low,
                result.ci_high,
                result.seed
            );
            run.emit_csv(&csv, None)?
        }
    }
    Ok(0)
}

#[derive(Serialize)]
struct IcOutput {
    report: macsim::IcSimReport,
    identity_test: Option<macsim::KsResult>,
}

fn pair(values: &[f64], what: &str) -> Result<[f64; 2], Failure> {
    match values {
        [a, b] => Ok([*a, *b]),
        _ => Err(Failure::Usage(format!("--{what} takes exactly two values"))),
    }
}

fn ic_simulate(a: &IcSimulateArgs) -> Outcome {
    let run = Run::new("ic-simulate", a, Some(a.seed));
    let [p1, p2] = pair(&a.powers, "powers")?;
    let [g12, g21] = pair(&a.gains, "gains")?;
    let params = IcParams::new(p1, p2, g12, g21)?;
    let sizes = message_sizes(&a.size, a.n, 2)?;
    let ic = IcConfig::new(a.n, params, [sizes[0], sizes[1]])?
        .with_noise_correlation(a.rho)?
        .with_cap(a.cap);
    let cfg = ic.codebook_config()?;
    cfg.require_within_cap()?;
    let book = load_or_generate(&cfg, a.codebook, a.seed, a.load_codebook.as_deref(), a.save_codebook.as_deref())?;
    let report = macsim::simulate_ic(&ic, &book, a.trials, a.anchor_trials, a.seed)?;
    let identity_test = if a.ks_samples > 0 {
        let dec = macsim::ic_multicast_decoders(&ic, &book, report.anchors.anchors)?;
        Some(macsim::identity_ks_test(&ic, &dec, a.ks_samples, a.ks_coordinate, a.seed)?)
    } else {
        None
    };
    match a.out {
        Format::Json => run.emit_json(&IcOutput { report, identity_test }, None)?,
        Format::Csv => {
            let mut csv = String::from(
                "destination,plain_error,plain_ci_lo,plain_ci_hi,multicast_error,multicast_ci_lo,multicast_ci_hi,allowance,holds\n",
            );
            for k in 0..2 {
                let (p, m) = (&report.plain[k], &report.multicast[k]);
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    k + 1,
                    p.error_probability,
                    p.ci_low,
                    p.ci_high,
                    m.error_probability,
                    m.ci_low,
                    m.ci_high,
                    report.allowance[k],
                    report.bound_holds[k]
                ));
            }
            run.emit_csv(&csv, None)?
        }
    }
    Ok(0)
}

fn scan(a: &ScanArgs) -> Outcome {
    let run = Run::new("scan", a, Some(a.seed));
    let powers = PowerVector::new(a.powers.clone())?;
    let options = ScanOptions {
        kind: a.codebook,
        cap: a.cap,
    };
    let rows = macsim::phase_transition_scan(&powers, &a.multipliers, &a.n_list, a.trials, a.seed, &options)?;
    run.emit_csv(&macsim::scan_csv(&rows), a.out.as_deref())?;
    Ok(0)
}
