//! Command-line front end: `synth`, `verify`, `eval` and `gen`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::aig::{cleanup, parse_aiger_bytes, write_aiger, AigNetwork};
use crate::checker::{check_pair, miter_cnf, VerdictKind, DEFAULT_CONFLICT_LIMIT};
use crate::error::{Error, Result};
use crate::flow::{
    self, estimate_batched, exact_max_error, generate, parse_phases, FlowConfig, MaxError,
    SimilarityCap, DEFAULT_SEED,
};
use crate::lac::lac_order;
use crate::metrics::{deviation, frac_bound, lb_max_error, parse_bound, ErrorSpec, Metric};
use crate::sim::{gen_patterns, simulate, PatternPool};
use crate::testbench;

/// Exit status: success, bound holds.
pub const EXIT_OK: i32 = 0;
/// Exit status: bound violated, or an internal certification failure.
pub const EXIT_VIOLATED: i32 = 1;
/// Exit status: unreadable input or bad configuration.
pub const EXIT_USAGE: i32 = 2;
/// Exit status: the checker could not decide within its budget.
pub const EXIT_UNDECIDED: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "simals", version, about = "Approximate logic synthesis under a maximum-error bound")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simplify a circuit within the error bound.
    Synth(SynthArgs),
    /// Check that an approximate circuit respects the bound.
    Verify(VerifyArgs),
    /// Report the simulated and, optionally, exact maximum error.
    Eval(EvalArgs),
    /// Write a generated reference circuit.
    Gen(GenArgs),
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
struct BoundArgs {
    /// Maximum error distance bound (decimal or scientific notation).
    #[arg(long = "max-ed", value_name = "BOUND")]
    max_ed: Option<String>,
    /// Maximum Hamming distance bound.
    #[arg(long = "max-hd", value_name = "BOUND")]
    max_hd: Option<String>,
    /// Maximum error distance bound floor(2^(O/D)) for O outputs.
    #[arg(long = "max-ed-frac", value_name = "D")]
    max_ed_frac: Option<u32>,
}

impl BoundArgs {
    fn spec(&self, num_pos: usize) -> Result<ErrorSpec> {
        if let Some(b) = &self.max_ed {
            return Ok(ErrorSpec::new(Metric::MaxEd, parse_bound(b)?));
        }
        if let Some(b) = &self.max_hd {
            return Ok(ErrorSpec::new(Metric::MaxHd, parse_bound(b)?));
        }
        match self.max_ed_frac {
            Some(0) => Err(Error::Bound("divisor must be positive".into())),
            Some(d) => Ok(ErrorSpec::new(Metric::MaxEd, frac_bound(num_pos, d))),
            None => Err(Error::Bound("no bound given".into())),
        }
    }
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long = "in", value_name = "AIGER")]
    input: PathBuf,
    #[arg(long = "out", value_name = "AIGER")]
    output: PathBuf,
    /// JSON run report.
    #[arg(long)]
    report: Option<PathBuf>,
    /// TSV dump of the first iteration's candidates with their lower bounds.
    #[arg(long, value_name = "FILE")]
    tsv: Option<PathBuf>,
    #[command(flatten)]
    bound: BoundArgs,
    #[command(flatten)]
    tuning: Tuning,
    /// Disable simulation-based pruning and top-K truncation.
    #[arg(long)]
    no_prune: bool,
    /// Disable counter-example reuse.
    #[arg(long)]
    no_reuse: bool,
    /// Keep only the newest N counter-examples.
    #[arg(long, value_name = "N")]
    counterexample_cap: Option<usize>,
    /// Exit 0 even if the final check is undecided.
    #[arg(long)]
    allow_unverified: bool,
    /// Wall-clock limit for the final certification, in seconds.
    #[arg(long, value_name = "SECS")]
    timeout: Option<f64>,
    /// PO 0 is the most significant bit in the input and output files.
    #[arg(long)]
    msb_first: bool,
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct Tuning {
    /// Patterns of the first pruning round.
    #[arg(long = "m-small", default_value_t = 1 << 10)]
    m_small: usize,
    /// Patterns of the full pool.
    #[arg(long, default_value_t = 1 << 13)]
    m: usize,
    /// Candidates kept after sorting.
    #[arg(long, default_value_t = 100)]
    k: usize,
    /// Conflict budget per check.
    #[arg(long, default_value_t = DEFAULT_CONFLICT_LIMIT)]
    conflicts: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Comma-separated from const-po, const-internal, substitution, mixed.
    #[arg(long)]
    phases: Option<String>,
    /// Only substitute by signals in their true polarity.
    #[arg(long)]
    no_complement: bool,
    /// auto, off, or a column count.
    #[arg(long, default_value = "auto")]
    similarity_cap: String,
}

impl Tuning {
    fn config(&self) -> Result<FlowConfig> {
        let similarity_cap = match self.similarity_cap.as_str() {
            "auto" => SimilarityCap::Auto,
            "off" => SimilarityCap::Off,
            n => SimilarityCap::Limit(
                n.parse()
                    .map_err(|_| Error::Config(format!("bad similarity cap {n:?}")))?,
            ),
        };
        let config = FlowConfig {
            m_small: self.m_small,
            m: self.m,
            k: self.k,
            conflict_limit: self.conflicts,
            seed: self.seed,
            phases: self.phases.as_deref().map(parse_phases).transpose()?,
            allow_complement: !self.no_complement,
            similarity_cap,
            ..FlowConfig::default()
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, value_name = "AIGER")]
    golden: PathBuf,
    #[arg(long, value_name = "AIGER")]
    approx: PathBuf,
    #[command(flatten)]
    bound: BoundArgs,
    /// Wall-clock limit in seconds; unlimited by default.
    #[arg(long, value_name = "SECS")]
    timeout: Option<f64>,
    /// Conflict budget; unlimited by default.
    #[arg(long)]
    conflicts: Option<u64>,
    /// Write the miter CNF in DIMACS format.
    #[arg(long, value_name = "FILE")]
    dimacs: Option<PathBuf>,
    #[arg(long)]
    msb_first: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MetricArg {
    Maxed,
    Maxhd,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long, value_name = "AIGER")]
    golden: PathBuf,
    #[arg(long, value_name = "AIGER")]
    approx: PathBuf,
    #[arg(long, value_enum, default_value = "maxed")]
    metric: MetricArg,
    #[arg(long, default_value_t = 1 << 13)]
    m: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Simulate every input pattern instead of a random pool.
    #[arg(long)]
    exhaustive: bool,
    /// Also compute the exact maximum error with the checker.
    #[arg(long)]
    exact: bool,
    #[arg(long, value_name = "SECS")]
    timeout: Option<f64>,
    #[arg(long)]
    msb_first: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FamilyArg {
    HalfAdder,
    Adder,
    Multiplier,
    Random,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    /// Operand width for adders and multipliers.
    #[arg(long, default_value_t = 8)]
    width: usize,
    /// AND count for random circuits.
    #[arg(long, default_value_t = 100)]
    nodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "out", value_name = "AIGER")]
    output: PathBuf,
}

/// Parses arguments and runs a subcommand, returning the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let invocation: Vec<String> = args
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let result = match cli.command {
        Command::Synth(a) => cmd_synth(a, invocation),
        Command::Verify(a) => cmd_verify(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Gen(a) => cmd_gen(a),
    };
    match result {
        Ok(code) => code,
        Err(Error::CertificationFailed) => {
            eprintln!("error: {}", Error::CertificationFailed);
            EXIT_VIOLATED
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn read_network(path: &Path, msb_first: bool) -> Result<AigNetwork> {
    let data = fs::read(path)?;
    let mut net = parse_aiger_bytes(&data)?;
    if msb_first {
        net.reverse_pos();
    }
    if net.name.is_empty() {
        net.name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
    }
    Ok(net)
}

fn write_network(path: &Path, net: &AigNetwork, msb_first: bool) -> Result<()> {
    let mut net = net.clone();
    if msb_first {
        net.reverse_pos();
    }
    fs::write(path, write_aiger(&net))?;
    Ok(())
}

fn deadline(secs: Option<f64>) -> Result<Option<Instant>> {
    match secs {
        None => Ok(None),
        Some(s) if s.is_finite() && s >= 0.0 => Ok(Some(Instant::now() + Duration::from_secs_f64(s))),
        Some(s) => Err(Error::Config(format!("bad timeout {s}"))),
    }
}

fn set_threads(n: Option<usize>) {
    if let Some(n) = n {
        // a second initialisation in the same process is harmless to ignore
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn bits(x: &[bool]) -> String {
    x.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

fn cmd_synth(a: SynthArgs, invocation: Vec<String>) -> Result<i32> {
    set_threads(a.threads);
    let golden = read_network(&a.input, a.msb_first)?;
    let spec = a.bound.spec(golden.num_pos())?;
    let mut config = a.tuning.config()?;
    config.pruning = !a.no_prune;
    config.reuse_counterexamples = !a.no_reuse;
    config.counterexample_cap = a.counterexample_cap;
    config.final_timeout_ms = match a.timeout {
        Some(s) if s.is_finite() && s >= 0.0 => Some((s * 1000.0) as u64),
        Some(s) => return Err(Error::Config(format!("bad timeout {s}"))),
        None => None,
    };
    if let Some(path) = &a.tsv {
        fs::write(path, first_candidates(&golden, &spec, &config)?.to_tsv())?;
    }
    let (out, mut report) = flow::run(&golden, &spec, &config)?;
    report.invocation = invocation;
    if let Some(path) = &a.report {
        let json = serde_json::to_string_pretty(&report)
            .map_err(|e| Error::Config(format!("report serialisation: {e}")))?;
        fs::write(path, json + "\n")?;
    }
    println!(
        "{}: {} -> {} AND nodes in {} iterations, {} SAT calls",
        golden.name,
        report.initial_nodes,
        report.final_nodes,
        report.totals.iterations,
        report.totals.sat_calls
    );
    if report.certified() {
        write_network(&a.output, &out, a.msb_first)?;
        println!("certified: {} <= {}", spec.metric, spec.bound);
        Ok(EXIT_OK)
    } else if a.allow_unverified {
        write_network(&a.output, &out, a.msb_first)?;
        println!("unverified: final check undecided, written on request");
        Ok(EXIT_OK)
    } else {
        eprintln!("unverified: final check undecided; rerun with --allow-unverified to keep the netlist");
        Ok(EXIT_UNDECIDED)
    }
}

/// Candidates of the first iteration with lower bounds over the full pool, sorted.
fn first_candidates(
    golden: &AigNetwork,
    spec: &ErrorSpec,
    config: &FlowConfig,
) -> Result<crate::lac::CandidateSet> {
    let current = cleanup(golden);
    let pool = gen_patterns(golden.num_pis(), config.m, config.seed);
    let g_sim = simulate(golden, &pool)?;
    let c_sim = simulate(&current, &pool)?;
    let phase = config.resolved_phases(golden.num_ands())[0];
    let cap = config.resolved_similarity_cap(golden.num_ands());
    let mut cands = generate(phase, &current, &c_sim, config, cap);
    estimate_batched(&mut cands, golden, &g_sim, &current, &c_sim, spec, config.cpm_memory_cap)?;
    cands.lacs.sort_by(lac_order);
    Ok(cands)
}

fn cmd_verify(a: VerifyArgs) -> Result<i32> {
    let golden = read_network(&a.golden, a.msb_first)?;
    let approx = read_network(&a.approx, a.msb_first)?;
    let spec = a.bound.spec(golden.num_pos())?;
    if let Some(path) = &a.dimacs {
        fs::write(path, miter_cnf(&golden, &approx, &spec)?.to_dimacs())?;
    }
    let verdict = check_pair(&golden, &approx, &spec, a.conflicts.unwrap_or(u64::MAX), deadline(a.timeout)?)?;
    match verdict.kind {
        VerdictKind::Unsat => {
            println!("holds: {} <= {}", spec.metric, spec.bound);
            Ok(EXIT_OK)
        }
        VerdictKind::Sat => {
            let x = verdict.counterexample.expect("sat verdict carries a pattern");
            let d = deviation(&spec, &golden.eval(&x), &approx.eval(&x))?;
            println!("violated: {} > {}", spec.metric, spec.bound);
            println!("counterexample: {}", bits(&x));
            println!("deviation: {d}");
            Ok(EXIT_VIOLATED)
        }
        VerdictKind::Unknown => {
            println!("undecided after {} conflicts", verdict.conflicts_used);
            Ok(EXIT_UNDECIDED)
        }
    }
}

fn cmd_eval(a: EvalArgs) -> Result<i32> {
    let golden = read_network(&a.golden, a.msb_first)?;
    let approx = read_network(&a.approx, a.msb_first)?;
    crate::metrics::check_interfaces(&golden, &approx)?;
    let metric = match a.metric {
        MetricArg::Maxed => Metric::MaxEd,
        MetricArg::Maxhd => Metric::MaxHd,
    };
    let pool = if a.exhaustive {
        if golden.num_pis() > crate::metrics::DEFAULT_EXHAUSTIVE_LIMIT {
            return Err(Error::ExhaustiveLimit {
                num_pis: golden.num_pis(),
                limit: crate::metrics::DEFAULT_EXHAUSTIVE_LIMIT,
            });
        }
        PatternPool::exhaustive(golden.num_pis())
    } else {
        if a.m == 0 {
            return Err(Error::Config("m must be positive".into()));
        }
        gen_patterns(golden.num_pis(), a.m, a.seed)
    };
    let g = simulate(&golden, &pool)?;
    let x = simulate(&approx, &pool)?;
    let spec = ErrorSpec::new(metric, 0u32);
    let lb = lb_max_error(&g.po_values(&golden), &x.po_values(&approx), &spec, &g.valid_mask());
    println!("metric: {metric}");
    println!("patterns: {}", pool.num_columns());
    println!("lower_bound: {lb}");
    if a.exact {
        let timeout = a.timeout.map(Duration::from_secs_f64);
        match exact_max_error(&golden, &approx, metric, timeout)? {
            MaxError::Exact(v) => println!("exact: {v}"),
            MaxError::Interval { lo, hi } => {
                println!("interval: [{lo}, {hi}]");
                return Ok(EXIT_UNDECIDED);
            }
        }
    }
    Ok(EXIT_OK)
}

fn cmd_gen(a: GenArgs) -> Result<i32> {
    let g = match a.family {
        FamilyArg::HalfAdder => testbench::half_adder(),
        FamilyArg::Adder if a.width >= 1 => testbench::gen_ripple_adder(a.width),
        FamilyArg::Multiplier if a.width >= 1 => testbench::gen_array_multiplier(a.width),
        FamilyArg::Random if a.nodes >= 1 => testbench::gen_random_aig(a.nodes, a.seed),
        _ => return Err(Error::Config("width and nodes must be positive".into())),
    };
    fs::write(&a.output, write_aiger(&g.network))?;
    println!(
        "{}: {} PIs, {} POs, {} AND nodes",
        g.network.name,
        g.network.num_pis(),
        g.network.num_pos(),
        g.network.num_ands()
    );
    Ok(EXIT_OK)
}
