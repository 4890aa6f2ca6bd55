//! The synthesis loop: generate candidates, bound their error by simulation,
//! prune, sort, then greedily certify and apply them with the SAT checker.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::aig::{apply_lac_with_map, cleanup, cleanup_with_map, AigNetwork, Literal, Var};
use crate::checker::{check_pair, solve_until, miter_cnf, VerdictKind, DEFAULT_CONFLICT_LIMIT};
use crate::cpm::Cpm;
use crate::error::{Error, Result};
use crate::lac::{
    estimate_lbs, gen_constant_lacs, gen_substitution_lacs, lac_order, prune, sort_and_truncate,
    CandidateSet, ConstScope, Lac, LacKey, Replacement, Stage, Target,
};
use crate::metrics::{brute_force_max_error, check_interfaces, deviation, ErrorSpec, Metric};
use crate::sim::{eval_on_counterexamples, gen_patterns, simulate, PatternPool, SimState, PRNG_NAME};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    /// Constant changes on output stubs.
    ConstPo,
    /// Constant changes on internal nodes and PIs.
    ConstInternal,
    /// Substitutions by other signals.
    Substitution,
    /// Every kind in one candidate set.
    Mixed,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::ConstPo => "const-po",
            Phase::ConstInternal => "const-internal",
            Phase::Substitution => "substitution",
            Phase::Mixed => "mixed",
        })
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "const-po" => Ok(Phase::ConstPo),
            "const-internal" => Ok(Phase::ConstInternal),
            "substitution" => Ok(Phase::Substitution),
            "mixed" => Ok(Phase::Mixed),
            other => Err(Error::Config(format!("unknown phase {other:?}"))),
        }
    }
}

/// Parses a comma-separated phase list.
pub fn parse_phases(s: &str) -> Result<Vec<Phase>> {
    let phases = s.split(',').map(str::parse).collect::<Result<Vec<_>>>()?;
    if phases.is_empty() {
        return Err(Error::Config("empty phase list".into()));
    }
    Ok(phases)
}

/// Circuits above this many AND nodes default to the staged schedule.
pub const STAGED_SCHEDULE_THRESHOLD: usize = 2000;
/// Circuits above this many AND nodes get a substitution similarity cap by default.
pub const SIMILARITY_CAP_THRESHOLD: usize = 5000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityCap {
    /// Off for small circuits, one eighth of the pattern count above the threshold.
    Auto,
    Off,
    Limit(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub m_small: usize,
    pub m: usize,
    pub k: usize,
    pub conflict_limit: u64,
    pub seed: u64,
    /// `None` picks a schedule from the circuit size.
    pub phases: Option<Vec<Phase>>,
    pub allow_complement: bool,
    pub similarity_cap: SimilarityCap,
    /// PI count up to which results are also checked by enumeration.
    pub exhaustive_verify_limit: usize,
    /// Simulation-based pruning and top-K truncation.
    pub pruning: bool,
    /// Counter-example storage and the simulation fast path.
    pub reuse_counterexamples: bool,
    pub counterexample_cap: Option<usize>,
    /// Bytes allowed for one change propagation matrix before batching.
    pub cpm_memory_cap: usize,
    pub max_iterations: usize,
    /// Conflict budget of the final certification.
    pub final_conflict_limit: u64,
    pub final_timeout_ms: Option<u64>,
}

pub const DEFAULT_SEED: u64 = 0x5eed;

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            m_small: 1 << 10,
            m: 1 << 13,
            k: 100,
            conflict_limit: DEFAULT_CONFLICT_LIMIT,
            seed: DEFAULT_SEED,
            phases: None,
            allow_complement: true,
            similarity_cap: SimilarityCap::Auto,
            exhaustive_verify_limit: 12,
            pruning: true,
            reuse_counterexamples: true,
            counterexample_cap: None,
            cpm_memory_cap: 1 << 30,
            max_iterations: 10_000,
            final_conflict_limit: u64::MAX,
            final_timeout_ms: None,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.m_small == 0 {
            return Err(Error::Config("pattern counts must be positive".into()));
        }
        if self.m_small > self.m {
            return Err(Error::Config(format!(
                "m_small ({}) exceeds m ({})",
                self.m_small, self.m
            )));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if matches!(&self.phases, Some(p) if p.is_empty()) {
            return Err(Error::Config("empty phase list".into()));
        }
        Ok(())
    }

    pub fn resolved_phases(&self, num_ands: usize) -> Vec<Phase> {
        match &self.phases {
            Some(p) => p.clone(),
            None if num_ands > STAGED_SCHEDULE_THRESHOLD => {
                vec![Phase::ConstPo, Phase::ConstInternal, Phase::Substitution]
            }
            None => vec![Phase::Mixed],
        }
    }

    pub fn resolved_similarity_cap(&self, num_ands: usize) -> Option<usize> {
        match self.similarity_cap {
            SimilarityCap::Off => None,
            SimilarityCap::Limit(c) => Some(c),
            SimilarityCap::Auto if num_ands > SIMILARITY_CAP_THRESHOLD => Some(self.m / 8),
            SimilarityCap::Auto => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub phase: Option<Phase>,
    pub generated: usize,
    /// Survivors of the first, small-pool pruning round.
    pub after_small_round: usize,
    /// Survivors of the second, full-pool round.
    pub after_full_round: usize,
    pub selected: usize,
    pub sat_calls: usize,
    pub sat: usize,
    pub unsat: usize,
    pub unknown: usize,
    pub skipped_blacklist: usize,
    pub skipped_conflict: usize,
    pub skipped_dead: usize,
    pub skipped_loop: usize,
    pub skipped_counterexample: usize,
    pub applied: usize,
    pub applied_lacs: Vec<String>,
    pub nodes_before: usize,
    pub nodes_after: usize,
    pub pool_counterexamples: usize,
    pub elapsed_ms: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub iterations: usize,
    pub generated: usize,
    pub sat_calls: usize,
    pub sat: usize,
    pub unsat: usize,
    pub unknown: usize,
    pub skipped_counterexample: usize,
    pub applied: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certification {
    /// `unsat` means the bound is proven.
    pub verdict: VerdictKind,
    pub conflicts: u64,
    /// Exact maximum error by enumeration, when the PI count allows it.
    pub exhaustive_max_error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    pub circuit: String,
    pub metric: Metric,
    pub bound: String,
    pub num_pis: usize,
    pub num_pos: usize,
    pub initial_nodes: usize,
    pub final_nodes: usize,
    pub config: FlowConfig,
    pub phases: Vec<Phase>,
    pub similarity_cap: Option<usize>,
    pub prng: String,
    pub iterations: Vec<IterationRecord>,
    pub totals: Totals,
    pub certification: Certification,
    /// Command line that produced the run, when invoked from the CLI.
    pub invocation: Vec<String>,
    pub wall_time_ms: u64,
    pub certification_ms: u64,
}

impl RunReport {
    /// Whether the final certification proved the bound.
    pub fn certified(&self) -> bool {
        self.certification.verdict == VerdictKind::Unsat
    }

    /// Copy with every wall-clock field zeroed, for run-to-run comparison.
    pub fn without_timings(&self) -> RunReport {
        let mut r = self.clone();
        r.wall_time_ms = 0;
        r.certification_ms = 0;
        for it in &mut r.iterations {
            it.elapsed_ms = 0;
        }
        r
    }
}

/// Candidates of one phase for the current circuit, without those of zero gain.
pub fn generate(
    phase: Phase,
    net: &AigNetwork,
    state: &SimState,
    config: &FlowConfig,
    similarity_cap: Option<usize>,
) -> CandidateSet {
    let subst = || gen_substitution_lacs(net, state, config.allow_complement, similarity_cap);
    let mut cands = match phase {
        Phase::ConstPo => gen_constant_lacs(net, ConstScope::PoDrivers),
        Phase::ConstInternal => gen_constant_lacs(net, ConstScope::Internal),
        Phase::Substitution => subst(),
        Phase::Mixed => {
            let mut c = gen_constant_lacs(net, ConstScope::PoDrivers);
            c.extend(gen_constant_lacs(net, ConstScope::All));
            c.extend(subst());
            c
        }
    };
    // a change that frees no node spends error budget for nothing
    cands.lacs.retain(|l| l.gain > 0);
    cands
}

/// Lower bounds over every column of the given states, building the change
/// propagation matrix in batches of targets when it would exceed `memory_cap`.
pub fn estimate_batched(
    cands: &mut CandidateSet,
    golden: &AigNetwork,
    golden_sim: &SimState,
    current: &AigNetwork,
    current_sim: &SimState,
    spec: &ErrorSpec,
    memory_cap: usize,
) -> Result<()> {
    let targets: Vec<Var> = cands
        .lacs
        .iter()
        .filter_map(Lac::target_var)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let per_row = Cpm::bytes_for(1, current.num_pos(), current_sim).max(1);
    let batch = (memory_cap / per_row).max(1);
    if targets.len() <= batch {
        let cpm = Cpm::build_for(current, current_sim, &targets);
        return estimate_lbs(cands, golden_sim, current_sim, golden.pos(), &cpm, spec, None);
    }
    let mut done = vec![false; cands.len()];
    for (b, chunk) in targets.chunks(batch).enumerate() {
        let cpm = Cpm::build_for(current, current_sim, chunk);
        let idx: Vec<usize> = (0..cands.len())
            .filter(|&i| match cands.lacs[i].target {
                Target::Node(v) => chunk.binary_search(&v).is_ok(),
                Target::Po(_) => b == 0,
            })
            .collect();
        let mut sub = CandidateSet::new(idx.iter().map(|&i| cands.lacs[i].clone()).collect());
        estimate_lbs(&mut sub, golden_sim, current_sim, golden.pos(), &cpm, spec, None)?;
        for (&i, l) in idx.iter().zip(sub.lacs) {
            cands.lacs[i] = l;
            done[i] = true;
        }
    }
    debug_assert!(done.iter().all(|&d| d));
    Ok(())
}

/// Mutable state carried across iterations.
#[derive(Clone, Debug)]
pub struct FlowState {
    pub current: AigNetwork,
    pub pool: PatternPool,
    pub blacklist: BTreeSet<LacKey>,
    pub iteration: usize,
}

/// Greedy certification pass over sorted candidates.
///
/// Candidates name variables of `state.current`; the returned changes keep those
/// names. `state.current` becomes the final rewired circuit (not yet cleaned).
pub fn select_and_apply(
    state: &mut FlowState,
    golden: &AigNetwork,
    sorted: &CandidateSet,
    spec: &ErrorSpec,
    config: &FlowConfig,
    record: &mut IterationRecord,
) -> Result<(Vec<Lac>, Vec<Var>)> {
    let mut g = state.current.clone();
    let mut perm: Vec<Var> = (0..g.num_vars() as Var).collect();
    let mut live = g.reachable();
    let mut modified_nodes = BTreeSet::new();
    let mut modified_pos = BTreeSet::new();
    let mut applied = Vec::new();
    let limit = if config.pruning { usize::MAX } else { config.k };
    for lac in &sorted.lacs {
        if applied.len() >= limit {
            break;
        }
        if state.blacklist.contains(&lac.key()) {
            record.skipped_blacklist += 1;
            continue;
        }
        let taken = match lac.target {
            Target::Node(v) => modified_nodes.contains(&v),
            Target::Po(k) => modified_pos.contains(&k),
        };
        if taken {
            record.skipped_conflict += 1;
            continue;
        }
        let mapped = translate(lac, &perm);
        let dead = |l: Literal| !l.is_const() && !live[l.var() as usize];
        let target_dead = mapped.target_var().is_some_and(|v| !live[v as usize]);
        let source_dead = matches!(mapped.replacement, Replacement::Substitute(s) if dead(s));
        if target_dead || source_dead {
            record.skipped_dead += 1;
            continue;
        }
        if g.introduces_loop(&mapped) {
            record.skipped_loop += 1;
            continue;
        }
        let (candidate, step) = apply_lac_with_map(&g, &mapped)?;
        if config.reuse_counterexamples {
            let seen = eval_on_counterexamples(golden, &candidate, &state.pool, spec)?;
            if spec.violated_by(&seen) {
                record.skipped_counterexample += 1;
                continue;
            }
        }
        let verdict = check_pair(golden, &candidate, spec, config.conflict_limit, None)?;
        record.sat_calls += 1;
        match verdict.kind {
            VerdictKind::Unsat => {
                record.unsat += 1;
                g = candidate;
                for p in perm.iter_mut() {
                    *p = step[*p as usize];
                }
                live = g.reachable();
                match lac.target {
                    Target::Node(v) => modified_nodes.insert(v),
                    Target::Po(k) => modified_pos.insert(k),
                };
                applied.push(lac.clone());
            }
            VerdictKind::Sat => {
                record.sat += 1;
                if config.reuse_counterexamples {
                    let x = verdict.counterexample.expect("sat verdict carries a pattern");
                    state.pool.add_counterexample(x)?;
                }
            }
            VerdictKind::Unknown => {
                record.unknown += 1;
                state.blacklist.insert(lac.key());
            }
        }
    }
    state.current = g;
    Ok((applied, perm))
}

fn translate(lac: &Lac, perm: &[Var]) -> Lac {
    let target = match lac.target {
        Target::Node(v) => Target::Node(perm[v as usize]),
        t => t,
    };
    let replacement = match lac.replacement {
        Replacement::Substitute(s) => {
            Replacement::Substitute(Literal::new(perm[s.var() as usize], s.is_complemented()))
        }
        r => r,
    };
    Lac::new(target, replacement)
}

/// Renames blacklist entries after rewiring (`perm`) and cleanup (`map`).
/// Entries whose target or source vanished or became constant are dropped.
fn remap_blacklist(
    blacklist: &BTreeSet<LacKey>,
    perm: &[Var],
    map: &[Option<Literal>],
) -> BTreeSet<LacKey> {
    let get = |v: Var| map[perm[v as usize] as usize].filter(|l| !l.is_const());
    blacklist
        .iter()
        .filter_map(|&(target, repl)| match target {
            Target::Po(_) => Some((target, repl)),
            Target::Node(t) => {
                let nt = get(t)?;
                let flip = nt.is_complemented();
                let r = match repl {
                    Replacement::Const0 if flip => Replacement::Const1,
                    Replacement::Const1 if flip => Replacement::Const0,
                    Replacement::Substitute(s) => {
                        let ns = get(s.var())? ^ s.is_complemented() ^ flip;
                        if ns.var() == nt.var() {
                            return None;
                        }
                        Replacement::Substitute(ns)
                    }
                    r => r,
                };
                Some((Target::Node(nt.var()), r))
            }
        })
        .collect()
}

/// Runs the whole flow and certifies the result.
///
/// Returns [`Error::CertificationFailed`] if the final check finds a violating
/// pattern. An undecided final check is reported through
/// [`RunReport::certified`] rather than as an error.
pub fn run(golden: &AigNetwork, spec: &ErrorSpec, config: &FlowConfig) -> Result<(AigNetwork, RunReport)> {
    config.validate()?;
    let start = Instant::now();
    let phases = config.resolved_phases(golden.num_ands());
    let sim_cap = config.resolved_similarity_cap(golden.num_ands());
    let mut pool = gen_patterns(golden.num_pis(), config.m, config.seed);
    pool.set_counterexample_cap(config.counterexample_cap);
    let mut state = FlowState {
        current: cleanup(golden),
        pool,
        blacklist: BTreeSet::new(),
        iteration: 0,
    };
    let mut records = Vec::new();
    let mut phase_idx = 0;
    while phase_idx < phases.len() && state.iteration < config.max_iterations {
        let phase = phases[phase_idx];
        let rec = iterate(&mut state, golden, spec, config, phase, sim_cap)?;
        let progress = rec.applied > 0 && rec.nodes_after < rec.nodes_before;
        records.push(rec);
        if !progress {
            phase_idx += 1;
        }
    }
    let current = cleanup(&state.current);

    let cert_start = Instant::now();
    let deadline = config
        .final_timeout_ms
        .map(|ms| Instant::now() + Duration::from_millis(ms));
    let verdict = check_pair(golden, &current, spec, config.final_conflict_limit, deadline)?;
    if verdict.kind == VerdictKind::Sat {
        return Err(Error::CertificationFailed);
    }
    let exhaustive = if golden.num_pis() <= config.exhaustive_verify_limit {
        let e = brute_force_max_error(golden, &current, spec, config.exhaustive_verify_limit)?;
        if spec.violated_by(&e) {
            return Err(Error::CertificationFailed);
        }
        Some(e.to_string())
    } else {
        None
    };
    let certification_ms = cert_start.elapsed().as_millis() as u64;

    let totals = records.iter().fold(Totals::default(), |mut t, r| {
        t.iterations += 1;
        t.generated += r.generated;
        t.sat_calls += r.sat_calls;
        t.sat += r.sat;
        t.unsat += r.unsat;
        t.unknown += r.unknown;
        t.skipped_counterexample += r.skipped_counterexample;
        t.applied += r.applied;
        t
    });
    let report = RunReport {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        circuit: golden.name.clone(),
        metric: spec.metric,
        bound: spec.bound.to_string(),
        num_pis: golden.num_pis(),
        num_pos: golden.num_pos(),
        initial_nodes: golden.num_ands(),
        final_nodes: current.num_ands(),
        config: config.clone(),
        phases,
        similarity_cap: sim_cap,
        prng: PRNG_NAME.into(),
        iterations: records,
        totals,
        certification: Certification {
            verdict: verdict.kind,
            conflicts: verdict.conflicts_used,
            exhaustive_max_error: exhaustive,
        },
        invocation: Vec::new(),
        wall_time_ms: start.elapsed().as_millis() as u64,
        certification_ms,
    };
    Ok((current, report))
}

/// One iteration: candidates, two pruning rounds, sort, greedy pass, cleanup.
fn iterate(
    state: &mut FlowState,
    golden: &AigNetwork,
    spec: &ErrorSpec,
    config: &FlowConfig,
    phase: Phase,
    sim_cap: Option<usize>,
) -> Result<IterationRecord> {
    let t0 = Instant::now();
    state.iteration += 1;
    let mut rec = IterationRecord {
        iteration: state.iteration,
        phase: Some(phase),
        nodes_before: state.current.num_ands(),
        ..Default::default()
    };
    let current = state.current.clone();
    let cur_sim = simulate(&current, &state.pool)?;
    let mut cands = generate(phase, &current, &cur_sim, config, sim_cap);
    rec.generated = cands.len();

    let sorted = if config.pruning {
        let small_pool = prefix_pool(&state.pool, config.m_small);
        let g_small = simulate(golden, &small_pool)?;
        let c_small = simulate(&current, &small_pool)?;
        estimate_batched(&mut cands, golden, &g_small, &current, &c_small, spec, config.cpm_memory_cap)?;
        let mut survivors = prune(cands, spec);
        rec.after_small_round = survivors.len();

        let g_full = simulate(golden, &state.pool)?;
        estimate_batched(&mut survivors, golden, &g_full, &current, &cur_sim, spec, config.cpm_memory_cap)?;
        let survivors = prune(survivors, spec);
        rec.after_full_round = survivors.len();
        sort_and_truncate(survivors, config.k)
    } else {
        cands.lacs.sort_by(lac_order);
        rec.after_small_round = cands.len();
        rec.after_full_round = cands.len();
        cands.stage = Stage::Sorted;
        cands
    };
    rec.selected = sorted.len();

    let (applied, perm) = select_and_apply(state, golden, &sorted, spec, config, &mut rec)?;
    let (cleaned, map) = cleanup_with_map(&state.current);
    state.blacklist = remap_blacklist(&state.blacklist, &perm, &map);
    state.current = cleaned;

    rec.applied = applied.len();
    rec.applied_lacs = applied.iter().map(|l| l.to_string()).collect();
    rec.nodes_after = state.current.num_ands();
    rec.pool_counterexamples = state.pool.counterexamples().len();
    rec.elapsed_ms = t0.elapsed().as_millis() as u64;
    Ok(rec)
}

/// The first `m` base columns of a pool, without counter-examples.
fn prefix_pool(pool: &PatternPool, m: usize) -> PatternPool {
    let m = m.min(pool.base_len());
    let rows: Vec<Vec<bool>> = (0..m).map(|c| pool.pattern(c)).collect();
    PatternPool::from_patterns(pool.num_pis(), &rows)
}

/// Result of a maximum-error search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MaxError {
    Exact(BigUint),
    /// The search stopped early; the true value lies in `lo..=hi`.
    Interval { lo: BigUint, hi: BigUint },
}

/// Smallest bound the checker proves, by binary search over the miter.
pub fn exact_max_error(
    golden: &AigNetwork,
    approx: &AigNetwork,
    metric: Metric,
    timeout: Option<Duration>,
) -> Result<MaxError> {
    check_interfaces(golden, approx)?;
    let deadline = timeout.map(|t| Instant::now() + t);
    let mut lo = BigUint::zero();
    let mut hi = ErrorSpec::new(metric, 0u32).max_possible(golden.num_pos());
    while lo < hi {
        let mid: BigUint = (&lo + &hi) >> 1u32;
        let spec = ErrorSpec::new(metric, mid.clone());
        let cnf = miter_cnf(golden, approx, &spec)?;
        let v = solve_until(&cnf, u64::MAX, deadline);
        match v.kind {
            VerdictKind::Unsat => hi = mid,
            VerdictKind::Sat => {
                let x = v.counterexample.expect("sat verdict carries a pattern");
                let d = deviation(&spec, &golden.eval(&x), &approx.eval(&x))?;
                lo = d.max(mid + 1u32);
            }
            VerdictKind::Unknown => return Ok(MaxError::Interval { lo, hi }),
        }
    }
    Ok(MaxError::Exact(lo))
}
