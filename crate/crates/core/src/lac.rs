//! Local approximate changes: generation, simulation-based lower bounds, pruning
//! and ordering.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aig::{AigNetwork, Literal, Mffc, Var};
use crate::cpm::{po_values_under_lac_words, Cpm};
use crate::error::{Error, Result};
use crate::metrics::{lb_max_error, ErrorSpec};
use crate::sim::{words_for, SimState};

/// What a change rewires.
///
/// `Node` redirects every fanout of a variable (AND node or PI). `Po` rewires a
/// single primary output, leaving the driver in place for its other fanouts;
/// this is the truncation-style change applied to outputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Node(Var),
    Po(usize),
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Node(v) => write!(f, "n{v}"),
            Target::Po(k) => write!(f, "po{k}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Replacement {
    Const0,
    Const1,
    Substitute(Literal),
}

impl Replacement {
    /// Ordering code used as the last sort key: constants first, then sources by literal.
    pub fn code(self) -> u64 {
        match self {
            Replacement::Const0 => 0,
            Replacement::Const1 => 1,
            Replacement::Substitute(l) => 2 + l.raw() as u64,
        }
    }

    pub fn literal(self) -> Literal {
        match self {
            Replacement::Const0 => Literal::FALSE,
            Replacement::Const1 => Literal::TRUE,
            Replacement::Substitute(l) => l,
        }
    }

    pub fn is_constant(self) -> bool {
        !matches!(self, Replacement::Substitute(_))
    }

    fn kind(self) -> &'static str {
        match self {
            Replacement::Const0 => "const0",
            Replacement::Const1 => "const1",
            Replacement::Substitute(_) => "subst",
        }
    }
}

/// One candidate change with its estimated error lower bound and area gain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lac {
    pub target: Target,
    pub replacement: Replacement,
    #[serde(with = "opt_biguint")]
    pub lb: Option<BigUint>,
    /// Number of pattern columns the lower bound was computed over.
    pub lb_columns: usize,
    pub gain: usize,
}

mod opt_biguint {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<BigUint>, s: S) -> Result<S::Ok, S::Error> {
        v.as_ref().map(|b| b.to_string()).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<BigUint>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| s.parse().map_err(serde::de::Error::custom))
            .transpose()
    }
}

impl Lac {
    pub fn new(target: Target, replacement: Replacement) -> Self {
        Lac {
            target,
            replacement,
            lb: None,
            lb_columns: 0,
            gain: 0,
        }
    }

    /// Identity used by the blacklist.
    pub fn key(&self) -> LacKey {
        (self.target, self.replacement)
    }

    /// The variable whose fanouts are redirected, if any.
    pub fn target_var(&self) -> Option<Var> {
        match self.target {
            Target::Node(v) => Some(v),
            Target::Po(_) => None,
        }
    }

    fn tie_key(&self) -> (Target, u64) {
        (self.target, self.replacement.code())
    }
}

impl fmt::Display for Lac {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.replacement {
            Replacement::Substitute(l) => write!(f, "{} -> {}", self.target, l),
            r => write!(f, "{} -> {}", self.target, r.kind()),
        }
    }
}

pub type LacKey = (Target, Replacement);

/// Sort contract: lower bound ascending, gain descending, then target and
/// replacement code ascending. An unset bound sorts as zero.
pub fn lac_order(a: &Lac, b: &Lac) -> Ordering {
    let zero = BigUint::default();
    let la = a.lb.as_ref().unwrap_or(&zero);
    let lb = b.lb.as_ref().unwrap_or(&zero);
    la.cmp(lb)
        .then(b.gain.cmp(&a.gain))
        .then(a.tie_key().cmp(&b.tie_key()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Generated,
    Pruned,
    Sorted,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CandidateSet {
    pub lacs: Vec<Lac>,
    pub stage: Stage,
}

impl CandidateSet {
    pub fn new(lacs: Vec<Lac>) -> Self {
        CandidateSet {
            lacs,
            stage: Stage::Generated,
        }
    }

    pub fn len(&self) -> usize {
        self.lacs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lacs.is_empty()
    }

    pub fn extend(&mut self, other: CandidateSet) {
        self.lacs.extend(other.lacs);
    }

    /// Tab-separated dump: target, kind, source, lb, gain.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("target\tkind\tsource\tlb\tgain\n");
        for l in &self.lacs {
            let src = match l.replacement {
                Replacement::Substitute(lit) => lit.to_string(),
                _ => "-".into(),
            };
            let lb = l.lb.as_ref().map_or("-".into(), |b| b.to_string());
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                l.target,
                l.replacement.kind(),
                src,
                lb,
                l.gain
            ));
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstScope {
    /// Output stubs: each PO replaced by a constant.
    PoDrivers,
    /// Live AND nodes that drive no PO, plus PIs with fanout.
    Internal,
    /// Every live AND node plus PIs with fanout.
    All,
}

fn live_pis(net: &AigNetwork, refs: &[u32]) -> Vec<Var> {
    (1..=net.num_pis() as Var).filter(|&v| refs[v as usize] > 0).collect()
}

fn live_ands(net: &AigNetwork, live: &[bool]) -> Vec<Var> {
    (net.first_and_var()..net.num_vars() as Var)
        .filter(|&v| live[v as usize])
        .collect()
}

/// Two constant candidates per in-scope signal, with gains filled in.
pub fn gen_constant_lacs(net: &AigNetwork, scope: ConstScope) -> CandidateSet {
    let mut mffc = Mffc::new(net);
    let mut out = Vec::new();
    let mut push = |target: Target, gain: usize| {
        for r in [Replacement::Const0, Replacement::Const1] {
            if let Target::Po(k) = target {
                if net.pos()[k] == r.literal() {
                    continue;
                }
            }
            let mut l = Lac::new(target, r);
            l.gain = gain;
            out.push(l);
        }
    };
    if scope == ConstScope::PoDrivers {
        for k in 0..net.num_pos() {
            let gain = mffc.gain(Target::Po(k));
            push(Target::Po(k), gain);
        }
        return CandidateSet::new(out);
    }
    let live = net.reachable();
    let refs = net.live_ref_counts();
    let drivers: Vec<bool> = {
        let mut d = vec![false; net.num_vars()];
        for p in net.pos() {
            d[p.var() as usize] = true;
        }
        d
    };
    // a constant input folds every AND it feeds
    let mut and_refs = refs.clone();
    for p in net.pos() {
        and_refs[p.var() as usize] -= 1;
    }
    for v in live_pis(net, &refs) {
        push(Target::Node(v), and_refs[v as usize] as usize);
    }
    for v in live_ands(net, &live) {
        if scope == ConstScope::Internal && drivers[v as usize] {
            continue;
        }
        let gain = mffc.size(v);
        push(Target::Node(v), gain);
    }
    CandidateSet::new(out)
}

/// Substitution candidates `(n, n')` with `n'` outside `TFO(n) ∪ {n}`.
///
/// Targets are live AND nodes and PIs with fanout; sources are PIs and live AND
/// nodes. With a similarity cap, only pairs whose simulated signatures differ in
/// at most `cap` columns (in the chosen polarity) are kept.
pub fn gen_substitution_lacs(
    net: &AigNetwork,
    state: &SimState,
    allow_complement: bool,
    similarity_cap: Option<usize>,
) -> CandidateSet {
    assert!(state.is_for(net), "simulation state belongs to another network");
    let live = net.reachable();
    let refs = net.live_ref_counts();
    let ands = live_ands(net, &live);
    let targets: Vec<Var> = live_pis(net, &refs).into_iter().chain(ands.iter().copied()).collect();
    let sources: Vec<Var> = (1..=net.num_pis() as Var).chain(ands.iter().copied()).collect();
    let mut mffc = Mffc::new(net);
    let gains: Vec<usize> = targets.iter().map(|&t| mffc.size(t)).collect();
    let valid = state.valid_mask();
    let columns = state.columns();
    let distance = |a: Var, b: Var| -> usize {
        state
            .var_words(a)
            .iter()
            .zip(state.var_words(b))
            .zip(&valid)
            .map(|((x, y), m)| ((x ^ y) & m).count_ones() as usize)
            .sum()
    };
    let lacs = targets
        .par_iter()
        .zip(gains.par_iter())
        .flat_map_iter(|(&t, &gain)| {
            let tfo = net.tfo_mask(t);
            let mut local = Vec::new();
            for &s in &sources {
                if s == t || tfo[s as usize] {
                    continue;
                }
                let (pos_ok, neg_ok) = match similarity_cap {
                    None => (true, allow_complement),
                    Some(cap) => {
                        let d = distance(t, s);
                        (d <= cap, allow_complement && columns - d <= cap)
                    }
                };
                for (ok, compl) in [(pos_ok, false), (neg_ok, true)] {
                    if ok {
                        let mut l = Lac::new(
                            Target::Node(t),
                            Replacement::Substitute(Literal::new(s, compl)),
                        );
                        l.gain = gain;
                        local.push(l);
                    }
                }
            }
            local
        })
        .collect();
    CandidateSet::new(lacs)
}

/// Sets each candidate's lower bound from the CPM-predicted PO values.
///
/// With `prefix`, only the first `prefix` base columns are evaluated; otherwise
/// every column, counter-examples included.
pub fn estimate_lbs(
    cands: &mut CandidateSet,
    golden_sim: &SimState,
    approx_sim: &SimState,
    golden_pos: &[Literal],
    cpm: &Cpm,
    spec: &ErrorSpec,
    prefix: Option<usize>,
) -> Result<()> {
    if golden_sim.columns() != approx_sim.columns()
        || golden_sim.base_len() != approx_sim.base_len()
    {
        return Err(Error::PoolMismatch);
    }
    if let Some(l) = cands
        .lacs
        .iter()
        .find(|l| l.target_var().is_some_and(|v| !cpm.has_row(v)))
    {
        return Err(Error::Config(format!("no change propagation row for {}", l.target)));
    }
    let care_full = approx_sim.care_mask(prefix);
    let columns = match prefix {
        Some(p) => p.min(approx_sim.base_len()),
        None => approx_sim.columns(),
    };
    let words = words_for(columns).max(1).min(care_full.len());
    let care = &care_full[..words];
    let golden: Vec<Vec<u64>> = golden_pos
        .iter()
        .map(|&p| golden_sim.lit_words(p)[..words].to_vec())
        .collect();
    cands.lacs.par_iter_mut().for_each(|lac| {
        let approx = po_values_under_lac_words(approx_sim, cpm, lac, words);
        lac.lb = Some(lb_max_error(&golden, &approx, spec, care));
        lac.lb_columns = columns;
    });
    Ok(())
}

/// Keeps candidates whose lower bound does not exceed the bound.
pub fn prune(cands: CandidateSet, spec: &ErrorSpec) -> CandidateSet {
    let lacs = cands
        .lacs
        .into_iter()
        .filter(|l| {
            let lb = l.lb.as_ref().expect("lower bound estimated before pruning");
            !spec.violated_by(lb)
        })
        .collect();
    CandidateSet {
        lacs,
        stage: Stage::Pruned,
    }
}

/// Stable sort by [`lac_order`], keeping the first `k`.
pub fn sort_and_truncate(mut cands: CandidateSet, k: usize) -> CandidateSet {
    cands.lacs.sort_by(lac_order);
    cands.lacs.truncate(k);
    cands.stage = Stage::Sorted;
    cands
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aig::{apply_lac, AigBuilder};
    use crate::cpm::build_cpm;
    use crate::metrics::brute_force_max_error;
    use crate::sim::{simulate, PatternPool};
    use crate::testbench;

    fn with_lb(lb: u32, gain: usize, t: Var) -> Lac {
        let mut l = Lac::new(Target::Node(t), Replacement::Const0);
        l.lb = Some(lb.into());
        l.gain = gain;
        l
    }

    #[test]
    fn constant_counts() {
        let ha = testbench::half_adder().network;
        assert_eq!(gen_constant_lacs(&ha, ConstScope::All).len(), 10);
        assert_eq!(gen_constant_lacs(&ha, ConstScope::PoDrivers).len(), 4);
        // n1 is the only AND that drives no PO
        assert_eq!(gen_constant_lacs(&ha, ConstScope::Internal).len(), 6);
    }

    #[test]
    fn input_constant_gain_counts_and_fanouts() {
        let ha = testbench::half_adder().network;
        let c = gen_constant_lacs(&ha, ConstScope::All);
        // each input feeds n1 and n2
        for pi in [1, 2] {
            assert!(c.lacs.iter().filter(|l| l.target == Target::Node(pi)).all(|l| l.gain == 2));
        }
        let c = gen_constant_lacs(&ha, ConstScope::PoDrivers);
        let gain = |k| c.lacs.iter().find(|l| l.target == Target::Po(k)).unwrap().gain;
        // the carry node also feeds the sum logic
        assert_eq!((gain(0), gain(1)), (2, 0));
    }

    #[test]
    fn constant_degenerate() {
        let net = AigNetwork::new(2, vec![], vec![Literal::positive(1)]).unwrap();
        assert_eq!(gen_constant_lacs(&net, ConstScope::All).len(), 2);
        let net = AigNetwork::new(0, vec![], vec![Literal::FALSE]).unwrap();
        assert!(gen_constant_lacs(&net, ConstScope::All).is_empty());
        assert_eq!(gen_constant_lacs(&net, ConstScope::PoDrivers).len(), 1);
    }

    #[test]
    fn substitution_matches_double_loop() {
        let ha = testbench::half_adder().network;
        let st = simulate(&ha, &PatternPool::exhaustive(2)).unwrap();
        let got = gen_substitution_lacs(&ha, &st, true, None);
        let mut expected = 0;
        for t in 1..6u32 {
            for s in 1..6u32 {
                if s != t && !ha.tfo(t).contains(s) {
                    expected += 2;
                }
            }
        }
        assert_eq!(got.len(), expected);
        for l in &got.lacs {
            assert!(!ha.introduces_loop(l));
        }
        assert_eq!(gen_substitution_lacs(&ha, &st, false, None).len(), expected / 2);
    }

    #[test]
    fn independent_cones_substitute_both_ways() {
        let mut b = AigBuilder::new(4);
        let p = b.pis();
        let x = b.and(p[0], p[1]);
        let y = b.and(p[2], p[3]);
        b.add_po(x);
        b.add_po(y);
        let net = b.finish();
        let st = simulate(&net, &PatternPool::exhaustive(4)).unwrap();
        let c = gen_substitution_lacs(&net, &st, false, None);
        let has = |t: Literal, s: Literal| {
            c.lacs
                .iter()
                .any(|l| l.target == Target::Node(t.var()) && l.replacement == Replacement::Substitute(s))
        };
        assert!(has(x, y) && has(y, x));
        // a PI's TFO contains its AND, so the AND cannot replace the PI
        assert!(!has(p[0], x));
    }

    #[test]
    fn similarity_cap_filters() {
        let ha = testbench::half_adder().network;
        let st = simulate(&ha, &PatternPool::exhaustive(2)).unwrap();
        let c = gen_substitution_lacs(&ha, &st, true, Some(0));
        // only exact (complemented) equivalences survive
        for l in &c.lacs {
            let Replacement::Substitute(s) = l.replacement else { unreachable!() };
            let t = l.target_var().unwrap();
            assert_eq!(st.lit_words(Literal::positive(t)), st.lit_words(s));
        }
    }

    #[test]
    fn exhaustive_lbs_are_exact_on_half_adder() {
        let ha = testbench::half_adder().network;
        let st = simulate(&ha, &PatternPool::exhaustive(2)).unwrap();
        let cpm = build_cpm(&ha, &st);
        let spec = ErrorSpec::max_ed(1);
        let mut c = gen_constant_lacs(&ha, ConstScope::PoDrivers);
        estimate_lbs(&mut c, &st, &st, ha.pos(), &cpm, &spec, None).unwrap();
        for l in &c.lacs {
            let exact = brute_force_max_error(&ha, &apply_lac(&ha, l).unwrap(), &spec, 12).unwrap();
            assert_eq!(l.lb.as_ref().unwrap(), &exact, "{l}");
            assert_eq!(l.lb_columns, 4);
        }
        let carry0 = c
            .lacs
            .iter()
            .find(|l| l.target == Target::Po(1) && l.replacement == Replacement::Const0)
            .unwrap()
            .clone();
        assert_eq!(carry0.lb, Some(2u32.into()));
        let kept = prune(c, &spec);
        assert!(kept.lacs.iter().all(|l| l.lb.as_ref().unwrap() <= &1u32.into()));
        assert!(kept
            .lacs
            .iter()
            .any(|l| l.target == Target::Po(0) && l.replacement == Replacement::Const0));
        assert!(!kept.lacs.contains(&carry0));
    }

    #[test]
    fn prune_boundary() {
        let c = CandidateSet::new(vec![with_lb(0, 0, 3), with_lb(2, 0, 4), with_lb(3, 0, 5)]);
        let kept = prune(c, &ErrorSpec::max_ed(2));
        assert_eq!(kept.len(), 2);
        assert_eq!(kept.stage, Stage::Pruned);
        let c = CandidateSet::new(vec![with_lb(0, 0, 3); 3]);
        assert_eq!(prune(c, &ErrorSpec::max_ed(0)).len(), 3);
    }

    #[test]
    fn sort_contract() {
        let c = CandidateSet::new(vec![with_lb(0, 1, 3), with_lb(2, 3, 4), with_lb(0, 2, 5)]);
        let s = sort_and_truncate(c.clone(), 100);
        let order: Vec<(u32, usize)> = s
            .lacs
            .iter()
            .map(|l| (u32::try_from(l.lb.clone().unwrap()).unwrap(), l.gain))
            .collect();
        assert_eq!(order, vec![(0, 2), (0, 1), (2, 3)]);
        assert_eq!(sort_and_truncate(c, 2).len(), 2);
    }

    #[test]
    fn sort_tie_break_is_deterministic() {
        let mut a = with_lb(0, 1, 7);
        a.replacement = Replacement::Const1;
        let b = with_lb(0, 1, 7);
        let c = with_lb(0, 1, 6);
        let s = sort_and_truncate(CandidateSet::new(vec![a.clone(), b.clone(), c.clone()]), 10);
        assert_eq!(s.lacs, vec![c, b, a]);
    }

    #[test]
    fn tsv_dump() {
        let mut l = Lac::new(Target::Node(4), Replacement::Substitute(Literal::new(3, true)));
        l.lb = Some(1u32.into());
        l.gain = 2;
        let tsv = CandidateSet::new(vec![l, Lac::new(Target::Po(0), Replacement::Const1)]).to_tsv();
        let lines: Vec<&str> = tsv.lines().collect();
        assert_eq!(lines[1], "n4\tsubst\t7\t1\t2");
        assert_eq!(lines[2], "po0\tconst1\t-\t-\t0");
    }
}
