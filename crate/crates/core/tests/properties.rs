//! Randomised invariants checked against scalar and exhaustive oracles.

use num_bigint::BigUint;
use proptest::prelude::*;
use proptest::sample::Index;

use simals::aig::{apply_lac, cleanup, parse_aiger, write_aiger, AigNetwork, Literal, Var};
use simals::checker::{aig_to_cnf, check_pair, miter_cnf, solve, Cnf, VerdictKind};
use simals::cpm::{build_cpm, po_values_under_lac};
use simals::lac::{
    estimate_lbs, gen_constant_lacs, gen_substitution_lacs, lac_order, prune, sort_and_truncate,
    CandidateSet, ConstScope, Lac, Replacement, Target,
};
use simals::metrics::{brute_force_max_error, ErrorSpec, Metric};
use simals::sim::{gen_patterns, resimulate_flip, simulate, PatternPool};
use simals::testbench::gen_random_aig_with;

fn net_strategy(max_nodes: usize, max_pis: usize) -> impl Strategy<Value = AigNetwork> {
    (3..=max_nodes, 2..=max_pis, any::<u64>())
        .prop_map(|(n, p, s)| gen_random_aig_with(n, p, s).network)
}

fn bits_of(x: u64, n: usize) -> Vec<bool> {
    (0..n).map(|i| x >> i & 1 == 1).collect()
}

fn bit(words: &[u64], c: usize) -> bool {
    words[c / 64] >> (c % 64) & 1 == 1
}

/// PO values with one variable complemented, by plain scalar evaluation.
fn eval_flipped(net: &AigNetwork, x: &[bool], node: Var) -> Vec<bool> {
    let mut val = vec![false; net.num_vars()];
    for (i, &b) in x.iter().enumerate() {
        val[1 + i] = b;
    }
    if (node as usize) <= net.num_pis() {
        val[node as usize] ^= true;
    }
    for v in net.first_and_var()..net.num_vars() as Var {
        let (l, r) = net.fanins(v);
        val[v as usize] = (val[l.var() as usize] ^ l.is_complemented())
            & (val[r.var() as usize] ^ r.is_complemented());
        if v == node {
            val[v as usize] ^= true;
        }
    }
    net.pos().iter().map(|p| val[p.var() as usize] ^ p.is_complemented()).collect()
}

/// Number of ANDs reachable from the POs.
fn reachable_ands(net: &AigNetwork) -> usize {
    let live = net.reachable();
    (net.first_and_var() as usize..net.num_vars()).filter(|&v| live[v]).count()
}

/// Copy of `net` with an extra PI appended, all fanout edges of `node`
/// redirected to it, and nothing else changed.
fn detach(net: &AigNetwork, node: Var) -> AigNetwork {
    let fresh = Literal::positive(net.num_pis() as Var + 1);
    let shift = |l: Literal| {
        if l.var() == node {
            fresh ^ l.is_complemented()
        } else if l.var() as usize > net.num_pis() {
            Literal::new(l.var() + 1, l.is_complemented())
        } else {
            l
        }
    };
    let ands = net.and_nodes().iter().map(|&(l, r)| (shift(l), shift(r))).collect();
    let pos = net.pos().iter().map(|&p| shift(p)).collect();
    AigNetwork::new(net.num_pis() + 1, ands, pos).unwrap()
}

fn all_candidates(net: &AigNetwork, pool: &PatternPool) -> CandidateSet {
    let st = simulate(net, pool).unwrap();
    let mut c = gen_constant_lacs(net, ConstScope::All);
    c.extend(gen_constant_lacs(net, ConstScope::PoDrivers));
    c.extend(gen_substitution_lacs(net, &st, true, None));
    c
}

fn pick<'a>(c: &'a CandidateSet, idx: &Index) -> &'a Lac {
    &c.lacs[idx.index(c.lacs.len())]
}

fn spec_of(metric: bool, bound: u64) -> ErrorSpec {
    ErrorSpec::new(if metric { Metric::MaxEd } else { Metric::MaxHd }, bound)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn bit_parallel_simulation_matches_scalar(net in net_strategy(60, 10), m in 1usize..200, seed in any::<u64>()) {
        let pool = gen_patterns(net.num_pis(), m, seed);
        let st = simulate(&net, &pool).unwrap();
        prop_assert_eq!(st.columns(), m);
        for c in 0..m {
            let vals = net.eval_vars(&pool.pattern(c));
            for v in 0..net.num_vars() as Var {
                prop_assert_eq!(st.value(v, c), vals[v as usize], "var {} column {}", v, c);
            }
        }
    }

    #[test]
    fn flip_matches_full_resimulation(net in net_strategy(40, 7), idx in any::<Index>()) {
        let pool = PatternPool::exhaustive(net.num_pis());
        let st = simulate(&net, &pool).unwrap();
        let node = 1 + idx.index(net.num_vars() - 1) as Var;
        let got = resimulate_flip(&st, &net, node);
        for c in 0..pool.num_columns() {
            let x = pool.pattern(c);
            let (a, b) = (net.eval(&x), eval_flipped(&net, &x, node));
            for k in 0..net.num_pos() {
                prop_assert_eq!(bit(&got[k], c), a[k] != b[k], "po {} column {}", k, c);
            }
        }
    }

    #[test]
    fn cpm_rows_match_flip_oracle(net in net_strategy(30, 6), m in 1usize..130, seed in any::<u64>()) {
        let pool = gen_patterns(net.num_pis(), m, seed);
        let st = simulate(&net, &pool).unwrap();
        let cpm = build_cpm(&net, &st);
        for v in 1..net.num_vars() as Var {
            for c in 0..m {
                let x = pool.pattern(c);
                let (a, b) = (net.eval(&x), eval_flipped(&net, &x, v));
                for k in 0..net.num_pos() {
                    prop_assert_eq!(bit(cpm.entry(v, k).unwrap(), c), a[k] != b[k]);
                }
            }
        }
    }

    #[test]
    fn propagated_values_match_direct_simulation(net in net_strategy(30, 6), m in 1usize..130, seed in any::<u64>(), idx in any::<Index>()) {
        let pool = gen_patterns(net.num_pis(), m, seed);
        let st = simulate(&net, &pool).unwrap();
        let cpm = build_cpm(&net, &st);
        let cands = all_candidates(&net, &pool);
        let lac = pick(&cands, &idx);
        let got = po_values_under_lac(&st, &cpm, lac).unwrap();
        let modified = apply_lac(&net, lac).unwrap();
        for c in 0..m {
            let y = modified.eval(&pool.pattern(c));
            for k in 0..net.num_pos() {
                prop_assert_eq!(bit(&got[k], c), y[k], "{} po {} column {}", lac, k, c);
            }
        }
    }

    #[test]
    fn lower_bound_never_exceeds_exact_error(net in net_strategy(30, 7), m in 1usize..100, seed in any::<u64>(),
                                             metric in any::<bool>(), idx in any::<Index>()) {
        let spec = spec_of(metric, 0);
        let pool = gen_patterns(net.num_pis(), m, seed);
        let st = simulate(&net, &pool).unwrap();
        let cpm = build_cpm(&net, &st);
        let mut cands = all_candidates(&net, &pool);
        estimate_lbs(&mut cands, &st, &st, net.pos(), &cpm, &spec, None).unwrap();
        for i in 0..8 {
            let lac = &cands.lacs[(idx.index(cands.lacs.len()) + i * 7) % cands.lacs.len()];
            let exact = brute_force_max_error(&net, &apply_lac(&net, lac).unwrap(), &spec, 12).unwrap();
            prop_assert!(lac.lb.as_ref().unwrap() <= &exact, "{}", lac);
        }
    }

    #[test]
    fn exhaustive_lower_bound_is_exact(net in net_strategy(25, 6), metric in any::<bool>(), idx in any::<Index>()) {
        let spec = spec_of(metric, 0);
        let pool = PatternPool::exhaustive(net.num_pis());
        let st = simulate(&net, &pool).unwrap();
        let cpm = build_cpm(&net, &st);
        let mut cands = all_candidates(&net, &pool);
        estimate_lbs(&mut cands, &st, &st, net.pos(), &cpm, &spec, None).unwrap();
        let lac = pick(&cands, &idx);
        let exact = brute_force_max_error(&net, &apply_lac(&net, lac).unwrap(), &spec, 12).unwrap();
        prop_assert_eq!(lac.lb.as_ref().unwrap(), &exact);
    }

    #[test]
    fn more_patterns_prune_at_least_as_much(net in net_strategy(30, 8), m in 2usize..200, seed in any::<u64>(), bound in 0u64..6) {
        let spec = ErrorSpec::max_ed(bound);
        let pool = gen_patterns(net.num_pis(), m, seed);
        let st = simulate(&net, &pool).unwrap();
        let cpm = build_cpm(&net, &st);
        let mut prefix = all_candidates(&net, &pool);
        let mut full = prefix.clone();
        estimate_lbs(&mut prefix, &st, &st, net.pos(), &cpm, &spec, Some(m / 2)).unwrap();
        estimate_lbs(&mut full, &st, &st, net.pos(), &cpm, &spec, None).unwrap();
        let kept_prefix: Vec<_> = prune(prefix, &spec).lacs.iter().map(Lac::key).collect();
        for l in prune(full, &spec).lacs {
            prop_assert!(kept_prefix.contains(&l.key()));
        }
    }

    #[test]
    fn pruned_candidates_really_violate(net in net_strategy(25, 7), m in 1usize..100, seed in any::<u64>(), bound in 0u64..4, metric in any::<bool>()) {
        let spec = spec_of(metric, bound);
        let pool = gen_patterns(net.num_pis(), m, seed);
        let st = simulate(&net, &pool).unwrap();
        let cpm = build_cpm(&net, &st);
        let mut cands = all_candidates(&net, &pool);
        estimate_lbs(&mut cands, &st, &st, net.pos(), &cpm, &spec, None).unwrap();
        let kept: Vec<_> = prune(cands.clone(), &spec).lacs.iter().map(Lac::key).collect();
        for l in cands.lacs.iter().filter(|l| !kept.contains(&l.key())).take(10) {
            let exact = brute_force_max_error(&net, &apply_lac(&net, l).unwrap(), &spec, 12).unwrap();
            prop_assert!(spec.violated_by(&exact), "{} pruned with exact error {}", l, exact);
        }
    }

    #[test]
    fn sorting_is_deterministic_and_ordered(net in net_strategy(30, 6), seed in any::<u64>(), k in 1usize..40) {
        let pool = gen_patterns(net.num_pis(), 64, seed);
        let st = simulate(&net, &pool).unwrap();
        let cpm = build_cpm(&net, &st);
        let mut cands = all_candidates(&net, &pool);
        estimate_lbs(&mut cands, &st, &st, net.pos(), &cpm, &ErrorSpec::max_ed(u64::MAX), None).unwrap();
        let mut reversed = cands.clone();
        reversed.lacs.reverse();
        let spec = ErrorSpec::max_ed(u64::MAX);
        let a = sort_and_truncate(prune(cands, &spec), k);
        let b = sort_and_truncate(prune(reversed, &spec), k);
        prop_assert!(a.len() <= k);
        prop_assert_eq!(&a.lacs, &b.lacs);
        for w in a.lacs.windows(2) {
            prop_assert!(lac_order(&w[0], &w[1]).is_lt());
        }
    }

    #[test]
    fn generated_substitutions_never_loop(net in net_strategy(50, 8), seed in any::<u64>(), complement in any::<bool>()) {
        let st = simulate(&net, &gen_patterns(net.num_pis(), 64, seed)).unwrap();
        for l in gen_substitution_lacs(&net, &st, complement, None).lacs {
            prop_assert!(!net.introduces_loop(&l), "{}", l);
            let out = apply_lac(&net, &l).unwrap();
            prop_assert!(out.validate().is_ok());
        }
    }

    #[test]
    fn mffc_is_what_detaching_frees(net in net_strategy(60, 8), idx in any::<Index>()) {
        let first = net.first_and_var() as usize;
        let node = (first + idx.index(net.num_ands())) as Var;
        let freed = reachable_ands(&net) - reachable_ands(&detach(&net, node));
        prop_assert_eq!(net.mffc_size(node), freed);
    }

    #[test]
    fn cleanup_preserves_function(net in net_strategy(60, 8), idx in any::<Index>(), c1 in any::<bool>()) {
        // a constant gives cleanup something to fold
        let target = 1 + idx.index(net.num_vars() - 1) as Var;
        let r = if c1 { Replacement::Const1 } else { Replacement::Const0 };
        let net = apply_lac(&net, &Lac::new(Target::Node(target), r)).unwrap();
        let c = cleanup(&net);
        c.validate().unwrap();
        prop_assert!(c.num_ands() <= net.num_ands());
        for x in 0..1u64 << net.num_pis() {
            let x = bits_of(x, net.num_pis());
            prop_assert_eq!(c.eval(&x), net.eval(&x));
        }
        let v = check_pair(&net, &c, &ErrorSpec::max_hd(0), u64::MAX, None).unwrap();
        prop_assert_eq!(v.kind, VerdictKind::Unsat);
    }

    #[test]
    fn changes_stay_inside_the_fanout_cone(net in net_strategy(40, 8), idx in any::<Index>(), seed in any::<u64>()) {
        let cands = all_candidates(&net, &gen_patterns(net.num_pis(), 32, seed));
        let lac = pick(&cands, &idx);
        let out = cleanup(&apply_lac(&net, lac).unwrap());
        let untouched: Vec<usize> = match lac.target {
            Target::Po(k) => (0..net.num_pos()).filter(|&j| j != k).collect(),
            Target::Node(v) => {
                let tfo = net.tfo(v);
                (0..net.num_pos()).filter(|&j| !tfo.pos.contains(&j)).collect()
            }
        };
        for x in 0..1u64 << net.num_pis() {
            let x = bits_of(x, net.num_pis());
            let (a, b) = (net.eval(&x), out.eval(&x));
            for &j in &untouched {
                prop_assert_eq!(a[j], b[j], "po {} changed by {}", j, lac);
            }
        }
    }

    #[test]
    fn aiger_round_trip(net in net_strategy(80, 12)) {
        let text = write_aiger(&net);
        let back = parse_aiger(&text).unwrap();
        prop_assert_eq!(back.num_pis(), net.num_pis());
        prop_assert_eq!(back.and_nodes(), net.and_nodes());
        prop_assert_eq!(back.pos(), net.pos());
        prop_assert_eq!(write_aiger(&back), text);
    }

    #[test]
    fn cnf_models_are_exactly_the_onset(net in net_strategy(30, 6), idx in any::<Index>()) {
        let k = idx.index(net.num_pos());
        let single = AigNetwork::new(net.num_pis(), net.and_nodes().to_vec(), vec![net.pos()[k]]).unwrap();
        let cnf = aig_to_cnf(&single).unwrap();
        prop_assert_eq!(cnf.pi_var_map.len(), net.num_pis());
        for c in &cnf.clauses {
            prop_assert!(!c.is_empty());
            prop_assert!(!c.iter().any(|l| c.contains(&-l)));
        }
        for x in 0..1u64 << net.num_pis() {
            let bits = bits_of(x, net.num_pis());
            let mut fixed: Cnf = cnf.clone();
            for (i, &b) in bits.iter().enumerate() {
                let v = cnf.pi_var_map[i] as i32;
                fixed.clauses.push(vec![if b { v } else { -v }]);
            }
            let sat = solve(&fixed, u64::MAX).kind == VerdictKind::Sat;
            prop_assert_eq!(sat, single.eval(&bits)[0]);
        }
    }

    #[test]
    fn miter_verdicts_match_brute_force(net in net_strategy(40, 8), idx in any::<Index>(), seed in any::<u64>(),
                                        metric in any::<bool>(), bound in 0u64..8) {
        let spec = spec_of(metric, bound);
        let cands = all_candidates(&net, &gen_patterns(net.num_pis(), 32, seed));
        let approx = apply_lac(&net, pick(&cands, &idx)).unwrap();
        let exact = brute_force_max_error(&net, &approx, &spec, 12).unwrap();
        let v = check_pair(&net, &approx, &spec, u64::MAX, None).unwrap();
        prop_assert_eq!(v.kind == VerdictKind::Sat, spec.violated_by(&exact));
        if let Some(x) = v.counterexample {
            prop_assert_eq!(x.len(), net.num_pis());
            let d = simals::metrics::deviation(&spec, &net.eval(&x), &approx.eval(&x)).unwrap();
            prop_assert!(spec.violated_by(&d));
        }
    }

    #[test]
    fn verdicts_are_monotone_in_budget(net in net_strategy(60, 10), idx in any::<Index>(), seed in any::<u64>(), budget in 0u64..40) {
        let spec = ErrorSpec::max_ed(1);
        let cands = all_candidates(&net, &gen_patterns(net.num_pis(), 32, seed));
        let approx = apply_lac(&net, pick(&cands, &idx)).unwrap();
        let cnf = miter_cnf(&net, &approx, &spec).unwrap();
        let small = solve(&cnf, budget);
        let large = solve(&cnf, budget * 4 + 10);
        if small.kind != VerdictKind::Unknown {
            prop_assert_eq!(small.kind, large.kind);
        }
        prop_assert!(small.conflicts_used <= budget + 1);
    }
}

#[test]
fn exact_error_of_an_identical_copy_is_zero() {
    let net = gen_random_aig_with(50, 8, 3).network;
    let e = brute_force_max_error(&net, &net.clone(), &ErrorSpec::max_ed(0), 12).unwrap();
    assert_eq!(e, BigUint::from(0u32));
}
