use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{AigBuilder, AigNetwork, Literal, Var};
use crate::error::{Error, Result};
use crate::lac::{Lac, Replacement, Target};

/// Applies a local approximate change. See [`apply_lac_with_map`].
pub fn apply_lac(net: &AigNetwork, lac: &Lac) -> Result<AigNetwork> {
    apply_lac_with_map(net, lac).map(|(n, _)| n)
}

/// Redirects every fanout of the target (or the targeted PO) to the replacement
/// literal. The target itself stays in the network without fanouts.
///
/// A substitution source may carry a larger index than some node in the target's
/// fanout, so the AND nodes are re-sorted afterwards. The returned permutation maps
/// old variables to new ones; it is the identity when no reordering was needed.
pub fn apply_lac_with_map(net: &AigNetwork, lac: &Lac) -> Result<(AigNetwork, Vec<Var>)> {
    let identity: Vec<Var> = (0..net.num_vars() as Var).collect();
    let target = match lac.target {
        Target::Po(k) => {
            let mut out = net.clone();
            out.pos[k] = replacement_literal(lac.replacement);
            return Ok((out, identity));
        }
        Target::Node(t) => t,
    };
    if lac.replacement == Replacement::Substitute(Literal::positive(target)) {
        return Ok((net.clone(), identity));
    }
    if net.introduces_loop(lac) {
        return Err(Error::LoopIntroduced { target });
    }
    let repl = replacement_literal(lac.replacement);
    let redirect = |f: Literal| {
        if f.var() == target {
            repl ^ f.is_complemented()
        } else {
            f
        }
    };
    let ands: Vec<(Literal, Literal)> = net
        .ands
        .iter()
        .map(|&(l, r)| (redirect(l), redirect(r)))
        .collect();
    let pos: Vec<Literal> = net.pos.iter().map(|&p| redirect(p)).collect();

    let first = net.first_and_var();
    let ordered = ands
        .iter()
        .enumerate()
        .all(|(i, (l, r))| l.var() < first + i as Var && r.var() < first + i as Var);
    if ordered {
        let out = AigNetwork::from_parts_unchecked(net.num_pis, ands, pos).with_metadata_of(net);
        return Ok((out, identity));
    }
    let (out, perm) = reorder(net.num_pis, &ands, &pos);
    Ok((out.with_metadata_of(net), perm))
}

fn replacement_literal(r: Replacement) -> Literal {
    match r {
        Replacement::Const0 => Literal::FALSE,
        Replacement::Const1 => Literal::TRUE,
        Replacement::Substitute(s) => s,
    }
}

/// Topological re-sort of AND nodes, smallest original index first among ready nodes.
fn reorder(
    num_pis: usize,
    ands: &[(Literal, Literal)],
    pos: &[Literal],
) -> (AigNetwork, Vec<Var>) {
    let first = 1 + num_pis as Var;
    let n = ands.len();
    let mut pending = vec![0u8; n];
    let mut users: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut ready = BinaryHeap::new();
    for (i, &(l, r)) in ands.iter().enumerate() {
        for f in [l, r] {
            if f.var() >= first {
                pending[i] += 1;
                users[(f.var() - first) as usize].push(i);
            }
        }
        if pending[i] == 0 {
            ready.push(Reverse(i));
        }
    }
    let mut perm: Vec<Var> = (0..first).collect();
    perm.resize(first as usize + n, 0);
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(i)) = ready.pop() {
        perm[first as usize + i] = first + order.len() as Var;
        order.push(i);
        for &u in &users[i] {
            pending[u] -= 1;
            if pending[u] == 0 {
                ready.push(Reverse(u));
            }
        }
    }
    assert_eq!(order.len(), n, "combinational loop in rewired network");
    let map = |f: Literal| Literal::new(perm[f.var() as usize], f.is_complemented());
    let new_ands = order
        .iter()
        .map(|&i| (map(ands[i].0), map(ands[i].1)))
        .collect();
    let new_pos = pos.iter().map(|&p| map(p)).collect();
    (
        AigNetwork::from_parts_unchecked(num_pis, new_ands, new_pos),
        perm,
    )
}

/// Lossless structural cleanup. See [`cleanup_with_map`].
pub fn cleanup(net: &AigNetwork) -> AigNetwork {
    cleanup_with_map(net).0
}

/// Constant propagation, structural hashing and removal of nodes unreachable
/// from the POs. PO functions are unchanged.
///
/// The map sends each old variable to the literal now computing it, or `None`
/// when the variable was dropped.
pub fn cleanup_with_map(net: &AigNetwork) -> (AigNetwork, Vec<Option<Literal>>) {
    let live = net.reachable();
    let mut b = AigBuilder::new(net.num_pis);
    let mut map: Vec<Option<Literal>> = vec![None; net.num_vars()];
    map[0] = Some(Literal::FALSE);
    for i in 0..net.num_pis {
        map[1 + i] = Some(b.pi(i));
    }
    let first = net.first_and_var();
    for (i, &(l, r)) in net.ands.iter().enumerate() {
        let v = first as usize + i;
        if !live[v] {
            continue;
        }
        let get = |f: Literal| map[f.var() as usize].expect("live fanin") ^ f.is_complemented();
        let (l, r) = (get(l), get(r));
        map[v] = Some(b.and(l, r));
    }
    for &p in &net.pos {
        let lit = map[p.var() as usize].expect("live po") ^ p.is_complemented();
        b.add_po(lit);
    }
    let built = b.finish();

    // Simplification can orphan nodes that were created before their users folded.
    let live2 = built.reachable();
    let bfirst = built.first_and_var();
    let mut remap: Vec<Option<Literal>> = vec![None; built.num_vars()];
    for v in 0..bfirst {
        remap[v as usize] = Some(Literal::positive(v));
    }
    let mut ands = Vec::with_capacity(built.num_ands());
    for (i, &(l, r)) in built.ands.iter().enumerate() {
        let v = bfirst as usize + i;
        if !live2[v] {
            continue;
        }
        let get = |f: Literal| remap[f.var() as usize].unwrap() ^ f.is_complemented();
        let nl = (get(l), get(r));
        remap[v] = Some(Literal::positive(bfirst + ands.len() as Var));
        ands.push(nl);
    }
    let pos = built
        .pos
        .iter()
        .map(|&p| remap[p.var() as usize].unwrap() ^ p.is_complemented())
        .collect();
    let out = AigNetwork::from_parts_unchecked(net.num_pis, ands, pos).with_metadata_of(net);

    let composed = map
        .into_iter()
        .map(|m| m.and_then(|lit| remap[lit.var() as usize].map(|x| x ^ lit.is_complemented())))
        .collect();
    (out, composed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testbench;

    fn exhaustive_outputs(net: &AigNetwork) -> Vec<Vec<bool>> {
        (0..1u32 << net.num_pis())
            .map(|x| {
                let bits: Vec<bool> = (0..net.num_pis()).map(|i| x >> i & 1 == 1).collect();
                net.eval(&bits)
            })
            .collect()
    }

    #[test]
    fn carry_node_to_const0() {
        let ha = testbench::half_adder().network;
        let lac = Lac::new(Target::Node(4), Replacement::Const0);
        let out = apply_lac(&ha, &lac).unwrap();
        for x in 0..4u32 {
            let (a, b) = (x & 1 == 1, x & 2 == 2);
            let y = out.eval(&[a, b]);
            assert_eq!(y[0], a || b, "sum becomes a|b");
            assert!(!y[1]);
        }
        let cleaned = cleanup(&out);
        assert!(cleaned.num_ands() <= 2);
        assert_eq!(exhaustive_outputs(&cleaned), exhaustive_outputs(&out));
    }

    #[test]
    fn identity_substitution_keeps_function() {
        let ha = testbench::half_adder().network;
        let lac = Lac::new(Target::Node(4), Replacement::Substitute(Literal::positive(4)));
        let out = apply_lac(&ha, &lac).unwrap();
        assert_eq!(exhaustive_outputs(&out), exhaustive_outputs(&ha));
        // the complemented self-reference is a genuine loop
        let lac = Lac::new(Target::Node(4), Replacement::Substitute(Literal::new(4, true)));
        assert!(apply_lac(&ha, &lac).is_err());
    }

    #[test]
    fn cleanup_constant_and() {
        let l = Literal::from_raw;
        let net = AigNetwork::new(1, vec![(l(2), l(0))], vec![l(4)]).unwrap();
        let c = cleanup(&net);
        assert_eq!(c.num_ands(), 0);
        assert_eq!(c.pos(), &[Literal::FALSE]);
    }

    #[test]
    fn cleanup_merges_duplicates() {
        let l = Literal::from_raw;
        let net = AigNetwork::new(
            2,
            vec![(l(2), l(4)), (l(4), l(2)), (l(6), l(8))],
            vec![l(10)],
        )
        .unwrap();
        let c = cleanup(&net);
        assert_eq!(c.num_ands(), 1);
        assert_eq!(exhaustive_outputs(&c), exhaustive_outputs(&net));
    }

    #[test]
    fn substitution_forces_reorder() {
        // node 3 = a&b feeds node 4; node 5 = a&!b is unrelated and larger than 4
        let l = Literal::from_raw;
        let net = AigNetwork::new(
            2,
            vec![(l(2), l(4)), (l(6), l(2)), (l(2), l(5))],
            vec![l(8), l(10)],
        )
        .unwrap();
        let lac = Lac::new(Target::Node(3), Replacement::Substitute(l(10)));
        let (out, perm) = apply_lac_with_map(&net, &lac).unwrap();
        out.validate().unwrap();
        assert_ne!(perm, (0..6).collect::<Vec<_>>());
        for x in 0..4u32 {
            let (a, b) = (x & 1 == 1, x & 2 == 2);
            let y = out.eval(&[a, b]);
            assert_eq!(y[0], a && !b);
            assert_eq!(y[1], a && !b);
        }
    }

    #[test]
    fn cleanup_map_tracks_survivors() {
        let ha = testbench::half_adder().network;
        let lac = Lac::new(Target::Node(4), Replacement::Const0);
        let out = apply_lac(&ha, &lac).unwrap();
        let (c, map) = cleanup_with_map(&out);
        assert_eq!(map[4], None);
        assert!(map[1].is_some());
        let sum_lit = map[5].unwrap();
        assert_eq!(c.pos()[0], sum_lit);
    }
}
