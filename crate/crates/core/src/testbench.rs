//! Reference circuit generators.
//!
//! Arithmetic generators carry their integer function so tests can check any
//! netlist against plain integer arithmetic.

use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::aig::{AigBuilder, AigNetwork, Literal, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    HalfAdder,
    RippleAdder(usize),
    ArrayMultiplier(usize),
    RandomAig { nodes: usize, seed: u64 },
    /// Five-input, two-output example circuit used to illustrate change propagation.
    Figure,
}

#[derive(Clone, Debug)]
pub struct GeneratedCircuit {
    pub family: Family,
    pub network: AigNetwork,
    names: Vec<(&'static str, Var)>,
}

impl GeneratedCircuit {
    /// Variable of a named internal node.
    pub fn node(&self, name: &str) -> Var {
        self.names
            .iter()
            .find(|(n, _)| *n == name)
            .unwrap_or_else(|| panic!("no node named {name}"))
            .1
    }

    /// Expected PO values from the integer function, when the family has one.
    ///
    /// Operands are read little-endian: `a` from the first half of the PIs, `b`
    /// from the second.
    pub fn expected(&self, inputs: &[bool]) -> Option<Vec<bool>> {
        let half = inputs.len() / 2;
        let int = |bits: &[bool]| -> u128 {
            bits.iter().enumerate().map(|(i, &x)| (x as u128) << i).sum()
        };
        let (a, b) = (int(&inputs[..half]), int(&inputs[half..]));
        let value = match self.family {
            Family::HalfAdder | Family::RippleAdder(_) => a + b,
            Family::ArrayMultiplier(_) => a * b,
            _ => return None,
        };
        Some((0..self.network.num_pos()).map(|k| value >> k & 1 == 1).collect())
    }
}

/// Sum and carry of two inputs; nodes `n1 = !a & !b`, `n2 = a & b`, `n3 = !n1 & !n2`.
pub fn half_adder() -> GeneratedCircuit {
    let mut b = AigBuilder::new(2);
    let (x, y) = (b.pi(0), b.pi(1));
    let (sum, carry) = b.half_adder(x, y);
    b.add_po(sum);
    b.add_po(carry);
    let mut network = b.finish();
    network.name = "half_adder".into();
    GeneratedCircuit {
        family: Family::HalfAdder,
        network,
        names: vec![("n1", 3), ("n2", 4), ("n3", 5)],
    }
}

/// `width`-bit ripple-carry adder: PIs `a` then `b`, POs the `width + 1` sum bits.
///
/// Bit 0 is a half adder, the rest are seven-node full adders.
pub fn gen_ripple_adder(width: usize) -> GeneratedCircuit {
    assert!(width >= 1, "width must be positive");
    let mut b = AigBuilder::new(2 * width);
    let x: Vec<Literal> = (0..width).map(|i| b.pi(i)).collect();
    let y: Vec<Literal> = (0..width).map(|i| b.pi(width + i)).collect();
    let (s0, mut carry) = b.half_adder(x[0], y[0]);
    b.add_po(s0);
    for i in 1..width {
        let (s, c) = b.full_adder(x[i], y[i], carry);
        b.add_po(s);
        carry = c;
    }
    b.add_po(carry);
    let mut network = b.finish();
    network.name = format!("add{width}");
    GeneratedCircuit {
        family: Family::RippleAdder(width),
        network,
        names: Vec::new(),
    }
}

/// `width`-bit carry-save array multiplier with a ripple-carry final adder.
///
/// Row `i` adds partial products `a_j & b_i` into the running sum/carry vectors
/// with full adders; the low product bit of each row leaves the array, and the
/// remaining sum and carry vectors are merged by a ripple adder. PIs `a` then
/// `b`, POs the `2 * width` product bits.
pub fn gen_array_multiplier(width: usize) -> GeneratedCircuit {
    assert!(width >= 1, "width must be positive");
    let w = width;
    let mut b = AigBuilder::new(2 * w);
    let x: Vec<Literal> = (0..w).map(|i| b.pi(i)).collect();
    let y: Vec<Literal> = (0..w).map(|i| b.pi(w + i)).collect();
    let mut sum: Vec<Literal> = (0..w).map(|j| b.and(x[j], y[0])).collect();
    let mut carry = vec![Literal::FALSE; w];
    let mut outs = Vec::with_capacity(2 * w);
    for &yi in &y[1..] {
        outs.push(sum[0]);
        let mut ns = Vec::with_capacity(w);
        let mut nc = Vec::with_capacity(w);
        for j in 0..w {
            let pp = b.and(x[j], yi);
            let above = sum.get(j + 1).copied().unwrap_or(Literal::FALSE);
            let (s, c) = b.full_adder(pp, above, carry[j]);
            ns.push(s);
            nc.push(c);
        }
        sum = ns;
        carry = nc;
    }
    outs.push(sum[0]);
    let high: Vec<Literal> = (0..w)
        .map(|j| sum.get(j + 1).copied().unwrap_or(Literal::FALSE))
        .collect();
    let merged = b.add(&high, &carry);
    outs.extend_from_slice(&merged[..w]);
    for o in outs {
        b.add_po(o);
    }
    let mut network = b.finish();
    network.name = format!("mult{width}");
    GeneratedCircuit {
        family: Family::ArrayMultiplier(width),
        network,
        names: Vec::new(),
    }
}

/// Random structurally hashed AIG with `nodes` AND nodes; every sink drives a PO.
pub fn gen_random_aig(nodes: usize, seed: u64) -> GeneratedCircuit {
    gen_random_aig_with(nodes, (nodes / 5).clamp(2, 10), seed)
}

/// As [`gen_random_aig`] with an explicit PI count.
pub fn gen_random_aig_with(nodes: usize, num_pis: usize, seed: u64) -> GeneratedCircuit {
    assert!(nodes >= 1 && num_pis >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = AigBuilder::new(num_pis);
    let mut signals: Vec<Literal> = b.pis();
    let mut used = vec![false; 1 + num_pis + nodes];
    while b.num_ands() < nodes {
        let n = signals.len() as u64;
        // favour recent signals so the graph gains depth
        let recent = (n / 2).max(2).min(n);
        let i = (n - 1 - rng.next_u64() % recent) as usize;
        let j = (rng.next_u64() % n) as usize;
        let bits = rng.next_u64();
        let (p, q) = (signals[i] ^ (bits & 1 == 1), signals[j] ^ (bits & 2 == 2));
        let before = b.num_ands();
        let out = b.and(p, q);
        if b.num_ands() > before {
            used[p.var() as usize] = true;
            used[q.var() as usize] = true;
            signals.push(out);
        }
    }
    let first = 1 + num_pis;
    for v in first..first + nodes {
        if !used[v] {
            b.add_po(Literal::positive(v as Var));
        }
    }
    let mut network = b.finish();
    network.name = format!("random{nodes}_{seed}");
    GeneratedCircuit {
        family: Family::RandomAig { nodes, seed },
        network,
        names: Vec::new(),
    }
}

/// Five PIs `x1..x5`, nodes `n = x1 & x4`, `b = n & x3`, `c = b & x5`,
/// `d = c & x1` driving PO 0 and `e = x2 & x3` driving PO 1.
pub fn figure_example() -> GeneratedCircuit {
    let mut bld = AigBuilder::new(5);
    let x = bld.pis();
    let n = bld.and(x[0], x[3]);
    let b = bld.and(n, x[2]);
    let c = bld.and(b, x[4]);
    let d = bld.and(c, x[0]);
    let e = bld.and(x[1], x[2]);
    bld.add_po(d);
    bld.add_po(e);
    let mut network = bld.finish();
    network.name = "figure".into();
    let names = vec![
        ("n", n.var()),
        ("b", b.var()),
        ("c", c.var()),
        ("d", d.var()),
        ("e", e.var()),
    ];
    GeneratedCircuit {
        family: Family::Figure,
        network,
        names,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aig::{parse_aiger, write_aiger};

    fn check_exhaustive(g: &GeneratedCircuit) {
        let n = g.network.num_pis();
        for x in 0..1u64 << n {
            let bits: Vec<bool> = (0..n).map(|i| x >> i & 1 == 1).collect();
            assert_eq!(Some(g.network.eval(&bits)), g.expected(&bits), "x = {x}");
        }
    }

    #[test]
    fn half_adder_shape() {
        let ha = half_adder();
        assert_eq!(ha.network.num_ands(), 3);
        assert_eq!(ha.network.pos(), &[Literal::positive(5), Literal::positive(4)]);
        assert_eq!(ha.network.fanins(3), (Literal::new(2, true), Literal::new(1, true)));
        check_exhaustive(&ha);
    }

    #[test]
    fn ripple_adders() {
        let one = gen_ripple_adder(1);
        assert_eq!(one.network, half_adder().network.with_metadata_of(&one.network));
        for w in [1, 2, 4, 6] {
            check_exhaustive(&gen_ripple_adder(w));
        }
        let add8 = gen_ripple_adder(8).network;
        assert_eq!((add8.num_pis(), add8.num_pos(), add8.num_ands()), (16, 9, 52));
    }

    #[test]
    fn multipliers() {
        assert_eq!(gen_array_multiplier(1).network.num_ands(), 1);
        for w in 1..=6 {
            let m = gen_array_multiplier(w);
            assert_eq!(m.network.num_pos(), 2 * w);
            check_exhaustive(&m);
        }
        assert_eq!(gen_array_multiplier(8).network.num_pis(), 16);
    }

    #[test]
    fn random_aigs() {
        let one = gen_random_aig(1, 9).network;
        assert_eq!(one.num_ands(), 1);
        assert_eq!(gen_random_aig(60, 4).network, gen_random_aig(60, 4).network);
        for seed in 0..5 {
            let net = gen_random_aig(200, seed).network;
            net.validate().unwrap();
            assert_eq!(net.num_ands(), 200);
            assert!(net.reachable().iter().skip(net.first_and_var() as usize).all(|&r| r));
        }
    }

    #[test]
    fn generators_round_trip() {
        for g in [half_adder(), gen_ripple_adder(3), gen_array_multiplier(3), gen_random_aig(40, 1), figure_example()] {
            let back = parse_aiger(&write_aiger(&g.network)).unwrap();
            assert_eq!(back.and_nodes(), g.network.and_nodes());
            assert_eq!(back.pos(), g.network.pos());
        }
    }
}
