use num_bigint::BigUint;

use crate::aig::{AigBuilder, AigNetwork, Literal};
use crate::error::Result;
use crate::metrics::{check_interfaces, ErrorSpec, Metric};

/// Single-output network over the shared PIs whose output is 1 iff the deviation
/// between the two circuits exceeds the bound.
///
/// MaxED: `(O+1)`-bit subtraction, conditional negation to the absolute value,
/// then an unsigned comparison against the constant bound. MaxHD: per-bit XOR,
/// a popcount adder tree and the same comparison.
pub fn build_miter(golden: &AigNetwork, approx: &AigNetwork, spec: &ErrorSpec) -> Result<AigNetwork> {
    check_interfaces(golden, approx)?;
    let mut b = AigBuilder::new(golden.num_pis());
    let y = embed(&mut b, golden);
    let yh = embed(&mut b, approx);
    let f = match spec.metric {
        Metric::MaxEd => {
            let d = abs_diff(&mut b, &y, &yh);
            greater_than(&mut b, &d, &spec.bound)
        }
        Metric::MaxHd => {
            let x: Vec<Literal> = y.iter().zip(&yh).map(|(&p, &q)| b.xor(p, q)).collect();
            let count = popcount(&mut b, &x);
            greater_than(&mut b, &count, &spec.bound)
        }
    };
    b.add_po(f);
    let mut m = b.finish();
    m.name = "miter".into();
    Ok(m)
}

fn embed(b: &mut AigBuilder, net: &AigNetwork) -> Vec<Literal> {
    let mut map = Vec::with_capacity(net.num_vars());
    map.push(Literal::FALSE);
    map.extend(b.pis());
    for &(l, r) in net.and_nodes() {
        let get = |f: Literal| map[f.var() as usize] ^ f.is_complemented();
        let (x, y) = (get(l), get(r));
        map.push(b.and(x, y));
    }
    net.pos()
        .iter()
        .map(|p| map[p.var() as usize] ^ p.is_complemented())
        .collect()
}

/// `|a - c|` over `len + 1` bits.
fn abs_diff(b: &mut AigBuilder, a: &[Literal], c: &[Literal]) -> Vec<Literal> {
    let n = a.len() + 1;
    let ext = |v: &[Literal], i: usize| v.get(i).copied().unwrap_or(Literal::FALSE);
    // a + !c + 1
    let mut carry = Literal::TRUE;
    let mut diff = Vec::with_capacity(n);
    for i in 0..n {
        let (s, co) = b.full_adder(ext(a, i), !ext(c, i), carry);
        diff.push(s);
        carry = co;
    }
    let sign = diff[n - 1];
    // (diff ^ sign) + sign
    let mut carry = sign;
    let mut out = Vec::with_capacity(n);
    for &d in &diff {
        let x = b.xor(d, sign);
        let (s, co) = b.half_adder(x, carry);
        out.push(s);
        carry = co;
    }
    out
}

/// Number of set bits, as a word of `ceil(log2(len + 1))` bits.
fn popcount(b: &mut AigBuilder, bits: &[Literal]) -> Vec<Literal> {
    if bits.is_empty() {
        return vec![Literal::FALSE];
    }
    let mut level: Vec<Vec<Literal>> = bits.iter().map(|&x| vec![x]).collect();
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        for pair in level.chunks(2) {
            match pair {
                [x, y] => next.push(b.add(x, y)),
                [x] => next.push(x.clone()),
                _ => unreachable!(),
            }
        }
        level = next;
    }
    let width = (usize::BITS - bits.len().leading_zeros()) as usize;
    let mut out = level.pop().unwrap();
    out.truncate(width);
    out
}

/// `x > bound` for an unsigned little-endian word and a constant.
fn greater_than(b: &mut AigBuilder, x: &[Literal], bound: &BigUint) -> Literal {
    if bound.bits() as usize > x.len() {
        return Literal::FALSE;
    }
    let mut g = Literal::FALSE;
    for (i, &xi) in x.iter().enumerate() {
        g = if bound.bit(i as u64) {
            b.and(xi, g)
        } else {
            b.or(xi, g)
        };
    }
    g
}
