use std::collections::HashMap;

use super::{AigNetwork, Literal, Var};

/// Incremental AIG construction with constant propagation and structural hashing.
///
/// Every `and` call either returns an existing literal or appends a new node whose
/// fanins precede it, so the result is always topologically ordered.
#[derive(Clone, Debug)]
pub struct AigBuilder {
    num_pis: usize,
    ands: Vec<(Literal, Literal)>,
    strash: HashMap<(Literal, Literal), Literal>,
    pos: Vec<Literal>,
}

impl AigBuilder {
    pub fn new(num_pis: usize) -> Self {
        AigBuilder {
            num_pis,
            ands: Vec::new(),
            strash: HashMap::new(),
            pos: Vec::new(),
        }
    }

    pub fn num_pis(&self) -> usize {
        self.num_pis
    }

    pub fn num_ands(&self) -> usize {
        self.ands.len()
    }

    pub fn pi(&self, index: usize) -> Literal {
        assert!(index < self.num_pis, "input {index} out of range");
        Literal::positive(1 + index as Var)
    }

    pub fn pis(&self) -> Vec<Literal> {
        (0..self.num_pis).map(|i| self.pi(i)).collect()
    }

    pub fn and(&mut self, a: Literal, b: Literal) -> Literal {
        if a == Literal::FALSE || b == Literal::FALSE || a == !b {
            return Literal::FALSE;
        }
        if a == Literal::TRUE || a == b {
            return b;
        }
        if b == Literal::TRUE {
            return a;
        }
        let key = if a < b { (a, b) } else { (b, a) };
        if let Some(&lit) = self.strash.get(&key) {
            return lit;
        }
        let var = 1 + self.num_pis as Var + self.ands.len() as Var;
        let lit = Literal::positive(var);
        // larger literal first, the usual AIGER convention
        self.ands.push((key.1, key.0));
        self.strash.insert(key, lit);
        lit
    }

    /// Appends an AND node without simplification or hashing.
    pub fn raw_and(&mut self, a: Literal, b: Literal) -> Literal {
        let var = 1 + self.num_pis as Var + self.ands.len() as Var;
        assert!(a.var() < var && b.var() < var);
        self.ands.push((a, b));
        Literal::positive(var)
    }

    pub fn or(&mut self, a: Literal, b: Literal) -> Literal {
        !self.and(!a, !b)
    }

    pub fn xor(&mut self, a: Literal, b: Literal) -> Literal {
        let both = self.and(a, b);
        let neither = self.and(!a, !b);
        self.and(!both, !neither)
    }

    pub fn mux(&mut self, sel: Literal, then: Literal, other: Literal) -> Literal {
        let t = self.and(sel, then);
        let e = self.and(!sel, other);
        self.or(t, e)
    }

    /// Returns `(sum, carry)`.
    pub fn half_adder(&mut self, a: Literal, b: Literal) -> (Literal, Literal) {
        let neither = self.and(!a, !b);
        let carry = self.and(a, b);
        let sum = self.and(!neither, !carry);
        (sum, carry)
    }

    /// Returns `(sum, carry)`, seven nodes in the general case.
    pub fn full_adder(&mut self, a: Literal, b: Literal, c: Literal) -> (Literal, Literal) {
        let (t, ab) = self.half_adder(a, b);
        let (sum, tc) = self.half_adder(t, c);
        let carry = self.or(ab, tc);
        (sum, carry)
    }

    /// Ripple-carry sum of two little-endian words; the result has one extra bit.
    pub fn add(&mut self, a: &[Literal], b: &[Literal]) -> Vec<Literal> {
        let width = a.len().max(b.len());
        let mut out = Vec::with_capacity(width + 1);
        let mut carry = Literal::FALSE;
        for i in 0..width {
            let x = a.get(i).copied().unwrap_or(Literal::FALSE);
            let y = b.get(i).copied().unwrap_or(Literal::FALSE);
            let (s, c) = self.full_adder(x, y, carry);
            out.push(s);
            carry = c;
        }
        out.push(carry);
        out
    }

    pub fn add_po(&mut self, lit: Literal) {
        self.pos.push(lit);
    }

    pub fn finish(self) -> AigNetwork {
        AigNetwork::from_parts_unchecked(self.num_pis, self.ands, self.pos)
    }
}
