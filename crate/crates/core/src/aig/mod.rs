//! And-Inverter Graphs.
//!
//! Variables follow the AIGER numbering: variable 0 is constant false, variables
//! `1..=num_pis` are primary inputs and the AND nodes follow in topological order.
//! Every AND node's fanin variables are strictly smaller than its own index.

mod aiger;
mod builder;
mod transform;

use std::collections::BTreeSet;
use std::fmt;
use std::ops::{BitXor, Not};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lac::{Lac, Replacement, Target};

pub use aiger::{parse_aiger, parse_aiger_bytes, write_aiger, AigerError};
pub use builder::AigBuilder;
pub use transform::{apply_lac, apply_lac_with_map, cleanup, cleanup_with_map};

/// Variable index.
pub type Var = u32;

/// A signal reference with polarity, AIGER style: `var * 2 + complemented`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Literal(u32);

impl Literal {
    pub const FALSE: Literal = Literal(0);
    pub const TRUE: Literal = Literal(1);

    pub fn new(var: Var, complemented: bool) -> Literal {
        Literal(var * 2 + complemented as u32)
    }

    pub fn positive(var: Var) -> Literal {
        Literal(var * 2)
    }

    pub fn from_raw(raw: u32) -> Literal {
        Literal(raw)
    }

    pub fn raw(self) -> u32 {
        self.0
    }

    pub fn var(self) -> Var {
        self.0 >> 1
    }

    pub fn is_complemented(self) -> bool {
        self.0 & 1 == 1
    }

    pub fn is_const(self) -> bool {
        self.0 < 2
    }

    pub fn regular(self) -> Literal {
        Literal(self.0 & !1)
    }
}

impl Not for Literal {
    type Output = Literal;

    fn not(self) -> Literal {
        Literal(self.0 ^ 1)
    }
}

impl BitXor<bool> for Literal {
    type Output = Literal;

    fn bitxor(self, rhs: bool) -> Literal {
        Literal(self.0 ^ rhs as u32)
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A combinational AIG.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct AigNetwork {
    pub name: String,
    num_pis: usize,
    ands: Vec<(Literal, Literal)>,
    pos: Vec<Literal>,
    /// Raw AIGER symbol table lines, carried through unchanged.
    symbols: Vec<String>,
    /// Comment lines following the `c` marker.
    comments: Vec<String>,
}

impl AigNetwork {
    /// Builds a network and checks its structural invariants.
    pub fn new(num_pis: usize, ands: Vec<(Literal, Literal)>, pos: Vec<Literal>) -> Result<Self> {
        let net = AigNetwork {
            name: String::new(),
            num_pis,
            ands,
            pos,
            symbols: Vec::new(),
            comments: Vec::new(),
        };
        net.validate()?;
        Ok(net)
    }

    pub(crate) fn from_parts_unchecked(
        num_pis: usize,
        ands: Vec<(Literal, Literal)>,
        pos: Vec<Literal>,
    ) -> Self {
        let net = AigNetwork {
            name: String::new(),
            num_pis,
            ands,
            pos,
            symbols: Vec::new(),
            comments: Vec::new(),
        };
        debug_assert!(net.validate().is_ok());
        net
    }

    /// Checks acyclicity (fanin index below node index) and PO references.
    pub fn validate(&self) -> Result<()> {
        let first_and = self.first_and_var();
        for (i, &(l, r)) in self.ands.iter().enumerate() {
            let v = first_and + i as Var;
            for f in [l, r] {
                if f.var() >= v {
                    return Err(Error::InvalidNetwork(format!(
                        "node {v} has fanin literal {f} that does not precede it"
                    )));
                }
            }
        }
        let nv = self.num_vars() as Var;
        for (k, po) in self.pos.iter().enumerate() {
            if po.var() >= nv {
                return Err(Error::InvalidNetwork(format!(
                    "output {k} references missing literal {po}"
                )));
            }
        }
        Ok(())
    }

    /// Copies name, symbols and comments from another network.
    pub fn with_metadata_of(mut self, other: &AigNetwork) -> Self {
        self.name = other.name.clone();
        self.symbols = other.symbols.clone();
        self.comments = other.comments.clone();
        self
    }

    pub fn num_pis(&self) -> usize {
        self.num_pis
    }

    pub fn num_pos(&self) -> usize {
        self.pos.len()
    }

    pub fn num_ands(&self) -> usize {
        self.ands.len()
    }

    /// Constant, PIs and AND nodes.
    pub fn num_vars(&self) -> usize {
        1 + self.num_pis + self.ands.len()
    }

    pub fn and_nodes(&self) -> &[(Literal, Literal)] {
        &self.ands
    }

    pub fn pos(&self) -> &[Literal] {
        &self.pos
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn comments(&self) -> &[String] {
        &self.comments
    }

    pub fn set_comments(&mut self, comments: Vec<String>) {
        self.comments = comments;
    }

    pub(crate) fn set_symbols(&mut self, symbols: Vec<String>) {
        self.symbols = symbols;
    }

    /// Reverses PO order, for corpora that list the most significant output first.
    pub fn reverse_pos(&mut self) {
        self.pos.reverse();
    }

    pub fn first_and_var(&self) -> Var {
        1 + self.num_pis as Var
    }

    pub fn pi_var(&self, index: usize) -> Var {
        debug_assert!(index < self.num_pis);
        1 + index as Var
    }

    pub fn is_pi(&self, var: Var) -> bool {
        var >= 1 && (var as usize) <= self.num_pis
    }

    pub fn is_and(&self, var: Var) -> bool {
        var >= self.first_and_var() && (var as usize) < self.num_vars()
    }

    pub fn fanins(&self, var: Var) -> (Literal, Literal) {
        self.ands[(var - self.first_and_var()) as usize]
    }

    /// Every PI followed by every AND node; fanins precede their nodes.
    pub fn topo_order(&self) -> Vec<Var> {
        (1..self.num_vars() as Var).collect()
    }

    /// AND-node fanout lists, indexed by variable.
    pub fn fanouts(&self) -> Vec<Vec<Var>> {
        let mut out = vec![Vec::new(); self.num_vars()];
        let first = self.first_and_var();
        for (i, &(l, r)) in self.ands.iter().enumerate() {
            let v = first + i as Var;
            out[l.var() as usize].push(v);
            if r.var() != l.var() {
                out[r.var() as usize].push(v);
            }
        }
        out
    }

    /// Variables in the transitive fanin of some PO (including PIs and the constant).
    pub fn reachable(&self) -> Vec<bool> {
        let mut live = vec![false; self.num_vars()];
        for po in &self.pos {
            live[po.var() as usize] = true;
        }
        let first = self.first_and_var();
        for v in (first..self.num_vars() as Var).rev() {
            if live[v as usize] {
                let (l, r) = self.fanins(v);
                live[l.var() as usize] = true;
                live[r.var() as usize] = true;
            }
        }
        live
    }

    /// Reference counts from live AND nodes and POs.
    pub fn live_ref_counts(&self) -> Vec<u32> {
        let live = self.reachable();
        let mut refs = vec![0u32; self.num_vars()];
        for po in &self.pos {
            refs[po.var() as usize] += 1;
        }
        let first = self.first_and_var();
        for (i, &(l, r)) in self.ands.iter().enumerate() {
            if live[first as usize + i] {
                refs[l.var() as usize] += 1;
                refs[r.var() as usize] += 1;
            }
        }
        refs
    }

    /// Number of live AND nodes.
    pub fn live_and_count(&self) -> usize {
        let live = self.reachable();
        live[self.first_and_var() as usize..]
            .iter()
            .filter(|&&b| b)
            .count()
    }

    /// Membership mask of the transitive fanout of `var` (excluding `var`).
    pub fn tfo_mask(&self, var: Var) -> Vec<bool> {
        let mut mark = vec![false; self.num_vars()];
        let first = self.first_and_var().max(var + 1);
        for v in first..self.num_vars() as Var {
            let (l, r) = self.fanins(v);
            let hit = |f: Literal| f.var() == var || mark[f.var() as usize];
            if hit(l) || hit(r) {
                mark[v as usize] = true;
            }
        }
        mark
    }

    /// Transitive fanout of a variable: AND nodes plus the indices of reached POs.
    pub fn tfo(&self, var: Var) -> NodeSet {
        let mask = self.tfo_mask(var);
        let nodes = mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(v, _)| v as Var)
            .collect();
        let pos = self
            .pos
            .iter()
            .enumerate()
            .filter(|(_, po)| po.var() == var || mask[po.var() as usize])
            .map(|(k, _)| k)
            .collect();
        NodeSet { nodes, pos }
    }

    /// Size of the maximum fanout-free cone of an AND node, the node included.
    pub fn mffc_size(&self, var: Var) -> usize {
        Mffc::new(self).size(var)
    }

    /// True iff the change is a substitution whose source lies in the target's
    /// transitive fanout or is the target itself.
    pub fn introduces_loop(&self, lac: &Lac) -> bool {
        match (lac.target, lac.replacement) {
            (Target::Node(t), Replacement::Substitute(src)) => {
                let s = src.var();
                if s == t {
                    return true;
                }
                if s < t {
                    return false;
                }
                self.tfo_mask(t)[s as usize]
            }
            _ => false,
        }
    }

    /// Scalar evaluation of every variable under one input assignment.
    pub fn eval_vars(&self, inputs: &[bool]) -> Vec<bool> {
        assert_eq!(inputs.len(), self.num_pis);
        let mut val = Vec::with_capacity(self.num_vars());
        val.push(false);
        val.extend_from_slice(inputs);
        for &(l, r) in &self.ands {
            let a = val[l.var() as usize] ^ l.is_complemented();
            let b = val[r.var() as usize] ^ r.is_complemented();
            val.push(a && b);
        }
        val
    }

    /// Scalar evaluation of the POs.
    pub fn eval(&self, inputs: &[bool]) -> Vec<bool> {
        let val = self.eval_vars(inputs);
        self.pos
            .iter()
            .map(|po| val[po.var() as usize] ^ po.is_complemented())
            .collect()
    }
}

/// A set of nodes and POs, as returned by [`AigNetwork::tfo`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NodeSet {
    pub nodes: BTreeSet<Var>,
    pub pos: BTreeSet<usize>,
}

impl NodeSet {
    pub fn contains(&self, var: Var) -> bool {
        self.nodes.contains(&var)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Repeated MFFC queries against one set of live reference counts.
pub struct Mffc<'a> {
    net: &'a AigNetwork,
    refs: Vec<u32>,
    stack: Vec<Var>,
    touched: Vec<Var>,
}

impl<'a> Mffc<'a> {
    pub fn new(net: &'a AigNetwork) -> Self {
        Mffc {
            net,
            refs: net.live_ref_counts(),
            stack: Vec::new(),
            touched: Vec::new(),
        }
    }

    /// MFFC size of `var`; zero for PIs and the constant.
    pub fn size(&mut self, var: Var) -> usize {
        if !self.net.is_and(var) {
            return 0;
        }
        let mut count = 0;
        self.stack.push(var);
        while let Some(v) = self.stack.pop() {
            count += 1;
            let (l, r) = self.net.fanins(v);
            for f in [l.var(), r.var()] {
                if self.net.is_and(f) {
                    self.refs[f as usize] -= 1;
                    self.touched.push(f);
                    if self.refs[f as usize] == 0 {
                        self.stack.push(f);
                    }
                }
            }
        }
        for v in self.touched.drain(..) {
            self.refs[v as usize] += 1;
        }
        count
    }

    /// Nodes freed by disconnecting PO `k` alone.
    pub fn po_size(&mut self, k: usize) -> usize {
        let d = self.net.pos()[k].var();
        if self.net.is_and(d) && self.refs[d as usize] == 1 {
            self.size(d)
        } else {
            0
        }
    }

    /// Estimated area gain of a change.
    pub fn gain(&mut self, target: Target) -> usize {
        match target {
            Target::Node(v) => self.size(v),
            Target::Po(k) => self.po_size(k),
        }
    }
}
