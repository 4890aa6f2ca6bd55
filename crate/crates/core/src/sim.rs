//! Bit-parallel simulation over packed pattern pools.
//!
//! Patterns are packed 64 per word. Column `c` of a pool lives in bit `c % 64` of
//! word `c / 64`; bits past the last column are kept at zero on the inputs and
//! masked out of every reduction.

use std::cmp::Reverse;
use std::collections::hash_map::DefaultHasher;
use std::collections::{BinaryHeap, HashSet};
use std::hash::{Hash, Hasher};

use num_bigint::BigUint;
use num_traits::Zero;
use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::aig::{AigNetwork, Literal, Var};
use crate::error::{Error, Result};
use crate::metrics::{check_interfaces, lb_max_error, ErrorSpec};

/// Name of the generator behind [`gen_patterns`], echoed into run reports.
pub const PRNG_NAME: &str = "ChaCha8 (rand_chacha, seed_from_u64)";

pub(crate) fn words_for(columns: usize) -> usize {
    columns.div_ceil(64)
}

/// Mask words selecting columns `start..end`.
pub fn range_mask(words: usize, start: usize, end: usize) -> Vec<u64> {
    let mut mask = vec![0u64; words];
    for (w, m) in mask.iter_mut().enumerate() {
        let lo = (w * 64).max(start);
        let hi = ((w + 1) * 64).min(end);
        if lo < hi {
            let width = hi - lo;
            let bits = if width == 64 { !0 } else { (1u64 << width) - 1 };
            *m = bits << (lo - w * 64);
        }
    }
    mask
}

/// Random base patterns plus counter-examples harvested from SAT calls.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatternPool {
    num_pis: usize,
    base_len: usize,
    base: Vec<Vec<u64>>,
    counterexamples: Vec<Vec<bool>>,
    seen: HashSet<Vec<bool>>,
    seed: u64,
    cex_cap: Option<usize>,
}

/// `m` uniformly random patterns per PI, deterministic in `seed`.
pub fn gen_patterns(num_pis: usize, m: usize, seed: u64) -> PatternPool {
    assert!(m >= 1, "pattern count must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words = words_for(m);
    let tail = range_mask(words, 0, m);
    let base = (0..num_pis)
        .map(|_| {
            (0..words)
                .map(|w| rng.next_u64() & tail[w])
                .collect::<Vec<u64>>()
        })
        .collect();
    PatternPool {
        num_pis,
        base_len: m,
        base,
        counterexamples: Vec::new(),
        seen: HashSet::new(),
        seed,
        cex_cap: None,
    }
}

impl PatternPool {
    /// All `2^num_pis` patterns; column `c` assigns bit `i` of `c` to PI `i`.
    pub fn exhaustive(num_pis: usize) -> Self {
        assert!(num_pis <= 24, "exhaustive pool too large");
        let m = 1usize << num_pis;
        let rows: Vec<Vec<bool>> = (0..m)
            .map(|c| (0..num_pis).map(|i| c >> i & 1 == 1).collect())
            .collect();
        Self::from_patterns(num_pis, &rows)
    }

    /// A pool whose base segment holds exactly the given patterns.
    pub fn from_patterns(num_pis: usize, rows: &[Vec<bool>]) -> Self {
        let m = rows.len();
        let words = words_for(m);
        let mut base = vec![vec![0u64; words]; num_pis];
        for (c, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), num_pis);
            for (i, &bit) in row.iter().enumerate() {
                if bit {
                    base[i][c / 64] |= 1 << (c % 64);
                }
            }
        }
        PatternPool {
            num_pis,
            base_len: m,
            base,
            counterexamples: Vec::new(),
            seen: HashSet::new(),
            seed: 0,
            cex_cap: None,
        }
    }

    pub fn num_pis(&self) -> usize {
        self.num_pis
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of base columns.
    pub fn base_len(&self) -> usize {
        self.base_len
    }

    pub fn base(&self) -> &[Vec<u64>] {
        &self.base
    }

    pub fn counterexamples(&self) -> &[Vec<bool>] {
        &self.counterexamples
    }

    pub fn num_columns(&self) -> usize {
        self.base_len + self.counterexamples.len()
    }

    /// Caps the counter-example segment, evicting the oldest entries.
    pub fn set_counterexample_cap(&mut self, cap: Option<usize>) {
        self.cex_cap = cap;
        self.enforce_cap();
    }

    /// Stores a counter-example unless it is already present. Returns whether it was added.
    pub fn add_counterexample(&mut self, pattern: Vec<bool>) -> Result<bool> {
        if pattern.len() != self.num_pis {
            return Err(Error::Pattern(format!(
                "counter-example has {} bits, expected {}",
                pattern.len(),
                self.num_pis
            )));
        }
        if !self.seen.insert(pattern.clone()) {
            return Ok(false);
        }
        self.counterexamples.push(pattern);
        self.enforce_cap();
        Ok(true)
    }

    fn enforce_cap(&mut self) {
        if let Some(cap) = self.cex_cap {
            while self.counterexamples.len() > cap {
                let old = self.counterexamples.remove(0);
                self.seen.remove(&old);
            }
        }
    }

    /// Pattern of column `c`.
    pub fn pattern(&self, c: usize) -> Vec<bool> {
        if c < self.base_len {
            (0..self.num_pis)
                .map(|i| self.base[i][c / 64] >> (c % 64) & 1 == 1)
                .collect()
        } else {
            self.counterexamples[c - self.base_len].clone()
        }
    }

    /// Per-PI packed words over every column: base first, then counter-examples.
    pub fn packed(&self) -> Vec<Vec<u64>> {
        let total = self.num_columns();
        let words = words_for(total);
        let mut out: Vec<Vec<u64>> = self
            .base
            .iter()
            .map(|b| {
                let mut v = b.clone();
                v.resize(words, 0);
                v
            })
            .collect();
        for (j, row) in self.counterexamples.iter().enumerate() {
            let c = self.base_len + j;
            for (i, &bit) in row.iter().enumerate() {
                if bit {
                    out[i][c / 64] |= 1 << (c % 64);
                }
            }
        }
        out
    }

    /// Per-PI packed words over the counter-example segment only.
    pub fn packed_counterexamples(&self) -> Vec<Vec<u64>> {
        let n = self.counterexamples.len();
        let mut out = vec![vec![0u64; words_for(n)]; self.num_pis];
        for (c, row) in self.counterexamples.iter().enumerate() {
            for (i, &bit) in row.iter().enumerate() {
                if bit {
                    out[i][c / 64] |= 1 << (c % 64);
                }
            }
        }
        out
    }

    /// One hex line per column, PI 0 in the least significant bit.
    pub fn to_hex_lines(&self) -> String {
        let mut s = String::new();
        for c in 0..self.num_columns() {
            let bits = self.pattern(c);
            s.push_str(&bits_to_hex(&bits));
            s.push('\n');
        }
        s
    }

    /// Reads patterns written by [`PatternPool::to_hex_lines`] into the base segment.
    pub fn from_hex_lines(num_pis: usize, text: &str) -> Result<Self> {
        let rows = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| hex_to_bits(l, num_pis))
            .collect::<Result<Vec<_>>>()?;
        if rows.is_empty() {
            return Err(Error::Pattern("no patterns".into()));
        }
        Ok(Self::from_patterns(num_pis, &rows))
    }
}

fn bits_to_hex(bits: &[bool]) -> String {
    let digits = bits.len().div_ceil(4).max(1);
    (0..digits)
        .rev()
        .map(|d| {
            let mut v = 0u32;
            for j in 0..4 {
                if bits.get(4 * d + j).copied().unwrap_or(false) {
                    v |= 1 << j;
                }
            }
            char::from_digit(v, 16).unwrap()
        })
        .collect()
}

fn hex_to_bits(line: &str, num_pis: usize) -> Result<Vec<bool>> {
    let mut bits = vec![false; num_pis];
    for (d, ch) in line.chars().rev().enumerate() {
        let v = ch
            .to_digit(16)
            .ok_or_else(|| Error::Pattern(format!("bad hex digit in {line:?}")))?;
        for j in 0..4 {
            if v >> j & 1 == 1 {
                let idx = 4 * d + j;
                if idx >= num_pis {
                    return Err(Error::Pattern(format!("pattern {line:?} wider than {num_pis} bits")));
                }
                bits[idx] = true;
            }
        }
    }
    Ok(bits)
}

/// Per-variable simulation values of one network over one pool.
#[derive(Clone, Debug)]
pub struct SimState {
    num_vars: usize,
    words: usize,
    columns: usize,
    base_len: usize,
    values: Vec<u64>,
    fingerprint: u64,
}

pub(crate) fn fingerprint(net: &AigNetwork) -> u64 {
    let mut h = DefaultHasher::new();
    net.num_pis().hash(&mut h);
    net.and_nodes().hash(&mut h);
    net.pos().hash(&mut h);
    h.finish()
}

/// Simulates every variable over all columns of the pool.
pub fn simulate(net: &AigNetwork, pool: &PatternPool) -> Result<SimState> {
    if pool.num_pis() != net.num_pis() {
        return Err(Error::PiMismatch {
            expected: net.num_pis(),
            found: pool.num_pis(),
        });
    }
    Ok(simulate_packed(
        net,
        &pool.packed(),
        pool.num_columns(),
        pool.base_len(),
    ))
}

/// Simulates over explicit packed inputs (`columns` valid columns).
pub fn simulate_packed(
    net: &AigNetwork,
    inputs: &[Vec<u64>],
    columns: usize,
    base_len: usize,
) -> SimState {
    assert_eq!(inputs.len(), net.num_pis());
    let words = words_for(columns);
    let nv = net.num_vars();
    let mut values = vec![0u64; nv * words];
    for (i, inp) in inputs.iter().enumerate() {
        values[(1 + i) * words..(2 + i) * words].copy_from_slice(&inp[..words]);
    }
    let first = net.first_and_var() as usize;
    for (k, &(l, r)) in net.and_nodes().iter().enumerate() {
        let v = first + k;
        let (done, rest) = values.split_at_mut(v * words);
        let out = &mut rest[..words];
        let lw = &done[l.var() as usize * words..][..words];
        let rw = &done[r.var() as usize * words..][..words];
        let lc = if l.is_complemented() { !0 } else { 0 };
        let rc = if r.is_complemented() { !0 } else { 0 };
        for w in 0..words {
            out[w] = (lw[w] ^ lc) & (rw[w] ^ rc);
        }
    }
    SimState {
        num_vars: nv,
        words,
        columns,
        base_len,
        values,
        fingerprint: fingerprint(net),
    }
}

impl SimState {
    pub fn words(&self) -> usize {
        self.words
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    pub fn base_len(&self) -> usize {
        self.base_len
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub(crate) fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn is_for(&self, net: &AigNetwork) -> bool {
        self.num_vars == net.num_vars() && self.fingerprint == fingerprint(net)
    }

    pub fn var_words(&self, var: Var) -> &[u64] {
        &self.values[var as usize * self.words..][..self.words]
    }

    /// Values of a literal, with surplus bits cleared.
    pub fn lit_words(&self, lit: Literal) -> Vec<u64> {
        let mask = self.valid_mask();
        let c = if lit.is_complemented() { !0 } else { 0 };
        self.var_words(lit.var())
            .iter()
            .zip(&mask)
            .map(|(&v, &m)| (v ^ c) & m)
            .collect()
    }

    pub fn value(&self, var: Var, column: usize) -> bool {
        self.var_words(var)[column / 64] >> (column % 64) & 1 == 1
    }

    /// Mask over every valid column.
    pub fn valid_mask(&self) -> Vec<u64> {
        range_mask(self.words, 0, self.columns)
    }

    /// Mask over the first `prefix` base columns, or every column when `None`.
    pub fn care_mask(&self, prefix: Option<usize>) -> Vec<u64> {
        match prefix {
            Some(p) => range_mask(self.words, 0, p.min(self.base_len)),
            None => self.valid_mask(),
        }
    }

    /// Per-PO packed values.
    pub fn po_values(&self, net: &AigNetwork) -> Vec<Vec<u64>> {
        net.pos().iter().map(|&p| self.lit_words(p)).collect()
    }
}

/// Event-driven re-evaluation of a node's transitive fanout under a value flip.
///
/// Holds scratch buffers so repeated calls over one state do not reallocate.
pub struct FlipSimulator<'a> {
    net: &'a AigNetwork,
    state: &'a SimState,
    fanouts: std::sync::Arc<Vec<Vec<Var>>>,
    scratch: Vec<u64>,
    changed: Vec<bool>,
    queued: Vec<bool>,
    touched: Vec<Var>,
    heap: BinaryHeap<Reverse<Var>>,
    valid: Vec<u64>,
    runs: usize,
}

impl<'a> FlipSimulator<'a> {
    pub fn new(net: &'a AigNetwork, state: &'a SimState) -> Self {
        Self::with_fanouts(net, state, std::sync::Arc::new(net.fanouts()))
    }

    pub(crate) fn with_fanouts(
        net: &'a AigNetwork,
        state: &'a SimState,
        fanouts: std::sync::Arc<Vec<Vec<Var>>>,
    ) -> Self {
        assert!(state.is_for(net), "simulation state belongs to another network");
        let nv = net.num_vars();
        FlipSimulator {
            net,
            state,
            fanouts,
            scratch: vec![0; nv * state.words],
            changed: vec![false; nv],
            queued: vec![false; nv],
            touched: Vec::new(),
            heap: BinaryHeap::new(),
            valid: state.valid_mask(),
            runs: 0,
        }
    }

    /// Number of cone re-simulations performed so far.
    pub fn runs(&self) -> usize {
        self.runs
    }

    /// Bit `c` of entry `k` is set iff complementing `node` under column `c` flips PO `k`.
    pub fn flip(&mut self, node: Var) -> Vec<Vec<u64>> {
        self.runs += 1;
        let words = self.state.words;
        let (net, state) = (self.net, self.state);
        {
            let dst = &mut self.scratch[node as usize * words..][..words];
            for (w, d) in dst.iter_mut().enumerate() {
                *d = !state.var_words(node)[w] & self.valid[w];
            }
        }
        self.changed[node as usize] = true;
        self.touched.push(node);
        let fanouts = self.fanouts.clone();
        for &f in &fanouts[node as usize] {
            self.enqueue(f);
        }
        while let Some(Reverse(v)) = self.heap.pop() {
            self.queued[v as usize] = false;
            let (l, r) = net.fanins(v);
            let mut differs = false;
            for w in 0..words {
                let lv = self.current(l.var(), w) ^ if l.is_complemented() { !0 } else { 0 };
                let rv = self.current(r.var(), w) ^ if r.is_complemented() { !0 } else { 0 };
                let nv = lv & rv & self.valid[w];
                self.scratch[v as usize * words + w] = nv;
                differs |= nv != state.var_words(v)[w] & self.valid[w];
            }
            if differs {
                self.changed[v as usize] = true;
                self.touched.push(v);
                for &f in &fanouts[v as usize] {
                    self.enqueue(f);
                }
            }
        }
        let out = net
            .pos()
            .iter()
            .map(|p| {
                let v = p.var();
                if self.changed[v as usize] {
                    (0..words)
                        .map(|w| {
                            (self.scratch[v as usize * words + w] ^ state.var_words(v)[w])
                                & self.valid[w]
                        })
                        .collect()
                } else {
                    vec![0u64; words]
                }
            })
            .collect();
        for v in self.touched.drain(..) {
            self.changed[v as usize] = false;
        }
        out
    }

    fn current(&self, var: Var, w: usize) -> u64 {
        if self.changed[var as usize] {
            self.scratch[var as usize * self.state.words + w]
        } else {
            self.state.var_words(var)[w]
        }
    }

    fn enqueue(&mut self, v: Var) {
        if !self.queued[v as usize] {
            self.queued[v as usize] = true;
            self.heap.push(Reverse(v));
        }
    }
}

/// Flip indicators for one node; see [`FlipSimulator::flip`].
pub fn resimulate_flip(state: &SimState, net: &AigNetwork, node: Var) -> Vec<Vec<u64>> {
    FlipSimulator::new(net, state).flip(node)
}

/// Maximum deviation between golden and candidate over the counter-example segment.
pub fn eval_on_counterexamples(
    golden: &AigNetwork,
    candidate: &AigNetwork,
    pool: &PatternPool,
    spec: &ErrorSpec,
) -> Result<BigUint> {
    check_interfaces(golden, candidate)?;
    let n = pool.counterexamples().len();
    if n == 0 {
        return Ok(BigUint::zero());
    }
    let inputs = pool.packed_counterexamples();
    let g = simulate_packed(golden, &inputs, n, 0);
    let c = simulate_packed(candidate, &inputs, n, 0);
    Ok(lb_max_error(
        &g.po_values(golden),
        &c.po_values(candidate),
        spec,
        &g.valid_mask(),
    ))
}
