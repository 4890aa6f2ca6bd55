//! Change propagation matrix: for every node `n`, PO `k` and pattern `i`, whether
//! complementing `n` under pattern `i` complements PO `k`.
//!
//! With it, the PO values after replacing `n` by `n'` follow word-wise as
//! `y'_k = ŷ_k ^ ((n ^ n') & P[n][k])`.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rayon::prelude::*;

use crate::aig::{AigNetwork, Literal, Var};
use crate::error::{Error, Result};
use crate::lac::{Lac, Target};
use crate::sim::{FlipSimulator, SimState};

/// Node-major matrix; each `(node, po)` row is one packed bitvector.
#[derive(Clone, Debug)]
pub struct Cpm {
    columns: usize,
    words: usize,
    pos: Vec<Literal>,
    row_of: Vec<Option<usize>>,
    data: Vec<u64>,
    resim_count: usize,
    fingerprint: u64,
}

/// Rows for every PI and AND node.
pub fn build_cpm(net: &AigNetwork, state: &SimState) -> Cpm {
    let targets: Vec<Var> = (1..net.num_vars() as Var).collect();
    Cpm::build_for(net, state, &targets)
}

impl Cpm {
    /// Rows for the given variables only; used to process large circuits in batches.
    pub fn build_for(net: &AigNetwork, state: &SimState, targets: &[Var]) -> Cpm {
        assert!(state.is_for(net), "simulation state belongs to another network");
        let fanouts = Arc::new(net.fanouts());
        let runs = AtomicUsize::new(0);
        let rows: Vec<Vec<Vec<u64>>> = targets
            .par_iter()
            .map_init(
                || FlipSimulator::with_fanouts(net, state, fanouts.clone()),
                |sim, &v| {
                    runs.fetch_add(1, Ordering::Relaxed);
                    sim.flip(v)
                },
            )
            .collect();
        let words = state.words();
        let o = net.num_pos();
        let mut row_of = vec![None; net.num_vars()];
        let mut data = Vec::with_capacity(targets.len() * o * words);
        for (r, (&v, row)) in targets.iter().zip(rows).enumerate() {
            row_of[v as usize] = Some(r);
            for k in row {
                data.extend_from_slice(&k);
            }
        }
        Cpm {
            columns: state.columns(),
            words,
            pos: net.pos().to_vec(),
            row_of,
            data,
            resim_count: runs.into_inner(),
            fingerprint: state.fingerprint(),
        }
    }

    /// Bytes needed for `nodes` rows over a state.
    pub fn bytes_for(nodes: usize, num_pos: usize, state: &SimState) -> usize {
        nodes * num_pos * state.words() * 8
    }

    /// Pattern count M.
    pub fn m(&self) -> usize {
        self.columns
    }

    /// Number of rows N.
    pub fn node_count(&self) -> usize {
        self.row_of.iter().filter(|r| r.is_some()).count()
    }

    pub fn po_count(&self) -> usize {
        self.pos.len()
    }

    /// Cone re-simulations performed while building.
    pub fn resim_count(&self) -> usize {
        self.resim_count
    }

    pub fn has_row(&self, var: Var) -> bool {
        self.row_of.get(var as usize).is_some_and(|r| r.is_some())
    }

    /// `P[·, var, k]` as packed words.
    pub fn entry(&self, var: Var, k: usize) -> Option<&[u64]> {
        let r = (*self.row_of.get(var as usize)?)?;
        let o = self.pos.len();
        Some(&self.data[(r * o + k) * self.words..][..self.words])
    }
}

/// Post-change PO values predicted by the matrix, one packed vector per PO.
pub fn po_values_under_lac(state: &SimState, cpm: &Cpm, lac: &Lac) -> Result<Vec<Vec<u64>>> {
    if state.fingerprint() != cpm.fingerprint || state.columns() != cpm.columns {
        return Err(Error::PoolMismatch);
    }
    if let Some(v) = lac.target_var() {
        if !cpm.has_row(v) {
            return Err(Error::Config(format!("no change propagation row for node {v}")));
        }
    }
    Ok(po_values_under_lac_words(state, cpm, lac, state.words()))
}

/// As [`po_values_under_lac`] over the first `words` words, without checks.
pub(crate) fn po_values_under_lac_words(
    state: &SimState,
    cpm: &Cpm,
    lac: &Lac,
    words: usize,
) -> Vec<Vec<u64>> {
    let valid = &state.valid_mask()[..words];
    let po_words = |p: Literal| -> Vec<u64> {
        let c = if p.is_complemented() { !0 } else { 0 };
        state.var_words(p.var())[..words]
            .iter()
            .zip(valid)
            .map(|(&v, &m)| (v ^ c) & m)
            .collect()
    };
    let repl = lac.replacement.literal();
    let repl_words = |w: usize| -> u64 {
        let c = if repl.is_complemented() { !0 } else { 0 };
        (state.var_words(repl.var())[w] ^ c) & valid[w]
    };
    match lac.target {
        Target::Po(t) => cpm
            .pos
            .iter()
            .enumerate()
            .map(|(k, &p)| {
                if k == t {
                    (0..words).map(repl_words).collect()
                } else {
                    po_words(p)
                }
            })
            .collect(),
        Target::Node(n) => {
            let nv = state.var_words(n);
            let diff: Vec<u64> = (0..words).map(|w| (nv[w] ^ repl_words(w)) & valid[w]).collect();
            cpm.pos
                .iter()
                .enumerate()
                .map(|(k, &p)| {
                    let prop = cpm.entry(n, k).expect("row present");
                    po_words(p)
                        .into_iter()
                        .enumerate()
                        .map(|(w, y)| y ^ (diff[w] & prop[w]))
                        .collect()
                })
                .collect()
        }
    }
}
