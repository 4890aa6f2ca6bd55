//! A small conflict-driven clause-learning solver.
//!
//! Two watched literals with blockers, first-UIP learning with local clause
//! minimization, VSIDS branching, phase saving, Luby restarts and activity-based
//! learnt clause deletion. Runs are deterministic: identical inputs yield the same
//! search regardless of the conflict budget, so a larger budget never changes an
//! answer that a smaller one already produced.

use std::time::Instant;

const UNDEF: u8 = 2;
const NO_REASON: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveResult {
    Sat,
    Unsat,
    Unknown,
}

#[inline]
fn var_of(l: u32) -> usize {
    (l >> 1) as usize
}

#[inline]
fn value(assign: &[u8], l: u32) -> u8 {
    let a = assign[var_of(l)];
    if a == UNDEF {
        UNDEF
    } else {
        a ^ (l & 1) as u8
    }
}

fn from_dimacs(x: i32) -> u32 {
    let v = x.unsigned_abs() - 1;
    2 * v + (x < 0) as u32
}

struct Clause {
    lits: Vec<u32>,
    learnt: bool,
    deleted: bool,
    activity: f64,
}

#[derive(Clone, Copy)]
struct Watch {
    cref: u32,
    blocker: u32,
}

/// Max-heap of variables keyed by activity.
struct VarHeap {
    heap: Vec<u32>,
    index: Vec<usize>,
}

impl VarHeap {
    const ABSENT: usize = usize::MAX;

    fn new(n: usize) -> Self {
        VarHeap {
            heap: Vec::with_capacity(n),
            index: vec![Self::ABSENT; n],
        }
    }

    fn contains(&self, v: u32) -> bool {
        self.index[v as usize] != Self::ABSENT
    }

    fn insert(&mut self, v: u32, act: &[f64]) {
        if self.contains(v) {
            return;
        }
        self.index[v as usize] = self.heap.len();
        self.heap.push(v);
        self.up(self.heap.len() - 1, act);
    }

    fn increase(&mut self, v: u32, act: &[f64]) {
        if self.contains(v) {
            self.up(self.index[v as usize], act);
        }
    }

    fn pop(&mut self, act: &[f64]) -> Option<u32> {
        let top = *self.heap.first()?;
        let last = self.heap.pop().unwrap();
        self.index[top as usize] = Self::ABSENT;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.index[last as usize] = 0;
            self.down(0, act);
        }
        Some(top)
    }

    fn better(a: u32, b: u32, act: &[f64]) -> bool {
        let (x, y) = (act[a as usize], act[b as usize]);
        x > y || (x == y && a < b)
    }

    fn up(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        while i > 0 {
            let p = (i - 1) / 2;
            if !Self::better(v, self.heap[p], act) {
                break;
            }
            self.heap[i] = self.heap[p];
            self.index[self.heap[i] as usize] = i;
            i = p;
        }
        self.heap[i] = v;
        self.index[v as usize] = i;
    }

    fn down(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        let n = self.heap.len();
        loop {
            let l = 2 * i + 1;
            if l >= n {
                break;
            }
            let r = l + 1;
            let c = if r < n && Self::better(self.heap[r], self.heap[l], act) {
                r
            } else {
                l
            };
            if !Self::better(self.heap[c], v, act) {
                break;
            }
            self.heap[i] = self.heap[c];
            self.index[self.heap[i] as usize] = i;
            i = c;
        }
        self.heap[i] = v;
        self.index[v as usize] = i;
    }
}

fn luby(y: f64, mut x: u64) -> f64 {
    let (mut size, mut seq) = (1u64, 0u32);
    while size < x + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    while size - 1 != x {
        size = (size - 1) >> 1;
        seq -= 1;
        x %= size;
    }
    y.powi(seq as i32)
}

pub struct Solver {
    clauses: Vec<Clause>,
    learnts: Vec<u32>,
    watches: Vec<Vec<Watch>>,
    assign: Vec<u8>,
    level: Vec<u32>,
    reason: Vec<u32>,
    trail: Vec<u32>,
    trail_lim: Vec<usize>,
    qhead: usize,
    activity: Vec<f64>,
    var_inc: f64,
    cla_inc: f64,
    order: VarHeap,
    phase: Vec<bool>,
    seen: Vec<bool>,
    ok: bool,
    conflicts: u64,
    max_learnts: f64,
}

impl Solver {
    pub fn new(num_vars: usize) -> Self {
        let mut order = VarHeap::new(num_vars);
        let activity = vec![0.0; num_vars];
        for v in 0..num_vars as u32 {
            order.insert(v, &activity);
        }
        Solver {
            clauses: Vec::new(),
            learnts: Vec::new(),
            watches: vec![Vec::new(); 2 * num_vars],
            assign: vec![UNDEF; num_vars],
            level: vec![0; num_vars],
            reason: vec![NO_REASON; num_vars],
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            activity,
            var_inc: 1.0,
            cla_inc: 1.0,
            order,
            phase: vec![false; num_vars],
            seen: vec![false; num_vars],
            ok: true,
            conflicts: 0,
            max_learnts: 0.0,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.assign.len()
    }

    /// Conflicts encountered so far.
    pub fn conflicts(&self) -> u64 {
        self.conflicts
    }

    /// Adds a clause of DIMACS literals. Must be called before solving.
    pub fn add_clause(&mut self, clause: &[i32]) {
        if !self.ok {
            return;
        }
        let mut lits: Vec<u32> = clause.iter().map(|&x| from_dimacs(x)).collect();
        lits.sort_unstable();
        lits.dedup();
        if lits.windows(2).any(|w| w[0] ^ 1 == w[1]) {
            return;
        }
        if lits.iter().any(|&l| value(&self.assign, l) == 1) {
            return;
        }
        lits.retain(|&l| value(&self.assign, l) != 0);
        match lits.len() {
            0 => self.ok = false,
            1 => {
                self.enqueue(lits[0], NO_REASON);
                if self.propagate().is_some() {
                    self.ok = false;
                }
            }
            _ => {
                self.attach(lits, false);
            }
        }
    }

    fn attach(&mut self, lits: Vec<u32>, learnt: bool) -> u32 {
        let cref = self.clauses.len() as u32;
        self.watches[(lits[0] ^ 1) as usize].push(Watch {
            cref,
            blocker: lits[1],
        });
        self.watches[(lits[1] ^ 1) as usize].push(Watch {
            cref,
            blocker: lits[0],
        });
        self.clauses.push(Clause {
            lits,
            learnt,
            deleted: false,
            activity: 0.0,
        });
        if learnt {
            self.learnts.push(cref);
        }
        cref
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    fn enqueue(&mut self, l: u32, reason: u32) {
        let v = var_of(l);
        self.assign[v] = 1 ^ (l & 1) as u8;
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(l);
    }

    /// Unit propagation; returns a conflicting clause if one is found.
    fn propagate(&mut self) -> Option<u32> {
        let mut conflict = None;
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let false_lit = p ^ 1;
            let mut ws = std::mem::take(&mut self.watches[p as usize]);
            let (mut i, mut j) = (0, 0);
            while i < ws.len() {
                let w = ws[i];
                i += 1;
                if value(&self.assign, w.blocker) == 1 {
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                let c = &mut self.clauses[w.cref as usize];
                if c.deleted {
                    continue;
                }
                if c.lits[0] == false_lit {
                    c.lits.swap(0, 1);
                }
                let first = c.lits[0];
                let nw = Watch {
                    cref: w.cref,
                    blocker: first,
                };
                if first != w.blocker && value(&self.assign, first) == 1 {
                    ws[j] = nw;
                    j += 1;
                    continue;
                }
                let mut moved = false;
                for k in 2..c.lits.len() {
                    if value(&self.assign, c.lits[k]) != 0 {
                        c.lits.swap(1, k);
                        self.watches[(c.lits[1] ^ 1) as usize].push(nw);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = nw;
                j += 1;
                if value(&self.assign, first) == 0 {
                    conflict = Some(w.cref);
                    self.qhead = self.trail.len();
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    self.enqueue(first, w.cref);
                }
            }
            ws.truncate(j);
            self.watches[p as usize] = ws;
            if conflict.is_some() {
                break;
            }
        }
        conflict
    }

    fn bump_var(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.order.increase(v as u32, &self.activity);
    }

    fn bump_clause(&mut self, cref: u32) {
        let c = &mut self.clauses[cref as usize];
        c.activity += self.cla_inc;
        if c.activity > 1e20 {
            for &l in &self.learnts {
                self.clauses[l as usize].activity *= 1e-20;
            }
            self.cla_inc *= 1e-20;
        }
    }

    /// First-UIP conflict analysis. Returns the learnt clause (asserting literal
    /// first) and the backtrack level.
    fn analyze(&mut self, mut confl: u32) -> (Vec<u32>, u32) {
        let mut learnt = vec![0u32];
        let mut path = 0;
        let mut p: Option<u32> = None;
        let mut index = self.trail.len();
        loop {
            if self.clauses[confl as usize].learnt {
                self.bump_clause(confl);
            }
            let start = usize::from(p.is_some());
            let lits = self.clauses[confl as usize].lits.clone();
            for &q in &lits[start..] {
                let v = var_of(q);
                if !self.seen[v] && self.level[v] > 0 {
                    self.bump_var(v);
                    self.seen[v] = true;
                    if self.level[v] >= self.decision_level() {
                        path += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                index -= 1;
                if self.seen[var_of(self.trail[index])] {
                    break;
                }
            }
            let lit = self.trail[index];
            let v = var_of(lit);
            p = Some(lit);
            confl = self.reason[v];
            self.seen[v] = false;
            path -= 1;
            if path == 0 {
                break;
            }
        }
        learnt[0] = p.unwrap() ^ 1;

        // drop literals implied by other literals of the clause
        let all = learnt.clone();
        let mut keep = vec![learnt[0]];
        for &q in &learnt[1..] {
            let r = self.reason[var_of(q)];
            let redundant = r != NO_REASON
                && self.clauses[r as usize].lits[1..].iter().all(|&x| {
                    let v = var_of(x);
                    self.seen[v] || self.level[v] == 0
                });
            if !redundant {
                keep.push(q);
            }
        }
        for &q in &all {
            self.seen[var_of(q)] = false;
        }
        let mut learnt = keep;

        let bt = if learnt.len() == 1 {
            0
        } else {
            let mut max_i = 1;
            for i in 2..learnt.len() {
                if self.level[var_of(learnt[i])] > self.level[var_of(learnt[max_i])] {
                    max_i = i;
                }
            }
            learnt.swap(1, max_i);
            self.level[var_of(learnt[1])]
        };
        (learnt, bt)
    }

    fn cancel_until(&mut self, level: u32) {
        if self.decision_level() <= level {
            return;
        }
        let lim = self.trail_lim[level as usize];
        for i in (lim..self.trail.len()).rev() {
            let l = self.trail[i];
            let v = var_of(l);
            self.phase[v] = self.assign[v] == 1;
            self.assign[v] = UNDEF;
            self.reason[v] = NO_REASON;
            self.order.insert(v as u32, &self.activity);
        }
        self.trail.truncate(lim);
        self.trail_lim.truncate(level as usize);
        self.qhead = self.trail.len();
    }

    fn pick_branch(&mut self) -> Option<u32> {
        while let Some(v) = self.order.pop(&self.activity) {
            if self.assign[v as usize] == UNDEF {
                return Some(2 * v + u32::from(!self.phase[v as usize]));
            }
        }
        None
    }

    fn locked(&self, cref: u32) -> bool {
        let l0 = self.clauses[cref as usize].lits[0];
        self.reason[var_of(l0)] == cref && value(&self.assign, l0) == 1
    }

    fn reduce_db(&mut self) {
        let mut ls = std::mem::take(&mut self.learnts);
        ls.sort_by(|&a, &b| {
            self.clauses[a as usize]
                .activity
                .total_cmp(&self.clauses[b as usize].activity)
                .then(a.cmp(&b))
        });
        let half = ls.len() / 2;
        let mut kept = Vec::with_capacity(ls.len());
        for (i, &c) in ls.iter().enumerate() {
            if i < half && self.clauses[c as usize].lits.len() > 2 && !self.locked(c) {
                let cl = &mut self.clauses[c as usize];
                cl.deleted = true;
                cl.lits = Vec::new();
            } else {
                kept.push(c);
            }
        }
        kept.sort_unstable();
        self.learnts = kept;
        let clauses = &self.clauses;
        for w in &mut self.watches {
            w.retain(|x| !clauses[x.cref as usize].deleted);
        }
    }

    /// Runs until a verdict, `conflict_limit` conflicts, or the deadline.
    pub fn solve(&mut self, conflict_limit: u64, deadline: Option<Instant>) -> SolveResult {
        if !self.ok {
            return SolveResult::Unsat;
        }
        if self.propagate().is_some() {
            self.ok = false;
            return SolveResult::Unsat;
        }
        self.max_learnts = (self.clauses.len() as f64 / 3.0).max(1000.0);
        let mut restarts = 0u64;
        loop {
            let budget = (luby(2.0, restarts) * 100.0) as u64;
            match self.search(budget, conflict_limit, deadline) {
                Some(r) => {
                    if r != SolveResult::Sat {
                        self.cancel_until(0);
                    }
                    return r;
                }
                None => {
                    restarts += 1;
                    self.max_learnts *= 1.1;
                }
            }
        }
    }

    fn search(&mut self, restart_after: u64, limit: u64, deadline: Option<Instant>) -> Option<SolveResult> {
        let mut local = 0u64;
        loop {
            if let Some(confl) = self.propagate() {
                self.conflicts += 1;
                local += 1;
                if self.decision_level() == 0 {
                    self.ok = false;
                    return Some(SolveResult::Unsat);
                }
                if self.conflicts > limit {
                    return Some(SolveResult::Unknown);
                }
                if self.conflicts % 256 == 0 && deadline.is_some_and(|d| Instant::now() >= d) {
                    return Some(SolveResult::Unknown);
                }
                let (learnt, bt) = self.analyze(confl);
                self.cancel_until(bt);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], NO_REASON);
                } else {
                    let first = learnt[0];
                    let cref = self.attach(learnt, true);
                    self.bump_clause(cref);
                    self.enqueue(first, cref);
                }
                self.var_inc /= 0.95;
                self.cla_inc /= 0.999;
            } else {
                if local >= restart_after {
                    self.cancel_until(0);
                    return None;
                }
                if self.learnts.len() as f64 - self.trail.len() as f64 >= self.max_learnts {
                    self.reduce_db();
                }
                match self.pick_branch() {
                    None => return Some(SolveResult::Sat),
                    Some(l) => {
                        self.trail_lim.push(self.trail.len());
                        self.enqueue(l, NO_REASON);
                    }
                }
            }
        }
    }

    /// Value of a 1-based variable in the last satisfying assignment.
    pub fn model_value(&self, var: u32) -> bool {
        self.assign[(var - 1) as usize] == 1
    }
}
