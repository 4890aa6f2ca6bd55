use std::fmt::Write as _;

use crate::aig::{AigNetwork, Literal};
use crate::error::{Error, Result};

/// Clauses over 1-based variables, DIMACS sign convention.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cnf {
    pub num_vars: u32,
    pub clauses: Vec<Vec<i32>>,
    /// CNF variable of each PI, by PI index.
    pub pi_var_map: Vec<u32>,
}

/// Tseitin encoding of a single-output network, asserting the output.
///
/// Only the output's fanin cone is encoded; every PI still gets a variable so
/// models project onto full input patterns.
pub fn aig_to_cnf(net: &AigNetwork) -> Result<Cnf> {
    if net.num_pos() != 1 {
        return Err(Error::InvalidNetwork(format!(
            "CNF encoding needs one output, found {}",
            net.num_pos()
        )));
    }
    let po = net.pos()[0];
    let nv = net.num_vars();
    let mut in_cone = vec![false; nv];
    in_cone[po.var() as usize] = true;
    for v in (net.first_and_var() as usize..nv).rev() {
        if in_cone[v] {
            let (l, r) = net.fanins(v as u32);
            in_cone[l.var() as usize] = true;
            in_cone[r.var() as usize] = true;
        }
    }
    let mut map = vec![0u32; nv];
    let mut next = 0u32;
    for m in map.iter_mut().skip(1).take(net.num_pis()) {
        next += 1;
        *m = next;
    }
    let mut clauses = Vec::new();
    if in_cone[0] {
        next += 1;
        map[0] = next;
        clauses.push(vec![-(next as i32)]);
    }
    let lit = |map: &[u32], l: Literal| {
        let v = map[l.var() as usize] as i32;
        if l.is_complemented() {
            -v
        } else {
            v
        }
    };
    for v in net.first_and_var() as usize..nv {
        if !in_cone[v] {
            continue;
        }
        next += 1;
        map[v] = next;
        let c = next as i32;
        let (l, r) = net.fanins(v as u32);
        let (a, b) = (lit(&map, l), lit(&map, r));
        for cl in [vec![-c, a], vec![-c, b], vec![c, -a, -b]] {
            if let Some(cl) = normalize(cl) {
                clauses.push(cl);
            }
        }
    }
    clauses.push(vec![lit(&map, po)]);
    Ok(Cnf {
        num_vars: next,
        clauses,
        pi_var_map: map[1..=net.num_pis()].to_vec(),
    })
}

/// Removes duplicate literals; `None` for tautologies.
fn normalize(mut cl: Vec<i32>) -> Option<Vec<i32>> {
    let mut seen: Vec<i32> = Vec::with_capacity(cl.len());
    for &x in &cl {
        if seen.contains(&-x) {
            return None;
        }
        if !seen.contains(&x) {
            seen.push(x);
        }
    }
    cl.clear();
    cl.extend(seen);
    Some(cl)
}

impl Cnf {
    /// DIMACS text with a `p cnf V C` header.
    pub fn to_dimacs(&self) -> String {
        let mut s = format!("p cnf {} {}\n", self.num_vars, self.clauses.len());
        for c in &self.clauses {
            for x in c {
                let _ = write!(s, "{x} ");
            }
            s.push_str("0\n");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checker::{solve, VerdictKind};
    use crate::testbench;

    #[test]
    fn single_and() {
        let l = Literal::from_raw;
        let net = AigNetwork::new(2, vec![(l(4), l(2))], vec![l(6)]).unwrap();
        let cnf = aig_to_cnf(&net).unwrap();
        assert_eq!(cnf.num_vars, 3);
        assert_eq!(
            cnf.clauses,
            vec![vec![-3, 2], vec![-3, 1], vec![3, -2, -1], vec![3]]
        );
        let v = solve(&cnf, u64::MAX);
        assert_eq!(v.counterexample, Some(vec![true, true]));
    }

    #[test]
    fn constant_false_output() {
        let net = AigNetwork::new(0, vec![], vec![Literal::FALSE]).unwrap();
        let cnf = aig_to_cnf(&net).unwrap();
        assert_eq!(cnf.clauses, vec![vec![-1], vec![1]]);
        assert_eq!(solve(&cnf, u64::MAX).kind, VerdictKind::Unsat);
    }

    #[test]
    fn no_tautologies_or_empty_clauses() {
        let l = Literal::from_raw;
        let net = AigNetwork::new(1, vec![(l(2), l(3))], vec![l(5)]).unwrap();
        let cnf = aig_to_cnf(&net).unwrap();
        for c in &cnf.clauses {
            assert!(!c.is_empty());
            assert!(!c.iter().any(|x| c.contains(&-x)));
        }
        assert_eq!(solve(&cnf, u64::MAX).kind, VerdictKind::Sat);
    }

    #[test]
    fn dimacs_format() {
        let ha = testbench::half_adder().network;
        let mut single = ha.clone();
        single.reverse_pos();
        let net = AigNetwork::new(2, single.and_nodes().to_vec(), vec![single.pos()[0]]).unwrap();
        let text = aig_to_cnf(&net).unwrap().to_dimacs();
        assert!(text.starts_with("p cnf 3 4\n"));
        assert!(text.lines().skip(1).all(|l| l.ends_with(" 0")));
    }
}
