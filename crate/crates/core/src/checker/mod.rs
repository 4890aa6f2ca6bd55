//! Error-miter certification: miter construction, CNF encoding and SAT solving.

mod cnf;
mod miter;
pub mod sat;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::aig::{apply_lac, AigNetwork};
use crate::error::Result;
use crate::lac::Lac;
use crate::metrics::ErrorSpec;

pub use cnf::{aig_to_cnf, Cnf};
pub use miter::build_miter;
use sat::{SolveResult, Solver};

/// Default conflict budget per check.
pub const DEFAULT_CONFLICT_LIMIT: u64 = 1 << 18;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictKind {
    /// A pattern violating the bound exists.
    Sat,
    /// The bound holds.
    Unsat,
    /// The budget ran out first.
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SatVerdict {
    pub kind: VerdictKind,
    /// PI assignment, present iff `kind` is `Sat`.
    pub counterexample: Option<Vec<bool>>,
    pub conflicts_used: u64,
}

impl SatVerdict {
    pub fn is_unsat(&self) -> bool {
        self.kind == VerdictKind::Unsat
    }
}

/// Solves within `conflict_limit` conflicts (`u64::MAX` for no limit).
pub fn solve(cnf: &Cnf, conflict_limit: u64) -> SatVerdict {
    solve_until(cnf, conflict_limit, None)
}

/// As [`solve`], additionally giving up at `deadline`.
pub fn solve_until(cnf: &Cnf, conflict_limit: u64, deadline: Option<Instant>) -> SatVerdict {
    let mut s = Solver::new(cnf.num_vars as usize);
    for c in &cnf.clauses {
        s.add_clause(c);
    }
    let r = s.solve(conflict_limit, deadline);
    let counterexample = (r == SolveResult::Sat)
        .then(|| cnf.pi_var_map.iter().map(|&v| s.model_value(v)).collect());
    SatVerdict {
        kind: match r {
            SolveResult::Sat => VerdictKind::Sat,
            SolveResult::Unsat => VerdictKind::Unsat,
            SolveResult::Unknown => VerdictKind::Unknown,
        },
        counterexample,
        conflicts_used: s.conflicts(),
    }
}

/// CNF of the error miter between two circuits.
pub fn miter_cnf(golden: &AigNetwork, approx: &AigNetwork, spec: &ErrorSpec) -> Result<Cnf> {
    aig_to_cnf(&build_miter(golden, approx, spec)?)
}

/// Decides whether `approx` stays within the bound of `golden`.
pub fn check_pair(
    golden: &AigNetwork,
    approx: &AigNetwork,
    spec: &ErrorSpec,
    conflict_limit: u64,
    deadline: Option<Instant>,
) -> Result<SatVerdict> {
    Ok(solve_until(&miter_cnf(golden, approx, spec)?, conflict_limit, deadline))
}

/// Certifies one change applied to the current circuit against the golden one.
pub fn check_lac(
    golden: &AigNetwork,
    current: &AigNetwork,
    lac: &Lac,
    spec: &ErrorSpec,
    conflict_limit: u64,
) -> Result<SatVerdict> {
    let candidate = apply_lac(current, lac)?;
    check_pair(golden, &candidate, spec, conflict_limit, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aig::Literal;
    use crate::lac::{Replacement, Target};
    use crate::metrics::{brute_force_max_error, deviation};
    use crate::testbench;

    #[test]
    fn trivial_cnfs() {
        let one = Cnf {
            num_vars: 1,
            clauses: vec![vec![1]],
            pi_var_map: vec![1],
        };
        let v = solve(&one, 5);
        assert_eq!(v.kind, VerdictKind::Sat);
        assert_eq!(v.counterexample, Some(vec![true]));
        let both = Cnf {
            num_vars: 1,
            clauses: vec![vec![1], vec![-1]],
            pi_var_map: vec![1],
        };
        assert_eq!(solve(&both, 5).kind, VerdictKind::Unsat);
    }

    #[test]
    fn half_adder_carry_truncation() {
        let ha = testbench::half_adder().network;
        let lac = Lac::new(Target::Po(1), Replacement::Const0);
        let v = check_lac(&ha, &ha, &lac, &ErrorSpec::max_ed(2), DEFAULT_CONFLICT_LIMIT).unwrap();
        assert_eq!(v.kind, VerdictKind::Unsat);
        let v = check_lac(&ha, &ha, &lac, &ErrorSpec::max_ed(1), DEFAULT_CONFLICT_LIMIT).unwrap();
        assert_eq!(v.kind, VerdictKind::Sat);
        assert_eq!(v.counterexample, Some(vec![true, true]));
    }

    #[test]
    fn identity_substitution_is_unsat() {
        let ha = testbench::half_adder().network;
        let lac = Lac::new(Target::Node(4), Replacement::Substitute(Literal::positive(4)));
        let v = check_lac(&ha, &ha, &lac, &ErrorSpec::max_ed(0), DEFAULT_CONFLICT_LIMIT).unwrap();
        assert!(v.is_unsat());
    }

    #[test]
    fn verdicts_match_brute_force_on_adders() {
        let golden = testbench::gen_ripple_adder(3).network;
        let spec_list = [ErrorSpec::max_ed(0), ErrorSpec::max_ed(3), ErrorSpec::max_hd(1)];
        for v in 1..golden.num_vars() as u32 {
            for r in [Replacement::Const0, Replacement::Const1] {
                let approx = apply_lac(&golden, &Lac::new(Target::Node(v), r)).unwrap();
                for spec in &spec_list {
                    let exact = brute_force_max_error(&golden, &approx, spec, 12).unwrap();
                    let verdict = check_pair(&golden, &approx, spec, u64::MAX, None).unwrap();
                    assert_eq!(verdict.kind == VerdictKind::Sat, spec.violated_by(&exact));
                    if let Some(x) = verdict.counterexample {
                        let d = deviation(spec, &golden.eval(&x), &approx.eval(&x)).unwrap();
                        assert!(spec.violated_by(&d));
                    }
                }
            }
        }
    }
}
