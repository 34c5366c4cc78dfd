//! Exact-rational linear programming.
//!
//! [`solve`] runs a two-phase tableau simplex with Bland's pivoting rule over
//! [`Rational`]s, so there is no rounding anywhere and the pivot sequence is
//! fully determined by the input. Optimal solutions carry one dual value per
//! constraint row; [`certificate::verify`] re-checks them against the
//! original program without touching solver state.

pub mod certificate;
mod simplex;
pub mod text;

use num_traits::Zero;
use thiserror::Error;

use crate::rational::{format_rational, Rational};

pub use certificate::{verify, CertificateError, DualityCertificate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }

    pub fn holds(self, lhs: &Rational, rhs: &Rational) -> bool {
        match self {
            Relation::Le => lhs <= rhs,
            Relation::Eq => lhs == rhs,
            Relation::Ge => lhs >= rhs,
        }
    }
}

/// Variable bounds; `None` means unbounded on that side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bounds {
    pub lower: Option<Rational>,
    pub upper: Option<Rational>,
}

impl Bounds {
    pub fn free() -> Self {
        Bounds { lower: None, upper: None }
    }

    pub fn non_negative() -> Self {
        Bounds { lower: Some(Rational::zero()), upper: None }
    }

    pub fn between(lower: Rational, upper: Rational) -> Self {
        Bounds { lower: Some(lower), upper: Some(upper) }
    }

    pub fn contains(&self, x: &Rational) -> bool {
        self.lower.as_ref().is_none_or(|l| x >= l) && self.upper.as_ref().is_none_or(|u| x <= u)
    }
}

/// One constraint `sum_j coeff_j x_j (relation) rhs`, stored sparsely.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub terms: Vec<(usize, Rational)>,
    pub relation: Relation,
    pub rhs: Rational,
}

impl Row {
    pub fn lhs(&self, x: &[Rational]) -> Rational {
        self.terms.iter().map(|(j, a)| a * &x[*j]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<Rational>,
    pub bounds: Vec<Bounds>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("malformed program: {0}")]
    MalformedProgram(String),
}

impl LinearProgram {
    pub fn new(sense: Sense) -> Self {
        LinearProgram { sense, objective: Vec::new(), bounds: Vec::new(), rows: Vec::new() }
    }

    /// Adds a column and returns its index.
    pub fn add_variable(&mut self, cost: Rational, bounds: Bounds) -> usize {
        self.objective.push(cost);
        self.bounds.push(bounds);
        self.objective.len() - 1
    }

    /// Adds a row; zero coefficients are dropped and repeated columns summed.
    pub fn add_constraint(
        &mut self,
        terms: impl IntoIterator<Item = (usize, Rational)>,
        relation: Relation,
        rhs: Rational,
    ) {
        let mut merged: Vec<(usize, Rational)> = Vec::new();
        for (j, a) in terms {
            match merged.iter_mut().find(|(k, _)| *k == j) {
                Some((_, acc)) => *acc += a,
                None => merged.push((j, a)),
            }
        }
        merged.retain(|(_, a)| !a.is_zero());
        merged.sort_by_key(|(j, _)| *j);
        self.rows.push(Row { terms: merged, relation, rhs });
    }

    pub fn num_columns(&self) -> usize {
        self.objective.len()
    }

    pub fn objective_value(&self, x: &[Rational]) -> Rational {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.objective.len();
        if self.bounds.len() != n {
            return Err(LpError::MalformedProgram(format!(
                "{n} objective coefficients but {} bounds",
                self.bounds.len()
            )));
        }
        for (j, b) in self.bounds.iter().enumerate() {
            if let (Some(l), Some(u)) = (&b.lower, &b.upper) {
                if l > u {
                    return Err(LpError::MalformedProgram(format!(
                        "column {j} has lower bound {} above upper bound {}",
                        format_rational(l),
                        format_rational(u)
                    )));
                }
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if let Some((j, _)) = row.terms.iter().find(|(j, _)| *j >= n) {
                return Err(LpError::MalformedProgram(format!("row {i} references column {j} of {n}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Column values; empty unless optimal.
    pub primal: Vec<Rational>,
    /// One multiplier per row, in the sign convention of the program's own
    /// sense (see [`certificate`]); empty unless optimal.
    pub duals: Vec<Rational>,
    pub objective: Option<Rational>,
    pub pivots: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Solves `lp` exactly.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.validate()?;
    Ok(simplex::solve(lp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};
    use proptest::prelude::*;

    #[test]
    fn minimize_with_lower_bound_row() {
        let mut lp = LinearProgram::new(Sense::Minimize);
        let x = lp.add_variable(int(1), Bounds::free());
        lp.add_constraint([(x, int(1))], Relation::Ge, int(3));
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_eq!(sol.primal, vec![int(3)]);
        assert_eq!(sol.objective, Some(int(3)));
        assert_eq!(sol.duals, vec![int(1)]);
        verify(&lp, &sol).unwrap();
    }

    #[test]
    fn detects_infeasibility() {
        let mut lp = LinearProgram::new(Sense::Minimize);
        let x = lp.add_variable(int(0), Bounds::free());
        lp.add_constraint([(x, int(1))], Relation::Le, int(-1));
        lp.add_constraint([(x, int(1))], Relation::Ge, int(1));
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn detects_unboundedness() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        lp.add_variable(int(1), Bounds::free());
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn rejects_malformed_programs() {
        let mut lp = LinearProgram::new(Sense::Minimize);
        lp.add_variable(int(1), Bounds::between(int(2), int(1)));
        assert!(matches!(solve(&lp), Err(LpError::MalformedProgram(_))));
        let mut lp = LinearProgram::new(Sense::Minimize);
        lp.add_variable(int(1), Bounds::free());
        lp.rows.push(Row { terms: vec![(4, int(1))], relation: Relation::Le, rhs: int(0) });
        assert!(matches!(solve(&lp), Err(LpError::MalformedProgram(_))));
    }

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18: optimum 36 at (2, 6).
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_variable(int(3), Bounds::non_negative());
        let y = lp.add_variable(int(5), Bounds::non_negative());
        lp.add_constraint([(x, int(1))], Relation::Le, int(4));
        lp.add_constraint([(y, int(2))], Relation::Le, int(12));
        lp.add_constraint([(x, int(3)), (y, int(2))], Relation::Le, int(18));
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.primal, vec![int(2), int(6)]);
        assert_eq!(sol.objective, Some(int(36)));
        assert_eq!(sol.duals, vec![int(0), rat(3, 2), int(1)]);
        let cert = verify(&lp, &sol).unwrap();
        assert!(cert.gap.is_zero());
    }

    #[test]
    fn boxed_and_upper_bounded_columns() {
        // min -x - y + z, 1 <= x <= 5/2, y <= 3, z >= -1 free above, x + y <= 4, z >= x - 3.
        let mut lp = LinearProgram::new(Sense::Minimize);
        let x = lp.add_variable(int(-1), Bounds::between(int(1), rat(5, 2)));
        let y = lp.add_variable(int(-1), Bounds { lower: None, upper: Some(int(3)) });
        let z = lp.add_variable(int(1), Bounds { lower: Some(int(-1)), upper: None });
        lp.add_constraint([(x, int(1)), (y, int(1))], Relation::Le, int(4));
        lp.add_constraint([(z, int(1)), (x, int(-1))], Relation::Ge, int(-3));
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_eq!(sol.objective, Some(int(-5)));
        verify(&lp, &sol).unwrap();
    }

    #[test]
    fn equality_rows_and_redundancy() {
        let mut lp = LinearProgram::new(Sense::Minimize);
        let x = lp.add_variable(int(2), Bounds::non_negative());
        let y = lp.add_variable(int(3), Bounds::non_negative());
        lp.add_constraint([(x, int(1)), (y, int(1))], Relation::Eq, int(1));
        lp.add_constraint([(x, int(2)), (y, int(2))], Relation::Eq, int(2));
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.primal, vec![int(1), int(0)]);
        verify(&lp, &sol).unwrap();
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's example cycles under the largest-coefficient rule.
        let mut lp = LinearProgram::new(Sense::Minimize);
        let c = [rat(-3, 4), int(150), rat(-1, 50), int(6)];
        let vars: Vec<usize> = c.iter().map(|ci| lp.add_variable(ci.clone(), Bounds::non_negative())).collect();
        lp.add_constraint(vars.iter().copied().zip([rat(1, 4), int(-60), rat(-1, 25), int(9)]), Relation::Le, int(0));
        lp.add_constraint(vars.iter().copied().zip([rat(1, 2), int(-90), rat(-1, 50), int(3)]), Relation::Le, int(0));
        lp.add_constraint([(vars[2], int(1))], Relation::Le, int(1));
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.objective, Some(rat(-1, 20)));
        verify(&lp, &sol).unwrap();
    }

    fn arb_lp() -> impl Strategy<Value = LinearProgram> {
        let coef = (-6i64..7, 1i64..4).prop_map(|(n, d)| rat(n, d));
        (
            proptest::collection::vec(coef.clone(), 3),
            proptest::collection::vec((proptest::collection::vec(coef.clone(), 3), 0u8..3, coef), 1..5),
        )
            .prop_map(|(obj, rows)| {
                let mut lp = LinearProgram::new(Sense::Minimize);
                for c in obj {
                    lp.add_variable(c, Bounds::between(int(-5), int(5)));
                }
                for (a, rel, b) in rows {
                    let rel = [Relation::Le, Relation::Eq, Relation::Ge][rel as usize];
                    lp.add_constraint(a.into_iter().enumerate(), rel, b);
                }
                lp
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn optimal_solves_carry_valid_certificates(lp in arb_lp()) {
            let sol = solve(&lp).unwrap();
            if sol.is_optimal() {
                let cert = verify(&lp, &sol).unwrap();
                prop_assert!(cert.gap.is_zero());
            }
            // Identical inputs give identical outputs.
            prop_assert_eq!(solve(&lp).unwrap(), sol);
        }

        #[test]
        fn objective_scaling_scales_optimum(lp in arb_lp(), n in 1i64..9, d in 1i64..5) {
            let lam = rat(n, d);
            let mut scaled = lp.clone();
            for c in &mut scaled.objective {
                *c *= &lam;
            }
            let a = solve(&lp).unwrap();
            let b = solve(&scaled).unwrap();
            prop_assert_eq!(a.status, b.status);
            if let (Some(va), Some(vb)) = (a.objective, b.objective) {
                prop_assert_eq!(va * &lam, vb);
                // The scaled argmin is optimal for the original objective too.
                prop_assert_eq!(lp.objective_value(&b.primal), lp.objective_value(&a.primal));
            }
        }
    }
}
