//! Independent optimality check for an [`LpSolution`].
//!
//! Written against the original program only. For a minimization with rows
//! `a_i x (rel) b_i` and bounds `l <= x <= u`, the row multipliers `y` must
//! satisfy `y_i >= 0` on `>=` rows and `y_i <= 0` on `<=` rows. The reduced
//! costs `d = c - A^T y` are split into bound multipliers: `d_j > 0` needs a
//! finite lower bound, `d_j < 0` a finite upper bound. The dual objective is
//! `b.y + sum_j d_j * (l_j if d_j > 0 else u_j)`. For a maximization the
//! objective and multipliers are negated first.

use num_traits::{Signed, Zero};
use thiserror::Error;

use super::{LinearProgram, LpSolution, LpStatus, Relation, Sense};
use crate::rational::{format_rational, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CertificateError {
    #[error("solution is not marked optimal")]
    NotOptimal,
    #[error("expected {expected} {what}, got {got}")]
    Dimension { what: &'static str, expected: usize, got: usize },
    #[error("row {0} is violated by the primal point")]
    RowViolated(usize),
    #[error("column {0} violates its bounds")]
    BoundViolated(usize),
    #[error("row {0} multiplier has the wrong sign")]
    DualSign(usize),
    #[error("column {0} has a reduced cost pushing against a missing bound")]
    DualInfeasible(usize),
    #[error("reported objective {reported} differs from c.x = {actual}")]
    ObjectiveMismatch { reported: String, actual: String },
    #[error("duality gap {0} is not zero")]
    NonZeroGap(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualityCertificate {
    pub primal_objective: Rational,
    pub dual_objective: Rational,
    pub gap: Rational,
}

/// Checks primal feasibility, dual feasibility and a zero duality gap, all in
/// exact arithmetic.
pub fn verify(lp: &LinearProgram, sol: &LpSolution) -> Result<DualityCertificate, CertificateError> {
    if sol.status != LpStatus::Optimal {
        return Err(CertificateError::NotOptimal);
    }
    let n = lp.objective.len();
    if sol.primal.len() != n {
        return Err(CertificateError::Dimension { what: "primal values", expected: n, got: sol.primal.len() });
    }
    if sol.duals.len() != lp.rows.len() {
        return Err(CertificateError::Dimension { what: "dual values", expected: lp.rows.len(), got: sol.duals.len() });
    }
    let x = &sol.primal;
    for (i, row) in lp.rows.iter().enumerate() {
        if !row.relation.holds(&row.lhs(x), &row.rhs) {
            return Err(CertificateError::RowViolated(i));
        }
    }
    for (j, b) in lp.bounds.iter().enumerate() {
        if !b.contains(&x[j]) {
            return Err(CertificateError::BoundViolated(j));
        }
    }
    let primal_objective = lp.objective_value(x);
    if let Some(reported) = &sol.objective {
        if *reported != primal_objective {
            return Err(CertificateError::ObjectiveMismatch {
                reported: format_rational(reported),
                actual: format_rational(&primal_objective),
            });
        }
    }

    let flip = lp.sense == Sense::Maximize;
    let oriented = |v: &Rational| if flip { -v.clone() } else { v.clone() };
    let y: Vec<Rational> = sol.duals.iter().map(oriented).collect();
    for (i, row) in lp.rows.iter().enumerate() {
        let ok = match row.relation {
            Relation::Ge => !y[i].is_negative(),
            Relation::Le => !y[i].is_positive(),
            Relation::Eq => true,
        };
        if !ok {
            return Err(CertificateError::DualSign(i));
        }
    }
    let mut reduced: Vec<Rational> = lp.objective.iter().map(oriented).collect();
    for (row, yi) in lp.rows.iter().zip(&y) {
        if yi.is_zero() {
            continue;
        }
        for (j, a) in &row.terms {
            reduced[*j] -= a * yi;
        }
    }
    let mut dual_objective: Rational = lp.rows.iter().zip(&y).map(|(r, yi)| &r.rhs * yi).sum();
    for (j, d) in reduced.iter().enumerate() {
        let bound = if d.is_positive() {
            &lp.bounds[j].lower
        } else if d.is_negative() {
            &lp.bounds[j].upper
        } else {
            continue;
        };
        match bound {
            Some(v) => dual_objective += d * v,
            None => return Err(CertificateError::DualInfeasible(j)),
        }
    }
    let min_primal = oriented(&primal_objective);
    let gap = &min_primal - &dual_objective;
    if !gap.is_zero() {
        return Err(CertificateError::NonZeroGap(format_rational(&gap)));
    }
    Ok(DualityCertificate { primal_objective, dual_objective: oriented(&dual_objective), gap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{solve, Bounds};
    use crate::rational::int;

    fn small() -> LinearProgram {
        let mut lp = LinearProgram::new(Sense::Minimize);
        let x = lp.add_variable(int(1), Bounds::non_negative());
        let y = lp.add_variable(int(2), Bounds::non_negative());
        lp.add_constraint([(x, int(1)), (y, int(1))], Relation::Ge, int(2));
        lp
    }

    #[test]
    fn accepts_solver_output() {
        let lp = small();
        let sol = solve(&lp).unwrap();
        let cert = verify(&lp, &sol).unwrap();
        assert_eq!(cert.primal_objective, int(2));
        assert_eq!(cert.dual_objective, int(2));
    }

    #[test]
    fn rejects_tampered_duals_and_primals() {
        let lp = small();
        let sol = solve(&lp).unwrap();

        let mut bad = sol.clone();
        bad.duals[0] = int(-1);
        assert_eq!(verify(&lp, &bad), Err(CertificateError::DualSign(0)));

        let mut bad = sol.clone();
        bad.duals[0] = int(3);
        assert_eq!(verify(&lp, &bad), Err(CertificateError::DualInfeasible(0)));

        let mut bad = sol.clone();
        bad.duals[0] = int(1) / int(2);
        assert!(matches!(verify(&lp, &bad), Err(CertificateError::NonZeroGap(_))));

        let mut bad = sol.clone();
        bad.primal = vec![int(0), int(0)];
        bad.objective = None;
        assert_eq!(verify(&lp, &bad), Err(CertificateError::RowViolated(0)));

        let mut bad = sol;
        bad.primal = vec![int(0), int(2)];
        assert!(matches!(verify(&lp, &bad), Err(CertificateError::ObjectiveMismatch { .. })));
    }
}
