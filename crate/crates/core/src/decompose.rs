//! Semi-static decompositions as linear programs.
//!
//! `U` is the space of terminal gains `(H.S)_T` of predictable strategies
//! and `V` the space of static claims `h(S_T)`. [`min_l1_decomposition`]
//! finds the cheapest `u + v >= f` in `L^1` norm; the two correlation
//! functions measure how well `f` aligns with each space separately.

use std::sync::Arc;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::lp::{
    self, Bounds, CertificateError, DualityCertificate, LinearProgram, LpError, LpSolution, LpStatus, Relation, Sense,
};
use crate::market::{stochastic_integral, MarketError, PredictableStrategy, PriceProcess, StaticClaim};
use crate::probspace::{same_space, FiniteFilteredSpace, RandomVariable};
use crate::rational::{self, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecomposeError {
    #[error("payoff and price process live on different spaces")]
    SpaceMismatch,
    #[error("price process is not a martingale")]
    NotMartingale,
    #[error("solver returned {0:?}")]
    Solver(LpStatus),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Certificate(#[from] CertificateError),
    #[error(transparent)]
    Market(#[from] MarketError),
}

/// Column indices of the decomposition program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecompositionColumns {
    /// `strategy[t-1][c]`: position over step `t` on cell `c` of `F_{t-1}`.
    pub strategy: Vec<Vec<usize>>,
    /// Claim value per terminal price, in increasing price order.
    pub claim: Vec<(Rational, usize)>,
    /// `|u|` bound per atom.
    pub u_abs: Vec<usize>,
    /// `|h|` bound per terminal price.
    pub v_abs: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct DecompositionResult {
    /// `||u||_1 + ||v||_1` at the optimum.
    pub cost: Rational,
    pub strategy: PredictableStrategy,
    pub claim: StaticClaim,
    pub u: RandomVariable,
    pub v: RandomVariable,
    /// `u + v - f`, nonnegative.
    pub slack: RandomVariable,
    pub lp: LinearProgram,
    pub columns: DecompositionColumns,
    pub solution: LpSolution,
    pub certificate: DualityCertificate,
}

fn check_inputs(price: &PriceProcess, f: &RandomVariable) -> Result<(), DecomposeError> {
    if !same_space(price.space(), f.space()) {
        return Err(DecomposeError::SpaceMismatch);
    }
    if !price.verify_martingale().passed {
        return Err(DecomposeError::NotMartingale);
    }
    Ok(())
}

/// Sparse linear expression `sum_j c_j x_j` over program columns.
type SparseExpr = Vec<(usize, Rational)>;

/// Adds one free column per (step, cell) and returns, for every atom, the
/// sparse expression of `u(omega) = sum_t H_t(omega) dS_t(omega)`.
fn add_strategy_columns(lp: &mut LinearProgram, price: &PriceProcess) -> (Vec<Vec<usize>>, Vec<SparseExpr>) {
    let space = price.space();
    let mut columns = Vec::with_capacity(price.horizon());
    let mut u_terms: Vec<Vec<(usize, Rational)>> = vec![Vec::new(); space.len()];
    for t in 1..=price.horizon() {
        let partition = space.partition(t - 1).expect("t - 1 within the filtration");
        let cols: Vec<usize> =
            (0..partition.len()).map(|_| lp.add_variable(Rational::zero(), Bounds::free())).collect();
        let increment = price.increment(t);
        for (i, terms) in u_terms.iter_mut().enumerate() {
            let ds = increment.value(i);
            if !ds.is_zero() {
                terms.push((cols[partition.cell_of(i)], ds.clone()));
            }
        }
        columns.push(cols);
    }
    (columns, u_terms)
}

/// Adds `t_k >= |expr_k|` rows for fresh nonnegative columns `t_k` with the
/// given costs.
fn add_abs_columns(
    lp: &mut LinearProgram,
    exprs: &[Vec<(usize, Rational)>],
    costs: impl IntoIterator<Item = Rational>,
) -> Vec<usize> {
    exprs
        .iter()
        .zip(costs)
        .map(|(expr, cost)| {
            let t = lp.add_variable(cost, Bounds::non_negative());
            for sign in [Rational::one(), -Rational::one()] {
                let terms = std::iter::once((t, Rational::one())).chain(expr.iter().map(|(j, a)| (*j, -(a * &sign))));
                lp.add_constraint(terms, Relation::Ge, Rational::zero());
            }
            t
        })
        .collect()
}

/// The program `min E|u| + E|h(S_T)|` subject to `u + h(S_T) >= f`.
pub fn build_decomposition_lp(
    price: &PriceProcess,
    f: &RandomVariable,
) -> Result<(LinearProgram, DecompositionColumns), DecomposeError> {
    check_inputs(price, f)?;
    let space = price.space();
    let mut lp = LinearProgram::new(Sense::Minimize);
    let (strategy, u_terms) = add_strategy_columns(&mut lp, price);
    let cells = price.terminal_partition();
    let claim: Vec<(Rational, usize)> =
        cells.iter().map(|(value, _)| (value.clone(), lp.add_variable(Rational::zero(), Bounds::free()))).collect();
    let mut claim_of = vec![0usize; space.len()];
    for ((_, event), (_, col)) in cells.iter().zip(&claim) {
        for i in event.iter() {
            claim_of[i] = *col;
        }
    }
    for (i, terms) in u_terms.iter().enumerate() {
        let row = terms.iter().cloned().chain([(claim_of[i], Rational::one())]);
        lp.add_constraint(row, Relation::Ge, f.value(i).clone());
    }
    let u_abs = add_abs_columns(&mut lp, &u_terms, space.probs().iter().cloned());
    let claim_exprs: Vec<Vec<(usize, Rational)>> = claim.iter().map(|(_, col)| vec![(*col, Rational::one())]).collect();
    let v_abs = add_abs_columns(&mut lp, &claim_exprs, cells.iter().map(|(_, event)| space.probability(event)));
    Ok((lp, DecompositionColumns { strategy, claim, u_abs, v_abs }))
}

fn solve_certified(lp: &LinearProgram) -> Result<(LpSolution, DualityCertificate), DecomposeError> {
    let solution = lp::solve(lp)?;
    if solution.status != LpStatus::Optimal {
        return Err(DecomposeError::Solver(solution.status));
    }
    let certificate = lp::verify(lp, &solution)?;
    Ok((solution, certificate))
}

fn strategy_from_columns(
    space: &Arc<FiniteFilteredSpace>,
    columns: &[Vec<usize>],
    x: &[Rational],
) -> Result<PredictableStrategy, MarketError> {
    let values: Vec<Vec<Rational>> = columns.iter().map(|cols| cols.iter().map(|&j| x[j].clone()).collect()).collect();
    PredictableStrategy::from_cell_values(space, &values)
}

/// Exact minimum of `||u||_1 + ||v||_1` over `u in U`, `v in V` with
/// `u + v >= f`, together with optimizers and a checked duality
/// certificate.
pub fn min_l1_decomposition(price: &PriceProcess, f: &RandomVariable) -> Result<DecompositionResult, DecomposeError> {
    let (lp, columns) = build_decomposition_lp(price, f)?;
    let (solution, certificate) = solve_certified(&lp)?;
    let x = &solution.primal;
    let strategy = strategy_from_columns(price.space(), &columns.strategy, x)?;
    let claim = StaticClaim::new(columns.claim.iter().map(|(s, j)| (s.clone(), x[*j].clone())).collect());
    let u = stochastic_integral(&strategy, price)?;
    let v = claim.evaluate(price)?;
    let slack = &(&u + &v) - f;
    let cost = u.moment(1).expect("order 1") + v.moment(1).expect("order 1");
    debug_assert_eq!(Some(&cost), solution.objective.as_ref());
    Ok(DecompositionResult { cost, strategy, claim, u, v, slack, lp, columns, solution, certificate })
}

#[derive(Debug, Clone)]
pub struct UCorrelation {
    /// `sup { E[f u] : u in U, ||u||_1 <= 1 }`.
    pub value: Rational,
    pub strategy: PredictableStrategy,
    /// A maximizer, with `||u||_1 <= 1`.
    pub u: RandomVariable,
    pub certificate: DualityCertificate,
}

/// Best correlation of `f` with a unit-norm element of `U`, by LP.
pub fn max_u_correlation(price: &PriceProcess, f: &RandomVariable) -> Result<UCorrelation, DecomposeError> {
    check_inputs(price, f)?;
    let space = price.space();
    let mut lp = LinearProgram::new(Sense::Maximize);
    let (columns, u_terms) = add_strategy_columns(&mut lp, price);
    for (i, terms) in u_terms.iter().enumerate() {
        let weight = space.prob(i) * f.value(i);
        for (j, a) in terms {
            lp.objective[*j] += &weight * a;
        }
    }
    let t = add_abs_columns(&mut lp, &u_terms, std::iter::repeat_n(Rational::zero(), space.len()));
    lp.add_constraint(t.iter().zip(space.probs()).map(|(&j, p)| (j, p.clone())), Relation::Le, Rational::one());
    let (solution, certificate) = solve_certified(&lp)?;
    let strategy = strategy_from_columns(space, &columns, &solution.primal)?;
    let u = stochastic_integral(&strategy, price)?;
    let value = solution.objective.clone().expect("optimal solution has an objective");
    Ok(UCorrelation { value, strategy, u, certificate })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VCorrelation {
    /// `max_s |E[f | S_T = s]|`.
    pub value: Rational,
    /// `(s, E[f | S_T = s])` for every terminal price, increasing in `s`.
    pub per_value: Vec<(Rational, Rational)>,
}

/// Best correlation of `f` with a unit-norm element of `V`.
///
/// `E[f h(S_T)] = sum_s P(S_T = s) h(s) E[f | S_T = s]` is maximized over
/// `E|h(S_T)| <= 1` by concentrating `h` on the cell with the largest
/// `|E[f | S_T = s]|`, so no LP is needed.
pub fn max_v_correlation(price: &PriceProcess, f: &RandomVariable) -> Result<VCorrelation, DecomposeError> {
    if !same_space(price.space(), f.space()) {
        return Err(DecomposeError::SpaceMismatch);
    }
    let per_value: Vec<(Rational, Rational)> = price
        .terminal_partition()
        .into_iter()
        .map(|(s, event)| (s, f.conditional_mean(&event).expect("terminal cells are non-null")))
        .collect();
    let value = per_value.iter().map(|(_, m)| m.abs()).max().unwrap_or_else(Rational::zero);
    Ok(VCorrelation { value, per_value })
}

/// The inequalities turning the two correlation bounds into a lower bound
/// on the decomposition cost:
/// `E[f^2] <= E[f u*] + E[f v*] <= c_u ||u*||_1 + c_v ||v*||_1 <= max(c_u, c_v) cost`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LowerBoundChain {
    pub second_moment: Rational,
    pub e_fu: Rational,
    pub e_fv: Rational,
    pub u_norm: Rational,
    pub v_norm: Rational,
    pub u_corr: Rational,
    pub v_corr: Rational,
    /// `E[f^2] / max(c_u, c_v)`, or zero when both correlations vanish.
    pub implied_lower_bound: Rational,
    pub cost: Rational,
}

impl LowerBoundChain {
    pub fn holds(&self) -> bool {
        let weighted = &self.u_corr * &self.u_norm + &self.v_corr * &self.v_norm;
        self.second_moment <= &self.e_fu + &self.e_fv
            && self.e_fu <= &self.u_corr * &self.u_norm
            && self.e_fv <= &self.v_corr * &self.v_norm
            && self.second_moment <= weighted
            && self.cost >= self.implied_lower_bound
    }
}

pub fn lower_bound_chain(
    f: &RandomVariable,
    decomposition: &DecompositionResult,
    u_corr: &Rational,
    v_corr: &Rational,
) -> LowerBoundChain {
    let second_moment = f.moment(2).expect("order 2");
    let top = rational::max(u_corr, v_corr);
    let implied_lower_bound = if top.is_zero() { Rational::zero() } else { &second_moment / &top };
    LowerBoundChain {
        e_fu: (f * &decomposition.u).expectation(),
        e_fv: (f * &decomposition.v).expectation(),
        u_norm: decomposition.u.moment(1).expect("order 1"),
        v_norm: decomposition.v.moment(1).expect("order 1"),
        u_corr: u_corr.clone(),
        v_corr: v_corr.clone(),
        implied_lower_bound,
        cost: decomposition.cost.clone(),
        second_moment,
    }
}
