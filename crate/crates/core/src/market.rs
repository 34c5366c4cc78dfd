//! Price processes, predictable strategies, discrete stochastic integrals
//! and static claims on a finite filtered space.
//!
//! On a finite space every stochastic integral against a martingale is
//! itself a bounded martingale, so the dynamic outcome space `U` and its
//! bounded counterpart `U_inf` coincide here, as do `V` and `V_inf`. The
//! dynamic space is never enumerated; it is the image of
//! [`stochastic_integral`] over strategies parameterized by one position per
//! filtration cell per step.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::probspace::{same_space, Event, FiniteFilteredSpace, ProbError, RandomVariable};
use crate::rational::{format_rational, parse_rational, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MarketError {
    #[error("objects live on different spaces")]
    SpaceMismatch,
    #[error("expected {expected} price slices, got {got}")]
    WrongSliceCount { expected: usize, got: usize },
    #[error("price slice at t={t} is not adapted")]
    NotAdapted { t: usize },
    #[error("expected {expected} strategy positions, got {got}")]
    WrongStepCount { expected: usize, got: usize },
    #[error("position for step t={t} is not F_{}-measurable", t - 1)]
    PredictabilityViolation { t: usize },
    #[error("static claim has no payoff for terminal value {0}")]
    MissingTerminalValue(String),
    #[error("static claim lists terminal value {0} twice")]
    DuplicateTerminalValue(String),
    #[error("atom {0} assigned a position more than once or not at all")]
    BadCellAssignment(String),
    #[error(transparent)]
    Prob(#[from] ProbError),
}

/// Adapted price process `S_0, ..., S_T` with one slice per filtration time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriceProcess {
    space: Arc<FiniteFilteredSpace>,
    slices: Vec<RandomVariable>,
}

impl PriceProcess {
    pub fn new(space: Arc<FiniteFilteredSpace>, slices: Vec<RandomVariable>) -> Result<Self, MarketError> {
        let expected = space.horizon() + 1;
        if slices.len() != expected {
            return Err(MarketError::WrongSliceCount { expected, got: slices.len() });
        }
        for (t, slice) in slices.iter().enumerate() {
            if !same_space(slice.space(), &space) {
                return Err(MarketError::SpaceMismatch);
            }
            if !slice.is_measurable(t)? {
                return Err(MarketError::NotAdapted { t });
            }
        }
        Ok(PriceProcess { space, slices })
    }

    pub fn space(&self) -> &Arc<FiniteFilteredSpace> {
        &self.space
    }

    pub fn horizon(&self) -> usize {
        self.slices.len() - 1
    }

    pub fn slices(&self) -> &[RandomVariable] {
        &self.slices
    }

    pub fn slice(&self, t: usize) -> &RandomVariable {
        &self.slices[t]
    }

    pub fn terminal(&self) -> &RandomVariable {
        self.slices.last().expect("price process has at least one slice")
    }

    /// `S_t - S_{t-1}` for `t >= 1`.
    pub fn increment(&self, t: usize) -> RandomVariable {
        &self.slices[t] - &self.slices[t - 1]
    }

    /// Checks `E[S_t | F_{t-1}] = S_{t-1}` exactly for every step.
    pub fn verify_martingale(&self) -> MartingaleReport {
        let steps: Vec<MartingaleStep> = (1..=self.horizon())
            .map(|t| {
                let projected = self.slices[t].cond_expectation(t - 1).expect("t - 1 within the filtration");
                MartingaleStep { t, holds: projected == self.slices[t - 1] }
            })
            .collect();
        let passed = steps.iter().all(|s| s.holds);
        MartingaleReport { steps, passed }
    }

    /// The partition generating `sigma(S_T)`: atoms grouped by exact
    /// terminal value, cells ordered by increasing value.
    pub fn terminal_partition(&self) -> Vec<(Rational, Event)> {
        let mut groups: BTreeMap<Rational, Vec<usize>> = BTreeMap::new();
        for (i, v) in self.terminal().values().iter().enumerate() {
            groups.entry(v.clone()).or_default().push(i);
        }
        groups.into_iter().map(|(v, atoms)| (v, Event::from_indices(atoms))).collect()
    }

    pub fn terminal_values(&self) -> Vec<Rational> {
        self.terminal_partition().into_iter().map(|(v, _)| v).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MartingaleStep {
    pub t: usize,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MartingaleReport {
    pub steps: Vec<MartingaleStep>,
    pub passed: bool,
}

/// Positions `H_1, ..., H_T`, where `H_t` is held over `(t-1, t]` and must
/// be known at time `t-1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictableStrategy {
    space: Arc<FiniteFilteredSpace>,
    positions: Vec<RandomVariable>,
}

impl PredictableStrategy {
    pub fn new(space: Arc<FiniteFilteredSpace>, positions: Vec<RandomVariable>) -> Result<Self, MarketError> {
        let expected = space.horizon();
        if positions.len() != expected {
            return Err(MarketError::WrongStepCount { expected, got: positions.len() });
        }
        for (k, position) in positions.iter().enumerate() {
            if !same_space(position.space(), &space) {
                return Err(MarketError::SpaceMismatch);
            }
            if !position.is_measurable(k)? {
                return Err(MarketError::PredictabilityViolation { t: k + 1 });
            }
        }
        Ok(PredictableStrategy { space, positions })
    }

    pub fn zero(space: &Arc<FiniteFilteredSpace>) -> Self {
        PredictableStrategy {
            space: Arc::clone(space),
            positions: (0..space.horizon()).map(|_| RandomVariable::zero(space)).collect(),
        }
    }

    /// Builds a strategy from one value per cell of the `F_{t-1}` partition
    /// for each step `t`, cells in canonical order.
    pub fn from_cell_values(
        space: &Arc<FiniteFilteredSpace>,
        cell_values: &[Vec<Rational>],
    ) -> Result<Self, MarketError> {
        if cell_values.len() != space.horizon() {
            return Err(MarketError::WrongStepCount { expected: space.horizon(), got: cell_values.len() });
        }
        let positions = cell_values
            .iter()
            .enumerate()
            .map(|(k, values)| {
                let partition = space.partition(k)?;
                if values.len() != partition.len() {
                    return Err(ProbError::WrongValueCount { expected: partition.len(), got: values.len() }.into());
                }
                Ok(RandomVariable::from_fn(space, |i, _| values[partition.cell_of(i)].clone()))
            })
            .collect::<Result<Vec<_>, MarketError>>()?;
        Ok(PredictableStrategy { space: Arc::clone(space), positions })
    }

    pub fn space(&self) -> &Arc<FiniteFilteredSpace> {
        &self.space
    }

    /// Position held over `(t-1, t]`, `t >= 1`.
    pub fn position(&self, t: usize) -> &RandomVariable {
        &self.positions[t - 1]
    }

    pub fn positions(&self) -> &[RandomVariable] {
        &self.positions
    }

    pub fn scale(&self, factor: &Rational) -> Self {
        PredictableStrategy {
            space: Arc::clone(&self.space),
            positions: self.positions.iter().map(|p| p.scale(factor)).collect(),
        }
    }

    pub fn add(&self, other: &PredictableStrategy) -> Result<Self, MarketError> {
        if !same_space(&self.space, &other.space) {
            return Err(MarketError::SpaceMismatch);
        }
        Ok(PredictableStrategy {
            space: Arc::clone(&self.space),
            positions: self.positions.iter().zip(&other.positions).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sup_abs(&self) -> Rational {
        self.positions.iter().map(RandomVariable::sup_abs).max().unwrap_or_else(Rational::zero)
    }

    pub fn to_json(&self) -> StrategyJson {
        let steps = self
            .positions
            .iter()
            .enumerate()
            .map(|(k, position)| {
                self.space
                    .partition(k)
                    .expect("strategy steps match the filtration")
                    .cells()
                    .iter()
                    .map(|cell| CellPosition {
                        atoms: cell.iter().map(|&i| self.space.atoms()[i].to_string()).collect(),
                        position: format_rational(position.value(cell[0])),
                    })
                    .collect()
            })
            .collect();
        StrategyJson { steps }
    }

    /// Loads a strategy; every atom must receive exactly one position per
    /// step, and the result must be predictable.
    pub fn from_json(space: &Arc<FiniteFilteredSpace>, doc: &StrategyJson) -> Result<Self, MarketError> {
        let positions = doc
            .steps
            .iter()
            .map(|cells| {
                let mut values: Vec<Option<Rational>> = vec![None; space.len()];
                for cell in cells {
                    let value = parse_rational(&cell.position).map_err(ProbError::from)?;
                    for label in &cell.atoms {
                        let label = label.parse()?;
                        let i = space.index_of(&label).ok_or_else(|| ProbError::UnknownAtom(label.to_string()))?;
                        if values[i].replace(value.clone()).is_some() {
                            return Err(MarketError::BadCellAssignment(label.to_string()));
                        }
                    }
                }
                let values = values
                    .into_iter()
                    .enumerate()
                    .map(|(i, v)| v.ok_or_else(|| MarketError::BadCellAssignment(space.atoms()[i].to_string())))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(RandomVariable::new(Arc::clone(space), values)?)
            })
            .collect::<Result<Vec<_>, MarketError>>()?;
        Self::new(Arc::clone(space), positions)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellPosition {
    pub atoms: Vec<String>,
    pub position: String,
}

/// JSON form of a strategy: for each step, the cells of the previous
/// partition with their positions as `"num/den"`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyJson {
    pub steps: Vec<Vec<CellPosition>>,
}

/// Static (buy-and-hold) claim `h(S_T)`, stored as a payoff table on
/// terminal prices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StaticClaim {
    payoffs: BTreeMap<Rational, Rational>,
}

impl StaticClaim {
    pub fn new(payoffs: BTreeMap<Rational, Rational>) -> Self {
        StaticClaim { payoffs }
    }

    /// Tabulates `h` on every terminal value of `price`.
    pub fn from_fn(price: &PriceProcess, mut h: impl FnMut(&Rational) -> Rational) -> Self {
        StaticClaim {
            payoffs: price
                .terminal_values()
                .into_iter()
                .map(|s| {
                    let v = h(&s);
                    (s, v)
                })
                .collect(),
        }
    }

    pub fn constant(price: &PriceProcess, c: Rational) -> Self {
        Self::from_fn(price, |_| c.clone())
    }

    pub fn payoff(&self, terminal: &Rational) -> Option<&Rational> {
        self.payoffs.get(terminal)
    }

    pub fn payoffs(&self) -> &BTreeMap<Rational, Rational> {
        &self.payoffs
    }

    /// Terminal values with a nonzero payoff.
    pub fn support(&self) -> Vec<Rational> {
        self.payoffs.iter().filter(|(_, v)| !v.is_zero()).map(|(s, _)| s.clone()).collect()
    }

    pub fn sup_abs(&self) -> Rational {
        use num_traits::Signed;
        self.payoffs.values().map(|v| v.abs()).max().unwrap_or_else(Rational::zero)
    }

    /// `h(S_T)` atom by atom.
    pub fn evaluate(&self, price: &PriceProcess) -> Result<RandomVariable, MarketError> {
        let values = price
            .terminal()
            .values()
            .iter()
            .map(|s| self.payoffs.get(s).cloned().ok_or_else(|| MarketError::MissingTerminalValue(format_rational(s))))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(RandomVariable::new(Arc::clone(price.space()), values)?)
    }

    pub fn to_json(&self) -> ClaimJson {
        ClaimJson { payoffs: self.payoffs.iter().map(|(s, v)| (format_rational(s), format_rational(v))).collect() }
    }

    pub fn from_json(doc: &ClaimJson) -> Result<Self, MarketError> {
        let mut payoffs = BTreeMap::new();
        for (s, v) in &doc.payoffs {
            let s = parse_rational(s).map_err(ProbError::from)?;
            let v = parse_rational(v).map_err(ProbError::from)?;
            if payoffs.contains_key(&s) {
                return Err(MarketError::DuplicateTerminalValue(format_rational(&s)));
            }
            payoffs.insert(s, v);
        }
        Ok(StaticClaim { payoffs })
    }
}

/// JSON form of a static claim: `[terminal value, payoff]` pairs in
/// increasing terminal order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClaimJson {
    pub payoffs: Vec<(String, String)>,
}

/// Gains process `(H.S)_t = sum_{k<=t} H_k (S_k - S_{k-1})` for
/// `t = 0..=T`.
pub fn gains_process(strategy: &PredictableStrategy, price: &PriceProcess) -> Result<Vec<RandomVariable>, MarketError> {
    if !same_space(strategy.space(), price.space()) {
        return Err(MarketError::SpaceMismatch);
    }
    if strategy.positions().len() != price.horizon() {
        return Err(MarketError::WrongStepCount { expected: price.horizon(), got: strategy.positions().len() });
    }
    let mut gains = vec![RandomVariable::zero(price.space())];
    for t in 1..=price.horizon() {
        let step = strategy.position(t) * &price.increment(t);
        let next = &gains[t - 1] + &step;
        gains.push(next);
    }
    Ok(gains)
}

/// Terminal gains `(H.S)_T`.
pub fn stochastic_integral(
    strategy: &PredictableStrategy,
    price: &PriceProcess,
) -> Result<RandomVariable, MarketError> {
    Ok(gains_process(strategy, price)?.pop().expect("gains process is non-empty"))
}

pub fn evaluate_static(claim: &StaticClaim, price: &PriceProcess) -> Result<RandomVariable, MarketError> {
    claim.evaluate(price)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probspace::AtomLabel;
    use crate::rational::{int, rat};
    use proptest::prelude::*;

    /// Two-step binomial walk S_0 = 0, S_1 = +-1, S_2 = S_1 +- 1, fair coins.
    fn walk() -> PriceProcess {
        let atoms: Vec<AtomLabel> = ["uu", "ud", "du", "dd"].iter().map(|s| AtomLabel::Named((*s).into())).collect();
        let space = FiniteFilteredSpace::from_index_cells(
            atoms,
            vec![rat(1, 4); 4],
            vec![vec![vec![0, 1, 2, 3]], vec![vec![0, 1], vec![2, 3]], (0..4).map(|i| vec![i]).collect()],
        )
        .unwrap();
        let s0 = RandomVariable::zero(&space);
        let s1 = RandomVariable::new(Arc::clone(&space), vec![int(1), int(1), int(-1), int(-1)]).unwrap();
        let s2 = RandomVariable::new(Arc::clone(&space), vec![int(2), int(0), int(0), int(-2)]).unwrap();
        PriceProcess::new(space, vec![s0, s1, s2]).unwrap()
    }

    #[test]
    fn rejects_non_adapted_slices() {
        let s = walk();
        let space = Arc::clone(s.space());
        let bad = vec![s.slice(0).clone(), s.slice(2).clone(), s.slice(2).clone()];
        assert_eq!(PriceProcess::new(space, bad).unwrap_err(), MarketError::NotAdapted { t: 1 });
    }

    #[test]
    fn zero_strategy_has_zero_gains() {
        let s = walk();
        let h = PredictableStrategy::zero(s.space());
        assert!(stochastic_integral(&h, &s).unwrap().is_zero());
    }

    #[test]
    fn predictability_is_enforced() {
        let s = walk();
        let space = Arc::clone(s.space());
        // Using S_2 as the position for step 2 peeks at the future.
        let err = PredictableStrategy::new(Arc::clone(&space), vec![RandomVariable::zero(&space), s.slice(2).clone()])
            .unwrap_err();
        assert_eq!(err, MarketError::PredictabilityViolation { t: 2 });
    }

    #[test]
    fn static_claim_identity_reproduces_terminal_price() {
        let s = walk();
        let id = StaticClaim::from_fn(&s, |x| x.clone());
        assert_eq!(&evaluate_static(&id, &s).unwrap(), s.terminal());
        let c = StaticClaim::constant(&s, rat(3, 7));
        assert_eq!(evaluate_static(&c, &s).unwrap(), RandomVariable::constant(s.space(), rat(3, 7)));
        let partial = StaticClaim::new([(int(2), int(1))].into_iter().collect());
        assert_eq!(evaluate_static(&partial, &s).unwrap_err(), MarketError::MissingTerminalValue("0/1".into()));
    }

    #[test]
    fn terminal_partition_groups_by_value() {
        let s = walk();
        let cells = s.terminal_partition();
        assert_eq!(cells.len(), 3);
        assert_eq!(cells[1].0, int(0));
        assert_eq!(cells[1].1.indices(), &[1, 2]);
    }

    #[test]
    fn walk_is_a_martingale_and_a_tilted_one_is_not() {
        assert!(walk().verify_martingale().passed);
        let s = walk();
        let space = Arc::clone(s.space());
        let tilted = RandomVariable::new(Arc::clone(&space), vec![int(2), int(0), int(1), int(-2)]).unwrap();
        let p = PriceProcess::new(space, vec![s.slice(0).clone(), s.slice(1).clone(), tilted]).unwrap();
        let report = p.verify_martingale();
        assert!(!report.passed);
        assert!(report.steps[0].holds);
        assert!(!report.steps[1].holds);
    }

    #[test]
    fn strategy_and_claim_json_round_trip() {
        let s = walk();
        let h = PredictableStrategy::from_cell_values(s.space(), &[vec![rat(-1, 2)], vec![int(3), rat(5, 9)]]).unwrap();
        let doc = h.to_json();
        let back = PredictableStrategy::from_json(s.space(), &doc).unwrap();
        assert_eq!(back, h);
        let text = serde_json::to_string(&doc).unwrap();
        assert_eq!(serde_json::to_string(&back.to_json()).unwrap(), text);

        let claim = StaticClaim::from_fn(&s, |x| x * rat(1, 3));
        let back = StaticClaim::from_json(&claim.to_json()).unwrap();
        assert_eq!(back, claim);
    }

    #[test]
    fn strategy_json_rejects_double_assignment() {
        let s = walk();
        let mut doc = PredictableStrategy::zero(s.space()).to_json();
        let dup = doc.steps[1][0].clone();
        doc.steps[1].push(dup);
        assert!(matches!(PredictableStrategy::from_json(s.space(), &doc), Err(MarketError::BadCellAssignment(_))));
    }

    fn arb_strategy() -> impl Strategy<Value = PredictableStrategy> {
        (any::<(i8, i8, i8)>()).prop_map(|(a, b, c)| {
            PredictableStrategy::from_cell_values(
                walk().space(),
                &[vec![int(a.into())], vec![int(b.into()), rat(c.into(), 3)]],
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn gains_have_zero_expectation(h in arb_strategy()) {
            let s = walk();
            let u = stochastic_integral(&h, &s).unwrap();
            prop_assert!(u.expectation().is_zero());
            prop_assert!(u.cond_expectation(0).unwrap().is_zero());
            // The whole gains process is a martingale.
            let g = gains_process(&h, &s).unwrap();
            prop_assert_eq!(g[2].cond_expectation(1).unwrap(), g[1].clone());
        }

        #[test]
        fn integral_is_linear_in_strategy(h in arb_strategy(), k in arb_strategy(), n in -9i64..9) {
            let s = walk();
            let lam = rat(n, 4);
            let lhs = stochastic_integral(&h.scale(&lam).add(&k).unwrap(), &s).unwrap();
            let rhs = &stochastic_integral(&h, &s).unwrap().scale(&lam) + &stochastic_integral(&k, &s).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn static_claims_are_terminal_measurable(vals in proptest::collection::vec(-20i64..20, 3)) {
            let s = walk();
            let table: BTreeMap<_, _> = s.terminal_values().into_iter().zip(vals.into_iter().map(int)).collect();
            let v = evaluate_static(&StaticClaim::new(table), &s).unwrap();
            let cells: Vec<Vec<usize>> = s.terminal_partition().into_iter().map(|(_, e)| e.indices().to_vec()).collect();
            prop_assert!(v.is_constant_on(&cells));
        }
    }
}
