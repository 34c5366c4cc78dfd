//! The three-period building block.
//!
//! Three independent coin flips on eight atoms: `S_1 = +-1` with equal
//! probability, an enlargement bit `X ~ Bernoulli(eps)` revealed with `S_1`,
//! and a terminal move to `+-a` on `A~ = {S_1 = 1} u {X = 1}` or to `+-b` off
//! it. The terminal probabilities are the unique ones making `S` a
//! martingale. The payoff `f = M X 1{S_1 = -1}` is small in every `L^p` but,
//! being nearly orthogonal to both the dynamic and the static outcome
//! spaces, needs large components to be super-replicated.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decompose::{self, DecomposeError, DecompositionResult};
use crate::market::{stochastic_integral, PredictableStrategy, PriceProcess, StaticClaim};
use crate::probspace::{AtomLabel, Event, FiniteFilteredSpace, RandomVariable};
use crate::rational::{self, format_rational, int, powi, rat, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BlockError {
    #[error("invalid block parameters: {0}")]
    InvalidParams(String),
    #[error("model does not match the construction for its parameters: {0}")]
    ModelMismatch(String),
    #[error(transparent)]
    Decompose(#[from] DecomposeError),
}

/// `(eps, M, a, b)` with `0 < eps <= 1/2`, `M > 0`, `a, b` in `[2, 3]`,
/// `a != b`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockParams {
    #[serde(with = "rational::as_string")]
    pub epsilon: Rational,
    #[serde(rename = "M", with = "rational::as_string")]
    pub m: Rational,
    #[serde(with = "rational::as_string")]
    pub a: Rational,
    #[serde(with = "rational::as_string")]
    pub b: Rational,
}

impl BlockParams {
    pub fn new(epsilon: Rational, m: Rational, a: Rational, b: Rational) -> Result<Self, BlockError> {
        let params = BlockParams { epsilon, m, a, b };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), BlockError> {
        let bad = |msg: String| Err(BlockError::InvalidParams(msg));
        if self.epsilon <= Rational::zero() || self.epsilon > rat(1, 2) {
            return bad(format!("epsilon = {} outside (0, 1/2]", format_rational(&self.epsilon)));
        }
        if self.m <= Rational::zero() {
            return bad(format!("M = {} must be positive", format_rational(&self.m)));
        }
        for (name, level) in [("a", &self.a), ("b", &self.b)] {
            if *level < int(2) || *level > int(3) {
                return bad(format!("{name} = {} outside [2, 3]", format_rational(level)));
            }
        }
        if self.a == self.b {
            return bad("a and b must differ so that |S_2| identifies the event A~".into());
        }
        Ok(())
    }

    /// Terminal level `|S_2|` given the first-period information.
    pub fn level(&self, s1_up: bool, x: bool) -> &Rational {
        if s1_up || x {
            &self.a
        } else {
            &self.b
        }
    }

    /// Exact probability `P(S_1) P(X) P(S_2 | F_1)` of one atom.
    pub fn atom_probability(&self, s1_up: bool, x: bool, s2_up: bool) -> Rational {
        let half = rat(1, 2);
        let px = if x { self.epsilon.clone() } else { Rational::one() - &self.epsilon };
        up_probability(self.level(s1_up, x), &s1_value(s1_up), s2_up) * px * half
    }

    /// The grid of parameters used for sweeps: corners and interior of the
    /// admissible box.
    pub fn sweep_grid() -> Vec<BlockParams> {
        let epsilons = [rat(1, 2), rat(1, 4), rat(1, 16), rational::pow2(-9)];
        let ms = [int(1), int(2), int(16)];
        let levels = [(int(2), int(3)), (rat(9, 4), rat(11, 4)), (rat(17, 8), rat(23, 8))];
        let mut grid = Vec::new();
        for e in &epsilons {
            for m in &ms {
                for (a, b) in &levels {
                    grid.push(BlockParams { epsilon: e.clone(), m: m.clone(), a: a.clone(), b: b.clone() });
                }
            }
        }
        grid
    }
}

fn s1_value(up: bool) -> Rational {
    if up {
        int(1)
    } else {
        int(-1)
    }
}

/// Gambler's-ruin probability of the `+level` branch from `start`, or its
/// complement for the `-level` branch.
fn up_probability(level: &Rational, start: &Rational, up: bool) -> Rational {
    let p_up = (level + start) / (level * int(2));
    if up {
        p_up
    } else {
        Rational::one() - p_up
    }
}

/// The eight atoms of block `index` in canonical order: `S_1 = +1` first,
/// then `X = 0` first, then the up branch first.
pub(crate) fn block_atoms(index: u32) -> Vec<AtomLabel> {
    let mut atoms = Vec::with_capacity(8);
    for s1_up in [true, false] {
        for x in [false, true] {
            for s2_up in [true, false] {
                atoms.push(AtomLabel::block(index, s1_up, x, s2_up));
            }
        }
    }
    atoms
}

/// Price path `(S_0, S_1, S_2)` on a block atom.
pub(crate) fn block_path(params: &BlockParams, label: &AtomLabel) -> Option<[Rational; 3]> {
    let AtomLabel::Block { s1_up, x, s2_up, .. } = *label else {
        return None;
    };
    let level = params.level(s1_up, x).clone();
    let s2 = if s2_up { level } else { -level };
    Some([Rational::zero(), s1_value(s1_up), s2])
}

/// `f = M X 1{S_1 = -1}` on a block atom.
pub(crate) fn block_payoff(params: &BlockParams, label: &AtomLabel) -> Rational {
    match label {
        AtomLabel::Block { s1_up: false, x: true, .. } => params.m.clone(),
        _ => Rational::zero(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockModel {
    pub params: BlockParams,
    pub index: u32,
    pub space: Arc<FiniteFilteredSpace>,
    pub price: PriceProcess,
    pub x: RandomVariable,
    /// `A = {S_1 = 1}`.
    pub a_event: Event,
    /// `A~ = A u {X = 1}`.
    pub a_tilde: Event,
    pub f: RandomVariable,
    pub canonical_strategy: PredictableStrategy,
    pub canonical_claim: StaticClaim,
}

/// Builds the block with index 1.
pub fn build_block(params: &BlockParams) -> Result<BlockModel, BlockError> {
    build_block_indexed(params, 1)
}

pub fn build_block_indexed(params: &BlockParams, index: u32) -> Result<BlockModel, BlockError> {
    params.validate()?;
    let atoms = block_atoms(index);
    let probs: Vec<Rational> = atoms
        .iter()
        .map(|l| match *l {
            AtomLabel::Block { s1_up, x, s2_up, .. } => params.atom_probability(s1_up, x, s2_up),
            _ => unreachable!("block atoms are block labels"),
        })
        .collect();
    // F_0 trivial, F_1 = sigma(S_1, X), F_2 discrete.
    let partitions = vec![
        vec![(0..8).collect()],
        (0..4).map(|k| vec![2 * k, 2 * k + 1]).collect(),
        (0..8).map(|i| vec![i]).collect(),
    ];
    let space = FiniteFilteredSpace::from_index_cells(atoms, probs, partitions)
        .map_err(|e| BlockError::ModelMismatch(e.to_string()))?;

    let slices: Vec<RandomVariable> = (0..3)
        .map(|t| RandomVariable::from_fn(&space, |_, l| block_path(params, l).expect("block atom")[t].clone()))
        .collect();
    let price = PriceProcess::new(Arc::clone(&space), slices).map_err(|e| BlockError::ModelMismatch(e.to_string()))?;
    let x = RandomVariable::from_fn(&space, |_, l| match l {
        AtomLabel::Block { x: true, .. } => Rational::one(),
        _ => Rational::zero(),
    });
    let a_event = space.event_where(|l| matches!(l, AtomLabel::Block { s1_up: true, .. }));
    let x_event = space.event_where(|l| matches!(l, AtomLabel::Block { x: true, .. }));
    let a_tilde = a_event.union(&x_event);
    let f = RandomVariable::from_fn(&space, |_, l| block_payoff(params, l));

    let (canonical_strategy, canonical_claim) = canonical_pair(&space, params, &params.m);
    Ok(BlockModel {
        params: params.clone(),
        index,
        space,
        price,
        x,
        a_event,
        a_tilde,
        f,
        canonical_strategy,
        canonical_claim,
    })
}

/// Semi-static decomposition of the scaled payoff `scale * X 1{A^c}`:
/// short `scale/2` units of the underlying over the first period plus a
/// digital claim paying `+scale/2` on `|S_2| = a` and `-scale/2` on
/// `|S_2| = b`.
pub fn canonical_decomposition_scaled(block: &BlockModel, scale: &Rational) -> (PredictableStrategy, StaticClaim) {
    canonical_pair(&block.space, &block.params, scale)
}

fn canonical_pair(
    space: &Arc<FiniteFilteredSpace>,
    params: &BlockParams,
    scale: &Rational,
) -> (PredictableStrategy, StaticClaim) {
    let half = scale / int(2);
    let strategy = PredictableStrategy::from_cell_values(space, &[vec![-half.clone()], vec![Rational::zero(); 4]])
        .expect("block filtration has one F_0 cell and four F_1 cells");
    let (a, b) = (&params.a, &params.b);
    let claim = StaticClaim::new(BTreeMap::from([
        (a.clone(), half.clone()),
        (-a.clone(), half.clone()),
        (b.clone(), -half.clone()),
        (-b.clone(), -half),
    ]));
    (strategy, claim)
}

/// The pair `(H, h)` with `(H.S)_2 + h(S_2) = f`.
pub fn canonical_decomposition(block: &BlockModel) -> (PredictableStrategy, StaticClaim) {
    canonical_decomposition_scaled(block, &block.params.m)
}

impl BlockModel {
    /// `M (1_{A~} - 1_A)`, the second defining formula of the payoff.
    pub fn f_from_events(&self) -> RandomVariable {
        let diff = &RandomVariable::indicator(&self.space, &self.a_tilde)
            - &RandomVariable::indicator(&self.space, &self.a_event);
        diff.scale(&self.params.m)
    }

    /// Atoms where `S_2` equals `value`.
    pub fn terminal_event(&self, value: &Rational) -> Event {
        let s2 = self.price.terminal();
        Event::from_indices((0..self.space.len()).filter(|&i| s2.value(i) == value))
    }

    /// `P(S_2 = level | F_1)` as a random variable.
    pub fn conditional_up_probability(&self, level: &Rational) -> RandomVariable {
        let ind = RandomVariable::indicator(&self.space, &self.terminal_event(level));
        ind.cond_expectation(1).expect("t = 1 within the block filtration")
    }

    pub fn to_json(&self) -> BlockJson {
        BlockJson {
            params: self.params.clone(),
            index: self.index,
            space: self.space.to_json(),
            price: self.price.slices().iter().map(RandomVariable::to_strings).collect(),
            x: self.x.to_strings(),
            a_event: labels(&self.space, &self.a_event),
            a_tilde: labels(&self.space, &self.a_tilde),
            f: self.f.to_strings(),
            strategy: self.canonical_strategy.to_json(),
            claim: self.canonical_claim.to_json(),
        }
    }

    /// Loads a block and checks it against the construction for its
    /// parameters.
    pub fn from_json(doc: &BlockJson) -> Result<Self, BlockError> {
        let mismatch = |what: &str| BlockError::ModelMismatch(what.to_owned());
        let space = FiniteFilteredSpace::from_json(&doc.space).map_err(|e| BlockError::ModelMismatch(e.to_string()))?;
        let expected = build_block_indexed(&doc.params, doc.index)?;
        if *space != *expected.space {
            return Err(mismatch("space"));
        }
        let parse_rv = |values: &[String]| -> Result<RandomVariable, BlockError> {
            let values = values
                .iter()
                .map(|s| rational::parse_rational(s))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| BlockError::ModelMismatch(e.to_string()))?;
            RandomVariable::new(Arc::clone(&expected.space), values)
                .map_err(|e| BlockError::ModelMismatch(e.to_string()))
        };
        let slices = doc.price.iter().map(|s| parse_rv(s)).collect::<Result<Vec<_>, _>>()?;
        if slices.as_slice() != expected.price.slices() {
            return Err(mismatch("price"));
        }
        if parse_rv(&doc.x)? != expected.x || parse_rv(&doc.f)? != expected.f {
            return Err(mismatch("X or f"));
        }
        let events = |names: &[String]| -> Result<Event, BlockError> {
            let parsed = names
                .iter()
                .map(|s| s.parse::<AtomLabel>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| BlockError::ModelMismatch(e.to_string()))?;
            expected.space.event_from_labels(&parsed).map_err(|e| BlockError::ModelMismatch(e.to_string()))
        };
        if events(&doc.a_event)? != expected.a_event || events(&doc.a_tilde)? != expected.a_tilde {
            return Err(mismatch("events"));
        }
        let strategy = PredictableStrategy::from_json(&expected.space, &doc.strategy)
            .map_err(|e| BlockError::ModelMismatch(e.to_string()))?;
        let claim = StaticClaim::from_json(&doc.claim).map_err(|e| BlockError::ModelMismatch(e.to_string()))?;
        if strategy != expected.canonical_strategy || claim != expected.canonical_claim {
            return Err(mismatch("canonical decomposition"));
        }
        Ok(expected)
    }
}

pub(crate) fn labels(space: &FiniteFilteredSpace, event: &Event) -> Vec<String> {
    event.iter().map(|i| space.atoms()[i].to_string()).collect()
}

/// JSON form of a block model, reusing the space, strategy and claim
/// formats.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockJson {
    pub params: BlockParams,
    pub index: u32,
    pub space: crate::probspace::SpaceJson,
    pub price: Vec<Vec<String>>,
    pub x: Vec<String>,
    pub a_event: Vec<String>,
    pub a_tilde: Vec<String>,
    pub f: Vec<String>,
    pub strategy: crate::market::StrategyJson,
    pub claim: crate::market::ClaimJson,
}

/// One line of a verification report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: String,
    /// The identity or bound being checked.
    pub identity: String,
    /// Hard checks decide the overall verdict; the others are reported only.
    pub hard: bool,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, identity: &str, hard: bool, passed: bool, detail: String) -> Self {
        Check { name: name.into(), identity: identity.into(), hard, passed, detail }
    }
}

/// Row of the decomposition-bounds table for one block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BoundsRow {
    pub epsilon: String,
    #[serde(rename = "M")]
    pub m: String,
    pub a: String,
    pub b: String,
    pub cost: String,
    pub m_over_16: String,
    pub m_over_24: String,
    pub max_u_corr: String,
    pub eps_m: String,
    pub max_v_corr: String,
    pub eight_eps_m: String,
    pub twelve_eps_m: String,
    pub u_bound_ok: bool,
    pub v_bound_8_ok: bool,
    pub v_bound_12_ok: bool,
    pub cost_ge_m_over_24: bool,
    pub cost_ge_m_over_16: bool,
    pub cost_le_m: bool,
}

#[derive(Debug, Clone)]
pub struct BlockReport {
    pub params: BlockParams,
    pub checks: Vec<Check>,
    pub bounds: BoundsRow,
    pub decomposition: DecompositionResult,
    pub max_u_corr: Rational,
    pub max_v_corr: Rational,
}

impl BlockReport {
    /// True when every hard check passed.
    pub fn passed(&self) -> bool {
        self.checks.iter().filter(|c| c.hard).all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| c.hard && !c.passed).collect()
    }
}

/// Runs every exact check on one block, including the minimal-cost LP.
pub fn verify_block(block: &BlockModel) -> Result<BlockReport, BlockError> {
    let p = &block.params;
    let eps = &p.epsilon;
    let m = &p.m;
    let fmt = format_rational;
    let mut checks = Vec::new();

    checks.push(Check::new("f_nonnegative", "f >= 0", true, block.f.is_nonnegative(), String::new()));
    checks.push(Check::new(
        "f_two_formulas",
        "M(1_{A~} - 1_A) = M X 1_{A^c}",
        true,
        block.f_from_events() == block.f,
        String::new(),
    ));
    let mart = block.price.verify_martingale();
    checks.push(Check::new(
        "martingale",
        "E[S_t | F_{t-1}] = S_{t-1}",
        true,
        mart.passed,
        format!("{:?}", mart.steps.iter().map(|s| s.holds).collect::<Vec<_>>()),
    ));

    // Conditional terminal probabilities on each F_1 cell.
    let s1 = block.price.slice(1);
    let up_a = block.conditional_up_probability(&p.a);
    let up_b = block.conditional_up_probability(&p.b);
    let mut on_tilde = true;
    let mut off_tilde = true;
    for i in 0..block.space.len() {
        if block.a_tilde.contains(i) {
            on_tilde &= *up_a.value(i) == (&p.a + s1.value(i)) / (&p.a * int(2));
        } else {
            off_tilde &= *up_b.value(i) == (&p.b + s1.value(i)) / (&p.b * int(2));
        }
    }
    checks.push(Check::new(
        "cond_prob_on_a_tilde",
        "P(S_2 = a | F_1) = (a + S_1)/(2a) on A~",
        true,
        on_tilde,
        String::new(),
    ));
    checks.push(Check::new(
        "cond_prob_off_a_tilde",
        "P(S_2 = b | F_1) = (b + S_1)/(2b) off A~",
        true,
        off_tilde,
        String::new(),
    ));

    // Independence of X and S_1.
    let ind_a = RandomVariable::indicator(&block.space, &block.a_event);
    let indep = [s1, &ind_a].iter().all(|phi| (&block.x * phi).expectation() == eps * phi.expectation());
    checks.push(Check::new("x_independent_of_s1", "E[X phi(S_1)] = eps E[phi(S_1)]", true, indep, String::new()));

    for order in 1..=4u32 {
        let got = block.f.moment(order).expect("order >= 1");
        let want = powi(m, order as i32) * eps / int(2);
        checks.push(Check::new(
            &format!("moment_p{order}"),
            "E[|f|^p] = M^p eps / 2",
            true,
            got == want,
            format!("{} vs {}", fmt(&got), fmt(&want)),
        ));
    }

    let p_a = block.space.probability(&block.terminal_event(&p.a));
    checks.push(Check::new("p_s2_eq_a", "P(S_2 = a) >= 1/8", true, p_a >= rat(1, 8), fmt(&p_a)));
    for level in [p.a.clone(), -p.a.clone()] {
        let cond = block.x.conditional_mean(&block.terminal_event(&level)).unwrap_or_default();
        checks.push(Check::new(
            &format!("e_x_given_s2_{}", fmt(&level)),
            "E[X | S_2 = +-a] <= 8 eps",
            true,
            cond <= eps * int(8),
            fmt(&cond),
        ));
    }
    for level in [p.b.clone(), -p.b.clone()] {
        let cond = block.x.conditional_mean(&block.terminal_event(&level)).unwrap_or_default();
        checks.push(Check::new(
            &format!("e_x_given_s2_{}", fmt(&level)),
            "E[X | S_2 = +-b] = 0",
            true,
            cond.is_zero(),
            fmt(&cond),
        ));
    }

    let u_can = stochastic_integral(&block.canonical_strategy, &block.price).map_err(DecomposeError::from)?;
    let v_can = block.canonical_claim.evaluate(&block.price).map_err(DecomposeError::from)?;
    let half_m = m / int(2);
    let canon_ok = &u_can + &v_can == block.f
        && u_can.moment(1).expect("order 1") == half_m
        && v_can.moment(1).expect("order 1") == half_m;
    checks.push(Check::new(
        "canonical_decomposition",
        "f = -(M/2) S_1 + (M/2)(1_{A~} - 1_{A~^c}), ||u||_1 = ||v||_1 = M/2",
        true,
        canon_ok,
        String::new(),
    ));

    let u_corr = decompose::max_u_correlation(&block.price, &block.f)?;
    let v_corr = decompose::max_v_correlation(&block.price, &block.f)?;
    let eps_m = eps * m;
    let eight = &eps_m * int(8);
    let twelve = &eps_m * int(12);
    checks.push(Check::new(
        "u_correlation",
        "sup E[f u]/||u||_1 <= eps M",
        true,
        u_corr.value <= eps_m,
        fmt(&u_corr.value),
    ));
    checks.push(Check::new(
        "v_correlation_8",
        "sup E[f v]/||v||_1 <= 8 eps M",
        true,
        v_corr.value <= eight,
        fmt(&v_corr.value),
    ));
    checks.push(Check::new(
        "v_correlation_12",
        "sup E[f v]/||v||_1 <= 12 eps M",
        true,
        v_corr.value <= twelve,
        fmt(&v_corr.value),
    ));

    let dec = decompose::min_l1_decomposition(&block.price, &block.f)?;
    let m16 = m / int(16);
    let m24 = m / int(24);
    checks.push(Check::new(
        "cost_ge_m_over_24",
        "min ||u||_1 + ||v||_1 >= M/24",
        true,
        dec.cost >= m24,
        fmt(&dec.cost),
    ));
    checks.push(Check::new(
        "cost_ge_m_over_16",
        "min ||u||_1 + ||v||_1 >= M/16",
        false,
        dec.cost >= m16,
        fmt(&dec.cost),
    ));
    checks.push(Check::new("cost_le_m", "min ||u||_1 + ||v||_1 <= M", true, dec.cost <= *m, fmt(&dec.cost)));
    checks.push(Check::new(
        "duality_gap_zero",
        "primal objective = dual objective",
        true,
        dec.certificate.gap.is_zero(),
        fmt(&dec.certificate.dual_objective),
    ));
    let chain = decompose::lower_bound_chain(&block.f, &dec, &u_corr.value, &v_corr.value);
    checks.push(Check::new(
        "lower_bound_chain",
        "E[f^2] <= E[f u*] + E[f v*] <= max_corr (||u*||_1 + ||v*||_1)",
        true,
        chain.holds(),
        format!("bound {}", fmt(&chain.implied_lower_bound)),
    ));

    let bounds = BoundsRow {
        epsilon: fmt(eps),
        m: fmt(m),
        a: fmt(&p.a),
        b: fmt(&p.b),
        cost: fmt(&dec.cost),
        m_over_16: fmt(&m16),
        m_over_24: fmt(&m24),
        max_u_corr: fmt(&u_corr.value),
        eps_m: fmt(&eps_m),
        max_v_corr: fmt(&v_corr.value),
        eight_eps_m: fmt(&eight),
        twelve_eps_m: fmt(&twelve),
        u_bound_ok: u_corr.value <= eps_m,
        v_bound_8_ok: v_corr.value <= eight,
        v_bound_12_ok: v_corr.value <= twelve,
        cost_ge_m_over_24: dec.cost >= m24,
        cost_ge_m_over_16: dec.cost >= m16,
        cost_le_m: dec.cost <= *m,
    };
    Ok(BlockReport {
        params: p.clone(),
        checks,
        bounds,
        decomposition: dec,
        max_u_corr: u_corr.value,
        max_v_corr: v_corr.value,
    })
}
