//! Countable pasting of blocks, truncated to a finite depth.
//!
//! Block `n` lives on an `F_0`-measurable piece `Omega_n` of mass `2^{-n}`
//! with `eps_n = 2^{-n^2}` and `M_n = 2^n`, so `g = sum_n f_n 1_{Omega_n}`
//! lies in every `L^p` while the cheapest semi-static super-replication of
//! the partial sums grows linearly in the depth. The truncated model adds a
//! residual atom of mass `2^{-N}` on which the price and the payoff vanish.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blocks::{self, build_block_indexed, BlockError, BlockModel, BlockParams};
use crate::decompose::{min_l1_decomposition, DecomposeError};
use crate::market::{MarketError, PredictableStrategy, PriceProcess, StaticClaim};
use crate::probspace::{AtomLabel, Event, FiniteFilteredSpace, RandomVariable, SpaceJson};
use crate::rational::{format_rational, int, pow2, powi, rat, Rational};

/// Deepest truncation accepted; keeps `n^2` and the model size sane.
pub const MAX_DEPTH: u32 = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PastingError {
    #[error("depth {0} outside 1..={MAX_DEPTH}")]
    InvalidDepth(u32),
    #[error("invalid range: {0}")]
    InvalidRange(String),
    #[error("index {index} exceeds depth {depth}")]
    IndexOutOfRange { index: u32, depth: u32 },
    #[error("terminal levels of blocks {0} and {1} coincide")]
    LevelsNotDistinct(u32, u32),
    #[error("pasted model check failed: {0}")]
    ModelMismatch(String),
    #[error(transparent)]
    Block(#[from] BlockError),
    #[error(transparent)]
    Decompose(#[from] DecomposeError),
}

/// Block parameters as a function of the block index `n >= 1`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum PastingSchedule {
    /// `eps_n = 2^{-n^2}`, `M_n = 2^n`, `a_n = 2 + 1/(4n)`, `b_n = 3 - 1/(4n)`.
    #[default]
    Standard,
    /// Explicit parameters for blocks `1..=len`.
    Explicit(Vec<BlockParams>),
}

pub fn default_schedule() -> PastingSchedule {
    PastingSchedule::Standard
}

impl PastingSchedule {
    pub fn epsilon(&self, n: u32) -> Result<Rational, PastingError> {
        Ok(self.params(n)?.epsilon)
    }

    pub fn m(&self, n: u32) -> Result<Rational, PastingError> {
        Ok(self.params(n)?.m)
    }

    pub fn a(&self, n: u32) -> Result<Rational, PastingError> {
        Ok(self.params(n)?.a)
    }

    pub fn b(&self, n: u32) -> Result<Rational, PastingError> {
        Ok(self.params(n)?.b)
    }

    /// `P(Omega_n) = 2^{-n}`.
    pub fn block_mass(n: u32) -> Rational {
        pow2(-i64::from(n))
    }

    pub fn params(&self, n: u32) -> Result<BlockParams, PastingError> {
        match self {
            PastingSchedule::Standard => {
                if n == 0 || n > MAX_DEPTH {
                    return Err(PastingError::InvalidDepth(n));
                }
                let n64 = i64::from(n);
                let quarter = rat(1, 4 * n64);
                Ok(BlockParams::new(pow2(-n64 * n64), pow2(n64), int(2) + &quarter, int(3) - quarter)?)
            }
            PastingSchedule::Explicit(list) => {
                let depth = list.len() as u32;
                if n == 0 || n > depth {
                    return Err(PastingError::IndexOutOfRange { index: n, depth });
                }
                list[n as usize - 1].validate()?;
                Ok(list[n as usize - 1].clone())
            }
        }
    }

    /// `(1/2) P(Omega_n) eps_n M_n^p = E[|f_n 1_{Omega_n}|^p]`, in closed form
    /// `(1/2) 2^{-n(n+1-p)}` for the standard schedule.
    pub fn tail_term(&self, n: u32, p: u32) -> Result<Rational, PastingError> {
        match self {
            PastingSchedule::Standard => {
                let (n, p) = (i64::from(n), i64::from(p));
                Ok(pow2(-n * (n + 1 - p)) / int(2))
            }
            PastingSchedule::Explicit(_) => {
                let params = self.params(n)?;
                Ok(Self::block_mass(n) * params.epsilon * powi(&params.m, p as i32) / int(2))
            }
        }
    }
}

fn check_depth(depth: u32) -> Result<(), PastingError> {
    if depth == 0 || depth > MAX_DEPTH {
        return Err(PastingError::InvalidDepth(depth));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PastedModel {
    pub depth: u32,
    pub blocks: Vec<BlockModel>,
    pub space: Arc<FiniteFilteredSpace>,
    pub price: PriceProcess,
    /// `Omega_1, ..., Omega_N`.
    pub block_events: Vec<Event>,
    /// The residual piece carrying the leftover mass `2^{-N}`.
    pub residual_event: Event,
    /// `sum_{n <= N} f_n 1_{Omega_n}`.
    pub g_full: RandomVariable,
    /// `g_m` for `m = 0..=N`.
    pub g_partials: Vec<RandomVariable>,
}

/// Builds the depth-`N` truncation and re-verifies each block inside it.
pub fn paste(schedule: &PastingSchedule, depth: u32) -> Result<PastedModel, PastingError> {
    check_depth(depth)?;
    let params: Vec<BlockParams> = (1..=depth).map(|n| schedule.params(n)).collect::<Result<_, _>>()?;
    let mut levels: BTreeMap<Rational, u32> = BTreeMap::new();
    for (k, p) in params.iter().enumerate() {
        let n = k as u32 + 1;
        for level in [&p.a, &p.b] {
            if let Some(&other) = levels.get(level) {
                return Err(PastingError::LevelsNotDistinct(other, n));
            }
            levels.insert(level.clone(), n);
        }
    }
    let blocks: Vec<BlockModel> =
        params.iter().enumerate().map(|(k, p)| build_block_indexed(p, k as u32 + 1)).collect::<Result<_, _>>()?;

    let mut atoms = Vec::with_capacity(8 * blocks.len() + 1);
    let mut probs = Vec::with_capacity(atoms.capacity());
    let mut f0 = Vec::new();
    let mut f1 = Vec::new();
    for (k, block) in blocks.iter().enumerate() {
        let offset = atoms.len();
        let mass = PastingSchedule::block_mass(k as u32 + 1);
        atoms.extend(block.space.atoms().iter().cloned());
        probs.extend(block.space.probs().iter().map(|p| p * &mass));
        f0.push((offset..offset + 8).collect::<Vec<_>>());
        for cell in block.space.partition(1).expect("block has F_1").cells() {
            f1.push(cell.iter().map(|i| i + offset).collect::<Vec<_>>());
        }
    }
    let residual = atoms.len();
    atoms.push(AtomLabel::Residual);
    probs.push(pow2(-i64::from(depth)));
    f0.push(vec![residual]);
    f1.push(vec![residual]);
    let f2 = (0..atoms.len()).map(|i| vec![i]).collect();
    let space = FiniteFilteredSpace::from_index_cells(atoms, probs, vec![f0, f1, f2])
        .map_err(|e| PastingError::ModelMismatch(e.to_string()))?;

    let block_of = |label: &AtomLabel| label.block_index().map(|n| &blocks[n as usize - 1]);
    let slices: Vec<RandomVariable> = (0..3)
        .map(|t| {
            RandomVariable::from_fn(&space, |_, l| match block_of(l) {
                Some(b) => blocks::block_path(&b.params, l).expect("block atom")[t].clone(),
                None => Rational::zero(),
            })
        })
        .collect();
    let price =
        PriceProcess::new(Arc::clone(&space), slices).map_err(|e| PastingError::ModelMismatch(e.to_string()))?;
    let block_events: Vec<Event> = (1..=depth).map(|n| space.event_where(|l| l.block_index() == Some(n))).collect();
    let residual_event = space.event_where(|l| *l == AtomLabel::Residual);
    let g_partials: Vec<RandomVariable> = (0..=depth)
        .map(|m| {
            RandomVariable::from_fn(&space, |_, l| match (block_of(l), l.block_index()) {
                (Some(b), Some(n)) if n <= m => blocks::block_payoff(&b.params, l),
                _ => Rational::zero(),
            })
        })
        .collect();
    let model = PastedModel {
        depth,
        blocks,
        space,
        price,
        block_events,
        residual_event,
        g_full: g_partials.last().expect("depth >= 1").clone(),
        g_partials,
    };
    let failures: Vec<String> = model.structural_checks().into_iter().filter(|(_, ok)| !ok).map(|(n, _)| n).collect();
    if !failures.is_empty() {
        return Err(PastingError::ModelMismatch(failures.join(", ")));
    }
    Ok(model)
}

impl PastedModel {
    pub fn params(&self) -> Vec<BlockParams> {
        self.blocks.iter().map(|b| b.params.clone()).collect()
    }

    /// Named structural checks: the pieces form an `F_0` partition with the
    /// right masses, each block restricted and renormalized reproduces its
    /// stand-alone model, terminal levels identify blocks, and the pasted
    /// price is a martingale.
    pub fn structural_checks(&self) -> Vec<(String, bool)> {
        let mut checks = Vec::new();
        let f0 = self.space.partition(0).expect("t = 0");
        let mut pieces = self.block_events.clone();
        pieces.push(self.residual_event.clone());
        let f0_ok = pieces.iter().all(|e| {
            let indices = e.indices();
            !indices.is_empty() && indices.iter().all(|&i| f0.cell_of(i) == f0.cell_of(indices[0]))
        }) && pieces.iter().map(Event::len).sum::<usize>() == self.space.len();
        checks.push(("pieces_form_f0_partition".to_owned(), f0_ok));

        let residual_mass = self.space.probability(&self.residual_event) == pow2(-i64::from(self.depth));
        let residual_zero = self
            .residual_event
            .iter()
            .all(|i| self.price.slices().iter().all(|s| s.value(i).is_zero()) && self.g_full.value(i).is_zero());
        checks.push(("residual_mass".to_owned(), residual_mass));
        checks.push(("residual_price_and_payoff_zero".to_owned(), residual_zero));

        let s2 = self.price.terminal();
        for (k, (block, event)) in self.blocks.iter().zip(&self.block_events).enumerate() {
            let n = k as u32 + 1;
            let mass = PastingSchedule::block_mass(n);
            let by_level = Event::from_indices((0..self.space.len()).filter(|&i| {
                let v = s2.value(i);
                let abs = if *v < Rational::zero() { -v.clone() } else { v.clone() };
                abs == block.params.a || abs == block.params.b
            }));
            let restricted_ok = event.len() == 8
                && event.iter().enumerate().all(|(j, i)| {
                    self.space.atoms()[i] == block.space.atoms()[j]
                        && self.space.prob(i) / &mass == *block.space.prob(j)
                        && (0..3).all(|t| self.price.slice(t).value(i) == block.price.slice(t).value(j))
                        && self.g_full.value(i) == block.f.value(j)
                });
            checks.push((format!("block_{n}_mass"), self.space.probability(event) == mass));
            checks.push((format!("block_{n}_identified_by_levels"), by_level == *event));
            checks.push((format!("block_{n}_restriction"), restricted_ok));
            checks.push((
                format!("block_{n}_payoff_formulas"),
                block.f_from_events() == block.f && block.price.verify_martingale().passed,
            ));
        }
        checks.push(("pasted_martingale".to_owned(), self.price.verify_martingale().passed));
        let nonneg = self.g_partials.iter().all(RandomVariable::is_nonnegative);
        checks.push(("partials_nonnegative".to_owned(), nonneg));
        checks
    }

    pub fn to_json(&self) -> PastedJson {
        PastedJson {
            depth: self.depth,
            blocks: self.params(),
            space: self.space.to_json(),
            price: self.price.slices().iter().map(RandomVariable::to_strings).collect(),
            block_events: self.block_events.iter().map(|e| blocks::labels(&self.space, e)).collect(),
            g_full: self.g_full.to_strings(),
        }
    }

    /// Rebuilds the model from its block parameters and checks every stored
    /// field against the rebuilt one.
    pub fn from_json(doc: &PastedJson) -> Result<Self, PastingError> {
        let mismatch = |what: &str| PastingError::ModelMismatch(what.to_owned());
        if doc.blocks.len() != doc.depth as usize {
            return Err(mismatch("block count differs from depth"));
        }
        let model = paste(&PastingSchedule::Explicit(doc.blocks.clone()), doc.depth)?;
        if model.to_json() != *doc {
            return Err(mismatch("stored fields differ from the construction"));
        }
        Ok(model)
    }
}

/// JSON form of a pasted model; reuses the space format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PastedJson {
    pub depth: u32,
    pub blocks: Vec<BlockParams>,
    pub space: SpaceJson,
    pub price: Vec<Vec<String>>,
    pub block_events: Vec<Vec<String>>,
    pub g_full: Vec<String>,
}

/// `(H, h)` with `(H.S)_2 + h(S_2) = g_m`: block `n <= m` runs its canonical
/// pair on `Omega_n`, everything else is flat.
pub fn g_partial_decomposition(
    model: &PastedModel,
    m: u32,
) -> Result<(PredictableStrategy, StaticClaim), PastingError> {
    if m > model.depth {
        return Err(PastingError::IndexOutOfRange { index: m, depth: model.depth });
    }
    let active = |l: &AtomLabel| l.block_index().filter(|&n| n <= m);
    let first = RandomVariable::from_fn(&model.space, |_, l| match active(l) {
        Some(n) => -model.blocks[n as usize - 1].params.m.clone() / int(2),
        None => Rational::zero(),
    });
    let strategy = PredictableStrategy::new(Arc::clone(&model.space), vec![first, RandomVariable::zero(&model.space)])
        .map_err(|e: MarketError| PastingError::ModelMismatch(e.to_string()))?;
    let mut payoffs: BTreeMap<Rational, Rational> =
        model.price.terminal_values().into_iter().map(|s| (s, Rational::zero())).collect();
    for block in model.blocks.iter().take(m as usize) {
        let (_, claim) = blocks::canonical_decomposition(block);
        payoffs.extend(claim.payoffs().iter().map(|(k, v)| (k.clone(), v.clone())));
    }
    Ok((strategy, StaticClaim::new(payoffs)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConvergenceRow {
    pub identity: &'static str,
    pub m: u32,
    pub p: u32,
    /// `E[|g_full - g_m|^p]` summed atom by atom.
    pub computed: String,
    /// The partial sum of the closed-form series over `n = m+1..=N`.
    pub closed_form: String,
    pub equal: bool,
    /// `P(g_m != g_full)`.
    pub mismatch_probability: String,
    pub mismatch_bound_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvergenceTable {
    pub depth: u32,
    pub p: u32,
    pub rows: Vec<ConvergenceRow>,
    /// Enclosure of the untruncated remainder `sum_{n > N}` of the series,
    /// when the schedule defines it.
    pub tail_beyond_depth: Option<(Rational, Rational)>,
}

impl ConvergenceTable {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.equal && r.mismatch_bound_ok)
    }
}

/// Exact `L^p` distances between `g_m` and the truncated `g`, each compared
/// against the closed-form series.
pub fn convergence_table(
    schedule: &PastingSchedule,
    depth: u32,
    p: u32,
    m_max: u32,
) -> Result<ConvergenceTable, PastingError> {
    if p == 0 || p > MAX_DEPTH {
        return Err(PastingError::InvalidRange(format!("p = {p} outside 1..={MAX_DEPTH}")));
    }
    check_depth(depth)?;
    if m_max >= depth {
        return Err(PastingError::InvalidRange(format!("m_max = {m_max} must be below depth {depth}")));
    }
    let model = paste(schedule, depth)?;
    let mut rows = Vec::with_capacity(m_max as usize + 1);
    for m in 0..=m_max {
        let diff = &model.g_full - &model.g_partials[m as usize];
        let computed = diff.moment(p).expect("p >= 1");
        let closed_form: Rational = (m + 1..=depth).map(|n| schedule.tail_term(n, p)).sum::<Result<Rational, _>>()?;
        let differs = Event::from_indices((0..model.space.len()).filter(|&i| !diff.value(i).is_zero()));
        let mismatch = model.space.probability(&differs);
        let bound: Rational = (m + 1..=depth).map(PastingSchedule::block_mass).sum();
        rows.push(ConvergenceRow {
            identity: "E|g - g_m|^p = (1/2) sum_{n=m+1}^N 2^{-n(n+1-p)}",
            m,
            p,
            equal: computed == closed_form,
            computed: format_rational(&computed),
            closed_form: format_rational(&closed_form),
            mismatch_bound_ok: mismatch <= bound && bound <= pow2(-i64::from(m)),
            mismatch_probability: format_rational(&mismatch),
        });
    }
    let tail_beyond_depth = match schedule {
        PastingSchedule::Standard => Some(standard_tail_enclosure(depth, p)),
        PastingSchedule::Explicit(_) => None,
    };
    Ok(ConvergenceTable { depth, p, rows, tail_beyond_depth })
}

/// Encloses `(1/2) sum_{n > N} 2^{-n(n+1-p)}`. Consecutive terms have ratio
/// `2^{-(2n+2-p)}`, which decreases in `n`; terms are summed explicitly
/// until that ratio is at most `1/2` and the rest is bounded geometrically.
pub fn standard_tail_enclosure(depth: u32, p: u32) -> (Rational, Rational) {
    let p = i64::from(p);
    let half = rat(1, 2);
    let mut partial = Rational::zero();
    let mut n = i64::from(depth) + 1;
    loop {
        let term = pow2(-n * (n + 1 - p)) * &half;
        let ratio_exp = 2 * n + 2 - p;
        if ratio_exp >= 1 {
            let ratio = pow2(-ratio_exp);
            let upper = &partial + &term / (Rational::one() - ratio);
            return (partial + term, upper);
        }
        partial += term;
        n += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DivergenceRow {
    pub identity: &'static str,
    #[serde(rename = "N")]
    pub depth: u32,
    pub global_cost: String,
    pub sum_block_costs: String,
    pub n_over_24: String,
    pub n_over_16: String,
    pub decoupled: bool,
    pub ge_n_over_24: bool,
    pub ge_n_over_16: bool,
    /// `cost(N) - cost(N-1) >= 1/24`; vacuous for the first row.
    pub increment_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DivergenceReport {
    pub rows: Vec<DivergenceRow>,
    /// Stand-alone minimal cost of block `n`, index `n - 1`.
    pub block_costs: Vec<Rational>,
    pub global_costs: Vec<Rational>,
}

impl DivergenceReport {
    /// Hard checks only; the `N/16` comparison is reported.
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.decoupled && r.ge_n_over_24 && r.increment_ok)
    }
}

/// Minimal decomposition costs of `g_full` for every depth `1..=N`, each
/// solved as one global program and compared with the weighted block costs.
pub fn divergence_check(schedule: &PastingSchedule, depth: u32) -> Result<DivergenceReport, PastingError> {
    check_depth(depth)?;
    let params: Vec<BlockParams> = (1..=depth).map(|n| schedule.params(n)).collect::<Result<_, _>>()?;
    let block_costs: Vec<Rational> = params
        .par_iter()
        .enumerate()
        .map(|(k, p)| {
            let block = build_block_indexed(p, k as u32 + 1)?;
            Ok(min_l1_decomposition(&block.price, &block.f)?.cost)
        })
        .collect::<Result<_, PastingError>>()?;
    let global_costs: Vec<Rational> = (1..=depth)
        .into_par_iter()
        .map(|n| {
            let model = paste(schedule, n)?;
            Ok(min_l1_decomposition(&model.price, &model.g_full)?.cost)
        })
        .collect::<Result<_, PastingError>>()?;

    let mut rows = Vec::with_capacity(depth as usize);
    let mut weighted = Rational::zero();
    for n in 1..=depth {
        let k = n as usize - 1;
        weighted += PastingSchedule::block_mass(n) * &block_costs[k];
        let global = &global_costs[k];
        let n24 = rat(i64::from(n), 24);
        let n16 = rat(i64::from(n), 16);
        let increment_ok = k == 0 || global - &global_costs[k - 1] >= rat(1, 24);
        rows.push(DivergenceRow {
            identity: "min ||u||_1 + ||v||_1 for g_N = sum_n 2^{-n} cost_n >= N/24",
            depth: n,
            global_cost: format_rational(global),
            sum_block_costs: format_rational(&weighted),
            n_over_24: format_rational(&n24),
            n_over_16: format_rational(&n16),
            decoupled: *global == weighted,
            ge_n_over_24: *global >= n24,
            ge_n_over_16: *global >= n16,
            increment_ok,
        });
    }
    Ok(DivergenceReport { rows, block_costs, global_costs })
}

/// `sup |u| + sup |v|` of the canonical pair for `g_m`: finite for each `m`.
pub fn partial_sup_norms(model: &PastedModel, m: u32) -> Result<(Rational, Rational), PastingError> {
    let (h, claim) = g_partial_decomposition(model, m)?;
    let u =
        crate::market::stochastic_integral(&h, &model.price).map_err(|e| PastingError::ModelMismatch(e.to_string()))?;
    let v = claim.evaluate(&model.price).map_err(|e| PastingError::ModelMismatch(e.to_string()))?;
    Ok((u.sup_abs(), v.sup_abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::stochastic_integral;

    #[test]
    fn standard_schedule_values() {
        let s = default_schedule();
        let p1 = s.params(1).unwrap();
        assert_eq!((p1.epsilon, p1.m, p1.a, p1.b), (rat(1, 2), int(2), rat(9, 4), rat(11, 4)));
        let p3 = s.params(3).unwrap();
        assert_eq!(p3.epsilon, rat(1, 512));
        assert_eq!(p3.m, int(8));
        assert_eq!(p3.a, int(2) + rat(1, 12));
        assert_eq!(p3.b, int(3) - rat(1, 12));
        assert_eq!(s.params(0), Err(PastingError::InvalidDepth(0)));
    }

    #[test]
    fn levels_distinct_up_to_ten() {
        let s = default_schedule();
        let mut all: Vec<Rational> = Vec::new();
        for n in 1..=10 {
            all.push(s.a(n).unwrap());
            all.push(s.b(n).unwrap());
        }
        let mut sorted = all.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), all.len());
        assert!(all.iter().all(|v| *v >= int(2) && *v <= int(3)));
    }

    #[test]
    fn masses_and_atom_counts() {
        let m1 = paste(&default_schedule(), 1).unwrap();
        assert_eq!(m1.space.len(), 9);
        assert_eq!(m1.space.probability(&m1.block_events[0]), rat(1, 2));
        assert_eq!(m1.space.probability(&m1.residual_event), rat(1, 2));

        let m3 = paste(&default_schedule(), 3).unwrap();
        assert_eq!(m3.space.len(), 25);
        let masses: Vec<Rational> =
            m3.block_events.iter().chain([&m3.residual_event]).map(|e| m3.space.probability(e)).collect();
        assert_eq!(masses, vec![rat(1, 2), rat(1, 4), rat(1, 8), rat(1, 8)]);
        assert!(m3.structural_checks().iter().all(|(_, ok)| *ok));
    }

    #[test]
    fn terminal_cells_identify_blocks() {
        let m2 = paste(&default_schedule(), 2).unwrap();
        assert_eq!(m2.price.terminal_partition().len(), 9);
    }

    #[test]
    fn rejects_bad_depth_and_duplicate_levels() {
        assert_eq!(paste(&default_schedule(), 0).unwrap_err(), PastingError::InvalidDepth(0));
        let p = BlockParams::new(rat(1, 2), int(1), int(2), int(3)).unwrap();
        let dup = PastingSchedule::Explicit(vec![p.clone(), p]);
        assert_eq!(paste(&dup, 2).unwrap_err(), PastingError::LevelsNotDistinct(1, 2));
        assert!(matches!(paste(&PastingSchedule::Explicit(vec![]), 1), Err(PastingError::IndexOutOfRange { .. })));
    }

    /// The series term computed from first principles: mass times the
    /// `p`-th moment of the block payoff, `M^p eps / 2`.
    fn series(n: i64, p: i64) -> Rational {
        pow2(-n) * pow2(-n * n) * pow2(n * p) / int(2)
    }

    #[test]
    fn convergence_examples() {
        let t = convergence_table(&default_schedule(), 5, 1, 0).unwrap();
        let want = (pow2(-1) + pow2(-4) + pow2(-9) + pow2(-16) + pow2(-25)) / int(2);
        assert_eq!(t.rows[0].computed, format_rational(&want));
        assert!(t.passed());

        let t = convergence_table(&default_schedule(), 4, 2, 1).unwrap();
        let want = (pow2(-2) + pow2(-6) + pow2(-12)) / int(2);
        assert_eq!(t.rows[1].computed, format_rational(&want));
        assert_eq!(t.rows[1].closed_form, format_rational(&want));

        for p in 1..=4 {
            let t = convergence_table(&default_schedule(), 4, p, 3).unwrap();
            let last = t.rows.last().unwrap();
            assert_eq!(last.computed, format_rational(&(pow2(-4 * (5 - i64::from(p))) / int(2))));
        }
    }

    #[test]
    fn convergence_identity_all_m() {
        for p in 1..=3u32 {
            for depth in 1..=6u32 {
                let t = convergence_table(&default_schedule(), depth, p, depth - 1).unwrap();
                assert!(t.passed(), "p={p} N={depth}");
                for row in &t.rows {
                    let want: Rational = (row.m + 1..=depth).map(|n| series(i64::from(n), i64::from(p))).sum();
                    assert_eq!(row.computed, format_rational(&want));
                }
            }
        }
    }

    #[test]
    fn convergence_range_errors() {
        let s = default_schedule();
        assert!(matches!(convergence_table(&s, 3, 0, 1), Err(PastingError::InvalidRange(_))));
        assert!(matches!(convergence_table(&s, 3, 1, 3), Err(PastingError::InvalidRange(_))));
    }

    #[test]
    fn tail_enclosure_contains_long_partial_sum() {
        for p in 1..=6u32 {
            for depth in 1..=5u32 {
                let (lo, hi) = standard_tail_enclosure(depth, p);
                let long: Rational = (depth + 1..=depth + 30).map(|n| series(i64::from(n), i64::from(p))).sum();
                assert!(lo <= long && long <= hi, "p={p} N={depth}");
            }
        }
    }

    #[test]
    fn partial_decompositions_reconstruct() {
        let model = paste(&default_schedule(), 3).unwrap();
        for m in 0..=3 {
            let (h, claim) = g_partial_decomposition(&model, m).unwrap();
            let g = &stochastic_integral(&h, &model.price).unwrap() + &claim.evaluate(&model.price).unwrap();
            assert_eq!(g, model.g_partials[m as usize]);
            if m == 0 {
                assert_eq!(h, PredictableStrategy::zero(&model.space));
                assert!(claim.payoffs().values().all(Zero::is_zero));
            }
        }
        assert_eq!(model.g_partials[3], model.g_full);
        assert!(matches!(g_partial_decomposition(&model, 4), Err(PastingError::IndexOutOfRange { .. })));

        let m2 = paste(&default_schedule(), 2).unwrap();
        let (_, claim) = g_partial_decomposition(&m2, 1).unwrap();
        let mut support: Vec<Rational> =
            claim.payoffs().iter().filter(|(_, v)| !v.is_zero()).map(|(k, _)| k.clone()).collect();
        support.sort();
        let (a, b) = (rat(9, 4), rat(11, 4));
        assert_eq!(support, vec![-b.clone(), -a.clone(), a, b]);
        let (su, sv) = partial_sup_norms(&m2, 2).unwrap();
        assert_eq!((su, sv), (int(2), int(2)));
    }

    #[test]
    fn divergence_small_depths() {
        let report = divergence_check(&default_schedule(), 3).unwrap();
        assert!(report.passed());
        assert_eq!(report.global_costs[0], &report.block_costs[0] / int(2));
        for w in report.global_costs.windows(2) {
            assert!(&w[1] - &w[0] >= rat(1, 24));
        }
    }

    #[test]
    fn json_round_trip() {
        let model = paste(&default_schedule(), 2).unwrap();
        let text = serde_json::to_string(&model.to_json()).unwrap();
        let doc: PastedJson = serde_json::from_str(&text).unwrap();
        assert_eq!(PastedModel::from_json(&doc).unwrap(), model);
        let mut bad = doc;
        bad.g_full[0] = "7/1".into();
        assert!(matches!(PastedModel::from_json(&bad), Err(PastingError::ModelMismatch(_))));
    }
}
