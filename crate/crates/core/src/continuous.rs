//! The Brownian version of the block, checked by Monte Carlo.
//!
//! A Brownian motion `W` runs until `sigma`, its first exit from `(-1, 1)`.
//! At `sigma` a Bernoulli(`eps`) bit `X` is revealed, and the price is `W`
//! stopped at `T`, the first time after `sigma` that `|W|` reaches `a` on
//! `A~ = {W_sigma = 1} u {X = 1}` and `b` off it. Only
//! `(S_sigma, X, S_T)` matters for every identity checked here, and its law
//! is that of the discrete block's `(S_1, X, S_2)`.
//!
//! Two samplers are provided: [`sample_outcome`] draws the three values
//! from their exact law, [`simulate_path`] walks a symmetric random walk on
//! a spatial grid containing `1`, `a`, `b`, whose hitting probabilities
//! coincide with the Brownian ones.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::blocks::BlockParams;
use crate::rational::{self, denominator_lcm, format_rational, Rational};

/// Smallest sample count accepted by [`mc_verify`].
pub const MIN_SAMPLES: u64 = 10_000;
/// Number of independent sub-streams the samples are split across.
pub const STREAMS: u64 = 64;
/// Point estimates must land within this many standard errors.
pub const SE_TOLERANCE: f64 = 4.0;
/// Significance level of the goodness-of-fit test.
pub const FIT_SIGNIFICANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ContinuousError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("start {start} is not inside (-{level}, {level})")]
    StartOutsideInterval { start: f64, level: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("{got} samples requested, at least {min} needed")]
    InsufficientSamples { got: u64, min: u64 },
}

/// Block parameters for the Brownian block. Values are kept as exact
/// rationals (decimal input converts exactly) so that the path grid can be
/// checked exactly; samplers use their `f64` images.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuousBlockParams {
    pub exact: BlockParams,
    pub epsilon: f64,
    pub m: f64,
    pub a: f64,
    pub b: f64,
}

impl ContinuousBlockParams {
    pub fn new(exact: BlockParams) -> Result<Self, ContinuousError> {
        exact.validate().map_err(|e| ContinuousError::InvalidParams(e.to_string()))?;
        Ok(ContinuousBlockParams {
            epsilon: rational::to_f64(&exact.epsilon),
            m: rational::to_f64(&exact.m),
            a: rational::to_f64(&exact.a),
            b: rational::to_f64(&exact.b),
            exact,
        })
    }

    pub fn from_f64(epsilon: f64, m: f64, a: f64, b: f64) -> Result<Self, ContinuousError> {
        let conv = |name: &str, v: f64| {
            rational::from_f64(v).ok_or_else(|| ContinuousError::InvalidParams(format!("{name} = {v} is not finite")))
        };
        let exact =
            BlockParams { epsilon: conv("epsilon", epsilon)?, m: conv("M", m)?, a: conv("a", a)?, b: conv("b", b)? };
        Self::new(exact)
    }

    fn level(&self, in_a_tilde: bool) -> f64 {
        if in_a_tilde {
            self.a
        } else {
            self.b
        }
    }

    /// Default time step: the square of the spatial step
    /// `1 / (4 lcm(den a, den b))`.
    pub fn default_grid_step(&self) -> Rational {
        let den = denominator_lcm([&self.exact.a, &self.exact.b]) * BigInt::from(4);
        Rational::new(BigInt::one(), &den * &den)
    }
}

/// The values of one run at `sigma` and `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutcomeSample {
    /// `+1` or `-1`.
    pub s_sigma: i8,
    pub x: bool,
    pub in_a_tilde: bool,
    pub s_t: f64,
    pub f: f64,
}

impl OutcomeSample {
    fn new(params: &ContinuousBlockParams, s_up: bool, x: bool, t_up: bool) -> Self {
        let in_a_tilde = s_up || x;
        let level = params.level(in_a_tilde);
        OutcomeSample {
            s_sigma: if s_up { 1 } else { -1 },
            x,
            in_a_tilde,
            s_t: if t_up { level } else { -level },
            f: if x && !s_up { params.m } else { 0.0 },
        }
    }

    /// Index among the eight `(S_sigma, X, S_T)` cells, in the atom order of
    /// the discrete block.
    pub fn cell(&self) -> usize {
        cell_index(self.s_sigma > 0, self.x, self.s_t > 0.0)
    }
}

fn cell_index(s_up: bool, x: bool, t_up: bool) -> usize {
    usize::from(!s_up) * 4 + usize::from(x) * 2 + usize::from(!t_up)
}

/// `(S_sigma > 0, X, S_T > 0)` for a cell index in `0..8`.
pub fn cell_parts(cell: usize) -> (bool, bool, bool) {
    (cell & 4 == 0, cell & 2 != 0, cell & 1 == 0)
}

/// Probability that a driftless continuous martingale started at `start`
/// reaches `+level` before `-level`.
pub fn hitting_prob(start: f64, level: f64) -> Result<f64, ContinuousError> {
    if !(level > 0.0 && start.abs() < level) {
        return Err(ContinuousError::StartOutsideInterval { start, level });
    }
    Ok((level + start) / (2.0 * level))
}

/// Draws `(S_sigma, X, S_T)` from its exact law.
pub fn sample_outcome(params: &ContinuousBlockParams, rng: &mut impl Rng) -> OutcomeSample {
    let s_up = rng.random_bool(0.5);
    let x = rng.random_bool(params.epsilon);
    let level = params.level(s_up || x);
    let start = if s_up { 1.0 } else { -1.0 };
    let t_up = rng.random_bool(hitting_prob(start, level).expect("|S_sigma| = 1 < 2 <= level"));
    OutcomeSample::new(params, s_up, x, t_up)
}

/// Spatial grid of a path simulation, in integer units of `sqrt(grid_step)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGrid {
    pub grid_step: Rational,
    pub spatial_step: Rational,
    pub unit: i64,
    pub level_a: i64,
    pub level_b: i64,
}

impl PathGrid {
    /// Accepts a time step whose square root puts `1`, `a` and `b` on the
    /// spatial grid.
    pub fn new(params: &ContinuousBlockParams, grid_step: &Rational) -> Result<Self, ContinuousError> {
        let mismatch = |msg: String| ContinuousError::GridMismatch(msg);
        if !grid_step.is_positive() {
            return Err(mismatch(format!("grid step {} must be positive", format_rational(grid_step))));
        }
        let exact_sqrt = |v: &BigInt| {
            let r = v.sqrt();
            (&r * &r == *v).then_some(r)
        };
        let (Some(num), Some(den)) = (exact_sqrt(grid_step.numer()), exact_sqrt(grid_step.denom())) else {
            return Err(mismatch(format!(
                "grid step {} is not the square of a rational spatial step",
                format_rational(grid_step)
            )));
        };
        let spatial_step = Rational::new(num, den);
        let units = |name: &str, level: &Rational| -> Result<i64, ContinuousError> {
            let q = level / &spatial_step;
            if !q.is_integer() {
                return Err(mismatch(format!(
                    "{name} = {} is not a multiple of the spatial step {}",
                    format_rational(level),
                    format_rational(&spatial_step)
                )));
            }
            q.to_integer()
                .to_i64()
                .filter(|&u| u <= 1 << 20)
                .ok_or_else(|| mismatch(format!("{name} needs too many grid points")))
        };
        Ok(PathGrid {
            unit: units("1", &Rational::one())?,
            level_a: units("a", &params.exact.a)?,
            level_b: units("b", &params.exact.b)?,
            grid_step: grid_step.clone(),
            spatial_step,
        })
    }
}

/// One simulated path on the integer grid; `path[k]` is the position after
/// `k` steps, in units of the spatial step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSample {
    pub grid_step: f64,
    pub spatial_step: f64,
    pub path: Vec<i64>,
    pub sigma_index: usize,
    pub t_index: usize,
    pub outcome: OutcomeSample,
}

/// Fair +-1 steps drawn 64 at a time from the generator.
struct CoinBits<'a, R: RngCore> {
    rng: &'a mut R,
    bits: u64,
    left: u32,
}

impl<'a, R: RngCore> CoinBits<'a, R> {
    fn new(rng: &'a mut R) -> Self {
        CoinBits { rng, bits: 0, left: 0 }
    }

    fn step(&mut self) -> i64 {
        if self.left == 0 {
            self.bits = self.rng.next_u64();
            self.left = 64;
        }
        let up = self.bits & 1 == 1;
        self.bits >>= 1;
        self.left -= 1;
        if up {
            1
        } else {
            -1
        }
    }
}

/// Walks until `|pos| = 1`, reveals `X`, then walks until `|pos|` hits the
/// level selected by `A~`. `record` sees every position.
fn walk(
    params: &ContinuousBlockParams,
    grid: &PathGrid,
    rng: &mut impl RngCore,
    mut record: impl FnMut(i64),
) -> (usize, usize, OutcomeSample) {
    let mut pos = 0i64;
    let mut steps = 0usize;
    record(pos);
    {
        let mut coins = CoinBits::new(rng);
        while pos.abs() < grid.unit {
            pos += coins.step();
            steps += 1;
            record(pos);
        }
    }
    let sigma_index = steps;
    let s_up = pos > 0;
    let x = rng.random_bool(params.epsilon);
    let level = if s_up || x { grid.level_a } else { grid.level_b };
    let mut coins = CoinBits::new(rng);
    while pos.abs() < level {
        pos += coins.step();
        steps += 1;
        record(pos);
    }
    (sigma_index, steps, OutcomeSample::new(params, s_up, x, pos > 0))
}

pub fn simulate_path(
    params: &ContinuousBlockParams,
    grid_step: &Rational,
    rng: &mut impl RngCore,
) -> Result<PathSample, ContinuousError> {
    let grid = PathGrid::new(params, grid_step)?;
    let mut path = Vec::new();
    let (sigma_index, t_index, outcome) = walk(params, &grid, rng, |p| path.push(p));
    Ok(PathSample {
        grid_step: rational::to_f64(grid_step),
        spatial_step: rational::to_f64(&grid.spatial_step),
        path,
        sigma_index,
        t_index,
        outcome,
    })
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn stream_sizes(n: u64) -> impl Iterator<Item = (u64, u64)> {
    (0..STREAMS).map(move |k| (k, n / STREAMS + u64::from(k < n % STREAMS)))
}

/// Cell counts of `n` outcomes split over [`STREAMS`] seeded sub-streams.
/// Counts are summed in stream order, so the result depends only on
/// `(seed, n)`.
pub fn outcome_counts(params: &ContinuousBlockParams, n: u64, seed: u64) -> [u64; 8] {
    let per_stream: Vec<[u64; 8]> = stream_sizes(n)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(k, size)| {
            let mut rng = stream_rng(seed, k);
            let mut counts = [0u64; 8];
            for _ in 0..size {
                counts[sample_outcome(params, &mut rng).cell()] += 1;
            }
            counts
        })
        .collect();
    sum_counts(&per_stream)
}

/// As [`outcome_counts`] with outcomes read off simulated paths.
pub fn path_counts(
    params: &ContinuousBlockParams,
    grid_step: &Rational,
    n: u64,
    seed: u64,
) -> Result<[u64; 8], ContinuousError> {
    let grid = PathGrid::new(params, grid_step)?;
    let per_stream: Vec<[u64; 8]> = stream_sizes(n)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(k, size)| {
            // Separate key space from the outcome sampler.
            let mut rng = stream_rng(seed ^ 0x5041_5448, k);
            let mut counts = [0u64; 8];
            for _ in 0..size {
                counts[walk(params, &grid, &mut rng, |_| {}).2.cell()] += 1;
            }
            counts
        })
        .collect();
    Ok(sum_counts(&per_stream))
}

fn sum_counts(parts: &[[u64; 8]]) -> [u64; 8] {
    let mut total = [0u64; 8];
    for part in parts {
        for (t, c) in total.iter_mut().zip(part) {
            *t += c;
        }
    }
    total
}

/// Exact law of `(S_sigma, X, S_T)`, i.e. of the discrete block's atoms.
pub fn exact_law(params: &ContinuousBlockParams) -> [Rational; 8] {
    std::array::from_fn(|c| {
        let (s_up, x, t_up) = cell_parts(c);
        params.exact.atom_probability(s_up, x, t_up)
    })
}

/// A strategy holding `pre` units on `[0, sigma)` and `post[s][x]` units on
/// `[sigma, T]`, where `s = 0` for `S_sigma = 1`, `s = 1` for `S_sigma = -1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestStrategy {
    pub name: String,
    pub pre: f64,
    pub post: [[f64; 2]; 2],
}

impl TestStrategy {
    pub fn new(name: impl Into<String>, pre: f64, post: [[f64; 2]; 2]) -> Self {
        TestStrategy { name: name.into(), pre, post }
    }

    /// Terminal gain `pre S_sigma + post (S_T - S_sigma)`.
    pub fn gain(&self, o: &OutcomeSample) -> f64 {
        let s = f64::from(o.s_sigma);
        self.pre * s + self.post[usize::from(o.s_sigma < 0)][usize::from(o.x)] * (o.s_t - s)
    }

    pub fn post_gain(&self, o: &OutcomeSample) -> f64 {
        let s = f64::from(o.s_sigma);
        self.post[usize::from(o.s_sigma < 0)][usize::from(o.x)] * (o.s_t - s)
    }

    /// Every strategy with `pre` and the four `post` values in
    /// `{-1, 0, 1}`.
    pub fn default_grid() -> Vec<TestStrategy> {
        let vals = [-1.0, 0.0, 1.0];
        let mut out = Vec::with_capacity(243);
        for &pre in &vals {
            for &p00 in &vals {
                for &p01 in &vals {
                    for &p10 in &vals {
                        for &p11 in &vals {
                            out.push(TestStrategy::new(
                                format!("pre={pre};post=[{p00},{p01};{p10},{p11}]"),
                                pre,
                                [[p00, p01], [p10, p11]],
                            ));
                        }
                    }
                }
            }
        }
        out
    }

    /// Holds one unit until `sigma`, then nothing: `E[f u] = -M eps / 2`.
    pub fn hold_until_sigma() -> TestStrategy {
        TestStrategy::new("hold 1 until sigma", 1.0, [[0.0; 2]; 2])
    }
}

/// Mean and standard error of a function of the cell.
fn cell_mean(counts: &[u64; 8], value: impl Fn(usize) -> f64) -> (f64, f64) {
    let n: u64 = counts.iter().sum();
    let nf = n as f64;
    let mean = (0..8).map(|c| counts[c] as f64 * value(c)).sum::<f64>() / nf;
    let var = (0..8).map(|c| counts[c] as f64 * (value(c) - mean).powi(2)).sum::<f64>() / (nf - 1.0).max(1.0);
    (mean, (var / nf).sqrt())
}

/// Proportion of `hit` among `of`, with its binomial standard error.
fn proportion(counts: &[u64; 8], hit: impl Fn(usize) -> bool, of: impl Fn(usize) -> bool) -> (f64, f64, u64) {
    let denom: u64 = (0..8).filter(|&c| of(c)).map(|c| counts[c]).sum();
    let num: u64 = (0..8).filter(|&c| of(c) && hit(c)).map(|c| counts[c]).sum();
    if denom == 0 {
        return (f64::NAN, f64::INFINITY, 0);
    }
    let p = num as f64 / denom as f64;
    (p, (p * (1.0 - p) / denom as f64).sqrt(), denom)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McCheck {
    pub name: String,
    pub identity: String,
    pub estimate: f64,
    pub std_error: f64,
    pub target: f64,
    pub passed: bool,
}

impl McCheck {
    fn two_sided(name: &str, identity: &str, (estimate, se): (f64, f64), target: f64) -> Self {
        let passed = (estimate - target).abs() <= SE_TOLERANCE * se + 1e-12;
        McCheck { name: name.into(), identity: identity.into(), estimate, std_error: se, target, passed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiSquaredFit {
    pub statistic: f64,
    pub degrees_of_freedom: u32,
    pub p_value: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyCheck {
    pub name: String,
    pub identity: &'static str,
    /// `E[f u]` estimate.
    pub e_fu: f64,
    /// `||u||_1` estimate.
    pub u_norm: f64,
    /// Exact `E[f u] - eps M ||u||_1` under the block law.
    pub exact_excess: f64,
    /// Estimate and standard error of `f u - eps M |u|`.
    pub excess: f64,
    pub excess_se: f64,
    pub bound_ok: bool,
    /// Estimate and standard error of `u - Y_sigma`, the gain after `sigma`.
    pub post_sigma_gain: f64,
    pub post_sigma_se: f64,
    pub martingale_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub params: ContinuousBlockParams,
    pub n_samples: u64,
    pub seed: u64,
    pub streams: u64,
    pub counts: [u64; 8],
    pub checks: Vec<McCheck>,
    pub fit: ChiSquaredFit,
    pub strategies: Vec<StrategyCheck>,
}

impl McReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
            && self.fit.passed
            && self.strategies.iter().all(|s| s.bound_ok && s.martingale_ok)
    }
}

/// Runs every Monte Carlo check with `n` exact-law samples.
pub fn mc_verify(
    params: &ContinuousBlockParams,
    n: u64,
    seed: u64,
    strategies: &[TestStrategy],
) -> Result<McReport, ContinuousError> {
    if n < MIN_SAMPLES {
        return Err(ContinuousError::InsufficientSamples { got: n, min: MIN_SAMPLES });
    }
    let counts = outcome_counts(params, n, seed);
    let outcome = |c: usize| {
        let (s_up, x, t_up) = cell_parts(c);
        OutcomeSample::new(params, s_up, x, t_up)
    };
    let (eps, m, a, b) = (params.epsilon, params.m, params.a, params.b);
    let mut checks = Vec::new();

    checks.push(McCheck::two_sided("e_f", "E[f] = M eps / 2", cell_mean(&counts, |c| outcome(c).f), m * eps / 2.0));
    checks.push(McCheck::two_sided(
        "e_f2",
        "E[f^2] = M^2 eps / 2",
        cell_mean(&counts, |c| outcome(c).f.powi(2)),
        m * m * eps / 2.0,
    ));
    for s_up in [true, false] {
        let s = if s_up { 1.0 } else { -1.0 };
        let (p, se, _) =
            proportion(&counts, |c| outcome(c).s_t == a, |c| outcome(c).in_a_tilde && (outcome(c).s_sigma > 0) == s_up);
        checks.push(McCheck::two_sided(
            &format!("p_st_a_given_atilde_s{}", if s_up { "+1" } else { "-1" }),
            "P(S_T = a | A~, S_sigma = s) = (a + s)/(2a)",
            (p, se),
            (a + s) / (2.0 * a),
        ));
    }
    let (p, se, _) = proportion(&counts, |c| outcome(c).s_t == b, |c| !outcome(c).in_a_tilde);
    checks.push(McCheck::two_sided(
        "p_st_b_off_atilde",
        "P(S_T = b | A~^c) = (b - 1)/(2b)",
        (p, se),
        (b - 1.0) / (2.0 * b),
    ));

    let law = exact_law(params);
    let law_f: Vec<f64> = law.iter().map(rational::to_f64).collect();
    let p_level = |level: f64| (0..8).filter(|&c| outcome(c).s_t == level).map(|c| law_f[c]).sum::<f64>();
    let (p, se, _) = proportion(&counts, |c| outcome(c).s_t == a, |_| true);
    checks.push(McCheck::two_sided(
        "p_st_a",
        "P(S_T = a) = (a+1)/(4a) + eps (a-1)/(4a)",
        (p, se),
        (a + 1.0) / (4.0 * a) + eps * (a - 1.0) / (4.0 * a),
    ));
    for level in [a, -a] {
        let (p, se, _) = proportion(&counts, |c| outcome(c).x, |c| outcome(c).s_t == level);
        checks.push(McCheck::two_sided(
            &format!("e_x_given_st_{}a", if level > 0.0 { "+" } else { "-" }),
            "E[X | S_T = +-a] = (eps/2) / P(S_T = +-a)",
            (p, se),
            eps / 2.0 / p_level(level),
        ));
    }
    let f_values_ok = (0..8).all(|c| counts[c] == 0 || outcome(c).f == 0.0 || outcome(c).f == m);
    checks.push(McCheck {
        name: "f_values".into(),
        identity: "f in {0, M} on every sample".into(),
        estimate: 0.0,
        std_error: 0.0,
        target: 0.0,
        passed: f_values_ok,
    });

    let nf = n as f64;
    let statistic: f64 = (0..8)
        .map(|c| {
            let expected = nf * law_f[c];
            (counts[c] as f64 - expected).powi(2) / expected
        })
        .sum();
    let chi = ChiSquared::new(7.0).expect("positive degrees of freedom");
    let p_value = chi.sf(statistic);
    let fit = ChiSquaredFit { statistic, degrees_of_freedom: 7, p_value, passed: p_value >= FIT_SIGNIFICANCE };

    let bound = eps * m;
    let strategies = strategies
        .iter()
        .map(|st| {
            let u = |c: usize| st.gain(&outcome(c));
            let (e_fu, _) = cell_mean(&counts, |c| outcome(c).f * u(c));
            let (u_norm, _) = cell_mean(&counts, |c| u(c).abs());
            let (excess, excess_se) = cell_mean(&counts, |c| outcome(c).f * u(c) - bound * u(c).abs());
            let exact_excess: f64 = (0..8).map(|c| law_f[c] * (outcome(c).f * u(c) - bound * u(c).abs())).sum();
            let (post, post_se) = cell_mean(&counts, |c| st.post_gain(&outcome(c)));
            StrategyCheck {
                name: st.name.clone(),
                identity: "E[f u] <= eps M ||u||_1 and E[Y_T - Y_sigma] = 0",
                e_fu,
                u_norm,
                exact_excess,
                excess,
                excess_se,
                bound_ok: excess <= SE_TOLERANCE * excess_se + 1e-12,
                post_sigma_gain: post,
                post_sigma_se: post_se,
                martingale_ok: post.abs() <= SE_TOLERANCE * post_se + 1e-12,
            }
        })
        .collect();

    Ok(McReport { params: params.clone(), n_samples: n, seed, streams: STREAMS, counts, checks, fit, strategies })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementRow {
    pub identity: &'static str,
    pub terminal: f64,
    pub path_frequency: f64,
    pub outcome_frequency: f64,
    pub std_error: f64,
    pub passed: bool,
}

/// Compares terminal-value frequencies of the path sampler with the exact
/// sampler, two-sample, within [`SE_TOLERANCE`] standard errors.
pub fn path_agreement(
    params: &ContinuousBlockParams,
    grid_step: &Rational,
    n: u64,
    seed: u64,
) -> Result<Vec<AgreementRow>, ContinuousError> {
    let paths = path_counts(params, grid_step, n, seed)?;
    let outcomes = outcome_counts(params, n, seed);
    let terminal = |c: usize| {
        let (s_up, x, t_up) = cell_parts(c);
        OutcomeSample::new(params, s_up, x, t_up).s_t
    };
    let levels = [-params.b, -params.a, params.a, params.b];
    Ok(levels
        .iter()
        .map(|&level| {
            let freq = |counts: &[u64; 8]| proportion(counts, |c| terminal(c) == level, |_| true);
            let (pp, sp, _) = freq(&paths);
            let (po, so, _) = freq(&outcomes);
            let se = (sp * sp + so * so).sqrt();
            AgreementRow {
                identity: "P(S_T = s) from paths = P(S_T = s) from the exact law",
                terminal: level,
                path_frequency: pp,
                outcome_frequency: po,
                std_error: se,
                passed: (pp - po).abs() <= SE_TOLERANCE * se + 1e-12,
            }
        })
        .collect())
}

/// The exact value `E[f u]` for a test strategy, from the discrete law.
pub fn exact_e_fu(params: &ContinuousBlockParams, strategy: &TestStrategy) -> f64 {
    let law = exact_law(params);
    (0..8)
        .map(|c| {
            let (s_up, x, t_up) = cell_parts(c);
            let o = OutcomeSample::new(params, s_up, x, t_up);
            rational::to_f64(&law[c]) * o.f * strategy.gain(&o)
        })
        .sum()
}
