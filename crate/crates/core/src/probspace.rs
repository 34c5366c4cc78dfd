//! Finite filtered probability spaces with exact rational probabilities.
//!
//! A filtration is stored as one partition of the atom set per time index.
//! On a finite sample space this is equivalent to an increasing family of
//! sigma-algebras, and conditional expectations reduce to weighted averages
//! over partition cells.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;
use std::sync::Arc;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::{format_rational, parse_rational, ParseRationalError, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProbError {
    #[error("a space needs at least one atom")]
    EmptySpace,
    #[error("{atoms} atoms but {probs} probabilities")]
    LengthMismatch { atoms: usize, probs: usize },
    #[error("duplicate atom label {0}")]
    DuplicateAtom(String),
    #[error("unknown atom label {0}")]
    UnknownAtom(String),
    #[error("probability of atom {atom} is {value}, must be positive")]
    NonPositiveProbability { atom: String, value: String },
    #[error("probabilities sum to {0}, not 1")]
    ProbabilitySumNotOne(String),
    #[error("filtration must contain at least one partition")]
    EmptyFiltration,
    #[error("partition at t={t} is invalid: {reason}")]
    InvalidPartition { t: usize, reason: String },
    #[error("partition at t={t} does not refine the partition at t={}", t - 1)]
    PartitionNotRefining { t: usize },
    #[error("final partition must separate every atom")]
    FinalPartitionNotDiscrete,
    #[error("time {t} outside filtration range 0..={horizon}")]
    TimeOutOfRange { t: usize, horizon: usize },
    #[error("random variables live on different spaces")]
    SpaceMismatch,
    #[error("expected {expected} values, got {got}")]
    WrongValueCount { expected: usize, got: usize },
    #[error("moment order must be at least 1")]
    InvalidMomentOrder,
    #[error(transparent)]
    Rational(#[from] ParseRationalError),
    #[error("malformed JSON: {0}")]
    Json(String),
}

/// Structured atom label.
///
/// Atoms produced by the block constructions carry their block index and
/// the outcome of the three coin flips, so events such as `{S_1 = 1}` can
/// be selected by predicate instead of by position.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AtomLabel {
    Block {
        block: u32,
        s1_up: bool,
        x: bool,
        s2_up: bool,
    },
    /// The residual atom of a truncated pasting.
    Residual,
    Named(String),
}

impl AtomLabel {
    pub fn block(block: u32, s1_up: bool, x: bool, s2_up: bool) -> Self {
        AtomLabel::Block { block, s1_up, x, s2_up }
    }

    pub fn block_index(&self) -> Option<u32> {
        match self {
            AtomLabel::Block { block, .. } => Some(*block),
            _ => None,
        }
    }
}

impl fmt::Display for AtomLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = |up: bool| if up { '+' } else { '-' };
        match self {
            AtomLabel::Block { block, s1_up, x, s2_up } => {
                write!(f, "b{block}:{}:{}:{}", sign(*s1_up), u8::from(*x), sign(*s2_up))
            }
            AtomLabel::Residual => f.write_str("residual"),
            AtomLabel::Named(name) => f.write_str(name),
        }
    }
}

fn parse_block_label(text: &str) -> Option<AtomLabel> {
    let rest = text.strip_prefix('b')?;
    let mut parts = rest.split(':');
    let index = parts.next()?;
    // Only the canonical spelling maps to a block label; anything else stays
    // a named label so that text -> label -> text is the identity.
    if index.is_empty() || !index.bytes().all(|b| b.is_ascii_digit()) || (index.len() > 1 && index.starts_with('0')) {
        return None;
    }
    let block: u32 = index.parse().ok()?;
    let sign = |s: &str| match s {
        "+" => Some(true),
        "-" => Some(false),
        _ => None,
    };
    let s1_up = sign(parts.next()?)?;
    let x = match parts.next()? {
        "0" => false,
        "1" => true,
        _ => return None,
    };
    let s2_up = sign(parts.next()?)?;
    if parts.next().is_some() {
        return None;
    }
    Some(AtomLabel::Block { block, s1_up, x, s2_up })
}

impl FromStr for AtomLabel {
    type Err = ProbError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        if text.is_empty() {
            return Err(ProbError::UnknownAtom(String::new()));
        }
        if text == "residual" {
            return Ok(AtomLabel::Residual);
        }
        Ok(parse_block_label(text).unwrap_or_else(|| AtomLabel::Named(text.to_owned())))
    }
}

/// A set of atoms, stored as sorted indices into its space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Event {
    atoms: Vec<usize>,
}

impl Event {
    pub fn from_indices(indices: impl IntoIterator<Item = usize>) -> Self {
        let mut atoms: Vec<usize> = indices.into_iter().collect();
        atoms.sort_unstable();
        atoms.dedup();
        Event { atoms }
    }

    pub fn empty() -> Self {
        Event::default()
    }

    pub fn contains(&self, atom: usize) -> bool {
        self.atoms.binary_search(&atom).is_ok()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.atoms.iter().copied()
    }

    pub fn indices(&self) -> &[usize] {
        &self.atoms
    }

    pub fn union(&self, other: &Event) -> Event {
        Event::from_indices(self.iter().chain(other.iter()))
    }

    pub fn intersection(&self, other: &Event) -> Event {
        Event::from_indices(self.iter().filter(|&i| other.contains(i)))
    }

    pub fn difference(&self, other: &Event) -> Event {
        Event::from_indices(self.iter().filter(|&i| !other.contains(i)))
    }

    pub fn is_subset(&self, other: &Event) -> bool {
        self.iter().all(|i| other.contains(i))
    }
}

/// A partition of `0..n` into non-empty cells.
///
/// Cells are kept in canonical order: atoms sorted inside each cell, cells
/// sorted by their smallest atom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    cells: Vec<Vec<usize>>,
    cell_of: Vec<usize>,
}

impl Partition {
    fn new(n_atoms: usize, cells: Vec<Vec<usize>>) -> Result<Self, String> {
        let mut cells: Vec<Vec<usize>> = cells
            .into_iter()
            .map(|mut c| {
                c.sort_unstable();
                c
            })
            .collect();
        if cells.iter().any(Vec::is_empty) {
            return Err("empty cell".into());
        }
        cells.sort_unstable_by_key(|c| c[0]);
        let mut cell_of = vec![usize::MAX; n_atoms];
        for (k, cell) in cells.iter().enumerate() {
            for &atom in cell {
                if atom >= n_atoms {
                    return Err(format!("atom index {atom} out of range"));
                }
                if cell_of[atom] != usize::MAX {
                    return Err(format!("atom index {atom} appears twice"));
                }
                cell_of[atom] = k;
            }
        }
        if let Some(missing) = cell_of.iter().position(|&k| k == usize::MAX) {
            return Err(format!("atom index {missing} not covered"));
        }
        Ok(Partition { cells, cell_of })
    }

    pub fn trivial(n_atoms: usize) -> Self {
        Partition { cells: vec![(0..n_atoms).collect()], cell_of: vec![0; n_atoms] }
    }

    pub fn discrete(n_atoms: usize) -> Self {
        Partition { cells: (0..n_atoms).map(|i| vec![i]).collect(), cell_of: (0..n_atoms).collect() }
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn cell_of(&self, atom: usize) -> usize {
        self.cell_of[atom]
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// True if every cell of `self` lies inside a single cell of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        self.cells.iter().all(|cell| {
            let k = coarser.cell_of[cell[0]];
            cell.iter().all(|&a| coarser.cell_of[a] == k)
        })
    }

    pub fn is_discrete(&self) -> bool {
        self.cells.len() == self.cell_of.len()
    }
}

/// Finite sample space with exact probabilities and a partition filtration
/// indexed by `t = 0..=horizon`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteFilteredSpace {
    atoms: Vec<AtomLabel>,
    probs: Vec<Rational>,
    filtration: Vec<Partition>,
    index: HashMap<AtomLabel, usize>,
}

impl FiniteFilteredSpace {
    /// Validates and builds a space from labelled atoms and partitions given
    /// as lists of atom-label lists.
    pub fn new(
        atoms: Vec<AtomLabel>,
        probs: Vec<Rational>,
        partitions: Vec<Vec<Vec<AtomLabel>>>,
    ) -> Result<Arc<Self>, ProbError> {
        let index = build_index(&atoms)?;
        let lookup =
            |label: &AtomLabel| index.get(label).copied().ok_or_else(|| ProbError::UnknownAtom(label.to_string()));
        let partitions = partitions
            .iter()
            .map(|cells| {
                cells
                    .iter()
                    .map(|cell| cell.iter().map(lookup).collect::<Result<Vec<_>, _>>())
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_index_cells(atoms, probs, partitions)
    }

    /// As [`FiniteFilteredSpace::new`] with partition cells given as atom
    /// indices.
    pub fn from_index_cells(
        atoms: Vec<AtomLabel>,
        probs: Vec<Rational>,
        partitions: Vec<Vec<Vec<usize>>>,
    ) -> Result<Arc<Self>, ProbError> {
        let index = build_index(&atoms)?;
        if atoms.len() != probs.len() {
            return Err(ProbError::LengthMismatch { atoms: atoms.len(), probs: probs.len() });
        }
        for (atom, p) in atoms.iter().zip(&probs) {
            if !p.is_positive() {
                return Err(ProbError::NonPositiveProbability { atom: atom.to_string(), value: format_rational(p) });
            }
        }
        let total: Rational = probs.iter().sum();
        if !total.is_one() {
            return Err(ProbError::ProbabilitySumNotOne(format_rational(&total)));
        }
        if partitions.is_empty() {
            return Err(ProbError::EmptyFiltration);
        }
        let mut filtration: Vec<Partition> = Vec::with_capacity(partitions.len());
        for (t, cells) in partitions.into_iter().enumerate() {
            let partition =
                Partition::new(atoms.len(), cells).map_err(|reason| ProbError::InvalidPartition { t, reason })?;
            if let Some(prev) = filtration.last() {
                if !partition.refines(prev) {
                    return Err(ProbError::PartitionNotRefining { t });
                }
            }
            filtration.push(partition);
        }
        if !filtration.last().is_some_and(Partition::is_discrete) {
            return Err(ProbError::FinalPartitionNotDiscrete);
        }
        Ok(Arc::new(FiniteFilteredSpace { atoms, probs, filtration, index }))
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[AtomLabel] {
        &self.atoms
    }

    pub fn probs(&self) -> &[Rational] {
        &self.probs
    }

    pub fn prob(&self, atom: usize) -> &Rational {
        &self.probs[atom]
    }

    /// Last time index of the filtration.
    pub fn horizon(&self) -> usize {
        self.filtration.len() - 1
    }

    pub fn filtration(&self) -> &[Partition] {
        &self.filtration
    }

    pub fn partition(&self, t: usize) -> Result<&Partition, ProbError> {
        self.filtration.get(t).ok_or(ProbError::TimeOutOfRange { t, horizon: self.horizon() })
    }

    pub fn index_of(&self, label: &AtomLabel) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn event_where(&self, mut pred: impl FnMut(&AtomLabel) -> bool) -> Event {
        Event::from_indices((0..self.len()).filter(|&i| pred(&self.atoms[i])))
    }

    pub fn event_from_labels<'a>(&self, labels: impl IntoIterator<Item = &'a AtomLabel>) -> Result<Event, ProbError> {
        labels
            .into_iter()
            .map(|l| self.index_of(l).ok_or_else(|| ProbError::UnknownAtom(l.to_string())))
            .collect::<Result<Vec<_>, _>>()
            .map(Event::from_indices)
    }

    pub fn full_event(&self) -> Event {
        Event::from_indices(0..self.len())
    }

    /// Exact probability of a set of labelled atoms.
    pub fn event_probability(&self, labels: &[AtomLabel]) -> Result<Rational, ProbError> {
        Ok(self.probability(&self.event_from_labels(labels)?))
    }

    pub fn probability(&self, event: &Event) -> Rational {
        event.iter().map(|i| &self.probs[i]).sum()
    }

    pub fn to_json(&self) -> SpaceJson {
        SpaceJson {
            atoms: self.atoms.iter().map(ToString::to_string).collect(),
            probs: self.probs.iter().map(format_rational).collect(),
            filtration: self
                .filtration
                .iter()
                .map(|p| p.cells().iter().map(|c| c.iter().map(|&i| self.atoms[i].to_string()).collect()).collect())
                .collect(),
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("space JSON serializes")
    }

    pub fn from_json(doc: &SpaceJson) -> Result<Arc<Self>, ProbError> {
        let atoms = doc.atoms.iter().map(|s| s.parse()).collect::<Result<Vec<AtomLabel>, _>>()?;
        let probs = doc.probs.iter().map(|s| parse_rational(s)).collect::<Result<Vec<_>, _>>()?;
        let partitions = doc
            .filtration
            .iter()
            .map(|cells| {
                cells
                    .iter()
                    .map(|cell| cell.iter().map(|s| s.parse()).collect::<Result<Vec<_>, _>>())
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(atoms, probs, partitions)
    }

    pub fn from_json_str(text: &str) -> Result<Arc<Self>, ProbError> {
        let doc: SpaceJson = serde_json::from_str(text).map_err(|e| ProbError::Json(e.to_string()))?;
        Self::from_json(&doc)
    }
}

fn build_index(atoms: &[AtomLabel]) -> Result<HashMap<AtomLabel, usize>, ProbError> {
    if atoms.is_empty() {
        return Err(ProbError::EmptySpace);
    }
    let mut index = HashMap::with_capacity(atoms.len());
    for (i, label) in atoms.iter().enumerate() {
        if index.insert(label.clone(), i).is_some() {
            return Err(ProbError::DuplicateAtom(label.to_string()));
        }
    }
    Ok(index)
}

/// JSON form of a space: labels as strings, probabilities as `"num/den"`,
/// partitions as lists of label lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceJson {
    pub atoms: Vec<String>,
    pub probs: Vec<String>,
    pub filtration: Vec<Vec<Vec<String>>>,
}

/// Exact rational value on every atom of a space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomVariable {
    space: Arc<FiniteFilteredSpace>,
    values: Vec<Rational>,
}

pub(crate) fn same_space(a: &Arc<FiniteFilteredSpace>, b: &Arc<FiniteFilteredSpace>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

impl RandomVariable {
    pub fn new(space: Arc<FiniteFilteredSpace>, values: Vec<Rational>) -> Result<Self, ProbError> {
        if values.len() != space.len() {
            return Err(ProbError::WrongValueCount { expected: space.len(), got: values.len() });
        }
        Ok(RandomVariable { space, values })
    }

    pub fn from_fn(space: &Arc<FiniteFilteredSpace>, mut value: impl FnMut(usize, &AtomLabel) -> Rational) -> Self {
        let values = space.atoms().iter().enumerate().map(|(i, l)| value(i, l)).collect();
        RandomVariable { space: Arc::clone(space), values }
    }

    pub fn constant(space: &Arc<FiniteFilteredSpace>, c: Rational) -> Self {
        RandomVariable { space: Arc::clone(space), values: vec![c; space.len()] }
    }

    pub fn zero(space: &Arc<FiniteFilteredSpace>) -> Self {
        Self::constant(space, Rational::zero())
    }

    pub fn indicator(space: &Arc<FiniteFilteredSpace>, event: &Event) -> Self {
        Self::from_fn(space, |i, _| if event.contains(i) { Rational::one() } else { Rational::zero() })
    }

    pub fn space(&self) -> &Arc<FiniteFilteredSpace> {
        &self.space
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    pub fn value(&self, atom: usize) -> &Rational {
        &self.values[atom]
    }

    pub fn get(&self, label: &AtomLabel) -> Option<&Rational> {
        self.space.index_of(label).map(|i| &self.values[i])
    }

    pub fn map(&self, mut f: impl FnMut(&Rational) -> Rational) -> Self {
        RandomVariable { space: Arc::clone(&self.space), values: self.values.iter().map(&mut f).collect() }
    }

    pub fn try_zip_with(
        &self,
        other: &RandomVariable,
        mut f: impl FnMut(&Rational, &Rational) -> Rational,
    ) -> Result<Self, ProbError> {
        if !same_space(&self.space, &other.space) {
            return Err(ProbError::SpaceMismatch);
        }
        Ok(RandomVariable {
            space: Arc::clone(&self.space),
            values: self.values.iter().zip(&other.values).map(|(a, b)| f(a, b)).collect(),
        })
    }

    pub fn scale(&self, factor: &Rational) -> Self {
        self.map(|v| v * factor)
    }

    pub fn abs(&self) -> Self {
        self.map(|v| v.abs())
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|v| !v.is_negative())
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(Zero::is_zero)
    }

    pub fn sup_abs(&self) -> Rational {
        self.values.iter().map(|v| v.abs()).max().unwrap_or_else(Rational::zero)
    }

    /// Signed expectation `E[X]`.
    pub fn expectation(&self) -> Rational {
        self.values.iter().zip(self.space.probs()).map(|(v, p)| v * p).sum()
    }

    /// `E[|X|^p]` for an integer order `p >= 1`.
    pub fn moment(&self, p: u32) -> Result<Rational, ProbError> {
        if p == 0 {
            return Err(ProbError::InvalidMomentOrder);
        }
        Ok(self
            .values
            .iter()
            .zip(self.space.probs())
            .map(|(v, prob)| num_traits::pow::pow(v.abs(), p as usize) * prob)
            .sum())
    }

    /// `E[X | F_t]`, constant on each cell of the time-`t` partition.
    pub fn cond_expectation(&self, t: usize) -> Result<Self, ProbError> {
        let partition = self.space.partition(t)?;
        let mut values = vec![Rational::zero(); self.space.len()];
        for cell in partition.cells() {
            let mass: Rational = cell.iter().map(|&i| self.space.prob(i)).sum();
            let weighted: Rational = cell.iter().map(|&i| self.space.prob(i) * &self.values[i]).sum();
            let avg = weighted / mass;
            for &i in cell {
                values[i] = avg.clone();
            }
        }
        Ok(RandomVariable { space: Arc::clone(&self.space), values })
    }

    /// `E[X | event]`, or `None` for a null event.
    pub fn conditional_mean(&self, event: &Event) -> Option<Rational> {
        let mass = self.space.probability(event);
        if mass.is_zero() {
            return None;
        }
        let weighted: Rational = event.iter().map(|i| self.space.prob(i) * &self.values[i]).sum();
        Some(weighted / mass)
    }

    /// True if the variable is constant on every cell of the time-`t`
    /// partition.
    pub fn is_measurable(&self, t: usize) -> Result<bool, ProbError> {
        let partition = self.space.partition(t)?;
        Ok(self.is_constant_on(partition.cells()))
    }

    pub fn is_constant_on(&self, cells: &[Vec<usize>]) -> bool {
        cells.iter().all(|cell| cell.iter().all(|&i| self.values[i] == self.values[cell[0]]))
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.values.iter().map(format_rational).collect()
    }
}

fn combine(a: &RandomVariable, b: &RandomVariable, f: impl FnMut(&Rational, &Rational) -> Rational) -> RandomVariable {
    a.try_zip_with(b, f).expect("arithmetic on random variables from different spaces")
}

/// # Panics
/// If the operands live on different spaces. Use
/// [`RandomVariable::try_zip_with`] for a fallible version.
impl Add for &RandomVariable {
    type Output = RandomVariable;
    fn add(self, rhs: &RandomVariable) -> RandomVariable {
        combine(self, rhs, |a, b| a + b)
    }
}

impl Sub for &RandomVariable {
    type Output = RandomVariable;
    fn sub(self, rhs: &RandomVariable) -> RandomVariable {
        combine(self, rhs, |a, b| a - b)
    }
}

impl Mul for &RandomVariable {
    type Output = RandomVariable;
    fn mul(self, rhs: &RandomVariable) -> RandomVariable {
        combine(self, rhs, |a, b| a * b)
    }
}

impl Neg for &RandomVariable {
    type Output = RandomVariable;
    fn neg(self) -> RandomVariable {
        self.map(|v| -v.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};
    use proptest::prelude::*;

    fn named(s: &str) -> AtomLabel {
        AtomLabel::Named(s.into())
    }

    fn two_step_space() -> Arc<FiniteFilteredSpace> {
        // Four atoms: two coin flips, revealed one at a time.
        let atoms: Vec<AtomLabel> = ["uu", "ud", "du", "dd"].into_iter().map(named).collect();
        let probs = vec![rat(1, 6), rat(1, 3), rat(1, 8), rat(3, 8)];
        FiniteFilteredSpace::from_index_cells(
            atoms,
            probs,
            vec![vec![vec![0, 1, 2, 3]], vec![vec![0, 1], vec![2, 3]], vec![vec![0], vec![1], vec![2], vec![3]]],
        )
        .unwrap()
    }

    #[test]
    fn one_point_space_is_valid() {
        let space = FiniteFilteredSpace::new(vec![named("w")], vec![int(1)], vec![vec![vec![named("w")]]]).unwrap();
        assert_eq!(space.horizon(), 0);
        assert_eq!(space.event_probability(&[named("w")]).unwrap(), int(1));
    }

    #[test]
    fn rejects_probabilities_not_summing_to_one() {
        let err = FiniteFilteredSpace::from_index_cells(
            vec![named("a"), named("b")],
            vec![rat(1, 2), rat(1, 3)],
            vec![vec![vec![0], vec![1]]],
        )
        .unwrap_err();
        assert_eq!(err, ProbError::ProbabilitySumNotOne("5/6".into()));
    }

    #[test]
    fn rejects_non_positive_probability() {
        let err = FiniteFilteredSpace::from_index_cells(
            vec![named("a"), named("b")],
            vec![int(1), int(0)],
            vec![vec![vec![0], vec![1]]],
        )
        .unwrap_err();
        assert!(matches!(err, ProbError::NonPositiveProbability { .. }));
    }

    #[test]
    fn rejects_non_refining_filtration() {
        let err = FiniteFilteredSpace::from_index_cells(
            vec![named("a"), named("b"), named("c")],
            vec![rat(1, 3), rat(1, 3), rat(1, 3)],
            vec![vec![vec![0, 1], vec![2]], vec![vec![0], vec![1, 2]], vec![vec![0], vec![1], vec![2]]],
        )
        .unwrap_err();
        assert_eq!(err, ProbError::PartitionNotRefining { t: 1 });
    }

    #[test]
    fn rejects_coarse_final_partition_and_bad_cells() {
        let atoms = vec![named("a"), named("b")];
        let probs = vec![rat(1, 2), rat(1, 2)];
        let err =
            FiniteFilteredSpace::from_index_cells(atoms.clone(), probs.clone(), vec![vec![vec![0, 1]]]).unwrap_err();
        assert_eq!(err, ProbError::FinalPartitionNotDiscrete);
        let err = FiniteFilteredSpace::from_index_cells(atoms.clone(), probs.clone(), vec![vec![vec![0]]]).unwrap_err();
        assert!(matches!(err, ProbError::InvalidPartition { t: 0, .. }));
        let err = FiniteFilteredSpace::new(atoms, probs, vec![vec![vec![named("a")], vec![named("z")]]]).unwrap_err();
        assert_eq!(err, ProbError::UnknownAtom("z".into()));
    }

    #[test]
    fn conditional_expectation_of_constant_is_constant() {
        let space = two_step_space();
        let c = RandomVariable::constant(&space, rat(7, 3));
        for t in 0..=2 {
            assert_eq!(c.cond_expectation(t).unwrap(), c);
        }
        assert_eq!(c.cond_expectation(3).unwrap_err(), ProbError::TimeOutOfRange { t: 3, horizon: 2 });
    }

    #[test]
    fn conditional_expectation_averages_cells() {
        let space = two_step_space();
        let x = RandomVariable::new(space, vec![int(1), int(4), int(0), int(8)]).unwrap();
        let e1 = x.cond_expectation(1).unwrap();
        // (1/6 * 1 + 1/3 * 4) / (1/2) = 3 ; (3/8 * 8) / (1/2) = 6
        assert_eq!(e1.values(), &[int(3), int(3), int(6), int(6)]);
        assert_eq!(x.cond_expectation(0).unwrap().value(0), &rat(9, 2));
        assert!(e1.is_measurable(1).unwrap());
        assert!(!x.is_measurable(1).unwrap());
    }

    #[test]
    fn moments_and_event_probabilities() {
        let space = two_step_space();
        let x = RandomVariable::new(Arc::clone(&space), vec![int(-2), int(0), int(0), int(0)]).unwrap();
        assert_eq!(x.moment(1).unwrap(), rat(1, 3));
        assert_eq!(x.moment(3).unwrap(), rat(4, 3));
        assert_eq!(x.moment(0).unwrap_err(), ProbError::InvalidMomentOrder);
        assert_eq!(RandomVariable::zero(&space).moment(5).unwrap(), int(0));
        assert_eq!(space.event_probability(&[]).unwrap(), int(0));
        assert_eq!(space.probability(&space.full_event()), int(1));
        assert!(matches!(space.event_probability(&[named("zz")]), Err(ProbError::UnknownAtom(_))));
    }

    #[test]
    fn labels_round_trip_through_text() {
        let label = AtomLabel::block(12, true, false, false);
        assert_eq!(label.to_string(), "b12:+:0:-");
        assert_eq!("b12:+:0:-".parse::<AtomLabel>().unwrap(), label);
        assert_eq!("residual".parse::<AtomLabel>().unwrap(), AtomLabel::Residual);
        // Non-canonical block spellings stay named.
        assert_eq!("b012:+:0:-".parse::<AtomLabel>().unwrap(), named("b012:+:0:-"));
        assert!("".parse::<AtomLabel>().is_err());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let space = two_step_space();
        let text = space.to_json_string();
        let back = FiniteFilteredSpace::from_json_str(&text).unwrap();
        assert_eq!(*back, *space);
        assert_eq!(back.to_json_string(), text);
    }

    fn arb_rv(space: Arc<FiniteFilteredSpace>) -> impl Strategy<Value = RandomVariable> {
        proptest::collection::vec((-50i64..50, 1i64..9), space.len()).prop_map(move |v| {
            RandomVariable::new(Arc::clone(&space), v.into_iter().map(|(n, d)| rat(n, d)).collect()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn tower_property(x in arb_rv(two_step_space())) {
            for t in 0..=2 {
                for s in 0..=t {
                    let lhs = x.cond_expectation(t).unwrap().cond_expectation(s).unwrap();
                    prop_assert_eq!(lhs, x.cond_expectation(s).unwrap());
                }
            }
        }

        #[test]
        fn conditional_expectation_is_linear(
            x in arb_rv(two_step_space()),
            y in arb_rv(two_step_space()),
            n in -20i64..20,
            d in 1i64..7,
        ) {
            let alpha = rat(n, d);
            for t in 0..=2 {
                let lhs = (&x.scale(&alpha) + &y).cond_expectation(t).unwrap();
                let rhs = &x.cond_expectation(t).unwrap().scale(&alpha) + &y.cond_expectation(t).unwrap();
                prop_assert_eq!(lhs, rhs);
            }
        }

        #[test]
        fn first_moment_of_nonnegative_is_expectation(x in arb_rv(two_step_space())) {
            let y = x.abs();
            prop_assert_eq!(y.moment(1).unwrap(), y.expectation());
        }
    }
}
