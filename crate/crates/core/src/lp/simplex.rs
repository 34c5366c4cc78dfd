//! Dense two-phase tableau simplex with Bland's rule.

use num_traits::{One, Signed, Zero};

use super::{LinearProgram, LpSolution, LpStatus, Relation, Sense};
use crate::rational::Rational;

/// `x_j = offset + sum(sign * std_column)` for each original column.
struct ColumnMap {
    offset: Rational,
    parts: Vec<(usize, bool)>,
}

struct StandardForm {
    /// Rows of `A x = b` over standard columns, `b >= 0`.
    rows: Vec<Vec<(usize, Rational)>>,
    rhs: Vec<Rational>,
    cost: Vec<Rational>,
    cost_offset: Rational,
    /// Column of the unit vector in each row that starts basic, if any.
    initial_basic: Vec<Option<usize>>,
    /// Sign applied to each original row when normalizing `b >= 0`.
    row_sign: Vec<Rational>,
    n_original_rows: usize,
    columns: Vec<ColumnMap>,
}

fn standardize(lp: &LinearProgram) -> StandardForm {
    let minimize_sign = match lp.sense {
        Sense::Minimize => Rational::one(),
        Sense::Maximize => -Rational::one(),
    };
    let mut cost: Vec<Rational> = Vec::new();
    let mut columns = Vec::with_capacity(lp.num_columns());
    let mut extra_rows: Vec<(usize, Rational)> = Vec::new();
    let mut cost_offset = Rational::zero();
    for (j, b) in lp.bounds.iter().enumerate() {
        let c = &lp.objective[j] * &minimize_sign;
        let map = match (&b.lower, &b.upper) {
            (Some(l), upper) => {
                cost.push(c.clone());
                let k = cost.len() - 1;
                if let Some(u) = upper {
                    extra_rows.push((k, u - l));
                }
                ColumnMap { offset: l.clone(), parts: vec![(k, true)] }
            }
            (None, Some(u)) => {
                cost.push(-c.clone());
                ColumnMap { offset: u.clone(), parts: vec![(cost.len() - 1, false)] }
            }
            (None, None) => {
                cost.push(c.clone());
                cost.push(-c.clone());
                let k = cost.len() - 2;
                ColumnMap { offset: Rational::zero(), parts: vec![(k, true), (k + 1, false)] }
            }
        };
        cost_offset += &c * &map.offset;
        columns.push(map);
    }

    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    let mut relations = Vec::new();
    for row in &lp.rows {
        let mut b = row.rhs.clone();
        let mut std_row: Vec<(usize, Rational)> = Vec::new();
        for (j, a) in &row.terms {
            let map = &columns[*j];
            b -= a * &map.offset;
            for &(k, positive) in &map.parts {
                std_row.push((k, if positive { a.clone() } else { -a.clone() }));
            }
        }
        rows.push(std_row);
        rhs.push(b);
        relations.push(row.relation);
    }
    let n_original_rows = rows.len();
    for (k, width) in extra_rows {
        rows.push(vec![(k, Rational::one())]);
        rhs.push(width);
        relations.push(Relation::Le);
    }

    // Slacks, then sign normalization.
    let mut initial_basic = Vec::with_capacity(rows.len());
    let mut row_sign = Vec::with_capacity(rows.len());
    for i in 0..rows.len() {
        let slack = match relations[i] {
            Relation::Le => Some(Rational::one()),
            Relation::Ge => Some(-Rational::one()),
            Relation::Eq => None,
        };
        let slack_col = slack.map(|s| {
            cost.push(Rational::zero());
            rows[i].push((cost.len() - 1, s.clone()));
            (cost.len() - 1, s)
        });
        let flip =
            rhs[i].is_negative() || (rhs[i].is_zero() && slack_col.as_ref().is_some_and(|(_, s)| s.is_negative()));
        if flip {
            for (_, a) in rows[i].iter_mut() {
                *a = -a.clone();
            }
            rhs[i] = -rhs[i].clone();
        }
        row_sign.push(if flip { -Rational::one() } else { Rational::one() });
        let unit = slack_col.and_then(|(k, s)| {
            let positive = if flip { s.is_negative() } else { s.is_positive() };
            positive.then_some(k)
        });
        initial_basic.push(unit);
    }

    StandardForm { rows, rhs, cost, cost_offset, initial_basic, row_sign, n_original_rows, columns }
}

struct Tableau {
    /// `m` rows of `n + 1` entries; the last entry is the right-hand side.
    a: Vec<Vec<Rational>>,
    /// Reduced costs (`n` entries) followed by minus the objective value.
    obj: Vec<Rational>,
    basis: Vec<usize>,
    n: usize,
    pivots: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let inv = self.a[row][col].recip();
        if !inv.is_one() {
            for v in self.a[row].iter_mut() {
                if !v.is_zero() {
                    *v *= &inv;
                }
            }
        }
        let pivot_row = std::mem::take(&mut self.a[row]);
        let nonzero: Vec<usize> = (0..=self.n).filter(|&k| !pivot_row[k].is_zero()).collect();
        let eliminate = |target: &mut Vec<Rational>| {
            let factor = target[col].clone();
            if factor.is_zero() {
                return;
            }
            for &k in &nonzero {
                target[k] -= &factor * &pivot_row[k];
            }
        };
        for (i, r) in self.a.iter_mut().enumerate() {
            if i != row {
                eliminate(r);
            }
        }
        eliminate(&mut self.obj);
        self.a[row] = pivot_row;
        self.basis[row] = col;
        self.pivots += 1;
    }

    /// Runs Bland's rule over columns `< allowed`.
    fn optimize(&mut self, allowed: usize) -> Outcome {
        loop {
            let Some(col) = (0..allowed).find(|&k| self.obj[k].is_negative()) else {
                return Outcome::Optimal;
            };
            let mut best: Option<(usize, Rational)> = None;
            for (i, r) in self.a.iter().enumerate() {
                if !r[col].is_positive() {
                    continue;
                }
                let ratio = &r[self.n] / &r[col];
                let better = match &best {
                    None => true,
                    Some((bi, br)) => ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]),
                };
                if better {
                    best = Some((i, ratio));
                }
            }
            match best {
                Some((row, _)) => self.pivot(row, col),
                None => return Outcome::Unbounded,
            }
        }
    }

    fn set_objective(&mut self, cost: &[Rational]) {
        let mut obj: Vec<Rational> = cost.to_vec();
        obj.push(Rational::zero());
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = &cost[b];
            if cb.is_zero() {
                continue;
            }
            for (k, v) in self.a[i].iter().enumerate() {
                if !v.is_zero() {
                    obj[k] -= cb * v;
                }
            }
        }
        self.obj = obj;
    }
}

pub(super) fn solve(lp: &LinearProgram) -> LpSolution {
    let sf = standardize(lp);
    let m = sf.rows.len();
    let n_struct = sf.cost.len();

    // Artificial columns for rows without a starting unit column.
    let mut n = n_struct;
    let unit_col: Vec<usize> = sf
        .initial_basic
        .iter()
        .map(|basic| match basic {
            Some(k) => *k,
            None => {
                n += 1;
                n - 1
            }
        })
        .collect();
    let mut a = vec![vec![Rational::zero(); n + 1]; m];
    for i in 0..m {
        for (k, v) in &sf.rows[i] {
            a[i][*k] += v;
        }
        if unit_col[i] >= n_struct {
            a[i][unit_col[i]] = Rational::one();
        }
        a[i][n] = sf.rhs[i].clone();
    }
    let mut t = Tableau { a, obj: Vec::new(), basis: unit_col.clone(), n, pivots: 0 };

    if n > n_struct {
        let phase1: Vec<Rational> =
            (0..n).map(|k| if k >= n_struct { Rational::one() } else { Rational::zero() }).collect();
        t.set_objective(&phase1);
        t.optimize(n);
        if !t.obj[n].is_zero() {
            return LpSolution {
                status: LpStatus::Infeasible,
                primal: Vec::new(),
                duals: Vec::new(),
                objective: None,
                pivots: t.pivots,
            };
        }
        // Drive zero-level artificials out where a structural pivot exists.
        for i in 0..m {
            if t.basis[i] >= n_struct {
                if let Some(k) = (0..n_struct).find(|&k| !t.a[i][k].is_zero()) {
                    t.pivot(i, k);
                }
            }
        }
    }

    let mut phase2 = sf.cost.clone();
    phase2.resize(n, Rational::zero());
    t.set_objective(&phase2);
    if let Outcome::Unbounded = t.optimize(n_struct) {
        return LpSolution {
            status: LpStatus::Unbounded,
            primal: Vec::new(),
            duals: Vec::new(),
            objective: None,
            pivots: t.pivots,
        };
    }

    let mut std_x = vec![Rational::zero(); n];
    for (i, &b) in t.basis.iter().enumerate() {
        std_x[b] = t.a[i][n].clone();
    }
    let primal: Vec<Rational> = sf
        .columns
        .iter()
        .map(|map| {
            map.parts.iter().fold(
                map.offset.clone(),
                |acc, &(k, positive)| {
                    if positive {
                        acc + &std_x[k]
                    } else {
                        acc - &std_x[k]
                    }
                },
            )
        })
        .collect();

    // The starting unit column of row i has reduced cost c_unit - y_i.
    let sense_sign = match lp.sense {
        Sense::Minimize => Rational::one(),
        Sense::Maximize => -Rational::one(),
    };
    let duals: Vec<Rational> = (0..sf.n_original_rows)
        .map(|i| {
            let k = unit_col[i];
            let y_std = &phase2[k] - &t.obj[k];
            y_std * &sf.row_sign[i] * &sense_sign
        })
        .collect();

    let objective = lp.objective_value(&primal);
    debug_assert_eq!(
        (-t.obj[n].clone() + &sf.cost_offset) * &sense_sign,
        objective,
        "tableau objective disagrees with recomputed objective"
    );
    LpSolution { status: LpStatus::Optimal, primal, duals, objective: Some(objective), pivots: t.pivots }
}
