//! Plain-text tabular dump of a [`LinearProgram`], one tab-separated line
//! per record, every number as `"num/den"`. Meant for cross-checking a
//! program in external tools; [`parse`] reads the same format back.
//!
//! ```text
//! lp  v1
//! sense  minimize
//! columns  2
//! objective  1/1  0/1
//! lower  0/1  -inf
//! upper  inf  5/2
//! row  1/1  -1/1  >=  3/1
//! ```

use std::fmt::Write as _;

use num_traits::Zero;
use thiserror::Error;

use super::{Bounds, LinearProgram, Relation, Row, Sense};
use crate::rational::{format_rational, parse_rational, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct LpTextError {
    pub line: usize,
    pub message: String,
}

pub fn dump(lp: &LinearProgram) -> String {
    let n = lp.num_columns();
    let mut out = String::new();
    let join = |vals: Vec<String>| vals.join("\t");
    out.push_str("lp\tv1\n");
    let sense = match lp.sense {
        Sense::Minimize => "minimize",
        Sense::Maximize => "maximize",
    };
    let _ = writeln!(out, "sense\t{sense}");
    let _ = writeln!(out, "columns\t{n}");
    let _ = writeln!(out, "objective\t{}", join(lp.objective.iter().map(format_rational).collect()));
    let side = |b: &Option<Rational>, inf: &str| b.as_ref().map_or(inf.to_owned(), format_rational);
    let _ = writeln!(out, "lower\t{}", join(lp.bounds.iter().map(|b| side(&b.lower, "-inf")).collect()));
    let _ = writeln!(out, "upper\t{}", join(lp.bounds.iter().map(|b| side(&b.upper, "inf")).collect()));
    for row in &lp.rows {
        let mut dense = vec![Rational::zero(); n];
        for (j, a) in &row.terms {
            dense[*j] = a.clone();
        }
        let _ = writeln!(
            out,
            "row\t{}\t{}\t{}",
            join(dense.iter().map(format_rational).collect()),
            row.relation.symbol(),
            format_rational(&row.rhs)
        );
    }
    out
}

pub fn parse(text: &str) -> Result<LinearProgram, LpTextError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut expect = |key: &str| -> Result<(usize, Vec<&str>), LpTextError> {
        let (line, content) = lines.next().ok_or(LpTextError { line: 0, message: format!("missing {key} record") })?;
        let mut fields = content.split('\t');
        if fields.next() != Some(key) {
            return Err(LpTextError { line, message: format!("expected {key} record") });
        }
        Ok((line, fields.collect()))
    };
    let err = |line: usize, message: String| LpTextError { line, message };
    let number = |line: usize, s: &str| parse_rational(s).map_err(|e| err(line, e.to_string()));

    let (line, header) = expect("lp")?;
    if header != ["v1"] {
        return Err(err(line, "unsupported version".into()));
    }
    let (line, sense) = expect("sense")?;
    let sense = match sense.as_slice() {
        ["minimize"] => Sense::Minimize,
        ["maximize"] => Sense::Maximize,
        _ => return Err(err(line, "sense must be minimize or maximize".into())),
    };
    let (line, columns) = expect("columns")?;
    let n: usize = match columns.as_slice() {
        [c] => c.parse().map_err(|_| err(line, "bad column count".into()))?,
        _ => return Err(err(line, "bad column count".into())),
    };
    let mut vector = |key: &str, inf: Option<&str>| -> Result<Vec<Option<Rational>>, LpTextError> {
        let (line, fields) = expect(key)?;
        let fields: Vec<&str> = fields.into_iter().filter(|f| !f.is_empty() || n > 0).collect();
        if fields.len() != n {
            return Err(err(line, format!("{key} needs {n} entries")));
        }
        fields.into_iter().map(|f| if Some(f) == inf { Ok(None) } else { number(line, f).map(Some) }).collect()
    };
    let objective: Vec<Rational> = vector("objective", None)?.into_iter().flatten().collect();
    let lower = vector("lower", Some("-inf"))?;
    let upper = vector("upper", Some("inf"))?;
    let bounds = lower.into_iter().zip(upper).map(|(lower, upper)| Bounds { lower, upper }).collect();

    let mut lp = LinearProgram { sense, objective, bounds, rows: Vec::new() };
    for (line, content) in lines {
        let fields: Vec<&str> = content.split('\t').collect();
        if fields.first() != Some(&"row") || fields.len() != n + 3 {
            return Err(err(line, format!("row record needs {n} coefficients, relation, rhs")));
        }
        let relation = match fields[n + 1] {
            "<=" => Relation::Le,
            "=" => Relation::Eq,
            ">=" => Relation::Ge,
            other => return Err(err(line, format!("unknown relation {other:?}"))),
        };
        let terms = fields[1..=n]
            .iter()
            .enumerate()
            .map(|(j, f)| number(line, f).map(|a| (j, a)))
            .collect::<Result<Vec<_>, _>>()?;
        let rhs = number(line, fields[n + 2])?;
        let terms = terms.into_iter().filter(|(_, a)| *a != Rational::zero()).collect();
        lp.rows.push(Row { terms, relation, rhs });
    }
    lp.validate().map_err(|e| err(0, e.to_string()))?;
    Ok(lp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};

    #[test]
    fn dump_parse_round_trip() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_variable(rat(3, 2), Bounds::free());
        let y = lp.add_variable(int(-1), Bounds { lower: None, upper: Some(rat(5, 2)) });
        lp.add_constraint([(x, int(1)), (y, rat(-1, 3))], Relation::Le, int(4));
        lp.add_constraint([(y, int(2))], Relation::Ge, int(-7));
        let text = dump(&lp);
        let back = parse(&text).unwrap();
        assert_eq!(back, lp);
        assert_eq!(dump(&back), text);
    }

    #[test]
    fn reports_bad_lines() {
        assert!(parse("").is_err());
        assert!(parse("lp\tv2\n").is_err());
        let text = "lp\tv1\nsense\tminimize\ncolumns\t1\nobjective\t1/1\nlower\t0/1\nupper\tinf\nrow\t1/1\t=>\t0/1\n";
        assert_eq!(parse(text).unwrap_err().line, 7);
    }

    #[test]
    fn zero_column_program() {
        let lp = LinearProgram::new(Sense::Minimize);
        assert_eq!(parse(&dump(&lp)).unwrap(), lp);
    }
}
