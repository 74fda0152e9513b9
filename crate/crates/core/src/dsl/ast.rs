use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CompareOp {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

impl CompareOp {
    pub const ALL: [CompareOp; 6] = [
        CompareOp::Eq,
        CompareOp::Ne,
        CompareOp::Lt,
        CompareOp::Le,
        CompareOp::Gt,
        CompareOp::Ge,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Eq => "=",
            CompareOp::Ne => "!=",
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
        }
    }

    pub fn is_ordering(self) -> bool {
        !matches!(self, CompareOp::Eq | CompareOp::Ne)
    }

    pub fn test<T: PartialOrd + ?Sized>(self, lhs: &T, rhs: &T) -> bool {
        match self {
            CompareOp::Eq => lhs == rhs,
            CompareOp::Ne => lhs != rhs,
            CompareOp::Lt => lhs < rhs,
            CompareOp::Le => lhs <= rhs,
            CompareOp::Gt => lhs > rhs,
            CompareOp::Ge => lhs >= rhs,
        }
    }
}

impl fmt::Display for CompareOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Text(String),
    Number(f64),
    Date(NaiveDate),
    Boolean(bool),
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Text(s) => write_quoted(f, s),
            Literal::Number(n) => write!(f, "{n}"),
            Literal::Date(d) => write!(f, "date \"{}\"", d.format("%Y-%m-%d")),
            Literal::Boolean(b) => write!(f, "{b}"),
        }
    }
}

fn write_quoted(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("\"")?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("\"")
}

/// Untyped filter expression as produced by the parser.
#[derive(Debug, Clone, PartialEq)]
pub enum FilterExpr {
    Compare {
        column: String,
        op: CompareOp,
        value: Literal,
    },
    /// Case-insensitive substring; on list columns any element may match.
    Contains { column: String, needle: String },
    InList { column: String, values: Vec<Literal> },
    WithinLastDays { column: String, days: u32 },
    IsNull(String),
    IsNotNull(String),
    Not(Box<FilterExpr>),
    And(Box<FilterExpr>, Box<FilterExpr>),
    Or(Box<FilterExpr>, Box<FilterExpr>),
}

impl FilterExpr {
    pub fn compare(column: impl Into<String>, op: CompareOp, value: Literal) -> Self {
        FilterExpr::Compare {
            column: column.into(),
            op,
            value,
        }
    }

    pub fn and(self, other: FilterExpr) -> Self {
        FilterExpr::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: FilterExpr) -> Self {
        FilterExpr::Or(Box::new(self), Box::new(other))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Self {
        FilterExpr::Not(Box::new(self))
    }

    /// Fold a non-empty list of expressions into a left-nested conjunction.
    pub fn conjunction(exprs: impl IntoIterator<Item = FilterExpr>) -> Option<Self> {
        exprs.into_iter().reduce(FilterExpr::and)
    }

    /// Every column referenced by the expression, in first-seen order.
    pub fn columns(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_columns(&mut out);
        out
    }

    fn collect_columns<'a>(&'a self, out: &mut Vec<&'a str>) {
        let mut push = |c: &'a str| {
            if !out.contains(&c) {
                out.push(c);
            }
        };
        match self {
            FilterExpr::Compare { column, .. }
            | FilterExpr::Contains { column, .. }
            | FilterExpr::InList { column, .. }
            | FilterExpr::WithinLastDays { column, .. }
            | FilterExpr::IsNull(column)
            | FilterExpr::IsNotNull(column) => push(column),
            FilterExpr::Not(inner) => inner.collect_columns(out),
            FilterExpr::And(l, r) | FilterExpr::Or(l, r) => {
                l.collect_columns(out);
                r.collect_columns(out);
            }
        }
    }
}

impl fmt::Display for FilterExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterExpr::Compare { column, op, value } => write!(f, "{column} {op} {value}"),
            FilterExpr::Contains { column, needle } => {
                write!(f, "{column} contains ")?;
                write_quoted(f, needle)
            }
            FilterExpr::InList { column, values } => {
                write!(f, "{column} in [")?;
                for (i, v) in values.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
            FilterExpr::WithinLastDays { column, days } => {
                write!(f, "{column} within_last {days} days")
            }
            FilterExpr::IsNull(column) => write!(f, "{column} is null"),
            FilterExpr::IsNotNull(column) => write!(f, "{column} is not null"),
            FilterExpr::Not(inner) => match inner.as_ref() {
                FilterExpr::And(..) | FilterExpr::Or(..) => write!(f, "not ({inner})"),
                _ => write!(f, "not {inner}"),
            },
            // The parser is left-associative with `and` binding tighter than
            // `or`; parenthesize exactly where that would regroup the tree.
            FilterExpr::And(l, r) => {
                match l.as_ref() {
                    FilterExpr::Or(..) => write!(f, "({l})")?,
                    _ => write!(f, "{l}")?,
                }
                f.write_str(" and ")?;
                match r.as_ref() {
                    FilterExpr::Or(..) | FilterExpr::And(..) => write!(f, "({r})"),
                    _ => write!(f, "{r}"),
                }
            }
            FilterExpr::Or(l, r) => {
                write!(f, "{l} or ")?;
                match r.as_ref() {
                    FilterExpr::Or(..) => write!(f, "({r})"),
                    _ => write!(f, "{r}"),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Asc,
    Desc,
}

/// Keep at most `n` rows, optionally ordered by a column. Ties always break
/// by customer id ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitClause {
    pub n: usize,
    pub order_column: Option<String>,
    pub direction: Direction,
}

impl fmt::Display for LimitClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "limit {}", self.n)?;
        if let Some(col) = &self.order_column {
            let dir = match self.direction {
                Direction::Asc => "asc",
                Direction::Desc => "desc",
            };
            write!(f, " by {col} {dir}")?;
        }
        Ok(())
    }
}

/// One compiled actor step: either a row filter or a size limit.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Filter(FilterExpr),
    Limit(LimitClause),
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Filter(e) => write!(f, "{e}"),
            Action::Limit(l) => write!(f, "{l}"),
        }
    }
}

/// Aggregate check evaluated over a whole audience.
#[derive(Debug, Clone, PartialEq)]
pub enum Predicate {
    RowCount { op: CompareOp, n: u64 },
    AllRows(FilterExpr),
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::RowCount { op, n } => write!(f, "count {op} {n}"),
            Predicate::AllRows(e) => write!(f, "all({e})"),
        }
    }
}
