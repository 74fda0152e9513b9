//! Test-only helpers: random tables and expressions plus a straight-line
//! row-by-row scanner used as an oracle for the columnar evaluator.
#![allow(dead_code)]

use chrono::{Duration, NaiveDate};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ramp_core::dsl::{CompareOp, FilterExpr, Literal};
use ramp_core::table::{ColumnType, CustomerTable, SchemaSidecar, TableBuilder, Value};

pub const STATES: [&str; 6] = ["NY", "MA", "CA", "TX", "ny", "New York"];
pub const PAGES: [&str; 6] = ["Home", "Sale Page", "Financial Services", "Travel", "Hotels", "sale"];
pub const NEEDLES: [&str; 7] = ["ny", "N", "sale", "Fin", "finance", "o", "Travel"];

pub fn today() -> NaiveDate {
    NaiveDate::from_ymd_opt(2025, 6, 30).unwrap()
}

pub struct RandomTable {
    pub table: CustomerTable,
    /// Row-major copy of every cell, in schema order.
    pub rows: Vec<Vec<Option<Value>>>,
    pub ids: Vec<String>,
}

pub fn sidecar() -> SchemaSidecar {
    serde_json::from_str(
        r#"{"id_column": "id", "columns": [
            {"name": "id", "type": "text"},
            {"name": "state", "type": "text"},
            {"name": "age", "type": "number"},
            {"name": "score", "type": "number"},
            {"name": "last_visit", "type": "date"},
            {"name": "opt_in", "type": "boolean"},
            {"name": "pages", "type": "text_list"}
        ]}"#,
    )
    .unwrap()
}

fn maybe<T>(rng: &mut ChaCha8Rng, null_rate: f64, f: impl FnOnce(&mut ChaCha8Rng) -> T) -> Option<T> {
    if rng.random_bool(null_rate) {
        None
    } else {
        Some(f(rng))
    }
}

pub fn random_table(rng: &mut ChaCha8Rng, n_rows: usize) -> RandomTable {
    let mut builder = TableBuilder::new(&sidecar()).unwrap();
    let mut rows = Vec::with_capacity(n_rows);
    let mut ids = Vec::with_capacity(n_rows);
    for i in 0..n_rows {
        let id = format!("c{i:04}");
        let cells = vec![
            Some(Value::Text(id.clone())),
            maybe(rng, 0.1, |r| Value::Text(STATES.choose(r).unwrap().to_string())),
            maybe(rng, 0.1, |r| Value::Number(r.random_range(15..90) as f64)),
            maybe(rng, 0.1, |r| Value::Number(r.random_range(0..400) as f64 / 4.0)),
            maybe(rng, 0.1, |r| Value::Date(today() - Duration::days(r.random_range(-5..200)))),
            maybe(rng, 0.1, |r| Value::Boolean(r.random_bool(0.5))),
            maybe(rng, 0.1, |r| {
                let k = r.random_range(0..4);
                Value::TextList((0..k).map(|_| PAGES.choose(r).unwrap().to_string()).collect())
            }),
        ];
        builder.push_row(cells.clone()).unwrap();
        rows.push(cells);
        ids.push(id);
    }
    RandomTable {
        table: builder.finish().unwrap(),
        rows,
        ids,
    }
}

fn random_leaf(rng: &mut ChaCha8Rng) -> FilterExpr {
    let op = *CompareOp::ALL.choose(rng).unwrap();
    let eq_op = if rng.random_bool(0.5) { CompareOp::Eq } else { CompareOp::Ne };
    match rng.random_range(0..12) {
        0 => FilterExpr::compare("state", eq_op, Literal::Text(STATES.choose(rng).unwrap().to_string())),
        1 => FilterExpr::compare("age", op, Literal::Number(rng.random_range(10..95) as f64)),
        2 => FilterExpr::compare("score", op, Literal::Number(rng.random_range(0..400) as f64 / 4.0)),
        3 => FilterExpr::compare(
            "last_visit",
            op,
            Literal::Date(today() - Duration::days(rng.random_range(-5..200))),
        ),
        4 => FilterExpr::compare("opt_in", eq_op, Literal::Boolean(rng.random_bool(0.5))),
        5 => FilterExpr::Contains {
            column: if rng.random_bool(0.5) { "state" } else { "pages" }.to_string(),
            needle: NEEDLES.choose(rng).unwrap().to_string(),
        },
        6 => FilterExpr::InList {
            column: "state".into(),
            values: (0..rng.random_range(1..4))
                .map(|_| Literal::Text(STATES.choose(rng).unwrap().to_string()))
                .collect(),
        },
        7 => FilterExpr::InList {
            column: "pages".into(),
            values: (0..rng.random_range(1..3))
                .map(|_| Literal::Text(PAGES.choose(rng).unwrap().to_string()))
                .collect(),
        },
        8 => FilterExpr::InList {
            column: "age".into(),
            values: (0..rng.random_range(1..5))
                .map(|_| Literal::Number(rng.random_range(15..90) as f64))
                .collect(),
        },
        9 => FilterExpr::WithinLastDays {
            column: "last_visit".into(),
            days: rng.random_range(1..150),
        },
        10 => {
            let col = *["state", "age", "score", "last_visit", "opt_in", "pages"].choose(rng).unwrap();
            if rng.random_bool(0.5) {
                FilterExpr::IsNull(col.into())
            } else {
                FilterExpr::IsNotNull(col.into())
            }
        }
        _ => FilterExpr::compare("age", op, Literal::Number(rng.random_range(10..95) as f64 + 0.5)),
    }
}

pub fn random_expr(rng: &mut ChaCha8Rng, depth: u32) -> FilterExpr {
    if depth == 0 || rng.random_bool(0.35) {
        return random_leaf(rng);
    }
    match rng.random_range(0..3) {
        0 => random_expr(rng, depth - 1).not(),
        1 => random_expr(rng, depth - 1).and(random_expr(rng, depth - 1)),
        _ => random_expr(rng, depth - 1).or(random_expr(rng, depth - 1)),
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn col_index(name: &str) -> usize {
    ["id", "state", "age", "score", "last_visit", "opt_in", "pages"]
        .iter()
        .position(|c| *c == name)
        .expect("oracle column")
}

fn lit_eq(cell: &Value, lit: &Literal) -> bool {
    match (cell, lit) {
        (Value::Text(a), Literal::Text(b)) => a == b,
        (Value::Number(a), Literal::Number(b)) => a == b,
        (Value::Date(a), Literal::Date(b)) => a == b,
        (Value::Boolean(a), Literal::Boolean(b)) => a == b,
        _ => false,
    }
}

/// Straight-line evaluation of one row. Nulls fail every test except the
/// explicit null checks.
pub fn oracle_row(expr: &FilterExpr, row: &[Option<Value>], today: NaiveDate) -> bool {
    match expr {
        FilterExpr::Compare { column, op, value } => {
            let Some(cell) = &row[col_index(column)] else { return false };
            let ord = match (cell, value) {
                (Value::Number(a), Literal::Number(b)) => a.partial_cmp(b),
                (Value::Date(a), Literal::Date(b)) => Some(a.cmp(b)),
                (Value::Text(a), Literal::Text(b)) => Some(a.as_str().cmp(b.as_str())),
                (Value::Boolean(a), Literal::Boolean(b)) => Some(a.cmp(b)),
                _ => None,
            };
            let Some(ord) = ord else { return false };
            use std::cmp::Ordering::*;
            match op {
                CompareOp::Eq => ord == Equal,
                CompareOp::Ne => ord != Equal,
                CompareOp::Lt => ord == Less,
                CompareOp::Le => ord != Greater,
                CompareOp::Gt => ord == Greater,
                CompareOp::Ge => ord != Less,
            }
        }
        FilterExpr::Contains { column, needle } => {
            let needle = needle.to_lowercase();
            match &row[col_index(column)] {
                Some(Value::Text(s)) => s.to_lowercase().contains(&needle),
                Some(Value::TextList(items)) => {
                    let mut hit = false;
                    for s in items {
                        if s.to_lowercase().contains(&needle) {
                            hit = true;
                        }
                    }
                    hit
                }
                _ => false,
            }
        }
        FilterExpr::InList { column, values } => match &row[col_index(column)] {
            None => false,
            Some(Value::TextList(items)) => {
                let mut hit = false;
                for s in items {
                    for v in values {
                        if lit_eq(&Value::Text(s.clone()), v) {
                            hit = true;
                        }
                    }
                }
                hit
            }
            Some(cell) => values.iter().any(|v| lit_eq(cell, v)),
        },
        FilterExpr::WithinLastDays { column, days } => match &row[col_index(column)] {
            Some(Value::Date(d)) => {
                let age = (today - *d).num_days();
                age >= 0 && age <= i64::from(*days)
            }
            _ => false,
        },
        FilterExpr::IsNull(column) => row[col_index(column)].is_none(),
        FilterExpr::IsNotNull(column) => row[col_index(column)].is_some(),
        FilterExpr::Not(inner) => !oracle_row(inner, row, today),
        FilterExpr::And(l, r) => oracle_row(l, row, today) && oracle_row(r, row, today),
        FilterExpr::Or(l, r) => oracle_row(l, row, today) || oracle_row(r, row, today),
    }
}

pub fn oracle_ids(t: &RandomTable, expr: &FilterExpr, today: NaiveDate) -> Vec<String> {
    let mut out = Vec::new();
    for (row, id) in t.rows.iter().zip(&t.ids) {
        if oracle_row(expr, row, today) {
            out.push(id.clone());
        }
    }
    out
}

pub fn column_types() -> Vec<ColumnType> {
    sidecar().columns.iter().map(|c| c.ctype).collect()
}
