//! Column-at-a-time evaluation of bound expressions.

use std::cmp::Ordering;

use chrono::{Duration, NaiveDate};

use super::ast::{CompareOp, Direction, Literal};
use super::bind::{BoundAction, BoundLimit, Node, PredicateKind, TypedExpr, TypedPredicate};
use crate::table::{ColumnData, CustomerTable};

/// Evaluate `node` for every row in `rows`, producing one flag per row.
fn mask(node: &Node, table: &CustomerTable, rows: &[u32], today: NaiveDate) -> Vec<bool> {
    match node {
        Node::Compare { col, op, lit } => compare_mask(table.column_data(*col), rows, *op, lit),
        Node::Contains { col, needle } => match table.column_data(*col) {
            ColumnData::Text(v) => rows
                .iter()
                .map(|r| {
                    v[*r as usize]
                        .as_deref()
                        .is_some_and(|s| s.to_lowercase().contains(needle.as_str()))
                })
                .collect(),
            ColumnData::TextList(v) => rows
                .iter()
                .map(|r| {
                    v[*r as usize].as_ref().is_some_and(|items| {
                        items
                            .iter()
                            .any(|s| s.to_lowercase().contains(needle.as_str()))
                    })
                })
                .collect(),
            _ => vec![false; rows.len()],
        },
        Node::In { col, values } => {
            let data = table.column_data(*col);
            match data {
                ColumnData::TextList(v) => rows
                    .iter()
                    .map(|r| {
                        v[*r as usize].as_ref().is_some_and(|items| {
                            items
                                .iter()
                                .any(|s| values.iter().any(|l| matches!(l, Literal::Text(t) if t == s)))
                        })
                    })
                    .collect(),
                _ => {
                    let mut acc = vec![false; rows.len()];
                    for lit in values {
                        let hit = compare_mask(data, rows, CompareOp::Eq, lit);
                        for (a, h) in acc.iter_mut().zip(hit) {
                            *a |= h;
                        }
                    }
                    acc
                }
            }
        }
        Node::Within { col, days } => {
            let start = today - Duration::days(i64::from(*days));
            match table.column_data(*col) {
                ColumnData::Date(v) => rows
                    .iter()
                    .map(|r| v[*r as usize].is_some_and(|d| d >= start && d <= today))
                    .collect(),
                _ => vec![false; rows.len()],
            }
        }
        Node::IsNull(col) => {
            let data = table.column_data(*col);
            rows.iter().map(|r| is_null(data, *r)).collect()
        }
        Node::IsNotNull(col) => {
            let data = table.column_data(*col);
            rows.iter().map(|r| !is_null(data, *r)).collect()
        }
        Node::Not(inner) => mask(inner, table, rows, today)
            .into_iter()
            .map(|b| !b)
            .collect(),
        Node::And(l, r) => {
            let left = mask(l, table, rows, today);
            let right = mask(r, table, rows, today);
            left.into_iter().zip(right).map(|(a, b)| a && b).collect()
        }
        Node::Or(l, r) => {
            let left = mask(l, table, rows, today);
            let right = mask(r, table, rows, today);
            left.into_iter().zip(right).map(|(a, b)| a || b).collect()
        }
    }
}

fn is_null(data: &ColumnData, row: u32) -> bool {
    let r = row as usize;
    match data {
        ColumnData::Text(v) => v[r].is_none(),
        ColumnData::Number(v) => v[r].is_none(),
        ColumnData::Boolean(v) => v[r].is_none(),
        ColumnData::Date(v) => v[r].is_none(),
        ColumnData::TextList(v) => v[r].is_none(),
    }
}

fn compare_mask(data: &ColumnData, rows: &[u32], op: CompareOp, lit: &Literal) -> Vec<bool> {
    match (data, lit) {
        (ColumnData::Number(v), Literal::Number(x)) => rows
            .iter()
            .map(|r| v[*r as usize].is_some_and(|n| op.test(&n, x)))
            .collect(),
        (ColumnData::Date(v), Literal::Date(x)) => rows
            .iter()
            .map(|r| v[*r as usize].is_some_and(|d| op.test(&d, x)))
            .collect(),
        (ColumnData::Text(v), Literal::Text(x)) => rows
            .iter()
            .map(|r| {
                v[*r as usize]
                    .as_deref()
                    .is_some_and(|s| op.test(s, x.as_str()))
            })
            .collect(),
        (ColumnData::Boolean(v), Literal::Boolean(x)) => rows
            .iter()
            .map(|r| v[*r as usize].is_some_and(|b| op.test(&b, x)))
            .collect(),
        _ => vec![false; rows.len()],
    }
}

/// Keep the rows of `table` satisfying `expr`, preserving order.
/// `today` anchors every `within_last` window.
pub fn apply_filter(table: &CustomerTable, expr: &TypedExpr, today: NaiveDate) -> CustomerTable {
    let rows = table.row_indices();
    let keep = mask(&expr.node, table, rows, today);
    let selected = rows
        .iter()
        .zip(keep)
        .filter_map(|(r, k)| k.then_some(*r))
        .collect();
    table.with_rows(selected)
}

/// Compare customer ids numerically when both parse as integers.
fn cmp_ids(a: &str, b: &str) -> Ordering {
    match (a.parse::<i64>(), b.parse::<i64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        _ => a.cmp(b),
    }
}

fn cmp_cells(data: &ColumnData, a: u32, b: u32) -> Ordering {
    let (a, b) = (a as usize, b as usize);
    // nulls sort after every value in both directions; handled by caller
    match data {
        ColumnData::Number(v) => v[a]
            .partial_cmp(&v[b])
            .unwrap_or(Ordering::Equal),
        ColumnData::Date(v) => v[a].cmp(&v[b]),
        ColumnData::Text(v) => v[a].cmp(&v[b]),
        ColumnData::Boolean(v) => v[a].cmp(&v[b]),
        ColumnData::TextList(_) => Ordering::Equal,
    }
}

/// Keep at most `n` rows. With an order column the rows are sorted by it
/// (nulls last), ties broken by id ascending; otherwise the first `n` rows
/// in table order are kept.
pub fn apply_limit(table: &CustomerTable, limit: &BoundLimit) -> CustomerTable {
    let n = limit.clause.n;
    let mut rows = table.row_indices().to_vec();
    if let Some(col) = limit.order_col {
        let data = table.column_data(col);
        rows.sort_by(|a, b| {
            let (na, nb) = (is_null(data, *a), is_null(data, *b));
            let primary = match (na, nb) {
                (true, true) => Ordering::Equal,
                (true, false) => Ordering::Greater,
                (false, true) => Ordering::Less,
                (false, false) => match limit.clause.direction {
                    Direction::Asc => cmp_cells(data, *a, *b),
                    Direction::Desc => cmp_cells(data, *b, *a),
                },
            };
            primary.then_with(|| cmp_ids(table.id_at(*a), table.id_at(*b)))
        });
        rows.truncate(n);
        // Back to table order so downstream subsets keep the original ordering.
        rows.sort_unstable();
    } else {
        rows.truncate(n);
    }
    table.with_rows(rows)
}

pub fn apply_action(table: &CustomerTable, action: &BoundAction, today: NaiveDate) -> CustomerTable {
    match action {
        BoundAction::Filter(e) => apply_filter(table, e, today),
        BoundAction::Limit(l) => apply_limit(table, l),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateOutcome {
    pub passed: bool,
    pub detail: String,
}

/// Evaluate an aggregate predicate over an audience.
pub fn eval_predicate(table: &CustomerTable, pred: &TypedPredicate, today: NaiveDate) -> PredicateOutcome {
    match &pred.kind {
        PredicateKind::RowCount { op, n } => {
            let count = table.row_count() as u64;
            PredicateOutcome {
                passed: op.test(&count, n),
                detail: format!("count={count} (required {op} {n})"),
            }
        }
        PredicateKind::AllRows(expr) => {
            if table.is_empty() {
                return PredicateOutcome {
                    passed: true,
                    detail: "empty audience: no rows to check".into(),
                };
            }
            let rows = table.row_indices();
            let keep = mask(&expr.node, table, rows, today);
            let failing: Vec<u32> = rows
                .iter()
                .zip(&keep)
                .filter_map(|(r, k)| (!k).then_some(*r))
                .collect();
            match failing.first() {
                None => PredicateOutcome {
                    passed: true,
                    detail: format!("all {} rows satisfy the rule", rows.len()),
                },
                Some(first) => PredicateOutcome {
                    passed: false,
                    detail: format!(
                        "{} of {} rows fail; first failing id {}",
                        failing.len(),
                        rows.len(),
                        table.id_at(*first)
                    ),
                },
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{bind, bind_limit, bind_predicate, parse_filter, parse_predicate, LimitClause};
    use crate::table::{CustomerTable, SchemaSidecar};

    fn fixture() -> CustomerTable {
        let sc: SchemaSidecar = serde_json::from_str(
            r#"{"id_column": "id", "columns": [
                {"name": "id", "type": "text"},
                {"name": "state", "type": "text"},
                {"name": "age", "type": "number"},
                {"name": "last_visit", "type": "date"},
                {"name": "propensity", "type": "number"},
                {"name": "pages", "type": "text_list"}
            ]}"#,
        )
        .unwrap();
        let csv = "id,state,age,last_visit,propensity,pages\n\
                   c1,NY,25,2025-06-15,80,Home;Sale Page\n\
                   c2,MA,40,2025-05-01,80,Financial Services\n\
                   c3,NY,,2025-05-31,60,\n";
        CustomerTable::from_reader(csv.as_bytes(), &sc).unwrap()
    }

    fn today() -> NaiveDate {
        NaiveDate::from_ymd_opt(2025, 6, 30).unwrap()
    }

    fn run(src: &str) -> Vec<String> {
        let t = fixture();
        let e = bind(&parse_filter(src).unwrap(), t.schema()).unwrap();
        apply_filter(&t, &e, today()).audience_ids()
    }

    #[test]
    fn equality_filter() {
        assert_eq!(run(r#"state = "NY""#), vec!["c1", "c3"]);
    }

    #[test]
    fn lookback_window_is_inclusive() {
        assert_eq!(run("last_visit within_last 30 days"), vec!["c1", "c3"]);
        assert_eq!(run("last_visit within_last 29 days"), vec!["c1"]);
    }

    #[test]
    fn nulls_never_match_comparisons() {
        assert_eq!(run("age < 100"), vec!["c1", "c2"]);
        assert_eq!(run("age != 25"), vec!["c2"]);
        assert_eq!(run("age is null"), vec!["c3"]);
        assert_eq!(run("not age < 100"), vec!["c3"]);
        assert_eq!(run(r#"pages contains "sale""#), vec!["c1"]);
    }

    #[test]
    fn contains_is_case_insensitive_substring() {
        assert_eq!(run(r#"state contains "ny""#), vec!["c1", "c3"]);
        assert_eq!(run(r#"pages contains "finance""#), Vec::<String>::new());
        assert_eq!(run(r#"pages contains "financial""#), vec!["c2"]);
        assert_eq!(run(r#"pages in ["Home"]"#), vec!["c1"]);
    }

    #[test]
    fn limits() {
        let t = fixture();
        let lim = |n, col: Option<&str>, dir| {
            let clause = LimitClause {
                n,
                order_column: col.map(str::to_string),
                direction: dir,
            };
            apply_limit(&t, &bind_limit(&clause, t.schema()).unwrap()).audience_ids()
        };
        assert_eq!(lim(2, None, Direction::Asc), vec!["c1", "c2"]);
        assert_eq!(lim(5, None, Direction::Asc), vec!["c1", "c2", "c3"]);
        // c1 and c2 tie at 80; lower id wins
        assert_eq!(lim(1, Some("propensity"), Direction::Desc), vec!["c1"]);
        assert_eq!(lim(1, Some("propensity"), Direction::Asc), vec!["c3"]);
        // null age sorts last either way
        assert_eq!(lim(2, Some("age"), Direction::Desc), vec!["c1", "c2"]);
    }

    #[test]
    fn numeric_ids_tie_break_numerically() {
        assert_eq!(cmp_ids("9", "10"), Ordering::Less);
        assert_eq!(cmp_ids("c10", "c9"), Ordering::Less);
    }

    #[test]
    fn predicates() {
        let t = fixture();
        let p = |src: &str, table: &CustomerTable| {
            eval_predicate(
                table,
                &bind_predicate(&parse_predicate(src).unwrap(), t.schema()).unwrap(),
                today(),
            )
        };
        let out = p("count >= 300", &t);
        assert!(!out.passed);
        assert!(out.detail.starts_with("count=3"));
        assert!(p("count >= 3", &t).passed);
        assert!(p("all(propensity >= 50)", &t).passed);
        let out = p("all(propensity >= 70)", &t);
        assert!(!out.passed);
        assert!(out.detail.contains("c3"));
        let empty = t.with_rows(vec![]);
        let out = p("all(age > 1000)", &empty);
        assert!(out.passed);
        assert!(out.detail.contains("empty audience"));
    }
}
