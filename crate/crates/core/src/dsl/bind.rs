use chrono::NaiveDate;

use super::ast::{Action, CompareOp, FilterExpr, LimitClause, Literal, Predicate};
use super::DslError;
use crate::table::{ColumnType, Schema};

/// A filter expression whose columns are resolved and type-checked against a
/// schema. Literals are already coerced to the column's type.
#[derive(Debug, Clone, PartialEq)]
pub struct TypedExpr {
    source: FilterExpr,
    pub(crate) node: Node,
}

impl TypedExpr {
    pub fn source(&self) -> &FilterExpr {
        &self.source
    }

    pub fn has_relative_dates(&self) -> bool {
        self.node.has_within()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Node {
    Compare { col: usize, op: CompareOp, lit: Literal },
    /// Needle is stored lowercased.
    Contains { col: usize, needle: String },
    In { col: usize, values: Vec<Literal> },
    Within { col: usize, days: u32 },
    IsNull(usize),
    IsNotNull(usize),
    Not(Box<Node>),
    And(Box<Node>, Box<Node>),
    Or(Box<Node>, Box<Node>),
}

impl Node {
    fn has_within(&self) -> bool {
        match self {
            Node::Within { .. } => true,
            Node::Not(n) => n.has_within(),
            Node::And(l, r) | Node::Or(l, r) => l.has_within() || r.has_within(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundLimit {
    pub clause: LimitClause,
    pub(crate) order_col: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundAction {
    Filter(TypedExpr),
    Limit(BoundLimit),
}

impl BoundAction {
    pub fn source(&self) -> Action {
        match self {
            BoundAction::Filter(e) => Action::Filter(e.source().clone()),
            BoundAction::Limit(l) => Action::Limit(l.clause.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypedPredicate {
    source: Predicate,
    pub(crate) kind: PredicateKind,
}

impl TypedPredicate {
    pub fn source(&self) -> &Predicate {
        &self.source
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum PredicateKind {
    RowCount { op: CompareOp, n: u64 },
    AllRows(TypedExpr),
}

fn resolve(schema: &Schema, column: &str) -> Result<(usize, ColumnType), DslError> {
    schema
        .index_of(column)
        .map(|i| (i, schema.columns[i].ctype))
        .ok_or_else(|| DslError::UnknownColumn {
            column: column.to_string(),
            valid: schema.columns.iter().map(|c| c.name.clone()).collect(),
        })
}

fn coerce(column: &str, ctype: ColumnType, lit: &Literal) -> Result<Literal, DslError> {
    let ok = match (ctype, lit) {
        (ColumnType::Number, Literal::Number(_))
        | (ColumnType::Date, Literal::Date(_))
        | (ColumnType::Text, Literal::Text(_))
        | (ColumnType::TextList, Literal::Text(_))
        | (ColumnType::Boolean, Literal::Boolean(_)) => Some(lit.clone()),
        (ColumnType::Date, Literal::Text(s)) => NaiveDate::parse_from_str(s, "%Y-%m-%d")
            .ok()
            .map(Literal::Date),
        _ => None,
    };
    ok.ok_or_else(|| {
        DslError::TypeMismatch(format!(
            "literal {lit} is not comparable with {ctype} column `{column}`"
        ))
    })
}

fn bind_node(expr: &FilterExpr, schema: &Schema) -> Result<Node, DslError> {
    Ok(match expr {
        FilterExpr::Compare { column, op, value } => {
            let (col, ctype) = resolve(schema, column)?;
            if ctype == ColumnType::TextList {
                return Err(DslError::TypeMismatch(format!(
                    "`{op}` is not defined on text_list column `{column}`; use `contains` or `in`"
                )));
            }
            if op.is_ordering() && !matches!(ctype, ColumnType::Number | ColumnType::Date) {
                return Err(DslError::TypeMismatch(format!(
                    "ordering comparison `{op}` requires a number or date column, `{column}` is {ctype}"
                )));
            }
            Node::Compare {
                col,
                op: *op,
                lit: coerce(column, ctype, value)?,
            }
        }
        FilterExpr::Contains { column, needle } => {
            let (col, ctype) = resolve(schema, column)?;
            if !matches!(ctype, ColumnType::Text | ColumnType::TextList) {
                return Err(DslError::TypeMismatch(format!(
                    "`contains` requires a text or text_list column, `{column}` is {ctype}"
                )));
            }
            Node::Contains {
                col,
                needle: needle.to_lowercase(),
            }
        }
        FilterExpr::InList { column, values } => {
            let (col, ctype) = resolve(schema, column)?;
            let values = values
                .iter()
                .map(|v| coerce(column, ctype, v))
                .collect::<Result<_, _>>()?;
            Node::In { col, values }
        }
        FilterExpr::WithinLastDays { column, days } => {
            let (col, ctype) = resolve(schema, column)?;
            if ctype != ColumnType::Date {
                return Err(DslError::TypeMismatch(format!(
                    "`within_last` requires a date column, `{column}` is {ctype}"
                )));
            }
            Node::Within { col, days: *days }
        }
        FilterExpr::IsNull(column) => Node::IsNull(resolve(schema, column)?.0),
        FilterExpr::IsNotNull(column) => Node::IsNotNull(resolve(schema, column)?.0),
        FilterExpr::Not(inner) => Node::Not(Box::new(bind_node(inner, schema)?)),
        FilterExpr::And(l, r) => Node::And(
            Box::new(bind_node(l, schema)?),
            Box::new(bind_node(r, schema)?),
        ),
        FilterExpr::Or(l, r) => Node::Or(
            Box::new(bind_node(l, schema)?),
            Box::new(bind_node(r, schema)?),
        ),
    })
}

/// Resolve columns and check operator/type compatibility.
pub fn bind(expr: &FilterExpr, schema: &Schema) -> Result<TypedExpr, DslError> {
    Ok(TypedExpr {
        source: expr.clone(),
        node: bind_node(expr, schema)?,
    })
}

pub fn bind_limit(clause: &LimitClause, schema: &Schema) -> Result<BoundLimit, DslError> {
    let order_col = match &clause.order_column {
        None => None,
        Some(name) => {
            let (idx, ctype) = resolve(schema, name)?;
            if ctype == ColumnType::TextList {
                return Err(DslError::TypeMismatch(format!(
                    "cannot order by text_list column `{name}`"
                )));
            }
            Some(idx)
        }
    };
    Ok(BoundLimit {
        clause: clause.clone(),
        order_col,
    })
}

pub fn bind_action(action: &Action, schema: &Schema) -> Result<BoundAction, DslError> {
    match action {
        Action::Filter(e) => bind(e, schema).map(BoundAction::Filter),
        Action::Limit(l) => bind_limit(l, schema).map(BoundAction::Limit),
    }
}

pub fn bind_predicate(pred: &Predicate, schema: &Schema) -> Result<TypedPredicate, DslError> {
    let kind = match pred {
        Predicate::RowCount { op, n } => PredicateKind::RowCount { op: *op, n: *n },
        Predicate::AllRows(e) => PredicateKind::AllRows(bind(e, schema)?),
    };
    Ok(TypedPredicate {
        source: pred.clone(),
        kind,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_filter;
    use crate::table::{SchemaSidecar, TableBuilder};

    fn schema() -> Schema {
        let sc: SchemaSidecar = serde_json::from_str(
            r#"{"id_column": "id", "columns": [
                {"name": "id", "type": "text"},
                {"name": "state", "type": "text"},
                {"name": "age", "type": "number"},
                {"name": "last_visit", "type": "date"},
                {"name": "opt_in", "type": "boolean"},
                {"name": "pages", "type": "text_list"}
            ]}"#,
        )
        .unwrap();
        TableBuilder::new(&sc).unwrap().finish().unwrap().schema().clone()
    }

    #[test]
    fn binds_valid_expression() {
        let e = parse_filter("age < 30").unwrap();
        let t = bind(&e, &schema()).unwrap();
        assert_eq!(t.source(), &e);
        assert!(!t.has_relative_dates());
        let t = bind(&parse_filter("last_visit within_last 3 days").unwrap(), &schema()).unwrap();
        assert!(t.has_relative_dates());
    }

    #[test]
    fn unknown_column_lists_valid_names() {
        let err = bind(&parse_filter(r#"stae = "NY""#).unwrap(), &schema()).unwrap_err();
        match &err {
            DslError::UnknownColumn { column, valid } => {
                assert_eq!(column, "stae");
                assert!(valid.contains(&"state".to_string()));
            }
            other => panic!("{other:?}"),
        }
        assert!(err.to_string().contains("state"));
    }

    #[test]
    fn type_mismatches() {
        for src in [
            r#"state < "NY""#,
            "state within_last 3 days",
            "age contains \"3\"",
            "age = \"thirty\"",
            "opt_in > true",
            r#"pages = "Sale""#,
            "last_visit = 3",
            r#"state in ["NY", 3]"#,
        ] {
            let err = bind(&parse_filter(src).unwrap(), &schema()).unwrap_err();
            assert!(matches!(err, DslError::TypeMismatch(_)), "{src}: {err:?}");
        }
    }

    #[test]
    fn date_strings_are_coerced() {
        let t = bind(&parse_filter(r#"last_visit >= "2025-01-01""#).unwrap(), &schema()).unwrap();
        match t.node {
            Node::Compare { lit: Literal::Date(_), .. } => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn limits_resolve_order_column() {
        let s = schema();
        let clause = LimitClause {
            n: 3,
            order_column: Some("nope".into()),
            direction: Default::default(),
        };
        assert!(matches!(
            bind_limit(&clause, &s),
            Err(DslError::UnknownColumn { .. })
        ));
    }
}
