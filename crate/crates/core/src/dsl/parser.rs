//! Recursive-descent parser for the filter language.
//!
//! ```text
//! expr    := or_expr
//! or_expr := and_expr ("or" and_expr)*
//! and_expr:= unary ("and" unary)*
//! unary   := "not" unary | "(" expr ")" | pred
//! pred    := col OP literal | col "contains" string | col "in" "[" literal, .. "]"
//!          | col "within_last" N "days" | col "is" ["not"] "null"
//! literal := string | number | "date" string | "true" | "false"
//! ```
//!
//! Actions add `limit N [by col asc|desc]`; predicates are `count OP N` and
//! `all(expr)`.

use chrono::NaiveDate;

use super::ast::{Action, CompareOp, Direction, FilterExpr, LimitClause, Literal, Predicate};
use super::DslError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Num(f64, String),
    Op(CompareOp),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, DslError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
            }
            b'(' | b')' | b'[' | b']' | b',' => {
                let tok = match c {
                    b'(' => Tok::LParen,
                    b')' => Tok::RParen,
                    b'[' => Tok::LBracket,
                    b']' => Tok::RBracket,
                    _ => Tok::Comma,
                };
                out.push(Token { tok, pos: start });
                i += 1;
            }
            b'=' | b'!' | b'<' | b'>' => {
                let next = bytes.get(i + 1).copied();
                let (op, len) = match (c, next) {
                    (b'=', Some(b'=')) => (CompareOp::Eq, 2),
                    (b'=', _) => (CompareOp::Eq, 1),
                    (b'!', Some(b'=')) => (CompareOp::Ne, 2),
                    (b'<', Some(b'>')) => (CompareOp::Ne, 2),
                    (b'<', Some(b'=')) => (CompareOp::Le, 2),
                    (b'<', _) => (CompareOp::Lt, 1),
                    (b'>', Some(b'=')) => (CompareOp::Ge, 2),
                    (b'>', _) => (CompareOp::Gt, 1),
                    _ => return Err(DslError::parse("unexpected `!`", start)),
                };
                out.push(Token {
                    tok: Tok::Op(op),
                    pos: start,
                });
                i += len;
            }
            b'"' => {
                i += 1;
                let mut s = String::new();
                loop {
                    let Some(ch) = src[i..].chars().next() else {
                        return Err(DslError::parse("unterminated string literal", start));
                    };
                    i += ch.len_utf8();
                    match ch {
                        '"' => break,
                        '\\' => {
                            let Some(esc) = src[i..].chars().next() else {
                                return Err(DslError::parse("unterminated escape", start));
                            };
                            i += esc.len_utf8();
                            s.push(match esc {
                                'n' => '\n',
                                't' => '\t',
                                other => other,
                            });
                        }
                        other => s.push(other),
                    }
                }
                out.push(Token {
                    tok: Tok::Str(s),
                    pos: start,
                });
            }
            b'-' | b'0'..=b'9' | b'.' => {
                i += 1;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                // Thousands separators are not accepted; `1,000` is a list.
                let text = &src[start..i];
                let n: f64 = text
                    .parse()
                    .map_err(|_| DslError::parse(format!("invalid number `{text}`"), start))?;
                out.push(Token {
                    tok: Tok::Num(n, text.to_string()),
                    pos: start,
                });
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Ident(src[start..i].to_string()),
                    pos: start,
                });
            }
            b'`' => {
                i += 1;
                let close = src[i..]
                    .find('`')
                    .ok_or_else(|| DslError::parse("unterminated quoted identifier", start))?;
                out.push(Token {
                    tok: Tok::Ident(src[i..i + close].to_string()),
                    pos: start,
                });
                i += close + 1;
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(DslError::parse(format!("unexpected character `{ch}`"), start));
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    idx: usize,
    end: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Self, DslError> {
        let toks = lex(src)?;
        if toks.is_empty() {
            return Err(DslError::parse("empty input", 0));
        }
        Ok(Parser {
            toks,
            idx: 0,
            end: src.len(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.idx).map(|t| &t.tok)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.idx).map(|t| t.pos).unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.idx).map(|t| t.tok.clone());
        self.idx += 1;
        t
    }

    fn peek_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s.eq_ignore_ascii_case(kw))
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.peek_keyword(kw) {
            self.idx += 1;
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), DslError> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(DslError::parse(format!("expected `{kw}`"), self.pos()))
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), DslError> {
        if self.peek() == Some(&tok) {
            self.idx += 1;
            Ok(())
        } else {
            Err(DslError::parse(format!("expected {what}"), self.pos()))
        }
    }

    fn finish(&self) -> Result<(), DslError> {
        if self.idx < self.toks.len() {
            Err(DslError::parse(
                "unexpected trailing input (exactly one expression is allowed)",
                self.pos(),
            ))
        } else {
            Ok(())
        }
    }

    fn expr(&mut self) -> Result<FilterExpr, DslError> {
        let mut lhs = self.and_expr()?;
        while self.eat_keyword("or") {
            let rhs = self.and_expr()?;
            lhs = FilterExpr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<FilterExpr, DslError> {
        let mut lhs = self.unary()?;
        while self.eat_keyword("and") {
            let rhs = self.unary()?;
            lhs = FilterExpr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<FilterExpr, DslError> {
        if self.eat_keyword("not") {
            return Ok(FilterExpr::Not(Box::new(self.unary()?)));
        }
        if self.peek() == Some(&Tok::LParen) {
            self.idx += 1;
            let inner = self.expr()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(inner);
        }
        self.pred()
    }

    fn column(&mut self) -> Result<String, DslError> {
        let pos = self.pos();
        match self.bump() {
            Some(Tok::Ident(name)) => Ok(name),
            _ => Err(DslError::parse("expected a column name", pos)),
        }
    }

    fn pred(&mut self) -> Result<FilterExpr, DslError> {
        let column = self.column()?;
        let pos = self.pos();
        match self.peek().cloned() {
            Some(Tok::Op(op)) => {
                self.idx += 1;
                let value = self.literal()?;
                Ok(FilterExpr::Compare { column, op, value })
            }
            Some(Tok::Ident(kw)) => match kw.to_ascii_lowercase().as_str() {
                "contains" => {
                    self.idx += 1;
                    let pos = self.pos();
                    match self.bump() {
                        Some(Tok::Str(needle)) => Ok(FilterExpr::Contains { column, needle }),
                        _ => Err(DslError::parse("`contains` expects a string literal", pos)),
                    }
                }
                "in" => {
                    self.idx += 1;
                    self.expect(Tok::LBracket, "`[`")?;
                    let mut values = Vec::new();
                    if self.peek() != Some(&Tok::RBracket) {
                        loop {
                            values.push(self.literal()?);
                            if self.peek() == Some(&Tok::Comma) {
                                self.idx += 1;
                            } else {
                                break;
                            }
                        }
                    }
                    self.expect(Tok::RBracket, "`]`")?;
                    if values.is_empty() {
                        return Err(DslError::parse("`in` list must not be empty", pos));
                    }
                    Ok(FilterExpr::InList { column, values })
                }
                "within_last" => {
                    self.idx += 1;
                    let npos = self.pos();
                    let days = match self.bump() {
                        Some(Tok::Num(n, _)) if n >= 1.0 && n.fract() == 0.0 && n <= u32::MAX as f64 => {
                            n as u32
                        }
                        _ => {
                            return Err(DslError::parse(
                                "`within_last` expects a positive whole number of days",
                                npos,
                            ))
                        }
                    };
                    if !self.eat_keyword("days") && !self.eat_keyword("day") {
                        return Err(DslError::parse("expected `days`", self.pos()));
                    }
                    Ok(FilterExpr::WithinLastDays { column, days })
                }
                "is" => {
                    self.idx += 1;
                    let negated = self.eat_keyword("not");
                    self.expect_keyword("null")?;
                    Ok(if negated {
                        FilterExpr::IsNotNull(column)
                    } else {
                        FilterExpr::IsNull(column)
                    })
                }
                _ => Err(DslError::parse(
                    format!("unexpected `{kw}` after column `{column}`"),
                    pos,
                )),
            },
            _ => Err(DslError::parse(
                format!("expected an operator after column `{column}`"),
                pos,
            )),
        }
    }

    fn literal(&mut self) -> Result<Literal, DslError> {
        let pos = self.pos();
        match self.bump() {
            Some(Tok::Str(s)) => Ok(Literal::Text(s)),
            Some(Tok::Num(n, _)) => Ok(Literal::Number(n)),
            Some(Tok::Ident(kw)) if kw.eq_ignore_ascii_case("true") => Ok(Literal::Boolean(true)),
            Some(Tok::Ident(kw)) if kw.eq_ignore_ascii_case("false") => {
                Ok(Literal::Boolean(false))
            }
            Some(Tok::Ident(kw)) if kw.eq_ignore_ascii_case("date") => {
                let dpos = self.pos();
                match self.bump() {
                    Some(Tok::Str(s)) => NaiveDate::parse_from_str(&s, "%Y-%m-%d")
                        .map(Literal::Date)
                        .map_err(|_| {
                            DslError::parse(format!("invalid date `{s}`, expected YYYY-MM-DD"), dpos)
                        }),
                    _ => Err(DslError::parse("`date` expects a quoted YYYY-MM-DD", dpos)),
                }
            }
            _ => Err(DslError::parse("expected a literal", pos)),
        }
    }

    fn limit(&mut self) -> Result<LimitClause, DslError> {
        self.expect_keyword("limit")?;
        let pos = self.pos();
        let n = match self.bump() {
            Some(Tok::Num(n, _)) if n >= 1.0 && n.fract() == 0.0 => n as usize,
            _ => return Err(DslError::parse("`limit` expects a positive whole number", pos)),
        };
        let mut clause = LimitClause {
            n,
            order_column: None,
            direction: Direction::Asc,
        };
        if self.eat_keyword("by") {
            clause.order_column = Some(self.column()?);
            if self.eat_keyword("desc") {
                clause.direction = Direction::Desc;
            } else {
                self.eat_keyword("asc");
            }
        }
        Ok(clause)
    }
}

/// Parse a filter expression.
pub fn parse_filter(src: &str) -> Result<FilterExpr, DslError> {
    let mut p = Parser::new(src)?;
    let e = p.expr()?;
    p.finish()?;
    Ok(e)
}

/// Parse an actor step: a filter expression or a `limit` clause.
pub fn parse_action(src: &str) -> Result<Action, DslError> {
    let mut p = Parser::new(src)?;
    let action = if p.peek_keyword("limit")
        && matches!(p.toks.get(1).map(|t| &t.tok), Some(Tok::Num(..)))
    {
        Action::Limit(p.limit()?)
    } else {
        Action::Filter(p.expr()?)
    };
    p.finish()?;
    Ok(action)
}

/// Parse an aggregate verification predicate: `count OP N` or `all(expr)`.
pub fn parse_predicate(src: &str) -> Result<Predicate, DslError> {
    let mut p = Parser::new(src)?;
    let pred = if p.eat_keyword("count") {
        let pos = p.pos();
        let op = match p.bump() {
            Some(Tok::Op(op)) => op,
            _ => return Err(DslError::parse("`count` expects a comparison operator", pos)),
        };
        let npos = p.pos();
        let n = match p.bump() {
            Some(Tok::Num(n, _)) if n >= 0.0 && n.fract() == 0.0 => n as u64,
            _ => return Err(DslError::parse("`count` expects a whole number", npos)),
        };
        Predicate::RowCount { op, n }
    } else if p.eat_keyword("all") {
        p.expect(Tok::LParen, "`(` after `all`")?;
        let e = p.expr()?;
        p.expect(Tok::RParen, "`)`")?;
        Predicate::AllRows(e)
    } else {
        return Err(DslError::parse(
            "expected `count OP N` or `all(expr)`",
            p.pos(),
        ));
    };
    p.finish()?;
    Ok(pred)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cmp(col: &str, op: CompareOp, v: Literal) -> FilterExpr {
        FilterExpr::compare(col, op, v)
    }

    #[test]
    fn simple_equality() {
        assert_eq!(
            parse_filter(r#"state = "NY""#).unwrap(),
            cmp("state", CompareOp::Eq, Literal::Text("NY".into()))
        );
    }

    #[test]
    fn conjunction_of_age_and_state() {
        assert_eq!(
            parse_filter(r#"age < 30 and state = "MA""#).unwrap(),
            cmp("age", CompareOp::Lt, Literal::Number(30.0))
                .and(cmp("state", CompareOp::Eq, Literal::Text("MA".into())))
        );
    }

    #[test]
    fn search_within_lookback() {
        let e = parse_filter(r#"web_search contains "Panama" and search_date within_last 30 days"#)
            .unwrap();
        assert_eq!(
            e,
            FilterExpr::Contains {
                column: "web_search".into(),
                needle: "Panama".into()
            }
            .and(FilterExpr::WithinLastDays {
                column: "search_date".into(),
                days: 30
            })
        );
    }

    #[test]
    fn precedence_and_grouping() {
        let e = parse_filter("a = 1 or b = 2 and c = 3").unwrap();
        let a = cmp("a", CompareOp::Eq, Literal::Number(1.0));
        let b = cmp("b", CompareOp::Eq, Literal::Number(2.0));
        let c = cmp("c", CompareOp::Eq, Literal::Number(3.0));
        assert_eq!(e, a.clone().or(b.clone().and(c.clone())));
        let e = parse_filter("(a = 1 or b = 2) and not c = 3").unwrap();
        assert_eq!(e, a.or(b).and(c.not()));
    }

    #[test]
    fn all_literal_forms() {
        let e = parse_filter(
            r#"d >= date "2025-01-31" and f = true and g != false and h in ["x", "y"] and n > -2.5 and z is not null and w is null"#,
        )
        .unwrap();
        let printed = e.to_string();
        assert_eq!(parse_filter(&printed).unwrap(), e);
        assert!(printed.contains(r#"date "2025-01-31""#));
    }

    #[test]
    fn operator_aliases() {
        assert_eq!(
            parse_filter("a == 1").unwrap(),
            parse_filter("a = 1").unwrap()
        );
        assert_eq!(
            parse_filter("a <> 1").unwrap(),
            parse_filter("a != 1").unwrap()
        );
    }

    #[test]
    fn errors_carry_positions() {
        let err = parse_filter("").unwrap_err();
        assert!(err.to_string().contains("empty"));
        match parse_filter(r#"state = "NY" state = "MA""#).unwrap_err() {
            DslError::Parse { position, .. } => assert_eq!(position, 13),
            other => panic!("{other:?}"),
        }
        match parse_filter("age <").unwrap_err() {
            DslError::Parse { position, .. } => assert_eq!(position, 5),
            other => panic!("{other:?}"),
        }
        assert!(parse_filter(r#"a = "open"#).is_err());
        assert!(parse_filter("a within_last 0 days").is_err());
        assert!(parse_filter(r#"a = date "2025-13-01""#).is_err());
        assert!(parse_filter("a in []").is_err());
    }

    #[test]
    fn actions_and_predicates() {
        assert_eq!(
            parse_action("limit 300").unwrap(),
            Action::Limit(LimitClause {
                n: 300,
                order_column: None,
                direction: Direction::Asc
            })
        );
        assert_eq!(
            parse_action("limit 5 by propensity_hotels desc").unwrap(),
            Action::Limit(LimitClause {
                n: 5,
                order_column: Some("propensity_hotels".into()),
                direction: Direction::Desc
            })
        );
        // a column that happens to be called `limit`
        assert!(matches!(
            parse_action("limit > 3").unwrap(),
            Action::Filter(_)
        ));
        assert_eq!(
            parse_predicate("count >= 300").unwrap(),
            Predicate::RowCount {
                op: CompareOp::Ge,
                n: 300
            }
        );
        assert_eq!(
            parse_predicate("all(propensity_hotels >= 50)").unwrap(),
            Predicate::AllRows(cmp("propensity_hotels", CompareOp::Ge, Literal::Number(50.0)))
        );
        assert!(parse_predicate("count >= 2.5").is_err());
        assert!(parse_predicate("age > 3").is_err());
        assert!(parse_action("limit 0").is_err());
    }

    #[test]
    fn escapes_round_trip() {
        let e = FilterExpr::Contains {
            column: "note".into(),
            needle: "say \"hi\" \\ bye".into(),
        };
        assert_eq!(parse_filter(&e.to_string()).unwrap(), e);
    }
}
