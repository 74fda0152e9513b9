//! Synthetic customer table and benchmark generator.
//!
//! Gold audiences come from [`scan`], a row-at-a-time evaluator over the raw
//! generated cells that shares no code with the DSL evaluator.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use chrono::{Duration, NaiveDate};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::memory::{MemoryItem, MemoryKind, MemorySource, MemoryStore};
use crate::table::{ColumnSpec, ColumnType, CustomerTable, SchemaSidecar, TableBuilder, TableError, Value};

use super::BenchmarkCase;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("could not build challenge case {0}: {1}")]
    Challenge(usize, String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub rows: usize,
    pub cases: usize,
    pub date_cases: usize,
    pub numeric_cases: usize,
    pub boolean_cases: usize,
    pub threshold_challenges: usize,
    pub keyword_challenges: usize,
    pub null_rate: f64,
    pub today: NaiveDate,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            rows: 15_044,
            cases: 88,
            date_cases: 53,
            numeric_cases: 48,
            boolean_cases: 2,
            threshold_challenges: 8,
            keyword_challenges: 2,
            null_rate: 0.02,
            today: NaiveDate::from_ymd_opt(2025, 6, 30).expect("valid date"),
        }
    }
}

/// Trailing cases that carry only text criteria.
const TEXT_ONLY: usize = 3;

impl GenConfig {
    fn layout(&self) -> Result<(usize, usize), GenError> {
        let bad = |m: &str| Err(GenError::Config(m.into()));
        if self.rows < 100 {
            return bad("at least 100 rows are required");
        }
        if !(0.0..0.5).contains(&self.null_rate) {
            return bad("null_rate must be in [0, 0.5)");
        }
        if self.boolean_cases > self.cases {
            return bad("boolean_cases exceeds cases");
        }
        let free = self.cases - self.boolean_cases;
        if self.date_cases > free || self.numeric_cases > free {
            return bad("date_cases and numeric_cases must fit beside the boolean cases");
        }
        let text_only = TEXT_ONLY.min(free - self.date_cases.max(self.numeric_cases));
        let span = free - text_only;
        if self.numeric_cases < 2 || span < self.date_cases + 2 {
            return bad("two numeric-only cases are needed for the all-user and no-user queries");
        }
        Ok((free, span))
    }
}

#[derive(Clone, Copy)]
enum Gen {
    Id,
    Int(i64, i64),
    Choice(&'static [&'static str]),
    Zip,
    DaysBack(i64),
    List(&'static [&'static str], usize),
    Flag(f64),
}

struct Template {
    name: &'static str,
    gen: Gen,
    /// Phrase used in generated queries; `{}` marks the value for text and list columns.
    label: &'static str,
    nullable: bool,
}

const STATES: &[&str] = &["NY", "MA", "CA", "TX", "FL", "WA", "IL", "NJ", "PA", "GA", "CO", "AZ"];
const TIERS: &[&str] = &["bronze", "silver", "gold", "platinum"];
const PAGES: &[&str] = &[
    "Home", "Financial Services", "Travel Deals", "Hotels", "Flights", "Car Rental", "Cruises",
    "Credit Cards", "Insurance", "Dining", "Rewards", "Account",
];
const SEARCHES: &[&str] = &[
    "hotel deals", "cheap flights", "beach resort", "ski trip", "credit card", "car insurance",
    "family vacation", "city break", "cruise", "restaurant",
];
const DESTINATIONS: &[&str] = &[
    "NY", "CA", "FL", "MA", "Paris", "London", "Tokyo", "Cancun", "Las Vegas", "Orlando", "Rome",
    "Honolulu", "Denver",
];
const INTERESTS: &[&str] = &["travel", "golf", "cooking", "fitness", "music", "finance", "fashion", "outdoors"];

const fn t(name: &'static str, gen: Gen, label: &'static str) -> Template {
    Template {
        name,
        gen,
        label,
        nullable: true,
    }
}

const PROPENSITY: [&str; 10] = [
    "propensity_hotels",
    "propensity_flights",
    "propensity_car_rental",
    "propensity_cruises",
    "propensity_vacation_packages",
    "propensity_credit_card",
    "propensity_insurance",
    "propensity_dining",
    "propensity_retail",
    "propensity_streaming",
];

const TEMPLATE: [Template; 56] = [
    Template { name: "customer_id", gen: Gen::Id, label: "", nullable: false },
    Template { name: "age", gen: Gen::Int(18, 85), label: "age", nullable: false },
    t("gender", Gen::Choice(&["female", "male", "nonbinary"]), "are {}"),
    t("income", Gen::Int(15_000, 250_000), "annual income"),
    t("household_size", Gen::Int(1, 7), "household size"),
    t("marital_status", Gen::Choice(&["single", "married", "divorced", "widowed"]), "are {}"),
    t("education", Gen::Choice(&["high school", "college", "graduate"]), "have a {} education"),
    t("occupation", Gen::Choice(&["engineer", "teacher", "nurse", "sales", "student", "retired"]), "work as {}"),
    t("state", Gen::Choice(STATES), "live in {}"),
    t("city", Gen::Choice(&["Springfield", "Riverside", "Franklin", "Greenville", "Madison", "Salem"]), "live in {}"),
    t("zip_code", Gen::Zip, "have zip code {}"),
    t("country", Gen::Choice(&["US", "CA"]), "live in {}"),
    t("home_airport", Gen::Choice(&["JFK", "BOS", "LAX", "ORD", "MIA", "SEA", "DFW"]), "fly from {}"),
    t("language", Gen::Choice(&["en", "es", "fr"]), "speak {}"),
    t("loyalty_tier", Gen::Choice(TIERS), "are in the {} loyalty tier"),
    t("loyalty_points", Gen::Int(0, 100_000), "loyalty point balance"),
    t("member_since", Gen::DaysBack(4_000), "became members"),
    t(PROPENSITY[0], Gen::Int(0, 100), "hotel propensity score"),
    t(PROPENSITY[1], Gen::Int(0, 100), "flight propensity score"),
    t(PROPENSITY[2], Gen::Int(0, 100), "car rental propensity score"),
    t(PROPENSITY[3], Gen::Int(0, 100), "cruise propensity score"),
    t(PROPENSITY[4], Gen::Int(0, 100), "vacation package propensity score"),
    t(PROPENSITY[5], Gen::Int(0, 100), "credit card propensity score"),
    t(PROPENSITY[6], Gen::Int(0, 100), "insurance propensity score"),
    t(PROPENSITY[7], Gen::Int(0, 100), "dining propensity score"),
    t(PROPENSITY[8], Gen::Int(0, 100), "retail propensity score"),
    t(PROPENSITY[9], Gen::Int(0, 100), "streaming propensity score"),
    t("last_purchase_date", Gen::DaysBack(365), "made a purchase"),
    t("last_login_date", Gen::DaysBack(180), "logged in"),
    t("last_hotel_booking_date", Gen::DaysBack(730), "booked a hotel"),
    t("last_flight_booking_date", Gen::DaysBack(730), "booked a flight"),
    t("last_email_open_date", Gen::DaysBack(120), "opened an email"),
    t("last_site_visit_date", Gen::DaysBack(90), "visited the website"),
    t("account_created_date", Gen::DaysBack(3_650), "created an account"),
    t("last_app_open_date", Gen::DaysBack(60), "opened the app"),
    t("total_spend", Gen::Int(0, 20_000), "total spend"),
    t("purchase_count", Gen::Int(0, 200), "purchase count"),
    t("avg_order_value", Gen::Int(5, 1_000), "average order value"),
    t("nights_booked_12m", Gen::Int(0, 60), "number of nights booked in the past year"),
    t("flights_12m", Gen::Int(0, 40), "number of flights in the past year"),
    t("email_opens_30d", Gen::Int(0, 30), "email opens in the past month"),
    t("site_visits_30d", Gen::Int(0, 50), "site visits in the past month"),
    t("app_sessions_30d", Gen::Int(0, 100), "app sessions in the past month"),
    t("pages_visited", Gen::List(PAGES, 4), "visited the {} page"),
    t("web_search", Gen::List(SEARCHES, 3), "searched for {}"),
    t("web_destinations", Gen::List(DESTINATIONS, 3), "looked at trips to {}"),
    t("interests", Gen::List(INTERESTS, 3), "are interested in {}"),
    t("email_opt_in", Gen::Flag(0.6), "opted in to email"),
    t("sms_opt_in", Gen::Flag(0.3), "opted in to text messages"),
    t("has_app", Gen::Flag(0.4), "installed the app"),
    t("is_active", Gen::Flag(0.8), "have an active account"),
    t("has_credit_card", Gen::Flag(0.25), "hold the co-branded credit card"),
    t("preferred_channel", Gen::Choice(&["email", "sms", "push", "mail"]), "prefer {} contact"),
    t("device_type", Gen::Choice(&["ios", "android", "desktop"]), "use {} devices"),
    t("segment", Gen::Choice(&["value", "premium", "business", "family"]), "are in the {} segment"),
    t("customer_value_band", Gen::Choice(&["low", "medium", "high"]), "have {} customer value"),
];

const DATE_COLUMNS: [&str; 8] = [
    "last_purchase_date",
    "last_login_date",
    "last_hotel_booking_date",
    "last_flight_booking_date",
    "last_email_open_date",
    "last_site_visit_date",
    "last_app_open_date",
    "member_since",
];

fn template(column: &str) -> &'static Template {
    TEMPLATE
        .iter()
        .find(|t| t.name == column)
        .unwrap_or_else(|| panic!("no template column `{column}`"))
}

fn ctype(gen: Gen) -> ColumnType {
    match gen {
        Gen::Id | Gen::Choice(_) | Gen::Zip => ColumnType::Text,
        Gen::Int(..) => ColumnType::Number,
        Gen::DaysBack(_) => ColumnType::Date,
        Gen::List(..) => ColumnType::TextList,
        Gen::Flag(_) => ColumnType::Boolean,
    }
}

/// The 56-column template schema.
pub fn template_sidecar() -> SchemaSidecar {
    SchemaSidecar {
        id_column: "customer_id".into(),
        columns: TEMPLATE
            .iter()
            .map(|t| ColumnSpec {
                name: t.name.into(),
                ctype: ctype(t.gen),
                description: None,
                list_delimiter: None,
            })
            .collect(),
    }
}

/// One generated criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Cond {
    Above { column: String, value: i64 },
    Below { column: String, value: i64 },
    AtLeast { column: String, value: i64 },
    WithinDays { column: String, days: u32 },
    Equals { column: String, value: String },
    OneOf { column: String, values: Vec<String> },
    Contains { column: String, needle: String },
    IsTrue { column: String },
}

impl Cond {
    pub fn column(&self) -> &str {
        match self {
            Cond::Above { column, .. }
            | Cond::Below { column, .. }
            | Cond::AtLeast { column, .. }
            | Cond::WithinDays { column, .. }
            | Cond::Equals { column, .. }
            | Cond::OneOf { column, .. }
            | Cond::Contains { column, .. }
            | Cond::IsTrue { column } => column,
        }
    }

    /// `numeric`, `date`, `boolean` or `text`.
    pub fn kind(&self) -> &'static str {
        match self {
            Cond::Above { .. } | Cond::Below { .. } | Cond::AtLeast { .. } => "numeric",
            Cond::WithinDays { .. } => "date",
            Cond::IsTrue { .. } => "boolean",
            _ => "text",
        }
    }

    /// Filter-language source.
    pub fn dsl(&self) -> String {
        let quote = |s: &str| format!("{s:?}");
        match self {
            Cond::Above { column, value } => format!("{column} > {value}"),
            Cond::Below { column, value } => format!("{column} < {value}"),
            Cond::AtLeast { column, value } => format!("{column} >= {value}"),
            Cond::WithinDays { column, days } => format!("{column} within_last {days} days"),
            Cond::Equals { column, value } => format!("{column} = {}", quote(value)),
            Cond::OneOf { column, values } => format!(
                "{column} in [{}]",
                values.iter().map(|v| quote(v)).collect::<Vec<_>>().join(", ")
            ),
            Cond::Contains { column, needle } => format!("{column} contains {}", quote(needle)),
            Cond::IsTrue { column } => format!("{column} = true"),
        }
    }

    /// Relative clause, e.g. `whose age is below 30`.
    pub fn clause(&self) -> String {
        let label = template(self.column()).label;
        match self {
            Cond::Above { value, .. } => format!("whose {label} is above {value}"),
            Cond::Below { value, .. } => format!("whose {label} is below {value}"),
            Cond::AtLeast { value, .. } => format!("whose {label} is at least {value}"),
            Cond::WithinDays { days, .. } => format!("who {label} in the last {days} days"),
            Cond::Equals { value, .. } => format!("who {}", label.replace("{}", value)),
            Cond::OneOf { values, .. } => format!("who {}", label.replace("{}", &values.join(" or "))),
            Cond::Contains { needle, .. } => format!("who {}", label.replace("{}", needle)),
            Cond::IsTrue { .. } => format!("who {label}"),
        }
    }

    /// Verifier rule text.
    pub fn rule(&self) -> String {
        format!("Users {}", self.clause())
    }

    /// Planner step text.
    pub fn step(&self) -> String {
        format!("Filter users {}", self.clause())
    }

    /// Row-level truth over raw cells, independent of the DSL evaluator.
    pub fn holds(&self, cell: Option<&Value>, today: NaiveDate) -> bool {
        let Some(cell) = cell else { return false };
        match (self, cell) {
            (Cond::Above { value, .. }, Value::Number(x)) => *x > *value as f64,
            (Cond::Below { value, .. }, Value::Number(x)) => *x < *value as f64,
            (Cond::AtLeast { value, .. }, Value::Number(x)) => *x >= *value as f64,
            (Cond::WithinDays { days, .. }, Value::Date(d)) => {
                let age = (today - *d).num_days();
                (0..=i64::from(*days)).contains(&age)
            }
            (Cond::Equals { value, .. }, Value::Text(s)) => s == value,
            (Cond::OneOf { values, .. }, Value::Text(s)) => values.contains(s),
            (Cond::Contains { needle, .. }, Value::TextList(items)) => {
                let needle = needle.to_lowercase();
                items.iter().any(|i| i.to_lowercase().contains(&needle))
            }
            (Cond::Contains { needle, .. }, Value::Text(s)) => s.to_lowercase().contains(&needle.to_lowercase()),
            (Cond::IsTrue { .. }, Value::Boolean(b)) => *b,
            _ => false,
        }
    }
}

/// Ids of raw rows satisfying every condition, in row order.
pub fn scan(sidecar: &SchemaSidecar, rows: &[Vec<Option<Value>>], conds: &[Cond], today: NaiveDate) -> Vec<String> {
    let index = |name: &str| {
        sidecar
            .columns
            .iter()
            .position(|c| c.name == name)
            .unwrap_or_else(|| panic!("unknown column `{name}`"))
    };
    let id = index(&sidecar.id_column);
    let cols: Vec<usize> = conds.iter().map(|c| index(c.column())).collect();
    rows.iter()
        .filter(|row| conds.iter().zip(&cols).all(|(c, &i)| c.holds(row[i].as_ref(), today)))
        .map(|row| match &row[id] {
            Some(Value::Text(s)) => s.clone(),
            other => panic!("bad id cell {other:?}"),
        })
        .collect()
}

/// A generated filter query with the criteria it was rendered from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthCase {
    pub case: BenchmarkCase,
    pub conds: Vec<Cond>,
    /// A residence-vs-destination mixup that changes this case's audience, if one exists.
    pub distractor: Option<Cond>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChallengeKind {
    /// Numeric threshold set too high for the requested size.
    Threshold,
    /// Page keyword that matches no page name.
    Keyword,
}

/// A query whose literal criteria violate its own size requirement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChallengeCase {
    pub case: BenchmarkCase,
    pub kind: ChallengeKind,
    /// Requested minimum audience size; equals the gold size.
    pub size: usize,
    /// Criteria that stay fixed across iterations.
    pub kept: Vec<Cond>,
    /// The varying criterion per iteration: literal, intermediate (thresholds only), relaxed.
    pub attempts: Vec<Cond>,
    /// The query with the varying criterion dropped.
    pub dropped_query: String,
}

impl ChallengeCase {
    pub fn size_rule(&self) -> String {
        format!("The audience has at least {} users", self.size)
    }
}

pub struct SyntheticBench {
    pub config: GenConfig,
    pub sidecar: SchemaSidecar,
    pub rows: Vec<Vec<Option<Value>>>,
    pub table: CustomerTable,
    pub cases: Vec<SynthCase>,
    pub challenges: Vec<ChallengeCase>,
}

fn assume_today(today: NaiveDate) -> String {
    format!("Assume today is {}.", today.format("%Y-%m-%d"))
}

fn join_clauses(clauses: &[String]) -> String {
    match clauses {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

fn gen_cell(gen: Gen, row: usize, today: NaiveDate, rng: &mut ChaCha8Rng) -> Value {
    match gen {
        Gen::Id => Value::Text(format!("{}", 100_000 + row)),
        Gen::Int(lo, hi) => Value::Number(rng.random_range(lo..=hi) as f64),
        Gen::Choice(opts) => Value::Text(opts.choose(rng).expect("non-empty").to_string()),
        Gen::Zip => Value::Text(format!("{:05}", rng.random_range(1_000..100_000))),
        Gen::DaysBack(max) => Value::Date(today - Duration::days(rng.random_range(0..=max))),
        Gen::List(vocab, k) => {
            let n = rng.random_range(0..=k);
            Value::TextList(vocab.choose_multiple(rng, n).map(|s| s.to_string()).collect())
        }
        Gen::Flag(p) => Value::Boolean(rng.random_bool(p)),
    }
}

fn gen_rows(cfg: &GenConfig, seed: u64) -> Vec<Vec<Option<Value>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..cfg.rows)
        .map(|i| {
            TEMPLATE
                .iter()
                .map(|t| {
                    let null = t.nullable && rng.random_bool(cfg.null_rate);
                    let v = gen_cell(t.gen, i, cfg.today, &mut rng);
                    (!null).then_some(v)
                })
                .collect()
        })
        .collect()
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, xs: &[T]) -> T {
    *xs.choose(rng).expect("non-empty")
}

fn date_cond(rng: &mut ChaCha8Rng) -> Cond {
    Cond::WithinDays {
        column: pick(rng, &DATE_COLUMNS).into(),
        days: pick(rng, &[7, 14, 30, 60, 90, 120, 180]),
    }
}

fn numeric_cond(rng: &mut ChaCha8Rng) -> Cond {
    match rng.random_range(0..5) {
        0 | 1 => Cond::Above {
            column: pick(rng, &PROPENSITY).into(),
            value: pick(rng, &[50, 60, 70, 75, 80, 85, 90]),
        },
        2 => {
            if rng.random_bool(0.5) {
                Cond::Below { column: "age".into(), value: pick(rng, &[25, 30, 35, 40]) }
            } else {
                Cond::AtLeast { column: "age".into(), value: pick(rng, &[50, 60, 65]) }
            }
        }
        3 => Cond::Above {
            column: pick(rng, &["total_spend", "loyalty_points"]).into(),
            value: pick(rng, &[5_000, 10_000, 15_000]),
        },
        _ => Cond::AtLeast {
            column: pick(rng, &["nights_booked_12m", "flights_12m", "site_visits_30d"]).into(),
            value: pick(rng, &[5, 10, 20]),
        },
    }
}

fn text_cond(rng: &mut ChaCha8Rng) -> Cond {
    match rng.random_range(0..3) {
        0 => Cond::OneOf {
            column: "loyalty_tier".into(),
            values: vec!["gold".into(), "platinum".into()],
        },
        1 => Cond::Contains {
            column: "pages_visited".into(),
            needle: pick(rng, &["Hotels", "Travel Deals", "Rewards", "Cruises"]).into(),
        },
        _ => Cond::Contains {
            column: "interests".into(),
            needle: pick(rng, &["travel", "golf", "fitness"]).into(),
        },
    }
}

fn state_cond(rng: &mut ChaCha8Rng) -> Cond {
    Cond::Equals {
        column: "state".into(),
        value: pick(rng, &STATES[..6]).into(),
    }
}

/// Residence confused with searched destinations.
fn distractor_for(conds: &[Cond]) -> Option<Cond> {
    conds.iter().find_map(|c| match c {
        Cond::Equals { column, value } if column == "state" => Some(Cond::Contains {
            column: "web_destinations".into(),
            needle: value.clone(),
        }),
        _ => None,
    })
}

fn build_cases(
    cfg: &GenConfig,
    sidecar: &SchemaSidecar,
    rows: &[Vec<Option<Value>>],
    seed: u64,
) -> Result<Vec<SynthCase>, GenError> {
    let (free, span) = cfg.layout()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_ca5e);
    let all_users = span - 1;
    let no_users = span - 2;
    let mut out = Vec::with_capacity(cfg.cases);
    for i in 0..cfg.cases {
        let mut conds = Vec::new();
        let mut tags = vec!["filter".to_string()];
        if i == all_users {
            conds.push(Cond::AtLeast { column: "age".into(), value: 18 });
            tags.push("all_users".into());
        } else if i == no_users {
            conds.push(Cond::Above { column: "propensity_cruises".into(), value: 100 });
            tags.push("no_users".into());
        } else {
            if i < cfg.date_cases {
                conds.push(date_cond(&mut rng));
            }
            if (span - cfg.numeric_cases..span).contains(&i) {
                conds.push(numeric_cond(&mut rng));
            }
            if i >= free {
                conds.push(Cond::IsTrue {
                    column: pick(&mut rng, &["email_opt_in", "sms_opt_in"]).into(),
                });
            }
            let text_only = (span..free).contains(&i);
            if text_only || i % 5 == 0 || i % 5 == 2 {
                conds.push(state_cond(&mut rng));
            }
            if text_only || (conds.len() < 3 && rng.random_bool(0.3)) {
                conds.push(text_cond(&mut rng));
            }
        }
        let mut kinds: Vec<&str> = conds.iter().map(Cond::kind).filter(|k| *k != "text").collect();
        kinds.dedup();
        tags.extend(kinds.iter().map(|k| k.to_string()));
        let query = format!(
            "Find users {}. {}",
            join_clauses(&conds.iter().map(Cond::clause).collect::<Vec<_>>()),
            assume_today(cfg.today)
        );
        let gold_ids = scan(sidecar, rows, &conds, cfg.today);
        let distractor = distractor_for(&conds).filter(|d| {
            let mut with = conds.clone();
            with.push(d.clone());
            scan(sidecar, rows, &with, cfg.today).len() != gold_ids.len()
        });
        out.push(SynthCase {
            case: BenchmarkCase {
                query_id: format!("q{:03}", i + 1),
                query,
                gold_ids,
                today: cfg.today,
                tags,
            },
            conds,
            distractor,
        });
    }
    Ok(out)
}

fn threshold_challenge(
    k: usize,
    cfg: &GenConfig,
    sidecar: &SchemaSidecar,
    rows: &[Vec<Option<Value>>],
    rng: &mut ChaCha8Rng,
) -> Result<ChallengeCase, GenError> {
    let column = PROPENSITY[k % PROPENSITY.len()].to_string();
    let literal = rng.random_range(88..=92);
    let relaxed = rng.random_range(60..=70);
    let mid = (literal + relaxed) / 2;
    let kept = if k % 2 == 1 { vec![state_cond(rng)] } else { Vec::new() };
    let attempts: Vec<Cond> = [literal, mid, relaxed]
        .iter()
        .map(|&value| Cond::Above { column: column.clone(), value })
        .collect();
    let counts: Vec<usize> = attempts
        .iter()
        .map(|a| {
            let mut c = kept.clone();
            c.push(a.clone());
            scan(sidecar, rows, &c, cfg.today).len()
        })
        .collect();
    let size = counts[2];
    if !(counts[0] < counts[1] && counts[1] < size) {
        return Err(GenError::Challenge(k, format!("audience sizes {counts:?} do not grow with relaxation")));
    }
    challenge(k, cfg, sidecar, rows, ChallengeKind::Threshold, size, kept, attempts)
}

fn keyword_challenge(
    k: usize,
    cfg: &GenConfig,
    sidecar: &SchemaSidecar,
    rows: &[Vec<Option<Value>>],
    rng: &mut ChaCha8Rng,
) -> Result<ChallengeCase, GenError> {
    let kept = if k % 2 == 1 { vec![state_cond(rng)] } else { Vec::new() };
    let attempts = vec![
        Cond::Contains { column: "pages_visited".into(), needle: "Finance".into() },
        Cond::Contains { column: "pages_visited".into(), needle: "Financial Services".into() },
    ];
    let mut relaxed = kept.clone();
    relaxed.push(attempts[1].clone());
    let size = scan(sidecar, rows, &relaxed, cfg.today).len();
    if size == 0 {
        return Err(GenError::Challenge(k, "no rows carry the relaxed keyword".into()));
    }
    challenge(k, cfg, sidecar, rows, ChallengeKind::Keyword, size, kept, attempts)
}

#[allow(clippy::too_many_arguments)]
fn challenge(
    k: usize,
    cfg: &GenConfig,
    sidecar: &SchemaSidecar,
    rows: &[Vec<Option<Value>>],
    kind: ChallengeKind,
    size: usize,
    kept: Vec<Cond>,
    attempts: Vec<Cond>,
) -> Result<ChallengeCase, GenError> {
    let mut literal = kept.clone();
    literal.push(attempts[0].clone());
    if scan(sidecar, rows, &literal, cfg.today).len() >= size {
        return Err(GenError::Challenge(k, "literal criteria already meet the size".into()));
    }
    let mut gold = kept.clone();
    gold.push(attempts.last().expect("attempts").clone());
    let clauses: Vec<String> = kept.iter().chain([&attempts[0]]).map(Cond::clause).collect();
    let kept_clauses: Vec<String> = kept.iter().map(Cond::clause).collect();
    let head = format!("Give me at least {size} users");
    let with = |clauses: &[String]| {
        if clauses.is_empty() {
            format!("{head}. {}", assume_today(cfg.today))
        } else {
            format!("{head} {}. {}", join_clauses(clauses), assume_today(cfg.today))
        }
    };
    let kind_tag = match kind {
        ChallengeKind::Threshold => "numeric",
        ChallengeKind::Keyword => "text",
    };
    Ok(ChallengeCase {
        case: BenchmarkCase {
            query_id: format!("c{:03}", k + 1),
            query: with(&clauses),
            gold_ids: scan(sidecar, rows, &gold, cfg.today),
            today: cfg.today,
            tags: vec!["challenge".into(), kind_tag.into()],
        },
        kind,
        size,
        kept,
        attempts,
        dropped_query: with(&kept_clauses),
    })
}

/// Deterministic table, filter cases and challenge cases for `seed`.
pub fn generate_synthetic(cfg: &GenConfig, seed: u64) -> Result<SyntheticBench, GenError> {
    cfg.layout()?;
    let sidecar = template_sidecar();
    let rows = gen_rows(cfg, seed);
    let mut builder = TableBuilder::new(&sidecar)?;
    for row in &rows {
        builder.push_row(row.clone())?;
    }
    let table = builder.finish()?;
    let cases = build_cases(cfg, &sidecar, &rows, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc4a1_1e06);
    let mut challenges = Vec::new();
    for k in 0..cfg.threshold_challenges {
        challenges.push(threshold_challenge(k, cfg, &sidecar, &rows, &mut rng)?);
    }
    for j in 0..cfg.keyword_challenges {
        let k = cfg.threshold_challenges + j;
        challenges.push(keyword_challenge(k, cfg, &sidecar, &rows, &mut rng)?);
    }
    Ok(SyntheticBench {
        config: cfg.clone(),
        sidecar,
        rows,
        table,
        cases,
        challenges,
    })
}

/// Human-written memories matching the template schema.
pub fn default_memories() -> MemoryStore {
    let mut store = MemoryStore::new();
    let semantic = [
        "The state column holds the two-letter mailing state of the customer; filter on state to select where users live.",
        "web_destinations lists places the customer looked at trips to, not where they live; never use it to filter by residence.",
        "Propensity scores range from 0 to 100; use the propensity column that matches the product, e.g. propensity_hotels for hotel bookings.",
        "Phrases like 'in the last 30 days' map to within_last on the matching date column, anchored at today.",
        "loyalty_tier values are bronze, silver, gold and platinum.",
        "pages_visited holds page names such as Financial Services, Travel Deals and Hotels.",
    ];
    let episodic = [
        "Issue: the audience size is too small because the propensity threshold is too high. Potential solution: lower the propensity threshold step by step until the size requirement is met.",
        "Issue: zero users visited the Finance page. Potential solution: page names vary; the Finance page is listed as Financial Services.",
        "Issue: a lookback date rule failed. Potential solution: use within_last on the date column named in the rule.",
    ];
    // Fixed timestamps keep the generated memory file reproducible.
    let created_at = chrono::DateTime::from_timestamp(1_735_689_600, 0).expect("valid timestamp");
    let items = semantic
        .into_iter()
        .map(|t| (MemoryKind::Semantic, t))
        .chain(episodic.into_iter().map(|t| (MemoryKind::Episodic, t)));
    for (i, (kind, text)) in items.enumerate() {
        store
            .insert(MemoryItem {
                id: format!("m{:05}", i + 1),
                kind,
                text: text.to_string(),
                source: MemorySource::Human,
                created_at,
            })
            .expect("fixture ids are unique");
    }
    store
}

fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<(), GenError> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    for item in items {
        writeln!(f, "{}", serde_json::to_string(&item).expect("serializable"))?;
    }
    f.flush()?;
    Ok(())
}

impl SyntheticBench {
    /// Write the table, schema, case files, default memories and scripted responses.
    pub fn write_to(&self, dir: &Path) -> Result<(), GenError> {
        fs::create_dir_all(dir)?;
        self.table.write_csv(fs::File::create(dir.join("table.csv"))?)?;
        fs::write(
            dir.join("schema.json"),
            serde_json::to_string_pretty(&self.sidecar).expect("serializable"),
        )?;
        write_jsonl(&dir.join("cases.jsonl"), self.cases.iter().map(|c| &c.case))?;
        write_jsonl(&dir.join("challenge.jsonl"), self.challenges.iter().map(|c| &c.case))?;
        default_memories()
            .persist(&dir.join("memory.jsonl"))
            .map_err(|e| GenError::Io(std::io::Error::other(e.to_string())))?;
        super::ablation::ScriptLibrary::for_bench(self).write_to(dir)?;
        Ok(())
    }

    /// Gold-size mean and sample standard deviation over the filter cases.
    pub fn gold_size_stats(&self) -> super::MeanStd {
        let sizes: Vec<f64> = self.cases.iter().map(|c| c.case.gold_ids.len() as f64).collect();
        super::MeanStd::of(&sizes)
    }

    pub fn pool_ids(&self) -> HashSet<String> {
        self.table.audience_ids().into_iter().collect()
    }
}
