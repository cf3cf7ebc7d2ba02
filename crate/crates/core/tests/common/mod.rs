//! Shared fixtures: a random query generator over the registry schema and a
//! small-snapshot generator. Both are driven by a seed so failures replay.

#![allow(dead_code)]

pub mod http;

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use aqg::mql::{Aggregate, Expr, QueryAst, SelectExpr};
use aqg::relstore::Snapshot;
use aqg::synthgen::{generate_dataset, GenConfig, DIAGNOSES};

#[derive(Clone, Copy, PartialEq)]
enum Ty {
    Int,
    Text(&'static [&'static str]),
    Date,
    Bool,
}

const COUNTRIES: &[&str] = &["Germany", "China", "Norway", "Brazil", "Atlantis"];
const GENDERS: &[&str] = &["M", "F"];
const TESTS: &[&str] = &["HBsAg", "Anti-HBs"];
const PHASES: &[&str] = &["baseline", "second"];
const RESULTS: &[&str] = &["negative", "positive"];
const FREE_TEXT: &[&str] = &["x", "Elm St", "04109"];

struct Col {
    name: &'static str,
    ty: Ty,
    blocked: bool,
}

const fn col(name: &'static str, ty: Ty) -> Col {
    Col {
        name,
        ty,
        blocked: false,
    }
}

const fn blocked(name: &'static str, ty: Ty) -> Col {
    Col {
        name,
        ty,
        blocked: true,
    }
}

const PATIENT: &[Col] = &[
    col("PID", Ty::Int),
    blocked("Name", Ty::Text(FREE_TEXT)),
    col("Gender", Ty::Text(GENDERS)),
    col("DOB", Ty::Date),
    col("Country", Ty::Text(COUNTRIES)),
    blocked("Address", Ty::Text(FREE_TEXT)),
    blocked("ZipCode", Ty::Text(FREE_TEXT)),
];

const EXAMINATION: &[Col] = &[
    col("Report_ID", Ty::Int),
    col("Patient_ID", Ty::Int),
    col("Endoscopy_Date", Ty::Date),
    col("Is_Dialysis", Ty::Bool),
    col("Diagnoses_Text", Ty::Text(&DIAGNOSES)),
];

const DETECTION: &[Col] = &[
    col("Detection_ID", Ty::Int),
    col("Patient_ID", Ty::Int),
    col("Test_Name", Ty::Text(TESTS)),
    col("Phase", Ty::Text(PHASES)),
    col("Result", Ty::Text(RESULTS)),
    col("Detection_Date", Ty::Date),
];

const TABLES: [(&str, &[Col]); 3] = [
    ("patient", PATIENT),
    ("examination", EXAMINATION),
    ("clinicaldetection", DETECTION),
];

/// A generated query as text, with raw values for its placeholders.
#[derive(Debug, Clone)]
pub struct GenQuery {
    pub text: String,
    pub params: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
struct Item {
    expr: String,
    alias: Option<String>,
    aggregate: bool,
}

#[derive(Debug, Clone)]
struct Spec {
    from: Vec<(usize, String)>,
    select: Vec<Item>,
    conds: Vec<String>,
    group_by: Vec<String>,
    order_by: Vec<String>,
    limit: Option<u32>,
    params: BTreeMap<String, String>,
}

impl Spec {
    fn text(&self) -> String {
        let select: Vec<String> = self
            .select
            .iter()
            .map(|i| match &i.alias {
                Some(a) => format!("{} AS {a}", i.expr),
                None => i.expr.clone(),
            })
            .collect();
        let from: Vec<String> = self
            .from
            .iter()
            .map(|(t, a)| format!("{} {a}", TABLES[*t].0))
            .collect();
        let mut s = format!("SELECT {} FROM {}", select.join(", "), from.join(", "));
        if !self.conds.is_empty() {
            s.push_str(" WHERE ");
            s.push_str(&self.conds.join(" AND "));
        }
        if !self.group_by.is_empty() {
            s.push_str(" GROUP BY ");
            s.push_str(&self.group_by.join(", "));
        }
        if !self.order_by.is_empty() {
            s.push_str(" ORDER BY ");
            s.push_str(&self.order_by.join(", "));
        }
        if let Some(n) = self.limit {
            s.push_str(&format!(" LIMIT {n}"));
        }
        s
    }

    fn finish(self) -> GenQuery {
        GenQuery {
            text: self.text(),
            params: self.params,
        }
    }
}

pub struct QueryGen {
    rng: StdRng,
    /// Chance that a value position becomes a `:name` placeholder.
    pub param_rate: f64,
    /// Chance of a plain (non-aggregate) query.
    pub plain_rate: f64,
}

fn date(rng: &mut StdRng) -> String {
    // A fifth of the time, the non-padded form.
    let (y, m, d) = (
        rng.gen_range(2008..=2012),
        rng.gen_range(1..=12),
        rng.gen_range(1..=28),
    );
    if rng.gen_bool(0.2) {
        format!("{y}-{m}-{d}")
    } else {
        format!("{y:04}-{m:02}-{d:02}")
    }
}

impl QueryGen {
    pub fn new(seed: u64) -> QueryGen {
        QueryGen {
            rng: StdRng::seed_from_u64(seed),
            param_rate: 0.3,
            plain_rate: 0.15,
        }
    }

    fn pick_col(&mut self, table: usize, pred: impl Fn(&Col) -> bool) -> Option<&'static Col> {
        let cols: Vec<&'static Col> = TABLES[table].1.iter().filter(|c| !c.blocked && pred(c)).collect();
        cols.choose(&mut self.rng).copied()
    }

    /// Literal text (quoted where needed) and its raw form for binding.
    fn value(&mut self, ty: Ty) -> (String, String) {
        match ty {
            Ty::Int => {
                let n = self.rng.gen_range(0..60);
                (n.to_string(), n.to_string())
            }
            Ty::Text(pool) => {
                let v = *pool.choose(&mut self.rng).unwrap();
                (format!("'{}'", v.replace('\'', "''")), v.to_string())
            }
            Ty::Date => {
                let d = date(&mut self.rng);
                (format!("'{d}'"), d)
            }
            Ty::Bool => {
                let b = self.rng.gen_bool(0.5);
                (if b { "TRUE" } else { "FALSE" }.into(), b.to_string())
            }
        }
    }

    /// A value position: a literal, or a fresh placeholder with a recorded value.
    fn operand(&mut self, ty: Ty, spec: &mut Spec) -> String {
        let (lit, raw) = self.value(ty);
        // Raw text holding a quote would trip the injection screen.
        if !raw.contains('\'') && self.rng.gen_bool(self.param_rate) {
            let name = format!("p{}", spec.params.len());
            spec.params.insert(name.clone(), raw);
            format!(":{name}")
        } else {
            lit
        }
    }

    fn condition(&mut self, spec: &mut Spec) -> String {
        let n = spec.from.len();
        let (t, alias) = spec.from[self.rng.gen_range(0..n)].clone();
        let c = self.pick_col(t, |_| true).unwrap();
        let lhs = format!("{alias}.{}", c.name);
        match self.rng.gen_range(0..10) {
            0..=4 => {
                let ops: &[&str] = match c.ty {
                    Ty::Bool => &["=", "<>"],
                    Ty::Text(_) if self.rng.gen_bool(0.7) => &["=", "<>"],
                    _ => &["=", "<>", "<", "<=", ">", ">="],
                };
                let op = *ops.choose(&mut self.rng).unwrap();
                let rhs = self.operand(c.ty, spec);
                format!("{lhs} {op} {rhs}")
            }
            5..=6 if matches!(c.ty, Ty::Int | Ty::Date) => {
                // Bounds are drawn, then ordered, so BETWEEN is never empty by construction.
                let (a, ar) = self.value(c.ty);
                let (b, br) = self.value(c.ty);
                let key = |s: &str| -> Vec<i64> { s.split('-').map(|p| p.parse().unwrap()).collect() };
                let ((lo, lor), (hi, hir)) = if key(&ar) <= key(&br) {
                    ((a, ar), (b, br))
                } else {
                    ((b, br), (a, ar))
                };
                let mut side = |lit: String, raw: String, spec: &mut Spec| {
                    if self.rng.gen_bool(self.param_rate) {
                        let name = format!("p{}", spec.params.len());
                        spec.params.insert(name.clone(), raw);
                        format!(":{name}")
                    } else {
                        lit
                    }
                };
                let lo = side(lo, lor, spec);
                let hi = side(hi, hir, spec);
                format!("{lhs} BETWEEN {lo} AND {hi}")
            }
            7 => {
                let a = self.condition(spec);
                let b = self.condition(spec);
                format!("({a} OR {b})")
            }
            _ => {
                // Column against a same-typed column of any entry.
                let (t2, alias2) = spec.from[self.rng.gen_range(0..n)].clone();
                match self.pick_col(t2, |d| d.ty == c.ty) {
                    Some(d) => format!("{lhs} = {alias2}.{}", d.name),
                    None => {
                        let rhs = self.operand(c.ty, spec);
                        format!("{lhs} = {rhs}")
                    }
                }
            }
        }
    }

    fn group_key(&mut self, spec: &mut Spec) -> String {
        let (t, alias) = spec.from[self.rng.gen_range(0..spec.from.len())].clone();
        let c = self.pick_col(t, |_| true).unwrap();
        let bucketable = matches!(c.ty, Ty::Int | Ty::Date);
        if bucketable && self.rng.gen_bool(0.25) {
            let mut bounds: Vec<i64> = (0..self.rng.gen_range(1..4))
                .map(|_| self.rng.gen_range(0..80))
                .collect();
            bounds.sort();
            bounds.dedup();
            let bounds: Vec<String> = bounds.iter().map(|b| b.to_string()).collect();
            let input = if c.ty == Ty::Date {
                let r = self.operand(Ty::Date, spec);
                format!("AGE_YEARS({alias}.{}, {r})", c.name)
            } else {
                format!("{alias}.{}", c.name)
            };
            format!("BUCKET({input}, {})", bounds.join(", "))
        } else {
            format!("{alias}.{}", c.name)
        }
    }

    fn aggregate(&mut self, spec: &Spec) -> String {
        let (t, alias) = &spec.from[self.rng.gen_range(0..spec.from.len())];
        let c = self.pick_col(*t, |_| true).unwrap();
        match self.rng.gen_range(0..3) {
            0 => "COUNT(*)".into(),
            1 => format!("COUNT({alias}.{})", c.name),
            _ => format!("COUNT(DISTINCT {alias}.{})", c.name),
        }
    }

    fn spec(&mut self) -> Spec {
        let n_from = *[1, 1, 2, 2, 2, 3].choose(&mut self.rng).unwrap();
        let from: Vec<(usize, String)> = (0..n_from)
            .map(|i| (self.rng.gen_range(0..3), format!("t{i}")))
            .collect();
        let mut spec = Spec {
            from,
            select: Vec::new(),
            conds: Vec::new(),
            group_by: Vec::new(),
            order_by: Vec::new(),
            limit: None,
            params: BTreeMap::new(),
        };
        // Join most later entries to an earlier one through the patient key.
        for i in 1..n_from {
            if self.rng.gen_bool(0.8) {
                let j = self.rng.gen_range(0..i);
                let key = |t: usize| if t == 0 { "PID" } else { "Patient_ID" };
                let (ti, ai) = &spec.from[i];
                let (tj, aj) = &spec.from[j];
                spec.conds.push(format!("{ai}.{} = {aj}.{}", key(*ti), key(*tj)));
            }
        }
        for _ in 0..self.rng.gen_range(0..3) {
            let c = self.condition(&mut spec);
            spec.conds.push(c);
        }
        spec.conds.shuffle(&mut self.rng);

        let plain = self.rng.gen_bool(self.plain_rate);
        if plain {
            for _ in 0..self.rng.gen_range(1..3) {
                let k = self.group_key(&mut spec);
                spec.select.push(Item {
                    expr: k,
                    alias: None,
                    aggregate: false,
                });
            }
        } else {
            for _ in 0..self.rng.gen_range(0..3) {
                let k = self.group_key(&mut spec);
                if spec.group_by.contains(&k) {
                    continue;
                }
                spec.group_by.push(k.clone());
                if self.rng.gen_bool(0.9) {
                    spec.select.push(Item {
                        expr: k,
                        alias: None,
                        aggregate: false,
                    });
                }
            }
            for _ in 0..self.rng.gen_range(if spec.select.is_empty() { 1 } else { 0 }..3) {
                let a = self.aggregate(&spec);
                spec.select.push(Item {
                    expr: a,
                    alias: None,
                    aggregate: true,
                });
            }
            if spec.select.is_empty() {
                spec.select.push(Item {
                    expr: "COUNT(*)".into(),
                    alias: None,
                    aggregate: true,
                });
            }
        }
        spec.select.shuffle(&mut self.rng);
        for (i, item) in spec.select.iter_mut().enumerate() {
            if (item.aggregate || self.rng.gen_bool(0.3)) && self.rng.gen_bool(0.6) {
                item.alias = Some(format!("c{i}"));
            }
        }
        // ORDER BY aliases, or plain selected columns by their text.
        let orderable: Vec<String> = spec
            .select
            .iter()
            .filter_map(|i| match &i.alias {
                Some(a) => Some(a.clone()),
                None if !i.expr.contains('(') => Some(i.expr.clone()),
                None => None,
            })
            .collect();
        for key in orderable {
            if self.rng.gen_bool(0.4) {
                let dir = *["", " ASC", " DESC"].choose(&mut self.rng).unwrap();
                spec.order_by.push(format!("{key}{dir}"));
            }
        }
        if self.rng.gen_bool(0.2) {
            spec.limit = Some(self.rng.gen_range(1..6));
        }
        spec
    }

    /// A query that parses and resolves against the registry schema.
    pub fn query(&mut self) -> GenQuery {
        self.spec().finish()
    }

    /// A query that references at least one block-listed name somewhere.
    pub fn blocked_query(&mut self) -> (GenQuery, &'static str) {
        let mut spec = self.spec();
        let p = match spec.from.iter().find(|(t, _)| *t == 0) {
            Some((_, a)) => a.clone(),
            None => {
                let a = format!("t{}", spec.from.len());
                spec.from.push((0, a.clone()));
                spec.conds.push(format!(
                    "{a}.PID = {}.{}",
                    spec.from[0].1,
                    if spec.from[0].0 == 0 { "PID" } else { "Patient_ID" }
                ));
                a
            }
        };
        let blocked = *["Name", "Address", "ZipCode"].choose(&mut self.rng).unwrap();
        let site = match self.rng.gen_range(0..7) {
            0 => {
                spec.select.push(Item {
                    expr: format!("{p}.{blocked}"),
                    alias: None,
                    aggregate: false,
                });
                "select column"
            }
            1 => {
                spec.conds.push(format!("{p}.{blocked} = 'x'"));
                "where"
            }
            2 => {
                let k = format!("{p}.{blocked}");
                spec.group_by.push(k.clone());
                spec.select.push(Item {
                    expr: k,
                    alias: None,
                    aggregate: false,
                });
                "group by"
            }
            3 => {
                spec.select.push(Item {
                    expr: format!("COUNT(DISTINCT {p}.{blocked})"),
                    alias: None,
                    aggregate: true,
                });
                "aggregate argument"
            }
            4 => {
                let alias = *["name", "Age", "ADDRESS", "zipcode"]
                    .choose(&mut self.rng)
                    .unwrap();
                spec.select.push(Item {
                    expr: "COUNT(*)".into(),
                    alias: Some(alias.into()),
                    aggregate: true,
                });
                "select alias"
            }
            5 => {
                let k = format!("BUCKET(AGE_YEARS({p}.DOB, '2010-12-31'), 18, 40, 60)");
                spec.group_by.push(k.clone());
                spec.select.push(Item {
                    expr: k,
                    alias: None,
                    aggregate: false,
                });
                "derived age"
            }
            _ => {
                // Rename the patient entry so every qualifier using it is blocked.
                let new = *["name", "address", "zipcode"].choose(&mut self.rng).unwrap();
                let q = format!("{p}.");
                let rq = format!("{new}.");
                let fix = |s: &mut String| *s = s.replace(&q, &rq);
                for (_, a) in spec.from.iter_mut().filter(|(_, a)| *a == p) {
                    *a = new.into();
                }
                spec.conds.iter_mut().for_each(fix);
                spec.group_by.iter_mut().for_each(fix);
                spec.order_by.iter_mut().for_each(fix);
                for i in &mut spec.select {
                    fix(&mut i.expr);
                }
                "from alias"
            }
        };
        (spec.finish(), site)
    }

    /// A query with at least one placeholder.
    pub fn parameterized(&mut self) -> GenQuery {
        loop {
            let q = self.query();
            if !q.params.is_empty() {
                return q;
            }
        }
    }

    pub fn rng(&mut self) -> &mut StdRng {
        &mut self.rng
    }
}

/// A random snapshot of at most `max_rows` rows per table.
pub fn small_snapshot(seed: u64, max_rows: usize) -> Snapshot {
    let mut rng = StdRng::seed_from_u64(seed ^ 0x5EED);
    let n_patients = rng.gen_range(0..=max_rows);
    let (n_examinations, n_detections) = if n_patients == 0 {
        (0, 0)
    } else {
        (rng.gen_range(0..=max_rows), rng.gen_range(0..=max_rows))
    };
    let mut cfg = GenConfig {
        seed,
        n_patients,
        n_examinations,
        n_detections,
        ..GenConfig::default()
    };
    // Few countries so groups collide.
    cfg.pools.countries.truncate(4);
    generate_dataset(&cfg).unwrap().into_snapshot().unwrap()
}

/// Independent check that every output column is an aggregate or equals a
/// GROUP BY key (compared structurally by resolved column).
pub fn structurally_aggregate_only(q: &QueryAst) -> bool {
    fn same(a: &Expr, b: &Expr) -> bool {
        match (a, b) {
            (Expr::Column(x), Expr::Column(y)) => x.source == y.source && x.column == y.column,
            (
                Expr::AgeYears {
                    dob: d1,
                    reference: r1,
                },
                Expr::AgeYears {
                    dob: d2,
                    reference: r2,
                },
            ) => d1.source == d2.source && d1.column == d2.column && r1 == r2,
            (
                Expr::Bucket {
                    input: i1,
                    bounds: b1,
                },
                Expr::Bucket {
                    input: i2,
                    bounds: b2,
                },
            ) => b1 == b2 && same(i1, i2),
            _ => false,
        }
    }
    let grouped = !q.group_by.is_empty();
    let any_agg = q
        .select
        .iter()
        .any(|i| matches!(i.expr, SelectExpr::Aggregate(_)));
    (grouped || any_agg)
        && q.select.iter().all(|i| match &i.expr {
            SelectExpr::Aggregate(
                Aggregate::CountStar | Aggregate::Count(_) | Aggregate::CountDistinct(_),
            ) => true,
            SelectExpr::Expr(e) => q.group_by.iter().any(|g| same(e, g)),
        })
}

pub fn raw_params(kv: &[(&str, &str)]) -> BTreeMap<String, String> {
    kv.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

/// The default dataset (seed 42, full size).
pub fn full_snapshot() -> Snapshot {
    generate_dataset(&GenConfig::default())
        .unwrap()
        .into_snapshot()
        .unwrap()
}

/// Request parameters for the seeded stored query `name`.
pub fn seeded_params(name: &str) -> BTreeMap<String, String> {
    match name {
        "q1" | "q2" | "q3" => raw_params(&[("start", "2010-1-1"), ("end", "2010-12-30")]),
        _ => BTreeMap::new(),
    }
}
