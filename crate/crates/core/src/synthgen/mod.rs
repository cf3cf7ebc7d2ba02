//! Deterministic synthetic data for the endoscopy registry.
//!
//! The generator is a pure function of its [`GenConfig`]: every draw comes
//! from one [`Prng`] stream consumed in a fixed order (patients, then
//! examinations, then detection panels, then leftover detection rows).

mod prng;

pub use prng::{rng_next, Prng, GOLDEN_GAMMA};

use crate::relstore::{build_snapshot, gastros, Date, Row, Snapshot, StoreError, Table, Value};

/// The five diagnosis strings reported in the registry's top-5 listing.
pub const DIAGNOSES: [&str; 5] = [
    "Colon: Primary malignant tumor, Quiescent Crohn's disease",
    "Esophagus: Normal, Ectopic gastric mucosa",
    "Esophagus: Reflux esophagitis",
    "Esophagus: Varices certain",
    "Esophagus:Barrett's esophagus",
];

const COUNTRIES: [&str; 10] = [
    "Germany",
    "China",
    "New Zealand",
    "Norway",
    "Brazil",
    "Canada",
    "India",
    "Japan",
    "Macao",
    "United States",
];

const FIRST_NAMES: [&str; 12] = [
    "Alice", "Bruno", "Chen", "Dana", "Emil", "Fatima", "Greta", "Hiro", "Ines", "Jonas", "Kiri", "Lena",
];

const LAST_NAMES: [&str; 10] = [
    "Ash", "Berg", "Costa", "Dahl", "Eze", "Fong", "Gray", "Holm", "Ito", "Jansen",
];

const STREETS: [&str; 8] = [
    "Elm St",
    "Harbour Rd",
    "Mill Lane",
    "Queen St",
    "Park Ave",
    "Station Rd",
    "Lake Dr",
    "Hill Tce",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ValuePools {
    pub countries: Vec<String>,
    pub first_names: Vec<String>,
    pub last_names: Vec<String>,
    pub streets: Vec<String>,
    pub diagnoses: Vec<String>,
}

fn owned(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

impl Default for ValuePools {
    fn default() -> Self {
        ValuePools {
            countries: owned(&COUNTRIES),
            first_names: owned(&FIRST_NAMES),
            last_names: owned(&LAST_NAMES),
            streets: owned(&STREETS),
            diagnoses: owned(&DIAGNOSES),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub seed: u64,
    pub n_patients: usize,
    pub n_examinations: usize,
    pub n_detections: usize,
    /// Range for examination and detection dates.
    pub date_window: (Date, Date),
    /// Range for dates of birth.
    pub birth_window: (Date, Date),
    /// Probability that a Hepatitis-B panel is negative on all four tests.
    pub negative_panel_fraction: f64,
    pub dialysis_probability: f64,
    pub pools: ValuePools,
}

pub const DEFAULT_SEED: u64 = 42;

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: DEFAULT_SEED,
            n_patients: 1881,
            n_examinations: 2020,
            n_detections: 6393,
            date_window: (Date::new(2009, 1, 1).unwrap(), Date::new(2011, 12, 31).unwrap()),
            birth_window: (Date::new(1925, 1, 1).unwrap(), Date::new(2005, 12, 31).unwrap()),
            negative_panel_fraction: 0.2,
            dialysis_probability: 0.5,
            pools: ValuePools::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GenError {
    #[error("value pool `{0}` is empty")]
    EmptyPool(&'static str),
    #[error("{0} rows requested but there are no patients to reference")]
    NoPatients(&'static str),
    #[error("window `{0}` starts after it ends")]
    Window(&'static str),
    #[error("probability `{0}` must lie in [0, 1]")]
    Probability(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub patients: Vec<Row>,
    pub examinations: Vec<Row>,
    pub detections: Vec<Row>,
}

impl Dataset {
    pub fn total_rows(&self) -> usize {
        self.patients.len() + self.examinations.len() + self.detections.len()
    }

    /// Tables in `gastros::TABLES` order.
    pub fn into_tables(self) -> Vec<Table> {
        vec![
            Table {
                schema: gastros::patient(),
                rows: self.patients,
            },
            Table {
                schema: gastros::examination(),
                rows: self.examinations,
            },
            Table {
                schema: gastros::clinical_detection(),
                rows: self.detections,
            },
        ]
    }

    /// Integrity-checked snapshot of the three tables.
    pub fn into_snapshot(self) -> Result<Snapshot, StoreError> {
        build_snapshot(
            self.into_tables()
                .into_iter()
                .map(|t| (t.schema, t.rows))
                .collect(),
        )
    }
}

fn check(cfg: &GenConfig) -> Result<(), GenError> {
    let pools = &cfg.pools;
    for (name, pool) in [
        ("countries", &pools.countries),
        ("first_names", &pools.first_names),
        ("last_names", &pools.last_names),
        ("streets", &pools.streets),
        ("diagnoses", &pools.diagnoses),
    ] {
        if pool.is_empty() {
            return Err(GenError::EmptyPool(name));
        }
    }
    if cfg.n_patients == 0 {
        if cfg.n_examinations > 0 {
            return Err(GenError::NoPatients("examination"));
        }
        if cfg.n_detections > 0 {
            return Err(GenError::NoPatients("clinicaldetection"));
        }
    }
    if cfg.date_window.0 > cfg.date_window.1 {
        return Err(GenError::Window("date_window"));
    }
    if cfg.birth_window.0 > cfg.birth_window.1 {
        return Err(GenError::Window("birth_window"));
    }
    for (name, p) in [
        ("negative_panel_fraction", cfg.negative_panel_fraction),
        ("dialysis_probability", cfg.dialysis_probability),
    ] {
        if !(0.0..=1.0).contains(&p) {
            return Err(GenError::Probability(name));
        }
    }
    Ok(())
}

fn date_in(rng: &mut Prng, window: (Date, Date)) -> Date {
    let day = rng.range_inclusive(window.0.ordinal() as i64, window.1.ordinal() as i64);
    Date::from_ordinal(day as i32).expect("day inside a valid window")
}

fn text(s: &str) -> Value {
    Value::Str(s.to_string())
}

const TESTS: [&str; 2] = ["HBsAg", "Anti-HBs"];
const PHASES: [&str; 2] = ["baseline", "second"];
const RESULTS: [&str; 2] = ["negative", "positive"];

pub fn generate_dataset(cfg: &GenConfig) -> Result<Dataset, GenError> {
    check(cfg)?;
    let mut rng = Prng::new(cfg.seed);
    let pools = &cfg.pools;

    let patients: Vec<Row> = (1..=cfg.n_patients as i64)
        .map(|pid| {
            let name = format!("{} {}", rng.pick(&pools.first_names), rng.pick(&pools.last_names));
            let gender = if rng.below(2) == 0 { "M" } else { "F" };
            let dob = date_in(&mut rng, cfg.birth_window);
            let country = rng.pick(&pools.countries).clone();
            let address = format!("{} {}", rng.range_inclusive(1, 250), rng.pick(&pools.streets));
            let zip = format!("{:05}", rng.below(100_000));
            vec![
                Value::Int(pid),
                Value::Str(name),
                text(gender),
                Value::Date(dob),
                Value::Str(country),
                Value::Str(address),
                Value::Str(zip),
            ]
        })
        .collect();

    let n_patients = cfg.n_patients as i64;
    let examinations: Vec<Row> = (1..=cfg.n_examinations as i64)
        .map(|report_id| {
            let pid = rng.range_inclusive(1, n_patients);
            let when = date_in(&mut rng, cfg.date_window);
            let dialysis = rng.chance(cfg.dialysis_probability);
            let diagnosis = rng.pick(&pools.diagnoses).clone();
            vec![
                Value::Int(report_id),
                Value::Int(pid),
                Value::Date(when),
                Value::Bool(dialysis),
                Value::Str(diagnosis),
            ]
        })
        .collect();

    // Each panel is four rows (test x phase) for one patient. Panels go to
    // distinct patients while there are enough of them.
    let n_panels = cfg.n_detections / 4;
    let panel_patients: Vec<i64> = if n_panels <= cfg.n_patients {
        let mut pids: Vec<i64> = (1..=n_patients).collect();
        for i in 0..n_panels {
            let j = i + rng.below((pids.len() - i) as u64) as usize;
            pids.swap(i, j);
        }
        pids.truncate(n_panels);
        pids
    } else {
        (0..n_panels)
            .map(|_| rng.range_inclusive(1, n_patients))
            .collect()
    };

    let mut detections = Vec::with_capacity(cfg.n_detections);
    let mut next_id = 1i64;
    let mut push = |pid: i64, test: &str, phase: &str, result: &str, date: Date| {
        detections.push(vec![
            Value::Int(next_id),
            Value::Int(pid),
            text(test),
            text(phase),
            text(result),
            Value::Date(date),
        ]);
        next_id += 1;
    };
    for pid in panel_patients {
        let a = date_in(&mut rng, cfg.date_window);
        let b = date_in(&mut rng, cfg.date_window);
        let (baseline, second) = if a <= b { (a, b) } else { (b, a) };
        // Bit i set means panel row i is positive; 0 is the fully negative panel.
        let positives = if rng.chance(cfg.negative_panel_fraction) {
            0
        } else {
            1 + rng.below(15)
        };
        let mut bit = 0;
        for (phase, date) in [(PHASES[0], baseline), (PHASES[1], second)] {
            for test in TESTS {
                let result = RESULTS[((positives >> bit) & 1) as usize];
                push(pid, test, phase, result, date);
                bit += 1;
            }
        }
    }
    for _ in 0..cfg.n_detections % 4 {
        let pid = rng.range_inclusive(1, n_patients);
        let test = *rng.pick(&TESTS);
        let phase = *rng.pick(&PHASES);
        let result = *rng.pick(&RESULTS);
        let date = date_in(&mut rng, cfg.date_window);
        push(pid, test, phase, result, date);
    }

    Ok(Dataset {
        patients,
        examinations,
        detections,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relstore::{build_snapshot, write_csv};
    use std::collections::HashMap;

    fn small(seed: u64) -> GenConfig {
        GenConfig {
            seed,
            n_patients: 40,
            n_examinations: 60,
            n_detections: 83,
            ..GenConfig::default()
        }
    }

    #[test]
    fn default_counts_match_registry_table() {
        let ds = generate_dataset(&GenConfig::default()).unwrap();
        assert_eq!(ds.patients.len(), 1881);
        assert_eq!(ds.examinations.len(), 2020);
        assert_eq!(ds.detections.len(), 6393);
        assert_eq!(ds.total_rows(), 10_294);
    }

    #[test]
    fn identical_seed_gives_identical_csv() {
        let render = |ds: Dataset| {
            ds.into_tables()
                .iter()
                .map(|t| {
                    let mut buf = Vec::new();
                    write_csv(t, &mut buf).unwrap();
                    buf
                })
                .collect::<Vec<_>>()
        };
        let a = render(generate_dataset(&small(42)).unwrap());
        let b = render(generate_dataset(&small(42)).unwrap());
        let c = render(generate_dataset(&small(43)).unwrap());
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn no_patients_with_dependents_is_a_config_error() {
        let cfg = GenConfig {
            n_patients: 0,
            n_examinations: 1,
            n_detections: 0,
            ..GenConfig::default()
        };
        assert_eq!(generate_dataset(&cfg), Err(GenError::NoPatients("examination")));
        let empty = GenConfig {
            n_patients: 0,
            n_examinations: 0,
            n_detections: 0,
            ..GenConfig::default()
        };
        assert_eq!(generate_dataset(&empty).unwrap().total_rows(), 0);
    }

    #[test]
    fn empty_pool_rejected() {
        let mut cfg = small(1);
        cfg.pools.diagnoses.clear();
        assert_eq!(generate_dataset(&cfg), Err(GenError::EmptyPool("diagnoses")));
    }

    #[test]
    fn referential_integrity_and_windows_hold() {
        for seed in 0..20 {
            let cfg = small(seed);
            let ds = generate_dataset(&cfg).unwrap();
            for row in &ds.examinations {
                match &row[2] {
                    Value::Date(d) => assert!(*d >= cfg.date_window.0 && *d <= cfg.date_window.1),
                    other => panic!("{other:?}"),
                }
                match &row[4] {
                    Value::Str(s) => assert!(DIAGNOSES.contains(&s.as_str())),
                    other => panic!("{other:?}"),
                }
            }
            let tables = ds.into_tables().into_iter().map(|t| (t.schema, t.rows)).collect();
            build_snapshot(tables).unwrap();
        }
    }

    #[test]
    fn panels_have_four_rows_and_tunable_negative_share() {
        let ds = generate_dataset(&GenConfig::default()).unwrap();
        let mut panels: HashMap<i64, Vec<&Row>> = HashMap::new();
        // Last row is the leftover single detection.
        for row in &ds.detections[..6392] {
            if let Value::Int(pid) = row[1] {
                panels.entry(pid).or_default().push(row);
            }
        }
        assert_eq!(panels.len(), 1598);
        assert!(panels.values().all(|rows| rows.len() == 4));
        let negative = panels
            .values()
            .filter(|rows| rows.iter().all(|r| r[4] == Value::Str("negative".into())))
            .count();
        let share = negative as f64 / panels.len() as f64;
        assert!((0.15..0.25).contains(&share), "share {share}");
    }
}
