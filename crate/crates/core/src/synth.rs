//! Seeded generator of assault-survivor cohorts with fixed categorical
//! marginals, implanted parent/child dependencies, planted criteria
//! exclusions and planted incomplete rows.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::{CohortSpec, CompareOp, Criterion, CriterionKind, Predicate};
use crate::tabular::{Column, ColumnSpec, ColumnValues, Dataset, Provenance, Schema, TabularError, Value};

const SUM_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("proportions of `{0}` do not sum to 1")]
    BadProportions(String),
    #[error("variable `{0}` is not configured")]
    UnknownVariable(String),
    #[error("variable `{0}` is configured twice")]
    DuplicateVariable(String),
    #[error("variable `{0}` must keep its default categories")]
    FixedCategories(String),
    #[error("`{0}` has more than one implanted parent")]
    MultipleParents(String),
    #[error("implanted edges form a cycle")]
    Cycle,
    #[error("edge {parent} -> {child}: strength {strength} drives a conditional probability outside [0, 1]")]
    Infeasible {
        parent: String,
        child: String,
        strength: f64,
    },
    #[error("planted rows ({planted}) must be fewer than n_total ({n_total})")]
    TooManyPlanted { planted: usize, n_total: usize },
    #[error(transparent)]
    Tabular(#[from] TabularError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub name: String,
    pub categories: Vec<String>,
    pub proportions: Vec<f64>,
}

impl Marginal {
    fn from_counts(name: &str, cells: &[(&str, u32)]) -> Self {
        let total: u32 = cells.iter().map(|c| c.1).sum();
        Self {
            name: name.to_string(),
            categories: cells.iter().map(|c| c.0.to_string()).collect(),
            proportions: cells.iter().map(|c| c.1 as f64 / total as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImplantedEdge {
    pub parent: String,
    pub child: String,
    /// Shift in a child probability between the extreme parent categories.
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub n_total: usize,
    pub seed: u64,
    pub n_incomplete: usize,
    pub n_excluded: usize,
    pub variables: Vec<Marginal>,
    pub edges: Vec<ImplantedEdge>,
}

pub const AGE: &str = "age";
pub const TIME_TO_EVAL: &str = "timeToEval";
pub const TIW: &str = "TIW";
pub const VICTIM_CATEGORY: &str = "victimCategory";
pub const AGE_YEARS: &str = "ageYears";
pub const HOURS_TO_EVAL: &str = "timeToEvalHours";
pub const TIW_DAYS: &str = "tiwDays";
pub const SCREENING_FLAGS: [(&str, &str); 5] = [
    ("languageBarrier", "insufficient comprehension of French"),
    ("psychiatricDisorder", "psychiatric disorder"),
    ("fracture", "bone fracture"),
    ("sexualAssault", "sexual assault"),
    ("involuntaryViolence", "involuntary violence"),
];

/// Day distribution of TIW below the 9-day threshold.
const SHORT_TIW_WEIGHTS: [f64; 9] = [0.08, 0.12, 0.15, 0.20, 0.14, 0.11, 0.08, 0.07, 0.05];
const LONG_TIW_MAX: u32 = 96;

impl Default for GeneratorConfig {
    fn default() -> Self {
        let examiners: Vec<(String, u32)> = (1..=16).map(|i| (format!("E{i:02}"), 1)).collect();
        let examiners: Vec<(&str, u32)> = examiners.iter().map(|(s, c)| (s.as_str(), *c)).collect();
        Self {
            n_total: 4279,
            seed: 0,
            n_incomplete: 467,
            n_excluded: 920,
            variables: vec![
                Marginal::from_counts("gender", &[("Men", 1750), ("Women", 1142)]),
                Marginal::from_counts("forensicExaminer", &examiners),
                Marginal::from_counts(
                    "assaultPlace",
                    &[
                        ("Public way", 1133),
                        ("Other", 793),
                        ("Marital home", 309),
                        ("Victim home", 271),
                        ("Family home", 193),
                        ("Workplace", 193),
                    ],
                ),
                Marginal::from_counts(
                    "assailantCategory",
                    &[
                        ("Unknown person", 949),
                        ("(ex)Spouse, (ex)partner", 566),
                        ("Police officer", 411),
                        ("Person known from sight", 214),
                        ("Other known person", 179),
                        ("Other", 573),
                    ],
                ),
                Marginal::from_counts(
                    "assaultCategory",
                    &[
                        ("Other", 1339),
                        ("Marital violence", 576),
                        ("Police violence", 419),
                        ("Gang assault", 365),
                        ("Family violence", 193),
                    ],
                ),
                Marginal::from_counts("injuryType", &[("Presence of injury", 2274), ("No injury", 618)]),
                Marginal::from_counts(
                    VICTIM_CATEGORY,
                    &[("Other", 1978), ("Person in Custody", 798), ("Police officer", 116)],
                ),
                Marginal::from_counts(
                    AGE,
                    &[("[11-22]", 758), ("[23-30]", 716), ("[31-40]", 704), ("≥41", 714)],
                ),
                Marginal::from_counts(
                    TIME_TO_EVAL,
                    &[("[0-11]", 737), ("[12-47]", 673), ("[48-71]", 606), ("≥72", 876)],
                ),
                Marginal::from_counts(
                    "aggravatingFactors",
                    &[("0", 509), ("1", 891), ("2", 826), ("3 or more", 666)],
                ),
                Marginal::from_counts(TIW, &[("[0-8]", 2731), ("≥9", 161)]),
            ],
            edges: vec![
                ImplantedEdge {
                    parent: VICTIM_CATEGORY.into(),
                    child: TIME_TO_EVAL.into(),
                    strength: 0.25,
                },
                ImplantedEdge {
                    parent: TIME_TO_EVAL.into(),
                    child: TIW.into(),
                    strength: 0.1,
                },
            ],
        }
    }
}

/// Columns whose categories drive the derived continuous columns.
const FIXED: [(&str, &[&str]); 3] = [
    (AGE, &["[11-22]", "[23-30]", "[31-40]", "≥41"]),
    (TIME_TO_EVAL, &["[0-11]", "[12-47]", "[48-71]", "≥72"]),
    (TIW, &["[0-8]", "≥9"]),
];

/// Inclusive value ranges per category of the fixed columns.
fn value_range(var: &str, code: u32) -> (u32, u32) {
    match (var, code) {
        (AGE, 0) => (11, 22),
        (AGE, 1) => (23, 30),
        (AGE, 2) => (31, 40),
        (AGE, _) => (41, 90),
        (TIME_TO_EVAL, 0) => (0, 11),
        (TIME_TO_EVAL, 1) => (12, 47),
        (TIME_TO_EVAL, 2) => (48, 71),
        (TIME_TO_EVAL, _) => (72, 720),
        _ => unreachable!("no value range for `{var}`"),
    }
}

/// Criteria and analysis variables matching the planted exclusions.
pub fn default_cohort_spec(config: &GeneratorConfig) -> CohortSpec {
    let mut criteria = vec![
        Criterion {
            label: "older than 10 years".into(),
            column: AGE_YEARS.into(),
            kind: CriterionKind::Inclusion,
            predicate: Predicate::Compare {
                op: CompareOp::Gt,
                threshold: 10.0,
            },
        },
        Criterion {
            label: "examined within 30 days".into(),
            column: HOURS_TO_EVAL.into(),
            kind: CriterionKind::Inclusion,
            predicate: Predicate::Compare {
                op: CompareOp::Le,
                threshold: 720.0,
            },
        },
    ];
    for (col, label) in SCREENING_FLAGS {
        criteria.push(Criterion {
            label: label.into(),
            column: col.into(),
            kind: CriterionKind::Exclusion,
            predicate: Predicate::Equals(Value::Label("yes".into())),
        });
    }
    CohortSpec {
        analysis_vars: config.variables.iter().map(|m| m.name.clone()).collect(),
        criteria,
    }
}

/// Largest-remainder allocation of `n` items to `props`; ties go to the
/// lower index.
pub fn allocate(props: &[f64], n: usize) -> Vec<usize> {
    let raw: Vec<f64> = props.iter().map(|p| p * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..props.len()).collect();
    order.sort_by(|&a, &b| {
        (raw[b] - raw[b].floor())
            .total_cmp(&(raw[a] - raw[a].floor()))
            .then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Codes for `n` rows with exact allocated counts, in random order.
fn exact_codes(props: &[f64], n: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let mut codes: Vec<u32> = allocate(props, n)
        .iter()
        .enumerate()
        .flat_map(|(k, &c)| std::iter::repeat_n(k as u32, c))
        .collect();
    codes.shuffle(rng);
    codes
}

/// Conditional table P(child | parent) whose mixture under the parent
/// marginal equals the child marginal.
pub fn conditional_table(parent: &[f64], child: &[f64], strength: f64) -> Option<Vec<Vec<f64>>> {
    let rp = parent.len();
    let rc = child.len();
    let mean_rank: f64 = parent.iter().enumerate().map(|(j, p)| j as f64 * p).sum();
    let s = |j: usize| {
        if rp > 1 {
            (j as f64 - mean_rank) / (rp - 1) as f64
        } else {
            0.0
        }
    };
    let d = |k: usize| {
        if rc > 1 {
            2.0 * k as f64 / (rc - 1) as f64 - 1.0
        } else {
            0.0
        }
    };
    let table: Vec<Vec<f64>> = (0..rp)
        .map(|j| (0..rc).map(|k| child[k] + strength * s(j) * d(k)).collect())
        .collect();
    table
        .iter()
        .flatten()
        .all(|&p| (0.0..=1.0).contains(&p))
        .then_some(table)
}

struct Plan<'a> {
    config: &'a GeneratorConfig,
    /// Per variable: implanted parent index and its conditional table.
    parents: Vec<Option<(usize, Vec<Vec<f64>>)>>,
    order: Vec<usize>,
}

impl<'a> Plan<'a> {
    fn new(config: &'a GeneratorConfig) -> Result<Self, SynthError> {
        let vars = &config.variables;
        for (i, m) in vars.iter().enumerate() {
            if vars[..i].iter().any(|o| o.name == m.name) {
                return Err(SynthError::DuplicateVariable(m.name.clone()));
            }
            let sum: f64 = m.proportions.iter().sum();
            if m.categories.len() != m.proportions.len()
                || m.categories.is_empty()
                || m.proportions.iter().any(|p| !(0.0..=1.0).contains(p))
                || (sum - 1.0).abs() > SUM_TOL
            {
                return Err(SynthError::BadProportions(m.name.clone()));
            }
        }
        for (name, cats) in FIXED {
            let m = vars
                .iter()
                .find(|m| m.name == name)
                .ok_or_else(|| SynthError::UnknownVariable(name.to_string()))?;
            if m.categories != cats {
                return Err(SynthError::FixedCategories(name.to_string()));
            }
        }
        let planted = config.n_incomplete + config.n_excluded;
        if planted >= config.n_total {
            return Err(SynthError::TooManyPlanted {
                planted,
                n_total: config.n_total,
            });
        }
        let index = |n: &str| {
            vars.iter()
                .position(|m| m.name == n)
                .ok_or_else(|| SynthError::UnknownVariable(n.to_string()))
        };
        let mut parents = vec![None; vars.len()];
        for e in &config.edges {
            let (p, c) = (index(&e.parent)?, index(&e.child)?);
            if parents[c].is_some() {
                return Err(SynthError::MultipleParents(e.child.clone()));
            }
            let infeasible = || SynthError::Infeasible {
                parent: e.parent.clone(),
                child: e.child.clone(),
                strength: e.strength,
            };
            if e.strength.is_nan() || e.strength < 0.0 || p == c {
                return Err(infeasible());
            }
            let table =
                conditional_table(&vars[p].proportions, &vars[c].proportions, e.strength).ok_or_else(infeasible)?;
            parents[c] = Some((p, table));
        }
        // roots first, then children whose parent is placed
        let mut order = Vec::with_capacity(vars.len());
        let mut placed = vec![false; vars.len()];
        while order.len() < vars.len() {
            let before = order.len();
            for i in 0..vars.len() {
                if !placed[i] && parents[i].as_ref().is_none_or(|(p, _)| placed[*p]) {
                    placed[i] = true;
                    order.push(i);
                }
            }
            if order.len() == before {
                return Err(SynthError::Cycle);
            }
        }
        Ok(Self { config, parents, order })
    }

    /// Category codes for a block of `n` rows, one vector per variable.
    fn block(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<u32>> {
        let vars = &self.config.variables;
        let mut cols: Vec<Vec<u32>> = vec![Vec::new(); vars.len()];
        for &v in &self.order {
            cols[v] = match &self.parents[v] {
                None => exact_codes(&vars[v].proportions, n, rng),
                Some((p, table)) => {
                    let mut out = vec![0u32; n];
                    for (j, row) in table.iter().enumerate() {
                        let members: Vec<usize> = (0..n).filter(|&r| cols[*p][r] == j as u32).collect();
                        for (r, code) in members.iter().zip(exact_codes(row, members.len(), rng)) {
                            out[*r] = code;
                        }
                    }
                    out
                }
            };
        }
        cols
    }
}

/// TIW days per row, allocated exactly within each TIW class.
fn tiw_days(tiw: &[u32], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let long_days: Vec<u32> = (9..=LONG_TIW_MAX).collect();
    let long_weights: Vec<f64> = {
        let w: Vec<f64> = long_days.iter().map(|&d| (-(d as f64 - 9.0) / 10.0).exp()).collect();
        let s: f64 = w.iter().sum();
        w.iter().map(|x| x / s).collect()
    };
    let mut out = vec![0.0; tiw.len()];
    for class in 0..2u32 {
        let members: Vec<usize> = (0..tiw.len()).filter(|&r| tiw[r] == class).collect();
        let (days, weights): (Vec<u32>, &[f64]) = if class == 0 {
            ((0..=8).collect(), &SHORT_TIW_WEIGHTS)
        } else {
            (long_days.clone(), &long_weights)
        };
        let mut codes = exact_codes(weights, members.len(), rng);
        if class == 1 && !codes.is_empty() && !codes.contains(&((days.len() - 1) as u32)) {
            // pin the documented maximum onto the most common long value
            let first = codes.iter().position(|&c| c == 0).unwrap_or(0);
            codes[first] = (days.len() - 1) as u32;
        }
        for (r, c) in members.iter().zip(codes) {
            out[*r] = days[c as usize] as f64;
        }
    }
    out
}

#[derive(Clone, Copy, PartialEq)]
enum RowKind {
    Included,
    Incomplete,
    Excluded(usize),
}

pub fn generate(config: &GeneratorConfig) -> Result<Dataset, SynthError> {
    let plan = Plan::new(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n_final = config.n_total - config.n_incomplete - config.n_excluded;
    let reasons = 2 + SCREENING_FLAGS.len();

    let mut kinds = Vec::with_capacity(config.n_total);
    let mut cats: Vec<Vec<Option<u32>>> = vec![Vec::new(); config.variables.len()];
    let blocks = [
        (n_final, None),
        (config.n_incomplete, Some(RowKind::Incomplete)),
        (config.n_excluded, None),
    ];
    for (b, &(n, kind)) in blocks.iter().enumerate() {
        let codes = plan.block(n, &mut rng);
        for (dst, src) in cats.iter_mut().zip(codes) {
            dst.extend(src.into_iter().map(Some));
        }
        for i in 0..n {
            kinds.push(match (b, kind) {
                (0, _) => RowKind::Included,
                (1, _) => RowKind::Incomplete,
                _ => RowKind::Excluded(i % reasons),
            });
        }
    }

    let var = |name: &str| config.variables.iter().position(|m| m.name == name).expect("validated");
    let (age, time, tiw) = (var(AGE), var(TIME_TO_EVAL), var(TIW));
    let tiw_codes: Vec<u32> = cats[tiw].iter().map(|c| c.unwrap()).collect();
    let mut days: Vec<Option<f64>> = tiw_days(&tiw_codes, &mut rng).into_iter().map(Some).collect();
    let mut years: Vec<Option<f64>> = Vec::with_capacity(kinds.len());
    let mut hours: Vec<Option<f64>> = Vec::with_capacity(kinds.len());
    let mut flags: Vec<Vec<Option<u32>>> = vec![vec![Some(1); kinds.len()]; SCREENING_FLAGS.len()];
    for r in 0..kinds.len() {
        let draw = |rng: &mut ChaCha8Rng, (lo, hi): (u32, u32)| Some(rng.gen_range(lo..=hi) as f64);
        let mut y = draw(&mut rng, value_range(AGE, cats[age][r].unwrap()));
        let mut h = draw(&mut rng, value_range(TIME_TO_EVAL, cats[time][r].unwrap()));
        match kinds[r] {
            RowKind::Excluded(0) => {
                y = draw(&mut rng, (1, 10));
                cats[age][r] = None;
            }
            RowKind::Excluded(1) => {
                h = draw(&mut rng, (721, 2160));
                cats[time][r] = Some(3);
            }
            RowKind::Excluded(k) => flags[k - 2][r] = Some(0),
            RowKind::Incomplete => {
                let blanks = rng.gen_range(1..=2);
                let mut picked: Vec<usize> = (0..config.variables.len()).collect();
                picked.shuffle(&mut rng);
                for &v in &picked[..blanks] {
                    cats[v][r] = None;
                    if v == tiw {
                        days[r] = None;
                    }
                }
            }
            RowKind::Included => {}
        }
        years.push(y);
        hours.push(h);
    }

    let mut perm: Vec<usize> = (0..kinds.len()).collect();
    perm.shuffle(&mut rng);
    let permute_cat = |v: &[Option<u32>]| Column::new(ColumnValues::Categorical(perm.iter().map(|&i| v[i]).collect()));
    let permute_num = |v: &[Option<f64>]| Column::new(ColumnValues::Continuous(perm.iter().map(|&i| v[i]).collect()));

    let mut specs: Vec<ColumnSpec> = config
        .variables
        .iter()
        .map(|m| ColumnSpec::categorical(m.name.clone(), m.categories.iter().cloned()))
        .collect();
    let mut columns: Vec<Column> = cats.iter().map(|c| permute_cat(c)).collect();
    specs.push(
        ColumnSpec::continuous(AGE_YEARS)
            .with_range(0.0, 120.0)
            .with_sentinels(["999"]),
    );
    columns.push(permute_num(&years));
    specs.push(ColumnSpec::continuous(HOURS_TO_EVAL).with_range(0.0, 24.0 * 365.0));
    columns.push(permute_num(&hours));
    specs.push(ColumnSpec::continuous(TIW_DAYS).with_range(0.0, 365.0));
    columns.push(permute_num(&days));
    for ((name, _), f) in SCREENING_FLAGS.iter().zip(&flags) {
        specs.push(ColumnSpec::categorical(*name, ["yes", "no"]));
        columns.push(permute_cat(f));
    }
    let schema = Schema::new(specs).map_err(TabularError::from)?;
    Ok(Dataset::from_columns(
        schema,
        columns,
        Provenance::now(format!("synthetic cohort, seed {}", config.seed)),
    )?)
}
