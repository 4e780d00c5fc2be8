//! Ordered inclusion/exclusion criteria, the generated inclusion flowchart,
//! and the comparison between rows with and without missing data.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::{chi_square_independence, welch_t_test, StatsError, TestKind};
use crate::tabular::{Cell, ColumnKind, ColumnValues, Dataset, TabularError, Value};

/// Label of the complete-case step appended to every flowchart.
pub const INCOMPLETE_STEP_LABEL: &str = "incomplete data";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionKind {
    Inclusion,
    Exclusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompareOp {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=", alias = "≤")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=", alias = "≥")]
    Ge,
}

impl CompareOp {
    fn holds(self, x: f64, threshold: f64) -> bool {
        match self {
            CompareOp::Lt => x < threshold,
            CompareOp::Le => x <= threshold,
            CompareOp::Gt => x > threshold,
            CompareOp::Ge => x >= threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    Equals(Value),
    InSet(Vec<Value>),
    Compare { op: CompareOp, threshold: f64 },
    NonMissing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub label: String,
    pub column: String,
    pub kind: CriterionKind,
    pub predicate: Predicate,
}

/// Criteria file: ordered criteria plus the variables that must be complete.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    #[serde(default)]
    pub analysis_vars: Vec<String>,
    #[serde(default)]
    pub criteria: Vec<Criterion>,
}

#[derive(Debug, Error)]
pub enum CohortError {
    #[error("criterion `{label}`: unknown column `{column}`")]
    UnknownColumn { label: String, column: String },
    #[error("criterion `{label}`: {reason}")]
    IncompatiblePredicate { label: String, reason: String },
    #[error(transparent)]
    Tabular(#[from] TabularError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Inclusion,
    Exclusion,
    CompleteCase,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowStep {
    pub label: String,
    pub kind: StepKind,
    pub n_before: usize,
    pub n_excluded: usize,
    pub n_after: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flowchart {
    pub initial_n: usize,
    pub final_n: usize,
    pub steps: Vec<FlowStep>,
}

impl Flowchart {
    /// Checks the conservation and chaining invariants.
    pub fn is_consistent(&self) -> bool {
        let mut n = self.initial_n;
        for s in &self.steps {
            if s.n_before != n || s.n_excluded > s.n_before || s.n_after != s.n_before - s.n_excluded {
                return false;
            }
            n = s.n_after;
        }
        n == self.final_n
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "Initial population (n = {})", self.initial_n).unwrap();
        for s in &self.steps {
            let verb = match s.kind {
                StepKind::Inclusion => "not meeting",
                StepKind::Exclusion => "excluded:",
                StepKind::CompleteCase => "excluded:",
            };
            writeln!(out, "    |").unwrap();
            writeln!(out, "    |----> {verb} {} (n = {})", s.label, s.n_excluded).unwrap();
            writeln!(out, "    v").unwrap();
            writeln!(out, "n = {}", s.n_after).unwrap();
        }
        writeln!(out, "Included (n = {})", self.final_n).unwrap();
        out
    }
}

enum Matcher {
    Codes(Vec<bool>),
    Numbers(Vec<f64>),
    Compare(CompareOp, f64),
    NonMissing,
}

struct Compiled {
    col: usize,
    kind: CriterionKind,
    matcher: Matcher,
}

fn compile(ds: &Dataset, c: &Criterion) -> Result<Compiled, CohortError> {
    let (spec, _) = ds.column(&c.column).ok_or_else(|| CohortError::UnknownColumn {
        label: c.label.clone(),
        column: c.column.clone(),
    })?;
    let col = ds.schema().index_of(&c.column).expect("column exists");
    let incompatible = |reason: String| CohortError::IncompatiblePredicate {
        label: c.label.clone(),
        reason,
    };
    let values: &[Value] = match &c.predicate {
        Predicate::Equals(v) => std::slice::from_ref(v),
        Predicate::InSet(vs) => vs,
        Predicate::Compare { op, threshold } => {
            if spec.kind != ColumnKind::Continuous {
                return Err(incompatible(format!("comparison on categorical column `{}`", c.column)));
            }
            if !threshold.is_finite() {
                return Err(incompatible("threshold must be finite".into()));
            }
            return Ok(Compiled {
                col,
                kind: c.kind,
                matcher: Matcher::Compare(*op, *threshold),
            });
        }
        Predicate::NonMissing => {
            return Ok(Compiled {
                col,
                kind: c.kind,
                matcher: Matcher::NonMissing,
            })
        }
    };
    let matcher = match spec.kind {
        ColumnKind::Categorical => {
            let mut set = vec![false; spec.arity()];
            for v in values {
                let label = v.as_label();
                let idx = spec
                    .category_index(&label)
                    .ok_or_else(|| incompatible(format!("`{label}` is not a category of `{}`", c.column)))?;
                set[idx] = true;
            }
            Matcher::Codes(set)
        }
        ColumnKind::Continuous => Matcher::Numbers(
            values
                .iter()
                .map(|v| {
                    v.as_number()
                        .ok_or_else(|| incompatible(format!("`{}` is not numeric", v.as_label())))
                })
                .collect::<Result<_, _>>()?,
        ),
    };
    Ok(Compiled {
        col,
        kind: c.kind,
        matcher,
    })
}

impl Compiled {
    /// Whether `row` survives this criterion. Cells without a value never
    /// match a value predicate and never cause a drop; only `non_missing`
    /// looks at missingness itself.
    fn keeps(&self, ds: &Dataset, row: usize) -> bool {
        let column = ds.column_at(self.col);
        if let Matcher::NonMissing = self.matcher {
            let present = column.has_value(row);
            return match self.kind {
                CriterionKind::Inclusion => present,
                CriterionKind::Exclusion => !present,
            };
        }
        if !column.has_value(row) {
            return true;
        }
        let matched = match (&self.matcher, column.values()) {
            (Matcher::Codes(set), ColumnValues::Categorical(v)) => set[v[row].unwrap() as usize],
            (Matcher::Numbers(ns), ColumnValues::Continuous(v)) => ns.contains(&v[row].unwrap()),
            (Matcher::Compare(op, t), ColumnValues::Continuous(v)) => op.holds(v[row].unwrap(), *t),
            _ => unreachable!("matcher compiled against column kind"),
        };
        match self.kind {
            CriterionKind::Inclusion => matched,
            CriterionKind::Exclusion => !matched,
        }
    }
}

/// Applies criteria in order, then removes rows incomplete on
/// `analysis_vars`. Row order is preserved.
pub fn apply_criteria<S: AsRef<str>>(
    ds: &Dataset,
    criteria: &[Criterion],
    analysis_vars: &[S],
) -> Result<(Dataset, Flowchart), CohortError> {
    let compiled = criteria.iter().map(|c| compile(ds, c)).collect::<Result<Vec<_>, _>>()?;
    let analysis_cols = ds.resolve(analysis_vars)?;

    let mut rows: Vec<usize> = (0..ds.n_rows()).collect();
    let mut steps = Vec::with_capacity(criteria.len() + 1);
    for (c, m) in criteria.iter().zip(&compiled) {
        let before = rows.len();
        rows.retain(|&r| m.keeps(ds, r));
        steps.push(FlowStep {
            label: c.label.clone(),
            kind: match c.kind {
                CriterionKind::Inclusion => StepKind::Inclusion,
                CriterionKind::Exclusion => StepKind::Exclusion,
            },
            n_before: before,
            n_excluded: before - rows.len(),
            n_after: rows.len(),
        });
    }
    let before = rows.len();
    rows.retain(|&r| ds.row_complete(r, &analysis_cols));
    steps.push(FlowStep {
        label: INCOMPLETE_STEP_LABEL.to_string(),
        kind: StepKind::CompleteCase,
        n_before: before,
        n_excluded: before - rows.len(),
        n_after: rows.len(),
    });

    let flow = Flowchart {
        initial_n: ds.n_rows(),
        final_n: rows.len(),
        steps,
    };
    debug_assert!(flow.is_consistent());
    Ok((ds.select_rows(&rows), flow))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmptyReason {
    NoIncompleteGroup,
    NoCompleteGroup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingnessEntry {
    pub variable: String,
    pub test: TestKind,
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedVariable {
    pub variable: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingnessReport {
    pub complete_n: usize,
    pub incomplete_n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub empty_reason: Option<EmptyReason>,
    pub entries: Vec<MissingnessEntry>,
    pub skipped: Vec<SkippedVariable>,
}

/// Compares rows complete on `analysis_vars` against rows with any missing
/// cell among them: chi-square for categorical variables, Welch's t for
/// continuous ones, on each variable's observed cells in both groups.
pub fn missingness_comparison<S: AsRef<str>>(
    ds: &Dataset,
    analysis_vars: &[S],
) -> Result<MissingnessReport, CohortError> {
    let cols = ds.resolve(analysis_vars)?;
    let (complete, incomplete): (Vec<usize>, Vec<usize>) = (0..ds.n_rows()).partition(|&r| ds.row_complete(r, &cols));
    let mut report = MissingnessReport {
        complete_n: complete.len(),
        incomplete_n: incomplete.len(),
        empty_reason: None,
        entries: Vec::new(),
        skipped: Vec::new(),
    };
    if incomplete.is_empty() {
        report.empty_reason = Some(EmptyReason::NoIncompleteGroup);
        return Ok(report);
    }
    if complete.is_empty() {
        report.empty_reason = Some(EmptyReason::NoCompleteGroup);
        return Ok(report);
    }

    for (col, spec) in ds.schema().columns().iter().enumerate() {
        let outcome = match spec.kind {
            ColumnKind::Continuous => {
                let pick = |rows: &[usize]| -> Vec<f64> {
                    rows.iter()
                        .filter_map(|&r| match ds.cell(col, r) {
                            Cell::Number(x) => Some(x),
                            _ => None,
                        })
                        .collect()
                };
                welch_t_test(&pick(&complete), &pick(&incomplete))
            }
            ColumnKind::Categorical => {
                let codes = ds.column_at(col).categorical().expect("categorical storage");
                let tally = |rows: &[usize]| -> Vec<u64> {
                    let mut t = vec![0u64; spec.arity()];
                    for &r in rows {
                        if let Some(c) = codes[r] {
                            t[c as usize] += 1;
                        }
                    }
                    t
                };
                let (a, b) = (tally(&complete), tally(&incomplete));
                let keep: Vec<usize> = (0..spec.arity()).filter(|&k| a[k] + b[k] > 0).collect();
                let table = [
                    keep.iter().map(|&k| a[k]).collect::<Vec<_>>(),
                    keep.iter().map(|&k| b[k]).collect::<Vec<_>>(),
                ];
                chi_square_independence(&table)
            }
        };
        match outcome {
            Ok(t) => report.entries.push(MissingnessEntry {
                variable: spec.name.clone(),
                test: t.test,
                statistic: t.statistic,
                df: t.df,
                p_value: t.p_value,
            }),
            Err(e) => report.skipped.push(SkippedVariable {
                variable: spec.name.clone(),
                reason: skipped_reason(&e),
            }),
        }
    }
    Ok(report)
}

fn skipped_reason(e: &StatsError) -> String {
    e.to_string()
}
