use serde::{Deserialize, Serialize};

use super::special::{chi_square_upper, f_upper, t_two_sided};
use super::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    WelchT,
    PooledT,
    OneWayAnova,
    ChiSquareIndependence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test: TestKind,
    pub statistic: f64,
    /// Degrees of freedom (numerator df for F).
    pub df: f64,
    /// Denominator degrees of freedom, F tests only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub df_denominator: Option<f64>,
    pub p_value: f64,
}

struct Moments {
    n: f64,
    mean: f64,
    var: f64,
}

fn moments(xs: &[f64], min_n: usize) -> Result<Moments, StatsError> {
    if xs.len() < min_n {
        return Err(StatsError::Undersized {
            needed: min_n,
            got: xs.len(),
        });
    }
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    Ok(Moments { n, mean, var })
}

/// Welch's unequal-variance t-test, two-sided.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    let ma = moments(a, 2)?;
    let mb = moments(b, 2)?;
    if ma.var == 0.0 && mb.var == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let va = ma.var / ma.n;
    let vb = mb.var / mb.n;
    let se2 = va + vb;
    let t = (ma.mean - mb.mean) / se2.sqrt();
    let df = se2 * se2 / (va * va / (ma.n - 1.0) + vb * vb / (mb.n - 1.0));
    Ok(TestResult {
        test: TestKind::WelchT,
        statistic: t,
        df,
        df_denominator: None,
        p_value: t_two_sided(t, df),
    })
}

/// Student's t-test with pooled variance, two-sided.
pub fn pooled_t_test(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    let ma = moments(a, 2)?;
    let mb = moments(b, 2)?;
    let df = ma.n + mb.n - 2.0;
    let sp2 = ((ma.n - 1.0) * ma.var + (mb.n - 1.0) * mb.var) / df;
    if sp2 == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let t = (ma.mean - mb.mean) / (sp2 * (1.0 / ma.n + 1.0 / mb.n)).sqrt();
    Ok(TestResult {
        test: TestKind::PooledT,
        statistic: t,
        df,
        df_denominator: None,
        p_value: t_two_sided(t, df),
    })
}

/// One-way ANOVA F test over `groups`.
pub fn one_way_anova<G: AsRef<[f64]>>(groups: &[G]) -> Result<TestResult, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups(groups.len()));
    }
    let ms = groups
        .iter()
        .map(|g| moments(g.as_ref(), 2))
        .collect::<Result<Vec<_>, _>>()?;
    let total_n: f64 = ms.iter().map(|m| m.n).sum();
    let grand = ms.iter().map(|m| m.n * m.mean).sum::<f64>() / total_n;
    let ss_between: f64 = ms.iter().map(|m| m.n * (m.mean - grand).powi(2)).sum();
    let ss_within: f64 = ms.iter().map(|m| (m.n - 1.0) * m.var).sum();
    if ss_within == 0.0 {
        return Err(StatsError::DegenerateVariance);
    }
    let k = groups.len() as f64;
    let df1 = k - 1.0;
    let df2 = total_n - k;
    let f = (ss_between / df1) / (ss_within / df2);
    Ok(TestResult {
        test: TestKind::OneWayAnova,
        statistic: f,
        df: df1,
        df_denominator: Some(df2),
        p_value: f_upper(f, df1, df2),
    })
}

/// Pearson chi-square test of independence on an r x c table of counts.
pub fn chi_square_independence<R: AsRef<[u64]>>(table: &[R]) -> Result<TestResult, StatsError> {
    let r = table.len();
    let c = table.first().map_or(0, |row| row.as_ref().len());
    if r < 2 || c < 2 {
        return Err(StatsError::TableTooSmall { rows: r, cols: c });
    }
    if table.iter().any(|row| row.as_ref().len() != c) {
        return Err(StatsError::RaggedTable);
    }
    let row_sums: Vec<f64> = table
        .iter()
        .map(|row| row.as_ref().iter().sum::<u64>() as f64)
        .collect();
    let col_sums: Vec<f64> = (0..c)
        .map(|j| table.iter().map(|row| row.as_ref()[j]).sum::<u64>() as f64)
        .collect();
    if row_sums.iter().chain(&col_sums).any(|&s| s == 0.0) {
        return Err(StatsError::DegenerateMargin);
    }
    let total: f64 = row_sums.iter().sum();
    let mut stat = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &obs) in row.as_ref().iter().enumerate() {
            let expected = row_sums[i] * col_sums[j] / total;
            let d = obs as f64 - expected;
            stat += d * d / expected;
        }
    }
    let df = ((r - 1) * (c - 1)) as f64;
    Ok(TestResult {
        test: TestKind::ChiSquareIndependence,
        statistic: stat,
        df,
        df_denominator: None,
        p_value: chi_square_upper(stat, df),
    })
}
