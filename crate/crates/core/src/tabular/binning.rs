use super::dataset::{Column, ColumnValues, Dataset};
use super::schema::{ColumnKind, ColumnSpec};
use super::TabularError;
use crate::stats::quantile_sorted;

/// Replaces a continuous column by a four-category column cut at its
/// quartiles.
///
/// Bins are `[min, q1]`, `(q1, q2]`, `(q2, q3]`, `(q3, max]`, so a value equal
/// to a cut point falls in the lower bin. Missing cells stay missing. Without
/// explicit labels, integer-valued columns get labels such as `[11-22]` and
/// `≥41`; other columns get interval labels.
pub fn quartile_bin(ds: &Dataset, column: &str, labels: Option<[String; 4]>) -> Result<Dataset, TabularError> {
    let (idx, spec, col) = ds.require(column)?;
    if spec.kind != ColumnKind::Continuous {
        return Err(TabularError::NotContinuous(column.to_string()));
    }
    let values = col.continuous().expect("continuous storage");
    let mut sorted: Vec<f64> = values.iter().flatten().copied().collect();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(TabularError::DegenerateBinning {
            column: column.to_string(),
            reason: format!("{} distinct values, need at least 4", distinct.len()),
        });
    }
    let cuts = [
        quantile_sorted(&sorted, 0.25),
        quantile_sorted(&sorted, 0.50),
        quantile_sorted(&sorted, 0.75),
    ];
    if !(cuts[0] < cuts[1] && cuts[1] < cuts[2]) {
        return Err(TabularError::DegenerateBinning {
            column: column.to_string(),
            reason: format!("quartile cut points {cuts:?} are not strictly increasing"),
        });
    }

    let labels = match labels {
        Some(l) => {
            let mut seen = l.to_vec();
            seen.sort();
            seen.dedup();
            if seen.len() != 4 || l.iter().any(String::is_empty) {
                return Err(TabularError::InvalidLabels(column.to_string()));
            }
            l.to_vec()
        }
        None => {
            let integral = sorted.iter().all(|v| v.fract() == 0.0);
            default_labels(sorted[0], cuts, sorted[sorted.len() - 1], integral)
        }
    };

    let codes = values
        .iter()
        .map(|v| v.map(|x| cuts.iter().filter(|&&c| x > c).count() as u32))
        .collect();
    let mut new_spec = ColumnSpec::categorical(spec.name.clone(), labels);
    new_spec.sentinel_codes = spec.sentinel_codes.clone();
    let mut new_col = Column::new(ColumnValues::Categorical(codes));
    new_col.sentinels = col.sentinels.clone();
    ds.replace_column(idx, new_spec, new_col)
}

fn default_labels(min: f64, cuts: [f64; 3], max: f64, integral: bool) -> Vec<String> {
    if integral {
        // Integer data: bin k holds floor(cut[k-1]) + 1 ..= floor(cut[k]).
        let lo = [min, cuts[0].floor() + 1.0, cuts[1].floor() + 1.0, cuts[2].floor() + 1.0];
        let hi = [cuts[0].floor(), cuts[1].floor(), cuts[2].floor()];
        if lo[0] <= hi[0] && lo[1] <= hi[1] && lo[2] <= hi[2] {
            return vec![
                format!("[{}-{}]", lo[0], hi[0]),
                format!("[{}-{}]", lo[1], hi[1]),
                format!("[{}-{}]", lo[2], hi[2]),
                format!("≥{}", lo[3]),
            ];
        }
    }
    vec![
        format!("[{min}, {}]", cuts[0]),
        format!("({}, {}]", cuts[0], cuts[1]),
        format!("({}, {}]", cuts[1], cuts[2]),
        format!("({}, {max}]", cuts[2]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::dataset::{Cell, Provenance};
    use crate::tabular::schema::Schema;

    fn continuous(values: Vec<Option<f64>>) -> Dataset {
        let schema = Schema::new(vec![ColumnSpec::continuous("x")]).unwrap();
        Dataset::from_columns(
            schema,
            vec![Column::new(ColumnValues::Continuous(values))],
            Provenance::now("test"),
        )
        .unwrap()
    }

    fn counts(ds: &Dataset) -> [usize; 4] {
        let mut c = [0; 4];
        for v in ds.categorical_codes("x").unwrap().iter().flatten() {
            c[*v as usize] += 1;
        }
        c
    }

    #[test]
    fn eight_distinct_values_split_evenly() {
        let ds = continuous((1..=8).map(|v| Some(v as f64)).collect());
        let b = quartile_bin(&ds, "x", None).unwrap();
        assert_eq!(counts(&b), [2, 2, 2, 2]);
    }

    #[test]
    fn age_quartiles_render_table_style_labels() {
        // Type-7 quartiles of this sample are exactly 22, 30 and 40.
        let ages = [
            11.0, 18.0, 22.0, 22.0, 22.0, 25.0, 30.0, 30.0, 30.0, 35.0, 40.0, 40.0, 40.0, 50.0, 70.0, 80.0, 90.0,
        ];
        let sorted = {
            let mut s = ages.to_vec();
            s.sort_by(f64::total_cmp);
            s
        };
        assert_eq!(quantile_sorted(&sorted, 0.25), 22.0);
        assert_eq!(quantile_sorted(&sorted, 0.5), 30.0);
        assert_eq!(quantile_sorted(&sorted, 0.75), 40.0);
        let ds = continuous(ages.iter().map(|&v| Some(v)).collect());
        let b = quartile_bin(&ds, "x", None).unwrap();
        assert_eq!(
            b.schema().column("x").unwrap().category_labels(),
            ["[11-22]", "[23-30]", "[31-40]", "≥41"]
        );
        // Ties at a cut point go to the lower bin.
        assert_eq!(b.cell(0, 2), Cell::Category("[11-22]"));
        assert_eq!(b.cell(0, 10), Cell::Category("[31-40]"));
        assert_eq!(b.cell(0, 13), Cell::Category("≥41"));
    }

    #[test]
    fn missing_cells_stay_missing() {
        let mut v: Vec<Option<f64>> = (1..=8).map(|v| Some(v as f64)).collect();
        v.push(None);
        let b = quartile_bin(&continuous(v), "x", None).unwrap();
        assert_eq!(b.cell(0, 8), Cell::Missing);
    }

    #[test]
    fn degenerate_inputs_fail() {
        let ds = continuous(vec![Some(3.0); 10]);
        assert!(matches!(
            quartile_bin(&ds, "x", None),
            Err(TabularError::DegenerateBinning { .. })
        ));
        assert!(matches!(
            quartile_bin(&ds, "nope", None),
            Err(TabularError::UnknownColumn(_))
        ));
    }

    #[test]
    fn custom_labels_must_be_distinct() {
        let ds = continuous((1..=8).map(|v| Some(v as f64)).collect());
        let same = ["a", "a", "b", "c"].map(String::from);
        assert!(matches!(
            quartile_bin(&ds, "x", Some(same)),
            Err(TabularError::InvalidLabels(_))
        ));
        let ok = ["q1", "q2", "q3", "q4"].map(String::from);
        let b = quartile_bin(&ds, "x", Some(ok)).unwrap();
        assert_eq!(b.cell(0, 7), Cell::Category("q4"));
    }
}
