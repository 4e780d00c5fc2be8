use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::dataset::{Cell, Column, ColumnValues, Dataset, Provenance};
use super::schema::{ColumnKind, Schema};
use super::TabularError;

/// Reads a CSV file whose header names every schema column (in any order).
///
/// Columns are reordered to schema order; header columns the schema does not
/// declare are ignored. An empty field is a missing cell. A field equal to a
/// declared sentinel code is kept as a pending sentinel. Anything else that
/// does not parse as the declared kind is an error.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset, TabularError> {
    let path = path.as_ref();
    let file = File::open(path)?;
    read_csv(file, schema, &path.display().to_string())
}

pub fn read_csv<R: Read>(reader: R, schema: &Schema, source: &str) -> Result<Dataset, TabularError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);

    let header = rdr.headers()?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(TabularError::EmptyFile);
    }
    let mut position: HashMap<&str, usize> = HashMap::new();
    for (i, name) in header.iter().enumerate() {
        if position.insert(name, i).is_some() {
            return Err(TabularError::DuplicateColumn(name.to_string()));
        }
    }
    let source_idx = schema
        .columns()
        .iter()
        .map(|c| {
            position
                .get(c.name.as_str())
                .copied()
                .ok_or_else(|| TabularError::MissingColumn(c.name.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut values: Vec<ColumnValues> = schema
        .columns()
        .iter()
        .map(|c| match c.kind {
            ColumnKind::Continuous => ColumnValues::Continuous(Vec::new()),
            ColumnKind::Categorical => ColumnValues::Categorical(Vec::new()),
        })
        .collect();
    let mut sentinels: Vec<BTreeMap<usize, String>> = vec![BTreeMap::new(); schema.len()];

    let mut record = csv::StringRecord::new();
    let mut row = 0usize;
    while rdr.read_record(&mut record)? {
        let line = record.position().map_or(0, |p| p.line());
        for (c, spec) in schema.columns().iter().enumerate() {
            let raw = &record[source_idx[c]];
            let sentinel = spec.sentinel_codes.contains(raw);
            if sentinel {
                sentinels[c].insert(row, raw.to_string());
            }
            let bad = || TabularError::BadCell {
                row,
                line,
                column: spec.name.clone(),
                value: raw.to_string(),
            };
            match &mut values[c] {
                ColumnValues::Continuous(v) => {
                    let cell = if sentinel || raw.is_empty() {
                        None
                    } else {
                        match raw.parse::<f64>() {
                            Ok(x) if x.is_finite() => Some(x),
                            _ => return Err(bad()),
                        }
                    };
                    v.push(cell);
                }
                ColumnValues::Categorical(v) => {
                    let cell = if sentinel || raw.is_empty() {
                        None
                    } else {
                        Some(spec.category_index(raw).ok_or_else(bad)? as u32)
                    };
                    v.push(cell);
                }
            }
        }
        row += 1;
    }

    let columns = values
        .into_iter()
        .zip(sentinels)
        .map(|(values, sentinels)| Column { values, sentinels })
        .collect();
    Dataset::from_columns(schema.clone(), columns, Provenance::now(source))
}

/// Writes the dataset as CSV in schema order. Missing cells are empty fields,
/// pending sentinel cells are written back as their raw code.
pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<(), TabularError> {
    let mut wtr = csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(writer);
    wtr.write_record(ds.schema().names())?;
    let mut fields: Vec<String> = Vec::with_capacity(ds.n_cols());
    for row in 0..ds.n_rows() {
        fields.clear();
        for col in 0..ds.n_cols() {
            fields.push(match ds.cell(col, row) {
                Cell::Missing => String::new(),
                Cell::Sentinel(code) => code.to_string(),
                Cell::Number(x) => format_number(x),
                Cell::Category(label) => label.to_string(),
            });
        }
        wtr.write_record(&fields)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<(), TabularError> {
    let file = File::create(path)?;
    write_csv(ds, std::io::BufWriter::new(file))
}

/// Shortest decimal text that parses back to the same `f64`.
pub fn format_number(x: f64) -> String {
    format!("{x}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::schema::ColumnSpec;

    fn schema() -> Schema {
        Schema::new(vec![
            ColumnSpec::categorical("gender", ["M", "F"]),
            ColumnSpec::continuous("age").with_sentinels(["999", "NA"]),
        ])
        .unwrap()
    }

    #[test]
    fn loads_and_reorders_columns() {
        let text = "age,gender,extra\n25,M,x\n31,F,y\n40,M,z\n";
        let ds = read_csv(text.as_bytes(), &schema(), "mem").unwrap();
        assert_eq!(ds.n_rows(), 3);
        assert_eq!(ds.schema().names().collect::<Vec<_>>(), ["gender", "age"]);
        assert_eq!(ds.cell(0, 1), Cell::Category("F"));
        assert_eq!(ds.cell(1, 2), Cell::Number(40.0));
    }

    #[test]
    fn header_errors() {
        let e = read_csv("gender\nM\n".as_bytes(), &schema(), "mem").unwrap_err();
        assert!(matches!(e, TabularError::MissingColumn(ref c) if c == "age"));
        let e = read_csv("gender,age,age\nM,1,2\n".as_bytes(), &schema(), "mem").unwrap_err();
        assert!(matches!(e, TabularError::DuplicateColumn(ref c) if c == "age"));
        let e = read_csv("".as_bytes(), &schema(), "mem").unwrap_err();
        assert!(matches!(e, TabularError::EmptyFile));
    }

    #[test]
    fn bad_cells_are_hard_errors() {
        let e = read_csv("gender,age\nM,25\nF,abc\n".as_bytes(), &schema(), "mem").unwrap_err();
        match e {
            TabularError::BadCell {
                row,
                line,
                column,
                value,
            } => {
                assert_eq!((row, line, column.as_str(), value.as_str()), (1, 3, "age", "abc"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let e = read_csv("gender,age\nX,25\n".as_bytes(), &schema(), "mem").unwrap_err();
        assert!(matches!(e, TabularError::BadCell { ref column, .. } if column == "gender"));
    }

    #[test]
    fn sentinels_and_empty_fields() {
        let ds = read_csv("gender,age\nM,NA\n,999\n".as_bytes(), &schema(), "mem").unwrap();
        assert_eq!(ds.cell(1, 0), Cell::Sentinel("NA"));
        assert_eq!(ds.cell(1, 1), Cell::Sentinel("999"));
        assert_eq!(ds.cell(0, 1), Cell::Missing);
    }

    #[test]
    fn write_then_read_is_identity() {
        let text = "gender,age\nM,25.5\n,999\nF,\n";
        let ds = read_csv(text.as_bytes(), &schema(), "mem").unwrap();
        let mut out = Vec::new();
        write_csv(&ds, &mut out).unwrap();
        assert_eq!(String::from_utf8(out.clone()).unwrap(), text);
        let back = read_csv(out.as_slice(), &schema(), "mem").unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn quoted_fields_are_supported() {
        let s = Schema::new(vec![ColumnSpec::categorical("place", ["Public way", "Home, family"])]).unwrap();
        let ds = read_csv("place\n\"Home, family\"\nPublic way\n".as_bytes(), &s, "mem").unwrap();
        assert_eq!(ds.cell(0, 0), Cell::Category("Home, family"));
        let mut out = Vec::new();
        write_csv(&ds, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "place\n\"Home, family\"\nPublic way\n");
    }
}
