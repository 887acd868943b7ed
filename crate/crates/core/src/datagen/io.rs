use std::io::{Read, Write};
use std::path::Path;

use crate::domain::{Dataset, Group, Sample, Schema};
use crate::error::{Error, Result};

/// Loads a dataset CSV with a header of feature names followed by `y` and `z`
/// (any column order). Lines starting with `#` are skipped.
///
/// With a schema, every schema feature must be present and no other columns may
/// appear; without one, every non-`y`/`z` column becomes a manipulable feature.
/// Parse errors report the 1-based line number in the file and the column name.
pub fn load_csv_dataset(path: &Path, schema: Option<&Schema>) -> Result<Dataset> {
    read_csv_dataset(std::fs::File::open(path)?, schema)
}

pub fn read_csv_dataset<R: Read>(reader: R, schema: Option<&Schema>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let find = |name: &str| header.iter().position(|h| h == name);
    let header_error = |message: String, column: &str| Error::Parse {
        row: 1,
        column: column.to_string(),
        message,
    };

    let y_col = find("y").ok_or_else(|| header_error("missing label column".into(), "y"))?;
    let z_col = find("z").ok_or_else(|| header_error("missing group column".into(), "z"))?;
    let schema = match schema {
        Some(s) => s.clone(),
        None => {
            let names: Vec<String> = header
                .iter()
                .filter(|h| *h != "y" && *h != "z")
                .cloned()
                .collect();
            let n = names.len();
            Schema::new(names, vec![true; n])?
        }
    };
    let mut feature_cols = Vec::with_capacity(schema.dim());
    for name in &schema.feature_names {
        feature_cols
            .push(find(name).ok_or_else(|| header_error("missing feature column".into(), name))?);
    }
    if header.len() != schema.dim() + 2 {
        let extra = header
            .iter()
            .find(|h| *h != "y" && *h != "z" && !schema.feature_names.contains(h))
            .cloned()
            .unwrap_or_default();
        return Err(header_error("column not in schema".into(), &extra));
    }

    let mut samples = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let cell = |col: usize| -> Result<f64> {
            let raw = rec.get(col).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    row: line,
                    column: header[col].clone(),
                    message: format!("`{raw}` is not a finite number"),
                })
        };
        let binary = |col: usize| -> Result<u8> {
            match rec.get(col).unwrap_or("") {
                "0" => Ok(0),
                "1" => Ok(1),
                raw => Err(Error::Parse {
                    row: line,
                    column: header[col].clone(),
                    message: format!("expected 0 or 1, got `{raw}`"),
                }),
            }
        };
        let features = feature_cols
            .iter()
            .map(|&c| cell(c))
            .collect::<Result<Vec<_>>>()?;
        let y = binary(y_col)?;
        let z = binary(z_col)?;
        samples.push(Sample::new(features, y == 1, Group::from_index(z)?));
    }
    Dataset::new(schema, samples)
}

pub fn write_csv_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv_dataset_to(dataset, std::io::BufWriter::new(file))
}

/// Writes features in schema order, then `y` and `z`. Values use the shortest
/// decimal form that parses back to the same `f64`.
pub fn write_csv_dataset_to<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = dataset
        .schema()
        .feature_names
        .iter()
        .map(String::as_str)
        .collect();
    header.extend(["y", "z"]);
    w.write_record(&header)?;
    for s in dataset.samples() {
        let mut row: Vec<String> = s.features.iter().map(|v| v.to_string()).collect();
        row.push(s.y().to_string());
        row.push(s.group.index().to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_rows() {
        let csv = "x,y,z\n1.5,0,0\n2,1,1\n-3e2,1,0\n";
        let d = read_csv_dataset(csv.as_bytes(), None).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.samples()[2].features, vec![-300.0]);
        assert_eq!(d.samples()[1].group, Group::One);
    }

    #[test]
    fn bad_label_names_row_and_column() {
        let csv = "x,y,z\n1,0,0\n2,2,1\n";
        match read_csv_dataset(csv.as_bytes(), None).unwrap_err() {
            Error::Parse { row, column, .. } => assert_eq!((row, column.as_str()), (3, "y")),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn non_numeric_and_missing_columns() {
        assert!(matches!(
            read_csv_dataset("x,y,z\nabc,0,0\n".as_bytes(), None),
            Err(Error::Parse { row: 2, .. })
        ));
        assert!(matches!(
            read_csv_dataset("x,y\n1,0\n".as_bytes(), None),
            Err(Error::Parse { .. })
        ));
        let schema = Schema::new(vec!["a".into(), "b".into()], vec![true, false]).unwrap();
        let err = read_csv_dataset("a,y,z\n1,0,0\n".as_bytes(), Some(&schema)).unwrap_err();
        assert!(err.to_string().contains("column b"), "{err}");
        let err = read_csv_dataset("a,b,c,y,z\n1,1,1,0,0\n".as_bytes(), Some(&schema)).unwrap_err();
        assert!(err.to_string().contains("column c"), "{err}");
    }

    #[test]
    fn schema_order_and_comments() {
        let schema = Schema::new(vec!["b".into(), "a".into()], vec![true, false]).unwrap();
        let csv = "# generated\nz,a,y,b\n1,10,0,20\n";
        let d = read_csv_dataset(csv.as_bytes(), Some(&schema)).unwrap();
        assert_eq!(d.samples()[0].features, vec![20.0, 10.0]);
        assert_eq!(d.schema().manipulable, vec![true, false]);
    }

    #[test]
    fn write_then_read_is_identity() {
        let d = crate::datagen::generate_synthetic_1d(1.0, 2.0, 0.7, 50, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        write_csv_dataset(&d, &path).unwrap();
        let back = load_csv_dataset(&path, Some(d.schema())).unwrap();
        assert_eq!(back, d);
    }
}
