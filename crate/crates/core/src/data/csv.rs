use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Axis, Dataset, Matrix};
use crate::error::{Error, Result};

/// Column roles for CSV ingestion.
///
/// `features` are parsed as numbers and passed through; `categorical` columns
/// are one-hot encoded with categories in sorted order. Attribute columns are
/// kept as raw categorical values and are not features unless also listed
/// under `features` or `categorical`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub label: String,
    #[serde(default = "default_positive")]
    pub positive: String,
    #[serde(default = "default_negative")]
    pub negative: String,
    #[serde(default)]
    pub features: Vec<String>,
    #[serde(default)]
    pub categorical: Vec<String>,
    pub attributes: Vec<String>,
}

fn default_positive() -> String {
    "1".into()
}

fn default_negative() -> String {
    "0".into()
}

impl CsvSchema {
    pub fn new(label: &str, features: &[&str], attributes: &[&str]) -> Self {
        Self {
            label: label.into(),
            positive: default_positive(),
            negative: default_negative(),
            features: features.iter().map(|s| s.to_string()).collect(),
            categorical: Vec::new(),
            attributes: attributes.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// The schema that reads back a file produced by [`write_csv`].
    pub fn for_dataset(ds: &Dataset) -> Self {
        Self {
            label: "label".into(),
            positive: default_positive(),
            negative: default_negative(),
            features: ds.feature_names().to_vec(),
            categorical: Vec::new(),
            attributes: ds.axes().iter().map(|a| a.name.clone()).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() && self.categorical.is_empty() {
            return Err(Error::Schema("schema names no feature columns".into()));
        }
        if self.attributes.is_empty() {
            return Err(Error::Schema("schema names no attribute columns".into()));
        }
        if self.positive == self.negative {
            return Err(Error::Schema("positive and negative label values coincide".into()));
        }
        Ok(())
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<Dataset> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
    };
    let label_col = column(&schema.label)?;
    let numeric_cols = schema
        .features
        .iter()
        .map(|c| column(c))
        .collect::<Result<Vec<_>>>()?;
    let cat_cols = schema
        .categorical
        .iter()
        .map(|c| column(c))
        .collect::<Result<Vec<_>>>()?;
    let attr_cols = schema
        .attributes
        .iter()
        .map(|c| column(c))
        .collect::<Result<Vec<_>>>()?;

    let mut labels = Vec::new();
    let mut numeric: Vec<Vec<f64>> = Vec::new();
    let mut cat_raw: Vec<Vec<String>> = Vec::new();
    let mut attr_raw: Vec<Vec<String>> = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let cell = |c: usize| rec.get(c).unwrap_or("").trim();
        let y = cell(label_col);
        labels.push(if y == schema.positive {
            1
        } else if y == schema.negative {
            0
        } else {
            return Err(Error::Validation(format!(
                "row {row}: label `{y}` is neither `{}` nor `{}`",
                schema.positive, schema.negative
            )));
        });
        let mut xs = Vec::with_capacity(numeric_cols.len());
        for (&c, name) in numeric_cols.iter().zip(&schema.features) {
            let v: f64 = cell(c).parse().map_err(|_| Error::Row {
                row,
                message: format!("column `{name}`: `{}` is not a number", cell(c)),
            })?;
            xs.push(v);
        }
        numeric.push(xs);
        cat_raw.push(cat_cols.iter().map(|&c| cell(c).to_string()).collect());
        attr_raw.push(attr_cols.iter().map(|&c| cell(c).to_string()).collect());
    }

    let cat_levels: Vec<Vec<String>> = (0..cat_cols.len())
        .map(|k| sorted_levels(cat_raw.iter().map(|r| r[k].as_str())))
        .collect();
    let mut feature_names = schema.features.clone();
    for (name, levels) in schema.categorical.iter().zip(&cat_levels) {
        feature_names.extend(levels.iter().map(|l| format!("{name}={l}")));
    }
    let n = labels.len();
    let d = feature_names.len();
    let mut data = Vec::with_capacity(n * d);
    for (xs, cats) in numeric.iter().zip(&cat_raw) {
        data.extend_from_slice(xs);
        for (value, levels) in cats.iter().zip(&cat_levels) {
            data.extend(levels.iter().map(|l| if l == value { 1.0 } else { 0.0 }));
        }
    }

    let axes: Vec<Axis> = schema
        .attributes
        .iter()
        .enumerate()
        .map(|(k, name)| Axis::new(name.clone(), sorted_levels(attr_raw.iter().map(|r| r[k].as_str()))))
        .collect();
    let lookup: Vec<BTreeMap<&str, usize>> = axes
        .iter()
        .map(|a| a.categories.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect())
        .collect();
    let attributes = attr_raw
        .iter()
        .map(|r| r.iter().zip(&lookup).map(|(v, m)| m[v.as_str()]).collect())
        .collect();

    Dataset::new(Matrix::new(n, d, data)?, feature_names, labels, axes, attributes)
}

fn sorted_levels<'a>(values: impl Iterator<Item = &'a str>) -> Vec<String> {
    values
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(str::to_string)
        .collect()
}

/// Write features, attributes and a `label` column (`1`/`0`).
///
/// Floats use the shortest representation that parses back to the same value.
pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = ds.feature_names().iter().map(String::as_str).collect();
    header.extend(ds.axes().iter().map(|a| a.name.as_str()));
    header.push("label");
    w.write_record(&header)?;
    let axes: Vec<usize> = (0..ds.axes().len()).collect();
    for i in 0..ds.len() {
        let mut rec: Vec<String> = ds.features().row(i).iter().map(|v| v.to_string()).collect();
        rec.extend(ds.attribute_tuple(i, &axes));
        rec.push(ds.labels()[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "age,race,sex,income_gt50k\n\
                         31,Black,Female,1\n\
                         45,White,Male,0\n\
                         28,White,Female,0\n\
                         52,Black,Male,1\n";

    #[test]
    fn applies_schema() {
        let schema = CsvSchema::new("income_gt50k", &["age"], &["race", "sex"]);
        let ds = read_csv(SMALL.as_bytes(), &schema).unwrap();
        assert_eq!((ds.len(), ds.dim(), ds.axes().len()), (4, 1, 2));
        assert_eq!(ds.labels(), &[1, 0, 0, 1]);
        assert_eq!(ds.attribute(0, 0), "Black");
        assert_eq!(ds.attribute(1, 1), "Male");
    }

    #[test]
    fn non_binary_label_is_a_validation_error() {
        let bad = SMALL.replace("52,Black,Male,1", "52,Black,Male,maybe");
        let schema = CsvSchema::new("income_gt50k", &["age"], &["race", "sex"]);
        assert!(matches!(read_csv(bad.as_bytes(), &schema), Err(Error::Validation(_))));
    }

    #[test]
    fn missing_column_is_a_schema_error() {
        let schema = CsvSchema::new("income_gt50k", &["height"], &["race"]);
        assert!(matches!(read_csv(SMALL.as_bytes(), &schema), Err(Error::Schema(_))));
    }

    #[test]
    fn bad_number_reports_row() {
        let bad = SMALL.replace("28,White", "twenty,White");
        let schema = CsvSchema::new("income_gt50k", &["age"], &["race"]);
        match read_csv(bad.as_bytes(), &schema) {
            Err(Error::Row { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected row error, got {other:?}"),
        }
    }

    #[test]
    fn categorical_features_are_one_hot() {
        let text = "x,color,g,y\n1,red,a,1\n2,green,a,0\n3,blue,b,1\n";
        let mut schema = CsvSchema::new("y", &["x"], &["g"]);
        schema.categorical = vec!["color".into()];
        let ds = read_csv(text.as_bytes(), &schema).unwrap();
        assert_eq!(ds.dim(), 1 + 3);
        assert_eq!(ds.feature_names()[1..], ["color=blue", "color=green", "color=red"]);
        assert_eq!(ds.features().row(0), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn write_then_load_round_trips() {
        let schema = CsvSchema::new("income_gt50k", &["age"], &["race", "sex"]);
        let ds = read_csv(SMALL.as_bytes(), &schema).unwrap();
        let scaled = ds
            .with_features(Matrix::new(4, 1, vec![0.1, -1.0 / 3.0, 1e-300, 2.5e10]).unwrap())
            .unwrap();
        let mut buf = Vec::new();
        write_csv(&scaled, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), &CsvSchema::for_dataset(&scaled)).unwrap();
        assert_eq!(back, scaled);
    }
}
