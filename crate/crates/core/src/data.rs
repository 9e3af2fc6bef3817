//! Typed datasets, CSV loading, response derivation and similarity rules.
//!
//! A [`Dataset`] is an `n x d` table of features (each column numeric or
//! categorical) plus the `n` responses being explained. Responses can be the
//! raw column or a residual against a prediction column, see [`ResponseMode`].

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

impl FromStr for ColumnKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "numeric" => Ok(Self::Numeric),
            "categorical" => Ok(Self::Categorical),
            other => Err(Error::InvalidArgument(format!("unknown column type `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Numeric(Vec<f64>),
    /// Integer codes into `levels`, levels listed in order of first appearance.
    Categorical {
        codes: Vec<u32>,
        levels: Vec<String>,
    },
}

impl Column {
    pub fn kind(&self) -> ColumnKind {
        match self {
            Column::Numeric(_) => ColumnKind::Numeric,
            Column::Categorical { .. } => ColumnKind::Categorical,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Builds a categorical column from raw strings.
    pub fn categorical<S: AsRef<str>>(values: &[S]) -> Self {
        let mut levels: Vec<String> = Vec::new();
        let mut index: HashMap<String, u32> = HashMap::new();
        let codes = values
            .iter()
            .map(|v| {
                let v = v.as_ref();
                *index.entry(v.to_string()).or_insert_with(|| {
                    levels.push(v.to_string());
                    (levels.len() - 1) as u32
                })
            })
            .collect();
        Column::Categorical { codes, levels }
    }

    fn render(&self, row: usize) -> String {
        match self {
            Column::Numeric(v) => v[row].to_string(),
            Column::Categorical { codes, levels } => levels[codes[row] as usize].clone(),
        }
    }
}

/// How the explained response is derived from the response column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "prediction_column", rename_all = "snake_case")]
pub enum ResponseMode {
    Raw,
    Residual(String),
    AbsResidual(String),
    SquaredResidual(String),
}

impl ResponseMode {
    fn prediction_column(&self) -> Option<&str> {
        match self {
            ResponseMode::Raw => None,
            ResponseMode::Residual(c) | ResponseMode::AbsResidual(c) | ResponseMode::SquaredResidual(c) => Some(c),
        }
    }

    fn apply(&self, y: f64, pred: f64) -> f64 {
        match self {
            ResponseMode::Raw => y,
            ResponseMode::Residual(_) => y - pred,
            ResponseMode::AbsResidual(_) => (y - pred).abs(),
            ResponseMode::SquaredResidual(_) => (y - pred) * (y - pred),
        }
    }
}

impl FromStr for ResponseMode {
    type Err = Error;

    /// `raw`, `residual:<col>`, `abs-residual:<col>` or `squared-residual:<col>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("raw") {
            return Ok(Self::Raw);
        }
        let (mode, col) =
            s.split_once(':').ok_or_else(|| Error::InvalidArgument(format!("bad response mode `{s}`")))?;
        let col = col.trim().to_string();
        if col.is_empty() {
            return Err(Error::InvalidArgument(format!("response mode `{s}` names no column")));
        }
        match mode.trim().to_ascii_lowercase().as_str() {
            "residual" => Ok(Self::Residual(col)),
            "abs-residual" => Ok(Self::AbsResidual(col)),
            "squared-residual" => Ok(Self::SquaredResidual(col)),
            other => Err(Error::InvalidArgument(format!("unknown response mode `{other}`"))),
        }
    }
}

impl fmt::Display for ResponseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResponseMode::Raw => write!(f, "raw"),
            ResponseMode::Residual(c) => write!(f, "residual:{c}"),
            ResponseMode::AbsResidual(c) => write!(f, "abs-residual:{c}"),
            ResponseMode::SquaredResidual(c) => write!(f, "squared-residual:{c}"),
        }
    }
}

/// Immutable feature table plus responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<Column>,
    names: Vec<String>,
    responses: Vec<f64>,
}

impl Dataset {
    pub fn new(columns: Vec<Column>, names: Vec<String>, responses: Vec<f64>) -> Result<Self> {
        let n = responses.len();
        if n == 0 || columns.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if names.len() != columns.len() {
            return Err(Error::DimensionMismatch { expected: columns.len(), found: names.len() });
        }
        for (col, name) in columns.iter().zip(&names) {
            if col.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: col.len() });
            }
            if let Column::Numeric(v) = col {
                if let Some(row) = v.iter().position(|x| !x.is_finite()) {
                    return Err(Error::MissingValue { row, column: name.clone() });
                }
            }
        }
        if let Some(row) = responses.iter().position(|y| !y.is_finite()) {
            return Err(Error::MissingValue { row, column: "<response>".into() });
        }
        Ok(Self { columns, names, responses })
    }

    /// All-numeric dataset from row-major features.
    pub fn from_rows(rows: &[Vec<f64>], responses: Vec<f64>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Malformed("rows have differing lengths".into()));
        }
        let columns = (0..d).map(|j| Column::Numeric(rows.iter().map(|r| r[j]).collect())).collect();
        let names = (0..d).map(|j| format!("x{}", j + 1)).collect();
        Self::new(columns, names, responses)
    }

    pub fn n(&self) -> usize {
        self.responses.len()
    }

    pub fn d(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, j: usize) -> &Column {
        &self.columns[j]
    }

    pub fn column_names(&self) -> &[String] {
        &self.names
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|c| c == name)
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn kinds(&self) -> Vec<ColumnKind> {
        self.columns.iter().map(Column::kind).collect()
    }

    /// Type hints that reproduce this dataset's column types on reload.
    pub fn schema(&self) -> HashMap<String, ColumnKind> {
        self.names.iter().cloned().zip(self.kinds()).collect()
    }

    /// `max - min` for numeric columns, 0 for categorical ones.
    pub fn feature_ranges(&self) -> Vec<f64> {
        self.columns
            .iter()
            .map(|col| match col {
                Column::Numeric(v) => {
                    let (lo, hi) =
                        v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
                    hi - lo
                }
                Column::Categorical { .. } => 0.0,
            })
            .collect()
    }

    pub fn summary(&self) -> DatasetSummary<'_> {
        DatasetSummary(self)
    }

    /// Writes features followed by the response column as CSV.
    pub fn write_csv<W: Write>(&self, writer: W, response_name: &str) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.names.iter().map(String::as_str).collect();
        header.push(response_name);
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut record: Vec<String> = self.columns.iter().map(|c| c.render(i)).collect();
            record.push(self.responses[i].to_string());
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Plain-text summary: n, d, and per-column type and range.
pub struct DatasetSummary<'a>(&'a Dataset);

impl fmt::Display for DatasetSummary<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ds = self.0;
        writeln!(f, "n = {}", ds.n())?;
        writeln!(f, "d = {}", ds.d())?;
        for ((name, col), range) in ds.names.iter().zip(&ds.columns).zip(ds.feature_ranges()) {
            match col {
                Column::Numeric(_) => writeln!(f, "{name}\tnumeric\trange={range}")?,
                Column::Categorical { levels, .. } => writeln!(f, "{name}\tcategorical\tlevels={}", levels.len())?,
            }
        }
        Ok(())
    }
}

fn parse_real(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|x| x.is_finite())
}

/// Loads a dataset from a CSV file with a header row.
pub fn load_dataset(
    path: impl AsRef<Path>,
    response_column: &str,
    mode: &ResponseMode,
    overrides: &HashMap<String, ColumnKind>,
) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_dataset(file, response_column, mode, overrides)
}

/// Same as [`load_dataset`] over any reader. Row numbers in errors are
/// 0-based observation indices (the header is not counted).
pub fn read_dataset<R: Read>(
    reader: R,
    response_column: &str,
    mode: &ResponseMode,
    overrides: &HashMap<String, ColumnKind>,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut cells: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    for record in rdr.records() {
        let record = record?;
        for (j, field) in record.iter().enumerate() {
            cells[j].push(field.trim().to_string());
        }
    }
    let n = cells.first().map_or(0, Vec::len);
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    for name in overrides.keys() {
        if !header.contains(name) {
            return Err(Error::MissingColumn(name.clone()));
        }
    }

    let find = |name: &str| header.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn(name.into()));
    let numeric_column = |idx: usize, on_fail: Error| -> Result<Vec<f64>> {
        cells[idx]
            .iter()
            .enumerate()
            .map(|(row, s)| {
                if s.is_empty() {
                    return Err(Error::MissingValue { row, column: header[idx].clone() });
                }
                parse_real(s).ok_or_else(|| match &on_fail {
                    Error::NonNumericResponse(c) => Error::NonNumericResponse(c.clone()),
                    _ => Error::NonNumericColumn(header[idx].clone()),
                })
            })
            .collect()
    };

    let y_idx = find(response_column)?;
    let y = numeric_column(y_idx, Error::NonNumericResponse(response_column.into()))?;
    let pred_idx = match mode.prediction_column() {
        Some(c) => Some(find(c)?),
        None => None,
    };
    let responses = match pred_idx {
        Some(p) => {
            let pred = numeric_column(p, Error::NonNumericColumn(header[p].clone()))?;
            y.iter().zip(&pred).map(|(&y, &p)| mode.apply(y, p)).collect()
        }
        None => y,
    };

    let mut columns = Vec::new();
    let mut names = Vec::new();
    for (j, name) in header.iter().enumerate() {
        if j == y_idx || Some(j) == pred_idx {
            continue;
        }
        if let Some(row) = cells[j].iter().position(String::is_empty) {
            return Err(Error::MissingValue { row, column: name.clone() });
        }
        let inferred = if cells[j].iter().all(|s| parse_real(s).is_some()) {
            ColumnKind::Numeric
        } else {
            ColumnKind::Categorical
        };
        let column = match overrides.get(name).copied().unwrap_or(inferred) {
            ColumnKind::Numeric => Column::Numeric(numeric_column(j, Error::NonNumericColumn(name.clone()))?),
            ColumnKind::Categorical => Column::categorical(&cells[j]),
        };
        columns.push(column);
        names.push(name.clone());
    }
    Dataset::new(columns, names, responses)
}

/// Per-column similarity rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "param", rename_all = "snake_case")]
pub enum SimilarityRule {
    Equality,
    /// Similar when within `delta` times the column range.
    RelativeRange(f64),
    /// Similar when within this absolute distance.
    AbsoluteRange(f64),
}

impl SimilarityRule {
    pub const DEFAULT_DELTA: f64 = 0.1;

    fn validate(&self) -> Result<()> {
        match *self {
            SimilarityRule::RelativeRange(delta) if !(delta > 0.0 && delta <= 1.0) => {
                Err(Error::InvalidSpec(format!("relative range delta {delta} not in (0, 1]")))
            }
            SimilarityRule::AbsoluteRange(w) if !(w >= 0.0 && w.is_finite()) => {
                Err(Error::InvalidSpec(format!("absolute range width {w} must be finite and >= 0")))
            }
            _ => Ok(()),
        }
    }
}

impl Default for SimilarityRule {
    fn default() -> Self {
        SimilarityRule::RelativeRange(Self::DEFAULT_DELTA)
    }
}

impl FromStr for SimilarityRule {
    type Err = Error;

    /// `equality`, `relative:<delta>` or `absolute:<width>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, param) = match s.split_once(':') {
            Some((a, b)) => (a.trim(), Some(b.trim())),
            None => (s, None),
        };
        let number = |p: Option<&str>| -> Result<f64> {
            p.and_then(|p| p.parse::<f64>().ok())
                .ok_or_else(|| Error::InvalidSpec(format!("rule `{s}` needs a numeric parameter")))
        };
        let rule = match name.to_ascii_lowercase().as_str() {
            "equality" | "eq" if param.is_none() => SimilarityRule::Equality,
            "relative" => SimilarityRule::RelativeRange(number(param)?),
            "absolute" => SimilarityRule::AbsoluteRange(number(param)?),
            _ => return Err(Error::InvalidSpec(format!("unknown similarity rule `{s}`"))),
        };
        rule.validate()?;
        Ok(rule)
    }
}

impl fmt::Display for SimilarityRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimilarityRule::Equality => write!(f, "equality"),
            SimilarityRule::RelativeRange(d) => write!(f, "relative:{d}"),
            SimilarityRule::AbsoluteRange(w) => write!(f, "absolute:{w}"),
        }
    }
}

/// One validated [`SimilarityRule`] per feature column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilaritySpec {
    rules: Vec<SimilarityRule>,
}

impl SimilaritySpec {
    pub fn new(ds: &Dataset, rules: Vec<SimilarityRule>) -> Result<Self> {
        if rules.len() != ds.d() {
            return Err(Error::DimensionMismatch { expected: ds.d(), found: rules.len() });
        }
        for ((rule, col), name) in rules.iter().zip(ds.columns()).zip(ds.column_names()) {
            rule.validate()?;
            if col.kind() == ColumnKind::Categorical && *rule != SimilarityRule::Equality {
                return Err(Error::InvalidSpec(format!("categorical column `{name}` must use equality")));
            }
        }
        Ok(Self { rules })
    }

    /// `default` on numeric columns, equality on categorical ones, then
    /// per-column overrides by name.
    pub fn with_default(ds: &Dataset, default: SimilarityRule, overrides: &[(String, SimilarityRule)]) -> Result<Self> {
        let mut rules: Vec<SimilarityRule> = ds
            .columns()
            .iter()
            .map(|c| match c.kind() {
                ColumnKind::Numeric => default,
                ColumnKind::Categorical => SimilarityRule::Equality,
            })
            .collect();
        for (name, rule) in overrides {
            let j = ds.column_index(name).ok_or_else(|| Error::MissingColumn(name.clone()))?;
            rules[j] = *rule;
        }
        Self::new(ds, rules)
    }

    pub fn equality(ds: &Dataset) -> Self {
        Self { rules: vec![SimilarityRule::Equality; ds.d()] }
    }

    pub fn rules(&self) -> &[SimilarityRule] {
        &self.rules
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(csv: &str, mode: &ResponseMode) -> Result<Dataset> {
        read_dataset(csv.as_bytes(), "y", mode, &HashMap::new())
    }

    #[test]
    fn identity_load() {
        let ds = read("a,b,y\n0,1,10\n2,3,20\n4,5,30\n", &ResponseMode::Raw).unwrap();
        assert_eq!((ds.n(), ds.d()), (3, 2));
        assert_eq!(ds.responses(), &[10.0, 20.0, 30.0]);
        assert_eq!(ds.column_names(), &["a", "b"]);
    }

    #[test]
    fn residual_modes() {
        let csv = "x,y,pred\n1,1,1\n2,2,1\n3,3,1\n";
        let r = read(csv, &ResponseMode::Residual("pred".into())).unwrap();
        assert_eq!(r.responses(), &[0.0, 1.0, 2.0]);
        assert_eq!(r.d(), 1);
        let csv = "x,y,pred\n1,1,3\n2,2,1\n";
        let a = read(csv, &ResponseMode::AbsResidual("pred".into())).unwrap();
        assert_eq!(a.responses(), &[2.0, 1.0]);
        let s = read(csv, &ResponseMode::SquaredResidual("pred".into())).unwrap();
        assert_eq!(s.responses(), &[4.0, 1.0]);
    }

    #[test]
    fn load_errors() {
        let err = read("a,y\n1,2\n,3\n", &ResponseMode::Raw).unwrap_err();
        assert!(matches!(err, Error::MissingValue { row: 1, ref column } if column == "a"), "{err:?}");
        assert!(matches!(read("a,b\n1,2\n", &ResponseMode::Raw), Err(Error::MissingColumn(_))));
        assert!(matches!(read("a,y\n1,x\n", &ResponseMode::Raw), Err(Error::NonNumericResponse(_))));
        assert!(matches!(read("a,y\n", &ResponseMode::Raw), Err(Error::EmptyDataset)));
        assert!(matches!(read("a,y\n1,2\n", &ResponseMode::Residual("p".into())), Err(Error::MissingColumn(_))));
        assert!(matches!(read("y\n1\n", &ResponseMode::Raw), Err(Error::EmptyDataset)));
    }

    #[test]
    fn categorical_inference_and_override() {
        let csv = "c,k,y\nred,1,0\nblue,2,0\nred,1,0\n";
        let ds = read(csv, &ResponseMode::Raw).unwrap();
        assert_eq!(
            ds.column(0),
            &Column::Categorical { codes: vec![0, 1, 0], levels: vec!["red".into(), "blue".into()] }
        );
        assert_eq!(ds.column(1).kind(), ColumnKind::Numeric);
        let overrides = HashMap::from([("k".to_string(), ColumnKind::Categorical)]);
        let ds = read_dataset(csv.as_bytes(), "y", &ResponseMode::Raw, &overrides).unwrap();
        assert_eq!(ds.column(1).kind(), ColumnKind::Categorical);
        let bad = HashMap::from([("c".to_string(), ColumnKind::Numeric)]);
        assert!(matches!(read_dataset(csv.as_bytes(), "y", &ResponseMode::Raw, &bad), Err(Error::NonNumericColumn(_))));
    }

    #[test]
    fn ranges() {
        let ds = Dataset::from_rows(&[vec![0.0, 7.0], vec![5.0, 7.0], vec![10.0, 7.0]], vec![0.0; 3]).unwrap();
        assert_eq!(ds.feature_ranges(), vec![10.0, 0.0]);
        let ds = Dataset::from_rows(&[vec![0.0, 1.0], vec![2.0, 3.0]], vec![0.0; 2]).unwrap();
        assert_eq!(ds.feature_ranges(), vec![2.0, 2.0]);
    }

    #[test]
    fn rule_parsing_and_validation() {
        assert_eq!("equality".parse::<SimilarityRule>().unwrap(), SimilarityRule::Equality);
        assert_eq!("relative:0.25".parse::<SimilarityRule>().unwrap(), SimilarityRule::RelativeRange(0.25));
        assert_eq!("absolute:3".parse::<SimilarityRule>().unwrap(), SimilarityRule::AbsoluteRange(3.0));
        assert!("relative:0".parse::<SimilarityRule>().is_err());
        assert!("relative:1.5".parse::<SimilarityRule>().is_err());
        assert!("absolute:-1".parse::<SimilarityRule>().is_err());
        assert!("fuzzy".parse::<SimilarityRule>().is_err());

        let ds = read("c,k,y\nred,1,0\nblue,2,0\n", &ResponseMode::Raw).unwrap();
        let spec = SimilaritySpec::with_default(&ds, SimilarityRule::default(), &[]).unwrap();
        assert_eq!(spec.rules(), &[SimilarityRule::Equality, SimilarityRule::RelativeRange(0.1)]);
        let bad = [("c".to_string(), SimilarityRule::AbsoluteRange(1.0))];
        assert!(matches!(
            SimilaritySpec::with_default(&ds, SimilarityRule::default(), &bad),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn summary_lists_columns() {
        let ds = read("c,k,y\nred,1,0\nblue,3,0\n", &ResponseMode::Raw).unwrap();
        let text = ds.summary().to_string();
        assert!(text.contains("n = 2"));
        assert!(text.contains("c\tcategorical\tlevels=2"));
        assert!(text.contains("k\tnumeric\trange=2"));
    }
}
