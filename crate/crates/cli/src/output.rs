//! Output records and writers. JSONL files open with a header record that
//! embeds the resolved configuration; CSV files carry the same JSON on a
//! leading `#` comment line.

use crate::error::{CliError, CliResult};
use cohort_shapley::shapley::{Attribution, Method};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
pub struct Header<C> {
    pub record: String,
    pub schema: String,
    pub version: u32,
    pub config: C,
}

impl<C: Serialize> Header<C> {
    pub fn new(schema: &str, config: C) -> Self {
        Self { record: "header".into(), schema: schema.into(), version: SCHEMA_VERSION, config }
    }

    pub fn json(&self) -> String {
        serde_json::to_string(self).expect("header serializes")
    }

    /// `# <schema> v<version> <config json>`.
    pub fn csv_comment(&self) -> String {
        let config = serde_json::to_string(&self.config).expect("config serializes");
        format!("# {} v{} {config}", self.schema, self.version)
    }
}

/// One attribution line of an attribution file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionRecord {
    pub record: String,
    pub method: Method,
    pub target_index: usize,
    pub values: Map<String, Value>,
    pub nu_empty: f64,
    pub nu_full: f64,
    pub efficiency_gap: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<Map<String, Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

fn keyed(names: &[String], values: &[f64]) -> Map<String, Value> {
    names.iter().zip(values).map(|(n, v)| (n.clone(), Value::from(*v))).collect()
}

impl AttributionRecord {
    pub fn new(a: &Attribution, names: &[String], seconds: Option<f64>) -> Self {
        Self {
            record: "attribution".into(),
            method: a.method,
            target_index: a.target_index,
            values: keyed(names, &a.values),
            nu_empty: a.nu_empty,
            nu_full: a.nu_full,
            efficiency_gap: a.efficiency_gap,
            stderr: a.stderr.as_ref().map(|s| keyed(names, s)),
            steps: a.steps,
            samples: a.samples,
            seed: a.seed,
            seconds,
        }
    }

    /// Values in dataset column order, matched by name.
    pub fn to_attribution(&self, names: &[String]) -> CliResult<Attribution> {
        if self.values.len() != names.len() {
            return Err(
                cohort_shapley::Error::DimensionMismatch { expected: names.len(), found: self.values.len() }.into()
            );
        }
        let values = names
            .iter()
            .map(|n| {
                self.values
                    .get(n)
                    .ok_or_else(|| CliError::Data(format!("attribution has no value for column `{n}`")))?
                    .as_f64()
                    .ok_or_else(|| CliError::Data(format!("attribution value for `{n}` is not a number")))
            })
            .collect::<CliResult<Vec<f64>>>()?;
        let mut a = Attribution::new(self.method, self.target_index, values, self.nu_empty, self.nu_full);
        a.efficiency_gap = self.efficiency_gap;
        a.steps = self.steps;
        a.samples = self.samples;
        a.seed = self.seed;
        Ok(a)
    }

    /// `method`, plus the step or sample count when present.
    pub fn label(&self) -> String {
        match (self.steps, self.samples) {
            (Some(r), _) => format!("{}(steps={r})", self.method.name()),
            (_, Some(m)) => format!("{}(samples={m})", self.method.name()),
            _ => self.method.name().to_string(),
        }
    }
}

/// A parsed attribution file: its header config and records.
pub struct AttributionFile {
    pub path: PathBuf,
    pub config: Value,
    pub records: Vec<AttributionRecord>,
}

pub fn read_attribution_file(path: &Path) -> CliResult<AttributionFile> {
    let file = File::open(path).map_err(|e| CliError::Data(format!("cannot read `{}`: {e}", path.display())))?;
    let mut config = None;
    let mut records = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::Data(format!("cannot read `{}`: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |msg: String| CliError::Data(format!("{}:{}: {msg}", path.display(), lineno + 1));
        let value: Value = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        match value.get("record").and_then(Value::as_str) {
            Some("header") => {
                let h: Header<Value> = serde_json::from_value(value).map_err(|e| malformed(e.to_string()))?;
                if h.schema != "cohort-attribution" || h.version != SCHEMA_VERSION {
                    return Err(malformed(format!("unsupported schema {} v{}", h.schema, h.version)));
                }
                config = Some(h.config);
            }
            Some("attribution") => {
                records.push(serde_json::from_value(value).map_err(|e| malformed(e.to_string()))?);
            }
            _ => return Err(malformed("expected a header or attribution record".into())),
        }
    }
    let config = config.ok_or_else(|| CliError::Data(format!("`{}` has no header record", path.display())))?;
    Ok(AttributionFile { path: path.to_path_buf(), config, records })
}

/// Buffered writer to a file, or to stdout when `path` is `None`.
pub struct Output {
    path: String,
    inner: Box<dyn Write>,
}

impl Output {
    pub fn open(path: Option<&Path>) -> CliResult<Self> {
        match path {
            Some(p) => {
                let file =
                    File::create(p).map_err(|source| CliError::Output { path: p.display().to_string(), source })?;
                Ok(Self { path: p.display().to_string(), inner: Box::new(BufWriter::new(file)) })
            }
            None => Ok(Self { path: "<stdout>".into(), inner: Box::new(BufWriter::new(std::io::stdout())) }),
        }
    }

    fn wrap(&self, source: std::io::Error) -> CliError {
        CliError::Output { path: self.path.clone(), source }
    }

    pub fn line(&mut self, text: &str) -> CliResult<()> {
        writeln!(self.inner, "{text}").map_err(|e| self.wrap(e))
    }

    pub fn json<T: Serialize>(&mut self, record: &T) -> CliResult<()> {
        let text = serde_json::to_string(record).expect("record serializes");
        self.line(&text)
    }

    /// Writes one CSV row; fields are quoted when needed.
    pub fn csv_row<S: AsRef<str>>(&mut self, fields: &[S]) -> CliResult<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record(fields.iter().map(AsRef::as_ref)).map_err(|e| CliError::Data(e.to_string()))?;
        let bytes = w.into_inner().map_err(|e| CliError::Data(e.to_string()))?;
        self.inner.write_all(&bytes).map_err(|e| self.wrap(e))
    }

    pub fn writer(&mut self) -> &mut dyn Write {
        &mut self.inner
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.inner.flush().map_err(|e| self.wrap(e))
    }
}

/// Optional values render as empty CSV fields.
pub fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
