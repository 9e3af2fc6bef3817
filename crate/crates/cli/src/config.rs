//! Run configuration: an optional TOML file overlaid by command-line flags,
//! resolved and validated before any computation starts.

use crate::error::{CliError, CliResult};
use cohort_shapley::data::{load_dataset, ColumnKind, Dataset, ResponseMode, SimilarityRule, SimilaritySpec};
use cohort_shapley::shapley::Method;
use cohort_shapley::value::GkwParams;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

pub const DEFAULT_STEPS: usize = 50;
pub const DEFAULT_SAMPLES: usize = 1000;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_EPS: f64 = 0.01;
pub const DEFAULT_DIAGNOSE_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimilaritySection {
    pub default: Option<String>,
    #[serde(default)]
    pub columns: BTreeMap<String, String>,
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data: Option<PathBuf>,
    pub response: Option<String>,
    pub response_mode: Option<String>,
    pub targets: Option<String>,
    pub method: Option<String>,
    pub methods: Option<Vec<String>>,
    pub steps: Option<OneOrMany<usize>>,
    pub samples: Option<OneOrMany<usize>>,
    pub sigma: Option<f64>,
    pub ridge: Option<f64>,
    pub seed: Option<u64>,
    pub eps: Option<f64>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    #[serde(default)]
    pub similarity: SimilaritySection,
    #[serde(default)]
    pub column_kinds: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config `{}`: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::config(format!("config `{}`: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Jsonl,
    Csv,
}

/// Everything needed to load the dataset and build similarity profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub data: PathBuf,
    pub response: String,
    pub response_mode: String,
    pub similarity: String,
    pub column_similarity: BTreeMap<String, String>,
    pub column_kinds: BTreeMap<String, String>,
}

/// Dataset-related flags shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct DataFlags {
    pub data: Option<PathBuf>,
    pub response: Option<String>,
    pub response_mode: Option<String>,
    pub similarity: Option<String>,
    pub column_similarity: Vec<String>,
    pub column_kinds: Vec<String>,
}

impl DataFlags {
    pub fn is_empty(&self) -> bool {
        self.data.is_none()
            && self.response.is_none()
            && self.response_mode.is_none()
            && self.similarity.is_none()
            && self.column_similarity.is_empty()
            && self.column_kinds.is_empty()
    }
}

fn split_pair<'a>(s: &'a str, flag: &str) -> CliResult<(&'a str, &'a str)> {
    s.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| CliError::config(format!("`--{flag} {s}`: expected COLUMN=VALUE")))
}

impl DataConfig {
    /// Flags override the file; per-column entries are merged by name.
    pub fn resolve(file: &FileConfig, flags: &DataFlags) -> CliResult<Self> {
        let data = flags
            .data
            .clone()
            .or_else(|| file.data.clone())
            .ok_or_else(|| CliError::config("no dataset given (use --data or `data` in the config)"))?;
        let response = flags
            .response
            .clone()
            .or_else(|| file.response.clone())
            .ok_or_else(|| CliError::config("no response column given (use --response)"))?;
        let mode_text = flags.response_mode.clone().or_else(|| file.response_mode.clone());
        let response_mode = match mode_text {
            Some(s) => s.parse::<ResponseMode>()?.to_string(),
            None => ResponseMode::Raw.to_string(),
        };
        let similarity = match flags.similarity.clone().or_else(|| file.similarity.default.clone()) {
            Some(s) => s.parse::<SimilarityRule>()?.to_string(),
            None => SimilarityRule::default().to_string(),
        };
        let mut column_similarity = BTreeMap::new();
        for (name, rule) in &file.similarity.columns {
            column_similarity.insert(name.clone(), rule.parse::<SimilarityRule>()?.to_string());
        }
        for entry in &flags.column_similarity {
            let (name, rule) = split_pair(entry, "column-similarity")?;
            column_similarity.insert(name.to_string(), rule.parse::<SimilarityRule>()?.to_string());
        }
        let mut column_kinds = BTreeMap::new();
        let kinds = file.column_kinds.iter().map(|(k, v)| (k.as_str(), v.as_str()));
        let flag_kinds =
            flags.column_kinds.iter().map(|e| split_pair(e, "column-kind")).collect::<CliResult<Vec<_>>>()?;
        for (name, kind) in kinds.chain(flag_kinds) {
            let kind: ColumnKind = kind.parse()?;
            let text = match kind {
                ColumnKind::Numeric => "numeric",
                ColumnKind::Categorical => "categorical",
            };
            column_kinds.insert(name.to_string(), text.to_string());
        }
        Ok(Self { data, response, response_mode, similarity, column_similarity, column_kinds })
    }

    /// Loads the dataset and builds its similarity specification.
    pub fn load(&self) -> CliResult<(Dataset, SimilaritySpec)> {
        let mode: ResponseMode = self.response_mode.parse()?;
        let overrides: HashMap<String, ColumnKind> =
            self.column_kinds.iter().map(|(k, v)| Ok((k.clone(), v.parse()?))).collect::<CliResult<_>>()?;
        let ds = load_dataset(&self.data, &self.response, &mode, &overrides).map_err(|e| match e {
            cohort_shapley::Error::Io(io) => CliError::Data(format!("cannot read `{}`: {io}", self.data.display())),
            other => other.into(),
        })?;
        let default: SimilarityRule = self.similarity.parse()?;
        let rules = self
            .column_similarity
            .iter()
            .map(|(k, v)| Ok((k.clone(), v.parse()?)))
            .collect::<CliResult<Vec<(String, SimilarityRule)>>>()?;
        let spec = SimilaritySpec::with_default(&ds, default, &rules)?;
        Ok((ds, spec))
    }
}

/// Target selection: `all`, or a comma-separated list of indices and
/// half-open ranges `a..b` (`a..=b` is inclusive).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Targets {
    All,
    Items(Vec<(usize, usize)>),
}

impl Targets {
    pub fn parse(s: &str) -> CliResult<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("all") {
            return Ok(Targets::All);
        }
        let bad = || CliError::config(format!("bad target selection `{s}`"));
        let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
        let mut items = Vec::new();
        for part in s.split(',') {
            let part = part.trim();
            let range = if let Some((a, b)) = part.split_once("..=") {
                (num(a)?, num(b)?.checked_add(1).ok_or_else(bad)?)
            } else if let Some((a, b)) = part.split_once("..") {
                (num(a)?, num(b)?)
            } else {
                let i = num(part)?;
                (i, i + 1)
            };
            if range.0 >= range.1 {
                return Err(bad());
            }
            items.push(range);
        }
        Ok(Targets::Items(items))
    }

    /// Sorted, deduplicated indices; errors on any index `>= n`.
    pub fn indices(&self, n: usize) -> CliResult<Vec<usize>> {
        match self {
            Targets::All => Ok((0..n).collect()),
            Targets::Items(items) => {
                let mut out = Vec::new();
                for &(a, b) in items {
                    if b > n {
                        return Err(cohort_shapley::Error::TargetOutOfRange { target: b - 1, n }.into());
                    }
                    out.extend(a..b);
                }
                out.sort_unstable();
                out.dedup();
                Ok(out)
            }
        }
    }
}

impl std::fmt::Display for Targets {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Targets::All => write!(f, "all"),
            Targets::Items(items) => {
                let parts: Vec<String> =
                    items.iter().map(|&(a, b)| if b == a + 1 { a.to_string() } else { format!("{a}..{b}") }).collect();
                write!(f, "{}", parts.join(","))
            }
        }
    }
}

/// Method parameters as given, before validation.
#[derive(Debug, Clone, Default)]
pub struct ParamFlags {
    pub steps: Vec<usize>,
    pub samples: Vec<usize>,
    pub sigma: Option<f64>,
    pub ridge: Option<f64>,
    pub seed: Option<u64>,
}

impl ParamFlags {
    /// Flags replace file values parameter by parameter.
    pub fn merged(mut self, file: &FileConfig) -> Self {
        if self.steps.is_empty() {
            self.steps = file.steps.clone().map(OneOrMany::into_vec).unwrap_or_default();
        }
        if self.samples.is_empty() {
            self.samples = file.samples.clone().map(OneOrMany::into_vec).unwrap_or_default();
        }
        self.sigma = self.sigma.or(file.sigma);
        self.ridge = self.ridge.or(file.ridge);
        self.seed = self.seed.or(file.seed);
        self
    }
}

/// Validated parameters of one method run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodParams {
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ridge: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl MethodParams {
    pub fn label(&self) -> String {
        match (self.steps, self.samples) {
            (Some(r), _) => format!("{}(steps={r})", self.method.name()),
            (_, Some(m)) => format!("{}(samples={m})", self.method.name()),
            _ => self.method.name().to_string(),
        }
    }

    pub fn gkw(&self) -> GkwParams {
        let d = GkwParams::default();
        GkwParams { sigma: self.sigma.unwrap_or(d.sigma), ridge: self.ridge.unwrap_or(d.ridge) }
    }
}

fn uses(method: Method, param: &str) -> bool {
    matches!(
        (method, param),
        (Method::Igcs, "steps")
            | (Method::CsMc, "samples" | "seed")
            | (Method::Random, "seed")
            | (Method::Gkw, "sigma" | "ridge")
    )
}

fn methods_for(param: &str) -> String {
    Method::ALL.into_iter().filter(|&m| uses(m, param)).map(Method::name).collect::<Vec<_>>().join(" or ")
}

pub fn parse_method(s: &str) -> CliResult<Method> {
    s.parse::<Method>().map_err(|_| {
        let known: Vec<&str> = Method::ALL.into_iter().map(Method::name).collect();
        CliError::config(format!("unknown method `{s}` (expected one of {})", known.join(", ")))
    })
}

/// Expands parameter lists over `methods` and rejects parameters that no
/// listed method uses, or lists where a single value is required.
pub fn method_runs(methods: &[Method], flags: &ParamFlags, allow_lists: bool) -> CliResult<Vec<MethodParams>> {
    if methods.is_empty() {
        return Err(CliError::config("no method given"));
    }
    let given = [
        ("steps", !flags.steps.is_empty()),
        ("samples", !flags.samples.is_empty()),
        ("sigma", flags.sigma.is_some()),
        ("ridge", flags.ridge.is_some()),
        ("seed", flags.seed.is_some()),
    ];
    for (param, present) in given {
        if present && !methods.iter().any(|&m| uses(m, param)) {
            return Err(CliError::config(format!("--{param} applies only to {}", methods_for(param))));
        }
    }
    if !allow_lists && (flags.steps.len() > 1 || flags.samples.len() > 1) {
        return Err(CliError::config("--steps and --samples take a single value here"));
    }
    if flags.steps.contains(&0) {
        return Err(CliError::config("--steps must be at least 1"));
    }
    if flags.samples.contains(&0) {
        return Err(CliError::config("--samples must be at least 1"));
    }
    if let Some(s) = flags.sigma {
        if !(s > 0.0 && s.is_finite()) {
            return Err(CliError::config(format!("--sigma must be positive, got {s}")));
        }
    }
    if let Some(r) = flags.ridge {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(CliError::config(format!("--ridge must be nonnegative, got {r}")));
        }
    }
    let steps = if flags.steps.is_empty() { vec![DEFAULT_STEPS] } else { flags.steps.clone() };
    let samples = if flags.samples.is_empty() { vec![DEFAULT_SAMPLES] } else { flags.samples.clone() };
    let seed = flags.seed.unwrap_or(DEFAULT_SEED);
    let mut runs = Vec::new();
    let mut seen = Vec::new();
    for &method in methods {
        if seen.contains(&method) {
            return Err(CliError::config(format!("method `{}` listed twice", method.name())));
        }
        seen.push(method);
        let base = MethodParams { method, steps: None, samples: None, sigma: None, ridge: None, seed: None };
        match method {
            Method::Igcs => runs.extend(steps.iter().map(|&r| MethodParams { steps: Some(r), ..base })),
            Method::CsMc => {
                runs.extend(samples.iter().map(|&m| MethodParams { samples: Some(m), seed: Some(seed), ..base }))
            }
            Method::Random => runs.push(MethodParams { seed: Some(seed), ..base }),
            Method::Gkw => {
                let d = GkwParams::default();
                runs.push(MethodParams {
                    sigma: Some(flags.sigma.unwrap_or(d.sigma)),
                    ridge: Some(flags.ridge.unwrap_or(d.ridge)),
                    ..base
                })
            }
            Method::CsExact | Method::Uniqueness => runs.push(base),
        }
    }
    Ok(runs)
}
