use crate::config::{
    method_runs, parse_method, DataConfig, DataFlags, FileConfig, Format, MethodParams, ParamFlags, Targets,
    DEFAULT_DIAGNOSE_SAMPLES, DEFAULT_EPS, DEFAULT_SEED,
};
use crate::error::{CliError, CliResult};
use crate::output::{opt, read_attribution_file, AttributionRecord, Header, Output};
use cohort_shapley::data::{Dataset, SimilaritySpec};
use cohort_shapley::diagnostics::{heps_mass, ConvergenceReport};
use cohort_shapley::evaluation::{ordering_as_values, AbcReport, MeanStderr};
use cohort_shapley::igcs::{QuadratureSpec, SoftValue};
use cohort_shapley::shapley::{
    exact_shapley, mc_shapley, random_permutation, sample_rng, Attribution, Method, ValueFunction,
};
use cohort_shapley::similarity::SimilarityProfile;
use cohort_shapley::value::{CohortValue, GkwValue, UniquenessValue};
use cohort_shapley::FeatureSet;
use rayon::prelude::*;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Loads `--config` if given.
pub fn file_config(path: Option<&Path>) -> CliResult<FileConfig> {
    path.map(FileConfig::read).transpose().map(Option::unwrap_or_default)
}

/// One method run on one target.
pub fn run_method(ds: &Dataset, spec: &SimilaritySpec, target: usize, p: &MethodParams) -> CliResult<Attribution> {
    let profile = SimilarityProfile::build(ds, spec, target)?;
    let y = ds.responses();
    let attr = match p.method {
        Method::CsExact => exact_shapley(&CohortValue::new(&profile, y)?)?,
        Method::CsMc => {
            mc_shapley(&CohortValue::new(&profile, y)?, p.samples.expect("resolved"), p.seed.expect("resolved"))?
        }
        Method::Igcs => SoftValue::new(&profile, y)?.attribution(&QuadratureSpec::new(p.steps.expect("resolved"))?)?,
        Method::Gkw => {
            let mut a = exact_shapley(&GkwValue::new(ds, target, p.gkw())?)?;
            a.method = Method::Gkw;
            a
        }
        Method::Uniqueness => {
            let mut a = exact_shapley(&UniquenessValue::new(&profile))?;
            a.method = Method::Uniqueness;
            a
        }
        Method::Random => {
            let seed = p.seed.expect("resolved");
            let order = random_permutation(ds.d(), &mut sample_rng(seed, target as u64));
            let nu = CohortValue::new(&profile, y)?;
            let d = ds.d();
            let mut a = Attribution::new(
                Method::Random,
                target,
                ordering_as_values(&order),
                nu.value(&FeatureSet::empty(d))?,
                nu.value(&FeatureSet::full(d))?,
            );
            a.seed = Some(seed);
            a
        }
    };
    Ok(attr)
}

fn timed<T>(f: impl FnOnce() -> CliResult<T>) -> CliResult<(T, f64)> {
    let start = Instant::now();
    let out = f()?;
    Ok((out, start.elapsed().as_secs_f64()))
}

/// Runs `f` over targets in parallel; results come back in target order.
fn per_target<T: Send>(targets: &[usize], f: impl Fn(usize) -> CliResult<T> + Sync) -> CliResult<Vec<T>> {
    targets.par_iter().map(|&t| f(t)).collect()
}

pub struct AttributeOpts {
    pub config: Option<PathBuf>,
    pub data: DataFlags,
    pub method: Option<String>,
    pub targets: Option<String>,
    pub params: ParamFlags,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub timing: bool,
}

#[derive(Serialize)]
struct AttributeConfig<'a> {
    command: &'static str,
    dataset: &'a DataConfig,
    targets: String,
    run: MethodParams,
    format: Format,
    timing: bool,
}

pub fn attribute(opts: AttributeOpts) -> CliResult<()> {
    let file = file_config(opts.config.as_deref())?;
    let dataset = DataConfig::resolve(&file, &opts.data)?;
    let method_text = opts
        .method
        .or_else(|| file.method.clone())
        .ok_or_else(|| CliError::config("no method given (use --method)"))?;
    if file.methods.is_some() {
        return Err(CliError::config("`methods` belongs to compare; attribute takes `method`"));
    }
    let method = parse_method(&method_text)?;
    let run = method_runs(&[method], &opts.params.merged(&file), false)?.remove(0);
    let targets = Targets::parse(opts.targets.as_deref().or(file.targets.as_deref()).unwrap_or("all"))?;
    let format = opts.format.or(file.format).unwrap_or(Format::Jsonl);
    let output = opts.output.or_else(|| file.output.clone());

    let (ds, spec) = dataset.load()?;
    let indices = targets.indices(ds.n())?;
    let config = AttributeConfig {
        command: "attribute",
        dataset: &dataset,
        targets: targets.to_string(),
        run,
        format,
        timing: opts.timing,
    };
    let header = Header::new("cohort-attribution", config);

    let results = per_target(&indices, |t| timed(|| run_method(&ds, &spec, t, &run)))?;
    let names = ds.column_names();
    let mut out = Output::open(output.as_deref())?;
    match format {
        Format::Jsonl => {
            out.line(&header.json())?;
            for (a, secs) in &results {
                out.json(&AttributionRecord::new(a, names, opts.timing.then_some(*secs)))?;
            }
        }
        Format::Csv => {
            out.line(&header.csv_comment())?;
            let mut head: Vec<String> =
                ["target_index", "method", "nu_empty", "nu_full", "efficiency_gap", "steps", "samples", "seed"]
                    .map(String::from)
                    .to_vec();
            if opts.timing {
                head.push("seconds".into());
            }
            head.extend(names.iter().cloned());
            out.csv_row(&head)?;
            for (a, secs) in &results {
                let mut row = vec![
                    a.target_index.to_string(),
                    a.method.name().to_string(),
                    a.nu_empty.to_string(),
                    a.nu_full.to_string(),
                    a.efficiency_gap.to_string(),
                    opt(a.steps),
                    opt(a.samples),
                    opt(a.seed),
                ];
                if opts.timing {
                    row.push(secs.to_string());
                }
                row.extend(a.values.iter().map(f64::to_string));
                out.csv_row(&row)?;
            }
        }
    }
    out.finish()
}

pub struct EvaluateOpts {
    pub config: Option<PathBuf>,
    pub data: DataFlags,
    pub attributions: Vec<PathBuf>,
    pub output: Option<PathBuf>,
    pub plot_data: Option<PathBuf>,
}

#[derive(Serialize)]
struct EvaluateConfig<'a> {
    command: &'static str,
    dataset: &'a DataConfig,
    attributions: Vec<String>,
}

pub fn evaluate(opts: EvaluateOpts) -> CliResult<()> {
    let files = opts.attributions.iter().map(|p| read_attribution_file(p)).collect::<CliResult<Vec<_>>>()?;
    let dataset = if opts.config.is_none() && opts.data.is_empty() {
        let embedded = files[0]
            .config
            .get("dataset")
            .cloned()
            .ok_or_else(|| CliError::config("attribution header names no dataset; use --data"))?;
        serde_json::from_value::<DataConfig>(embedded)
            .map_err(|e| CliError::Data(format!("{}: bad dataset config: {e}", files[0].path.display())))?
    } else {
        DataConfig::resolve(&file_config(opts.config.as_deref())?, &opts.data)?
    };
    let (ds, spec) = dataset.load()?;
    let names = ds.column_names();

    let mut jobs = Vec::new();
    for f in &files {
        for r in &f.records {
            if r.target_index >= ds.n() {
                return Err(cohort_shapley::Error::TargetOutOfRange { target: r.target_index, n: ds.n() }.into());
            }
            jobs.push((r.label(), r.to_attribution(names)?));
        }
    }
    let reports: Vec<AbcReport> = jobs
        .par_iter()
        .map(|(_, a)| {
            let profile = SimilarityProfile::build(&ds, &spec, a.target_index)?;
            let nu = CohortValue::new(&profile, ds.responses())?;
            Ok(AbcReport::for_attribution(&nu, a)?)
        })
        .collect::<CliResult<_>>()?;

    let config = EvaluateConfig {
        command: "evaluate",
        dataset: &dataset,
        attributions: opts.attributions.iter().map(|p| p.display().to_string()).collect(),
    };
    let header = Header::new("cohort-evaluation", &config);
    let mut out = Output::open(opts.output.as_deref())?;
    out.line(&header.csv_comment())?;
    out.csv_row(&["method", "target_index", "abc_insertion", "abc_deletion", "abc_sum"])?;
    let mut labels: Vec<&str> = Vec::new();
    for ((label, _), rep) in jobs.iter().zip(&reports) {
        if !labels.contains(&label.as_str()) {
            labels.push(label);
        }
        out.csv_row(&[
            label.clone(),
            rep.target_index.to_string(),
            rep.abc_insertion.to_string(),
            rep.abc_deletion.to_string(),
            rep.abc_sum().to_string(),
        ])?;
    }
    for label in labels {
        let group: Vec<&AbcReport> =
            jobs.iter().zip(&reports).filter(|((l, _), _)| l == label).map(|(_, r)| r).collect();
        let stat = |f: fn(&AbcReport) -> f64| MeanStderr::of(&group.iter().map(|r| f(r)).collect::<Vec<_>>());
        let (ins, del, sum) = (stat(|r| r.abc_insertion), stat(|r| r.abc_deletion), stat(AbcReport::abc_sum));
        out.csv_row(&[
            label.to_string(),
            "mean".into(),
            ins.mean.to_string(),
            del.mean.to_string(),
            sum.mean.to_string(),
        ])?;
        out.csv_row(&[
            label.to_string(),
            "stderr".into(),
            ins.stderr.to_string(),
            del.stderr.to_string(),
            sum.stderr.to_string(),
        ])?;
    }
    out.finish()?;

    if let Some(path) = &opts.plot_data {
        let mut plot = Output::open(Some(path))?;
        plot.line(&Header::new("cohort-curves", &config).csv_comment())?;
        plot.csv_row(&["method", "target_index", "curve", "k", "value"])?;
        for ((label, _), rep) in jobs.iter().zip(&reports) {
            for (curve, points) in [("insertion", &rep.insertion_curve), ("deletion", &rep.deletion_curve)] {
                for (k, v) in points.iter().enumerate() {
                    plot.csv_row(&[
                        label.clone(),
                        rep.target_index.to_string(),
                        curve.into(),
                        k.to_string(),
                        v.to_string(),
                    ])?;
                }
            }
        }
        plot.finish()?;
    }
    Ok(())
}

pub struct CompareOpts {
    pub config: Option<PathBuf>,
    pub data: DataFlags,
    pub methods: Vec<String>,
    pub targets: Option<String>,
    pub params: ParamFlags,
    pub output: Option<PathBuf>,
    pub timing_output: Option<PathBuf>,
}

#[derive(Serialize)]
struct CompareConfig<'a> {
    command: &'static str,
    dataset: &'a DataConfig,
    targets: String,
    runs: &'a [MethodParams],
}

pub fn compare(opts: CompareOpts) -> CliResult<()> {
    let file = file_config(opts.config.as_deref())?;
    let dataset = DataConfig::resolve(&file, &opts.data)?;
    let names: Vec<String> = if opts.methods.is_empty() {
        file.methods.clone().or_else(|| file.method.clone().map(|m| vec![m])).unwrap_or_default()
    } else {
        opts.methods.clone()
    };
    let methods = names.iter().map(|m| parse_method(m)).collect::<CliResult<Vec<_>>>()?;
    let runs = method_runs(&methods, &opts.params.merged(&file), true)?;
    let targets = Targets::parse(opts.targets.as_deref().or(file.targets.as_deref()).unwrap_or("all"))?;
    let output = opts.output.or_else(|| file.output.clone());

    let (ds, spec) = dataset.load()?;
    let indices = targets.indices(ds.n())?;

    struct Row {
        abc: Vec<(f64, f64)>,
        gaps: Vec<f64>,
        seconds: f64,
    }
    let mut rows = Vec::new();
    for run in &runs {
        let results = per_target(&indices, |t| {
            let (a, secs) = timed(|| run_method(&ds, &spec, t, run))?;
            let profile = SimilarityProfile::build(&ds, &spec, t)?;
            let rep = AbcReport::for_attribution(&CohortValue::new(&profile, ds.responses())?, &a)?;
            Ok((rep.abc_insertion, rep.abc_deletion, a.efficiency_gap, secs))
        })?;
        rows.push(Row {
            abc: results.iter().map(|r| (r.0, r.1)).collect(),
            gaps: results.iter().map(|r| r.2.abs()).collect(),
            seconds: results.iter().map(|r| r.3).sum::<f64>() / results.len().max(1) as f64,
        });
    }

    let config = CompareConfig { command: "compare", dataset: &dataset, targets: targets.to_string(), runs: &runs };
    let mut out = Output::open(output.as_deref())?;
    out.line(&Header::new("cohort-comparison", &config).csv_comment())?;
    out.csv_row(&[
        "method",
        "targets",
        "abc_insertion_mean",
        "abc_insertion_stderr",
        "abc_deletion_mean",
        "abc_deletion_stderr",
        "abc_sum_mean",
        "abc_sum_stderr",
        "abs_efficiency_gap_mean",
    ])?;
    for (run, row) in runs.iter().zip(&rows) {
        let ins = MeanStderr::of(&row.abc.iter().map(|a| a.0).collect::<Vec<_>>());
        let del = MeanStderr::of(&row.abc.iter().map(|a| a.1).collect::<Vec<_>>());
        let sum = MeanStderr::of(&row.abc.iter().map(|a| a.0 + a.1).collect::<Vec<_>>());
        let gap = MeanStderr::of(&row.gaps);
        out.csv_row(&[
            run.label(),
            indices.len().to_string(),
            ins.mean.to_string(),
            ins.stderr.to_string(),
            del.mean.to_string(),
            del.stderr.to_string(),
            sum.mean.to_string(),
            sum.stderr.to_string(),
            gap.mean.to_string(),
        ])?;
    }
    out.finish()?;

    // Wall-clock numbers vary run to run, so they stay out of the comparison file.
    let width = runs.iter().map(|r| r.label().len()).max().unwrap_or(6).max(6);
    eprintln!("{:<width$}  seconds_per_target", "method");
    for (run, row) in runs.iter().zip(&rows) {
        eprintln!("{:<width$}  {:.6}", run.label(), row.seconds);
    }
    if let Some(path) = &opts.timing_output {
        let mut t = Output::open(Some(path))?;
        t.line(&Header::new("cohort-timing", &config).csv_comment())?;
        t.csv_row(&["method", "targets", "seconds_per_target"])?;
        for (run, row) in runs.iter().zip(&rows) {
            t.csv_row(&[run.label(), indices.len().to_string(), row.seconds.to_string()])?;
        }
        t.finish()?;
    }
    Ok(())
}

pub struct DiagnoseOpts {
    pub config: Option<PathBuf>,
    pub data: DataFlags,
    pub targets: Option<String>,
    pub eps: Option<f64>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
}

#[derive(Serialize)]
struct DiagnoseConfig<'a> {
    command: &'static str,
    dataset: &'a DataConfig,
    targets: String,
    eps: f64,
    samples: usize,
    seed: u64,
    format: Format,
}

#[derive(Serialize)]
struct ConvergenceRecord<'a> {
    record: &'static str,
    #[serde(flatten)]
    report: &'a ConvergenceReport,
}

pub fn diagnose(opts: DiagnoseOpts) -> CliResult<()> {
    let file = file_config(opts.config.as_deref())?;
    let dataset = DataConfig::resolve(&file, &opts.data)?;
    let eps = opts.eps.or(file.eps).unwrap_or(DEFAULT_EPS);
    if !(eps > 0.0 && eps < 1.0) {
        return Err(cohort_shapley::Error::EpsOutOfRange(eps).into());
    }
    let samples = opts.samples.or(file.samples.clone().and_then(|s| match s {
        crate::config::OneOrMany::One(m) => Some(m),
        crate::config::OneOrMany::Many(_) => None,
    }));
    let samples = samples.unwrap_or(DEFAULT_DIAGNOSE_SAMPLES);
    if samples == 0 {
        return Err(CliError::config("--samples must be at least 1"));
    }
    let seed = opts.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
    let targets = Targets::parse(opts.targets.as_deref().or(file.targets.as_deref()).unwrap_or("all"))?;
    let format = opts.format.or(file.format).unwrap_or(Format::Jsonl);
    let output = opts.output.or_else(|| file.output.clone());

    let (ds, spec) = dataset.load()?;
    let indices = targets.indices(ds.n())?;
    let reports = per_target(&indices, |t| {
        let profile = SimilarityProfile::build(&ds, &spec, t)?;
        Ok(heps_mass(&profile, eps, samples, seed)?)
    })?;

    let config = DiagnoseConfig {
        command: "diagnose",
        dataset: &dataset,
        targets: targets.to_string(),
        eps,
        samples,
        seed,
        format,
    };
    let header = Header::new("cohort-diagnostics", config);
    let mut out = Output::open(output.as_deref())?;
    match format {
        Format::Jsonl => {
            out.line(&header.json())?;
            for r in &reports {
                out.json(&ConvergenceRecord { record: "convergence", report: r })?;
            }
        }
        Format::Csv => {
            out.line(&header.csv_comment())?;
            out.csv_row(&[
                "target_index",
                "d",
                "n_identical",
                "n_bound",
                "a",
                "a_effective",
                "big_a",
                "eps",
                "samples",
                "mc_mass_estimate",
                "mc_mass_stderr",
                "theorem_bound",
                "corner_fraction",
                "corner_bound",
                "convention",
            ])?;
            for r in &reports {
                let convention = serde_json::to_value(r.convention).expect("serializes");
                out.csv_row(&[
                    r.target_index.to_string(),
                    r.d.to_string(),
                    r.n_identical.to_string(),
                    r.n_bound.to_string(),
                    r.a.to_string(),
                    r.a_effective.to_string(),
                    r.big_a.to_string(),
                    r.eps.to_string(),
                    r.samples.to_string(),
                    r.mc_mass_estimate.to_string(),
                    r.mc_mass_stderr.to_string(),
                    r.theorem_bound.to_string(),
                    opt(r.corner_fraction),
                    opt(r.corner_bound),
                    convention.as_str().unwrap_or_default().to_string(),
                ])?;
            }
        }
    }
    out.finish()
}

pub struct SimilarityOpts {
    pub config: Option<PathBuf>,
    pub data: DataFlags,
    pub target: usize,
    pub output: Option<PathBuf>,
}

#[derive(Serialize)]
struct SimilarityConfig<'a> {
    command: &'static str,
    dataset: &'a DataConfig,
    target: usize,
}

pub fn similarity(opts: SimilarityOpts) -> CliResult<()> {
    let dataset = DataConfig::resolve(&file_config(opts.config.as_deref())?, &opts.data)?;
    let (ds, spec) = dataset.load()?;
    let profile = SimilarityProfile::build(&ds, &spec, opts.target)?;
    let config = SimilarityConfig { command: "similarity", dataset: &dataset, target: opts.target };
    let output = opts.output.clone();
    let mut out = Output::open(output.as_deref())?;
    out.line(&Header::new("cohort-similarity", &config).csv_comment())?;
    profile.write_indicators_csv(out.writer(), ds.column_names())?;
    out.finish()
}

pub fn summary(config: Option<PathBuf>, data: DataFlags) -> CliResult<()> {
    let dataset = DataConfig::resolve(&file_config(config.as_deref())?, &data)?;
    let (ds, _) = dataset.load()?;
    let mut out = Output::open(None)?;
    out.line(ds.summary().to_string().trim_end())?;
    out.finish()
}
