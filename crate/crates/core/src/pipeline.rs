//! The full robust-design study: sensitivity at the nominal design, a
//! genetic search whose evaluator is the Monte-Carlo inner loop, RSD-filtered
//! selection of the optimum and report-grade re-evaluation.

use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::laminate::PlateModel;
use crate::optimizer::{evolve_with, ArchiveEntry, Evaluation, Evaluator, ParetoArchive};
use crate::output;
use crate::sensitivity::{build_pce, PceModel, SobolReport};
use crate::stochastic::{
    propagate, BaseNormals, DesignPoint, InputSet, SampleMatrix, StochasticResponse, Stream,
};

/// Mean and std of max |σ6| at a design, always drawn from the same block of
/// normals (common random numbers).
pub struct RobustEvaluator {
    pub model: PlateModel,
    pub inputs: InputSet,
    pub normals: BaseNormals,
}

impl RobustEvaluator {
    pub fn new(model: PlateModel, inputs: InputSet, samples: usize, seed: u64) -> Self {
        RobustEvaluator {
            model,
            inputs,
            normals: BaseNormals::generate(samples, seed, Stream::Inner),
        }
    }

    pub fn response(&self, design: &DesignPoint) -> Result<StochasticResponse> {
        let samples = SampleMatrix::from_normals(&self.inputs, design, &self.normals);
        propagate(&self.model, &samples)
    }
}

impl Evaluator for RobustEvaluator {
    fn evaluate(&self, genes: &[f64]) -> Result<Evaluation> {
        let r = self.response(&DesignPoint::from_slice(genes)?)?;
        Ok(Evaluation { mean: r.mean, std: r.std })
    }
}

/// Index of the largest-mean entry with `rsd ≤ rsd_limit`; ties keep the
/// earliest entry.
pub fn select_robust_optimum(entries: &[ArchiveEntry], rsd_limit: f64) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, e) in entries.iter().enumerate() {
        if e.rsd <= rsd_limit && best.is_none_or(|b| e.mean > entries[b].mean) {
            best = Some(i);
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedValue {
    pub name: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
    pub rsd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustOptimum {
    pub archive_index: usize,
    pub generation: usize,
    pub inputs: Vec<NamedValue>,
    /// Statistics from the optimization inner loop.
    pub inner: Moments,
    /// Statistics re-evaluated with the report-grade sample count.
    pub report: Option<StochasticResponse>,
}

impl RobustOptimum {
    pub fn from_entry(index: usize, entry: &ArchiveEntry, inputs: &InputSet) -> Self {
        RobustOptimum {
            archive_index: index,
            generation: entry.generation,
            inputs: inputs
                .specs()
                .iter()
                .zip(&entry.genes)
                .map(|(s, &value)| NamedValue { name: s.name.clone(), value })
                .collect(),
            inner: Moments {
                mean: entry.mean,
                std: entry.std,
                rsd: entry.rsd,
            },
            report: None,
        }
    }

    pub fn design(&self) -> Result<DesignPoint> {
        let values: Vec<f64> = self.inputs.iter().map(|v| v.value).collect();
        DesignPoint::from_slice(&values)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivitySummary {
    pub degree: u32,
    pub training_samples: usize,
    pub training_residual: f64,
    pub pce_mean: f64,
    pub pce_std: f64,
    pub indices: SobolReport,
}

impl SensitivitySummary {
    pub fn new(model: &PceModel, report: SobolReport) -> Self {
        SensitivitySummary {
            degree: model.degree,
            training_samples: model.training_sample_count,
            training_residual: model.training_residual,
            pce_mean: model.mean(),
            pce_std: model.std(),
            indices: report,
        }
    }
}

/// Contents of `summary.json`. Holds no timing data so identical
/// configurations give identical bytes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub status: String,
    pub rsd_limit: f64,
    pub design_evaluations: usize,
    pub solver_calls: usize,
    pub feasible_count: usize,
    pub front_size: usize,
    pub seeds: output::Seeds,
    pub optimum: Option<RobustOptimum>,
    pub sensitivity: SensitivitySummary,
}

pub struct RobustRunResult {
    pub archive: ParetoArchive,
    pub sensitivity: SensitivitySummary,
    pub robust_optimum: Option<RobustOptimum>,
    pub rsd_limit: f64,
    pub config: RunConfig,
    pub inputs: InputSet,
    pub wall_seconds: f64,
    pub solver_calls: usize,
}

impl RobustRunResult {
    pub fn summary(&self) -> StudySummary {
        StudySummary {
            status: if self.robust_optimum.is_some() {
                "ok".into()
            } else {
                "no feasible design".into()
            },
            rsd_limit: self.rsd_limit,
            design_evaluations: self.archive.evaluations,
            solver_calls: self.solver_calls,
            feasible_count: self.archive.entries.iter().filter(|e| e.rsd <= self.rsd_limit).count(),
            front_size: self.archive.front.len(),
            seeds: output::Seeds {
                uq: self.config.uq.seed,
                pce: self.config.pce.seed,
                ga: self.config.ga.seed,
            },
            optimum: self.robust_optimum.clone(),
            sensitivity: self.sensitivity.clone(),
        }
    }
}

/// Surrogate-based Sobol analysis at the configuration's nominal design.
pub fn nominal_sensitivity(config: &RunConfig) -> Result<(PceModel, SobolReport)> {
    let inputs = config.input_set()?;
    let model = config.plate_model();
    let pce = build_pce(
        &model,
        &inputs,
        &inputs.nominal(),
        config.pce.degree,
        config.pce.oversampling,
        config.pce.seed,
    )?;
    let report = SobolReport::from_model(&pce, &inputs)?;
    Ok((pce, report))
}

pub fn write_sensitivity(dir: &Path, report: &SobolReport) -> Result<Vec<PathBuf>> {
    let sobol = dir.join("sobol.csv");
    output::write_file(&sobol, &output::sobol_csv(report))?;
    let bars = dir.join("sobol_bars.dat");
    output::write_file(&bars, &output::sobol_bars(report))?;
    Ok(vec![sobol, bars])
}

fn progress(quiet: bool, msg: impl AsRef<str>) {
    if !quiet {
        eprintln!("{}", msg.as_ref());
    }
}

/// Runs every stage and persists all products to `dir`.
pub fn run_study(config: &RunConfig, dir: &Path, quiet: bool) -> Result<RobustRunResult> {
    let started = Instant::now();
    let started_ms = output::unix_ms();
    config.validate()?;
    output::prepare_dir(dir, config.output.overwrite)?;
    let inputs = config.input_set()?;
    let model = config.plate_model();
    let mut files = Vec::new();

    progress(quiet, "sensitivity: fitting surrogate at nominal design");
    let (pce, sobol) = nominal_sensitivity(config).map_err(|e| e.in_stage("sensitivity"))?;
    files.extend(write_sensitivity(dir, &sobol)?);
    let sensitivity = SensitivitySummary::new(&pce, sobol);

    let evaluator = RobustEvaluator::new(model, inputs.clone(), config.uq.samples_inner, config.uq.seed);
    let params = config.ga_params();
    let seen: Mutex<Vec<ArchiveEntry>> = Mutex::new(Vec::new());
    progress(
        quiet,
        format!(
            "optimize: population {} x {} generations, {} samples per design",
            params.pop_size, params.generations, config.uq.samples_inner
        ),
    );
    let evolved = evolve_with(&evaluator, &inputs.bounds(), &params, |snap| {
        seen.lock().expect("archive lock").extend_from_slice(snap.new_entries);
        if !quiet && (snap.generation % 10 == 0 || snap.generation == params.generations) {
            let best = snap.population.iter().map(|i| i.objectives.mean).fold(f64::NEG_INFINITY, f64::max);
            eprintln!("  generation {:>4}: best mean {:.6}", snap.generation, best);
        }
    });
    let archive = match evolved {
        Ok(a) => a,
        Err(e) => {
            let partial = seen.into_inner().expect("archive lock");
            let partial = ParetoArchive::from_entries(partial, params.seed, params.generations, params.pop_size);
            let path = dir.join("archive.csv");
            output::write_file(&path, &output::archive_csv(&partial.entries))?;
            return Err(e.in_stage("optimize"));
        }
    };
    let archive_path = dir.join("archive.csv");
    output::write_file(&archive_path, &output::archive_csv(&archive.entries))?;
    files.push(archive_path);

    let rsd_limit = config.ga.rsd_limit;
    let mut robust_optimum =
        select_robust_optimum(&archive.entries, rsd_limit).map(|i| RobustOptimum::from_entry(i, &archive.entries[i], &inputs));
    if let Some(opt) = robust_optimum.as_mut() {
        progress(quiet, "report: re-evaluating optimum with report-grade sampling");
        let normals = BaseNormals::generate(config.uq.samples_report, config.uq.seed, Stream::Report);
        let samples = SampleMatrix::from_normals(&inputs, &opt.design()?, &normals);
        opt.report = Some(propagate(&model, &samples).map_err(|e| e.in_stage("report"))?);
    } else {
        progress(quiet, format!("report: no archived design satisfies rsd <= {rsd_limit}"));
    }

    let solver_calls = archive.evaluations * config.uq.samples_inner
        + pce.training_sample_count
        + robust_optimum.as_ref().map_or(0, |_| config.uq.samples_report);
    let result = RobustRunResult {
        archive,
        sensitivity,
        robust_optimum,
        rsd_limit,
        config: config.clone(),
        inputs,
        wall_seconds: started.elapsed().as_secs_f64(),
        solver_calls,
    };

    files.extend(emit_scatter_products(&result, dir)?);
    let summary_path = dir.join("summary.json");
    let summary = serde_json::to_string_pretty(&result.summary()).expect("summary serializes");
    output::write_file(&summary_path, &(summary + "\n"))?;
    files.push(summary_path);
    let config_path = dir.join("config.toml");
    output::write_file(&config_path, &config.to_toml_string())?;
    files.push(config_path);
    output::write_manifest(dir, "optimize", config, started_ms, &files)?;
    Ok(result)
}

/// Writes `cloud.dat` and one `scatter_<input>.dat` per input.
pub fn emit_scatter_products(result: &RobustRunResult, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    let cloud = dir.join("cloud.dat");
    output::write_file(&cloud, &output::cloud_dat(&result.archive.entries, result.rsd_limit))?;
    files.push(cloud);
    for (name, body) in output::scatter_dats(&result.archive.entries, &result.inputs, result.rsd_limit) {
        let path = dir.join(name);
        output::write_file(&path, &body)?;
        files.push(path);
    }
    Ok(files)
}

/// Re-derives the optimum from an archive file alone.
pub fn report_from_archive(path: &Path, inputs: &InputSet, rsd_limit: f64) -> Result<Option<RobustOptimum>> {
    if rsd_limit.is_nan() || rsd_limit < 0.0 {
        return Err(Error::config("rsd_limit", "must be non-negative"));
    }
    let entries = output::read_archive_csv(path)?;
    Ok(select_robust_optimum(&entries, rsd_limit).map(|i| RobustOptimum::from_entry(i, &entries[i], inputs)))
}
