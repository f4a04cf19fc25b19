//! Stochastic inputs, seeded sampling and Monte-Carlo propagation through the
//! deterministic plate model.
//!
//! Every input is normal with a standard deviation proportional to its mean.
//! Draws outside an input's physical range are clamped and counted, never
//! rejected, so the sample count is fixed by the configuration alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laminate::PlateModel;

/// Number of stochastic design variables.
pub const N_INPUTS: usize = 6;

/// Independent random streams derived from one seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    /// Inner-loop samples shared by every design of an optimization run.
    Inner = 0,
    /// Report-grade propagation.
    Report = 1,
    /// Surrogate training points.
    Training = 2,
    /// Genetic algorithm variation.
    Evolution = 3,
}

pub fn rng_for(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleTag {
    Micro,
    Meso,
    Macro,
}

impl ScaleTag {
    pub fn as_str(self) -> &'static str {
        match self {
            ScaleTag::Micro => "micro",
            ScaleTag::Meso => "meso",
            ScaleTag::Macro => "macro",
        }
    }
}

impl std::str::FromStr for ScaleTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "micro" => Ok(ScaleTag::Micro),
            "meso" => Ok(ScaleTag::Meso),
            "macro" => Ok(ScaleTag::Macro),
            other => Err(Error::Format {
                what: "scale tag".into(),
                reason: format!("unknown scale `{other}`"),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StochasticInputSpec {
    pub name: String,
    pub scale: ScaleTag,
    pub mean: f64,
    /// Standard deviation as a fraction of the mean.
    pub rel_std: f64,
    pub lower: f64,
    pub upper: f64,
    pub hard_min: f64,
    pub hard_max: f64,
}

impl StochasticInputSpec {
    /// Validates one spec; errors are keyed under `prefix`.
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let fields = [
            ("mean", self.mean),
            ("rel_std", self.rel_std),
            ("lower", self.lower),
            ("upper", self.upper),
            ("hard_min", self.hard_min),
            ("hard_max", self.hard_max),
        ];
        for (field, value) in fields {
            if !value.is_finite() {
                return Err(Error::config(format!("{prefix}.{field}"), "must be finite"));
            }
        }
        if self.rel_std <= 0.0 {
            return Err(Error::config(
                format!("{prefix}.rel_std"),
                format!("must be positive, got {}", self.rel_std),
            ));
        }
        if self.lower >= self.upper {
            return Err(Error::config(
                format!("{prefix}.lower"),
                format!("must be below upper ({} >= {})", self.lower, self.upper),
            ));
        }
        if self.hard_min > self.lower {
            return Err(Error::config(
                format!("{prefix}.hard_min"),
                format!("must not exceed lower ({} > {})", self.hard_min, self.lower),
            ));
        }
        if self.upper > self.hard_max {
            return Err(Error::config(
                format!("{prefix}.hard_max"),
                format!("must not be below upper ({} < {})", self.hard_max, self.upper),
            ));
        }
        if self.mean < self.lower || self.mean > self.upper {
            return Err(Error::config(
                format!("{prefix}.mean"),
                format!("must lie within [{}, {}]", self.lower, self.upper),
            ));
        }
        Ok(())
    }
}

/// Validated, ordered set of the six inputs: volume fraction, four
/// thicknesses, load.
#[derive(Clone, Debug, PartialEq)]
pub struct InputSet {
    specs: Vec<StochasticInputSpec>,
}

const EXPECTED_SCALES: [ScaleTag; N_INPUTS] = [
    ScaleTag::Micro,
    ScaleTag::Meso,
    ScaleTag::Meso,
    ScaleTag::Meso,
    ScaleTag::Meso,
    ScaleTag::Macro,
];

impl InputSet {
    pub fn new(specs: Vec<StochasticInputSpec>) -> Result<Self> {
        if specs.len() != N_INPUTS {
            return Err(Error::config(
                "uq.inputs",
                format!("exactly {N_INPUTS} inputs are required, got {}", specs.len()),
            ));
        }
        for (i, spec) in specs.iter().enumerate() {
            let prefix = format!("uq.inputs[{i}]");
            spec.validate(&prefix)?;
            if spec.scale != EXPECTED_SCALES[i] {
                return Err(Error::config(
                    format!("{prefix}.scale"),
                    format!("expected `{}`, got `{}`", EXPECTED_SCALES[i].as_str(), spec.scale.as_str()),
                ));
            }
        }
        let vf = &specs[0];
        if vf.hard_min <= 0.0 || vf.hard_max >= 1.0 {
            return Err(Error::config(
                "uq.inputs[0].hard_min",
                "volume fraction clamps must lie strictly inside (0, 1)",
            ));
        }
        for (i, spec) in specs.iter().enumerate().skip(1).take(4) {
            if spec.hard_min <= 0.0 {
                return Err(Error::config(
                    format!("uq.inputs[{i}].hard_min"),
                    "thickness clamp must be positive",
                ));
            }
        }
        Ok(InputSet { specs })
    }

    /// The six case-study inputs with their tabulated means, bounds and 5 %
    /// relative scatter.
    pub fn case_study() -> Self {
        let thickness = |i: usize| StochasticInputSpec {
            name: format!("thickness_{i}"),
            scale: ScaleTag::Meso,
            mean: 1.25,
            rel_std: 0.05,
            lower: 1.20,
            upper: 1.30,
            hard_min: 0.01,
            hard_max: 100.0,
        };
        InputSet::new(vec![
            StochasticInputSpec {
                name: "volume_fraction".into(),
                scale: ScaleTag::Micro,
                mean: 0.5,
                rel_std: 0.05,
                lower: 0.1,
                upper: 0.9,
                hard_min: 0.01,
                hard_max: 0.99,
            },
            thickness(1),
            thickness(2),
            thickness(3),
            thickness(4),
            StochasticInputSpec {
                name: "load".into(),
                scale: ScaleTag::Macro,
                mean: 100.0,
                rel_std: 0.05,
                lower: 90.0,
                upper: 110.0,
                hard_min: 0.0,
                hard_max: 1.0e6,
            },
        ])
        .expect("case-study inputs are valid")
    }

    pub fn specs(&self) -> &[StochasticInputSpec] {
        &self.specs
    }

    pub fn nominal(&self) -> DesignPoint {
        let mut values = [0.0; N_INPUTS];
        for (v, s) in values.iter_mut().zip(&self.specs) {
            *v = s.mean;
        }
        DesignPoint::new(values)
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.specs.iter().map(|s| (s.lower, s.upper)).collect()
    }

    /// Copy with every relative standard deviation scaled by `factor`.
    pub fn with_scaled_scatter(&self, factor: f64) -> Self {
        let mut specs = self.specs.clone();
        for s in &mut specs {
            s.rel_std *= factor;
        }
        InputSet { specs }
    }

    /// Checks that `design` lies inside the search box.
    pub fn check_design(&self, design: &DesignPoint) -> Result<()> {
        for (i, (v, s)) in design.values().iter().zip(&self.specs).enumerate() {
            if !(v.is_finite() && *v >= s.lower && *v <= s.upper) {
                return Err(Error::config(
                    format!("design[{i}]"),
                    format!("{} = {v} lies outside [{}, {}]", s.name, s.lower, s.upper),
                ));
            }
        }
        Ok(())
    }
}

/// Nominal values of the six inputs, in the fixed order
/// (volume fraction, thickness 1..4, load).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint([f64; N_INPUTS]);

impl DesignPoint {
    pub fn new(values: [f64; N_INPUTS]) -> Self {
        DesignPoint(values)
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; N_INPUTS] = values.try_into().map_err(|_| Error::Format {
            what: "design point".into(),
            reason: format!("expected {N_INPUTS} values, got {}", values.len()),
        })?;
        Ok(DesignPoint(arr))
    }

    pub fn values(&self) -> &[f64; N_INPUTS] {
        &self.0
    }

    pub fn volume_fraction(&self) -> f64 {
        self.0[0]
    }

    pub fn thicknesses(&self) -> [f64; 4] {
        [self.0[1], self.0[2], self.0[3], self.0[4]]
    }

    pub fn load(&self) -> f64 {
        self.0[5]
    }
}

/// A block of standard-normal draws, reusable across design points.
#[derive(Clone, Debug, PartialEq)]
pub struct BaseNormals {
    pub seed: u64,
    pub rows: Vec<[f64; N_INPUTS]>,
}

impl BaseNormals {
    pub fn generate(count: usize, seed: u64, stream: Stream) -> Self {
        let mut rng = rng_for(seed, stream);
        let rows = (0..count)
            .map(|_| {
                let mut row = [0.0; N_INPUTS];
                for z in &mut row {
                    *z = StandardNormal.sample(&mut rng);
                }
                row
            })
            .collect();
        BaseNormals { seed, rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleMatrix {
    pub realizations: Vec<[f64; N_INPUTS]>,
    pub base_normals: Vec<[f64; N_INPUTS]>,
    pub seed: u64,
    pub clamp_count: usize,
}

impl SampleMatrix {
    /// Maps a normal block onto `design`, clamping to each input's hard range.
    pub fn from_normals(inputs: &InputSet, design: &DesignPoint, normals: &BaseNormals) -> Self {
        let mut clamp_count = 0;
        let realizations = normals
            .rows
            .iter()
            .map(|z| {
                let mut row = [0.0; N_INPUTS];
                for (i, spec) in inputs.specs().iter().enumerate() {
                    let mean = design.values()[i];
                    let raw = mean * (1.0 + spec.rel_std * z[i]);
                    let clamped = raw.clamp(spec.hard_min, spec.hard_max);
                    if clamped != raw {
                        clamp_count += 1;
                    }
                    row[i] = clamped;
                }
                row
            })
            .collect();
        SampleMatrix {
            realizations,
            base_normals: normals.rows.clone(),
            seed: normals.seed,
            clamp_count,
        }
    }

    pub fn len(&self) -> usize {
        self.realizations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.realizations.is_empty()
    }
}

pub fn draw_samples(
    inputs: &InputSet,
    design: &DesignPoint,
    count: usize,
    seed: u64,
) -> Result<SampleMatrix> {
    if count < 2 {
        return Err(Error::config("uq.samples", format!("at least 2 samples are required, got {count}")));
    }
    inputs.check_design(design)?;
    let normals = BaseNormals::generate(count, seed, Stream::Report);
    Ok(SampleMatrix::from_normals(inputs, design, &normals))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StochasticResponse {
    pub mean: f64,
    /// Unbiased sample standard deviation.
    pub std: f64,
    pub rsd: f64,
    pub sample_count: usize,
    pub clamp_count: usize,
}

impl StochasticResponse {
    /// Mean, unbiased std and RSD of `values`, summed in index order.
    pub fn from_values(values: &[f64], clamp_count: usize) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(Error::Domain(format!("need at least 2 samples, got {n}")));
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        let std = (ss / (n - 1) as f64).sqrt();
        let rsd = if mean == 0.0 {
            if std == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            std / mean.abs()
        };
        Ok(StochasticResponse {
            mean,
            std,
            rsd,
            sample_count: n,
            clamp_count,
        })
    }
}

/// Evaluates the plate model on every realization, preserving row order.
pub fn evaluate_samples(model: &PlateModel, samples: &SampleMatrix) -> Result<Vec<f64>> {
    samples
        .realizations
        .par_iter()
        .enumerate()
        .map(|(index, row)| {
            model.sigma6(&DesignPoint::new(*row)).map_err(|e| Error::Sample {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}

pub fn propagate(model: &PlateModel, samples: &SampleMatrix) -> Result<StochasticResponse> {
    let values = evaluate_samples(model, samples)?;
    StochasticResponse::from_values(&values, samples.clamp_count)
}
