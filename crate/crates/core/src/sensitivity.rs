//! Polynomial chaos surrogate over standardized normal inputs and the Sobol
//! indices it yields.
//!
//! The basis is the total-degree tensor product of orthonormal probabilists'
//! Hermite polynomials, so the surrogate mean is the constant coefficient and
//! the variance is the sum of the remaining squared coefficients.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laminate::PlateModel;
use crate::stochastic::{
    evaluate_samples, BaseNormals, DesignPoint, InputSet, SampleMatrix, ScaleTag, Stream,
};

/// Largest accepted condition number of the regression matrix.
pub const MAX_CONDITION: f64 = 1.0e8;

/// Exponents of one tensor-product basis term.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Size of the total-degree basis in `dim` variables up to `degree`.
pub fn basis_size(dim: usize, degree: u32) -> usize {
    binomial(dim + degree as usize, degree as usize)
}

/// All multi-indices with total degree ≤ `degree`, graded and, within one
/// degree, in descending lexicographic order.
pub fn total_degree_basis(dim: usize, degree: u32) -> Vec<MultiIndex> {
    fn compositions(dim: usize, total: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if prefix.len() == dim - 1 {
            prefix.push(total);
            out.push(MultiIndex(prefix.clone()));
            prefix.pop();
            return;
        }
        for first in (0..=total).rev() {
            prefix.push(first);
            compositions(dim, total - first, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::with_capacity(basis_size(dim, degree));
    for d in 0..=degree {
        compositions(dim, d, &mut Vec::with_capacity(dim), &mut out);
    }
    out
}

/// Orthonormal probabilists' Hermite values `He_n(x)/√(n!)` for n = 0..=max.
pub fn hermite_orthonormal(x: f64, max: u32) -> Vec<f64> {
    let mut he = Vec::with_capacity(max as usize + 1);
    he.push(1.0);
    if max >= 1 {
        he.push(x);
    }
    for n in 1..max as usize {
        let next = x * he[n] - n as f64 * he[n - 1];
        he.push(next);
    }
    let mut factorial = 1.0;
    for (n, v) in he.iter_mut().enumerate() {
        if n > 0 {
            factorial *= n as f64;
        }
        *v /= factorial.sqrt();
    }
    he
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PceModel {
    pub dim: usize,
    pub degree: u32,
    pub basis: Vec<MultiIndex>,
    pub coefficients: Vec<f64>,
    pub training_sample_count: usize,
    /// Relative RMS residual over the training set.
    pub training_residual: f64,
}

impl PceModel {
    pub fn mean(&self) -> f64 {
        self.coefficients[0]
    }

    pub fn variance(&self) -> f64 {
        self.coefficients[1..].iter().map(|c| c * c).sum()
    }

    pub fn std(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn evaluate(&self, xi: &[f64]) -> f64 {
        let table: Vec<Vec<f64>> = xi.iter().map(|&x| hermite_orthonormal(x, self.degree)).collect();
        self.basis
            .iter()
            .zip(&self.coefficients)
            .map(|(alpha, c)| c * term_value(alpha, &table))
            .sum()
    }
}

fn term_value(alpha: &MultiIndex, table: &[Vec<f64>]) -> f64 {
    alpha
        .0
        .iter()
        .zip(table)
        .map(|(&a, h)| h[a as usize])
        .product()
}

/// Least-squares fit of `targets` at standardized points `xi` onto the
/// total-degree orthonormal Hermite basis.
pub fn fit_pce(xi: &[Vec<f64>], targets: &[f64], degree: u32) -> Result<PceModel> {
    let n = xi.len();
    if n == 0 || n != targets.len() {
        return Err(Error::Domain(format!(
            "need matching, non-empty training data ({n} points, {} targets)",
            targets.len()
        )));
    }
    let dim = xi[0].len();
    if dim == 0 || xi.iter().any(|p| p.len() != dim) {
        return Err(Error::Domain("training points must share one positive dimension".into()));
    }
    let basis = total_degree_basis(dim, degree);
    let terms = basis.len();
    if n < terms {
        return Err(Error::Domain(format!(
            "{n} training points cannot determine {terms} coefficients"
        )));
    }

    let mut psi = DMatrix::<f64>::zeros(n, terms);
    for (row, point) in xi.iter().enumerate() {
        let table: Vec<Vec<f64>> = point.iter().map(|&x| hermite_orthonormal(x, degree)).collect();
        for (col, alpha) in basis.iter().enumerate() {
            psi[(row, col)] = term_value(alpha, &table);
        }
    }

    let svd = psi.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    let condition = if s_min > 0.0 { s_max / s_min } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned {
            condition,
            limit: MAX_CONDITION,
        });
    }
    let y = DVector::from_column_slice(targets);
    let coefficients = svd
        .solve(&y, 0.0)
        .map_err(|e| Error::Domain(format!("least-squares solve failed: {e}")))?;

    let residual = &psi * &coefficients - &y;
    let y_rms = y.norm();
    let training_residual = if y_rms > 0.0 {
        residual.norm() / y_rms
    } else {
        residual.norm() / (n as f64).sqrt()
    };

    Ok(PceModel {
        dim,
        degree,
        basis,
        coefficients: coefficients.iter().copied().collect(),
        training_sample_count: n,
        training_residual,
    })
}

/// Builds the surrogate of max |σ6| around `design` using
/// `oversampling · P` seeded training points.
pub fn build_pce(
    model: &PlateModel,
    inputs: &InputSet,
    design: &DesignPoint,
    degree: u32,
    oversampling: f64,
    seed: u64,
) -> Result<PceModel> {
    let dim = inputs.specs().len();
    let terms = basis_size(dim, degree);
    if !(oversampling >= 2.0) {
        return Err(Error::config("pce.oversampling", format!("must be at least 2, got {oversampling}")));
    }
    let n_train = (oversampling * terms as f64).ceil() as usize;
    let normals = BaseNormals::generate(n_train, seed, Stream::Training);
    let samples = SampleMatrix::from_normals(inputs, design, &normals);
    let targets = evaluate_samples(model, &samples)?;
    let xi: Vec<Vec<f64>> = samples
        .realizations
        .iter()
        .map(|row| {
            row.iter()
                .zip(design.values())
                .zip(inputs.specs())
                .map(|((x, mean), spec)| (x - mean) / (mean * spec.rel_std))
                .collect()
        })
        .collect();
    fit_pce(&xi, &targets, degree)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolIndex {
    pub first_order: f64,
    pub total: f64,
}

/// First-order and total Sobol indices read off the coefficients.
pub fn sobol_indices(m: &PceModel) -> Result<Vec<SobolIndex>> {
    let variance = m.variance();
    let mean = m.mean();
    if variance <= 1e-14 * mean * mean || variance == 0.0 {
        return Err(Error::DegenerateVariance { variance, mean });
    }
    let mut first = vec![0.0; m.dim];
    let mut total = vec![0.0; m.dim];
    for (alpha, c) in m.basis.iter().zip(&m.coefficients).skip(1) {
        let share = c * c;
        let active: Vec<usize> = (0..m.dim).filter(|&i| alpha.0[i] > 0).collect();
        for &i in &active {
            total[i] += share;
        }
        if let [only] = active[..] {
            first[only] += share;
        }
    }
    Ok(first
        .into_iter()
        .zip(total)
        .map(|(f, t)| SobolIndex {
            first_order: f / variance,
            total: t / variance,
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolEntry {
    pub input: String,
    pub scale: ScaleTag,
    pub first_order: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolReport {
    pub entries: Vec<SobolEntry>,
}

impl SobolReport {
    pub fn from_model(m: &PceModel, inputs: &InputSet) -> Result<Self> {
        let indices = sobol_indices(m)?;
        let entries = indices
            .into_iter()
            .zip(inputs.specs())
            .map(|(idx, spec)| SobolEntry {
                input: spec.name.clone(),
                scale: spec.scale,
                first_order: idx.first_order,
                total: idx.total,
            })
            .collect();
        Ok(SobolReport { entries })
    }

    /// Position of the largest first-order index; ties go to the lower index.
    pub fn dominant(&self) -> usize {
        let mut best = 0;
        for (i, e) in self.entries.iter().enumerate() {
            if e.first_order > self.entries[best].first_order {
                best = i;
            }
        }
        best
    }
}
