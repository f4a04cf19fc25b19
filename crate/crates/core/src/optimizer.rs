//! Elitist multi-objective genetic algorithm over a box-bounded real design
//! space: non-dominated sorting with crowding distance, binary tournaments,
//! simulated binary crossover and polynomial mutation.
//!
//! The two objectives are fixed: maximize the response mean and minimize its
//! standard deviation. Every evaluation is archived.

use std::cmp::Ordering;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stochastic::{rng_for, Stream};

/// Objective pair of one evaluated design.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub mean: f64,
    pub std: f64,
}

impl Evaluation {
    pub fn rsd(&self) -> f64 {
        if self.mean == 0.0 {
            if self.std == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.std / self.mean.abs()
        }
    }
}

pub trait Evaluator: Sync {
    fn evaluate(&self, genes: &[f64]) -> Result<Evaluation>;
}

impl<F> Evaluator for F
where
    F: Fn(&[f64]) -> Result<Evaluation> + Sync,
{
    fn evaluate(&self, genes: &[f64]) -> Result<Evaluation> {
        self(genes)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Individual {
    pub genes: Vec<f64>,
    pub objectives: Evaluation,
    pub rsd: f64,
    pub rank: usize,
    pub crowding: f64,
}

/// True iff `a` is no worse than `b` in both objectives and strictly better
/// in one (mean maximized, std minimized).
pub fn dominates(a: &Evaluation, b: &Evaluation) -> bool {
    let no_worse = a.mean >= b.mean && a.std <= b.std;
    let better = a.mean > b.mean || a.std < b.std;
    no_worse && better
}

/// Fronts of indices into `objs`, best first. Indices within a front are in
/// ascending order.
pub fn nondominated_sort(objs: &[Evaluation]) -> Vec<Vec<usize>> {
    let n = objs.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates(&objs[i], &objs[j]) {
                dominated_by_me[i].push(j);
                domination_count[j] += 1;
            } else if dominates(&objs[j], &objs[i]) {
                dominated_by_me[j].push(i);
                domination_count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| domination_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by_me[i] {
                domination_count[j] -= 1;
                if domination_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of every member of `front` (indices into `objs`),
/// returned in the order of `front`.
pub fn crowding_distance(objs: &[Evaluation], front: &[usize]) -> Vec<f64> {
    let m = front.len();
    let mut distance = vec![0.0; m];
    if m <= 2 {
        return vec![f64::INFINITY; m];
    }
    let keys: [fn(&Evaluation) -> f64; 2] = [|e| e.mean, |e| e.std];
    for key in keys {
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| {
            key(&objs[front[a]])
                .partial_cmp(&key(&objs[front[b]]))
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        });
        let lo = key(&objs[front[order[0]]]);
        let hi = key(&objs[front[order[m - 1]]]);
        distance[order[0]] = f64::INFINITY;
        distance[order[m - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for w in 1..m - 1 {
            let gap = key(&objs[front[order[w + 1]]]) - key(&objs[front[order[w - 1]]]);
            distance[order[w]] += gap / range;
        }
    }
    distance
}

/// Dominated area of `points` relative to `reference` (mean lower bound, std
/// upper bound). Points that do not improve on the reference are ignored.
pub fn hypervolume(points: &[Evaluation], reference: Evaluation) -> f64 {
    let mut pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.mean > reference.mean && p.std < reference.std)
        .map(|p| (p.mean, p.std))
        .collect();
    // Sweep from the highest mean down, tracking the lowest std seen so far.
    pts.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal));
    let mut area = 0.0;
    let mut best_std = reference.std;
    for (i, &(mean, std)) in pts.iter().enumerate() {
        best_std = best_std.min(std);
        let next_mean = pts.get(i + 1).map_or(reference.mean, |p| p.0);
        area += (mean - next_mean) * (reference.std - best_std);
    }
    area
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaParams {
    pub pop_size: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    /// Per-gene mutation probability.
    pub mutation_prob: f64,
    pub crossover_eta: f64,
    pub mutation_eta: f64,
    pub seed: u64,
}

impl Default for GaParams {
    fn default() -> Self {
        GaParams {
            pop_size: 40,
            generations: 50,
            crossover_prob: 0.9,
            mutation_prob: 1.0 / 6.0,
            crossover_eta: 15.0,
            mutation_eta: 20.0,
            seed: 42,
        }
    }
}

impl GaParams {
    pub fn validate(&self) -> Result<()> {
        if self.pop_size < 4 || !self.pop_size.is_multiple_of(2) {
            return Err(Error::config(
                "ga.population",
                format!("must be even and at least 4, got {}", self.pop_size),
            ));
        }
        for (key, p) in [("ga.crossover_prob", self.crossover_prob), ("ga.mutation_prob", self.mutation_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(key, format!("must lie in [0, 1], got {p}")));
            }
        }
        for (key, eta) in [("ga.crossover_eta", self.crossover_eta), ("ga.mutation_eta", self.mutation_eta)] {
            if !(eta.is_finite() && eta >= 0.0) {
                return Err(Error::config(key, format!("must be finite and non-negative, got {eta}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub generation: usize,
    pub genes: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub rsd: f64,
    /// Non-domination rank within the whole archive.
    pub rank: usize,
}

impl ArchiveEntry {
    pub fn evaluation(&self) -> Evaluation {
        Evaluation {
            mean: self.mean,
            std: self.std,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoArchive {
    pub entries: Vec<ArchiveEntry>,
    /// Indices of the archive's non-dominated members.
    pub front: Vec<usize>,
    pub seed: u64,
    pub generations: usize,
    pub pop_size: usize,
    pub evaluations: usize,
}

impl ParetoArchive {
    /// Builds an archive from raw entries, recomputing ranks and the front.
    pub fn from_entries(mut entries: Vec<ArchiveEntry>, seed: u64, generations: usize, pop_size: usize) -> Self {
        let objs: Vec<Evaluation> = entries.iter().map(ArchiveEntry::evaluation).collect();
        let fronts = nondominated_sort(&objs);
        for (rank, front) in fronts.iter().enumerate() {
            for &i in front {
                entries[i].rank = rank;
            }
        }
        let front = fronts.into_iter().next().unwrap_or_default();
        let evaluations = entries.len();
        ParetoArchive {
            entries,
            front,
            seed,
            generations,
            pop_size,
            evaluations,
        }
    }

    pub fn front_evaluations(&self) -> Vec<Evaluation> {
        self.front.iter().map(|&i| self.entries[i].evaluation()).collect()
    }
}

/// Population state handed to the observer after each generation.
pub struct GenerationSnapshot<'a> {
    pub generation: usize,
    pub population: &'a [Individual],
    /// Entries evaluated in this generation.
    pub new_entries: &'a [ArchiveEntry],
    /// Non-dominated set of every evaluation so far.
    pub archive_front: &'a [Evaluation],
}

pub fn evolve<E: Evaluator>(evaluator: &E, bounds: &[(f64, f64)], params: &GaParams) -> Result<ParetoArchive> {
    evolve_with(evaluator, bounds, params, |_| {})
}

pub fn evolve_with<E, F>(
    evaluator: &E,
    bounds: &[(f64, f64)],
    params: &GaParams,
    mut observer: F,
) -> Result<ParetoArchive>
where
    E: Evaluator,
    F: FnMut(&GenerationSnapshot<'_>),
{
    params.validate()?;
    if bounds.is_empty() || bounds.iter().any(|(lo, hi)| !(lo < hi)) {
        return Err(Error::config("ga.bounds", "every gene needs lower < upper"));
    }
    let mut rng = rng_for(params.seed, Stream::Evolution);
    let mut entries: Vec<ArchiveEntry> = Vec::new();
    let mut running_front: Vec<Evaluation> = Vec::new();

    let initial: Vec<Vec<f64>> = (0..params.pop_size)
        .map(|_| bounds.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect())
        .collect();
    let mut population = evaluate_batch(evaluator, initial)?;
    assign_rank_and_crowding(&mut population);
    record(&mut entries, &mut running_front, &population, 0);
    observer(&GenerationSnapshot {
        generation: 0,
        population: &population,
        new_entries: &entries,
        archive_front: &running_front,
    });

    for generation in 1..=params.generations {
        let mut children = Vec::with_capacity(params.pop_size);
        while children.len() < params.pop_size {
            let a = tournament(&population, &mut rng);
            let b = tournament(&population, &mut rng);
            let (mut c1, mut c2) = if rng.random::<f64>() < params.crossover_prob {
                sbx(&population[a].genes, &population[b].genes, bounds, params.crossover_eta, &mut rng)
            } else {
                (population[a].genes.clone(), population[b].genes.clone())
            };
            polynomial_mutation(&mut c1, bounds, params, &mut rng);
            polynomial_mutation(&mut c2, bounds, params, &mut rng);
            children.push(c1);
            children.push(c2);
        }
        let offspring = evaluate_batch(evaluator, children)?;
        let first_new = entries.len();
        record(&mut entries, &mut running_front, &offspring, generation);

        let mut combined = population;
        combined.extend(offspring);
        population = environmental_selection(combined, params.pop_size);
        observer(&GenerationSnapshot {
            generation,
            population: &population,
            new_entries: &entries[first_new..],
            archive_front: &running_front,
        });
    }

    Ok(ParetoArchive::from_entries(
        entries,
        params.seed,
        params.generations,
        params.pop_size,
    ))
}

fn evaluate_batch<E: Evaluator>(evaluator: &E, genes: Vec<Vec<f64>>) -> Result<Vec<Individual>> {
    genes
        .into_par_iter()
        .map(|g| {
            let objectives = evaluator.evaluate(&g)?;
            Ok(Individual {
                rsd: objectives.rsd(),
                genes: g,
                objectives,
                rank: 0,
                crowding: 0.0,
            })
        })
        .collect()
}

fn record(entries: &mut Vec<ArchiveEntry>, front: &mut Vec<Evaluation>, batch: &[Individual], generation: usize) {
    for ind in batch {
        entries.push(ArchiveEntry {
            generation,
            genes: ind.genes.clone(),
            mean: ind.objectives.mean,
            std: ind.objectives.std,
            rsd: ind.rsd,
            rank: 0,
        });
        let e = ind.objectives;
        if !front.iter().any(|f| dominates(f, &e) || *f == e) {
            front.retain(|f| !dominates(&e, f));
            front.push(e);
        }
    }
}

fn assign_rank_and_crowding(pop: &mut [Individual]) {
    let objs: Vec<Evaluation> = pop.iter().map(|i| i.objectives).collect();
    for (rank, front) in nondominated_sort(&objs).iter().enumerate() {
        let dist = crowding_distance(&objs, front);
        for (&i, d) in front.iter().zip(dist) {
            pop[i].rank = rank;
            pop[i].crowding = d;
        }
    }
}

/// Keeps the best `size` individuals by front, then by crowding distance.
fn environmental_selection(combined: Vec<Individual>, size: usize) -> Vec<Individual> {
    let objs: Vec<Evaluation> = combined.iter().map(|i| i.objectives).collect();
    let mut chosen: Vec<usize> = Vec::with_capacity(size);
    for front in nondominated_sort(&objs) {
        if chosen.len() + front.len() <= size {
            chosen.extend(&front);
        } else {
            let dist = crowding_distance(&objs, &front);
            let mut order: Vec<usize> = (0..front.len()).collect();
            order.sort_by(|&a, &b| dist[b].partial_cmp(&dist[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
            let room = size - chosen.len();
            let mut picked: Vec<usize> = order[..room].iter().map(|&k| front[k]).collect();
            picked.sort_unstable();
            chosen.extend(picked);
        }
        if chosen.len() == size {
            break;
        }
    }
    let mut slots: Vec<Option<Individual>> = combined.into_iter().map(Some).collect();
    let mut next: Vec<Individual> = chosen.iter().map(|&i| slots[i].take().expect("unique")).collect();
    assign_rank_and_crowding(&mut next);
    next
}

fn crowded_better(a: &Individual, b: &Individual) -> bool {
    a.rank < b.rank || (a.rank == b.rank && a.crowding > b.crowding)
}

fn tournament(pop: &[Individual], rng: &mut ChaCha8Rng) -> usize {
    let i = rng.random_range(0..pop.len());
    let j = rng.random_range(0..pop.len());
    let (lo, hi) = (i.min(j), i.max(j));
    if crowded_better(&pop[hi], &pop[lo]) {
        hi
    } else {
        lo
    }
}

/// Bounded simulated binary crossover.
fn sbx(
    p1: &[f64],
    p2: &[f64],
    bounds: &[(f64, f64)],
    eta: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, Vec<f64>) {
    let mut c1 = p1.to_vec();
    let mut c2 = p2.to_vec();
    for (k, &(lo, hi)) in bounds.iter().enumerate() {
        if rng.random::<f64>() > 0.5 {
            continue;
        }
        let (x1, x2) = (p1[k].min(p2[k]), p1[k].max(p2[k]));
        if x2 - x1 < 1e-14 {
            continue;
        }
        let u: f64 = rng.random();
        let spread = |beta: f64| {
            let alpha = 2.0 - beta.powf(-(eta + 1.0));
            if u <= 1.0 / alpha {
                (u * alpha).powf(1.0 / (eta + 1.0))
            } else {
                (1.0 / (2.0 - u * alpha)).powf(1.0 / (eta + 1.0))
            }
        };
        let beta_lo = 1.0 + 2.0 * (x1 - lo) / (x2 - x1);
        let beta_hi = 1.0 + 2.0 * (hi - x2) / (x2 - x1);
        let y1 = (0.5 * ((x1 + x2) - spread(beta_lo) * (x2 - x1))).clamp(lo, hi);
        let y2 = (0.5 * ((x1 + x2) + spread(beta_hi) * (x2 - x1))).clamp(lo, hi);
        if rng.random::<f64>() < 0.5 {
            c1[k] = y2;
            c2[k] = y1;
        } else {
            c1[k] = y1;
            c2[k] = y2;
        }
    }
    (c1, c2)
}

/// Bounded polynomial mutation applied gene-wise with `mutation_prob`.
fn polynomial_mutation(genes: &mut [f64], bounds: &[(f64, f64)], params: &GaParams, rng: &mut ChaCha8Rng) {
    let eta = params.mutation_eta;
    for (x, &(lo, hi)) in genes.iter_mut().zip(bounds) {
        if rng.random::<f64>() >= params.mutation_prob {
            continue;
        }
        let width = hi - lo;
        let d1 = (*x - lo) / width;
        let d2 = (hi - *x) / width;
        let u: f64 = rng.random();
        let power = 1.0 / (eta + 1.0);
        let delta = if u < 0.5 {
            let v = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1).powf(eta + 1.0);
            v.powf(power) - 1.0
        } else {
            let v = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2).powf(eta + 1.0);
            1.0 - v.powf(power)
        };
        *x = (*x + delta * width).clamp(lo, hi);
    }
}
