//! Degree-profile search by differential evolution (rand/1/bin).
//!
//! Individuals are nonnegative weight vectors over the active degrees and are
//! normalized onto the simplex before scoring. The puncturing fraction follows
//! from the target rate and the most uniform safe pattern is used, so the
//! threshold is a function of the profile alone.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::density::{puncture_fraction_for_rate, threshold, uniform_pattern, DegreeProfile, ThresholdOptions};
use crate::erasure::{ErasureAnalysis, PuncturePattern};
use crate::error::{Error, Result};

/// Attempts at drawing a feasible member of the initial population.
const INITIAL_DRAWS: usize = 100;

/// Halvings of the step from a parent toward an infeasible trial vector.
const REPAIR_STEPS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizerConfig {
    pub population_size: usize,
    pub scale_factor: f64,
    pub crossover_rate: f64,
    pub generations: usize,
    pub seed: u64,
    pub max_degree: usize,
    /// Degrees allowed to carry mass; all of `2..=max_degree` when `None`.
    pub active_degrees: Option<Vec<usize>>,
    /// Puncturing period; chosen per candidate when `None`.
    pub period: Option<usize>,
    /// Threshold settings used while searching.
    pub search_threshold: ThresholdOptions,
    /// Threshold settings for the reported result.
    pub final_threshold: ThresholdOptions,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            population_size: 40,
            scale_factor: 0.5,
            crossover_rate: 0.9,
            generations: 200,
            seed: 0,
            max_degree: 12,
            active_degrees: None,
            period: None,
            search_threshold: ThresholdOptions::coarse(),
            final_threshold: ThresholdOptions::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.population_size < 4 {
            return bad(format!("population size {} below 4", self.population_size));
        }
        if !(self.scale_factor > 0.0 && self.scale_factor <= 2.0) {
            return bad(format!("scale factor {} outside (0, 2]", self.scale_factor));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return bad(format!("crossover rate {} outside [0, 1]", self.crossover_rate));
        }
        if self.max_degree < 2 {
            return bad(format!("maximum degree {} below 2", self.max_degree));
        }
        let degrees = self.degrees();
        if degrees.is_empty() {
            return bad("no active degrees".into());
        }
        if let Some(&d) = degrees.iter().find(|&&d| d < 2 || d > self.max_degree) {
            return bad(format!("active degree {d} outside 2..={}", self.max_degree));
        }
        Ok(())
    }

    pub fn degrees(&self) -> Vec<usize> {
        match &self.active_degrees {
            Some(v) => {
                let mut v = v.clone();
                v.sort_unstable();
                v.dedup();
                v
            }
            None => (2..=self.max_degree).collect(),
        }
    }
}

/// Best individual after one generation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub profile: DegreeProfile,
    pub puncture_fraction: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub profile: DegreeProfile,
    pub puncture_fraction: f64,
    pub pattern: PuncturePattern,
    /// Threshold of the returned ensemble at the final precision.
    pub threshold: f64,
    /// Best search fitness, per generation (generation 0 is the initial population).
    pub trace: Vec<GenerationRecord>,
}

#[derive(Debug, Clone)]
struct Scored {
    weights: Vec<f64>,
    profile: DegreeProfile,
    phi: f64,
    fitness: f64,
}

struct Problem<'a> {
    analysis: &'a ErasureAnalysis,
    degrees: Vec<usize>,
    target_rate: f64,
    config: &'a OptimizerConfig,
}

impl Problem<'_> {
    /// Profile and puncturing fraction, or `None` if the weights are not a
    /// usable point.
    fn decode(&self, weights: &[f64]) -> Option<(DegreeProfile, f64)> {
        if weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
            return None;
        }
        let profile = DegreeProfile::normalized(self.degrees.iter().copied().zip(weights.iter().copied())).ok()?;
        let phi = puncture_fraction_for_rate(&profile, self.analysis.spec().rate(), self.target_rate).ok()?;
        Some((profile, phi))
    }

    fn score(&self, weights: Vec<f64>, profile: DegreeProfile, phi: f64) -> Result<Scored> {
        let fitness = match uniform_pattern(phi, self.config.period, self.analysis) {
            Ok(x) => threshold(&profile.edge_distribution(), self.analysis, &x, &self.config.search_threshold)?.threshold,
            Err(Error::NoSafePattern { .. }) => 0.0,
            Err(e) => return Err(e),
        };
        Ok(Scored { weights, profile, phi, fitness })
    }

    /// Moves an infeasible trial back toward its (feasible) parent until it
    /// becomes feasible; the parent itself is the last resort.
    fn repair(&self, trial: Vec<f64>, parent: &[f64]) -> (Vec<f64>, DegreeProfile, f64) {
        let clamped: Vec<f64> = trial.iter().map(|&w| if w.is_finite() { w.max(0.0) } else { 0.0 }).collect();
        let mut t = 1.0;
        for _ in 0..REPAIR_STEPS {
            let cand: Vec<f64> = clamped.iter().zip(parent).map(|(&a, &b)| t * a + (1.0 - t) * b).collect();
            if let Some((profile, phi)) = self.decode(&cand) {
                return (cand, profile, phi);
            }
            t *= 0.5;
        }
        let (profile, phi) = self.decode(parent).expect("parent is feasible");
        (parent.to_vec(), profile, phi)
    }
}

/// Searches for the profile with the largest threshold at `target_rate`.
///
/// `on_generation` sees the best individual after every generation, starting
/// with the initial population. The random stream is consumed only in the
/// sequential part of the loop, so results do not depend on how the fitness
/// evaluations are scheduled.
pub fn optimize(
    target_rate: f64,
    analysis: &ErasureAnalysis,
    config: &OptimizerConfig,
    mut on_generation: impl FnMut(&GenerationRecord),
) -> Result<OptimizationResult> {
    config.validate()?;
    if !(target_rate > 0.0 && target_rate < 1.0) {
        return Err(Error::InvalidParameter(format!("target rate {target_rate} outside (0, 1)")));
    }
    let problem = Problem { analysis, degrees: config.degrees(), target_rate, config };
    let dim = problem.degrees.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut drawn: Vec<Option<(Vec<f64>, DegreeProfile, f64)>> = Vec::with_capacity(config.population_size);
    for _ in 0..config.population_size {
        let mut found = None;
        for _ in 0..INITIAL_DRAWS {
            let w: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
            if let Some((profile, phi)) = problem.decode(&w) {
                found = Some((w, profile, phi));
                break;
            }
        }
        drawn.push(found);
    }
    let first = drawn.iter().flatten().next().cloned().ok_or(Error::InfeasibleRate { target: target_rate, phi: f64::NAN })?;
    let initial: Vec<_> = drawn.into_iter().map(|d| d.unwrap_or_else(|| first.clone())).collect();
    let mut population: Vec<Scored> =
        initial.into_par_iter().map(|(w, profile, phi)| problem.score(w, profile, phi)).collect::<Result<_>>()?;

    let mut best = best_of(&population).clone();
    let mut trace = Vec::with_capacity(config.generations + 1);
    let record = |generation: usize, b: &Scored| GenerationRecord {
        generation,
        profile: b.profile.clone(),
        puncture_fraction: b.phi,
        threshold: b.fitness,
    };
    trace.push(record(0, &best));
    on_generation(&trace[0]);

    let n = config.population_size;
    for generation in 1..=config.generations {
        let mut trials = Vec::with_capacity(n);
        for (i, target) in population.iter().enumerate() {
            let picks: Vec<usize> = sample(&mut rng, n - 1, 3).into_iter().map(|k| if k >= i { k + 1 } else { k }).collect();
            let (a, b, c) = (&population[picks[0]].weights, &population[picks[1]].weights, &population[picks[2]].weights);
            let forced = rng.gen_range(0..dim);
            let trial: Vec<f64> = (0..dim)
                .map(|j| {
                    if j == forced || rng.gen::<f64>() < config.crossover_rate {
                        a[j] + config.scale_factor * (b[j] - c[j])
                    } else {
                        target.weights[j]
                    }
                })
                .collect();
            trials.push(match problem.decode(&trial) {
                Some((profile, phi)) => (trial, profile, phi),
                None => problem.repair(trial, &target.weights),
            });
        }
        let scored: Vec<Scored> =
            trials.into_par_iter().map(|(w, profile, phi)| problem.score(w, profile, phi)).collect::<Result<_>>()?;
        for (slot, trial) in population.iter_mut().zip(scored) {
            if trial.fitness > best.fitness {
                best = trial.clone();
            }
            if trial.fitness >= slot.fitness {
                *slot = trial;
            }
        }
        trace.push(record(generation, &best));
        on_generation(&trace[generation]);
    }

    let pattern = uniform_pattern(best.phi, config.period, analysis)?;
    let final_threshold = threshold(&best.profile.edge_distribution(), analysis, &pattern, &config.final_threshold)?.threshold;
    Ok(OptimizationResult {
        profile: best.profile,
        puncture_fraction: best.phi,
        pattern,
        threshold: final_threshold,
        trace,
    })
}

fn best_of(population: &[Scored]) -> &Scored {
    // First index wins ties so the choice is independent of scheduling.
    population.iter().fold(&population[0], |b, s| if s.fitness > b.fitness { s } else { b })
}
