//! Differential Evolution (DE/rand/1/bin) over a box.
//!
//! Each generation builds every trial vector from the population as it stood
//! at the start of the generation, using a random stream keyed by
//! `(seed, generation, member)`. Evaluation order therefore cannot change the
//! outcome and the parallel driver reproduces the serial one exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EarlyStop {
    /// Stopping is considered only once the best value is at or below this.
    pub target: f64,
    /// Generations without improvement before stopping.
    pub patience: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeConfig {
    pub population: usize,
    pub max_generations: usize,
    pub scale_factor: f64,
    pub crossover_rate: f64,
    pub seed: u64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub early_stop: Option<EarlyStop>,
}

impl Default for DeConfig {
    fn default() -> Self {
        Self {
            population: 100,
            max_generations: 500,
            scale_factor: 0.6,
            crossover_rate: 0.9,
            seed: 0,
            lower: Vec::new(),
            upper: Vec::new(),
            early_stop: None,
        }
    }
}

impl DeConfig {
    pub fn with_bounds(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Self {
            lower,
            upper,
            ..Self::default()
        }
    }

    pub fn dims(&self) -> usize {
        self.lower.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.population < 4 {
            return Err(Error::Config(format!(
                "population {} too small, need at least 4",
                self.population
            )));
        }
        if self.lower.is_empty() || self.lower.len() != self.upper.len() {
            return Err(Error::Config("bounds must be non-empty and of equal length".into()));
        }
        for (d, (lo, hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::Config(format!("bad bounds [{lo}, {hi}] in dimension {d}")));
            }
        }
        if !(self.scale_factor > 0.0 && self.scale_factor <= 2.0) {
            return Err(Error::Config(format!("scale factor {} outside (0, 2]", self.scale_factor)));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(Error::Config(format!("crossover rate {} outside [0, 1]", self.crossover_rate)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeResult {
    pub best_vector: Vec<f64>,
    pub best_fitness: f64,
    /// Best value after initialization and after each generation.
    pub history: Vec<f64>,
    pub evaluations: usize,
    pub generations: usize,
    pub converged: bool,
}

/// Random stream for one member of one generation; generation 0 is the
/// initial population.
fn member_rng(seed: u64, generation: usize, member: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(generation as u64).to_le_bytes());
    key[16..24].copy_from_slice(&(member as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

fn initial_member(cfg: &DeConfig, member: usize) -> Vec<f64> {
    let mut rng = member_rng(cfg.seed, 0, member);
    cfg.lower
        .iter()
        .zip(&cfg.upper)
        .map(|(&lo, &hi)| rng.gen_range(lo..hi))
        .collect()
}

fn trial_vector(cfg: &DeConfig, pop: &[Vec<f64>], generation: usize, i: usize) -> Vec<f64> {
    let n = pop.len();
    let dims = cfg.dims();
    let mut rng = member_rng(cfg.seed, generation, i);
    let mut pick = |taken: &[usize]| loop {
        let r = rng.gen_range(0..n);
        if r != i && !taken.contains(&r) {
            break r;
        }
    };
    let r1 = pick(&[]);
    let r2 = pick(&[r1]);
    let r3 = pick(&[r1, r2]);
    let forced = rng.gen_range(0..dims);
    (0..dims)
        .map(|d| {
            let cross = rng.gen::<f64>() < cfg.crossover_rate || d == forced;
            if cross {
                let v = pop[r1][d] + cfg.scale_factor * (pop[r2][d] - pop[r3][d]);
                v.clamp(cfg.lower[d], cfg.upper[d])
            } else {
                pop[i][d]
            }
        })
        .collect()
}

fn run<F, E>(cfg: &DeConfig, objective: F, evaluate: E) -> Result<DeResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
    E: Fn(&[Vec<f64>], &F) -> Vec<f64>,
{
    cfg.validate()?;
    let n = cfg.population;
    let mut pop: Vec<Vec<f64>> = (0..n).map(|i| initial_member(cfg, i)).collect();
    let mut fit: Vec<f64> = evaluate(&pop, &objective).into_iter().map(sanitize).collect();
    let mut evaluations = n;
    let best_index = |fit: &[f64]| {
        (0..fit.len())
            .min_by(|&a, &b| fit[a].total_cmp(&fit[b]))
            .expect("population is non-empty")
    };
    let mut best = best_index(&fit);
    let mut best_vector = pop[best].clone();
    let mut best_fitness = fit[best];
    let mut history = vec![best_fitness];
    let mut stale = 0usize;
    let mut converged = false;

    for generation in 1..=cfg.max_generations {
        let trials: Vec<Vec<f64>> = (0..n).map(|i| trial_vector(cfg, &pop, generation, i)).collect();
        let trial_fit: Vec<f64> = evaluate(&trials, &objective).into_iter().map(sanitize).collect();
        evaluations += n;
        for (i, (u, fu)) in trials.into_iter().zip(trial_fit).enumerate() {
            if fu <= fit[i] {
                pop[i] = u;
                fit[i] = fu;
            }
        }
        best = best_index(&fit);
        if fit[best] < best_fitness {
            best_fitness = fit[best];
            best_vector = pop[best].clone();
            stale = 0;
        } else {
            stale += 1;
        }
        history.push(best_fitness);
        if let Some(stop) = cfg.early_stop {
            if best_fitness <= stop.target && stale >= stop.patience {
                converged = true;
                break;
            }
        }
    }
    if let Some(stop) = cfg.early_stop {
        converged |= best_fitness <= stop.target;
    }
    Ok(DeResult {
        best_vector,
        best_fitness,
        generations: history.len() - 1,
        history,
        evaluations,
        converged,
    })
}

/// Serial run.
pub fn optimize<F>(cfg: &DeConfig, objective: F) -> Result<DeResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    run(cfg, objective, |xs, f| xs.iter().map(|x| f(x)).collect())
}

/// Generation-synchronous run evaluating candidates on the current rayon
/// pool. Gives the same result as [`optimize`].
pub fn optimize_parallel<F>(cfg: &DeConfig, objective: F) -> Result<DeResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    run(cfg, objective, |xs, f| xs.par_iter().map(|x| f(x)).collect())
}

/// Runs `op` on a dedicated pool of `jobs` workers (`0` = rayon default).
pub fn with_workers<T: Send>(jobs: usize, op: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(op))
}

/// `(generation, best)` rows.
pub fn history_csv(history: &[f64]) -> String {
    let mut out = String::from("generation,best_fitness\n");
    for (g, v) in history.iter().enumerate() {
        out.push_str(&format!("{g},{v:e}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    fn cfg(n: usize, gens: usize, seed: u64) -> DeConfig {
        DeConfig {
            population: n,
            max_generations: gens,
            seed,
            ..DeConfig::with_bounds(vec![-5.0; 12], vec![5.0; 12])
        }
    }

    #[test]
    fn sphere_converges() {
        let r = optimize(&cfg(60, 300, 1), sphere).unwrap();
        assert!(r.best_fitness < 1e-6, "{}", r.best_fitness);
        assert_eq!(r.evaluations, 60 * 301);
        assert_eq!(r.history.len(), 301);
    }

    #[test]
    fn population_too_small() {
        assert!(matches!(optimize(&cfg(3, 10, 0), sphere), Err(Error::Config(_))));
        assert!(optimize(&cfg(0, 10, 0), sphere).is_err());
    }

    #[test]
    fn history_is_monotone_and_deterministic() {
        let a = optimize(&cfg(20, 40, 7), sphere).unwrap();
        let b = optimize(&cfg(20, 40, 7), sphere).unwrap();
        assert_eq!(a, b);
        assert!(a.history.windows(2).all(|w| w[1] <= w[0]));
        let c = optimize(&cfg(20, 40, 8), sphere).unwrap();
        assert_ne!(a.best_vector, c.best_vector);
    }

    #[test]
    fn parallel_matches_serial() {
        let c = cfg(60, 50, 3);
        let serial = optimize(&c, sphere).unwrap();
        for jobs in [1, 4, 8] {
            let par = with_workers(jobs, || optimize_parallel(&c, sphere)).unwrap().unwrap();
            assert_eq!(par, serial);
        }
    }

    #[test]
    fn non_finite_objective_is_survivable() {
        let r = optimize(&cfg(10, 20, 2), |x| if x[0] > 0.0 { f64::NAN } else { sphere(x) }).unwrap();
        assert!(r.best_fitness.is_finite());
        assert!(r.best_vector[0] <= 0.0);
    }

    #[test]
    fn candidates_stay_in_bounds() {
        let c = DeConfig {
            scale_factor: 2.0,
            ..cfg(10, 30, 4)
        };
        let lo = c.lower.clone();
        let hi = c.upper.clone();
        let r = optimize(&c, |x| {
            assert!(x.iter().zip(&lo).zip(&hi).all(|((v, l), h)| v >= l && v <= h));
            -x[0]
        })
        .unwrap();
        assert_eq!(r.best_vector[0], 5.0);
    }

    #[test]
    fn early_stop_sets_converged() {
        let c = DeConfig {
            early_stop: Some(EarlyStop {
                target: 1e-3,
                patience: 0,
            }),
            ..cfg(40, 500, 5)
        };
        let r = optimize(&c, sphere).unwrap();
        assert!(r.converged);
        assert!(r.generations < 500);
    }

    #[test]
    fn csv_rows() {
        let csv = history_csv(&[3.0, 1.0]);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("generation,best_fitness"));
    }
}
