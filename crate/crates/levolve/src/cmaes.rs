//! Covariance Matrix Adaptation Evolution Strategy over real vectors,
//! minimizing. Standard rank-one plus rank-mu update with cumulative
//! step-size adaptation; strategy parameters follow the published defaults.

use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CmaError {
    #[error("non-finite fitness for candidate {index}")]
    NonFiniteFitness { index: usize },
    #[error("covariance decomposition failed")]
    CovarianceDecompositionFailure,
    #[error("candidate/fitness count {got} does not match lambda {lambda}")]
    WrongPopulation { lambda: usize, got: usize },
}

#[derive(Debug, Clone)]
pub struct CmaConfig {
    pub dim: usize,
    pub lambda: usize,
    pub sigma0: f64,
    pub mean0: Vec<f64>,
    pub max_evals: usize,
    pub seed: u64,
}

impl CmaConfig {
    /// Defaults: lambda = 4 + floor(3 ln n), sigma 1.0, mean at the origin,
    /// 1000 evaluations.
    pub fn new(dim: usize, seed: u64) -> Self {
        let lambda = 4 + (3.0 * (dim as f64).ln()).floor() as usize;
        CmaConfig { dim, lambda, sigma0: 1.0, mean0: vec![0.0; dim], max_evals: 1000, seed }
    }
}

/// Per-generation progress record.
#[derive(Debug, Clone)]
pub struct GenRecord {
    pub generation: usize,
    pub evaluations: usize,
    /// Best fitness seen so far (non-increasing across records).
    pub best_fitness: f64,
    /// Mean fitness of this generation's population.
    pub mean_fitness: f64,
}

pub struct OptimizeResult {
    pub best_x: Vec<f64>,
    pub best_f: f64,
    pub history: Vec<GenRecord>,
    /// Fitness of every evaluation in submission order.
    pub eval_trace: Vec<f64>,
}

pub struct CmaState {
    pub dim: usize,
    pub lambda: usize,
    mu: usize,
    weights: Vec<f64>,
    mueff: f64,
    cs: f64,
    ds: f64,
    cc: f64,
    c1: f64,
    cmu: f64,
    chi_n: f64,
    pub mean: Vec<f64>,
    pub sigma: f64,
    cov: Array2<f64>,
    /// Eigenbasis of cov: columns of `eig_b`, sqrt eigenvalues in `eig_d`.
    eig_b: Array2<f64>,
    eig_d: Vec<f64>,
    eig_fresh: bool,
    ps: Vec<f64>,
    pc: Vec<f64>,
    pub generation: usize,
    pub evaluations: usize,
    pub best: Option<(Vec<f64>, f64)>,
}

impl CmaState {
    pub fn new(cfg: &CmaConfig) -> Self {
        let n = cfg.dim;
        assert!(cfg.lambda >= 2, "population must be at least 2");
        assert!(cfg.sigma0 > 0.0);
        assert_eq!(cfg.mean0.len(), n);
        let mu = cfg.lambda / 2;
        let mut weights: Vec<f64> =
            (0..mu).map(|i| ((mu as f64) + 0.5).ln() - ((i + 1) as f64).ln()).collect();
        let wsum: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= wsum);
        let mueff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let nf = n as f64;
        let cs = (mueff + 2.0) / (nf + mueff + 5.0);
        let ds = 1.0 + 2.0 * (0.0f64).max(((mueff - 1.0) / (nf + 1.0)).sqrt() - 1.0) + cs;
        let cc = (4.0 + mueff / nf) / (nf + 4.0 + 2.0 * mueff / nf);
        let c1 = 2.0 / ((nf + 1.3) * (nf + 1.3) + mueff);
        let cmu = (1.0 - c1)
            .min(2.0 * (mueff - 2.0 + 1.0 / mueff) / ((nf + 2.0) * (nf + 2.0) + mueff));
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));
        CmaState {
            dim: n,
            lambda: cfg.lambda,
            mu,
            weights,
            mueff,
            cs,
            ds,
            cc,
            c1,
            cmu,
            chi_n,
            mean: cfg.mean0.clone(),
            sigma: cfg.sigma0,
            cov: Array2::eye(n),
            eig_b: Array2::eye(n),
            eig_d: vec![1.0; n],
            eig_fresh: true,
            ps: vec![0.0; n],
            pc: vec![0.0; n],
            generation: 0,
            evaluations: 0,
            best: None,
        }
    }

    /// Current covariance (symmetric positive-definite).
    pub fn covariance(&self) -> &Array2<f64> {
        &self.cov
    }

    fn refresh_eigen(&mut self) -> Result<(), CmaError> {
        if self.eig_fresh {
            return Ok(());
        }
        if self.cov.iter().any(|v| !v.is_finite()) {
            return Err(CmaError::CovarianceDecompositionFailure);
        }
        let (mut vals, vecs) = jacobi_eigen(&self.cov);
        // Eigenvalue floor repairs near-singular or slightly indefinite C.
        let mut repaired = false;
        for v in vals.iter_mut() {
            if *v < 1e-12 {
                *v = 1e-12;
                repaired = true;
            }
        }
        if repaired {
            // Rebuild C from the repaired spectrum and retry once.
            let d = Array2::from_diag(&ndarray::Array1::from(vals.clone()));
            self.cov = vecs.dot(&d).dot(&vecs.t());
            if self.cov.iter().any(|v| !v.is_finite()) {
                return Err(CmaError::CovarianceDecompositionFailure);
            }
        }
        self.eig_b = vecs;
        self.eig_d = vals.iter().map(|v| v.sqrt()).collect();
        self.eig_fresh = true;
        Ok(())
    }

    /// Sample lambda candidates m + sigma * B D z, z ~ N(0, I).
    pub fn ask(&mut self, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>, CmaError> {
        self.refresh_eigen()?;
        let n = self.dim;
        let mut out = Vec::with_capacity(self.lambda);
        for _ in 0..self.lambda {
            let z: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let mut x = self.mean.clone();
            for (j, xj) in x.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (i, zi) in z.iter().enumerate() {
                    acc += self.eig_b[[j, i]] * self.eig_d[i] * zi;
                }
                *xj += self.sigma * acc;
            }
            out.push(x);
        }
        Ok(out)
    }

    /// Rank candidates (ties broken by candidate index), move the mean,
    /// adapt sigma and C.
    pub fn tell(&mut self, candidates: &[Vec<f64>], fitnesses: &[f64]) -> Result<(), CmaError> {
        if candidates.len() != self.lambda || fitnesses.len() != self.lambda {
            return Err(CmaError::WrongPopulation {
                lambda: self.lambda,
                got: candidates.len().min(fitnesses.len()),
            });
        }
        if let Some(index) = fitnesses.iter().position(|f| !f.is_finite()) {
            return Err(CmaError::NonFiniteFitness { index });
        }
        let n = self.dim;
        let mut order: Vec<usize> = (0..self.lambda).collect();
        // Stable sort keeps submission order among exact ties.
        order.sort_by(|&a, &b| fitnesses[a].partial_cmp(&fitnesses[b]).expect("finite"));

        let old_mean = self.mean.clone();
        let sigma = self.sigma;
        let ys: Vec<Vec<f64>> = order[..self.mu]
            .iter()
            .map(|&i| {
                (0..n).map(|j| (candidates[i][j] - old_mean[j]) / sigma).collect::<Vec<f64>>()
            })
            .collect();
        let mut yw = vec![0.0; n];
        for (w, y) in self.weights.iter().zip(&ys) {
            for j in 0..n {
                yw[j] += w * y[j];
            }
        }
        for j in 0..n {
            self.mean[j] = old_mean[j] + sigma * yw[j];
        }

        // C^(-1/2) yw = B diag(1/d) B^T yw.
        let mut bty = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += self.eig_b[[j, i]] * yw[j];
            }
            bty[i] = acc / self.eig_d[i];
        }
        let mut cinv_yw = vec![0.0; n];
        for j in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                acc += self.eig_b[[j, i]] * bty[i];
            }
            cinv_yw[j] = acc;
        }

        let cs_coeff = (self.cs * (2.0 - self.cs) * self.mueff).sqrt();
        for j in 0..n {
            self.ps[j] = (1.0 - self.cs) * self.ps[j] + cs_coeff * cinv_yw[j];
        }
        let ps_norm = self.ps.iter().map(|v| v * v).sum::<f64>().sqrt();
        let gen1 = (self.generation + 1) as f64;
        let denom = (1.0 - (1.0 - self.cs).powf(2.0 * gen1)).sqrt();
        let hsig = ps_norm / denom / self.chi_n < 1.4 + 2.0 / (n as f64 + 1.0);

        let cc_coeff = (self.cc * (2.0 - self.cc) * self.mueff).sqrt();
        for j in 0..n {
            self.pc[j] = (1.0 - self.cc) * self.pc[j]
                + if hsig { cc_coeff * yw[j] } else { 0.0 };
        }

        let delta_hsig = if hsig { 0.0 } else { self.cc * (2.0 - self.cc) };
        let base = 1.0 - self.c1 - self.cmu + self.c1 * delta_hsig;
        let mut cov = &self.cov * base;
        for j in 0..n {
            for l in 0..n {
                cov[[j, l]] += self.c1 * self.pc[j] * self.pc[l];
            }
        }
        for (w, y) in self.weights.iter().zip(&ys) {
            let scale = self.cmu * w;
            for j in 0..n {
                for l in 0..n {
                    cov[[j, l]] += scale * y[j] * y[l];
                }
            }
        }
        // Exact symmetry guards against drift in the elementwise updates.
        for j in 0..n {
            for l in 0..j {
                let avg = 0.5 * (cov[[j, l]] + cov[[l, j]]);
                cov[[j, l]] = avg;
                cov[[l, j]] = avg;
            }
        }
        self.cov = cov;
        self.eig_fresh = false;

        self.sigma *= ((self.cs / self.ds) * (ps_norm / self.chi_n - 1.0)).exp();

        self.generation += 1;
        self.evaluations += self.lambda;
        let best_idx = order[0];
        let improved = match &self.best {
            Some((_, f)) => fitnesses[best_idx] < *f,
            None => true,
        };
        if improved {
            self.best = Some((candidates[best_idx].clone(), fitnesses[best_idx]));
        }
        Ok(())
    }
}

/// Ask/tell loop until the evaluation budget is spent. `workers > 1` runs
/// the candidate evaluations of each generation on the rayon pool; results
/// are gathered in candidate order either way, so the outcome is identical.
pub fn optimize<F>(cfg: &CmaConfig, objective: F, workers: usize) -> Result<OptimizeResult, CmaError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mut state = CmaState::new(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut history = Vec::new();
    let mut eval_trace = Vec::new();
    while state.evaluations < cfg.max_evals {
        let candidates = state.ask(&mut rng)?;
        let fitnesses: Vec<f64> = if workers > 1 {
            use rayon::prelude::*;
            candidates.par_iter().map(|c| objective(c)).collect()
        } else {
            candidates.iter().map(|c| objective(c)).collect()
        };
        eval_trace.extend_from_slice(&fitnesses);
        state.tell(&candidates, &fitnesses)?;
        history.push(GenRecord {
            generation: state.generation,
            evaluations: state.evaluations,
            best_fitness: state.best.as_ref().expect("told at least once").1,
            mean_fitness: fitnesses.iter().sum::<f64>() / fitnesses.len() as f64,
        });
    }
    let (best_x, best_f) = state.best.expect("budget allows at least one generation");
    Ok(OptimizeResult { best_x, best_f, history, eval_trace })
}

/// History CSV: generation, evaluations, best_fitness, mean_fitness.
pub fn write_history_csv(path: &Path, history: &[GenRecord]) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "generation,evaluations,best_fitness,mean_fitness")?;
    for r in history {
        writeln!(f, "{},{},{},{}", r.generation, r.evaluations, r.best_fitness, r.mean_fitness)?;
    }
    Ok(())
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
/// Returns (eigenvalues, eigenvectors as columns).
pub fn jacobi_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut m = a.clone();
    let mut v: Array2<f64> = Array2::eye(n);
    let total: f64 = a.iter().map(|x| x * x).sum();
    let tol = 1e-28 * total.max(1e-300);
    for _sweep in 0..100 {
        let off: f64 = {
            let mut s = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    s += m[[p, q]] * m[[p, q]];
                }
            }
            s
        };
        if off * 2.0 <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let tau = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let vals: Vec<f64> = (0..n).map(|i| m[[i, i]]).collect();
    (vals, v)
}
