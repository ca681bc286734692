use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone)]
pub struct GmmConfig {
    pub k: usize,
    pub seed: u64,
    /// Stop when the relative log-likelihood change falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Lower bound for every diagonal variance.
    pub cov_floor: f64,
    /// A component whose weight drops below this is reinitialized.
    pub min_weight: f64,
    pub max_reinit: usize,
}

impl GmmConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        GmmConfig {
            k,
            seed,
            tol: 1e-5,
            max_iter: 500,
            cov_floor: 1e-6,
            min_weight: 1e-8,
            max_reinit: 3,
        }
    }
}

/// Diagonal-covariance Gaussian mixture fitted by EM.
#[derive(Debug, Clone)]
pub struct GmmModel {
    /// K × d
    pub means: DMatrix<f64>,
    /// K × d diagonal variances
    pub variances: DMatrix<f64>,
    /// Mixture weights `p(z)`.
    pub weights: Vec<f64>,
    /// N × K posteriors `p(z | x_n)`.
    pub responsibilities: DMatrix<f64>,
    /// Log-likelihood at every E-step.
    pub log_likelihood: Vec<f64>,
    /// Indices into `log_likelihood` where a collapsed component was reseeded.
    pub reinit_at: Vec<usize>,
    pub converged: bool,
}

impl GmmModel {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn final_log_likelihood(&self) -> f64 {
        *self.log_likelihood.last().expect("at least one E-step")
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

struct Params {
    means: DMatrix<f64>,
    variances: DMatrix<f64>,
    weights: Vec<f64>,
}

impl Params {
    fn log_joint_row(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        for (k, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..d {
                let var = self.variances[(k, j)];
                let diff = x[j] - self.means[(k, j)];
                acc += LN_2PI + var.ln() + diff * diff / var;
            }
            *slot = self.weights[k].ln() - 0.5 * acc;
        }
    }

    /// Responsibilities, per-point log-likelihoods.
    fn e_step(&self, points: &[Vec<f64>]) -> (DMatrix<f64>, Vec<f64>) {
        let k = self.weights.len();
        let rows: Vec<(Vec<f64>, f64)> = points
            .par_iter()
            .map(|x| {
                let mut lj = vec![0.0; k];
                self.log_joint_row(x, &mut lj);
                let lse = log_sum_exp(&lj);
                let r = lj.iter().map(|l| (l - lse).exp()).collect::<Vec<_>>();
                (r, lse)
            })
            .collect();
        let resp = DMatrix::from_fn(points.len(), k, |n, c| rows[n].0[c]);
        let ll = rows.iter().map(|r| r.1).collect();
        (resp, ll)
    }
}

fn column_variances(points: &[Vec<f64>], floor: f64) -> Vec<f64> {
    let n = points.len() as f64;
    let d = points[0].len();
    (0..d)
        .map(|j| {
            let mean = points.iter().map(|p| p[j]).sum::<f64>() / n;
            let var = points.iter().map(|p| (p[j] - mean).powi(2)).sum::<f64>() / n;
            var.max(floor)
        })
        .collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// k-means++ seeding: first center uniform, then proportional to squared
/// distance to the nearest chosen center (uniform when all distances vanish).
fn kmeans_pp(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = points.len();
    let mut centers = vec![rng.random_range(0..n)];
    let mut nearest: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[centers[0]])).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in nearest.iter().enumerate() {
                if target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.push(next);
        for (i, p) in points.iter().enumerate() {
            nearest[i] = nearest[i].min(sq_dist(p, &points[next]));
        }
    }
    centers
}

/// Fits a diagonal GMM to the rows of `points`.
///
/// EM runs until the relative log-likelihood change drops below `tol` or
/// `max_iter` E-steps. Between reseeds the log-likelihood trace is
/// non-decreasing (the floored variance update is still a constrained
/// maximizer). A component whose weight falls below `min_weight` is
/// reseeded at the worst-explained point, at most `max_reinit` times.
pub fn fit_gmm_with(points: &DMatrix<f64>, cfg: &GmmConfig) -> Result<GmmModel> {
    let (n, d) = points.shape();
    if cfg.k < 2 {
        return Err(Error::Config(format!("GMM needs K >= 2 components, got {}", cfg.k)));
    }
    if cfg.k > n {
        return Err(Error::Config(format!(
            "K = {} exceeds the number of points ({n})",
            cfg.k
        )));
    }
    if d == 0 {
        return Err(Error::Data("GMM input has zero dimensions".into()));
    }
    if points.iter().any(|x| !x.is_finite()) {
        return Err(Error::Data("GMM input contains non-finite values".into()));
    }
    let rows: Vec<Vec<f64>> = (0..n).map(|i| points.row(i).iter().copied().collect()).collect();
    let k = cfg.k;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let global_var = column_variances(&rows, cfg.cov_floor);
    let centers = kmeans_pp(&rows, k, &mut rng);
    let mut params = Params {
        means: DMatrix::from_fn(k, d, |c, j| rows[centers[c]][j]),
        variances: DMatrix::from_fn(k, d, |_, j| global_var[j]),
        weights: vec![1.0 / k as f64; k],
    };

    let mut trace: Vec<f64> = Vec::new();
    let mut reinit_at = Vec::new();
    let mut converged = false;
    let mut resp;
    loop {
        let (r, point_ll) = params.e_step(&rows);
        resp = r;
        let ll: f64 = point_ll.iter().sum();
        if !ll.is_finite() {
            return Err(Error::Numerical("GMM log-likelihood is not finite".into()));
        }
        let prev = trace.last().copied();
        trace.push(ll);
        if let Some(prev) = prev {
            if !reinit_at.contains(&(trace.len() - 1))
                && (ll - prev).abs() <= cfg.tol * prev.abs().max(f64::MIN_POSITIVE)
            {
                converged = true;
                break;
            }
        }
        if trace.len() >= cfg.max_iter {
            break;
        }

        // M-step
        let nk: Vec<f64> = (0..k).map(|c| resp.column(c).sum()).collect();
        let collapsed: Vec<usize> = (0..k).filter(|&c| nk[c] / (n as f64) < cfg.min_weight).collect();
        for c in 0..k {
            if nk[c] <= 0.0 {
                continue;
            }
            for j in 0..d {
                let mean = (0..n).map(|i| resp[(i, c)] * rows[i][j]).sum::<f64>() / nk[c];
                params.means[(c, j)] = mean;
            }
            for j in 0..d {
                let mean = params.means[(c, j)];
                let var = (0..n).map(|i| resp[(i, c)] * (rows[i][j] - mean).powi(2)).sum::<f64>() / nk[c];
                params.variances[(c, j)] = var.max(cfg.cov_floor);
            }
            params.weights[c] = nk[c] / n as f64;
        }
        if !collapsed.is_empty() {
            if reinit_at.len() + collapsed.len() > cfg.max_reinit {
                return Err(Error::Numerical(format!(
                    "GMM component(s) {collapsed:?} collapsed after {} reinitializations",
                    reinit_at.len()
                )));
            }
            // reseed at the points with the lowest likelihood under the current fit
            let mut worst: Vec<usize> = (0..n).collect();
            worst.sort_by(|&a, &b| point_ll[a].total_cmp(&point_ll[b]).then(a.cmp(&b)));
            for (slot, &c) in collapsed.iter().enumerate() {
                log::warn!("GMM component {c} collapsed; reseeding");
                let p = worst[slot % n];
                for j in 0..d {
                    params.means[(c, j)] = rows[p][j];
                    params.variances[(c, j)] = global_var[j];
                }
                params.weights[c] = 1.0 / k as f64;
                reinit_at.push(trace.len());
            }
            let total: f64 = params.weights.iter().sum();
            params.weights.iter_mut().for_each(|w| *w /= total);
        }
    }

    Ok(GmmModel {
        means: params.means,
        variances: params.variances,
        weights: params.weights,
        responsibilities: resp,
        log_likelihood: trace,
        reinit_at,
        converged,
    })
}

pub fn fit_gmm(points: &DMatrix<f64>, k: usize, seed: u64) -> Result<GmmModel> {
    fit_gmm_with(points, &GmmConfig::new(k, seed))
}
