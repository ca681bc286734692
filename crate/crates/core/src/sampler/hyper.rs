//! Fixed-point hyperparameter updates for the Dirichlet–multinomial
//! likelihoods of the doc–topic and topic–word tables.

use statrs::function::gamma::digamma;

pub const MIN_ALPHA: f64 = 1e-6;

/// One Minka fixed-point step for an asymmetric α:
///
/// `α_k ← α_k Σ_d [ψ(n_dk + α_k) − ψ(α_k)] / Σ_d [ψ(n_d + α₀) − ψ(α₀)]`
///
/// `ndk` is row-major D × K. Entries are clamped to at least `MIN_ALPHA`.
pub fn minka_step(ndk: &[u32], k: usize, alpha: &[f64], doc_lengths: &[u32]) -> Vec<f64> {
    let a0: f64 = alpha.iter().sum();
    let denom: f64 = doc_lengths
        .iter()
        .filter(|&&n| n > 0)
        .map(|&n| digamma(n as f64 + a0) - digamma(a0))
        .sum();
    if !(denom > 0.0) {
        return alpha.to_vec();
    }
    let mut num = vec![0.0; k];
    for row in ndk.chunks_exact(k) {
        for (t, &c) in row.iter().enumerate() {
            if c > 0 {
                num[t] += digamma(c as f64 + alpha[t]) - digamma(alpha[t]);
            }
        }
    }
    alpha.iter().zip(&num).map(|(a, n)| clamp(a * n / denom, *a)).collect()
}

/// Same update with all coordinates tied to one value.
pub fn minka_step_symmetric(ndk: &[u32], k: usize, alpha: f64, doc_lengths: &[u32]) -> f64 {
    let a0 = alpha * k as f64;
    let denom: f64 = doc_lengths
        .iter()
        .filter(|&&n| n > 0)
        .map(|&n| digamma(n as f64 + a0) - digamma(a0))
        .sum();
    if !(denom > 0.0) {
        return alpha;
    }
    let num: f64 = ndk
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| digamma(c as f64 + alpha) - digamma(alpha))
        .sum();
    clamp(alpha * num / (k as f64 * denom), alpha)
}

/// Fixed-point step for a scalar `s` in `β = s · base`, with `base` held fixed.
/// `nkw` is row-major K × V and `nk` the topic totals.
pub fn concentration_step(nkw: &[u32], nk: &[u64], base: &[f64], s: f64) -> f64 {
    let v = base.len();
    let b0: f64 = base.iter().sum();
    let denom: f64 = nk
        .iter()
        .filter(|&&n| n > 0)
        .map(|&n| b0 * (digamma(n as f64 + s * b0) - digamma(s * b0)))
        .sum();
    if !(denom > 0.0) {
        return s;
    }
    let mut num = 0.0;
    for row in nkw.chunks_exact(v) {
        for (w, &c) in row.iter().enumerate() {
            if c > 0 {
                num += base[w] * (digamma(c as f64 + s * base[w]) - digamma(s * base[w]));
            }
        }
    }
    clamp(s * num / denom, s)
}

fn clamp(x: f64, fallback: f64) -> f64 {
    if x.is_finite() {
        x.max(MIN_ALPHA)
    } else {
        fallback.max(MIN_ALPHA)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::ln_gamma;

    fn symmetric_loglik(counts: &[u32], a: f64) -> f64 {
        let n: u32 = counts.iter().sum();
        let k = counts.len() as f64;
        ln_gamma(k * a) - ln_gamma(n as f64 + k * a)
            + counts
                .iter()
                .map(|&c| ln_gamma(c as f64 + a) - ln_gamma(a))
                .sum::<f64>()
    }

    // golden-section search over log(a)
    fn numeric_mle(counts: &[u32]) -> f64 {
        let f = |x: f64| symmetric_loglik(counts, x.exp());
        let (mut lo, mut hi) = (-10.0f64, 10.0f64);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = hi - g * (hi - lo);
            let d = lo + g * (hi - lo);
            if f(c) > f(d) {
                hi = d;
            } else {
                lo = c;
            }
        }
        ((lo + hi) / 2.0).exp()
    }

    #[test]
    fn uniform_rows_keep_symmetry() {
        let ndk = [3, 3, 3, 3, 3, 3, 3, 3, 3];
        let out = minka_step(&ndk, 3, &[0.7, 0.7, 0.7], &[9, 9, 9]);
        assert!(out.iter().all(|&a| a == out[0]));
    }

    #[test]
    fn single_document_matches_numeric_mle() {
        let counts = [5, 1, 0, 2];
        let mut a = 1.0;
        for _ in 0..10_000 {
            a = minka_step_symmetric(&counts, 4, a, &[8]);
        }
        let mle = numeric_mle(&counts);
        assert!((a - mle).abs() / mle < 1e-6, "{a} vs {mle}");
    }

    #[test]
    fn fixed_point_is_stationary() {
        let ndk = [4, 1, 0, 2, 5, 1, 0, 3, 6, 1, 1, 1];
        let lens = [5, 8, 9, 3];
        let mut alpha = vec![1.0, 1.0, 1.0];
        for _ in 0..20_000 {
            alpha = minka_step(&ndk, 3, &alpha, &lens);
        }
        let next = minka_step(&ndk, 3, &alpha, &lens);
        for (a, b) in alpha.iter().zip(&next) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn clamps_to_floor() {
        // a topic never used drives its α toward zero
        let out = minka_step(&[4, 0, 4, 0], 2, &[1e-6, 1e-6], &[4, 4]);
        assert!(out.iter().all(|&a| a >= MIN_ALPHA));
    }

    #[test]
    fn concentration_at_uniform_base_matches_symmetric_update() {
        let nkw = [3, 0, 1, 2, 0, 4];
        let nk = [4, 6];
        let base = [1.0, 1.0, 1.0];
        let s = concentration_step(&nkw, &nk, &base, 0.5);
        let sym = minka_step_symmetric(&nkw, 3, 0.5, &[4, 6]);
        assert!((s - sym).abs() < 1e-12);
    }
}
