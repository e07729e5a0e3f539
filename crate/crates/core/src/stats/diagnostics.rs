use alloc::vec::Vec;

use super::descriptive::{mean, sample_variance};

/// Split R-hat: every chain is cut in half and the halves are compared as
/// separate chains. Returns NaN for fewer than 4 draws per chain.
pub fn split_rhat(chains: &[&[f64]]) -> f64 {
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0) / 2;
    if chains.is_empty() || n < 2 {
        return f64::NAN;
    }
    let halves: Vec<&[f64]> = chains.iter().flat_map(|c| [&c[..n], &c[n..2 * n]]).collect();
    let means: Vec<f64> = halves.iter().map(|h| mean(h)).collect();
    let w = halves.iter().map(|h| sample_variance(h)).sum::<f64>() / halves.len() as f64;
    let b = n as f64 * sample_variance(&means);
    if w == 0.0 {
        return if b == 0.0 { 1.0 } else { f64::INFINITY };
    }
    let var_plus = (n - 1) as f64 / n as f64 * w + b / n as f64;
    libm::sqrt(var_plus / w)
}

fn autocovariance(x: &[f64], m: f64, lag: usize) -> f64 {
    let n = x.len();
    x[..n - lag].iter().zip(&x[lag..]).map(|(a, b)| (a - m) * (b - m)).sum::<f64>() / n as f64
}

/// Multi-chain effective sample size with Geyer's initial monotone sequence
/// estimator on the combined autocorrelation.
pub fn effective_sample_size(chains: &[&[f64]]) -> f64 {
    let m = chains.len();
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    if m == 0 || n < 4 {
        return f64::NAN;
    }
    let chains: Vec<&[f64]> = chains.iter().map(|c| &c[..n]).collect();
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = chains.iter().map(|c| sample_variance(c)).sum::<f64>() / m as f64;
    let b_over_n = if m > 1 { sample_variance(&means) } else { 0.0 };
    let var_plus = (n - 1) as f64 / n as f64 * w + b_over_n;
    if var_plus <= 0.0 {
        return (m * n) as f64;
    }
    let rho = |lag: usize| {
        let acov = chains.iter().zip(&means).map(|(c, &mu)| autocovariance(c, mu, lag)).sum::<f64>() / m as f64;
        1.0 - (w - acov) / var_plus
    };
    let mut tau = -1.0;
    let mut prev_pair = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = rho(lag) + rho(lag + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        tau += 2.0 * pair;
        prev_pair = pair;
        lag += 2;
    }
    let tau = tau.max(1.0 / libm::log10((m * n) as f64).max(1.0));
    (m * n) as f64 / tau
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded_rng, standard_normal};

    fn ar1(seed: u64, n: usize, phi: f64) -> Vec<f64> {
        let mut rng = seeded_rng(seed);
        let mut x = 0.0;
        (0..n)
            .map(|_| {
                x = phi * x + standard_normal(&mut rng);
                x
            })
            .collect()
    }

    #[test]
    fn iid_chains_have_rhat_near_one() {
        let c: Vec<Vec<f64>> = (0..4).map(|s| ar1(s, 5000, 0.0)).collect();
        let refs: Vec<&[f64]> = c.iter().map(|v| v.as_slice()).collect();
        let r = split_rhat(&refs);
        assert!((r - 1.0).abs() < 0.01, "{r}");
    }

    #[test]
    fn shifted_chain_inflates_rhat() {
        let mut c: Vec<Vec<f64>> = (0..4).map(|s| ar1(s, 2000, 0.0)).collect();
        c[0].iter_mut().for_each(|v| *v += 3.0);
        let refs: Vec<&[f64]> = c.iter().map(|v| v.as_slice()).collect();
        assert!(split_rhat(&refs) > 1.1);
    }

    #[test]
    fn trending_chain_is_caught_by_splitting() {
        let c: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert!(split_rhat(&[&c]) > 1.5);
    }

    #[test]
    fn ess_of_iid_is_close_to_n() {
        let c: Vec<Vec<f64>> = (0..4).map(|s| ar1(10 + s, 5000, 0.0)).collect();
        let refs: Vec<&[f64]> = c.iter().map(|v| v.as_slice()).collect();
        let ess = effective_sample_size(&refs);
        assert!(ess > 16_000.0 && ess < 24_000.0, "{ess}");
    }

    #[test]
    fn ess_of_ar1_matches_theory() {
        // Integrated autocorrelation time of AR(1) is (1 + φ) / (1 − φ).
        let phi = 0.8;
        let c: Vec<Vec<f64>> = (0..4).map(|s| ar1(20 + s, 25_000, phi)).collect();
        let refs: Vec<&[f64]> = c.iter().map(|v| v.as_slice()).collect();
        let expected = 100_000.0 * (1.0 - phi) / (1.0 + phi);
        let ess = effective_sample_size(&refs);
        assert!((ess / expected - 1.0).abs() < 0.15, "{ess} vs {expected}");
    }

    #[test]
    fn constant_chains() {
        let c = [1.0; 100];
        assert_eq!(split_rhat(&[&c, &c]), 1.0);
        assert_eq!(effective_sample_size(&[&c, &c]), 200.0);
    }
}
