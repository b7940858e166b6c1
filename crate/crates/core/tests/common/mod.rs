//! Brute-force oracles, written against raw probability vectors so they
//! share no code with the library's conditioning path.
#![allow(dead_code)]

/// `C(n, k)` by direct multiplication; only for the small photon numbers the
/// oracles enumerate.
pub fn choose(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub fn binom(n: usize, k: usize, p: f64) -> f64 {
    choose(n, k) * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
}

pub fn mean(probs: &[f64]) -> f64 {
    probs.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
}

pub fn variance(probs: &[f64]) -> f64 {
    let m = mean(probs);
    probs
        .iter()
        .enumerate()
        .map(|(n, p)| (n as f64 - m).powi(2) * p)
        .sum()
}

/// Noiseless-attenuation mean, `sum n p_n T^n / sum p_n T^n`.
pub fn mean_out_noiseless(probs: &[f64], t: f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (n, p) in probs.iter().enumerate() {
        let w = p * t.powi(n as i32);
        num += n as f64 * w;
        den += w;
    }
    num / den
}

/// Heralded mean with a finite-efficiency no-click herald, evaluated by
/// enumerating reflected and transmitted photon numbers.
pub fn mean_out_enumerated(probs: &[f64], r: f64, eta1: f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (n, p) in probs.iter().enumerate() {
        for k in 0..=n {
            let w = p * binom(n, k, r) * (1.0 - eta1).powi(k as i32);
            num += (n - k) as f64 * w;
            den += w;
        }
    }
    num / den
}

/// Relative attenuation from the closed heralded-mean expression
/// `(1-R)/(1-R eta) * sum n p (1-R eta)^n / sum p (1-R eta)^n`, divided by
/// `(1-R) <n>_in`. Requires `R < 1`.
pub fn k_heralded_formula(probs: &[f64], r: f64, eta1: f64) -> f64 {
    let w = 1.0 - r * eta1;
    let (mut num, mut den) = (0.0, 0.0);
    for (n, p) in probs.iter().enumerate() {
        num += n as f64 * p * w.powi(n as i32);
        den += p * w.powi(n as i32);
    }
    let mean_out = (1.0 - r) / w * num / den;
    mean_out / ((1.0 - r) * mean(probs))
}

/// Applies binomial loss by direct enumeration.
pub fn thin(probs: &[f64], kappa: f64) -> Vec<f64> {
    let mut out = vec![0.0; probs.len()];
    for (n, p) in probs.iter().enumerate() {
        for (m, o) in out.iter_mut().enumerate().take(n + 1) {
            *o += p * binom(n, m, kappa);
        }
    }
    out
}

/// Expected ratio of D2 click probabilities with and without post-selection
/// on no-click at D1, by enumerating survivors `j`, reflected `k` and
/// transmitted `j - k` photons.
pub fn click_ratio(probs: &[f64], r: f64, kappa: f64, eta1: f64, eta2: f64) -> f64 {
    let (mut nc1, mut nc1_c2, mut c2) = (0.0, 0.0, 0.0);
    for (n, p) in probs.iter().enumerate() {
        for j in 0..=n {
            let pj = p * binom(n, j, kappa);
            for k in 0..=j {
                let w = pj * binom(j, k, r);
                let no1 = (1.0 - eta1).powi(k as i32);
                let click2 = 1.0 - (1.0 - eta2).powi((j - k) as i32);
                nc1 += w * no1;
                nc1_c2 += w * no1 * click2;
                c2 += w * click2;
            }
        }
    }
    (nc1_c2 / nc1) / c2
}

/// Poisson pmf by recurrence, for comparing coherent-state results.
pub fn poisson(mu: f64, cutoff: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(cutoff + 1);
    let mut p = (-mu).exp();
    for n in 0..=cutoff {
        if n > 0 {
            p *= mu / n as f64;
        }
        out.push(p);
    }
    out
}
