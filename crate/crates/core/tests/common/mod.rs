// Independent reference implementations for the integration tests. Nothing
// here calls into the library's numerics.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn se_kernel(s2: f64, l: f64, a: f64, b: f64) -> f64 {
    let d = a - b;
    s2 * (-0.5 * d * d / (l * l)).exp()
}

/// LU with partial pivoting: returns (solution of A x = b, ln|det A|).
pub fn lu_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> (Vec<f64>, f64) {
    let n = b.len();
    let mut log_det = 0.0;
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, p);
        b.swap(k, p);
        let piv = a[k][k];
        log_det += piv.abs().ln();
        for i in k + 1..n {
            let f = a[i][k] / piv;
            if f != 0.0 {
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    (x, log_det)
}

pub fn gram(s2: f64, l: f64, sn2: f64, x: &[f64]) -> Vec<Vec<f64>> {
    let n = x.len();
    (0..n)
        .map(|i| (0..n).map(|j| se_kernel(s2, l, x[i], x[j]) + if i == j { sn2 } else { 0.0 }).collect())
        .collect()
}

/// Dense marginal log-likelihood with prior mean `mean(y)`.
pub fn dense_mll(s2: f64, l: f64, sn2: f64, x: &[f64], y: &[f64]) -> f64 {
    let n = y.len();
    let m = y.iter().sum::<f64>() / n as f64;
    let r: Vec<f64> = y.iter().map(|v| v - m).collect();
    let (alpha, log_det) = lu_solve(gram(s2, l, sn2, x), r.clone());
    let quad: f64 = r.iter().zip(&alpha).map(|(a, b)| a * b).sum();
    -0.5 * quad - 0.5 * log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
}

/// Dense predictive mean and variance (noise included) at `t`.
pub fn dense_posterior(s2: f64, l: f64, sn2: f64, mean: f64, x: &[f64], y: &[f64], t: f64) -> (f64, f64) {
    let r: Vec<f64> = y.iter().map(|v| v - mean).collect();
    let k: Vec<f64> = x.iter().map(|&xi| se_kernel(s2, l, xi, t)).collect();
    let (alpha, _) = lu_solve(gram(s2, l, sn2, x), r);
    let (v, _) = lu_solve(gram(s2, l, sn2, x), k.clone());
    let mu = mean + k.iter().zip(&alpha).map(|(a, b)| a * b).sum::<f64>();
    let var = s2 - k.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() + sn2;
    (mu, var)
}

/// One draw of a zero-mean GP with noise at inputs `x`.
pub fn sample_gp(rng: &mut ChaCha8Rng, s2: f64, l: f64, sn2: f64, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let k = gram(s2, l, 0.0, x);
    // Cholesky with a small jitter; the noise is added separately
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = k[i][j] + if i == j { 1e-8 * s2 } else { 0.0 };
            for p in 0..j {
                s -= c[i][p] * c[j][p];
            }
            c[i][j] = if i == j { s.max(0.0).sqrt() } else { s / c[j][j] };
        }
    }
    let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    (0..n)
        .map(|i| {
            let f: f64 = (0..=i).map(|p| c[i][p] * z[p]).sum();
            let e: f64 = StandardNormal.sample(rng);
            f + sn2.sqrt() * e
        })
        .collect()
}

/// Monte-Carlo estimate of P[path j is the strict minimum].
pub fn mc_optimality(rng: &mut ChaCha8Rng, laws: &[(f64, f64)], draws: usize) -> Vec<f64> {
    let mut wins = vec![0usize; laws.len()];
    for _ in 0..draws {
        let mut best = (f64::INFINITY, 0);
        for (j, &(m, v)) in laws.iter().enumerate() {
            let z: f64 = StandardNormal.sample(rng);
            let x = m + v.sqrt() * z;
            if x < best.0 {
                best = (x, j);
            }
        }
        wins[best.1] += 1;
    }
    wins.iter().map(|&w| w as f64 / draws as f64).collect()
}

/// Standard normal CDF via a series/continued-fraction free route: the
/// complementary error function from Abramowitz-Stegun 7.1.26 is too coarse,
/// so integrate the density with Simpson's rule instead.
pub fn phi_by_quadrature(z: f64) -> f64 {
    if z < -10.0 {
        return 0.0;
    }
    let a = -10.0;
    let n = 200_000;
    let h = (z - a) / n as f64;
    let f = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = f(a) + f(z);
    for i in 1..n {
        let x = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
    }
    s * h / 3.0
}

pub fn uniform_inputs(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Dense posterior mean function with the solve done once.
pub fn dense_mean_fn(s2: f64, l: f64, sn2: f64, mean: f64, x: &[f64], y: &[f64]) -> impl Fn(f64) -> f64 {
    let r: Vec<f64> = y.iter().map(|v| v - mean).collect();
    let (alpha, _) = lu_solve(gram(s2, l, sn2, x), r);
    let x = x.to_vec();
    move |t| mean + x.iter().zip(&alpha).map(|(&xi, a)| se_kernel(s2, l, xi, t) * a).sum::<f64>()
}
