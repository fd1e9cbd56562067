#![allow(dead_code)]

use ota_coord::{CMatrix, Complex64, CoordinationProblem};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Complex Gaussian channel with per-entry variance `t_ℓ²/N`.
pub fn random_channel<R: Rng>(rng: &mut R, antennas: usize, pathloss: &[f64]) -> CMatrix {
    let s = (0.5 / antennas as f64).sqrt();
    CMatrix::from_fn(antennas, pathloss.len(), |_, j| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im) * (s * pathloss[j])
    })
}

pub fn random_problem<R: Rng>(
    rng: &mut R,
    antennas: usize,
    devices: usize,
    noise_variance: f64,
) -> CoordinationProblem {
    let h = random_channel(rng, antennas, &vec![1.0; devices]);
    CoordinationProblem::new(h, vec![1.0 / devices as f64; devices], 1.0, noise_variance).unwrap()
}

/// Random weights, path loss spread over 15 dB and SNR between -10 and 20 dB.
pub fn random_general_problem<R: Rng>(rng: &mut R, antennas: usize, devices: usize) -> CoordinationProblem {
    let pathloss: Vec<f64> = (0..devices).map(|_| 10f64.powf(-rng.random_range(0.0..0.75))).collect();
    let h = random_channel(rng, antennas, &pathloss);
    let weights: Vec<f64> = (0..devices).map(|_| rng.random_range(0.2..1.0)).collect();
    let power = rng.random_range(0.5..2.0);
    let noise = power * 10f64.powf(-rng.random_range(-10.0..20.0) / 10.0);
    CoordinationProblem::new(h, weights, power, noise).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Inverse by Gauss-Jordan elimination with partial pivoting.
pub fn lu_inverse(a: &CMatrix) -> CMatrix {
    let n = a.rows();
    let mut m: Vec<Vec<Complex64>> = (0..n)
        .map(|i| {
            let mut row: Vec<Complex64> = (0..n).map(|j| a[(i, j)]).collect();
            row.extend((0..n).map(|j| Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0)));
            row
        })
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| m[x][c].norm().total_cmp(&m[y][c].norm())).unwrap();
        m.swap(c, p);
        let piv = m[c][c];
        for v in m[c].iter_mut() {
            *v /= piv;
        }
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                let pivot_row = m[c].clone();
                for (v, pv) in m[r].iter_mut().zip(pivot_row) {
                    *v -= f * pv;
                }
            }
        }
    }
    CMatrix::from_fn(n, n, |i, j| m[i][n + j])
}

/// Gram matrix `H_Sᵀ H_S^* + λI` computed entry by entry.
pub fn naive_gram(problem: &CoordinationProblem, members: &[usize], regularizer: f64) -> CMatrix {
    let h = problem.channel();
    CMatrix::from_fn(members.len(), members.len(), |i, j| {
        let mut s = Complex64::new(if i == j { regularizer } else { 0.0 }, 0.0);
        for n in 0..h.rows() {
            s += h[(n, members[i])] * h[(n, members[j])].conj();
        }
        s
    })
}

/// Component of `v` orthogonal to the span of the conjugated columns `members`.
pub fn span_residual(problem: &CoordinationProblem, members: &[usize], v: &[Complex64]) -> Vec<Complex64> {
    let h = problem.channel();
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    for &l in members {
        let mut u: Vec<Complex64> = h.column(l).iter().map(|z| z.conj()).collect();
        for q in &basis {
            let c: Complex64 = q.iter().zip(&u).map(|(a, b)| a.conj() * b).sum();
            for (x, y) in u.iter_mut().zip(q) {
                *x -= c * y;
            }
        }
        let n = norm_sqr(&u).sqrt();
        if n > 1e-12 {
            basis.push(u.iter().map(|z| z / n).collect());
        }
    }
    let mut r = v.to_vec();
    for q in &basis {
        let c: Complex64 = q.iter().zip(&r).map(|(a, b)| a.conj() * b).sum();
        for (x, y) in r.iter_mut().zip(q) {
            *x -= c * y;
        }
    }
    r
}

/// Error-minimizing scalings for a fixed receiver when every device either
/// is zero-forced within the cap or transmits with `b = √P`.
pub fn aligned_scalings(problem: &CoordinationProblem, receiver: &[Complex64]) -> Vec<Complex64> {
    let sqrt_p = problem.power().sqrt();
    problem
        .projections(receiver)
        .into_iter()
        .zip(problem.weights())
        .map(|(p, &phi)| {
            let full = Complex64::new(sqrt_p, 0.0);
            if p.norm() == 0.0 {
                return full;
            }
            let zf = Complex64::new(phi, 0.0) / p;
            if zf.norm() <= sqrt_p {
                zf
            } else {
                full
            }
        })
        .collect()
}

/// Real Gaussian channel, uniform weights.
pub fn random_real_problem<R: Rng>(
    rng: &mut R,
    antennas: usize,
    devices: usize,
    noise_variance: f64,
) -> CoordinationProblem {
    let s = (1.0 / antennas as f64).sqrt();
    let h = CMatrix::from_fn(antennas, devices, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        Complex64::new(re * s, 0.0)
    });
    CoordinationProblem::new(h, vec![1.0 / devices as f64; devices], 1.0, noise_variance).unwrap()
}
