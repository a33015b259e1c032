//! Independent reference implementations used by the integration and
//! acceptance tests. Written directly from the formulas with plain loops and
//! `Vec`s; nothing here calls into the library's numerics.
#![allow(dead_code, clippy::needless_range_loop)]

use anomix::encoder::EncoderParams;
use anomix::mixture::{DensityMode, MixtureParams};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Neumaier-compensated sum.
pub fn ksum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Plain-`Vec` copy of a mixture.
#[derive(Debug, Clone)]
pub struct NaiveMixture {
    pub w: Vec<f64>,
    pub mu: Vec<Vec<f64>>,
    pub s: Vec<Vec<f64>>,
    pub mode: DensityMode,
}

impl NaiveMixture {
    pub fn from_params(p: &MixtureParams) -> Self {
        Self {
            w: p.weights.to_vec(),
            mu: p.prototypes.outer_iter().map(|r| r.to_vec()).collect(),
            s: p.scales.outer_iter().map(|r| r.to_vec()).collect(),
            mode: p.density_mode,
        }
    }

    pub fn d2(&self, z: &[f64], k: usize) -> f64 {
        ksum((0..z.len()).map(|j| (z[j] - self.mu[k][j]).powi(2) / self.s[k][j]))
    }

    /// Component density `F_k(z)`, evaluated directly (no log space).
    pub fn force(&self, z: &[f64], k: usize) -> f64 {
        let d = z.len() as f64;
        let det: f64 = self.s[k].iter().product();
        let d2 = self.d2(z, k);
        let pi = std::f64::consts::PI;
        match self.mode {
            DensityMode::PaperExact => self.w[k] / pi / det.sqrt() / (1.0 + d2),
            DensityMode::StandardT => {
                let c = libm::tgamma((1.0 + d) / 2.0) / (libm::tgamma(0.5) * pi.powf(d / 2.0));
                self.w[k] * c / det.sqrt() * (1.0 + d2).powf(-(1.0 + d) / 2.0)
            }
            DensityMode::Gaussian => {
                self.w[k] * (2.0 * pi).powf(-d / 2.0) / det.sqrt() * (-0.5 * d2).exp()
            }
        }
    }

    pub fn u(&self, z: &[f64], k: usize) -> f64 {
        let d2 = self.d2(z, k);
        match self.mode {
            DensityMode::PaperExact => 2.0 / (1.0 + d2),
            DensityMode::StandardT => (1.0 + z.len() as f64) / (1.0 + d2),
            DensityMode::Gaussian => 1.0,
        }
    }

    pub fn k(&self) -> usize {
        self.w.len()
    }
}

/// E-step: responsibilities and scale factors, row by row.
pub fn naive_e_step(z: &[Vec<f64>], m: &NaiveMixture) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut tau = Vec::new();
    let mut u = Vec::new();
    for zi in z {
        let f: Vec<f64> = (0..m.k()).map(|k| m.force(zi, k)).collect();
        let total = ksum(f.iter().copied());
        tau.push(f.iter().map(|v| v / total).collect());
        u.push((0..m.k()).map(|k| m.u(zi, k)).collect());
    }
    (tau, u)
}

/// M-step over `kept`, without the starved-component fallback.
pub fn naive_m_step(
    z: &[Vec<f64>],
    tau: &[Vec<f64>],
    u: &[Vec<f64>],
    kept: &[usize],
    mode: DensityMode,
) -> NaiveMixture {
    let d = z[0].len();
    let k = tau[0].len();
    let n = kept.len() as f64;
    let mut out = NaiveMixture {
        w: vec![0.0; k],
        mu: vec![vec![0.0; d]; k],
        s: vec![vec![0.0; d]; k],
        mode,
    };
    for c in 0..k {
        let mass = ksum(kept.iter().map(|&i| tau[i][c]));
        let wsum = ksum(kept.iter().map(|&i| tau[i][c] * u[i][c]));
        out.w[c] = mass / n;
        for j in 0..d {
            out.mu[c][j] = ksum(kept.iter().map(|&i| tau[i][c] * u[i][c] * z[i][j])) / wsum;
        }
        for j in 0..d {
            let disp = ksum(
                kept.iter()
                    .map(|&i| tau[i][c] * u[i][c] * (z[i][j] - out.mu[c][j]).powi(2)),
            );
            out.s[c][j] = (disp / mass).max(1e-6);
        }
    }
    out
}

pub fn random_mixture(r: &mut ChaCha8Rng, k: usize, d: usize, mode: DensityMode) -> MixtureParams {
    let raw: Vec<f64> = (0..k).map(|_| r.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    MixtureParams::new(
        Array1::from_iter(raw.iter().map(|v| v / total)),
        Array2::from_shape_simple_fn((k, d), || r.random_range(-2.0..2.0)),
        Array2::from_shape_simple_fn((k, d), || r.random_range(0.3..2.0)),
        mode,
    )
    .unwrap()
}

pub fn random_matrix(r: &mut ChaCha8Rng, n: usize, d: usize, spread: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, d), || r.random_range(-spread..spread))
}

pub fn rows(z: &Array2<f64>) -> Vec<Vec<f64>> {
    z.outer_iter().map(|r| r.to_vec()).collect()
}

/// AUC-ROC by comparing every positive against every negative.
pub fn brute_auc_roc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut twice_wins = 0u64;
    let (mut pos, mut neg) = (0u64, 0u64);
    for (i, &li) in labels.iter().enumerate() {
        if li == 1 {
            pos += 1;
        } else {
            neg += 1;
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj == 0 {
                if scores[i] > scores[j] {
                    twice_wins += 2;
                } else if scores[i] == scores[j] {
                    twice_wins += 1;
                }
            }
        }
    }
    twice_wins as f64 / (2 * pos * neg) as f64
}

/// Average precision where each row's rank counts the rows that beat it,
/// ties broken toward the lower index.
pub fn brute_auc_pr(scores: &[f64], labels: &[u8]) -> f64 {
    let ahead = |i: usize, j: usize| scores[j] > scores[i] || (scores[j] == scores[i] && j < i);
    let mut terms: Vec<(usize, f64)> = Vec::new();
    for i in 0..scores.len() {
        if labels[i] != 1 {
            continue;
        }
        let rank = 1 + (0..scores.len()).filter(|&j| ahead(i, j)).count();
        let hits = 1 + (0..scores.len()).filter(|&j| labels[j] == 1 && ahead(i, j)).count();
        terms.push((rank, hits as f64 / rank as f64));
    }
    terms.sort_by_key(|t| t.0);
    let n_pos = terms.len() as f64;
    terms.iter().map(|t| t.1).sum::<f64>() / n_pos
}

/// Central-difference gradient of `f` with respect to every encoder tensor,
/// in the order of [`EncoderParams::tensors`].
pub fn finite_difference(
    params: &EncoderParams,
    step: f64,
    f: impl Fn(&EncoderParams) -> f64,
) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut probe = params.clone();
    for t in 0..8 {
        let len = params.tensors()[t].len();
        let mut g = Vec::with_capacity(len);
        for i in 0..len {
            let orig = params.tensors()[t][i];
            probe.tensors_mut()[t][i] = orig + step;
            let up = f(&probe);
            probe.tensors_mut()[t][i] = orig - step;
            let down = f(&probe);
            probe.tensors_mut()[t][i] = orig;
            g.push((up - down) / (2.0 * step));
        }
        out.push(g);
    }
    out
}

/// Largest violation of `|a − n| ≤ rel·max(|a|, |n|) + floor` over all entries;
/// returns `None` when every entry passes.
pub fn gradient_mismatch(
    analytic: &EncoderParams,
    numeric: &[Vec<f64>],
    rel: f64,
    floor: f64,
) -> Option<String> {
    for (t, (a, n)) in analytic.tensors().iter().zip(numeric).enumerate() {
        for (i, (&a, &n)) in a.iter().zip(n).enumerate() {
            if (a - n).abs() > rel * a.abs().max(n.abs()) + floor {
                return Some(format!("tensor {t} entry {i}: analytic {a} vs numeric {n}"));
            }
        }
    }
    None
}

/// One small random gradient-check problem.
pub struct GradInstance {
    pub params: EncoderParams,
    pub mixture: MixtureParams,
    pub x: Array2<f64>,
}

pub fn random_grad_instance(seed: u64) -> GradInstance {
    let mut r = rng(seed);
    let n = r.random_range(1..=10);
    let d_in = r.random_range(1..=4);
    let h = r.random_range(1..=5);
    let d = r.random_range(1..=3);
    let k = r.random_range(1..=3);
    let mode = [DensityMode::PaperExact, DensityMode::StandardT, DensityMode::Gaussian][(seed % 3) as usize];
    let mut params = EncoderParams::init(d_in, h, d, seed).unwrap();
    // Non-zero biases so the ReLUs see both signs.
    for t in [1, 3, 5, 7] {
        for v in params.tensors_mut()[t].iter_mut() {
            *v = r.random_range(-0.5..0.5);
        }
    }
    GradInstance {
        params,
        mixture: random_mixture(&mut r, k, d, mode),
        x: random_matrix(&mut r, n, d_in, 2.0),
    }
}
