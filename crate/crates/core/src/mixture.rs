//! Diagonal-scale mixture models in latent space.
//!
//! The default density is the ν = 1 Student's-t pseudo-density
//!
//! ```text
//! F_k(z) = ω_k · π⁻¹ · |Σ_k|^(-1/2) / (1 + D²_k(z))
//! ```
//!
//! where `D²_k` is the squared Mahalanobis distance under the diagonal scale
//! `Σ_k`. [`DensityMode::StandardT`] swaps in the properly normalized
//! d-dimensional ν = 1 t density and [`DensityMode::Gaussian`] a normal density
//! (used by the Gaussian ablation). All densities are evaluated in log space.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound applied to every diagonal scale entry.
pub const SCALE_FLOOR: f64 = 1e-6;

/// Components whose responsibility mass falls below this are re-seeded.
pub const STARVED_MASS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityMode {
    /// ν = 1 pseudo-density with a `π⁻¹` normalizer and power −1 for every d.
    #[default]
    PaperExact,
    /// Multivariate ν = 1 Student's-t: normalizer Γ((1+d)/2)/(Γ(1/2)π^(d/2)),
    /// power −(1+d)/2.
    StandardT,
    /// Diagonal Gaussian; EM scale factors are identically 1.
    Gaussian,
}

impl DensityMode {
    pub fn name(self) -> &'static str {
        match self {
            DensityMode::PaperExact => "paper_exact",
            DensityMode::StandardT => "standard_t",
            DensityMode::Gaussian => "gaussian",
        }
    }
}

impl std::str::FromStr for DensityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper_exact" => Ok(DensityMode::PaperExact),
            "standard_t" => Ok(DensityMode::StandardT),
            "gaussian" => Ok(DensityMode::Gaussian),
            _ => Err(Error::InvalidArgument(format!("unknown density mode {s:?}"))),
        }
    }
}

/// Mixture weights, prototypes (K×d) and diagonal scales (K×d).
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureParams {
    pub weights: Array1<f64>,
    pub prototypes: Array2<f64>,
    pub scales: Array2<f64>,
    pub density_mode: DensityMode,
    /// Use the unsquared Mahalanobis distance in the EM scale factor
    /// `u = 2 / (1 + D)` instead of `2 / (1 + D²)`.
    pub u_unsquared: bool,
}

impl MixtureParams {
    pub fn new(
        weights: Array1<f64>,
        prototypes: Array2<f64>,
        scales: Array2<f64>,
        density_mode: DensityMode,
    ) -> Result<Self> {
        let params = Self {
            weights,
            prototypes,
            scales,
            density_mode,
            u_unsquared: false,
        };
        params.validate()?;
        Ok(params)
    }

    /// Checks shapes, the weight simplex and the scale floor.
    pub fn validate(&self) -> Result<()> {
        let k = self.weights.len();
        if k == 0 {
            return Err(Error::InvalidArgument("mixture needs at least one component".into()));
        }
        if self.prototypes.nrows() != k || self.scales.dim() != self.prototypes.dim() {
            return Err(Error::InvalidArgument(format!(
                "inconsistent mixture shapes: weights {k}, prototypes {:?}, scales {:?}",
                self.prototypes.dim(),
                self.scales.dim()
            )));
        }
        if self.weights.iter().any(|&w| w.is_nan() || w < 0.0) || (self.weights.sum() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "mixture weights {:?} are not on the simplex",
                self.weights.as_slice()
            )));
        }
        if self.scales.iter().any(|&s| !s.is_finite() || s < SCALE_FLOOR) {
            return Err(Error::InvalidArgument("scale entry below floor".into()));
        }
        if self.prototypes.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite prototype".into()));
        }
        Ok(())
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.prototypes.ncols()
    }

    /// Per-component constant part of `log F_k`: weight, normalizer and
    /// `-½ log|Σ_k|`.
    fn log_coefficient(&self, k: usize) -> f64 {
        let d = self.latent_dim() as f64;
        let log_det = self.scales.row(k).iter().map(|s| s.ln()).sum::<f64>();
        let log_norm = match self.density_mode {
            DensityMode::PaperExact => -PI.ln(),
            DensityMode::StandardT => {
                libm::lgamma((1.0 + d) / 2.0) - libm::lgamma(0.5) - 0.5 * d * PI.ln()
            }
            DensityMode::Gaussian => -0.5 * d * (2.0 * PI).ln(),
        };
        self.weights[k].ln() + log_norm - 0.5 * log_det
    }

    /// Exponent applied to `(1 + D²)` in the t densities.
    fn t_power(&self) -> f64 {
        match self.density_mode {
            DensityMode::PaperExact => 1.0,
            DensityMode::StandardT => (1.0 + self.latent_dim() as f64) / 2.0,
            DensityMode::Gaussian => unreachable!("gaussian has no t power"),
        }
    }

    fn log_kernel(&self, d2: f64) -> f64 {
        match self.density_mode {
            DensityMode::Gaussian => -0.5 * d2,
            _ => -self.t_power() * d2.ln_1p(),
        }
    }

    /// `log F_k(z)`.
    pub fn log_component_force(&self, z: ArrayView1<'_, f64>, k: usize) -> f64 {
        let d2 = mahalanobis_sq_unchecked(z, self.prototypes.row(k), self.scales.row(k));
        self.log_coefficient(k) + self.log_kernel(d2)
    }

    /// `F_k(z)`: the weighted component density, read as a force magnitude.
    pub fn component_force(&self, z: ArrayView1<'_, f64>, k: usize) -> f64 {
        self.log_component_force(z, k).exp()
    }

    /// All `log F_k(z)` together with the squared distances `D²_k(z)`.
    pub(crate) fn log_forces(&self, z: ArrayView1<'_, f64>, coeffs: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d2s: Vec<f64> = self
            .prototypes
            .outer_iter()
            .zip(self.scales.outer_iter())
            .map(|(mu, s)| mahalanobis_sq_unchecked(z, mu, s))
            .collect();
        let logf = coeffs.iter().zip(&d2s).map(|(c, &d2)| c + self.log_kernel(d2)).collect();
        (logf, d2s)
    }

    pub(crate) fn log_coefficients(&self) -> Vec<f64> {
        (0..self.n_components()).map(|k| self.log_coefficient(k)).collect()
    }

    pub fn log_marginal_likelihood(&self, z: ArrayView1<'_, f64>) -> f64 {
        let (logf, _) = self.log_forces(z, &self.log_coefficients());
        log_sum_exp(&logf)
    }

    /// `p(z) = Σ_k F_k(z)`.
    pub fn marginal_likelihood(&self, z: ArrayView1<'_, f64>) -> f64 {
        self.log_marginal_likelihood(z).exp()
    }

    /// EM scale factor for a point at squared distance `d2`.
    pub fn scale_factor(&self, d2: f64) -> f64 {
        let dist = if self.u_unsquared { d2.sqrt() } else { d2 };
        match self.density_mode {
            DensityMode::PaperExact => 2.0 / (1.0 + dist),
            DensityMode::StandardT => (1.0 + self.latent_dim() as f64) / (1.0 + dist),
            DensityMode::Gaussian => 1.0,
        }
    }

    /// `log p(z)` and `∂(−log p)/∂z = Σ_k τ_k · c_k · Σ_k⁻¹ (z − μ_k)`, where
    /// `c_k = 2a / (1 + D²_k)` for the t densities (power `a`) and 1 for the
    /// Gaussian.
    pub fn log_likelihood_and_grad(
        &self,
        z: ArrayView1<'_, f64>,
        coeffs: &[f64],
        grad: &mut [f64],
    ) -> f64 {
        let (logf, d2s) = self.log_forces(z, coeffs);
        let lse = log_sum_exp(&logf);
        let probs = softmax(&logf);
        grad.iter_mut().for_each(|g| *g = 0.0);
        for k in 0..self.n_components() {
            let tau = probs[k];
            if tau == 0.0 {
                continue;
            }
            let c = match self.density_mode {
                DensityMode::Gaussian => 1.0,
                _ => 2.0 * self.t_power() / (1.0 + d2s[k]),
            };
            let mu = self.prototypes.row(k);
            let s = self.scales.row(k);
            for j in 0..grad.len() {
                grad[j] += tau * c * (z[j] - mu[j]) / s[j];
            }
        }
        lse
    }
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Normalized `exp(values)`, computed relative to the maximum.
pub(crate) fn softmax(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= total);
    out
}

/// `Σ_j (z_j − μ_j)² / s_j` for a diagonal scale `s`.
pub fn mahalanobis_sq(
    z: ArrayView1<'_, f64>,
    prototype: ArrayView1<'_, f64>,
    scale: ArrayView1<'_, f64>,
) -> Result<f64> {
    if z.len() != prototype.len() || z.len() != scale.len() {
        return Err(Error::DimensionMismatch {
            expected: z.len(),
            found: prototype.len().max(scale.len()),
        });
    }
    if let Some(s) = scale.iter().find(|&&s| s.is_nan() || s <= 0.0) {
        return Err(Error::InvalidArgument(format!("nonpositive scale entry {s}")));
    }
    Ok(mahalanobis_sq_unchecked(z, prototype, scale))
}

#[inline]
pub(crate) fn mahalanobis_sq_unchecked(
    z: ArrayView1<'_, f64>,
    prototype: ArrayView1<'_, f64>,
    scale: ArrayView1<'_, f64>,
) -> f64 {
    let mut acc = 0.0;
    for ((&zj, &mj), &sj) in z.iter().zip(prototype.iter()).zip(scale.iter()) {
        let diff = zj - mj;
        acc += diff * diff / sj;
    }
    acc
}

/// Posterior component probabilities τ, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    pub tau: Array2<f64>,
}

/// EM scale factors u, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleFactors {
    pub u: Array2<f64>,
}

/// E-step over every row of `z`.
pub fn e_step(z: ArrayView2<'_, f64>, params: &MixtureParams) -> (Responsibilities, ScaleFactors) {
    let n = z.nrows();
    let k = params.n_components();
    let coeffs = params.log_coefficients();
    let mut tau = Array2::zeros((n, k));
    let mut u = Array2::zeros((n, k));
    for (i, row) in z.outer_iter().enumerate() {
        let (logf, d2s) = params.log_forces(row, &coeffs);
        let probs = softmax(&logf);
        for c in 0..k {
            tau[[i, c]] = probs[c];
            u[[i, c]] = params.scale_factor(d2s[c]);
        }
    }
    (Responsibilities { tau }, ScaleFactors { u })
}

/// M-step restricted to the rows in `kept`.
///
/// `previous` supplies the density mode and is used to re-seed components whose
/// responsibility mass has collapsed: such a component moves to the kept point
/// with the lowest marginal likelihood, takes the kept set's per-dimension
/// variance as its scale and weight `1/|kept|`, after which weights are
/// renormalized.
pub fn m_step(
    z: ArrayView2<'_, f64>,
    tau: &Responsibilities,
    u: &ScaleFactors,
    kept: &[usize],
    previous: &MixtureParams,
) -> Result<MixtureParams> {
    if kept.is_empty() {
        return Err(Error::InvalidArgument("m_step needs a non-empty kept set".into()));
    }
    let k = previous.n_components();
    let d = z.ncols();
    if tau.tau.ncols() != k || u.u.ncols() != k || previous.latent_dim() != d {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: tau.tau.ncols(),
        });
    }
    let n = kept.len() as f64;
    let mut weights = Array1::zeros(k);
    let mut prototypes = Array2::zeros((k, d));
    let mut scales = Array2::zeros((k, d));
    let mut starved = Vec::new();

    for c in 0..k {
        let mut mass = 0.0;
        let mut wsum = 0.0;
        let mut wz = vec![0.0; d];
        for &i in kept {
            let t = tau.tau[[i, c]];
            let w = t * u.u[[i, c]];
            mass += t;
            wsum += w;
            for j in 0..d {
                wz[j] += w * z[[i, j]];
            }
        }
        if mass < STARVED_MASS || wsum.is_nan() || wsum <= 0.0 {
            starved.push(c);
            continue;
        }
        weights[c] = mass / n;
        for j in 0..d {
            prototypes[[c, j]] = wz[j] / wsum;
        }
        let mut disp = vec![0.0; d];
        for &i in kept {
            let w = tau.tau[[i, c]] * u.u[[i, c]];
            for j in 0..d {
                let diff = z[[i, j]] - prototypes[[c, j]];
                disp[j] += w * diff * diff;
            }
        }
        for j in 0..d {
            scales[[c, j]] = (disp[j] / mass).max(SCALE_FLOOR);
        }
    }

    if !starved.is_empty() {
        let global_var = column_variance(z, kept);
        let mut by_likelihood: Vec<(f64, usize)> = kept
            .iter()
            .map(|&i| (previous.log_marginal_likelihood(z.row(i)), i))
            .collect();
        by_likelihood.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (slot, &c) in starved.iter().enumerate() {
            let (_, i) = by_likelihood[slot % by_likelihood.len()];
            prototypes.row_mut(c).assign(&z.row(i));
            scales.row_mut(c).assign(&global_var);
            weights[c] = 1.0 / n;
        }
        let total = weights.sum();
        weights /= total;
    }

    let params = MixtureParams {
        weights,
        prototypes,
        scales,
        density_mode: previous.density_mode,
        u_unsquared: previous.u_unsquared,
    };
    if params.prototypes.iter().chain(params.scales.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("M-step produced non-finite parameters".into()));
    }
    Ok(params)
}

/// Population variance per column over `rows`, floored at [`SCALE_FLOOR`].
fn column_variance(z: ArrayView2<'_, f64>, rows: &[usize]) -> Array1<f64> {
    let n = rows.len() as f64;
    let d = z.ncols();
    let mut mean = Array1::<f64>::zeros(d);
    for &i in rows {
        mean += &z.row(i);
    }
    mean /= n;
    let mut var = Array1::<f64>::zeros(d);
    for &i in rows {
        for j in 0..d {
            let diff = z[[i, j]] - mean[j];
            var[j] += diff * diff;
        }
    }
    var.mapv(|v| (v / n).max(SCALE_FLOOR))
}

/// `Σ_{i ∈ kept} log p(z_i)`; zero for an empty kept set.
pub fn trimmed_log_likelihood(z: ArrayView2<'_, f64>, params: &MixtureParams, kept: &[usize]) -> f64 {
    let coeffs = params.log_coefficients();
    kept.iter()
        .map(|&i| log_sum_exp(&params.log_forces(z.row(i), &coeffs).0))
        .sum()
}

/// k-means++ style seeding: the first prototype is a uniformly chosen row, each
/// subsequent one is drawn with probability proportional to the squared
/// Euclidean distance to the nearest prototype chosen so far. Weights start
/// uniform and every scale is the global per-dimension variance.
pub fn init_mixture(
    z: ArrayView2<'_, f64>,
    k: usize,
    seed: u64,
    density_mode: DensityMode,
) -> Result<MixtureParams> {
    let n = z.nrows();
    if k == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    if n < k {
        return Err(Error::InvalidArgument(format!(
            "need at least K={k} rows to seed the mixture, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    let mut nearest = vec![f64::INFINITY; n];

    let mut pick = rng.random_range(0..n);
    loop {
        chosen.push(pick);
        taken[pick] = true;
        if chosen.len() == k {
            break;
        }
        let p = z.row(pick);
        for (i, row) in z.outer_iter().enumerate() {
            let d2: f64 = row.iter().zip(p.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 < nearest[i] {
                nearest[i] = d2;
            }
        }
        let total: f64 = (0..n).filter(|&i| !taken[i]).map(|i| nearest[i]).sum();
        pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut last = None;
            let mut found = None;
            for i in (0..n).filter(|&i| !taken[i] && nearest[i] > 0.0) {
                last = Some(i);
                target -= nearest[i];
                if target < 0.0 {
                    found = Some(i);
                    break;
                }
            }
            found.or(last).expect("positive total implies a candidate")
        } else {
            // Every remaining row duplicates a prototype.
            let free: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
            free[rng.random_range(0..free.len())]
        };
    }

    let all: Vec<usize> = (0..n).collect();
    let var = column_variance(z, &all);
    let prototypes = z.select(Axis(0), &chosen);
    let mut scales = Array2::zeros((k, z.ncols()));
    for mut row in scales.outer_iter_mut() {
        row.assign(&var);
    }
    MixtureParams::new(
        Array1::from_elem(k, 1.0 / k as f64),
        prototypes,
        scales,
        density_mode,
    )
}

/// Result of [`fit_em`].
#[derive(Debug, Clone)]
pub struct EmFit {
    pub params: MixtureParams,
    pub iterations: usize,
    /// Trimmed log-likelihood after the last iteration.
    pub log_likelihood: f64,
    /// Trimmed log-likelihood before the first iteration and after each one.
    pub trajectory: Vec<f64>,
}

/// Alternates E and M steps on the `kept` rows until the trimmed
/// log-likelihood changes by at most `tol` or `max_iter` iterations have run.
pub fn fit_em(
    z: ArrayView2<'_, f64>,
    kept: &[usize],
    init: MixtureParams,
    tol: f64,
    max_iter: usize,
) -> Result<EmFit> {
    if kept.is_empty() {
        return Err(Error::InvalidArgument("EM needs a non-empty kept set".into()));
    }
    if init.latent_dim() != z.ncols() {
        return Err(Error::DimensionMismatch {
            expected: init.latent_dim(),
            found: z.ncols(),
        });
    }
    let z_kept = z.select(Axis(0), kept);
    let rows: Vec<usize> = (0..kept.len()).collect();
    let mut params = init;
    let mut ll = trimmed_log_likelihood(z_kept.view(), &params, &rows);
    let mut trajectory = vec![ll];
    let mut iterations = 0;
    while iterations < max_iter {
        let (tau, u) = e_step(z_kept.view(), &params);
        params = m_step(z_kept.view(), &tau, &u, &rows, &params)?;
        let next = trimmed_log_likelihood(z_kept.view(), &params, &rows);
        if !next.is_finite() {
            return Err(Error::Numeric(format!(
                "log-likelihood became {next} at EM iteration {}",
                iterations + 1
            )));
        }
        iterations += 1;
        trajectory.push(next);
        let delta = (next - ll).abs();
        ll = next;
        if delta <= tol {
            break;
        }
    }
    Ok(EmFit {
        params,
        iterations,
        log_likelihood: ll,
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array};

    fn unit(k: usize, d: usize, mode: DensityMode) -> MixtureParams {
        MixtureParams::new(
            Array1::from_elem(k, 1.0 / k as f64),
            Array2::zeros((k, d)),
            Array2::ones((k, d)),
            mode,
        )
        .unwrap()
    }

    #[test]
    fn mahalanobis_cases() {
        let zero = mahalanobis_sq(array![1.0, 2.0].view(), array![1.0, 2.0].view(), array![1.0, 1.0].view());
        assert_eq!(zero.unwrap(), 0.0);
        let d2 = mahalanobis_sq(array![1.0, 2.0].view(), array![0.0, 0.0].view(), array![1.0, 4.0].view());
        assert_eq!(d2.unwrap(), 2.0);
        let scaled = mahalanobis_sq(array![3.0, 6.0].view(), array![0.0, 0.0].view(), array![1.0, 4.0].view());
        assert!((scaled.unwrap() - 18.0).abs() < 1e-12);
        assert!(mahalanobis_sq(array![1.0].view(), array![0.0].view(), array![0.0].view()).is_err());
        assert!(mahalanobis_sq(array![1.0].view(), array![0.0].view(), array![-1.0].view()).is_err());
    }

    #[test]
    fn component_force_identities() {
        let p = unit(1, 1, DensityMode::PaperExact);
        assert!((p.component_force(array![0.0].view(), 0) - std::f64::consts::FRAC_1_PI).abs() < 1e-15);

        let p = MixtureParams::new(array![1.0], array![[0.0, 0.0]], array![[4.0, 1.0]], DensityMode::PaperExact).unwrap();
        assert!((p.component_force(array![0.0, 0.0].view(), 0) - 0.1591549431).abs() < 1e-10);

        let mut prev = f64::INFINITY;
        for step in 0..50 {
            let t = step as f64 * 0.3;
            let f = p.component_force(array![t * 0.6, -t * 0.8].view(), 0);
            assert!(f < prev || step == 0);
            prev = f;
        }
    }

    #[test]
    fn standard_t_reduces_to_cauchy_in_one_dimension() {
        let p = unit(1, 1, DensityMode::StandardT);
        let q = unit(1, 1, DensityMode::PaperExact);
        for x in [0.0, 0.5, 3.0] {
            let a = p.component_force(array![x].view(), 0);
            let b = q.component_force(array![x].view(), 0);
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn marginal_likelihood_linearity() {
        let one = MixtureParams::new(array![1.0], array![[0.5, -1.0]], array![[2.0, 0.5]], DensityMode::PaperExact).unwrap();
        let two = MixtureParams::new(
            array![0.5, 0.5],
            array![[0.5, -1.0], [0.5, -1.0]],
            array![[2.0, 0.5], [2.0, 0.5]],
            DensityMode::PaperExact,
        )
        .unwrap();
        let z = array![1.3, 0.2];
        assert_eq!(one.marginal_likelihood(z.view()), one.component_force(z.view(), 0));
        assert!((one.marginal_likelihood(z.view()) - two.marginal_likelihood(z.view())).abs() < 1e-15);
    }

    #[test]
    fn e_step_basic_cases() {
        let z = array![[0.3, 1.0], [2.0, -1.0]];
        let (tau, _) = e_step(z.view(), &unit(1, 2, DensityMode::PaperExact));
        assert!(tau.tau.iter().all(|&t| t == 1.0));

        let p = MixtureParams::new(array![0.5, 0.5], array![[-1.0], [1.0]], array![[1.0], [1.0]], DensityMode::PaperExact).unwrap();
        let (tau, u) = e_step(array![[0.0], [1.0]].view(), &p);
        assert_eq!(tau.tau.row(0).to_vec(), vec![0.5, 0.5]);
        // D² = 1 to both components from the origin; D² = 0 to the second from 1.
        assert_eq!(u.u[[0, 0]], 1.0);
        assert_eq!(u.u[[1, 1]], 2.0);
    }

    #[test]
    fn unsquared_scale_factor() {
        let mut p = unit(1, 1, DensityMode::PaperExact);
        p.u_unsquared = true;
        assert_eq!(p.scale_factor(4.0), 2.0 / 3.0);
        p.u_unsquared = false;
        assert_eq!(p.scale_factor(4.0), 2.0 / 5.0);
        let g = unit(1, 1, DensityMode::Gaussian);
        assert_eq!(g.scale_factor(17.0), 1.0);
    }

    #[test]
    fn m_step_degenerate_and_hand_cases() {
        let z = array![[1.0, 2.0], [3.0, 0.0], [5.0, 1.0]];
        let tau = Responsibilities {
            tau: array![[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]],
        };
        let u = ScaleFactors { u: Array2::ones((3, 2)) };
        let prev = unit(2, 2, DensityMode::PaperExact);
        let out = m_step(z.view(), &tau, &u, &[0, 1, 2], &prev).unwrap();
        // The starved second component is re-seeded, so weights renormalize.
        assert!((out.weights.sum() - 1.0).abs() < 1e-12);
        assert_eq!(out.prototypes.row(0).to_vec(), vec![3.0, 1.0]);

        let z = array![[1.0], [-1.0]];
        let tau = Responsibilities { tau: array![[1.0], [1.0]] };
        let u = ScaleFactors { u: array![[1.0], [1.0]] };
        let out = m_step(z.view(), &tau, &u, &[0, 1], &unit(1, 1, DensityMode::PaperExact)).unwrap();
        assert_eq!(out.prototypes[[0, 0]], 0.0);
        assert_eq!(out.scales[[0, 0]], 1.0);
        assert_eq!(out.weights[0], 1.0);
    }

    #[test]
    fn m_step_reseeds_starved_component_at_least_likely_point() {
        let z = array![[0.0], [0.1], [-0.1], [9.0]];
        let tau = Responsibilities {
            tau: array![[1.0, 0.0], [1.0, 0.0], [1.0, 0.0], [1.0, 0.0]],
        };
        let u = ScaleFactors { u: Array2::ones((4, 2)) };
        let prev = MixtureParams::new(array![0.5, 0.5], array![[0.0], [0.0]], array![[1.0], [1.0]], DensityMode::PaperExact).unwrap();
        let out = m_step(z.view(), &tau, &u, &[0, 1, 2, 3], &prev).unwrap();
        assert_eq!(out.prototypes[[1, 0]], 9.0);
        out.validate().unwrap();
    }

    #[test]
    fn trimmed_log_likelihood_cases() {
        let p = unit(1, 2, DensityMode::PaperExact);
        let z = array![[0.0, 0.0], [1.0, 1.0]];
        assert_eq!(trimmed_log_likelihood(z.view(), &p, &[]), 0.0);
        assert!((trimmed_log_likelihood(z.view(), &p, &[0]) + PI.ln()).abs() < 1e-15);
    }

    #[test]
    fn init_mixture_cases() {
        let z = array![[0.0, 0.0], [1.0, 0.0], [0.0, 5.0], [3.0, 3.0]];
        let p = init_mixture(z.view(), 4, 9, DensityMode::PaperExact).unwrap();
        let mut rows: Vec<Vec<f64>> = p.prototypes.outer_iter().map(|r| r.to_vec()).collect();
        rows.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut expected: Vec<Vec<f64>> = z.outer_iter().map(|r| r.to_vec()).collect();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(rows, expected);
        assert!(p.weights.iter().all(|&w| w == 0.25));

        let single = init_mixture(z.view(), 1, 2, DensityMode::PaperExact).unwrap();
        assert!(z.outer_iter().any(|r| r == single.prototypes.row(0)));
        let var = z.var_axis(Axis(0), 0.0);
        for (a, b) in single.scales.row(0).iter().zip(var.iter()) {
            assert!((a - b).abs() < 1e-12);
        }

        assert_eq!(init_mixture(z.view(), 3, 5, DensityMode::PaperExact).unwrap(), init_mixture(z.view(), 3, 5, DensityMode::PaperExact).unwrap());
        assert!(init_mixture(z.view(), 5, 0, DensityMode::PaperExact).is_err());
    }

    #[test]
    fn init_mixture_with_duplicate_rows() {
        let z = Array::from_elem((5, 2), 1.5);
        let p = init_mixture(z.view(), 5, 1, DensityMode::PaperExact).unwrap();
        assert!(p.scales.iter().all(|&s| s == SCALE_FLOOR));
    }

    #[test]
    fn fit_em_infinite_tolerance_runs_once() {
        let z = array![[0.0], [0.2], [3.0], [3.1], [2.9]];
        let init = init_mixture(z.view(), 2, 0, DensityMode::PaperExact).unwrap();
        let fit = fit_em(z.view(), &[0, 1, 2, 3, 4], init, f64::INFINITY, 100).unwrap();
        assert_eq!(fit.iterations, 1);
        assert_eq!(fit.trajectory.len(), 2);
    }

    #[test]
    fn fit_em_collapses_onto_repeated_locations() {
        let mut rows = Vec::new();
        for _ in 0..10 {
            rows.extend_from_slice(&[-4.0, 1.0]);
            rows.extend_from_slice(&[6.0, -2.0]);
        }
        let z = Array2::from_shape_vec((20, 2), rows).unwrap();
        let kept: Vec<usize> = (0..20).collect();
        let init = MixtureParams::new(
            array![0.5, 0.5],
            array![[-3.0, 0.0], [5.0, -1.0]],
            array![[4.0, 4.0], [4.0, 4.0]],
            DensityMode::PaperExact,
        )
        .unwrap();
        let fit = fit_em(z.view(), &kept, init, 1e-3, 200).unwrap();
        let p = fit.params;
        assert!((p.prototypes[[0, 0]] + 4.0).abs() < 1e-9 && (p.prototypes[[0, 1]] - 1.0).abs() < 1e-9);
        assert!((p.prototypes[[1, 0]] - 6.0).abs() < 1e-9 && (p.prototypes[[1, 1]] + 2.0).abs() < 1e-9);
        assert!(p.scales.iter().all(|&s| s == SCALE_FLOOR));
        assert!((p.weights[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fit_em_errors() {
        let z = array![[0.0], [1.0]];
        let init = unit(1, 1, DensityMode::PaperExact);
        assert!(fit_em(z.view(), &[], init.clone(), 1e-3, 10).is_err());
        let wide = unit(1, 2, DensityMode::PaperExact);
        assert!(fit_em(z.view(), &[0, 1], wide, 1e-3, 10).is_err());
        let zero_iters = fit_em(z.view(), &[0, 1], init.clone(), 1e-3, 0).unwrap();
        assert_eq!(zero_iters.params, init);
    }

    #[test]
    fn density_mode_parses() {
        for m in [DensityMode::PaperExact, DensityMode::StandardT, DensityMode::Gaussian] {
            assert_eq!(m.name().parse::<DensityMode>().unwrap(), m);
        }
        assert!("cauchy".parse::<DensityMode>().is_err());
    }
}
