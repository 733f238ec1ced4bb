//! Downlink SINR and sum-rate for a given channel, RIS phase matrix and BS
//! precoder, plus the transmit power constraint.

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::linalg::{frobenius_norm_sq, hermitian, matmul, CMatrix, Complex};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SystemDims {
    /// BS antennas.
    pub m: usize,
    /// RIS reflecting elements.
    pub n: usize,
    /// Single-antenna users.
    pub k: usize,
}

impl SystemDims {
    pub fn new(m: usize, n: usize, k: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::config("scenario.dims.M", "M ≥ 1 required"));
        }
        if n == 0 {
            return Err(Error::config("scenario.dims.N", "N ≥ 1 required"));
        }
        if k == 0 {
            return Err(Error::config("scenario.dims.K", "K ≥ 1 required"));
        }
        if k > m {
            return Err(Error::config(
                "scenario.dims.K",
                format!("K ≤ M violated (K = {k}, M = {m})"),
            ));
        }
        Ok(Self { m, n, k })
    }

    /// Length of the agent's action vector: `2MK + N`.
    pub fn action_dim(&self) -> usize {
        2 * self.m * self.k + self.n
    }

    /// Length of the observation vector: `2K + A + 2NM + 2NK`.
    pub fn state_dim(&self) -> usize {
        2 * self.k + self.action_dim() + 2 * self.n * self.m + 2 * self.n * self.k
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    /// Per-user noise variance in watts.
    pub sigma_sq: Vec<f64>,
}

impl NoiseModel {
    pub fn uniform(sigma_sq: f64, k: usize) -> Self {
        Self {
            sigma_sq: vec![sigma_sq; k],
        }
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        if self.sigma_sq.len() != k {
            return Err(Error::config(
                "scenario.noise.sigma_sq",
                format!("{} variances given for K = {k}", self.sigma_sq.len()),
            ));
        }
        if self.sigma_sq.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::config(
                "scenario.noise.sigma_sq",
                "sigma_sq > 0 required",
            ));
        }
        Ok(())
    }
}

/// BS precoder `W` (M × K); column k serves user k.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformer {
    pub w: CMatrix,
}

impl Beamformer {
    pub fn new(w: CMatrix) -> Self {
        Self { w }
    }

    pub fn zeros(m: usize, k: usize) -> Self {
        Self {
            w: CMatrix::zeros(m, k),
        }
    }

    pub fn power(&self) -> f64 {
        frobenius_norm_sq(&self.w)
    }

    pub fn user_power(&self, k: usize) -> f64 {
        (0..self.w.rows()).map(|r| self.w[(r, k)].norm_sqr()).sum()
    }
}

/// Which adjoint of the user channel `g_k` enters the cascade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InnerProduct {
    #[default]
    Hermitian,
    Transpose,
}

impl InnerProduct {
    fn apply(self, g: &CMatrix) -> CMatrix {
        match self {
            InnerProduct::Hermitian => hermitian(g),
            InnerProduct::Transpose => g.transpose(),
        }
    }
}

/// Row vector `g_kᴴ φ G_TR` (1 × M): the effective MISO channel of one user.
pub fn effective_channel(
    g_k: &CMatrix,
    phi: &CMatrix,
    g_tr: &CMatrix,
    mode: InnerProduct,
) -> Result<CMatrix> {
    if g_k.cols() != 1 {
        return Err(Error::Shape {
            op: "effective_channel",
            left: g_k.shape(),
            right: (g_k.rows(), 1),
        });
    }
    // φ is diagonal in every caller, but keep the general product.
    let row = matmul(&mode.apply(g_k), phi)?;
    matmul(&row, g_tr)
}

/// Scalar `g_kᴴ φ G_TR w_i`.
pub fn effective_gain(
    g_k: &CMatrix,
    phi: &CMatrix,
    g_tr: &CMatrix,
    w_i: &CMatrix,
) -> Result<Complex> {
    effective_gain_with(g_k, phi, g_tr, w_i, InnerProduct::Hermitian)
}

pub fn effective_gain_with(
    g_k: &CMatrix,
    phi: &CMatrix,
    g_tr: &CMatrix,
    w_i: &CMatrix,
    mode: InnerProduct,
) -> Result<Complex> {
    if w_i.cols() != 1 {
        return Err(Error::Shape {
            op: "effective_gain",
            left: w_i.shape(),
            right: (w_i.rows(), 1),
        });
    }
    let h = effective_channel(g_k, phi, g_tr, mode)?;
    Ok(matmul(&h, w_i)?[(0, 0)])
}

/// Evaluates all users at once; caches the effective channels.
#[derive(Debug, Clone)]
pub struct LinkBudget {
    /// `gains[k][i] = h_k w_i`.
    gains: Vec<Vec<Complex>>,
    sigma_sq: Vec<f64>,
}

impl LinkBudget {
    pub fn new(
        realization: &ChannelRealization,
        phi: &CMatrix,
        w: &Beamformer,
        noise: &NoiseModel,
        mode: InnerProduct,
    ) -> Result<Self> {
        let k_users = realization.g_rk.len();
        if w.w.cols() != k_users {
            return Err(Error::Shape {
                op: "LinkBudget",
                left: w.w.shape(),
                right: (realization.g_tr.cols(), k_users),
            });
        }
        if noise.sigma_sq.len() != k_users {
            return Err(Error::IndexOutOfRange {
                what: "noise variance",
                index: k_users - 1,
                len: noise.sigma_sq.len(),
            });
        }
        let mut gains = Vec::with_capacity(k_users);
        for g_k in &realization.g_rk {
            let h = effective_channel(g_k, phi, &realization.g_tr, mode)?;
            let row = matmul(&h, &w.w)?;
            gains.push(row.data().to_vec());
        }
        Ok(Self {
            gains,
            sigma_sq: noise.sigma_sq.clone(),
        })
    }

    pub fn users(&self) -> usize {
        self.gains.len()
    }

    /// `|h_k w_k|²`.
    pub fn signal_power(&self, k: usize) -> f64 {
        self.gains[k][k].norm_sqr()
    }

    pub fn interference(&self, k: usize) -> f64 {
        self.gains[k]
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != k)
            .map(|(_, g)| g.norm_sqr())
            .sum()
    }

    pub fn sinr(&self, k: usize) -> Result<f64> {
        if k >= self.users() {
            return Err(Error::IndexOutOfRange {
                what: "user",
                index: k,
                len: self.users(),
            });
        }
        Ok(self.signal_power(k) / (self.interference(k) + self.sigma_sq[k]))
    }

    pub fn sum_rate(&self) -> f64 {
        (0..self.users())
            .map(|k| {
                (1.0 + self.signal_power(k) / (self.interference(k) + self.sigma_sq[k])).log2()
            })
            .sum()
    }
}

/// SINR of user `k` (zero-based).
pub fn sinr(
    realization: &ChannelRealization,
    phi: &CMatrix,
    w: &Beamformer,
    k: usize,
    noise: &NoiseModel,
) -> Result<f64> {
    LinkBudget::new(realization, phi, w, noise, InnerProduct::Hermitian)?.sinr(k)
}

/// `Σ_k log2(1 + γ_k)` in bit/s/Hz.
pub fn sum_rate(
    realization: &ChannelRealization,
    phi: &CMatrix,
    w: &Beamformer,
    noise: &NoiseModel,
) -> Result<f64> {
    Ok(LinkBudget::new(realization, phi, w, noise, InnerProduct::Hermitian)?.sum_rate())
}

/// Radially scales `W` onto the ball `tr(W Wᴴ) ≤ p_max`.
///
/// Inputs already inside the ball are returned unchanged, and the scaled
/// output is guaranteed to satisfy the constraint in floating point, so the
/// projection is exactly idempotent.
pub fn project_power(w: &Beamformer, p_max: f64) -> Result<Beamformer> {
    if !(p_max > 0.0 && p_max.is_finite()) {
        return Err(Error::config("scenario.p_max", "p_max > 0 required"));
    }
    let power = w.power();
    if power <= p_max {
        return Ok(w.clone());
    }
    let mut scale = (p_max / power).sqrt();
    loop {
        let out = Beamformer::new(w.w.scale(scale));
        if out.power() <= p_max {
            return Ok(out);
        }
        scale *= 1.0 - 4.0 * f64::EPSILON;
    }
}
