//! Per-slot SVD-ZF transceiver algebra.
//!
//! The BS precodes with the top-M right singular vectors of the outdated
//! downlink channel `Ȟᴴ[t-1]` (equivalently the top-M left singular vectors
//! of `Ȟ[t-1]`, an N_t×N_r matrix). The UE applies the zero-forcing
//! pseudo-inverse of the current equivalent channel `H̲[t] = Vᴴ Ȟ[t]`, which
//! leaves stream m with post-detection noise `σ² [Φ⁻¹]_mm`, `Φ = H̲ H̲ᴴ`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::config::PowerCsiMode;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};
use crate::waterfill::waterfill;

/// Smallest representable phase strictly greater than -π.
pub const PHASE_MIN: f64 = (-PI).next_up();
/// Largest admissible phase, π.
pub const PHASE_MAX: f64 = PI;

/// Is `x` inside the admissible phase interval (-π, π]?
pub fn in_phase_range(x: f64) -> bool {
    x > -PI && x <= PI
}

/// Takes the nearest boundary value for phases outside (-π, π].
pub fn clamp_phase(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(PHASE_MIN, PHASE_MAX)
    }
}

/// IRS phase vector θ; Θ = diag(exp(jθ)).
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionConfig {
    phases: Vec<f64>,
}

impl ReflectionConfig {
    pub fn new(phases: Vec<f64>) -> Result<Self> {
        if let Some(bad) = phases.iter().find(|p| !in_phase_range(**p)) {
            return Err(Error::Domain(format!("phase {bad} outside (-pi, pi]")));
        }
        Ok(ReflectionConfig { phases })
    }

    /// Builds a configuration, clamping each entry into (-π, π].
    pub fn clamped(phases: impl IntoIterator<Item = f64>) -> Self {
        ReflectionConfig { phases: phases.into_iter().map(clamp_phase).collect() }
    }

    pub fn zeros(n: usize) -> Self {
        ReflectionConfig { phases: vec![0.0; n] }
    }

    /// Phases drawn uniformly from (-π, π].
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        ReflectionConfig { phases: (0..n).map(|_| rng.random_range(PHASE_MIN..=PHASE_MAX)).collect() }
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    /// Diagonal of Θ.
    pub fn diagonal(&self) -> CVec {
        CVec::from_iterator(self.phases.len(), self.phases.iter().map(|&p| Complex64::from_polar(1.0, p)))
    }
}

/// The BS-IRS channel prepared for repeated `G Θ X` products. A rank-one G
/// (the LoS case) is kept in factored form `a bᴴ`, which turns the product
/// into two thin matrix-vector operations.
#[derive(Debug, Clone)]
pub enum ReflectionPath {
    RankOne { left: CVec, right: CVec },
    Dense(CMat),
}

impl ReflectionPath {
    pub fn from_g(g: &CMat) -> Self {
        let n = g.ncols();
        if g.nrows() == 0 || n == 0 {
            return ReflectionPath::Dense(g.clone());
        }
        // Pivot on the largest column; G is rank one iff every column is a
        // multiple of it.
        let (pivot, norm) = (0..n).map(|c| (c, g.column(c).norm())).fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if norm == 0.0 {
            return ReflectionPath::Dense(g.clone());
        }
        let left: CVec = g.column(pivot).into_owned();
        let denom = left.dotc(&left);
        let right = CVec::from_fn(n, |c, _| (left.dotc(&g.column(c)) / denom).conj());
        let resid = (g - &left * right.adjoint()).norm();
        if resid <= 1e-12 * g.norm() {
            ReflectionPath::RankOne { left, right }
        } else {
            ReflectionPath::Dense(g.clone())
        }
    }

    pub fn n_irs(&self) -> usize {
        match self {
            ReflectionPath::RankOne { right, .. } => right.len(),
            ReflectionPath::Dense(g) => g.ncols(),
        }
    }

    /// Fixes θ, giving an operator that maps H_r to G Θ H_r.
    pub fn with_theta(&self, theta: &ReflectionConfig) -> Result<ReflectionOperator> {
        if theta.len() != self.n_irs() {
            return Err(Error::DimensionMismatch(format!("theta has {} phases, IRS has {} elements", theta.len(), self.n_irs())));
        }
        let d = theta.diagonal();
        Ok(match self {
            ReflectionPath::RankOne { left, right } => {
                // bᴴ Θ as a row vector.
                let row = right.adjoint().component_mul(&d.transpose());
                ReflectionOperator::RankOne { left: left.clone(), row }
            }
            ReflectionPath::Dense(g) => {
                let mut gt = g.clone();
                for (mut col, z) in gt.column_iter_mut().zip(d.iter()) {
                    col *= *z;
                }
                ReflectionOperator::Dense(gt)
            }
        })
    }
}

/// `G Θ` for a fixed θ.
#[derive(Debug, Clone)]
pub enum ReflectionOperator {
    RankOne { left: CVec, row: nalgebra::RowDVector<Complex64> },
    Dense(CMat),
}

impl ReflectionOperator {
    /// `G Θ x`.
    pub fn apply(&self, x: &CMat) -> CMat {
        match self {
            ReflectionOperator::RankOne { left, row } => left * (row * x),
            ReflectionOperator::Dense(gt) => gt * x,
        }
    }
}

/// `Ȟ = H_d + G diag(e^{jθ}) H_r`.
pub fn effective_channel(theta: &ReflectionConfig, h_bu: &CMat, h_ur: &CMat, g_mat: &CMat) -> Result<CMat> {
    let (nt, nr) = h_bu.shape();
    if g_mat.nrows() != nt || g_mat.ncols() != h_ur.nrows() || h_ur.ncols() != nr || theta.len() != g_mat.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "H_d {:?}, G {:?}, H_r {:?}, theta {}",
            h_bu.shape(),
            g_mat.shape(),
            h_ur.shape(),
            theta.len()
        )));
    }
    let op = ReflectionPath::Dense(g_mat.clone()).with_theta(theta)?;
    Ok(h_bu + op.apply(h_ur))
}

/// Precoder derived from an outdated effective channel.
#[derive(Debug, Clone)]
pub struct PrecoderState {
    /// N_t×M precoder V with orthonormal columns.
    pub v_mat: CMat,
    /// N_r×M matched receive vectors (left singular vectors of `Ȟᴴ`).
    pub u_mat: CMat,
    /// Top-M singular values, descending.
    pub singular_values: Vec<f64>,
}

impl PrecoderState {
    pub fn n_streams(&self) -> usize {
        self.v_mat.ncols()
    }

    /// Keeps only the first `m` streams.
    pub fn truncated(&self, m: usize) -> Self {
        PrecoderState {
            v_mat: self.v_mat.columns(0, m).into_owned(),
            u_mat: self.u_mat.columns(0, m).into_owned(),
            singular_values: self.singular_values[..m].to_vec(),
        }
    }
}

/// Top-M singular basis of `h` (N_t×N_r) without a rank check. Columns
/// beyond the rank of `h` are an orthonormal completion.
///
/// Phase convention: the largest-magnitude entry of each precoder column is
/// made real and positive; the paired receive vector gets the same rotation.
pub fn svd_basis(h: &CMat, m: usize) -> Result<PrecoderState> {
    let (nt, nr) = h.shape();
    if m == 0 || m > nt.min(nr) {
        return Err(Error::DimensionMismatch(format!("{m} streams on a {nt}x{nr} channel")));
    }
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Domain("channel has non-finite entries".into()));
    }
    let svd = h.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let w = svd.v_t.expect("requested Vᴴ").adjoint();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let mut v_mat = CMat::zeros(nt, m);
    let mut u_mat = CMat::zeros(nr, m);
    let mut singular_values = Vec::with_capacity(m);
    for (k, &src) in order.iter().take(m).enumerate() {
        let col = u.column(src);
        let mut pivot = 0;
        let mut best = -1.0;
        for (i, z) in col.iter().enumerate() {
            let a = z.norm();
            if a > best {
                best = a;
                pivot = i;
            }
        }
        let rot = if best > 0.0 { col[pivot].conj() / best } else { Complex64::new(1.0, 0.0) };
        v_mat.set_column(k, &(col * rot));
        u_mat.set_column(k, &(w.column(src) * rot));
        singular_values.push(svd.singular_values[src]);
    }
    Ok(PrecoderState { v_mat, u_mat, singular_values })
}

/// Relative threshold below which a singular value counts as zero.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Truncated-SVD precoder from the outdated effective channel.
pub fn truncated_svd_precoder(h_eff_outdated: &CMat, m: usize) -> Result<PrecoderState> {
    let p = svd_basis(h_eff_outdated, m)?;
    let top = p.singular_values.first().copied().unwrap_or(0.0);
    let last = p.singular_values.last().copied().unwrap_or(0.0);
    if !(top > 0.0) || last <= RANK_TOLERANCE * top {
        return Err(Error::RankDeficient { streams: m });
    }
    Ok(p)
}

/// Equivalent channel `H̲ = Vᴴ Ȟ`, M×N_r.
#[derive(Debug, Clone)]
pub struct EquivalentChannel {
    pub h_eq: CMat,
}

impl EquivalentChannel {
    /// `Φ = H̲ H̲ᴴ`.
    pub fn covariance(&self) -> CMat {
        linalg::gram(&self.h_eq)
    }
}

pub fn equivalent_channel(precoder: &PrecoderState, h_eff_current: &CMat) -> Result<EquivalentChannel> {
    if precoder.v_mat.nrows() != h_eff_current.nrows() {
        return Err(Error::DimensionMismatch(format!("precoder has {} rows, channel {}", precoder.v_mat.nrows(), h_eff_current.nrows())));
    }
    Ok(EquivalentChannel { h_eq: precoder.v_mat.adjoint() * h_eff_current })
}

/// `f_m = [Φ⁻¹]_mm` for every stream.
pub fn inv_cov_diag(eqch: &EquivalentChannel) -> Result<Vec<f64>> {
    let (m, nr) = eqch.h_eq.shape();
    if m > nr {
        return Err(Error::DimensionMismatch(format!("{m} streams exceed {nr} receive antennas")));
    }
    linalg::inverse_diagonal(&eqch.covariance())
}

/// ZF detection matrix `(H̲ H̲ᴴ)⁻¹ H̲`, M×N_r.
pub fn zf_detector(eqch: &EquivalentChannel) -> Result<CMat> {
    let chol = linalg::hpd_cholesky(&eqch.covariance())?;
    Ok(chol.solve(&eqch.h_eq))
}

/// Detector applied to the precoded channel, `W_r Ȟᴴ V`. Equals I_M for any
/// full-rank instance.
pub fn zf_detect_identity(precoder: &PrecoderState, h_eff_current: &CMat) -> Result<CMat> {
    let eq = equivalent_channel(precoder, h_eff_current)?;
    let w = zf_detector(&eq)?;
    Ok(w * (h_eff_current.adjoint() * &precoder.v_mat))
}

/// `Σ_m log₂(1 + P_m / (σ² f_m))` in bits/s/Hz.
pub fn per_slot_rate(powers: &[f64], f: &[f64], noise_var: f64) -> f64 {
    assert_eq!(powers.len(), f.len(), "power and inverse-covariance vectors differ in length");
    powers.iter().zip(f).map(|(&p, &fm)| if p > 0.0 { (1.0 + p / (noise_var * fm)).log2() } else { 0.0 }).sum()
}

/// Transmit power and noise settings for one slot.
#[derive(Debug, Clone, Copy)]
pub struct SlotPower {
    pub total_power: f64,
    pub noise_var: f64,
    pub mode: PowerCsiMode,
}

/// Water-filled SVD-ZF sum rate of one slot given the outdated and current
/// effective channels. Streams that make the outdated channel rank-deficient
/// or the equivalent covariance singular are dropped (zero power), weakest
/// first.
pub fn zf_slot_rate(h_outdated: &CMat, h_current: &CMat, m: usize, power: SlotPower) -> Result<f64> {
    let full = svd_basis(h_outdated, m)?;
    let top = full.singular_values[0];
    for active in (1..=m).rev() {
        if !(top > 0.0) || full.singular_values[active - 1] <= RANK_TOLERANCE * top {
            continue;
        }
        let pre = if active == m { full.clone() } else { full.truncated(active) };
        let eq = equivalent_channel(&pre, h_current)?;
        let f = match inv_cov_diag(&eq) {
            Ok(f) => f,
            Err(Error::SingularCovariance { .. }) => continue,
            Err(e) => return Err(e),
        };
        let levels: Vec<f64> = match power.mode {
            PowerCsiMode::Current => f.iter().map(|fm| power.noise_var * fm).collect(),
            PowerCsiMode::Delayed => pre.singular_values.iter().map(|s| power.noise_var / (s * s)).collect(),
        };
        let alloc = waterfill(&levels, power.total_power)?;
        return Ok(per_slot_rate(&alloc.powers, &f, power.noise_var));
    }
    Ok(0.0)
}
