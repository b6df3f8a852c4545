//! Fitness functions for the IRS phase search.
//!
//! * sample AAR over a set of bank samples, full batch or mini-batch with the
//!   recursive surrogate `J⁽ⁱ⁾ = (1-μ) J⁽ⁱ⁻¹⁾ + μ AAR(batch)`, `μ = i^-0.2`;
//! * the statistics-only lower-bound objective
//!   `trace((N_r M_Φ + S Sᴴ)⁻¹)` (minimized);
//! * the LoS sum-path gain `‖Ȟ̄(θ)‖_F²` (maximized).

use std::ops::Range;

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{ChannelSample, ChannelSampleBank, StaticChannelState};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, KahanSum};
use crate::pso::{Fitness, PersonalBestRule, Sense};
use crate::rng::complex_gaussian;
use crate::transceiver::{svd_basis, zf_slot_rate, ReflectionConfig, ReflectionOperator, ReflectionPath, SlotPower};

/// Channel pieces fixed by one θ: the operator `GΘ` and the LoS part of the
/// effective channel. Per-sample effective channels then only add the
/// scaled NLoS terms.
#[derive(Debug, Clone)]
pub struct ThetaChannel {
    op: ReflectionOperator,
    los_eff: CMat,
    nlos_bu_scale: Complex64,
    nlos_ur_scale: Complex64,
}

impl ThetaChannel {
    pub fn new(st: &StaticChannelState, path: &ReflectionPath, theta: &ReflectionConfig) -> Result<Self> {
        let op = path.with_theta(theta)?;
        let k = st.kappa;
        let kp = st.kappa_perp();
        let los_eff = &st.los_bu * Complex64::new(st.gain_bu.sqrt() * k, 0.0) + op.apply(&st.los_ur) * Complex64::new(st.gain_ur.sqrt() * k, 0.0);
        Ok(ThetaChannel {
            op,
            los_eff,
            nlos_bu_scale: Complex64::new(st.gain_bu.sqrt() * kp, 0.0),
            nlos_ur_scale: Complex64::new(st.gain_ur.sqrt() * kp, 0.0),
        })
    }

    /// `Ȟ` for one NLoS sample.
    pub fn effective(&self, sample: &ChannelSample) -> CMat {
        let mut h = &self.los_eff + &sample.nlos_bu * self.nlos_bu_scale;
        h += self.op.apply(&sample.nlos_ur) * self.nlos_ur_scale;
        h
    }

    /// LoS-only effective channel `√(κ²L_bu) H̄_d + √(κ²L_ur) G Θ H̄_r`.
    pub fn los_effective(&self) -> &CMat {
        &self.los_eff
    }
}

/// Water-filled SVD-ZF sum rate averaged over consecutive slots of a series,
/// slots `first..=last` (each slot uses its predecessor as outdated CSI).
pub fn series_rates(tc: &ThetaChannel, series: &[ChannelSample], slots: Range<usize>, m: usize, power: SlotPower, out: &mut KahanSum) -> Result<()> {
    if slots.start == 0 || slots.end > series.len() {
        return Err(Error::Domain(format!("slot range {slots:?} invalid for a series of {} slots", series.len())));
    }
    let mut prev = tc.effective(&series[slots.start - 1]);
    for t in slots {
        let cur = tc.effective(&series[t]);
        out.add(zf_slot_rate(&prev, &cur, m, power)?);
        prev = cur;
    }
    Ok(())
}

/// Everything sample-based fitness needs: the bank, the static channels and
/// the mini-batch partition.
#[derive(Debug, Clone)]
pub struct SampleFitnessContext {
    pub bank: ChannelSampleBank,
    pub static_state: StaticChannelState,
    pub cfg: SystemConfig,
    /// N_B contiguous index ranges of L_mb samples each.
    pub batch_partition: Vec<Range<usize>>,
    path: ReflectionPath,
    power: SlotPower,
}

impl SampleFitnessContext {
    pub fn new(bank: ChannelSampleBank, static_state: StaticChannelState, cfg: &SystemConfig) -> Result<Self> {
        let l = bank.len();
        if l == 0 {
            return Err(Error::Empty("sample bank"));
        }
        if cfg.batch_size == 0 || l % cfg.batch_size != 0 {
            return Err(Error::InvalidConfig(format!("mini-batch size {} must divide the bank size {l}", cfg.batch_size)));
        }
        let m = cfg.n_streams;
        if m == 0 || m > static_state.n_tx().min(static_state.n_rx()) {
            return Err(Error::InvalidConfig(format!("{m} streams on a {}x{} link", static_state.n_tx(), static_state.n_rx())));
        }
        let batch_partition = (0..l / cfg.batch_size).map(|b| b * cfg.batch_size..(b + 1) * cfg.batch_size).collect();
        Ok(SampleFitnessContext {
            path: ReflectionPath::from_g(&static_state.g_mat),
            power: SlotPower { total_power: cfg.total_power_w(), noise_var: cfg.noise_power_w(), mode: cfg.power_csi_mode },
            bank,
            static_state,
            cfg: cfg.clone(),
            batch_partition,
        })
    }

    pub fn n_batches(&self) -> usize {
        self.batch_partition.len()
    }

    /// Index range of mini-batch `b(i) = ((i-1) mod N_B) + 1` for iteration `i ≥ 1`.
    pub fn batch_for_iteration(&self, i: usize) -> Range<usize> {
        self.batch_partition[(i.max(1) - 1) % self.n_batches()].clone()
    }

    pub fn theta_channel(&self, theta: &ReflectionConfig) -> Result<ThetaChannel> {
        ThetaChannel::new(&self.static_state, &self.path, theta)
    }

    pub fn slot_power(&self) -> SlotPower {
        self.power
    }
}

/// Mean water-filled SVD-ZF rate over the given bank samples.
pub fn aar_over_samples(theta: &ReflectionConfig, ctx: &SampleFitnessContext, sample_indices: &[usize]) -> Result<f64> {
    if sample_indices.is_empty() {
        return Err(Error::Empty("sample indices"));
    }
    let tc = ctx.theta_channel(theta)?;
    let m = ctx.cfg.n_streams;
    let mut acc = KahanSum::new();
    let mut cached: Option<((usize, usize), CMat)> = None;
    for &k in sample_indices {
        let (s, t) = ctx.bank.locate(k).ok_or_else(|| Error::Domain(format!("sample index {k} outside a bank of {}", ctx.bank.len())))?;
        let series = &ctx.bank.series[s];
        let prev = match cached.take() {
            Some((key, h)) if key == (s, t - 1) => h,
            _ => tc.effective(&series[t - 1]),
        };
        let cur = tc.effective(&series[t]);
        acc.add(zf_slot_rate(&prev, &cur, m, ctx.power)?);
        cached = Some(((s, t), cur));
    }
    Ok(acc.mean())
}

fn range_indices(r: Range<usize>) -> Vec<usize> {
    r.collect()
}

/// Step size `μ⁽ⁱ⁾ = i^-0.2`.
pub fn surrogate_step(i: usize) -> f64 {
    (i as f64).powf(-0.2)
}

/// `J⁽ⁱ⁾ = (1 - μ⁽ⁱ⁾) J⁽ⁱ⁻¹⁾ + μ⁽ⁱ⁾ AAR(batch b(i))`.
pub fn mbs_surrogate(theta: &ReflectionConfig, ctx: &SampleFitnessContext, iteration: usize, prev_value: f64) -> Result<f64> {
    if iteration == 0 {
        return Err(Error::Domain("surrogate iterations start at 1".into()));
    }
    let batch = aar_over_samples(theta, ctx, &range_indices(ctx.batch_for_iteration(iteration)))?;
    Ok(blend(prev_value, batch, iteration))
}

fn blend(prev: f64, batch: f64, iteration: usize) -> f64 {
    let mu = surrogate_step(iteration);
    if mu == 1.0 {
        batch
    } else {
        (1.0 - mu) * prev + mu * batch
    }
}

/// Mini-batch surrogate fitness (maximize). Initialization evaluates the
/// first mini-batch.
pub struct MbsFitness<'a>(pub &'a SampleFitnessContext);

impl Fitness for MbsFitness<'_> {
    fn sense(&self) -> Sense {
        Sense::Maximize
    }

    fn personal_best_rule(&self) -> PersonalBestRule {
        PersonalBestRule::Successive
    }

    fn evaluate(&self, position: &ReflectionConfig, iteration: usize, prev_value: Option<f64>) -> Result<f64> {
        match (iteration, prev_value) {
            (0, _) | (_, None) => aar_over_samples(position, self.0, &range_indices(self.0.batch_for_iteration(1))),
            (i, Some(prev)) => mbs_surrogate(position, self.0, i, prev),
        }
    }
}

/// Full-batch AAR fitness over every bank sample (maximize).
pub struct FullBatchFitness<'a> {
    ctx: &'a SampleFitnessContext,
    all: Vec<usize>,
}

impl<'a> FullBatchFitness<'a> {
    pub fn new(ctx: &'a SampleFitnessContext) -> Self {
        FullBatchFitness { ctx, all: (0..ctx.bank.len()).collect() }
    }
}

impl Fitness for FullBatchFitness<'_> {
    fn sense(&self) -> Sense {
        Sense::Maximize
    }

    fn personal_best_rule(&self) -> PersonalBestRule {
        PersonalBestRule::Successive
    }

    fn evaluate(&self, position: &ReflectionConfig, _: usize, _: Option<f64>) -> Result<f64> {
        aar_over_samples(position, self.ctx, &self.all)
    }
}

/// Statistical-CSI context shared by the lower-bound and path-gain fitness.
#[derive(Debug, Clone)]
pub struct ScsiContext {
    pub static_state: StaticChannelState,
    pub n_streams: usize,
    path: ReflectionPath,
}

impl ScsiContext {
    pub fn new(static_state: StaticChannelState, n_streams: usize) -> Result<Self> {
        if n_streams == 0 || n_streams > static_state.n_tx().min(static_state.n_rx()) {
            return Err(Error::InvalidConfig(format!("{n_streams} streams on a {}x{} link", static_state.n_tx(), static_state.n_rx())));
        }
        Ok(ScsiContext { path: ReflectionPath::from_g(&static_state.g_mat), static_state, n_streams })
    }

    pub fn n_rx(&self) -> usize {
        self.static_state.n_rx()
    }

    pub fn theta_channel(&self, theta: &ReflectionConfig) -> Result<ThetaChannel> {
        ThetaChannel::new(&self.static_state, &self.path, theta)
    }

    /// `(M_Φ, S)` for θ, with V the top-M singular basis of the LoS-only
    /// effective channel.
    pub fn lbo_terms(&self, theta: &ReflectionConfig) -> Result<(CMat, CMat)> {
        let tc = self.theta_channel(theta)?;
        let los = tc.los_effective();
        let v = svd_basis(los, self.n_streams)?.v_mat;
        let st = &self.static_state;
        let kp2 = st.kappa_perp().powi(2);
        let vg = v.adjoint() * &st.g_mat;
        let m = self.n_streams;
        let m_phi = CMat::identity(m, m) * Complex64::new(kp2 * st.gain_bu, 0.0) + linalg::gram(&vg) * Complex64::new(kp2 * st.gain_ur, 0.0);
        let s = v.adjoint() * los;
        Ok((m_phi, s))
    }

    /// `E{Φ⁻¹}` under the central Wishart approximation with the same mean.
    pub fn expected_inverse_covariance(&self, theta: &ReflectionConfig) -> Result<CMat> {
        let (m_phi, s) = self.lbo_terms(theta)?;
        let nr = self.n_rx();
        let sigma = m_phi + linalg::gram(&s) / Complex64::new(nr as f64, 0.0);
        wishart_inverse_mean(&sigma, nr, self.n_streams)
    }
}

/// `trace((N_r M_Φ + S Sᴴ)⁻¹)`.
pub fn lbo_objective(m_phi: &CMat, s: &CMat, n_rx: usize) -> Result<f64> {
    let a = m_phi * Complex64::new(n_rx as f64, 0.0) + linalg::gram(s);
    linalg::trace_inverse(&a).map_err(|e| match e {
        Error::SingularCovariance { condition } => Error::NotPositiveDefinite(format!("N_r M_Phi + S S^H has condition {condition:e}")),
        other => other,
    })
}

/// Lower-bound objective for θ (minimize).
pub fn lbo_fitness(theta: &ReflectionConfig, ctx: &ScsiContext) -> Result<f64> {
    let (m_phi, s) = ctx.lbo_terms(theta)?;
    lbo_objective(&m_phi, &s, ctx.n_rx())
}

/// `E(W⁻¹) = Σ⁻¹ / (dof - m)` for a complex central Wishart `W ~ CW_m(dof, Σ)`.
pub fn wishart_inverse_mean(sigma: &CMat, dof: usize, m: usize) -> Result<CMat> {
    if sigma.shape() != (m, m) {
        return Err(Error::DimensionMismatch(format!("covariance is {:?}, expected {m}x{m}", sigma.shape())));
    }
    if dof <= m {
        return Err(Error::DegreesOfFreedom { dof, dim: m });
    }
    let chol = linalg::hpd_cholesky(sigma).map_err(|_| Error::NotPositiveDefinite("Wishart scale matrix".into()))?;
    Ok(chol.inverse() / Complex64::new((dof - m) as f64, 0.0))
}

/// One draw `L X Xᴴ Lᴴ` with X m×dof i.i.d. CN(0, 1) and `Σ = L Lᴴ`.
pub fn sample_complex_wishart<R: Rng + ?Sized>(sigma: &CMat, dof: usize, rng: &mut R) -> Result<CMat> {
    let chol = linalg::hpd_cholesky(sigma)?;
    let m = sigma.nrows();
    let x = CMat::from_fn(m, dof, |_, _| complex_gaussian(rng, 1.0));
    let y = chol.l() * x;
    Ok(linalg::gram(&y))
}

/// Lower bound `M log₂(1 + (M/σ²) / trace(Λ⁻¹ E{Φ⁻¹}))` for fixed powers.
/// Zero power on any stream gives the trivial bound 0.
pub fn aar_lower_bound(expected_inv: &CMat, powers: &[f64], noise_var: f64) -> Result<f64> {
    let m = expected_inv.nrows();
    if powers.len() != m {
        return Err(Error::DimensionMismatch(format!("{} powers for {m} streams", powers.len())));
    }
    if powers.iter().any(|p| *p <= 0.0) {
        return Ok(0.0);
    }
    let tr: f64 = powers.iter().enumerate().map(|(k, p)| expected_inv[(k, k)].re / p).sum();
    Ok(m as f64 * (1.0 + (m as f64 / noise_var) / tr).log2())
}

/// Lower-bound fitness (minimize).
pub struct LboFitness<'a>(pub &'a ScsiContext);

impl Fitness for LboFitness<'_> {
    fn sense(&self) -> Sense {
        Sense::Minimize
    }

    fn personal_best_rule(&self) -> PersonalBestRule {
        PersonalBestRule::Successive
    }

    fn evaluate(&self, position: &ReflectionConfig, _: usize, _: Option<f64>) -> Result<f64> {
        lbo_fitness(position, self.0)
    }
}

/// `‖√(κ²L_bu) H̄_d + √(κ²L_ur) G Θ H̄_r‖_F²`.
pub fn spgm_fitness(theta: &ReflectionConfig, ctx: &ScsiContext) -> Result<f64> {
    Ok(ctx.theta_channel(theta)?.los_effective().norm_squared())
}

/// Sum-path-gain fitness (maximize).
pub struct SpgmFitness<'a>(pub &'a ScsiContext);

impl Fitness for SpgmFitness<'_> {
    fn sense(&self) -> Sense {
        Sense::Maximize
    }

    fn personal_best_rule(&self) -> PersonalBestRule {
        PersonalBestRule::Successive
    }

    fn evaluate(&self, position: &ReflectionConfig, _: usize, _: Option<f64>) -> Result<f64> {
        spgm_fitness(position, self.0)
    }
}
