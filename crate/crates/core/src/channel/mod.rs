//! Channel synthesis.
//!
//! The BS-IRS link is a fixed rank-one LoS channel. The BS-UE and IRS-UE
//! links are Rician: a deterministic LoS part plus a Rayleigh part that
//! evolves slot to slot as a first-order autoregressive process with Jakes
//! correlation ρ.
//!
//! Array conventions: BS and UE carry uniform linear arrays along the y
//! axis; the IRS is a planar array in the y–z plane with `irs_cols` (N_y)
//! elements along y and `irs_rows` (N_x) along z. Angles are derived from
//! the unit direction vector `u` of each link: a linear array sees
//! `sin φ = u_y`, the IRS sees `u = (sin φe cos φa, sin φe sin φa, cos φe)`.

mod bank_io;
mod bessel;

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

pub use bank_io::{read_bank_csv, write_bank_csv};
pub use bessel::{bessel_j0, doppler_for_rho, jakes_rho, J0_FIRST_ZERO};

use crate::config::{db_to_linear, SystemConfig};
use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec};
use crate::rng::{self, complex_gaussian, Domain, SimRng};

/// Steering vector of an `n`-element linear array:
/// element k is `exp(-j 2π k d/λ sin φ)`.
pub fn steering_bs(phi: f64, n_tx: usize, spacing: f64) -> CVec {
    linear_phase_vector(n_tx, spacing * phi.sin())
}

fn linear_phase_vector(n: usize, step: f64) -> CVec {
    CVec::from_fn(n, |k, _| Complex64::from_polar(1.0, -2.0 * PI * k as f64 * step))
}

/// The N_y factor of the IRS steering vector (uses sin φe sin φa).
pub fn steering_irs_y_factor(phi_e: f64, phi_a: f64, n_y: usize, spacing: f64) -> CVec {
    linear_phase_vector(n_y, spacing * phi_e.sin() * phi_a.sin())
}

/// The N_x factor of the IRS steering vector (uses cos φe).
pub fn steering_irs_x_factor(phi_e: f64, n_x: usize, spacing: f64) -> CVec {
    linear_phase_vector(n_x, spacing * phi_e.cos())
}

/// IRS steering vector `b_{N_y}(φe, φa) ⊗ b_{N_x}(φe)`, length N_x·N_y.
pub fn steering_irs(phi_e: f64, phi_a: f64, n_x: usize, n_y: usize, spacing: f64) -> CVec {
    let by = steering_irs_y_factor(phi_e, phi_a, n_y, spacing);
    let bx = steering_irs_x_factor(phi_e, n_x, spacing);
    by.kronecker(&bx)
}

/// Large-scale gain `L_in (d / 1 m)^(-α)` in linear scale.
pub fn path_loss(dist: f64, ple: f64, ref_loss_db: f64) -> Result<f64> {
    if !(dist > 0.0) || !dist.is_finite() {
        return Err(Error::Domain(format!("path loss needs a positive distance, got {dist}")));
    }
    Ok(db_to_linear(ref_loss_db) * dist.powf(-ple))
}

/// Angles and distances of the three links.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGeometry {
    /// AoD at the BS toward the IRS.
    pub aod_bs: f64,
    /// Elevation / azimuth AoA at the IRS from the BS.
    pub aoa_irs_elev: f64,
    pub aoa_irs_azim: f64,
    /// AoD at the BS toward the UE.
    pub aod_bs_ue: f64,
    /// AoA at the UE from the BS.
    pub aoa_ue_bs: f64,
    /// Elevation / azimuth AoD at the IRS toward the UE.
    pub aod_irs_elev: f64,
    pub aod_irs_azim: f64,
    /// AoA at the UE from the IRS.
    pub aoa_ue_irs: f64,
    pub dist_bu: f64,
    pub dist_br: f64,
    pub dist_ur: f64,
}

fn direction(from: [f64; 3], to: [f64; 3]) -> ([f64; 3], f64) {
    let d = [to[0] - from[0], to[1] - from[1], to[2] - from[2]];
    let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    ([d[0] / len, d[1] / len, d[2] / len], len)
}

fn ula_angle(u: [f64; 3]) -> f64 {
    u[1].clamp(-1.0, 1.0).asin()
}

fn upa_angles(u: [f64; 3]) -> (f64, f64) {
    (u[2].clamp(-1.0, 1.0).acos(), u[1].atan2(u[0]))
}

impl LinkGeometry {
    pub fn from_positions(bs: [f64; 3], irs: [f64; 3], ue: [f64; 3]) -> Result<Self> {
        let (u_br, dist_br) = direction(bs, irs);
        let (u_bu, dist_bu) = direction(bs, ue);
        let (u_ru, dist_ur) = direction(irs, ue);
        for (name, d) in [("BS-IRS", dist_br), ("BS-UE", dist_bu), ("IRS-UE", dist_ur)] {
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Domain(format!("{name} distance must be positive, got {d}")));
            }
        }
        let neg = |u: [f64; 3]| [-u[0], -u[1], -u[2]];
        // The IRS sees the BS along -u_br.
        let (aoa_irs_elev, aoa_irs_azim) = upa_angles(neg(u_br));
        let (aod_irs_elev, aod_irs_azim) = upa_angles(u_ru);
        Ok(LinkGeometry {
            aod_bs: ula_angle(u_br),
            aoa_irs_elev,
            aoa_irs_azim,
            aod_bs_ue: ula_angle(u_bu),
            aoa_ue_bs: ula_angle(neg(u_bu)),
            aod_irs_elev,
            aod_irs_azim,
            aoa_ue_irs: ula_angle(neg(u_ru)),
            dist_bu,
            dist_br,
            dist_ur,
        })
    }

    pub fn from_config(cfg: &SystemConfig) -> Result<Self> {
        Self::from_positions(cfg.bs_pos, cfg.irs_pos, cfg.ue_pos)
    }
}

/// Frame-invariant part of the channel ensemble.
#[derive(Debug, Clone)]
pub struct StaticChannelState {
    /// BS-IRS channel G, N_t×N.
    pub g_mat: CMat,
    /// Unit-modulus LoS component of the BS-UE channel, N_t×N_r.
    pub los_bu: CMat,
    /// Unit-modulus LoS component of the IRS-UE channel, N×N_r.
    pub los_ur: CMat,
    pub gain_bu: f64,
    pub gain_br: f64,
    pub gain_ur: f64,
    /// Normalized Rician factor κ.
    pub kappa: f64,
}

impl StaticChannelState {
    pub fn n_tx(&self) -> usize {
        self.g_mat.nrows()
    }

    pub fn n_irs(&self) -> usize {
        self.g_mat.ncols()
    }

    pub fn n_rx(&self) -> usize {
        self.los_bu.ncols()
    }

    pub fn kappa_perp(&self) -> f64 {
        (1.0 - self.kappa * self.kappa).max(0.0).sqrt()
    }

    /// Copy with the BS-IRS channel scaled by `factor` (0 removes the IRS path).
    pub fn with_reflection_scaled(&self, factor: f64) -> Self {
        let mut s = self.clone();
        s.g_mat *= Complex64::new(factor, 0.0);
        s
    }
}

/// Builds G, the LoS matrices and the large-scale gains from geometry.
pub fn build_static_state(geom: &LinkGeometry, cfg: &SystemConfig) -> Result<StaticChannelState> {
    let d = cfg.element_spacing_ratio;
    let gain_br = path_loss(geom.dist_br, cfg.ple_br, cfg.ref_loss_db)?;
    let gain_bu = path_loss(geom.dist_bu, cfg.ple_bu, cfg.ref_loss_db)?;
    let gain_ur = path_loss(geom.dist_ur, cfg.ple_ur, cfg.ref_loss_db)?;

    let a = steering_bs(geom.aod_bs, cfg.n_tx, d);
    let b = steering_irs(geom.aoa_irs_elev, geom.aoa_irs_azim, cfg.irs_rows, cfg.irs_cols, d);
    let g_mat = (&a * b.adjoint()) * Complex64::new(gain_br.sqrt(), 0.0);

    let a_bu = steering_bs(geom.aod_bs_ue, cfg.n_tx, d);
    let ue_from_bs = steering_bs(geom.aoa_ue_bs, cfg.n_rx, d);
    let los_bu = &a_bu * ue_from_bs.adjoint();

    let b_ru = steering_irs(geom.aod_irs_elev, geom.aod_irs_azim, cfg.irs_rows, cfg.irs_cols, d);
    let ue_from_irs = steering_bs(geom.aoa_ue_irs, cfg.n_rx, d);
    let los_ur = &b_ru * ue_from_irs.adjoint();

    Ok(StaticChannelState { g_mat, los_bu, los_ur, gain_bu, gain_br, gain_ur, kappa: cfg.rician_kappa })
}

/// NLoS (Rayleigh) components of one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSample {
    /// H̃_d[t], N_t×N_r.
    pub nlos_bu: CMat,
    /// H̃_r[t], N×N_r.
    pub nlos_ur: CMat,
    pub slot_index: usize,
}

fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, variance: f64, rng: &mut R) -> CMat {
    // Column-major fill order, fixed so streams are reproducible.
    CMat::from_fn(rows, cols, |_, _| complex_gaussian(rng, variance))
}

impl ChannelSample {
    /// Slot-0 state with i.i.d. CN(0, 1) entries.
    pub fn initial<R: Rng + ?Sized>(n_tx: usize, n_rx: usize, n_irs: usize, rng_bu: &mut R, rng_ur: &mut R) -> Self {
        ChannelSample {
            nlos_bu: gaussian_matrix(n_tx, n_rx, 1.0, rng_bu),
            nlos_ur: gaussian_matrix(n_irs, n_rx, 1.0, rng_ur),
            slot_index: 0,
        }
    }
}

fn ar_step<R: Rng + ?Sized>(prev: &CMat, rho: f64, rng: &mut R) -> CMat {
    let innovation = 1.0 - rho * rho;
    let mut next = prev * Complex64::new(rho, 0.0);
    for x in next.iter_mut() {
        *x += complex_gaussian(rng, innovation);
    }
    next
}

/// One AR(1) step `X[t] = ρ X[t-1] + E[t]`, E ~ CN(0, (1-ρ²) I), with the
/// two links drawing innovations from separate generators.
pub fn evolve_nlos_split<R: Rng + ?Sized>(prev: &ChannelSample, rho: f64, rng_bu: &mut R, rng_ur: &mut R) -> ChannelSample {
    ChannelSample {
        nlos_bu: ar_step(&prev.nlos_bu, rho, rng_bu),
        nlos_ur: ar_step(&prev.nlos_ur, rho, rng_ur),
        slot_index: prev.slot_index + 1,
    }
}

/// One AR(1) step with a single generator (direct link drawn first).
pub fn evolve_nlos<R: Rng + ?Sized>(prev: &ChannelSample, rho: f64, rng: &mut R) -> ChannelSample {
    let nlos_bu = ar_step(&prev.nlos_bu, rho, rng);
    let nlos_ur = ar_step(&prev.nlos_ur, rho, rng);
    ChannelSample { nlos_bu, nlos_ur, slot_index: prev.slot_index + 1 }
}

/// Full channels `H = √L (κ H̄ + √(1-κ²) H̃)` for both UE links.
pub fn assemble_channel(st: &StaticChannelState, sample: &ChannelSample, kappa: f64) -> Result<(CMat, CMat)> {
    if sample.nlos_bu.shape() != st.los_bu.shape() || sample.nlos_ur.shape() != st.los_ur.shape() {
        return Err(Error::DimensionMismatch(format!(
            "sample shapes {:?}/{:?} vs LoS shapes {:?}/{:?}",
            sample.nlos_bu.shape(),
            sample.nlos_ur.shape(),
            st.los_bu.shape(),
            st.los_ur.shape()
        )));
    }
    let perp = (1.0 - kappa * kappa).max(0.0).sqrt();
    let mix = |gain: f64, los: &CMat, nlos: &CMat| {
        let g = gain.sqrt();
        los * Complex64::new(g * kappa, 0.0) + nlos * Complex64::new(g * perp, 0.0)
    };
    Ok((mix(st.gain_bu, &st.los_bu, &sample.nlos_bu), mix(st.gain_ur, &st.los_ur, &sample.nlos_ur)))
}

/// Generates one series: slot 0 plus `slots` AR steps.
pub fn generate_series<R: Rng + ?Sized>(
    n_tx: usize,
    n_rx: usize,
    n_irs: usize,
    slots: usize,
    rho: f64,
    rng_bu: &mut R,
    rng_ur: &mut R,
) -> Vec<ChannelSample> {
    let mut out = Vec::with_capacity(slots + 1);
    out.push(ChannelSample::initial(n_tx, n_rx, n_irs, rng_bu, rng_ur));
    for _ in 0..slots {
        let next = evolve_nlos_split(out.last().expect("non-empty"), rho, rng_bu, rng_ur);
        out.push(next);
    }
    out
}

/// Synthesized time-series channel samples for data-driven fitness.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSampleBank {
    /// `n_series` sequences of `slots_per_frame + 1` slots (slot 0 first).
    pub series: Vec<Vec<ChannelSample>>,
    pub rho: f64,
}

impl ChannelSampleBank {
    pub fn n_series(&self) -> usize {
        self.series.len()
    }

    pub fn slots_per_frame(&self) -> usize {
        self.series.first().map_or(0, |s| s.len().saturating_sub(1))
    }

    /// Total number of usable samples L_B (slot 0 excluded).
    pub fn len(&self) -> usize {
        self.n_series() * self.slots_per_frame()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Maps a flat sample index (series-major) to `(series, slot)`, slot ≥ 1.
    pub fn locate(&self, index: usize) -> Option<(usize, usize)> {
        let t = self.slots_per_frame();
        if t == 0 || index >= self.len() {
            return None;
        }
        Some((index / t, index % t + 1))
    }

    /// `(outdated, current)` NLoS states for a flat index.
    pub fn pair(&self, index: usize) -> Option<(&ChannelSample, &ChannelSample)> {
        let (s, t) = self.locate(index)?;
        let series = &self.series[s];
        Some((&series[t - 1], &series[t]))
    }

    /// Builds a bank in which every series is a copy of `series`, with
    /// correlation label `rho`.
    pub fn replicate(series: Vec<ChannelSample>, copies: usize, rho: f64) -> Self {
        ChannelSampleBank { series: vec![series; copies], rho }
    }
}

/// Generates a bank of `n_samples / slots_per_frame` series for the given ρ.
/// Series `s` draws from streams derived from `(seed, s)`.
pub fn generate_sample_bank_with_rho(st: &StaticChannelState, cfg: &SystemConfig, rho: f64, seed: u64) -> Result<ChannelSampleBank> {
    if cfg.n_samples % cfg.slots_per_frame != 0 {
        return Err(Error::InvalidConfig("T must divide L_B".into()));
    }
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::Domain(format!("correlation must lie in [-1, 1], got {rho}")));
    }
    let series = (0..cfg.n_series())
        .map(|s| {
            let mut rb: SimRng = rng::stream(seed, Domain::BankDirect, s as u64);
            let mut rr: SimRng = rng::stream(seed, Domain::BankReflect, s as u64);
            generate_series(st.n_tx(), st.n_rx(), st.n_irs(), cfg.slots_per_frame, rho, &mut rb, &mut rr)
        })
        .collect();
    Ok(ChannelSampleBank { series, rho })
}

/// Sample bank with ρ = J₀(2π f̄_d) from the config.
pub fn generate_sample_bank(st: &StaticChannelState, cfg: &SystemConfig, seed: u64) -> Result<ChannelSampleBank> {
    generate_sample_bank_with_rho(st, cfg, jakes_rho(cfg.norm_doppler), seed)
}
