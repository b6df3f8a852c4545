//! Named experiment sweeps written as CSV.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;

use crate::channel::{build_static_state, doppler_for_rho, LinkGeometry, StaticChannelState};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::evaluator::{evaluate_scheme, optimize_scheme, AarReport, Optimized, Scheme, SchemeTag};
use crate::rng::{self, Domain};
use crate::transceiver::ReflectionConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentName {
    Convergence,
    AarVsPower,
    AarVsElements,
    AarVsTxAntennas,
    AarVsRho,
    TimingVsElements,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 6] = [
        ExperimentName::Convergence,
        ExperimentName::AarVsPower,
        ExperimentName::AarVsElements,
        ExperimentName::AarVsTxAntennas,
        ExperimentName::AarVsRho,
        ExperimentName::TimingVsElements,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentName::Convergence => "convergence",
            ExperimentName::AarVsPower => "aar_vs_power",
            ExperimentName::AarVsElements => "aar_vs_elements",
            ExperimentName::AarVsTxAntennas => "aar_vs_txantennas",
            ExperimentName::AarVsRho => "aar_vs_rho",
            ExperimentName::TimingVsElements => "timing_vs_elements",
        }
    }

    /// Sweep values used when none are given.
    pub fn default_sweep(self, cfg: &SystemConfig) -> Vec<f64> {
        match self {
            ExperimentName::Convergence => vec![cfg.n_iters as f64],
            ExperimentName::AarVsPower => vec![10.0, 15.0, 20.0, 25.0],
            ExperimentName::AarVsElements => vec![16.0, 36.0, 64.0],
            ExperimentName::AarVsTxAntennas => vec![4.0, 8.0, 12.0, 16.0],
            ExperimentName::AarVsRho => vec![0.0, 0.5, 0.9, 1.0],
            ExperimentName::TimingVsElements => vec![16.0, 36.0, 64.0, 100.0],
        }
    }

    pub fn default_schemes(self) -> Vec<SchemeTag> {
        use SchemeTag::*;
        match self {
            ExperimentName::Convergence | ExperimentName::TimingVsElements => vec![MbsPso, LboPso, FullPso],
            ExperimentName::AarVsPower | ExperimentName::AarVsElements | ExperimentName::AarVsTxAntennas => {
                vec![MbsPso, LboPso, Spgm, RandomPhase, NoIrs]
            }
            ExperimentName::AarVsRho => vec![MbsPso, SvdOnly, NoIrs],
        }
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentName::ALL
            .iter()
            .copied()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Experiment(format!("unknown experiment `{s}` (expected one of {})", ExperimentName::ALL.map(|e| e.name()).join(", "))))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: ExperimentName,
    pub sweep_values: Vec<f64>,
    pub schemes: Vec<SchemeTag>,
    pub output_path: PathBuf,
    pub seed: u64,
    /// Evaluation frames per (sweep value, scheme).
    pub n_frames: usize,
}

impl ExperimentSpec {
    /// The experiment with its default sweep and schemes.
    pub fn new(name: ExperimentName, cfg: &SystemConfig, output_path: impl Into<PathBuf>, seed: u64, n_frames: usize) -> Self {
        ExperimentSpec { name, sweep_values: name.default_sweep(cfg), schemes: name.default_schemes(), output_path: output_path.into(), seed, n_frames }
    }

    pub fn validate(&self, cfg: &SystemConfig) -> Result<()> {
        if self.sweep_values.is_empty() {
            return Err(Error::Experiment("sweep values must not be empty".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Experiment("scheme list must not be empty".into()));
        }
        if self.n_frames == 0 {
            return Err(Error::Experiment("need at least one evaluation frame".into()));
        }
        if self.name == ExperimentName::Convergence {
            if let Some(t) = self.schemes.iter().find(|t| !t.is_pso()) {
                return Err(Error::Experiment(format!("convergence needs PSO schemes, got {t}")));
            }
        }
        for &v in &self.sweep_values {
            point_config(self.name, cfg, v)?;
        }
        Ok(())
    }
}

fn whole(name: ExperimentName, v: f64) -> Result<usize> {
    if v.is_finite() && v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(Error::Experiment(format!("{name}: sweep value {v} must be a positive integer")))
    }
}

/// Most-square `rows × cols` factorization of `n` with `rows <= cols`.
pub fn irs_shape(n: usize) -> (usize, usize) {
    let mut rows = (n as f64).sqrt() as usize;
    while rows > 1 && n % rows != 0 {
        rows -= 1;
    }
    (rows.max(1), n / rows.max(1))
}

/// Config for one sweep point.
pub fn point_config(name: ExperimentName, base: &SystemConfig, v: f64) -> Result<SystemConfig> {
    let mut cfg = base.clone();
    match name {
        ExperimentName::Convergence => cfg.n_iters = whole(name, v)?,
        ExperimentName::AarVsPower => {
            if !v.is_finite() {
                return Err(Error::Experiment(format!("{name}: power {v} dBm is not finite")));
            }
            cfg.total_power_dbm = v;
        }
        ExperimentName::AarVsElements | ExperimentName::TimingVsElements => {
            let (r, c) = irs_shape(whole(name, v)?);
            cfg.irs_rows = r;
            cfg.irs_cols = c;
        }
        ExperimentName::AarVsTxAntennas => cfg.n_tx = whole(name, v)?,
        ExperimentName::AarVsRho => {
            cfg.norm_doppler = doppler_for_rho(v).ok_or_else(|| Error::Experiment(format!("{name}: correlation {v} must lie in [0, 1]")))?;
        }
    }
    cfg.validate().map_err(|e| Error::Experiment(format!("{name} = {v}: {e}")))?;
    Ok(cfg)
}

/// One result row.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sweep_value: f64,
    pub scheme: SchemeTag,
    pub mean_rate: f64,
    pub stderr: f64,
    pub n_frames: usize,
    pub iters: usize,
    pub wall_time_per_iter_s: f64,
    pub seed: u64,
}

/// One convergence row.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub iter: usize,
    pub scheme: SchemeTag,
    pub fitness: f64,
    pub aar_estimate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentOutput {
    Sweep(Vec<SweepRow>),
    Convergence(Vec<ConvergenceRow>),
}

impl ExperimentOutput {
    pub fn len(&self) -> usize {
        match self {
            ExperimentOutput::Sweep(r) => r.len(),
            ExperimentOutput::Convergence(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// UE positions for one sweep point: the configured one, or `ue_drops`
/// uniform draws from the disk of radius `ue_drop_radius` around it.
pub fn ue_drops(cfg: &SystemConfig, seed: u64) -> Vec<[f64; 3]> {
    if cfg.ue_drop_radius <= 0.0 {
        return vec![cfg.ue_pos];
    }
    let mut r = rng::stream(seed, Domain::UeDrop, 0);
    (0..cfg.ue_drops)
        .map(|_| {
            let rad = cfg.ue_drop_radius * r.random::<f64>().sqrt();
            let ang = r.random_range(0.0..std::f64::consts::TAU);
            [cfg.ue_pos[0] + rad * ang.cos(), cfg.ue_pos[1] + rad * ang.sin(), cfg.ue_pos[2]]
        })
        .collect()
}

fn static_states(cfg: &SystemConfig, seed: u64) -> Result<Vec<StaticChannelState>> {
    ue_drops(cfg, seed)
        .into_iter()
        .map(|ue| build_static_state(&LinkGeometry::from_positions(cfg.bs_pos, cfg.irs_pos, ue)?, cfg))
        .collect()
}

/// Combines per-drop reports: mean of means, stderr of that mean.
fn combine(reports: &[AarReport]) -> (f64, f64, usize) {
    let d = reports.len() as f64;
    let mean = reports.iter().map(|r| r.mean_rate).sum::<f64>() / d;
    let se = reports.iter().map(|r| r.stderr * r.stderr).sum::<f64>().sqrt() / d;
    (mean, se, reports.iter().map(|r| r.n_frames).sum())
}

/// Optimizes and evaluates every scheme at one operating point.
pub fn run_point(cfg: &SystemConfig, schemes: &[SchemeTag], seed: u64, n_frames: usize, sweep_value: f64) -> Result<Vec<SweepRow>> {
    let states = static_states(cfg, seed)?;
    let mut per_scheme: Vec<(Vec<AarReport>, f64)> = vec![(Vec::new(), 0.0); schemes.len()];
    for (d, st) in states.iter().enumerate() {
        let drop_seed = seed.wrapping_add(d as u64);
        let mut cache: HashMap<SchemeTag, Optimized> = HashMap::new();
        for (k, &tag) in schemes.iter().enumerate() {
            let theta: Option<ReflectionConfig> = match tag {
                SchemeTag::NoIrs => None,
                _ => {
                    let source = if tag == SchemeTag::SvdOnly { SchemeTag::MbsPso } else { tag };
                    if !cache.contains_key(&source) {
                        cache.insert(source, optimize_scheme(source, st, cfg, drop_seed)?);
                    }
                    let o = &cache[&source];
                    if tag.is_pso() {
                        per_scheme[k].1 += o.wall_time_per_iter;
                    }
                    Some(o.theta.clone())
                }
            };
            per_scheme[k].0.push(evaluate_scheme(&Scheme::new(tag, theta)?, st, cfg, n_frames, drop_seed)?);
        }
    }
    Ok(schemes
        .iter()
        .zip(per_scheme)
        .map(|(&tag, (reports, wall))| {
            let (mean_rate, stderr, frames) = combine(&reports);
            SweepRow {
                sweep_value,
                scheme: tag,
                mean_rate,
                stderr,
                n_frames: frames,
                iters: if tag.is_pso() { cfg.n_iters } else { 0 },
                wall_time_per_iter_s: wall / reports.len() as f64,
                seed,
            }
        })
        .collect())
}

/// Per-iteration fitness and evaluated AAR of the global best; θ
/// evaluations are reused while the global best does not move.
pub fn convergence_rows(cfg: &SystemConfig, schemes: &[SchemeTag], seed: u64, n_frames: usize) -> Result<Vec<ConvergenceRow>> {
    let st = build_static_state(&LinkGeometry::from_config(cfg)?, cfg)?;
    let mut rows = Vec::new();
    for &tag in schemes {
        let o = optimize_scheme(tag, &st, cfg, seed)?;
        let mut last: Option<(ReflectionConfig, f64)> = None;
        for (i, (fit, theta)) in o.trace.iter().zip(&o.history).enumerate() {
            let aar = match &last {
                Some((t, a)) if t == theta => *a,
                _ => evaluate_scheme(&Scheme::new(tag, Some(theta.clone()))?, &st, cfg, n_frames, seed)?.mean_rate,
            };
            last = Some((theta.clone(), aar));
            rows.push(ConvergenceRow { iter: i + 1, scheme: tag, fitness: *fit, aar_estimate: aar });
        }
    }
    Ok(rows)
}

/// Runs the experiment and returns its rows without writing them.
pub fn collect_experiment(spec: &ExperimentSpec, cfg: &SystemConfig) -> Result<ExperimentOutput> {
    spec.validate(cfg)?;
    if spec.name == ExperimentName::Convergence {
        let mut rows = Vec::new();
        for &v in &spec.sweep_values {
            rows.extend(convergence_rows(&point_config(spec.name, cfg, v)?, &spec.schemes, spec.seed, spec.n_frames)?);
        }
        return Ok(ExperimentOutput::Convergence(rows));
    }
    let mut rows = Vec::new();
    for &v in &spec.sweep_values {
        rows.extend(run_point(&point_config(spec.name, cfg, v)?, &spec.schemes, spec.seed, spec.n_frames, v)?);
    }
    Ok(ExperimentOutput::Sweep(rows))
}

pub fn write_csv<W: Write>(out: &ExperimentOutput, w: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    match out {
        ExperimentOutput::Sweep(rows) => {
            w.write_record(["sweep_value", "scheme", "mean_rate", "stderr", "n_frames", "iters", "wall_time_per_iter_s", "seed"]).map_err(csv_err)?;
            for r in rows {
                w.write_record([
                    r.sweep_value.to_string(),
                    r.scheme.to_string(),
                    r.mean_rate.to_string(),
                    r.stderr.to_string(),
                    r.n_frames.to_string(),
                    r.iters.to_string(),
                    r.wall_time_per_iter_s.to_string(),
                    r.seed.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        ExperimentOutput::Convergence(rows) => {
            w.write_record(["iter", "scheme", "fitness", "aar_estimate"]).map_err(csv_err)?;
            for r in rows {
                w.write_record([r.iter.to_string(), r.scheme.to_string(), r.fitness.to_string(), r.aar_estimate.to_string()]).map_err(csv_err)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Runs the experiment and writes its CSV to `spec.output_path`.
pub fn run_experiment(spec: &ExperimentSpec, cfg: &SystemConfig) -> Result<ExperimentOutput> {
    let out = collect_experiment(spec, cfg)?;
    write_to(&out, &spec.output_path)?;
    Ok(out)
}

fn write_to(out: &ExperimentOutput, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    write_csv(out, BufWriter::new(f))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlopsKind {
    Mbs,
    Lbo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlopsDims {
    pub n_tx: u64,
    pub n_rx: u64,
    pub n_irs: u64,
    pub n_streams: u64,
    pub batch_size: u64,
    pub swarm_size: u64,
}

impl FlopsDims {
    pub fn from_config(cfg: &SystemConfig) -> Self {
        FlopsDims {
            n_tx: cfg.n_tx as u64,
            n_rx: cfg.n_rx as u64,
            n_irs: cfg.n_irs() as u64,
            n_streams: cfg.n_streams as u64,
            batch_size: cfg.batch_size as u64,
            swarm_size: cfg.swarm_size as u64,
        }
    }
}

/// Sample-based fitness cost per sample per particle.
pub fn flops_per_sample(d: &FlopsDims) -> u64 {
    let (nt, nr, n, m) = (d.n_tx, d.n_rx, d.n_irs, d.n_streams);
    4 * (nt + nr) * n * n + 4 * m * nt * nr + 4 * m * m * nr + (4 * m * m * m + m * m + m)
}

/// Statistics-based fitness cost per particle.
pub fn flops_per_particle_lbo(d: &FlopsDims) -> u64 {
    let (nt, nr, n) = (d.n_tx, d.n_rx, d.n_irs);
    4 * (nt + nr) * n * n + 4 * nt * nt * nr + (4 * nt * nt * nt + nt * nt + nt) + 2 * nt * nt
}

/// Per-iteration operation count: `P·L_mb·F1` or `P·F2`.
pub fn flops_estimate(kind: FlopsKind, d: &FlopsDims) -> u64 {
    match kind {
        FlopsKind::Mbs => d.swarm_size * d.batch_size * flops_per_sample(d),
        FlopsKind::Lbo => d.swarm_size * flops_per_particle_lbo(d),
    }
}

/// Per-iteration count of the full-batch search over `n_samples` samples.
pub fn flops_full_batch(d: &FlopsDims, n_samples: u64) -> u64 {
    d.swarm_size * n_samples * flops_per_sample(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dims() -> FlopsDims {
        FlopsDims { n_tx: 8, n_rx: 4, n_irs: 64, n_streams: 4, batch_size: 50, swarm_size: 200 }
    }

    #[test]
    fn flops_reference_values() {
        let d = dims();
        assert_eq!(flops_per_sample(&d), 197_652);
        assert_eq!(flops_per_particle_lbo(&d), 199_880);
        assert_eq!(flops_estimate(FlopsKind::Mbs, &d), 200 * 50 * 197_652);
        assert_eq!(flops_estimate(FlopsKind::Lbo, &d), 200 * 199_880);
        assert_eq!(flops_full_batch(&d, 5000) / flops_estimate(FlopsKind::Mbs, &d), 100);
        assert_eq!(FlopsDims::from_config(&SystemConfig::default()), d);
    }

    proptest! {
        #[test]
        fn flops_match_formula(nt in 1u64..64, nr in 1u64..16, n in 1u64..256, m in 1u64..16, lmb in 1u64..100, p in 1u64..300) {
            let d = FlopsDims { n_tx: nt, n_rx: nr, n_irs: n, n_streams: m, batch_size: lmb, swarm_size: p };
            let (ntf, nrf, nf, mf) = (nt as f64, nr as f64, n as f64, m as f64);
            let f1 = 4.0 * (ntf + nrf) * nf.powi(2) + 4.0 * mf * ntf * nrf + 4.0 * mf.powi(2) * nrf + 4.0 * mf.powi(3) + mf.powi(2) + mf;
            let f2 = 4.0 * (ntf + nrf) * nf.powi(2) + 4.0 * ntf.powi(2) * nrf + 4.0 * ntf.powi(3) + ntf.powi(2) + ntf + 2.0 * ntf.powi(2);
            prop_assert_eq!(flops_estimate(FlopsKind::Mbs, &d) as f64, p as f64 * lmb as f64 * f1);
            prop_assert_eq!(flops_estimate(FlopsKind::Lbo, &d) as f64, p as f64 * f2);
        }
    }

    #[test]
    fn irs_shapes() {
        assert_eq!(irs_shape(16), (4, 4));
        assert_eq!(irs_shape(64), (8, 8));
        assert_eq!(irs_shape(100), (10, 10));
        assert_eq!(irs_shape(12), (3, 4));
        assert_eq!(irs_shape(7), (1, 7));
    }

    #[test]
    fn names_round_trip() {
        for e in ExperimentName::ALL {
            assert_eq!(e.name().parse::<ExperimentName>().unwrap(), e);
        }
        assert!(matches!("aar_vs_moon".parse::<ExperimentName>(), Err(Error::Experiment(_))));
    }

    #[test]
    fn sweep_point_configs() {
        let base = SystemConfig::default();
        let c = point_config(ExperimentName::AarVsElements, &base, 36.0).unwrap();
        assert_eq!((c.irs_rows, c.irs_cols), (6, 6));
        let c = point_config(ExperimentName::AarVsRho, &base, 0.5).unwrap();
        assert!((crate::channel::jakes_rho(c.norm_doppler) - 0.5).abs() < 1e-9);
        assert_eq!(point_config(ExperimentName::AarVsRho, &base, 1.0).unwrap().norm_doppler, 0.0);
        assert_eq!(point_config(ExperimentName::AarVsPower, &base, 25.0).unwrap().total_power_dbm, 25.0);
        assert_eq!(point_config(ExperimentName::AarVsTxAntennas, &base, 12.0).unwrap().n_tx, 12);
        for (e, bad) in [
            (ExperimentName::AarVsRho, 1.5),
            (ExperimentName::AarVsRho, -0.2),
            (ExperimentName::AarVsElements, 0.0),
            (ExperimentName::AarVsElements, 2.5),
            (ExperimentName::AarVsTxAntennas, 2.0),
            (ExperimentName::AarVsPower, f64::NAN),
            (ExperimentName::Convergence, -3.0),
        ] {
            assert!(matches!(point_config(e, &base, bad), Err(Error::Experiment(_))), "{e} {bad}");
        }
    }

    #[test]
    fn spec_validation() {
        let cfg = SystemConfig::default();
        let mut s = ExperimentSpec::new(ExperimentName::AarVsRho, &cfg, "x.csv", 1, 10);
        assert!(s.validate(&cfg).is_ok());
        s.sweep_values.clear();
        assert!(s.validate(&cfg).is_err());
        let mut c = ExperimentSpec::new(ExperimentName::Convergence, &cfg, "x.csv", 1, 10);
        c.schemes.push(SchemeTag::NoIrs);
        assert!(c.validate(&cfg).is_err());
    }

    #[test]
    fn ue_drops_stay_in_disk() {
        let cfg = SystemConfig { ue_drop_radius: 10.0, ue_drops: 50, ..SystemConfig::default() };
        let drops = ue_drops(&cfg, 4);
        assert_eq!(drops.len(), 50);
        for p in &drops {
            let r = ((p[0] - cfg.ue_pos[0]).powi(2) + (p[1] - cfg.ue_pos[1]).powi(2)).sqrt();
            assert!(r <= 10.0 && p[2] == cfg.ue_pos[2]);
        }
        assert_eq!(drops, ue_drops(&cfg, 4));
        assert_eq!(ue_drops(&SystemConfig::default(), 4), vec![SystemConfig::default().ue_pos]);
    }
}
