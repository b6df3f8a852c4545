//! End-to-end evaluation of IRS schemes on fresh channel frames, and the
//! optimizers that produce their phase configurations.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::channel::{generate_sample_bank, generate_series, jakes_rho, StaticChannelState};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::fitness::{FullBatchFitness, LboFitness, MbsFitness, SampleFitnessContext, ScsiContext, SpgmFitness, ThetaChannel};
use crate::linalg::{mean_and_stderr, CMat, KahanSum};
use crate::pso::{init_swarm, run, Fitness, RunOutcome};
use crate::rng::{self, Domain};
use crate::transceiver::{svd_basis, zf_slot_rate, PrecoderState, ReflectionConfig, ReflectionPath, SlotPower, RANK_TOLERANCE};
use crate::waterfill::waterfill;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeTag {
    MbsPso,
    LboPso,
    FullPso,
    Spgm,
    RandomPhase,
    NoIrs,
    SvdOnly,
}

impl SchemeTag {
    pub const ALL: [SchemeTag; 7] = [SchemeTag::MbsPso, SchemeTag::LboPso, SchemeTag::FullPso, SchemeTag::Spgm, SchemeTag::RandomPhase, SchemeTag::NoIrs, SchemeTag::SvdOnly];

    pub fn name(self) -> &'static str {
        match self {
            SchemeTag::MbsPso => "MbsPso",
            SchemeTag::LboPso => "LboPso",
            SchemeTag::FullPso => "FullPso",
            SchemeTag::Spgm => "Spgm",
            SchemeTag::RandomPhase => "RandomPhase",
            SchemeTag::NoIrs => "NoIrs",
            SchemeTag::SvdOnly => "SvdOnly",
        }
    }

    /// Does this scheme run a particle swarm?
    pub fn is_pso(self) -> bool {
        matches!(self, SchemeTag::MbsPso | SchemeTag::LboPso | SchemeTag::FullPso | SchemeTag::Spgm)
    }
}

impl fmt::Display for SchemeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeTag::ALL.iter().copied().find(|t| t.name().eq_ignore_ascii_case(s)).ok_or_else(|| Error::Domain(format!("unknown scheme `{s}`")))
    }
}

/// A scheme with its phase configuration (absent for NoIrs).
#[derive(Debug, Clone, PartialEq)]
pub struct Scheme {
    pub tag: SchemeTag,
    pub theta: Option<ReflectionConfig>,
}

impl Scheme {
    pub fn new(tag: SchemeTag, theta: Option<ReflectionConfig>) -> Result<Self> {
        if (tag == SchemeTag::NoIrs) != theta.is_none() {
            return Err(Error::Domain(format!("{tag} {} a phase configuration", if theta.is_some() { "must not carry" } else { "needs" })));
        }
        Ok(Scheme { tag, theta })
    }

    pub fn no_irs() -> Self {
        Scheme { tag: SchemeTag::NoIrs, theta: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AarReport {
    pub mean_rate: f64,
    /// Standard error of the mean, computed from per-frame averages.
    pub stderr: f64,
    pub n_frames: usize,
    pub per_slot_rates: Option<Vec<f64>>,
    pub wall_time_per_iter: Option<f64>,
}

/// SVD transmission without zero forcing: receive combiners from the
/// outdated channel, interference treated as noise.
///
/// `C = Uᴴ Ȟᴴ[t] V`, rate `Σ_m log₂(1 + P_m |C_mm|² / (Σ_{k≠m} P_k |C_mk|² + σ²))`.
pub fn svd_only_rate(precoder_full: &PrecoderState, h_eff_current: &CMat, powers: &[f64], noise_var: f64) -> Result<f64> {
    let m = precoder_full.n_streams();
    if powers.len() != m || h_eff_current.shape() != (precoder_full.v_mat.nrows(), precoder_full.u_mat.nrows()) {
        return Err(Error::DimensionMismatch(format!("{} powers, channel {:?}, precoder {m} streams", powers.len(), h_eff_current.shape())));
    }
    let c = precoder_full.u_mat.adjoint() * (h_eff_current.adjoint() * &precoder_full.v_mat);
    let mut rate = 0.0;
    for i in 0..m {
        let signal = powers[i] * c[(i, i)].norm_sqr();
        let interference: f64 = (0..m).filter(|&k| k != i).map(|k| powers[k] * c[(i, k)].norm_sqr()).sum();
        rate += (1.0 + signal / (interference + noise_var)).log2();
    }
    Ok(rate)
}

/// Water-filled SvdOnly rate for one slot; power follows the outdated
/// singular values.
pub fn svd_only_slot_rate(h_outdated: &CMat, h_current: &CMat, m: usize, power: SlotPower) -> Result<f64> {
    let full = svd_basis(h_outdated, m)?;
    let top = full.singular_values[0];
    let active = full.singular_values.iter().take_while(|s| top > 0.0 && **s > RANK_TOLERANCE * top).count();
    if active == 0 {
        return Ok(0.0);
    }
    let pre = full.truncated(active);
    let levels: Vec<f64> = pre.singular_values.iter().map(|s| power.noise_var / (s * s)).collect();
    let alloc = waterfill(&levels, power.total_power)?;
    svd_only_rate(&pre, h_current, &alloc.powers, power.noise_var)
}

/// Evaluates a scheme on `n_frames` fresh frames at the configured Doppler.
pub fn evaluate_scheme(scheme: &Scheme, st: &StaticChannelState, cfg: &SystemConfig, n_frames: usize, seed: u64) -> Result<AarReport> {
    evaluate_frames(scheme, st, cfg, n_frames, seed, false)
}

/// As [`evaluate_scheme`], also returning every slot rate in frame order.
pub fn evaluate_scheme_detailed(scheme: &Scheme, st: &StaticChannelState, cfg: &SystemConfig, n_frames: usize, seed: u64) -> Result<AarReport> {
    evaluate_frames(scheme, st, cfg, n_frames, seed, true)
}

fn evaluate_frames(scheme: &Scheme, st: &StaticChannelState, cfg: &SystemConfig, n_frames: usize, seed: u64, keep: bool) -> Result<AarReport> {
    if n_frames == 0 {
        return Err(Error::Domain("need at least one evaluation frame".into()));
    }
    let scheme = Scheme::new(scheme.tag, scheme.theta.clone())?;
    let n = st.n_irs();
    let (state, theta) = match &scheme.theta {
        Some(t) => (st.clone(), t.clone()),
        None => (st.with_reflection_scaled(0.0), ReflectionConfig::zeros(n)),
    };
    let tc = ThetaChannel::new(&state, &ReflectionPath::from_g(&state.g_mat), &theta)?;
    let rho = jakes_rho(cfg.norm_doppler);
    let power = SlotPower { total_power: cfg.total_power_w(), noise_var: cfg.noise_power_w(), mode: cfg.power_csi_mode };
    let m = cfg.n_streams;
    let slots = cfg.slots_per_frame;
    let svd_only = scheme.tag == SchemeTag::SvdOnly;

    let frames: Vec<Vec<f64>> = (0..n_frames)
        .into_par_iter()
        .map(|f| {
            let mut rb = rng::stream(seed, Domain::EvalDirect, f as u64);
            let mut rr = rng::stream(seed, Domain::EvalReflect, f as u64);
            let series = generate_series(st.n_tx(), st.n_rx(), n, slots, rho, &mut rb, &mut rr);
            let mut rates = Vec::with_capacity(slots);
            let mut prev = tc.effective(&series[0]);
            for smp in &series[1..] {
                let cur = tc.effective(smp);
                rates.push(if svd_only { svd_only_slot_rate(&prev, &cur, m, power)? } else { zf_slot_rate(&prev, &cur, m, power)? });
                prev = cur;
            }
            Ok(rates)
        })
        .collect::<Result<_>>()?;

    let frame_means: Vec<f64> = frames.iter().map(|r| r.iter().copied().collect::<KahanSum>().mean()).collect();
    let (mean_rate, stderr) = mean_and_stderr(&frame_means);
    Ok(AarReport {
        mean_rate,
        stderr,
        n_frames,
        per_slot_rates: keep.then(|| frames.concat()),
        wall_time_per_iter: None,
    })
}

/// Output of an optimizer run.
#[derive(Debug, Clone)]
pub struct Optimized {
    pub theta: ReflectionConfig,
    pub best_ever: ReflectionConfig,
    /// Global-best fitness per iteration (empty for RandomPhase).
    pub trace: Vec<f64>,
    /// Global-best phases per iteration.
    pub history: Vec<ReflectionConfig>,
    pub wall_time_per_iter: f64,
}

impl From<RunOutcome> for Optimized {
    fn from(o: RunOutcome) -> Self {
        let wall = if o.iter_seconds.is_empty() { 0.0 } else { o.iter_seconds.iter().sum::<f64>() / o.iter_seconds.len() as f64 };
        Optimized { theta: o.best, best_ever: o.best_ever, trace: o.trace, history: o.history, wall_time_per_iter: wall }
    }
}

fn swarm_search<F: Fitness>(cfg: &SystemConfig, fitness: &F, seed: u64) -> Result<Optimized> {
    let mut swarm = init_swarm(cfg, fitness, rng::stream(seed, Domain::Swarm, 0))?;
    Ok(run(&mut swarm, fitness, cfg.n_iters)?.into())
}

/// Runs the optimizer behind `tag`. Sample-based schemes draw their bank
/// from the bank streams of `seed`; every swarm starts from the same
/// initial population.
pub fn optimize_scheme(tag: SchemeTag, st: &StaticChannelState, cfg: &SystemConfig, seed: u64) -> Result<Optimized> {
    match tag {
        SchemeTag::MbsPso | SchemeTag::FullPso => {
            let bank = generate_sample_bank(st, cfg, seed)?;
            let ctx = SampleFitnessContext::new(bank, st.clone(), cfg)?;
            optimize_with_samples(tag, &ctx, seed)
        }
        SchemeTag::LboPso | SchemeTag::Spgm => {
            let ctx = ScsiContext::new(st.clone(), cfg.n_streams)?;
            if tag == SchemeTag::LboPso {
                swarm_search(cfg, &LboFitness(&ctx), seed)
            } else {
                swarm_search(cfg, &SpgmFitness(&ctx), seed)
            }
        }
        SchemeTag::RandomPhase => {
            let mut r = rng::stream(seed, Domain::RandomPhase, 0);
            let theta = ReflectionConfig::random(st.n_irs(), &mut r);
            Ok(Optimized { best_ever: theta.clone(), theta, trace: Vec::new(), history: Vec::new(), wall_time_per_iter: 0.0 })
        }
        SchemeTag::NoIrs | SchemeTag::SvdOnly => Err(Error::Domain(format!("{tag} has no phase optimizer"))),
    }
}

/// MbsPso or FullPso on a prepared sample context.
pub fn optimize_with_samples(tag: SchemeTag, ctx: &SampleFitnessContext, seed: u64) -> Result<Optimized> {
    match tag {
        SchemeTag::MbsPso => swarm_search(&ctx.cfg, &MbsFitness(ctx), seed),
        SchemeTag::FullPso => swarm_search(&ctx.cfg, &FullBatchFitness::new(ctx), seed),
        other => Err(Error::Domain(format!("{other} is not a sample-based optimizer"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_static_state, LinkGeometry};
    use crate::rng::complex_gaussian;
    use crate::transceiver::truncated_svd_precoder;
    use crate::waterfill::parallel_rate;
    use num_complex::Complex64;

    fn cfg() -> SystemConfig {
        SystemConfig { irs_rows: 4, irs_cols: 4, n_samples: 100, batch_size: 10, swarm_size: 8, n_iters: 5, ..SystemConfig::default() }
    }

    fn state(c: &SystemConfig) -> StaticChannelState {
        build_static_state(&LinkGeometry::from_config(c).unwrap(), c).unwrap()
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> CMat {
        let mut r = rng::stream(seed, Domain::Test, 3);
        CMat::from_fn(rows, cols, |_, _| complex_gaussian(&mut r, 1.0))
    }

    #[test]
    fn tags_round_trip() {
        for t in SchemeTag::ALL {
            assert_eq!(t.name().parse::<SchemeTag>().unwrap(), t);
        }
        assert!("Nope".parse::<SchemeTag>().is_err());
        assert!(Scheme::new(SchemeTag::NoIrs, Some(ReflectionConfig::zeros(2))).is_err());
        assert!(Scheme::new(SchemeTag::MbsPso, None).is_err());
    }

    #[test]
    fn deterministic_channel_has_zero_spread() {
        let c = SystemConfig { rician_kappa: 1.0, norm_doppler: 0.0, ..cfg() };
        let st = state(&c);
        let scheme = Scheme::new(SchemeTag::MbsPso, Some(ReflectionConfig::zeros(16))).unwrap();
        let r = evaluate_scheme_detailed(&scheme, &st, &c, 5, 1).unwrap();
        let rates = r.per_slot_rates.unwrap();
        assert_eq!(rates.len(), 50);
        assert!(rates.iter().all(|x| (x - rates[0]).abs() < 1e-12 * rates[0]));
        assert!(r.stderr < 1e-12 * r.mean_rate);
    }

    #[test]
    fn no_irs_equals_zero_reflection() {
        let c = cfg();
        let st = state(&c);
        let a = evaluate_scheme(&Scheme::no_irs(), &st, &c, 20, 2).unwrap();
        let mut r = rng::stream(3, Domain::Test, 0);
        let th = ReflectionConfig::random(16, &mut r);
        let b = evaluate_scheme(&Scheme::new(SchemeTag::RandomPhase, Some(th)).unwrap(), &st.with_reflection_scaled(0.0), &c, 20, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn no_irs_is_independent_of_surface_size() {
        let small = cfg();
        let big = SystemConfig { irs_rows: 8, irs_cols: 8, ..cfg() };
        let a = evaluate_scheme(&Scheme::no_irs(), &state(&small), &small, 10, 4).unwrap();
        let b = evaluate_scheme(&Scheme::no_irs(), &state(&big), &big, 10, 4).unwrap();
        assert_eq!(a.mean_rate, b.mean_rate);
    }

    #[test]
    fn svd_only_matches_zf_without_outdating() {
        let c = SystemConfig { norm_doppler: 0.0, ..cfg() };
        let st = state(&c);
        let mut r = rng::stream(5, Domain::Test, 0);
        let th = ReflectionConfig::random(16, &mut r);
        let zf = evaluate_scheme(&Scheme::new(SchemeTag::MbsPso, Some(th.clone())).unwrap(), &st, &c, 10, 6).unwrap();
        let svd = evaluate_scheme(&Scheme::new(SchemeTag::SvdOnly, Some(th)).unwrap(), &st, &c, 10, 6).unwrap();
        assert!((zf.mean_rate - svd.mean_rate).abs() < 1e-9 * zf.mean_rate);
    }

    #[test]
    fn svd_only_rate_cases() {
        let h = random_matrix(6, 4, 7);
        let p = truncated_svd_precoder(&h, 3).unwrap();
        let levels: Vec<f64> = p.singular_values.iter().map(|s| 0.2 / (s * s)).collect();
        let alloc = waterfill(&levels, 1.5).unwrap();
        let r = svd_only_rate(&p, &h, &alloc.powers, 0.2).unwrap();
        assert!((r - parallel_rate(&alloc.powers, &levels)).abs() < 1e-9);

        let p1 = truncated_svd_precoder(&h, 1).unwrap();
        let other = random_matrix(6, 4, 8);
        let g = (p1.u_mat.adjoint() * other.adjoint() * &p1.v_mat)[(0, 0)].norm_sqr();
        assert!((svd_only_rate(&p1, &other, &[2.0], 0.5).unwrap() - (1.0 + 2.0 * g / 0.5).log2()).abs() < 1e-12);
        assert!(svd_only_rate(&p1, &other, &[1.0, 1.0], 0.5).is_err());
    }

    #[test]
    fn svd_only_rate_matches_scripted_evaluation() {
        let h_old = random_matrix(4, 4, 9);
        let h_new = random_matrix(4, 4, 10);
        let p = truncated_svd_precoder(&h_old, 4).unwrap();
        let powers = [0.4, 0.3, 0.2, 0.1];
        let mut want = 0.0;
        for i in 0..4 {
            let u = p.u_mat.column(i);
            let mut terms = [0.0; 4];
            for k in 0..4 {
                let v = p.v_mat.column(k);
                let mut acc = Complex64::new(0.0, 0.0);
                for a in 0..4 {
                    for b in 0..4 {
                        acc += u[a].conj() * h_new[(b, a)].conj() * v[b];
                    }
                }
                terms[k] = powers[k] * acc.norm_sqr();
            }
            let interf: f64 = (0..4).filter(|&k| k != i).map(|k| terms[k]).sum();
            want += (1.0 + terms[i] / (interf + 0.3)).log2();
        }
        assert!((svd_only_rate(&p, &h_new, &powers, 0.3).unwrap() - want).abs() < 1e-9);
    }

    #[test]
    fn evaluation_is_seed_deterministic() {
        let c = cfg();
        let st = state(&c);
        let s = Scheme::new(SchemeTag::RandomPhase, Some(ReflectionConfig::zeros(16))).unwrap();
        assert_eq!(evaluate_scheme(&s, &st, &c, 8, 11).unwrap(), evaluate_scheme(&s, &st, &c, 8, 11).unwrap());
        assert_ne!(evaluate_scheme(&s, &st, &c, 8, 11).unwrap().mean_rate, evaluate_scheme(&s, &st, &c, 8, 12).unwrap().mean_rate);
        assert!(evaluate_scheme(&s, &st, &c, 0, 11).is_err());
    }

    #[test]
    fn evaluation_frames_differ_from_bank() {
        // Frame f and bank series f are seeded from different domains.
        let c = cfg();
        let st = state(&c);
        let bank = generate_sample_bank(&st, &c, 13).unwrap();
        let mut rb = rng::stream(13, Domain::EvalDirect, 0);
        let mut rr = rng::stream(13, Domain::EvalReflect, 0);
        let frame = generate_series(st.n_tx(), st.n_rx(), st.n_irs(), c.slots_per_frame, bank.rho, &mut rb, &mut rr);
        assert!(bank.series.iter().all(|s| s[0] != frame[0]));
    }

    #[test]
    fn optimizers() {
        let c = cfg();
        let st = state(&c);
        let a = optimize_scheme(SchemeTag::RandomPhase, &st, &c, 14).unwrap();
        let b = optimize_scheme(SchemeTag::RandomPhase, &st, &c, 14).unwrap();
        assert_eq!(a.theta, b.theta);
        assert!(a.trace.is_empty());
        for tag in [SchemeTag::MbsPso, SchemeTag::FullPso, SchemeTag::Spgm] {
            let o = optimize_scheme(tag, &st, &c, 15).unwrap();
            assert_eq!(o.trace.len(), 5);
            assert!(o.trace.windows(2).all(|w| w[1] >= w[0]), "{tag}");
        }
        let o = optimize_scheme(SchemeTag::LboPso, &st, &c, 15).unwrap();
        assert!(o.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(optimize_scheme(SchemeTag::NoIrs, &st, &c, 15).is_err());
    }
}
