//! Shared fixtures for the kernel benchmarks.

use twotime_core::channel::{build_static_state, generate_sample_bank, LinkGeometry, StaticChannelState};
use twotime_core::fitness::{SampleFitnessContext, ScsiContext};
use twotime_core::rng::{stream, Domain};
use twotime_core::{ReflectionConfig, Result, SystemConfig};

pub struct Fixture {
    pub cfg: SystemConfig,
    pub st: StaticChannelState,
    pub samples: SampleFitnessContext,
    pub scsi: ScsiContext,
    pub theta: ReflectionConfig,
}

impl Fixture {
    pub fn new(cfg: SystemConfig, seed: u64) -> Result<Self> {
        let st = build_static_state(&LinkGeometry::from_config(&cfg)?, &cfg)?;
        let samples = SampleFitnessContext::new(generate_sample_bank(&st, &cfg, seed)?, st.clone(), &cfg)?;
        let scsi = ScsiContext::new(st.clone(), cfg.n_streams)?;
        let theta = ReflectionConfig::random(cfg.n_irs(), &mut stream(seed, Domain::RandomPhase, 0));
        Ok(Fixture { cfg, st, samples, scsi, theta })
    }

    /// Default system with a bank of `n_samples` samples.
    pub fn default_with_samples(n_samples: usize, seed: u64) -> Result<Self> {
        Self::new(SystemConfig { n_samples, ..SystemConfig::default() }, seed)
    }
}
