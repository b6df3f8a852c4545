//! Simulator configuration.
//!
//! The on-disk format is a flat UTF-8 `key = value` document. Blank lines and
//! `#` comments are ignored, keys use the lower_snake_case field names of
//! [`SystemConfig`], and any key that is absent keeps its default. Vector
//! values (positions) are three comma-separated numbers, optionally wrapped
//! in brackets: `ue_pos = [100, 10, 1]`.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Which equivalent channel feeds the per-slot water-filling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PowerCsiMode {
    /// Inverse-covariance diagonal of the current slot's equivalent channel.
    #[default]
    Current,
    /// Inverse-covariance diagonal of the previous slot's equivalent channel.
    Delayed,
}

impl fmt::Display for PowerCsiMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PowerCsiMode::Current => "current",
            PowerCsiMode::Delayed => "delayed",
        })
    }
}

impl FromStr for PowerCsiMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "current" => Ok(PowerCsiMode::Current),
            "delayed" => Ok(PowerCsiMode::Delayed),
            other => Err(format!("expected `current` or `delayed`, got `{other}`")),
        }
    }
}

/// Converts a dB quantity to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts a dBm power to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm) / 1000.0
}

/// All physical and algorithmic parameters of a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub n_tx: usize,
    pub n_rx: usize,
    pub n_streams: usize,
    pub irs_rows: usize,
    pub irs_cols: usize,
    /// Normalized Rician factor κ, with κ² the LoS power fraction.
    pub rician_kappa: f64,
    pub norm_doppler: f64,
    pub element_spacing_ratio: f64,
    pub ple_bu: f64,
    pub ple_br: f64,
    pub ple_ur: f64,
    pub ref_loss_db: f64,
    pub bs_pos: [f64; 3],
    pub irs_pos: [f64; 3],
    pub ue_pos: [f64; 3],
    pub total_power_dbm: f64,
    pub noise_power_dbm: f64,
    pub slots_per_frame: usize,
    pub n_samples: usize,
    pub batch_size: usize,
    pub swarm_size: usize,
    pub n_iters: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub rng_seed: u64,
    pub power_csi_mode: PowerCsiMode,
    /// Radius of the horizontal disk around `ue_pos` from which UE drops
    /// are sampled. Zero keeps the UE fixed.
    pub ue_drop_radius: f64,
    /// Number of UE drops per sweep point when `ue_drop_radius > 0`.
    pub ue_drops: usize,
}

/// Rician K-factor of the reference scenario (LoS-to-scatter power ratio).
pub const DEFAULT_RICIAN_K: f64 = 3.0;

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            n_tx: 8,
            n_rx: 4,
            n_streams: 4,
            irs_rows: 8,
            irs_cols: 8,
            rician_kappa: (DEFAULT_RICIAN_K / (1.0 + DEFAULT_RICIAN_K)).sqrt(),
            norm_doppler: 0.01,
            element_spacing_ratio: 0.5,
            ple_bu: 3.6,
            ple_br: 2.2,
            ple_ur: 2.2,
            ref_loss_db: -30.0,
            bs_pos: [0.0, 0.0, 5.0],
            irs_pos: [100.0, 0.0, 5.0],
            ue_pos: [100.0, 10.0, 1.0],
            total_power_dbm: 20.0,
            noise_power_dbm: -80.0,
            slots_per_frame: 10,
            n_samples: 5000,
            batch_size: 50,
            swarm_size: 200,
            n_iters: 100,
            inertia: 0.9,
            cognitive: 1.49445,
            social: 1.49445,
            rng_seed: 1,
            power_csi_mode: PowerCsiMode::Current,
            ue_drop_radius: 0.0,
            ue_drops: 1,
        }
    }
}

const KEYS: &[&str] = &[
    "n_tx",
    "n_rx",
    "n_streams",
    "irs_rows",
    "irs_cols",
    "rician_kappa",
    "norm_doppler",
    "element_spacing_ratio",
    "ple_bu",
    "ple_br",
    "ple_ur",
    "ref_loss_db",
    "bs_pos",
    "irs_pos",
    "ue_pos",
    "total_power_dbm",
    "noise_power_dbm",
    "slots_per_frame",
    "n_samples",
    "batch_size",
    "swarm_size",
    "n_iters",
    "inertia",
    "cognitive",
    "social",
    "rng_seed",
    "power_csi_mode",
    "ue_drop_radius",
    "ue_drops",
];

impl SystemConfig {
    /// Number of IRS elements N.
    pub fn n_irs(&self) -> usize {
        self.irs_rows * self.irs_cols
    }

    pub fn total_power_w(&self) -> f64 {
        dbm_to_watts(self.total_power_dbm)
    }

    pub fn noise_power_w(&self) -> f64 {
        dbm_to_watts(self.noise_power_dbm)
    }

    /// √(1 − κ²), the NLoS amplitude weight.
    pub fn kappa_perp(&self) -> f64 {
        (1.0 - self.rician_kappa * self.rician_kappa).max(0.0).sqrt()
    }

    /// Number of mini-batches N_B.
    pub fn n_batches(&self) -> usize {
        self.n_samples / self.batch_size
    }

    /// Number of independent time series in a sample bank.
    pub fn n_series(&self) -> usize {
        self.n_samples / self.slots_per_frame
    }

    /// Checks every cross-field invariant.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_tx == 0 || self.n_rx == 0 {
            return fail("antenna counts must be at least 1".into());
        }
        if self.n_streams == 0 || self.n_streams > self.n_tx.min(self.n_rx) {
            return fail(format!(
                "n_streams must satisfy 1 <= M <= min(n_tx, n_rx) = {} (got {})",
                self.n_tx.min(self.n_rx),
                self.n_streams
            ));
        }
        if self.irs_rows == 0 || self.irs_cols == 0 {
            return fail("irs_rows and irs_cols must be at least 1".into());
        }
        if !(self.rician_kappa.is_finite() && (0.0..=1.0).contains(&self.rician_kappa)) {
            return fail(format!("rician_kappa must lie in [0, 1] so that kappa^2 <= 1 (got {})", self.rician_kappa));
        }
        if !(self.norm_doppler.is_finite() && self.norm_doppler >= 0.0) {
            return fail("norm_doppler must be finite and >= 0".into());
        }
        if !(self.element_spacing_ratio.is_finite() && self.element_spacing_ratio > 0.0) {
            return fail("element_spacing_ratio must be positive".into());
        }
        for (name, v) in [
            ("ple_bu", self.ple_bu),
            ("ple_br", self.ple_br),
            ("ple_ur", self.ple_ur),
            ("ref_loss_db", self.ref_loss_db),
            ("inertia", self.inertia),
            ("cognitive", self.cognitive),
            ("social", self.social),
            ("ue_drop_radius", self.ue_drop_radius),
        ] {
            if !v.is_finite() {
                return fail(format!("{name} must be finite"));
            }
        }
        if self.ue_drop_radius < 0.0 {
            return fail("ue_drop_radius must be >= 0".into());
        }
        for (name, p) in [("bs_pos", self.bs_pos), ("irs_pos", self.irs_pos), ("ue_pos", self.ue_pos)] {
            if p.iter().any(|c| !c.is_finite()) {
                return fail(format!("{name} must have finite coordinates"));
            }
        }
        for (name, dbm) in [("total_power_dbm", self.total_power_dbm), ("noise_power_dbm", self.noise_power_dbm)] {
            let w = dbm_to_watts(dbm);
            if !dbm.is_finite() || !(w.is_finite() && w > 0.0) {
                return fail(format!("{name} must convert to a positive finite power in watts"));
            }
        }
        for (name, v) in [
            ("slots_per_frame", self.slots_per_frame),
            ("n_samples", self.n_samples),
            ("batch_size", self.batch_size),
            ("swarm_size", self.swarm_size),
            ("n_iters", self.n_iters),
            ("ue_drops", self.ue_drops),
        ] {
            if v == 0 {
                return fail(format!("{name} must be at least 1"));
            }
        }
        if self.n_samples % self.batch_size != 0 {
            return fail(format!(
                "L_mb must divide L_B: batch_size {} does not divide n_samples {}",
                self.batch_size, self.n_samples
            ));
        }
        if self.n_samples % self.slots_per_frame != 0 {
            return fail(format!(
                "T must divide L_B: slots_per_frame {} does not divide n_samples {}",
                self.slots_per_frame, self.n_samples
            ));
        }
        Ok(())
    }

    /// Parses and validates a config document.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut seen: HashMap<&str, (usize, &str)> = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::ConfigParse {
                line: line_no,
                key: line.to_string(),
                msg: "expected `key = value`".into(),
            })?;
            let key = key.trim();
            let value = value.trim();
            let Some(&canonical) = KEYS.iter().find(|k| **k == key) else {
                return Err(Error::ConfigParse { line: line_no, key: key.to_string(), msg: "unknown key".into() });
            };
            if seen.insert(canonical, (line_no, value)).is_some() {
                return Err(Error::ConfigParse { line: line_no, key: key.to_string(), msg: "duplicate key".into() });
            }
        }

        let mut cfg = SystemConfig::default();
        let mut streams_given = false;
        for (&key, &(line, value)) in &seen {
            let err = |msg: String| Error::ConfigParse { line, key: key.to_string(), msg };
            let uint = || value.parse::<usize>().map_err(|e| err(format!("expected unsigned integer: {e}")));
            let float = || value.parse::<f64>().map_err(|e| err(format!("expected number: {e}")));
            match key {
                "n_tx" => cfg.n_tx = uint()?,
                "n_rx" => cfg.n_rx = uint()?,
                "n_streams" => {
                    cfg.n_streams = uint()?;
                    streams_given = true;
                }
                "irs_rows" => cfg.irs_rows = uint()?,
                "irs_cols" => cfg.irs_cols = uint()?,
                "rician_kappa" => cfg.rician_kappa = float()?,
                "norm_doppler" => cfg.norm_doppler = float()?,
                "element_spacing_ratio" => cfg.element_spacing_ratio = float()?,
                "ple_bu" => cfg.ple_bu = float()?,
                "ple_br" => cfg.ple_br = float()?,
                "ple_ur" => cfg.ple_ur = float()?,
                "ref_loss_db" => cfg.ref_loss_db = float()?,
                "bs_pos" => cfg.bs_pos = parse_vec3(value).map_err(err)?,
                "irs_pos" => cfg.irs_pos = parse_vec3(value).map_err(err)?,
                "ue_pos" => cfg.ue_pos = parse_vec3(value).map_err(err)?,
                "total_power_dbm" => cfg.total_power_dbm = float()?,
                "noise_power_dbm" => cfg.noise_power_dbm = float()?,
                "slots_per_frame" => cfg.slots_per_frame = uint()?,
                "n_samples" => cfg.n_samples = uint()?,
                "batch_size" => cfg.batch_size = uint()?,
                "swarm_size" => cfg.swarm_size = uint()?,
                "n_iters" => cfg.n_iters = uint()?,
                "inertia" => cfg.inertia = float()?,
                "cognitive" => cfg.cognitive = float()?,
                "social" => cfg.social = float()?,
                "rng_seed" => cfg.rng_seed = value.parse::<u64>().map_err(|e| err(format!("expected u64: {e}")))?,
                "power_csi_mode" => cfg.power_csi_mode = value.parse().map_err(err)?,
                "ue_drop_radius" => cfg.ue_drop_radius = float()?,
                "ue_drops" => cfg.ue_drops = uint()?,
                _ => unreachable!("key list and match arms disagree"),
            }
        }
        // M defaults to N_r, so overriding n_rx alone stays valid.
        if !streams_given {
            cfg.n_streams = cfg.n_rx;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Serializes every field; `from_text` of the output reproduces `self`.
    pub fn to_text(&self) -> String {
        let v3 = |p: [f64; 3]| format!("[{}, {}, {}]", p[0], p[1], p[2]);
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("n_tx", self.n_tx.to_string());
        put("n_rx", self.n_rx.to_string());
        put("n_streams", self.n_streams.to_string());
        put("irs_rows", self.irs_rows.to_string());
        put("irs_cols", self.irs_cols.to_string());
        put("rician_kappa", self.rician_kappa.to_string());
        put("norm_doppler", self.norm_doppler.to_string());
        put("element_spacing_ratio", self.element_spacing_ratio.to_string());
        put("ple_bu", self.ple_bu.to_string());
        put("ple_br", self.ple_br.to_string());
        put("ple_ur", self.ple_ur.to_string());
        put("ref_loss_db", self.ref_loss_db.to_string());
        put("bs_pos", v3(self.bs_pos));
        put("irs_pos", v3(self.irs_pos));
        put("ue_pos", v3(self.ue_pos));
        put("total_power_dbm", self.total_power_dbm.to_string());
        put("noise_power_dbm", self.noise_power_dbm.to_string());
        put("slots_per_frame", self.slots_per_frame.to_string());
        put("n_samples", self.n_samples.to_string());
        put("batch_size", self.batch_size.to_string());
        put("swarm_size", self.swarm_size.to_string());
        put("n_iters", self.n_iters.to_string());
        put("inertia", self.inertia.to_string());
        put("cognitive", self.cognitive.to_string());
        put("social", self.social.to_string());
        put("rng_seed", self.rng_seed.to_string());
        put("power_csi_mode", self.power_csi_mode.to_string());
        put("ue_drop_radius", self.ue_drop_radius.to_string());
        put("ue_drops", self.ue_drops.to_string());
        s
    }
}

fn parse_vec3(value: &str) -> std::result::Result<[f64; 3], String> {
    let inner = value.trim().trim_start_matches('[').trim_end_matches(']');
    let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated coordinates, got {}", parts.len()));
    }
    let mut out = [0.0; 3];
    for (slot, p) in out.iter_mut().zip(&parts) {
        *slot = p.parse::<f64>().map_err(|e| format!("bad coordinate `{p}`: {e}"))?;
    }
    Ok(out)
}

/// Reads and validates a config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<SystemConfig> {
    let text = std::fs::read_to_string(path)?;
    SystemConfig::from_text(&text)
}
