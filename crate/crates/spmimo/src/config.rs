//! System and power-model configuration with validation and file loading.
//!
//! All quantities are stored in linear SI units at the granularity the SINR
//! formulas consume: powers per complex symbol in watt, pathloss linear,
//! bandwidth in Hz, density in BS/km². The file loader additionally accepts
//! dB and band-total variants under suffixed keys (`omega_db`, `snr_db`,
//! `sigma2_bw`, `a_bw`) and converts on read.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("both `{0}` and `{1}` given; pick one")]
    Conflicting(&'static str, &'static str),
    #[error("missing `{0}` (or its alternate `{1}`)")]
    Missing(&'static str, &'static str),
}

/// Scalar system parameters shared by every module.
///
/// Immutable after validation; cheap to copy and safe to share across
/// threads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// BS antennas (M)
    pub m: usize,
    /// UEs per cell (K)
    pub k: usize,
    /// samples per coherence block (τ_c)
    pub tau_c: usize,
    /// RP pilot length (τ_p), K ≤ τ_p ≤ τ_c
    pub tau_p: usize,
    /// SP pilot power fraction Δ in [0,1]
    pub delta: f64,
    /// average transmit power per symbol, W (ρ)
    pub rho: f64,
    /// noise power per symbol, W (σ²)
    pub sigma2: f64,
    /// pathloss exponent (α), must exceed 2
    pub alpha: f64,
    /// pathloss at 1 km, linear (ω)
    pub omega: f64,
    /// BS density, BS/km² (D)
    pub density: f64,
    /// system bandwidth, Hz (B_w)
    pub bandwidth: f64,
}

impl SystemConfig {
    /// The paper's simulation constants (Table-I style): α = 3.76,
    /// ω = 130 dB, B_w = 20 MHz, σ²B_w = 1e-13 W, ρ = σ²/4 (≈ −6 dB SNR),
    /// D = 100 BS/km².
    pub fn table1(m: usize, k: usize, tau_c: usize, tau_p: usize, delta: f64) -> Self {
        let bandwidth = 2e7;
        let sigma2 = 1e-13 / bandwidth;
        SystemConfig {
            m,
            k,
            tau_c,
            tau_p,
            delta,
            rho: sigma2 / 4.0,
            sigma2,
            alpha: 3.76,
            omega: 1e13,
            density: 100.0,
            bandwidth,
        }
    }

    /// Average SNR per UE, ρ/σ².
    pub fn snr(&self) -> f64 {
        self.rho / self.sigma2
    }

    /// Per-symbol pilot power budget ρ_p: equal to ρ with RP, Δρ with SP.
    pub fn rho_p(&self, sp: bool) -> f64 {
        if sp {
            self.delta * self.rho
        } else {
            self.rho
        }
    }

    /// Per-symbol data power budget ρ_d: equal to ρ with RP, (1−Δ)ρ with SP.
    pub fn rho_d(&self, sp: bool) -> f64 {
        if sp {
            (1.0 - self.delta) * self.rho
        } else {
            self.rho
        }
    }

    /// Returns every violated invariant; an empty list means the config is
    /// usable everywhere in the crate.
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.m == 0 {
            v.push("m must be positive".into());
        }
        if self.k == 0 {
            v.push("k must be positive".into());
        }
        if self.tau_p < self.k {
            v.push(format!("tau_p ({}) < k ({})", self.tau_p, self.k));
        }
        if self.tau_p > self.tau_c {
            v.push(format!("tau_p ({}) > tau_c ({})", self.tau_p, self.tau_c));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            v.push(format!("delta ({}) outside [0,1]", self.delta));
        }
        if !(self.rho > 0.0) {
            v.push("rho must be > 0".into());
        }
        if !(self.sigma2 > 0.0) {
            v.push("sigma2 must be > 0".into());
        }
        if !(self.alpha > 2.0) {
            // alpha = 2 is the boundary where the interference moments diverge
            v.push(format!("alpha ({}) must exceed 2", self.alpha));
        }
        if !(self.omega > 0.0) {
            v.push("omega must be > 0".into());
        }
        if !(self.density > 0.0) {
            v.push("density must be > 0".into());
        }
        if !(self.bandwidth > 0.0) {
            v.push("bandwidth must be > 0".into());
        }
        v
    }

    pub fn validated(self) -> Result<Self, ConfigError> {
        let v = self.validate();
        if v.is_empty() {
            Ok(self)
        } else {
            Err(ConfigError::Invalid(v.join("; ")))
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let file: ConfigFile = toml::from_str(text)?;
        file.system.resolve()
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }
}

/// Circuit and processing power constants of the energy-efficiency model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerModel {
    /// power amplifier efficiency η in (0,1]
    pub eta: f64,
    /// fixed consumption (site cooling etc.), W
    pub c0: f64,
    /// per-UE transceiver chain, W
    pub c1: f64,
    /// per-BS-antenna transceiver chain, W
    pub d0: f64,
    /// rate-dependent consumption, W per bit/s (𝒜)
    pub a_rate: f64,
    /// computational efficiency L, flop/s per W
    pub flops_per_watt: f64,
}

impl PowerModel {
    /// Table-I constants: η=0.39, C0=10 W, C1=0.1 W, D0=0.1 W,
    /// 𝒜·B_w=2.3e-2 W at B_w=20 MHz, L=12.8 Gflops/W.
    pub fn table1() -> Self {
        PowerModel {
            eta: 0.39,
            c0: 10.0,
            c1: 0.1,
            d0: 0.1,
            a_rate: 2.3e-2 / 2e7,
            flops_per_watt: 12.8e9,
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            v.push(format!("eta ({}) outside (0,1]", self.eta));
        }
        for (name, val) in [
            ("c0", self.c0),
            ("c1", self.c1),
            ("d0", self.d0),
            ("a_rate", self.a_rate),
        ] {
            if !(val >= 0.0) {
                v.push(format!("{name} ({val}) must be nonnegative"));
            }
        }
        if !(self.flops_per_watt > 0.0) {
            v.push("flops_per_watt must be > 0".into());
        }
        v
    }
}

/// On-disk layout: `[system]` table plus optional `[power]` table.
#[derive(Debug, Deserialize)]
pub struct ConfigFile {
    pub system: RawSystem,
    #[serde(default)]
    pub power: Option<RawPower>,
}

impl ConfigFile {
    pub fn from_path(path: &std::path::Path) -> Result<(SystemConfig, PowerModel), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let file: ConfigFile = toml::from_str(&text)?;
        let sys = file.system.resolve()?;
        let pm = match file.power {
            Some(p) => p.resolve(sys.bandwidth)?,
            None => PowerModel::table1(),
        };
        Ok((sys, pm))
    }
}

/// Raw `[system]` keys before unit resolution. Exactly one of each
/// linear/dB (or per-symbol/band-total) pair may be present.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSystem {
    pub m: usize,
    pub k: usize,
    pub tau_c: usize,
    pub tau_p: usize,
    pub delta: f64,
    pub alpha: f64,
    pub density: f64,
    pub bandwidth: f64,
    pub omega: Option<f64>,
    pub omega_db: Option<f64>,
    pub sigma2: Option<f64>,
    /// total noise power over the whole band (σ²·B_w); divided by bandwidth
    pub sigma2_bw: Option<f64>,
    pub rho: Option<f64>,
    /// average SNR ρ/σ² in dB; resolved to ρ after σ²
    pub snr_db: Option<f64>,
}

fn pick(
    linear: Option<f64>,
    alt: Option<f64>,
    names: (&'static str, &'static str),
    conv: impl Fn(f64) -> f64,
) -> Result<f64, ConfigError> {
    match (linear, alt) {
        (Some(_), Some(_)) => Err(ConfigError::Conflicting(names.0, names.1)),
        (Some(x), None) => Ok(x),
        (None, Some(x)) => Ok(conv(x)),
        (None, None) => Err(ConfigError::Missing(names.0, names.1)),
    }
}

impl RawSystem {
    pub fn resolve(&self) -> Result<SystemConfig, ConfigError> {
        let omega = pick(self.omega, self.omega_db, ("omega", "omega_db"), |db| {
            10f64.powf(db / 10.0)
        })?;
        let sigma2 = pick(
            self.sigma2,
            self.sigma2_bw,
            ("sigma2", "sigma2_bw"),
            |tot| tot / self.bandwidth,
        )?;
        let rho = pick(self.rho, self.snr_db, ("rho", "snr_db"), |db| {
            sigma2 * 10f64.powf(db / 10.0)
        })?;
        SystemConfig {
            m: self.m,
            k: self.k,
            tau_c: self.tau_c,
            tau_p: self.tau_p,
            delta: self.delta,
            rho,
            sigma2,
            alpha: self.alpha,
            omega,
            density: self.density,
            bandwidth: self.bandwidth,
        }
        .validated()
    }
}

/// Raw `[power]` keys; `a_rate` may be given as the band product `a_bw`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPower {
    pub eta: f64,
    pub c0: f64,
    pub c1: f64,
    pub d0: f64,
    pub a_rate: Option<f64>,
    pub a_bw: Option<f64>,
    pub flops_per_watt: f64,
}

impl RawPower {
    pub fn resolve(&self, bandwidth: f64) -> Result<PowerModel, ConfigError> {
        let a_rate = pick(self.a_rate, self.a_bw, ("a_rate", "a_bw"), |a_bw| {
            a_bw / bandwidth
        })?;
        let pm = PowerModel {
            eta: self.eta,
            c0: self.c0,
            c1: self.c1,
            d0: self.d0,
            a_rate,
            flops_per_watt: self.flops_per_watt,
        };
        let v = pm.validate();
        if v.is_empty() {
            Ok(pm)
        } else {
            Err(ConfigError::Invalid(v.join("; ")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pilot_shorter_than_users_is_flagged() {
        let mut cfg = SystemConfig::table1(100, 10, 200, 10, 0.5);
        cfg.k = 10;
        cfg.tau_p = 5;
        let v = cfg.validate();
        assert!(v.iter().any(|s| s.contains("tau_p (5) < k (10)")));
    }

    #[test]
    fn alpha_boundary_is_flagged() {
        let mut cfg = SystemConfig::table1(100, 10, 200, 10, 0.5);
        cfg.alpha = 2.0;
        let v = cfg.validate();
        assert!(v.iter().any(|s| s.contains("alpha")));
    }

    #[test]
    fn table1_config_is_valid() {
        let cfg = SystemConfig::table1(100, 10, 200, 39, 0.36);
        assert!(cfg.validate().is_empty());
        assert!((cfg.sigma2 * cfg.bandwidth - 1e-13).abs() < 1e-25);
        assert!((cfg.snr() - 0.25).abs() < 1e-15);
        assert_eq!(cfg.omega, 1e13);
    }

    #[test]
    fn power_split_matches_scheme() {
        let cfg = SystemConfig::table1(100, 10, 200, 39, 0.36);
        assert_eq!(cfg.rho_p(false), cfg.rho);
        assert_eq!(cfg.rho_d(false), cfg.rho);
        assert!((cfg.rho_p(true) - 0.36 * cfg.rho).abs() < 1e-30);
        assert!((cfg.rho_p(true) + cfg.rho_d(true) - cfg.rho).abs() < 1e-30);
    }

    #[test]
    fn toml_round_trip_is_bit_exact() {
        let cfg = SystemConfig::table1(64, 7, 150, 23, 0.41);
        let text = toml::to_string(&cfg).unwrap();
        let back: SystemConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn db_keys_resolve() {
        let text = r#"
            [system]
            m = 100
            k = 10
            tau_c = 200
            tau_p = 39
            delta = 0.36
            alpha = 3.76
            density = 100.0
            bandwidth = 2e7
            omega_db = 130.0
            sigma2_bw = 1e-13
            snr_db = -6.0

            [power]
            eta = 0.39
            c0 = 10.0
            c1 = 0.1
            d0 = 0.1
            a_bw = 2.3e-2
            flops_per_watt = 12.8e9
        "#;
        let file: ConfigFile = toml::from_str(text).unwrap();
        let cfg = file.system.resolve().unwrap();
        assert!((cfg.omega - 1e13).abs() / 1e13 < 1e-12);
        assert!((cfg.sigma2 - 5e-21).abs() < 1e-33);
        assert!((cfg.snr() - 10f64.powf(-0.6)).abs() < 1e-12);
        let pm = file.power.unwrap().resolve(cfg.bandwidth).unwrap();
        assert!((pm.a_rate - 1.15e-9).abs() < 1e-18);
    }

    #[test]
    fn conflicting_keys_rejected() {
        let text = r#"
            [system]
            m = 4
            k = 1
            tau_c = 16
            tau_p = 4
            delta = 0.5
            alpha = 3.76
            density = 100.0
            bandwidth = 2e7
            omega = 1e13
            omega_db = 130.0
            sigma2 = 5e-21
            rho = 1e-21
        "#;
        assert!(matches!(
            SystemConfig::from_toml_str(text),
            Err(ConfigError::Conflicting("omega", "omega_db"))
        ));
    }
}
