//! Shared result types: transmission schemes, SINR decompositions and rates.

use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;

/// Uplink transmission / detection scheme.
///
/// `Rp` multiplexes pilots and data in time; the three `Sp*` variants send
/// them superimposed and differ only in how received pilot symbols are
/// handled at detection: not subtracted, subtracted using LMMSE channel
/// estimates, or subtracted perfectly (genie).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Rp,
    SpNoSub,
    SpEstSub,
    SpPerfSub,
}

impl Scheme {
    pub fn is_sp(self) -> bool {
        !matches!(self, Scheme::Rp)
    }

    /// Rate pre-log factor: RP loses the pilot fraction of the block,
    /// SP uses every sample for data.
    pub fn prelog(self, cfg: &SystemConfig) -> f64 {
        match self {
            Scheme::Rp => 1.0 - cfg.tau_p as f64 / cfg.tau_c as f64,
            _ => 1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Scheme::Rp => "rp",
            Scheme::SpNoSub => "sp-no-sub",
            Scheme::SpEstSub => "sp-est-sub",
            Scheme::SpPerfSub => "sp-perf-sub",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Effective-SINR decomposition.
///
/// The denominator is split by interference mechanism: `pilot_contamination`
/// and `extra_coherent` hold the two coherent groups (variance scaling with
/// `M`), `non_coherent` the remaining interference and `noise_term` the
/// scaled noise. Monte Carlo estimates cannot attribute interference to a
/// mechanism without extra machinery, so the engine reports the whole
/// measured interference under `non_coherent` and leaves the coherent
/// fields at zero; the quotient invariant holds either way.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SinrBreakdown {
    pub coherent_gain: f64,
    pub pilot_contamination: f64,
    pub extra_coherent: f64,
    pub non_coherent: f64,
    pub noise_term: f64,
    pub sinr: f64,
}

impl SinrBreakdown {
    pub fn from_parts(
        coherent_gain: f64,
        pilot_contamination: f64,
        extra_coherent: f64,
        non_coherent: f64,
        noise_term: f64,
    ) -> Self {
        let den = pilot_contamination + extra_coherent + non_coherent + noise_term;
        SinrBreakdown {
            coherent_gain,
            pilot_contamination,
            extra_coherent,
            non_coherent,
            noise_term,
            sinr: coherent_gain / den,
        }
    }

    pub fn denominator(&self) -> f64 {
        self.pilot_contamination + self.extra_coherent + self.non_coherent + self.noise_term
    }

    pub fn total_coherent(&self) -> f64 {
        self.pilot_contamination + self.extra_coherent
    }

    /// All components finite and the quotient identity holds.
    pub fn is_consistent(&self) -> bool {
        let parts = [
            self.coherent_gain,
            self.pilot_contamination,
            self.extra_coherent,
            self.non_coherent,
            self.noise_term,
        ];
        parts.iter().all(|p| p.is_finite() && *p >= 0.0)
            && (self.sinr - self.coherent_gain / self.denominator()).abs()
                <= 1e-12 * self.sinr.max(1.0)
    }
}

/// Achievable rate for one UE under one scheme.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RateResult {
    /// bit/s over the configured bandwidth
    pub rate_bps: f64,
    pub prelog: f64,
    pub sinr: SinrBreakdown,
    pub scheme: Scheme,
}

impl RateResult {
    pub fn new(scheme: Scheme, prelog: f64, bandwidth: f64, sinr: SinrBreakdown) -> Self {
        RateResult {
            rate_bps: bandwidth * prelog * (1.0 + sinr.sinr).log2(),
            prelog,
            sinr,
            scheme,
        }
    }

    /// Spectral efficiency in bit/s/Hz.
    pub fn per_hz(&self, bandwidth: f64) -> f64 {
        self.rate_bps / bandwidth
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn breakdown_quotient_identity() {
        let b = SinrBreakdown::from_parts(10.0, 1.0, 2.0, 3.0, 4.0);
        assert!(b.is_consistent());
        assert!((b.sinr - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unit_rate_assembly() {
        // sinr = 1, B_w = 1, prelog = 1 -> rate = 1
        let b = SinrBreakdown::from_parts(1.0, 0.0, 0.0, 0.5, 0.5);
        let r = RateResult::new(Scheme::SpNoSub, 1.0, 1.0, b);
        assert!((r.rate_bps - 1.0).abs() < 1e-15);
    }

    #[test]
    fn scheme_prelog() {
        let cfg = crate::config::SystemConfig::table1(100, 10, 200, 50, 0.5);
        assert!((Scheme::Rp.prelog(&cfg) - 0.75).abs() < 1e-15);
        assert_eq!(Scheme::SpNoSub.prelog(&cfg), 1.0);
        // tau_p = tau_c kills the RP rate entirely
        let cfg = crate::config::SystemConfig::table1(100, 10, 200, 200, 0.5);
        assert_eq!(Scheme::Rp.prelog(&cfg), 0.0);
    }
}
