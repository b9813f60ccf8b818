//! Exact evaluation of the closed-form effective SINRs and rates: the RP
//! expression, the SP expression with and without perfect pilot
//! subtraction, the estimation-quality factors γ, and the effective-noise
//! variance. Everything is computed from the (β, p, q) primitives so power
//! control other than statistical channel inversion stays testable.
//!
//! Index conventions: cell 0 is the typical BS; `beta_cross[l'][i]` is the
//! large-scale gain from UE `i` of cell `l'` to the typical BS (β_{0l'i}),
//! and `beta_serving[l'][i]` the gain to its own BS (β_{l'l'i}). Sums over
//! "other cells" skip cell 0 entirely: same-cell pilots are orthogonal by
//! construction.

use thiserror::Error;

use crate::config::SystemConfig;
use crate::geometry::NetworkRealization;
use crate::results::{RateResult, Scheme, SinrBreakdown};
use crate::util::KahanSum;

#[derive(Debug, Error, PartialEq)]
pub enum ClosedFormError {
    #[error("no pilot power: estimator undefined (delta = 0)")]
    NoPilotPower,
    #[error("no data power: rate degenerates to zero (delta = 1)")]
    NoDataPower,
    #[error("no closed form exists for {0}")]
    NoClosedForm(Scheme),
}

/// Large-scale snapshot: per-UE gains to the serving and typical BS plus
/// the transmit powers. Powers satisfy `p·β_serving = ρ_d` and
/// `q·β_serving = ρ_p` when built by [`LsfSnapshot::from_network`].
#[derive(Debug, Clone)]
pub struct LsfSnapshot {
    pub beta_serving: Vec<Vec<f64>>,
    pub beta_cross: Vec<Vec<f64>>,
    /// data symbol power per UE, W
    pub p: Vec<Vec<f64>>,
    /// pilot symbol power per UE, W
    pub q: Vec<Vec<f64>>,
}

impl LsfSnapshot {
    /// Statistical channel-inversion power control against the serving BS:
    /// `p = ρ_d/β_serving`, `q = ρ_p/β_serving`. `sp` picks the power split
    /// (ρ_d = ρ_p = ρ for RP, Δρ / (1−Δ)ρ for SP).
    pub fn from_network(net: &NetworkRealization, cfg: &SystemConfig, sp: bool) -> Self {
        let rho_d = cfg.rho_d(sp);
        let rho_p = cfg.rho_p(sp);
        let beta_serving: Vec<Vec<f64>> = (0..net.n_bs)
            .map(|l| net.beta[l][l].clone())
            .collect();
        let beta_cross: Vec<Vec<f64>> = net.beta[0].clone();
        let p = beta_serving
            .iter()
            .map(|row| row.iter().map(|b| rho_d / b).collect())
            .collect();
        let q = beta_serving
            .iter()
            .map(|row| row.iter().map(|b| rho_p / b).collect())
            .collect();
        LsfSnapshot {
            beta_serving,
            beta_cross,
            p,
            q,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.beta_cross.len()
    }

    pub fn k(&self) -> usize {
        self.beta_cross.first().map_or(0, Vec::len)
    }

    fn typical(&self, user: usize) -> (f64, f64, f64) {
        (
            self.p[0][user],
            self.q[0][user],
            self.beta_cross[0][user],
        )
    }

    /// Σ over other cells of `f(p, q, β_cross)`.
    fn sum_other<F: Fn(f64, f64, f64) -> f64>(&self, f: F) -> f64 {
        let mut acc = KahanSum::new();
        for l in 1..self.n_cells() {
            for i in 0..self.k() {
                acc.add(f(self.p[l][i], self.q[l][i], self.beta_cross[l][i]));
            }
        }
        acc.value()
    }

    /// Σ over every UE in the window (typical one included).
    fn sum_all<F: Fn(f64, f64, f64) -> f64>(&self, f: F) -> f64 {
        let mut acc = KahanSum::new();
        for l in 0..self.n_cells() {
            for i in 0..self.k() {
                acc.add(f(self.p[l][i], self.q[l][i], self.beta_cross[l][i]));
            }
        }
        acc.value()
    }
}

/// Estimation-quality factor γ^RP: the harmonic mean of the per-allocation
/// quality γ̄ over random pilot books.
pub fn gamma_rp(snap: &LsfSnapshot, user: usize, cfg: &SystemConfig) -> f64 {
    let (_, q0, b0) = snap.typical(user);
    let own = q0 * cfg.tau_p as f64 * b0;
    let interf = snap.sum_other(|_, q, b| q * b);
    own / (own + interf + cfg.sigma2)
}

/// Estimation-quality factor γ^SP; the data leakage of every UE enters the
/// denominator once regardless of pilot collisions.
pub fn gamma_sp(snap: &LsfSnapshot, user: usize, cfg: &SystemConfig) -> f64 {
    let (_, q0, b0) = snap.typical(user);
    let own = q0 * cfg.tau_c as f64 * b0;
    let pilot_interf = snap.sum_other(|_, q, b| q * b);
    let data_interf = snap.sum_all(|p, _, b| p * b);
    own / (own + pilot_interf + data_interf + cfg.sigma2)
}

/// Effective SINR with RP and MRC under random pilot allocation.
pub fn sinr_rp(snap: &LsfSnapshot, user: usize, cfg: &SystemConfig) -> SinrBreakdown {
    let m = cfg.m as f64;
    let tau_p = cfg.tau_p as f64;
    let (p0, q0, b0) = snap.typical(user);
    let gamma = gamma_rp(snap, user, cfg);
    let pilot_contamination = (m / tau_p) * snap.sum_other(|p, q, b| p * q / q0 * b * b / b0);
    let non_coherent = snap.sum_all(|p, _, b| p * b) / gamma;
    SinrBreakdown::from_parts(
        m * p0 * b0,
        pilot_contamination,
        0.0,
        non_coherent,
        cfg.sigma2 / gamma,
    )
}

/// Effective SINR with SP, MRC and no pilot subtraction.
pub fn sinr_sp(
    snap: &LsfSnapshot,
    user: usize,
    cfg: &SystemConfig,
) -> Result<SinrBreakdown, ClosedFormError> {
    let (p0, q0, b0) = snap.typical(user);
    if q0 <= 0.0 {
        return Err(ClosedFormError::NoPilotPower);
    }
    if p0 <= 0.0 {
        return Err(ClosedFormError::NoDataPower);
    }
    let m = cfg.m as f64;
    let tau_c = cfg.tau_c as f64;
    let gamma = gamma_sp(snap, user, cfg);
    let pilot_contamination = (m / tau_c)
        * snap.sum_other(|p, q, b| (p + (1.0 - 1.0 / tau_c) * q) * q / q0 * b * b / b0);
    let extra_coherent = (m / tau_c) * snap.sum_all(|p, q, b| (p + q) * p / q0 * b * b / b0);
    let cross_products = (2.0 / tau_c) * p0 * b0
        + (2.0 / (tau_c * tau_c)) * snap.sum_other(|p, q, b| q * p / q0 * b * b / b0);
    let data_sq = snap.sum_all(|p, _, b| p * p / q0 * b * b / b0) / (tau_c * tau_c);
    let scaled = snap.sum_all(|p, q, b| (q + p) * b) / gamma;
    Ok(SinrBreakdown::from_parts(
        m * p0 * b0,
        pilot_contamination,
        extra_coherent,
        cross_products + data_sq + scaled,
        cfg.sigma2 / gamma,
    ))
}

/// Effective SINR with SP and perfect subtraction of the received pilot
/// symbols; an upper bound on [`sinr_sp`].
pub fn sinr_sp_ub(
    snap: &LsfSnapshot,
    user: usize,
    cfg: &SystemConfig,
) -> Result<SinrBreakdown, ClosedFormError> {
    let (p0, q0, b0) = snap.typical(user);
    if q0 <= 0.0 {
        return Err(ClosedFormError::NoPilotPower);
    }
    if p0 <= 0.0 {
        return Err(ClosedFormError::NoDataPower);
    }
    let m = cfg.m as f64;
    let tau_c = cfg.tau_c as f64;
    let gamma = gamma_sp(snap, user, cfg);
    let pilot_contamination = (m / tau_c) * snap.sum_other(|p, q, b| p * q / q0 * b * b / b0);
    let extra_coherent = (m / tau_c) * snap.sum_all(|p, _, b| p * p / q0 * b * b / b0);
    let data_sq = snap.sum_all(|p, _, b| p * p / q0 * b * b / b0) / (tau_c * tau_c);
    let scaled = snap.sum_all(|p, _, b| p * b) / gamma;
    Ok(SinrBreakdown::from_parts(
        m * p0 * b0,
        pilot_contamination,
        extra_coherent,
        data_sq + scaled,
        cfg.sigma2 / gamma,
    ))
}

/// Closed-form variance of the effective noise n_eff in the SP data
/// estimate (no pilot subtraction). Used as the reference for the
/// Monte Carlo variance identity check.
pub fn var_neff_sp(snap: &LsfSnapshot, user: usize, cfg: &SystemConfig) -> f64 {
    let (p0, q0, b0) = snap.typical(user);
    let tau_c = cfg.tau_c as f64;
    let m = cfg.m as f64;
    let gamma = gamma_sp(snap, user, cfg);
    let coh = (m / (q0 * b0))
        * ((1.0 / tau_c)
            * snap.sum_other(|p, q, b| (p + (1.0 - 1.0 / tau_c) * q) * q * b * b)
            + (1.0 / tau_c) * snap.sum_all(|p, q, b| (q + p) * p * b * b));
    let cross = (1.0 / (tau_c * q0 * b0))
        * ((2.0 / tau_c) * snap.sum_other(|p, q, b| p * q * b * b)
            + (1.0 / tau_c) * snap.sum_all(|p, _, b| p * p * b * b));
    coh + cross - p0 * b0 + (2.0 / tau_c) * p0 * b0
        + (snap.sum_all(|p, q, b| (q + p) * b) + cfg.sigma2) / gamma
}

/// Achievable rate for the typical UE under `scheme`; the estimated pilot
/// subtraction variant has no closed form and must be simulated.
pub fn rate(
    scheme: Scheme,
    snap: &LsfSnapshot,
    user: usize,
    cfg: &SystemConfig,
) -> Result<RateResult, ClosedFormError> {
    let breakdown = match scheme {
        Scheme::Rp => sinr_rp(snap, user, cfg),
        Scheme::SpNoSub => sinr_sp(snap, user, cfg)?,
        Scheme::SpPerfSub => sinr_sp_ub(snap, user, cfg)?,
        Scheme::SpEstSub => return Err(ClosedFormError::NoClosedForm(scheme)),
    };
    Ok(RateResult::new(
        scheme,
        scheme.prelog(cfg),
        cfg.bandwidth,
        breakdown,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Single-cell snapshot with hand-picked scalars.
    fn single_cell(p: f64, q: f64, beta: f64, k: usize) -> LsfSnapshot {
        LsfSnapshot {
            beta_serving: vec![vec![beta; k]],
            beta_cross: vec![vec![beta; k]],
            p: vec![vec![p; k]],
            q: vec![vec![q; k]],
        }
    }

    fn random_snapshot(rng: &mut ChaCha8Rng, n_cells: usize, k: usize) -> LsfSnapshot {
        let gen = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
            (0..n_cells)
                .map(|_| (0..k).map(|_| 10f64.powf(rng.gen_range(-2.0..2.0))).collect())
                .collect()
        };
        let beta_serving = gen(rng);
        let mut beta_cross = gen(rng);
        beta_cross[0] = beta_serving[0].clone();
        LsfSnapshot {
            beta_serving,
            beta_cross,
            p: gen(rng),
            q: gen(rng),
        }
    }

    #[test]
    fn gamma_rp_matched_noise_is_half() {
        // q tau_p beta = sigma^2, no interferers
        let mut cfg = SystemConfig::table1(4, 1, 16, 4, 0.5);
        cfg.sigma2 = 1.0;
        let snap = single_cell(1.0, 1.0 / 4.0, 1.0, 1);
        assert!((gamma_rp(&snap, 0, &cfg) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gamma_rp_long_pilots_approach_one() {
        let mut cfg = SystemConfig::table1(4, 1, usize::MAX, 1 << 40, 0.5);
        cfg.sigma2 = 1.0;
        let snap = single_cell(1.0, 1.0, 1.0, 1);
        assert!(gamma_rp(&snap, 0, &cfg) > 1.0 - 1e-10);
    }

    #[test]
    fn sinr_rp_unit_scales() {
        // M=1, single cell, K=1, tau_p=1, p=q=rho, rho*beta = sigma^2:
        // gamma = 1/2, denominator = (rho*beta + sigma^2)/gamma = 4 sigma^2,
        // numerator = rho*beta = sigma^2 -> SINR = 1/4.
        let mut cfg = SystemConfig::table1(1, 1, 16, 1, 0.5);
        cfg.sigma2 = 1.0;
        let snap = single_cell(1.0, 1.0, 1.0, 1);
        let b = sinr_rp(&snap, 0, &cfg);
        assert!((b.sinr - 0.25).abs() < 1e-15, "sinr {}", b.sinr);
        assert!(b.is_consistent());
    }

    #[test]
    fn sinr_rp_linear_in_m() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let snap = random_snapshot(&mut rng, 3, 2);
        let mut cfg = SystemConfig::table1(50, 2, 64, 8, 0.5);
        cfg.sigma2 = 1e-2;
        let a = sinr_rp(&snap, 0, &cfg);
        cfg.m *= 2;
        let b = sinr_rp(&snap, 0, &cfg);
        assert!((b.coherent_gain / a.coherent_gain - 2.0).abs() < 1e-12);
        assert!((b.pilot_contamination / a.pilot_contamination - 2.0).abs() < 1e-12);
        assert!((b.non_coherent - a.non_coherent).abs() < 1e-12 * a.non_coherent);
        assert!((b.noise_term - a.noise_term).abs() < 1e-12 * a.noise_term);
    }

    #[test]
    fn sp_degenerate_power_splits_error() {
        let mut snap = single_cell(1.0, 1.0, 1.0, 1);
        snap.q[0][0] = 0.0;
        let cfg = SystemConfig::table1(4, 1, 16, 4, 0.0);
        assert_eq!(sinr_sp(&snap, 0, &cfg), Err(ClosedFormError::NoPilotPower));
        let mut snap = single_cell(1.0, 1.0, 1.0, 1);
        snap.p[0][0] = 0.0;
        assert_eq!(sinr_sp(&snap, 0, &cfg), Err(ClosedFormError::NoDataPower));
        assert_eq!(
            sinr_sp_ub(&snap, 0, &cfg),
            Err(ClosedFormError::NoDataPower)
        );
    }

    #[test]
    fn perfect_subtraction_dominates() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut cfg = SystemConfig::table1(32, 2, 64, 8, 0.5);
        cfg.sigma2 = 0.3;
        for _ in 0..1000 {
            let snap = random_snapshot(&mut rng, 4, 2);
            let ns = sinr_sp(&snap, 0, &cfg).unwrap();
            let ub = sinr_sp_ub(&snap, 0, &cfg).unwrap();
            assert!(ub.sinr >= ns.sinr);
            // term-by-term dominance
            assert!(ub.pilot_contamination <= ns.pilot_contamination);
            assert!(ub.extra_coherent <= ns.extra_coherent);
            assert!(ub.non_coherent <= ns.non_coherent);
        }
    }

    #[test]
    fn gammas_bounded_and_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let snap = random_snapshot(&mut rng, 4, 2);
            let mut cfg = SystemConfig::table1(16, 2, 1 << 20, 4, 0.5);
            cfg.sigma2 = 0.1;
            let mut last_rp = 0.0;
            let mut last_sp = 0.0;
            for shift in [4usize, 6, 9, 13, 20] {
                cfg.tau_p = 1 << shift;
                cfg.tau_c = 1 << shift;
                let g_rp = gamma_rp(&snap, 0, &cfg);
                let g_sp = gamma_sp(&snap, 0, &cfg);
                assert!((0.0..=1.0).contains(&g_rp));
                assert!((0.0..=1.0).contains(&g_sp));
                assert!(g_rp > last_rp);
                assert!(g_sp > last_sp);
                last_rp = g_rp;
                last_sp = g_sp;
            }
        }
    }

    #[test]
    fn sinr_decreases_in_cross_gain() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut cfg = SystemConfig::table1(16, 2, 64, 8, 0.5);
        cfg.sigma2 = 0.2;
        for _ in 0..100 {
            let snap = random_snapshot(&mut rng, 3, 2);
            let mut bumped = snap.clone();
            bumped.beta_cross[1][0] *= 1.5;
            assert!(sinr_rp(&bumped, 0, &cfg).sinr < sinr_rp(&snap, 0, &cfg).sinr);
            assert!(
                sinr_sp(&bumped, 0, &cfg).unwrap().sinr < sinr_sp(&snap, 0, &cfg).unwrap().sinr
            );
            assert!(
                sinr_sp_ub(&bumped, 0, &cfg).unwrap().sinr
                    < sinr_sp_ub(&snap, 0, &cfg).unwrap().sinr
            );
        }
    }

    #[test]
    fn sp_sinr_monotone_in_tau_c_with_fixed_powers() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let snap = random_snapshot(&mut rng, 4, 2);
        let mut cfg = SystemConfig::table1(64, 2, 16, 2, 0.5);
        cfg.sigma2 = 0.5;
        let mut last = 0.0;
        for tau_c in [16usize, 64, 256, 4096, 1 << 16, 1 << 26] {
            cfg.tau_c = tau_c;
            let s = sinr_sp(&snap, 0, &cfg).unwrap().sinr;
            assert!(s > last, "not monotone at tau_c={tau_c}");
            last = s;
        }
        // tau_c -> inf limit: M p0 b0 / (sum (q+p) beta + sigma^2), gamma -> 1
        let (p0, _, b0) = snap.typical(0);
        let limit =
            cfg.m as f64 * p0 * b0 / (snap.sum_all(|p, q, b| (q + p) * b) + cfg.sigma2);
        cfg.tau_c = 1 << 52;
        let s = sinr_sp(&snap, 0, &cfg).unwrap().sinr;
        assert!((s - limit).abs() / limit < 1e-6);
    }

    #[test]
    fn var_neff_equals_denominator_minus_gain_uncertainty() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut cfg = SystemConfig::table1(8, 2, 32, 4, 0.5);
        cfg.sigma2 = 0.7;
        for _ in 0..50 {
            let snap = random_snapshot(&mut rng, 3, 2);
            let den = sinr_sp(&snap, 0, &cfg).unwrap().denominator();
            let (p0, _, b0) = snap.typical(0);
            let var = var_neff_sp(&snap, 0, &cfg);
            assert!((var - (den - p0 * b0)).abs() < 1e-9 * den.abs());
        }
    }

    #[test]
    fn rate_zero_prelog_and_no_closed_form() {
        let cfg = SystemConfig::table1(4, 1, 16, 16, 0.5);
        let snap = single_cell(1.0, 1.0, 1.0, 1);
        let r = rate(Scheme::Rp, &snap, 0, &cfg).unwrap();
        assert_eq!(r.rate_bps, 0.0);
        assert_eq!(
            rate(Scheme::SpEstSub, &snap, 0, &cfg),
            Err(ClosedFormError::NoClosedForm(Scheme::SpEstSub))
        );
    }

    #[test]
    fn channel_inversion_invariant() {
        let cfg = SystemConfig::table1(8, 2, 32, 4, 0.37);
        let net = crate::geometry::sample_network(&cfg, 10.0, 4).unwrap();
        for sp in [false, true] {
            let snap = LsfSnapshot::from_network(&net, &cfg, sp);
            for l in 0..snap.n_cells() {
                for i in 0..snap.k() {
                    let pd = snap.p[l][i] * snap.beta_serving[l][i];
                    let pp = snap.q[l][i] * snap.beta_serving[l][i];
                    assert!((pd - cfg.rho_d(sp)).abs() <= 1e-12 * cfg.rho);
                    assert!((pp - cfg.rho_p(sp)).abs() <= 1e-12 * cfg.rho);
                }
            }
        }
    }
}
