//! Random network deployments: PPP base stations on a wrap-around square,
//! UEs uniform in each Voronoi cell, distance and large-scale-fading
//! tensors, and the stochastic-geometry validation statistics.
//!
//! The wrap-around of the simulation protocol is implemented as the torus
//! metric (minimum over shifted images per axis), which is equivalent to
//! replicating the square around itself but never materializes copies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

use crate::config::SystemConfig;
use crate::util::KahanSum;

/// Proposal budget for the Voronoi rejection sampler, per network.
const REJECTION_CAP: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error(
        "rejection sampling exceeded {cap} proposals while filling cells \
         (degenerate tiny cell); resample with another seed"
    )]
    PathologicalDraw { cap: usize },
}

/// Distance between two points on the square torus of side `side`.
#[inline]
pub fn torus_dist(a: [f64; 2], b: [f64; 2], side: f64) -> f64 {
    let mut acc = 0.0;
    for ax in 0..2 {
        let d = (a[ax] - b[ax]).abs();
        let d = d.min(side - d);
        acc += d * d;
    }
    acc.sqrt()
}

/// One spatial draw of the network: BS and UE positions plus the full
/// distance and LSF tensors under the wrap-around metric.
#[derive(Debug, Clone)]
pub struct NetworkRealization {
    /// BS positions, km
    pub bs_xy: Vec<[f64; 2]>,
    /// UE positions indexed `[cell][user]`, km
    pub ue_xy: Vec<Vec<[f64; 2]>>,
    /// `d[l][l'][i]`: distance from BS `l` to UE `i` of cell `l'`, km
    pub d: Vec<Vec<Vec<f64>>>,
    /// `beta[l][l'][i] = d^(−α)/ω`
    pub beta: Vec<Vec<Vec<f64>>>,
    /// side of the square window L_sq, km
    pub side_length: f64,
    pub n_bs: usize,
}

impl NetworkRealization {
    pub fn k(&self) -> usize {
        self.ue_xy.first().map_or(0, Vec::len)
    }

    /// Serving distance of UE `(cell, user)`.
    pub fn d_serving(&self, cell: usize, user: usize) -> f64 {
        self.d[cell][cell][user]
    }

    /// Flattened CSV dump (`kind,l,lp,i,x,y,d,beta`) for external plotting.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "kind,l,lp,i,x,y,d,beta")?;
        for (l, p) in self.bs_xy.iter().enumerate() {
            writeln!(w, "bs,{l},,,{},{},,", p[0], p[1])?;
        }
        for (lp, ues) in self.ue_xy.iter().enumerate() {
            for (i, p) in ues.iter().enumerate() {
                writeln!(w, "ue,,{lp},{i},{},{},,", p[0], p[1])?;
            }
        }
        for l in 0..self.n_bs {
            for lp in 0..self.n_bs {
                for i in 0..self.k() {
                    writeln!(
                        w,
                        "link,{l},{lp},{i},,,{:e},{:e}",
                        self.d[l][lp][i], self.beta[l][lp][i]
                    )?;
                }
            }
        }
        Ok(())
    }
}

/// Draws one network: `n_bs ~ Poisson(n_avg)` (resampled until ≥ 2), BS
/// positions uniform on the window, `K` UEs uniform in each Voronoi cell.
/// Deterministic given `(cfg, n_avg, seed)`.
pub fn sample_network(
    cfg: &SystemConfig,
    n_avg: f64,
    seed: u64,
) -> Result<NetworkRealization, GeometryError> {
    sample_impl(cfg, n_avg, None, seed, REJECTION_CAP)
}

/// Test hook: force the BS count (e.g. a single-cell degenerate network).
pub fn sample_network_forced(
    cfg: &SystemConfig,
    n_avg: f64,
    n_bs: usize,
    seed: u64,
) -> Result<NetworkRealization, GeometryError> {
    sample_impl(cfg, n_avg, Some(n_bs), seed, REJECTION_CAP)
}

fn sample_impl(
    cfg: &SystemConfig,
    n_avg: f64,
    forced_n: Option<usize>,
    seed: u64,
    cap: usize,
) -> Result<NetworkRealization, GeometryError> {
    let side = (n_avg / cfg.density).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_bs = match forced_n {
        Some(n) => n,
        None => {
            let pois = Poisson::new(n_avg).expect("n_avg > 0");
            loop {
                let n = pois.sample(&mut rng) as usize;
                if n >= 2 {
                    break n;
                }
            }
        }
    };
    let bs_xy: Vec<[f64; 2]> = (0..n_bs)
        .map(|_| [rng.gen::<f64>() * side, rng.gen::<f64>() * side])
        .collect();

    // Uniform-in-Voronoi by rejection: area-uniform proposals accepted into
    // their nearest cell until that cell holds K.
    let mut ue_xy = vec![Vec::with_capacity(cfg.k); n_bs];
    let mut remaining = n_bs * cfg.k;
    let mut proposals = 0usize;
    while remaining > 0 {
        proposals += 1;
        if proposals > cap {
            return Err(GeometryError::PathologicalDraw { cap });
        }
        let p = [rng.gen::<f64>() * side, rng.gen::<f64>() * side];
        let (cell, _) = nearest(&bs_xy, p, side);
        if ue_xy[cell].len() < cfg.k {
            ue_xy[cell].push(p);
            remaining -= 1;
        }
    }

    let mut d = vec![vec![vec![0.0; cfg.k]; n_bs]; n_bs];
    let mut beta = vec![vec![vec![0.0; cfg.k]; n_bs]; n_bs];
    for l in 0..n_bs {
        for lp in 0..n_bs {
            for i in 0..cfg.k {
                let dist = torus_dist(bs_xy[l], ue_xy[lp][i], side);
                d[l][lp][i] = dist;
                beta[l][lp][i] = dist.powf(-cfg.alpha) / cfg.omega;
            }
        }
    }
    Ok(NetworkRealization {
        bs_xy,
        ue_xy,
        d,
        beta,
        side_length: side,
        n_bs,
    })
}

fn nearest(bs: &[[f64; 2]], p: [f64; 2], side: f64) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (idx, b) in bs.iter().enumerate() {
        let d = torus_dist(*b, p, side);
        if d < best.1 {
            best = (idx, d);
        }
    }
    best
}

/// Serving distances of stationary typical UEs: one fresh PPP per draw and
/// an area-uniform probe point associated with its nearest BS. On the torus
/// this distance is exactly Rayleigh(1/√(2πD)), which is the law the
/// analytical model assumes.
pub fn serving_distance_probes(density: f64, n_avg: f64, n_draws: usize, seed: u64) -> Vec<f64> {
    let side = (n_avg / density).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0xd157);
    let pois = Poisson::new(n_avg).expect("n_avg > 0");
    (0..n_draws)
        .map(|_| {
            let n = loop {
                let n = pois.sample(&mut rng) as usize;
                if n >= 1 {
                    break n;
                }
            };
            let bs: Vec<[f64; 2]> = (0..n)
                .map(|_| [rng.gen::<f64>() * side, rng.gen::<f64>() * side])
                .collect();
            let probe = [rng.gen::<f64>() * side, rng.gen::<f64>() * side];
            nearest(&bs, probe, side).1
        })
        .collect()
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct MomentStat {
    pub mean: f64,
    pub se: f64,
}

impl MomentStat {
    fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        MomentStat {
            mean,
            se: (var / n).sqrt(),
        }
    }

    pub fn z_against(&self, target: f64) -> f64 {
        (self.mean - target) / self.se
    }
}

/// Estimates of the interference distance-ratio moments and of E{d^α}.
#[derive(Debug, Clone, Copy)]
pub struct MomentCheck {
    /// E{Σ_{l'} (d_serv/d_0)^α}, target 2/(α−2)
    pub kappa1: MomentStat,
    /// E{Σ_{l'} (d_serv/d_0)^{2α}}, target 2/(2α−2)
    pub kappa2: MomentStat,
    /// E{Σ_{l'} ratio_i · ratio_j} for i≠j, bounded by 1/(α−1)
    pub cross: MomentStat,
    /// E{d^α} of the typical serving distance, target Γ(α/2+1)/(πD)^{α/2}
    pub d_alpha: MomentStat,
}

/// Samples the distance-ratio moment sums under the model the analysis
/// assumes: interfering UEs at a Rayleigh(1/√(2πD)) offset from their
/// serving BS, with a term dropped whenever the offset would place the UE
/// nearer to the typical BS than to its own (the serving-BS exclusion).
/// The default window should be generous (n_avg ≈ 400): the κ=1 sum has a
/// d^(2−α) tail and a 50-BS window truncates several percent of it.
pub fn lsf_moment_check(cfg: &SystemConfig, n_trials: usize, n_avg: f64, seed: u64) -> MomentCheck {
    let density = cfg.density;
    let alpha = cfg.alpha;
    let side = (n_avg / density).sqrt();
    let sigma = 1.0 / (2.0 * std::f64::consts::PI * density).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x6e0);
    let pois = Poisson::new(n_avg).expect("n_avg > 0");

    let mut s1 = Vec::with_capacity(n_trials);
    let mut s2 = Vec::with_capacity(n_trials);
    let mut sx = Vec::with_capacity(n_trials);
    let mut da = Vec::with_capacity(n_trials);
    for _ in 0..n_trials {
        let n = loop {
            let n = pois.sample(&mut rng) as usize;
            if n >= 2 {
                break n;
            }
        };
        let bs: Vec<[f64; 2]> = (0..n)
            .map(|_| [rng.gen::<f64>() * side, rng.gen::<f64>() * side])
            .collect();
        let mut acc1 = KahanSum::new();
        let mut acc2 = KahanSum::new();
        let mut accx = KahanSum::new();
        for b in bs.iter().skip(1) {
            let ri = rayleigh_ratio(*b, bs[0], sigma, side, alpha, &mut rng);
            let rj = rayleigh_ratio(*b, bs[0], sigma, side, alpha, &mut rng);
            acc1.add(ri);
            acc2.add(ri * ri);
            accx.add(ri * rj);
        }
        s1.push(acc1.value());
        s2.push(acc2.value());
        sx.push(accx.value());
        let probe = [rng.gen::<f64>() * side, rng.gen::<f64>() * side];
        da.push(nearest(&bs, probe, side).1.powf(alpha));
    }
    MomentCheck {
        kappa1: MomentStat::from_samples(&s1),
        kappa2: MomentStat::from_samples(&s2),
        cross: MomentStat::from_samples(&sx),
        d_alpha: MomentStat::from_samples(&da),
    }
}

/// (d_serv/d_0)^α for one displaced UE of the cell at `b`, zero when the
/// draw violates the nearest-BS constraint.
fn rayleigh_ratio<R: Rng>(
    b: [f64; 2],
    bs0: [f64; 2],
    sigma: f64,
    side: f64,
    alpha: f64,
    rng: &mut R,
) -> f64 {
    let r = sigma * (-2.0 * rng.gen::<f64>().ln()).sqrt();
    let th = rng.gen::<f64>() * std::f64::consts::TAU;
    let ue = [
        (b[0] + r * th.cos()).rem_euclid(side),
        (b[1] + r * th.sin()).rem_euclid(side),
    ];
    let d0 = torus_dist(ue, bs0, side);
    if r <= d0 {
        (r / d0).powf(alpha)
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small_cfg() -> SystemConfig {
        SystemConfig::table1(8, 3, 32, 8, 0.5)
    }

    #[test]
    fn serving_bs_is_nearest_and_cells_full() {
        let cfg = small_cfg();
        let net = sample_network(&cfg, 12.0, 42).unwrap();
        assert!(net.n_bs >= 2);
        for lp in 0..net.n_bs {
            assert_eq!(net.ue_xy[lp].len(), cfg.k);
            for i in 0..cfg.k {
                let serve = net.d[lp][lp][i];
                for l in 0..net.n_bs {
                    assert!(serve <= net.d[l][lp][i] + 1e-12);
                }
            }
        }
    }

    #[test]
    fn beta_distance_identity() {
        let cfg = small_cfg();
        let net = sample_network(&cfg, 10.0, 7).unwrap();
        for l in 0..net.n_bs {
            for lp in 0..net.n_bs {
                for i in 0..cfg.k {
                    let prod = net.beta[l][lp][i] * cfg.omega * net.d[l][lp][i].powf(cfg.alpha);
                    assert!((prod - 1.0).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = small_cfg();
        let a = sample_network(&cfg, 10.0, 5).unwrap();
        let b = sample_network(&cfg, 10.0, 5).unwrap();
        assert_eq!(a.n_bs, b.n_bs);
        assert_eq!(a.bs_xy, b.bs_xy);
        assert_eq!(a.ue_xy, b.ue_xy);
    }

    #[test]
    fn poisson_mean_bs_count() {
        let cfg = small_cfg();
        let n_avg = 50.0;
        let trials = 400;
        let mean = (0..trials)
            .map(|s| sample_network(&cfg, n_avg, 1000 + s).unwrap().n_bs as f64)
            .sum::<f64>()
            / trials as f64;
        // Poisson(50) conditioned on >= 2 has mean 50 up to ~1e-20;
        // 3 s.e. at 400 trials is about 1.06.
        assert!(
            (mean - n_avg).abs() < 3.0 * (n_avg / trials as f64).sqrt(),
            "mean n_bs {mean}"
        );
    }

    #[test]
    fn single_bs_override_serves_everyone() {
        let cfg = small_cfg();
        let net = sample_network_forced(&cfg, 10.0, 1, 3).unwrap();
        assert_eq!(net.n_bs, 1);
        assert_eq!(net.ue_xy[0].len(), cfg.k);
        // no interferers: the only cross distances are the serving ones
        for i in 0..cfg.k {
            assert_eq!(net.d[0][0][i], net.d_serving(0, i));
        }
    }

    #[test]
    fn rejection_cap_signals_pathological_draw() {
        let cfg = small_cfg();
        let err = sample_impl(&cfg, 10.0, None, 11, 3).unwrap_err();
        assert!(matches!(err, GeometryError::PathologicalDraw { cap: 3 }));
    }

    #[test]
    fn probe_distances_follow_rayleigh_small_sample() {
        let cfg = small_cfg();
        let n = 2000;
        let mut ds = serving_distance_probes(cfg.density, 50.0, n, 99);
        ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut ks: f64 = 0.0;
        for (i, d) in ds.iter().enumerate() {
            let emp_hi = (i + 1) as f64 / n as f64;
            let emp_lo = i as f64 / n as f64;
            let cdf = 1.0 - (-std::f64::consts::PI * cfg.density * d * d).exp();
            ks = ks.max((emp_hi - cdf).abs()).max((cdf - emp_lo).abs());
        }
        // 1% critical value 1.628/sqrt(n)
        assert!(ks < 1.628 / (n as f64).sqrt(), "KS distance {ks}");
    }

    #[test]
    fn moment_check_alpha_large_kills_interference() {
        let mut cfg = small_cfg();
        cfg.alpha = 30.0;
        let mc = lsf_moment_check(&cfg, 400, 50.0, 17);
        // target 2/(alpha-2) ~ 0.07; mostly the interference vanishes
        assert!(mc.kappa1.mean < 0.2, "kappa1 {}", mc.kappa1.mean);
    }

    proptest! {
        #[test]
        fn torus_metric_properties(
            ax in 0.0..1.0f64, ay in 0.0..1.0f64,
            bx in 0.0..1.0f64, by in 0.0..1.0f64,
            cx in 0.0..1.0f64, cy in 0.0..1.0f64,
        ) {
            let side = 1.0;
            let a = [ax, ay];
            let b = [bx, by];
            let c = [cx, cy];
            let dab = torus_dist(a, b, side);
            prop_assert!((dab - torus_dist(b, a, side)).abs() < 1e-12);
            prop_assert!(dab <= side / std::f64::consts::SQRT_2 + 1e-12);
            prop_assert!(dab <= torus_dist(a, c, side) + torus_dist(c, b, side) + 1e-12);
            prop_assert!((torus_dist(a, a, side)).abs() < 1e-12);
        }
    }
}
