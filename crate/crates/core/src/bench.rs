//! Forward-kinematics round-trip statistics over random poses.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fk::{fk_solve, FkConfig};
use crate::kinematics::{inverse_kinematics, CdprGeometry, EulerXYZ, Pose, Vec3};
use crate::sim::add_noise;

/// Box of test poses around the frame center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseDomain {
    /// Half-width of the translation box (m).
    pub half_extent: f64,
    /// Per-angle orientation bound (rad).
    pub orientation_limit: f64,
}

impl Default for PoseDomain {
    fn default() -> Self {
        Self {
            half_extent: 0.21,
            orientation_limit: 10f64.to_radians(),
        }
    }
}

impl PoseDomain {
    pub fn sample<R: Rng + ?Sized>(&self, g: &CdprGeometry, rng: &mut R) -> Pose {
        let c = g.frame_center();
        let h = self.half_extent;
        let a = self.orientation_limit;
        Pose::new(
            c + Vec3::new(
                rng.random_range(-h..=h),
                rng.random_range(-h..=h),
                rng.random_range(-h..=h),
            ),
            EulerXYZ::new(
                rng.random_range(-a..=a),
                rng.random_range(-a..=a),
                rng.random_range(-a..=a),
            ),
        )
    }
}

/// Per-trial generator: independent stream `index` of `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FkTrial {
    pub truth: Pose,
    pub estimate: Pose,
    pub translation_error: f64,
    pub iterations: usize,
    pub converged: bool,
    pub seconds: f64,
}

/// Solves `trials` cold-started round trips `IK -> noise -> FK`.
pub fn fk_trials(
    g: &CdprGeometry,
    cfg: &FkConfig,
    domain: &PoseDomain,
    trials: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<Vec<FkTrial>> {
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i as u64);
            let truth = domain.sample(g, &mut rng);
            let l = add_noise(&inverse_kinematics(g, &truth)?, noise_sigma, &mut rng)?;
            let start = Instant::now();
            let sol = match fk_solve(g, &l, &g.center_pose(), cfg) {
                Ok(s) => s,
                Err(Error::NotConverged { best }) => *best,
                Err(e) => return Err(e),
            };
            let seconds = start.elapsed().as_secs_f64();
            Ok(FkTrial {
                truth,
                estimate: sol.pose,
                translation_error: (sol.pose.translation - truth.translation).norm(),
                iterations: sol.iterations,
                converged: sol.converged,
                seconds,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FkBenchReport {
    pub trials: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    pub converged_fraction: f64,
    pub fraction_below_1um: f64,
    pub fraction_below_4mm: f64,
    /// Translation error percentiles (m) at 50, 90, 99 and 100 %.
    pub translation_error_p50: f64,
    pub translation_error_p90: f64,
    pub translation_error_p99: f64,
    pub translation_error_max: f64,
    pub iterations_median: f64,
    pub iterations_max: usize,
    pub mean_solve_micros: f64,
}

/// Nearest-rank percentile of sorted data.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn summarize_trials(trials: &[FkTrial], noise_sigma: f64, seed: u64) -> FkBenchReport {
    let n = trials.len().max(1) as f64;
    let mut err: Vec<f64> = trials.iter().map(|t| t.translation_error).collect();
    err.sort_by(f64::total_cmp);
    let iters: Vec<f64> = trials.iter().map(|t| t.iterations as f64).collect();
    let share = |f: &dyn Fn(&FkTrial) -> bool| trials.iter().filter(|t| f(t)).count() as f64 / n;
    FkBenchReport {
        trials: trials.len(),
        noise_sigma,
        seed,
        converged_fraction: share(&|t| t.converged),
        fraction_below_1um: share(&|t| t.translation_error < 1e-6),
        fraction_below_4mm: share(&|t| t.translation_error < 4e-3),
        translation_error_p50: percentile(&err, 50.0),
        translation_error_p90: percentile(&err, 90.0),
        translation_error_p99: percentile(&err, 99.0),
        translation_error_max: err.last().copied().unwrap_or(f64::NAN),
        iterations_median: median(&iters),
        iterations_max: trials.iter().map(|t| t.iterations).max().unwrap_or(0),
        mean_solve_micros: trials.iter().map(|t| t.seconds).sum::<f64>() / n * 1e6,
    }
}

pub fn fk_bench(g: &CdprGeometry, cfg: &FkConfig, trials: usize, noise_sigma: f64, seed: u64) -> Result<FkBenchReport> {
    let t = fk_trials(g, cfg, &PoseDomain::default(), trials, noise_sigma, seed)?;
    Ok(summarize_trials(&t, noise_sigma, seed))
}
