//! Offline workspace characterization: passive orientation over a grid of
//! translations, zero-orientation statistics and the wall ellipsoid fit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::haptics::{orientation_magnitude, VirtualWall};
use crate::kinematics::{CdprGeometry, EulerXYZ, Vec3};
use crate::statics::{passive_orientation, PlatformInertia, TensionVector};

pub const MIN_FIT_MEMBERS: usize = 100;
/// Share of enclosed samples that must be members in a fitted wall.
pub const FIT_MEMBER_SHARE: f64 = 0.99;
/// Thresholds (degrees) reported in [`WorkspaceReport::fraction_within`].
pub const REPORT_THRESHOLDS_DEG: [f64; 9] = [5.0, 10.0, 15.0, 20.0, 30.0, 45.0, 60.0, 90.0, 180.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceSample {
    pub qt: Vec3,
    pub passive_orientation: EulerXYZ,
    /// Geodesic rotation angle of the passive orientation (rad).
    pub orientation_magnitude: f64,
    /// Whether a torque equilibrium was found.
    pub feasible: bool,
}

impl WorkspaceSample {
    pub fn is_member(&self, threshold: f64) -> bool {
        self.feasible && self.orientation_magnitude <= threshold
    }
}

/// Sampling pattern over a centered sub-box of the frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SamplerSpec {
    /// `per_axis^3` grid points spanning `fraction` of the frame extent.
    Grid { per_axis: usize, fraction: f64 },
    /// `count` uniform random points in the same box.
    MonteCarlo { count: usize, fraction: f64, seed: u64 },
}

impl Default for SamplerSpec {
    fn default() -> Self {
        SamplerSpec::Grid {
            per_axis: 21,
            fraction: 0.8,
        }
    }
}

impl SamplerSpec {
    fn fraction(&self) -> f64 {
        match *self {
            SamplerSpec::Grid { fraction, .. } | SamplerSpec::MonteCarlo { fraction, .. } => fraction,
        }
    }

    pub fn count(&self) -> usize {
        match *self {
            SamplerSpec::Grid { per_axis, .. } => per_axis.pow(3),
            SamplerSpec::MonteCarlo { count, .. } => count,
        }
    }

    /// Box spanned by the samples.
    pub fn region(&self, g: &CdprGeometry) -> (Vec3, Vec3) {
        let (lo, hi) = g.frame_bounds();
        let c = (lo + hi) / 2.0;
        let half = (hi - lo) * (self.fraction() / 2.0);
        (c - half, c + half)
    }

    pub fn points(&self, g: &CdprGeometry) -> Result<Vec<Vec3>> {
        let f = self.fraction();
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::Config("sampler fraction must lie in (0, 1]".into()));
        }
        let (lo, hi) = self.region(g);
        match *self {
            SamplerSpec::Grid { per_axis, .. } => {
                if per_axis < 2 {
                    return Err(Error::Config("grid needs at least 2 points per axis".into()));
                }
                let step = (hi - lo) / (per_axis - 1) as f64;
                let mut pts = Vec::with_capacity(per_axis.pow(3));
                for i in 0..per_axis {
                    for j in 0..per_axis {
                        for k in 0..per_axis {
                            pts.push(lo + step.component_mul(&Vec3::new(i as f64, j as f64, k as f64)));
                        }
                    }
                }
                Ok(pts)
            }
            SamplerSpec::MonteCarlo { count, seed, .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok((0..count)
                    .map(|_| {
                        Vec3::new(
                            rng.random_range(lo.x..=hi.x),
                            rng.random_range(lo.y..=hi.y),
                            rng.random_range(lo.z..=hi.z),
                        )
                    })
                    .collect())
            }
        }
    }
}

/// Evaluates the passive orientation at every sample point. Points without
/// an equilibrium are kept and marked infeasible.
pub fn sample_workspace(
    g: &CdprGeometry,
    tensions: &TensionVector,
    inertia: &PlatformInertia,
    spec: &SamplerSpec,
) -> Result<Vec<WorkspaceSample>> {
    let points = spec.points(g)?;
    Ok(points
        .par_iter()
        .map(|qt| match passive_orientation(g, qt, tensions, inertia) {
            Ok(o) => WorkspaceSample {
                qt: *qt,
                passive_orientation: o,
                orientation_magnitude: orientation_magnitude(&o),
                feasible: true,
            },
            Err(_) => WorkspaceSample {
                qt: *qt,
                passive_orientation: EulerXYZ::ZERO,
                orientation_magnitude: f64::NAN,
                feasible: false,
            },
        })
        .collect())
}

/// Share of feasible samples whose orientation magnitude is within
/// `threshold` (rad).
pub fn fraction_within(samples: &[WorkspaceSample], threshold: f64) -> f64 {
    let feasible = samples.iter().filter(|s| s.feasible).count();
    if feasible == 0 {
        return 0.0;
    }
    samples.iter().filter(|s| s.is_member(threshold)).count() as f64 / feasible as f64
}

pub fn ellipsoid_volume(w: &VirtualWall) -> f64 {
    4.0 / 3.0 * std::f64::consts::PI * w.radii.x * w.radii.y * w.radii.z
}

fn sample_bounds(samples: &[WorkspaceSample]) -> (Vec3, Vec3) {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for s in samples {
        lo = lo.inf(&s.qt);
        hi = hi.sup(&s.qt);
    }
    (lo, hi)
}

#[derive(Clone, Copy)]
struct Candidate {
    center: Vec3,
    radii: Vec3,
}

impl Candidate {
    fn volume(&self) -> f64 {
        self.radii.x * self.radii.y * self.radii.z
    }

    fn inside_box(&self, lo: &Vec3, hi: &Vec3) -> bool {
        (0..3)
            .all(|k| self.center[k] - self.radii[k] >= lo[k] - 1e-12 && self.center[k] + self.radii[k] <= hi[k] + 1e-12)
    }
}

/// Largest axis-aligned ellipsoid, inside the sampled box, in which at
/// least [`FIT_MEMBER_SHARE`] of the enclosed samples are members.
///
/// Compass search: starting from the largest admissible sphere at the member
/// centroid,
/// each sweep tries to push every face outward (one side or both) or to
/// trade radius between axes, keeping any move that grows the volume and
/// stays admissible; the step halves when a sweep makes no progress.
pub fn fit_wall_ellipsoid(samples: &[WorkspaceSample], threshold: f64) -> Result<VirtualWall> {
    let members: Vec<Vec3> = samples
        .iter()
        .filter(|s| s.is_member(threshold))
        .map(|s| s.qt)
        .collect();
    if members.len() < MIN_FIT_MEMBERS {
        return Err(Error::TooFewMembers {
            found: members.len(),
            required: MIN_FIT_MEMBERS,
        });
    }
    let flags: Vec<(Vec3, bool)> = samples.iter().map(|s| (s.qt, s.is_member(threshold))).collect();
    let (lo, hi) = sample_bounds(samples);
    let extent = (hi - lo).max();

    let admissible = |c: &Candidate| -> bool {
        if !c.inside_box(&lo, &hi) {
            return false;
        }
        let mut enclosed = 0usize;
        let mut good = 0usize;
        for (q, m) in &flags {
            if (q - c.center).component_div(&c.radii).norm_squared() <= 1.0 {
                enclosed += 1;
                good += *m as usize;
            }
        }
        enclosed == 0 || good as f64 >= FIT_MEMBER_SHARE * enclosed as f64
    };

    // Largest admissible sphere at the member centroid seeds the search so
    // that the axis moves cannot run off along an empty thin sliver.
    let centroid = members.iter().sum::<Vec3>() / members.len() as f64;
    let sphere = |r: f64| Candidate {
        center: centroid,
        radii: Vec3::repeat(r),
    };
    let (mut r_lo, mut r_hi) = (0.0, extent);
    for _ in 0..50 {
        let mid = 0.5 * (r_lo + r_hi);
        if admissible(&sphere(mid)) {
            r_lo = mid;
        } else {
            r_hi = mid;
        }
    }
    let mut best = sphere(r_lo.max(extent * 1e-9));

    let mut step = extent * 0.1;
    let min_step = extent * 1e-4;
    while step >= min_step {
        let mut improved = false;
        let mut moves = Vec::with_capacity(15);
        for axis in 0..3 {
            for side in [0.0, 1.0, -1.0] {
                let mut c = best;
                if side == 0.0 {
                    c.radii[axis] += step;
                } else {
                    c.radii[axis] += step / 2.0;
                    c.center[axis] += side * step / 2.0;
                }
                moves.push(c);
            }
            // Trade moves reshape the ellipsoid when pure growth is blocked.
            for other in (0..3).filter(|&o| o != axis) {
                let mut c = best;
                c.radii[axis] += step;
                c.radii[other] -= step / 4.0;
                if c.radii[other] > 0.0 {
                    moves.push(c);
                }
            }
        }
        for c in moves {
            if c.volume() > best.volume() && admissible(&c) {
                best = c;
                improved = true;
            }
        }
        if !improved {
            step /= 2.0;
        }
    }

    Ok(VirtualWall {
        center: best.center,
        radii: best.radii,
        orientation_threshold: threshold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceReport {
    pub sample_count: usize,
    pub feasible_count: usize,
    /// `(threshold in degrees, fraction of feasible samples within it)`.
    pub fraction_within: Vec<(f64, f64)>,
    pub fitted_wall: VirtualWall,
    /// Volume of the fitted wall (m^3).
    pub inside_volume: f64,
    /// Sampled volume in which an equilibrium exists (m^3).
    pub total_volume: f64,
}

/// Samples the workspace and summarizes it.
pub fn analyze_workspace(
    g: &CdprGeometry,
    tensions: &TensionVector,
    inertia: &PlatformInertia,
    spec: &SamplerSpec,
    threshold: f64,
) -> Result<(WorkspaceReport, Vec<WorkspaceSample>)> {
    let samples = sample_workspace(g, tensions, inertia, spec)?;
    let report = summarize(g, spec, &samples, threshold)?;
    Ok((report, samples))
}

pub fn summarize(
    g: &CdprGeometry,
    spec: &SamplerSpec,
    samples: &[WorkspaceSample],
    threshold: f64,
) -> Result<WorkspaceReport> {
    let feasible_count = samples.iter().filter(|s| s.feasible).count();
    let fitted_wall = fit_wall_ellipsoid(samples, threshold)?;
    let (lo, hi) = spec.region(g);
    let region = (hi - lo).product();
    Ok(WorkspaceReport {
        sample_count: samples.len(),
        feasible_count,
        fraction_within: REPORT_THRESHOLDS_DEG
            .iter()
            .map(|&d| (d, fraction_within(samples, d.to_radians())))
            .collect(),
        inside_volume: ellipsoid_volume(&fitted_wall),
        total_volume: region * feasible_count as f64 / samples.len().max(1) as f64,
        fitted_wall,
    })
}

/// One line per sample: `x y z rx ry rz magnitude feasible`, angles in
/// degrees, preceded by a `#` header.
pub fn write_sample_dump<W: std::io::Write>(mut out: W, samples: &[WorkspaceSample]) -> std::io::Result<()> {
    writeln!(out, "# x_m y_m z_m rx_deg ry_deg rz_deg magnitude_deg feasible")?;
    for s in samples {
        let o = &s.passive_orientation;
        writeln!(
            out,
            "{} {} {} {} {} {} {} {}",
            s.qt.x,
            s.qt.y,
            s.qt.z,
            o.rx.to_degrees(),
            o.ry.to_degrees(),
            o.rz.to_degrees(),
            s.orientation_magnitude.to_degrees(),
            s.feasible as u8
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(truth: &VirtualWall, per_axis: usize, lo: f64, hi: f64) -> Vec<WorkspaceSample> {
        let step = (hi - lo) / (per_axis - 1) as f64;
        let mut out = Vec::new();
        for i in 0..per_axis {
            for j in 0..per_axis {
                for k in 0..per_axis {
                    let qt = Vec3::new(lo + i as f64 * step, lo + j as f64 * step, lo + k as f64 * step);
                    let inside = (qt - truth.center).component_div(&truth.radii).norm_squared() <= 1.0;
                    out.push(WorkspaceSample {
                        qt,
                        passive_orientation: EulerXYZ::ZERO,
                        orientation_magnitude: if inside { 0.0 } else { 1.0 },
                        feasible: true,
                    });
                }
            }
        }
        out
    }

    #[test]
    fn recovers_synthetic_ellipsoid() {
        let truth = VirtualWall {
            center: Vec3::new(0.36, 0.33, 0.37),
            radii: Vec3::new(0.12, 0.09, 0.2),
            orientation_threshold: 0.5,
        };
        let samples = synthetic(&truth, 41, 0.07, 0.63);
        let fit = fit_wall_ellipsoid(&samples, 0.5).unwrap();
        for k in 0..3 {
            let rel = (fit.radii[k] - truth.radii[k]).abs() / truth.radii[k];
            assert!(rel < 0.02, "axis {k}: {:?} {:?}", fit.radii, fit.center);
        }
    }

    #[test]
    fn all_members_span_the_box() {
        let truth = VirtualWall {
            center: Vec3::repeat(0.5),
            radii: Vec3::repeat(10.0),
            orientation_threshold: 0.5,
        };
        let samples = synthetic(&truth, 11, 0.0, 1.0);
        let fit = fit_wall_ellipsoid(&samples, 0.5).unwrap();
        assert!((fit.radii - Vec3::repeat(0.5)).abs().max() < 1e-3);
        assert!((fit.center - Vec3::repeat(0.5)).abs().max() < 1e-3);
    }

    #[test]
    fn no_members_is_an_error() {
        let truth = VirtualWall {
            center: Vec3::repeat(5.0),
            radii: Vec3::repeat(0.1),
            orientation_threshold: 0.5,
        };
        let samples = synthetic(&truth, 6, 0.0, 1.0);
        assert!(matches!(
            fit_wall_ellipsoid(&samples, 0.5),
            Err(Error::TooFewMembers { found: 0, .. })
        ));
    }

    #[test]
    fn volume_of_unit_sphere_and_linearity() {
        let mut w = VirtualWall {
            center: Vec3::zeros(),
            radii: Vec3::repeat(1.0),
            orientation_threshold: 0.1,
        };
        assert!((ellipsoid_volume(&w) - 4.18879).abs() < 1e-5);
        let v = ellipsoid_volume(&w);
        w.radii.y = 2.0;
        assert!((ellipsoid_volume(&w) - 2.0 * v).abs() < 1e-12);
    }

    #[test]
    fn fractions_are_monotone() {
        let truth = VirtualWall {
            center: Vec3::repeat(0.5),
            radii: Vec3::repeat(0.3),
            orientation_threshold: 0.5,
        };
        let mut samples = synthetic(&truth, 9, 0.0, 1.0);
        for (i, s) in samples.iter_mut().enumerate() {
            s.orientation_magnitude = (i as f64 * 0.37).rem_euclid(std::f64::consts::PI);
        }
        let f: Vec<f64> = REPORT_THRESHOLDS_DEG
            .iter()
            .map(|d| fraction_within(&samples, d.to_radians()))
            .collect();
        assert!(f.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(*f.last().unwrap(), 1.0);
    }

    #[test]
    fn monte_carlo_points_are_reproducible() {
        let g = CdprGeometry::default_rig();
        let spec = SamplerSpec::MonteCarlo {
            count: 50,
            fraction: 0.8,
            seed: 9,
        };
        assert_eq!(spec.points(&g).unwrap(), spec.points(&g).unwrap());
    }
}
