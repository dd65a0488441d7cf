//! Per-point joint estimation of diffuse intensity and refractive index from
//! multiview polarization observations.
//!
//! Each surface point is observed from N viewpoints as a triple
//! `(intensity, degree of polarization, phase)`. Under the mixed reflection
//! model the diffuse intensity and the refractive index are shared across
//! views while the zenith angle varies, which turns the separation into a
//! small constrained nonlinear least-squares problem per point.
//!
//! Zenith handling is selectable through [`Refinement`]:
//!
//! - [`Refinement::SinglePass`] trusts the zenith estimates stored in the
//!   track and minimizes over `(diffuse, index)` alone.
//! - [`Refinement::FixedPoint`] alternates that inner solve with per-view
//!   re-inversion of the specular curve on the dilution-corrected degree of
//!   polarization. The re-inverted zeniths reproduce the current estimate
//!   exactly, so the alternation settles immediately after the first solve;
//!   it is kept for comparison with the single-pass variant.
//! - [`Refinement::Geometric`] (default) additionally constrains the per-view
//!   zeniths to come from a single surface normal seen through the known view
//!   rotations, with the normal's azimuth observed per view as the sinusoid
//!   phase. This couples the views enough to identify the index from image
//!   data alone and is what the image pipeline uses.
//!
//! Whatever the mode, the returned per-view zeniths are the exact inversion
//! of the specular curve on the corrected degree of polarization at the
//! final estimate, so `rho * I / (I - diffuse)` and the specular model agree
//! at every converged point.

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use rayon::prelude::*;
use thiserror::Error;

use crate::polar::{diffuse_dop, specular_dop_unchecked, RefractiveIndex};

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::atomic::{AtomicUsize, Ordering};

/// Errors from zenith inversion and track validation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("zenith {zenith} below solver floor {floor}")]
    ZenithBelowFloor { zenith: f64, floor: f64 },
    #[error("degree of polarization {rho} unattainable for this model (max {max})")]
    OutOfRange { rho: f64, max: f64 },
    #[error("need >= 2 views to separate diffuse intensity and index, got {got}")]
    InsufficientViews { got: usize },
    #[error("track has no observations")]
    EmptyTrack,
}

/// One surface point seen from one viewpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewObservation {
    /// Rotation-averaged intensity (sinusoid offset), > 0.
    pub intensity: f64,
    /// Measured degree of polarization in [0, 1].
    pub dop: f64,
    /// Sinusoid phase in [0, pi).
    pub phase: f64,
    /// Current zenith estimate, radians.
    pub zenith: f64,
    /// World-to-camera rotation of this view.
    pub view_rotation: Matrix3<f64>,
}

impl ViewObservation {
    /// Measured sinusoid amplitude `dop * intensity`.
    pub fn amplitude(&self) -> f64 {
        self.dop * self.intensity
    }
}

/// The N-view observation set for one surface point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointTrack {
    pub observations: Vec<ViewObservation>,
    pub point_id: u64,
    /// Index of the reference observation the normal is parameterized in.
    pub reference: usize,
    /// Disambiguated normal azimuth in the reference camera frame; equals the
    /// reference phase or the reference phase plus pi.
    pub ref_azimuth: f64,
}

impl PointTrack {
    pub fn new(observations: Vec<ViewObservation>, point_id: u64) -> Result<Self, SolveError> {
        if observations.is_empty() {
            return Err(SolveError::EmptyTrack);
        }
        let ref_azimuth = observations[0].phase;
        Ok(Self {
            observations,
            point_id,
            reference: 0,
            ref_azimuth,
        })
    }

    pub fn with_ref_azimuth(mut self, azimuth: f64) -> Self {
        self.ref_azimuth = azimuth;
        self
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    fn min_intensity(&self) -> f64 {
        self.observations
            .iter()
            .map(|o| o.intensity)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Which Fresnel curve to invert for a zenith estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZenithModel {
    Specular,
    Diffuse,
}

/// The specular curve is two-to-one around the Brewster angle; pick a side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BrewsterBranch {
    BelowBrewster,
    AboveBrewster,
}

/// Zenith handling strategy; see the module docs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Refinement {
    SinglePass,
    FixedPoint,
    Geometric,
}

/// Solver hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Box constraint on the refractive index.
    pub n_box: (f64, f64),
    /// Cap on zenith-refinement rounds.
    pub max_outer_iters: usize,
    /// Residual sum-of-squares tolerance of the inner minimization.
    pub inner_tol: f64,
    /// Fixed-point convergence threshold on max zenith change, radians.
    pub outer_tol: f64,
    /// Smallest zenith accepted by the diffuse-from-view residual.
    pub zenith_floor: f64,
    /// Number of index seeds spread uniformly over the box.
    pub multistart_count: usize,
    pub refinement: Refinement,
    pub branch: BrewsterBranch,
    /// Degree of polarization below which a view carries no usable
    /// polarization signal.
    pub degenerate_dop: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n_box: (1.05, 2.5),
            max_outer_iters: 20,
            inner_tol: 1e-10,
            outer_tol: 1e-6,
            zenith_floor: 2f64.to_radians(),
            multistart_count: 5,
            refinement: Refinement::Geometric,
            branch: BrewsterBranch::BelowBrewster,
            degenerate_dop: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIter,
    /// No view carried polarization signal; the diffuse intensity equals the
    /// mean observed intensity but the index is unidentifiable.
    Degenerate,
}

/// Recovered separation for one point.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationResult {
    /// Estimated diffuse intensity.
    pub diffuse: f64,
    /// Estimated refractive index (box midpoint when degenerate).
    pub index: f64,
    /// Refined zenith per view, from exact re-inversion of the corrected
    /// degree of polarization at the final estimate.
    pub zeniths: Vec<f64>,
    /// Final objective sum of squares.
    pub residual: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    /// Views whose corrected degree of polarization exceeded the attainable
    /// maximum during the final re-inversion (clamped to the Brewster angle),
    /// or carried no specular flux at all.
    pub clamped_views: usize,
}

/// Per-view residuals of the shared-diffuse model at fixed zeniths:
/// component `i` is `diffuse - f(n, zenith_i, I_i, rho_i)` where `f` converts
/// one view's observation into an implied diffuse intensity.
pub fn residual_vector(
    track: &PointTrack,
    diffuse: f64,
    n: RefractiveIndex,
    zenith_floor: f64,
) -> Result<Vec<f64>, SolveError> {
    track
        .observations
        .iter()
        .map(|o| {
            if o.zenith < zenith_floor {
                return Err(SolveError::ZenithBelowFloor {
                    zenith: o.zenith,
                    floor: zenith_floor,
                });
            }
            Ok(diffuse - implied_diffuse(o.intensity, o.dop, o.zenith, n.value()))
        })
        .collect()
}

/// `I * (1 - rho / specular_dop(theta, n))` with the zenith clamped away from
/// the grazing singularity.
fn implied_diffuse(intensity: f64, dop: f64, zenith: f64, n: f64) -> f64 {
    let theta = zenith.clamp(1e-9, FRAC_PI_2 - 1e-9);
    intensity * (1.0 - dop / specular_dop_unchecked(theta, n))
}

/// Inverts a Fresnel degree-of-polarization curve to a zenith angle by
/// bisection on the requested monotone branch, to 1e-10 in the degree of
/// polarization.
pub fn estimate_zenith_naive(
    dop: f64,
    n_assumed: RefractiveIndex,
    model: ZenithModel,
    branch: BrewsterBranch,
) -> Result<f64, SolveError> {
    if !(0.0..=1.0).contains(&dop) {
        return Err(SolveError::OutOfRange { rho: dop, max: 1.0 });
    }
    let nv = n_assumed.value();
    match model {
        ZenithModel::Specular => {
            let brewster = n_assumed.brewster();
            if dop >= 1.0 {
                // Fully polarized only at the Brewster angle, on both branches.
                return Ok(brewster);
            }
            match branch {
                BrewsterBranch::BelowBrewster => Ok(bisect_monotone(
                    |t| specular_dop_unchecked(t, nv),
                    dop,
                    0.0,
                    brewster,
                    true,
                )),
                BrewsterBranch::AboveBrewster => Ok(bisect_monotone(
                    |t| specular_dop_unchecked(t, nv),
                    dop,
                    brewster,
                    FRAC_PI_2 - 1e-9,
                    false,
                )),
            }
        }
        ZenithModel::Diffuse => {
            let max = diffuse_dop(FRAC_PI_2, n_assumed).expect("pi/2 is in domain");
            if dop > max {
                return Err(SolveError::OutOfRange { rho: dop, max });
            }
            Ok(bisect_monotone(
                |t| diffuse_dop(t, n_assumed).expect("bisection stays in domain"),
                dop,
                0.0,
                FRAC_PI_2,
                true,
            ))
        }
    }
}

fn bisect_monotone(f: impl Fn(f64) -> f64, target: f64, lo: f64, hi: f64, increasing: bool) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    // Targets at or beyond the endpoint values pin to the endpoint.
    let (f_lo, f_hi) = (f(lo), f(hi));
    let (min_v, max_v) = if increasing { (f_lo, f_hi) } else { (f_hi, f_lo) };
    if target <= min_v {
        return if increasing { lo } else { hi };
    }
    if target >= max_v {
        return if increasing { hi } else { lo };
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = f(mid);
        if (v - target).abs() < 1e-10 && (hi - lo) < 1e-9 {
            return mid;
        }
        if (v < target) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Inner minimization of the shared-diffuse objective over
/// `(diffuse, index)` with the zeniths held fixed.
///
/// For a fixed index the optimal diffuse intensity is the box-clamped mean of
/// the per-view implied diffuse values, so the problem reduces to a
/// one-dimensional search over the index box, seeded by `multistart_count`
/// subinterval scans and polished by golden-section refinement.
fn inner_solve_fixed_zenith(
    obs: &[(f64, f64, f64)], // (intensity, dop, zenith)
    cfg: &SolverConfig,
) -> (f64, f64, f64, usize) {
    let min_i = obs.iter().map(|o| o.0).fold(f64::INFINITY, f64::min);
    let objective = |n: f64| -> (f64, f64) {
        let mut sum = 0.0;
        for &(intensity, dop, zenith) in obs {
            sum += implied_diffuse(intensity, dop, zenith, n);
        }
        let diffuse = (sum / obs.len() as f64).clamp(0.0, min_i);
        let mut sse = 0.0;
        for &(intensity, dop, zenith) in obs {
            let r = diffuse - implied_diffuse(intensity, dop, zenith, n);
            sse += r * r;
        }
        (sse, diffuse)
    };

    let (n_lo, n_hi) = cfg.n_box;
    let seeds = cfg.multistart_count.max(1);
    let mut best = (f64::INFINITY, n_lo, 0.0);
    let mut evals = 0usize;
    for k in 0..seeds {
        let lo = n_lo + (n_hi - n_lo) * k as f64 / seeds as f64;
        let hi = n_lo + (n_hi - n_lo) * (k + 1) as f64 / seeds as f64;
        let (n, sse, used) = minimize_scalar(|n| objective(n).0, lo, hi, 24, 60);
        evals += used;
        if sse < best.0 {
            let (_, diffuse) = objective(n);
            best = (sse, n, diffuse);
        }
    }
    (best.2, best.1, best.0, evals)
}

/// Coarse scan followed by golden-section refinement around the best cell.
fn minimize_scalar(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    scan: usize,
    iters: usize,
) -> (f64, f64, usize) {
    let mut best_i = 0;
    let mut best_v = f64::INFINITY;
    let mut evals = 0;
    for i in 0..=scan {
        let x = lo + (hi - lo) * i as f64 / scan as f64;
        let v = f(x);
        evals += 1;
        if v < best_v {
            best_v = v;
            best_i = i;
        }
    }
    let step = (hi - lo) / scan as f64;
    let mut a = lo + step * best_i.saturating_sub(1) as f64;
    let mut b = (lo + step * (best_i + 1) as f64).min(hi);
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    evals += 2;
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        evals += 1;
        if b - a < 1e-13 {
            break;
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x), evals + 1)
}

/// Corrected degree of polarization `rho * I / (I - diffuse)`; `None` when
/// the view has no specular flux left.
fn corrected_dop(intensity: f64, dop: f64, diffuse: f64) -> Option<f64> {
    let specular = intensity - diffuse;
    (specular > 1e-12 * intensity.max(1e-300)).then(|| dop * intensity / specular)
}

/// Exact per-view re-inversion of the specular curve at the final estimate.
fn reinvert_zeniths(
    track: &PointTrack,
    diffuse: f64,
    n: f64,
    branch: BrewsterBranch,
) -> (Vec<f64>, usize) {
    let ni = RefractiveIndex::new(n.max(1.0 + 1e-9)).expect("index above 1");
    let mut clamped = 0;
    let zeniths = track
        .observations
        .iter()
        .map(|o| match corrected_dop(o.intensity, o.dop, diffuse) {
            Some(rho) => {
                if rho > 1.0 {
                    clamped += 1;
                    ni.brewster()
                } else {
                    estimate_zenith_naive(rho, ni, ZenithModel::Specular, branch)
                        .expect("rho clamped into [0, 1]")
                }
            }
            None => {
                // Pure diffuse view: zenith unconstrained, keep the estimate.
                clamped += 1;
                o.zenith
            }
        })
        .collect();
    (zeniths, clamped)
}

// ---------------------------------------------------------------------------
// Geometric refinement: zeniths derived from one shared normal.
// ---------------------------------------------------------------------------

/// Free parameters of the geometric solve.
#[derive(Debug, Clone, Copy)]
struct GeoParams {
    diffuse: f64,
    n: f64,
    /// Normal azimuth in the reference camera frame.
    azimuth: f64,
    /// Normal zenith in the reference camera frame.
    zenith: f64,
}

struct GeoProblem<'a> {
    track: &'a PointTrack,
    /// Camera rotations composed with the inverse reference rotation, so the
    /// candidate normal maps straight from the reference frame to each view.
    to_view: Vec<Matrix3<f64>>,
    min_intensity: f64,
    n_box: (f64, f64),
}

/// Wraps an angle difference into [-pi/2, pi/2); phases are mod-pi.
fn wrap_half_pi(x: f64) -> f64 {
    (x + FRAC_PI_2).rem_euclid(PI) - FRAC_PI_2
}

impl<'a> GeoProblem<'a> {
    fn new(track: &'a PointTrack, cfg: &SolverConfig) -> Self {
        let ref_rot = track.observations[track.reference].view_rotation;
        let to_view = track
            .observations
            .iter()
            .map(|o| o.view_rotation * ref_rot.transpose())
            .collect();
        Self {
            track,
            to_view,
            min_intensity: track.min_intensity(),
            n_box: cfg.n_box,
        }
    }

    fn normal_in_view(&self, i: usize, azimuth: f64, zenith: f64) -> Vector3<f64> {
        let m = Vector3::new(
            zenith.sin() * azimuth.cos(),
            zenith.sin() * azimuth.sin(),
            zenith.cos(),
        );
        self.to_view[i] * m
    }

    /// Residuals: per view, the amplitude mismatch of the mixed model and the
    /// amplitude-weighted azimuth mismatch.
    fn residuals(&self, p: &GeoParams, out: &mut Vec<f64>) {
        out.clear();
        for (i, o) in self.track.observations.iter().enumerate() {
            let n_cam = self.normal_in_view(i, p.azimuth, p.zenith);
            let cz = n_cam.z.clamp(1e-9, 1.0);
            let theta = cz.acos();
            let rho_s = if theta > 1e-12 {
                specular_dop_unchecked(theta.min(FRAC_PI_2 - 1e-9), p.n)
            } else {
                0.0
            };
            let amplitude = o.amplitude();
            out.push(amplitude - rho_s * (o.intensity - p.diffuse));
            let predicted_azimuth = n_cam.y.atan2(n_cam.x);
            out.push(amplitude * wrap_half_pi(predicted_azimuth - o.phase));
        }
    }

    fn sse(&self, p: &GeoParams) -> f64 {
        let mut r = Vec::with_capacity(2 * self.track.len());
        self.residuals(p, &mut r);
        r.iter().map(|v| v * v).sum()
    }

    fn clamp(&self, mut p: GeoParams) -> GeoParams {
        p.diffuse = p.diffuse.clamp(0.0, self.min_intensity);
        p.n = p.n.clamp(self.n_box.0, self.n_box.1);
        p.zenith = p.zenith.clamp(1e-4, FRAC_PI_2 - 1e-6);
        p
    }

    /// Closed-form diffuse estimate at a fixed (n, azimuth, zenith): each
    /// view with usable specular signal implies a diffuse value; use their
    /// box-clamped mean.
    fn closed_form_diffuse(&self, n: f64, azimuth: f64, zenith: f64) -> f64 {
        let mut sum = 0.0;
        let mut count = 0usize;
        for (i, o) in self.track.observations.iter().enumerate() {
            let n_cam = self.normal_in_view(i, azimuth, zenith);
            let theta = n_cam.z.clamp(1e-9, 1.0).acos().min(FRAC_PI_2 - 1e-9);
            let rho_s = specular_dop_unchecked(theta.max(1e-9), n);
            if rho_s > 1e-6 {
                sum += o.intensity - o.amplitude() / rho_s;
                count += 1;
            }
        }
        if count == 0 {
            return 0.0;
        }
        (sum / count as f64).clamp(0.0, self.min_intensity)
    }

    /// Levenberg-Marquardt with a numeric Jacobian and box projection.
    fn lm(&self, start: GeoParams, max_iters: usize, inner_tol: f64) -> (GeoParams, f64, usize) {
        let mut p = self.clamp(start);
        let mut sse = self.sse(&p);
        let mut lambda = 1e-3;
        let m = 2 * self.track.len();
        let mut r = Vec::with_capacity(m);
        let mut rp = Vec::with_capacity(m);
        let mut rm = Vec::with_capacity(m);
        let mut iters = 0;
        for _ in 0..max_iters {
            iters += 1;
            self.residuals(&p, &mut r);
            // Central-difference Jacobian, m x 4.
            let x = [p.diffuse, p.n, p.azimuth, p.zenith];
            let mut jac = vec![[0.0f64; 4]; m];
            for j in 0..4 {
                let h = 1e-7 * x[j].abs().max(1.0);
                let mut xp = x;
                xp[j] += h;
                let mut xm = x;
                xm[j] -= h;
                let pp = GeoParams { diffuse: xp[0], n: xp[1], azimuth: xp[2], zenith: xp[3] };
                let pm = GeoParams { diffuse: xm[0], n: xm[1], azimuth: xm[2], zenith: xm[3] };
                self.residuals(&pp, &mut rp);
                self.residuals(&pm, &mut rm);
                for (k, row) in jac.iter_mut().enumerate() {
                    row[j] = (rp[k] - rm[k]) / (2.0 * h);
                }
            }
            let mut h_mat = Matrix4::<f64>::zeros();
            let mut g = Vector4::<f64>::zeros();
            for (k, row) in jac.iter().enumerate() {
                for a in 0..4 {
                    g[a] += row[a] * r[k];
                    for b in 0..4 {
                        h_mat[(a, b)] += row[a] * row[b];
                    }
                }
            }
            let mut improved = false;
            for _ in 0..12 {
                let mut damped = h_mat;
                for a in 0..4 {
                    damped[(a, a)] += lambda * h_mat[(a, a)].max(1e-12);
                }
                let Some(step) = damped.lu().solve(&(-g)) else {
                    lambda *= 10.0;
                    continue;
                };
                let candidate = self.clamp(GeoParams {
                    diffuse: p.diffuse + step[0],
                    n: p.n + step[1],
                    azimuth: p.azimuth + step[2],
                    zenith: p.zenith + step[3],
                });
                let candidate_sse = self.sse(&candidate);
                if candidate_sse < sse {
                    p = candidate;
                    sse = candidate_sse;
                    lambda = (lambda * 0.3).max(1e-12);
                    improved = true;
                    break;
                }
                lambda *= 10.0;
            }
            if !improved || sse < 1e-26 {
                break;
            }
        }
        (p, sse, iters)
    }
}

/// Joint solve over (diffuse, index, normal direction).
fn solve_geometric(track: &PointTrack, cfg: &SolverConfig) -> (GeoParams, f64, usize, bool) {
    let problem = GeoProblem::new(track, cfg);
    let (n_lo, n_hi) = cfg.n_box;
    let alpha0 = track.ref_azimuth;
    let t0 = track.observations[track.reference]
        .zenith
        .clamp(1e-3, FRAC_PI_2 - 1e-6);
    let scale = track
        .observations
        .iter()
        .map(|o| o.intensity)
        .fold(0.0f64, f64::max)
        .powi(2)
        .max(1e-300);

    // Seed 1: hold the initial normal fixed and scan the index box.
    let (n_init, _, _) = minimize_scalar(
        |n| {
            let d = problem.closed_form_diffuse(n, alpha0, t0);
            problem.sse(&GeoParams { diffuse: d, n, azimuth: alpha0, zenith: t0 })
        },
        n_lo,
        n_hi,
        24 * cfg.multistart_count.max(1),
        60,
    );
    let init_seed = GeoParams {
        diffuse: problem.closed_form_diffuse(n_init, alpha0, t0),
        n: n_init,
        azimuth: alpha0,
        zenith: t0,
    };

    // Seeds 2..: coarse grid over (index, zenith, azimuth flip).
    let mut cells: Vec<(f64, GeoParams)> = Vec::new();
    let n_cells = 3 * cfg.multistart_count.max(1);
    for ni in 0..n_cells {
        let n = n_lo + (n_hi - n_lo) * (ni as f64 + 0.5) / n_cells as f64;
        for ti in 0..16 {
            let zenith = 0.03 + (FRAC_PI_2 - 0.06) * ti as f64 / 15.0;
            for azimuth in [alpha0, alpha0 + PI] {
                let diffuse = problem.closed_form_diffuse(n, azimuth, zenith);
                let p = GeoParams { diffuse, n, azimuth, zenith };
                cells.push((problem.sse(&p), p));
            }
        }
    }
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut results: Vec<(f64, GeoParams, usize)> = Vec::new();
    let mut iterations = 0;
    let (p, sse, it) = problem.lm(init_seed, 80, cfg.inner_tol);
    iterations += it;
    results.push((sse, p, it));
    for (_, seed) in cells.iter().take(6) {
        let (p, sse, it) = problem.lm(*seed, 80, cfg.inner_tol);
        iterations += it;
        results.push((sse, p, it));
        if sse < 1e-24 * scale {
            break;
        }
    }

    let best_sse = results.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    // Among near-ties prefer the solution closest to the initialization;
    // genuinely ambiguous geometry is resolved toward the caller's estimate.
    let tie_band = best_sse + cfg.inner_tol * scale;
    let winner = results
        .iter()
        .filter(|r| r.0 <= tie_band)
        .min_by(|a, b| {
            let dist = |p: &GeoParams| {
                let da = wrap_half_pi(p.azimuth - alpha0);
                da * da + (p.zenith - t0).powi(2)
            };
            dist(&a.1).total_cmp(&dist(&b.1))
        })
        .expect("at least one LM result");
    let converged = winner.0 < 1e-8 * scale || winner.2 < 80;
    (winner.1, winner.0, iterations, converged)
}

/// Separates one point into diffuse intensity and refractive index.
///
/// Needs at least two views. Tracks whose every view is below the degenerate
/// polarization threshold cannot constrain the index; they report
/// [`SolveStatus::Degenerate`] with the mean intensity as the diffuse
/// estimate and the box midpoint as the index.
pub fn solve_point(track: &PointTrack, cfg: &SolverConfig) -> Result<SeparationResult, SolveError> {
    let n_views = track.len();
    if n_views < 2 {
        return Err(SolveError::InsufficientViews { got: n_views });
    }

    if track.observations.iter().all(|o| o.dop < cfg.degenerate_dop) {
        let mean: f64 =
            track.observations.iter().map(|o| o.intensity).sum::<f64>() / n_views as f64;
        let residual = track
            .observations
            .iter()
            .map(|o| (mean - o.intensity).powi(2))
            .sum();
        return Ok(SeparationResult {
            diffuse: mean,
            index: 0.5 * (cfg.n_box.0 + cfg.n_box.1),
            zeniths: track.observations.iter().map(|o| o.zenith).collect(),
            residual,
            iterations: 0,
            status: SolveStatus::Degenerate,
            clamped_views: n_views,
        });
    }

    let (diffuse, index, residual, iterations, converged) = match cfg.refinement {
        Refinement::SinglePass => {
            let obs: Vec<(f64, f64, f64)> = track
                .observations
                .iter()
                .map(|o| (o.intensity, o.dop, o.zenith))
                .collect();
            let (d, n, sse, evals) = inner_solve_fixed_zenith(&obs, cfg);
            (d, n, sse, evals, true)
        }
        Refinement::FixedPoint => {
            let mut obs: Vec<(f64, f64, f64)> = track
                .observations
                .iter()
                .map(|o| (o.intensity, o.dop, o.zenith))
                .collect();
            let mut result = inner_solve_fixed_zenith(&obs, cfg);
            let mut outer = 0;
            let mut converged = false;
            while outer < cfg.max_outer_iters {
                outer += 1;
                let (zeniths, _) = reinvert_zeniths(track, result.0, result.1, cfg.branch);
                let max_delta = zeniths
                    .iter()
                    .zip(obs.iter())
                    .map(|(z, o)| (z - o.2).abs())
                    .fold(0.0f64, f64::max);
                for (o, z) in obs.iter_mut().zip(&zeniths) {
                    o.2 = *z;
                }
                result = inner_solve_fixed_zenith(&obs, cfg);
                if max_delta < cfg.outer_tol {
                    converged = true;
                    break;
                }
            }
            (result.0, result.1, result.2, outer, converged)
        }
        Refinement::Geometric => {
            let (p, sse, iters, converged) = solve_geometric(track, cfg);
            (p.diffuse, p.n, sse, iters, converged)
        }
    };

    let (zeniths, clamped_views) = reinvert_zeniths(track, diffuse, index, cfg.branch);
    Ok(SeparationResult {
        diffuse,
        index,
        zeniths,
        residual,
        iterations,
        status: if converged {
            SolveStatus::Converged
        } else {
            SolveStatus::MaxIter
        },
        clamped_views,
    })
}

/// Applies [`solve_point`] to each track independently and in parallel.
/// Results keep the input order and are identical to a sequential run;
/// per-track failures are collected, never aborting the batch.
pub fn solve_image(
    tracks: &[PointTrack],
    cfg: &SolverConfig,
) -> Vec<Result<SeparationResult, SolveError>> {
    solve_image_with_progress(tracks, cfg, |_| {})
}

/// [`solve_image`] with a completion callback, invoked with the number of
/// tracks finished so far.
pub fn solve_image_with_progress(
    tracks: &[PointTrack],
    cfg: &SolverConfig,
    progress: impl Fn(usize) + Sync,
) -> Vec<Result<SeparationResult, SolveError>> {
    let done = AtomicUsize::new(0);
    tracks
        .par_iter()
        .map(|track| {
            let result = solve_point(track, cfg);
            progress(done.fetch_add(1, Ordering::Relaxed) + 1);
            result
        })
        .collect()
}
