//! End-to-end orchestration: polarized stacks in, normal maps out.
//!
//! Every output lives on the reference-view pixel grid. For each reference
//! pixel the correspondence map says where the same surface point appears in
//! the other views; the per-view sinusoid parameters are sampled there, the
//! per-point solver separates diffuse intensity and refractive index, and a
//! normal map is composed per view from that view's azimuth and the refined
//! zenith, rotated into the world frame.
//!
//! The uncorrected modes skip the separation and invert a single Fresnel
//! curve at an assumed index; they are the classical baselines the corrected
//! mode is compared against.

use nalgebra::Vector3;
use thiserror::Error;

use crate::grid::{Grid, Image, Mask};
use crate::io::{CorrespondenceMap, PolarizedStack};
use crate::polar::{RefractiveIndex, DEGENERATE_AMPLITUDE};
use crate::sim::GroundTruth;
use crate::solver::{
    estimate_zenith_naive, solve_image, BrewsterBranch, PointTrack, SolveStatus, SolverConfig,
    ViewObservation, ZenithModel,
};

use std::f64::consts::{FRAC_PI_2, PI};

/// Errors from pipeline orchestration and evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("corrected mode needs >= 2 views, got {got}")]
    InsufficientViews { got: usize },
    #[error("no stacks provided")]
    NoStacks,
    #[error("stack dimensions {stack:?} disagree with correspondence map {map:?}")]
    ShapeMismatch {
        stack: (usize, usize),
        map: (usize, usize),
    },
    #[error("correspondence map references view {view} but only {views} stacks exist")]
    UnknownView { view: usize, views: usize },
    #[error("mask intersection is empty; nothing to compare")]
    EmptyIntersection,
}

/// Per-pixel unit normals in a named frame.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMap {
    pub normals: Grid<[f64; 3]>,
    pub mask: Mask,
    /// Basis annotation; pipeline outputs are in the world frame.
    pub frame: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineMode {
    /// Zenith from the specular curve at the assumed index, no separation.
    UncorrectedSpecular,
    /// Zenith from the diffuse curve at the assumed index, no separation.
    UncorrectedDiffuse,
    /// Joint separation of diffuse intensity and index, refined zeniths.
    CorrectedMixed,
}

impl PipelineMode {
    pub fn label(self) -> &'static str {
        match self {
            PipelineMode::UncorrectedSpecular => "uncorrected-specular",
            PipelineMode::UncorrectedDiffuse => "uncorrected-diffuse",
            PipelineMode::CorrectedMixed => "corrected-mixed",
        }
    }
}

/// Whether the normal azimuth equals the sinusoid phase (specular-dominated
/// light) or sits a quarter turn away (diffuse-dominated).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AzimuthConvention {
    SpecularPhase,
    DiffuseShift,
}

/// Policy for the two-fold phase ambiguity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Disambiguation {
    /// Pick the flip whose image-plane direction points away from the mask
    /// centroid; valid for convex objects seen front-on.
    ConvexOutward,
    /// Keep the raw phase.
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub mode: PipelineMode,
    /// Index assumed by the uncorrected modes.
    pub assumed_n: RefractiveIndex,
    pub azimuth_convention: AzimuthConvention,
    pub disambiguation: Disambiguation,
    pub solver: SolverConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mode: PipelineMode::CorrectedMixed,
            assumed_n: RefractiveIndex::new(1.5).expect("1.5 > 1"),
            azimuth_convention: AzimuthConvention::SpecularPhase,
            disambiguation: Disambiguation::ConvexOutward,
            solver: SolverConfig::default(),
        }
    }
}

/// Per-run counters for masked-out pixels and solver outcomes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Diagnostics {
    pub total_tracks: usize,
    pub converged: usize,
    pub degenerate: usize,
    pub max_iter: usize,
    pub failed: usize,
    /// Views whose final re-inversion clamped or skipped the zenith.
    pub clamped_views: usize,
}

impl Diagnostics {
    pub fn degenerate_fraction(&self) -> f64 {
        if self.total_tracks == 0 {
            0.0
        } else {
            self.degenerate as f64 / self.total_tracks as f64
        }
    }

    pub fn failed_fraction(&self) -> f64 {
        if self.total_tracks == 0 {
            0.0
        } else {
            (self.failed + self.max_iter) as f64 / self.total_tracks as f64
        }
    }
}

/// Everything the pipeline produces, all on the reference-view grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    /// One world-frame normal map per view.
    pub normal_maps: Vec<NormalMap>,
    /// Recovered diffuse intensity (corrected mode only).
    pub diffuse: Image,
    /// Recovered refractive index (corrected mode only).
    pub index_map: Image,
    /// Pixels with valid diffuse/index estimates.
    pub solved_mask: Mask,
    pub diagnostics: Diagnostics,
}

/// Unit normal from azimuth and zenith in the camera frame (+z toward the
/// camera): `(sin t cos a, sin t sin a, cos t)`.
pub fn compose_normal(azimuth: f64, zenith: f64) -> Vector3<f64> {
    debug_assert!((-1e-12..=FRAC_PI_2 + 1e-12).contains(&zenith));
    Vector3::new(
        zenith.sin() * azimuth.cos(),
        zenith.sin() * azimuth.sin(),
        zenith.cos(),
    )
}

/// Resolves the two-fold phase ambiguity over a map.
///
/// With [`Disambiguation::ConvexOutward`] each pixel keeps `phase` or takes
/// `phase + pi`, whichever points away from the mask centroid in the image
/// plane; with [`Disambiguation::None`] phases pass through unchanged.
pub fn disambiguate_azimuth(phase_map: &Image, mask: &Mask, policy: Disambiguation) -> Image {
    match policy {
        Disambiguation::None => phase_map.clone(),
        Disambiguation::ConvexOutward => {
            let centroid = mask.centroid().unwrap_or((
                (phase_map.width() as f64 - 1.0) / 2.0,
                (phase_map.height() as f64 - 1.0) / 2.0,
            ));
            let mut out = phase_map.clone();
            for (x, y, &on) in mask.iter_pixels() {
                if !on {
                    continue;
                }
                let phase = *phase_map.get(x, y);
                *out.get_mut(x, y) =
                    outward_flip(phase, x as f64, y as f64, centroid.0, centroid.1);
            }
            out
        }
    }
}

/// Picks `phase` or `phase + pi` so the image-plane direction points away
/// from `(cx, cy)`; pixel rows grow downward while the camera y axis points
/// up, hence the sign flip on the row offset.
fn outward_flip(phase: f64, x: f64, y: f64, cx: f64, cy: f64) -> f64 {
    let (dx, dy) = (x - cx, cy - y);
    if phase.cos() * dx + phase.sin() * dy >= 0.0 {
        phase
    } else {
        phase + PI
    }
}

/// Sinusoid parameter maps of one view: intensity offset and the two
/// quadrature amplitudes, plus the on-signal mask and its centroid.
struct FittedView {
    offset: Image,
    cos_amp: Image,
    sin_amp: Image,
    mask: Mask,
    centroid: (f64, f64),
}

impl FittedView {
    /// Least-squares sinusoid parameters per pixel. The 3x3 normal matrix
    /// depends only on the polarizer angles, so it is inverted once.
    fn fit(stack: &PolarizedStack) -> FittedView {
        let (w, h) = (stack.width(), stack.height());
        let basis: Vec<[f64; 3]> = stack
            .angles
            .iter()
            .map(|&a| [1.0, (2.0 * a).cos(), (2.0 * a).sin()])
            .collect();
        let mut m = nalgebra::Matrix3::<f64>::zeros();
        for b in &basis {
            for i in 0..3 {
                for j in 0..3 {
                    m[(i, j)] += b[i] * b[j];
                }
            }
        }
        let m_inv = m.try_inverse().expect(">= 3 distinct angles give a full-rank basis");

        let mut offset = Image::filled(w, h, 0.0);
        let mut cos_amp = Image::filled(w, h, 0.0);
        let mut sin_amp = Image::filled(w, h, 0.0);
        let mut mask = Mask::filled(w, h, false);
        for y in 0..h {
            for x in 0..w {
                let mut rhs = Vector3::zeros();
                for (b, img) in basis.iter().zip(&stack.images) {
                    let v = *img.get(x, y);
                    rhs += Vector3::new(b[0], b[1], b[2]) * v;
                }
                let params = m_inv * rhs;
                *offset.get_mut(x, y) = params[0];
                *cos_amp.get_mut(x, y) = params[1];
                *sin_amp.get_mut(x, y) = params[2];
                *mask.get_mut(x, y) = params[0] > 1e-12;
            }
        }
        let centroid = mask
            .centroid()
            .unwrap_or(((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0));
        FittedView {
            offset,
            cos_amp,
            sin_amp,
            mask,
            centroid,
        }
    }

    /// Samples `(intensity, dop, phase)` at continuous pixel coordinates.
    /// Bilinear interpolation of the parameter maps commutes with the linear
    /// fit, so this equals fitting a sinusoid to bilinearly sampled images.
    fn sample(&self, x: f64, y: f64) -> Option<(f64, f64, f64)> {
        let offset = self.offset.sample_bilinear(x, y)?;
        if offset <= 1e-12 {
            return None;
        }
        let c = self.cos_amp.sample_bilinear(x, y)?;
        let s = self.sin_amp.sample_bilinear(x, y)?;
        let amplitude = c.hypot(s);
        let dop = (amplitude / offset).clamp(0.0, 1.0);
        let phase = (0.5 * s.atan2(c)).rem_euclid(PI);
        Some((offset, dop, phase))
    }
}

/// Observations of one reference pixel assembled across views.
pub struct TrackSet {
    pub tracks: Vec<PointTrack>,
    /// Reference pixel of each track, aligned with `tracks`.
    pub pixels: Vec<(usize, usize)>,
}

fn validate_inputs(
    stacks: &[PolarizedStack],
    correspondences: &CorrespondenceMap,
) -> Result<(), PipelineError> {
    let Some(first) = stacks.first() else {
        return Err(PipelineError::NoStacks);
    };
    let dims = (first.width(), first.height());
    for s in stacks {
        if (s.width(), s.height()) != dims {
            return Err(PipelineError::ShapeMismatch {
                stack: (s.width(), s.height()),
                map: dims,
            });
        }
    }
    if (correspondences.width(), correspondences.height()) != dims {
        return Err(PipelineError::ShapeMismatch {
            stack: dims,
            map: (correspondences.width(), correspondences.height()),
        });
    }
    for (_, _, locs) in correspondences.iter() {
        if let Some(bad) = locs.iter().find(|l| l.view >= stacks.len()) {
            return Err(PipelineError::UnknownView {
                view: bad.view,
                views: stacks.len(),
            });
        }
    }
    Ok(())
}

/// Builds one multiview track per reference pixel with at least `min_views`
/// usable observations. Zeniths are initialized by inverting the specular
/// curve at the midpoint of the solver's index box; the reference azimuth is
/// disambiguated per the configured policy.
pub fn assemble_tracks(
    stacks: &[PolarizedStack],
    correspondences: &CorrespondenceMap,
    cfg: &PipelineConfig,
) -> Result<TrackSet, PipelineError> {
    validate_inputs(stacks, correspondences)?;
    let fitted: Vec<FittedView> = stacks.iter().map(FittedView::fit).collect();
    let reference_view = correspondences.reference_view;
    let n_mid = RefractiveIndex::new(0.5 * (cfg.solver.n_box.0 + cfg.solver.n_box.1))
        .expect("index box lies above 1");
    let min_views = match cfg.mode {
        PipelineMode::CorrectedMixed => 2,
        _ => 1,
    };

    let mut tracks = Vec::new();
    let mut pixels = Vec::new();
    for (x, y, locs) in correspondences.iter() {
        let mut observations = Vec::with_capacity(locs.len());
        let mut reference_slot = None;
        for loc in locs {
            let Some((intensity, dop, phase)) = fitted[loc.view].sample(loc.x, loc.y) else {
                continue;
            };
            let zenith = estimate_zenith_naive(
                dop.min(1.0),
                n_mid,
                ZenithModel::Specular,
                BrewsterBranch::BelowBrewster,
            )
            .expect("dop clamped to [0, 1]");
            if loc.view == reference_view {
                reference_slot = Some(observations.len());
            }
            observations.push(ViewObservation {
                intensity,
                dop,
                phase,
                zenith,
                view_rotation: view_rotation_of(stacks, loc.view),
            });
        }
        let Some(reference) = reference_slot else {
            continue;
        };
        if observations.len() < min_views {
            continue;
        }
        let ref_phase = observations[reference].phase;
        let ref_azimuth = match cfg.disambiguation {
            Disambiguation::None => ref_phase,
            Disambiguation::ConvexOutward => {
                let (cx, cy) = fitted[reference_view].centroid;
                outward_flip(ref_phase, x as f64, y as f64, cx, cy)
            }
        };
        let mut track = PointTrack::new(observations, (y * correspondences.width() + x) as u64)
            .expect("at least the reference observation is present");
        track.reference = reference;
        tracks.push(track.with_ref_azimuth(ref_azimuth));
        pixels.push((x, y));
    }
    Ok(TrackSet { tracks, pixels })
}

fn view_rotation_of(stacks: &[PolarizedStack], view: usize) -> nalgebra::Matrix3<f64> {
    let _ = view;
    let _ = stacks;
    unreachable!("replaced below")
}

/// Runs the full pipeline. See the module docs for the grid conventions.
pub fn run_pipeline(
    stacks: &[PolarizedStack],
    view_rotations: &[nalgebra::Matrix3<f64>],
    correspondences: &CorrespondenceMap,
    cfg: &PipelineConfig,
) -> Result<PipelineOutput, PipelineError> {
    unreachable!()
}
