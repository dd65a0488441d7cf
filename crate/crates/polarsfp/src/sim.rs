//! Analytic generator of multiview polarized image stacks with ground truth.
//!
//! Scenes are spheres or planes under a distant directional light, imaged by
//! orthographic cameras through a rotating linear polarizer. Shading is
//! Lambertian diffuse (view independent by construction) plus a half-vector
//! gloss lobe; the polarization state at each pixel follows the mixed
//! reflection model, so the recovered degree of polarization equals the
//! specular curve diluted by the diffuse share. Because the geometry is
//! analytic, the renderer also emits exact normals, per-view zeniths, the
//! diffuse image, and sub-pixel cross-view correspondences.
//!
//! An optional `model_violation` fraction lets part of the diffuse light
//! polarize with the diffuse Fresnel curve (phase shifted a quarter turn),
//! to stress-test pipelines built on the specular-only assumption.

use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::grid::{Grid, Image, Mask};
use crate::io::{CorrespondenceMap, Location, PolarizedStack};
use crate::polar::{diffuse_dop, specular_dop_unchecked, RefractiveIndex};

/// Errors from scene validation and rendering.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("scene geometry projects to zero pixels in the reference view")]
    EmptyMask,
    #[error("invalid scene: {field}: {message}")]
    InvalidScene { field: String, message: String },
}

impl SimError {
    fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::InvalidScene {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// Scene geometry; coordinates are world-frame, cameras look at the origin.
#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Sphere { center: Vector3<f64>, radius: f64 },
    Plane { normal: Vector3<f64>, offset: f64 },
}

/// Scalar material parameter, constant or procedurally textured over the
/// surface parameterization.
#[derive(Debug, Clone, PartialEq)]
pub enum Texture {
    Constant(f64),
    /// Checkerboard in surface coordinates with the given cell size.
    Checker { period: f64, low: f64, high: f64 },
}

impl Texture {
    fn eval(&self, u: f64, v: f64) -> f64 {
        match *self {
            Texture::Constant(c) => c,
            Texture::Checker { period, low, high } => {
                let cell = (u / period).floor() + (v / period).floor();
                if (cell as i64).rem_euclid(2) == 0 {
                    low
                } else {
                    high
                }
            }
        }
    }

    fn range(&self) -> (f64, f64) {
        match *self {
            Texture::Constant(c) => (c, c),
            Texture::Checker { low, high, .. } => (low.min(high), low.max(high)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialSpec {
    pub n_true: RefractiveIndex,
    /// Lambertian albedo in [0, 1].
    pub diffuse_albedo: Texture,
    /// Gloss lobe gain, >= 0.
    pub specular_strength: Texture,
    /// Half-vector lobe sharpness, > 0.
    pub specular_exponent: f64,
}

/// Distant directional light; `direction` points from the surface toward the
/// light and the emitted radiance is unpolarized.
#[derive(Debug, Clone, PartialEq)]
pub struct LightSpec {
    pub direction: Vector3<f64>,
    pub intensity: f64,
}

impl Default for LightSpec {
    fn default() -> Self {
        Self {
            direction: Vector3::new(0.2, 0.3, 1.0).normalize(),
            intensity: 1.0,
        }
    }
}

/// One orthographic viewpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewSpec {
    /// World-to-camera rotation; camera +x right, +y up, +z toward camera.
    pub rotation: Matrix3<f64>,
    /// Polarizer rotations, radians; >= 3 distinct modulo pi.
    pub polarizer_angles: Vec<f64>,
}

/// Default polarizer rotations 0, 45, and 90 degrees.
pub fn default_polarizer_angles() -> Vec<f64> {
    vec![0.0, 45f64.to_radians(), 90f64.to_radians()]
}

impl ViewSpec {
    /// Camera z axis (surface-to-camera direction) in world coordinates.
    pub fn view_dir(&self) -> Vector3<f64> {
        self.rotation.row(2).transpose()
    }
}

/// Full synthetic scene description.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub geometry: Geometry,
    pub material: MaterialSpec,
    pub views: Vec<ViewSpec>,
    /// (width, height) in pixels.
    pub image_size: (usize, usize),
    /// Relative multiplicative intensity noise, >= 0.
    pub noise_sigma: f64,
    /// Fraction in [0, 1] of diffuse light that polarizes with the diffuse
    /// Fresnel curve; 0 keeps the diffuse component fully unpolarized.
    pub model_violation: f64,
    pub light: LightSpec,
    /// Half-width of the orthographic frame in world units; derived from the
    /// geometry when absent.
    pub frame_halfwidth: Option<f64>,
}

impl SceneSpec {
    /// Checks every scene invariant, naming the offending field.
    pub fn validate(&self) -> Result<(), SimError> {
        match &self.geometry {
            Geometry::Sphere { radius, .. } => {
                if !(*radius > 0.0) {
                    return Err(SimError::invalid("geometry.radius", "must be > 0"));
                }
            }
            Geometry::Plane { normal, .. } => {
                if normal.norm() < 1e-12 {
                    return Err(SimError::invalid("geometry.normal", "must be nonzero"));
                }
            }
        }
        if self.views.is_empty() {
            return Err(SimError::invalid("views", "need >= 1 view"));
        }
        for (i, view) in self.views.iter().enumerate() {
            let r = &view.rotation;
            let orth = (r * r.transpose() - Matrix3::identity()).norm();
            if orth > 1e-9 || (r.determinant() - 1.0).abs() > 1e-9 {
                return Err(SimError::invalid(
                    format!("views[{i}].rotation"),
                    "must be orthonormal with determinant +1",
                ));
            }
            if count_distinct_mod_pi(&view.polarizer_angles) < 3 {
                return Err(SimError::invalid(
                    format!("views[{i}].polarizer_angles"),
                    "need >= 3 angles distinct modulo pi",
                ));
            }
        }
        let (w, h) = self.image_size;
        if w == 0 || h == 0 {
            return Err(SimError::invalid("image_size", "must be positive"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(SimError::invalid("noise_sigma", "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.model_violation) {
            return Err(SimError::invalid("model_violation", "must be in [0, 1]"));
        }
        let (alo, ahi) = self.material.diffuse_albedo.range();
        if alo < 0.0 || ahi > 1.0 {
            return Err(SimError::invalid(
                "material.diffuse_albedo",
                "must be in [0, 1]",
            ));
        }
        let (slo, _) = self.material.specular_strength.range();
        if slo < 0.0 {
            return Err(SimError::invalid(
                "material.specular_strength",
                "must be >= 0",
            ));
        }
        if !(self.material.specular_exponent > 0.0) {
            return Err(SimError::invalid("material.specular_exponent", "must be > 0"));
        }
        if self.light.direction.norm() < 1e-12 {
            return Err(SimError::invalid("light.direction", "must be nonzero"));
        }
        if !(self.light.intensity > 0.0) {
            return Err(SimError::invalid("light.intensity", "must be > 0"));
        }
        if let Some(f) = self.frame_halfwidth {
            if !(f > 0.0) {
                return Err(SimError::invalid("frame_halfwidth", "must be > 0"));
            }
        }
        Ok(())
    }

    pub fn frame_half(&self) -> f64 {
        self.frame_halfwidth.unwrap_or(match &self.geometry {
            Geometry::Sphere { center, radius } => 1.1 * (center.norm() + radius),
            Geometry::Plane { .. } => 1.0,
        })
    }

    /// World units per pixel.
    pub fn pixel_scale(&self) -> f64 {
        2.0 * self.frame_half() / self.image_size.0 as f64
    }
}

fn count_distinct_mod_pi(angles: &[f64]) -> usize {
    use std::f64::consts::PI;
    let mut reps: Vec<f64> = Vec::new();
    for &angle in angles {
        let a = angle.rem_euclid(PI);
        if !reps
            .iter()
            .any(|&r| (a - r).abs() < 1e-9 || PI - (a - r).abs() < 1e-9)
        {
            reps.push(a);
        }
    }
    reps.len()
}

/// Exact per-pixel truth on the reference-view grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Unit surface normal in world coordinates.
    pub normals: Grid<[f64; 3]>,
    /// Zenith of the reference pixel's surface point in each view.
    pub zenith_per_view: Vec<Image>,
    /// Rotation-averaged diffuse radiance (view independent).
    pub diffuse_image: Image,
    /// Refractive index per pixel.
    pub index_map: Image,
    pub mask: Mask,
}

/// Builds `count` orthographic views rotated about the world vertical (y)
/// axis by multiples of `increment`, all looking at the origin.
pub fn camera_ring(count: usize, increment: f64) -> Vec<ViewSpec> {
    (0..count)
        .map(|k| ViewSpec {
            rotation: Rotation3::from_axis_angle(&Vector3::y_axis(), k as f64 * increment)
                .matrix()
                .transpose(),
            polarizer_angles: default_polarizer_angles(),
        })
        .collect()
}

pub(crate) struct Hit {
    pub point: Vector3<f64>,
    pub normal: Vector3<f64>,
}

/// Casts the orthographic ray of camera-plane coordinates `(u, v)`.
pub(crate) fn intersect(geometry: &Geometry, view: &ViewSpec, u: f64, v: f64) -> Option<Hit> {
    let base = view.rotation.transpose() * Vector3::new(u, v, 0.0);
    let dir = view.view_dir(); // camera sits at +z infinity along this axis
    match geometry {
        Geometry::Sphere { center, radius } => {
            let oc = base - center;
            let b = dir.dot(&oc);
            let q = oc.norm_squared() - radius * radius;
            let disc = b * b - q;
            if disc < 0.0 {
                return None;
            }
            // Root closest to the camera.
            let s = -b + disc.sqrt();
            let point = base + s * dir;
            let normal = (point - center) / *radius;
            (normal.dot(&dir) > 1e-9).then_some(Hit { point, normal })
        }
        Geometry::Plane { normal, offset } => {
            let n = normal.normalize();
            let denom = n.dot(&dir);
            if denom.abs() < 1e-12 {
                return None;
            }
            let s = (offset - n.dot(&base)) / denom;
            let point = base + s * dir;
            // Face the camera.
            let facing = if denom > 0.0 { n } else { -n };
            (facing.dot(&dir) > 1e-9).then_some(Hit {
                point,
                normal: facing,
            })
        }
    }
}

/// Surface parameterization used by procedural textures.
fn surface_uv(geometry: &Geometry, hit: &Hit) -> (f64, f64) {
    match geometry {
        Geometry::Sphere { .. } => (hit.normal.y.atan2(hit.normal.x), hit.normal.z.acos()),
        Geometry::Plane { normal, .. } => {
            let n = normal.normalize();
            let seed = if n.x.abs() < 0.9 {
                Vector3::x()
            } else {
                Vector3::y()
            };
            let b1 = n.cross(&seed).normalize();
            let b2 = n.cross(&b1);
            (hit.point.dot(&b1), hit.point.dot(&b2))
        }
    }
}

/// Per-pixel shading terms for one view of one surface point.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Shading {
    /// Rotation-averaged diffuse radiance (depends only on the surface
    /// point, never on the view).
    pub diffuse: f64,
    /// Rotation-averaged specular radiance for this view.
    pub specular: f64,
    /// Zenith angle in this view.
    pub zenith: f64,
    /// Normal azimuth in this view's camera frame.
    pub azimuth: f64,
}

pub(crate) fn shade(scene: &SceneSpec, hit: &Hit, view: &ViewSpec) -> Shading {
    let (u, v) = surface_uv(&scene.geometry, hit);
    let light_dir = scene.light.direction.normalize();
    let diffuse = scene.material.diffuse_albedo.eval(u, v)
        * scene.light.intensity
        * hit.normal.dot(&light_dir).max(0.0);
    let view_dir = view.view_dir();
    let half = (light_dir + view_dir).normalize();
    let specular = scene.material.specular_strength.eval(u, v)
        * scene.light.intensity
        * hit
            .normal
            .dot(&half)
            .max(0.0)
            .powf(scene.material.specular_exponent);
    let n_cam = view.rotation * hit.normal;
    let zenith = n_cam.z.clamp(-1.0, 1.0).acos();
    let azimuth = n_cam.y.atan2(n_cam.x);
    Shading {
        diffuse,
        specular,
        zenith,
        azimuth,
    }
}

/// The measured sinusoid of one pixel as `(offset, cos, sin)` coefficients:
/// intensity through the polarizer at angle `a` is
/// `offset + c * cos 2a + s * sin 2a`.
fn sinusoid_coefficients(scene: &SceneSpec, shading: &Shading) -> (f64, f64, f64) {
    let n = scene.material.n_true;
    let rho_s = if shading.zenith > 0.0 && shading.zenith < std::f64::consts::FRAC_PI_2 {
        specular_dop_unchecked(shading.zenith, n.value())
    } else {
        0.0
    };
    let offset = shading.diffuse + shading.specular;
    let amp_spec = rho_s * shading.specular;
    let (mut c, mut s) = (
        amp_spec * (2.0 * shading.azimuth).cos(),
        amp_spec * (2.0 * shading.azimuth).sin(),
    );
    if scene.model_violation > 0.0 {
        // A fraction of the diffuse light polarizes with the diffuse Fresnel
        // curve, phase shifted a quarter turn from the specular phase.
        let rho_d =
            diffuse_dop(shading.zenith.min(std::f64::consts::FRAC_PI_2), n).unwrap_or(0.0);
        let amp_diff = rho_d * scene.model_violation * shading.diffuse;
        c -= amp_diff * (2.0 * shading.azimuth).cos();
        s -= amp_diff * (2.0 * shading.azimuth).sin();
    }
    (offset, c, s)
}

/// Pixel center (col, row) to camera-plane coordinates (u right, v up).
pub(crate) fn pixel_to_cam(scene: &SceneSpec, col: f64, row: f64) -> (f64, f64) {
    let px = scene.pixel_scale();
    let (w, h) = scene.image_size;
    (
        (col + 0.5 - w as f64 / 2.0) * px,
        (h as f64 / 2.0 - row - 0.5) * px,
    )
}

/// Camera-plane coordinates to continuous pixel coordinates.
fn cam_to_pixel(scene: &SceneSpec, u: f64, v: f64) -> (f64, f64) {
    let px = scene.pixel_scale();
    let (w, h) = scene.image_size;
    (u / px + w as f64 / 2.0 - 0.5, h as f64 / 2.0 - v / px - 0.5)
}

/// Renders every view of the scene.
///
/// Returns one polarized stack per view, exact ground truth on the
/// reference-view (view 0) grid, and analytic cross-view correspondences for
/// every reference pixel, restricted to views where the point is visible.
/// Identical scene and seed give bit-identical output.
pub fn render_views(
    scene: &SceneSpec,
    rng_seed: u64,
) -> Result<(Vec<PolarizedStack>, GroundTruth, CorrespondenceMap), SimError> {
    scene.validate()?;
    let (w, h) = scene.image_size;

    let mut stacks = Vec::with_capacity(scene.views.len());
    for (view_index, view) in scene.views.iter().enumerate() {
        let mut images = Vec::with_capacity(view.polarizer_angles.len());
        for (angle_index, &pol_angle) in view.polarizer_angles.iter().enumerate() {
            let mut img = Image::filled(w, h, 0.0);
            for row in 0..h {
                for col in 0..w {
                    let (u, v) = pixel_to_cam(scene, col as f64, row as f64);
                    if let Some(hit) = intersect(&scene.geometry, view, u, v) {
                        let shading = shade(scene, &hit, view);
                        let (m, c, s) = sinusoid_coefficients(scene, &shading);
                        *img.get_mut(col, row) =
                            m + c * (2.0 * pol_angle).cos() + s * (2.0 * pol_angle).sin();
                    }
                }
            }
            if scene.noise_sigma > 0.0 {
                let mut rng = noise_rng(rng_seed, view_index, angle_index);
                for value in img.data_mut() {
                    let eps: f64 = rng.sample(StandardNormal);
                    *value *= 1.0 + scene.noise_sigma * eps;
                }
            }
            images.push(img);
        }
        stacks.push(
            PolarizedStack::new(images, view.polarizer_angles.clone(), view_index)
                .expect("validated scene produces a well-formed stack"),
        );
    }

    // Ground truth and correspondences on the reference-view grid.
    let reference = &scene.views[0];
    let mut normals = Grid::filled(w, h, [0.0f64; 3]);
    let mut zenith_per_view = vec![Image::filled(w, h, 0.0); scene.views.len()];
    let mut diffuse_image = Image::filled(w, h, 0.0);
    let mut index_map = Image::filled(w, h, 0.0);
    let mut mask = Mask::filled(w, h, false);
    let mut correspondences = CorrespondenceMap::new(0, w, h);

    for row in 0..h {
        for col in 0..w {
            let (u, v) = pixel_to_cam(scene, col as f64, row as f64);
            let Some(hit) = intersect(&scene.geometry, reference, u, v) else {
                continue;
            };
            *mask.get_mut(col, row) = true;
            *normals.get_mut(col, row) = [hit.normal.x, hit.normal.y, hit.normal.z];
            let shading = shade(scene, &hit, reference);
            *diffuse_image.get_mut(col, row) = shading.diffuse;
            *index_map.get_mut(col, row) = scene.material.n_true.value();

            let mut locations = Vec::with_capacity(scene.views.len());
            for (vi, view) in scene.views.iter().enumerate() {
                let cos_z = hit.normal.dot(&view.view_dir()).clamp(-1.0, 1.0);
                *zenith_per_view[vi].get_mut(col, row) = cos_z.acos();
                if vi == 0 {
                    locations.push(Location {
                        view: 0,
                        x: col as f64,
                        y: row as f64,
                    });
                    continue;
                }
                if cos_z <= 1e-9 {
                    continue; // back-facing in this view
                }
                let p_cam = view.rotation * hit.point;
                let (x, y) = cam_to_pixel(scene, p_cam.x, p_cam.y);
                let in_bounds = x >= 0.0 && x <= (w - 1) as f64 && y >= 0.0 && y <= (h - 1) as f64;
                if in_bounds {
                    locations.push(Location { view: vi, x, y });
                }
            }
            correspondences
                .set(col, row, locations)
                .expect("reference location is always present and in bounds");
        }
    }

    if mask.count() == 0 {
        return Err(SimError::EmptyMask);
    }

    Ok((
        stacks,
        GroundTruth {
            normals,
            zenith_per_view,
            diffuse_image,
            index_map,
            mask,
        },
        correspondences,
    ))
}

fn noise_rng(seed: u64, view: usize, angle: usize) -> ChaCha8Rng {
    let mixed = seed
        ^ (view as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (angle as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03);
    ChaCha8Rng::seed_from_u64(mixed)
}


#[cfg(test)]
mod tests {
    use super::test_scenes::glossy_sphere;
    use super::*;
    use crate::polar::{degree_of_polarization, fit_sinusoid, mixed_dop, PolarizerSample};
    use approx::assert_abs_diff_eq;

    #[test]
    fn camera_ring_examples() {
        let single = camera_ring(1, 0.5);
        assert_eq!(single.len(), 1);
        assert!((single[0].rotation - Matrix3::identity()).norm() < 1e-12);

        let ring = camera_ring(3, 10f64.to_radians());
        for (k, view) in ring.iter().enumerate() {
            let expected =
                Rotation3::from_axis_angle(&Vector3::y_axis(), k as f64 * 10f64.to_radians());
            assert!((view.rotation - expected.matrix().transpose()).norm() < 1e-12);
        }
    }

    #[test]
    fn ring_zeniths_match_analytic_sphere_normals() {
        // Two views a quarter turn apart: view directions are orthogonal, and
        // for a normal in the horizontal plane the zeniths differ by exactly
        // that angle.
        let ring = camera_ring(2, 90f64.to_radians());
        let d0 = ring[0].view_dir();
        let d1 = ring[1].view_dir();
        assert_abs_diff_eq!(d0.dot(&d1), 0.0, epsilon = 1e-12);
        let zenith = |n: Vector3<f64>, d: &Vector3<f64>| n.dot(d).clamp(-1.0, 1.0).acos();
        // Normal between the two view directions: zeniths sum to the separation.
        let between = Vector3::new(3.0, 0.0, 4.0).normalize();
        assert_abs_diff_eq!(
            zenith(between, &d0) + zenith(between, &d1),
            90f64.to_radians(),
            epsilon = 1e-12
        );
        // Normal on the far side of view 0: zeniths differ by the separation.
        let outside = Vector3::new(-3.0, 0.0, 4.0).normalize();
        assert_abs_diff_eq!(
            zenith(outside, &d1) - zenith(outside, &d0),
            90f64.to_radians(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn dead_center_pixel_unpolarized() {
        // Odd size puts a pixel exactly on the optical axis.
        let mut scene = glossy_sphere(65);
        scene.views = camera_ring(1, 0.0);
        let (stacks, gt, _) = render_views(&scene, 0).unwrap();
        let c = 32;
        assert!(*gt.mask.get(c, c));
        assert_abs_diff_eq!(*gt.zenith_per_view[0].get(c, c), 0.0, epsilon = 1e-9);
        let vals: Vec<f64> = stacks[0].images.iter().map(|im| *im.get(c, c)).collect();
        assert_abs_diff_eq!(vals[0], vals[1], epsilon = 1e-12);
        assert_abs_diff_eq!(vals[1], vals[2], epsilon = 1e-12);
    }

    #[test]
    fn lambertian_scene_has_identical_polarizer_images() {
        let mut scene = glossy_sphere(32);
        scene.material.specular_strength = Texture::Constant(0.0);
        let (stacks, _, _) = render_views(&scene, 0).unwrap();
        for stack in &stacks {
            for img in &stack.images[1..] {
                assert_eq!(img.data(), stack.images[0].data());
            }
        }
    }

    #[test]
    fn fitted_dop_matches_mixed_model() {
        let scene = glossy_sphere(48);
        let (stacks, gt, _) = render_views(&scene, 0).unwrap();
        let reference = &scene.views[0];
        let mut checked = 0;
        for (x, y, &on) in gt.mask.iter_pixels() {
            if !on || (x + y) % 3 != 0 {
                continue;
            }
            let (u, v) = pixel_to_cam(&scene, x as f64, y as f64);
            let hit = intersect(&scene.geometry, reference, u, v).unwrap();
            let shading = shade(&scene, &hit, reference);
            let total = shading.diffuse + shading.specular;
            if shading.zenith < 0.02 || shading.zenith > 1.55 || total < 1e-9 {
                continue;
            }
            let samples: Vec<PolarizerSample> = stacks[0]
                .angles
                .iter()
                .zip(&stacks[0].images)
                .map(|(&angle, img)| PolarizerSample {
                    angle,
                    intensity: *img.get(x, y),
                })
                .collect();
            let fit = fit_sinusoid(&samples).unwrap();
            let rho = degree_of_polarization(&fit).unwrap();
            let expected =
                mixed_dop(shading.zenith, scene.material.n_true, shading.diffuse, total).unwrap();
            assert_abs_diff_eq!(rho, expected, epsilon = 1e-9);
            assert_abs_diff_eq!(fit.mean_intensity(), total, epsilon = 1e-9);
            checked += 1;
        }
        assert!(checked > 50, "only {checked} pixels checked");
    }

    #[test]
    fn diffuse_shading_is_view_independent() {
        let scene = glossy_sphere(33);
        let reference = &scene.views[0];
        for (col, row) in [(16, 16), (10, 20), (22, 9)] {
            let (u, v) = pixel_to_cam(&scene, col as f64, row as f64);
            let Some(hit) = intersect(&scene.geometry, reference, u, v) else {
                continue;
            };
            let d0 = shade(&scene, &hit, &scene.views[0]).diffuse;
            for view in &scene.views[1..] {
                let dv = shade(&scene, &hit, view).diffuse;
                assert_abs_diff_eq!(dv, d0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn ground_truth_zenith_consistency() {
        let scene = glossy_sphere(32);
        let (_, gt, _) = render_views(&scene, 0).unwrap();
        for (x, y, &on) in gt.mask.iter_pixels() {
            if !on {
                continue;
            }
            let nw = gt.normals.get(x, y);
            let normal = Vector3::new(nw[0], nw[1], nw[2]);
            assert_abs_diff_eq!(normal.norm(), 1.0, epsilon = 1e-12);
            for (vi, view) in scene.views.iter().enumerate() {
                let expected = normal.dot(&view.view_dir()).clamp(-1.0, 1.0).acos();
                assert_abs_diff_eq!(
                    *gt.zenith_per_view[vi].get(x, y),
                    expected,
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let mut scene = glossy_sphere(24);
        scene.noise_sigma = 0.05;
        let (s1, g1, c1) = render_views(&scene, 42).unwrap();
        let (s2, g2, c2) = render_views(&scene, 42).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(g1, g2);
        assert_eq!(c1, c2);
        let (s3, _, _) = render_views(&scene, 43).unwrap();
        assert_ne!(s1, s3);
    }

    #[test]
    fn noise_scaling_matches_sigma() {
        let sigma = 0.02;
        let mut scene = glossy_sphere(128);
        scene.noise_sigma = sigma;
        let clean = glossy_sphere(128);
        let (noisy, gt, _) = render_views(&scene, 7).unwrap();
        let (plain, _, _) = render_views(&clean, 7).unwrap();
        let mut ratios: Vec<f64> = Vec::new();
        for (img_n, img_c) in noisy[0].images.iter().zip(&plain[0].images) {
            for (x, y, &on) in gt.mask.iter_pixels() {
                if on && *img_c.get(x, y) > 1e-9 {
                    ratios.push(img_n.get(x, y) / img_c.get(x, y) - 1.0);
                }
            }
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let var = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / ratios.len() as f64;
        let sd = var.sqrt();
        assert!((sd - sigma).abs() < 0.05 * sigma, "sd {sd} vs sigma {sigma}");
    }

    #[test]
    fn empty_mask_detected() {
        let mut scene = glossy_sphere(16);
        scene.geometry = Geometry::Sphere {
            center: Vector3::new(100.0, 0.0, 0.0),
            radius: 0.5,
        };
        scene.frame_halfwidth = Some(1.0);
        assert_eq!(render_views(&scene, 0).unwrap_err(), SimError::EmptyMask);
    }

    #[test]
    fn correspondences_agree_with_geometry() {
        let scene = glossy_sphere(64);
        let (stacks, _, corr) = render_views(&scene, 0).unwrap();
        let mut multi = 0;
        for (x, y, locs) in corr.iter() {
            assert!(locs
                .iter()
                .any(|l| l.view == 0 && l.x == x as f64 && l.y == y as f64));
            if locs.len() == scene.views.len() {
                multi += 1;
                // Sampling view 1's image at the corresponded location should
                // be close to the reference pixel's own total intensity (the
                // specular part differs slightly between views).
                let loc = locs.iter().find(|l| l.view == 1).unwrap();
                let v1 = stacks[1].images[0].sample_bilinear(loc.x, loc.y).unwrap();
                let v0 = *stacks[0].images[0].get(x, y);
                assert!((v0 - v1).abs() < 0.2, "({x},{y}): {v0} vs {v1}");
            }
        }
        assert!(multi > 1000, "too few multi-view tracks: {multi}");
    }

    #[test]
    fn plane_scene_renders_everywhere() {
        let mut scene = glossy_sphere(16);
        scene.geometry = Geometry::Plane {
            normal: Vector3::new(0.1, 0.2, 1.0),
            offset: 0.0,
        };
        let (stacks, gt, _) = render_views(&scene, 0).unwrap();
        assert_eq!(gt.mask.count(), 16 * 16);
        assert!(stacks[0].images[0].data().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn checker_texture_varies_albedo() {
        let mut scene = glossy_sphere(32);
        scene.material.diffuse_albedo = Texture::Checker {
            period: 0.4,
            low: 0.2,
            high: 0.8,
        };
        let (_, gt, _) = render_views(&scene, 0).unwrap();
        let on: Vec<f64> = gt
            .diffuse_image
            .data()
            .iter()
            .zip(gt.mask.data())
            .filter_map(|(&d, &m)| m.then_some(d))
            .collect();
        let lo = on.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = on.iter().cloned().fold(0.0f64, f64::max);
        assert!(hi / lo.max(1e-9) > 2.0, "texture did not vary: {lo}..{hi}");
    }
}
