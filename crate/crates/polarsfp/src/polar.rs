//! Closed-form polarization models.
//!
//! A linear polarizer rotating in front of the camera turns the radiance of a
//! scene point into a sinusoid in twice the polarizer angle. The offset,
//! amplitude, and phase of that sinusoid are the raw measurements of shape
//! from polarization; the Fresnel curves in this module connect them to the
//! zenith angle and the refractive index for specular, diffuse, and mixed
//! reflection.
//!
//! Everything here is a pure function of value types and safe to call
//! concurrently.

use std::f64::consts::PI;

use thiserror::Error;

/// Relative amplitude below which a sinusoid fit is considered unpolarized
/// and its phase unobservable.
pub const DEGENERATE_AMPLITUDE: f64 = 1e-4;

/// Errors from the closed-form polarization models.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolarError {
    /// Sinusoid fitting needs at least three samples whose polarizer angles
    /// are distinct modulo pi.
    #[error("need >= 3 polarizer samples with angles distinct modulo pi, got {distinct} distinct of {total}")]
    DegenerateSampling { distinct: usize, total: usize },
    /// Degree of polarization is undefined for an all-zero signal.
    #[error("total intensity is zero; degree of polarization undefined")]
    ZeroIntensity,
    /// An angle or intensity argument is outside the model's domain.
    #[error("{name} = {value} outside valid domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },
    /// Refractive index must exceed 1 for a solid dielectric.
    #[error("refractive index must be > 1, got {0}")]
    InvalidIndex(f64),
}

/// Dimensionless refractive index of a solid dielectric, constrained to n > 1.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct RefractiveIndex(f64);

impl RefractiveIndex {
    pub fn new(n: f64) -> Result<Self, PolarError> {
        if n.is_finite() && n > 1.0 {
            Ok(Self(n))
        } else {
            Err(PolarError::InvalidIndex(n))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Brewster angle `arctan n`, where specular reflection is fully polarized.
    pub fn brewster(self) -> f64 {
        self.0.atan()
    }
}

/// One intensity reading through the polarizer at a known rotation angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizerSample {
    /// Polarizer rotation in radians.
    pub angle: f64,
    /// Measured radiance, >= 0, arbitrary linear units.
    pub intensity: f64,
}

/// Per-pixel sinusoid recovered from polarizer samples: the extremes of the
/// intensity over a full polarizer rotation and the phase of the maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinusoidFit {
    /// Maximum intensity over the polarizer rotation.
    pub i_max: f64,
    /// Minimum intensity over the polarizer rotation.
    pub i_min: f64,
    /// Phase of the maximum, in `[0, pi)`; 0 by convention when degenerate.
    pub phase: f64,
    /// Set when the relative amplitude is below [`DEGENERATE_AMPLITUDE`] and
    /// the phase is unobservable.
    pub degenerate: bool,
    /// Set when noise drove the fitted minimum below zero and it was clamped.
    pub negative_clamped: bool,
}

impl SinusoidFit {
    /// A fit from explicit extremes and phase. `i_max >= i_min >= 0`,
    /// phase is wrapped into `[0, pi)`.
    pub fn new(i_max: f64, i_min: f64, phase: f64) -> Result<Self, PolarError> {
        if !(i_max.is_finite() && i_min.is_finite() && i_max >= i_min && i_min >= 0.0) {
            return Err(PolarError::Domain {
                name: "i_max/i_min",
                value: i_min,
                domain: "i_max >= i_min >= 0",
            });
        }
        let total = i_max + i_min;
        let degenerate = total <= 0.0 || (i_max - i_min) / total < DEGENERATE_AMPLITUDE;
        Ok(Self {
            i_max,
            i_min,
            phase: if degenerate { 0.0 } else { wrap_pi(phase) },
            degenerate,
            negative_clamped: false,
        })
    }

    /// Rotation-averaged intensity, the DC offset of the sinusoid.
    pub fn mean_intensity(&self) -> f64 {
        0.5 * (self.i_max + self.i_min)
    }

    /// Half the peak-to-peak swing.
    pub fn amplitude(&self) -> f64 {
        0.5 * (self.i_max - self.i_min)
    }
}

/// Radiance split of a mixed observation.
///
/// All terms are rotation-averaged: `total` is the sinusoid's DC offset,
/// `specular` the DC offset of the specular part alone, and
/// `spec_max`/`spec_min` its extremes, so `spec_max + spec_min = 2 * specular`
/// and `total = diffuse + specular`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityDecomposition {
    pub total: f64,
    pub diffuse: f64,
    pub specular: f64,
    pub spec_max: f64,
    pub spec_min: f64,
}

impl IntensityDecomposition {
    /// Builds the decomposition from a diffuse/specular split and the
    /// specular degree of polarization.
    pub fn from_components(diffuse: f64, specular: f64, specular_dop: f64) -> Self {
        Self {
            total: diffuse + specular,
            diffuse,
            specular,
            spec_max: specular * (1.0 + specular_dop),
            spec_min: specular * (1.0 - specular_dop),
        }
    }
}

fn wrap_pi(phase: f64) -> f64 {
    let p = phase.rem_euclid(PI);
    if p == PI {
        0.0
    } else {
        p
    }
}

/// Intensity seen through the polarizer at `pol_angle` for a fitted sinusoid.
pub fn eval_sinusoid(fit: &SinusoidFit, pol_angle: f64) -> f64 {
    fit.mean_intensity() + fit.amplitude() * (2.0 * (pol_angle - fit.phase)).cos()
}

/// Least-squares sinusoid fit from polarizer samples.
///
/// The sinusoid is linear in the basis `(1, cos 2a, sin 2a)`, so the fit is a
/// 3x3 normal-equation solve; with exactly three well-posed samples it
/// interpolates. Angles must be distinct modulo pi (three distinct points on
/// the double-angle circle are never collinear). A fitted minimum below zero
/// is clamped and flagged, and a relative amplitude below
/// [`DEGENERATE_AMPLITUDE`] marks the fit degenerate with phase 0.
pub fn fit_sinusoid(samples: &[PolarizerSample]) -> Result<SinusoidFit, PolarError> {
    let distinct = count_distinct_mod_pi(samples);
    if distinct < 3 {
        return Err(PolarError::DegenerateSampling {
            distinct,
            total: samples.len(),
        });
    }

    // Normal equations for y = a0 + a1 cos 2a + a2 sin 2a.
    let mut ata = [[0.0f64; 3]; 3];
    let mut aty = [0.0f64; 3];
    for s in samples {
        let b = [1.0, (2.0 * s.angle).cos(), (2.0 * s.angle).sin()];
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += b[i] * b[j];
            }
            aty[i] += b[i] * s.intensity;
        }
    }
    let coef = solve3(ata, aty).ok_or(PolarError::DegenerateSampling {
        distinct,
        total: samples.len(),
    })?;
    let [a0, a1, a2] = coef;
    let amplitude = a1.hypot(a2);

    let mut i_max = a0 + amplitude;
    let mut i_min = a0 - amplitude;
    let mut negative_clamped = false;
    if i_min < 0.0 {
        i_min = 0.0;
        negative_clamped = true;
        if i_max < 0.0 {
            i_max = 0.0;
        }
    }
    let total = i_max + i_min;
    let degenerate = total <= 0.0 || (i_max - i_min) / total < DEGENERATE_AMPLITUDE;
    let phase = if degenerate {
        0.0
    } else {
        wrap_pi(0.5 * a2.atan2(a1))
    };
    Ok(SinusoidFit {
        i_max,
        i_min,
        phase,
        degenerate,
        negative_clamped,
    })
}

fn count_distinct_mod_pi(samples: &[PolarizerSample]) -> usize {
    const TOL: f64 = 1e-9;
    let mut reps: Vec<f64> = Vec::new();
    for s in samples {
        let a = s.angle.rem_euclid(PI);
        let dup = reps
            .iter()
            .any(|&r| (a - r).abs() < TOL || (PI - (a - r).abs()) < TOL);
        if !dup {
            reps.push(a);
        }
    }
    reps.len()
}

/// Solves a symmetric 3x3 system by Gaussian elimination with partial pivoting.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut s = b[row];
        for k in (row + 1)..3 {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

/// Degree of linear polarization `(i_max - i_min) / (i_max + i_min)`.
pub fn degree_of_polarization(fit: &SinusoidFit) -> Result<f64, PolarError> {
    let total = fit.i_max + fit.i_min;
    if total <= 0.0 {
        return Err(PolarError::ZeroIntensity);
    }
    Ok((fit.i_max - fit.i_min) / total)
}

/// Degree of polarization of a purely specular reflection at zenith `theta`.
///
/// Rises from 0 at normal incidence to exactly 1 at the Brewster angle
/// `arctan n`, then falls back toward 0 at grazing incidence.
pub fn specular_dop(theta: f64, n: RefractiveIndex) -> Result<f64, PolarError> {
    if !(0.0..PI / 2.0).contains(&theta) {
        return Err(PolarError::Domain {
            name: "theta",
            value: theta,
            domain: "[0, pi/2)",
        });
    }
    Ok(specular_dop_unchecked(theta, n.value()))
}

pub(crate) fn specular_dop_unchecked(theta: f64, n: f64) -> f64 {
    let s = theta.sin();
    let t = theta.tan();
    2.0 * s * t * (n * n - s * s).sqrt() / (n * n - 2.0 * s * s + t * t)
}

/// Degree of polarization of light scattered inside the surface and refracted
/// back into air (purely diffuse reflection); strictly increasing on
/// `[0, pi/2]`.
pub fn diffuse_dop(theta: f64, n: RefractiveIndex) -> Result<f64, PolarError> {
    if !(0.0..=PI / 2.0).contains(&theta) {
        return Err(PolarError::Domain {
            name: "theta",
            value: theta,
            domain: "[0, pi/2]",
        });
    }
    let nv = n.value();
    let s = theta.sin();
    let s2 = s * s;
    let a = nv - 1.0 / nv;
    let b = nv + 1.0 / nv;
    let num = a * a * s2;
    let den = 2.0 + 2.0 * nv * nv - b * b * s2 + 4.0 * theta.cos() * (nv * nv - s2).sqrt();
    Ok(num / den)
}

/// Degree of polarization of a mixed observation in which only the specular
/// component polarizes: the pure specular value diluted by the diffuse share,
/// `specular_dop * (total - diffuse) / total`.
pub fn mixed_dop(
    theta: f64,
    n: RefractiveIndex,
    diffuse: f64,
    total: f64,
) -> Result<f64, PolarError> {
    if !(diffuse >= 0.0 && diffuse <= total) {
        return Err(PolarError::Domain {
            name: "diffuse",
            value: diffuse,
            domain: "[0, total]",
        });
    }
    if total <= 0.0 {
        return Err(PolarError::Domain {
            name: "total",
            value: total,
            domain: "> 0",
        });
    }
    Ok(specular_dop(theta, n)? * (total - diffuse) / total)
}

/// Diffuse intensity implied by one view's observation, assuming the zenith
/// and refractive index are known: `I * (1 - rho / specular_dop(theta, n))`.
///
/// Singular at `theta = 0` where the specular curve vanishes. The result may
/// be negative for inconsistent inputs; it is returned unclamped so the
/// solver sees the raw residual.
pub fn diffuse_from_view(
    intensity: f64,
    rho: f64,
    theta: f64,
    n: RefractiveIndex,
) -> Result<f64, PolarError> {
    if !(theta > 0.0 && theta < PI / 2.0) {
        return Err(PolarError::Domain {
            name: "theta",
            value: theta,
            domain: "(0, pi/2)",
        });
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(PolarError::Domain {
            name: "rho",
            value: rho,
            domain: "[0, 1]",
        });
    }
    let spec = specular_dop_unchecked(theta, n.value());
    Ok(intensity * (1.0 - rho / spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    // Reference values computed independently with 50-digit arithmetic.
    pub(crate) const SPEC_DOP_45_15: f64 = 0.83147941928309808569;
    pub(crate) const DIFF_DOP_45_15: f64 = 0.043983162187631827991;

    fn deg(d: f64) -> f64 {
        d.to_radians()
    }

    fn n(v: f64) -> RefractiveIndex {
        RefractiveIndex::new(v).unwrap()
    }

    #[test]
    fn eval_sinusoid_examples() {
        let flat = SinusoidFit::new(1.0, 1.0, 0.7).unwrap();
        for a in [0.0, 0.3, 1.2, 4.0] {
            assert_abs_diff_eq!(eval_sinusoid(&flat, a), 1.0, epsilon = 1e-15);
        }
        let full = SinusoidFit::new(2.0, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(eval_sinusoid(&full, 0.0), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(eval_sinusoid(&full, PI / 2.0), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn fit_three_point_example() {
        // Closed form via the linear system; cross-checked below by grid search.
        let samples = [
            PolarizerSample { angle: 0.0, intensity: 1.5 },
            PolarizerSample { angle: deg(45.0), intensity: 1.0 },
            PolarizerSample { angle: deg(90.0), intensity: 0.5 },
        ];
        let fit = fit_sinusoid(&samples).unwrap();
        assert_abs_diff_eq!(fit.i_max, 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.i_min, 0.5, epsilon = 1e-12);
        // Distance to 0 on the mod-pi phase circle.
        assert!(fit.phase.min(PI - fit.phase) < 1e-12);
        assert!(!fit.degenerate);
    }

    #[test]
    fn fit_matches_dense_grid_search() {
        // Independent oracle: dense search over (i_max, i_min, phase).
        let samples = [
            PolarizerSample { angle: 0.0, intensity: 1.5 },
            PolarizerSample { angle: deg(45.0), intensity: 1.0 },
            PolarizerSample { angle: deg(90.0), intensity: 0.5 },
        ];
        let sse = |i_max: f64, i_min: f64, phase: f64| -> f64 {
            let f = SinusoidFit {
                i_max,
                i_min,
                phase,
                degenerate: false,
                negative_clamped: false,
            };
            samples
                .iter()
                .map(|s| (eval_sinusoid(&f, s.angle) - s.intensity).powi(2))
                .sum()
        };
        let mut best = (f64::INFINITY, 0.0, 0.0, 0.0);
        for im in 0..=60 {
            for il in 0..=60 {
                for ph in 0..60 {
                    let (i_max, i_min) = (im as f64 * 0.05, il as f64 * 0.05);
                    if i_min > i_max {
                        continue;
                    }
                    let phase = ph as f64 * PI / 60.0;
                    let v = sse(i_max, i_min, phase);
                    if v < best.0 {
                        best = (v, i_max, i_min, phase);
                    }
                }
            }
        }
        let fit = fit_sinusoid(&samples).unwrap();
        assert_abs_diff_eq!(fit.i_max, best.1, epsilon = 0.05);
        assert_abs_diff_eq!(fit.i_min, best.2, epsilon = 0.05);
        assert!(fit.phase.min(PI - fit.phase) < 0.06 || (fit.phase - best.3).abs() < 0.06);
    }

    #[test]
    fn fit_constant_signal_is_degenerate() {
        let samples: Vec<_> = [0.0, deg(45.0), deg(90.0)]
            .iter()
            .map(|&a| PolarizerSample { angle: a, intensity: 0.8 })
            .collect();
        let fit = fit_sinusoid(&samples).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.phase, 0.0);
        assert_abs_diff_eq!(fit.i_max, 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.i_min, 0.8, epsilon = 1e-12);
    }

    #[test]
    fn fit_rejects_coincident_angles() {
        let samples = [
            PolarizerSample { angle: 0.0, intensity: 1.0 },
            PolarizerSample { angle: PI, intensity: 1.0 },
            PolarizerSample { angle: deg(45.0), intensity: 0.7 },
        ];
        assert!(matches!(
            fit_sinusoid(&samples),
            Err(PolarError::DegenerateSampling { distinct: 2, total: 3 })
        ));
    }

    #[test]
    fn fit_clamps_negative_minimum() {
        // Samples from a sinusoid dipping below zero.
        let f = SinusoidFit {
            i_max: 1.0,
            i_min: -0.2,
            phase: 0.3,
            degenerate: false,
            negative_clamped: false,
        };
        let samples: Vec<_> = [0.0, deg(60.0), deg(120.0)]
            .iter()
            .map(|&a| PolarizerSample { angle: a, intensity: eval_sinusoid(&f, a) })
            .collect();
        let fit = fit_sinusoid(&samples).unwrap();
        assert!(fit.negative_clamped);
        assert_eq!(fit.i_min, 0.0);
    }

    #[test]
    fn dop_examples() {
        let f = |a, b| SinusoidFit::new(a, b, 0.0).unwrap();
        assert_eq!(degree_of_polarization(&f(2.0, 2.0)).unwrap(), 0.0);
        assert_eq!(degree_of_polarization(&f(1.0, 0.0)).unwrap(), 1.0);
        assert_eq!(degree_of_polarization(&f(3.0, 1.0)).unwrap(), 0.5);
        assert!(matches!(
            degree_of_polarization(&f(0.0, 0.0)),
            Err(PolarError::ZeroIntensity)
        ));
    }

    #[test]
    fn specular_dop_anchors() {
        assert_eq!(specular_dop(0.0, n(1.5)).unwrap(), 0.0);
        for nv in [1.1f64, 1.3, 1.5, 1.8, 2.0] {
            let brewster = nv.atan();
            assert_abs_diff_eq!(
                specular_dop(brewster, n(nv)).unwrap(),
                1.0,
                epsilon = 1e-12
            );
        }
        assert_abs_diff_eq!(
            specular_dop(deg(45.0), n(1.5)).unwrap(),
            SPEC_DOP_45_15,
            epsilon = 1e-12
        );
        assert!(specular_dop(PI / 2.0, n(1.5)).is_err());
    }

    #[test]
    fn diffuse_dop_anchors() {
        for nv in [1.1, 1.5, 2.0] {
            assert_eq!(diffuse_dop(0.0, n(nv)).unwrap(), 0.0);
        }
        // As n -> 1 the curve collapses to zero.
        assert!(diffuse_dop(deg(70.0), n(1.0 + 1e-9)).unwrap() < 1e-8);
        assert_abs_diff_eq!(
            diffuse_dop(deg(45.0), n(1.5)).unwrap(),
            DIFF_DOP_45_15,
            epsilon = 1e-12
        );
        // Closed form at grazing: (n^2-1)/(n^2+1).
        assert_abs_diff_eq!(
            diffuse_dop(PI / 2.0, n(1.5)).unwrap(),
            (1.5f64 * 1.5 - 1.0) / (1.5f64 * 1.5 + 1.0),
            epsilon = 1e-12
        );
        assert!(diffuse_dop(-0.1, n(1.5)).is_err());
    }

    #[test]
    fn mixed_dop_examples() {
        assert_eq!(mixed_dop(deg(40.0), n(1.5), 1.0, 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            mixed_dop(deg(40.0), n(1.5), 0.0, 1.0).unwrap(),
            specular_dop(deg(40.0), n(1.5)).unwrap(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            mixed_dop(deg(45.0), n(1.5), 0.5, 1.0).unwrap(),
            0.5 * SPEC_DOP_45_15,
            epsilon = 1e-12
        );
        assert!(mixed_dop(deg(45.0), n(1.5), 1.5, 1.0).is_err());
    }

    #[test]
    fn diffuse_from_view_examples() {
        assert_abs_diff_eq!(
            diffuse_from_view(0.7, 0.0, deg(30.0), n(1.5)).unwrap(),
            0.7,
            epsilon = 1e-15
        );
        let rho = specular_dop(deg(30.0), n(1.5)).unwrap();
        assert_abs_diff_eq!(
            diffuse_from_view(0.7, rho, deg(30.0), n(1.5)).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            diffuse_from_view(1.0, 0.5 * SPEC_DOP_45_15, deg(45.0), n(1.5)).unwrap(),
            0.5,
            epsilon = 1e-12
        );
        assert!(diffuse_from_view(1.0, 0.1, 0.0, n(1.5)).is_err());
    }

    #[test]
    fn specular_monotone_around_brewster() {
        for nv in [1.1, 1.3, 1.5, 1.8, 2.0] {
            let ni = n(nv);
            let brewster = ni.brewster();
            let mut prev = -1.0;
            for k in 0..=400 {
                let th = brewster * k as f64 / 400.0;
                let v = specular_dop(th, ni).unwrap();
                assert!(v >= prev, "not increasing below Brewster at n={nv}");
                prev = v;
            }
            let mut prev = 2.0;
            for k in 1..=400 {
                let th = brewster + (PI / 2.0 - 1e-6 - brewster) * k as f64 / 400.0;
                let v = specular_dop(th, ni).unwrap();
                assert!(v <= prev, "not decreasing above Brewster at n={nv}");
                prev = v;
            }
        }
    }

    #[test]
    fn diffuse_strictly_increasing() {
        for nv in [1.05, 1.3, 1.7, 2.1, 2.5] {
            let ni = n(nv);
            let mut prev = -1.0;
            for k in 0..=500 {
                let th = (PI / 2.0) * k as f64 / 500.0;
                let v = diffuse_dop(th, ni).unwrap();
                assert!(v > prev, "diffuse curve not increasing at n={nv}, k={k}");
                prev = v;
            }
        }
    }

    proptest! {
        #[test]
        fn sinusoid_round_trip(
            i_min in 0.0f64..2.0,
            extra in 0.01f64..3.0,
            phase in 0.0f64..PI,
        ) {
            let orig = SinusoidFit::new(i_min + extra, i_min, phase).unwrap();
            prop_assume!(!orig.degenerate);
            let samples: Vec<_> = [0.0, deg(45.0), deg(90.0)]
                .iter()
                .map(|&a| PolarizerSample { angle: a, intensity: eval_sinusoid(&orig, a) })
                .collect();
            let fit = fit_sinusoid(&samples).unwrap();
            let scale = orig.i_max.abs().max(1.0);
            prop_assert!((fit.i_max - orig.i_max).abs() < 1e-9 * scale);
            prop_assert!((fit.i_min - orig.i_min).abs() < 1e-9 * scale);
            let dphase = (fit.phase - orig.phase).abs();
            prop_assert!(dphase.min(PI - dphase) < 1e-9);
        }

        #[test]
        fn sinusoid_pi_periodic_and_phase_ambiguous(
            i_min in 0.0f64..2.0,
            extra in 0.0f64..3.0,
            phase in 0.0f64..PI,
            angle in -10.0f64..10.0,
        ) {
            let fit = SinusoidFit::new(i_min + extra, i_min, phase).unwrap();
            let v = eval_sinusoid(&fit, angle);
            prop_assert!((eval_sinusoid(&fit, angle + PI) - v).abs() < 1e-9);
            let shifted = SinusoidFit { phase: fit.phase + PI, ..fit };
            prop_assert!((eval_sinusoid(&shifted, angle) - v).abs() < 1e-9);
        }

        #[test]
        fn mixed_inversion_identity(
            theta_deg in 5.0f64..85.0,
            nv in 1.1f64..2.2,
            total in 0.1f64..4.0,
            frac in 0.0f64..1.0,
        ) {
            let ni = n(nv);
            let diffuse = frac * total;
            let rho = mixed_dop(deg(theta_deg), ni, diffuse, total).unwrap();
            let back = diffuse_from_view(total, rho, deg(theta_deg), ni).unwrap();
            prop_assert!((back - diffuse).abs() < 1e-9 * total.max(1.0));
        }

        #[test]
        fn mixed_never_exceeds_specular(
            theta_deg in 1.0f64..89.0,
            nv in 1.05f64..2.5,
            total in 0.1f64..4.0,
            frac in 0.0f64..1.0,
        ) {
            let ni = n(nv);
            let rho = mixed_dop(deg(theta_deg), ni, frac * total, total).unwrap();
            prop_assert!(rho <= specular_dop(deg(theta_deg), ni).unwrap() + 1e-15);
        }
    }
}
