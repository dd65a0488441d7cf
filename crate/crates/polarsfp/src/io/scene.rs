//! Strict, versioned JSON schema for scene descriptions.
//!
//! Unknown keys are rejected with the offending key named, and every scene
//! invariant is re-checked after parsing. `schema_version` must be 1.

use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::polar::RefractiveIndex;
use crate::sim::{
    default_polarizer_angles, Geometry, LightSpec, MaterialSpec, SceneSpec, Texture, ViewSpec,
};

use super::IoFormatError;

const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDoc {
    schema_version: u32,
    geometry: GeometryDoc,
    material: MaterialDoc,
    views: Vec<ViewDoc>,
    image_size: (usize, usize),
    #[serde(default)]
    noise_sigma: f64,
    #[serde(default)]
    model_violation: f64,
    #[serde(default)]
    light: Option<LightDoc>,
    #[serde(default)]
    frame_halfwidth: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum GeometryDoc {
    Sphere { center: [f64; 3], radius: f64 },
    Plane { normal: [f64; 3], offset: f64 },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaterialDoc {
    n_true: f64,
    diffuse_albedo: TextureDoc,
    specular_strength: TextureDoc,
    specular_exponent: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
enum TextureDoc {
    Constant(f64),
    Checker {
        checker: CheckerDoc,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckerDoc {
    period: f64,
    low: f64,
    high: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ViewDoc {
    /// World-to-camera rotation, row-major.
    rotation: [[f64; 3]; 3],
    /// Defaults to 0, 45, 90 degrees when omitted.
    #[serde(default)]
    polarizer_angles: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LightDoc {
    direction: [f64; 3],
    intensity: f64,
}

fn doc_to_scene(doc: SceneDoc) -> Result<SceneSpec, IoFormatError> {
    if doc.schema_version != SCHEMA_VERSION {
        return Err(IoFormatError::schema(
            "schema_version",
            format!("expected {SCHEMA_VERSION}, got {}", doc.schema_version),
        ));
    }
    let geometry = match doc.geometry {
        GeometryDoc::Sphere { center, radius } => Geometry::Sphere {
            center: Vector3::from(center),
            radius,
        },
        GeometryDoc::Plane { normal, offset } => Geometry::Plane {
            normal: Vector3::from(normal),
            offset,
        },
    };
    let texture = |t: TextureDoc| match t {
        TextureDoc::Constant(c) => Texture::Constant(c),
        TextureDoc::Checker { checker } => Texture::Checker {
            period: checker.period,
            low: checker.low,
            high: checker.high,
        },
    };
    let material = MaterialSpec {
        n_true: RefractiveIndex::new(doc.material.n_true)
            .map_err(|e| IoFormatError::schema("material.n_true", e.to_string()))?,
        diffuse_albedo: texture(doc.material.diffuse_albedo),
        specular_strength: texture(doc.material.specular_strength),
        specular_exponent: doc.material.specular_exponent,
    };
    let views = doc
        .views
        .into_iter()
        .map(|v| ViewSpec {
            rotation: Matrix3::from_fn(|r, c| v.rotation[r][c]),
            polarizer_angles: v.polarizer_angles.unwrap_or_else(default_polarizer_angles),
        })
        .collect();
    let light = doc
        .light
        .map(|l| LightSpec {
            direction: Vector3::from(l.direction),
            intensity: l.intensity,
        })
        .unwrap_or_default();
    let scene = SceneSpec {
        geometry,
        material,
        views,
        image_size: doc.image_size,
        noise_sigma: doc.noise_sigma,
        model_violation: doc.model_violation,
        light,
        frame_halfwidth: doc.frame_halfwidth,
    };
    scene.validate().map_err(|e| match e {
        crate::sim::SimError::InvalidScene { field, message } => {
            IoFormatError::schema(field, message)
        }
        other => IoFormatError::schema("scene", other.to_string()),
    })?;
    Ok(scene)
}

fn scene_to_doc(scene: &SceneSpec) -> SceneDoc {
    let texture = |t: &Texture| match *t {
        Texture::Constant(c) => TextureDoc::Constant(c),
        Texture::Checker { period, low, high } => TextureDoc::Checker {
            checker: CheckerDoc { period, low, high },
        },
    };
    SceneDoc {
        schema_version: SCHEMA_VERSION,
        geometry: match &scene.geometry {
            Geometry::Sphere { center, radius } => GeometryDoc::Sphere {
                center: [center.x, center.y, center.z],
                radius: *radius,
            },
            Geometry::Plane { normal, offset } => GeometryDoc::Plane {
                normal: [normal.x, normal.y, normal.z],
                offset: *offset,
            },
        },
        material: MaterialDoc {
            n_true: scene.material.n_true.value(),
            diffuse_albedo: texture(&scene.material.diffuse_albedo),
            specular_strength: texture(&scene.material.specular_strength),
            specular_exponent: scene.material.specular_exponent,
        },
        views: scene
            .views
            .iter()
            .map(|v| ViewDoc {
                rotation: [
                    [v.rotation[(0, 0)], v.rotation[(0, 1)], v.rotation[(0, 2)]],
                    [v.rotation[(1, 0)], v.rotation[(1, 1)], v.rotation[(1, 2)]],
                    [v.rotation[(2, 0)], v.rotation[(2, 1)], v.rotation[(2, 2)]],
                ],
                polarizer_angles: Some(v.polarizer_angles.clone()),
            })
            .collect(),
        image_size: scene.image_size,
        noise_sigma: scene.noise_sigma,
        model_violation: scene.model_violation,
        light: Some(LightDoc {
            direction: [
                scene.light.direction.x,
                scene.light.direction.y,
                scene.light.direction.z,
            ],
            intensity: scene.light.intensity,
        }),
        frame_halfwidth: scene.frame_halfwidth,
    }
}

/// Parses a scene from JSON text.
pub fn scene_from_json(text: &str) -> Result<SceneSpec, IoFormatError> {
    let doc: SceneDoc = serde_json::from_str(text)?;
    doc_to_scene(doc)
}

/// Serializes a scene to pretty-printed JSON.
pub fn scene_to_json(scene: &SceneSpec) -> String {
    serde_json::to_string_pretty(&scene_to_doc(scene)).expect("scene serialization cannot fail")
}

pub fn read_scene(path: impl AsRef<Path>) -> Result<SceneSpec, IoFormatError> {
    scene_from_json(&fs::read_to_string(path)?)
}

pub fn write_scene(scene: &SceneSpec, path: impl AsRef<Path>) -> Result<(), IoFormatError> {
    fs::write(path, scene_to_json(scene))?;
    Ok(())
}
