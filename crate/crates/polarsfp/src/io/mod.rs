//! On-disk formats: PFM float images, JSON scene and correspondence
//! documents, and CSV metrics tables.
//!
//! Every pipeline stage reads and writes through these formats so runs are
//! scriptable and diffable. PFM round trips are bit-exact for f32 data;
//! JSON documents are strict (unknown keys rejected) and versioned.

mod correspondence;
mod metrics;
mod pfm;
mod scene;

pub use correspondence::{read_correspondences, write_correspondences, CorrespondenceMap, Location};
pub use metrics::{read_metrics_csv, write_metrics_csv, MetricsRow, METRICS_HEADER};
pub use pfm::{read_pfm, write_pfm, PfmData};
pub use scene::{read_scene, scene_from_json, scene_to_json, write_scene};

use thiserror::Error;

use crate::grid::{Grid, Image};

/// Errors from readers and writers in this module.
#[derive(Debug, Error)]
pub enum IoFormatError {
    #[error("malformed PFM header: {0}")]
    MalformedHeader(String),
    #[error("truncated PFM payload: expected {expected} bytes, got {got}")]
    TruncatedData { expected: usize, got: usize },
    #[error("non-finite sample at index {0}; PFM stores finite floats only")]
    NonFiniteSample(usize),
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl IoFormatError {
    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// One view's polarized photographs: one image per polarizer angle.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizedStack {
    /// One image per polarizer angle, identical dimensions.
    pub images: Vec<Image>,
    /// Polarizer rotation per image, radians.
    pub angles: Vec<f64>,
    /// Which viewpoint this stack belongs to.
    pub view_index: usize,
    /// Linear exposure metadata; carried through, never applied.
    pub exposure_scale: f64,
}

impl PolarizedStack {
    /// Validates the stack invariants: >= 3 angles distinct modulo pi, one
    /// image per angle, all images the same size.
    pub fn new(
        images: Vec<Image>,
        angles: Vec<f64>,
        view_index: usize,
    ) -> Result<Self, IoFormatError> {
        if images.len() != angles.len() {
            return Err(IoFormatError::schema(
                "stack",
                format!("{} images but {} angles", images.len(), angles.len()),
            ));
        }
        if angles.len() < 3 {
            return Err(IoFormatError::schema("stack.angles", "need >= 3 polarizer angles"));
        }
        if let Some(first) = images.first() {
            if !images.iter().all(|im| im.same_shape(first)) {
                return Err(IoFormatError::schema("stack.images", "image dimensions differ"));
            }
        }
        Ok(Self {
            images,
            angles,
            view_index,
            exposure_scale: 1.0,
        })
    }

    pub fn width(&self) -> usize {
        self.images[0].width()
    }

    pub fn height(&self) -> usize {
        self.images[0].height()
    }
}

/// Converts a scalar f64 image to PFM grayscale data (f32, denormals flushed).
pub fn image_to_pfm(image: &Image) -> Result<PfmData, IoFormatError> {
    let samples: Vec<f32> = image.data().iter().map(|&v| v as f32).collect();
    PfmData::new(image.width(), image.height(), 1, samples)
}

/// Reads PFM grayscale data back into a scalar f64 image (exact widening).
pub fn pfm_to_image(pfm: &PfmData) -> Result<Image, IoFormatError> {
    if pfm.channels != 1 {
        return Err(IoFormatError::MalformedHeader(format!(
            "expected grayscale (Pf), got {} channels",
            pfm.channels
        )));
    }
    Ok(Grid::from_vec(
        pfm.width,
        pfm.height,
        pfm.samples.iter().map(|&v| v as f64).collect(),
    ))
}

/// Converts a 3-vector field (for example a normal map) to 3-channel PFM data.
pub fn vectors_to_pfm(field: &Grid<[f64; 3]>) -> Result<PfmData, IoFormatError> {
    let mut samples = Vec::with_capacity(field.len() * 3);
    for v in field.data() {
        samples.extend_from_slice(&[v[0] as f32, v[1] as f32, v[2] as f32]);
    }
    PfmData::new(field.width(), field.height(), 3, samples)
}

/// Reads 3-channel PFM data back into a 3-vector field.
pub fn pfm_to_vectors(pfm: &PfmData) -> Result<Grid<[f64; 3]>, IoFormatError> {
    if pfm.channels != 3 {
        return Err(IoFormatError::MalformedHeader(format!(
            "expected 3-channel (PF), got {} channels",
            pfm.channels
        )));
    }
    let data = pfm
        .samples
        .chunks_exact(3)
        .map(|c| [c[0] as f64, c[1] as f64, c[2] as f64])
        .collect();
    Ok(Grid::from_vec(pfm.width, pfm.height, data))
}
