//! Simulated perception: face enrollment and partner recognition, mutual
//! gaze classification, and online cube detection. Inputs are synthetic, but
//! the decision rules and error contracts are those a real pipeline follows.

mod face;
mod gaze;
mod linear;
mod objects;

use rand::Rng;
use thiserror::Error;

use crate::manifest::StickerId;

pub use face::{
    enroll_partner, recognize_partner, BBox, FaceDetection, FaceFrame, FaceSynth, PartnerModel, Recognition,
    EMBEDDING_DIM, FRAME_HEIGHT, FRAME_WIDTH,
};
pub use gaze::{
    classify_mutual_gaze, gaze_features, GazeFeatureVector, GazeKeypoints, GazeLabel, GazeModel, GazeSynth,
    Keypoint, EYE_CONTACT_MAX_YAW_DEG, GAZE_FEATURES, GAZE_KEYPOINTS,
};
pub use linear::{LinearClassifier, TrainParams};
pub use objects::{CubeObservation, CubePresentation, ObjectDetector};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PerceptionError {
    #[error("invalid face detection: {0}")]
    InvalidDetection(String),
    #[error("no face seen during enrollment")]
    NoFaceSeen,
    #[error("no detections to choose from")]
    EmptyScene,
    #[error("malformed gaze feature vector: {0}")]
    MalformedFeature(String),
    #[error("object class {0} already registered")]
    DuplicateLabel(StickerId),
    #[error("object class {0} registered without samples")]
    NoSamples(StickerId),
    #[error("no cube visible")]
    NoCubeVisible,
    #[error("cube dropped during handover")]
    CubeDropped,
    #[error("cube {0} does not match any registered class")]
    Unrecognized(StickerId),
}

/// Standard normal draw by Box-Muller.
pub(crate) fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub(crate) fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

pub(crate) fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
