//! Mutual-gaze classification from facial keypoints.
//!
//! A feature vector holds 19 keypoints as consecutive (x, y, k) triplets in
//! a fixed order: nose, eight points around the left eye, eight around the
//! right eye, left ear, right ear. `k` is the detector confidence; a missing
//! keypoint is all zeros.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linear::{LinearClassifier, TrainParams};
use super::{gaussian, PerceptionError};

pub const GAZE_KEYPOINTS: usize = 19;
pub const GAZE_FEATURES: usize = GAZE_KEYPOINTS * 3;
const EYE_POINTS: usize = 8;

/// Head yaw, in degrees, up to which the synthetic generator labels a face
/// as making eye contact.
pub const EYE_CONTACT_MAX_YAW_DEG: f64 = 20.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub k: f64,
}

impl Keypoint {
    pub const MISSING: Keypoint = Keypoint { x: 0.0, y: 0.0, k: 0.0 };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazeKeypoints {
    pub nose: Keypoint,
    pub left_eye: [Keypoint; EYE_POINTS],
    pub right_eye: [Keypoint; EYE_POINTS],
    pub left_ear: Keypoint,
    pub right_ear: Keypoint,
}

impl GazeKeypoints {
    fn ordered(&self) -> impl Iterator<Item = &Keypoint> {
        std::iter::once(&self.nose)
            .chain(&self.left_eye)
            .chain(&self.right_eye)
            .chain([&self.left_ear, &self.right_ear])
    }

    pub fn to_vector(&self) -> GazeFeatureVector {
        GazeFeatureVector(self.ordered().flat_map(|p| [p.x, p.y, p.k]).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct GazeFeatureVector(Vec<f64>);

impl GazeFeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self, PerceptionError> {
        if values.len() != GAZE_FEATURES {
            return Err(PerceptionError::MalformedFeature(format!(
                "{} elements, expected {GAZE_FEATURES}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(PerceptionError::MalformedFeature(format!("element {i} is not finite")));
        }
        if let Some(p) = (0..GAZE_KEYPOINTS).find(|p| !(0.0..=1.0).contains(&values[p * 3 + 2])) {
            return Err(PerceptionError::MalformedFeature(format!("keypoint {p} confidence outside [0, 1]")));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn keypoint(&self, index: usize) -> Keypoint {
        let t = &self.0[index * 3..index * 3 + 3];
        Keypoint { x: t[0], y: t[1], k: t[2] }
    }

    pub fn to_keypoints(&self) -> GazeKeypoints {
        let eye = |base: usize| std::array::from_fn(|i| self.keypoint(base + i));
        GazeKeypoints {
            nose: self.keypoint(0),
            left_eye: eye(1),
            right_eye: eye(1 + EYE_POINTS),
            left_ear: self.keypoint(1 + 2 * EYE_POINTS),
            right_ear: self.keypoint(2 + 2 * EYE_POINTS),
        }
    }
}

impl TryFrom<Vec<f64>> for GazeFeatureVector {
    type Error = PerceptionError;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(values)
    }
}

impl From<GazeFeatureVector> for Vec<f64> {
    fn from(v: GazeFeatureVector) -> Self {
        v.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GazeLabel {
    EyeContact,
    NoEyeContact,
}

/// Translation- and scale-invariant encoding fed to the classifier:
/// coordinates relative to the confidence-weighted centroid, divided by the
/// weighted RMS spread and multiplied by `k`, followed by `k` itself.
pub fn gaze_features(fv: &GazeFeatureVector) -> Vec<f64> {
    let points: Vec<Keypoint> = (0..GAZE_KEYPOINTS).map(|i| fv.keypoint(i)).collect();
    let total: f64 = points.iter().map(|p| p.k).sum();
    if total <= 0.0 {
        return vec![0.0; GAZE_FEATURES];
    }
    let cx = points.iter().map(|p| p.k * p.x).sum::<f64>() / total;
    let cy = points.iter().map(|p| p.k * p.y).sum::<f64>() / total;
    let spread = (points
        .iter()
        .map(|p| p.k * ((p.x - cx).powi(2) + (p.y - cy).powi(2)))
        .sum::<f64>()
        / total)
        .sqrt()
        .max(1e-9);
    points
        .iter()
        .flat_map(|p| [p.k * (p.x - cx) / spread, p.k * (p.y - cy) / spread, p.k])
        .collect()
}

/// Renders synthetic keypoints of a head at a given yaw. Landmarks sit on a
/// sphere; a landmark's confidence is the cosine between its surface normal
/// and the camera axis, and landmarks facing away are missing.
#[derive(Debug, Clone)]
pub struct GazeSynth {
    pub noise: f64,
}

impl Default for GazeSynth {
    fn default() -> Self {
        Self { noise: 0.02 }
    }
}

impl GazeSynth {
    pub fn label_for(yaw_deg: f64) -> GazeLabel {
        if yaw_deg.abs() <= EYE_CONTACT_MAX_YAW_DEG {
            GazeLabel::EyeContact
        } else {
            GazeLabel::NoEyeContact
        }
    }

    pub fn render<R: Rng + ?Sized>(&self, yaw_deg: f64, center: (f64, f64), radius: f64, rng: &mut R) -> GazeKeypoints {
        let mut point = |azimuth: f64, dy: f64| {
            let a = (azimuth + yaw_deg).to_radians();
            let k = a.cos();
            if k < 0.1 {
                return Keypoint::MISSING;
            }
            Keypoint {
                x: center.0 + radius * a.sin() + self.noise * radius * gaussian(rng),
                y: center.1 + radius * dy + self.noise * radius * gaussian(rng),
                k: (k + self.noise * gaussian(rng)).clamp(0.0, 1.0),
            }
        };
        let nose = point(0.0, 0.15);
        let mut eye = |side: f64| -> [Keypoint; EYE_POINTS] {
            std::array::from_fn(|i| {
                let t = std::f64::consts::TAU * i as f64 / EYE_POINTS as f64;
                point(side * 28.0 + 7.0 * t.cos(), -0.15 + 0.04 * t.sin())
            })
        };
        let left_eye = eye(-1.0);
        let right_eye = eye(1.0);
        GazeKeypoints {
            nose,
            left_eye,
            right_eye,
            left_ear: point(-85.0, 0.0),
            right_ear: point(85.0, 0.0),
        }
    }

    /// Labeled training vectors. Yaws near the label boundary are left out
    /// so the classes have a margin.
    pub fn training_set(&self, n: usize, seed: u64) -> Vec<(GazeFeatureVector, GazeLabel)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let yaw: f64 = rng.random_range(-90.0..=90.0);
            if (12.0..30.0).contains(&yaw.abs()) {
                continue;
            }
            let center = (rng.random_range(120.0..520.0), rng.random_range(100.0..380.0));
            let radius = rng.random_range(30.0..90.0);
            let kp = self.render(yaw, center, radius, &mut rng);
            out.push((kp.to_vector(), Self::label_for(yaw)));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazeModel {
    pub classifier: LinearClassifier,
}

impl GazeModel {
    pub fn train(samples: &[(GazeFeatureVector, GazeLabel)], params: TrainParams) -> Self {
        let data: Vec<(Vec<f64>, bool)> = samples
            .iter()
            .map(|(fv, label)| (gaze_features(fv), *label == GazeLabel::EyeContact))
            .collect();
        Self {
            classifier: LinearClassifier::train(&data, params),
        }
    }

    /// The model trained on the generator's fixed-seed training set.
    pub fn standard() -> Self {
        Self::train(&GazeSynth::default().training_set(600, 57), TrainParams::default())
    }

    pub fn classify(&self, fv: &GazeFeatureVector) -> GazeLabel {
        if self.classifier.predict(&gaze_features(fv)) {
            GazeLabel::EyeContact
        } else {
            GazeLabel::NoEyeContact
        }
    }
}

pub fn classify_mutual_gaze(values: &[f64], model: &GazeModel) -> Result<GazeLabel, PerceptionError> {
    Ok(model.classify(&GazeFeatureVector::new(values.to_vec())?))
}
