use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::face::BBox;
use super::PerceptionError;
use crate::manifest::{StickerId, StickerManifest};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeObservation {
    pub bbox: BBox,
    pub class_label: StickerId,
    pub confidence: f64,
    pub frame_ts: u64,
}

/// A cube held up to the camera, as scripted in a scene or sent by the
/// console. `noise` in [0, 1] degrades detection confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubePresentation {
    pub sticker: StickerId,
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub dropped: bool,
}

impl CubePresentation {
    pub fn new(sticker: StickerId) -> Self {
        Self {
            sticker,
            noise: 0.0,
            dropped: false,
        }
    }
}

#[derive(Debug, Clone)]
struct ClassModel {
    prototype: BBox,
}

/// Online object detector: classes can be added while running, and detection
/// only ever emits registered labels. Inference is simulated from the
/// scripted ground truth, with an optional misdetection rate.
#[derive(Debug, Clone)]
pub struct ObjectDetector {
    classes: BTreeMap<StickerId, ClassModel>,
    misdetection_probability: f64,
    rng: ChaCha8Rng,
}

fn default_sample(label: &StickerId) -> CubeObservation {
    CubeObservation {
        bbox: BBox::new(260.0, 180.0, 120.0, 120.0),
        class_label: label.clone(),
        confidence: 1.0,
        frame_ts: 0,
    }
}

impl ObjectDetector {
    pub fn new(misdetection_probability: f64, seed: u64) -> Self {
        Self {
            classes: BTreeMap::new(),
            misdetection_probability: misdetection_probability.clamp(0.0, 1.0),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// A detector with every manifest sticker registered from one sample.
    pub fn with_manifest(manifest: &StickerManifest, misdetection_probability: f64, seed: u64) -> Self {
        let mut detector = Self::new(misdetection_probability, seed);
        for id in manifest.ids() {
            detector
                .register_object_class(id.clone(), &[default_sample(id)])
                .expect("manifest ids are unique");
        }
        detector
    }

    pub fn register_object_class(
        &mut self,
        label: StickerId,
        samples: &[CubeObservation],
    ) -> Result<(), PerceptionError> {
        if self.classes.contains_key(&label) {
            return Err(PerceptionError::DuplicateLabel(label));
        }
        if samples.is_empty() {
            return Err(PerceptionError::NoSamples(label));
        }
        let n = samples.len() as f64;
        let mean = |f: fn(&BBox) -> f64| samples.iter().map(|s| f(&s.bbox)).sum::<f64>() / n;
        let prototype = BBox::new(mean(|b| b.x), mean(|b| b.y), mean(|b| b.w), mean(|b| b.h));
        self.classes.insert(label, ClassModel { prototype });
        Ok(())
    }

    pub fn labels(&self) -> Vec<&StickerId> {
        self.classes.keys().collect()
    }

    pub fn is_registered(&self, label: &StickerId) -> bool {
        self.classes.contains_key(label)
    }

    /// Confidence of a correct detection; falls as noise rises.
    pub fn correct_confidence(noise: f64) -> f64 {
        0.97 - 0.45 * noise.clamp(0.0, 1.0)
    }

    /// Confidence of a misdetection; always below 0.5.
    pub fn wrong_confidence(noise: f64) -> f64 {
        0.45 - 0.3 * noise.clamp(0.0, 1.0)
    }

    pub fn detect_cube(
        &mut self,
        scene: Option<&CubePresentation>,
        frame_ts: u64,
    ) -> Result<CubeObservation, PerceptionError> {
        let cube = scene.ok_or(PerceptionError::NoCubeVisible)?;
        if cube.dropped {
            return Err(PerceptionError::CubeDropped);
        }
        let Some(model) = self.classes.get(&cube.sticker) else {
            return Err(PerceptionError::Unrecognized(cube.sticker.clone()));
        };
        let prototype = model.prototype;
        let misdetect = self.misdetection_probability > 0.0 && self.rng.random::<f64>() < self.misdetection_probability;
        if misdetect {
            let others: Vec<&StickerId> = self.classes.keys().filter(|k| *k != &cube.sticker).collect();
            if others.is_empty() {
                return Err(PerceptionError::Unrecognized(cube.sticker.clone()));
            }
            let pick = others[self.rng.random_range(0..others.len())].clone();
            return Ok(CubeObservation {
                bbox: self.classes[&pick].prototype,
                class_label: pick,
                confidence: Self::wrong_confidence(cube.noise),
                frame_ts,
            });
        }
        Ok(CubeObservation {
            bbox: prototype,
            class_label: cube.sticker.clone(),
            confidence: Self::correct_confidence(cube.noise),
            frame_ts,
        })
    }
}
