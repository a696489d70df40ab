use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linear::{LinearClassifier, TrainParams};
use super::{gaussian, logistic, normalize, PerceptionError};

pub const FRAME_WIDTH: f64 = 640.0;
pub const FRAME_HEIGHT: f64 = 480.0;
pub const EMBEDDING_DIM: usize = 128;

const IMPOSTORS: usize = 24;
const IMPOSTOR_SEED: u64 = 0x1a7e_0b5e;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn within_frame(&self) -> bool {
        [self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite())
            && self.x >= 0.0
            && self.y >= 0.0
            && self.w > 0.0
            && self.h > 0.0
            && self.x + self.w <= FRAME_WIDTH
            && self.y + self.h <= FRAME_HEIGHT
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDetection")]
pub struct FaceDetection {
    bbox: BBox,
    embedding: Vec<f64>,
    track_id: u32,
}

#[derive(Deserialize)]
struct RawDetection {
    bbox: BBox,
    embedding: Vec<f64>,
    track_id: u32,
}

impl TryFrom<RawDetection> for FaceDetection {
    type Error = PerceptionError;

    fn try_from(raw: RawDetection) -> Result<Self, Self::Error> {
        Self::new(raw.bbox, raw.embedding, raw.track_id)
    }
}

impl FaceDetection {
    pub fn new(bbox: BBox, embedding: Vec<f64>, track_id: u32) -> Result<Self, PerceptionError> {
        if !bbox.within_frame() {
            return Err(PerceptionError::InvalidDetection(format!("bbox {bbox:?} outside the frame")));
        }
        if embedding.len() != EMBEDDING_DIM {
            return Err(PerceptionError::InvalidDetection(format!(
                "embedding has {} elements, expected {EMBEDDING_DIM}",
                embedding.len()
            )));
        }
        let norm = embedding.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(PerceptionError::InvalidDetection(format!("embedding norm {norm}")));
        }
        Ok(Self {
            bbox,
            embedding,
            track_id,
        })
    }

    pub fn bbox(&self) -> BBox {
        self.bbox
    }

    pub fn embedding(&self) -> &[f64] {
        &self.embedding
    }

    pub fn track_id(&self) -> u32 {
        self.track_id
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceFrame {
    pub at_ms: u64,
    pub detections: Vec<FaceDetection>,
}

/// Deterministic source of synthetic identities: each identity owns a fixed
/// random unit embedding, and each observation perturbs it slightly.
#[derive(Debug, Clone)]
pub struct FaceSynth {
    seed: u64,
    jitter: f64,
}

impl FaceSynth {
    pub fn new(seed: u64) -> Self {
        Self { seed, jitter: 0.05 }
    }

    pub fn identity_embedding(&self, identity: u32) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (u64::from(identity) + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let mut v: Vec<f64> = (0..EMBEDDING_DIM).map(|_| gaussian(&mut rng)).collect();
        normalize(&mut v);
        v
    }

    /// Observation of `identity` in frame number `frame`; the track id is the
    /// identity.
    pub fn detection(&self, identity: u32, bbox: BBox, frame: u64) -> Result<FaceDetection, PerceptionError> {
        let mut rng = ChaCha8Rng::seed_from_u64(
            self.seed.rotate_left(17) ^ (u64::from(identity) << 32) ^ frame.wrapping_mul(0x2545_f491),
        );
        let mut v = self.identity_embedding(identity);
        v.iter_mut()
            .for_each(|x| *x += self.jitter * gaussian(&mut rng) / (EMBEDDING_DIM as f64).sqrt());
        normalize(&mut v);
        FaceDetection::new(bbox, v, identity)
    }

    /// Random unit vectors unrelated to any identity, used as negatives.
    pub fn impostors(&self, count: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(IMPOSTOR_SEED ^ self.seed);
        (0..count)
            .map(|_| {
                let mut v: Vec<f64> = (0..EMBEDDING_DIM).map(|_| gaussian(&mut rng)).collect();
                normalize(&mut v);
                v
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartnerModel {
    pub classifier: LinearClassifier,
    pub threshold: f64,
    pub partner_track: u32,
    pub positives: usize,
    pub negatives: usize,
}

impl PartnerModel {
    /// Probability-like score in [0, 1]; 0.5 sits on the decision boundary.
    pub fn confidence(&self, embedding: &[f64]) -> f64 {
        logistic(2.0 * self.classifier.decision(embedding))
    }

    pub fn is_partner(&self, embedding: &[f64]) -> bool {
        self.confidence(embedding) >= self.threshold
    }
}

/// Trains the partner classifier from the frames inside the enrollment
/// window. The partner is the track with the largest mean bounding-box area
/// (ties go to the lowest track id); its detections are the positives, every
/// other detection plus a fixed set of impostor embeddings the negatives.
pub fn enroll_partner(frames: &[FaceFrame], duration_ms: u64, threshold: f64) -> Result<PartnerModel, PerceptionError> {
    let Some(start) = frames.first().map(|f| f.at_ms) else {
        return Err(PerceptionError::NoFaceSeen);
    };
    let window: Vec<&FaceDetection> = frames
        .iter()
        .filter(|f| f.at_ms.saturating_sub(start) < duration_ms.max(1))
        .flat_map(|f| &f.detections)
        .collect();
    if window.is_empty() {
        return Err(PerceptionError::NoFaceSeen);
    }

    let mut areas: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
    for d in &window {
        let e = areas.entry(d.track_id).or_default();
        e.0 += d.bbox.area();
        e.1 += 1;
    }
    let mut partner = None::<(u32, f64)>;
    for (&track, &(sum, n)) in &areas {
        let mean = sum / n as f64;
        if partner.is_none_or(|(_, best)| mean > best) {
            partner = Some((track, mean));
        }
    }
    let partner_track = partner.expect("window is non-empty").0;

    let mut samples: Vec<(Vec<f64>, bool)> = window
        .iter()
        .map(|d| (d.embedding.clone(), d.track_id == partner_track))
        .collect();
    let positives = samples.iter().filter(|s| s.1).count();
    samples.extend(
        FaceSynth::new(u64::from(partner_track))
            .impostors(IMPOSTORS)
            .into_iter()
            .map(|v| (v, false)),
    );
    let negatives = samples.len() - positives;
    let classifier = LinearClassifier::train(
        &samples,
        TrainParams {
            epochs: 40,
            learning_rate: 0.5,
            ..TrainParams::default()
        },
    );
    Ok(PartnerModel {
        classifier,
        threshold,
        partner_track,
        positives,
        negatives,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recognition {
    pub detection: FaceDetection,
    pub confidence: f64,
    /// True when no detection passed the threshold and the largest box was
    /// taken as the closest face.
    pub fallback: bool,
}

/// Picks the partner among `detections`: the most confident detection at or
/// above the model threshold, otherwise the largest (closest) box.
pub fn recognize_partner(detections: &[FaceDetection], model: &PartnerModel) -> Result<Recognition, PerceptionError> {
    if detections.is_empty() {
        return Err(PerceptionError::EmptyScene);
    }
    let scored: Vec<(usize, f64)> = detections
        .iter()
        .enumerate()
        .map(|(i, d)| (i, model.confidence(&d.embedding)))
        .collect();
    let best = scored
        .iter()
        .filter(|(_, c)| *c >= model.threshold)
        .fold(None::<(usize, f64)>, |acc, &(i, c)| match acc {
            Some((_, bc)) if bc >= c => acc,
            _ => Some((i, c)),
        });
    let (index, fallback) = match best {
        Some((i, _)) => (i, false),
        None => {
            let closest = (0..detections.len())
                .fold(None::<usize>, |acc, i| match acc {
                    Some(j) if area_rank(&detections[j]) >= area_rank(&detections[i]) => Some(j),
                    _ => Some(i),
                })
                .expect("detections is non-empty");
            (closest, true)
        }
    };
    Ok(Recognition {
        detection: detections[index].clone(),
        confidence: scored[index].1,
        fallback,
    })
}

/// Orders by area, breaking ties toward the lower track id.
fn area_rank(d: &FaceDetection) -> (f64, std::cmp::Reverse<u32>) {
    (d.bbox.area(), std::cmp::Reverse(d.track_id))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frames(synth: &FaceSynth, faces: &[(u32, BBox)], n: u64) -> Vec<FaceFrame> {
        (0..n)
            .map(|i| FaceFrame {
                at_ms: i * 100,
                detections: faces.iter().map(|&(id, b)| synth.detection(id, b, i).unwrap()).collect(),
            })
            .collect()
    }

    #[test]
    fn detection_invariants() {
        let synth = FaceSynth::new(1);
        let e = synth.identity_embedding(3);
        assert!(FaceDetection::new(BBox::new(600.0, 0.0, 50.0, 50.0), e.clone(), 1).is_err());
        assert!(FaceDetection::new(BBox::new(0.0, 0.0, 50.0, 50.0), e[..127].to_vec(), 1).is_err());
        assert!(FaceDetection::new(BBox::new(0.0, 0.0, 50.0, 50.0), vec![0.5; 128], 1).is_err());
        let d = synth.detection(3, BBox::new(10.0, 10.0, 40.0, 40.0), 7).unwrap();
        let norm: f64 = d.embedding().iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_face_is_enrolled_and_recognized() {
        let synth = FaceSynth::new(2);
        let fs = frames(&synth, &[(4, BBox::new(100.0, 100.0, 80.0, 80.0))], 20);
        let model = enroll_partner(&fs, 5_000, 0.5).unwrap();
        assert_eq!(model.partner_track, 4);
        assert!(model.is_partner(fs[3].detections[0].embedding()));
    }

    #[test]
    fn biggest_box_becomes_partner() {
        let synth = FaceSynth::new(3);
        let fs = frames(
            &synth,
            &[(1, BBox::new(0.0, 0.0, 10.0, 10.0)), (2, BBox::new(200.0, 100.0, 20.0, 20.0))],
            20,
        );
        let model = enroll_partner(&fs, 5_000, 0.5).unwrap();
        assert_eq!(model.partner_track, 2);
        let scene = vec![
            synth.detection(1, BBox::new(0.0, 0.0, 10.0, 10.0), 99).unwrap(),
            synth.detection(5, BBox::new(300.0, 0.0, 30.0, 30.0), 99).unwrap(),
            synth.detection(2, BBox::new(200.0, 100.0, 20.0, 20.0), 99).unwrap(),
        ];
        let r = recognize_partner(&scene, &model).unwrap();
        assert_eq!(r.detection.track_id(), 2);
        assert!(!r.fallback);
    }

    #[test]
    fn empty_inputs() {
        assert_eq!(enroll_partner(&[], 5_000, 0.5), Err(PerceptionError::NoFaceSeen));
        let blank = vec![FaceFrame { at_ms: 0, detections: vec![] }; 3];
        assert_eq!(enroll_partner(&blank, 5_000, 0.5), Err(PerceptionError::NoFaceSeen));
        let synth = FaceSynth::new(4);
        let fs = frames(&synth, &[(1, BBox::new(0.0, 0.0, 10.0, 10.0))], 3);
        let model = enroll_partner(&fs, 5_000, 0.5).unwrap();
        assert_eq!(recognize_partner(&[], &model), Err(PerceptionError::EmptyScene));
    }

    #[test]
    fn strangers_fall_back_to_the_closest_face() {
        let synth = FaceSynth::new(5);
        let fs = frames(&synth, &[(1, BBox::new(0.0, 0.0, 50.0, 50.0))], 10);
        let model = enroll_partner(&fs, 5_000, 0.5).unwrap();
        let scene = vec![
            synth.detection(7, BBox::new(0.0, 0.0, 10.0, 10.0), 0).unwrap(),
            synth.detection(8, BBox::new(100.0, 0.0, 20.0, 20.0), 0).unwrap(),
        ];
        let r = recognize_partner(&scene, &model).unwrap();
        assert!(r.fallback);
        assert_eq!(r.detection.track_id(), 8);
        let only = vec![scene[0].clone()];
        assert_eq!(recognize_partner(&only, &model).unwrap().detection.track_id(), 7);
    }

    #[test]
    fn frames_after_the_window_are_ignored() {
        let synth = FaceSynth::new(6);
        let mut fs = frames(&synth, &[(1, BBox::new(0.0, 0.0, 30.0, 30.0))], 5);
        fs.push(FaceFrame {
            at_ms: 10_000,
            detections: vec![synth.detection(2, BBox::new(0.0, 0.0, 300.0, 300.0), 0).unwrap()],
        });
        assert_eq!(enroll_partner(&fs, 5_000, 0.5).unwrap().partner_track, 1);
    }
}
