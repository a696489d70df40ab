use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{QuestionnaireError, Result};

pub const UEQ_ITEMS: usize = 26;

const STANDARD_SCALES: &str = include_str!("../data/ueq_scales.csv");
const STANDARD_BENCHMARK: &str = include_str!("../data/ueq_benchmark.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum UeqScale {
    Attractiveness,
    Perspicuity,
    Efficiency,
    Dependability,
    Stimulation,
    Novelty,
}

impl UeqScale {
    pub const ALL: [UeqScale; 6] = [
        UeqScale::Attractiveness,
        UeqScale::Perspicuity,
        UeqScale::Efficiency,
        UeqScale::Dependability,
        UeqScale::Stimulation,
        UeqScale::Novelty,
    ];

    pub fn name(self) -> &'static str {
        match self {
            UeqScale::Attractiveness => "Attractiveness",
            UeqScale::Perspicuity => "Perspicuity",
            UeqScale::Efficiency => "Efficiency",
            UeqScale::Dependability => "Dependability",
            UeqScale::Stimulation => "Stimulation",
            UeqScale::Novelty => "Novelty",
        }
    }
}

impl fmt::Display for UeqScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for UeqScale {
    type Err = QuestionnaireError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        UeqScale::ALL
            .into_iter()
            .find(|scale| scale.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| QuestionnaireError::UnknownScale(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleItem {
    pub item: usize,
    pub left: String,
    pub right: String,
    pub scale: UeqScale,
    pub reversed: bool,
}

/// Assignment of the 26 items to scales, with keying direction.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleMap {
    items: Vec<ScaleItem>,
}

impl ScaleMap {
    /// The mapping shipped in `data/ueq_scales.csv`.
    pub fn standard() -> Self {
        Self::from_csv(STANDARD_SCALES).expect("shipped UEQ scale map is valid")
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut items = Vec::new();
        for row in reader.deserialize::<RawScaleRow>() {
            let row = row?;
            items.push(ScaleItem {
                item: row.item,
                left: row.left,
                right: row.right,
                scale: row.scale.parse()?,
                reversed: row.reversed,
            });
        }
        Self::new(items)
    }

    pub fn new(mut items: Vec<ScaleItem>) -> Result<Self> {
        items.sort_by_key(|i| i.item);
        if items.len() != UEQ_ITEMS {
            return Err(QuestionnaireError::WrongItemCount {
                expected: UEQ_ITEMS,
                got: items.len(),
            });
        }
        for (idx, it) in items.iter().enumerate() {
            if it.item != idx + 1 {
                return Err(QuestionnaireError::Table(format!(
                    "items must be numbered 1..={UEQ_ITEMS}, found {}",
                    it.item
                )));
            }
        }
        for scale in UeqScale::ALL {
            if !items.iter().any(|i| i.scale == scale) {
                return Err(QuestionnaireError::Table(format!("scale {scale} has no items")));
            }
        }
        Ok(Self { items })
    }

    pub fn items(&self) -> &[ScaleItem] {
        &self.items
    }

    pub fn items_of(&self, scale: UeqScale) -> impl Iterator<Item = &ScaleItem> {
        self.items.iter().filter(move |i| i.scale == scale)
    }

    /// Maps a raw 1..=7 rating of `item` (1-based) onto -3..=+3, positive
    /// meaning the favourable anchor.
    pub fn keyed(&self, item: usize, raw: u8) -> i8 {
        let centred = raw as i8 - 4;
        if self.items[item - 1].reversed {
            -centred
        } else {
            centred
        }
    }
}

#[derive(Deserialize)]
struct RawScaleRow {
    item: usize,
    left: String,
    right: String,
    scale: String,
    reversed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UeqResponse([u8; UEQ_ITEMS]);

impl UeqResponse {
    pub fn new(items: &[i64]) -> Result<Self> {
        if items.len() != UEQ_ITEMS {
            return Err(QuestionnaireError::WrongItemCount {
                expected: UEQ_ITEMS,
                got: items.len(),
            });
        }
        let mut out = [0u8; UEQ_ITEMS];
        for (i, &v) in items.iter().enumerate() {
            if !(1..=7).contains(&v) {
                return Err(QuestionnaireError::RangeViolation {
                    item: i + 1,
                    value: v,
                    min: 1,
                    max: 7,
                });
            }
            out[i] = v as u8;
        }
        Ok(Self(out))
    }

    pub fn items(&self) -> &[u8; UEQ_ITEMS] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleSummary {
    pub scale: UeqScale,
    pub mean: f64,
    /// Sample standard deviation of per-respondent scale means.
    pub sd: f64,
    pub n: usize,
}

pub(crate) fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-scale mean and standard deviation on -3..=+3. Each respondent's
/// scale value is the mean over that scale's items; the scale mean is the
/// mean of those values over respondents.
pub fn score_ueq(responses: &[UeqResponse], map: &ScaleMap) -> Result<Vec<ScaleSummary>> {
    if responses.is_empty() {
        return Err(QuestionnaireError::EmptyInput);
    }
    Ok(UeqScale::ALL
        .into_iter()
        .map(|scale| {
            let items: Vec<usize> = map.items_of(scale).map(|i| i.item).collect();
            let per_respondent: Vec<f64> = responses
                .iter()
                .map(|r| {
                    let sum: i32 = items.iter().map(|&it| i32::from(map.keyed(it, r.0[it - 1]))).sum();
                    f64::from(sum) / items.len() as f64
                })
                .collect();
            let (mean, sd) = mean_sd(&per_respondent);
            ScaleSummary {
                scale,
                mean,
                sd,
                n: responses.len(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BenchmarkCategory {
    Excellent,
    Good,
    #[serde(rename = "Above Average")]
    AboveAverage,
    #[serde(rename = "Below Average")]
    BelowAverage,
    Bad,
}

impl BenchmarkCategory {
    pub fn label(self) -> &'static str {
        match self {
            BenchmarkCategory::Excellent => "Excellent",
            BenchmarkCategory::Good => "Good",
            BenchmarkCategory::AboveAverage => "Above Average",
            BenchmarkCategory::BelowAverage => "Below Average",
            BenchmarkCategory::Bad => "Bad",
        }
    }
}

impl fmt::Display for BenchmarkCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Lower bounds, per scale, of Excellent / Good / Above Average / Below
/// Average. Anything lower is Bad.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    bounds: BTreeMap<UeqScale, [f64; 4]>,
}

#[derive(Deserialize)]
struct RawBenchmarkRow {
    scale: String,
    excellent: f64,
    good: f64,
    above_average: f64,
    below_average: f64,
}

impl BenchmarkTable {
    /// The thresholds shipped in `data/ueq_benchmark.csv`.
    pub fn standard() -> Self {
        Self::from_csv(STANDARD_BENCHMARK).expect("shipped benchmark table is valid")
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut bounds = BTreeMap::new();
        for row in reader.deserialize::<RawBenchmarkRow>() {
            let row = row?;
            let b = [row.excellent, row.good, row.above_average, row.below_average];
            if b.iter().any(|v| !v.is_finite()) || b.windows(2).any(|w| w[0] < w[1]) {
                return Err(QuestionnaireError::Table(format!(
                    "thresholds for {} must be finite and non-increasing",
                    row.scale
                )));
            }
            bounds.insert(row.scale.parse()?, b);
        }
        Ok(Self { bounds })
    }

    pub fn bounds(&self, scale: UeqScale) -> Option<[f64; 4]> {
        self.bounds.get(&scale).copied()
    }

    pub fn classify(&self, scale: UeqScale, mean: f64) -> Result<BenchmarkCategory> {
        let b = self
            .bounds(scale)
            .ok_or_else(|| QuestionnaireError::UnknownScale(scale.name().to_string()))?;
        Ok(if mean >= b[0] {
            BenchmarkCategory::Excellent
        } else if mean >= b[1] {
            BenchmarkCategory::Good
        } else if mean >= b[2] {
            BenchmarkCategory::AboveAverage
        } else if mean >= b[3] {
            BenchmarkCategory::BelowAverage
        } else {
            BenchmarkCategory::Bad
        })
    }
}

pub fn classify_benchmark(scale: &str, mean: f64, table: &BenchmarkTable) -> Result<BenchmarkCategory> {
    table.classify(scale.parse()?, mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn standard_map_shape() {
        let map = ScaleMap::standard();
        for scale in UeqScale::ALL {
            let n = map.items_of(scale).count();
            let want = if scale == UeqScale::Attractiveness { 6 } else { 4 };
            assert_eq!(n, want, "{scale}");
        }
        assert_eq!(map.items().len(), 26);
    }

    #[test]
    fn extremes_and_neutral() {
        let map = ScaleMap::standard();
        // Best possible answer on every item, respecting keying.
        let best: Vec<i64> = map.items().iter().map(|i| if i.reversed { 1 } else { 7 }).collect();
        for s in score_ueq(&[UeqResponse::new(&best).unwrap()], &map).unwrap() {
            assert_eq!(s.mean, 3.0);
        }
        let neutral = UeqResponse::new(&[4; 26]).unwrap();
        for s in score_ueq(&[neutral, neutral], &map).unwrap() {
            assert_eq!(s.mean, 0.0);
            assert_eq!(s.sd, 0.0);
        }
        assert_eq!(score_ueq(&[], &map), Err(QuestionnaireError::EmptyInput));
    }

    #[test]
    fn response_validation() {
        assert!(matches!(UeqResponse::new(&[4; 25]), Err(QuestionnaireError::WrongItemCount { .. })));
        let mut bad = [4i64; 26];
        bad[10] = 8;
        assert!(matches!(UeqResponse::new(&bad), Err(QuestionnaireError::RangeViolation { item: 11, .. })));
    }

    #[test]
    fn benchmark_categories() {
        let t = BenchmarkTable::standard();
        assert_eq!(classify_benchmark("Efficiency", 0.91, &t).unwrap(), BenchmarkCategory::BelowAverage);
        assert_eq!(classify_benchmark("Attractiveness", 1.91, &t).unwrap(), BenchmarkCategory::Excellent);
        assert_eq!(classify_benchmark("Perspicuity", 1.89, &t).unwrap(), BenchmarkCategory::Good);
        assert_eq!(classify_benchmark("Dependability", 1.21, &t).unwrap(), BenchmarkCategory::AboveAverage);
        assert_eq!(classify_benchmark("Stimulation", 1.90, &t).unwrap(), BenchmarkCategory::Excellent);
        assert_eq!(classify_benchmark("Novelty", 1.72, &t).unwrap(), BenchmarkCategory::Excellent);
        for scale in UeqScale::ALL {
            assert_eq!(t.classify(scale, 3.0).unwrap(), BenchmarkCategory::Excellent);
            assert_eq!(t.classify(scale, -3.0).unwrap(), BenchmarkCategory::Bad);
        }
        assert_eq!(
            classify_benchmark("Joy", 1.0, &t),
            Err(QuestionnaireError::UnknownScale("Joy".into()))
        );
    }

    #[test]
    fn malformed_tables() {
        assert!(BenchmarkTable::from_csv("scale,excellent,good,above_average,below_average\nNovelty,1,2,0,0\n").is_err());
        assert!(BenchmarkTable::from_csv("scale,excellent,good,above_average,below_average\nJoy,3,2,1,0\n").is_err());
        assert!(ScaleMap::from_csv("item,left,right,scale,reversed\n1,a,b,Novelty,false\n").is_err());
    }

    fn uniform_map() -> ScaleMap {
        let items = ScaleMap::standard()
            .items()
            .iter()
            .cloned()
            .map(|mut i| {
                i.reversed = false;
                i
            })
            .collect();
        ScaleMap::new(items).unwrap()
    }

    proptest! {
        #[test]
        fn shift_moves_means_by_constant(
            rows in prop::collection::vec(prop::collection::vec(1i64..=4, 26), 1..6),
            c in 0i64..=3,
        ) {
            let map = uniform_map();
            let base: Vec<_> = rows.iter().map(|r| UeqResponse::new(r).unwrap()).collect();
            let shifted: Vec<_> = rows
                .iter()
                .map(|r| UeqResponse::new(&r.iter().map(|v| v + c).collect::<Vec<_>>()).unwrap())
                .collect();
            let a = score_ueq(&base, &map).unwrap();
            let b = score_ueq(&shifted, &map).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((y.mean - x.mean - c as f64).abs() < 1e-12);
                prop_assert!((y.sd - x.sd).abs() < 1e-12);
            }
        }

        #[test]
        fn means_stay_in_range(rows in prop::collection::vec(prop::collection::vec(1i64..=7, 26), 1..6)) {
            let rs: Vec<_> = rows.iter().map(|r| UeqResponse::new(r).unwrap()).collect();
            for s in score_ueq(&rs, &ScaleMap::standard()).unwrap() {
                prop_assert!((-3.0..=3.0).contains(&s.mean));
            }
        }
    }
}
