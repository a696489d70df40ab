use serde::{Deserialize, Serialize};

use crate::special::normal_two_sided_p;
use crate::{QuestionnaireError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProportionTest {
    pub z: f64,
    pub p: f64,
}

/// Pooled two-proportion z-test, two-sided.
pub fn two_proportion_z(s1: u64, n1: u64, s2: u64, n2: u64) -> Result<ProportionTest> {
    if n1 == 0 {
        return Err(QuestionnaireError::DegenerateGroup(0));
    }
    if n2 == 0 {
        return Err(QuestionnaireError::DegenerateGroup(1));
    }
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let p1 = s1 as f64 / n1f;
    let p2 = s2 as f64 / n2f;
    let pooled = (s1 + s2) as f64 / (n1f + n2f);
    let se = (pooled * (1.0 - pooled) * (1.0 / n1f + 1.0 / n2f)).sqrt();
    // A pooled proportion of 0 or 1 forces p1 == p2.
    let z = if se > 0.0 { (p1 - p2) / se } else { 0.0 };
    Ok(ProportionTest {
        z,
        p: normal_two_sided_p(z),
    })
}

/// Holm step-down adjustment; results are in the input order.
pub fn holm_adjust(raw: &[f64]) -> Vec<f64> {
    let m = raw.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| raw[a].total_cmp(&raw[b]));
    let mut adjusted = vec![0.0; m];
    let mut running: f64 = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        let scaled = ((m - rank) as f64 * raw[i]).min(1.0);
        running = running.max(scaled);
        adjusted[i] = running;
    }
    adjusted
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Correction {
    Holm,
    None,
}

/// Symmetric matrices over all group pairs. The diagonal holds z = 0 and
/// p = 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseMatrix {
    pub z: Vec<Vec<f64>>,
    pub raw_p: Vec<Vec<f64>>,
    pub adjusted_p: Vec<Vec<f64>>,
}

pub fn pairwise_proportion_tests(groups: &[(u64, u64)], correction: Correction) -> Result<PairwiseMatrix> {
    if let Some(i) = groups.iter().position(|&(_, n)| n == 0) {
        return Err(QuestionnaireError::DegenerateGroup(i));
    }
    let k = groups.len();
    let mut z = vec![vec![0.0; k]; k];
    let mut raw_p = vec![vec![1.0; k]; k];
    let mut pairs = Vec::new();
    for i in 0..k {
        for j in (i + 1)..k {
            let (s1, n1) = groups[i];
            let (s2, n2) = groups[j];
            let t = two_proportion_z(s1, n1, s2, n2)?;
            z[i][j] = t.z;
            z[j][i] = -t.z;
            raw_p[i][j] = t.p;
            raw_p[j][i] = t.p;
            pairs.push((i, j));
        }
    }
    let flat: Vec<f64> = pairs.iter().map(|&(i, j)| raw_p[i][j]).collect();
    let adj = match correction {
        Correction::Holm => holm_adjust(&flat),
        Correction::None => flat,
    };
    let mut adjusted_p = vec![vec![1.0; k]; k];
    for (&(i, j), p) in pairs.iter().zip(adj) {
        adjusted_p[i][j] = p;
        adjusted_p[j][i] = p;
    }
    Ok(PairwiseMatrix { z, raw_p, adjusted_p })
}
