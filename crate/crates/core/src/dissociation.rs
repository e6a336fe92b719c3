//! Geometric-semantic dissociation: offsets between the image center and the
//! sampled fixation centers, their bucketing and corpus statistics, a
//! one-sample t-test, and foreground-threshold stability.

use std::fmt;

use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::imaging::{GrayMap, PixelPoint};
use crate::sas::{sample, SamplingConfig};

/// Bucket edges for offsets in pixels.
pub const BUCKET_EDGES: [f64; 4] = [0.0, 33.0, 66.0, 100.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Bucket {
    Mild,
    Moderate,
    Severe,
    Overflow,
}

impl Bucket {
    pub const ALL: [Bucket; 4] = [Bucket::Mild, Bucket::Moderate, Bucket::Severe, Bucket::Overflow];

    pub fn of(offset: f64) -> Bucket {
        if offset < BUCKET_EDGES[1] {
            Bucket::Mild
        } else if offset < BUCKET_EDGES[2] {
            Bucket::Moderate
        } else if offset < BUCKET_EDGES[3] {
            Bucket::Severe
        } else {
            Bucket::Overflow
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Bucket::Mild => "[0,33)",
            Bucket::Moderate => "[33,66)",
            Bucket::Severe => "[66,100)",
            Bucket::Overflow => "[100,inf)",
        }
    }
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OffsetRecord {
    pub image_id: String,
    pub offset: f64,
    pub bucket: Bucket,
}

impl OffsetRecord {
    pub fn new(image_id: impl Into<String>, offset: f64) -> Result<Self> {
        if !(offset >= 0.0) || !offset.is_finite() {
            return Err(Error::Argument(format!("offset must be finite and >= 0, got {offset}")));
        }
        Ok(Self {
            image_id: image_id.into(),
            offset,
            bucket: Bucket::of(offset),
        })
    }
}

pub fn geometric_center(width: usize, height: usize) -> PixelPoint {
    PixelPoint::new((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0)
}

/// Mean distance from the geometric center to the sampled fixation centers.
pub fn semantic_offset(s_att: &GrayMap, m_fg: &GrayMap, config: &SamplingConfig) -> Result<f64> {
    let fixations = sample(s_att, m_fg, config)?;
    let center = geometric_center(s_att.width(), s_att.height());
    let total = kahan_sum(fixations.centers.iter().map(|c| c.to_point().distance(&center)));
    Ok(total / fixations.len() as f64)
}

/// Compensated summation in iteration order.
pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Mean and sample (n - 1) standard deviation; the deviation is 0 for n = 1.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = kahan_sum(values.iter().copied()) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss = kahan_sum(values.iter().map(|v| (v - mean) * (v - mean)));
    (mean, (ss / (n - 1.0)).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketStats {
    pub bucket: Bucket,
    pub count: usize,
    pub mean: f64,
    pub std: f64,
}

/// Per-bucket count, mean and sample standard deviation, overflow included.
pub fn bucket_offsets(records: &[OffsetRecord]) -> Vec<BucketStats> {
    Bucket::ALL
        .iter()
        .map(|&bucket| {
            let values: Vec<f64> = records
                .iter()
                .filter(|r| r.bucket == bucket)
                .map(|r| r.offset)
                .collect();
            let (mean, std) = if values.is_empty() { (0.0, 0.0) } else { mean_std(&values) };
            BucketStats {
                bucket,
                count: values.len(),
                mean,
                std,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusReport {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    /// Set when `n = 1` and the standard deviation is undefined (reported as 0).
    pub single_sample: bool,
    /// `(bin_left, count)` for unit-width bins from 0 to the largest offset.
    pub histogram: Vec<(usize, usize)>,
}

impl CorpusReport {
    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("bin_left,count\n");
        for (left, count) in &self.histogram {
            out.push_str(&format!("{left},{count}\n"));
        }
        out
    }
}

pub fn corpus_report(records: &[OffsetRecord]) -> Result<CorpusReport> {
    if records.is_empty() {
        return Err(Error::Statistics("corpus report over zero records".into()));
    }
    let values: Vec<f64> = records.iter().map(|r| r.offset).collect();
    let (mean, std) = mean_std(&values);
    let top = values.iter().map(|v| v.floor() as usize).max().unwrap_or(0);
    let mut counts = vec![0usize; top + 1];
    for v in &values {
        counts[v.floor() as usize] += 1;
    }
    Ok(CorpusReport {
        n: values.len(),
        mean,
        std,
        single_sample: values.len() == 1,
        histogram: counts.into_iter().enumerate().collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub df: f64,
}

/// One-sample Student t-test of `mean(values) = mu0`.
pub fn one_sample_t(values: &[f64], mu0: f64) -> Result<TTest> {
    if values.len() < 2 {
        return Err(Error::Statistics(format!(
            "t-test needs at least two values, got {}",
            values.len()
        )));
    }
    let (mean, std) = mean_std(values);
    if std == 0.0 {
        return Err(Error::Statistics("t-test on a zero-variance sample".into()));
    }
    let n = values.len() as f64;
    let t = (mean - mu0) * n.sqrt() / std;
    let df = n - 1.0;
    // P(|T| > |t|) = I_{df / (df + t^2)}(df / 2, 1 / 2).
    let p = beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0);
    Ok(TTest { t, p, df })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskStability {
    pub uncertain_fraction: f64,
    pub area_diff_fraction: f64,
}

/// Fraction of pixels whose classification depends on the threshold within
/// `(tau_lo, tau_hi]`, and the normalised foreground-area change between the
/// two thresholds.
pub fn mask_stability(m_prob: &GrayMap, tau_lo: f64, tau_hi: f64) -> Result<MaskStability> {
    if !(0.0 <= tau_lo && tau_lo < tau_hi && tau_hi <= 1.0) {
        return Err(Error::Argument(format!(
            "need 0 <= tau_lo < tau_hi <= 1, got ({tau_lo}, {tau_hi})"
        )));
    }
    if m_prob.is_empty() {
        return Err(Error::Argument("stability of an empty map".into()));
    }
    let total = m_prob.len() as f64;
    let uncertain = m_prob.data().iter().filter(|&&v| tau_lo < v && v <= tau_hi).count();
    let above_lo = m_prob.data().iter().filter(|&&v| v > tau_lo).count();
    let above_hi = m_prob.data().iter().filter(|&&v| v > tau_hi).count();
    Ok(MaskStability {
        uncertain_fraction: uncertain as f64 / total,
        area_diff_fraction: above_lo.abs_diff(above_hi) as f64 / total,
    })
}
