//! First-order intensity features and real-versus-synthetic cohort comparison.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::tensor::Tensor;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, MetricsError>;

pub const HISTOGRAM_BINS: usize = 64;

pub const FEATURE_NAMES: [&str; 14] = [
    "mean",
    "median",
    "min",
    "max",
    "range",
    "variance",
    "skewness",
    "excess_kurtosis",
    "energy",
    "entropy_bits",
    "uniformity",
    "p10",
    "p90",
    "mad",
];

/// First-order features of one image, in [`FEATURE_NAMES`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeatureVector {
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub range: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub energy: f64,
    pub entropy_bits: f64,
    pub uniformity: f64,
    pub p10: f64,
    pub p90: f64,
    pub mad: f64,
}

impl FeatureVector {
    pub fn values(&self) -> [f64; 14] {
        [
            self.mean,
            self.median,
            self.min,
            self.max,
            self.range,
            self.variance,
            self.skewness,
            self.excess_kurtosis,
            self.energy,
            self.entropy_bits,
            self.uniformity,
            self.p10,
            self.p90,
            self.mad,
        ]
    }
}

/// Linear interpolation between order statistics at position q·(n−1).
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn first_order_features(img: &Tensor) -> Result<FeatureVector> {
    let x = img.data();
    if x.is_empty() {
        return Err(MetricsError::Argument("first_order_features: empty image".into()));
    }
    let n = x.len() as f64;
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    let mean = x.iter().sum::<f64>() / n;
    let central = |k: i32| x.iter().map(|v| (v - mean).powi(k)).sum::<f64>() / n;
    let (m2, m3, m4) = (central(2), central(3), central(4));
    let (skewness, excess_kurtosis) = if m2 > 0.0 { (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0) } else { (0.0, 0.0) };

    let (entropy_bits, uniformity) = if max > min {
        let mut counts = [0usize; HISTOGRAM_BINS];
        let width = (max - min) / HISTOGRAM_BINS as f64;
        for &v in x {
            let b = (((v - min) / width) as usize).min(HISTOGRAM_BINS - 1);
            counts[b] += 1;
        }
        let mut entropy = 0.0;
        let mut uniformity = 0.0;
        for &c in counts.iter().filter(|&&c| c > 0) {
            let p = c as f64 / n;
            entropy -= p * p.log2();
            uniformity += p * p;
        }
        (entropy, uniformity)
    } else {
        (0.0, 1.0)
    };

    Ok(FeatureVector {
        mean,
        median: percentile(&sorted, 0.5),
        min,
        max,
        range: max - min,
        variance: m2,
        skewness,
        excess_kurtosis,
        energy: x.iter().map(|v| v * v).sum(),
        entropy_bits,
        uniformity,
        p10: percentile(&sorted, 0.1),
        p90: percentile(&sorted, 0.9),
        mad: x.iter().map(|v| (v - mean).abs()).sum::<f64>() / n,
    })
}

/// Two-sample Kolmogorov–Smirnov distance sup |F_a − F_b|.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::Argument("ks_statistic needs two nonempty samples".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    // track |i·n_b − j·n_a| in integers so the single final division is correctly rounded
    let (na, nb) = (a.len() as u128, b.len() as u128);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0u128);
    while i < a.len() && j < b.len() {
        // step past every copy of the smallest remaining value in both samples
        let v = if a[i].total_cmp(&b[j]).is_le() { a[i] } else { b[j] };
        while i < a.len() && a[i] == v {
            i += 1;
        }
        while j < b.len() && b[j] == v {
            j += 1;
        }
        d = d.max((i as u128 * nb).abs_diff(j as u128 * na));
    }
    Ok(d as f64 / (na * nb) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureRow {
    pub feature: String,
    pub mean_real: f64,
    pub mean_synth: f64,
    pub pooled_std: f64,
    pub standardized_diff: f64,
    pub ks_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureReport {
    pub n_real: usize,
    pub n_synth: usize,
    pub rows: Vec<FeatureRow>,
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, var)
}

/// Per-feature comparison of two image cohorts.
pub fn compare_cohorts(real: &[Tensor], synth: &[Tensor]) -> Result<FeatureReport> {
    if real.is_empty() || synth.is_empty() {
        return Err(MetricsError::Argument("compare_cohorts needs two nonempty cohorts".into()));
    }
    let features = |set: &[Tensor]| -> Result<Vec<[f64; 14]>> {
        set.iter().map(|img| first_order_features(img).map(|f| f.values())).collect()
    };
    let (fr, fs) = (features(real)?, features(synth)?);
    let (nr, ns) = (real.len() as f64, synth.len() as f64);
    let mut rows = Vec::with_capacity(FEATURE_NAMES.len());
    for (k, name) in FEATURE_NAMES.iter().enumerate() {
        let a: Vec<f64> = fr.iter().map(|f| f[k]).collect();
        let b: Vec<f64> = fs.iter().map(|f| f[k]).collect();
        let ((ma, va), (mb, vb)) = (mean_var(&a), mean_var(&b));
        let dof = nr + ns - 2.0;
        let pooled_std = if dof > 0.0 { (((nr - 1.0) * va + (ns - 1.0) * vb) / dof).sqrt() } else { 0.0 };
        let standardized_diff = if pooled_std > 0.0 { (ma - mb).abs() / pooled_std } else { 0.0 };
        rows.push(FeatureRow {
            feature: (*name).to_string(),
            mean_real: ma,
            mean_synth: mb,
            pooled_std,
            standardized_diff,
            ks_distance: ks_statistic(&a, &b)?,
        });
    }
    Ok(FeatureReport { n_real: real.len(), n_synth: synth.len(), rows })
}

impl FeatureReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,mean_real,mean_synth,pooled_std,standardized_diff,ks_distance\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:?},{:?},{:?},{:?},{:?}",
                r.feature, r.mean_real, r.mean_synth, r.pooled_std, r.standardized_diff, r.ks_distance
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report fields are plain numbers and strings")
    }

    /// Writes JSON when `path` ends in `.json`, CSV otherwise.
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = if path.extension().is_some_and(|e| e == "json") { self.to_json() } else { self.to_csv() };
        std::fs::write(path, text).map_err(|source| MetricsError::Io { path: path.display().to_string(), source })
    }

    pub fn row(&self, feature: &str) -> Option<&FeatureRow> {
        self.rows.iter().find(|r| r.feature == feature)
    }
}
