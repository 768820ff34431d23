//! Verification error rates over fused scores.
//!
//! Decisions accept when `score >= threshold`: FAR counts impostor scores at
//! or above the threshold, FRR counts genuine scores strictly below it.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of thresholds in the standard sweep, both endpoints included.
pub const SWEEP_POINTS: usize = 1000;

#[derive(Clone, Debug, PartialEq)]
pub struct FusedScores {
    pub genuine: Vec<f64>,
    pub impostor: Vec<f64>,
}

impl FusedScores {
    pub fn new(genuine: Vec<f64>, impostor: Vec<f64>) -> Result<Self> {
        if genuine.is_empty() || impostor.is_empty() {
            return Err(Error::Validation("fused scores need both classes".to_owned()));
        }
        if genuine.iter().chain(&impostor).any(|s| !s.is_finite()) {
            return Err(Error::Validation("fused scores must be finite".to_owned()));
        }
        Ok(Self { genuine, impostor })
    }

    /// Applies `f` to every score, e.g. a monotone transform.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            genuine: self.genuine.iter().map(|&s| f(s)).collect(),
            impostor: self.impostor.iter().map(|&s| f(s)).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub eer: f64,
    pub eer_threshold: f64,
    /// All fused scores were equal; the curve carries no information.
    pub degenerate: bool,
}

impl RocCurve {
    /// CSV with header `threshold,far,frr`, six decimal places.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,far,frr\n");
        for p in &self.points {
            let _ = writeln!(out, "{:.6},{:.6},{:.6}", p.threshold, p.far, p.frr);
        }
        out
    }

    pub fn auc(&self) -> f64 {
        auc(&self.points)
    }
}

/// Sorted copies of both classes for O(log n) rate queries.
struct RateCounter {
    genuine: Vec<f64>,
    impostor: Vec<f64>,
}

impl RateCounter {
    fn new(fs: &FusedScores) -> Self {
        let sorted = |v: &[f64]| {
            let mut v = v.to_vec();
            v.sort_unstable_by(f64::total_cmp);
            v
        };
        Self {
            genuine: sorted(&fs.genuine),
            impostor: sorted(&fs.impostor),
        }
    }

    fn rates(&self, t: f64) -> (f64, f64) {
        let imp_below = self.impostor.partition_point(|&s| s < t);
        let gen_below = self.genuine.partition_point(|&s| s < t);
        let far = (self.impostor.len() - imp_below) as f64 / self.impostor.len() as f64;
        let frr = gen_below as f64 / self.genuine.len() as f64;
        (far, frr)
    }

    fn bounds(&self) -> (f64, f64) {
        let lo = self.genuine[0].min(self.impostor[0]);
        let hi = self.genuine[self.genuine.len() - 1].max(self.impostor[self.impostor.len() - 1]);
        (lo, hi)
    }
}

fn sweep_thresholds(lo: f64, hi: f64) -> Vec<f64> {
    let last = (SWEEP_POINTS - 1) as f64;
    let step = (hi - lo) / last;
    let mut ts: Vec<f64> = if step.is_finite() {
        (0..SWEEP_POINTS).map(|k| lo + k as f64 * step).collect()
    } else {
        // span overflows f64; interpolate instead
        (0..SWEEP_POINTS)
            .map(|k| {
                let f = k as f64 / last;
                lo * (1.0 - f) + hi * f
            })
            .collect()
    };
    ts[SWEEP_POINTS - 1] = hi;
    ts
}

/// Sweeps [`SWEEP_POINTS`] evenly spaced thresholds from the lowest to the
/// highest fused score. The EER is `(FAR + FRR) / 2` at the first threshold
/// minimizing `|FAR - FRR|`. All-equal scores yield EER 0.5 and a warning.
pub fn sweep_roc(fs: &FusedScores) -> RocCurve {
    let curve = sweep_roc_quiet(fs);
    if curve.degenerate {
        log::warn!("all fused scores are equal; EER defaults to 0.5");
    }
    curve
}

pub(crate) fn sweep_roc_quiet(fs: &FusedScores) -> RocCurve {
    let counter = RateCounter::new(fs);
    let (lo, hi) = counter.bounds();
    let points: Vec<RocPoint> = sweep_thresholds(lo, hi)
        .into_iter()
        .map(|threshold| {
            let (far, frr) = counter.rates(threshold);
            RocPoint { threshold, far, frr }
        })
        .collect();
    let mut best = 0;
    for (i, p) in points.iter().enumerate() {
        if (p.far - p.frr).abs() < (points[best].far - points[best].frr).abs() {
            best = i;
        }
    }
    let at = points[best];
    RocCurve {
        eer: (at.far + at.frr) / 2.0,
        eer_threshold: at.threshold,
        degenerate: lo == hi,
        points,
    }
}

/// Exact EER over every meaningful threshold: each distinct score, the
/// midpoints between consecutive distinct scores, and both infinities.
/// Ties in `|FAR - FRR|` resolve to the lowest threshold.
pub fn eer_oracle(fs: &FusedScores) -> f64 {
    let mut all: Vec<(f64, bool)> = fs
        .genuine
        .iter()
        .map(|&s| (s, true))
        .chain(fs.impostor.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n_gen = fs.genuine.len() as f64;
    let n_imp = fs.impostor.len() as f64;

    // walk distinct values upward, tracking counts strictly below the cursor
    let mut gen_below = 0usize;
    let mut imp_below = 0usize;
    let mut best_diff = f64::INFINITY;
    let mut best_eer = 0.5;
    let mut consider = |gen_below: usize, imp_below: usize| {
        let far = (n_imp - imp_below as f64) / n_imp;
        let frr = gen_below as f64 / n_gen;
        let diff = (far - frr).abs();
        if diff < best_diff {
            best_diff = diff;
            best_eer = (far + frr) / 2.0;
        }
    };
    consider(0, 0); // -inf
    let mut i = 0;
    while i < all.len() {
        let v = all[i].0;
        consider(gen_below, imp_below); // threshold = v
        while i < all.len() && all[i].0 == v {
            if all[i].1 {
                gen_below += 1;
            } else {
                imp_below += 1;
            }
            i += 1;
        }
        // midpoint to the next distinct value, or +inf after the last
        consider(gen_below, imp_below);
    }
    best_eer
}

/// Half total error rate at a fixed threshold.
pub fn hter(fs: &FusedScores, threshold: f64) -> f64 {
    let imp_accepted = fs.impostor.iter().filter(|&&s| s >= threshold).count();
    let gen_rejected = fs.genuine.iter().filter(|&&s| s < threshold).count();
    let far = imp_accepted as f64 / fs.impostor.len() as f64;
    let frr = gen_rejected as f64 / fs.genuine.len() as f64;
    (far + frr) / 2.0
}

/// Trapezoidal area under FRR as a function of FAR. Points are sorted by
/// FAR and duplicate FAR values are collapsed to their mean FRR. Smaller
/// is better.
pub fn auc(points: &[RocPoint]) -> f64 {
    let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p.far, p.frr)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut collapsed: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    let mut i = 0;
    while i < pts.len() {
        let far = pts[i].0;
        let mut sum = 0.0;
        let mut n = 0usize;
        while i < pts.len() && pts[i].0 == far {
            sum += pts[i].1;
            n += 1;
            i += 1;
        }
        collapsed.push((far, sum / n as f64));
    }
    collapsed
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum::<f64>()
        .clamp(0.0, 1.0)
}

/// Relative improvement in percent: `100 * (reference - candidate) / reference`.
pub fn gain(reference: f64, candidate: f64) -> Result<f64> {
    if !reference.is_finite() || reference <= 0.0 {
        return Err(Error::UndefinedGain);
    }
    Ok(100.0 * (reference - candidate) / reference)
}
