//! Training-analysis instruments: per-pixel discriminability score maps,
//! foreground/background activation curves swept over a score threshold,
//! and the epoch-to-epoch matching instability metric.

use crate::assigners::GroundTruth;
use crate::error::{Error, Result};
use crate::priors::{bilinear_resize, ScalarMap};

/// Image-resolution score map with values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

/// Binary foreground mask at image resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ForegroundMask {
    pub height: usize,
    pub width: usize,
    pub mask: Vec<bool>,
}

impl ForegroundMask {
    pub fn new(height: usize, width: usize, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != height * width {
            return Err(Error::InvalidInput(format!(
                "mask dims {height}x{width} do not match {} entries",
                mask.len()
            )));
        }
        Ok(Self { height, width, mask })
    }

    /// Marks the pixels whose centers fall inside any ground-truth box.
    pub fn from_ground_truth(gt: &GroundTruth, height: usize, width: usize) -> Self {
        let mut mask = vec![false; height * width];
        for obj in &gt.objects {
            let b = &obj.bbox;
            for row in 0..height {
                let cy = row as f64 + 0.5;
                if cy < b.y1 || cy >= b.y2 {
                    continue;
                }
                for col in 0..width {
                    let cx = col as f64 + 0.5;
                    if cx >= b.x1 && cx < b.x2 {
                        mask[row * width + col] = true;
                    }
                }
            }
        }
        Self { height, width, mask }
    }
}

/// One sample of the threshold sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub threshold: f64,
    pub iof: f64,
    pub iob: f64,
}

/// Averages the max-normalized per-level maps, each resized to the image
/// size. A level whose maximum is zero contributes zero.
pub fn discriminability_map(
    level_maps: &[ScalarMap],
    image_h: usize,
    image_w: usize,
) -> Result<ScoreMap> {
    if level_maps.is_empty() {
        return Err(Error::InvalidInput(
            "discriminability needs at least one level map".into(),
        ));
    }
    if image_h == 0 || image_w == 0 {
        return Err(Error::InvalidInput("image dims must be positive".into()));
    }
    let mut acc = vec![0.0f64; image_h * image_w];
    for m in level_maps {
        let peak = m.values.iter().cloned().fold(0.0f64, f64::max);
        if peak == 0.0 {
            continue;
        }
        let normalized = ScalarMap::new(
            m.level,
            m.height,
            m.width,
            m.values.iter().map(|v| v / peak).collect(),
        )?;
        let resized = bilinear_resize(&normalized, image_h, image_w)?;
        for (a, v) in acc.iter_mut().zip(&resized.values) {
            *a += v;
        }
    }
    let j = level_maps.len() as f64;
    Ok(ScoreMap {
        height: image_h,
        width: image_w,
        // rounding in the bilinear blend can overshoot by an ulp
        values: acc.into_iter().map(|v| (v / j).clamp(0.0, 1.0)).collect(),
    })
}

/// Fractions of foreground and background pixels whose score strictly
/// exceeds `threshold`. An empty foreground (or background) yields 0 for
/// that ratio.
pub fn iof_iob_at_threshold(
    scores: &ScoreMap,
    fg: &ForegroundMask,
    threshold: f64,
) -> Result<(f64, f64)> {
    if scores.height != fg.height || scores.width != fg.width {
        return Err(Error::InvalidInput(format!(
            "score map {}x{} does not match mask {}x{}",
            scores.height, scores.width, fg.height, fg.width
        )));
    }
    if !threshold.is_finite() {
        return Err(Error::InvalidInput("threshold must be finite".into()));
    }
    let mut fg_total = 0usize;
    let mut fg_hit = 0usize;
    let mut bg_total = 0usize;
    let mut bg_hit = 0usize;
    for (v, &is_fg) in scores.values.iter().zip(&fg.mask) {
        let active = *v > threshold;
        if is_fg {
            fg_total += 1;
            fg_hit += active as usize;
        } else {
            bg_total += 1;
            bg_hit += active as usize;
        }
    }
    let iof = if fg_total == 0 { 0.0 } else { fg_hit as f64 / fg_total as f64 };
    let iob = if bg_total == 0 { 0.0 } else { bg_hit as f64 / bg_total as f64 };
    Ok((iof, iob))
}

/// The sweep over an ascending threshold list; both coordinates are
/// non-increasing in the threshold.
pub fn iof_iob_curve(
    scores: &ScoreMap,
    fg: &ForegroundMask,
    thresholds: &[f64],
) -> Result<Vec<CurvePoint>> {
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidInput(
            "thresholds must be sorted ascending".into(),
        ));
    }
    thresholds
        .iter()
        .map(|&s| {
            let (iof, iob) = iof_iob_at_threshold(scores, fg, s)?;
            Ok(CurvePoint { threshold: s, iof, iob })
        })
        .collect()
}

/// `count` evenly spaced thresholds spanning [0, 1].
pub fn default_thresholds(count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![0.0];
    }
    (0..count)
        .map(|k| k as f64 / (count - 1) as f64)
        .collect()
}

/// One epoch's matching state: for every image, the query matched to each
/// ground truth (None = unmatched).
#[derive(Debug, Clone, PartialEq)]
pub struct EpochMatching {
    pub images: Vec<Vec<Option<usize>>>,
}

/// Instability series: one value per adjacent epoch pair plus their mean.
#[derive(Debug, Clone, PartialEq)]
pub struct InstabilitySeries {
    pub per_pair: Vec<f64>,
    pub mean: f64,
}

/// Fraction of ground truths whose matched query changes between
/// consecutive epochs, averaged over images. Gaining or losing a match
/// counts as a change; images without ground truths are skipped.
pub fn matching_instability(epochs: &[EpochMatching]) -> Result<InstabilitySeries> {
    if epochs.len() < 2 {
        return Err(Error::InvalidInput(
            "instability needs at least two epochs".into(),
        ));
    }
    let first = &epochs[0];
    for (e, epoch) in epochs.iter().enumerate().skip(1) {
        if epoch.images.len() != first.images.len() {
            return Err(Error::InvalidInput(format!(
                "epoch {e} holds {} images, expected {}",
                epoch.images.len(),
                first.images.len()
            )));
        }
        for (i, (a, b)) in first.images.iter().zip(&epoch.images).enumerate() {
            if a.len() != b.len() {
                return Err(Error::InvalidInput(format!(
                    "image {i} has {} ground truths in epoch {e}, expected {}",
                    b.len(),
                    a.len()
                )));
            }
        }
    }

    let per_pair: Vec<f64> = epochs
        .windows(2)
        .map(|w| {
            let mut ratios = Vec::new();
            for (prev, next) in w[0].images.iter().zip(&w[1].images) {
                if prev.is_empty() {
                    continue;
                }
                let changed = prev.iter().zip(next).filter(|(a, b)| a != b).count();
                ratios.push(changed as f64 / prev.len() as f64);
            }
            if ratios.is_empty() {
                0.0
            } else {
                ratios.iter().sum::<f64>() / ratios.len() as f64
            }
        })
        .collect();
    let mean = per_pair.iter().sum::<f64>() / per_pair.len() as f64;
    Ok(InstabilitySeries { per_pair, mean })
}
