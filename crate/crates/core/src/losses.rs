//! Loss primitives with analytic gradients, the per-head encoder loss
//! (classification over positives and negatives, regression over positives
//! only), the matching-free auxiliary decoder loss, and the global
//! objective combining all branches across decoder layers.

use std::collections::BTreeMap;

use crate::assigners::{Assignment, GroundTruth};
use crate::error::{Error, Result};
use crate::geometry::{giou_with_grad, BBox, CenterBox};

/// Focusing parameters for the focal loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalParams {
    pub alpha: f64,
    pub gamma: f64,
}

impl Default for FocalParams {
    fn default() -> Self {
        Self { alpha: 0.25, gamma: 2.0 }
    }
}

/// Numerically stable softplus, ln(1 + e^x).
#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binary focal loss on a logit, with its derivative with respect to the
/// logit. For a positive label the value is -alpha (1-p)^gamma ln p; for a
/// negative label -(1-alpha) p^gamma ln(1-p), where p = sigmoid(logit).
pub fn focal_loss(logit: f64, positive: bool, params: FocalParams) -> (f64, f64) {
    let FocalParams { alpha, gamma } = params;
    let p = sigmoid(logit);
    if positive {
        let log_p = -softplus(-logit);
        let value = -alpha * (1.0 - p).powf(gamma) * log_p;
        let grad = alpha * (1.0 - p).powf(gamma) * (gamma * p * log_p + p - 1.0);
        (value, grad)
    } else {
        let log_1mp = -softplus(logit);
        let value = -(1.0 - alpha) * p.powf(gamma) * log_1mp;
        let grad = (1.0 - alpha) * p.powf(gamma) * (p - gamma * (1.0 - p) * log_1mp);
        (value, grad)
    }
}

/// Binary cross-entropy on a logit against a soft target in [0, 1].
pub fn bce_with_logit(logit: f64, target: f64) -> f64 {
    softplus(logit) - target * logit
}

/// 1 - GIoU of (pred, gt), in [0, 2], with the gradient with respect to
/// pred's corner coordinates.
pub fn giou_loss(pred: &BBox, gt: &BBox) -> (f64, [f64; 4]) {
    let (g, grad) = giou_with_grad(pred, gt);
    (1.0 - g, [-grad[0], -grad[1], -grad[2], -grad[3]])
}

/// Which classification loss an encoder head trains with. Regression is
/// GIoU for every head; centerness adds a BCE branch where present.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeadLossKind {
    /// Sigmoid focal classification (one-stage heads).
    Focal { params: FocalParams, centerness: bool },
    /// Softmax cross-entropy with an explicit background class
    /// (two-stage heads); logits must have num_classes + 1 entries.
    CrossEntropy,
}

impl HeadLossKind {
    pub fn for_assigner(config: &crate::collab::AssignerConfig) -> Self {
        use crate::collab::AssignerConfig::*;
        match config {
            Atss { .. } => HeadLossKind::Focal { params: FocalParams::default(), centerness: true },
            Fcos { .. } => HeadLossKind::Focal { params: FocalParams::default(), centerness: true },
            MaxIouAnchors { .. } => {
                HeadLossKind::Focal { params: FocalParams::default(), centerness: false }
            }
            MaxIouProposals { .. } => HeadLossKind::CrossEntropy,
        }
    }
}

/// Dense per-location predictions for one pyramid level: class logits,
/// decoded boxes in absolute coordinates, optional centerness logits.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelPredictions {
    pub cls_logits: Vec<Vec<f64>>,
    pub boxes: Vec<BBox>,
    pub centerness_logits: Option<Vec<f64>>,
}

/// One head's predictions over all levels it covers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HeadPredictions {
    pub levels: BTreeMap<u32, LevelPredictions>,
}

impl HeadPredictions {
    fn lookup(&self, level: u32, loc: usize) -> Result<&LevelPredictions> {
        let lp = self.levels.get(&level).ok_or_else(|| {
            Error::InvalidInput(format!("no predictions for pyramid level {level}"))
        })?;
        if loc >= lp.cls_logits.len() || loc >= lp.boxes.len() {
            return Err(Error::InvalidInput(format!(
                "location {loc} out of range on level {level}"
            )));
        }
        Ok(lp)
    }
}

/// Per-term weights inside one head's encoder loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermWeights {
    pub cls: f64,
    pub reg: f64,
    pub centerness: f64,
}

impl Default for TermWeights {
    fn default() -> Self {
        Self { cls: 1.0, reg: 1.0, centerness: 1.0 }
    }
}

/// Components of one head's encoder loss. `total` is the weighted sum,
/// normalized by the positive count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderHeadLoss {
    pub cls: f64,
    pub reg: f64,
    pub centerness: f64,
    pub total: f64,
}

fn focal_cls_sum(logits: &[f64], target: Option<usize>, params: FocalParams) -> f64 {
    logits
        .iter()
        .enumerate()
        .map(|(c, &z)| focal_loss(z, target == Some(c), params).0)
        .sum()
}

fn softmax_ce(logits: &[f64], target: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum: f64 = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
    log_sum - logits[target]
}

/// One head's encoder loss: classification plus regression (plus
/// centerness where configured) over positives, classification only over
/// negatives, summed and divided by the positive count. Negative samples
/// contribute no regression term.
pub fn encoder_head_loss(
    kind: HeadLossKind,
    assignment: &Assignment,
    gt: &GroundTruth,
    preds: &HeadPredictions,
    weights: TermWeights,
) -> Result<EncoderHeadLoss> {
    assignment.validate(gt.objects.len())?;
    let num_classes = gt.num_classes;
    let expected_logits = match kind {
        HeadLossKind::Focal { .. } => num_classes,
        HeadLossKind::CrossEntropy => num_classes + 1,
    };

    let mut cls = 0.0;
    let mut reg = 0.0;
    let mut centerness = 0.0;

    for p in &assignment.pos {
        let lp = preds.lookup(p.level, p.loc)?;
        let logits = &lp.cls_logits[p.loc];
        if logits.len() != expected_logits {
            return Err(Error::InvalidInput(format!(
                "expected {expected_logits} class logits, got {}",
                logits.len()
            )));
        }
        match kind {
            HeadLossKind::Focal { params, centerness: with_cent } => {
                cls += focal_cls_sum(logits, Some(p.label), params);
                if with_cent {
                    let target = p.centerness.ok_or_else(|| {
                        Error::InvalidInput("positive sample lacks a centerness target".into())
                    })?;
                    let z = lp
                        .centerness_logits
                        .as_ref()
                        .and_then(|v| v.get(p.loc))
                        .ok_or_else(|| {
                            Error::InvalidInput("predictions lack centerness logits".into())
                        })?;
                    centerness += bce_with_logit(*z, target);
                }
            }
            HeadLossKind::CrossEntropy => {
                cls += softmax_ce(logits, p.label);
            }
        }
        let gt_box = &gt.objects[p.gt_index].bbox;
        reg += giou_loss(&lp.boxes[p.loc], gt_box).0;
    }

    for &(level, loc) in &assignment.neg {
        let lp = preds.lookup(level, loc)?;
        let logits = &lp.cls_logits[loc];
        if logits.len() != expected_logits {
            return Err(Error::InvalidInput(format!(
                "expected {expected_logits} class logits, got {}",
                logits.len()
            )));
        }
        match kind {
            HeadLossKind::Focal { params, .. } => {
                cls += focal_cls_sum(logits, None, params);
            }
            HeadLossKind::CrossEntropy => {
                cls += softmax_ce(logits, num_classes);
            }
        }
    }

    let norm = assignment.num_pos().max(1) as f64;
    let (cls, reg, centerness) = (cls / norm, reg / norm, centerness / norm);
    let total = weights.cls * cls + weights.reg * reg + weights.centerness * centerness;
    Ok(EncoderHeadLoss { cls, reg, centerness, total })
}

/// Everything needed to score one auxiliary head against the encoder.
pub struct EncoderHeadInput<'a> {
    pub kind: HeadLossKind,
    pub assignment: &'a Assignment,
    pub gt: &'a GroundTruth,
    pub predictions: &'a HeadPredictions,
    pub weights: TermWeights,
}

/// Per-head encoder losses and their sum over the K heads.
pub fn encoder_loss(heads: &[EncoderHeadInput<'_>]) -> Result<(Vec<EncoderHeadLoss>, f64)> {
    let per_head: Vec<EncoderHeadLoss> = heads
        .iter()
        .map(|h| encoder_head_loss(h.kind, h.assignment, h.gt, h.predictions, h.weights))
        .collect::<Result<_>>()?;
    let total = per_head.iter().map(|l| l.total).sum();
    Ok((per_head, total))
}

/// One auxiliary decoder query's raw outputs: class logits plus a
/// normalized (cx, cy, w, h) box.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderQueryOutput {
    pub cls_logits: Vec<f64>,
    pub bbox: CenterBox,
}

/// Term weights for decoder losses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoderTermWeights {
    pub cls: f64,
    pub l1: f64,
    pub giou: f64,
}

impl Default for DecoderTermWeights {
    fn default() -> Self {
        Self { cls: 1.0, l1: 1.0, giou: 1.0 }
    }
}

/// Matching-free loss of one decoder layer in one auxiliary branch: query
/// q is scored directly against its pre-bound ground truth, with focal
/// classification, L1 in normalized coordinates, and GIoU. Normalized by
/// the query count.
pub fn decoder_aux_loss(
    outputs: &[DecoderQueryOutput],
    assignment: &Assignment,
    gt: &GroundTruth,
    focal: FocalParams,
    weights: DecoderTermWeights,
) -> Result<f64> {
    if outputs.len() != assignment.num_pos() {
        return Err(Error::InvalidInput(format!(
            "group size mismatch: {} outputs for {} pre-bound queries",
            outputs.len(),
            assignment.num_pos()
        )));
    }
    if outputs.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for (out, p) in outputs.iter().zip(&assignment.pos) {
        if out.cls_logits.len() != gt.num_classes {
            return Err(Error::InvalidInput(format!(
                "expected {} class logits, got {}",
                gt.num_classes,
                out.cls_logits.len()
            )));
        }
        let obj = &gt.objects[p.gt_index];
        let cls = focal_cls_sum(&out.cls_logits, Some(obj.label), focal);

        let gt_norm = CenterBox {
            cx: (obj.bbox.x1 + obj.bbox.x2) / 2.0 / gt.image_w,
            cy: (obj.bbox.y1 + obj.bbox.y2) / 2.0 / gt.image_h,
            w: obj.bbox.width() / gt.image_w,
            h: obj.bbox.height() / gt.image_h,
        };
        let l1 = (out.bbox.cx - gt_norm.cx).abs()
            + (out.bbox.cy - gt_norm.cy).abs()
            + (out.bbox.w - gt_norm.w).abs()
            + (out.bbox.h - gt_norm.h).abs();
        let g = giou_loss(&out.bbox.to_corner(), &gt_norm.to_corner()).0;
        sum += weights.cls * cls + weights.l1 * l1 + weights.giou * g;
    }
    Ok(sum / outputs.len() as f64)
}

/// Balancing coefficients of the global objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { lambda1: 1.0, lambda2: 2.0 }
    }
}

/// Loss components entering the global objective: the set-matching branch
/// per decoder layer, each auxiliary branch per decoder layer, and the
/// encoder total.
#[derive(Debug, Clone, PartialEq)]
pub struct LossComponents {
    /// Set-matching decoder loss per layer, length L.
    pub main_decoder: Vec<f64>,
    /// Auxiliary decoder losses, indexed `[head][layer]`, K rows of length L.
    pub aux_decoder: Vec<Vec<f64>>,
    /// Encoder loss summed over heads.
    pub encoder: f64,
}

impl LossComponents {
    fn validate(&self) -> Result<usize> {
        let layers = self.main_decoder.len();
        if layers == 0 {
            return Err(Error::InvalidInput(
                "global loss needs at least one decoder layer".into(),
            ));
        }
        for (i, row) in self.aux_decoder.iter().enumerate() {
            if row.len() != layers {
                return Err(Error::InvalidInput(format!(
                    "auxiliary branch {i} provides {} layer losses, expected {layers}",
                    row.len()
                )));
            }
        }
        Ok(layers)
    }
}

/// The global objective. As printed, the encoder term sits inside the
/// layer sum and is therefore scaled by the layer count; set
/// `encoder_inside_layer_sum` to false to hoist it out.
pub fn global_loss(
    components: &LossComponents,
    weights: LossWeights,
    encoder_inside_layer_sum: bool,
) -> Result<f64> {
    if !(weights.lambda1 >= 0.0 && weights.lambda2 >= 0.0) {
        return Err(Error::InvalidConfig(
            "loss coefficients must be nonnegative".into(),
        ));
    }
    let layers = components.validate()?;
    let mut total = 0.0;
    for l in 0..layers {
        total += components.main_decoder[l];
        for row in &components.aux_decoder {
            total += weights.lambda1 * row[l];
        }
        if encoder_inside_layer_sum {
            total += weights.lambda2 * components.encoder;
        }
    }
    if !encoder_inside_layer_sum {
        total += weights.lambda2 * components.encoder;
    }
    Ok(total)
}

/// Full loss breakdown with the global total reproduced from its parts.
#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub encoder_heads: Vec<EncoderHeadLoss>,
    pub encoder_total: f64,
    pub main_decoder: Vec<f64>,
    pub aux_decoder: Vec<Vec<f64>>,
    pub global_total: f64,
}

pub fn assemble_report(
    encoder_heads: Vec<EncoderHeadLoss>,
    main_decoder: Vec<f64>,
    aux_decoder: Vec<Vec<f64>>,
    weights: LossWeights,
    encoder_inside_layer_sum: bool,
) -> Result<LossReport> {
    let encoder_total = encoder_heads.iter().map(|l| l.total).sum();
    let components = LossComponents {
        main_decoder: main_decoder.clone(),
        aux_decoder: aux_decoder.clone(),
        encoder: encoder_total,
    };
    let global_total = global_loss(&components, weights, encoder_inside_layer_sum)?;
    Ok(LossReport {
        encoder_heads,
        encoder_total,
        main_decoder,
        aux_decoder,
        global_total,
    })
}
