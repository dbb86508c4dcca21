//! Adaptive training sample selection over anchors: per ground truth, the
//! top-k center-closest anchors of every level are candidates, the IoU
//! threshold is their mean plus standard deviation, and a positive must
//! additionally have its center inside the ground-truth box.

use crate::error::{Error, Result};
use crate::geometry::{encode_deltas, encode_ltrb, iou, BBox};
use crate::priors::{PriorGeom, PriorKind, PriorSet};

use super::{mean_std, Assignment, GroundTruth, PosSample, RegTarget};

struct AnchorRef {
    level: u32,
    loc: usize,
    bbox: BBox,
    cx: f64,
    cy: f64,
}

/// Runs the adaptive selection with `top_k` candidates per level per
/// ground truth. Anchors claimed by several ground truths go to the one of
/// highest IoU (lowest gt index on ties). There is no ignored band.
pub fn assign_atss(priors: &PriorSet, gt: &GroundTruth, top_k: usize) -> Result<Assignment> {
    if priors.kind != PriorKind::Anchor {
        return Err(Error::InvalidInput(
            "adaptive selection requires anchor priors".into(),
        ));
    }
    if top_k == 0 {
        return Err(Error::InvalidConfig("top_k must be at least 1".into()));
    }

    let anchors: Vec<AnchorRef> = priors
        .levels
        .iter()
        .flat_map(|lv| {
            lv.entries.iter().map(move |e| {
                let bbox = match e.geom {
                    PriorGeom::Anchor(b) => b,
                    PriorGeom::Point { .. } => unreachable!("kind checked above"),
                };
                let (cx, cy) = bbox.center();
                AnchorRef {
                    level: lv.level,
                    loc: e.loc,
                    bbox,
                    cx,
                    cy,
                }
            })
        })
        .collect();

    // best claim per anchor: (iou, gt index)
    let mut claim: Vec<Option<(f64, usize)>> = vec![None; anchors.len()];

    for (gt_idx, obj) in gt.objects.iter().enumerate() {
        let (gcx, gcy) = obj.bbox.center();

        // top-k per level by center distance, ties to the lower location
        let mut candidates: Vec<usize> = Vec::new();
        for lv in &priors.levels {
            let mut level_idx: Vec<usize> = (0..anchors.len())
                .filter(|&i| anchors[i].level == lv.level)
                .collect();
            level_idx.sort_by(|&a, &b| {
                let da = (anchors[a].cx - gcx).powi(2) + (anchors[a].cy - gcy).powi(2);
                let db = (anchors[b].cx - gcx).powi(2) + (anchors[b].cy - gcy).powi(2);
                da.partial_cmp(&db)
                    .unwrap()
                    .then(anchors[a].loc.cmp(&anchors[b].loc))
            });
            candidates.extend(level_idx.into_iter().take(top_k));
        }

        let ious: Vec<f64> = candidates
            .iter()
            .map(|&i| iou(&anchors[i].bbox, &obj.bbox))
            .collect();
        let (mean, std) = mean_std(&ious);
        let threshold = mean + std;

        for (&i, &overlap) in candidates.iter().zip(&ious) {
            if overlap >= threshold && obj.bbox.contains_strict(anchors[i].cx, anchors[i].cy) {
                let better = match claim[i] {
                    None => true,
                    Some((cur, _)) => overlap > cur,
                };
                if better {
                    claim[i] = Some((overlap, gt_idx));
                }
            }
        }
    }

    let mut out = Assignment::default();
    for (i, anchor) in anchors.iter().enumerate() {
        match claim[i] {
            Some((_, gt_idx)) => {
                let obj = &gt.objects[gt_idx];
                let ltrb = encode_ltrb(anchor.cx, anchor.cy, &obj.bbox)?;
                out.pos.push(PosSample {
                    level: anchor.level,
                    loc: anchor.loc,
                    gt_index: gt_idx,
                    label: obj.label,
                    reg: RegTarget::Deltas(encode_deltas(&anchor.bbox, &obj.bbox)?),
                    centerness: Some(ltrb.centerness),
                });
                out.pos_boxes.push(anchor.bbox);
            }
            None => out.neg.push((anchor.level, anchor.loc)),
        }
    }
    Ok(out.sorted())
}
