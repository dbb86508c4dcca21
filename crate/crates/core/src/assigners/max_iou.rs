//! Max-IoU threshold assignment over anchors or proposals: a box is
//! positive for its best-overlapping ground truth above `pos_thr`,
//! negative below `neg_thr`, and ignored in between. Ground truths left
//! without a positive rescue their best unclaimed overlapping box.

use crate::error::{Error, Result};
use crate::geometry::{encode_deltas, iou, BBox};

use super::{Assignment, GroundTruth, PosSample, RegTarget};

/// A prior box carrying its pyramid index pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaggedBox {
    pub level: u32,
    pub loc: usize,
    pub bbox: BBox,
}

#[derive(Clone, Copy, PartialEq)]
enum Bucket {
    Pos { gt: usize },
    Neg,
    Ignored,
}

pub fn assign_max_iou(
    boxes: &[TaggedBox],
    gt: &GroundTruth,
    pos_thr: f64,
    neg_thr: f64,
) -> Result<Assignment> {
    if !(pos_thr.is_finite() && neg_thr.is_finite()) || pos_thr < neg_thr {
        return Err(Error::InvalidConfig(format!(
            "thresholds must be finite with pos_thr >= neg_thr, got ({pos_thr}, {neg_thr})"
        )));
    }

    let num_gts = gt.objects.len();
    let mut overlaps = vec![vec![0.0f64; num_gts]; boxes.len()];
    for (i, b) in boxes.iter().enumerate() {
        for (g, obj) in gt.objects.iter().enumerate() {
            overlaps[i][g] = iou(&b.bbox, &obj.bbox);
        }
    }

    let mut buckets = vec![Bucket::Neg; boxes.len()];
    for (i, row) in overlaps.iter().enumerate() {
        // best gt, ties to the lower index
        let mut best_iou = 0.0;
        let mut best_gt = None;
        for (g, &v) in row.iter().enumerate() {
            if v > best_iou {
                best_iou = v;
                best_gt = Some(g);
            }
        }
        buckets[i] = if best_iou > pos_thr {
            Bucket::Pos {
                gt: best_gt.expect("positive IoU implies a gt"),
            }
        } else if best_iou < neg_thr {
            Bucket::Neg
        } else {
            Bucket::Ignored
        };
    }

    // Rescue pass: a gt with no positive takes its best-overlapping box
    // among those not already positive for another gt, provided it
    // overlaps at all. Earlier gts claim first.
    #[allow(clippy::needless_range_loop)]
    for g in 0..num_gts {
        if buckets.contains(&Bucket::Pos { gt: g }) {
            continue;
        }
        let mut best: Option<(f64, usize)> = None;
        for (i, bucket) in buckets.iter().enumerate() {
            if matches!(bucket, Bucket::Pos { .. }) {
                continue;
            }
            let v = overlaps[i][g];
            if v <= 0.0 {
                continue;
            }
            let better = match best {
                None => true,
                Some((cur, _)) => v > cur,
            };
            if better {
                best = Some((v, i));
            }
        }
        if let Some((_, i)) = best {
            buckets[i] = Bucket::Pos { gt: g };
        }
    }

    let mut out = Assignment::default();
    for (i, b) in boxes.iter().enumerate() {
        match buckets[i] {
            Bucket::Pos { gt: g } => {
                let obj = &gt.objects[g];
                out.pos.push(PosSample {
                    level: b.level,
                    loc: b.loc,
                    gt_index: g,
                    label: obj.label,
                    reg: RegTarget::Deltas(encode_deltas(&b.bbox, &obj.bbox)?),
                    centerness: None,
                });
                out.pos_boxes.push(b.bbox);
            }
            Bucket::Neg => out.neg.push((b.level, b.loc)),
            Bucket::Ignored => out.ignored.push((b.level, b.loc)),
        }
    }
    Ok(out.sorted())
}
