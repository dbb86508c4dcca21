//! One-to-many label assignment: adaptive statistical anchor selection,
//! center-sampled points, and max-IoU threshold banding over anchors or
//! proposals. Each assigner maps priors plus ground truth to disjoint
//! positive / negative / ignored location sets with regression targets.

mod atss;
mod fcos;
mod max_iou;

pub use atss::assign_atss;
pub use fcos::assign_fcos;
pub use max_iou::{assign_max_iou, TaggedBox};

use crate::error::{Error, Result};
use crate::geometry::{BBox, DeltaTarget, LtrbTarget};

/// One annotated object.
#[derive(Debug, Clone, PartialEq)]
pub struct GtObject {
    pub label: usize,
    pub bbox: BBox,
}

/// Ground truth for one image. Boxes are clipped to the image on
/// construction; labels must fall in [0, num_classes).
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub objects: Vec<GtObject>,
    pub image_w: f64,
    pub image_h: f64,
    pub num_classes: usize,
}

impl GroundTruth {
    pub fn new(
        objects: Vec<GtObject>,
        image_w: f64,
        image_h: f64,
        num_classes: usize,
    ) -> Result<Self> {
        if !(image_w > 0.0 && image_h > 0.0) || num_classes == 0 {
            return Err(Error::InvalidInput(
                "ground truth needs positive image dims and at least one class".into(),
            ));
        }
        let objects = objects
            .into_iter()
            .map(|o| {
                if o.label >= num_classes {
                    return Err(Error::InvalidInput(format!(
                        "label {} outside category range 0..{num_classes}",
                        o.label
                    )));
                }
                Ok(GtObject {
                    label: o.label,
                    bbox: o.bbox.clamp_to(image_w, image_h),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            objects,
            image_w,
            image_h,
            num_classes,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }
}

/// Regression target attached to a positive sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegTarget {
    Deltas(DeltaTarget),
    Ltrb(LtrbTarget),
}

/// A positive (level, location) with its supervision.
#[derive(Debug, Clone, PartialEq)]
pub struct PosSample {
    pub level: u32,
    pub loc: usize,
    pub gt_index: usize,
    pub label: usize,
    pub reg: RegTarget,
    pub centerness: Option<f64>,
}

/// Output of an assigner: positives with targets, background-only
/// negatives, an optional ignored band, and the positive coordinate set
/// feeding customized query generation. `pos_boxes[i]` belongs to `pos[i]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Assignment {
    pub pos: Vec<PosSample>,
    pub neg: Vec<(u32, usize)>,
    pub ignored: Vec<(u32, usize)>,
    pub pos_boxes: Vec<BBox>,
}

impl Assignment {
    pub fn num_pos(&self) -> usize {
        self.pos.len()
    }

    /// Checks the structural contract: pos/neg/ignored pairwise disjoint
    /// over (level, location), one box per positive, valid gt indices.
    pub fn validate(&self, num_gts: usize) -> Result<()> {
        if self.pos.len() != self.pos_boxes.len() {
            return Err(Error::InvalidInput(format!(
                "{} positives but {} positive boxes",
                self.pos.len(),
                self.pos_boxes.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        let keys = self
            .pos
            .iter()
            .map(|p| (p.level, p.loc))
            .chain(self.neg.iter().copied())
            .chain(self.ignored.iter().copied());
        for key in keys {
            if !seen.insert(key) {
                return Err(Error::InvalidInput(format!(
                    "location {key:?} appears in more than one assignment set"
                )));
            }
        }
        for p in &self.pos {
            if p.gt_index >= num_gts {
                return Err(Error::InvalidInput(format!(
                    "positive references gt {} but only {num_gts} exist",
                    p.gt_index
                )));
            }
        }
        Ok(())
    }

    /// Sorts all three sets by (level, location) for deterministic output.
    pub(crate) fn sorted(mut self) -> Self {
        let mut order: Vec<usize> = (0..self.pos.len()).collect();
        order.sort_by_key(|&i| (self.pos[i].level, self.pos[i].loc));
        self.pos = order.iter().map(|&i| self.pos[i].clone()).collect();
        self.pos_boxes = order.iter().map(|&i| self.pos_boxes[i]).collect();
        self.neg.sort_unstable();
        self.ignored.sort_unstable();
        self
    }
}

/// Caps the negative set of an assignment by deterministic seeded
/// subsampling, for loss parity with samplers that bound the background
/// count. Positives and the ignored band are untouched; assignment stays
/// exhaustive unless this is called.
pub fn subsample_negatives(assignment: &Assignment, max_negatives: usize, seed: u64) -> Assignment {
    if assignment.neg.len() <= max_negatives {
        return assignment.clone();
    }
    // Fisher-Yates with a splitmix-driven index stream
    let mut state = seed ^ 0x9e37_79b9_7f4a_7c15;
    let mut next = move || {
        state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    };
    let mut pool = assignment.neg.clone();
    for i in (1..pool.len()).rev() {
        let j = (next() % (i as u64 + 1)) as usize;
        pool.swap(i, j);
    }
    pool.truncate(max_negatives);
    pool.sort_unstable();
    Assignment {
        pos: assignment.pos.clone(),
        neg: pool,
        ignored: assignment.ignored.clone(),
        pos_boxes: assignment.pos_boxes.clone(),
    }
}

/// Population standard deviation; zero for a single sample.
pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
    (mean, var.sqrt())
}
