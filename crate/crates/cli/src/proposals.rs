//! Proposal handling: level tagging for externally supplied boxes and a
//! seeded synthetic generator used when a proposal-based head runs on a
//! scene without proposals. Generation is keyed on (run seed, image id),
//! so per-image outputs stay independent of the rest of the corpus.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use codetr_core::assigners::{GroundTruth, TaggedBox};
use codetr_core::geometry::BBox;

/// Maps a box to the pyramid level whose stride fits its scale, the usual
/// sqrt-area rule with a 56-pixel base.
pub fn level_for_box(bbox: &BBox, num_levels: u32) -> u32 {
    let scale = bbox.area().max(0.0).sqrt();
    let level = 1.0 + (scale / 56.0 + 1e-6).log2().floor();
    (level as i64).clamp(1, num_levels as i64) as u32
}

pub fn tag_proposals(boxes: &[BBox], num_levels: u32) -> Vec<TaggedBox> {
    boxes
        .iter()
        .enumerate()
        .map(|(i, b)| TaggedBox {
            level: level_for_box(b, num_levels),
            loc: i,
            bbox: *b,
        })
        .collect()
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Jittered copies of each ground-truth box, topped up with uniform boxes,
/// `count` in total.
pub fn synthesize_proposals(
    gt: &GroundTruth,
    image_id: u64,
    seed: u64,
    count: usize,
    num_levels: u32,
) -> Vec<TaggedBox> {
    let mut rng = StdRng::seed_from_u64(splitmix64(seed ^ splitmix64(image_id)));
    let (iw, ih) = (gt.image_w, gt.image_h);
    let mut boxes: Vec<BBox> = Vec::with_capacity(count);

    if !gt.objects.is_empty() {
        let per_gt = (count / 2 / gt.objects.len()).max(1);
        for obj in &gt.objects {
            let b = obj.bbox;
            let (w, h) = (b.width().max(1.0), b.height().max(1.0));
            let (cx, cy) = b.center();
            for _ in 0..per_gt {
                if boxes.len() >= count {
                    break;
                }
                let ncx = cx + rng.random_range(-0.15..0.15) * w;
                let ncy = cy + rng.random_range(-0.15..0.15) * h;
                let nw = w * rng.random_range(-0.25..0.25f64).exp();
                let nh = h * rng.random_range(-0.25..0.25f64).exp();
                let jittered = BBox {
                    x1: ncx - nw / 2.0,
                    y1: ncy - nh / 2.0,
                    x2: ncx + nw / 2.0,
                    y2: ncy + nh / 2.0,
                }
                .clamp_to(iw, ih);
                boxes.push(jittered);
            }
        }
    }

    while boxes.len() < count {
        let w = rng.random_range(iw * 0.05..iw * 0.6);
        let h = rng.random_range(ih * 0.05..ih * 0.6);
        let x = rng.random_range(0.0..(iw - w).max(f64::MIN_POSITIVE));
        let y = rng.random_range(0.0..(ih - h).max(f64::MIN_POSITIVE));
        boxes.push(BBox { x1: x, y1: y, x2: x + w, y2: y + h });
    }

    tag_proposals(&boxes, num_levels)
}
