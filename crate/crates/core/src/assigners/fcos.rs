//! Center-sampled point assignment: a point is positive when it falls
//! strictly inside the center region of a ground truth (center +/-
//! radius * stride, intersected with the box) and its largest side
//! distance fits the level's regression range. Ambiguous points go to the
//! smallest-area ground truth.

use crate::error::{Error, Result};
use crate::geometry::{encode_ltrb, BBox};
use crate::priors::{PriorGeom, PriorKind, PriorSet};

use super::{Assignment, GroundTruth, PosSample, RegTarget};

/// Regression range (lo, hi] for a level: 64 * 2^(j-1) caps each level
/// except the coarsest, which is unbounded.
fn regress_range(level: u32, max_level: u32) -> (f64, f64) {
    let hi = if level == max_level {
        f64::INFINITY
    } else {
        64.0 * 2f64.powi(level as i32 - 1)
    };
    let lo = if level == 1 {
        0.0
    } else {
        64.0 * 2f64.powi(level as i32 - 2)
    };
    (lo, hi)
}

/// Side length of the synthetic positive-coordinate box at level j.
pub fn fcos_pos_box_side(level: u32) -> f64 {
    8.0 * 2f64.powi(level as i32 + 2)
}

pub fn assign_fcos(priors: &PriorSet, gt: &GroundTruth, center_radius: f64) -> Result<Assignment> {
    if priors.kind != PriorKind::Point {
        return Err(Error::InvalidInput(
            "center sampling requires point priors".into(),
        ));
    }
    if center_radius.is_nan() || center_radius <= 0.0 {
        return Err(Error::InvalidConfig(
            "center radius must be positive".into(),
        ));
    }

    let max_level = priors.levels.iter().map(|l| l.level).max().unwrap_or(1);
    let mut out = Assignment::default();

    for lv in &priors.levels {
        let stride = lv.stride as f64;
        let (range_lo, range_hi) = regress_range(lv.level, max_level);
        for entry in &lv.entries {
            let PriorGeom::Point { x, y } = entry.geom else {
                unreachable!("kind checked above");
            };

            // smallest-area claim among qualifying ground truths
            let mut best: Option<(f64, usize)> = None;
            for (gt_idx, obj) in gt.objects.iter().enumerate() {
                let b = &obj.bbox;
                if !b.contains_strict(x, y) {
                    continue;
                }
                let (cx, cy) = b.center();
                let rx1 = (cx - center_radius * stride).max(b.x1);
                let rx2 = (cx + center_radius * stride).min(b.x2);
                let ry1 = (cy - center_radius * stride).max(b.y1);
                let ry2 = (cy + center_radius * stride).min(b.y2);
                if !(x > rx1 && x < rx2 && y > ry1 && y < ry2) {
                    continue;
                }
                let max_side = (x - b.x1).max(y - b.y1).max(b.x2 - x).max(b.y2 - y);
                if !(max_side > range_lo && max_side <= range_hi) {
                    continue;
                }
                let area = b.area();
                let better = match best {
                    None => true,
                    Some((best_area, _)) => area < best_area,
                };
                if better {
                    best = Some((area, gt_idx));
                }
            }

            match best {
                Some((_, gt_idx)) => {
                    let obj = &gt.objects[gt_idx];
                    let ltrb = encode_ltrb(x, y, &obj.bbox)?;
                    let side = fcos_pos_box_side(lv.level);
                    out.pos.push(PosSample {
                        level: lv.level,
                        loc: entry.loc,
                        gt_index: gt_idx,
                        label: obj.label,
                        reg: RegTarget::Ltrb(ltrb),
                        centerness: Some(ltrb.centerness),
                    });
                    out.pos_boxes.push(BBox {
                        x1: x - side / 2.0,
                        y1: y - side / 2.0,
                        x2: x + side / 2.0,
                        y2: y + side / 2.0,
                    });
                }
                None => out.neg.push((lv.level, entry.loc)),
            }
        }
    }
    Ok(out.sorted())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assigners::GtObject;
    use crate::priors::{generate_points, PyramidSpec};

    fn gt_one(bbox: BBox, w: f64, h: f64) -> GroundTruth {
        GroundTruth::new(vec![GtObject { label: 0, bbox }], w, h, 1).unwrap()
    }

    #[test]
    fn center_region_covers_whole_gt() {
        // gt [0,0,16,16] at stride 8 with radius 1.5: region is the full
        // box, so all four grid points are positive
        let spec = PyramidSpec::build(16, 16, 1).unwrap();
        let points = generate_points(&spec);
        let gt = gt_one(BBox::new(0.0, 0.0, 16.0, 16.0).unwrap(), 16.0, 16.0);
        let a = assign_fcos(&points, &gt, 1.5).unwrap();
        assert_eq!(a.num_pos(), 4);
        let centers: Vec<(f64, f64)> = a.pos_boxes.iter().map(|b| b.center()).collect();
        assert!(centers.contains(&(4.0, 4.0)));
        assert!(centers.contains(&(12.0, 12.0)));
        // side 8 * 2^(2+1) = 64 at level 1
        for b in &a.pos_boxes {
            assert_eq!((b.width(), b.height()), (64.0, 64.0));
        }
        a.validate(1).unwrap();
    }

    #[test]
    fn boundary_point_is_negative() {
        // the point (4,4) lies exactly on the gt corner: strict interior fails
        let spec = PyramidSpec::build(16, 16, 1).unwrap();
        let points = generate_points(&spec);
        let gt = gt_one(BBox::new(4.0, 4.0, 16.0, 16.0).unwrap(), 16.0, 16.0);
        let a = assign_fcos(&points, &gt, 5.0).unwrap();
        assert!(a.pos.iter().all(|p| p.loc != 0));
        assert!(a.neg.contains(&(1, 0)));
    }

    #[test]
    fn empty_gt_all_negative() {
        let spec = PyramidSpec::build(32, 32, 2).unwrap();
        let points = generate_points(&spec);
        let gt = GroundTruth::new(vec![], 32.0, 32.0, 1).unwrap();
        let a = assign_fcos(&points, &gt, 1.5).unwrap();
        assert!(a.pos.is_empty());
        assert_eq!(a.neg.len(), points.total_count());
    }

    #[test]
    fn ambiguity_resolves_to_smaller_gt() {
        let spec = PyramidSpec::build(16, 16, 1).unwrap();
        let points = generate_points(&spec);
        let big = GtObject {
            label: 0,
            bbox: BBox::new(0.0, 0.0, 16.0, 16.0).unwrap(),
        };
        let small = GtObject {
            label: 1,
            bbox: BBox::new(1.0, 1.0, 7.0, 7.0).unwrap(),
        };
        let gt = GroundTruth::new(vec![big, small], 16.0, 16.0, 2).unwrap();
        let a = assign_fcos(&points, &gt, 5.0).unwrap();
        // the point (4,4) sits inside both; the smaller gt wins
        let p = a.pos.iter().find(|p| p.loc == 0).unwrap();
        assert_eq!(p.gt_index, 1);
        assert_eq!(p.label, 1);
    }

    #[test]
    fn regress_ranges_split_levels() {
        assert_eq!(regress_range(1, 4), (0.0, 64.0));
        assert_eq!(regress_range(2, 4), (64.0, 128.0));
        assert_eq!(regress_range(3, 4), (128.0, 256.0));
        assert_eq!(regress_range(4, 4), (256.0, f64::INFINITY));
        assert_eq!(regress_range(1, 1), (0.0, f64::INFINITY));
    }

    #[test]
    fn ltrb_targets_reconstruct_box_sides() {
        let spec = PyramidSpec::build(16, 16, 1).unwrap();
        let points = generate_points(&spec);
        let gt_box = BBox::new(0.0, 0.0, 16.0, 16.0).unwrap();
        let gt = gt_one(gt_box, 16.0, 16.0);
        let a = assign_fcos(&points, &gt, 1.5).unwrap();
        for p in &a.pos {
            let RegTarget::Ltrb(t) = p.reg else { panic!("expected ltrb") };
            assert!(t.l > 0.0 && t.t > 0.0 && t.r > 0.0 && t.b > 0.0);
            assert!((t.l + t.r - gt_box.width()).abs() < 1e-12);
            assert!((t.t + t.b - gt_box.height()).abs() < 1e-12);
        }
    }
}
