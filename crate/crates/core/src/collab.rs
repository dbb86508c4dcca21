//! Collaborative target construction: runs the configured one-to-many
//! heads over one image, extracts positive-coordinate query seeds with
//! positional encodings, and lays out the K+1 query groups consumed by the
//! decoder (group 0 set-matching, groups 1..=K pre-bound auxiliary).

use std::f64::consts::TAU;

use crate::assigners::{assign_atss, assign_fcos, assign_max_iou, Assignment, GroundTruth, TaggedBox};
use crate::error::{Error, Result};
use crate::geometry::CenterBox;
use crate::priors::{generate_anchors, generate_points, AnchorConfig, PriorSet, PyramidSpec};

/// One auxiliary head's assignment rule and hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub enum AssignerConfig {
    /// Adaptive statistical selection over anchors.
    Atss { top_k: usize, anchor: AnchorConfig },
    /// Center-sampled points.
    Fcos { center_radius: f64 },
    /// Max-IoU banding over generated anchors (one-stage style).
    MaxIouAnchors {
        pos_iou_thr: f64,
        neg_iou_thr: f64,
        anchor: AnchorConfig,
    },
    /// Max-IoU banding over externally supplied proposals (two-stage style).
    MaxIouProposals { pos_iou_thr: f64, neg_iou_thr: f64 },
}

impl AssignerConfig {
    pub fn atss_default() -> Self {
        AssignerConfig::Atss {
            top_k: 9,
            anchor: AnchorConfig::single_scale8(),
        }
    }

    pub fn fcos_default() -> Self {
        AssignerConfig::Fcos { center_radius: 1.5 }
    }

    pub fn retinanet_default() -> Self {
        AssignerConfig::MaxIouAnchors {
            pos_iou_thr: 0.5,
            neg_iou_thr: 0.4,
            anchor: AnchorConfig::octave_triplet(),
        }
    }

    pub fn faster_rcnn_default() -> Self {
        AssignerConfig::MaxIouProposals {
            pos_iou_thr: 0.5,
            neg_iou_thr: 0.5,
        }
    }
}

/// The K auxiliary heads plus pyramid depth.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadConfig {
    pub assigners: Vec<AssignerConfig>,
    pub levels: u32,
}

impl HeadConfig {
    /// The default K = 2 pairing: adaptive anchor selection plus
    /// proposal-based max-IoU.
    pub fn default_dual(levels: u32) -> Self {
        Self {
            assigners: vec![
                AssignerConfig::atss_default(),
                AssignerConfig::faster_rcnn_default(),
            ],
            levels,
        }
    }

    pub fn k(&self) -> usize {
        self.assigners.len()
    }
}

/// Priors one head consumes for one image.
#[derive(Debug, Clone, PartialEq)]
pub enum HeadPriors {
    Grid(PriorSet),
    Proposals(Vec<TaggedBox>),
}

/// Generates grid priors for a head, or None when the head consumes
/// per-image proposals instead.
pub fn grid_priors_for(config: &AssignerConfig, spec: &PyramidSpec) -> Result<Option<PriorSet>> {
    match config {
        AssignerConfig::Atss { anchor, .. } | AssignerConfig::MaxIouAnchors { anchor, .. } => {
            Ok(Some(generate_anchors(spec, anchor)?))
        }
        AssignerConfig::Fcos { .. } => Ok(Some(generate_points(spec))),
        AssignerConfig::MaxIouProposals { .. } => Ok(None),
    }
}

/// Dispatches one head's assigner over one image.
pub fn build_head_targets(
    config: &AssignerConfig,
    priors: &HeadPriors,
    gt: &GroundTruth,
) -> Result<Assignment> {
    match (config, priors) {
        (AssignerConfig::Atss { top_k, .. }, HeadPriors::Grid(set)) => {
            assign_atss(set, gt, *top_k)
        }
        (AssignerConfig::Fcos { center_radius }, HeadPriors::Grid(set)) => {
            assign_fcos(set, gt, *center_radius)
        }
        (
            AssignerConfig::MaxIouAnchors {
                pos_iou_thr,
                neg_iou_thr,
                ..
            },
            HeadPriors::Grid(set),
        ) => {
            let boxes: Vec<TaggedBox> = set
                .levels
                .iter()
                .flat_map(|lv| {
                    lv.entries.iter().map(move |e| match e.geom {
                        crate::priors::PriorGeom::Anchor(b) => Ok(TaggedBox {
                            level: lv.level,
                            loc: e.loc,
                            bbox: b,
                        }),
                        crate::priors::PriorGeom::Point { .. } => Err(Error::InvalidConfig(
                            "max-IoU banding over anchors needs anchor priors".into(),
                        )),
                    })
                })
                .collect::<Result<_>>()?;
            assign_max_iou(&boxes, gt, *pos_iou_thr, *neg_iou_thr)
        }
        (
            AssignerConfig::MaxIouProposals {
                pos_iou_thr,
                neg_iou_thr,
            },
            HeadPriors::Proposals(boxes),
        ) => assign_max_iou(boxes, gt, *pos_iou_thr, *neg_iou_thr),
        _ => Err(Error::InvalidConfig(
            "assigner kind does not match the supplied priors".into(),
        )),
    }
}

/// Sine/cosine positional encoding of a normalized (cx, cy, w, h) box.
///
/// Each coordinate gets dims/4 channels: interleaved sin/cos pairs at
/// frequencies temperature^(-2t / (dims/4)), with the coordinate pre-scaled
/// by 2*pi. `dims` must be divisible by 8.
pub fn sinusoidal_pe(bbox: &CenterBox, dims: usize, temperature: f64) -> Result<Vec<f64>> {
    if dims == 0 || !dims.is_multiple_of(8) {
        return Err(Error::InvalidConfig(format!(
            "encoding width must be a positive multiple of 8, got {dims}"
        )));
    }
    if temperature.is_nan() || temperature <= 0.0 {
        return Err(Error::InvalidConfig(
            "encoding temperature must be positive".into(),
        ));
    }
    let per_coord = dims / 4;
    let pairs = per_coord / 2;
    let mut out = Vec::with_capacity(dims);
    for value in [bbox.cx, bbox.cy, bbox.w, bbox.h] {
        let scaled = value * TAU;
        for t in 0..pairs {
            let freq = temperature.powf(-((2 * t) as f64) / per_coord as f64);
            out.push((scaled * freq).sin());
            out.push((scaled * freq).cos());
        }
    }
    Ok(out)
}

/// A customized positive query seed: which head and ground truth it binds,
/// the normalized positive coordinate, the encoder gather index, and the
/// positional encoding. Feature gathering and the learned projections are
/// the trainer's job; everything deterministic is here.
#[derive(Debug, Clone, PartialEq)]
pub struct QuerySeed {
    pub head: usize,
    pub gt_index: usize,
    pub bbox: CenterBox,
    pub level: u32,
    pub loc: usize,
    pub encoding: Vec<f64>,
}

/// One seed per positive sample. Positive boxes are clipped to the image
/// and normalized to the unit square before encoding.
pub fn extract_query_seeds(
    assignment: &Assignment,
    head: usize,
    image_w: f64,
    image_h: f64,
    pe_dims: usize,
    temperature: f64,
) -> Result<Vec<QuerySeed>> {
    if !(image_w > 0.0 && image_h > 0.0) {
        return Err(Error::InvalidInput(
            "seed extraction needs positive image dims".into(),
        ));
    }
    assignment
        .pos
        .iter()
        .zip(&assignment.pos_boxes)
        .map(|(p, b)| {
            let clipped = b.clamp_to(image_w, image_h);
            let normalized = CenterBox {
                cx: (clipped.x1 + clipped.x2) / 2.0 / image_w,
                cy: (clipped.y1 + clipped.y2) / 2.0 / image_h,
                w: clipped.width() / image_w,
                h: clipped.height() / image_h,
            };
            Ok(QuerySeed {
                head,
                gt_index: p.gt_index,
                bbox: normalized,
                level: p.level,
                loc: p.loc,
                encoding: sinusoidal_pe(&normalized, pe_dims, temperature)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupRole {
    SetMatching,
    Auxiliary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryGroup {
    pub id: usize,
    pub count: usize,
    pub role: GroupRole,
    /// Ground-truth index each query is pre-bound to; None for the
    /// set-matching group, whose queries are bound by Hungarian matching.
    pub gt_binding: Option<Vec<usize>>,
}

/// The K+1 query groups: group 0 holds the learnable set-matching queries,
/// group i the i-th head's positives, each pre-bound to its ground truth
/// so no matching ever runs for them.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryGroupLayout {
    pub groups: Vec<QueryGroup>,
}

impl QueryGroupLayout {
    pub fn total_queries(&self) -> usize {
        self.groups.iter().map(|g| g.count).sum()
    }
}

pub fn layout_query_groups(
    n_learnable: usize,
    assignments: &[Assignment],
) -> Result<QueryGroupLayout> {
    if n_learnable == 0 {
        return Err(Error::InvalidConfig(
            "at least one learnable query is required".into(),
        ));
    }
    let mut groups = Vec::with_capacity(assignments.len() + 1);
    groups.push(QueryGroup {
        id: 0,
        count: n_learnable,
        role: GroupRole::SetMatching,
        gt_binding: None,
    });
    for (i, a) in assignments.iter().enumerate() {
        groups.push(QueryGroup {
            id: i + 1,
            count: a.num_pos(),
            role: GroupRole::Auxiliary,
            gt_binding: Some(a.pos.iter().map(|p| p.gt_index).collect()),
        });
    }
    Ok(QueryGroupLayout { groups })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assigners::GtObject;
    use crate::geometry::BBox;

    fn worked_scene() -> (PyramidSpec, GroundTruth) {
        let spec = PyramidSpec::build(16, 16, 1).unwrap();
        let gt = GroundTruth::new(
            vec![GtObject {
                label: 0,
                bbox: BBox::new(0.0, 0.0, 16.0, 16.0).unwrap(),
            }],
            16.0,
            16.0,
            1,
        )
        .unwrap();
        (spec, gt)
    }

    #[test]
    fn head_dispatch_worked_scene() {
        let (spec, gt) = worked_scene();
        let cfg = AssignerConfig::Atss {
            top_k: 2,
            anchor: AnchorConfig::single_scale8(),
        };
        let priors = HeadPriors::Grid(grid_priors_for(&cfg, &spec).unwrap().unwrap());
        let a = build_head_targets(&cfg, &priors, &gt).unwrap();
        assert_eq!(a.num_pos(), 2);
        assert_eq!(a.pos_boxes.len(), 2);
    }

    #[test]
    fn head_dispatch_rejects_mismatched_priors() {
        let (spec, gt) = worked_scene();
        let cfg = AssignerConfig::fcos_default();
        let anchors = grid_priors_for(&AssignerConfig::atss_default(), &spec)
            .unwrap()
            .unwrap();
        assert!(build_head_targets(&cfg, &HeadPriors::Grid(anchors), &gt).is_err());
        assert!(build_head_targets(&cfg, &HeadPriors::Proposals(vec![]), &gt).is_err());
    }

    #[test]
    fn heads_assign_independently() {
        // two heads over one scene may overlap in (level, location);
        // isolation is by group, not by coordinate
        let (spec, gt) = worked_scene();
        let cfg = HeadConfig::default_dual(1);
        assert_eq!(cfg.k(), 2);
        let atss_priors = HeadPriors::Grid(grid_priors_for(&cfg.assigners[0], &spec).unwrap().unwrap());
        let a0 = build_head_targets(&cfg.assigners[0], &atss_priors, &gt).unwrap();
        let proposals = vec![TaggedBox {
            level: 1,
            loc: 0,
            bbox: BBox::new(0.0, 0.0, 16.0, 15.0).unwrap(),
        }];
        let a1 =
            build_head_targets(&cfg.assigners[1], &HeadPriors::Proposals(proposals), &gt).unwrap();
        assert!(a0.num_pos() > 0 && a1.num_pos() > 0);
    }

    #[test]
    fn pe_shape_and_first_terms() {
        let b = CenterBox { cx: 0.0, cy: 0.3, w: 0.2, h: 0.9 };
        for dims in [8usize, 256] {
            let enc = sinusoidal_pe(&b, dims, 10_000.0).unwrap();
            assert_eq!(enc.len(), dims);
            assert!(enc.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
        // cx = 0 makes the very first sine term zero
        let enc = sinusoidal_pe(&b, 8, 10_000.0).unwrap();
        assert_eq!(enc[0], 0.0);
        assert_eq!(enc[1], 1.0);

        // direct recomputation of the unit-frequency sine for cx = 0.5
        let b = CenterBox { cx: 0.5, cy: 0.0, w: 0.0, h: 0.0 };
        let enc = sinusoidal_pe(&b, 8, 10_000.0).unwrap();
        assert_eq!(enc[0], (0.5 * TAU).sin());

        assert!(sinusoidal_pe(&b, 12, 10_000.0).is_err());
        assert!(sinusoidal_pe(&b, 0, 10_000.0).is_err());
        assert!(sinusoidal_pe(&b, 8, 0.0).is_err());
    }

    #[test]
    fn seeds_from_worked_scene() {
        let (spec, gt) = worked_scene();
        let cfg = AssignerConfig::Atss {
            top_k: 2,
            anchor: AnchorConfig::single_scale8(),
        };
        let priors = HeadPriors::Grid(grid_priors_for(&cfg, &spec).unwrap().unwrap());
        let a = build_head_targets(&cfg, &priors, &gt).unwrap();
        let seeds = extract_query_seeds(&a, 0, 16.0, 16.0, 8, 10_000.0).unwrap();
        assert_eq!(seeds.len(), 2);
        // both 64x64 anchors clip to the full image: normalized unit box
        for s in &seeds {
            assert_eq!(s.bbox, CenterBox { cx: 0.5, cy: 0.5, w: 1.0, h: 1.0 });
            assert_eq!(s.encoding.len(), 8);
            assert_eq!(s.gt_index, 0);
        }
        assert_eq!(seeds[0].loc, 0);
        assert_eq!(seeds[1].loc, 1);

        // determinism: identical inputs give bitwise-identical encodings
        let again = extract_query_seeds(&a, 0, 16.0, 16.0, 8, 10_000.0).unwrap();
        assert_eq!(seeds, again);

        let empty = extract_query_seeds(&Assignment::default(), 0, 16.0, 16.0, 8, 10_000.0).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn seed_boxes_stay_in_unit_square() {
        let spec = PyramidSpec::build(48, 96, 2).unwrap();
        let gt = GroundTruth::new(
            vec![
                GtObject { label: 0, bbox: BBox::new(1.0, 1.0, 40.0, 40.0).unwrap() },
                GtObject { label: 0, bbox: BBox::new(50.0, 4.0, 90.0, 44.0).unwrap() },
            ],
            96.0,
            48.0,
            1,
        )
        .unwrap();
        let cfg = AssignerConfig::atss_default();
        let priors = HeadPriors::Grid(grid_priors_for(&cfg, &spec).unwrap().unwrap());
        let a = build_head_targets(&cfg, &priors, &gt).unwrap();
        assert!(a.num_pos() > 0);
        let seeds = extract_query_seeds(&a, 0, 96.0, 48.0, 16, 10_000.0).unwrap();
        for s in &seeds {
            let c = s.bbox.to_corner();
            for v in [c.x1, c.y1, c.x2, c.y2] {
                assert!((-1e-12..=1.0 + 1e-12).contains(&v), "{c:?}");
            }
            assert!(s.encoding.iter().all(|e| (-1.0..=1.0).contains(e)));
        }
    }

    #[test]
    fn group_layout_contract() {
        let layout = layout_query_groups(300, &[]).unwrap();
        assert_eq!(layout.groups.len(), 1);
        assert_eq!(layout.groups[0].count, 300);
        assert_eq!(layout.groups[0].role, GroupRole::SetMatching);

        let mut a1 = Assignment::default();
        for i in 0..12 {
            a1.pos.push(crate::assigners::PosSample {
                level: 1,
                loc: i,
                gt_index: i % 3,
                label: 0,
                reg: crate::assigners::RegTarget::Deltas(crate::geometry::DeltaTarget {
                    dx: 0.0,
                    dy: 0.0,
                    dw: 0.0,
                    dh: 0.0,
                }),
                centerness: None,
            });
            a1.pos_boxes.push(BBox::new(0.0, 0.0, 1.0, 1.0).unwrap());
        }
        let mut a2 = Assignment::default();
        for i in 0..31 {
            a2.pos.push(a1.pos[i % 12].clone());
            a2.pos_boxes.push(a1.pos_boxes[i % 12]);
        }
        let layout = layout_query_groups(300, &[a1, a2]).unwrap();
        let counts: Vec<usize> = layout.groups.iter().map(|g| g.count).collect();
        assert_eq!(counts, vec![300, 12, 31]);
        assert_eq!(layout.total_queries(), 343);
        for g in &layout.groups[1..] {
            assert_eq!(g.role, GroupRole::Auxiliary);
            assert_eq!(g.gt_binding.as_ref().unwrap().len(), g.count);
        }

        assert!(layout_query_groups(0, &[]).is_err());
    }
}
