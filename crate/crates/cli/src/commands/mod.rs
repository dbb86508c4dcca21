//! Subcommand implementations. Images are processed as independent work
//! items on a bounded worker pool; outputs are keyed and ordered by input
//! order regardless of completion order.

pub mod assign;
pub mod diagnose;
pub mod match_cmd;
pub mod targets;

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use codetr_core::assigners::{Assignment, GroundTruth, RegTarget};
use codetr_core::collab::{build_head_targets, grid_priors_for, HeadPriors};
use codetr_core::geometry::BBox;
use codetr_core::priors::PyramidSpec;

use crate::config::RunConfig;
use crate::error::{io_context, CliError, CliResult};
use crate::proposals::{synthesize_proposals, tag_proposals};
use crate::scene::{SceneFile, SceneImage};

pub struct Ctx<'a> {
    pub config: &'a RunConfig,
    pub scene: &'a SceneFile,
    pub out_dir: &'a Path,
    pub seed: u64,
}

impl Ctx<'_> {
    pub fn out_path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

/// Serializes compact JSON with a trailing newline; byte-identical for
/// identical values.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut bytes =
        serde_json::to_vec(value).map_err(|e| CliError::Io(format!("serializing: {e}")))?;
    bytes.push(b'\n');
    std::fs::write(path, bytes).map_err(|e| io_context("writing", path, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    let mut f = std::fs::File::create(path).map_err(|e| io_context("creating", path, e))?;
    f.write_all(text.as_bytes())
        .map_err(|e| io_context("writing", path, e))
}

/// Runs every configured head over one image, returning the assignments
/// in head order.
pub fn run_heads(
    config: &RunConfig,
    image: &SceneImage,
    gt: &GroundTruth,
    seed: u64,
) -> CliResult<Vec<Assignment>> {
    let spec = PyramidSpec::build(image.height, image.width, config.pyramid_levels)
        .map_err(|e| CliError::Validation(format!("image {}: {e}", image.id)))?;
    config
        .heads
        .iter()
        .map(|head| {
            let assigner = head.to_assigner();
            let priors = match grid_priors_for(&assigner, &spec)? {
                Some(set) => HeadPriors::Grid(set),
                None => {
                    let tagged = match &image.proposals {
                        Some(raw) => {
                            let boxes: Vec<BBox> = raw
                                .iter()
                                .map(|b| {
                                    BBox::new(b[0], b[1], b[2], b[3]).map_err(|e| {
                                        CliError::Validation(format!("image {}: {e}", image.id))
                                    })
                                })
                                .collect::<CliResult<_>>()?;
                            tag_proposals(&boxes, config.pyramid_levels)
                        }
                        None => synthesize_proposals(
                            gt,
                            image.id,
                            seed,
                            config.proposals_per_image,
                            config.pyramid_levels,
                        ),
                    };
                    HeadPriors::Proposals(tagged)
                }
            };
            build_head_targets(&assigner, &priors, gt)
                .map_err(|e| CliError::Validation(format!("image {}: {e}", image.id)))
        })
        .collect()
}

/// One positive sample as reported in JSON outputs.
#[derive(Debug, Serialize)]
pub struct PosEntryOut {
    pub level: u32,
    pub loc: usize,
    pub gt: usize,
    pub label: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deltas: Option<[f64; 4]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ltrb: Option<[f64; 4]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub centerness: Option<f64>,
}

pub fn pos_entries(assignment: &Assignment) -> Vec<PosEntryOut> {
    assignment
        .pos
        .iter()
        .map(|p| {
            let (deltas, ltrb) = match p.reg {
                RegTarget::Deltas(d) => (Some([d.dx, d.dy, d.dw, d.dh]), None),
                RegTarget::Ltrb(t) => (None, Some([t.l, t.t, t.r, t.b])),
            };
            PosEntryOut {
                level: p.level,
                loc: p.loc,
                gt: p.gt_index,
                label: p.label,
                deltas,
                ltrb,
                centerness: p.centerness,
            }
        })
        .collect()
}

pub fn box_arrays(boxes: &[BBox]) -> Vec<[f64; 4]> {
    boxes.iter().map(|b| [b.x1, b.y1, b.x2, b.y2]).collect()
}
