//! `targets`: collaborative target construction — the K+1 query-group
//! layout, per-head query seeds with positional encodings, and loss-ready
//! positive target bundles.

use rayon::prelude::*;
use serde::Serialize;

use codetr_core::collab::{extract_query_seeds, layout_query_groups, GroupRole};
use codetr_core::losses::HeadLossKind;

use super::{pos_entries, run_heads, write_json, Ctx, PosEntryOut};
use crate::error::{CliError, CliResult};

#[derive(Serialize)]
struct TargetsReport {
    images: Vec<ImageTargets>,
}

#[derive(Serialize)]
struct ImageTargets {
    id: u64,
    groups: Vec<GroupOut>,
    heads: Vec<HeadTargets>,
}

#[derive(Serialize)]
struct GroupOut {
    id: usize,
    count: usize,
    role: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    gt_binding: Option<Vec<usize>>,
}

#[derive(Serialize)]
struct HeadTargets {
    head: usize,
    kind: &'static str,
    loss: LossSpecOut,
    seeds: Vec<SeedOut>,
    targets: Vec<PosEntryOut>,
}

/// Which loss functions the head's targets are meant for.
#[derive(Serialize)]
struct LossSpecOut {
    cls: &'static str,
    reg: &'static str,
    centerness: bool,
}

impl LossSpecOut {
    fn from_kind(kind: HeadLossKind) -> Self {
        match kind {
            HeadLossKind::Focal { centerness, .. } => {
                LossSpecOut { cls: "focal", reg: "giou", centerness }
            }
            HeadLossKind::CrossEntropy => {
                LossSpecOut { cls: "cross_entropy", reg: "giou", centerness: false }
            }
        }
    }
}

#[derive(Serialize)]
struct SeedOut {
    gt: usize,
    level: u32,
    loc: usize,
    bbox: [f64; 4],
    encoding: Vec<f64>,
}

pub fn run(ctx: &Ctx<'_>) -> CliResult<()> {
    let images = ctx
        .scene
        .images
        .par_iter()
        .map(|image| {
            let gt = image.ground_truth(ctx.config.num_classes)?;
            let assignments = run_heads(ctx.config, image, &gt, ctx.seed)?;
            let layout = layout_query_groups(ctx.config.num_queries, &assignments)
                .map_err(|e| CliError::Validation(format!("image {}: {e}", image.id)))?;
            let groups = layout
                .groups
                .iter()
                .map(|g| GroupOut {
                    id: g.id,
                    count: g.count,
                    role: match g.role {
                        GroupRole::SetMatching => "set_matching",
                        GroupRole::Auxiliary => "auxiliary",
                    },
                    gt_binding: g.gt_binding.clone(),
                })
                .collect();
            let heads = assignments
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    let seeds = extract_query_seeds(
                        a,
                        i,
                        image.width as f64,
                        image.height as f64,
                        ctx.config.pe_dims,
                        ctx.config.pe_temperature,
                    )
                    .map_err(|e| CliError::Validation(format!("image {}: {e}", image.id)))?;
                    Ok(HeadTargets {
                        head: i,
                        kind: ctx.config.heads[i].kind_name(),
                        loss: LossSpecOut::from_kind(ctx.config.heads[i].loss_kind()),
                        seeds: seeds
                            .into_iter()
                            .map(|s| SeedOut {
                                gt: s.gt_index,
                                level: s.level,
                                loc: s.loc,
                                bbox: [s.bbox.cx, s.bbox.cy, s.bbox.w, s.bbox.h],
                                encoding: s.encoding,
                            })
                            .collect(),
                        targets: pos_entries(a),
                    })
                })
                .collect::<CliResult<Vec<_>>>()?;
            Ok(ImageTargets { id: image.id, groups, heads })
        })
        .collect::<CliResult<Vec<_>>>()?;

    let report = TargetsReport { images };
    write_json(&ctx.out_path("targets.json"), &report)?;
    log::info!("targets: wrote {} image records", report.images.len());
    Ok(())
}
