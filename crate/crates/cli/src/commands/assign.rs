//! `assign`: run every configured head over every image and report the
//! full positive lists, counts, and positive coordinate sets.

use rayon::prelude::*;
use serde::Serialize;

use super::{box_arrays, pos_entries, run_heads, write_json, Ctx, PosEntryOut};
use crate::error::CliResult;

#[derive(Serialize)]
struct AssignReport {
    images: Vec<ImageAssignments>,
}

#[derive(Serialize)]
struct ImageAssignments {
    id: u64,
    heads: Vec<HeadAssignment>,
}

#[derive(Serialize)]
struct HeadAssignment {
    head: usize,
    kind: &'static str,
    num_pos: usize,
    num_neg: usize,
    num_ignored: usize,
    pos: Vec<PosEntryOut>,
    pos_boxes: Vec<[f64; 4]>,
}

pub fn run(ctx: &Ctx<'_>) -> CliResult<()> {
    let images = ctx
        .scene
        .images
        .par_iter()
        .map(|image| {
            let gt = image.ground_truth(ctx.config.num_classes)?;
            let assignments = run_heads(ctx.config, image, &gt, ctx.seed)?;
            let heads = assignments
                .iter()
                .enumerate()
                .map(|(i, a)| HeadAssignment {
                    head: i,
                    kind: ctx.config.heads[i].kind_name(),
                    num_pos: a.num_pos(),
                    num_neg: a.neg.len(),
                    num_ignored: a.ignored.len(),
                    pos: pos_entries(a),
                    pos_boxes: box_arrays(&a.pos_boxes),
                })
                .collect();
            Ok(ImageAssignments { id: image.id, heads })
        })
        .collect::<CliResult<Vec<_>>>()?;

    let report = AssignReport { images };
    write_json(&ctx.out_path("assignments.json"), &report)?;
    log::info!("assign: wrote {} image records", report.images.len());
    Ok(())
}
