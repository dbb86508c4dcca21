//! `match`: one-to-one Hungarian matching of supplied query predictions
//! against ground truth, per image.

use rayon::prelude::*;
use serde::Serialize;

use codetr_core::geometry::BBox;
use codetr_core::matcher::match_one_to_one;

use super::{write_json, Ctx};
use crate::error::{CliError, CliResult};

#[derive(Serialize)]
struct MatchReport {
    images: Vec<ImageMatch>,
}

#[derive(Serialize)]
struct ImageMatch {
    id: u64,
    pairs: Vec<[usize; 2]>,
    total_cost: f64,
}

pub fn run(ctx: &Ctx<'_>) -> CliResult<()> {
    let weights = ctx.config.matcher.weights();
    let images = ctx
        .scene
        .images
        .par_iter()
        .map(|image| {
            let preds = image.query_predictions(ctx.config.num_classes)?;
            let gt = image.ground_truth(ctx.config.num_classes)?;
            if gt.objects.is_empty() || preds.is_empty() {
                return Ok(ImageMatch { id: image.id, pairs: vec![], total_cost: 0.0 });
            }
            let gts: Vec<(usize, BBox)> = gt
                .objects
                .iter()
                .map(|o| {
                    let b = &o.bbox;
                    (
                        o.label,
                        BBox {
                            x1: b.x1 / gt.image_w,
                            y1: b.y1 / gt.image_h,
                            x2: b.x2 / gt.image_w,
                            y2: b.y2 / gt.image_h,
                        },
                    )
                })
                .collect();
            let result = match_one_to_one(&preds, &gts, &weights)
                .map_err(|e| CliError::Validation(format!("image {}: {e}", image.id)))?;
            Ok(ImageMatch {
                id: image.id,
                pairs: result.pairs.iter().map(|&(q, g)| [q, g]).collect(),
                total_cost: result.total_cost,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;

    let report = MatchReport { images };
    write_json(&ctx.out_path("matches.json"), &report)?;
    log::info!("match: wrote {} image records", report.images.len());
    Ok(())
}
