//! `diagnose`: discriminability score maps from supplied feature norms,
//! the mean foreground/background activation curve over the corpus, and
//! optionally the matching-instability series from per-epoch matchings.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use codetr_core::diagnostics::{
    default_thresholds, discriminability_map, iof_iob_curve, matching_instability, CurvePoint,
    EpochMatching, ForegroundMask,
};
use codetr_core::priors::{PyramidSpec, ScalarMap};

use super::{write_json, write_text, Ctx};
use crate::error::{io_context, CliError, CliResult};
use crate::scene::SceneImage;

#[derive(Serialize)]
struct ScoreMapsReport {
    images: Vec<ImageScoreMap>,
}

#[derive(Serialize)]
struct ImageScoreMap {
    id: u64,
    height: usize,
    width: usize,
    values: Vec<f64>,
}

/// Per-epoch matchings file: for every image, the query matched to each
/// ground truth (null = unmatched). Image lists must agree across epochs.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchingsFile {
    pub epochs: Vec<MatchingsEpoch>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchingsEpoch {
    pub images: Vec<MatchingsImage>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchingsImage {
    pub id: u64,
    pub matched_query: Vec<Option<usize>>,
}

fn level_maps(image: &SceneImage, spec: &PyramidSpec) -> CliResult<Vec<ScalarMap>> {
    let Some(norms) = &image.feature_norms else {
        return Err(CliError::Validation(format!(
            "image {}: feature_norms are required for curve diagnostics",
            image.id
        )));
    };
    let mut maps = Vec::with_capacity(spec.levels.len());
    for lv in &spec.levels {
        let m = norms.iter().find(|m| m.level == lv.index).ok_or_else(|| {
            CliError::Validation(format!(
                "image {}: feature_norms missing level {}",
                image.id, lv.index
            ))
        })?;
        if m.height != lv.height || m.width != lv.width {
            return Err(CliError::Validation(format!(
                "image {}: feature_norms level {} is {}x{}, pyramid expects {}x{}",
                image.id, lv.index, m.height, m.width, lv.height, lv.width
            )));
        }
        maps.push(
            ScalarMap::new(m.level, m.height, m.width, m.values.clone())
                .map_err(|e| CliError::Validation(format!("image {}: {e}", image.id)))?,
        );
    }
    Ok(maps)
}

fn format_float(v: f64) -> String {
    let mut s = format!("{v}");
    if !s.contains('.') && !s.contains('e') && !s.contains("inf") && !s.contains("NaN") {
        s.push_str(".0");
    }
    s
}

pub fn run(ctx: &Ctx<'_>, matchings: Option<&Path>) -> CliResult<()> {
    if ctx.scene.images.is_empty() {
        return Err(CliError::Validation("scene holds no images".into()));
    }
    let thresholds = default_thresholds(ctx.config.threshold_count);

    let per_image: Vec<(ImageScoreMap, Vec<CurvePoint>)> = ctx
        .scene
        .images
        .par_iter()
        .map(|image| {
            let spec = PyramidSpec::build(image.height, image.width, ctx.config.pyramid_levels)
                .map_err(|e| CliError::Validation(format!("image {}: {e}", image.id)))?;
            let maps = level_maps(image, &spec)?;
            let gt = image.ground_truth(ctx.config.num_classes)?;
            let (h, w) = (image.height as usize, image.width as usize);
            let scores = discriminability_map(&maps, h, w)
                .map_err(|e| CliError::Validation(format!("image {}: {e}", image.id)))?;
            let fg = ForegroundMask::from_ground_truth(&gt, h, w);
            let curve = iof_iob_curve(&scores, &fg, &thresholds)
                .map_err(|e| CliError::Validation(format!("image {}: {e}", image.id)))?;
            Ok((
                ImageScoreMap {
                    id: image.id,
                    height: scores.height,
                    width: scores.width,
                    values: scores.values,
                },
                curve,
            ))
        })
        .collect::<CliResult<Vec<_>>>()?;

    // mean curve over images, folded in input order
    let n = per_image.len() as f64;
    let mut csv = String::from("S,iof,iob\n");
    for (t, &s) in thresholds.iter().enumerate() {
        let (mut iof, mut iob) = (0.0, 0.0);
        for (_, curve) in &per_image {
            iof += curve[t].iof;
            iob += curve[t].iob;
        }
        let _ = writeln!(
            csv,
            "{},{},{}",
            format_float(s),
            format_float(iof / n),
            format_float(iob / n)
        );
    }
    write_text(&ctx.out_path("curves.csv"), &csv)?;

    let report = ScoreMapsReport {
        images: per_image.into_iter().map(|(m, _)| m).collect(),
    };
    write_json(&ctx.out_path("score_maps.json"), &report)?;

    if let Some(path) = matchings {
        let series = instability_from_file(path)?;
        let mut csv = String::from("epoch_pair,IS\n");
        for (i, v) in series.per_pair.iter().enumerate() {
            let _ = writeln!(csv, "{}-{},{}", i, i + 1, format_float(*v));
        }
        write_text(&ctx.out_path("instability.csv"), &csv)?;
        log::info!("diagnose: mean instability {}", series.mean);
    }

    log::info!("diagnose: wrote curves for {} images", report.images.len());
    Ok(())
}

fn instability_from_file(path: &Path) -> CliResult<codetr_core::diagnostics::InstabilitySeries> {
    let text = std::fs::read_to_string(path).map_err(|e| io_context("reading", path, e))?;
    let file: MatchingsFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    if file.epochs.len() < 2 {
        return Err(CliError::Validation(
            "matchings file needs at least two epochs".into(),
        ));
    }
    let reference: Vec<u64> = file.epochs[0].images.iter().map(|i| i.id).collect();
    for (e, epoch) in file.epochs.iter().enumerate().skip(1) {
        let ids: Vec<u64> = epoch.images.iter().map(|i| i.id).collect();
        if ids != reference {
            return Err(CliError::Validation(format!(
                "matchings epoch {e} lists different image ids than epoch 0"
            )));
        }
    }
    let epochs: Vec<EpochMatching> = file
        .epochs
        .iter()
        .map(|e| EpochMatching {
            images: e.images.iter().map(|i| i.matched_query.clone()).collect(),
        })
        .collect();
    matching_instability(&epochs).map_err(|e| CliError::Validation(e.to_string()))
}
