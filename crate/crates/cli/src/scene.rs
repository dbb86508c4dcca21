//! Scene file schema and validated loading.
//!
//! A scene file is UTF-8 JSON holding a list of images with annotated
//! objects and optional proposals, query predictions, and per-level
//! feature-norm grids.

use std::path::Path;

use serde::{Deserialize, Serialize};

use codetr_core::assigners::{GroundTruth, GtObject};
use codetr_core::geometry::{BBox, CenterBox};
use codetr_core::matcher::QueryPrediction;
use codetr_core::priors::ScalarMap;

use crate::error::{io_context, CliError, CliResult};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub images: Vec<SceneImage>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneImage {
    pub id: u64,
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub objects: Vec<SceneObject>,
    /// Externally supplied proposal boxes, corner form.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposals: Option<Vec<[f64; 4]>>,
    /// Query predictions: per-class scores plus a normalized cxcywh box.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictions: Option<Vec<ScenePrediction>>,
    /// Per-level feature-norm grids, flat row-major.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_norms: Option<Vec<FeatureNormMap>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneObject {
    pub label: usize,
    /// Corner form [x1, y1, x2, y2] in absolute pixels.
    pub bbox: [f64; 4],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenePrediction {
    pub scores: Vec<f64>,
    /// Normalized (cx, cy, w, h).
    pub bbox: [f64; 4],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureNormMap {
    pub level: u32,
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

/// Loads and validates a scene file. Every contained invariant is checked
/// here; errors name the offending image and field.
pub fn load_scene(path: &Path) -> CliResult<SceneFile> {
    let text = std::fs::read_to_string(path).map_err(|e| io_context("reading", path, e))?;
    let scene: SceneFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    validate_scene(&scene)?;
    Ok(scene)
}

fn validate_scene(scene: &SceneFile) -> CliResult<()> {
    let mut seen = std::collections::HashSet::new();
    for image in &scene.images {
        let id = image.id;
        if !seen.insert(id) {
            return Err(CliError::Validation(format!("image {id}: duplicate id")));
        }
        if image.width == 0 || image.height == 0 {
            return Err(CliError::Validation(format!(
                "image {id}: width/height must be positive"
            )));
        }
        for (i, obj) in image.objects.iter().enumerate() {
            check_corner_box(&obj.bbox)
                .map_err(|e| CliError::Validation(format!("image {id}: objects[{i}].bbox {e}")))?;
        }
        if let Some(proposals) = &image.proposals {
            for (i, p) in proposals.iter().enumerate() {
                check_corner_box(p).map_err(|e| {
                    CliError::Validation(format!("image {id}: proposals[{i}] {e}"))
                })?;
            }
        }
        if let Some(predictions) = &image.predictions {
            for (i, p) in predictions.iter().enumerate() {
                if p.scores.is_empty()
                    || p.scores.iter().any(|s| !s.is_finite() || *s < 0.0 || *s > 1.0)
                {
                    return Err(CliError::Validation(format!(
                        "image {id}: predictions[{i}].scores must be probabilities in [0, 1]"
                    )));
                }
                let [cx, cy, w, h] = p.bbox;
                if CenterBox::new(cx, cy, w, h).is_err() {
                    return Err(CliError::Validation(format!(
                        "image {id}: predictions[{i}].bbox [{cx}, {cy}, {w}, {h}] is not a valid normalized box"
                    )));
                }
            }
        }
        if let Some(norms) = &image.feature_norms {
            for (i, m) in norms.iter().enumerate() {
                ScalarMap::new(m.level, m.height, m.width, m.values.clone()).map_err(|e| {
                    CliError::Validation(format!("image {id}: feature_norms[{i}]: {e}"))
                })?;
            }
        }
    }
    Ok(())
}

fn check_corner_box(b: &[f64; 4]) -> Result<(), String> {
    match BBox::new(b[0], b[1], b[2], b[3]) {
        Ok(_) => Ok(()),
        Err(e) => Err(e.to_string()),
    }
}

impl SceneImage {
    pub fn ground_truth(&self, num_classes: usize) -> CliResult<GroundTruth> {
        let objects = self
            .objects
            .iter()
            .map(|o| {
                Ok(GtObject {
                    label: o.label,
                    bbox: BBox::new(o.bbox[0], o.bbox[1], o.bbox[2], o.bbox[3])
                        .map_err(|e| CliError::Validation(format!("image {}: {e}", self.id)))?,
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        GroundTruth::new(objects, self.width as f64, self.height as f64, num_classes)
            .map_err(|e| CliError::Validation(format!("image {}: {e}", self.id)))
    }

    pub fn query_predictions(&self, num_classes: usize) -> CliResult<Vec<QueryPrediction>> {
        let Some(predictions) = &self.predictions else {
            return Err(CliError::Validation(format!(
                "image {}: predictions are required for matching",
                self.id
            )));
        };
        predictions
            .iter()
            .enumerate()
            .map(|(i, p)| {
                if p.scores.len() != num_classes {
                    return Err(CliError::Validation(format!(
                        "image {}: predictions[{i}] has {} scores, config declares {num_classes} classes",
                        self.id,
                        p.scores.len()
                    )));
                }
                let [cx, cy, w, h] = p.bbox;
                QueryPrediction::new(p.scores.clone(), CenterBox { cx, cy, w, h })
                    .map_err(|e| CliError::Validation(format!("image {}: {e}", self.id)))
            })
            .collect()
    }
}
