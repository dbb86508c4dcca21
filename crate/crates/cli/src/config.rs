//! Run configuration. Every field is defaulted; an empty config file (or
//! none at all) runs the K = 2 pairing of adaptive anchor selection plus
//! proposal-based max-IoU over a four-level pyramid. An explicit empty
//! head list selects K = 0.

use std::path::Path;

use serde::{Deserialize, Serialize};

use codetr_core::collab::AssignerConfig;
use codetr_core::losses::HeadLossKind;
use codetr_core::matcher::MatcherWeights;
use codetr_core::priors::AnchorConfig;

use crate::error::{io_context, CliError, CliResult};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub pyramid_levels: u32,
    pub num_classes: usize,
    pub heads: Vec<HeadSpec>,
    pub matcher: MatcherConfig,
    pub lambda1: f64,
    pub lambda2: f64,
    pub num_queries: usize,
    pub pe_dims: usize,
    pub pe_temperature: f64,
    pub threshold_count: usize,
    /// Synthetic proposals generated per image when a proposal-based head
    /// runs on a scene without a proposals list.
    pub proposals_per_image: usize,
    /// Keep the encoder term inside the decoder-layer sum of the global
    /// objective (the printed form) or hoist it out.
    pub encoder_loss_in_layer_sum: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            pyramid_levels: 4,
            num_classes: 80,
            heads: vec![HeadSpec::atss_default(), HeadSpec::faster_rcnn_default()],
            matcher: MatcherConfig::default(),
            lambda1: 1.0,
            lambda2: 2.0,
            num_queries: 300,
            pe_dims: 256,
            pe_temperature: 10_000.0,
            threshold_count: 256,
            proposals_per_image: 32,
            encoder_loss_in_layer_sum: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HeadSpec {
    Atss {
        #[serde(default = "default_top_k")]
        top_k: usize,
        #[serde(default = "default_anchor_scale")]
        anchor_scale: f64,
        #[serde(default = "default_unit_ratios")]
        anchor_ratios: Vec<f64>,
    },
    Fcos {
        #[serde(default = "default_center_radius")]
        center_radius: f64,
    },
    Retinanet {
        #[serde(default = "default_retina_pos")]
        pos_iou_thr: f64,
        #[serde(default = "default_retina_neg")]
        neg_iou_thr: f64,
    },
    FasterRcnn {
        #[serde(default = "default_frcnn_thr")]
        pos_iou_thr: f64,
        #[serde(default = "default_frcnn_thr")]
        neg_iou_thr: f64,
    },
}

fn default_top_k() -> usize {
    9
}
fn default_anchor_scale() -> f64 {
    8.0
}
fn default_unit_ratios() -> Vec<f64> {
    vec![1.0]
}
fn default_center_radius() -> f64 {
    1.5
}
fn default_retina_pos() -> f64 {
    0.5
}
fn default_retina_neg() -> f64 {
    0.4
}
fn default_frcnn_thr() -> f64 {
    0.5
}

impl HeadSpec {
    pub fn atss_default() -> Self {
        HeadSpec::Atss {
            top_k: default_top_k(),
            anchor_scale: default_anchor_scale(),
            anchor_ratios: default_unit_ratios(),
        }
    }

    pub fn faster_rcnn_default() -> Self {
        HeadSpec::FasterRcnn {
            pos_iou_thr: default_frcnn_thr(),
            neg_iou_thr: default_frcnn_thr(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            HeadSpec::Atss { .. } => "atss",
            HeadSpec::Fcos { .. } => "fcos",
            HeadSpec::Retinanet { .. } => "retinanet",
            HeadSpec::FasterRcnn { .. } => "faster_rcnn",
        }
    }

    pub fn to_assigner(&self) -> AssignerConfig {
        match self {
            HeadSpec::Atss { top_k, anchor_scale, anchor_ratios } => AssignerConfig::Atss {
                top_k: *top_k,
                anchor: AnchorConfig {
                    scales: vec![*anchor_scale],
                    ratios: anchor_ratios.clone(),
                },
            },
            HeadSpec::Fcos { center_radius } => AssignerConfig::Fcos {
                center_radius: *center_radius,
            },
            HeadSpec::Retinanet { pos_iou_thr, neg_iou_thr } => AssignerConfig::MaxIouAnchors {
                pos_iou_thr: *pos_iou_thr,
                neg_iou_thr: *neg_iou_thr,
                anchor: AnchorConfig::octave_triplet(),
            },
            HeadSpec::FasterRcnn { pos_iou_thr, neg_iou_thr } => {
                AssignerConfig::MaxIouProposals {
                    pos_iou_thr: *pos_iou_thr,
                    neg_iou_thr: *neg_iou_thr,
                }
            }
        }
    }

    pub fn loss_kind(&self) -> HeadLossKind {
        HeadLossKind::for_assigner(&self.to_assigner())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatcherConfig {
    pub class_weight: f64,
    pub l1_weight: f64,
    pub giou_weight: f64,
    pub focal_alpha: f64,
    pub focal_gamma: f64,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        let w = MatcherWeights::default();
        Self {
            class_weight: w.class_weight,
            l1_weight: w.l1_weight,
            giou_weight: w.giou_weight,
            focal_alpha: w.focal_alpha,
            focal_gamma: w.focal_gamma,
        }
    }
}

impl MatcherConfig {
    pub fn weights(&self) -> MatcherWeights {
        MatcherWeights {
            class_weight: self.class_weight,
            l1_weight: self.l1_weight,
            giou_weight: self.giou_weight,
            focal_alpha: self.focal_alpha,
            focal_gamma: self.focal_gamma,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let config = match path {
            None => RunConfig::default(),
            Some(p) => {
                let text =
                    std::fs::read_to_string(p).map_err(|e| io_context("reading config", p, e))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?
            }
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> CliResult<()> {
        if self.num_classes == 0 {
            return Err(CliError::Validation(
                "config: num_classes must be positive".into(),
            ));
        }
        if self.threshold_count < 2 {
            return Err(CliError::Validation(
                "config: threshold_count must be at least 2".into(),
            ));
        }
        if self.num_queries == 0 {
            return Err(CliError::Validation(
                "config: num_queries must be positive".into(),
            ));
        }
        Ok(())
    }
}
