//! Feature-pyramid geometry and prior generation.
//!
//! Level j of the pyramid has stride 2^(2+j), so j = 1..=J gives the
//! 8/16/32/... ladder. Grids come from ceil division of the image size.

use crate::error::{Error, Result};
use crate::geometry::BBox;

/// Geometry of one pyramid level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelSpec {
    /// 1-based level index j.
    pub index: u32,
    /// Downsampling stride, 2^(2+j) pixels.
    pub stride: u32,
    /// Grid rows, ceil(image_h / stride).
    pub height: usize,
    /// Grid columns, ceil(image_w / stride).
    pub width: usize,
}

/// Pyramid geometry for one image size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PyramidSpec {
    pub levels: Vec<LevelSpec>,
    pub image_h: u32,
    pub image_w: u32,
}

const MAX_LEVELS: u32 = 16;

impl PyramidSpec {
    pub fn build(image_h: u32, image_w: u32, num_levels: u32) -> Result<Self> {
        if image_h == 0 || image_w == 0 {
            return Err(Error::InvalidConfig(
                "image dimensions must be positive".into(),
            ));
        }
        if num_levels == 0 || num_levels > MAX_LEVELS {
            return Err(Error::InvalidConfig(format!(
                "pyramid must have between 1 and {MAX_LEVELS} levels, got {num_levels}"
            )));
        }
        let levels = (1..=num_levels)
            .map(|j| {
                let stride = 1u32 << (2 + j);
                LevelSpec {
                    index: j,
                    stride,
                    height: image_h.div_ceil(stride) as usize,
                    width: image_w.div_ceil(stride) as usize,
                }
            })
            .collect();
        Ok(Self {
            levels,
            image_h,
            image_w,
        })
    }

    pub fn level(&self, index: u32) -> Option<&LevelSpec> {
        self.levels.iter().find(|l| l.index == index)
    }
}

/// What a prior set holds at each grid location.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorKind {
    Anchor,
    Point,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorGeom {
    Anchor(BBox),
    Point { x: f64, y: f64 },
}

impl PriorGeom {
    /// Anchor center or the point itself.
    pub fn center(&self) -> (f64, f64) {
        match self {
            PriorGeom::Anchor(b) => b.center(),
            PriorGeom::Point { x, y } => (*x, *y),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorEntry {
    pub row: usize,
    pub col: usize,
    /// Location index within the level: (row * width + col) * per_cell + k.
    pub loc: usize,
    pub geom: PriorGeom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelPriors {
    pub level: u32,
    pub stride: u32,
    pub height: usize,
    pub width: usize,
    pub entries: Vec<PriorEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorSet {
    pub kind: PriorKind,
    pub levels: Vec<LevelPriors>,
}

impl PriorSet {
    pub fn total_count(&self) -> usize {
        self.levels.iter().map(|l| l.entries.len()).sum()
    }
}

/// Anchor shapes per grid cell: one anchor per (scale, ratio) pair with
/// area (scale * stride)^2 and aspect w/h = ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorConfig {
    pub scales: Vec<f64>,
    pub ratios: Vec<f64>,
}

impl AnchorConfig {
    /// Single anchor per location: scale 8, ratio 1.
    pub fn single_scale8() -> Self {
        Self {
            scales: vec![8.0],
            ratios: vec![1.0],
        }
    }

    /// Three octave scales (4 * 2^(k/3)) by three ratios {0.5, 1, 2}.
    pub fn octave_triplet() -> Self {
        Self {
            scales: vec![
                4.0,
                4.0 * 2f64.powf(1.0 / 3.0),
                4.0 * 2f64.powf(2.0 / 3.0),
            ],
            ratios: vec![0.5, 1.0, 2.0],
        }
    }

    pub fn per_cell(&self) -> usize {
        self.scales.len() * self.ratios.len()
    }

    fn validate(&self) -> Result<()> {
        if self.scales.is_empty() || self.ratios.is_empty() {
            return Err(Error::InvalidConfig(
                "anchor config needs at least one scale and one ratio".into(),
            ));
        }
        if self.scales.iter().any(|s| !s.is_finite() || *s <= 0.0)
            || self.ratios.iter().any(|r| !r.is_finite() || *r <= 0.0)
        {
            return Err(Error::InvalidConfig(
                "anchor scales and ratios must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One anchor per (cell, scale, ratio), centered on the cell.
pub fn generate_anchors(spec: &PyramidSpec, config: &AnchorConfig) -> Result<PriorSet> {
    config.validate()?;
    let per_cell = config.per_cell();
    let levels = spec
        .levels
        .iter()
        .map(|lv| {
            let stride = lv.stride as f64;
            let mut entries = Vec::with_capacity(lv.height * lv.width * per_cell);
            for row in 0..lv.height {
                for col in 0..lv.width {
                    let cx = (col as f64 + 0.5) * stride;
                    let cy = (row as f64 + 0.5) * stride;
                    let mut k = 0;
                    for scale in &config.scales {
                        for ratio in &config.ratios {
                            let side = scale * stride;
                            let w = side * ratio.sqrt();
                            let h = side / ratio.sqrt();
                            let bbox = BBox {
                                x1: cx - w / 2.0,
                                y1: cy - h / 2.0,
                                x2: cx + w / 2.0,
                                y2: cy + h / 2.0,
                            };
                            entries.push(PriorEntry {
                                row,
                                col,
                                loc: (row * lv.width + col) * per_cell + k,
                                geom: PriorGeom::Anchor(bbox),
                            });
                            k += 1;
                        }
                    }
                }
            }
            LevelPriors {
                level: lv.index,
                stride: lv.stride,
                height: lv.height,
                width: lv.width,
                entries,
            }
        })
        .collect();
    Ok(PriorSet {
        kind: PriorKind::Anchor,
        levels,
    })
}

/// One point per cell at its center.
pub fn generate_points(spec: &PyramidSpec) -> PriorSet {
    let levels = spec
        .levels
        .iter()
        .map(|lv| {
            let stride = lv.stride as f64;
            let mut entries = Vec::with_capacity(lv.height * lv.width);
            for row in 0..lv.height {
                for col in 0..lv.width {
                    entries.push(PriorEntry {
                        row,
                        col,
                        loc: row * lv.width + col,
                        geom: PriorGeom::Point {
                            x: (col as f64 + 0.5) * stride,
                            y: (row as f64 + 0.5) * stride,
                        },
                    });
                }
            }
            LevelPriors {
                level: lv.index,
                stride: lv.stride,
                height: lv.height,
                width: lv.width,
                entries,
            }
        })
        .collect();
    PriorSet {
        kind: PriorKind::Point,
        levels,
    }
}

/// A dense per-level grid of nonnegative values (feature norms and the like).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMap {
    pub level: u32,
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl ScalarMap {
    pub fn new(level: u32, height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || values.len() != height * width {
            return Err(Error::InvalidInput(format!(
                "scalar map dims {height}x{width} do not match {} values",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput(
                "scalar map values must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            level,
            height,
            width,
            values,
        })
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }
}

/// Bilinear interpolation with half-pixel-center (align_corners = false)
/// sampling; edge samples clamp to the border row/column.
pub fn bilinear_resize(map: &ScalarMap, out_h: usize, out_w: usize) -> Result<ScalarMap> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::InvalidInput(
            "resize target dimensions must be positive".into(),
        ));
    }
    let scale_y = map.height as f64 / out_h as f64;
    let scale_x = map.width as f64 / out_w as f64;
    let mut values = Vec::with_capacity(out_h * out_w);
    for oy in 0..out_h {
        let sy = (oy as f64 + 0.5) * scale_y - 0.5;
        let y0 = sy.floor();
        let ty = sy - y0;
        let y0i = (y0 as i64).clamp(0, map.height as i64 - 1) as usize;
        let y1i = (y0 as i64 + 1).clamp(0, map.height as i64 - 1) as usize;
        for ox in 0..out_w {
            let sx = (ox as f64 + 0.5) * scale_x - 0.5;
            let x0 = sx.floor();
            let tx = sx - x0;
            let x0i = (x0 as i64).clamp(0, map.width as i64 - 1) as usize;
            let x1i = (x0 as i64 + 1).clamp(0, map.width as i64 - 1) as usize;
            let v = map.get(y0i, x0i) * (1.0 - ty) * (1.0 - tx)
                + map.get(y0i, x1i) * (1.0 - ty) * tx
                + map.get(y1i, x0i) * ty * (1.0 - tx)
                + map.get(y1i, x1i) * ty * tx;
            values.push(v);
        }
    }
    Ok(ScalarMap {
        level: map.level,
        height: out_h,
        width: out_w,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pyramid_strides_and_grids() {
        let spec = PyramidSpec::build(64, 64, 1).unwrap();
        assert_eq!(spec.levels.len(), 1);
        assert_eq!(spec.levels[0].stride, 8);
        assert_eq!((spec.levels[0].height, spec.levels[0].width), (8, 8));

        let spec = PyramidSpec::build(64, 64, 3).unwrap();
        let strides: Vec<u32> = spec.levels.iter().map(|l| l.stride).collect();
        assert_eq!(strides, vec![8, 16, 32]);
        let grids: Vec<(usize, usize)> = spec.levels.iter().map(|l| (l.height, l.width)).collect();
        assert_eq!(grids, vec![(8, 8), (4, 4), (2, 2)]);

        // minimal image still yields a 1x1 grid
        let spec = PyramidSpec::build(1, 1, 1).unwrap();
        assert_eq!((spec.levels[0].height, spec.levels[0].width), (1, 1));

        assert!(PyramidSpec::build(0, 64, 1).is_err());
        assert!(PyramidSpec::build(64, 64, 0).is_err());
        assert!(PyramidSpec::build(64, 64, 32).is_err());
    }

    #[test]
    fn anchor_generation() {
        let spec = PyramidSpec::build(16, 16, 1).unwrap();
        let cfg = AnchorConfig::single_scale8();
        let set = generate_anchors(&spec, &cfg).unwrap();
        assert_eq!(set.total_count(), 4);
        let first = &set.levels[0].entries[0];
        match first.geom {
            PriorGeom::Anchor(b) => {
                assert_eq!(b.center(), (4.0, 4.0));
                assert_eq!((b.width(), b.height()), (64.0, 64.0));
            }
            _ => panic!("expected anchor"),
        }

        // ratio 2 preserves area: w = 64*sqrt(2), h = 64/sqrt(2)
        let cfg = AnchorConfig { scales: vec![8.0], ratios: vec![2.0] };
        let set = generate_anchors(&spec, &cfg).unwrap();
        if let PriorGeom::Anchor(b) = set.levels[0].entries[0].geom {
            assert!((b.width() - 64.0 * 2f64.sqrt()).abs() < 1e-9);
            assert!((b.height() - 64.0 / 2f64.sqrt()).abs() < 1e-9);
        }

        assert!(generate_anchors(&spec, &AnchorConfig { scales: vec![], ratios: vec![1.0] }).is_err());
        assert!(generate_anchors(&spec, &AnchorConfig { scales: vec![-1.0], ratios: vec![1.0] }).is_err());
    }

    #[test]
    fn point_generation() {
        let spec = PyramidSpec::build(32, 32, 1).unwrap();
        let set = generate_points(&spec);
        assert_eq!(set.total_count(), 16);
        let lv = &set.levels[0];
        assert_eq!(lv.entries[0].geom.center(), (4.0, 4.0));
        // cell (row 1, col 2) -> ((2+0.5)*8, (1+0.5)*8) = (20, 12)
        let e = lv.entries.iter().find(|e| e.row == 1 && e.col == 2).unwrap();
        assert_eq!(e.geom.center(), (20.0, 12.0));
    }

    #[test]
    fn prior_centers_on_cell_centers() {
        let spec = PyramidSpec::build(64, 96, 2).unwrap();
        for set in [
            generate_anchors(&spec, &AnchorConfig::octave_triplet()).unwrap(),
            generate_points(&spec),
        ] {
            for lv in &set.levels {
                for e in &lv.entries {
                    let (cx, cy) = e.geom.center();
                    assert!((cx - (e.col as f64 + 0.5) * lv.stride as f64).abs() < 1e-9);
                    assert!((cy - (e.row as f64 + 0.5) * lv.stride as f64).abs() < 1e-9);
                    // dims are multiples of every stride here, so centers
                    // stay inside the image
                    assert!(cx > 0.0 && cx < 96.0 && cy > 0.0 && cy < 64.0);
                }
            }
        }
    }

    #[test]
    fn anchor_counts() {
        let spec = PyramidSpec::build(64, 64, 2).unwrap();
        let cfg = AnchorConfig::octave_triplet();
        let set = generate_anchors(&spec, &cfg).unwrap();
        let expect: usize = spec.levels.iter().map(|l| l.height * l.width * 9).sum();
        assert_eq!(set.total_count(), expect);
    }

    #[test]
    fn bilinear_hand_case() {
        let m = ScalarMap::new(7, 1, 2, vec![0.0, 1.0]).unwrap();
        let out = bilinear_resize(&m, 1, 4).unwrap();
        let expect = [0.0, 0.25, 0.75, 1.0];
        for (v, e) in out.values.iter().zip(expect) {
            assert!((v - e).abs() < 1e-12, "{:?}", out.values);
        }
    }

    #[test]
    fn bilinear_constant_and_identity() {
        let m = ScalarMap::new(1, 3, 3, vec![2.5; 9]).unwrap();
        let out = bilinear_resize(&m, 7, 5).unwrap();
        assert!(out.values.iter().all(|v| (v - 2.5).abs() < 1e-12));

        let m = ScalarMap::new(1, 2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let out = bilinear_resize(&m, 2, 2).unwrap();
        assert_eq!(out.values, m.values);

        // downscale-then-upscale of a constant map is exact
        let m = ScalarMap::new(1, 4, 4, vec![0.75; 16]).unwrap();
        let down = bilinear_resize(&m, 2, 2).unwrap();
        let up = bilinear_resize(&down, 4, 4).unwrap();
        assert_eq!(up.values, m.values);
    }

    #[test]
    fn bilinear_respects_bounds() {
        let m = ScalarMap::new(2, 3, 4, (0..12).map(|i| i as f64).collect()).unwrap();
        let out = bilinear_resize(&m, 9, 13).unwrap();
        for v in &out.values {
            assert!(*v >= -1e-12 && *v <= 11.0 + 1e-12);
        }
    }
}
