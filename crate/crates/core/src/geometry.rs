//! Bounding-box representations, overlap measures, and the coordinate
//! encodings used as regression targets by the label assigners.
//!
//! All boxes are continuous, half-open rectangles in absolute pixel
//! coordinates: area = (x2 - x1) * (y2 - y1), no +1 pixel convention.

use crate::error::{Error, Result};

/// Axis-aligned box in corner form (x1, y1, x2, y2).
///
/// Zero-area boxes are permitted; negative extents and non-finite
/// coordinates are rejected at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        if !(x1.is_finite() && y1.is_finite() && x2.is_finite() && y2.is_finite()) {
            return Err(Error::InvalidBox {
                x1,
                y1,
                x2,
                y2,
                reason: "coordinates must be finite",
            });
        }
        if x2 < x1 || y2 < y1 {
            return Err(Error::InvalidBox {
                x1,
                y1,
                x2,
                y2,
                reason: "negative extent (x2 < x1 or y2 < y1)",
            });
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    #[inline]
    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    #[inline]
    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    #[inline]
    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    /// Corner form to center form. Exact algebraic conversion.
    pub fn to_center(&self) -> CenterBox {
        let (cx, cy) = self.center();
        CenterBox {
            cx,
            cy,
            w: self.width(),
            h: self.height(),
        }
    }

    /// Clips the box to the rectangle [0, w] x [0, h].
    pub fn clamp_to(&self, w: f64, h: f64) -> BBox {
        let x1 = self.x1.clamp(0.0, w);
        let y1 = self.y1.clamp(0.0, h);
        let x2 = self.x2.clamp(0.0, w);
        let y2 = self.y2.clamp(0.0, h);
        BBox { x1, y1, x2, y2 }
    }

    /// True when (x, y) lies strictly inside the box.
    #[inline]
    pub fn contains_strict(&self, x: f64, y: f64) -> bool {
        x > self.x1 && x < self.x2 && y > self.y1 && y < self.y2
    }
}

/// Box in center form (cx, cy, w, h) with nonnegative extents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl CenterBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        if !(cx.is_finite() && cy.is_finite() && w.is_finite() && h.is_finite()) || w < 0.0 || h < 0.0
        {
            return Err(Error::InvalidInput(format!(
                "invalid center box ({cx}, {cy}, {w}, {h}): extents must be finite and nonnegative"
            )));
        }
        Ok(Self { cx, cy, w, h })
    }

    /// Center form back to corner form; inverse of [`BBox::to_center`].
    pub fn to_corner(&self) -> BBox {
        BBox {
            x1: self.cx - self.w / 2.0,
            y1: self.cy - self.h / 2.0,
            x2: self.cx + self.w / 2.0,
            y2: self.cy + self.h / 2.0,
        }
    }
}

/// FCOS-style regression target: distances from a point to the four box
/// sides, plus the centerness quality score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LtrbTarget {
    pub l: f64,
    pub t: f64,
    pub r: f64,
    pub b: f64,
    pub centerness: f64,
}

/// Anchor-relative regression offsets (dx, dy, dw, dh).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaTarget {
    pub dx: f64,
    pub dy: f64,
    pub dw: f64,
    pub dh: f64,
}

#[inline]
fn intersection(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    iw * ih
}

/// Intersection over union of a single box pair. Zero unions map to 0.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = intersection(a, b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Generalized IoU: IoU minus the normalized empty area of the smallest
/// enclosing box. Range [-1, 1]; a zero-area enclosing box maps to 0.
pub fn giou(a: &BBox, b: &BBox) -> f64 {
    let inter = intersection(a, b);
    let union = a.area() + b.area() - inter;
    let ew = a.x2.max(b.x2) - a.x1.min(b.x1);
    let eh = a.y2.max(b.y2) - a.y1.min(b.y1);
    let enclose = ew * eh;
    if enclose <= 0.0 {
        return 0.0;
    }
    let iou = if union <= 0.0 { 0.0 } else { inter / union };
    iou - (enclose - union) / enclose
}

/// GIoU of (a, b) together with its gradient with respect to a's
/// coordinates (x1, y1, x2, y2).
///
/// The gradient is exact wherever no coordinate tie makes the underlying
/// min/max kinks active; at a kink the one-sided branch in effect is
/// returned.
pub fn giou_with_grad(a: &BBox, b: &BBox) -> (f64, [f64; 4]) {
    let aw = a.width();
    let ah = a.height();
    let area_a = aw * ah;
    let area_b = b.area();

    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = iw * ih;
    let union = area_a + area_b - inter;

    let ew = a.x2.max(b.x2) - a.x1.min(b.x1);
    let eh = a.y2.max(b.y2) - a.y1.min(b.y1);
    let enclose = ew * eh;

    if enclose <= 0.0 {
        return (0.0, [0.0; 4]);
    }
    if union <= 0.0 {
        // Two zero-area boxes: constant by convention, no useful gradient.
        return (-1.0, [0.0; 4]);
    }

    let iou = inter / union;
    let value = iou - (enclose - union) / enclose;

    // d(area_a)/d(x1, y1, x2, y2)
    let d_area = [-ah, -aw, ah, aw];

    // Intersection width/height derivatives: active only when the pred
    // coordinate is the binding side of the overlap.
    let d_iw = [
        if iw > 0.0 && a.x1 > b.x1 { -1.0 } else { 0.0 },
        0.0,
        if iw > 0.0 && a.x2 < b.x2 { 1.0 } else { 0.0 },
        0.0,
    ];
    let d_ih = [
        0.0,
        if ih > 0.0 && a.y1 > b.y1 { -1.0 } else { 0.0 },
        0.0,
        if ih > 0.0 && a.y2 < b.y2 { 1.0 } else { 0.0 },
    ];

    // Enclosing-box derivatives: active when the pred coordinate is the
    // outer side.
    let d_ew = [
        if a.x1 < b.x1 { -1.0 } else { 0.0 },
        0.0,
        if a.x2 > b.x2 { 1.0 } else { 0.0 },
        0.0,
    ];
    let d_eh = [
        0.0,
        if a.y1 < b.y1 { -1.0 } else { 0.0 },
        0.0,
        if a.y2 > b.y2 { 1.0 } else { 0.0 },
    ];

    let mut grad = [0.0f64; 4];
    for k in 0..4 {
        let d_inter = d_iw[k] * ih + iw * d_ih[k];
        let d_union = d_area[k] - d_inter;
        let d_iou = (d_inter * union - inter * d_union) / (union * union);
        let d_enclose = d_ew[k] * eh + ew * d_eh[k];
        // value = iou - 1 + union / enclose
        grad[k] = d_iou + (d_union * enclose - union * d_enclose) / (enclose * enclose);
    }
    (value, grad)
}

/// Pairwise IoU matrix; entry (i, j) = `iou(a[i], b[j])`.
pub fn pairwise_iou(a: &[BBox], b: &[BBox]) -> Vec<Vec<f64>> {
    a.iter()
        .map(|x| b.iter().map(|y| iou(x, y)).collect())
        .collect()
}

/// Pairwise GIoU matrix; entry (i, j) = `giou(a[i], b[j])`.
pub fn pairwise_giou(a: &[BBox], b: &[BBox]) -> Vec<Vec<f64>> {
    a.iter()
        .map(|x| b.iter().map(|y| giou(x, y)).collect())
        .collect()
}

/// Distances from (x, y), which must lie strictly inside `gt`, to the four
/// sides of `gt`, with the centerness score
/// sqrt((min(l,r)/max(l,r)) * (min(t,b)/max(t,b))).
pub fn encode_ltrb(x: f64, y: f64, gt: &BBox) -> Result<LtrbTarget> {
    if !gt.contains_strict(x, y) {
        return Err(Error::InvalidInput(format!(
            "point ({x}, {y}) is not strictly inside box [{}, {}, {}, {}]",
            gt.x1, gt.y1, gt.x2, gt.y2
        )));
    }
    let l = x - gt.x1;
    let t = y - gt.y1;
    let r = gt.x2 - x;
    let b = gt.y2 - y;
    let centerness = ((l.min(r) / l.max(r)) * (t.min(b) / t.max(b))).sqrt();
    Ok(LtrbTarget {
        l,
        t,
        r,
        b,
        centerness,
    })
}

/// Anchor-relative offsets of `gt`: dx = (gcx - acx)/aw, dy = (gcy - acy)/ah,
/// dw = ln(gw/aw), dh = ln(gh/ah). No target normalization is applied.
pub fn encode_deltas(anchor: &BBox, gt: &BBox) -> Result<DeltaTarget> {
    let aw = anchor.width();
    let ah = anchor.height();
    if aw <= 0.0 || ah <= 0.0 {
        return Err(Error::InvalidInput(
            "delta encoding requires an anchor with positive extent".into(),
        ));
    }
    let gw = gt.width();
    let gh = gt.height();
    if gw <= 0.0 || gh <= 0.0 {
        return Err(Error::InvalidInput(
            "delta encoding is undefined for a zero-size ground-truth box".into(),
        ));
    }
    let (acx, acy) = anchor.center();
    let (gcx, gcy) = gt.center();
    Ok(DeltaTarget {
        dx: (gcx - acx) / aw,
        dy: (gcy - acy) / ah,
        dw: (gw / aw).ln(),
        dh: (gh / ah).ln(),
    })
}

/// Exact inverse of [`encode_deltas`].
pub fn decode_deltas(anchor: &BBox, delta: &DeltaTarget) -> Result<BBox> {
    let aw = anchor.width();
    let ah = anchor.height();
    if aw <= 0.0 || ah <= 0.0 {
        return Err(Error::InvalidInput(
            "delta decoding requires an anchor with positive extent".into(),
        ));
    }
    let (acx, acy) = anchor.center();
    let cx = acx + delta.dx * aw;
    let cy = acy + delta.dy * ah;
    let w = aw * delta.dw.exp();
    let h = ah * delta.dh.exp();
    BBox::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)
}
