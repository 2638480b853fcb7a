//! Bounding boxes and region-of-interest windows.
//!
//! [`Rect`] is center-based: `(x, y)` is the center in image pixels and
//! `(w, h)` the extent. Annotation files use the top-left convention and are
//! converted at ingestion with [`Rect::from_top_left`].

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    /// Builds a rect, rejecting non-finite fields and non-positive sizes.
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        let r = Rect { x, y, w, h };
        r.validate()?;
        Ok(r)
    }

    pub fn from_top_left(left: f64, top: f64, w: f64, h: f64) -> Result<Self> {
        Rect::new(left + w / 2.0, top + h / 2.0, w, h)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidRect(format!("non-finite field in {self:?}")));
        }
        if self.w <= 0.0 || self.h <= 0.0 {
            return Err(Error::InvalidRect(format!(
                "size must be positive, got {}x{}",
                self.w, self.h
            )));
        }
        Ok(())
    }

    pub fn left(&self) -> f64 {
        self.x - self.w / 2.0
    }

    pub fn right(&self) -> f64 {
        self.x + self.w / 2.0
    }

    pub fn top(&self) -> f64 {
        self.y - self.h / 2.0
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h / 2.0
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// `[left, top, w, h]`, the annotation-file convention.
    pub fn to_top_left(&self) -> [f64; 4] {
        [self.left(), self.top(), self.w, self.h]
    }

    /// Same center, both sides multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Rect {
        Rect {
            x: self.x,
            y: self.y,
            w: self.w * factor,
            h: self.h * factor,
        }
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Rect {
        Rect {
            x: self.x + dx,
            y: self.y + dy,
            ..*self
        }
    }

    pub fn intersection_area(&self, other: &Rect) -> f64 {
        let iw = self.right().min(other.right()) - self.left().max(other.left());
        let ih = self.bottom().min(other.bottom()) - self.top().max(other.top());
        if iw <= 0.0 || ih <= 0.0 {
            0.0
        } else {
            iw * ih
        }
    }
}

/// Intersection over union of two axis-aligned rects; 0 when disjoint.
pub fn iou(a: &Rect, b: &Rect) -> f64 {
    let inter = a.intersection_area(b);
    if inter <= 0.0 {
        return 0.0;
    }
    // Areas from the same edge arithmetic as the intersection, so a rect
    // compared with itself gives exactly 1.
    let extent = |r: &Rect| (r.right() - r.left()) * (r.bottom() - r.top());
    let union = extent(a) + extent(b) - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Euclidean distance between the centers of `a` and `b`.
pub fn center_distance(a: &Rect, b: &Rect) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// The crop window fed to the backbone: centered on the target, twice its
/// width and height. The window may extend past the image; the crop is then
/// filled by edge replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoiWindow {
    pub bounds: Rect,
    pub image_size: (u32, u32),
}

/// Pixels of replicated edge needed on each side of a crop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Padding {
    pub left: u32,
    pub top: u32,
    pub right: u32,
    pub bottom: u32,
}

pub fn make_roi(target: &Rect, image_size: (u32, u32)) -> Result<RoiWindow> {
    target.validate()?;
    if image_size.0 == 0 || image_size.1 == 0 {
        return Err(Error::InvalidArgument(format!(
            "empty image {}x{}",
            image_size.0, image_size.1
        )));
    }
    Ok(RoiWindow {
        bounds: target.scaled(2.0),
        image_size,
    })
}

impl RoiWindow {
    pub fn width(&self) -> f64 {
        self.bounds.w
    }

    pub fn height(&self) -> f64 {
        self.bounds.h
    }

    /// Maps a point in window coordinates (origin at the window's top-left
    /// corner) to image coordinates.
    pub fn to_image(&self, wx: f64, wy: f64) -> (f64, f64) {
        (wx + self.bounds.left(), wy + self.bounds.top())
    }

    pub fn to_window(&self, ix: f64, iy: f64) -> (f64, f64) {
        (ix - self.bounds.left(), iy - self.bounds.top())
    }

    /// Rect expressed in window coordinates, each axis divided by the window
    /// extent so the window spans `[0, 1) x [0, 1)`.
    pub fn normalized(&self, r: &Rect) -> (Range<f64>, Range<f64>) {
        let (l, t) = self.to_window(r.left(), r.top());
        let (rr, b) = self.to_window(r.right(), r.bottom());
        (
            l / self.width()..rr / self.width(),
            t / self.height()..b / self.height(),
        )
    }

    /// Replicated-edge margins required to crop the window from the image.
    pub fn padding(&self) -> Padding {
        let (iw, ih) = (self.image_size.0 as f64, self.image_size.1 as f64);
        let pad = |v: f64| if v > 0.0 { v.ceil() as u32 } else { 0 };
        Padding {
            left: pad(-self.bounds.left()),
            top: pad(-self.bounds.top()),
            right: pad(self.bounds.right() - iw),
            bottom: pad(self.bounds.bottom() - ih),
        }
    }
}

/// Indices of the cells, out of `n` equal cells spanning `[0, 1)`, whose
/// centers fall inside the half-open interval `[lo, hi)`.
pub fn covered_cells(lo: f64, hi: f64, n: usize) -> Range<usize> {
    if n == 0 || !(hi > lo) {
        return 0..0;
    }
    let nf = n as f64;
    let center = |i: usize| (i as f64 + 0.5) / nf;
    let seed = |v: f64| ((v * nf - 0.5).ceil().max(0.0) as usize).min(n);

    // Seed from the closed form, then settle on the exact comparison so the
    // result never depends on rounding in the division.
    let mut start = seed(lo);
    while start > 0 && center(start - 1) >= lo {
        start -= 1;
    }
    while start < n && center(start) < lo {
        start += 1;
    }
    let mut end = seed(hi).max(start);
    while end > start && center(end - 1) >= hi {
        end -= 1;
    }
    while end < n && center(end) < hi {
        end += 1;
    }
    start..end
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rect(x: f64, y: f64, w: f64, h: f64) -> Rect {
        Rect::new(x, y, w, h).unwrap()
    }

    #[test]
    fn roi_doubles_target() {
        let roi = make_roi(&rect(50.0, 50.0, 20.0, 10.0), (200, 200)).unwrap();
        assert_eq!(roi.bounds, rect(50.0, 50.0, 40.0, 20.0));
        assert_eq!(roi.padding(), Padding::default());
    }

    #[test]
    fn roi_near_corner_needs_padding() {
        let roi = make_roi(&rect(5.0, 5.0, 20.0, 20.0), (200, 200)).unwrap();
        assert_eq!((roi.width(), roi.height()), (40.0, 40.0));
        let pad = roi.padding();
        assert_eq!((pad.left, pad.top, pad.right, pad.bottom), (15, 15, 0, 0));
    }

    #[test]
    fn roi_corner_maps_to_image() {
        let roi = make_roi(&rect(100.0, 100.0, 64.0, 32.0), (400, 400)).unwrap();
        assert_eq!(roi.bounds, rect(100.0, 100.0, 128.0, 64.0));
        assert_eq!(roi.to_image(0.0, 0.0), (36.0, 68.0));
    }

    #[test]
    fn roi_rejects_bad_target() {
        let bad = Rect { x: 1.0, y: 1.0, w: 0.0, h: 3.0 };
        assert!(matches!(make_roi(&bad, (10, 10)), Err(Error::InvalidRect(_))));
        assert!(Rect::new(1.0, f64::NAN, 1.0, 1.0).is_err());
    }

    #[test]
    fn iou_examples() {
        let a = rect(0.5, 0.5, 1.0, 1.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &a.translated(5.0, 0.0)), 0.0);
        let half = a.translated(0.5, 0.0);
        assert!((iou(&a, &half) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn distance_examples() {
        let at = |x, y| rect(x, y, 1.0, 1.0);
        assert_eq!(center_distance(&at(2.0, 2.0), &at(2.0, 2.0)), 0.0);
        assert_eq!(center_distance(&at(0.0, 0.0), &at(3.0, 4.0)), 5.0);
        assert_eq!(center_distance(&at(1.0, 1.0), &at(1.0, 2.0)), 1.0);
    }

    #[test]
    fn top_left_conversion() {
        let r = Rect::from_top_left(10.0, 20.0, 30.0, 40.0).unwrap();
        assert_eq!((r.x, r.y, r.w, r.h), (25.0, 40.0, 30.0, 40.0));
        assert_eq!(r.to_top_left(), [10.0, 20.0, 30.0, 40.0]);
    }

    #[test]
    fn covered_cells_matches_enumeration_at_boundaries() {
        // Edges exactly on cell centers: the left one is included, the right one is not.
        assert_eq!(covered_cells(0.25, 0.75, 14), 3..10);
        assert_eq!(covered_cells(0.0, 1.0, 1), 0..1);
        assert_eq!(covered_cells(-3.0, -1.0, 8), 0..0);
        assert_eq!(covered_cells(0.5, 0.5, 8), 0..0);
    }

    fn arb_rect() -> impl Strategy<Value = Rect> {
        (-50.0..50.0f64, -50.0..50.0f64, 0.1..40.0f64, 0.1..40.0f64)
            .prop_map(|(x, y, w, h)| Rect { x, y, w, h })
    }

    proptest! {
        #[test]
        fn iou_is_symmetric_and_bounded(a in arb_rect(), b in arb_rect()) {
            let ab = iou(&a, &b);
            prop_assert_eq!(ab, iou(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(iou(&a, &a), 1.0);
            let far = a.translated(a.w + b.w + 1.0, 0.0);
            prop_assert_eq!(iou(&far, &a), 0.0);
        }

        #[test]
        fn window_round_trip(t in arb_rect(), px in 0.0..320.0f64, py in 0.0..240.0f64) {
            let t = t.translated(160.0, 120.0);
            let roi = make_roi(&t, (320, 240)).unwrap();
            let (wx, wy) = roi.to_window(px, py);
            let (ix, iy) = roi.to_image(wx, wy);
            prop_assert!((ix - px).abs() < 1e-9 && (iy - py).abs() < 1e-9);
        }

        #[test]
        fn covered_cells_agrees_with_brute_force(lo in -0.3..1.3f64, len in 0.0..1.2f64, n in 1usize..40) {
            let hi = lo + len;
            let brute: Vec<usize> = (0..n)
                .filter(|&i| {
                    let c = (i as f64 + 0.5) / n as f64;
                    c >= lo && c < hi
                })
                .collect();
            let fast: Vec<usize> = covered_cells(lo, hi, n).collect();
            prop_assert_eq!(brute, fast);
        }
    }
}
