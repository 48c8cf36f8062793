use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::BinaryMask;
use crate::geometry::BBox;

/// One 8-connected foreground region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    /// Row-major pixel indices, in discovery order.
    pub pixels: Vec<usize>,
    pub min_col: usize,
    pub min_row: usize,
    pub max_col: usize,
    pub max_row: usize,
}

impl Component {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    /// Tight pixel-edge box: column `c` spans `[c, c + 1)`.
    pub fn bbox(&self) -> BBox {
        BBox {
            x_min: self.min_col as f64,
            y_min: self.min_row as f64,
            x_max: (self.max_col + 1) as f64,
            y_max: (self.max_row + 1) as f64,
        }
    }
}

/// 8-connected components, ordered by the scan position of their first pixel.
pub fn components(mask: &BinaryMask) -> Vec<Component> {
    let (w, h) = (mask.width(), mask.height());
    let bits = mask.bits();
    let mut seen = vec![false; bits.len()];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();

    for start in 0..bits.len() {
        if !bits[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut comp = Component {
            pixels: Vec::new(),
            min_col: usize::MAX,
            min_row: usize::MAX,
            max_col: 0,
            max_row: 0,
        };
        while let Some(idx) = queue.pop_front() {
            let (r, c) = (idx / w, idx % w);
            comp.pixels.push(idx);
            comp.min_col = comp.min_col.min(c);
            comp.max_col = comp.max_col.max(c);
            comp.min_row = comp.min_row.min(r);
            comp.max_row = comp.max_row.max(r);
            for dr in -1isize..=1 {
                for dc in -1isize..=1 {
                    let (nr, nc) = (r as isize + dr, c as isize + dc);
                    if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
                        continue;
                    }
                    let n = nr as usize * w + nc as usize;
                    if bits[n] && !seen[n] {
                        seen[n] = true;
                        queue.push_back(n);
                    }
                }
            }
        }
        out.push(comp);
    }
    out
}

/// Keeps only the biggest component. On equal sizes the one reached first
/// in row-major scan order wins.
pub fn largest_component(mask: &BinaryMask) -> BinaryMask {
    let mut out = BinaryMask::empty(mask.width(), mask.height()).expect("dimensions already valid");
    if let Some(c) = largest(mask) {
        for idx in c.pixels {
            out.bits[idx] = true;
        }
    }
    out
}

pub(crate) fn largest(mask: &BinaryMask) -> Option<Component> {
    let mut best: Option<Component> = None;
    for c in components(mask) {
        if best.as_ref().is_none_or(|b| c.len() > b.len()) {
            best = Some(c);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "PE")]
    Pe,
    #[serde(rename = "NonPE")]
    NonPe,
}

/// A slice is PE exactly when its lesion mask has any foreground.
pub fn mask_to_label(mask: &BinaryMask) -> Label {
    if mask.is_blank() {
        Label::NonPe
    } else {
        Label::Pe
    }
}

/// One box per component, grown by `margin` pixels on every side and
/// clamped to the image.
pub fn mask_to_annotations(mask: &BinaryMask, margin: usize) -> Vec<BBox> {
    let (w, h) = (mask.width(), mask.height());
    components(mask)
        .iter()
        .map(|c| BBox {
            x_min: c.min_col.saturating_sub(margin) as f64,
            y_min: c.min_row.saturating_sub(margin) as f64,
            x_max: (c.max_col + 1 + margin).min(w) as f64,
            y_max: (c.max_row + 1 + margin).min(h) as f64,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(rows: &[&str]) -> BinaryMask {
        let w = rows[0].len();
        let bits = rows.iter().flat_map(|r| r.chars().map(|c| c == '#')).collect();
        BinaryMask::new(w, rows.len(), bits).unwrap()
    }

    #[test]
    fn diagonal_pixels_connect() {
        let m = mask(&["#..", ".#.", "..#"]);
        assert_eq!(components(&m).len(), 1);
    }

    #[test]
    fn single_blob_unchanged() {
        let m = mask(&["....", ".##.", ".##.", "...."]);
        assert_eq!(largest_component(&m), m);
        let e = BinaryMask::empty(3, 3).unwrap();
        assert_eq!(largest_component(&e), e);
    }

    #[test]
    fn keeps_the_bigger_blob() {
        let m = mask(&["##...#", "##...#", "......", "....##"]);
        let out = largest_component(&m);
        assert_eq!(out, mask(&["##....", "##....", "......", "......"]));
    }

    #[test]
    fn tie_goes_to_first_in_scan_order() {
        let m = mask(&["...##", "#....", "#...."]);
        let out = largest_component(&m);
        assert_eq!(out, mask(&["...##", ".....", "....."]));
    }

    #[test]
    fn labels() {
        assert_eq!(mask_to_label(&BinaryMask::empty(4, 4).unwrap()), Label::NonPe);
        assert_eq!(mask_to_label(&mask(&["....", "..#."])), Label::Pe);
    }

    #[test]
    fn annotation_boxes() {
        assert!(mask_to_annotations(&BinaryMask::empty(5, 5).unwrap(), 5).is_empty());

        let mut m = BinaryMask::empty(100, 100).unwrap();
        for r in 10..20 {
            for c in 10..20 {
                m.set(c, r, true);
            }
        }
        let tight = mask_to_annotations(&m, 0);
        assert_eq!(tight, vec![BBox::new(10.0, 10.0, 20.0, 20.0).unwrap()]);
        let grown = mask_to_annotations(&m, 5);
        assert_eq!(grown, vec![BBox::new(5.0, 5.0, 25.0, 25.0).unwrap()]);
        let clamped = mask_to_annotations(&m, 50);
        assert_eq!(clamped, vec![BBox::new(0.0, 0.0, 70.0, 70.0).unwrap()]);
    }
}
