//! Fixtures and independent reference implementations shared by the
//! integration tests. Nothing here calls into the library's metric or
//! geometry code; oracles are written from the definitions.
#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::BTreeSet;

use num::BigInt;
use pedet::metrics::GroundTruthBox;
use pedet::{BBox, Detection};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Gen(ChaCha8Rng);

impl Gen {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uniform in [0, 1).
    pub fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in 0..n.
    pub fn below(&mut self, n: usize) -> usize {
        ((self.0.next_u64() as u128 * n as u128) >> 64) as usize
    }

    pub fn range(&mut self, lo: usize, hi_inclusive: usize) -> usize {
        lo + self.below(hi_inclusive - lo + 1)
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    pub fn pick<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.below(items.len())]
    }

    /// Score from a coarse grid so that ties are common.
    pub fn coarse_score(&mut self) -> f64 {
        self.range(1, 20) as f64 / 20.0
    }

    /// Integer-cornered box inside `extent`, at least one pixel on a side.
    pub fn grid_box(&mut self, extent: usize) -> BBox {
        let x0 = self.below(extent - 1);
        let y0 = self.below(extent - 1);
        let x1 = self.range(x0 + 1, extent);
        let y1 = self.range(y0 + 1, extent);
        BBox::new(x0 as f64, y0 as f64, x1 as f64, y1 as f64).unwrap()
    }

    /// A box near `b`, shifted by up to `jitter` on each coordinate.
    pub fn near_box(&mut self, b: &BBox, jitter: usize, extent: usize) -> BBox {
        let mut shift = |v: f64| {
            let d = self.below(2 * jitter + 1) as f64 - jitter as f64;
            (v + d).clamp(0.0, extent as f64)
        };
        let (mut x0, mut y0, mut x1, mut y1) = (shift(b.x_min), shift(b.y_min), shift(b.x_max), shift(b.y_max));
        if x1 <= x0 {
            (x0, x1) = (x0.min(x1), x0.max(x1) + 1.0);
        }
        if y1 <= y0 {
            (y0, y1) = (y0.min(y1), y0.max(y1) + 1.0);
        }
        BBox::new(x0, y0, x1, y1).unwrap()
    }
}

pub fn bx(v: [f64; 4]) -> BBox {
    BBox::try_from(v).unwrap()
}

pub fn det(image: &str, model: &str, class_id: u32, b: BBox, score: f64) -> Detection {
    Detection::new(image, model, class_id, b, score).unwrap()
}

pub fn gt(image: &str, class_id: u32, b: BBox) -> GroundTruthBox {
    GroundTruthBox {
        image_id: image.into(),
        class_id,
        bbox: b,
    }
}

/// Random detection problem: up to `max_images` images, up to `max_gt`
/// ground-truth boxes and `max_pred` predictions per image, two classes,
/// coarse scores. Predictions are mostly perturbed copies of ground truth.
pub fn random_detection_problem(
    g: &mut Gen,
    max_images: usize,
    max_gt: usize,
    max_pred: usize,
) -> (Vec<Detection>, Vec<GroundTruthBox>) {
    let extent = 24;
    let mut preds = Vec::new();
    let mut gts = Vec::new();
    for i in 0..g.range(1, max_images) {
        let image = format!("img{i}");
        let mut here = Vec::new();
        for _ in 0..g.range(0, max_gt) {
            let b = g.grid_box(extent);
            let c = g.below(2) as u32;
            here.push((c, b));
            gts.push(gt(&image, c, b));
        }
        for _ in 0..g.range(0, max_pred) {
            let (c, b) = if !here.is_empty() && g.chance(0.7) {
                let (c, b) = *g.pick(&here);
                (c, g.near_box(&b, 3, extent))
            } else {
                (g.below(2) as u32, g.grid_box(extent))
            };
            let model = *g.pick(&["a", "b"]);
            preds.push(det(&image, model, c, b, g.coarse_score()));
        }
    }
    (preds, gts)
}

// ---------------------------------------------------------------- geometry

pub fn oracle_iou(a: &BBox, b: &BBox) -> f64 {
    let w = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let h = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = w * h;
    let area = |r: &BBox| (r.x_max - r.x_min) * (r.y_max - r.y_min);
    let union = area(a) + area(b) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Score descending, then model, box corners, image and class.
pub fn oracle_rank(a: &Detection, b: &Detection) -> Ordering {
    let corners = |d: &Detection| [d.bbox.x_min, d.bbox.y_min, d.bbox.x_max, d.bbox.y_max];
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.model_id.cmp(&b.model_id))
        .then_with(|| {
            corners(a)
                .iter()
                .zip(corners(b).iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
        .then_with(|| a.image_id.cmp(&b.image_id))
        .then_with(|| a.class_id.cmp(&b.class_id))
}

// ------------------------------------------------------------------ metrics

/// Probability that a random positive outscores a random negative, ties
/// counted as one half, by enumerating every pair.
pub fn oracle_auroc(data: &[(f64, bool)]) -> f64 {
    let pos: Vec<f64> = data.iter().filter(|d| d.1).map(|d| d.0).collect();
    let neg: Vec<f64> = data.iter().filter(|d| !d.1).map(|d| d.0).collect();
    let mut twice_wins = 0u64;
    for p in &pos {
        for n in &neg {
            twice_wins += match p.partial_cmp(n).unwrap() {
                Ordering::Greater => 2,
                Ordering::Equal => 1,
                Ordering::Less => 0,
            };
        }
    }
    twice_wins as f64 / (2 * pos.len() * neg.len()) as f64
}

/// Greedy matching: in rank order each prediction claims the unclaimed
/// same-image, same-class ground truth of highest IoU (first listed on ties)
/// when that IoU exceeds `t`. Returns the number of true positives.
pub fn oracle_true_positives(preds: &[&Detection], gts: &[&GroundTruthBox], t: f64) -> usize {
    let mut order: Vec<&Detection> = preds.to_vec();
    order.sort_by(|a, b| oracle_rank(a, b));
    let mut used = vec![false; gts.len()];
    let mut tp = 0;
    for p in order {
        let mut best: Option<(usize, f64)> = None;
        for (j, g) in gts.iter().enumerate() {
            if used[j] || g.image_id != p.image_id || g.class_id != p.class_id {
                continue;
            }
            let v = oracle_iou(&p.bbox, &g.bbox);
            if v > t && best.is_none_or(|(_, b)| v > b) {
                best = Some((j, v));
            }
        }
        if let Some((j, _)) = best {
            used[j] = true;
            tp += 1;
        }
    }
    tp
}

/// AP of one class by sweeping every distinct score threshold, re-matching
/// the surviving predictions from scratch at each, and integrating the
/// monotone precision envelope over recall.
pub fn oracle_class_ap(preds: &[Detection], gts: &[GroundTruthBox], class_id: u32, t: f64) -> f64 {
    let p: Vec<&Detection> = preds.iter().filter(|d| d.class_id == class_id).collect();
    let g: Vec<&GroundTruthBox> = gts.iter().filter(|d| d.class_id == class_id).collect();
    assert!(!g.is_empty());
    let mut thresholds: Vec<f64> = p.iter().map(|d| d.score).collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();

    let mut points = Vec::new(); // (recall, precision), recall nondecreasing
    for &s in &thresholds {
        let kept: Vec<&Detection> = p.iter().copied().filter(|d| d.score >= s).collect();
        let tp = oracle_true_positives(&kept, &g, t);
        points.push((tp as f64 / g.len() as f64, tp as f64 / kept.len() as f64));
    }
    let mut ap = 0.0;
    let mut prev = 0.0;
    for (k, &(r, _)) in points.iter().enumerate() {
        let best = points[k..].iter().map(|q| q.1).fold(0.0, f64::max);
        ap += (r - prev) * best;
        prev = r;
    }
    ap
}

/// Mean of [`oracle_class_ap`] over the classes that have ground truth.
pub fn oracle_map(preds: &[Detection], gts: &[GroundTruthBox], t: f64) -> f64 {
    let classes: BTreeSet<u32> = gts.iter().map(|g| g.class_id).collect();
    classes.iter().map(|&c| oracle_class_ap(preds, gts, c, t)).sum::<f64>() / classes.len() as f64
}

// ------------------------------------------------------------------ imaging

/// Otsu by exhaustive search with exact big-integer arithmetic.
/// Background is levels `<= tau`; the lowest maximizing `tau` wins. `None`
/// when only one level is occupied.
///
/// Between-class variance is `w0 w1 (mu0 - mu1)^2`, which for class counts
/// `n0, n1` and level sums `s0, s1` over `N` pixels equals
/// `(s0 n1 - s1 n0)^2 / (N^2 n0 n1)`. Candidates are compared as fractions.
pub fn oracle_otsu(hist: &[u64; 256]) -> Option<u8> {
    let total: u64 = hist.iter().sum();
    let mut best: Option<(u8, BigInt, BigInt)> = None;
    for tau in 0..255usize {
        let n0: u64 = hist[..=tau].iter().sum();
        let n1 = total - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let s0: u64 = hist[..=tau].iter().enumerate().map(|(l, &c)| l as u64 * c).sum();
        let s1: u64 = hist[tau + 1..].iter().enumerate().map(|(l, &c)| (l + tau + 1) as u64 * c).sum();
        let diff = BigInt::from(s0) * BigInt::from(n1) - BigInt::from(s1) * BigInt::from(n0);
        let num = &diff * &diff;
        let den = BigInt::from(total) * BigInt::from(total) * BigInt::from(n0) * BigInt::from(n1);
        let better = match &best {
            None => true,
            Some((_, bn, bd)) => &num * bd > bn * &den,
        };
        if better {
            best = Some((tau as u8, num, den));
        }
    }
    best.map(|(t, _, _)| t)
}

/// 8-connected component labels by iterative flood fill; 0 is background
/// and labels count up from 1 in scan order of each component's first pixel.
pub fn flood_fill_labels(width: usize, height: usize, bits: &[bool]) -> Vec<usize> {
    let mut labels = vec![0usize; bits.len()];
    let mut next = 0;
    for start in 0..bits.len() {
        if !bits[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        let mut stack = vec![start];
        labels[start] = next;
        while let Some(i) = stack.pop() {
            let (c, r) = ((i % width) as i64, (i / width) as i64);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (nc, nr) = (c + dc, r + dr);
                    if nc < 0 || nr < 0 || nc >= width as i64 || nr >= height as i64 {
                        continue;
                    }
                    let j = nr as usize * width + nc as usize;
                    if bits[j] && labels[j] == 0 {
                        labels[j] = next;
                        stack.push(j);
                    }
                }
            }
        }
    }
    labels
}

/// Random binary mask made of a few blobs plus speckle.
pub fn random_mask_bits(g: &mut Gen, width: usize, height: usize) -> Vec<bool> {
    let mut bits = vec![false; width * height];
    for _ in 0..g.range(0, 4) {
        let (cx, cy) = (g.below(width), g.below(height));
        let (rx, ry) = (g.range(0, 3), g.range(0, 3));
        for y in cy.saturating_sub(ry)..(cy + ry + 1).min(height) {
            for x in cx.saturating_sub(rx)..(cx + rx + 1).min(width) {
                bits[y * width + x] = true;
            }
        }
    }
    for _ in 0..g.range(0, 6) {
        let i = g.below(bits.len());
        bits[i] = true;
    }
    bits
}
