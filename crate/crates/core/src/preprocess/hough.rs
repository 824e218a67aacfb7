//! Circular and linear Hough transforms over binary edge maps.
//!
//! Circle votes are quantized at 1 px in center and radius: an edge pixel at
//! Euclidean distance `d` from an integer center votes for radius `round(d)`.
//! Accumulation is integer-only, so totals do not depend on enumeration order
//! or on how the radius range is split across threads.

use std::f64::consts::PI;

use crate::error::{IrisError, Result};
use crate::exec;
use crate::preprocess::canny::EdgeMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

impl Circle {
    pub fn new(cx: f64, cy: f64, r: f64) -> Self {
        Circle { cx, cy, r }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (x - self.cx).hypot(y - self.cy) < self.r
    }
}

/// A line in normal form `x cos(theta) + y sin(theta) = rho`, image coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSeg {
    pub rho: f64,
    pub theta: f64,
    pub votes: u32,
}

impl LineSeg {
    /// Signed distance of `(x, y)` from the line.
    pub fn signed_distance(&self, x: f64, y: f64) -> f64 {
        x * self.theta.cos() + y * self.theta.sin() - self.rho
    }
}

/// Half-open pixel rectangle `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Rect {
    pub fn new(x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> usize {
        self.x1.saturating_sub(self.x0)
    }

    pub fn height(&self) -> usize {
        self.y1.saturating_sub(self.y0)
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    /// Intersection with a `w x h` image.
    pub fn clip(&self, w: usize, h: usize) -> Rect {
        Rect {
            x0: self.x0.min(w),
            y0: self.y0.min(h),
            x1: self.x1.min(w),
            y1: self.y1.min(h),
        }
    }

    /// Rectangle covering `[c - half, c + half]` in both axes, clipped to the image.
    pub fn around(cx: f64, cy: f64, half: f64, w: usize, h: usize) -> Rect {
        let lo = |c: f64| (c - half).ceil().max(0.0) as usize;
        let hi = |c: f64| ((c + half).floor() + 1.0).max(0.0) as usize;
        Rect::new(lo(cx), lo(cy), hi(cx), hi(cy)).clip(w, h)
    }
}

/// Circle search parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleSearch {
    pub r_min: usize,
    pub r_max: usize,
    /// Restricts candidate centers; defaults to the whole image.
    pub center_window: Option<Rect>,
    /// Minimum votes as a fraction of the expected perimeter `2 pi r`.
    pub vote_floor_ratio: f64,
}

impl CircleSearch {
    pub fn new(r_min: usize, r_max: usize) -> Self {
        CircleSearch {
            r_min,
            r_max,
            center_window: None,
            vote_floor_ratio: 0.4,
        }
    }
}

/// Winning accumulator cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CircleVote {
    pub cx: usize,
    pub cy: usize,
    pub r: usize,
    pub votes: u32,
}

impl CircleVote {
    pub fn circle(&self) -> Circle {
        Circle::new(self.cx as f64, self.cy as f64, self.r as f64)
    }
}

/// Integer offsets `(dx, dy)` with `round(hypot(dx, dy)) == r`.
fn ring_offsets(r: usize) -> Vec<(isize, isize)> {
    let r = r as isize;
    let lo = (2 * r - 1) * (2 * r - 1);
    let hi = (2 * r + 1) * (2 * r + 1);
    let mut out = Vec::new();
    for dy in -r - 1..=r + 1 {
        for dx in -r - 1..=r + 1 {
            let d4 = 4 * (dx * dx + dy * dy);
            if d4 >= lo && d4 < hi {
                out.push((dx, dy));
            }
        }
    }
    out
}

/// Radius bin of an integer displacement: the `r` with `(2r-1)^2 <= 4 d^2 < (2r+1)^2`.
#[inline]
fn radius_bin(d2: i64) -> i64 {
    let mut r = ((d2 as f64).sqrt() + 0.5).floor() as i64;
    // guard against floating rounding at the bin boundary
    while r > 0 && 4 * d2 < (2 * r - 1) * (2 * r - 1) {
        r -= 1;
    }
    while 4 * d2 >= (2 * r + 1) * (2 * r + 1) {
        r += 1;
    }
    r
}

fn edge_points(edges: &EdgeMap) -> Vec<(usize, usize)> {
    let w = edges.width();
    edges
        .cells()
        .iter()
        .enumerate()
        .filter(|(_, &on)| on)
        .map(|(i, _)| (i % w, i / w))
        .collect()
}

/// Best cell of one radius slice, scanning `cy` then `cx` ascending and
/// keeping the first strict maximum.
fn best_in_slice(acc: &[u32], window: Rect, r: usize) -> CircleVote {
    let ww = window.width();
    let mut best = CircleVote {
        cx: window.x0,
        cy: window.y0,
        r,
        votes: 0,
    };
    for (i, &v) in acc.iter().enumerate() {
        if v > best.votes {
            best = CircleVote {
                cx: window.x0 + i % ww,
                cy: window.y0 + i / ww,
                r,
                votes: v,
            };
        }
    }
    best
}

/// Picks the maximum over radius slices; ties keep the smallest radius.
fn reduce_slices(slices: impl IntoIterator<Item = CircleVote>) -> Option<CircleVote> {
    let mut best: Option<CircleVote> = None;
    for s in slices {
        match best {
            Some(b) if s.votes <= b.votes => {}
            _ => best = Some(s),
        }
    }
    best
}

/// Radius-major voting: every edge stamps the ring of centers at each radius.
fn vote_by_rings(points: &[(usize, usize)], window: Rect, r_min: usize, r_max: usize) -> Option<CircleVote> {
    let ww = window.width();
    let slices = exec::map_range(r_min..r_max + 1, |r| {
        let offsets = ring_offsets(r);
        let mut acc = vec![0u32; window.area()];
        for &(ex, ey) in points {
            for &(dx, dy) in &offsets {
                let cx = ex as isize - dx;
                let cy = ey as isize - dy;
                if cx < window.x0 as isize
                    || cy < window.y0 as isize
                    || cx >= window.x1 as isize
                    || cy >= window.y1 as isize
                {
                    continue;
                }
                acc[(cy as usize - window.y0) * ww + (cx as usize - window.x0)] += 1;
            }
        }
        best_in_slice(&acc, window, r)
    });
    reduce_slices(slices)
}

/// Center-major voting: every (edge, center) pair votes once for its radius
/// bin. Cheaper than ring stamping when the center window is small.
fn vote_by_centers(points: &[(usize, usize)], window: Rect, r_min: usize, r_max: usize) -> Option<CircleVote> {
    let nr = r_max - r_min + 1;
    let area = window.area();
    let ww = window.width();
    let mut acc = vec![0u32; nr * area];
    for &(ex, ey) in points {
        for cy in window.y0..window.y1 {
            let dy = ey as i64 - cy as i64;
            for cx in window.x0..window.x1 {
                let dx = ex as i64 - cx as i64;
                let r = radius_bin(dx * dx + dy * dy);
                if r < r_min as i64 || r > r_max as i64 {
                    continue;
                }
                let slot = (r as usize - r_min) * area + (cy - window.y0) * ww + (cx - window.x0);
                acc[slot] += 1;
            }
        }
    }
    reduce_slices(
        acc.chunks(area)
            .enumerate()
            .map(|(k, slice)| best_in_slice(slice, window, r_min + k)),
    )
}

fn check_search(search: &CircleSearch) -> Result<()> {
    if search.r_min == 0 || search.r_min >= search.r_max {
        return Err(IrisError::InvalidArgument(format!(
            "radius range must satisfy 0 < r_min < r_max, got [{}, {}]",
            search.r_min, search.r_max
        )));
    }
    Ok(())
}

/// Full circle search returning the winning accumulator cell.
pub fn hough_circle_with(edges: &EdgeMap, search: &CircleSearch) -> Result<CircleVote> {
    check_search(search)?;
    let window = search
        .center_window
        .unwrap_or(Rect::new(0, 0, edges.width(), edges.height()))
        .clip(edges.width(), edges.height());
    let points = edge_points(edges);
    if points.is_empty() {
        return Err(IrisError::NoCircleFound("edge map is empty".into()));
    }
    if window.area() == 0 {
        return Err(IrisError::NoCircleFound("center window is empty".into()));
    }
    let ring_cost: usize = (search.r_min..=search.r_max)
        .map(|r| (2.0 * PI * r as f64) as usize + 1)
        .sum();
    let best = if window.area() < ring_cost {
        vote_by_centers(&points, window, search.r_min, search.r_max)
    } else {
        vote_by_rings(&points, window, search.r_min, search.r_max)
    };
    let best = best.ok_or_else(|| IrisError::NoCircleFound("no votes".into()))?;
    let floor = search.vote_floor_ratio * 2.0 * PI * best.r as f64;
    if best.votes == 0 || (best.votes as f64) < floor {
        return Err(IrisError::NoCircleFound(format!(
            "best cell ({}, {}, r={}) has {} votes, floor is {:.1}",
            best.cx, best.cy, best.r, best.votes, floor
        )));
    }
    Ok(best)
}

/// Strongest circle with radius in `[r_min, r_max]`, centers anywhere in the image.
pub fn hough_circle(edges: &EdgeMap, r_min: usize, r_max: usize) -> Result<Circle> {
    hough_circle_with(edges, &CircleSearch::new(r_min, r_max)).map(|v| v.circle())
}

pub const THETA_BINS: usize = 180;

/// Strongest line through the edge pixels inside `region`, if it reaches
/// `min_votes`. Theta is quantized at 1 degree in `[0, pi)` and rho at 1 px;
/// ties keep the smallest theta, then the smallest rho.
pub fn hough_line(edges: &EdgeMap, region: Rect, min_votes: u32) -> Option<LineSeg> {
    let region = region.clip(edges.width(), edges.height());
    let points: Vec<(usize, usize)> = (region.y0..region.y1)
        .flat_map(|y| (region.x0..region.x1).map(move |x| (x, y)))
        .filter(|&(x, y)| edges.get(x, y))
        .collect();
    if points.is_empty() {
        return None;
    }
    let diag = ((edges.width() * edges.width() + edges.height() * edges.height()) as f64)
        .sqrt()
        .ceil() as isize;
    let nrho = (2 * diag + 1) as usize;
    let trig: Vec<(f64, f64)> = (0..THETA_BINS)
        .map(|k| {
            let t = k as f64 * PI / THETA_BINS as f64;
            (t.cos(), t.sin())
        })
        .collect();
    let mut acc = vec![0u32; THETA_BINS * nrho];
    for &(x, y) in &points {
        for (k, &(c, s)) in trig.iter().enumerate() {
            let rho = (x as f64 * c + y as f64 * s).round() as isize;
            acc[k * nrho + (rho + diag) as usize] += 1;
        }
    }
    let (mut best_i, mut best_v) = (0usize, 0u32);
    for (i, &v) in acc.iter().enumerate() {
        if v > best_v {
            best_i = i;
            best_v = v;
        }
    }
    if best_v == 0 || best_v < min_votes {
        return None;
    }
    let k = best_i / nrho;
    let rho = (best_i % nrho) as isize - diag;
    Some(LineSeg {
        rho: rho as f64,
        theta: k as f64 * PI / THETA_BINS as f64,
        votes: best_v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Mask;
    use proptest::prelude::*;

    fn ring(w: usize, h: usize, cx: f64, cy: f64, r: f64) -> EdgeMap {
        let mut m = Mask::empty(w, h);
        let steps = (2.0 * PI * r * 2.0) as usize;
        for k in 0..steps {
            let t = 2.0 * PI * k as f64 / steps as f64;
            let x = (cx + r * t.cos()).round();
            let y = (cy + r * t.sin()).round();
            if x >= 0.0 && y >= 0.0 && (x as usize) < w && (y as usize) < h {
                m.set(x as usize, y as usize, true);
            }
        }
        m
    }

    #[test]
    fn finds_rasterized_ring() {
        let e = ring(128, 128, 64.0, 64.0, 30.0);
        let c = hough_circle(&e, 20, 40).unwrap();
        assert!((c.cx - 64.0).abs() <= 1.0);
        assert!((c.cy - 64.0).abs() <= 1.0);
        assert!((c.r - 30.0).abs() <= 1.0);
    }

    #[test]
    fn empty_map_is_no_circle() {
        let e = Mask::empty(50, 50);
        assert!(matches!(
            hough_circle(&e, 5, 10),
            Err(IrisError::NoCircleFound(_))
        ));
    }

    #[test]
    fn sparse_noise_is_below_floor() {
        let mut e = Mask::empty(64, 64);
        e.set(3, 3, true);
        e.set(40, 20, true);
        assert!(matches!(
            hough_circle(&e, 10, 20),
            Err(IrisError::NoCircleFound(_))
        ));
    }

    #[test]
    fn bad_radius_range() {
        let e = ring(64, 64, 32.0, 32.0, 10.0);
        assert!(hough_circle(&e, 0, 10).is_err());
        assert!(hough_circle(&e, 12, 12).is_err());
    }

    #[test]
    fn range_excludes_outer_ring() {
        let mut e = ring(160, 160, 80.0, 80.0, 25.0);
        e.union_with(&ring(160, 160, 80.0, 80.0, 60.0));
        let c = hough_circle(&e, 20, 40).unwrap();
        assert_eq!((c.cx, c.cy), (80.0, 80.0));
        assert!((c.r - 25.0).abs() <= 1.0);
    }

    #[test]
    fn both_voting_routes_agree() {
        let mut e = ring(96, 96, 47.3, 50.6, 21.0);
        e.union_with(&ring(96, 96, 30.0, 40.0, 12.0));
        for &(x, y) in &[(5usize, 7usize), (90, 3), (60, 60), (11, 80)] {
            e.set(x, y, true);
        }
        let pts = edge_points(&e);
        for window in [Rect::new(0, 0, 96, 96), Rect::new(35, 40, 60, 62)] {
            let a = vote_by_rings(&pts, window, 8, 26).unwrap();
            let b = vote_by_centers(&pts, window, 8, 26).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn radius_bin_matches_rounding() {
        for d2 in 0..20_000i64 {
            let expected = ((d2 as f64).sqrt()).round() as i64;
            assert_eq!(radius_bin(d2), expected, "d2 = {d2}");
        }
    }

    #[test]
    fn horizontal_line_detected() {
        let mut e = Mask::empty(100, 60);
        for x in 20..70 {
            e.set(x, 30, true);
        }
        let l = hough_line(&e, Rect::new(0, 0, 100, 60), 25).unwrap();
        assert!((l.theta - PI / 2.0).abs() < 1e-12);
        assert_eq!(l.rho, 30.0);
        assert!(l.votes >= 45);
    }

    #[test]
    fn scattered_pixels_are_not_a_line() {
        let mut e = Mask::empty(100, 60);
        e.set(10, 10, true);
        e.set(50, 40, true);
        e.set(80, 5, true);
        assert!(hough_line(&e, Rect::new(0, 0, 100, 60), 25).is_none());
        assert!(hough_line(&Mask::empty(10, 10), Rect::new(0, 0, 10, 10), 1).is_none());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn translation_equivariant(
            cx in 30.0f64..50.0, cy in 30.0f64..50.0, r in 14.0f64..22.0,
            dx in -8i32..8, dy in -8i32..8,
        ) {
            let base = ring(100, 100, cx, cy, r);
            let mut shifted = Mask::empty(100, 100);
            for y in 0..100 {
                for x in 0..100 {
                    if base.get(x, y) {
                        shifted.set((x as i32 + dx) as usize, (y as i32 + dy) as usize, true);
                    }
                }
            }
            let a = hough_circle(&base, 10, 26).unwrap();
            let b = hough_circle(&shifted, 10, 26).unwrap();
            prop_assert_eq!(b.cx - a.cx, dx as f64);
            prop_assert_eq!(b.cy - a.cy, dy as f64);
            prop_assert_eq!(a.r, b.r);
        }

        #[test]
        fn order_independent(seed in 0u64..1000) {
            // same edge set built in a different insertion order
            let base = ring(80, 80, 40.5, 39.2, 15.0);
            let mut pts = edge_points(&base);
            let n = pts.len();
            pts.rotate_left((seed as usize) % n);
            pts.reverse();
            let a = vote_by_rings(&edge_points(&base), Rect::new(0, 0, 80, 80), 10, 20);
            let b = vote_by_rings(&pts, Rect::new(0, 0, 80, 80), 10, 20);
            prop_assert_eq!(a, b);
            let c = vote_by_centers(&pts, Rect::new(0, 0, 80, 80), 10, 20);
            prop_assert_eq!(a, c);
        }
    }
}
