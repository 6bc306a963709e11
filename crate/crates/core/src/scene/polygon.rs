//! Planar polygon helpers shared by scenes and affordance masks.

use crate::geometry::Point2;

pub fn signed_area(poly: &[Point2]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    acc / 2.0
}

pub fn area(poly: &[Point2]) -> f64 {
    signed_area(poly).abs()
}

/// Area centroid; falls back to the vertex mean for degenerate input.
pub fn centroid(poly: &[Point2]) -> Point2 {
    let a = signed_area(poly);
    let n = poly.len();
    if a.abs() < 1e-12 || n < 3 {
        let (sx, sy) = poly.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
        let n = n.max(1) as f64;
        return Point2::new(sx / n, sy / n);
    }
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        let cross = p.x * q.y - q.x * p.y;
        cx += (p.x + q.x) * cross;
        cy += (p.y + q.y) * cross;
    }
    Point2::new(cx / (6.0 * a), cy / (6.0 * a))
}

/// Axis-aligned bounds as `(min, max)`.
pub fn bounds(poly: &[Point2]) -> (Point2, Point2) {
    let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in poly {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    (lo, hi)
}

/// Even-odd crossing test. Boundary points may land on either side.
pub fn contains(poly: &[Point2], p: Point2) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n.wrapping_sub(1);
    for i in 0..n {
        let a = poly[i];
        let b = poly[j];
        if (a.y > p.y) != (b.y > p.y) {
            let x = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn on_segment(a: Point2, b: Point2, p: Point2) -> bool {
    let cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    if cross != 0.0 {
        return false;
    }
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

pub fn on_boundary(poly: &[Point2], p: Point2) -> bool {
    let n = poly.len();
    (0..n).any(|i| on_segment(poly[i], poly[(i + 1) % n], p))
}

/// Inside and not on an edge.
pub fn contains_strict(poly: &[Point2], p: Point2) -> bool {
    !on_boundary(poly, p) && contains(poly, p)
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn segments_intersect(p1: Point2, p2: Point2, q1: Point2, q2: Point2) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// No two non-adjacent edges touch and no vertex repeats.
pub fn is_simple(poly: &[Point2]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if poly[i] == poly[j] {
                return false;
            }
        }
    }
    for i in 0..n {
        let (a1, a2) = (poly[i], poly[(i + 1) % n]);
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            let (b1, b2) = (poly[j], poly[(j + 1) % n]);
            if segments_intersect(a1, a2, b1, b2) {
                return false;
            }
        }
    }
    true
}

/// Clips `poly` against an axis-aligned box (Sutherland-Hodgman).
pub fn clip_to_box(poly: &[Point2], lo: Point2, hi: Point2) -> Vec<Point2> {
    let mut out = poly.to_vec();
    // (axis, bound, keep_greater)
    let planes = [(0, lo.x, true), (0, hi.x, false), (1, lo.y, true), (1, hi.y, false)];
    for (axis, bound, keep_greater) in planes {
        if out.is_empty() {
            break;
        }
        let coord = |p: &Point2| if axis == 0 { p.x } else { p.y };
        let inside = |p: &Point2| if keep_greater { coord(p) >= bound } else { coord(p) <= bound };
        let input = std::mem::take(&mut out);
        let n = input.len();
        for i in 0..n {
            let cur = input[i];
            let prev = input[(i + n - 1) % n];
            let (ci, pi) = (inside(&cur), inside(&prev));
            if ci != pi {
                let t = (bound - coord(&prev)) / (coord(&cur) - coord(&prev));
                out.push(Point2::new(prev.x + t * (cur.x - prev.x), prev.y + t * (cur.y - prev.y)));
            }
            if ci {
                out.push(cur);
            }
        }
    }
    out
}
