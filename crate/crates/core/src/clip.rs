//! Small fixed-capacity convex polygons and Sutherland-Hodgman clipping.

use crate::mesh::Point;

const CAP: usize = 24;

/// Convex polygon with counterclockwise vertices, stored inline.
#[derive(Clone, Copy, Debug)]
pub struct Polygon {
    pts: [Point; CAP],
    len: usize,
}

impl Default for Polygon {
    fn default() -> Self {
        Polygon {
            pts: [[0.0; 2]; CAP],
            len: 0,
        }
    }
}

impl Polygon {
    pub fn from_slice(pts: &[Point]) -> Self {
        let mut p = Polygon::default();
        for &q in pts {
            p.push(q);
        }
        p
    }

    pub fn rectangle(lo: Point, hi: Point) -> Self {
        Polygon::from_slice(&[lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]])
    }

    #[inline]
    fn push(&mut self, q: Point) {
        assert!(self.len < CAP, "polygon capacity exceeded");
        self.pts[self.len] = q;
        self.len += 1;
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn points(&self) -> &[Point] {
        &self.pts[..self.len]
    }

    /// Signed (shoelace) area.
    pub fn area(&self) -> f64 {
        let p = self.points();
        let mut s = 0.0;
        for i in 0..p.len() {
            let a = p[i];
            let b = p[(i + 1) % p.len()];
            s += a[0] * b[1] - a[1] * b[0];
        }
        0.5 * s
    }

    pub fn bbox(&self) -> [Point; 2] {
        let p = self.points();
        let mut lo = p[0];
        let mut hi = p[0];
        for q in &p[1..] {
            lo = [lo[0].min(q[0]), lo[1].min(q[1])];
            hi = [hi[0].max(q[0]), hi[1].max(q[1])];
        }
        [lo, hi]
    }

    /// Keeps the part of the polygon left of the directed line `a -> b`.
    /// Vertices within `eps` of the line count as inside.
    pub fn clip_halfplane(&self, a: Point, b: Point, eps: f64) -> Polygon {
        let mut out = Polygon::default();
        if self.len == 0 {
            return out;
        }
        let d = [b[0] - a[0], b[1] - a[1]];
        let norm = (d[0] * d[0] + d[1] * d[1]).sqrt();
        let dist = |p: Point| (d[0] * (p[1] - a[1]) - d[1] * (p[0] - a[0])) / norm;
        let p = self.points();
        let n = p.len();
        let mut s_cur = dist(p[0]);
        for i in 0..n {
            let cur = p[i];
            let next = p[(i + 1) % n];
            let s_next = dist(next);
            let in_cur = s_cur >= -eps;
            let in_next = s_next >= -eps;
            if in_cur {
                out.push_dedup(cur, eps);
            }
            if in_cur != in_next && (s_cur - s_next).abs() > 0.0 {
                let t = s_cur / (s_cur - s_next);
                if t > 0.0 && t < 1.0 {
                    out.push_dedup(
                        [
                            cur[0] + t * (next[0] - cur[0]),
                            cur[1] + t * (next[1] - cur[1]),
                        ],
                        eps,
                    );
                }
            }
            s_cur = s_next;
        }
        if out.len > 1 {
            let (f, l) = (out.pts[0], out.pts[out.len - 1]);
            if (f[0] - l[0]).abs() <= eps && (f[1] - l[1]).abs() <= eps {
                out.len -= 1;
            }
        }
        out
    }

    fn push_dedup(&mut self, q: Point, eps: f64) {
        if self.len > 0 {
            let l = self.pts[self.len - 1];
            if (l[0] - q[0]).abs() <= eps && (l[1] - q[1]).abs() <= eps {
                return;
            }
        }
        self.push(q);
    }

    /// Intersection with a counterclockwise convex polygon.
    pub fn clip_convex(&self, clip: &[Point], eps: f64) -> Polygon {
        let mut out = *self;
        for i in 0..clip.len() {
            if out.len < 3 {
                out.len = 0;
                break;
            }
            out = out.clip_halfplane(clip[i], clip[(i + 1) % clip.len()], eps);
        }
        if out.len < 3 {
            out.len = 0;
        }
        out
    }
}
