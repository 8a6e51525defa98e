//! Reference lines built from straight and circular pieces.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    /// Unit normal pointing to the left of travel.
    pub fn normal(&self) -> (f64, f64) {
        (-self.heading.sin(), self.heading.cos())
    }

    pub fn tangent(&self) -> (f64, f64) {
        (self.heading.cos(), self.heading.sin())
    }
}

/// One piece of constant curvature (0 for a line, positive turning left).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seg {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub len: f64,
    pub curvature: f64,
}

impl Seg {
    fn pose(&self, u: f64) -> Pose {
        let k = self.curvature;
        if k == 0.0 {
            return Pose {
                x: self.x + u * self.heading.cos(),
                y: self.y + u * self.heading.sin(),
                heading: self.heading,
            };
        }
        let h = self.heading + k * u;
        Pose {
            x: self.x + (h.sin() - self.heading.sin()) / k,
            y: self.y - (h.cos() - self.heading.cos()) / k,
            heading: h,
        }
    }

    fn end(&self) -> Pose {
        self.pose(self.len)
    }

    /// Closest parameter in [0, len] to (px, py).
    fn closest(&self, px: f64, py: f64) -> f64 {
        let k = self.curvature;
        if k == 0.0 {
            let u = (px - self.x) * self.heading.cos() + (py - self.y) * self.heading.sin();
            return u.clamp(0.0, self.len);
        }
        let r = 1.0 / k;
        let cx = self.x - r * self.heading.sin();
        let cy = self.y + r * self.heading.cos();
        let start = (self.y - cy).atan2(self.x - cx);
        let here = (py - cy).atan2(px - cx);
        let swept = wrap_angle(here - start) * k.signum();
        let u = swept * r.abs();
        if (0.0..=self.len).contains(&u) {
            return u;
        }
        // Outside the arc: pick the nearer endpoint.
        let d0 = (px - self.x).hypot(py - self.y);
        let e = self.end();
        let d1 = (px - e.x).hypot(py - e.y);
        if d0 <= d1 {
            0.0
        } else {
            self.len
        }
    }
}

/// A continuous path parameterized by arc length. Beyond either end the path
/// extends along its end tangent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefPath {
    segs: Vec<Seg>,
    starts: Vec<f64>,
    length: f64,
}

impl RefPath {
    pub fn new(segs: Vec<Seg>) -> Self {
        assert!(!segs.is_empty(), "a path needs at least one piece");
        let mut starts = Vec::with_capacity(segs.len());
        let mut acc = 0.0;
        for s in &segs {
            starts.push(acc);
            acc += s.len;
        }
        Self {
            segs,
            starts,
            length: acc,
        }
    }

    pub fn line(x: f64, y: f64, heading: f64, len: f64) -> Self {
        Self::new(vec![Seg {
            x,
            y,
            heading,
            len,
            curvature: 0.0,
        }])
    }

    /// Chains pieces described by (length, curvature) from a start pose.
    pub fn chain(start: Pose, pieces: &[(f64, f64)]) -> Self {
        let mut segs = Vec::with_capacity(pieces.len());
        let mut at = start;
        for &(len, curvature) in pieces {
            let seg = Seg {
                x: at.x,
                y: at.y,
                heading: at.heading,
                len,
                curvature,
            };
            at = seg.end();
            segs.push(seg);
        }
        Self::new(segs)
    }

    /// Concatenates paths; each must start where the previous one ends.
    pub fn concat(parts: &[RefPath]) -> Self {
        Self::new(parts.iter().flat_map(|p| p.segs.iter().cloned()).collect())
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn segs(&self) -> &[Seg] {
        &self.segs
    }

    pub fn start(&self) -> Pose {
        self.pose(0.0)
    }

    pub fn end(&self) -> Pose {
        self.segs.last().expect("non-empty").end()
    }

    pub fn pose(&self, s: f64) -> Pose {
        if s <= 0.0 {
            let first = &self.segs[0];
            let p = first.pose(0.0);
            return Pose {
                x: p.x + s * p.heading.cos(),
                y: p.y + s * p.heading.sin(),
                heading: p.heading,
            };
        }
        if s >= self.length {
            let e = self.end();
            let over = s - self.length;
            return Pose {
                x: e.x + over * e.heading.cos(),
                y: e.y + over * e.heading.sin(),
                heading: e.heading,
            };
        }
        let i = match self.starts.binary_search_by(|v| v.total_cmp(&s)) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        self.segs[i].pose(s - self.starts[i])
    }

    /// Point at station `s` shifted by `lat` to the left.
    pub fn offset_point(&self, s: f64, lat: f64) -> (f64, f64) {
        let p = self.pose(s);
        let (nx, ny) = p.normal();
        (p.x + lat * nx, p.y + lat * ny)
    }

    /// Station and signed lateral offset (left positive) of the closest point,
    /// including the tangent extensions past both ends.
    pub fn project(&self, px: f64, py: f64) -> (f64, f64) {
        let mut best = (f64::INFINITY, 0.0, 0.0);
        let mut consider = |s: f64| {
            let p = self.pose(s);
            let dx = px - p.x;
            let dy = py - p.y;
            let d = dx * dx + dy * dy;
            if d < best.0 {
                let (nx, ny) = p.normal();
                best = (d, s, dx * nx + dy * ny);
            }
        };
        for (seg, start) in self.segs.iter().zip(&self.starts) {
            consider(start + seg.closest(px, py));
        }
        let s0 = self.start();
        let before = (px - s0.x) * s0.heading.cos() + (py - s0.y) * s0.heading.sin();
        if before < 0.0 {
            consider(before);
        }
        let e = self.end();
        let after = (px - e.x) * e.heading.cos() + (py - e.y) * e.heading.sin();
        if after > 0.0 {
            consider(self.length + after);
        }
        (best.1, best.2)
    }

    /// The parallel path `lat` to the left.
    pub fn offset(&self, lat: f64) -> Self {
        Self::new(
            self.segs
                .iter()
                .map(|s| {
                    let scale = 1.0 - s.curvature * lat;
                    Seg {
                        x: s.x - lat * s.heading.sin(),
                        y: s.y + lat * s.heading.cos(),
                        heading: s.heading,
                        len: s.len * scale,
                        curvature: s.curvature / scale,
                    }
                })
                .collect(),
        )
    }

    /// The same curve traversed the other way.
    pub fn reversed(&self) -> Self {
        Self::new(
            self.segs
                .iter()
                .rev()
                .map(|s| {
                    let e = s.end();
                    Seg {
                        x: e.x,
                        y: e.y,
                        heading: wrap_angle(e.heading + PI),
                        len: s.len,
                        curvature: -s.curvature,
                    }
                })
                .collect(),
        )
    }

    /// Station on this path whose projection onto `reference` has station
    /// `target` (bisection; the paths may run either way).
    pub fn station_matching(&self, reference: &RefPath, target: f64) -> f64 {
        let span = self.length.max(1.0);
        let (mut lo, mut hi) = (-span, 2.0 * span);
        let raw = |s: f64| {
            let p = self.pose(s);
            reference.project(p.x, p.y).0 - target
        };
        let dir = if raw(hi) >= raw(lo) { 1.0 } else { -1.0 };
        let f = |s: f64| dir * raw(s);
        if f(lo) > 0.0 || f(hi) < 0.0 {
            return target;
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Points every `step` metres, endpoints included.
    pub fn polyline(&self, step: f64) -> Vec<[f64; 2]> {
        let n = (self.length / step).ceil().max(1.0) as usize;
        (0..=n)
            .map(|i| {
                let p = self.pose(self.length * i as f64 / n as f64);
                [p.x, p.y]
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn wrap_range() {
        assert!(close(wrap_angle(PI), PI));
        assert!(close(wrap_angle(-PI), PI));
        assert!(close(wrap_angle(3.0 * PI / 2.0), -PI / 2.0));
        assert!(close(wrap_angle(0.0), 0.0));
    }

    #[test]
    fn quarter_arc_endpoint() {
        let r = 10.0;
        let p = RefPath::chain(
            Pose {
                x: 0.0,
                y: 0.0,
                heading: 0.0,
            },
            &[(r * PI / 2.0, 1.0 / r)],
        );
        let e = p.end();
        assert!(close(e.x, 10.0) && close(e.y, 10.0) && close(e.heading, PI / 2.0));
    }

    #[test]
    fn project_round_trip() {
        let p = RefPath::chain(
            Pose {
                x: 0.0,
                y: 0.0,
                heading: 0.3,
            },
            &[(50.0, 0.0), (60.0, 1.0 / 80.0), (40.0, 0.0)],
        );
        for &s in &[-5.0, 0.0, 10.0, 49.9, 75.0, 109.0, 140.0, 160.0] {
            for &lat in &[-3.0, 0.0, 2.5] {
                let (x, y) = p.offset_point(s, lat);
                let (s2, lat2) = p.project(x, y);
                assert!((s - s2).abs() < 1e-7, "s {s} vs {s2}");
                assert!((lat - lat2).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn offset_and_reverse() {
        let p = RefPath::chain(
            Pose {
                x: 0.0,
                y: 0.0,
                heading: 0.0,
            },
            &[(20.0, 0.0), (30.0, 1.0 / 50.0)],
        );
        let left = p.offset(2.0);
        let e = left.end();
        let (_, lat) = p.project(e.x, e.y);
        assert!(close(lat, 2.0));
        let back = p.reversed();
        assert!(close(back.length(), p.length()));
        let (bs, be) = (back.start(), p.end());
        assert!(close(bs.x, be.x) && close(bs.y, be.y));
        assert!(close(wrap_angle(bs.heading - be.heading - PI), 0.0));
    }
}
