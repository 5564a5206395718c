//! Oriented bounding boxes and the split/face arithmetic on them.

use serde::{Deserialize, Serialize};

use crate::geom::{Vec2, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scope {
    pub origin: Vec3,
    /// Right-handed orthonormal axes `x`, `y`, `z`.
    pub axes: [Vec3; 3],
    pub size: [f64; 3],
}

/// Requested size of one split part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitSize {
    Absolute(f64),
    /// `~w`: shares the remainder by weight.
    Floating(f64),
}

/// Which face of a box a `comp(f)` part came from, in box-local terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxFace {
    MinZ,
    MaxZ,
    MinX,
    MaxX,
    MaxY,
    MinY,
}

impl Scope {
    pub fn flat_axis(&self) -> Option<usize> {
        let flat: Vec<usize> = (0..3).filter(|&i| self.size[i] == 0.0).collect();
        match flat.as_slice() {
            [one] => Some(*one),
            _ => None,
        }
    }

    pub fn translated(&self, d: [f64; 3]) -> Scope {
        let mut s = *self;
        for (axis, amount) in self.axes.iter().zip(d) {
            s.origin = s.origin + *axis * amount;
        }
        s
    }

    /// Sub-scope covering `[start, start + len]` along `axis`.
    pub fn slice(&self, axis: usize, start: f64, len: f64) -> Scope {
        let mut s = *self;
        s.origin = self.origin + self.axes[axis] * start;
        s.size[axis] = len;
        s
    }

    /// Extrusion of a flat scope along its flat axis. Negative heights go
    /// against the axis direction (an inset for faces).
    pub fn extruded(&self, axis: usize, h: f64) -> Scope {
        let mut s = *self;
        if h < 0.0 {
            s.origin = self.origin + self.axes[axis] * h;
        }
        s.size[axis] = h.abs();
        s
    }

    pub fn corners(&self) -> [Vec3; 8] {
        let [x, y, z] = self.axes;
        let [sx, sy, sz] = self.size;
        let mut out = [self.origin; 8];
        for (i, c) in out.iter_mut().enumerate() {
            let fx = (i & 1) as f64 * sx;
            let fy = ((i >> 1) & 1) as f64 * sy;
            let fz = ((i >> 2) & 1) as f64 * sz;
            *c = self.origin + x * fx + y * fy + z * fz;
        }
        out
    }

    pub fn center(&self) -> Vec3 {
        let [x, y, z] = self.axes;
        self.origin + x * (self.size[0] / 2.0) + y * (self.size[1] / 2.0) + z * (self.size[2] / 2.0)
    }

    pub fn ground_center(&self) -> Vec2 {
        self.center().ground()
    }

    /// The six faces of a box as flat scopes whose `z` axis is the outward
    /// normal and whose `y` axis is up for side faces.
    pub fn faces(&self) -> Vec<(BoxFace, Scope)> {
        let [x, y, z] = self.axes;
        let [sx, sy, sz] = self.size;
        let o = self.origin;
        let face = |origin: Vec3, axes: [Vec3; 3], w: f64, h: f64| Scope { origin, axes, size: [w, h, 0.0] };
        vec![
            (BoxFace::MinZ, face(o + x * sx, [-x, y, -z], sx, sy)),
            (BoxFace::MaxZ, face(o + z * sz, [x, y, z], sx, sy)),
            (BoxFace::MinX, face(o, [z, y, -x], sz, sy)),
            (BoxFace::MaxX, face(o + x * sx + z * sz, [-z, y, x], sz, sy)),
            (BoxFace::MaxY, face(o + y * sy + z * sz, [x, -z, y], sx, sz)),
            (BoxFace::MinY, face(o, [x, z, -y], sx, sz)),
        ]
    }
}

/// Part lengths for one pattern pass over `extent`. Absolute parts are taken
/// first and floating parts share what is left. Returns the lengths and
/// whether absolute parts had to be rescaled.
fn pattern_lengths(extent: f64, sizes: &[SplitSize]) -> (Vec<f64>, bool) {
    let abs: f64 = sizes.iter().map(|s| if let SplitSize::Absolute(a) = s { *a } else { 0.0 }).sum();
    let weight: f64 = sizes.iter().map(|s| if let SplitSize::Floating(w) = s { *w } else { 0.0 }).sum();
    if weight > 0.0 && abs <= extent {
        let rest = extent - abs;
        let lens = sizes
            .iter()
            .map(|s| match s {
                SplitSize::Absolute(a) => *a,
                SplitSize::Floating(w) => rest * w / weight,
            })
            .collect();
        return (lens, false);
    }
    if abs > 0.0 {
        let k = extent / abs;
        let lens = sizes
            .iter()
            .map(|s| match s {
                SplitSize::Absolute(a) => a * k,
                SplitSize::Floating(_) => 0.0,
            })
            .collect();
        return (lens, k != 1.0);
    }
    (vec![0.0; sizes.len()], extent != 0.0)
}

/// One placed part of a split: pattern entry, start offset and length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitPart {
    pub entry: usize,
    pub start: f64,
    pub len: f64,
}

/// Lays out a split over `extent`. With `repeat`, the pattern is repeated
/// `max(1, round(extent / nominal))` times, each repetition getting an equal
/// share of the extent.
pub fn split_parts(extent: f64, sizes: &[SplitSize], repeat: bool) -> (Vec<SplitPart>, bool) {
    let reps = if repeat {
        let nominal: f64 = sizes
            .iter()
            .map(|s| match s {
                SplitSize::Absolute(v) | SplitSize::Floating(v) => *v,
            })
            .sum();
        if nominal > 0.0 {
            ((extent / nominal).round() as usize).max(1)
        } else {
            1
        }
    } else {
        1
    };
    let seg = extent / reps as f64;
    let (lens, scaled) = pattern_lengths(seg, sizes);
    let mut parts = Vec::with_capacity(reps * sizes.len());
    for r in 0..reps {
        let mut cursor = r as f64 * seg;
        for (entry, &len) in lens.iter().enumerate() {
            parts.push(SplitPart { entry, start: cursor, len });
            cursor += len;
        }
    }
    (parts, scaled)
}
