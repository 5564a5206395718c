//! Wavefront OBJ export of generated geometry.
//!
//! Vertex colors use the common `v x y z r g b` extension.

use std::fmt::Write;

use super::interp::Leaf;
use super::scope::Scope;

/// Quads of a leaf: one for a flat scope, six for a box, none when degenerate.
fn quads(s: &Scope) -> Vec<[crate::geom::Vec3; 4]> {
    let flat = (0..3).filter(|&i| s.size[i] <= 0.0).count();
    let quad = |f: &Scope| {
        let [x, y, _] = f.axes;
        let [w, h, _] = f.size;
        [f.origin, f.origin + x * w, f.origin + x * w + y * h, f.origin + y * h]
    };
    match flat {
        0 => s.faces().iter().map(|(_, f)| quad(f)).collect(),
        1 => {
            let axis = s.flat_axis().unwrap();
            let (a, b) = match axis {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let (u, v) = (s.axes[a] * s.size[a], s.axes[b] * s.size[b]);
            vec![[s.origin, s.origin + u, s.origin + u + v, s.origin + v]]
        }
        _ => Vec::new(),
    }
}

pub fn to_obj<'a>(leaves: impl IntoIterator<Item = &'a Leaf>) -> String {
    let mut out = String::from("# generated city\n");
    let mut n = 0usize;
    for leaf in leaves {
        let [r, g, b] = leaf.color;
        for q in quads(&leaf.scope) {
            for v in q {
                let _ = writeln!(out, "v {:.4} {:.4} {:.4} {r:.3} {g:.3} {b:.3}", v.x, v.y, v.z);
            }
            let _ = writeln!(out, "f {} {} {} {}", n + 1, n + 2, n + 3, n + 4);
            n += 4;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;

    #[test]
    fn box_has_six_faces() {
        let leaf = Leaf {
            scope: Scope { origin: Vec3::default(), axes: [Vec3::X, Vec3::Y, Vec3::Z], size: [1.0, 2.0, 3.0] },
            color: [1.0; 3],
            object: None,
        };
        let text = to_obj([&leaf]);
        assert_eq!(text.lines().filter(|l| l.starts_with("f ")).count(), 6);
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 24);
    }
}
