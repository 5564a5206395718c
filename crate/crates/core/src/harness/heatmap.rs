//! Occupancy heat-maps over the city ground plane.

use std::fmt::Write;

use crate::geom::Vec2;
use crate::simulation::Sample;

/// Per-cell sample counts; row index follows world z.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub cell: f64,
    pub origin: Vec2,
    pub width: usize,
    pub height: usize,
    pub counts: Vec<u64>,
}

impl Heatmap {
    /// Grid covering `[origin, origin + extent]`.
    pub fn new(origin: Vec2, extent: Vec2, cell: f64) -> Self {
        assert!(cell > 0.0, "heat-map cells must have a positive size");
        let width = ((extent.x / cell).ceil() as usize).max(1);
        let height = ((extent.y / cell).ceil() as usize).max(1);
        Heatmap { cell, origin, width, height, counts: vec![0; width * height] }
    }

    /// Cell holding `p`; points past the border count in the edge cell.
    pub fn cell_of(&self, p: Vec2) -> (usize, usize) {
        let clamp = |v: f64, n: usize| (v.floor().max(0.0) as usize).min(n - 1);
        let col = clamp((p.x - self.origin.x) / self.cell, self.width);
        let row = clamp((p.y - self.origin.y) / self.cell, self.height);
        (row, col)
    }

    pub fn add(&mut self, p: Vec2) {
        let (row, col) = self.cell_of(p);
        self.counts[row * self.width + col] += 1;
    }

    pub fn add_samples<'a>(&mut self, samples: impl IntoIterator<Item = &'a Sample>) {
        for s in samples {
            self.add(Vec2::new(s.x, s.y));
        }
    }

    pub fn get(&self, row: usize, col: usize) -> u64 {
        self.counts[row * self.width + col]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn max(&self) -> u64 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    /// `row,col,count` for every non-empty cell, after `#` comment lines.
    pub fn to_csv(&self, comment: &str) -> String {
        let mut out = String::new();
        for line in comment.lines() {
            writeln!(out, "# {line}").unwrap();
        }
        out.push_str("row,col,count\n");
        for row in 0..self.height {
            for col in 0..self.width {
                let c = self.get(row, col);
                if c > 0 {
                    writeln!(out, "{row},{col},{c}").unwrap();
                }
            }
        }
        out
    }

    /// Binary 16-bit PGM scaled so the hottest cell is white.
    pub fn to_pgm(&self, comment: &str) -> Vec<u8> {
        let mut out = String::from("P5\n");
        for line in comment.lines() {
            writeln!(out, "# {line}").unwrap();
        }
        writeln!(out, "{} {}\n65535", self.width, self.height).unwrap();
        let mut bytes = out.into_bytes();
        let max = self.max();
        for c in &self.counts {
            let v = if max == 0 { 0 } else { ((*c as u128 * 65535 + max as u128 / 2) / max as u128) as u16 };
            bytes.extend_from_slice(&v.to_be_bytes());
        }
        bytes
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn grid() -> Heatmap {
        Heatmap::new(Vec2::new(0.0, 0.0), Vec2::new(10.0, 6.0), 2.0)
    }

    fn pixels(pgm: &[u8]) -> Vec<u16> {
        let body = &pgm[pgm.len() - 2 * 15..];
        body.chunks(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    }

    #[test]
    fn empty_grid_exports_zeros() {
        let g = grid();
        assert_eq!((g.width, g.height), (5, 3));
        assert!(pixels(&g.to_pgm("")).iter().all(|&v| v == 0));
        assert_eq!(g.to_csv(""), "row,col,count\n");
    }

    #[test]
    fn single_sample() {
        let mut g = grid();
        g.add(Vec2::new(3.0, 5.0));
        assert_eq!(g.total(), 1);
        assert_eq!(g.get(2, 1), 1);
        let px = pixels(&g.to_pgm("seed=1"));
        assert_eq!(px[2 * 5 + 1], 65535);
        assert_eq!(px.iter().filter(|&&v| v > 0).count(), 1);
        assert_eq!(g.to_csv("seed=1"), "# seed=1\nrow,col,count\n2,1,1\n");
    }

    #[test]
    fn pgm_header() {
        let text = String::from_utf8_lossy(&grid().to_pgm("a\nb")).to_string();
        assert!(text.starts_with("P5\n# a\n# b\n5 3\n65535\n"));
    }

    proptest! {
        #[test]
        fn counts_are_conserved(points in proptest::collection::vec((-5.0f64..15.0, -5.0f64..10.0), 0..200)) {
            let mut g = grid();
            for (x, y) in &points {
                g.add(Vec2::new(*x, *y));
            }
            prop_assert_eq!(g.total(), points.len() as u64);
            let csv_total: u64 = g.to_csv("").lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap()).sum();
            prop_assert_eq!(csv_total, points.len() as u64);
        }
    }
}
