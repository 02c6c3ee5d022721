//! Structured triangulation of the unit square.
//!
//! The square is cut into n x n cells of width h = 1/n and every cell into
//! two right triangles. Cells left of the vertical midline use the
//! lower-left to upper-right diagonal, cells right of it the mirrored one,
//! so the whole triangulation is symmetric under reflection at x = 1/2.
//! That symmetry is what makes the two halves of a centered two-subdomain
//! split exact mirror images of each other.
//!
//! Nodes are numbered lexicographically, index = ix*(n+1) + iy, and the
//! resolution must be even so the midline (and every subdomain boundary used
//! elsewhere) lies on mesh lines.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Mesh {
    pub n: usize,
    pub h: f64,
    triangles: Vec<[usize; 3]>,
}

impl Mesh {
    pub fn new(n: usize) -> Result<Mesh> {
        if n < 2 {
            return Err(Error::BadResolution { n, reason: "need at least 2 cells per side" });
        }
        if !n.is_multiple_of(2) {
            return Err(Error::BadResolution {
                n,
                reason: "resolution must be even so the midline lies on mesh lines",
            });
        }
        let idx = |ix: usize, iy: usize| ix * (n + 1) + iy;
        let mut triangles = Vec::with_capacity(2 * n * n);
        for i in 0..n {
            for j in 0..n {
                let ll = idx(i, j);
                let lr = idx(i + 1, j);
                let ul = idx(i, j + 1);
                let ur = idx(i + 1, j + 1);
                if i < n / 2 {
                    triangles.push([ll, lr, ur]);
                    triangles.push([ll, ur, ul]);
                } else {
                    triangles.push([ll, lr, ul]);
                    triangles.push([lr, ur, ul]);
                }
            }
        }
        Ok(Mesh { n, h: 1.0 / n as f64, triangles })
    }

    pub fn node_count(&self) -> usize {
        (self.n + 1) * (self.n + 1)
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn node_index(&self, ix: usize, iy: usize) -> usize {
        ix * (self.n + 1) + iy
    }

    /// Integer lattice coordinates of a node.
    pub fn lattice(&self, node: usize) -> (usize, usize) {
        (node / (self.n + 1), node % (self.n + 1))
    }

    pub fn coords(&self, node: usize) -> (f64, f64) {
        let (ix, iy) = self.lattice(node);
        (ix as f64 * self.h, iy as f64 * self.h)
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        let (ix, iy) = self.lattice(node);
        ix == 0 || ix == self.n || iy == 0 || iy == self.n
    }

    pub fn centroid(&self, tri: &[usize; 3]) -> (f64, f64) {
        let mut cx = 0.0;
        let mut cy = 0.0;
        for &v in tri {
            let (x, y) = self.coords(v);
            cx += x;
            cy += y;
        }
        (cx / 3.0, cy / 3.0)
    }

    /// Signed area; positive for the orientation this module produces.
    pub fn signed_area(&self, tri: &[usize; 3]) -> f64 {
        let (x0, y0) = self.coords(tri[0]);
        let (x1, y1) = self.coords(tri[1]);
        let (x2, y2) = self.coords(tri[2]);
        0.5 * ((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    #[test]
    fn rejects_odd_and_tiny() {
        assert!(matches!(Mesh::new(5), Err(Error::BadResolution { n: 5, .. })));
        assert!(Mesh::new(0).is_err());
        assert!(Mesh::new(1).is_err());
        assert!(Mesh::new(2).is_ok());
    }

    #[test]
    fn counts_match_formulas() {
        for n in [2usize, 4, 10, 16] {
            let m = Mesh::new(n).unwrap();
            assert_eq!(m.node_count(), (n + 1) * (n + 1));
            assert_eq!(m.triangles().len(), 2 * n * n);
        }
    }

    #[test]
    fn reflection_maps_triangulation_onto_itself() {
        let m = Mesh::new(8).unwrap();
        let reflect = |v: usize| {
            let (ix, iy) = m.lattice(v);
            m.node_index(m.n - ix, iy)
        };
        let key = |t: &[usize; 3]| {
            let mut s: Vec<usize> = t.to_vec();
            s.sort_unstable();
            (s[0], s[1], s[2])
        };
        let original: BTreeSet<_> = m.triangles().iter().map(key).collect();
        let mirrored: BTreeSet<_> = m
            .triangles()
            .iter()
            .map(|t| {
                let r = [reflect(t[0]), reflect(t[1]), reflect(t[2])];
                key(&r)
            })
            .collect();
        assert_eq!(original, mirrored);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn every_triangle_positively_oriented(k in 1usize..10) {
            let n = 2 * k;
            let m = Mesh::new(n).unwrap();
            let want = m.h * m.h / 2.0;
            for t in m.triangles() {
                let a = m.signed_area(t);
                prop_assert!((a - want).abs() < 1e-15, "area {a} vs {want}");
            }
        }

        #[test]
        fn boundary_classification_matches_coords(k in 1usize..10, v in 0usize..200) {
            let n = 2 * k;
            let m = Mesh::new(n).unwrap();
            let v = v % m.node_count();
            let (x, y) = m.coords(v);
            let on_edge = x == 0.0 || y == 0.0 || (x - 1.0).abs() < 1e-15 || (y - 1.0).abs() < 1e-15;
            prop_assert_eq!(m.is_boundary(v), on_edge);
        }
    }
}
