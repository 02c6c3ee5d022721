//! Piecewise-linear finite element assembly with per-subdomain bookkeeping.
//!
//! The bilinear form is a(u,v) = integral nu grad(u).grad(v), with nu
//! constant on each part of a triangle partition. On a right triangle with
//! legs of length h the unit-coefficient element stiffness is independent of
//! h; with the right-angle vertex listed first it is
//!
//! ```text
//! [  1   -1/2  -1/2 ]
//! [ -1/2  1/2   0   ]
//! [ -1/2  0     1/2 ]
//! ```
//!
//! The load integral f*phi is approximated by the three-point edge-midpoint
//! rule, which is exact for quadratic integrands and therefore exact enough
//! to keep the manufactured solution's quadratic convergence clean.
//!
//! Assembly keeps the per-part stiffness matrices and load shares separate;
//! the interface solvers need the split because the one-sided Schur
//! complements and "Neumann" blocks are built from exactly one part's share
//! of the interface rows.

use crate::error::Result;
use crate::mesh::Mesh;
use crate::sparse::Csr;

/// Unit element stiffness with the right-angle vertex first.
const K_RIGHT: [[f64; 3]; 3] = [
    [1.0, -0.5, -0.5],
    [-0.5, 0.5, 0.0],
    [-0.5, 0.0, 0.5],
];

/// Element stiffness of a right triangle given by lattice coordinates (unit
/// coefficient, any uniform scale). The right-angle vertex is located
/// through integer arithmetic, so the permutation never depends on floating
/// point.
pub fn lattice_element_stiffness(p: [(i64, i64); 3]) -> [[f64; 3]; 3] {
    for r in 0..3 {
        let a = p[r];
        let b = p[(r + 1) % 3];
        let c = p[(r + 2) % 3];
        let d1 = (b.0 - a.0, b.1 - a.1);
        let d2 = (c.0 - a.0, c.1 - a.1);
        if d1.0 * d2.0 + d1.1 * d2.1 == 0 {
            let order = [r, (r + 1) % 3, (r + 2) % 3];
            let mut k = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    k[order[i]][order[j]] = K_RIGHT[i][j];
                }
            }
            return k;
        }
    }
    unreachable!("structured mesh triangles always have a right angle");
}

/// Element stiffness for one mesh triangle (unit coefficient).
pub fn element_stiffness(mesh: &Mesh, tri: &[usize; 3]) -> [[f64; 3]; 3] {
    let p = tri.map(|v| {
        let (ix, iy) = mesh.lattice(v);
        (ix as i64, iy as i64)
    });
    lattice_element_stiffness(p)
}

/// The forcing used throughout the experiments; with nu = 1 the exact
/// solution is the bubble x(1-x)y(1-y).
pub fn manufactured_forcing(x: f64, y: f64) -> f64 {
    -2.0 * (x * x + y * y - x - y)
}

/// Exact solution matching [`manufactured_forcing`] for nu = 1.
pub fn manufactured_solution(x: f64, y: f64) -> f64 {
    x * (1.0 - x) * y * (1.0 - y)
}

/// Assembled system on the free (interior) nodes, split by parts.
pub struct PartitionedSystem {
    pub mesh: Mesh,
    /// free index of each mesh node, None on the Dirichlet boundary
    pub free_of_node: Vec<Option<usize>>,
    /// mesh node of each free index (lexicographic order)
    pub free_nodes: Vec<usize>,
    /// total stiffness, sum of the parts
    pub matrix: Csr,
    /// per-part stiffness shares, already scaled by that part's nu
    pub parts: Vec<Csr>,
    /// total load
    pub load: Vec<f64>,
    /// per-part load shares
    pub part_loads: Vec<Vec<f64>>,
}

impl PartitionedSystem {
    pub fn free_count(&self) -> usize {
        self.free_nodes.len()
    }

    /// Lattice coordinates of a free unknown.
    pub fn lattice_of_free(&self, p: usize) -> (usize, usize) {
        self.mesh.lattice(self.free_nodes[p])
    }
}

/// Assemble stiffness and load on the mesh with the given triangle partition
/// and per-part coefficients. `part_of_tri[t]` assigns triangle t to a part;
/// `nu[p]` is that part's coefficient.
pub fn assemble(
    mesh: Mesh,
    part_of_tri: &[usize],
    nu: &[f64],
    forcing: &dyn Fn(f64, f64) -> f64,
) -> Result<PartitionedSystem> {
    assert_eq!(part_of_tri.len(), mesh.triangles().len());
    let nparts = nu.len();
    let mut free_of_node = vec![None; mesh.node_count()];
    let mut free_nodes = Vec::new();
    for (v, slot) in free_of_node.iter_mut().enumerate() {
        if !mesh.is_boundary(v) {
            *slot = Some(free_nodes.len());
            free_nodes.push(v);
        }
    }
    let nf = free_nodes.len();
    let mut triplets: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); nparts];
    let mut part_loads = vec![vec![0.0; nf]; nparts];
    let area = mesh.h * mesh.h / 2.0;

    for (t, tri) in mesh.triangles().iter().enumerate() {
        let p = part_of_tri[t];
        let k = element_stiffness(&mesh, tri);
        let scale = nu[p];
        // midpoint values of f on the three edges (0,1), (1,2), (2,0)
        let xy: Vec<(f64, f64)> = tri.iter().map(|&v| mesh.coords(v)).collect();
        let fm: [f64; 3] = [
            forcing((xy[0].0 + xy[1].0) / 2.0, (xy[0].1 + xy[1].1) / 2.0),
            forcing((xy[1].0 + xy[2].0) / 2.0, (xy[1].1 + xy[2].1) / 2.0),
            forcing((xy[2].0 + xy[0].0) / 2.0, (xy[2].1 + xy[0].1) / 2.0),
        ];
        // phi_a is 1/2 on the two edges meeting vertex a, 0 on the opposite edge
        let contrib = [
            0.5 * (fm[0] + fm[2]),
            0.5 * (fm[0] + fm[1]),
            0.5 * (fm[1] + fm[2]),
        ];
        for a in 0..3 {
            let Some(fa) = free_of_node[tri[a]] else { continue };
            part_loads[p][fa] += area / 3.0 * contrib[a];
            for b in 0..3 {
                if let Some(fb) = free_of_node[tri[b]] {
                    triplets[p].push((fa, fb, scale * k[a][b]));
                }
            }
        }
    }

    let parts: Vec<Csr> = triplets
        .iter()
        .map(|t| Csr::from_triplets(nf, nf, t))
        .collect();
    let mut matrix = parts[0].clone();
    for part in &parts[1..] {
        matrix = matrix.add_scaled(part, 1.0);
    }
    let mut load = vec![0.0; nf];
    for pl in &part_loads {
        for (l, s) in load.iter_mut().zip(pl) {
            *l += s;
        }
    }
    Ok(PartitionedSystem { mesh, free_of_node, free_nodes, matrix, parts, load, part_loads })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::{norm, SkylineFactor};
    use proptest::prelude::*;

    fn uniform(n: usize, nu: f64, forcing: &dyn Fn(f64, f64) -> f64) -> PartitionedSystem {
        let mesh = Mesh::new(n).unwrap();
        let parts = vec![0usize; mesh.triangles().len()];
        assemble(mesh, &parts, &[nu], forcing).unwrap()
    }

    #[test]
    fn constant_forcing_gives_h_squared_loads() {
        let sys = uniform(8, 1.0, &|_, _| 1.0);
        let h2 = sys.mesh.h * sys.mesh.h;
        for p in 0..sys.free_count() {
            assert!((sys.load[p] - h2).abs() < 1e-15, "load {} vs {}", sys.load[p], h2);
        }
    }

    #[test]
    fn load_matches_high_order_quadrature_at_center() {
        // degree-5 Gauss rule on each triangle as an independent oracle for
        // the nodal load at the center node of a coarse mesh
        let n = 4;
        let sys = uniform(n, 1.0, &manufactured_forcing);
        let center = sys.mesh.node_index(n / 2, n / 2);
        let pc = sys.free_of_node[center].unwrap();

        let gw = [
            0.225,
            0.132394152788506,
            0.132394152788506,
            0.132394152788506,
            0.125939180544827,
            0.125939180544827,
            0.125939180544827,
        ];
        let ga = 0.059715871789770;
        let gb = 0.470142064105115;
        let gc = 0.797426985353087;
        let gd = 0.101286507323456;
        let gp = [
            (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0),
            (ga, gb, gb),
            (gb, ga, gb),
            (gb, gb, ga),
            (gc, gd, gd),
            (gd, gc, gd),
            (gd, gd, gc),
        ];
        let mut exact = 0.0;
        for tri in sys.mesh.triangles() {
            let Some(a) = tri.iter().position(|&v| v == center) else { continue };
            let xy: Vec<(f64, f64)> = tri.iter().map(|&v| sys.mesh.coords(v)).collect();
            let area = sys.mesh.signed_area(tri);
            for (w, (l0, l1, l2)) in gw.iter().zip(gp.iter()) {
                let x = l0 * xy[0].0 + l1 * xy[1].0 + l2 * xy[2].0;
                let y = l0 * xy[0].1 + l1 * xy[1].1 + l2 * xy[2].1;
                let phi = [*l0, *l1, *l2][a];
                exact += w * area * manufactured_forcing(x, y) * phi;
            }
        }
        assert!(
            (sys.load[pc] - exact).abs() < 1e-14,
            "midpoint rule {} vs gauss {}",
            sys.load[pc],
            exact
        );
    }

    #[test]
    fn discrete_solution_converges_quadratically() {
        let mut errors = Vec::new();
        for n in [8usize, 16, 32] {
            let sys = uniform(n, 1.0, &manufactured_forcing);
            let f = SkylineFactor::new(&sys.matrix).unwrap();
            let u = f.solve(&sys.load);
            let e: Vec<f64> = (0..sys.free_count())
                .map(|p| {
                    let (x, y) = sys.mesh.coords(sys.free_nodes[p]);
                    u[p] - manufactured_solution(x, y)
                })
                .collect();
            errors.push(sys.mesh.h * norm(&e));
        }
        for w in errors.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.6..=4.4).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn stiffness_rows_sum_to_zero_in_the_interior() {
        // constants are in the kernel of the Neumann form; away from the
        // boundary the assembled row sums must vanish
        let sys = uniform(8, 3.0, &|_, _| 0.0);
        for p in 0..sys.free_count() {
            let (ix, iy) = sys.lattice_of_free(p);
            if ix >= 2 && ix <= sys.mesh.n - 2 && iy >= 2 && iy <= sys.mesh.n - 2 {
                let s: f64 = sys.matrix.row(p).map(|(_, v)| v).sum();
                assert!(s.abs() < 1e-14);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn assembly_is_homogeneous_in_nu(k in 1usize..5, scale in 0.25f64..8.0) {
            let n = 2 * k;
            let base = uniform(n, 1.0, &|_, _| 1.0);
            let scaled = uniform(n, scale, &|_, _| 1.0);
            let d = scaled.matrix.add_scaled(&base.matrix, -scale);
            prop_assert!(d.max_abs() <= 1e-12 * scale * base.matrix.max_abs());
            // loads do not see nu
            for (a, b) in scaled.load.iter().zip(&base.load) {
                prop_assert!((a - b).abs() < 1e-15);
            }
        }

        #[test]
        fn parts_sum_to_total(k in 1usize..5) {
            let n = 2 * k;
            let mesh = Mesh::new(n).unwrap();
            // split triangles at the midline like the two-subdomain solver does
            let parts: Vec<usize> = mesh
                .triangles()
                .iter()
                .map(|t| if mesh.centroid(t).0 < 0.5 { 0 } else { 1 })
                .collect();
            let sys = assemble(mesh, &parts, &[2.0, 5.0], &|x, y| x + y).unwrap();
            let sum = sys.parts[0].add_scaled(&sys.parts[1], 1.0);
            let d = sum.add_scaled(&sys.matrix, -1.0);
            prop_assert!(d.max_abs() <= 1e-12 * sys.matrix.max_abs());
            for p in 0..sys.free_count() {
                let s = sys.part_loads[0][p] + sys.part_loads[1][p];
                prop_assert!((s - sys.load[p]).abs() < 1e-15);
            }
        }
    }
}
