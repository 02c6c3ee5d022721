//! Interface systems on a red-black checkerboard of square subdomains.
//!
//! The unit square is cut into N x N congruent squares, s mesh cells on a
//! side, and colored like a checkerboard. Free nodes split into subdomain
//! interiors I, interface edge nodes Delta (on exactly one skeleton line)
//! and cross points C; Gamma = Delta + C. Eliminating I and C leaves the
//! edge Schur operator; eliminating the interiors of one color only leaves
//! the one-sided operators S_R and S_B. The four iterations of the
//! two-subdomain setting generalize to preconditioned conjugate gradients on
//! three interface systems:
//!
//! * primal: the edge Schur system, preconditioned by the inverse of one
//!   one-sided edge operator (Dirichlet-Neumann) or by a weighted sum of
//!   both inverses (Neumann-Neumann),
//! * flux: (S_R^-1 + S_B^-1) lambda = S_B^-1 f_B - S_R^-1 f_R, preconditioned
//!   by a weighted sum of forward applications (Dirichlet-Dirichlet),
//! * Robin: M((g_R M - S_B)^-1 - (g_R M + S_R)^-1)M g = f*, preconditioned by
//!   (g_R + g_B)(g_B M + S_B)^-1 - M^-1 (Robin-Robin),
//!
//! where M is the mass matrix of the skeleton and g_R, g_B are Robin shifts.
//!
//! Every subdomain is geometrically one of two classes (the mesh diagonals
//! mirror at x = 1/2, which is a subdomain boundary since N is even), so a
//! single unit-coefficient interior factorization and a single dense trace
//! Schur complement per class serve all N^2 subdomains; coefficients enter
//! by scaling. The one-sided operators are assembled on the skeleton in
//! lexicographic node order and factored as profile Cholesky matrices.

use crate::assembly::{assemble, lattice_element_stiffness, manufactured_forcing, PartitionedSystem};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::sparse::{extreme_eigenvalues, norm, pcg, Csr, SkylineFactor};
use crate::two_domain::Method;

/// Subdomain colors. Construction normalizes labels so black carries the
/// larger coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Color {
    Red,
    Black,
}

impl Color {
    fn index(self) -> usize {
        match self {
            Color::Red => 0,
            Color::Black => 1,
        }
    }
}

/// Correction weights proportional to sqrt(nu), summing to one.
#[derive(Debug, Clone, Copy)]
pub struct ScalingWeights {
    pub red: f64,
    pub black: f64,
}

impl ScalingWeights {
    /// The flux preconditioner applies the forward operators, so it uses the
    /// weights in swapped roles.
    pub fn swapped(self) -> ScalingWeights {
        ScalingWeights { red: self.black, black: self.red }
    }
}

pub fn scaling_weights(nu_red: f64, nu_black: f64) -> ScalingWeights {
    let sr = nu_red.sqrt();
    let sb = nu_black.sqrt();
    ScalingWeights { red: sr / (sr + sb), black: sb / (sr + sb) }
}

/// Ring nodes of an (s+1) x (s+1) local lattice in lexicographic order.
fn ring_nodes(s: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(4 * s);
    for lx in 0..=s {
        for ly in 0..=s {
            if lx == 0 || lx == s || ly == 0 || ly == s {
                out.push((lx, ly));
            }
        }
    }
    out
}

/// Unit-coefficient data shared by all subdomains of one diagonal
/// orientation: the interior factorization and the dense trace Schur
/// complement of the local stiffness (scale-free, so assembled on integer
/// cells).
struct GeometryClass {
    interior_factor: SkylineFactor,
    /// ring x ring, row-major
    schur: Vec<f64>,
    ring: usize,
}

impl GeometryClass {
    fn build(s: usize, nw_diagonal: bool) -> Result<GeometryClass> {
        let lid = |lx: usize, ly: usize| lx * (s + 1) + ly;
        let n_int = (s - 1) * (s - 1);
        let int_pos = |lx: usize, ly: usize| (lx - 1) * (s - 1) + (ly - 1);
        let ring = ring_nodes(s);
        let mut ring_pos = vec![usize::MAX; (s + 1) * (s + 1)];
        for (r, &(lx, ly)) in ring.iter().enumerate() {
            ring_pos[lid(lx, ly)] = r;
        }
        let is_interior = |lx: usize, ly: usize| lx > 0 && lx < s && ly > 0 && ly < s;

        let mut t_ii = Vec::new();
        let mut t_ti = Vec::new();
        let mut t_tt = Vec::new();
        for cx in 0..s as i64 {
            for cy in 0..s as i64 {
                let ll = (cx, cy);
                let lr = (cx + 1, cy);
                let ul = (cx, cy + 1);
                let ur = (cx + 1, cy + 1);
                let tris: [[(i64, i64); 3]; 2] = if nw_diagonal {
                    [[ll, lr, ul], [lr, ur, ul]]
                } else {
                    [[ll, lr, ur], [ll, ur, ul]]
                };
                for tri in tris {
                    let k = lattice_element_stiffness(tri);
                    for i in 0..3 {
                        for j in 0..3 {
                            if k[i][j] == 0.0 {
                                continue;
                            }
                            let (xi, yi) = (tri[i].0 as usize, tri[i].1 as usize);
                            let (xj, yj) = (tri[j].0 as usize, tri[j].1 as usize);
                            match (is_interior(xi, yi), is_interior(xj, yj)) {
                                (true, true) => {
                                    t_ii.push((int_pos(xi, yi), int_pos(xj, yj), k[i][j]))
                                }
                                (false, true) => t_ti.push((
                                    ring_pos[lid(xi, yi)],
                                    int_pos(xj, yj),
                                    k[i][j],
                                )),
                                (false, false) => t_tt.push((
                                    ring_pos[lid(xi, yi)],
                                    ring_pos[lid(xj, yj)],
                                    k[i][j],
                                )),
                                (true, false) => {} // transpose of (false, true)
                            }
                        }
                    }
                }
            }
        }
        let k_ii = Csr::from_triplets(n_int, n_int, &t_ii);
        let k_ti = Csr::from_triplets(ring.len(), n_int, &t_ti);
        let k_tt = Csr::from_triplets(ring.len(), ring.len(), &t_tt);
        let interior_factor = SkylineFactor::new(&k_ii)?;

        // dense trace Schur, one interior solve per ring node; the local
        // matrix is symmetric so row j of the coupling block is column j
        let m = ring.len();
        let mut schur = vec![0.0; m * m];
        for j in 0..m {
            let mut rhs = vec![0.0; n_int];
            for (c, v) in k_ti.row(j) {
                rhs[c] = v;
            }
            let w = interior_factor.solve(&rhs);
            let correction = k_ti.matvec(&w);
            for (c, v) in k_tt.row(j) {
                schur[c * m + j] += v;
            }
            for i in 0..m {
                schur[i * m + j] -= correction[i];
            }
        }
        Ok(GeometryClass { interior_factor, schur, ring: m })
    }
}

/// One subdomain: its geometry class, coefficient, and the free indices of
/// its interior (always free) and ring nodes (None where clamped).
struct Subdomain {
    class: usize,
    color: Color,
    nu: f64,
    interior_free: Vec<usize>,
    ring_free: Vec<Option<usize>>,
}

/// Iteration record of one preconditioned interface solve.
#[derive(Debug, Clone)]
pub struct InterfaceReport {
    pub method: Method,
    pub iterations: usize,
    pub converged: bool,
    pub relative_residual: f64,
    /// full free-node solution recovered from the interface data
    pub solution: Vec<f64>,
    /// relative error against the direct reference, when one is kept
    pub reference_error: Option<f64>,
}

/// Checkerboard decomposition with prefactored per-class blocks.
pub struct Checkerboard {
    pub n_sub: usize,
    pub cells_per_sub: usize,
    pub nu_red: f64,
    pub nu_black: f64,
    pub system: PartitionedSystem,
    interior: Vec<usize>,
    edges: Vec<usize>,
    corners: Vec<usize>,
    interface: Vec<usize>,
    int_pos: Vec<usize>,
    gamma_pos: Vec<usize>,
    delta_in_gamma: Vec<usize>,
    classes: Vec<GeometryClass>,
    subs: Vec<Subdomain>,
    a_dd: Csr,
    a_di: Csr,
    a_id: Csr,
    a_dc: Csr,
    a_cd: Csr,
    a_ic: Csr,
    a_ci: Csr,
    a_ig: Csr,
    /// per-color interface-to-interior couplings
    a_gi: [Csr; 2],
    coarse: SkylineFactor,
    mass: Csr,
    f_i: Vec<f64>,
    f_d: Vec<f64>,
    f_c: Vec<f64>,
    /// direct solution, kept while the full factorization is affordable
    pub reference: Option<Vec<f64>>,
}

impl Checkerboard {
    pub fn new(n_sub: usize, cells_per_sub: usize, nu_red: f64, nu_black: f64) -> Result<Self> {
        Self::with_forcing(n_sub, cells_per_sub, nu_red, nu_black, &manufactured_forcing)
    }

    pub fn with_forcing(
        n_sub: usize,
        cells_per_sub: usize,
        nu_red: f64,
        nu_black: f64,
        forcing: &dyn Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let (big_n, s) = (n_sub, cells_per_sub);
        if big_n < 2 || big_n % 2 != 0 {
            return Err(Error::BadPartition(format!(
                "the checkerboard needs an even subdomain count per side, got {big_n}"
            )));
        }
        if s < 2 {
            return Err(Error::BadPartition(format!(
                "subdomains need at least 2 cells per side, got {s}"
            )));
        }
        let n = big_n * s;
        if n > 512 {
            return Err(Error::DimensionCap { dim: n, cap: 512 });
        }
        // normalize colors so black is the side with the larger coefficient;
        // the preconditioners lean on the black (stiff) side
        let (nu_red, nu_black, even_is_red) =
            if nu_red <= nu_black { (nu_red, nu_black, true) } else { (nu_black, nu_red, false) };

        let mesh = Mesh::new(n)?;
        let part_of_tri: Vec<usize> = mesh
            .triangles()
            .iter()
            .map(|t| {
                let (cx, cy) = mesh.centroid(t);
                let sx = (cx * big_n as f64) as usize;
                let sy = (cy * big_n as f64) as usize;
                let even = (sx + sy).is_multiple_of(2);
                usize::from(even != even_is_red)
            })
            .collect();
        let system = assemble(mesh, &part_of_tri, &[nu_red, nu_black], forcing)?;

        let mut interior = Vec::new();
        let mut edges = Vec::new();
        let mut corners = Vec::new();
        let mut interface = Vec::new();
        for p in 0..system.free_count() {
            let (ix, iy) = system.lattice_of_free(p);
            let onx = ix % s == 0;
            let ony = iy % s == 0;
            if onx && ony {
                corners.push(p);
                interface.push(p);
            } else if onx || ony {
                edges.push(p);
                interface.push(p);
            } else {
                interior.push(p);
            }
        }
        let mut int_pos = vec![usize::MAX; system.free_count()];
        for (q, &p) in interior.iter().enumerate() {
            int_pos[p] = q;
        }
        let mut gamma_pos = vec![usize::MAX; system.free_count()];
        for (q, &p) in interface.iter().enumerate() {
            gamma_pos[p] = q;
        }
        let mut corner_pos = vec![usize::MAX; system.free_count()];
        for (q, &p) in corners.iter().enumerate() {
            corner_pos[p] = q;
        }
        let delta_in_gamma: Vec<usize> = edges.iter().map(|&p| gamma_pos[p]).collect();

        let classes = vec![GeometryClass::build(s, false)?, GeometryClass::build(s, true)?];

        let mut subs = Vec::with_capacity(big_n * big_n);
        for sx in 0..big_n {
            for sy in 0..big_n {
                let even = (sx + sy).is_multiple_of(2);
                let color = if even == even_is_red { Color::Red } else { Color::Black };
                let nu = if color == Color::Red { nu_red } else { nu_black };
                let class = usize::from(sx >= big_n / 2);
                let mut interior_free = Vec::with_capacity((s - 1) * (s - 1));
                for lx in 1..s {
                    for ly in 1..s {
                        let node = system.mesh.node_index(sx * s + lx, sy * s + ly);
                        interior_free.push(system.free_of_node[node].expect("interior node"));
                    }
                }
                let ring_free = ring_nodes(s)
                    .iter()
                    .map(|&(lx, ly)| {
                        let node = system.mesh.node_index(sx * s + lx, sy * s + ly);
                        system.free_of_node[node]
                    })
                    .collect();
                subs.push(Subdomain { class, color, nu, interior_free, ring_free });
            }
        }

        let a = &system.matrix;
        let a_dd = a.submatrix(&edges, &edges);
        let a_di = a.submatrix(&edges, &interior);
        let a_id = a.submatrix(&interior, &edges);
        let a_dc = a.submatrix(&edges, &corners);
        let a_cd = a.submatrix(&corners, &edges);
        let a_ic = a.submatrix(&interior, &corners);
        let a_ci = a.submatrix(&corners, &interior);
        let a_ig = a.submatrix(&interior, &interface);
        let a_gi = [
            system.parts[0].submatrix(&interface, &interior),
            system.parts[1].submatrix(&interface, &interior),
        ];

        // coarse operator on cross points: each subdomain contributes the
        // corner subblock of its scaled trace Schur complement
        let nc = corners.len();
        let ring_list = ring_nodes(s);
        let corner_ring: Vec<usize> = [(0, 0), (0, s), (s, 0), (s, s)]
            .iter()
            .map(|c| ring_list.iter().position(|r| r == c).expect("corner on ring"))
            .collect();
        let mut coarse_triplets = Vec::new();
        for sub in &subs {
            let class = &classes[sub.class];
            let ring = class.ring;
            for &ra in &corner_ring {
                let Some(pa) = sub.ring_free[ra] else { continue };
                if corner_pos[pa] == usize::MAX {
                    continue;
                }
                for &rb in &corner_ring {
                    let Some(pb) = sub.ring_free[rb] else { continue };
                    if corner_pos[pb] == usize::MAX {
                        continue;
                    }
                    let v = sub.nu * class.schur[ra * ring + rb];
                    if v != 0.0 {
                        coarse_triplets.push((corner_pos[pa], corner_pos[pb], v));
                    }
                }
            }
        }
        let coarse = SkylineFactor::new(&Csr::from_triplets(nc, nc, &coarse_triplets))?;

        let mass = skeleton_mass(&system, &gamma_pos, interface.len(), n, s, big_n);

        let gather = |v: &[f64], idx: &[usize]| idx.iter().map(|&p| v[p]).collect::<Vec<f64>>();
        let f_i = gather(&system.load, &interior);
        let f_d = gather(&system.load, &edges);
        let f_c = gather(&system.load, &corners);

        let reference = if n <= 256 {
            Some(SkylineFactor::new(a)?.solve(&system.load))
        } else {
            None
        };

        Ok(Checkerboard {
            n_sub: big_n,
            cells_per_sub: s,
            nu_red,
            nu_black,
            system,
            interior,
            edges,
            corners,
            interface,
            int_pos,
            gamma_pos,
            delta_in_gamma,
            classes,
            subs,
            a_dd,
            a_di,
            a_id,
            a_dc,
            a_cd,
            a_ic,
            a_ci,
            a_ig,
            a_gi,
            coarse,
            mass,
            f_i,
            f_d,
            f_c,
            reference,
        })
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn corner_count(&self) -> usize {
        self.corners.len()
    }

    pub fn interface_count(&self) -> usize {
        self.interface.len()
    }

    pub fn skeleton_mass(&self) -> &Csr {
        &self.mass
    }

    /// Solve the block-diagonal interior system, optionally restricted to
    /// the subdomains of one color. Input and output are indexed by interior
    /// position; entries under subdomains of the other color stay zero.
    fn interior_solve(&self, r: &[f64], color: Option<Color>) -> Vec<f64> {
        let mut out = vec![0.0; r.len()];
        for sub in &self.subs {
            if color.is_some_and(|c| c != sub.color) {
                continue;
            }
            let class = &self.classes[sub.class];
            let mut local = vec![0.0; sub.interior_free.len()];
            for (j, &p) in sub.interior_free.iter().enumerate() {
                local[j] = r[self.int_pos[p]];
            }
            let sol = class.interior_factor.solve(&local);
            let inv = 1.0 / sub.nu;
            for (j, &p) in sub.interior_free.iter().enumerate() {
                out[self.int_pos[p]] = sol[j] * inv;
            }
        }
        out
    }

    /// Edge Schur operator: eliminate interiors and cross points.
    pub fn primal_apply(&self, u_d: &[f64]) -> Vec<f64> {
        let t = self.a_id.matvec(u_d);
        let w = self.interior_solve(&t, None);
        let mut rhs_c = self.a_cd.matvec(u_d);
        self.a_ci.matvec_acc(&w, &mut rhs_c, -1.0);
        let v_c = self.coarse.solve(&rhs_c);
        let mut t2 = t;
        self.a_ic.matvec_acc(&v_c, &mut t2, -1.0);
        let v_i = self.interior_solve(&t2, None);
        let mut out = self.a_dd.matvec(u_d);
        self.a_di.matvec_acc(&v_i, &mut out, -1.0);
        self.a_dc.matvec_acc(&v_c, &mut out, -1.0);
        out
    }

    /// Condensed edge load of the edge Schur system.
    pub fn primal_rhs(&self) -> Vec<f64> {
        let w = self.interior_solve(&self.f_i, None);
        let mut rhs_c = self.f_c.clone();
        self.a_ci.matvec_acc(&w, &mut rhs_c, -1.0);
        let v_c = self.coarse.solve(&rhs_c);
        let mut t = self.f_i.clone();
        self.a_ic.matvec_acc(&v_c, &mut t, -1.0);
        let v_i = self.interior_solve(&t, None);
        let mut out = self.f_d.clone();
        self.a_di.matvec_acc(&v_i, &mut out, -1.0);
        self.a_dc.matvec_acc(&v_c, &mut out, -1.0);
        out
    }

    /// Assemble gamma * M + sigma * S_X on the skeleton.
    fn interface_operator(&self, color: Color, gamma: f64, sigma: f64) -> Csr {
        let ng = self.interface.len();
        let mut triplets = Vec::new();
        for sub in &self.subs {
            if sub.color != color {
                continue;
            }
            let class = &self.classes[sub.class];
            let ring = class.ring;
            for ra in 0..ring {
                let Some(pa) = sub.ring_free[ra] else { continue };
                let qa = self.gamma_pos[pa];
                for rb in 0..ring {
                    let Some(pb) = sub.ring_free[rb] else { continue };
                    let v = sigma * sub.nu * class.schur[ra * ring + rb];
                    if v != 0.0 {
                        triplets.push((qa, self.gamma_pos[pb], v));
                    }
                }
            }
        }
        if gamma != 0.0 {
            for i in 0..ng {
                for (j, v) in self.mass.row(i) {
                    triplets.push((i, j, gamma * v));
                }
            }
        }
        Csr::from_triplets(ng, ng, &triplets)
    }

    /// Factor gamma * M + sigma * S_X. For the negative-shift operator a
    /// failed pivot means the shift does not dominate the one-sided
    /// operator; the error carries the smallest Ritz value as a diagnostic.
    pub fn interface_factor(&self, color: Color, gamma: f64, sigma: f64) -> Result<SkylineFactor> {
        let m = self.interface_operator(color, gamma, sigma);
        match SkylineFactor::new(&m) {
            Ok(f) => Ok(f),
            Err(Error::NotPositiveDefinite { .. }) if sigma < 0.0 => {
                let (min_ritz, _) =
                    extreme_eigenvalues(m.rows(), |x| m.matvec(x), 60, 7);
                Err(Error::RobinShiftTooSmall { gamma, min_ritz })
            }
            Err(e) => Err(e),
        }
    }

    /// Forward application of one one-sided interface operator.
    pub fn one_sided_apply(&self, color: Color, u_g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u_g.len()];
        for sub in &self.subs {
            if sub.color != color {
                continue;
            }
            let class = &self.classes[sub.class];
            let ring = class.ring;
            let mut local = vec![0.0; ring];
            for (r, pf) in sub.ring_free.iter().enumerate() {
                if let Some(p) = pf {
                    local[r] = u_g[self.gamma_pos[*p]];
                }
            }
            for (r, pf) in sub.ring_free.iter().enumerate() {
                let Some(p) = pf else { continue };
                let row = &class.schur[r * ring..(r + 1) * ring];
                let mut acc = 0.0;
                for (c, v) in row.iter().enumerate() {
                    acc += v * local[c];
                }
                out[self.gamma_pos[*p]] += sub.nu * acc;
            }
        }
        out
    }

    /// Solve one one-sided operator on edge data only, cross-point block
    /// folded in: the edge part of T^-1 (r_Delta; 0_C).
    pub fn edge_restricted_solve(&self, factor: &SkylineFactor, r_d: &[f64]) -> Vec<f64> {
        let mut rhs = vec![0.0; self.interface.len()];
        for (d, &g) in self.delta_in_gamma.iter().enumerate() {
            rhs[g] = r_d[d];
        }
        let sol = factor.solve(&rhs);
        self.delta_in_gamma.iter().map(|&g| sol[g]).collect()
    }

    /// Condensed interface load of one color:
    /// f_X = f_G^X - A_GI^X (A_II^X)^-1 f_I^X.
    pub fn condensed_load(&self, color: Color) -> Vec<f64> {
        let pl = &self.system.part_loads[color.index()];
        let f_g: Vec<f64> = self.interface.iter().map(|&p| pl[p]).collect();
        let f_i: Vec<f64> = self.interior.iter().map(|&p| pl[p]).collect();
        let w = self.interior_solve(&f_i, Some(color));
        let mut out = f_g;
        self.a_gi[color.index()].matvec_acc(&w, &mut out, -1.0);
        out
    }

    /// Complete an edge solution to all free nodes (cross points through the
    /// coarse system, interiors through local solves).
    pub fn recover_primal(&self, u_d: &[f64]) -> Vec<f64> {
        let w_f = self.interior_solve(&self.f_i, None);
        let mut rhs_c = self.f_c.clone();
        self.a_ci.matvec_acc(&w_f, &mut rhs_c, -1.0);
        let t = self.a_id.matvec(u_d);
        let w_u = self.interior_solve(&t, None);
        self.a_cd.matvec_acc(u_d, &mut rhs_c, -1.0);
        self.a_ci.matvec_acc(&w_u, &mut rhs_c, 1.0);
        let v_c = self.coarse.solve(&rhs_c);
        let mut r_i = self.f_i.clone();
        self.a_id.matvec_acc(u_d, &mut r_i, -1.0);
        self.a_ic.matvec_acc(&v_c, &mut r_i, -1.0);
        let u_i = self.interior_solve(&r_i, None);
        let mut u = vec![0.0; self.system.free_count()];
        for (q, &p) in self.interior.iter().enumerate() {
            u[p] = u_i[q];
        }
        for (q, &p) in self.edges.iter().enumerate() {
            u[p] = u_d[q];
        }
        for (q, &p) in self.corners.iter().enumerate() {
            u[p] = v_c[q];
        }
        u
    }

    /// Complete a full interface trace to all free nodes.
    pub fn recover_from_trace(&self, u_g: &[f64]) -> Vec<f64> {
        let mut r_i = self.f_i.clone();
        self.a_ig.matvec_acc(u_g, &mut r_i, -1.0);
        let u_i = self.interior_solve(&r_i, None);
        let mut u = vec![0.0; self.system.free_count()];
        for (q, &p) in self.interior.iter().enumerate() {
            u[p] = u_i[q];
        }
        for (q, &p) in self.interface.iter().enumerate() {
            u[p] = u_g[q];
        }
        u
    }

    pub fn relative_residual(&self, u: &[f64]) -> f64 {
        let mut r = self.system.load.clone();
        self.system.matrix.matvec_acc(u, &mut r, -1.0);
        norm(&r) / norm(&self.system.load)
    }

    fn reference_error(&self, u: &[f64]) -> Option<f64> {
        self.reference.as_ref().map(|us| {
            let d: Vec<f64> = u.iter().zip(us).map(|(a, b)| a - b).collect();
            norm(&d) / norm(us)
        })
    }

    /// Robin shifts: the exchange shift dominates the stiff side's operator
    /// spectrum; the preconditioner shift scales with the subdomain size.
    pub fn robin_shifts(&self) -> (f64, f64) {
        let g_r = 16.0 * self.nu_black / self.system.mesh.h;
        let g_b = self.nu_red / (2.0 * self.n_sub as f64);
        (g_r, g_b)
    }

    /// Run one preconditioned conjugate gradient interface solve with the
    /// built-in parameter choices.
    pub fn solve_interface(
        &self,
        method: Method,
        rtol: f64,
        max_iter: usize,
    ) -> Result<InterfaceReport> {
        self.solve_interface_with(method, rtol, max_iter, None, None)
    }

    /// As [`solve_interface`](Self::solve_interface), with optional overrides
    /// for the correction weights (Neumann-Neumann and Dirichlet-Dirichlet,
    /// used verbatim) and the Robin shift pair `(gamma_r, gamma_b)`.
    pub fn solve_interface_with(
        &self,
        method: Method,
        rtol: f64,
        max_iter: usize,
        weights: Option<ScalingWeights>,
        shifts: Option<(f64, f64)>,
    ) -> Result<InterfaceReport> {
        let report = |outcome: crate::sparse::PcgOutcome, solution: Vec<f64>| InterfaceReport {
            method,
            iterations: outcome.iterations,
            converged: outcome.converged,
            relative_residual: outcome.relative_residual,
            reference_error: self.reference_error(&solution),
            solution,
        };
        match method {
            Method::DirichletNeumann => {
                let b = self.primal_rhs();
                let s_b = self.interface_factor(Color::Black, 0.0, 1.0)?;
                let out = pcg(
                    |p| self.primal_apply(p),
                    |r| self.edge_restricted_solve(&s_b, r),
                    &b,
                    rtol,
                    max_iter,
                )?;
                let u = self.recover_primal(&out.x);
                Ok(report(out, u))
            }
            Method::NeumannNeumann => {
                let b = self.primal_rhs();
                let s_r = self.interface_factor(Color::Red, 0.0, 1.0)?;
                let s_b = self.interface_factor(Color::Black, 0.0, 1.0)?;
                let w = weights.unwrap_or_else(|| scaling_weights(self.nu_red, self.nu_black));
                let out = pcg(
                    |p| self.primal_apply(p),
                    |r| {
                        let mut z = self.edge_restricted_solve(&s_r, r);
                        let zb = self.edge_restricted_solve(&s_b, r);
                        for (a, b) in z.iter_mut().zip(&zb) {
                            *a = w.red * w.red * *a + w.black * w.black * b;
                        }
                        z
                    },
                    &b,
                    rtol,
                    max_iter,
                )?;
                let u = self.recover_primal(&out.x);
                Ok(report(out, u))
            }
            Method::DirichletDirichlet => {
                let s_r = self.interface_factor(Color::Red, 0.0, 1.0)?;
                let s_b = self.interface_factor(Color::Black, 0.0, 1.0)?;
                let f_r = self.condensed_load(Color::Red);
                let f_b = self.condensed_load(Color::Black);
                let mut d = s_b.solve(&f_b);
                let dr = s_r.solve(&f_r);
                for (a, b) in d.iter_mut().zip(&dr) {
                    *a -= b;
                }
                let w = weights
                    .unwrap_or_else(|| scaling_weights(self.nu_red, self.nu_black).swapped());
                let out = pcg(
                    |lam| {
                        let mut y = s_r.solve(lam);
                        let yb = s_b.solve(lam);
                        for (a, b) in y.iter_mut().zip(&yb) {
                            *a += b;
                        }
                        y
                    },
                    |r| {
                        let mut z = self.one_sided_apply(Color::Red, r);
                        let zb = self.one_sided_apply(Color::Black, r);
                        for (a, b) in z.iter_mut().zip(&zb) {
                            *a = w.red * w.red * *a + w.black * w.black * b;
                        }
                        z
                    },
                    &d,
                    rtol,
                    max_iter,
                )?;
                // recover through the stiff side, whose trace is insensitive
                // to the flux error when the coefficients are far apart
                let mut rhs = f_b;
                for (a, l) in rhs.iter_mut().zip(&out.x) {
                    *a -= l;
                }
                let u_g = s_b.solve(&rhs);
                let u = self.recover_from_trace(&u_g);
                Ok(report(out, u))
            }
            Method::RobinRobin => {
                let (g_r, g_b) = shifts.unwrap_or_else(|| self.robin_shifts());
                let minus_b = self.interface_factor(Color::Black, g_r, -1.0)?;
                let plus_r = self.interface_factor(Color::Red, g_r, 1.0)?;
                let plus_b = self.interface_factor(Color::Black, g_b, 1.0)?;
                let mass_factor = SkylineFactor::new(&self.mass)?;
                let f_r = self.condensed_load(Color::Red);
                let f_b = self.condensed_load(Color::Black);
                let mut fstar = self.mass.matvec(&minus_b.solve(&f_b));
                let fr_part = self.mass.matvec(&plus_r.solve(&f_r));
                for (a, b) in fstar.iter_mut().zip(&fr_part) {
                    *a += b;
                }
                let out = pcg(
                    |g| {
                        let mg = self.mass.matvec(g);
                        let mut y = minus_b.solve(&mg);
                        let yr = plus_r.solve(&mg);
                        for (a, b) in y.iter_mut().zip(&yr) {
                            *a -= b;
                        }
                        self.mass.matvec(&y)
                    },
                    |r| {
                        let mut z = plus_b.solve(r);
                        let zm = mass_factor.solve(r);
                        for (a, b) in z.iter_mut().zip(&zm) {
                            *a = (g_r + g_b) * *a - b;
                        }
                        z
                    },
                    &fstar,
                    rtol,
                    max_iter,
                )?;
                let mut rhs = f_r;
                let mg = self.mass.matvec(&out.x);
                for (a, b) in rhs.iter_mut().zip(&mg) {
                    *a += b;
                }
                let u_g = plus_r.solve(&rhs);
                let u = self.recover_from_trace(&u_g);
                Ok(report(out, u))
            }
        }
    }
}

/// Mass matrix of the skeleton lines (one-dimensional elements along every
/// interior grid line of the subdomain partition).
fn skeleton_mass(
    system: &PartitionedSystem,
    gamma_pos: &[usize],
    ng: usize,
    n: usize,
    s: usize,
    big_n: usize,
) -> Csr {
    let h = system.mesh.h;
    let mut triplets = Vec::new();
    let mut edge = |a: usize, b: usize| {
        let qa = system.free_of_node[a].map(|p| gamma_pos[p]);
        let qb = system.free_of_node[b].map(|p| gamma_pos[p]);
        if let Some(qa) = qa {
            triplets.push((qa, qa, h / 3.0));
        }
        if let Some(qb) = qb {
            triplets.push((qb, qb, h / 3.0));
        }
        if let (Some(qa), Some(qb)) = (qa, qb) {
            triplets.push((qa, qb, h / 6.0));
            triplets.push((qb, qa, h / 6.0));
        }
    };
    for j in 1..big_n {
        let ix = j * s;
        for t in 0..n {
            edge(system.mesh.node_index(ix, t), system.mesh.node_index(ix, t + 1));
        }
    }
    for j in 1..big_n {
        let iy = j * s;
        for t in 0..n {
            edge(system.mesh.node_index(t, iy), system.mesh.node_index(t + 1, iy));
        }
    }
    Csr::from_triplets(ng, ng, &triplets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::dot;

    #[test]
    fn node_classification_counts() {
        let cb = Checkerboard::new(2, 2, 1.0, 1.0).unwrap();
        assert_eq!(cb.corner_count(), 1);
        assert_eq!(cb.edge_count(), 4);
        assert_eq!(cb.interface_count(), 5);
        let cb = Checkerboard::new(4, 4, 1.0, 1.0).unwrap();
        let n = 16;
        let expected_gamma = 2 * 3 * (n - 1) - 9;
        assert_eq!(cb.interface_count(), expected_gamma);
        assert_eq!(cb.corner_count(), 9);
    }

    #[test]
    fn primal_operator_is_symmetric_and_consistent() {
        let cb = Checkerboard::new(4, 4, 1e-2, 1e2).unwrap();
        let nd = cb.edge_count();
        let x: Vec<f64> = (0..nd).map(|i| ((i * 7 + 3) % 11) as f64 - 5.0).collect();
        let y: Vec<f64> = (0..nd).map(|i| ((i * 5 + 1) % 13) as f64 - 6.0).collect();
        let sx = cb.primal_apply(&x);
        let sy = cb.primal_apply(&y);
        let xy = dot(&x, &sy);
        let yx = dot(&y, &sx);
        assert!((xy - yx).abs() <= 1e-10 * xy.abs().max(yx.abs()));

        // the direct solution's edge trace solves the condensed system
        let reference = cb.reference.clone().unwrap();
        let u_d: Vec<f64> = cb.edges.iter().map(|&p| reference[p]).collect();
        let mut r = cb.primal_apply(&u_d);
        let b = cb.primal_rhs();
        for (a, bb) in r.iter_mut().zip(&b) {
            *a -= bb;
        }
        assert!(norm(&r) / norm(&b) <= 1e-10);
    }

    #[test]
    fn assembled_one_sided_operator_matches_forward_apply() {
        let cb = Checkerboard::new(2, 4, 1e-3, 1e3).unwrap();
        let ng = cb.interface_count();
        let x: Vec<f64> = (0..ng).map(|i| (i as f64 * 0.37).sin()).collect();
        for color in [Color::Red, Color::Black] {
            let op = cb.interface_operator(color, 0.0, 1.0);
            let a = op.matvec(&x);
            let b = cb.one_sided_apply(color, &x);
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() <= 1e-12 * u.abs().max(1.0));
            }
        }
    }

    #[test]
    fn operator_scales_linearly_with_coefficients() {
        let base = Checkerboard::new(2, 4, 1.0, 4.0).unwrap();
        let scaled = Checkerboard::new(2, 4, 3.0, 12.0).unwrap();
        let nd = base.edge_count();
        let x: Vec<f64> = (0..nd).map(|i| ((i % 5) as f64) - 2.0).collect();
        let a = base.primal_apply(&x);
        let b = scaled.primal_apply(&x);
        for (u, v) in a.iter().zip(&b) {
            assert!((3.0 * u - v).abs() <= 1e-12 * v.abs().max(1e-12));
        }
    }

    #[test]
    fn color_labels_normalize_to_stiff_black() {
        let a = Checkerboard::new(2, 2, 1e-3, 1e3).unwrap();
        let b = Checkerboard::new(2, 2, 1e3, 1e-3).unwrap();
        assert_eq!(a.nu_red, b.nu_red);
        assert_eq!(a.nu_black, b.nu_black);
        let ra = a.solve_interface(Method::DirichletNeumann, 1e-6, 100).unwrap();
        let rb = b.solve_interface(Method::DirichletNeumann, 1e-6, 100).unwrap();
        assert_eq!(ra.iterations, rb.iterations);
    }

    #[test]
    fn reference_iteration_counts_small_uniform() {
        // N = 8 subdomains per side, 4 cells each, unit coefficient
        let cb = Checkerboard::new(8, 4, 1.0, 1.0).unwrap();
        let expected = [
            (Method::DirichletNeumann, 15),
            (Method::NeumannNeumann, 8),
            (Method::DirichletDirichlet, 7),
            (Method::RobinRobin, 15),
        ];
        for (method, count) in expected {
            let rep = cb.solve_interface(method, 1e-6, 400).unwrap();
            assert!(rep.converged, "{method:?} unconverged");
            assert_eq!(rep.iterations, count, "{method:?}");
            let err = rep.reference_error.unwrap();
            assert!(err <= 1e-4, "{method:?} recovery error {err}");
        }
    }

    #[test]
    fn reference_iteration_counts_jumping_coefficients() {
        let cb = Checkerboard::new(8, 8, 1e-2, 1e2).unwrap();
        let expected = [
            (Method::DirichletNeumann, 2),
            (Method::NeumannNeumann, 17),
            (Method::DirichletDirichlet, 14),
            (Method::RobinRobin, 2),
        ];
        for (method, count) in expected {
            let rep = cb.solve_interface(method, 1e-6, 400).unwrap();
            assert!(rep.converged, "{method:?} unconverged");
            assert_eq!(rep.iterations, count, "{method:?}");
            let err = rep.reference_error.unwrap();
            assert!(err <= 1e-3, "{method:?} recovery error {err}");
        }
    }

    #[test]
    fn undersized_robin_shift_is_reported() {
        let cb = Checkerboard::new(2, 4, 1.0, 1.0).unwrap();
        let Err(err) = cb.interface_factor(Color::Black, 1e-6, -1.0) else {
            panic!("tiny shift must not factor");
        };
        match err {
            Error::RobinShiftTooSmall { gamma, min_ritz } => {
                assert_eq!(gamma, 1e-6);
                assert!(min_ritz < 0.0, "diagnostic Ritz value {min_ritz}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_odd_or_tiny_partitions() {
        assert!(Checkerboard::new(3, 4, 1.0, 1.0).is_err());
        assert!(Checkerboard::new(2, 1, 1.0, 1.0).is_err());
        assert!(Checkerboard::new(64, 16, 1.0, 1.0).is_err());
    }
}
