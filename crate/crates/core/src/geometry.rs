//! Equiangular gnomonic cubed sphere: topology, element maps, metric terms
//! and the global numbering of the three DOF spaces.
//!
//! Every face carries a right-handed frame `(n, e1, e2)` with `e1 × e2 = n`
//! pointing outwards, so all elements share the same orientation. A point
//! of element `(face, a, b)` with reference coordinates `(ξ, η)` is
//!
//! ```text
//! α = -π/4 + (a + (ξ+1)/2)Δ,   β = -π/4 + (b + (η+1)/2)Δ,   Δ = π/(2N_e)
//! v = n + tan(α) e1 + tan(β) e2,   X = r v/|v|
//! ```
//!
//! The Jacobian is taken against the local (eastward, northward) frame, so
//! its entries are `r cos(φ) ∂θ/∂ξ`, `r cos(φ) ∂θ/∂η`, `r ∂φ/∂ξ`, `r ∂φ/∂η`
//! and `det J` is the physical area element.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_4, PI};
use std::io::Write;

use rayon::prelude::*;

use crate::spaces2d::{LocalSpaces, UDof};
use crate::{Error, Result, Space};

/// Below this `cos(φ)` the longitude direction is undefined and a fixed
/// tangent frame is used instead.
const POLE_EPS: f64 = 1e-12;

/// `(normal, e1, e2)` for each cube face.
pub const FACES: [[[f64; 3]; 3]; 6] = [
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    [[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 1.0]],
    [[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]],
    [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]],
    [[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]],
    [[0.0, 0.0, -1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]],
];

#[inline]
pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
fn axpy(s: f64, x: [f64; 3], y: [f64; 3]) -> [f64; 3] {
    [y[0] + s * x[0], y[1] + s * x[1], y[2] + s * x[2]]
}

/// Longitude and latitude (radians) of a unit vector.
pub fn lonlat(x: [f64; 3]) -> (f64, f64) {
    let lat = x[2].clamp(-1.0, 1.0).asin();
    let lon = x[1].atan2(x[0]);
    (lon, lat)
}

/// Unit vector from longitude and latitude (radians).
pub fn from_lonlat(lon: f64, lat: f64) -> [f64; 3] {
    [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
}

/// Local eastward and northward unit vectors at a point of the unit sphere.
///
/// At the poles the limits are direction dependent; a fixed frame with the
/// same handedness (`east × north = x`) is returned there.
pub fn tangent_frame(x: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let rho = x[0].hypot(x[1]);
    if rho < POLE_EPS {
        let s = if x[2] >= 0.0 { 1.0 } else { -1.0 };
        return ([0.0, 1.0, 0.0], [-s, 0.0, 0.0]);
    }
    let east = [-x[1] / rho, x[0] / rho, 0.0];
    let north = [-x[2] * x[0] / rho, -x[2] * x[1] / rho, rho];
    (east, north)
}

/// Element address on the cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ElementId {
    pub face: usize,
    pub a: usize,
    pub b: usize,
}

/// Position and tangent vectors of a mapped point.
#[derive(Debug, Clone, Copy)]
pub struct MappedPoint {
    /// Unit position vector.
    pub xyz: [f64; 3],
    /// `∂X/∂ξ` including the radius (metres).
    pub t_xi: [f64; 3],
    /// `∂X/∂η` including the radius (metres).
    pub t_eta: [f64; 3],
}

impl MappedPoint {
    /// `[[cosφ θ_ξ, cosφ θ_η], [φ_ξ, φ_η]]` scaled by the radius.
    pub fn jacobian(&self) -> [[f64; 2]; 2] {
        let (east, north) = tangent_frame(self.xyz);
        [
            [dot(east, self.t_xi), dot(east, self.t_eta)],
            [dot(north, self.t_xi), dot(north, self.t_eta)],
        ]
    }

    /// Area element `det J`, from the tangent vectors directly.
    pub fn det(&self) -> f64 {
        dot(cross(self.t_xi, self.t_eta), self.xyz)
    }

    /// Inverse Piola map of a Cartesian tangent vector: `adj(J) v`.
    pub fn cartesian_to_reference(&self, v: [f64; 3]) -> [f64; 2] {
        [
            dot(cross(v, self.t_eta), self.xyz),
            dot(cross(self.t_xi, v), self.xyz),
        ]
    }

    /// Contravariant Piola map of a reference vector to a Cartesian tangent vector.
    pub fn piola_to_cartesian(&self, v: [f64; 2]) -> [f64; 3] {
        let s = 1.0 / self.det();
        let w = axpy(v[0], self.t_xi, axpy(v[1], self.t_eta, [0.0; 3]));
        [w[0] * s, w[1] * s, w[2] * s]
    }
}

/// Metric data at one quadrature point.
#[derive(Debug, Clone, Copy)]
pub struct QuadPoint {
    pub xyz: [f64; 3],
    pub t_xi: [f64; 3],
    pub t_eta: [f64; 3],
    pub jac: [[f64; 2]; 2],
    pub det: f64,
    /// `G = JᵀJ / det J`.
    pub metric: [[f64; 2]; 2],
}

impl QuadPoint {
    fn from_mapped(m: MappedPoint) -> Self {
        let jac = m.jacobian();
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let g00 = jac[0][0] * jac[0][0] + jac[1][0] * jac[1][0];
        let g01 = jac[0][0] * jac[0][1] + jac[1][0] * jac[1][1];
        let g11 = jac[0][1] * jac[0][1] + jac[1][1] * jac[1][1];
        Self {
            xyz: m.xyz,
            t_xi: m.t_xi,
            t_eta: m.t_eta,
            jac,
            det,
            metric: [[g00 / det, g01 / det], [g01 / det, g11 / det]],
        }
    }

    /// Piola block `J / det J`.
    pub fn piola(&self) -> [[f64; 2]; 2] {
        let d = self.det;
        [
            [self.jac[0][0] / d, self.jac[0][1] / d],
            [self.jac[1][0] / d, self.jac[1][1] / d],
        ]
    }

    /// Contravariant Piola map of a reference vector to (zonal, meridional) components.
    pub fn piola_to_sphere(&self, v: [f64; 2]) -> [f64; 2] {
        let p = self.piola();
        [
            p[0][0] * v[0] + p[0][1] * v[1],
            p[1][0] * v[0] + p[1][1] * v[1],
        ]
    }

    /// Contravariant Piola map to a Cartesian tangent vector.
    pub fn piola_to_cartesian(&self, v: [f64; 2]) -> [f64; 3] {
        let s = 1.0 / self.det;
        let w = axpy(v[1], self.t_eta, [0.0; 3]);
        let w = axpy(v[0], self.t_xi, w);
        [w[0] * s, w[1] * s, w[2] * s]
    }

    /// Inverse Piola map of a Cartesian tangent vector: `adj(J) v`.
    pub fn cartesian_to_reference(&self, v: [f64; 3]) -> [f64; 2] {
        [
            dot(cross(v, self.t_eta), self.xyz),
            dot(cross(self.t_xi, v), self.xyz),
        ]
    }
}

/// Metric data of one element at its `(p+1)²` collocated quadrature points.
#[derive(Debug, Clone)]
pub struct ElementGeom {
    pub points: Vec<QuadPoint>,
}

/// Maps values at quadrature points to physical values according to the
/// space they belong to: W values are point values, Q values are densities
/// with respect to the reference cell and are divided by `det J`.
pub fn scalar_to_sphere(geom: &ElementGeom, values: &[f64], space: Space) -> Result<Vec<f64>> {
    match space {
        Space::W => Ok(values.to_vec()),
        Space::Q => Ok(values
            .iter()
            .zip(&geom.points)
            .map(|(v, q)| v / q.det)
            .collect()),
        Space::U => Err(Error::SpaceMismatch {
            expected: Space::Q,
            found: Space::U,
        }),
    }
}

/// The cubed-sphere mesh with per-element geometry and global DOF maps.
#[derive(Debug, Clone)]
pub struct CubedSphereMesh {
    ne: usize,
    p: usize,
    radius: f64,
    spaces: LocalSpaces,
    geoms: Vec<ElementGeom>,
    w_map: Vec<usize>,
    u_map: Vec<usize>,
    u_sign: Vec<f64>,
    n_w: usize,
    n_u: usize,
    /// Unit position of every global W node.
    w_xyz: Vec<[f64; 3]>,
}

impl CubedSphereMesh {
    /// Builds the mesh: `6 N_e²` elements of degree `p` on a sphere of radius `radius`.
    pub fn new(ne: usize, p: usize, radius: f64) -> Result<Self> {
        if ne == 0 {
            return Err(Error::Config("N_e must be at least 1".into()));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Config(format!("radius must be positive, got {radius}")));
        }
        let spaces = LocalSpaces::new(p)?;
        let mut mesh = Self {
            ne,
            p,
            radius,
            spaces,
            geoms: Vec::new(),
            w_map: Vec::new(),
            u_map: Vec::new(),
            u_sign: Vec::new(),
            n_w: 0,
            n_u: 0,
            w_xyz: Vec::new(),
        };
        mesh.number_dofs();
        let geoms: Result<Vec<ElementGeom>> = (0..mesh.num_elements())
            .into_par_iter()
            .map(|e| mesh.compute_geometry(e))
            .collect();
        mesh.geoms = geoms?;
        Ok(mesh)
    }

    pub fn ne(&self) -> usize {
        self.ne
    }

    pub fn degree(&self) -> usize {
        self.p
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn spaces(&self) -> &LocalSpaces {
        &self.spaces
    }

    pub fn num_elements(&self) -> usize {
        6 * self.ne * self.ne
    }

    pub fn n_w(&self) -> usize {
        self.n_w
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }

    pub fn n_q(&self) -> usize {
        self.num_elements() * self.p * self.p
    }

    pub fn dofs(&self, space: Space) -> usize {
        match space {
            Space::W => self.n_w,
            Space::U => self.n_u,
            Space::Q => self.n_q(),
        }
    }

    pub fn element_id(&self, e: usize) -> ElementId {
        let n2 = self.ne * self.ne;
        ElementId {
            face: e / n2,
            a: (e % n2) / self.ne,
            b: e % self.ne,
        }
    }

    pub fn element_index(&self, id: ElementId) -> usize {
        id.face * self.ne * self.ne + id.a * self.ne + id.b
    }

    pub fn geometry(&self, e: usize) -> &ElementGeom {
        &self.geoms[e]
    }

    /// Global W ids of element `e`, in local order.
    pub fn w_dofs(&self, e: usize) -> &[usize] {
        let d = self.spaces.dim_w();
        &self.w_map[e * d..(e + 1) * d]
    }

    /// Global U ids of element `e`, in local order.
    pub fn u_dofs(&self, e: usize) -> &[usize] {
        let d = self.spaces.dim_u();
        &self.u_map[e * d..(e + 1) * d]
    }

    /// Orientation signs (`±1`) relating local to global U DOFs of element `e`.
    pub fn u_signs(&self, e: usize) -> &[f64] {
        let d = self.spaces.dim_u();
        &self.u_sign[e * d..(e + 1) * d]
    }

    /// First global Q id of element `e`; its cells are contiguous.
    pub fn q_offset(&self, e: usize) -> usize {
        e * self.spaces.dim_q()
    }

    /// Unit position vectors of the global W nodes.
    pub fn w_positions(&self) -> &[[f64; 3]] {
        &self.w_xyz
    }

    /// Average nodal spacing along the equator, `2π r / (4 N_e p)`.
    pub fn equatorial_spacing(&self) -> f64 {
        2.0 * PI * self.radius / (4 * self.ne * self.p) as f64
    }

    fn delta(&self) -> f64 {
        PI / (2 * self.ne) as f64
    }

    /// Angle of lattice line `m` in `0..=N_e p`; odd-symmetric bit for bit.
    fn lattice_angle(&self, m: usize) -> f64 {
        let big = self.ne * self.p;
        if 2 * m > big {
            return -self.lattice_angle(big - m);
        }
        let (a, i) = (m / self.p, m % self.p);
        let x = self.spaces.basis().nodes()[i];
        -FRAC_PI_4 + (a as f64 + 0.5 * (x + 1.0)) * self.delta()
    }

    fn point_from_angles(&self, face: usize, alpha: f64, beta: f64) -> MappedPoint {
        let [n, e1, e2] = FACES[face];
        let (ta, tb) = (alpha.tan(), beta.tan());
        let v = axpy(tb, e2, axpy(ta, e1, n));
        let norm = dot(v, v).sqrt();
        let x = [v[0] / norm, v[1] / norm, v[2] / norm];
        let half = 0.5 * self.delta();
        let tangent = |dir: [f64; 3], t: f64| {
            // dv/dξ = sec²α (Δ/2) e1, projected onto the tangent plane and scaled
            let dv = (1.0 + t * t) * half;
            let s = dot(x, dir);
            let proj = [dir[0] - s * x[0], dir[1] - s * x[1], dir[2] - s * x[2]];
            let f = self.radius * dv / norm;
            [proj[0] * f, proj[1] * f, proj[2] * f]
        };
        MappedPoint {
            xyz: x,
            t_xi: tangent(e1, ta),
            t_eta: tangent(e2, tb),
        }
    }

    /// Maps reference coordinates of element `e` to the sphere.
    pub fn map_point(&self, e: usize, xi: f64, eta: f64) -> MappedPoint {
        let id = self.element_id(e);
        let d = self.delta();
        let alpha = -FRAC_PI_4 + (id.a as f64 + 0.5 * (xi + 1.0)) * d;
        let beta = -FRAC_PI_4 + (id.b as f64 + 0.5 * (eta + 1.0)) * d;
        self.point_from_angles(id.face, alpha, beta)
    }

    /// Element containing the unit vector `x` and the reference coordinates there.
    pub fn locate(&self, x: [f64; 3]) -> (usize, f64, f64) {
        let mut face = 0;
        let mut best = f64::NEG_INFINITY;
        for (f, frame) in FACES.iter().enumerate() {
            let d = dot(frame[0], x);
            if d > best {
                best = d;
                face = f;
            }
        }
        let [n, e1, e2] = FACES[face];
        let xn = dot(x, n);
        let alpha = (dot(x, e1) / xn).atan();
        let beta = (dot(x, e2) / xn).atan();
        let d = self.delta();
        let split = |ang: f64| {
            let s = (ang + FRAC_PI_4) / d;
            let k = (s.floor().max(0.0) as usize).min(self.ne - 1);
            (k, 2.0 * (s - k as f64) - 1.0)
        };
        let (a, xi) = split(alpha);
        let (b, eta) = split(beta);
        (self.element_index(ElementId { face, a, b }), xi, eta)
    }

    fn compute_geometry(&self, e: usize) -> Result<ElementGeom> {
        let id = self.element_id(e);
        let p = self.p;
        let mut points = Vec::with_capacity((p + 1) * (p + 1));
        for i in 0..=p {
            let alpha = self.lattice_angle(id.a * p + i);
            for j in 0..=p {
                let beta = self.lattice_angle(id.b * p + j);
                let qp = QuadPoint::from_mapped(self.point_from_angles(id.face, alpha, beta));
                if !(qp.det > 0.0) || !qp.det.is_finite() {
                    return Err(Error::Geometry {
                        element: e,
                        point: points.len(),
                        det: qp.det,
                    });
                }
                points.push(qp);
            }
        }
        Ok(ElementGeom { points })
    }

    /// Integer coordinates of a W node on the `(N_e p)³` cube lattice.
    fn lattice_key(&self, face: usize, m1: usize, m2: usize) -> [u32; 3] {
        let big = self.ne * self.p;
        let [n, e1, e2] = FACES[face];
        let mut key = [0u32; 3];
        for ax in 0..3 {
            key[ax] = if n[ax] != 0.0 {
                if n[ax] > 0.0 {
                    big as u32
                } else {
                    0
                }
            } else if e1[ax] != 0.0 {
                if e1[ax] > 0.0 {
                    m1 as u32
                } else {
                    (big - m1) as u32
                }
            } else if e2[ax] > 0.0 {
                m2 as u32
            } else {
                (big - m2) as u32
            };
        }
        key
    }

    fn number_dofs(&mut self) {
        let p = self.p;
        let dw = self.spaces.dim_w();
        let du = self.spaces.dim_u();
        let nel = self.num_elements();
        let mut w_ids: HashMap<[u32; 3], usize> = HashMap::new();
        let mut w_map = Vec::with_capacity(nel * dw);
        let mut w_xyz = Vec::new();
        for e in 0..nel {
            let id = self.element_id(e);
            for k in 0..dw {
                let (i, j) = self.spaces.w_dof(k);
                let (m1, m2) = (id.a * p + i, id.b * p + j);
                let key = self.lattice_key(id.face, m1, m2);
                let next = w_ids.len();
                let g = *w_ids.entry(key).or_insert(next);
                if g == next {
                    let pt = self.point_from_angles(
                        id.face,
                        self.lattice_angle(m1),
                        self.lattice_angle(m2),
                    );
                    w_xyz.push(pt.xyz);
                }
                w_map.push(g);
            }
        }
        self.n_w = w_ids.len();

        let mut u_ids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut u_map = Vec::with_capacity(nel * du);
        let mut u_sign = Vec::with_capacity(nel * du);
        for e in 0..nel {
            let w = &w_map[e * dw..(e + 1) * dw];
            for k in 0..du {
                // segment start/end nodes and the sign of the local normal
                // relative to the clockwise rotation of the start->end tangent
                let (start, end, local) = match self.spaces.u_dof(k) {
                    UDof::Xi { i, j } => (
                        w[self.spaces.w_index(i, j - 1)],
                        w[self.spaces.w_index(i, j)],
                        1.0,
                    ),
                    UDof::Eta { i, j } => (
                        w[self.spaces.w_index(i - 1, j)],
                        w[self.spaces.w_index(i, j)],
                        -1.0,
                    ),
                };
                let key = (start.min(end), start.max(end));
                let next = u_ids.len();
                let g = *u_ids.entry(key).or_insert(next);
                u_map.push(g);
                u_sign.push(if start < end { local } else { -local });
            }
        }
        self.n_u = u_ids.len();
        self.w_map = w_map;
        self.w_xyz = w_xyz;
        self.u_map = u_map;
        self.u_sign = u_sign;
    }

    /// Local, sign-corrected copy of the U coefficients of element `e`.
    pub fn gather_u(&self, e: usize, global: &[f64], local: &mut [f64]) {
        for ((l, &g), &s) in local.iter_mut().zip(self.u_dofs(e)).zip(self.u_signs(e)) {
            *l = s * global[g];
        }
    }

    /// Adds the sign-corrected local U vector of element `e` into `global`.
    pub fn scatter_add_u(&self, e: usize, local: &[f64], global: &mut [f64]) {
        for ((l, &g), &s) in local.iter().zip(self.u_dofs(e)).zip(self.u_signs(e)) {
            global[g] += s * l;
        }
    }

    pub fn gather_w(&self, e: usize, global: &[f64], local: &mut [f64]) {
        for (l, &g) in local.iter_mut().zip(self.w_dofs(e)) {
            *l = global[g];
        }
    }

    pub fn scatter_add_w(&self, e: usize, local: &[f64], global: &mut [f64]) {
        for (l, &g) in local.iter().zip(self.w_dofs(e)) {
            global[g] += l;
        }
    }

    /// Q coefficients of element `e`.
    pub fn q_slice<'a>(&self, e: usize, global: &'a [f64]) -> &'a [f64] {
        let d = self.spaces.dim_q();
        &global[e * d..(e + 1) * d]
    }

    /// Plain-text dump of element corners (lon/lat in degrees) and DOF counts.
    pub fn write_dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# cubed sphere N_e={} p={} radius={:.17e}", self.ne, self.p, self.radius)?;
        writeln!(
            out,
            "# elements={} n_W={} n_U={} n_Q={}",
            self.num_elements(),
            self.n_w,
            self.n_u,
            self.n_q()
        )?;
        writeln!(out, "element,face,a,b,corner,lon_deg,lat_deg")?;
        for e in 0..self.num_elements() {
            let id = self.element_id(e);
            for (c, (xi, eta)) in [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
                .into_iter()
                .enumerate()
            {
                let (lon, lat) = lonlat(self.map_point(e, xi, eta).xyz);
                writeln!(
                    out,
                    "{e},{},{},{},{c},{:.17e},{:.17e}",
                    id.face,
                    id.a,
                    id.b,
                    lon.to_degrees(),
                    lat.to_degrees()
                )?;
            }
        }
        Ok(())
    }
}
