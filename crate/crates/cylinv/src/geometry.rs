//! Cross-section geometry, truncated cylinders and nested collar regions.
//!
//! Cross-sections are bounded, simply connected, star-shaped domains given in
//! closed form (disk, ellipse, convex polygon with rounded corners). Collar
//! regions are built from the exact signed distance to the boundary, so the
//! outer boundary of every collar is exactly the cross-section boundary.

use serde::{Deserialize, Serialize};

use crate::{CylError, Result};

/// Shape specification as it appears in config files.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeSpec {
    Disk {
        radius: f64,
    },
    Ellipse {
        semi_axis_x: f64,
        semi_axis_y: f64,
    },
    RoundedPolygon {
        vertices: Vec<[f64; 2]>,
        rounding: f64,
    },
    /// Not simply connected; rejected by [`build_cross_section`].
    Annulus {
        inner_radius: f64,
        outer_radius: f64,
    },
}

/// Validated, closed-form shape.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Disk { radius: f64 },
    Ellipse { a: f64, b: f64 },
    RoundedPolygon { vertices: Vec<[f64; 2]>, rounding: f64 },
}

impl Shape {
    /// Signed distance to the boundary, negative inside.
    pub fn signed_distance(&self, x: [f64; 2]) -> f64 {
        match self {
            Shape::Disk { radius } => (x[0] * x[0] + x[1] * x[1]).sqrt() - radius,
            Shape::Ellipse { a, b } => ellipse_signed_distance(*a, *b, x),
            Shape::RoundedPolygon { vertices, rounding } => {
                convex_polygon_signed_distance(vertices, x) - rounding
            }
        }
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        self.signed_distance(x) < 0.0
    }

    /// Boundary radius along the ray with polar angle `phi` (star-shaped).
    pub fn boundary_radius(&self, phi: f64) -> f64 {
        match self {
            Shape::Disk { radius } => *radius,
            Shape::Ellipse { a, b } => {
                let (s, c) = phi.sin_cos();
                a * b / ((b * c).powi(2) + (a * s).powi(2)).sqrt()
            }
            Shape::RoundedPolygon { .. } => {
                // d is monotone along rays for convex shapes; bisect.
                let u = [phi.cos(), phi.sin()];
                let mut lo = 0.0f64;
                let mut hi = self.sup_radius() + 1.0;
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if self.signed_distance([mid * u[0], mid * u[1]]) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    /// Outward unit normal of the boundary point at polar angle `phi`,
    /// computed from the signed distance gradient.
    pub fn outward_normal(&self, phi: f64) -> [f64; 2] {
        let r = self.boundary_radius(phi);
        let x = [r * phi.cos(), r * phi.sin()];
        let h = 1e-6;
        let gx = (self.signed_distance([x[0] + h, x[1]]) - self.signed_distance([x[0] - h, x[1]]))
            / (2.0 * h);
        let gy = (self.signed_distance([x[0], x[1] + h]) - self.signed_distance([x[0], x[1] - h]))
            / (2.0 * h);
        let n = (gx * gx + gy * gy).sqrt();
        [gx / n, gy / n]
    }

    /// `D = sup_{x' in closure(omega)} |x'|`, exact per shape.
    pub fn sup_radius(&self) -> f64 {
        match self {
            Shape::Disk { radius } => *radius,
            Shape::Ellipse { a, b } => a.max(*b),
            Shape::RoundedPolygon { vertices, rounding } => {
                vertices
                    .iter()
                    .map(|v| (v[0] * v[0] + v[1] * v[1]).sqrt())
                    .fold(0.0f64, f64::max)
                    + rounding
            }
        }
    }

    /// Inradius (largest inscribed disk about the centroid direction); used
    /// to reject self-intersecting collars.
    pub fn inradius(&self) -> f64 {
        match self {
            Shape::Disk { radius } => *radius,
            Shape::Ellipse { a, b } => a.min(*b),
            Shape::RoundedPolygon { vertices, rounding } => {
                let n = vertices.len();
                let mut d = f64::INFINITY;
                for i in 0..n {
                    let p = vertices[i];
                    let q = vertices[(i + 1) % n];
                    let e = [q[0] - p[0], q[1] - p[1]];
                    let len = (e[0] * e[0] + e[1] * e[1]).sqrt();
                    // Distance from origin to the edge line.
                    let dist = (e[0] * p[1] - e[1] * p[0]).abs() / len;
                    d = d.min(dist);
                }
                d + rounding
            }
        }
    }
}

fn ellipse_signed_distance(a: f64, b: f64, p: [f64; 2]) -> f64 {
    // Closest boundary point by Newton iteration on the parametric angle in
    // the first quadrant; sign from the implicit equation.
    let px = p[0].abs();
    let py = p[1].abs();
    let mut t: f64 = py.atan2(px).max(1e-8);
    for _ in 0..40 {
        let (s, c) = t.sin_cos();
        let ex = a * c;
        let ey = b * s;
        let rx = ex - px;
        let ry = ey - py;
        // f(t) = derivative of half squared distance.
        let f = -a * s * rx + b * c * ry;
        let df = -a * c * rx + a * s * a * s - b * s * ry + b * c * b * c;
        let step = f / df;
        t -= step;
        t = t.clamp(0.0, std::f64::consts::FRAC_PI_2);
        if step.abs() < 1e-14 {
            break;
        }
    }
    let (s, c) = t.sin_cos();
    let d = ((a * c - px).powi(2) + (b * s - py).powi(2)).sqrt();
    let inside = (p[0] / a).powi(2) + (p[1] / b).powi(2) < 1.0;
    if inside {
        -d
    } else {
        d
    }
}

fn convex_polygon_signed_distance(vertices: &[[f64; 2]], p: [f64; 2]) -> f64 {
    let n = vertices.len();
    let mut max_plane = f64::NEG_INFINITY;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        let e = [b[0] - a[0], b[1] - a[1]];
        let len = (e[0] * e[0] + e[1] * e[1]).sqrt();
        // Outward normal for counter-clockwise vertex order.
        let nrm = [e[1] / len, -e[0] / len];
        let s = nrm[0] * (p[0] - a[0]) + nrm[1] * (p[1] - a[1]);
        max_plane = max_plane.max(s);
    }
    if max_plane <= 0.0 {
        return max_plane; // inside: plane distance is exact for convex
    }
    // Outside: Euclidean distance to the nearest edge segment.
    let mut d = f64::INFINITY;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        let e = [b[0] - a[0], b[1] - a[1]];
        let len2 = e[0] * e[0] + e[1] * e[1];
        let t = (((p[0] - a[0]) * e[0] + (p[1] - a[1]) * e[1]) / len2).clamp(0.0, 1.0);
        let q = [a[0] + t * e[0], a[1] + t * e[1]];
        d = d.min(((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt());
    }
    d
}

/// Simple triangulated mesh of the cross-section (rings of nodes around a
/// center node). Used for region verification and CSV export; the PDE solver
/// has its own grid.
#[derive(Debug, Clone)]
pub struct Mesh2d {
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    /// Indices of boundary nodes together with their polar angles.
    pub boundary: Vec<(usize, f64)>,
}

fn build_mesh(shape: &Shape, h: f64) -> Mesh2d {
    let rmax = shape.sup_radius();
    let n_r = ((rmax / h).ceil() as usize).max(2);
    let n_phi = ((2.0 * std::f64::consts::PI * rmax / h).ceil() as usize).max(8);
    let mut nodes = vec![[0.0, 0.0]];
    let mut boundary = vec![];
    for i in 1..=n_r {
        for j in 0..n_phi {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / n_phi as f64;
            let rb = shape.boundary_radius(phi);
            let r = rb * i as f64 / n_r as f64;
            nodes.push([r * phi.cos(), r * phi.sin()]);
            if i == n_r {
                boundary.push((nodes.len() - 1, phi));
            }
        }
    }
    let idx = |i: usize, j: usize| -> usize {
        if i == 0 {
            0
        } else {
            1 + (i - 1) * n_phi + (j % n_phi)
        }
    };
    let mut triangles = vec![];
    for j in 0..n_phi {
        triangles.push([0, idx(1, j), idx(1, j + 1)]);
    }
    for i in 1..n_r {
        for j in 0..n_phi {
            triangles.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            triangles.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    Mesh2d {
        nodes,
        triangles,
        boundary,
    }
}

/// An open arc of the boundary, parametrized by polar angle.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct BoundaryArc {
    pub phi_start: f64,
    pub phi_end: f64,
}

impl BoundaryArc {
    pub fn full() -> Self {
        BoundaryArc {
            phi_start: 0.0,
            phi_end: 2.0 * std::f64::consts::PI,
        }
    }

    pub fn is_full(&self) -> bool {
        (self.phi_end - self.phi_start) >= 2.0 * std::f64::consts::PI - 1e-12
    }

    pub fn contains(&self, phi: f64) -> bool {
        if self.is_full() {
            return true;
        }
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut t = (phi - self.phi_start).rem_euclid(two_pi);
        if t > two_pi - 1e-14 {
            t = 0.0;
        }
        t < (self.phi_end - self.phi_start)
    }

    pub fn length(&self) -> f64 {
        self.phi_end - self.phi_start
    }
}

/// Discretized cross-section with the constants used downstream.
#[derive(Debug, Clone)]
pub struct CrossSection {
    pub shape: Shape,
    pub mesh: Mesh2d,
    /// Mesh size used to build `mesh`.
    pub h: f64,
    /// `D = sup |x'|` over the closure.
    pub d_sup: f64,
    /// Radius of the disk `B'_{r0}` containing the closure; `r0 = D + 1`.
    pub r0: f64,
    /// Observed portion of the boundary.
    pub gamma0: BoundaryArc,
}

/// Build and validate a cross-section.
pub fn build_cross_section(spec: &ShapeSpec, h: f64) -> Result<CrossSection> {
    if h <= 0.0 {
        return Err(CylError::Geometry(format!("mesh size h must be > 0, got {h}")));
    }
    let shape = match spec {
        ShapeSpec::Disk { radius } => {
            if *radius <= 0.0 {
                return Err(CylError::Geometry("degenerate disk: radius <= 0".into()));
            }
            Shape::Disk { radius: *radius }
        }
        ShapeSpec::Ellipse {
            semi_axis_x,
            semi_axis_y,
        } => {
            if *semi_axis_x <= 0.0 || *semi_axis_y <= 0.0 {
                return Err(CylError::Geometry("degenerate ellipse: semi-axis <= 0".into()));
            }
            Shape::Ellipse {
                a: *semi_axis_x,
                b: *semi_axis_y,
            }
        }
        ShapeSpec::RoundedPolygon { vertices, rounding } => {
            if vertices.len() < 3 {
                return Err(CylError::Geometry("polygon needs at least 3 vertices".into()));
            }
            if *rounding < 0.0 {
                return Err(CylError::Geometry("rounding must be >= 0".into()));
            }
            let area = polygon_area(vertices);
            if area <= 1e-12 {
                return Err(CylError::Geometry(
                    "degenerate polygon: zero area or clockwise order".into(),
                ));
            }
            if !is_convex(vertices) {
                return Err(CylError::Geometry("polygon must be convex".into()));
            }
            Shape::RoundedPolygon {
                vertices: vertices.clone(),
                rounding: *rounding,
            }
        }
        ShapeSpec::Annulus { .. } => {
            return Err(CylError::Geometry(
                "annulus is not simply connected; cross-sections must be simply connected".into(),
            ));
        }
    };
    let d_sup = shape.sup_radius();
    let mesh = build_mesh(&shape, h);
    Ok(CrossSection {
        shape,
        mesh,
        h,
        d_sup,
        r0: d_sup + 1.0,
        gamma0: BoundaryArc::full(),
    })
}

fn polygon_area(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    let mut a = 0.0;
    for i in 0..n {
        let p = v[i];
        let q = v[(i + 1) % n];
        a += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * a
}

fn is_convex(v: &[[f64; 2]]) -> bool {
    let n = v.len();
    for i in 0..n {
        let a = v[i];
        let b = v[(i + 1) % n];
        let c = v[(i + 2) % n];
        let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
        if cross <= 0.0 {
            return false;
        }
    }
    true
}

/// The truncated cylinder `omega x [-L, L]`.
#[derive(Debug, Clone)]
pub struct TruncatedCylinder {
    pub cross_section: CrossSection,
    pub half_length: f64,
    pub h_axial: f64,
    pub margin: f64,
    /// Largest CGO parameter the truncation was sized for.
    pub rho_max: f64,
}

/// Size the cylinder so that `supp psi(rho^{-1/4} x3)` stays `margin` away
/// from the caps for every `rho <= rho_max`: `L = 2 (2 rho_max^{1/4}) + margin`.
pub fn truncate(
    cs: &CrossSection,
    rho_max: f64,
    margin: f64,
    h_axial: f64,
) -> Result<TruncatedCylinder> {
    if rho_max <= 1.0 {
        return Err(CylError::Geometry(format!(
            "rho_max must be > 1, got {rho_max}"
        )));
    }
    if margin <= 0.0 {
        return Err(CylError::Geometry(format!("margin must be > 0, got {margin}")));
    }
    if h_axial <= 0.0 {
        return Err(CylError::Geometry("h_axial must be > 0".into()));
    }
    let half_length = 2.0 * (2.0 * rho_max.powf(0.25)) + margin;
    Ok(TruncatedCylinder {
        cross_section: cs.clone(),
        half_length,
        h_axial,
        margin,
        rho_max,
    })
}

/// Nested collar regions `W3 subset W2 subset W1 subset W0` about the
/// boundary, the inner boundary `Gamma_sharp` of `W0`, and the bands
/// `W_sharp`, `W_sharp_tilde` around `Gamma_sharp`.
#[derive(Debug, Clone)]
pub struct RegionChain {
    pub widths: [f64; 4],
    pub sharp_width: f64,
    /// Width of the inner band `W_sharp_tilde` (half of `sharp_width`).
    pub sharp_tilde_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    W(usize),
    Sharp,
    SharpTilde,
}

impl RegionChain {
    /// Membership test against the signed distance `d` to the boundary
    /// (negative inside the cross-section).
    pub fn contains(&self, region: Region, d: f64) -> bool {
        match region {
            Region::W(j) => d > -self.widths[j] && d < 0.0,
            Region::Sharp => (d + self.widths[0]).abs() < self.sharp_width,
            Region::SharpTilde => (d + self.widths[0]).abs() < self.sharp_tilde_width,
        }
    }

    /// Distance of the `Gamma_sharp` curve from the boundary.
    pub fn gamma_sharp_depth(&self) -> f64 {
        self.widths[0]
    }
}

pub fn build_region_chain(
    cs: &CrossSection,
    widths: [f64; 4],
    sharp_width: f64,
) -> Result<RegionChain> {
    for k in 0..3 {
        if widths[k + 1] >= widths[k] {
            return Err(CylError::Geometry(format!(
                "collar widths must be strictly decreasing, got {widths:?}"
            )));
        }
    }
    if widths[3] <= 0.0 {
        return Err(CylError::Geometry("collar widths must be positive".into()));
    }
    if sharp_width <= 0.0 {
        return Err(CylError::Geometry("sharp_width must be > 0".into()));
    }
    let inr = cs.shape.inradius();
    if widths[0] >= 0.95 * inr {
        return Err(CylError::Geometry(format!(
            "collar width {} too large for inradius {inr}: collars would self-intersect",
            widths[0]
        )));
    }
    // W_sharp must stay clear of the closure of W1.
    if widths[0] - sharp_width <= widths[1] {
        return Err(CylError::Geometry(format!(
            "sharp band of width {sharp_width} at depth {} touches W1 (width {})",
            widths[0], widths[1]
        )));
    }
    let chain = RegionChain {
        widths,
        sharp_width,
        sharp_tilde_width: 0.5 * sharp_width,
    };
    // Nodewise nesting check on the mesh.
    for node in &cs.mesh.nodes {
        let d = cs.shape.signed_distance(*node);
        for j in 0..3 {
            let inner = chain.contains(Region::W(j + 1), d);
            let outer = chain.contains(Region::W(j), d);
            if inner && !outer {
                return Err(CylError::Geometry(format!(
                    "nesting violated at node {node:?}: in W{} but not W{}",
                    j + 1,
                    j
                )));
            }
        }
        if chain.contains(Region::Sharp, d) && chain.contains(Region::W(1), d) {
            return Err(CylError::Geometry(format!(
                "W_sharp intersects closure(W1) at {node:?}"
            )));
        }
    }
    Ok(chain)
}

/// Export the node/element tables as CSV (`nodes.csv`, `elements.csv` bodies).
pub fn mesh_to_csv(mesh: &Mesh2d) -> (String, String) {
    let mut nodes = String::from("id,x,y\n");
    for (i, n) in mesh.nodes.iter().enumerate() {
        nodes.push_str(&format!("{i},{:.12e},{:.12e}\n", n[0], n[1]));
    }
    let mut elems = String::from("id,n0,n1,n2\n");
    for (i, t) in mesh.triangles.iter().enumerate() {
        elems.push_str(&format!("{i},{},{},{}\n", t[0], t[1], t[2]));
    }
    (nodes, elems)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_disk_constants() {
        let cs = build_cross_section(&ShapeSpec::Disk { radius: 1.0 }, 0.1).unwrap();
        assert!((cs.d_sup - 1.0).abs() < 1e-14);
        assert!((cs.r0 - 2.0).abs() < 1e-14);
    }

    #[test]
    fn ellipse_sup_radius() {
        let cs = build_cross_section(
            &ShapeSpec::Ellipse {
                semi_axis_x: 1.0,
                semi_axis_y: 0.5,
            },
            0.05,
        )
        .unwrap();
        assert!((cs.d_sup - 1.0).abs() < 1e-14);
    }

    #[test]
    fn annulus_rejected() {
        let err = build_cross_section(
            &ShapeSpec::Annulus {
                inner_radius: 0.5,
                outer_radius: 1.0,
            },
            0.1,
        );
        assert!(err.is_err());
    }

    #[test]
    fn truncation_lengths() {
        let cs = build_cross_section(&ShapeSpec::Disk { radius: 1.0 }, 0.2).unwrap();
        let t = truncate(&cs, 16.0, 2.0, 0.1).unwrap();
        assert!((t.half_length - 10.0).abs() < 1e-12);
        assert!(truncate(&cs, 1.0, 2.0, 0.1).is_err());
        let t2 = truncate(&cs, 81.0, 0.5, 0.1).unwrap();
        assert!((t2.half_length - 12.5).abs() < 1e-12);
        assert!(truncate(&cs, 16.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn region_chain_on_disk() {
        let cs = build_cross_section(&ShapeSpec::Disk { radius: 1.0 }, 0.05).unwrap();
        let chain = build_region_chain(&cs, [0.4, 0.3, 0.2, 0.1], 0.05).unwrap();
        assert!((chain.gamma_sharp_depth() - 0.4).abs() < 1e-14);
        // Gamma_sharp is the circle of radius 0.6.
        let d = cs.shape.signed_distance([0.6, 0.0]);
        assert!((d + 0.4).abs() < 1e-12);
        // Not strictly decreasing.
        assert!(build_region_chain(&cs, [0.3, 0.3, 0.2, 0.1], 0.05).is_err());
        // Self-intersecting collar.
        assert!(build_region_chain(&cs, [0.97, 0.5, 0.2, 0.1], 0.05).is_err());
    }

    #[test]
    fn region_nesting_pointwise() {
        let cs = build_cross_section(&ShapeSpec::Disk { radius: 1.0 }, 0.04).unwrap();
        let chain = build_region_chain(&cs, [0.4, 0.3, 0.2, 0.1], 0.05).unwrap();
        for node in &cs.mesh.nodes {
            let d = cs.shape.signed_distance(*node);
            let ind: Vec<bool> = (0..4).map(|j| chain.contains(Region::W(j), d)).collect();
            assert!(!(ind[3] && !ind[2]));
            assert!(!(ind[2] && !ind[1]));
            assert!(!(ind[1] && !ind[0]));
        }
    }

    #[test]
    fn lateral_normals_have_zero_axial_component() {
        // Normals are 2D by construction; the lateral 3D normal is (n', 0).
        let cs = build_cross_section(&ShapeSpec::Disk { radius: 1.0 }, 0.1).unwrap();
        for &(_, phi) in cs.mesh.boundary.iter().take(10) {
            let n = cs.shape.outward_normal(phi);
            let n3 = [n[0], n[1], 0.0];
            assert_eq!(n3[2], 0.0);
            assert!((n[0].hypot(n[1]) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn refinement_drift_of_d_is_second_order() {
        // Mesh-based sup over nodes approaches the exact D at O(h^2) for the
        // ellipse (boundary nodes lie on the exact boundary; drift comes from
        // the angular sampling of the sup).
        let exact = 1.0;
        let mut errs = vec![];
        for h in [0.2, 0.1, 0.05] {
            let cs = build_cross_section(
                &ShapeSpec::Ellipse {
                    semi_axis_x: 1.0,
                    semi_axis_y: 0.5,
                },
                h,
            )
            .unwrap();
            let d_mesh = cs
                .mesh
                .nodes
                .iter()
                .map(|n| n[0].hypot(n[1]))
                .fold(0.0f64, f64::max);
            errs.push((exact - d_mesh).abs().max(1e-16));
        }
        // Drift bounded by C h^2 with a fixed constant.
        for (i, h) in [0.2, 0.1, 0.05].iter().enumerate() {
            assert!(errs[i] <= 2.0 * h * h, "h={h} err={}", errs[i]);
        }
    }

    #[test]
    fn rounded_polygon_distance_and_radius() {
        let sq = ShapeSpec::RoundedPolygon {
            vertices: vec![[0.6, -0.6], [0.6, 0.6], [-0.6, 0.6], [-0.6, -0.6]],
            rounding: 0.2,
        };
        let cs = build_cross_section(&sq, 0.1).unwrap();
        // Interior point.
        assert!(cs.shape.signed_distance([0.0, 0.0]) < 0.0);
        // On-axis boundary at 0.8.
        assert!((cs.shape.signed_distance([0.8, 0.0])).abs() < 1e-12);
        // Corner arc: D = |v| + rounding.
        let exp = (0.6f64 * 0.6 + 0.6 * 0.6).sqrt() + 0.2;
        assert!((cs.d_sup - exp).abs() < 1e-12);
    }

    #[test]
    fn boundary_arc_membership() {
        let arc = BoundaryArc {
            phi_start: -0.5,
            phi_end: 0.5,
        };
        assert!(arc.contains(0.0));
        assert!(arc.contains(-0.49));
        assert!(!arc.contains(1.0));
        assert!(!arc.contains(std::f64::consts::PI));
        assert!(BoundaryArc::full().contains(3.0));
    }
}
