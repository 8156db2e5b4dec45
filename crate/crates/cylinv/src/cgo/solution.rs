//! Assembled CGO solutions: the axial cutoff profile, principal parts,
//! amplitudes with their transport residual, and the numerically solved
//! remainder with its norm report. The large lateral exponential
//! `e^{+-rho theta.x'}` stays symbolic throughout: all fields are stored in
//! conjugated (slow) variables and the exponent is carried by the
//! [`Conjugation`] of the discrete operator, which is exact on grid links.

use num_complex::Complex64;

use crate::cgo::frame::CgoFrame;
use crate::cgo::phase::CauchyPhase;
use crate::expr::{ScalarExpr, VectorExpr};
use crate::grid::CylGrid;
use crate::solver::{assemble, BoundaryData, Conjugation, OperatorSpec};
use crate::Result;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// The fixed axial cutoff profile: `psi = 1` on `[-1, 1]`, `supp psi = [-2, 2]`,
/// assembled from `e^{-1/t}` mollifiers.
pub fn psi_cutoff(t: f64) -> f64 {
    let a = t.abs();
    if a <= 1.0 {
        1.0
    } else if a >= 2.0 {
        0.0
    } else {
        let b = |u: f64| if u <= 0.0 { 0.0 } else { (-1.0 / u).exp() };
        let u = a - 1.0;
        b(1.0 - u) / (b(1.0 - u) + b(u))
    }
}

/// Principal part in slow variables:
/// `psi(rho^{-1/4} x3) b(x) e^{i rho x.eta} (e^{-i xi.x} when which = 1)`.
/// The full field is `e^{sign rho theta.x'}` times this; the exponent is
/// never expanded.
pub struct PrincipalPart {
    pub frame: CgoFrame,
    pub rho: f64,
    pub which: u8,
    pub phase: CauchyPhase,
}

impl PrincipalPart {
    /// Slow-variable value including the oscillatory factor `e^{i rho x.eta}`.
    pub fn eval(&self, x: [f64; 3]) -> Complex64 {
        let psi = psi_cutoff(self.rho.powf(-0.25) * x[2]);
        if psi == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let b = self.phase.phi(x).exp();
        let mut arg = self.rho * (x[0] * self.frame.eta[0] + x[1] * self.frame.eta[1] + x[2] * self.frame.eta[2]);
        if self.which == 1 {
            arg -= x[0] * self.frame.xi[0] + x[1] * self.frame.xi[1] + x[2] * self.frame.xi[2];
        }
        c(psi) * b * Complex64::from_polar(1.0, arg)
    }

    /// Value relative to the conjugation `g = sign rho theta.x' + i rho eta.x`
    /// (the oscillation `e^{i rho x.eta}` is absorbed into `g`): only
    /// `psi b e^{-i xi x}` remains.
    pub fn eval_conjugated(&self, x: [f64; 3]) -> Complex64 {
        let psi = psi_cutoff(self.rho.powf(-0.25) * x[2]);
        if psi == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let b = self.phase.phi(x).exp();
        let mut v = c(psi) * b;
        if self.which == 1 {
            let arg = -(x[0] * self.frame.xi[0] + x[1] * self.frame.xi[1] + x[2] * self.frame.xi[2]);
            v *= Complex64::from_polar(1.0, arg);
        }
        v
    }
}

/// Relative L2 residual of the amplitude transport equation
/// `(+-theta~ + i eta) . grad b + i [(+-theta~ + i eta) . A~] b = 0`
/// over a sample grid, with first-order (forward) difference gradients of
/// step `h`.
pub fn transport_residual(
    b: &dyn Fn([f64; 3]) -> Complex64,
    a_ext: &dyn Fn([f64; 3]) -> [f64; 3],
    frame: &CgoFrame,
    which: u8,
    h: f64,
) -> f64 {
    let tt = frame.theta_tilde();
    let sgn = if which == 1 { 1.0 } else { -1.0 };
    let d = [
        Complex64::new(sgn * tt[0], frame.eta[0]),
        Complex64::new(sgn * tt[1], frame.eta[1]),
        Complex64::new(sgn * tt[2], frame.eta[2]),
    ];
    let n = 9;
    let ext = 0.9;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let x = [
                    -ext + 2.0 * ext * i as f64 / (n - 1) as f64,
                    -ext + 2.0 * ext * j as f64 / (n - 1) as f64,
                    -ext + 2.0 * ext * k as f64 / (n - 1) as f64,
                ];
                let b0 = b(x);
                let mut dirderiv = Complex64::new(0.0, 0.0);
                for a in 0..3 {
                    let mut xp = x;
                    xp[a] += h;
                    dirderiv += d[a] * (b(xp) - b0) / c(h);
                }
                let av = a_ext(x);
                let ada = d[0] * c(av[0]) + d[1] * c(av[1]) + d[2] * c(av[2]);
                let res = dirderiv + Complex64::new(0.0, 1.0) * ada * b0;
                num += res.norm_sqr();
                den += (b0.norm_sqr() + 1e-30) / (h * h).max(1e-30) * 0.0 + b0.norm_sqr();
            }
        }
    }
    (num / den.max(1e-300)).sqrt()
}

/// Remainder norm report against the expected scaling shape
/// `rho^{-1}||w||_{H2} + ||w||_{H1} + rho ||w||_{L2} <~ C (|xi|^2+1)(1+r) rho^{7/8}`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RemainderNormReport {
    pub rho: f64,
    pub l2: f64,
    pub h1: f64,
    pub h2: f64,
    /// `rho^{-1} h2 + h1 + rho l2`.
    pub combined: f64,
    /// `rho l2 / (rho^{7/8} (1 + |xi'|/|xi3|)(1 + |xi|^2))`.
    pub normalized_l2: f64,
    /// Combined quantity under the same normalization.
    pub normalized_combined: f64,
}

/// A fully assembled CGO solution on a truncated cylinder (slow variables).
pub struct CgoSolution {
    pub frame: CgoFrame,
    pub rho: f64,
    pub which: u8,
    pub grid: CylGrid,
    /// Principal slow values on interior nodes.
    pub principal: Vec<Complex64>,
    /// Principal slow values on the boundary (the CGO trace data).
    pub principal_bc: BoundaryData,
    /// Remainder grid (zero lateral/cap boundary values).
    pub w: Vec<Complex64>,
    pub norm_report: RemainderNormReport,
    /// Relative residual of `principal + w` under the discrete conjugated
    /// operator (solver-floor by construction).
    pub residual_rel: f64,
    /// L2 norm of the conjugated right-hand side (diagnostic).
    pub rhs_l2: f64,
    /// Cells outside `supp psi` (|rho^{-1/4} x3| >= 2 plus a stencil band)
    /// carrying nonzero RHS; exactly zero for the discrete scheme.
    pub rhs_support_violation_cells: usize,
    /// max |RHS| on the cutoff plateau (|t| <= 1) relative to the shoulder
    /// maximum: the discretization floor of the exact `mu.mu = 0`
    /// cancellation, O((rho h)^2) relative.
    pub rhs_plateau_fraction: f64,
}

/// Solve the conjugated remainder equation for a CGO solution: with
/// `u = e^{g}(P + w)`, `g = sign rho theta.x + i rho eta.x`, the remainder
/// solves `L~ w = -L~ P` discretely with homogeneous Dirichlet data, so the
/// assembled field satisfies the discrete equation at the solver floor.
pub fn solve_remainder(
    a_field: &VectorExpr,
    q: &ScalarExpr,
    frame: &CgoFrame,
    rho: f64,
    grid: &CylGrid,
    phase: CauchyPhase,
    pivot_rtol: f64,
) -> Result<CgoSolution> {
    if rho <= 1.0 {
        return Err(crate::CylError::Numerical(format!("rho must be > 1, got {rho}")));
    }
    // Truncation compatibility: supp psi must stay inside the cylinder.
    let psi_extent = 2.0 * rho.powf(0.25);
    if psi_extent >= grid.half_length {
        return Err(crate::CylError::Numerical(format!(
            "truncation too short for rho = {rho}: psi support {psi_extent:.2} vs L = {}",
            grid.half_length
        )));
    }
    let which = if frame.sign >= 0.0 { 1 } else { 2 };
    let principal = PrincipalPart {
        frame: *frame,
        rho,
        which,
        phase,
    };
    let conj = Conjugation::cgo(rho, frame.theta, frame.eta, frame.sign);
    let op = assemble(grid, &OperatorSpec { a_field, q, conj });
    // Principal values on interior nodes and boundary.
    let n2 = grid.disk.n_interior();
    let p_int: Vec<Complex64> = crate::par::map_range(grid.n_unknowns(), |idx| {
        let (k, i2) = (idx / n2, idx % n2);
        principal.eval_conjugated(grid.point(k, i2))
    });
    let p_bc = BoundaryData::from_fn(grid, |x| principal.eval_conjugated(x));
    // Conjugated residual of the principal part = - RHS for w.
    let lp = op.apply(&p_int, &p_bc);
    let rhs: Vec<Complex64> = lp.iter().map(|v| -v).collect();
    // Support accounting: the RHS vanishes identically outside supp psi
    // (plus one stencil band); on the plateau |t| <= 1 only the O((rho h)^2)
    // discretization floor of the exact continuum cancellations remains.
    let mut violation = 0usize;
    let rho14 = rho.powf(0.25);
    let band = 2.0 * grid.dz / rho14;
    let rhs_max = rhs.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
    let mut plateau_max = 0.0f64;
    for k in 0..grid.n_levels() {
        let z = grid.z_of_level(k);
        let t = z.abs() / rho14;
        for i2 in 0..n2 {
            let v = rhs[grid.unknown_index(k, i2)].norm();
            if t >= 2.0 + band && v > 1e-12 * rhs_max.max(1.0) {
                violation += 1;
            }
            if t <= 1.0 - band {
                plateau_max = plateau_max.max(v);
            }
        }
    }
    let rhs_plateau_fraction = plateau_max / rhs_max.max(1e-300);
    let factor = op.factor(pivot_rtol)?;
    let w = factor.solve(&rhs);
    // Residual of the assembled solution.
    let assembled: Vec<Complex64> = p_int.iter().zip(w.iter()).map(|(a, b)| a + b).collect();
    let res = op.apply(&assembled, &p_bc);
    let res_norm: f64 = res.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let scale: f64 = lp.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let residual_rel = res_norm / scale.max(1e-300);
    // Norm report.
    let l2 = grid.l2_norm(&w);
    let h1 = grid.h1_seminorm(&w).hypot(l2);
    let h2 = grid.h2_seminorm(&w).hypot(h1);
    let ratio = frame.ratio();
    let xi2 = frame.xi.iter().map(|v| v * v).sum::<f64>();
    let shape = rho.powf(7.0 / 8.0) * (1.0 + ratio) * (1.0 + xi2);
    let combined = h2 / rho + h1 + rho * l2;
    let rhs_l2 = grid.l2_norm(&rhs.iter().map(|v| *v).collect::<Vec<_>>());
    Ok(CgoSolution {
        frame: *frame,
        rho,
        which,
        grid: grid.clone(),
        principal: p_int,
        principal_bc: p_bc,
        w,
        norm_report: RemainderNormReport {
            rho,
            l2,
            h1,
            h2,
            combined,
            normalized_l2: rho * l2 / shape,
            normalized_combined: combined / shape,
        },
        residual_rel,
        rhs_l2,
        rhs_support_violation_cells: violation,
        rhs_plateau_fraction,
    })
}

/// Norm report of the full CGO field, with the lateral exponential expanded
/// in log space to avoid overflow.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CgoNormReport {
    pub rho: f64,
    /// `log ||u||_{L2}` of the assembled field.
    pub log_l2: f64,
    pub log_h1: f64,
    pub log_h2: f64,
    /// Implied constant `log C = log||u||_{H2} - (D+1) rho - log((1+r)(1+|xi|^2))`.
    pub log_c_h2: f64,
    /// `||psi(rho^{-1/4} x3)||_{L2(R)}`, which scales as `rho^{1/8}`.
    pub psi_l2: f64,
    /// Log of the separable product `||e^{rho theta.x'}||_{L2(omega)} * psi_l2`
    /// (cross-check for the zero-remainder principal norm).
    pub log_separable_l2: f64,
}

pub fn cgo_norm_report(sol: &CgoSolution, d_sup: f64) -> CgoNormReport {
    let grid = &sol.grid;
    let rho = sol.rho;
    let tt = sol.frame.theta_tilde();
    let sgn = sol.frame.sign;
    let m = rho * d_sup; // max of |sign rho theta.x'| over the disk
    let n2 = grid.disk.n_interior();
    // log-space L2/H1/H2 norms of u = e^{g}(P + w): derivatives via forward
    // differences of the slow part plus the exponent factor mu.
    let mu = [
        Complex64::new(sgn * rho * tt[0], rho * sol.frame.eta[0]),
        Complex64::new(sgn * rho * tt[1], rho * sol.frame.eta[1]),
        Complex64::new(0.0, rho * sol.frame.eta[2]),
    ];
    let slow = |k: isize, i2: usize| -> Complex64 {
        if k < 0 || k >= grid.n_levels() as isize {
            Complex64::new(0.0, 0.0)
        } else {
            sol.principal[grid.unknown_index(k as usize, i2)]
                + sol.w[grid.unknown_index(k as usize, i2)]
        }
    };
    let mut s_l2 = 0.0;
    let mut s_h1 = 0.0;
    let mut s_h2 = 0.0;
    for k in 0..grid.n_levels() as isize {
        for i2 in 0..n2 {
            let x = grid.point(k as usize, i2);
            let e2 = (2.0 * (sgn * rho * (tt[0] * x[0] + tt[1] * x[1]) - m)).exp();
            let vol = grid.cell_volume(i2);
            let v = slow(k, i2);
            s_l2 += e2 * v.norm_sqr() * vol;
            // Gradient: axial direction explicitly; planar via neighbor rings
            // is grid-dependent, so use the axial plus exponent terms as the
            // H1/H2 surrogate (dominant at large rho).
            let vz = (slow(k + 1, i2) - v) / c(grid.dz);
            let mut g2 = (vz + mu[2] * v).norm_sqr();
            for a in 0..2 {
                g2 += (mu[a] * v).norm_sqr();
            }
            s_h1 += e2 * g2 * vol;
            let vzz = (slow(k + 1, i2) - v * 2.0 + slow(k - 1, i2)) / c(grid.dz * grid.dz);
            let mut h2acc = (vzz + mu[2] * mu[2] * v + (mu[2] * vz) * 2.0).norm_sqr();
            for a in 0..2 {
                h2acc += (mu[a] * mu[a] * v).norm_sqr();
            }
            s_h2 += e2 * h2acc * vol;
        }
    }
    let log_l2 = m + 0.5 * s_l2.max(1e-300).ln();
    let log_h1 = m + 0.5 * (s_l2 + s_h1).max(1e-300).ln();
    let log_h2 = m + 0.5 * (s_l2 + s_h1 + s_h2).max(1e-300).ln();
    let ratio = sol.frame.ratio();
    let xi2 = sol.frame.xi.iter().map(|v| v * v).sum::<f64>();
    let log_c_h2 = log_h2 - (d_sup + 1.0) * rho - ((1.0 + ratio) * (1.0 + xi2)).ln();
    // 1D psi norm by quadrature (exact scaling rho^{1/8}).
    let rho14 = rho.powf(0.25);
    let psi_l2 = crate::potentials::adaptive_simpson(
        &|t: f64| psi_cutoff(t / rho14).powi(2),
        -2.0 * rho14,
        2.0 * rho14,
        1e-12,
    )
    .sqrt();
    // Separable cross-check: ||e^{sgn rho theta.x'}||_{L2(omega)} via polar
    // quadrature in log space.
    let mut splane = 0.0;
    let nrq = 200;
    let npq = 256;
    let dr = grid.disk.radius / nrq as f64;
    let dphi = 2.0 * std::f64::consts::PI / npq as f64;
    for ir in 0..nrq {
        let r = (ir as f64 + 0.5) * dr;
        for jp in 0..npq {
            let phi = (jp as f64 + 0.5) * dphi;
            let xdot = r * (phi.cos() * tt[0] + phi.sin() * tt[1]);
            splane += (2.0 * (sgn * rho * xdot - m)).exp() * r * dr * dphi;
        }
    }
    let log_separable_l2 = m + 0.5 * splane.ln() + psi_l2.ln();
    CgoNormReport {
        rho,
        log_l2,
        log_h1,
        log_h2,
        log_c_h2,
        psi_l2,
        log_separable_l2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cgo::frame::make_frame;
    use crate::cgo::phase::{CauchyPhase, PhaseSource};
    use crate::expr::ScalarExpr;
    use crate::grid::{CylGrid, DiskGrid};
    use std::sync::Arc;

    #[test]
    fn psi_profile_constraints() {
        assert_eq!(psi_cutoff(0.0), 1.0);
        assert_eq!(psi_cutoff(0.99), 1.0);
        assert_eq!(psi_cutoff(-1.0), 1.0);
        assert_eq!(psi_cutoff(2.0), 0.0);
        assert_eq!(psi_cutoff(-2.3), 0.0);
        let v = psi_cutoff(1.5);
        assert!(v > 0.0 && v < 1.0);
        // Monotone on the shoulder.
        assert!(psi_cutoff(1.2) > psi_cutoff(1.7));
    }

    fn trivial_phase(frame: &CgoFrame) -> CauchyPhase {
        CauchyPhase {
            which: 1,
            theta_tilde: frame.theta_tilde(),
            eta: frame.eta,
            source: PhaseSource::Closed(vec![]),
            quad_radius: 3.0,
            n_radial: 8,
            n_angular: 8,
        }
    }

    #[test]
    fn principal_part_support_and_modulus() {
        let frame = make_frame([1.0, 0.0], [0.0, 1.0, 1.0], 1.0).unwrap();
        let rho = 16.0;
        let p = PrincipalPart {
            frame,
            rho,
            which: 1,
            phase: trivial_phase(&frame),
        };
        // |rho^{-1/4} x3| >= 2 kills the field: x3 >= 2 * 2 = 4.
        assert_eq!(p.eval([0.3, 0.1, 4.1]).norm(), 0.0);
        // On [-1,1] * rho^{1/4} with b = 1, xi arbitrary: modulus 1.
        let v = p.eval([0.3, -0.2, 1.0]);
        assert!((v.norm() - 1.0).abs() < 1e-14);
        // Modulus never exceeds sup|b| = 1 here.
        for x in [[0.2, 0.0, 3.2], [0.0, 0.5, 3.9], [0.1, 0.1, 0.0]] {
            assert!(p.eval(x).norm() <= 1.0 + 1e-14);
        }
    }

    #[test]
    fn transport_residual_zero_field_and_scaling() {
        let frame = make_frame([1.0, 0.0], [0.0, 1.0, 1.0], 1.0).unwrap();
        // A~ = 0 and b constant: residual 0.
        let b0 = |_: [f64; 3]| Complex64::new(1.0, 0.0);
        let a0 = |_: [f64; 3]| [0.0, 0.0, 0.0];
        assert_eq!(transport_residual(&b0, &a0, &frame, 1, 1e-2), 0.0);
        // Scaling: b -> e^{0.1} b multiplies the defect by e^{0.1} exactly.
        let b = |x: [f64; 3]| Complex64::new((0.3 * x[0]).sin(), 0.2 * x[1]).exp();
        let a = |x: [f64; 3]| [0.1 * x[1], -0.2 * x[0], 0.05 * x[2]];
        let r1 = transport_residual(&b, &a, &frame, 1, 1e-2);
        let bshift = |x: [f64; 3]| b(x) * Complex64::new(0.1, 0.0).exp();
        let r2 = transport_residual(&bshift, &a, &frame, 1, 1e-2);
        // Residual is relative (normalized by ||b||), so the shift cancels.
        // The unnormalized defect scales by e^{0.1}; check via the ratio of
        // relative residuals staying 1.
        assert!(
            (r2 / r1 - 1.0).abs() < 1e-10,
            "relative residual must be scale invariant: {r1} vs {r2}"
        );
    }

    #[test]
    fn remainder_rhs_support_for_trivial_data() {
        // A = 0, q = 0, xi-free principal with b = 1: the conjugated defect
        // is supported on the cutoff shoulders 1 <= |rho^{-1/4} x3| <= 2.
        let rho = 3.0f64;
        let frame = make_frame([1.0, 0.0], [0.0, 1.0, 1.0], 1.0).unwrap();
        // Zero xi influence: use which = 2 (no e^{-i xi x} factor).
        let frame2 = CgoFrame { sign: -1.0, ..frame };
        let grid =
            CylGrid::new(DiskGrid::new(1.0, 8, 32), 2.0 * (2.0 * rho.powf(0.25)) + 0.6, 96);
        let phase = CauchyPhase {
            which: 2,
            theta_tilde: frame2.theta_tilde(),
            eta: frame2.eta,
            source: PhaseSource::Closed(vec![]),
            quad_radius: 3.0,
            n_radial: 8,
            n_angular: 8,
        };
        let sol = solve_remainder(
            &crate::expr::VectorExpr::zero(),
            &ScalarExpr::zero(),
            &frame2,
            rho,
            &grid,
            phase,
            1e-12,
        )
        .unwrap();
        assert_eq!(
            sol.rhs_support_violation_cells, 0,
            "RHS must vanish outside supp psi"
        );
        assert!(
            sol.rhs_plateau_fraction < 0.35,
            "plateau RHS should sit at the discretization floor, got {}",
            sol.rhs_plateau_fraction
        );
        // Assembled field satisfies the discrete equation at solver floor.
        assert!(sol.residual_rel < 1e-10, "residual {}", sol.residual_rel);
        let _ = Arc::new(());
    }
}
