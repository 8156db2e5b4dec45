//! Direction frames for the complex geometric optics solutions: a planar
//! unit vector `theta`, a frequency `xi = (xi', xi3)` with `xi' . theta = 0`
//! and `xi3 != 0`, and the unit vector
//! `eta = (xi', -|xi'|^2/xi3) / sqrt(|xi'|^2 + |xi'|^4/xi3^2)`,
//! so that `eta, theta~ = (theta, 0)` and `xi/|xi|` are mutually orthogonal.

use crate::{CylError, Result};

#[derive(Debug, Clone, Copy)]
pub struct CgoFrame {
    pub theta: [f64; 2],
    pub xi: [f64; 3],
    pub eta: [f64; 3],
    /// +1 for the `u_1` exponent `e^{+rho theta.x'}`, -1 for `u_2`.
    pub sign: f64,
}

impl CgoFrame {
    pub fn theta_tilde(&self) -> [f64; 3] {
        [self.theta[0], self.theta[1], 0.0]
    }

    /// `|xi'| / |xi3|`, the frame anisotropy entering all bounds.
    pub fn ratio(&self) -> f64 {
        let xp = (self.xi[0] * self.xi[0] + self.xi[1] * self.xi[1]).sqrt();
        xp / self.xi[2].abs()
    }

    /// Frame with `eta` replaced by `-eta` (used for the second projection).
    pub fn with_negated_eta(&self) -> CgoFrame {
        CgoFrame {
            eta: [-self.eta[0], -self.eta[1], -self.eta[2]],
            ..*self
        }
    }

    /// Worst orthogonality defect among `eta.xi`, `theta~.xi`, `theta~.eta`,
    /// and the normalization defect of `eta`.
    pub fn orthogonality_defect(&self) -> f64 {
        let tt = self.theta_tilde();
        let d1 = (0..3).map(|i| self.eta[i] * self.xi[i]).sum::<f64>().abs();
        let d2 = (0..3).map(|i| tt[i] * self.xi[i]).sum::<f64>().abs();
        let d3 = (0..3).map(|i| tt[i] * self.eta[i]).sum::<f64>().abs();
        let d4 = ((0..3).map(|i| self.eta[i] * self.eta[i]).sum::<f64>() - 1.0).abs();
        d1.max(d2).max(d3).max(d4)
    }
}

/// Build a frame from `theta` and `xi` with `xi'` in `theta`-perp.
pub fn make_frame(theta: [f64; 2], xi: [f64; 3], sign: f64) -> Result<CgoFrame> {
    let tn = (theta[0] * theta[0] + theta[1] * theta[1]).sqrt();
    if (tn - 1.0).abs() > 1e-12 {
        return Err(CylError::Numerical(format!("theta must be unit, |theta| = {tn}")));
    }
    let dot = theta[0] * xi[0] + theta[1] * xi[1];
    if dot.abs() > 1e-12 * (1.0 + xi[0].hypot(xi[1])) {
        return Err(CylError::Numerical(format!(
            "xi' must be orthogonal to theta, xi'.theta = {dot:.3e}"
        )));
    }
    if xi[2] == 0.0 {
        return Err(CylError::Numerical(
            "xi3 = 0: eta is undefined for axial-free frequencies".into(),
        ));
    }
    let xp2 = xi[0] * xi[0] + xi[1] * xi[1];
    if xp2 == 0.0 {
        return Err(CylError::Numerical(
            "xi' = 0: the eta formula degenerates (never produced by the D_R sampler)".into(),
        ));
    }
    let denom = (xp2 + xp2 * xp2 / (xi[2] * xi[2])).sqrt();
    let eta = [xi[0] / denom, xi[1] / denom, -xp2 / xi[2] / denom];
    Ok(CgoFrame {
        theta,
        xi,
        eta,
        sign,
    })
}

/// Sampling-order construction: given `xi` with `xi' != 0`, pick `theta` as
/// the planar unit vector orthogonal to `xi'` (rotate by 90 degrees), so the
/// orthogonality precondition holds exactly.
pub fn frame_for_xi(xi: [f64; 3], sign: f64) -> Result<CgoFrame> {
    let xp = xi[0].hypot(xi[1]);
    if xp == 0.0 {
        return Err(CylError::Numerical("xi' = 0 has no admissible frame".into()));
    }
    let theta = [-xi[1] / xp, xi[0] / xp];
    make_frame(theta, xi, sign)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eta_formula_direct_substitution() {
        let f = make_frame([1.0, 0.0], [0.0, 1.0, 1.0], 1.0).unwrap();
        let s = 1.0 / 2.0f64.sqrt();
        assert!((f.eta[0] - 0.0).abs() < 1e-15);
        assert!((f.eta[1] - s).abs() < 1e-15);
        assert!((f.eta[2] + s).abs() < 1e-15);
        assert!(f.orthogonality_defect() < 1e-12);

        let g = make_frame([0.0, 1.0], [2.0, 0.0, 1.0], 1.0).unwrap();
        let n = 20.0f64.sqrt();
        assert!((g.eta[0] - 2.0 / n).abs() < 1e-14);
        assert!((g.eta[1] - 0.0).abs() < 1e-14);
        assert!((g.eta[2] + 4.0 / n).abs() < 1e-14);
        assert!(g.orthogonality_defect() < 1e-12);
    }

    #[test]
    fn degenerate_frames_rejected() {
        assert!(make_frame([1.0, 0.0], [0.0, 1.0, 0.0], 1.0).is_err()); // xi3 = 0
        assert!(make_frame([1.0, 0.0], [0.0, 0.0, 1.0], 1.0).is_err()); // xi' = 0
        assert!(make_frame([0.5, 0.0], [0.0, 1.0, 1.0], 1.0).is_err()); // |theta| != 1
        assert!(make_frame([1.0, 0.0], [0.3, 1.0, 1.0], 1.0).is_err()); // xi'.theta != 0
    }

    #[test]
    fn sampled_frames_are_orthogonal_to_1e12() {
        // 1000 frames drawn from a deterministic sweep of xi values.
        let mut worst = 0.0f64;
        let mut count = 0;
        let mut k = 0u64;
        while count < 1000 {
            k += 1;
            let a = (k as f64 * 0.61803398875).fract() * 2.0 - 1.0;
            let b = (k as f64 * 0.41421356237).fract() * 2.0 - 1.0;
            let c = (k as f64 * 0.73205080757).fract() * 2.0 - 1.0;
            let xi = [3.0 * a, 3.0 * b, 2.0 * c];
            if xi[0].hypot(xi[1]) < 1e-3 || xi[2].abs() < 1e-3 {
                continue;
            }
            let f = frame_for_xi(xi, 1.0).unwrap();
            worst = worst.max(f.orthogonality_defect());
            count += 1;
        }
        assert!(worst < 1e-12, "worst orthogonality defect {worst:.3e}");
    }
}
