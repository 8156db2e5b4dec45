//! Second-order jets in three variables: value, gradient and (symmetric)
//! Hessian, with the algebra needed to differentiate products of closed-form
//! factors exactly. This is what makes the "symbolic differentiation" oracles
//! in the potentials and checks modules exact rather than finite-differenced.

use num_complex::Complex64;

/// Truncated second-order Taylor data of a complex scalar field at a point.
#[derive(Debug, Clone, Copy)]
pub struct Jet2 {
    pub v: Complex64,
    pub g: [Complex64; 3],
    /// Symmetric Hessian, packed as [xx, yy, zz, xy, xz, yz].
    pub h: [Complex64; 6],
}

pub const HESS_PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];

impl Jet2 {
    pub const ZERO: Jet2 = Jet2 {
        v: Complex64::new(0.0, 0.0),
        g: [Complex64::new(0.0, 0.0); 3],
        h: [Complex64::new(0.0, 0.0); 6],
    };

    pub fn constant(v: Complex64) -> Jet2 {
        Jet2 { v, ..Jet2::ZERO }
    }

    /// Jet of a function of a single coordinate axis given its 1D derivatives
    /// `(f, f', f'')` at the point.
    pub fn from_axis(axis: usize, f: Complex64, df: Complex64, ddf: Complex64) -> Jet2 {
        let mut j = Jet2::constant(f);
        j.g[axis] = df;
        for (k, &(a, b)) in HESS_PAIRS.iter().enumerate() {
            if a == axis && b == axis {
                j.h[k] = ddf;
            }
        }
        j
    }

    pub fn hess(&self, a: usize, b: usize) -> Complex64 {
        for (k, &(i, j)) in HESS_PAIRS.iter().enumerate() {
            if (i, j) == (a, b) || (i, j) == (b, a) {
                return self.h[k];
            }
        }
        unreachable!()
    }

    pub fn laplacian(&self) -> Complex64 {
        self.h[0] + self.h[1] + self.h[2]
    }

    pub fn add(&self, o: &Jet2) -> Jet2 {
        let mut r = *self;
        r.v += o.v;
        for i in 0..3 {
            r.g[i] += o.g[i];
        }
        for i in 0..6 {
            r.h[i] += o.h[i];
        }
        r
    }

    pub fn scale(&self, c: Complex64) -> Jet2 {
        let mut r = *self;
        r.v *= c;
        for i in 0..3 {
            r.g[i] *= c;
        }
        for i in 0..6 {
            r.h[i] *= c;
        }
        r
    }

    /// Leibniz rule for products.
    pub fn mul(&self, o: &Jet2) -> Jet2 {
        let mut r = Jet2::ZERO;
        r.v = self.v * o.v;
        for i in 0..3 {
            r.g[i] = self.g[i] * o.v + self.v * o.g[i];
        }
        for (k, &(a, b)) in HESS_PAIRS.iter().enumerate() {
            r.h[k] = self.h[k] * o.v
                + self.g[a] * o.g[b]
                + self.g[b] * o.g[a]
                + self.v * o.h[k];
        }
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn product_rule_matches_hand_expansion() {
        // f = x^2 at x0=2 (axis 0), g = sin-like data on axis 1.
        let f = Jet2::from_axis(0, c(4.0), c(4.0), c(2.0));
        let g = Jet2::from_axis(1, c(0.5), c(0.8), c(-0.5));
        let p = f.mul(&g);
        assert!((p.v - c(2.0)).norm() < 1e-14);
        assert!((p.g[0] - c(2.0)).norm() < 1e-14); // f' g = 4*0.5
        assert!((p.g[1] - c(3.2)).norm() < 1e-14); // f g' = 4*0.8
        assert!((p.hess(0, 1) - c(3.2)).norm() < 1e-14); // f' g' = 4*0.8
        assert!((p.hess(0, 0) - c(1.0)).norm() < 1e-14); // f'' g = 2*0.5
        assert!((p.hess(1, 1) - c(-2.0)).norm() < 1e-14); // f g'' = 4*(-0.5)
    }

    #[test]
    fn laplacian_of_sum() {
        let f = Jet2::from_axis(0, c(1.0), c(0.0), c(3.0));
        let g = Jet2::from_axis(2, c(2.0), c(0.0), c(-1.0));
        assert!((f.add(&g).laplacian() - c(2.0)).norm() < 1e-14);
    }
}
