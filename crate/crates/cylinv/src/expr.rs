//! Closed-form scalar fields on R^3: sums of terms, each a complex coefficient
//! times a product of primitive factors (Gaussians, centered monomials,
//! trigonometric factors, compact bumps). Every field carries exact
//! derivatives through [`Jet2`], a closed-form unitary Fourier transform for
//! the Gaussian/monomial/trig subfamily, and introspection of isotropic
//! Gaussian terms for the closed-form Cauchy transform used by the CGO phases.
//!
//! Fourier convention throughout the crate:
//! `F(u)(xi) = (2 pi)^{-3/2} Integral u(x) e^{-i x.xi} dx`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::jet::Jet2;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Primitive factor of a term. All factors are real-valued.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub enum Factor {
    /// `exp(-|x - center|^2 / (2 sigma^2))`, isotropic.
    Gauss3 { center: [f64; 3], sigma: f64 },
    /// `exp(-(x_a - center)^2 / (2 sigma^2))` on one axis.
    Gauss1 { axis: usize, center: f64, sigma: f64 },
    /// `(x_a - center)^power`.
    Mono { axis: usize, center: f64, power: u32 },
    /// `cos(freq * x_a + phase)`.
    Cos { axis: usize, freq: f64, phase: f64 },
    /// `sin(freq * x_a + phase)`.
    Sin { axis: usize, freq: f64, phase: f64 },
    /// Even C-infinity bump in one axis: `exp(1 - 1/(1 - t^2))` with
    /// `t = (x_a - center)/halfwidth`, zero for `|t| >= 1`.
    Bump1 { axis: usize, center: f64, halfwidth: f64 },
    /// Radial C-infinity bump in the cross-section plane: same profile with
    /// `t = |x' - center|/radius`.
    BumpR2 { center: [f64; 2], radius: f64 },
}

/// Smooth bump profile `exp(1 - 1/(1-u))` of the squared argument `u = t^2`,
/// together with first and second derivatives in `u`. Zero for `u >= 1`.
fn bump_sq(u: f64) -> (f64, f64, f64) {
    if u >= 1.0 - 1e-14 {
        return (0.0, 0.0, 0.0);
    }
    let s = 1.0 / (1.0 - u);
    let v = (1.0 - s).exp();
    // d/du [1 - 1/(1-u)] = -s^2 ; second derivative: -2 s^3.
    let d1 = -s * s;
    let d2 = -2.0 * s * s * s;
    (v, v * d1, v * (d1 * d1 + d2))
}

/// Compose a 1D profile `f(u)` (with derivatives in `u`) with a smooth
/// argument field `u(x)` given by its jet.
fn compose(f: (f64, f64, f64), u: &Jet2) -> Jet2 {
    let (fv, f1, f2) = f;
    let mut r = Jet2::constant(c(fv));
    for i in 0..3 {
        r.g[i] = c(f1) * u.g[i];
    }
    for (k, &(a, b)) in crate::jet::HESS_PAIRS.iter().enumerate() {
        r.h[k] = c(f2) * u.g[a] * u.g[b] + c(f1) * u.h[k];
    }
    r
}

impl Factor {
    pub fn value(&self, x: [f64; 3]) -> f64 {
        match *self {
            Factor::Gauss3 { center, sigma } => {
                let d2 = (0..3).map(|i| (x[i] - center[i]).powi(2)).sum::<f64>();
                (-d2 / (2.0 * sigma * sigma)).exp()
            }
            Factor::Gauss1 { axis, center, sigma } => {
                let d = x[axis] - center;
                (-d * d / (2.0 * sigma * sigma)).exp()
            }
            Factor::Mono { axis, center, power } => (x[axis] - center).powi(power as i32),
            Factor::Cos { axis, freq, phase } => (freq * x[axis] + phase).cos(),
            Factor::Sin { axis, freq, phase } => (freq * x[axis] + phase).sin(),
            Factor::Bump1 {
                axis,
                center,
                halfwidth,
            } => {
                let t = (x[axis] - center) / halfwidth;
                bump_sq(t * t).0
            }
            Factor::BumpR2 { center, radius } => {
                let dx = x[0] - center[0];
                let dy = x[1] - center[1];
                bump_sq((dx * dx + dy * dy) / (radius * radius)).0
            }
        }
    }

    pub fn jet(&self, x: [f64; 3]) -> Jet2 {
        match *self {
            Factor::Gauss3 { center, sigma } => {
                let s2 = sigma * sigma;
                let d = [x[0] - center[0], x[1] - center[1], x[2] - center[2]];
                let v = (-(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) / (2.0 * s2)).exp();
                let mut j = Jet2::constant(c(v));
                for i in 0..3 {
                    j.g[i] = c(-d[i] / s2 * v);
                }
                for (k, &(a, b)) in crate::jet::HESS_PAIRS.iter().enumerate() {
                    let delta = if a == b { 1.0 } else { 0.0 };
                    j.h[k] = c((d[a] * d[b] / (s2 * s2) - delta / s2) * v);
                }
                j
            }
            Factor::Gauss1 { axis, center, sigma } => {
                let s2 = sigma * sigma;
                let d = x[axis] - center;
                let v = (-d * d / (2.0 * s2)).exp();
                Jet2::from_axis(axis, c(v), c(-d / s2 * v), c((d * d / (s2 * s2) - 1.0 / s2) * v))
            }
            Factor::Mono { axis, center, power } => {
                let d = x[axis] - center;
                let p = power as i32;
                let v = d.powi(p);
                let d1 = if power >= 1 { p as f64 * d.powi(p - 1) } else { 0.0 };
                let d2 = if power >= 2 {
                    (p * (p - 1)) as f64 * d.powi(p - 2)
                } else {
                    0.0
                };
                Jet2::from_axis(axis, c(v), c(d1), c(d2))
            }
            Factor::Cos { axis, freq, phase } => {
                let u = freq * x[axis] + phase;
                Jet2::from_axis(
                    axis,
                    c(u.cos()),
                    c(-freq * u.sin()),
                    c(-freq * freq * u.cos()),
                )
            }
            Factor::Sin { axis, freq, phase } => {
                let u = freq * x[axis] + phase;
                Jet2::from_axis(
                    axis,
                    c(u.sin()),
                    c(freq * u.cos()),
                    c(-freq * freq * u.sin()),
                )
            }
            Factor::Bump1 {
                axis,
                center,
                halfwidth,
            } => {
                let t = (x[axis] - center) / halfwidth;
                let mut u = Jet2::from_axis(
                    axis,
                    c(t * t),
                    c(2.0 * t / halfwidth),
                    c(2.0 / (halfwidth * halfwidth)),
                );
                u.v = c(t * t);
                compose(bump_sq(t * t), &u)
            }
            Factor::BumpR2 { center, radius } => {
                let r2 = radius * radius;
                let dx = x[0] - center[0];
                let dy = x[1] - center[1];
                let mut u = Jet2::constant(c((dx * dx + dy * dy) / r2));
                u.g[0] = c(2.0 * dx / r2);
                u.g[1] = c(2.0 * dy / r2);
                u.h[0] = c(2.0 / r2);
                u.h[1] = c(2.0 / r2);
                compose(bump_sq(u.v.re), &u)
            }
        }
    }

    /// Symbolic derivative along `axis` as a sum of terms, when the result is
    /// expressible in this factor language (bumps are not).
    fn diff(&self, axis: usize) -> Option<Vec<Term>> {
        match *self {
            Factor::Gauss3 { center, sigma } => Some(vec![Term {
                coeff: c(-1.0 / (sigma * sigma)),
                factors: vec![
                    Factor::Mono {
                        axis,
                        center: center[axis],
                        power: 1,
                    },
                    Factor::Gauss3 { center, sigma },
                ],
            }]),
            Factor::Gauss1 {
                axis: a,
                center,
                sigma,
            } => {
                if a != axis {
                    return Some(vec![]);
                }
                Some(vec![Term {
                    coeff: c(-1.0 / (sigma * sigma)),
                    factors: vec![
                        Factor::Mono {
                            axis,
                            center,
                            power: 1,
                        },
                        Factor::Gauss1 {
                            axis: a,
                            center,
                            sigma,
                        },
                    ],
                }])
            }
            Factor::Mono {
                axis: a,
                center,
                power,
            } => {
                if a != axis || power == 0 {
                    return Some(vec![]);
                }
                let mut factors = vec![];
                if power > 1 {
                    factors.push(Factor::Mono {
                        axis: a,
                        center,
                        power: power - 1,
                    });
                }
                Some(vec![Term {
                    coeff: c(power as f64),
                    factors,
                }])
            }
            Factor::Cos { axis: a, freq, phase } => {
                if a != axis {
                    return Some(vec![]);
                }
                Some(vec![Term {
                    coeff: c(-freq),
                    factors: vec![Factor::Sin { axis: a, freq, phase }],
                }])
            }
            Factor::Sin { axis: a, freq, phase } => {
                if a != axis {
                    return Some(vec![]);
                }
                Some(vec![Term {
                    coeff: c(freq),
                    factors: vec![Factor::Cos { axis: a, freq, phase }],
                }])
            }
            Factor::Bump1 { .. } | Factor::BumpR2 { .. } => None,
        }
    }

    fn has_compact_support(&self) -> bool {
        matches!(self, Factor::Bump1 { .. } | Factor::BumpR2 { .. })
    }
}

/// One product term with a complex coefficient.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Term {
    pub coeff: Complex64,
    pub factors: Vec<Factor>,
}

/// Sum of terms.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct ScalarExpr {
    pub terms: Vec<Term>,
}

impl ScalarExpr {
    pub fn zero() -> Self {
        ScalarExpr { terms: vec![] }
    }

    pub fn constant(v: f64) -> Self {
        ScalarExpr {
            terms: vec![Term {
                coeff: c(v),
                factors: vec![],
            }],
        }
    }

    /// `amp * exp(-|x-center|^2/(2 sigma^2))`.
    pub fn gauss(center: [f64; 3], sigma: f64, amp: f64) -> Self {
        ScalarExpr {
            terms: vec![Term {
                coeff: c(amp),
                factors: vec![Factor::Gauss3 { center, sigma }],
            }],
        }
    }

    /// `amp * (x_a - center_a) * exp(-|x-center|^2/(2 sigma^2))`.
    pub fn lin_gauss(axis: usize, center: [f64; 3], sigma: f64, amp: f64) -> Self {
        ScalarExpr {
            terms: vec![Term {
                coeff: c(amp),
                factors: vec![
                    Factor::Mono {
                        axis,
                        center: center[axis],
                        power: 1,
                    },
                    Factor::Gauss3 { center, sigma },
                ],
            }],
        }
    }

    pub fn scaled(&self, k: Complex64) -> Self {
        ScalarExpr {
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    coeff: t.coeff * k,
                    factors: t.factors.clone(),
                })
                .collect(),
        }
    }

    pub fn plus(&self, o: &ScalarExpr) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(o.terms.iter().cloned());
        ScalarExpr { terms }
    }

    pub fn times(&self, o: &ScalarExpr) -> Self {
        let mut terms = vec![];
        for a in &self.terms {
            for b in &o.terms {
                let mut factors = a.factors.clone();
                factors.extend(b.factors.iter().cloned());
                terms.push(Term {
                    coeff: a.coeff * b.coeff,
                    factors,
                });
            }
        }
        ScalarExpr { terms }
    }

    pub fn value(&self, x: [f64; 3]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for t in &self.terms {
            let mut p = 1.0;
            for f in &t.factors {
                p *= f.value(x);
                if p == 0.0 {
                    break;
                }
            }
            acc += t.coeff * p;
        }
        acc
    }

    pub fn value_re(&self, x: [f64; 3]) -> f64 {
        self.value(x).re
    }

    pub fn jet(&self, x: [f64; 3]) -> Jet2 {
        let mut acc = Jet2::ZERO;
        for t in &self.terms {
            let mut j = Jet2::constant(c(1.0));
            for f in &t.factors {
                j = j.mul(&f.jet(x));
            }
            acc = acc.add(&j.scale(t.coeff));
        }
        acc
    }

    pub fn grad(&self, x: [f64; 3]) -> [Complex64; 3] {
        self.jet(x).g
    }

    /// Symbolic gradient, when every factor is symbolically differentiable.
    pub fn grad_expr(&self) -> Option<[ScalarExpr; 3]> {
        let mut out = [ScalarExpr::zero(), ScalarExpr::zero(), ScalarExpr::zero()];
        for (axis, slot) in out.iter_mut().enumerate() {
            for t in &self.terms {
                for (i, f) in t.factors.iter().enumerate() {
                    let dts = f.diff(axis)?;
                    for dt in dts {
                        let mut factors: Vec<Factor> = t
                            .factors
                            .iter()
                            .enumerate()
                            .filter(|&(j, _)| j != i)
                            .map(|(_, g)| g.clone())
                            .collect();
                        factors.extend(dt.factors);
                        slot.terms.push(Term {
                            coeff: t.coeff * dt.coeff,
                            factors,
                        });
                    }
                }
            }
        }
        Some(out)
    }

    /// True when every term contains a compactly supported factor.
    pub fn compactly_supported(&self) -> bool {
        self.terms
            .iter()
            .all(|t| t.factors.iter().any(|f| f.has_compact_support()))
    }

    /// Unitary Fourier transform at `xi`, when closed-form (all axes decay
    /// through Gaussians and polynomial degree is at most one per axis).
    pub fn fourier(&self, xi: [f64; 3]) -> Option<Complex64> {
        let mut acc = Complex64::new(0.0, 0.0);
        for t in &self.terms {
            acc += t.coeff * term_fourier(t, xi)?;
        }
        Some(acc)
    }

    /// Isotropic-Gaussian term structure, when every term is
    /// `coeff * [(x_a - c_a)] * exp(-|x-c|^2/(2 sigma^2))`. Feeds the
    /// closed-form Cauchy transform.
    pub fn cauchy_gaussians(&self) -> Option<Vec<CauchyGauss>> {
        let mut out = vec![];
        for t in &self.terms {
            let mut gauss: Option<([f64; 3], f64)> = None;
            let mut lin: Option<usize> = None;
            for f in &t.factors {
                match *f {
                    Factor::Gauss3 { center, sigma } => {
                        if gauss.is_some() {
                            return None;
                        }
                        gauss = Some((center, sigma));
                    }
                    Factor::Mono { axis, center, power } if power == 1 => {
                        if lin.is_some() {
                            return None;
                        }
                        lin = Some(axis);
                        // Center must later match the Gaussian center.
                        let _ = center;
                    }
                    _ => return None,
                }
            }
            let (center, sigma) = gauss?;
            if let Some(axis) = lin {
                let mono_center = t.factors.iter().find_map(|f| match *f {
                    Factor::Mono { axis: a, center: mc, power: 1 } if a == axis => Some(mc),
                    _ => None,
                })?;
                if (mono_center - center[axis]).abs() > 1e-13 {
                    return None;
                }
            }
            out.push(CauchyGauss {
                coeff: t.coeff,
                center,
                sigma,
                lin_axis: lin,
            });
        }
        Some(out)
    }
}

/// Introspected isotropic Gaussian term for the closed-form Cauchy transform.
#[derive(Debug, Clone, Copy)]
pub struct CauchyGauss {
    pub coeff: Complex64,
    pub center: [f64; 3],
    pub sigma: f64,
    /// `Some(a)` when the term carries an `(x_a - c_a)` factor.
    pub lin_axis: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
enum Axis1d {
    Gauss { center: f64, sigma: f64 },
    Mono { center: f64 },
    Trig { freq: f64, phase: f64, sin: bool },
}

fn term_fourier(t: &Term, xi: [f64; 3]) -> Option<Complex64> {
    // Split all factors into per-axis 1D lists; reject bump factors.
    let mut per_axis: [Vec<Axis1d>; 3] = [vec![], vec![], vec![]];
    for f in &t.factors {
        match *f {
            Factor::Gauss3 { center, sigma } => {
                for a in 0..3 {
                    per_axis[a].push(Axis1d::Gauss {
                        center: center[a],
                        sigma,
                    });
                }
            }
            Factor::Gauss1 { axis, center, sigma } => {
                per_axis[axis].push(Axis1d::Gauss { center, sigma })
            }
            Factor::Mono { axis, center, power } => {
                if power != 1 {
                    return None;
                }
                per_axis[axis].push(Axis1d::Mono { center });
            }
            Factor::Cos { axis, freq, phase } => per_axis[axis].push(Axis1d::Trig {
                freq,
                phase,
                sin: false,
            }),
            Factor::Sin { axis, freq, phase } => per_axis[axis].push(Axis1d::Trig {
                freq,
                phase,
                sin: true,
            }),
            Factor::Bump1 { .. } | Factor::BumpR2 { .. } => return None,
        }
    }
    let mut acc = Complex64::new(1.0, 0.0);
    for a in 0..3 {
        acc *= axis_fourier(&per_axis[a], xi[a])?;
    }
    Some(acc)
}

/// Unitary 1D Fourier transform of a product of axis factors.
fn axis_fourier(fs: &[Axis1d], xi: f64) -> Option<Complex64> {
    // Peel trig factors first (frequency shifts).
    if let Some(k) = fs.iter().position(|f| matches!(f, Axis1d::Trig { .. })) {
        let (freq, phase, sin) = match fs[k] {
            Axis1d::Trig { freq, phase, sin } => (freq, phase, sin),
            _ => unreachable!(),
        };
        let rest: Vec<Axis1d> = fs
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != k)
            .map(|(_, f)| *f)
            .collect();
        let plus = axis_fourier(&rest, xi - freq)?;
        let minus = axis_fourier(&rest, xi + freq)?;
        let ep = Complex64::from_polar(1.0, phase);
        let em = Complex64::from_polar(1.0, -phase);
        return Some(if sin {
            (ep * plus - em * minus) / Complex64::new(0.0, 2.0)
        } else {
            (ep * plus + em * minus) * 0.5
        });
    }
    // Merge Gaussians.
    let mut gauss: Option<(f64, f64, f64)> = None; // (center, sigma, log-prefactor)
    let mut monos: Vec<f64> = vec![];
    for f in fs {
        match *f {
            Axis1d::Gauss { center, sigma } => {
                gauss = Some(match gauss {
                    None => (center, sigma, 0.0),
                    Some((c0, s0, lp)) => {
                        let inv = 1.0 / (s0 * s0) + 1.0 / (sigma * sigma);
                        let s_new = (1.0 / inv).sqrt();
                        let c_new = (c0 / (s0 * s0) + center / (sigma * sigma)) / inv;
                        let extra = -(c0 - center).powi(2) / (2.0 * (s0 * s0 + sigma * sigma));
                        (c_new, s_new, lp + extra)
                    }
                });
            }
            Axis1d::Mono { center } => monos.push(center),
            Axis1d::Trig { .. } => unreachable!(),
        }
    }
    let (g_center, sigma, logpre) = gauss?;
    if monos.len() > 1 {
        return None;
    }
    let shift = Complex64::from_polar(1.0, -g_center * xi);
    let base = c(logpre.exp() * sigma * (-(sigma * sigma) * xi * xi / 2.0).exp());
    match monos.as_slice() {
        [] => Some(base * shift),
        [m] => {
            // (x - m) G_{c,s} = (x - c) G + (c - m) G.
            let lin = Complex64::new(0.0, -(sigma * sigma) * xi) * base;
            Some((lin + c(g_center - m) * base) * shift)
        }
        _ => None,
    }
}

/// A vector field with three expression components.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VectorExpr {
    pub comp: [ScalarExpr; 3],
}

impl VectorExpr {
    pub fn zero() -> Self {
        VectorExpr {
            comp: [ScalarExpr::zero(), ScalarExpr::zero(), ScalarExpr::zero()],
        }
    }

    pub fn value(&self, x: [f64; 3]) -> [Complex64; 3] {
        [
            self.comp[0].value(x),
            self.comp[1].value(x),
            self.comp[2].value(x),
        ]
    }

    pub fn value_re(&self, x: [f64; 3]) -> [f64; 3] {
        let v = self.value(x);
        [v[0].re, v[1].re, v[2].re]
    }

    pub fn plus(&self, o: &VectorExpr) -> Self {
        VectorExpr {
            comp: [
                self.comp[0].plus(&o.comp[0]),
                self.comp[1].plus(&o.comp[1]),
                self.comp[2].plus(&o.comp[2]),
            ],
        }
    }

    pub fn scaled(&self, k: Complex64) -> Self {
        VectorExpr {
            comp: [
                self.comp[0].scaled(k),
                self.comp[1].scaled(k),
                self.comp[2].scaled(k),
            ],
        }
    }
}
