//! Polar-cylindrical solver grid on a disk cross-section.
//!
//! 2D layout: one center node plus rings `i = 1..=n_r` of `n_phi` equally
//! spaced angular nodes at radii `i * dr`; ring `n_r` lies exactly on the
//! boundary circle and carries Dirichlet data. 3D layout: axial levels
//! `k = 0..=n_z` at `z = -L + k dz`; the caps `k = 0, n_z` carry Dirichlet
//! data. Unknowns are the interior nodes, stored level-major.

use num_complex::Complex64;

#[derive(Debug, Clone)]
pub struct DiskGrid {
    pub radius: f64,
    pub n_r: usize,
    pub n_phi: usize,
    pub dr: f64,
    pub dphi: f64,
}

impl DiskGrid {
    pub fn new(radius: f64, n_r: usize, n_phi: usize) -> Self {
        assert!(n_r >= 2 && n_phi >= 4);
        DiskGrid {
            radius,
            n_r,
            n_phi,
            dr: radius / n_r as f64,
            dphi: 2.0 * std::f64::consts::PI / n_phi as f64,
        }
    }

    /// Number of interior 2D nodes (center + rings `1..n_r-1`).
    pub fn n_interior(&self) -> usize {
        1 + (self.n_r - 1) * self.n_phi
    }

    /// Interior index of ring/angle node; ring 0 is the center.
    pub fn idx(&self, ring: usize, j: usize) -> usize {
        if ring == 0 {
            0
        } else {
            debug_assert!(ring < self.n_r);
            1 + (ring - 1) * self.n_phi + (j % self.n_phi)
        }
    }

    /// Inverse of [`DiskGrid::idx`].
    pub fn ring_of(&self, i2: usize) -> (usize, usize) {
        if i2 == 0 {
            (0, 0)
        } else {
            ((i2 - 1) / self.n_phi + 1, (i2 - 1) % self.n_phi)
        }
    }

    pub fn coords(&self, i2: usize) -> [f64; 2] {
        let (ring, j) = self.ring_of(i2);
        let r = ring as f64 * self.dr;
        let phi = j as f64 * self.dphi;
        [r * phi.cos(), r * phi.sin()]
    }

    pub fn boundary_coords(&self, j: usize) -> [f64; 2] {
        let phi = j as f64 * self.dphi;
        [self.radius * phi.cos(), self.radius * phi.sin()]
    }

    pub fn boundary_phi(&self, j: usize) -> f64 {
        j as f64 * self.dphi
    }

    /// Dual-cell area of an interior node.
    pub fn cell_area(&self, i2: usize) -> f64 {
        let (ring, _) = self.ring_of(i2);
        if ring == 0 {
            std::f64::consts::PI * (0.5 * self.dr).powi(2)
        } else {
            ring as f64 * self.dr * self.dr * self.dphi
        }
    }
}

#[derive(Debug, Clone)]
pub struct CylGrid {
    pub disk: DiskGrid,
    pub n_z: usize,
    pub dz: f64,
    pub half_length: f64,
}

impl CylGrid {
    pub fn new(disk: DiskGrid, half_length: f64, n_z: usize) -> Self {
        assert!(n_z >= 2);
        CylGrid {
            disk,
            n_z,
            dz: 2.0 * half_length / n_z as f64,
            half_length,
        }
    }

    /// Number of interior axial levels.
    pub fn n_levels(&self) -> usize {
        self.n_z - 1
    }

    pub fn n_unknowns(&self) -> usize {
        self.n_levels() * self.disk.n_interior()
    }

    pub fn z_of_level(&self, k_int: usize) -> f64 {
        -self.half_length + (k_int as f64 + 1.0) * self.dz
    }

    /// All axial node coordinates including caps.
    pub fn z_node(&self, k: usize) -> f64 {
        -self.half_length + k as f64 * self.dz
    }

    pub fn unknown_index(&self, k_int: usize, i2: usize) -> usize {
        k_int * self.disk.n_interior() + i2
    }

    pub fn point(&self, k_int: usize, i2: usize) -> [f64; 3] {
        let xy = self.disk.coords(i2);
        [xy[0], xy[1], self.z_of_level(k_int)]
    }

    /// Lateral boundary node coordinate at angle index `j`, level `k_int`.
    pub fn lateral_point(&self, k_int: usize, j: usize) -> [f64; 3] {
        let xy = self.disk.boundary_coords(j);
        [xy[0], xy[1], self.z_of_level(k_int)]
    }

    /// Number of lateral boundary nodes carrying free Dirichlet data.
    pub fn n_lateral(&self) -> usize {
        self.n_levels() * self.disk.n_phi
    }

    pub fn lateral_index(&self, k_int: usize, j: usize) -> usize {
        k_int * self.disk.n_phi + j
    }

    /// Lateral surface weight of one boundary node.
    pub fn lateral_weight(&self) -> f64 {
        self.disk.radius * self.disk.dphi * self.dz
    }

    pub fn cell_volume(&self, i2: usize) -> f64 {
        self.disk.cell_area(i2) * self.dz
    }

    /// Volume-weighted L2 norm of an interior field.
    pub fn l2_norm(&self, u: &[Complex64]) -> f64 {
        let n2 = self.disk.n_interior();
        let mut acc = 0.0;
        for k in 0..self.n_levels() {
            for i2 in 0..n2 {
                acc += u[self.unknown_index(k, i2)].norm_sqr() * self.cell_volume(i2);
            }
        }
        acc.sqrt()
    }

    /// Discrete H1 seminorm via first differences (zero extension on the
    /// boundary, matching the homogeneous remainder convention).
    pub fn h1_seminorm(&self, u: &[Complex64]) -> f64 {
        self.diff_energy(u, 1).sqrt()
    }

    /// Discrete H2 seminorm via second differences.
    pub fn h2_seminorm(&self, u: &[Complex64]) -> f64 {
        self.diff_energy(u, 2).sqrt()
    }

    fn value(&self, u: &[Complex64], k_int: isize, ring: isize, j: isize) -> Complex64 {
        // Zero extension outside the interior unknown set.
        if k_int < 0 || k_int >= self.n_levels() as isize {
            return Complex64::new(0.0, 0.0);
        }
        if ring >= self.disk.n_r as isize {
            return Complex64::new(0.0, 0.0);
        }
        let (ring, j) = if ring <= 0 {
            (0usize, 0usize)
        } else {
            (
                ring as usize,
                j.rem_euclid(self.disk.n_phi as isize) as usize,
            )
        };
        u[self.unknown_index(k_int as usize, self.disk.idx(ring, j))]
    }

    fn diff_energy(&self, u: &[Complex64], order: usize) -> f64 {
        let mut acc = 0.0;
        let dr = self.disk.dr;
        let dz = self.dz;
        for k in 0..self.n_levels() as isize {
            for ring in 0..self.disk.n_r as isize {
                let nj = if ring == 0 { 1 } else { self.disk.n_phi as isize };
                for j in 0..nj {
                    let i2 = self.disk.idx(ring.max(0) as usize, j as usize);
                    let vol = self.cell_volume(i2);
                    let c = self.value(u, k, ring, j);
                    let r = (ring as f64) * dr;
                    let dphi_len = if ring == 0 { dr } else { r * self.disk.dphi };
                    let nb = [
                        (self.value(u, k, ring + 1, j), dr),
                        (self.value(u, k, ring - 1, j), dr),
                        (self.value(u, k + 1, ring, j), dz),
                        (self.value(u, k - 1, ring, j), dz),
                        (self.value(u, k, ring, j + 1), dphi_len),
                        (self.value(u, k, ring, j - 1), dphi_len),
                    ];
                    if order == 1 {
                        // Forward differences in each of the three directions.
                        let gr = (nb[0].0 - c) / dr;
                        let gz = (nb[2].0 - c) / dz;
                        let gp = (nb[4].0 - c) / dphi_len;
                        acc += (gr.norm_sqr() + gz.norm_sqr() + gp.norm_sqr()) * vol;
                    } else {
                        let sr = (nb[0].0 - c * 2.0 + nb[1].0) / (dr * dr);
                        let sz = (nb[2].0 - c * 2.0 + nb[3].0) / (dz * dz);
                        let sp = (nb[4].0 - c * 2.0 + nb[5].0) / (dphi_len * dphi_len);
                        acc += (sr.norm_sqr() + sz.norm_sqr() + sp.norm_sqr()) * vol;
                    }
                }
            }
        }
        acc
    }

    /// Energy fraction of `u` within `band` of either cap (cap-leakage
    /// diagnostic for the hard-truncation convention).
    pub fn cap_band_fraction(&self, u: &[Complex64], band: f64) -> f64 {
        let mut near = 0.0;
        let mut total = 0.0;
        let n2 = self.disk.n_interior();
        for k in 0..self.n_levels() {
            let z = self.z_of_level(k);
            let close = (self.half_length - z.abs()) <= band;
            for i2 in 0..n2 {
                let e = u[self.unknown_index(k, i2)].norm_sqr() * self.cell_volume(i2);
                total += e;
                if close {
                    near += e;
                }
            }
        }
        if total == 0.0 {
            0.0
        } else {
            near / total
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip() {
        let g = DiskGrid::new(1.0, 6, 12);
        for i2 in 0..g.n_interior() {
            let (ring, j) = g.ring_of(i2);
            assert_eq!(g.idx(ring, j), i2);
        }
    }

    #[test]
    fn cell_areas_tile_the_disk() {
        let g = DiskGrid::new(1.0, 40, 80);
        let sum: f64 = (0..g.n_interior()).map(|i| g.cell_area(i)).sum();
        // Interior cells cover the disk of radius R - dr/2.
        let expect = std::f64::consts::PI * (1.0 - 0.5 * g.dr).powi(2);
        assert!((sum - expect).abs() < 1e-2, "sum {sum} vs {expect}");
    }

    #[test]
    fn l2_norm_of_constant() {
        let g = CylGrid::new(DiskGrid::new(1.0, 20, 40), 2.0, 40);
        let u = vec![Complex64::new(1.0, 0.0); g.n_unknowns()];
        let vol: f64 = (0..g.disk.n_interior())
            .map(|i| g.cell_volume(i))
            .sum::<f64>()
            * g.n_levels() as f64;
        assert!((g.l2_norm(&u) - vol.sqrt()).abs() < 1e-12);
    }
}
