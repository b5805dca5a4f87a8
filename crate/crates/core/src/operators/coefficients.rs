//! Coefficient fields derived from the streamwise streak `ubar1`:
//! `V = y + ubar1`, `kappa`, `rho1`, `rho2` on the (y, z) grid and the
//! fields `psi_t, psi_y, psi_z, G, H` of the coordinate change
//! `Y = V(t, y, z)` on a uniform (Y, Z) grid.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{Grid, SpectralField, TWO_PI};

/// Slope bound `|d_y ubar1| < 1/2` under which `y -> V` is invertible with `d_y V >= 1/2`.
pub const SLOPE_LIMIT: f64 = 0.5;

/// Coefficient fields at one instant. Plane arrays are indexed `j * nz + l`.
#[derive(Clone, Debug)]
pub struct CoefficientFields {
    pub ubar1: SpectralField,
    pub dt_ubar1: SpectralField,
    /// `kappa = d_z ubar1 / (1 + d_y ubar1)`, as the trigonometric interpolant of its grid values.
    pub kappa: SpectralField,
    /// Time derivative of `kappa`.
    pub dt_kappa: SpectralField,
    pub rho1: SpectralField,
    pub rho2: SpectralField,
    /// `V` on the (y, z) grid.
    pub v: Vec<f64>,
    /// `d_y V` on the (y, z) grid.
    pub dy_v: Vec<f64>,
    pub kappa_values: Vec<f64>,
    pub rho1_values: Vec<f64>,
    pub rho2_values: Vec<f64>,
    /// Fields on the uniform (Y, Z) grid of the transformed coordinates.
    pub psi_t: Vec<f64>,
    pub psi_y: Vec<f64>,
    pub psi_z: Vec<f64>,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    /// Preimages `y(Y_j, z_l)` of the uniform Y grid.
    pub preimage: Vec<f64>,
    pub valid_time: f64,
    pub max_slope: f64,
    ny: usize,
    nz: usize,
}

/// Builds the coefficient fields from the x-average of `u1` and its time derivative.
/// Fails with [`Error::SlopeCondition`] when `max |d_y ubar1| >= 1/2`.
pub fn compute_coefficients(
    grid: &Grid,
    ubar1: &SpectralField,
    dt_ubar1: &SpectralField,
    time: f64,
) -> Result<CoefficientFields> {
    let ubar1 = ubar1.zero_mode().with_shear_phase(0.0);
    let dt_ubar1 = dt_ubar1.zero_mode().with_shear_phase(0.0);
    let d = grid.dims();
    let (ny, nz, ly) = (d.ny, d.nz, grid.ly());
    let n = ny * nz;

    let uy_s = ubar1.derivative(1);
    let uz_s = ubar1.derivative(2);
    let (u, _) = grid.plane_to_physical_pair(&ubar1, None);
    let (uy, uz) = grid.plane_to_physical_pair(&uy_s, Some(&uz_s));
    let uz = uz.expect("pair");
    let (uyy, uyz) = grid.plane_to_physical_pair(&uy_s.derivative(1), Some(&uy_s.derivative(2)));
    let uyz = uyz.expect("pair");
    let (uzz, _) = grid.plane_to_physical_pair(&uz_s.derivative(2), None);
    let (wy, wz) = grid.plane_to_physical_pair(&dt_ubar1.derivative(1), Some(&dt_ubar1.derivative(2)));
    let wz = wz.expect("pair");

    let max_slope = uy.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if !(max_slope < SLOPE_LIMIT) {
        return Err(Error::SlopeCondition { max_slope });
    }

    let mut v = vec![0.0; n];
    let mut dy_v = vec![0.0; n];
    let mut kappa = vec![0.0; n];
    let mut dt_kappa = vec![0.0; n];
    let mut rho1 = vec![0.0; n];
    let mut rho2 = vec![0.0; n];
    for j in 0..ny {
        let y = -0.5 * ly + j as f64 * ly / ny as f64;
        for l in 0..nz {
            let q = j * nz + l;
            let a = 1.0 + uy[q];
            let k = uz[q] / a;
            let ky = (uyz[q] * a - uz[q] * uyy[q]) / (a * a);
            let kz = (uzz[q] * a - uz[q] * uyz[q]) / (a * a);
            v[q] = y + u[q];
            dy_v[q] = a;
            kappa[q] = k;
            dt_kappa[q] = (wz[q] * a - uz[q] * wy[q]) / (a * a);
            rho1[q] = (ky + k * kz) / (a * (1.0 + k * k));
            rho2[q] = (kz - k * ky) / (1.0 + k * k);
        }
    }
    let (kappa_s, dt_kappa_s) = grid.plane_to_spectral_pair(&kappa, Some(&dt_kappa), false);
    let (rho1_s, rho2_s) = grid.plane_to_spectral_pair(&rho1, Some(&rho2), false);

    // Inverse map y = V^{-1}(Y, z) column by column on the trigonometric interpolant.
    let lap = ubar1.laplacian();
    let series = ColumnSeries::new(&[&ubar1, &uy_s, &uz_s, &dt_ubar1, &lap], ny, nz, ly);
    let mut psi_t = vec![0.0; n];
    let mut psi_y = vec![0.0; n];
    let mut psi_z = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    let mut preimage = vec![0.0; n];
    for l in 0..nz {
        let bound = series.abs_bound(0, l);
        for j in 0..ny {
            let target = -0.5 * ly + j as f64 * ly / ny as f64;
            let y = invert_monotone(
                |y| {
                    let vals = series.eval(l, y, 2);
                    (y + vals[0] - target, 1.0 + vals[1])
                },
                target - bound - 1e-12,
                target + bound + 1e-12,
            )?;
            let vals = series.eval(l, y, 5);
            let q = j * nz + l;
            preimage[q] = y;
            psi_y[q] = vals[1];
            psi_z[q] = vals[2];
            psi_t[q] = vals[3];
            h[q] = vals[4];
            g[q] = (1.0 + vals[1]).powi(2) + vals[2] * vals[2] - 1.0;
        }
    }

    Ok(CoefficientFields {
        ubar1,
        dt_ubar1,
        kappa: kappa_s.with_shear_phase(0.0),
        dt_kappa: dt_kappa_s.expect("pair"),
        rho1: rho1_s,
        rho2: rho2_s.expect("pair"),
        v,
        dy_v,
        kappa_values: kappa,
        rho1_values: rho1,
        rho2_values: rho2,
        psi_t,
        psi_y,
        psi_z,
        g,
        h,
        preimage,
        valid_time: time,
        max_slope,
        ny,
        nz,
    })
}

impl CoefficientFields {
    /// `kappa` carrying the given shear phase, for products with sheared fields
    /// (an x-independent field is unaffected by the phase).
    pub fn kappa_for(&self, phase: f64) -> SpectralField {
        self.kappa.clone().with_shear_phase(phase)
    }

    /// `ubar1` carrying the given shear phase.
    pub fn ubar1_for(&self, phase: f64) -> SpectralField {
        self.ubar1.clone().with_shear_phase(phase)
    }

    pub fn plane_shape(&self) -> (usize, usize) {
        (self.ny, self.nz)
    }

    /// Residual of `d_Y G + 2 d_Z psi_z - 2 H` on the (Y, Z) grid, relative to
    /// `max |2 H|` (absolute when `H` vanishes). Derivatives are spectral.
    pub fn transformed_identity_residual(&self, grid: &Grid) -> f64 {
        let (gs, pz) = grid.plane_to_spectral_pair(&self.g, Some(&self.psi_z), false);
        let pz = pz.expect("pair");
        let (gy, pzz) = grid.plane_to_physical_pair(&gs.derivative(1), Some(&pz.derivative(2)));
        let pzz = pzz.expect("pair");
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for q in 0..self.g.len() {
            worst = worst.max((gy[q] + 2.0 * pzz[q] - 2.0 * self.h[q]).abs());
            scale = scale.max((2.0 * self.h[q]).abs());
        }
        if scale > 0.0 {
            worst / scale
        } else {
            worst
        }
    }

    /// Pointwise residual of `(d_z - kappa d_y) V` on the (y, z) grid.
    pub fn good_derivative_of_v_residual(&self, grid: &Grid) -> f64 {
        let (uy, uz) = grid.plane_to_physical_pair(&self.ubar1.derivative(1), Some(&self.ubar1.derivative(2)));
        let uz = uz.expect("pair");
        uy.iter()
            .zip(&uz)
            .zip(&self.kappa_values)
            .map(|((a, b), k)| (b - k * (1.0 + a)).abs())
            .fold(0.0, f64::max)
    }
}

/// y-Fourier series of several x-independent fields, one per z grid column.
struct ColumnSeries {
    ny: usize,
    ly: f64,
    /// `coef[f][l][j]`: coefficient of `exp(2 pi i m y / Ly)`, `m = signed(j)`.
    coef: Vec<Vec<Vec<Complex64>>>,
}

impl ColumnSeries {
    fn new(fields: &[&SpectralField], ny: usize, nz: usize, ly: f64) -> Self {
        let coef = fields
            .iter()
            .map(|f| {
                (0..nz)
                    .map(|l| {
                        let z = l as f64 / nz as f64;
                        (0..ny)
                            .map(|j| {
                                let mut s = Complex64::default();
                                for n in 0..nz {
                                    let c = f.coeffs()[j * nz + n];
                                    if c.re != 0.0 || c.im != 0.0 {
                                        let kn = crate::spectral::signed(n, nz) as f64;
                                        s += c * Complex64::from_polar(1.0, TWO_PI * kn * z);
                                    }
                                }
                                s
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        ColumnSeries { ny, ly, coef }
    }

    fn abs_bound(&self, field: usize, l: usize) -> f64 {
        self.coef[field][l].iter().map(|c| c.norm()).sum()
    }

    /// Values of the first `count` fields at height `y` in column `l`.
    fn eval(&self, l: usize, y: f64, count: usize) -> [f64; 5] {
        let mut out = [0.0; 5];
        let w = Complex64::from_polar(1.0, TWO_PI * y / self.ly);
        let half = self.ny / 2;
        // positive m = 0..half-1 and negative m = -half..-1
        let mut e = Complex64::new(1.0, 0.0);
        let mut pos = vec![Complex64::default(); half];
        for p in pos.iter_mut() {
            *p = e;
            e *= w;
        }
        let wn = w.conj();
        let mut e = wn;
        let mut neg = vec![Complex64::default(); half];
        for p in neg.iter_mut() {
            *p = e;
            e *= wn;
        }
        for (f, o) in out.iter_mut().enumerate().take(count) {
            let c = &self.coef[f][l];
            let mut s = Complex64::default();
            for (m, p) in pos.iter().enumerate() {
                s += c[m] * p;
            }
            for (m1, p) in neg.iter().enumerate() {
                // m = -(m1 + 1) sits in slot ny - m1 - 1
                s += c[self.ny - m1 - 1] * p;
            }
            *o = s.re;
        }
        out
    }
}

/// Safeguarded Newton iteration for the root of an increasing function in `[lo, hi]`.
fn invert_monotone<F: FnMut(f64) -> (f64, f64)>(mut f: F, mut lo: f64, mut hi: f64) -> Result<f64> {
    let mut y = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (r, dr) = f(y);
        if r.abs() <= 1e-14 * (1.0 + y.abs()) {
            return Ok(y);
        }
        if r > 0.0 {
            hi = y;
        } else {
            lo = y;
        }
        let newton = y - r / dr;
        y = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo < 1e-15 * (1.0 + y.abs()) {
            return Ok(y);
        }
    }
    Err(Error::Numerical("inverse map did not converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::DomainSpec;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        Grid::new(DomainSpec::new(8, n, n, 2.0, 0.01).unwrap()).unwrap()
    }

    #[test]
    fn couette_gives_trivial_coefficients() {
        let g = grid(16);
        let c = compute_coefficients(&g, &g.zeros(), &g.zeros(), 1.0).unwrap();
        assert!(c.kappa.norm() == 0.0 && c.rho1.norm() == 0.0 && c.rho2.norm() == 0.0);
        assert!(c.g.iter().chain(&c.h).chain(&c.psi_t).all(|v| *v == 0.0));
        for j in 0..16 {
            let y = -1.0 + j as f64 * 2.0 / 16.0;
            assert!((c.v[j * 16] - y).abs() < 1e-15);
            assert!((c.preimage[j * 16 + 3] - y).abs() < 1e-13);
        }
    }

    #[test]
    fn sinusoidal_streak_in_z() {
        let g = grid(16);
        let eps = 0.01;
        let p = g.sample(|_, _, z| eps * (2.0 * PI * z).sin());
        let ub = g.to_spectral(&p).unwrap().zero_mode();
        let c = compute_coefficients(&g, &ub, &g.zeros(), 1.0).unwrap();
        for j in 0..16 {
            for l in 0..16 {
                let z = l as f64 / 16.0;
                let q = j * 16 + l;
                let kappa = 2.0 * PI * eps * (2.0 * PI * z).cos();
                let dz_kappa = -4.0 * PI * PI * eps * (2.0 * PI * z).sin();
                assert!((c.kappa_values[q] - kappa).abs() < 1e-13);
                assert!((c.rho2_values[q] - dz_kappa / (1.0 + kappa * kappa)).abs() < 1e-12);
                let rho1 = kappa * dz_kappa / (1.0 + kappa * kappa);
                assert!((c.rho1_values[q] - rho1).abs() < 1e-12);
                // V is y + eps sin(2 pi z), so the preimage of Y is Y - eps sin(2 pi z)
                let yy = -1.0 + j as f64 / 8.0;
                assert!((c.preimage[q] - (yy - eps * (2.0 * PI * z).sin())).abs() < 1e-12);
            }
        }
        assert!(c.good_derivative_of_v_residual(&g) < 1e-15);
    }

    #[test]
    fn slope_condition_enforced() {
        let g = grid(16);
        let p = g.sample(|_, y, _| 0.2 * (PI * y).sin());
        let ub = g.to_spectral(&p).unwrap();
        // max slope 0.2 * pi > 1/2
        assert!(matches!(
            compute_coefficients(&g, &ub, &g.zeros(), 1.0),
            Err(Error::SlopeCondition { .. })
        ));
    }

    #[test]
    fn transformed_identity_holds() {
        let g = grid(32);
        let p = g.sample(|_, y, z| 0.01 * ((PI * y).cos() * (2.0 * PI * z).sin() + 0.5 * (PI * y + 0.3).sin()));
        let ub = g.to_spectral(&p).unwrap();
        let c = compute_coefficients(&g, &ub, &g.zeros(), 1.0).unwrap();
        assert!(c.transformed_identity_residual(&g) < 1e-8, "{}", c.transformed_identity_residual(&g));
    }
}
