use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::TWO_PI;
use crate::error::{Error, Result};

/// Grid dimensions. Storage is FFT order in each direction with `l` fastest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Dims { nx, ny, nz }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn tuple(&self) -> (usize, usize, usize) {
        (self.nx, self.ny, self.nz)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, l: usize) -> usize {
        (i * self.ny + j) * self.nz + l
    }

    /// Storage index of the signed mode `(k, m, l)`; `None` if not representable.
    pub fn mode_index(&self, k: i64, m: i64, l: i64) -> Option<usize> {
        Some(self.index(
            slot(k, self.nx)?,
            slot(m, self.ny)?,
            slot(l, self.nz)?,
        ))
    }

    /// Signed mode of storage position `(i, j, l)`.
    #[inline]
    pub fn mode(&self, i: usize, j: usize, l: usize) -> (i64, i64, i64) {
        (signed(i, self.nx), signed(j, self.ny), signed(l, self.nz))
    }

    /// Storage index of the mode `-(k, m, l)` paired by Hermitian symmetry.
    #[inline]
    pub fn conjugate_index(&self, i: usize, j: usize, l: usize) -> usize {
        self.index(
            (self.nx - i) % self.nx,
            (self.ny - j) % self.ny,
            (self.nz - l) % self.nz,
        )
    }
}

/// Signed wavenumber of FFT slot `i` on an `n`-point grid.
#[inline]
pub fn signed(i: usize, n: usize) -> i64 {
    if 2 * i < n {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// FFT slot of signed wavenumber `k`, if it lies in `[-n/2, n/2)`.
#[inline]
pub fn slot(k: i64, n: usize) -> Option<usize> {
    let n = n as i64;
    let lo = -(n / 2);
    let hi = (n + 1) / 2;
    if k < lo || k >= hi {
        None
    } else {
        Some(k.rem_euclid(n) as usize)
    }
}

/// Largest retained index under the two-thirds rule.
#[inline]
pub fn dealias_cutoff(n: usize) -> i64 {
    (n / 3) as i64
}

/// Spectral coefficients of one scalar field in the sheared frame.
///
/// Coefficients are normalised so that the field equals
/// `sum c(k,m,l) exp(2 pi i (k xbar + m y / Ly + l z))`; the squared L2 norm
/// over the box is `Ly * sum |c|^2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    dims: Dims,
    ly: f64,
    shear_phase: f64,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(dims: Dims, ly: f64) -> Self {
        SpectralField {
            dims,
            ly,
            shear_phase: 0.0,
            coeffs: vec![Complex64::new(0.0, 0.0); dims.len()],
        }
    }

    pub fn from_coeffs(dims: Dims, ly: f64, shear_phase: f64, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != dims.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} coefficients, got {}",
                dims.len(),
                coeffs.len()
            )));
        }
        Ok(SpectralField { dims, ly, shear_phase, coeffs })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn shear_phase(&self) -> f64 {
        self.shear_phase
    }

    pub fn set_shear_phase(&mut self, s: f64) {
        self.shear_phase = s;
    }

    pub fn with_shear_phase(mut self, s: f64) -> Self {
        self.shear_phase = s;
        self
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Coefficient of the signed mode `(k, m, l)`; zero when not representable.
    pub fn get(&self, k: i64, m: i64, l: i64) -> Complex64 {
        self.dims
            .mode_index(k, m, l)
            .map(|i| self.coeffs[i])
            .unwrap_or_default()
    }

    /// Sets a coefficient. Panics if the mode is outside the grid.
    pub fn set(&mut self, k: i64, m: i64, l: i64, c: Complex64) {
        let i = self
            .dims
            .mode_index(k, m, l)
            .unwrap_or_else(|| panic!("mode ({k},{m},{l}) outside grid {:?}", self.dims));
        self.coeffs[i] = c;
    }

    /// Sets `c` at `(k,m,l)` and `conj(c)` at `-(k,m,l)` so the field stays real.
    pub fn set_real_pair(&mut self, k: i64, m: i64, l: i64, c: Complex64) {
        self.set(k, m, l, c);
        if let Some(i) = self.dims.mode_index(-k, -m, -l) {
            if (k, m, l) == (0, 0, 0) {
                self.coeffs[i] = Complex64::new(c.re, 0.0);
            } else {
                self.coeffs[i] = c.conj();
            }
        }
    }

    /// Squared L2 norm over the box.
    pub fn norm_sq(&self) -> f64 {
        self.ly * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// L2 inner product `int f conj(g)`, real part.
    pub fn inner(&self, other: &SpectralField) -> f64 {
        self.check_compatible(other);
        self.ly
            * self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| (a * b.conj()).re)
                .sum::<f64>()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Relative Hermitian defect `max |c(q) - conj(c(-q))| / max |c|`.
    pub fn hermitian_defect(&self) -> f64 {
        let d = self.dims;
        let scale = self.max_abs_coeff();
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for i in 0..d.nx {
            for j in 0..d.ny {
                for l in 0..d.nz {
                    let a = self.coeffs[d.index(i, j, l)];
                    let b = self.coeffs[d.conjugate_index(i, j, l)];
                    worst = worst.max((a - b.conj()).norm());
                }
            }
        }
        worst / scale
    }

    /// True when every coefficient with `k != 0` vanishes.
    pub fn is_x_independent(&self) -> bool {
        let plane = self.dims.ny * self.dims.nz;
        self.coeffs[plane..].iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    /// Stationary-frame wavenumber vector of storage position `(i, j, l)`.
    #[inline]
    pub fn wavevector(&self, i: usize, j: usize, l: usize) -> [f64; 3] {
        let (k, m, n) = self.dims.mode(i, j, l);
        [
            TWO_PI * k as f64,
            TWO_PI * (m as f64 / self.ly - self.shear_phase * k as f64),
            TWO_PI * n as f64,
        ]
    }

    /// Applies `f(wavevector, mode, coeff)` to every coefficient in storage order.
    pub fn for_each_mode_mut<F>(&mut self, mut f: F)
    where
        F: FnMut([f64; 3], (i64, i64, i64), &mut Complex64),
    {
        let d = self.dims;
        let (ly, s) = (self.ly, self.shear_phase);
        let mut idx = 0;
        for i in 0..d.nx {
            let k = signed(i, d.nx);
            let kx = TWO_PI * k as f64;
            for j in 0..d.ny {
                let m = signed(j, d.ny);
                let ky = TWO_PI * (m as f64 / ly - s * k as f64);
                for l in 0..d.nz {
                    let n = signed(l, d.nz);
                    f([kx, ky, TWO_PI * n as f64], (k, m, n), &mut self.coeffs[idx]);
                    idx += 1;
                }
            }
        }
    }

    /// Visits every coefficient with its wavevector and signed mode.
    pub fn for_each_mode<F>(&self, mut f: F)
    where
        F: FnMut([f64; 3], (i64, i64, i64), Complex64),
    {
        let d = self.dims;
        let mut idx = 0;
        for i in 0..d.nx {
            let k = signed(i, d.nx);
            let kx = TWO_PI * k as f64;
            for j in 0..d.ny {
                let m = signed(j, d.ny);
                let ky = TWO_PI * (m as f64 / self.ly - self.shear_phase * k as f64);
                for l in 0..d.nz {
                    let n = signed(l, d.nz);
                    f([kx, ky, TWO_PI * n as f64], (k, m, n), self.coeffs[idx]);
                    idx += 1;
                }
            }
        }
    }

    /// New field with every coefficient multiplied by `f(wavevector, mode)`.
    pub fn map_multiplier<F>(&self, mut f: F) -> SpectralField
    where
        F: FnMut([f64; 3], (i64, i64, i64)) -> Complex64,
    {
        let mut out = self.clone();
        out.for_each_mode_mut(|kv, mode, c| *c *= f(kv, mode));
        out
    }

    /// Partial derivative along `axis` (0 = x, 1 = y, 2 = z).
    pub fn derivative(&self, axis: usize) -> SpectralField {
        assert!(axis < 3, "axis must be 0, 1 or 2");
        self.map_multiplier(|kv, _| Complex64::new(0.0, kv[axis]))
    }

    /// Laplacian.
    pub fn laplacian(&self) -> SpectralField {
        self.map_multiplier(|kv, _| Complex64::new(-(kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2]), 0.0))
    }

    /// Inverse Laplacian; the mean mode is set to zero.
    pub fn inverse_laplacian(&self) -> SpectralField {
        self.map_multiplier(|kv, _| {
            let k2 = kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2];
            if k2 == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(-1.0 / k2, 0.0)
            }
        })
    }

    /// The x-average (k = 0 part).
    pub fn zero_mode(&self) -> SpectralField {
        let mut out = SpectralField::zeros(self.dims, self.ly).with_shear_phase(self.shear_phase);
        let plane = self.dims.ny * self.dims.nz;
        out.coeffs[..plane].copy_from_slice(&self.coeffs[..plane]);
        out
    }

    /// The part with `k != 0`.
    pub fn nonzero_modes(&self) -> SpectralField {
        let mut out = self.clone();
        let plane = self.dims.ny * self.dims.nz;
        out.coeffs[..plane].iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        out
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &SpectralField) {
        self.check_compatible(other);
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += y * a;
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.coeffs.iter_mut().for_each(|c| *c *= a);
    }

    /// Evaluates the field at a stationary-frame point by direct summation.
    pub fn evaluate_at(&self, x: f64, y: f64, z: f64) -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        self.for_each_mode(|kv, _, c| {
            if c.re != 0.0 || c.im != 0.0 {
                let ph = kv[0] * x + kv[1] * y + kv[2] * z;
                acc += c * Complex64::from_polar(1.0, ph);
            }
        });
        acc.re
    }

    fn check_compatible(&self, other: &SpectralField) {
        assert_eq!(self.dims, other.dims, "field dimensions differ");
        debug_assert!(
            (self.shear_phase - other.shear_phase).abs() < 1e-12,
            "fields carry different shear phases"
        );
    }
}

impl Add<&SpectralField> for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub<&SpectralField> for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl AddAssign<&SpectralField> for SpectralField {
    fn add_assign(&mut self, rhs: &SpectralField) {
        self.axpy(1.0, rhs);
    }
}

impl SubAssign<&SpectralField> for SpectralField {
    fn sub_assign(&mut self, rhs: &SpectralField) {
        self.axpy(-1.0, rhs);
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        self * -1.0
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, a: f64) -> SpectralField {
        let mut out = self.clone();
        out.scale(a);
        out
    }
}

impl Mul<f64> for SpectralField {
    type Output = SpectralField;
    fn mul(mut self, a: f64) -> SpectralField {
        self.scale(a);
        self
    }
}

/// Real values of a field on the sheared grid.
///
/// Point `(i, j, l)` sits at `xbar = i/nx`, `y = -Ly/2 + j Ly/ny`, `z = l/nz`,
/// i.e. at stationary `x = xbar + s y` for shear phase `s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalField {
    dims: Dims,
    ly: f64,
    values: Vec<f64>,
}

impl PhysicalField {
    pub fn zeros(dims: Dims, ly: f64) -> Self {
        PhysicalField { dims, ly, values: vec![0.0; dims.len()] }
    }

    pub fn from_values(dims: Dims, ly: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != dims.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} values, got {}",
                dims.len(),
                values.len()
            )));
        }
        Ok(PhysicalField { dims, ly, values })
    }

    /// Samples `f(xbar, y, z)` on the grid.
    pub fn from_fn<F: FnMut(f64, f64, f64) -> f64>(dims: Dims, ly: f64, mut f: F) -> Self {
        let mut values = Vec::with_capacity(dims.len());
        for i in 0..dims.nx {
            let x = i as f64 / dims.nx as f64;
            for j in 0..dims.ny {
                let y = y_coord(j, dims.ny, ly);
                for l in 0..dims.nz {
                    values.push(f(x, y, l as f64 / dims.nz as f64));
                }
            }
        }
        PhysicalField { dims, ly, values }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize, l: usize) -> f64 {
        self.values[self.dims.index(i, j, l)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Grid coordinates `(xbar, y, z)` of point `(i, j, l)`.
    pub fn coords(&self, i: usize, j: usize, l: usize) -> (f64, f64, f64) {
        (
            i as f64 / self.dims.nx as f64,
            y_coord(j, self.dims.ny, self.ly),
            l as f64 / self.dims.nz as f64,
        )
    }
}

/// y-coordinate of grid row `j`.
#[inline]
pub fn y_coord(j: usize, ny: usize, ly: f64) -> f64 {
    -0.5 * ly + j as f64 * ly / ny as f64
}
