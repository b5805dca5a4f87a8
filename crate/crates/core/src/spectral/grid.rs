use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fft::FftPlans;
use super::field::{dealias_cutoff, Dims, PhysicalField, SpectralField};
use super::DomainSpec;
use crate::error::{Error, Result};

/// Largest relative Hermitian defect accepted by [`Grid::to_physical`].
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Outcome of a remesh: how far the phase moved and what was lost.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RemeshReport {
    /// Number of remesh units removed from the phase (`m' = m - shift * k`).
    pub shift: i64,
    pub old_phase: f64,
    pub new_phase: f64,
    /// Squared L2 norm of the coefficients shifted outside the stored band.
    pub dropped_energy: f64,
}

/// A domain together with cached FFT plans.
#[derive(Clone, Debug)]
pub struct Grid {
    spec: DomainSpec,
    dims: Dims,
    plans: Arc<FftPlans>,
}

impl Grid {
    pub fn new(spec: DomainSpec) -> Result<Self> {
        if spec.nx == 1 {
            DomainSpec::streak(spec.ny, spec.nz, spec.ly, spec.nu)?;
        } else {
            spec.validate()?;
        }
        let dims = spec.dims();
        Ok(Grid { spec, dims, plans: Arc::new(FftPlans::new(dims)) })
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn ly(&self) -> f64 {
        self.spec.ly
    }

    pub fn nu(&self) -> f64 {
        self.spec.nu
    }

    pub fn zeros(&self) -> SpectralField {
        SpectralField::zeros(self.dims, self.spec.ly)
    }

    pub fn physical_zeros(&self) -> PhysicalField {
        PhysicalField::zeros(self.dims, self.spec.ly)
    }

    /// Samples `f(xbar, y, z)` on the grid.
    pub fn sample<F: FnMut(f64, f64, f64) -> f64>(&self, f: F) -> PhysicalField {
        PhysicalField::from_fn(self.dims, self.spec.ly, f)
    }

    fn check_dims(&self, got: Dims) -> Result<()> {
        if got != self.dims {
            return Err(Error::DimensionMismatch { expected: self.dims.tuple(), got: got.tuple() });
        }
        Ok(())
    }

    /// True when every coefficient outside the two-thirds band is zero.
    pub fn is_band_limited(&self, f: &SpectralField) -> bool {
        let d = self.dims;
        let c = f.coeffs();
        let mut idx = 0;
        for i in 0..d.nx {
            for j in 0..d.ny {
                for l in 0..d.nz {
                    if !self.plans.in_band(i, j, l) && (c[idx].re != 0.0 || c[idx].im != 0.0) {
                        return false;
                    }
                    idx += 1;
                }
            }
        }
        true
    }

    /// Inverse transform of a real field. Fails on dimension mismatch or if
    /// the coefficients are not Hermitian symmetric.
    pub fn to_physical(&self, f: &SpectralField) -> Result<PhysicalField> {
        self.check_dims(f.dims())?;
        let defect = f.hermitian_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian { defect });
        }
        Ok(self.to_physical_pair(f, None).0)
    }

    /// Inverse transforms of one or two real fields with a single complex FFT.
    /// Hermitian symmetry is assumed, not checked.
    pub fn to_physical_pair(
        &self,
        a: &SpectralField,
        b: Option<&SpectralField>,
    ) -> (PhysicalField, Option<PhysicalField>) {
        assert_eq!(a.dims(), self.dims, "field dimensions differ from grid");
        let prune = self.is_band_limited(a) && b.map_or(true, |b| self.is_band_limited(b));
        let mut data = pack(a.coeffs(), b.map(|b| b.coeffs()));
        self.plans.inverse(&mut data, self.dims.nx, prune);
        let (p, q) = unpack_real(&data, b.is_some());
        let ly = self.spec.ly;
        (
            PhysicalField::from_values(self.dims, ly, p).expect("length"),
            q.map(|q| PhysicalField::from_values(self.dims, ly, q).expect("length")),
        )
    }

    /// Forward transform (with 1/N normalisation), no dealiasing, phase 0.
    pub fn to_spectral(&self, p: &PhysicalField) -> Result<SpectralField> {
        self.check_dims(p.dims())?;
        Ok(self.to_spectral_pair(p.values(), None, false).0)
    }

    /// Forward transforms of one or two real arrays in grid order, optionally
    /// dealiased. The returned fields carry shear phase 0.
    pub fn to_spectral_pair(
        &self,
        p: &[f64],
        q: Option<&[f64]>,
        dealias: bool,
    ) -> (SpectralField, Option<SpectralField>) {
        let (a, b) = self.forward_raw(p, q, self.dims, dealias);
        let ly = self.spec.ly;
        (
            SpectralField::from_coeffs(self.dims, ly, 0.0, a).expect("length"),
            b.map(|b| SpectralField::from_coeffs(self.dims, ly, 0.0, b).expect("length")),
        )
    }

    fn forward_raw(
        &self,
        p: &[f64],
        q: Option<&[f64]>,
        dims: Dims,
        dealias: bool,
    ) -> (Vec<Complex64>, Option<Vec<Complex64>>) {
        assert_eq!(p.len(), dims.len());
        let mut data: Vec<Complex64> = match q {
            Some(q) => p.iter().zip(q).map(|(&x, &y)| Complex64::new(x, y)).collect(),
            None => p.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        };
        self.plans.forward(&mut data, dims.nx, dealias);
        if q.is_none() {
            return (data, None);
        }
        let mut a = vec![Complex64::default(); data.len()];
        let mut b = vec![Complex64::default(); data.len()];
        let mut idx = 0;
        for i in 0..dims.nx {
            for j in 0..dims.ny {
                for l in 0..dims.nz {
                    let z = data[idx];
                    let zc = data[dims.conjugate_index(i, j, l)].conj();
                    a[idx] = (z + zc) * 0.5;
                    b[idx] = (z - zc) * Complex64::new(0.0, -0.5);
                    idx += 1;
                }
            }
        }
        (a, Some(b))
    }

    /// Values on the y-z plane of the x-averages of `a` (and `b`).
    pub fn plane_to_physical_pair(
        &self,
        a: &SpectralField,
        b: Option<&SpectralField>,
    ) -> (Vec<f64>, Option<Vec<f64>>) {
        let n = self.dims.ny * self.dims.nz;
        let mut data = pack(&a.coeffs()[..n], b.map(|b| &b.coeffs()[..n]));
        let prune = self.is_band_limited(a) && b.map_or(true, |b| self.is_band_limited(b));
        self.plans.inverse(&mut data, 1, prune);
        unpack_real(&data, b.is_some())
    }

    /// Forward transforms of y-z plane arrays into x-independent fields.
    pub fn plane_to_spectral_pair(
        &self,
        p: &[f64],
        q: Option<&[f64]>,
        dealias: bool,
    ) -> (SpectralField, Option<SpectralField>) {
        let pd = Dims::new(1, self.dims.ny, self.dims.nz);
        let (a, b) = self.forward_raw(p, q, pd, dealias);
        let lift = |c: Vec<Complex64>| {
            let mut f = self.zeros();
            f.coeffs_mut()[..c.len()].copy_from_slice(&c);
            f
        };
        (lift(a), b.map(lift))
    }

    /// Zeroes every mode outside the two-thirds band.
    pub fn dealias(&self, f: &SpectralField) -> SpectralField {
        let mut out = f.clone();
        self.dealias_in_place(&mut out);
        out
    }

    /// Zeroes every mode outside the two-thirds band and returns the removed
    /// squared L2 norm.
    pub fn dealias_in_place(&self, f: &mut SpectralField) -> f64 {
        let d = self.dims;
        let ly = f.ly();
        let mut dropped = 0.0;
        let c = f.coeffs_mut();
        let mut idx = 0;
        for i in 0..d.nx {
            for j in 0..d.ny {
                for l in 0..d.nz {
                    if !self.plans.in_band(i, j, l) {
                        dropped += c[idx].norm_sqr();
                        c[idx] = Complex64::default();
                    }
                    idx += 1;
                }
            }
        }
        ly * dropped
    }

    /// Removes whole remesh units `1/Ly` from the shear phase by relabelling
    /// `m -> m - shift * k`, so that the phase lands in `[-1/(2Ly), 1/(2Ly))`.
    /// The represented function is unchanged except for modes pushed outside
    /// `|m| < ny/2`, which are dropped and reported.
    pub fn remesh(&self, f: &SpectralField) -> (SpectralField, RemeshReport) {
        let d = self.dims;
        let ly = f.ly();
        let s = f.shear_phase();
        let shift = (s * ly + 0.5).floor() as i64;
        let new_phase = s - shift as f64 / ly;
        let mut report = RemeshReport { shift, old_phase: s, new_phase, dropped_energy: 0.0 };
        if shift == 0 {
            return (f.clone(), report);
        }
        let mut out = SpectralField::zeros(d, ly).with_shear_phase(new_phase);
        let limit = d.ny as i64 / 2 - 1;
        let src = f.coeffs();
        let mut dropped = 0.0;
        let mut idx = 0;
        for i in 0..d.nx {
            for j in 0..d.ny {
                for l in 0..d.nz {
                    let c = src[idx];
                    idx += 1;
                    if c.re == 0.0 && c.im == 0.0 {
                        continue;
                    }
                    let (k, m, n) = d.mode(i, j, l);
                    let m2 = m - shift * k;
                    if m2.abs() > limit {
                        dropped += c.norm_sqr();
                    } else {
                        let t = d.mode_index(k, m2, n).expect("in range");
                        out.coeffs_mut()[t] = c;
                    }
                }
            }
        }
        report.dropped_energy = ly * dropped;
        (out, report)
    }

    /// Dealiased pseudo-spectral product. x-independent inputs are multiplied
    /// on the y-z plane so no round-off reaches `k != 0`.
    pub fn multiply(&self, a: &SpectralField, b: &SpectralField) -> SpectralField {
        self.product(a, b, true)
    }

    /// Product without dealiasing; exact when the inputs are limited to
    /// `|index| < n/4`.
    pub fn multiply_exact(&self, a: &SpectralField, b: &SpectralField) -> SpectralField {
        self.product(a, b, false)
    }

    fn product(&self, a: &SpectralField, b: &SpectralField, dealias: bool) -> SpectralField {
        assert_eq!(a.dims(), b.dims(), "field dimensions differ");
        debug_assert!((a.shear_phase() - b.shear_phase()).abs() < 1e-12);
        let phase = a.shear_phase();
        if a.max_abs_coeff() == 0.0 || b.max_abs_coeff() == 0.0 {
            return self.zeros().with_shear_phase(phase);
        }
        if a.is_x_independent() && b.is_x_independent() {
            let (p, q) = self.plane_to_physical_pair(a, Some(b));
            let q = q.expect("pair");
            let prod: Vec<f64> = p.iter().zip(&q).map(|(x, y)| x * y).collect();
            return self.plane_to_spectral_pair(&prod, None, dealias).0.with_shear_phase(phase);
        }
        let (p, q) = self.to_physical_pair(a, Some(b));
        let q = q.expect("pair");
        let prod: Vec<f64> = p.values().iter().zip(q.values()).map(|(x, y)| x * y).collect();
        self.to_spectral_pair(&prod, None, dealias).0.with_shear_phase(phase)
    }

    /// Two-thirds cutoffs `(kx, ky, kz)` of the grid.
    pub fn cutoffs(&self) -> (i64, i64, i64) {
        (dealias_cutoff(self.dims.nx), dealias_cutoff(self.dims.ny), dealias_cutoff(self.dims.nz))
    }
}

fn pack(a: &[Complex64], b: Option<&[Complex64]>) -> Vec<Complex64> {
    match b {
        Some(b) => a
            .iter()
            .zip(b)
            .map(|(x, y)| x + Complex64::new(-y.im, y.re))
            .collect(),
        None => a.to_vec(),
    }
}

fn unpack_real(data: &[Complex64], pair: bool) -> (Vec<f64>, Option<Vec<f64>>) {
    let p = data.iter().map(|z| z.re).collect();
    let q = pair.then(|| data.iter().map(|z| z.im).collect());
    (p, q)
}
