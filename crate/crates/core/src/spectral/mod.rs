//! Computational box, spectral fields and the sheared-frame bookkeeping.
//!
//! The box is `[0,1) x [-Ly/2, Ly/2) x [0,1)`. Fields are stored in the
//! sheared (Lagrangian) frame `xbar = x - s*y`, where `s` is the field's
//! `shear_phase`: a coefficient at storage mode `(k, m, l)` multiplies
//! `exp(2 pi i (k x + (m/Ly - s k) y + l z))` in stationary coordinates.

mod fft;
mod field;
mod grid;

pub use field::{dealias_cutoff, signed, slot, y_coord, Dims, PhysicalField, SpectralField};
pub use grid::{Grid, RemeshReport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Default length of the truncated y-period.
pub const DEFAULT_LY: f64 = 4.0;

/// Grid resolution, y-period and viscosity of a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    #[serde(default = "default_ly")]
    pub ly: f64,
    pub nu: f64,
}

fn default_ly() -> f64 {
    DEFAULT_LY
}

impl DomainSpec {
    pub fn new(nx: usize, ny: usize, nz: usize, ly: f64, nu: f64) -> Result<Self> {
        let d = DomainSpec { nx, ny, nz, ly, nu };
        d.validate()?;
        Ok(d)
    }

    /// Cubic grid with the default y-period.
    pub fn cube(n: usize, nu: f64) -> Result<Self> {
        Self::new(n, n, n, DEFAULT_LY, nu)
    }

    /// x-independent domain used by the streak fast path: a single x-plane.
    pub fn streak(ny: usize, nz: usize, ly: f64, nu: f64) -> Result<Self> {
        let d = DomainSpec { nx: 1, ny, nz, ly, nu };
        check_dir("ny", ny)?;
        check_dir("nz", nz)?;
        check_scalars(ly, nu)?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        check_dir("nx", self.nx)?;
        check_dir("ny", self.ny)?;
        check_dir("nz", self.nz)?;
        check_scalars(self.ly, self.nu)
    }

    pub fn dims(&self) -> Dims {
        Dims::new(self.nx, self.ny, self.nz)
    }

    /// Shear phase accumulated between two remeshes: one y-mode spacing per unit k.
    pub fn remesh_unit(&self) -> f64 {
        1.0 / self.ly
    }

    /// Remeshing is triggered once the phase reaches half a remesh unit.
    pub fn remesh_threshold(&self) -> f64 {
        0.5 * self.remesh_unit()
    }
}

fn check_dir(name: &str, n: usize) -> Result<()> {
    if n < 4 || n % 2 != 0 {
        return Err(Error::InvalidDomain(format!(
            "{name} = {n} must be an even integer >= 4"
        )));
    }
    Ok(())
}

fn check_scalars(ly: f64, nu: f64) -> Result<()> {
    if !(ly >= 1.0) || !ly.is_finite() {
        return Err(Error::InvalidDomain(format!("Ly = {ly} must be >= 1")));
    }
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::InvalidDomain(format!("nu = {nu} must be positive")));
    }
    Ok(())
}

/// Stationary-frame wavenumbers `(2 pi k, 2 pi (m/Ly - phase k), 2 pi l)` of a storage mode.
pub fn sheared_wavenumber(d: &DomainSpec, phase: f64, mode: (i64, i64, i64)) -> (f64, f64, f64) {
    let (k, m, l) = mode;
    (
        TWO_PI * k as f64,
        TWO_PI * (m as f64 / d.ly - phase * k as f64),
        TWO_PI * l as f64,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn domain_validation() {
        assert!(DomainSpec::new(8, 8, 8, 4.0, 0.01).is_ok());
        assert!(DomainSpec::new(6, 8, 2, 4.0, 0.01).is_err());
        assert!(DomainSpec::new(7, 8, 8, 4.0, 0.01).is_err());
        assert!(DomainSpec::new(8, 8, 8, 0.5, 0.01).is_err());
        assert!(DomainSpec::new(8, 8, 8, 4.0, 0.0).is_err());
        assert!(DomainSpec::streak(8, 8, 4.0, 0.01).is_ok());
    }

    #[test]
    fn sheared_wavenumber_examples() {
        let d = DomainSpec::new(8, 8, 8, 1.0, 0.01).unwrap();
        let (a, b, c) = sheared_wavenumber(&d, 0.0, (1, 2, 3));
        assert!((a - 2.0 * PI).abs() < 1e-14);
        assert!((b - 4.0 * PI).abs() < 1e-14);
        assert!((c - 6.0 * PI).abs() < 1e-14);
        let (a, b, c) = sheared_wavenumber(&d, 2.0, (1, 2, 3));
        assert!((a - 2.0 * PI).abs() < 1e-14);
        assert!(b.abs() < 1e-14);
        assert!((c - 6.0 * PI).abs() < 1e-14);
        // k = 0 modes do not feel the shear
        let (_, b0, _) = sheared_wavenumber(&d, 0.0, (0, 3, 1));
        let (_, b1, _) = sheared_wavenumber(&d, 7.5, (0, 3, 1));
        assert_eq!(b0, b1);
    }
}
