use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{Grid, SpectralField};

/// Velocity perturbation `(u1, u2, u3)` at a given time, in the sheared frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VelocityState {
    pub u: [SpectralField; 3],
    pub time: f64,
}

impl VelocityState {
    pub fn zeros(grid: &Grid, time: f64) -> Self {
        VelocityState { u: [grid.zeros(), grid.zeros(), grid.zeros()], time }
    }

    pub fn new(u1: SpectralField, u2: SpectralField, u3: SpectralField, time: f64) -> Result<Self> {
        let d = u1.dims();
        for f in [&u2, &u3] {
            if f.dims() != d {
                return Err(Error::DimensionMismatch { expected: d.tuple(), got: f.dims().tuple() });
            }
            if (f.shear_phase() - u1.shear_phase()).abs() > 1e-14 {
                return Err(Error::InvalidInput("components carry different shear phases".into()));
            }
        }
        Ok(VelocityState { u: [u1, u2, u3], time })
    }

    pub fn shear_phase(&self) -> f64 {
        self.u[0].shear_phase()
    }

    pub fn set_shear_phase(&mut self, s: f64) {
        self.u.iter_mut().for_each(|f| f.set_shear_phase(s));
    }

    pub fn map<F: FnMut(&SpectralField) -> SpectralField>(&self, mut f: F) -> Self {
        VelocityState { u: [f(&self.u[0]), f(&self.u[1]), f(&self.u[2])], time: self.time }
    }

    /// x-average of every component.
    pub fn zero_mode(&self) -> Self {
        self.map(|f| f.zero_mode())
    }

    /// Part with `k != 0` of every component.
    pub fn nonzero_modes(&self) -> Self {
        self.map(|f| f.nonzero_modes())
    }

    /// Squared L2 norm of the whole vector field.
    pub fn norm_sq(&self) -> f64 {
        self.u.iter().map(|f| f.norm_sq()).sum()
    }

    pub fn axpy(&mut self, a: f64, other: &VelocityState) {
        for (x, y) in self.u.iter_mut().zip(&other.u) {
            x.axpy(a, y);
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.u.iter_mut().for_each(|f| f.scale(a));
    }

    pub fn is_finite(&self) -> bool {
        self.u
            .iter()
            .all(|f| f.coeffs().iter().all(|c| c.re.is_finite() && c.im.is_finite()))
    }

    pub fn is_x_independent(&self) -> bool {
        self.u.iter().all(|f| f.is_x_independent())
    }

    /// Divergence `d_x u1 + d_y u2 + d_z u3` with sheared wavenumbers.
    pub fn divergence(&self) -> SpectralField {
        let mut d = self.u[0].derivative(0);
        d += &self.u[1].derivative(1);
        d += &self.u[2].derivative(2);
        d
    }

    /// Largest per-mode `|k . u(k)| / (|k| max_q |u(q)|)`; zero for a zero field.
    pub fn divergence_defect(&self) -> f64 {
        let scale = self
            .u
            .iter()
            .map(|f| f.max_abs_coeff())
            .fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let n = self.u[0].coeffs().len();
        let mut kv = Vec::with_capacity(n);
        self.u[0].for_each_mode(|k, _, _| kv.push(k));
        let mut worst: f64 = 0.0;
        for (q, k) in kv.iter().enumerate() {
            let kk = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
            if kk == 0.0 {
                continue;
            }
            let div = self.u[0].coeffs()[q] * k[0] + self.u[1].coeffs()[q] * k[1] + self.u[2].coeffs()[q] * k[2];
            worst = worst.max(div.norm() / kk);
        }
        worst / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::DomainSpec;
    use num_complex::Complex64;

    #[test]
    fn divergence_of_shear_wave() {
        let g = Grid::new(DomainSpec::new(8, 8, 8, 1.0, 0.1).unwrap()).unwrap();
        let mut st = VelocityState::zeros(&g, 1.0);
        // u = (sin 2 pi z, 0, 0) is divergence free
        st.u[0].set_real_pair(0, 0, 1, Complex64::new(0.0, -0.5));
        assert_eq!(st.divergence_defect(), 0.0);
        st.u[2].set_real_pair(0, 0, 1, Complex64::new(1.0, 0.0));
        assert!(st.divergence_defect() > 0.1);
    }
}
