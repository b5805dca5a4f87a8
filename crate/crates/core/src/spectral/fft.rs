//! Three-dimensional complex FFTs built from one-dimensional rustfft plans.
//!
//! Lines whose coefficients are known to vanish under the two-thirds rule
//! are skipped ("pruned"), which removes roughly 40% of the work of each
//! transform at the usual resolutions.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::field::{dealias_cutoff, signed, Dims};

const BLOCK: usize = 16;

pub(crate) struct FftPlans {
    dims: Dims,
    x_fwd: Arc<dyn Fft<f64>>,
    x_inv: Arc<dyn Fft<f64>>,
    y_fwd: Arc<dyn Fft<f64>>,
    y_inv: Arc<dyn Fft<f64>>,
    z_fwd: Arc<dyn Fft<f64>>,
    z_inv: Arc<dyn Fft<f64>>,
    scratch_len: usize,
    band_x: Vec<bool>,
    band_y: Vec<bool>,
    band_z: Vec<bool>,
}

impl std::fmt::Debug for FftPlans {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftPlans").field("dims", &self.dims).finish()
    }
}

fn band(n: usize) -> Vec<bool> {
    let c = dealias_cutoff(n);
    (0..n).map(|i| signed(i, n).abs() <= c).collect()
}

/// Contiguous runs of in-band slots, as `(start, len)`.
fn runs(mask: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < mask.len() {
        if mask[i] {
            let s = i;
            while i < mask.len() && mask[i] {
                i += 1;
            }
            out.push((s, i - s));
        } else {
            i += 1;
        }
    }
    out
}

impl FftPlans {
    pub(crate) fn new(dims: Dims) -> Self {
        let mut planner = FftPlanner::<f64>::new();
        let x_fwd = planner.plan_fft_forward(dims.nx);
        let x_inv = planner.plan_fft_inverse(dims.nx);
        let y_fwd = planner.plan_fft_forward(dims.ny);
        let y_inv = planner.plan_fft_inverse(dims.ny);
        let z_fwd = planner.plan_fft_forward(dims.nz);
        let z_inv = planner.plan_fft_inverse(dims.nz);
        let scratch_len = [&x_fwd, &x_inv, &y_fwd, &y_inv, &z_fwd, &z_inv]
            .iter()
            .map(|p| p.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        FftPlans {
            dims,
            x_fwd,
            x_inv,
            y_fwd,
            y_inv,
            z_fwd,
            z_inv,
            scratch_len,
            band_x: band(dims.nx),
            band_y: band(dims.ny),
            band_z: band(dims.nz),
        }
    }

    pub(crate) fn in_band(&self, i: usize, j: usize, l: usize) -> bool {
        self.band_x[i] && self.band_y[j] && self.band_z[l]
    }

    /// Spectral to physical, in place. `nx` is either the full x size or 1
    /// (transform only the k = 0 plane). With `prune`, the input must vanish
    /// outside the two-thirds band.
    pub(crate) fn inverse(&self, data: &mut [Complex64], nx: usize, prune: bool) {
        let (ny, nz) = (self.dims.ny, self.dims.nz);
        debug_assert_eq!(data.len(), nx * ny * nz);
        let mut scratch = vec![Complex64::default(); self.scratch_len];
        let yruns = if prune { runs(&self.band_y) } else { vec![(0, ny)] };
        for i in 0..nx {
            if prune && !self.band_x[i] {
                continue;
            }
            for &(j0, len) in &yruns {
                let s = (i * ny + j0) * nz;
                self.z_inv
                    .process_with_scratch(&mut data[s..s + len * nz], &mut scratch);
            }
        }
        let mut buf = vec![Complex64::default(); BLOCK * ny.max(nx)];
        for i in 0..nx {
            if prune && !self.band_x[i] {
                continue;
            }
            let plane = &mut data[i * ny * nz..(i + 1) * ny * nz];
            self.y_pass(plane, &mut buf, &mut scratch, false);
        }
        if nx > 1 {
            self.x_pass(data, &mut buf, &mut scratch, false);
        }
    }

    /// Physical to spectral, in place, including the 1/N normalisation.
    /// With `prune`, modes outside the two-thirds band are set to zero.
    pub(crate) fn forward(&self, data: &mut [Complex64], nx: usize, prune: bool) {
        let (ny, nz) = (self.dims.ny, self.dims.nz);
        debug_assert_eq!(data.len(), nx * ny * nz);
        let mut scratch = vec![Complex64::default(); self.scratch_len];
        let mut buf = vec![Complex64::default(); BLOCK * ny.max(nx)];
        if nx > 1 {
            self.x_pass(data, &mut buf, &mut scratch, true);
        }
        for i in 0..nx {
            if prune && !self.band_x[i] {
                continue;
            }
            let plane = &mut data[i * ny * nz..(i + 1) * ny * nz];
            self.y_pass(plane, &mut buf, &mut scratch, true);
        }
        let yruns = if prune { runs(&self.band_y) } else { vec![(0, ny)] };
        for i in 0..nx {
            if prune && !self.band_x[i] {
                continue;
            }
            for &(j0, len) in &yruns {
                let s = (i * ny + j0) * nz;
                self.z_fwd
                    .process_with_scratch(&mut data[s..s + len * nz], &mut scratch);
            }
        }
        let norm = 1.0 / (nx * ny * nz) as f64;
        let mut idx = 0;
        for i in 0..nx {
            for j in 0..ny {
                for l in 0..nz {
                    if prune && !(self.band_x[i] && self.band_y[j] && self.band_z[l]) {
                        data[idx] = Complex64::default();
                    } else {
                        data[idx] *= norm;
                    }
                    idx += 1;
                }
            }
        }
    }

    /// Transforms the y-columns of one x-plane. The grid starts at y = -Ly/2,
    /// which contributes a factor (-1)^j to each coefficient.
    fn y_pass(
        &self,
        plane: &mut [Complex64],
        buf: &mut [Complex64],
        scratch: &mut [Complex64],
        forward: bool,
    ) {
        let (ny, nz) = (self.dims.ny, self.dims.nz);
        let plan = if forward { &self.y_fwd } else { &self.y_inv };
        let mut l0 = 0;
        while l0 < nz {
            let b = BLOCK.min(nz - l0);
            for bb in 0..b {
                let line = &mut buf[bb * ny..(bb + 1) * ny];
                for (j, v) in line.iter_mut().enumerate() {
                    *v = plane[j * nz + l0 + bb];
                }
                if !forward {
                    line.iter_mut().skip(1).step_by(2).for_each(|v| *v = -*v);
                }
            }
            plan.process_with_scratch(&mut buf[..b * ny], scratch);
            for bb in 0..b {
                let line = &mut buf[bb * ny..(bb + 1) * ny];
                if forward {
                    line.iter_mut().skip(1).step_by(2).for_each(|v| *v = -*v);
                }
                for (j, v) in line.iter().enumerate() {
                    plane[j * nz + l0 + bb] = *v;
                }
            }
            l0 += b;
        }
    }

    fn x_pass(
        &self,
        data: &mut [Complex64],
        buf: &mut [Complex64],
        scratch: &mut [Complex64],
        forward: bool,
    ) {
        let (nx, ny, nz) = self.dims.tuple();
        let cols = ny * nz;
        let plan = if forward { &self.x_fwd } else { &self.x_inv };
        let mut c0 = 0;
        while c0 < cols {
            let b = BLOCK.min(cols - c0);
            for bb in 0..b {
                for i in 0..nx {
                    buf[bb * nx + i] = data[i * cols + c0 + bb];
                }
            }
            plan.process_with_scratch(&mut buf[..b * nx], scratch);
            for bb in 0..b {
                for i in 0..nx {
                    data[i * cols + c0 + bb] = buf[bb * nx + i];
                }
            }
            c0 += b;
        }
    }
}
