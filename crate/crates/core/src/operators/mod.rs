//! Field-level linear operators, pressure solves and the pressure
//! decomposition used by the nonlinear diagnostics.

mod coefficients;
pub use coefficients::SLOPE_LIMIT;

pub use coefficients::{compute_coefficients, CoefficientFields};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::spectral::{Grid, SpectralField};
use crate::state::VelocityState;

/// Keeps only the `k = 0` modes (the x-average).
pub fn project_zero(f: &SpectralField) -> SpectralField {
    f.zero_mode()
}

/// Removes the `k = 0` modes.
pub fn project_nonzero(f: &SpectralField) -> SpectralField {
    f.nonzero_modes()
}

/// Helmholtz–Leray projection with sheared wavenumbers. The mean mode is untouched.
pub fn leray_project(u: &VelocityState) -> VelocityState {
    let mut out = u.clone();
    leray_project_in_place(&mut out);
    out
}

pub fn leray_project_in_place(u: &mut VelocityState) {
    let mut kv = Vec::with_capacity(u.u[0].coeffs().len());
    u.u[0].for_each_mode(|k, _, _| kv.push(k));
    let [a, b, c] = &mut u.u;
    let (a, b, c) = (a.coeffs_mut(), b.coeffs_mut(), c.coeffs_mut());
    for (q, k) in kv.iter().enumerate() {
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        if k2 == 0.0 {
            continue;
        }
        let dot = (a[q] * k[0] + b[q] * k[1] + c[q] * k[2]) / k2;
        a[q] -= dot * k[0];
        b[q] -= dot * k[1];
        c[q] -= dot * k[2];
    }
}

/// `Delta^{-1}` on the `k != 0` modes; the `k = 0` modes are set to zero.
pub fn inv_laplacian_nonzero(f: &SpectralField) -> SpectralField {
    f.map_multiplier(|k, (kx, _, _)| {
        if kx == 0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(-1.0 / (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]), 0.0)
        }
    })
}

/// `Delta^{-1}` on every mode except the mean, which is set to zero.
pub fn inv_laplacian(f: &SpectralField) -> SpectralField {
    f.inverse_laplacian()
}

/// Linear pressure: solves `Delta p^L = -2 d_x u2`.
pub fn solve_pressure_linear(u2: &SpectralField) -> SpectralField {
    inv_laplacian_nonzero(&u2.derivative(0)) * -2.0
}

/// Recovers `u1_≠` from `(u2, u3)` via incompressibility, mode by mode.
pub fn reconstruct_u1(u2: &SpectralField, u3: &SpectralField) -> SpectralField {
    let mut out = SpectralField::zeros(u2.dims(), u2.ly()).with_shear_phase(u2.shear_phase());
    let mut q = 0;
    let (b, c) = (u2.coeffs(), u3.coeffs());
    out.for_each_mode_mut(|k, (kx, _, _), v| {
        if kx != 0 {
            *v = -(b[q] * k[1] + c[q] * k[2]) / k[0];
        }
        q += 1;
    });
    out
}

/// Gradient `(d_x f, d_y f, d_z f)`.
pub fn gradient(f: &SpectralField) -> [SpectralField; 3] {
    [f.derivative(0), f.derivative(1), f.derivative(2)]
}

/// Dealiased transport term `a . grad f`.
pub fn advect(grid: &Grid, a: [&SpectralField; 3], f: &SpectralField) -> SpectralField {
    let g = gradient(f);
    let mut out = grid.multiply(a[0], &g[0]);
    out += &grid.multiply(a[1], &g[1]);
    out += &grid.multiply(a[2], &g[2]);
    out
}

/// `sum_{i in idx, j in idx} d_i a^j d_j b^i`, dealiased.
fn grad_contraction(grid: &Grid, a: [&SpectralField; 3], b: [&SpectralField; 3], idx: &[usize]) -> SpectralField {
    let mut out = grid.zeros().with_shear_phase(a[0].shear_phase());
    for &i in idx {
        for &j in idx {
            out += &grid.multiply(&a[j].derivative(i), &b[i].derivative(j));
        }
    }
    out
}

fn components(u: &VelocityState) -> [&SpectralField; 3] {
    [&u.u[0], &u.u[1], &u.u[2]]
}

/// The four pieces `p1..p4` of the nonlinear pressure.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PressureParts {
    pub p1: SpectralField,
    pub p2: SpectralField,
    pub p3: SpectralField,
    pub p4: SpectralField,
}

impl PressureParts {
    pub fn sum(&self) -> SpectralField {
        let mut s = self.p1.clone();
        s += &self.p2;
        s += &self.p3;
        s += &self.p4;
        s
    }
}

/// Splits the nonlinear pressure by mode interaction:
/// `Delta p1 = -2(d_y ubar1 d_x u2_≠ + d_z ubar1 d_x u3_≠)`,
/// `Delta p2 = -d_i ubar^j d_j ubar^i`,
/// `Delta p3 = -2 d_a ubar^b d_b u_≠^a` (a, b in {y, z}),
/// `Delta p4 = -d_i u_≠^j d_j u_≠^i`.
pub fn pressure_decomposition(grid: &Grid, u: &VelocityState) -> PressureParts {
    let z = u.zero_mode();
    let n = u.nonzero_modes();
    let mut s1 = grid.multiply(&z.u[0].derivative(1), &n.u[1].derivative(0));
    s1 += &grid.multiply(&z.u[0].derivative(2), &n.u[2].derivative(0));
    let s2 = grad_contraction(grid, components(&z), components(&z), &[0, 1, 2]);
    let s3 = grad_contraction(grid, components(&z), components(&n), &[1, 2]);
    let s4 = grad_contraction(grid, components(&n), components(&n), &[0, 1, 2]);
    PressureParts {
        p1: inv_laplacian(&s1) * -2.0,
        p2: inv_laplacian(&s2) * -1.0,
        p3: inv_laplacian(&s3) * -2.0,
        p4: inv_laplacian(&s4) * -1.0,
    }
}

/// Direct solve of `Delta p^NL = -d_i u^j d_j u^i`.
pub fn nonlinear_pressure(grid: &Grid, u: &VelocityState) -> SpectralField {
    let s = grad_contraction(grid, components(u), components(u), &[0, 1, 2]);
    inv_laplacian(&s) * -1.0
}

/// `W2 = u2_≠ + kappa u3_≠`.
pub fn compute_w2(grid: &Grid, u: &VelocityState, c: &CoefficientFields) -> SpectralField {
    let mut w = u.u[1].nonzero_modes();
    w += &grid.multiply(&c.kappa_for(u.shear_phase()), &u.u[2].nonzero_modes());
    w
}

/// The good derivative `(d_z - kappa d_y) f`.
pub fn good_derivative(grid: &Grid, f: &SpectralField, c: &CoefficientFields) -> SpectralField {
    let mut out = f.derivative(2);
    out -= &grid.multiply(&c.kappa_for(f.shear_phase()), &f.derivative(1));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::DomainSpec;
    use crate::random::{random_field, random_state};

    fn grid() -> Grid {
        Grid::new(DomainSpec::new(12, 12, 12, 2.0, 0.01).unwrap()).unwrap()
    }

    #[test]
    fn leray_is_idempotent_and_annihilates_gradients() {
        let g = grid();
        for seed in 0..50 {
            let mut u = random_state(&g, seed, 3, false);
            u.set_shear_phase(0.1 * (seed as f64 - 25.0) / 25.0);
            let p = leray_project(&u);
            assert!(p.divergence_defect() < 1e-14);
            let pp = leray_project(&p);
            let mut d = pp.clone();
            d.axpy(-1.0, &p);
            assert!(d.norm_sq().sqrt() <= 1e-13 * p.norm_sq().sqrt());
            // self-adjoint: <Pu, v> = <u, Pv>
            let v = random_state(&g, seed + 1000, 3, false);
            let mut v = v;
            v.set_shear_phase(u.shear_phase());
            let pv = leray_project(&v);
            let lhs: f64 = (0..3).map(|i| p.u[i].inner(&v.u[i])).sum();
            let rhs: f64 = (0..3).map(|i| u.u[i].inner(&pv.u[i])).sum();
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
            let phi = random_field(&g, seed + 7, 3);
            let grad = gradient(&phi);
            let gs = VelocityState::new(grad[0].clone(), grad[1].clone(), grad[2].clone(), 1.0).unwrap();
            assert!(leray_project(&gs).norm_sq().sqrt() < 1e-12 * gs.norm_sq().sqrt());
        }
    }

    #[test]
    fn inverse_laplacian_single_mode() {
        let g = grid();
        let mut f = g.zeros();
        f.set(1, 0, 0, Complex64::new(0.7, 0.2));
        let r = inv_laplacian_nonzero(&f);
        let expect = Complex64::new(0.7, 0.2) / -(4.0 * std::f64::consts::PI.powi(2));
        assert!((r.get(1, 0, 0) - expect).norm() < 1e-15);
        let z = random_field(&g, 3, 3).zero_mode();
        assert_eq!(inv_laplacian_nonzero(&z).norm_sq(), 0.0);
        let h = random_field(&g, 4, 3);
        let back = inv_laplacian_nonzero(&h).laplacian();
        let diff = &back - &h.nonzero_modes();
        assert!(diff.norm() < 1e-13 * h.norm());
    }

    #[test]
    fn linear_pressure_residual_and_single_mode() {
        let g = grid();
        // u2 = sin(2 pi x): coefficient 1/(2i) at k = 1
        let mut u2 = g.zeros();
        u2.set_real_pair(1, 0, 0, Complex64::new(0.0, -0.5));
        let p = solve_pressure_linear(&u2);
        // -2 * (2 pi i) * (1/(2i)) / (-(2 pi)^2) = 1/(2 pi)
        let expect = Complex64::new(0.5 / std::f64::consts::PI, 0.0);
        assert!((p.get(1, 0, 0) - expect).norm() < 1e-14);
        let r = random_field(&g, 9, 3).with_shear_phase(0.2);
        let p = solve_pressure_linear(&r);
        let mut res = p.laplacian();
        res.axpy(2.0, &r.derivative(0));
        assert!(res.norm() < 1e-12 * r.derivative(0).norm());
        assert_eq!(solve_pressure_linear(&r.zero_mode()).norm(), 0.0);
    }

    #[test]
    fn reconstruction_is_divergence_free() {
        let g = grid();
        let mut u3 = g.zeros();
        u3.set(1, 0, 1, Complex64::new(1.0, 0.0));
        let u1 = reconstruct_u1(&g.zeros(), &u3);
        assert!((u1.get(1, 0, 1) + Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let a = random_field(&g, 1, 3).nonzero_modes().with_shear_phase(0.15);
        let b = random_field(&g, 2, 3).nonzero_modes().with_shear_phase(0.15);
        let st = VelocityState::new(reconstruct_u1(&a, &b), a, b, 1.0).unwrap();
        assert!(st.divergence_defect() < 1e-14);
    }

    #[test]
    fn pressure_parts_sum_to_direct_solve() {
        let g = grid();
        let u = leray_project(&random_state(&g, 5, 3, false));
        let parts = pressure_decomposition(&g, &u);
        let direct = nonlinear_pressure(&g, &u);
        let diff = &parts.sum() - &direct;
        assert!(diff.norm() <= 1e-12 * direct.norm());
        let z = u.zero_mode();
        let parts = pressure_decomposition(&g, &z);
        assert_eq!(parts.p1.norm() + parts.p3.norm() + parts.p4.norm(), 0.0);
        let n = u.nonzero_modes();
        let parts = pressure_decomposition(&g, &n);
        assert_eq!(parts.p1.norm() + parts.p2.norm() + parts.p3.norm(), 0.0);
        assert!(parts.p2.is_x_independent());
    }
}
