//! Splitting of the nonlinearity in the `j = 2, 3` momentum equations into
//! streak transport, zero/nonzero-mode interactions and pressure pieces.

use crate::operators::{advect, nonlinear_pressure, pressure_decomposition, CoefficientFields};
use crate::spectral::{Grid, SpectralField};
use crate::state::VelocityState;

/// The six pieces `g_{j,k}` for `j = 2, 3`, and `G_{2,k} = (g_{2,k} + kappa g_{3,k})_≠`:
/// 1. `(ubar2 d_y + ubar3 d_z) u^j`
/// 2. `u_≠ . grad ubar^j`
/// 3. `u_≠ . grad u^j_≠`
/// 4. to 6. `d_j p2`, `d_j p3`, `d_j p4`.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub g2: [SpectralField; 6],
    pub g3: [SpectralField; 6],
    pub big_g2: [SpectralField; 6],
}

fn sum(fs: &[SpectralField]) -> SpectralField {
    let mut s = fs[0].clone();
    for f in &fs[1..] {
        s += f;
    }
    s
}

impl Decomposition {
    pub fn g2_total(&self) -> SpectralField {
        sum(&self.g2)
    }

    pub fn g3_total(&self) -> SpectralField {
        sum(&self.g3)
    }

    pub fn big_g2_total(&self) -> SpectralField {
        sum(&self.big_g2)
    }
}

fn pieces(grid: &Grid, u: &VelocityState, j: usize, p: &crate::operators::PressureParts) -> [SpectralField; 6] {
    let z = u.zero_mode();
    let n = u.nonzero_modes();
    let f = &u.u[j];
    let zero = grid.zeros().with_shear_phase(u.shear_phase());
    let g1 = advect(grid, [&zero, &z.u[1], &z.u[2]], f);
    let g2 = advect(grid, [&n.u[0], &n.u[1], &n.u[2]], &z.u[j]);
    let g3 = advect(grid, [&n.u[0], &n.u[1], &n.u[2]], &n.u[j]);
    [g1, g2, g3, p.p2.derivative(j), p.p3.derivative(j), p.p4.derivative(j)]
}

pub fn nonlinearity_decomposition(grid: &Grid, u: &VelocityState, c: &CoefficientFields) -> Decomposition {
    let p = pressure_decomposition(grid, u);
    let g2 = pieces(grid, u, 1, &p);
    let g3 = pieces(grid, u, 2, &p);
    let kappa = c.kappa_for(u.shear_phase());
    let big: Vec<SpectralField> =
        g2.iter().zip(&g3).map(|(a, b)| (a + &grid.multiply(&kappa, b)).nonzero_modes()).collect();
    Decomposition { g2, g3, big_g2: big.try_into().unwrap() }
}

/// `g_j = u . grad u^j - ubar1 d_x u^j + d_j (p^NL - p1)`, with `p^NL` from
/// its own Poisson solve; `j` is the component index (1 or 2).
pub fn nonlinearity_direct(grid: &Grid, u: &VelocityState, j: usize) -> SpectralField {
    let f = &u.u[j];
    let mut g = advect(grid, [&u.u[0], &u.u[1], &u.u[2]], f);
    g -= &grid.multiply(&u.u[0].zero_mode(), &f.derivative(0));
    let mut p = nonlinear_pressure(grid, u);
    p -= &pressure_decomposition(grid, u).p1;
    g += &p.derivative(j);
    g
}

/// Relative residual of
/// `G_{2,1} = [(ubar2 d_y + ubar3 d_z) W2 - u3_≠ (ubar2 d_y + ubar3 d_z) kappa]_≠`
/// with `W2 = u2_≠ + kappa u3_≠`.
pub fn g21_identity_residual(grid: &Grid, u: &VelocityState, c: &CoefficientFields, d: &Decomposition) -> f64 {
    let z = u.zero_mode();
    let n = u.nonzero_modes();
    let kappa = c.kappa_for(u.shear_phase());
    let zero = grid.zeros().with_shear_phase(u.shear_phase());
    let w2 = &n.u[1] + &grid.multiply(&kappa, &n.u[2]);
    let transport = |f: &SpectralField| advect(grid, [&zero, &z.u[1], &z.u[2]], f);
    let mut rhs = transport(&w2);
    rhs -= &grid.multiply(&n.u[2], &transport(&kappa));
    let rhs = rhs.nonzero_modes();
    let lhs = &d.big_g2[0];
    (lhs - &rhs).norm() / lhs.norm().max(rhs.norm()).max(1e-300)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::compute_coefficients;
    use crate::random::random_state;
    use crate::spectral::DomainSpec;

    fn setup() -> (Grid, VelocityState, CoefficientFields) {
        let g = Grid::new(DomainSpec::new(8, 48, 48, 4.0, 0.01).unwrap()).unwrap();
        let mut u = crate::operators::leray_project(&random_state(&g, 11, 2, true));
        u.scale(0.02);
        let c = compute_coefficients(&g, &u.u[0], &g.zeros(), 1.0).unwrap();
        (g, u, c)
    }

    #[test]
    fn pieces_sum_to_direct_nonlinearity() {
        let (g, u, c) = setup();
        let d = nonlinearity_decomposition(&g, &u, &c);
        for (j, total) in [(1, d.g2_total()), (2, d.g3_total())] {
            let direct = nonlinearity_direct(&g, &u, j);
            assert!((&total - &direct).norm() <= 1e-8 * direct.norm(), "j = {j}");
        }
    }

    #[test]
    fn g21_identity_holds_for_band_limited_data() {
        let (g, u, c) = setup();
        let d = nonlinearity_decomposition(&g, &u, &c);
        let r = g21_identity_residual(&g, &u, &c, &d);
        assert!(r < 1e-8, "{r}");
    }

    #[test]
    fn g4_has_no_nonzero_modes() {
        let (g, u, c) = setup();
        let d = nonlinearity_decomposition(&g, &u, &c);
        assert_eq!(d.g2[3].nonzero_modes().norm(), 0.0);
        assert_eq!(d.g3[3].nonzero_modes().norm(), 0.0);
        assert_eq!(d.big_g2[3].norm(), 0.0);
    }

    #[test]
    fn zero_mode_only_keeps_g1_and_g4() {
        let (g, u, c) = setup();
        let d = nonlinearity_decomposition(&g, &u.zero_mode(), &c);
        for gj in [&d.g2, &d.g3] {
            for k in [1, 2, 4, 5] {
                assert_eq!(gj[k].norm(), 0.0, "k = {}", k + 1);
            }
        }
    }

    #[test]
    fn nonzero_modes_only_keeps_g3_and_g6() {
        let (g, u, c) = setup();
        let d = nonlinearity_decomposition(&g, &u.nonzero_modes(), &c);
        for gj in [&d.g2, &d.g3] {
            for k in [0, 1, 3, 4] {
                assert_eq!(gj[k].norm(), 0.0, "k = {}", k + 1);
            }
            assert!(gj[2].norm() > 0.0 && gj[5].norm() > 0.0);
        }
    }
}
