use super::{gamma_integral, GammaParams};
use crate::error::{Error, Result};
use crate::operators::{inv_laplacian_nonzero, CoefficientFields};
use crate::spectral::{dealias_cutoff, Grid, SpectralField, TWO_PI};
use crate::state::VelocityState;

/// Forcing `rhs(t, phase)`: the source at time `t`, expressed at shear phase `phase`.
pub type FieldRhs<'a> = &'a (dyn Fn(f64, f64) -> SpectralField + Sync);

/// Largest explicit advective CFL number accepted by the steppers.
pub const CFL_LIMIT: f64 = 1.0;
/// CFL number targeted by the suggested time step.
pub const CFL_TARGET: f64 = 0.4;

/// Exact sheared heat flow over `[t0, t1]`: every mode is multiplied by
/// `exp(-nu int |K(tau)|^2)`, where the y-wavenumber drifts with the shear,
/// and the shear phase advances by `t1 - t0`.
pub fn heat_step_in_place(f: &mut SpectralField, nu: f64, t0: f64, t1: f64) {
    let s0 = f.shear_phase();
    let ly = f.ly();
    if nu != 0.0 {
        f.for_each_mode_mut(|_, (k, m, l), c| {
            // K_y(tau) / 2 pi = m/Ly - (s0 + tau - t0) k = eta - k tau
            let eta = m as f64 / ly - s0 * k as f64 + k as f64 * t0;
            let g = GammaParams { k, l, eta };
            *c *= (-nu * gamma_integral(&g, t0, t1)).exp();
        });
    }
    f.set_shear_phase(s0 + (t1 - t0));
}

/// Solution of `d_t q + y d_x q - nu Delta q = 0` from `t0` to `t1`, in sheared coordinates.
pub fn evolve_l0_heat(q: &SpectralField, nu: f64, t0: f64, t1: f64) -> SpectralField {
    let mut out = q.clone();
    heat_step_in_place(&mut out, nu, t0, t1);
    out
}

/// Lift-up flow of x-independent data:
/// `ubar(t) = (e^{nu t Delta}(ubar1 - t ubar2), e^{nu t Delta} ubar2, e^{nu t Delta} ubar3)`.
pub fn liftup_solution(ubar0: &VelocityState, nu: f64, t: f64) -> Result<VelocityState> {
    if !ubar0.is_x_independent() {
        return Err(Error::InvalidInput("lift-up solution needs k = 0 data".into()));
    }
    let heat = |f: &SpectralField| {
        let mut g = f.clone();
        heat_step_in_place(&mut g, nu, 0.0, t);
        g.with_shear_phase(f.shear_phase())
    };
    let mut first = ubar0.u[0].clone();
    first.axpy(-t, &ubar0.u[1]);
    Ok(VelocityState {
        u: [heat(&first), heat(&ubar0.u[1]), heat(&ubar0.u[2])],
        time: ubar0.time + t,
    })
}

/// Velocity `u2 = Delta_L^{-1} q` recovered from `q = Delta u2` at the field's shear phase.
pub fn orr_velocity(q: &SpectralField) -> SpectralField {
    inv_laplacian_nonzero(q)
}

/// `2 (d_y + kappa d_z) Delta^{-1}(d_y V d_x f)`, the nonlocal part of `L1 = L - (this)`.
pub fn l1_nonlocal(grid: &Grid, f: &SpectralField, c: &CoefficientFields) -> SpectralField {
    let phase = f.shear_phase();
    let fx = f.derivative(0);
    let mut s = fx.clone();
    s += &grid.multiply(&c.ubar1_for(phase).derivative(1), &fx);
    let g = inv_laplacian_nonzero(&s);
    let mut out = g.derivative(1);
    out += &grid.multiply(&c.kappa_for(phase), &g.derivative(2));
    out.scale(2.0);
    out
}

/// `ubar1 d_x f`, the part of `V d_x f` not absorbed by the sheared frame.
fn streak_advection(grid: &Grid, f: &SpectralField, c: &CoefficientFields) -> SpectralField {
    if f.is_x_independent() {
        return grid.zeros().with_shear_phase(f.shear_phase());
    }
    grid.multiply(&c.ubar1_for(f.shear_phase()), &f.derivative(0))
}

fn max_streak_speed(grid: &Grid, c: &CoefficientFields) -> f64 {
    let (u, _) = grid.plane_to_physical_pair(&c.ubar1, None);
    u.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

fn check_cfl(grid: &Grid, c: &CoefficientFields, dt: f64) -> Result<()> {
    let kmax = dealias_cutoff(grid.dims().nx).max(1) as f64;
    let rate = max_streak_speed(grid, c) * TWO_PI * kmax;
    let cfl = rate * dt;
    if cfl > CFL_LIMIT {
        return Err(Error::Cfl { cfl, suggested_dt: CFL_TARGET / rate });
    }
    Ok(())
}

fn integrate_if_heun<N>(
    grid: &Grid,
    f: &SpectralField,
    c: &CoefficientFields,
    t0: f64,
    t1: f64,
    dt: f64,
    explicit: N,
) -> Result<SpectralField>
where
    N: Fn(f64, &SpectralField) -> SpectralField,
{
    if !(dt > 0.0) || !(t1 >= t0) {
        return Err(Error::InvalidInput(format!("need dt > 0 and t1 >= t0; got dt={dt}, [{t0}, {t1}]")));
    }
    if f.dims() != grid.dims() {
        return Err(Error::DimensionMismatch { expected: grid.dims().tuple(), got: f.dims().tuple() });
    }
    check_cfl(grid, c, dt)?;
    let nu = grid.nu();
    let steps = ((t1 - t0) / dt - 1e-9).ceil().max(0.0) as usize;
    let mut u = f.clone();
    for n in 0..steps {
        let ta = t0 + (t1 - t0) * n as f64 / steps as f64;
        let tb = t0 + (t1 - t0) * (n + 1) as f64 / steps as f64;
        let h = tb - ta;
        let na = explicit(ta, &u);
        let mut pred = u.clone();
        pred.axpy(h, &na);
        heat_step_in_place(&mut pred, nu, ta, tb);
        let nb = explicit(tb, &pred);
        let mut next = u;
        next.axpy(0.5 * h, &na);
        heat_step_in_place(&mut next, nu, ta, tb);
        next.axpy(0.5 * h, &nb);
        if next.coeffs().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical(format!("non-finite field at t = {tb}")));
        }
        u = next;
    }
    Ok(u)
}

fn forcing_at(rhs: Option<FieldRhs>, t: f64, phase: f64) -> Option<SpectralField> {
    rhs.map(|r| {
        let g = r(t, phase);
        debug_assert!((g.shear_phase() - phase).abs() < 1e-9, "rhs returned the wrong shear phase");
        g
    })
}

/// Integrates `L f = rhs` with `L = d_t - nu Delta + V d_x` from `t0` to `t1`.
/// Diffusion and `y d_x` are exact through the sheared heat multiplier; `ubar1 d_x`
/// and the forcing are explicit (integrating-factor Heun). Coefficients are frozen.
pub fn evolve_l_field(
    grid: &Grid,
    f: &SpectralField,
    c: &CoefficientFields,
    rhs: Option<FieldRhs>,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<SpectralField> {
    integrate_if_heun(grid, f, c, t0, t1, dt, |t, u| {
        let mut n = streak_advection(grid, u, c) * -1.0;
        if let Some(r) = forcing_at(rhs, t, u.shear_phase()) {
            n += &r;
        }
        n
    })
}

/// Integrates `L1 f = rhs` with `L1 f = L f - 2 (d_y + kappa d_z) Delta^{-1}(d_y V d_x f)`;
/// the nonlocal term is explicit.
pub fn evolve_l1_field(
    grid: &Grid,
    f: &SpectralField,
    c: &CoefficientFields,
    rhs: Option<FieldRhs>,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<SpectralField> {
    integrate_if_heun(grid, f, c, t0, t1, dt, |t, u| {
        let mut n = streak_advection(grid, u, c) * -1.0;
        n += &l1_nonlocal(grid, u, c);
        if let Some(r) = forcing_at(rhs, t, u.shear_phase()) {
            n += &r;
        }
        n
    })
}
