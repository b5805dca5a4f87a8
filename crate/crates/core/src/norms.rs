//! Sobolev and anisotropic norms of snapshots, the space-time norms `X_a`,
//! `Y_0`, `Y_0^k`, and the energy functionals `E1..E6` of a trajectory.
//!
//! All multipliers use the stationary-frame wavevector of the field's current
//! shear phase. Record columns hold squared norms named `<field>.<quantity>`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::{TrajectoryRecord, SCHEMA_VERSION};
use crate::spectral::SpectralField;

/// Default smallness constant of the bootstrap flags.
pub const DEFAULT_EPS0: f64 = 0.05;

/// A squared spectral quantity of a field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quantity {
    /// `||f||^2`
    L2,
    /// `||grad Delta^{-1} d_x f||^2` (zero on `k = 0`)
    Damp,
    /// `||grad f||^2`
    Grad,
    /// `||f||^2_{H^s}`
    H(u8),
    /// `||grad f||^2_{H^s}`
    GradH(u8),
}

impl Quantity {
    pub fn suffix(&self) -> String {
        match self {
            Quantity::L2 => "l2".into(),
            Quantity::Damp => "damp".into(),
            Quantity::Grad => "grad".into(),
            Quantity::H(s) => format!("h{s}"),
            Quantity::GradH(s) => format!("grad_h{s}"),
        }
    }

    fn weight(&self, kv: [f64; 3]) -> f64 {
        let k2 = kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2];
        match *self {
            Quantity::L2 => 1.0,
            Quantity::Damp => {
                if kv[0] == 0.0 {
                    0.0
                } else {
                    kv[0] * kv[0] / k2
                }
            }
            Quantity::Grad => k2,
            Quantity::H(s) => (1.0 + k2).powi(s as i32),
            Quantity::GradH(s) => k2 * (1.0 + k2).powi(s as i32),
        }
    }
}

/// Column name `<field>.<quantity>`.
pub fn column_name(field: &str, q: Quantity) -> String {
    format!("{field}.{}", q.suffix())
}

/// `Ly * sum w(K) |c|^2` for each requested quantity, summed over the given
/// components (a vector field contributes the sum of its components).
pub fn quantities_sq(components: &[&SpectralField], qs: &[Quantity]) -> Vec<f64> {
    let mut out = vec![0.0; qs.len()];
    for f in components {
        let mut acc = vec![0.0; qs.len()];
        f.for_each_mode(|kv, _, c| {
            let a = c.norm_sqr();
            if a != 0.0 {
                for (o, q) in acc.iter_mut().zip(qs) {
                    *o += q.weight(kv) * a;
                }
            }
        });
        for (o, a) in out.iter_mut().zip(acc) {
            *o += f.ly() * a;
        }
    }
    out
}

/// `||f||_{H^s} = ||(1 + |2 pi k|^2)^{s/2} f||_{L^2}`, in stationary wavenumbers.
pub fn sobolev_norm(f: &SpectralField, s: f64) -> f64 {
    let mut acc = 0.0;
    f.for_each_mode(|kv, _, c| {
        let a = c.norm_sqr();
        if a != 0.0 {
            acc += (1.0 + kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2]).powf(s) * a;
        }
    });
    (f.ly() * acc).sqrt()
}

/// `H^s` norm of a vector field.
pub fn sobolev_norm_vec(fs: &[&SpectralField], s: f64) -> f64 {
    fs.iter().map(|f| sobolev_norm(f, s).powi(2)).sum::<f64>().sqrt()
}

/// Trapezoid rule of `w(t) v(t)` on the snapshot times.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

fn weighted(rec: &TrajectoryRecord, name: &str, w: &dyn Fn(f64) -> f64) -> Result<Vec<f64>> {
    let s = rec.series(name)?;
    Ok(rec.times.iter().zip(s).map(|(t, v)| w(*t) * v).collect())
}

fn sup(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

/// The four squared terms of `||f||_{X_a}` and the norm itself.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct XaNorm {
    /// `||e^{a nu^{1/3} t} f||^2_{L^inf L^2}`
    pub sup_l2: f64,
    /// `||e^{a nu^{1/3} t} grad Delta^{-1} d_x f||^2_{L^2 L^2}`
    pub damping: f64,
    /// `nu^{1/3} ||e^{a nu^{1/3} t} f||^2_{L^2 L^2}`
    pub enhanced: f64,
    /// `nu ||e^{a nu^{1/3} t} grad f||^2_{L^2 L^2}`
    pub dissipation: f64,
    pub norm: f64,
}

/// `X_a` norm of a recorded field over the record's time span.
pub fn xa_norm(rec: &TrajectoryRecord, field: &str, a: f64, nu: f64) -> Result<XaNorm> {
    let c = a * nu.cbrt();
    let w = move |t: f64| (2.0 * c * t).exp();
    let l2 = weighted(rec, &column_name(field, Quantity::L2), &w)?;
    let damp = weighted(rec, &column_name(field, Quantity::Damp), &w)?;
    let grad = weighted(rec, &column_name(field, Quantity::Grad), &w)?;
    let mut x = XaNorm {
        sup_l2: sup(&l2),
        damping: trapezoid(&rec.times, &damp),
        enhanced: nu.cbrt() * trapezoid(&rec.times, &l2),
        dissipation: nu * trapezoid(&rec.times, &grad),
        norm: 0.0,
    };
    x.norm = (x.sup_l2 + x.damping + x.enhanced + x.dissipation).sqrt();
    Ok(x)
}

/// The two squared terms of `||f||_{Y_0}` (or `Y_0^k`) and the norm.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Y0Norm {
    pub sup: f64,
    pub dissipation: f64,
    pub norm: f64,
}

/// `||w f||_{Y_0}` for a scalar time weight `w`.
pub fn y0_norm_weighted(rec: &TrajectoryRecord, field: &str, nu: f64, w: &dyn Fn(f64) -> f64) -> Result<Y0Norm> {
    let w2 = |t: f64| w(t).powi(2);
    let l2 = weighted(rec, &column_name(field, Quantity::L2), &w2)?;
    let grad = weighted(rec, &column_name(field, Quantity::Grad), &w2)?;
    let mut y = Y0Norm { sup: sup(&l2), dissipation: nu * trapezoid(&rec.times, &grad), norm: 0.0 };
    y.norm = (y.sup + y.dissipation).sqrt();
    Ok(y)
}

/// `||f||^2_{Y_0} = ||f||^2_{L^inf L^2} + nu ||grad f||^2_{L^2 L^2}`.
pub fn y0_norm(rec: &TrajectoryRecord, field: &str, nu: f64) -> Result<Y0Norm> {
    y0_norm_weighted(rec, field, nu, &|_| 1.0)
}

/// `||f||^2_{Y_0^k} = ||f||^2_{L^inf H^k} + nu ||grad f||^2_{L^2 H^k}`.
pub fn y0k_norm(rec: &TrajectoryRecord, field: &str, k: u8, nu: f64) -> Result<Y0Norm> {
    let h = rec.series(&column_name(field, Quantity::H(k)))?;
    let g = rec.series(&column_name(field, Quantity::GradH(k)))?;
    let mut y = Y0Norm { sup: sup(&h), dissipation: nu * trapezoid(&rec.times, &g), norm: 0.0 };
    y.norm = (y.sup + y.dissipation).sqrt();
    Ok(y)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct E1Terms {
    /// `||ubar||_{L^inf H^4}`
    pub sup_h4: f64,
    /// `nu^{1/2} ||grad ubar||_{L^2 H^4}`
    pub dissipation_h4: f64,
    /// `||d_t ubar||_{L^inf H^2} / nu`
    pub dt_h2_over_nu: f64,
    /// `||ubar(1)||_{H^2} / nu`
    pub initial_h2_over_nu: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct E2Terms {
    pub lap_ubar2: Y0Norm,
    pub ubar3: Y0Norm,
    pub grad_ubar3: Y0Norm,
    /// `||min(nu^{2/3} + nu t, 1)^{1/2} Delta ubar3||_{Y_0}`
    pub weighted_lap_ubar3: Y0Norm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct E3Terms {
    pub lap_u2nz_x2: XaNorm,
    pub hxz_u3nz_x2: XaNorm,
    /// `||Delta u3_≠||_{X_3}`, before the `nu^{2/3}` factor.
    pub lap_u3nz_x3: XaNorm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct E4Terms {
    pub sup_h3: f64,
    pub dissipation_h3: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct E5Terms {
    pub dxx_u2_x3: XaNorm,
    pub dxx_u3_x3: XaNorm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct E6Terms {
    pub dxx_u2_x3: XaNorm,
    pub dxgood_u2nz_x3: XaNorm,
    pub dxx_u3_x3: XaNorm,
    pub dxgood_u3nz_x3: XaNorm,
    pub dxgrad_w2_x3: XaNorm,
}

/// Bootstrap smallness flags `E1 <= eps0`, `E2 <= eps0 nu`, `E3 <= eps0 nu`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapFlags {
    pub eps0: f64,
    pub e1_ok: bool,
    pub e2_ok: bool,
    pub e3_ok: bool,
}

/// All six energy functionals with their term breakdown.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub schema_version: u32,
    pub nu: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub e4: f64,
    pub e5: f64,
    /// `None` when the coefficient fields were unavailable at some snapshot
    /// (slope condition violated), since `W2` and the good derivative need `kappa`.
    pub e6: Option<f64>,
    pub e1_terms: E1Terms,
    pub e2_terms: E2Terms,
    pub e3_terms: E3Terms,
    pub e4_terms: E4Terms,
    pub e5_terms: E5Terms,
    pub e6_terms: Option<E6Terms>,
    pub bootstrap: BootstrapFlags,
}

impl EnergyReport {
    /// Value of functional `E<i>`, `i` in `1..=6`.
    pub fn functional(&self, i: usize) -> Option<f64> {
        match i {
            1 => Some(self.e1),
            2 => Some(self.e2),
            3 => Some(self.e3),
            4 => Some(self.e4),
            5 => Some(self.e5),
            6 => self.e6,
            _ => None,
        }
    }
}

/// Fields a record must carry for [`energy_functionals`], with the quantities needed.
pub fn energy_columns() -> Vec<(&'static str, Vec<Quantity>)> {
    use Quantity::*;
    let x = vec![L2, Damp, Grad];
    let y = vec![L2, Grad];
    vec![
        ("ubar", vec![H(2), H(4), GradH(4)]),
        ("dt_ubar", vec![H(2)]),
        ("lap_ubar2", y.clone()),
        ("ubar3", vec![L2, Grad, H(2), GradH(2)]),
        ("grad_ubar3", y.clone()),
        ("lap_ubar3", y),
        ("lap_u2nz", x.clone()),
        ("hxz_u3nz", x.clone()),
        ("lap_u3nz", x.clone()),
        ("dxz_unz", vec![H(3), GradH(3)]),
        ("dxx_u2", x.clone()),
        ("dxx_u3", x.clone()),
        ("dxgood_u2nz", x.clone()),
        ("dxgood_u3nz", x.clone()),
        ("dxgrad_w2", x),
    ]
}

/// `E1..E6` over the record's time span (the interval `[1, T]` for runs started at 1).
pub fn energy_functionals(rec: &TrajectoryRecord, nu: f64, eps0: f64) -> Result<EnergyReport> {
    if rec.is_empty() {
        return Err(Error::InvalidInput("empty record".into()));
    }
    let times = &rec.times;
    let c = nu.cbrt();

    let h4 = rec.series("ubar.h4")?;
    let gh4 = rec.series("ubar.grad_h4")?;
    let dth2 = rec.series("dt_ubar.h2")?;
    let h2 = rec.series("ubar.h2")?;
    let e1_terms = E1Terms {
        sup_h4: sup(&h4).sqrt(),
        dissipation_h4: nu.sqrt() * trapezoid(times, &gh4).sqrt(),
        dt_h2_over_nu: sup(&dth2).sqrt() / nu,
        initial_h2_over_nu: h2[0].sqrt() / nu,
    };
    let e1 = e1_terms.sup_h4 + e1_terms.dissipation_h4 + e1_terms.dt_h2_over_nu + e1_terms.initial_h2_over_nu;

    let w = move |t: f64| (nu.powf(2.0 / 3.0) + nu * t).min(1.0).sqrt();
    let e2_terms = E2Terms {
        lap_ubar2: y0_norm(rec, "lap_ubar2", nu)?,
        ubar3: y0_norm(rec, "ubar3", nu)?,
        grad_ubar3: y0_norm(rec, "grad_ubar3", nu)?,
        weighted_lap_ubar3: y0_norm_weighted(rec, "lap_ubar3", nu, &w)?,
    };
    let e2 = e2_terms.lap_ubar2.norm + e2_terms.ubar3.norm + e2_terms.grad_ubar3.norm + e2_terms.weighted_lap_ubar3.norm;

    let e3_terms = E3Terms {
        lap_u2nz_x2: xa_norm(rec, "lap_u2nz", 2.0, nu)?,
        hxz_u3nz_x2: xa_norm(rec, "hxz_u3nz", 2.0, nu)?,
        lap_u3nz_x3: xa_norm(rec, "lap_u3nz", 3.0, nu)?,
    };
    let e3 = e3_terms.lap_u2nz_x2.norm + e3_terms.hxz_u3nz_x2.norm + nu.powf(2.0 / 3.0) * e3_terms.lap_u3nz_x3.norm;

    let e4w = |t: f64| (4.0 * c * t).exp();
    let sh3 = weighted(rec, "dxz_unz.h3", &e4w)?;
    let gh3 = weighted(rec, "dxz_unz.grad_h3", &e4w)?;
    let e4_terms = E4Terms { sup_h3: sup(&sh3).sqrt(), dissipation_h3: nu.sqrt() * trapezoid(times, &gh3).sqrt() };
    let e4 = e4_terms.sup_h3 + e4_terms.dissipation_h3;

    let e5_terms = E5Terms { dxx_u2_x3: xa_norm(rec, "dxx_u2", 3.0, nu)?, dxx_u3_x3: xa_norm(rec, "dxx_u3", 3.0, nu)? };
    let e5 = e5_terms.dxx_u2_x3.norm + e5_terms.dxx_u3_x3.norm;

    let e6_terms = E6Terms {
        dxx_u2_x3: e5_terms.dxx_u2_x3,
        dxgood_u2nz_x3: xa_norm(rec, "dxgood_u2nz", 3.0, nu)?,
        dxx_u3_x3: e5_terms.dxx_u3_x3,
        dxgood_u3nz_x3: xa_norm(rec, "dxgood_u3nz", 3.0, nu)?,
        dxgrad_w2_x3: xa_norm(rec, "dxgrad_w2", 3.0, nu)?,
    };
    let e6 = [
        e6_terms.dxx_u2_x3.norm,
        e6_terms.dxgood_u2nz_x3.norm,
        e6_terms.dxx_u3_x3.norm,
        e6_terms.dxgood_u3nz_x3.norm,
        e6_terms.dxgrad_w2_x3.norm,
    ]
    .iter()
    .map(|x| x * x)
    .sum::<f64>();
    let (e6, e6_terms) = if e6.is_finite() { (Some(e6), Some(e6_terms)) } else { (None, None) };

    Ok(EnergyReport {
        schema_version: SCHEMA_VERSION,
        nu,
        t_start: times[0],
        t_end: *times.last().expect("nonempty"),
        e1,
        e2,
        e3,
        e4,
        e5,
        e6,
        e1_terms,
        e2_terms,
        e3_terms,
        e4_terms,
        e5_terms,
        e6_terms,
        bootstrap: BootstrapFlags { eps0, e1_ok: e1 <= eps0, e2_ok: e2 <= eps0 * nu, e3_ok: e3 <= eps0 * nu },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::random_field;
    use crate::record::ColumnInfo;
    use crate::spectral::{DomainSpec, Grid};
    use num_complex::Complex64;
    use std::f64::consts::PI;

    fn grid() -> Grid {
        Grid::new(DomainSpec::new(16, 16, 16, 4.0, 0.01).unwrap()).unwrap()
    }

    #[test]
    fn constant_and_single_mode() {
        let g = grid();
        let mut f = g.zeros();
        f.set(0, 0, 0, Complex64::new(1.5, 0.0));
        for s in [0.0, 1.0, 2.5, 5.0] {
            assert!((sobolev_norm(&f, s) - 1.5 * 2.0).abs() < 1e-14);
        }
        let mut f = g.zeros();
        f.set_real_pair(1, 0, 0, Complex64::new(1.0, 0.0));
        let mass = f.norm_sq();
        let h1 = sobolev_norm(&f, 1.0).powi(2);
        assert!((h1 - (1.0 + 4.0 * PI * PI) * mass).abs() < 1e-12 * h1);
    }

    #[test]
    fn h2_matches_physical_space() {
        let g = grid();
        for seed in 0..5 {
            let f = random_field(&g, seed, 4).with_shear_phase(0.1);
            let mut op = f.clone();
            op.axpy(-1.0, &f.laplacian());
            let p = g.to_physical(&op).unwrap();
            let d = g.dims();
            let vol = g.ly() / d.len() as f64;
            let l2 = (p.values().iter().map(|v| v * v).sum::<f64>() * vol).sqrt();
            let h2 = sobolev_norm(&f, 2.0);
            assert!((l2 - h2).abs() < 1e-10 * h2);
        }
    }

    #[test]
    fn norm_ordering_and_interpolation() {
        let g = grid();
        for seed in 0..100 {
            let f = random_field(&g, seed, 4);
            let (a, b, c, d) = (sobolev_norm(&f, 0.0), sobolev_norm(&f, 1.0), sobolev_norm(&f, 2.0), sobolev_norm(&f, 3.0));
            assert!(a <= b && b <= c);
            assert!(c <= (b * d).sqrt() * (1.0 + 1e-12));
            let q = quantities_sq(&[&f.nonzero_modes()], &[Quantity::Damp, Quantity::L2]);
            assert!(q[0] <= q[1]);
        }
    }

    fn record_with(field: &str, qs: &[Quantity], times: &[f64], vals: impl Fn(f64, Quantity) -> f64) -> TrajectoryRecord {
        let cols = qs.iter().map(|q| ColumnInfo { name: column_name(field, *q), description: String::new() }).collect();
        let mut r = TrajectoryRecord::new(0.01, cols);
        for &t in times {
            r.push(t, qs.iter().map(|q| vals(t, *q)).collect()).unwrap();
        }
        r
    }

    #[test]
    fn xa_of_exactly_compensated_decay() {
        // f(t) = e^{-a nu^{1/3} t} g: weighted integrands are constant in time
        let nu: f64 = 1e-3;
        let a = 2.0;
        let (g2, gg2) = (3.0, 40.0);
        let times: Vec<f64> = (0..=100).map(|i| 1.0 + 0.1 * i as f64).collect();
        let decay = |t: f64| (-2.0 * a * nu.cbrt() * t).exp();
        let rec = record_with("f", &[Quantity::L2, Quantity::Damp, Quantity::Grad], &times, |t, q| match q {
            Quantity::L2 => g2 * decay(t),
            Quantity::Grad => gg2 * decay(t),
            _ => 0.0,
        });
        let x = xa_norm(&rec, "f", a, nu).unwrap();
        let span = 10.0;
        let expect = g2 + nu.cbrt() * g2 * span + nu * gg2 * span;
        assert!((x.norm * x.norm - expect).abs() < 1e-10 * expect);
        // monotone in a
        let x3 = xa_norm(&rec, "f", 3.0, nu).unwrap();
        assert!(x3.norm >= x.norm);
        let zero = record_with("f", &[Quantity::L2, Quantity::Damp, Quantity::Grad], &times, |_, _| 0.0);
        assert_eq!(xa_norm(&zero, "f", a, nu).unwrap().norm, 0.0);
        assert!(matches!(xa_norm(&rec, "missing", a, nu), Err(Error::MissingSeries(_))));
    }

    #[test]
    fn y0_of_constant_trajectory() {
        let times: Vec<f64> = (0..=20).map(|i| 1.0 + 0.25 * i as f64).collect();
        let rec = record_with("f", &[Quantity::L2, Quantity::Grad], &times, |_, q| if q == Quantity::L2 { 2.0 } else { 5.0 });
        let y = y0_norm(&rec, "f", 0.01).unwrap();
        assert!((y.norm * y.norm - (2.0 + 0.01 * 5.0 * 5.0)).abs() < 1e-12);
    }

    #[test]
    fn trapezoid_refinement_converges() {
        let nu: f64 = 1e-2;
        let f = |n: usize| {
            let times: Vec<f64> = (0..=n).map(|i| 1.0 + 9.0 * i as f64 / n as f64).collect();
            let rec = record_with("f", &[Quantity::L2, Quantity::Damp, Quantity::Grad], &times, |t, _| (-0.8 * t).exp());
            xa_norm(&rec, "f", 1.0, nu).unwrap().norm
        };
        let (a, b) = (f(90), f(180));
        assert!((a - b).abs() <= 0.01 * b);
    }
}
