//! Per-snapshot diagnostics written into a [`TrajectoryRecord`].

use crate::error::{Error, Result};
use crate::norms::{column_name, energy_columns, quantities_sq, trapezoid, Quantity};
use crate::operators::{compute_coefficients, compute_w2, good_derivative, CoefficientFields};
use crate::record::{ColumnInfo, TrajectoryRecord};
use crate::spectral::{Grid, SpectralField};
use crate::state::VelocityState;

use super::zero_mode_tendency;

const SCALARS: &[(&str, &str)] = &[
    ("energy", "||u||^2"),
    ("dissipation", "||grad u||^2"),
    ("liftup", "<u2, u1>"),
    ("u.h2", "||u||^2_{H^2}"),
    ("unz.l2", "||u_nz||^2"),
    ("unz.h2", "||u_nz||^2_{H^2}"),
    ("u2nz.l2", "||u2_nz||^2"),
    ("u2nz.h2", "||u2_nz||^2_{H^2}"),
    ("ubar1.l2", "||ubar1||^2"),
    ("divergence_defect", "||div u|| / ||grad u||"),
    ("shear_phase", "phase of the sheared frame"),
    ("dropped_energy", "energy dropped by remeshing since the previous snapshot"),
    ("max_slope", "max |d_y ubar1|"),
    ("coeff_valid", "1 if the coordinate coefficients could be built, else 0"),
];

/// Column layout of DNS records: the scalar diagnostics followed by every
/// `<field>.<quantity>` used by the energy functionals.
pub fn snapshot_columns() -> Vec<ColumnInfo> {
    let mut cols: Vec<ColumnInfo> =
        SCALARS.iter().map(|(n, d)| ColumnInfo { name: n.to_string(), description: d.to_string() }).collect();
    for (field, qs) in energy_columns() {
        for q in qs {
            cols.push(ColumnInfo { name: column_name(field, q), description: describe(q, field) });
        }
    }
    cols
}

fn describe(q: Quantity, field: &str) -> String {
    match q {
        Quantity::L2 => format!("||{field}||^2"),
        Quantity::Damp => format!("||grad Delta^-1 d_x {field}||^2"),
        Quantity::Grad => format!("||grad {field}||^2"),
        Quantity::H(s) => format!("||{field}||^2_{{H^{s}}}"),
        Quantity::GradH(s) => format!("||grad {field}||^2_{{H^{s}}}"),
    }
}

fn dxx(f: &SpectralField) -> SpectralField {
    f.derivative(0).derivative(0)
}

/// One record row for state `u` with explicit tendency `n = N(u)`.
pub fn snapshot_row(grid: &Grid, u: &VelocityState, n: &VelocityState, dropped: f64) -> Vec<f64> {
    let z = u.zero_mode();
    let nz = u.nonzero_modes();
    let dt_z = zero_mode_tendency(grid, u, n);
    let all: Vec<&SpectralField> = u.u.iter().collect();
    let nzr: Vec<&SpectralField> = nz.u.iter().collect();
    let [e, d, h2] = quantities_sq(&all, &[Quantity::L2, Quantity::Grad, Quantity::H(2)])[..] else { unreachable!() };
    let [nl2, nh2] = quantities_sq(&nzr, &[Quantity::L2, Quantity::H(2)])[..] else { unreachable!() };
    let [u2l2, u2h2] = quantities_sq(&[&nz.u[1]], &[Quantity::L2, Quantity::H(2)])[..] else { unreachable!() };
    let grad_norm = d.sqrt();
    let div = if grad_norm > 0.0 { u.divergence().norm() / grad_norm } else { 0.0 };

    let (slope, _) = grid.plane_to_physical_pair(&z.u[0].derivative(1), None);
    let max_slope = slope.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let coeffs: Result<CoefficientFields> = if nz.norm_sq() > 0.0 {
        compute_coefficients(grid, &z.u[0], &dt_z.u[0], u.time)
    } else if max_slope < crate::operators::SLOPE_LIMIT {
        Err(Error::InvalidInput("no nonzero modes".into()))
    } else {
        Err(Error::SlopeCondition { max_slope })
    };
    let coeff_valid = match &coeffs {
        Ok(_) => 1.0,
        Err(Error::SlopeCondition { .. }) => 0.0,
        Err(_) => 1.0,
    };

    let mut row = vec![
        e,
        d,
        u.u[1].inner(&u.u[0]),
        h2,
        nl2,
        nh2,
        u2l2,
        u2h2,
        z.u[0].norm_sq(),
        div,
        u.shear_phase(),
        dropped,
        max_slope,
        coeff_valid,
    ];

    let lap_u3nz = nz.u[2].laplacian();
    let hxz_u3nz = &dxx(&nz.u[2]) + &nz.u[2].derivative(2).derivative(2);
    let dxz: Vec<SpectralField> = nz.u.iter().flat_map(|f| [f.derivative(0), f.derivative(2)]).collect();
    let good: Option<[Vec<SpectralField>; 3]> = match &coeffs {
        Ok(c) => {
            let g2 = good_derivative(grid, &nz.u[1], c).derivative(0);
            let g3 = good_derivative(grid, &nz.u[2], c).derivative(0);
            let w2 = compute_w2(grid, u, c).derivative(0);
            Some([vec![g2], vec![g3], (0..3).map(|a| w2.derivative(a)).collect()])
        }
        Err(Error::SlopeCondition { .. }) => None,
        Err(_) => {
            let zf = grid.zeros().with_shear_phase(u.shear_phase());
            Some([vec![zf.clone()], vec![zf.clone()], vec![zf]])
        }
    };

    for (field, qs) in energy_columns() {
        let owned: Vec<SpectralField>;
        let parts: Vec<&SpectralField> = match field {
            "ubar" => z.u.iter().collect(),
            "dt_ubar" => dt_z.u.iter().collect(),
            "lap_ubar2" => {
                owned = vec![z.u[1].laplacian()];
                owned.iter().collect()
            }
            "ubar3" => vec![&z.u[2]],
            "grad_ubar3" => {
                owned = vec![z.u[2].derivative(1), z.u[2].derivative(2)];
                owned.iter().collect()
            }
            "lap_ubar3" => {
                owned = vec![z.u[2].laplacian()];
                owned.iter().collect()
            }
            "lap_u2nz" => {
                owned = vec![nz.u[1].laplacian()];
                owned.iter().collect()
            }
            "hxz_u3nz" => vec![&hxz_u3nz],
            "lap_u3nz" => vec![&lap_u3nz],
            "dxz_unz" => dxz.iter().collect(),
            "dxx_u2" => {
                owned = vec![dxx(&u.u[1])];
                owned.iter().collect()
            }
            "dxx_u3" => {
                owned = vec![dxx(&u.u[2])];
                owned.iter().collect()
            }
            "dxgood_u2nz" | "dxgood_u3nz" | "dxgrad_w2" => {
                let idx = match field {
                    "dxgood_u2nz" => 0,
                    "dxgood_u3nz" => 1,
                    _ => 2,
                };
                match &good {
                    Some(g) => g[idx].iter().collect(),
                    None => {
                        row.extend(std::iter::repeat(f64::NAN).take(qs.len()));
                        continue;
                    }
                }
            }
            other => unreachable!("unknown energy field {other}"),
        };
        row.extend(quantities_sq(&parts, &qs));
    }
    row
}

/// Residual of the energy identity
/// `||u(T)||^2 - ||u(t0)||^2 + int 2 nu ||grad u||^2 + 2 <u2, u1> dt = 0`
/// on the record, with the trapezoid rule in time, relative to `||u(t0)||^2`.
/// Energy removed by remeshing after the first snapshot is credited back.
pub fn energy_identity_residual(rec: &TrajectoryRecord) -> Result<f64> {
    if rec.len() < 2 {
        return Err(Error::RecordTooShort { span: 0.0, required: 0.0 });
    }
    let e = rec.series("energy")?;
    let d = rec.series("dissipation")?;
    let c = rec.series("liftup")?;
    let integrand: Vec<f64> = d.iter().zip(&c).map(|(d, c)| 2.0 * rec.nu * d + 2.0 * c).collect();
    let dropped: f64 = match rec.series("dropped_energy") {
        Ok(v) => v[1..].iter().sum(),
        Err(_) => 0.0,
    };
    let r = e[e.len() - 1] - e[0] + dropped + trapezoid(&rec.times, &integrand);
    Ok(r.abs() / e[0].max(1e-300))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::random_state;
    use crate::spectral::DomainSpec;

    #[test]
    fn row_matches_columns_and_energy_functionals_read_it() {
        let g = Grid::new(DomainSpec::new(8, 16, 8, 4.0, 0.01).unwrap()).unwrap();
        let mut u = crate::operators::leray_project(&random_state(&g, 2, 2, true));
        u.scale(1e-3);
        let n = super::super::rhs_perturbation(&g, &u);
        let row = snapshot_row(&g, &u, &n, 0.0);
        assert_eq!(row.len(), snapshot_columns().len());
        assert!(row.iter().all(|v| v.is_finite()));
        let mut rec = TrajectoryRecord::new(0.01, snapshot_columns());
        rec.push(1.0, row.clone()).unwrap();
        rec.push(1.5, row).unwrap();
        let rep = crate::norms::energy_functionals(&rec, 0.01, 0.05).unwrap();
        assert!(rep.e6.is_some());
    }

    #[test]
    fn steep_streak_marks_coefficients_invalid() {
        let g = Grid::new(DomainSpec::new(8, 16, 8, 4.0, 0.01).unwrap()).unwrap();
        let mut u = crate::operators::leray_project(&random_state(&g, 5, 2, true));
        u.scale(1e-3);
        // ubar1 = A sin(2 pi y / Ly * 4) with slope far above the limit
        u.u[0].set_real_pair(0, 4, 0, num_complex::Complex64::new(0.0, -0.5));
        let n = super::super::rhs_perturbation(&g, &u);
        let row = snapshot_row(&g, &u, &n, 0.0);
        let cols = snapshot_columns();
        let at = |name: &str| row[cols.iter().position(|c| c.name == name).unwrap()];
        assert_eq!(at("coeff_valid"), 0.0);
        assert!(at("max_slope") > 1.0);
        assert!(at("dxgrad_w2.l2").is_nan());
    }
}
