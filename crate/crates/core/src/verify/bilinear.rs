use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Calibration, RatioStat};
use crate::error::{Error, Result};
use crate::norms::sobolev_norm;
use crate::operators::{compute_coefficients, leray_project};
use crate::random::{rng_for, symmetrize};
use crate::spectral::{DomainSpec, Grid, SpectralField};
use crate::state::VelocityState;

/// The anisotropic product estimates and the velocity reconstruction bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BilinearLemma {
    /// Both factors x-independent.
    L41,
    /// First factor x-independent.
    L42,
    /// No structure, `j in {1, 3}`.
    L43,
    /// No structure, `j in {1, 3}`; `P0 f1 = 0` for the `H^k` bounds.
    L44,
    /// First factor x-independent, `P0 f2 = 0`, with the streak coefficient `kappa`.
    L45,
    /// Divergence-free `u`: `(d_x, d_z) d_x u_nz` from `u2_nz` and `u3_nz`.
    L46,
}

impl BilinearLemma {
    pub const ALL: [BilinearLemma; 6] = [Self::L41, Self::L42, Self::L43, Self::L44, Self::L45, Self::L46];

    pub fn id(&self) -> &'static str {
        match self {
            Self::L41 => "4.1",
            Self::L42 => "4.2",
            Self::L43 => "4.3",
            Self::L44 => "4.4",
            Self::L45 => "4.5",
            Self::L46 => "4.6",
        }
    }
}

impl fmt::Display for BilinearLemma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for BilinearLemma {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|l| l.id() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown lemma '{s}', expected one of 4.1 .. 4.6")))
    }
}

/// Names of the individual inequalities of a lemma, in report order.
pub fn bilinear_inequalities(lemma: BilinearLemma) -> Vec<String> {
    let v: Vec<&str> = match lemma {
        BilinearLemma::L41 => vec!["linf", "l2_h1z_l2", "l2_l2z_h1"],
        BilinearLemma::L42 => vec!["l2", "grad", "h2", "h3"],
        BilinearLemma::L43 => vec!["f1_d1f2", "prod_d1", "f1_d3f2", "prod_d3"],
        BilinearLemma::L44 => vec!["l2_j1", "grad_j1", "l2_j3", "grad_j3", "hk1", "hk2", "hk3"],
        BilinearLemma::L45 => vec!["l2", "grad_inv_lap", "grad", "commutator_j2", "commutator_j3"],
        BilinearLemma::L46 => vec!["k0", "k1", "k2"],
    };
    v.into_iter().map(|s| format!("{}.{s}", lemma.id())).collect()
}

/// Sampling setup of the bilinear checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BilinearOptions {
    /// Total number of samples; the first half calibrates, the second half is the holdout.
    pub samples: usize,
    pub seed: u64,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub ly: f64,
    /// Target `||ubar1||_{H^4}` of the streak behind `kappa`.
    pub ubar_h4: f64,
}

impl Default for BilinearOptions {
    fn default() -> Self {
        BilinearOptions { samples: 400, seed: 7, nx: 16, ny: 32, nz: 16, ly: 4.0, ubar_h4: 0.05 }
    }
}

/// Random real field with `|index| < n/4` per direction (so products are
/// exact on the grid), amplitudes `1 / (1 + |q|^2)` and uniform phases.
fn ensemble_field<R: Rng>(grid: &Grid, rng: &mut R) -> SpectralField {
    let d = grid.dims();
    let band = |n: usize| (n as i64 / 4 - 1).max(0);
    let (bx, by, bz) = (band(d.nx), band(d.ny), band(d.nz));
    let ly = grid.ly();
    let mut f = grid.zeros();
    for k in -bx..=bx {
        for m in -by..=by {
            for l in -bz..=bz {
                if (k, m, l) == (0, 0, 0) {
                    continue;
                }
                let q2 = (k * k + l * l) as f64 + (m as f64 / ly).powi(2);
                let amp = 1.0 / (1.0 + q2);
                f.set(k, m, l, Complex64::from_polar(amp, rng.gen_range(0.0..std::f64::consts::TAU)));
            }
        }
    }
    symmetrize(&mut f);
    f
}

/// `sqrt(Ly sum w(K) |c|^2)`.
fn wnorm(f: &SpectralField, w: impl Fn([f64; 3]) -> f64) -> f64 {
    let mut acc = 0.0;
    f.for_each_mode(|kv, _, c| acc += w(kv) * c.norm_sqr());
    (f.ly() * acc).sqrt()
}

fn l2(f: &SpectralField) -> f64 {
    f.norm()
}

fn h(f: &SpectralField, s: u32) -> f64 {
    sobolev_norm(f, s as f64)
}

/// `||grad^k f||`.
fn grad_k(f: &SpectralField, k: i32) -> f64 {
    wnorm(f, |kv| (kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2]).powi(k))
}

fn grad(f: &SpectralField) -> f64 {
    grad_k(f, 1)
}

fn hyp(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if rhs > 0.0 {
        lhs / rhs
    } else if lhs == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Max of `|f|` on a grid refined twice in every direction.
fn sup_norm(grid: &Grid, f: &SpectralField) -> Result<f64> {
    let s = grid.spec();
    let fine = Grid::new(DomainSpec::new(2 * s.nx, 2 * s.ny, 2 * s.nz, s.ly, s.nu)?)?;
    let mut g = fine.zeros();
    f.for_each_mode(|_, (k, m, l), c| {
        if c.norm_sqr() > 0.0 {
            g.set(k, m, l, c);
        }
    });
    Ok(fine.to_physical(&g)?.max_abs())
}

struct Ctx<'a> {
    grid: &'a Grid,
}

impl Ctx<'_> {
    fn mul(&self, a: &SpectralField, b: &SpectralField) -> SpectralField {
        self.grid.multiply_exact(a, b)
    }
}

fn lemma41(c: &Ctx, f1: &SpectralField, f2: &SpectralField) -> Result<Vec<f64>> {
    let f1 = f1.zero_mode();
    let f2 = f2.zero_mode();
    let p = c.mul(&f1, &f2);
    let a = h(&f1, 1) + h(&f1.derivative(2), 1);
    let b = l2(&f1) + l2(&f1.derivative(2));
    Ok(vec![ratio(sup_norm(c.grid, &f1)?, a), ratio(l2(&p), a * l2(&f2)), ratio(l2(&p), b * h(&f2, 1))])
}

fn lemma42(c: &Ctx, f1: &SpectralField, f2: &SpectralField) -> Vec<f64> {
    let f1 = f1.zero_mode();
    let p = c.mul(&f1, f2);
    let dz2 = f2.derivative(2);
    let z = |s: u32| h(f2, s) + h(&dz2, s);
    vec![
        ratio(l2(&p), h(&f1, 1) * z(0)),
        ratio(grad(&p), (h(&f1, 1) + h(&f1.derivative(2), 1)) * h(f2, 1)),
        ratio(h(&p, 2), h(&f1, 1) * z(2) + h(&f1, 3) * z(0)),
        ratio(h(&p, 3), h(&f1, 1) * z(3) + h(&f1, 3) * z(1)),
    ]
}

fn lemma43(c: &Ctx, f1: &SpectralField, f2: &SpectralField) -> Vec<f64> {
    let p = c.mul(f1, f2);
    let lap2 = l2(&f2.laplacian());
    let mut out = Vec::new();
    for axis in [0, 2] {
        let a = l2(&f1.derivative(axis)) + l2(f1);
        out.push(ratio(l2(&c.mul(f1, &f2.derivative(axis))), a * lap2));
        out.push(ratio(l2(&p) + l2(&p.derivative(axis)), a * h(f2, 2)));
    }
    out
}

fn lemma44(c: &Ctx, f1: &SpectralField, f2: &SpectralField) -> Vec<f64> {
    let p = c.mul(f1, f2);
    let mut out = Vec::new();
    for axis in [0, 2] {
        let (d1, d2) = (f1.derivative(axis), f2.derivative(axis));
        out.push(ratio(
            l2(&p),
            (h(&d1, 1) + h(f1, 1)) * l2(f2) + (l2(&d1) + l2(f1)) * h(f2, 1),
        ));
        let v = |a: &SpectralField, b: &SpectralField, s: u32| hyp(h(a, s), h(b, s));
        out.push(ratio(
            l2(&p.derivative(axis)),
            v(&d1, f1, 1) * v(&d2, f2, 0) + v(&d1, f1, 0) * v(&d2, f2, 1),
        ));
    }
    let g1 = f1.nonzero_modes();
    let pg = c.mul(&g1, f2);
    let dx = g1.derivative(0);
    for k in 1..=3u32 {
        out.push(ratio(h(&pg, k), h(&dx, k + 1) * l2(f2) + l2(&dx) * h(f2, k + 1)));
    }
    out
}

fn lemma45(c: &Ctx, f1: &SpectralField, f2: &SpectralField, kappa: &SpectralField) -> Vec<f64> {
    let f1 = f1.zero_mode();
    let f2 = f2.nonzero_modes();
    let good = |g: &SpectralField| {
        let mut out = g.derivative(2);
        out.axpy(-1.0, &c.grid.multiply(kappa, &g.derivative(1)));
        out
    };
    let p = c.mul(&f1, &f2);
    let z0 = l2(&f2) + l2(&good(&f2));
    let z1 = h(&f2, 1) + h(&good(&f2), 1);
    let mut out = vec![
        ratio(l2(&p), h(&f1, 1) * z0),
        ratio(grad(&p.inverse_laplacian()), l2(&f1) * z0),
        ratio(grad(&p), h(&f1, 1) * z1),
    ];
    let lap = f2.laplacian();
    let grads: Vec<SpectralField> = (0..3).map(|a| f2.derivative(a)).collect();
    let gnorm = hyp(hyp(l2(&grads[0]), l2(&grads[1])), l2(&grads[2]));
    let ggood: Vec<f64> = grads.iter().map(|g| l2(&good(g))).collect();
    let rhs = h(&f1, 2) * (gnorm + hyp(hyp(ggood[0], ggood[1]), ggood[2]));
    for axis in [1, 2] {
        let mut comm = c.mul(&f1, &lap).inverse_laplacian().derivative(axis);
        comm.axpy(-1.0, &c.mul(&f1, &f2.derivative(axis)));
        out.push(ratio(h(&comm, 1), rhs));
    }
    out
}

fn lemma46(u: &VelocityState) -> Vec<f64> {
    let nz = u.nonzero_modes();
    (0..3)
        .map(|k| {
            let lhs: f64 = nz
                .u
                .iter()
                .flat_map(|f| [f.derivative(0).derivative(0), f.derivative(2).derivative(0)])
                .map(|g| grad_k(&g, k).powi(2))
                .sum::<f64>()
                .sqrt();
            let u3 = &nz.u[2];
            let hxz = &u3.derivative(0).derivative(0) + &u3.derivative(2).derivative(2);
            ratio(lhs, grad_k(&hxz, k) + grad_k(&nz.u[1].laplacian(), k))
        })
        .collect()
}

/// `kappa` of a random small streak; the amplitude is halved until the slope
/// condition holds.
fn sample_kappa<R: Rng>(grid: &Grid, rng: &mut R, h4: f64) -> Result<SpectralField> {
    let mut ubar = ensemble_field(grid, rng).zero_mode();
    let n = sobolev_norm(&ubar, 4.0);
    ubar.scale(h4 * rng.gen_range(0.2..1.0) / n);
    let dt = grid.zeros();
    for _ in 0..30 {
        match compute_coefficients(grid, &ubar, &dt, 1.0) {
            Ok(c) => return Ok(c.kappa_for(0.0)),
            Err(Error::SlopeCondition { .. }) => ubar.scale(0.5),
            Err(e) => return Err(e),
        }
    }
    Err(Error::Numerical("could not sample a streak within the slope condition".into()))
}

/// Ratios `LHS / RHS` of every inequality of `lemma` for sample `index`.
pub fn bilinear_sample(lemma: BilinearLemma, grid: &Grid, seed: u64, index: u64, ubar_h4: f64) -> Result<Vec<f64>> {
    let mut rng = rng_for(seed, index);
    let c = Ctx { grid };
    let f1 = ensemble_field(grid, &mut rng);
    let f2 = ensemble_field(grid, &mut rng);
    match lemma {
        BilinearLemma::L41 => lemma41(&c, &f1, &f2),
        BilinearLemma::L42 => Ok(lemma42(&c, &f1, &f2)),
        BilinearLemma::L43 => Ok(lemma43(&c, &f1, &f2)),
        BilinearLemma::L44 => Ok(lemma44(&c, &f1, &f2)),
        BilinearLemma::L45 => {
            let kappa = sample_kappa(grid, &mut rng, ubar_h4)?;
            Ok(lemma45(&c, &f1, &f2, &kappa))
        }
        BilinearLemma::L46 => {
            let f3 = ensemble_field(grid, &mut rng);
            let u = leray_project(&VelocityState { u: [f1, f2, f3], time: 1.0 });
            Ok(lemma46(&u))
        }
    }
}

/// One checked inequality: its ratio statistics and calibration split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BilinearCheck {
    pub stat: RatioStat,
    pub calibration: Calibration,
}

/// Samples every inequality of `lemma`; samples are independent and seeded by index.
pub fn verify_bilinear_lemma(lemma: BilinearLemma, o: &BilinearOptions) -> Result<Vec<BilinearCheck>> {
    if o.samples < 2 {
        return Err(Error::InvalidInput("need at least two samples".into()));
    }
    let spec = DomainSpec::new(o.nx, o.ny, o.nz, o.ly, 1.0)?;
    if o.nx < 8 || o.ny < 8 || o.nz < 8 {
        return Err(Error::InvalidInput("bilinear ensembles need n >= 8 in every direction".into()));
    }
    let grid = Grid::new(spec)?;
    let rows: Vec<Vec<f64>> = (0..o.samples as u64)
        .into_par_iter()
        .map(|i| bilinear_sample(lemma, &grid, o.seed, i, o.ubar_h4))
        .collect::<Result<_>>()?;
    let names = bilinear_inequalities(lemma);
    let mut params = BTreeMap::new();
    params.insert("grid".into(), format!("{}x{}x{}, Ly = {}", o.nx, o.ny, o.nz, o.ly));
    params.insert("band".into(), "|index| < n/4, amplitude ~ |q|^-2, uniform phases".into());
    params.insert("seed".into(), o.seed.to_string());
    if lemma == BilinearLemma::L45 {
        params.insert("ubar1_h4".into(), format!("<= {}", o.ubar_h4));
    }
    names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let r: Vec<f64> = rows.iter().map(|row| row[j]).collect();
            Ok(BilinearCheck {
                stat: RatioStat::from_ratios(name, &r, params.clone())?,
                calibration: Calibration::from_ratios(&r)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid() -> Grid {
        Grid::new(DomainSpec::new(16, 32, 16, 4.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn constant_factor_is_exact() {
        let g = grid();
        let mut f1 = g.zeros();
        f1.set(0, 0, 0, Complex64::new(2.5, 0.0));
        let f2 = ensemble_field(&g, &mut rng_for(3, 0));
        let p = g.multiply_exact(&f1, &f2);
        assert!((l2(&p) - 2.5 * l2(&f2)).abs() < 1e-12 * l2(&p));
        // first inequality of 4.2: ||f1 f2|| / (||f1||_{H1} (||f2|| + ||dz f2||)) with ||f1||_{H1} = 2.5 sqrt(Ly)
        let r = lemma42(&Ctx { grid: &g }, &f1, &f2)[0];
        let expected = 1.0 / (4f64.sqrt() * (1.0 + l2(&f2.derivative(2)) / l2(&f2)));
        assert!((r - expected).abs() < 1e-12);
    }

    #[test]
    fn single_x_mode_against_closed_form() {
        let g = grid();
        let ly: f64 = 4.0;
        // f1 = cos(2 pi y / Ly), f2 = cos(2 pi x)
        let mut f1 = g.zeros();
        f1.set_real_pair(0, 1, 0, Complex64::new(0.5, 0.0));
        let mut f2 = g.zeros();
        f2.set_real_pair(1, 0, 0, Complex64::new(0.5, 0.0));
        let r = lemma43(&Ctx { grid: &g }, &f1, &f2)[0];
        // ||f1 d_x f2|| = 2 pi sqrt(Ly) / 2, ||f1|| = sqrt(Ly / 2), d_x f1 = 0, ||Delta f2|| = (2 pi)^2 sqrt(Ly / 2)
        let expected = (2.0 * PI * ly.sqrt() / 2.0) / ((ly / 2.0).sqrt() * (2.0 * PI).powi(2) * (ly / 2.0).sqrt());
        assert!((r - expected).abs() < 1e-12 * expected, "{r} vs {expected}");
    }

    #[test]
    fn sup_norm_of_a_cosine() {
        let g = grid();
        let mut f = g.zeros();
        f.set_real_pair(0, 3, 2, Complex64::new(0.7, 0.0));
        assert!((sup_norm(&g, &f).unwrap() - 1.4).abs() < 1e-12);
    }

    #[test]
    fn every_lemma_yields_finite_ratios() {
        let g = grid();
        for lemma in BilinearLemma::ALL {
            let r = bilinear_sample(lemma, &g, 1, 0, 0.05).unwrap();
            assert_eq!(r.len(), bilinear_inequalities(lemma).len(), "{lemma}");
            assert!(r.iter().all(|x| x.is_finite() && *x > 0.0), "{lemma}: {r:?}");
        }
    }

    #[test]
    fn reconstruction_ratio_is_bounded_by_divergence_identity() {
        // for divergence-free u the k = 0 bound holds with C = 3 via d_x u1 = -d_y u2 - d_z u3
        let g = grid();
        for i in 0..5 {
            let r = bilinear_sample(BilinearLemma::L46, &g, 2, i, 0.05).unwrap();
            assert!(r[0] <= 3.0, "{r:?}");
        }
    }

    #[test]
    fn lemma_ids_round_trip() {
        for l in BilinearLemma::ALL {
            assert_eq!(l.id().parse::<BilinearLemma>().unwrap(), l);
        }
        assert!("4.7".parse::<BilinearLemma>().is_err());
    }

    #[test]
    fn small_sweep_is_deterministic() {
        let o = BilinearOptions { samples: 8, nx: 8, ny: 16, nz: 8, ..Default::default() };
        let a = verify_bilinear_lemma(BilinearLemma::L41, &o).unwrap();
        let b = verify_bilinear_lemma(BilinearLemma::L41, &o).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert_eq!(a[0].stat.samples, 8);
    }
}
