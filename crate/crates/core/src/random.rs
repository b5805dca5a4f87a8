//! Seeded random field ensembles: band-limited, real, with coefficient
//! amplitudes decaying like `|q|^-2` and uniform random phases.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::operators::leray_project;
use crate::spectral::{Grid, SpectralField};
use crate::state::VelocityState;

/// Deterministic generator for a named stream.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Random real field with modes `|k|, |m|, |l| <= band` and zero mean.
pub fn random_field_rng<R: Rng>(grid: &Grid, rng: &mut R, band: i64) -> SpectralField {
    let mut f = grid.zeros();
    let d = grid.dims();
    let bx = if d.nx == 1 { 0 } else { band };
    for k in -bx..=bx {
        for m in -band..=band {
            for l in -band..=band {
                if (k, m, l) == (0, 0, 0) {
                    continue;
                }
                let amp = 1.0 / (1.0 + (k * k + m * m + l * l) as f64);
                let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                let r: f64 = rng.gen_range(0.5..1.5);
                f.set(k, m, l, Complex64::from_polar(amp * r, phase));
            }
        }
    }
    symmetrize(&mut f);
    f
}

/// Random real field from a seed; see [`random_field_rng`].
pub fn random_field(grid: &Grid, seed: u64, band: i64) -> SpectralField {
    random_field_rng(grid, &mut rng_for(seed, 0), band)
}

/// Random velocity state; Leray-projected when `div_free`.
pub fn random_state(grid: &Grid, seed: u64, band: i64, div_free: bool) -> VelocityState {
    let mut rng = rng_for(seed, 1);
    let u = VelocityState {
        u: [
            random_field_rng(grid, &mut rng, band),
            random_field_rng(grid, &mut rng, band),
            random_field_rng(grid, &mut rng, band),
        ],
        time: 1.0,
    };
    if div_free {
        leray_project(&u)
    } else {
        u
    }
}

/// Replaces `c(q)` by `(c(q) + conj c(-q)) / 2` so the field is real.
pub fn symmetrize(f: &mut SpectralField) {
    let d = f.dims();
    let src = f.coeffs().to_vec();
    let dst = f.coeffs_mut();
    for i in 0..d.nx {
        for j in 0..d.ny {
            for l in 0..d.nz {
                let q = d.index(i, j, l);
                dst[q] = (src[q] + src[d.conjugate_index(i, j, l)].conj()) * 0.5;
            }
        }
    }
}
