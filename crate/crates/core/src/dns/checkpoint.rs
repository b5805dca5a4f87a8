//! Binary checkpoints. Layout, all little-endian:
//! magic (8 bytes), version u32, nx, ny, nz u64, Ly, nu, t, shear phase f64,
//! then the complex coefficients (re, im as f64) of u1, u2, u3 in storage order.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{DomainSpec, SpectralField};
use crate::state::VelocityState;

pub const CHECKPOINT_MAGIC: [u8; 8] = *b"SHRCHKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub domain: DomainSpec,
    pub state: VelocityState,
}

pub fn write_checkpoint<W: Write>(mut w: W, domain: &DomainSpec, u: &VelocityState) -> Result<()> {
    let d = u.u[0].dims();
    if d != domain.dims() {
        return Err(Error::DimensionMismatch { expected: domain.dims().tuple(), got: d.tuple() });
    }
    let mut buf = Vec::with_capacity(68 + 48 * d.len());
    buf.extend_from_slice(&CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for n in [d.nx, d.ny, d.nz] {
        buf.extend_from_slice(&(n as u64).to_le_bytes());
    }
    for x in [domain.ly, domain.nu, u.time, u.shear_phase()] {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    for f in &u.u {
        for c in f.coeffs() {
            buf.extend_from_slice(&c.re.to_le_bytes());
            buf.extend_from_slice(&c.im.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let bad = |m: &str| Error::Checkpoint(m.to_string());
    if bytes.len() < 68 || bytes[..8] != CHECKPOINT_MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(8);
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let (nx, ny, nz) = (u64_at(12) as usize, u64_at(20) as usize, u64_at(28) as usize);
    let (ly, nu, t, phase) = (f64_at(36), f64_at(44), f64_at(52), f64_at(60));
    let domain = if nx == 1 { DomainSpec::streak(ny, nz, ly, nu) } else { DomainSpec::new(nx, ny, nz, ly, nu) }
        .map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
    let n = nx * ny * nz;
    if bytes.len() != 68 + 48 * n {
        return Err(Error::Checkpoint(format!("expected {} bytes, found {}", 68 + 48 * n, bytes.len())));
    }
    let mut fields = Vec::with_capacity(3);
    for c in 0..3 {
        let base = 68 + 16 * n * c;
        let coeffs = (0..n).map(|i| Complex64::new(f64_at(base + 16 * i), f64_at(base + 16 * i + 8))).collect();
        fields.push(SpectralField::from_coeffs(domain.dims(), ly, phase, coeffs)?);
    }
    let [a, b, c]: [SpectralField; 3] = fields.try_into().unwrap();
    Ok(Checkpoint { domain, state: VelocityState { u: [a, b, c], time: t } })
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_checkpoint(f, &self.domain, &self.state)
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_checkpoint(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}
