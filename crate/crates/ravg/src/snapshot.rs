//! Binary snapshot format for [`MomentSet`].
//!
//! Little-endian, no padding:
//!
//! ```text
//! magic "RAVG" | version u32 = 1 | mode u8 (0 uniform, 1 exponential)
//! | rate f64 (0.0 when uniform) | p u64 | n u64
//! | mu_x[p] f64 | mu_y f64 | s_xy[p] f64 | s_yy f64 | s_xx[p*p] f64 row-major
//! ```
//!
//! Round-trips are bit-exact.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::mat::Matrix;
use crate::moments::{MomentSet, WeightMode};

pub const MAGIC: &[u8; 4] = b"RAVG";
pub const VERSION: u32 = 1;

pub fn write_snapshot<W: Write>(m: &MomentSet, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let (mode, rate) = match m.mode() {
        WeightMode::Uniform => (0u8, 0.0),
        WeightMode::Exponential { rate } => (1u8, rate),
    };
    w.write_all(&[mode])?;
    w.write_all(&rate.to_le_bytes())?;
    w.write_all(&(m.p() as u64).to_le_bytes())?;
    w.write_all(&m.n().to_le_bytes())?;
    for v in m.mu_x() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&m.mu_y().to_le_bytes())?;
    for v in m.s_xy() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&m.s_yy().to_le_bytes())?;
    for v in m.s_xx().as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

struct Cursor<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> Cursor<R> {
    fn take<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        let mut filled = 0;
        while filled < N {
            let got = self.inner.read(&mut buf[filled..])?;
            if got == 0 {
                return Err(Error::CorruptSnapshot {
                    offset: self.offset + filled as u64,
                    reason: format!("truncated while reading {what}"),
                });
            }
            filled += got;
        }
        self.offset += N as u64;
        Ok(buf)
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take::<8>(what)?))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take::<8>(what)?))
    }
}

pub fn read_snapshot<R: Read>(r: R) -> Result<MomentSet> {
    let mut c = Cursor { inner: r, offset: 0 };
    let magic = c.take::<4>("magic")?;
    if &magic != MAGIC {
        return Err(Error::CorruptSnapshot {
            offset: 0,
            reason: format!("bad magic {magic:?}, expected {MAGIC:?}"),
        });
    }
    let version = u32::from_le_bytes(c.take::<4>("version")?);
    if version != VERSION {
        return Err(Error::CorruptSnapshot {
            offset: 4,
            reason: format!("unsupported version {version}, expected {VERSION}"),
        });
    }
    let mode_byte = c.take::<1>("mode")?[0];
    let rate = c.f64("rate")?;
    let mode = match mode_byte {
        0 => WeightMode::Uniform,
        1 => WeightMode::Exponential { rate },
        other => {
            return Err(Error::CorruptSnapshot {
                offset: 8,
                reason: format!("unknown mode byte {other}"),
            })
        }
    };
    let p64 = c.u64("p")?;
    let n = c.u64("n")?;
    let p = usize::try_from(p64).ok().filter(|&p| p > 0).ok_or_else(|| {
        Error::CorruptSnapshot {
            offset: 17,
            reason: format!("invalid feature count {p64}"),
        }
    })?;
    if p.checked_mul(p).is_none() {
        return Err(Error::CorruptSnapshot {
            offset: 17,
            reason: format!("p*p overflows for p={p}"),
        });
    }
    let mut mu_x = vec![0.0; p];
    for v in mu_x.iter_mut() {
        *v = c.f64("mu_x")?;
    }
    let mu_y = c.f64("mu_y")?;
    let mut s_xy = vec![0.0; p];
    for v in s_xy.iter_mut() {
        *v = c.f64("s_xy")?;
    }
    let s_yy = c.f64("s_yy")?;
    let mut s_xx = Matrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            let v = c.f64("s_xx")?;
            s_xx.set(i, j, v);
        }
    }
    Ok(MomentSet::from_parts(p, n, mu_x, mu_y, s_xx, s_xy, s_yy, mode))
}
