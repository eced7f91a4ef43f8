//! Binary dataset cache.
//!
//! Layout (all little-endian):
//!
//! ```text
//! magic            8 bytes  "DMAPDOE\0"
//! version          u32
//! x_bins           u32
//! y_levels         u32
//! per_family_count u32
//! n_entries        u32
//! master_seed      u64
//! n_entries x {
//!     family_id    u32
//!     index        u32
//!     sample_size  u32
//!     seed         u64
//!     params       5 x f64   (ParamSet::to_slots)
//!     stats        5 x f64   (entropy, skewness, ks_uniform, d_pos, d_neg)
//!     cells        x_bins * y_levels x f32
//! }
//! ```

use std::io::{Read, Write};

use super::{DistSpec, DoeEntry, Family, LabeledDataset, ParamSet};
use crate::cdfcodec::{CdfGrid, GridShape, SeriesStats};
use crate::{Error, Result};

pub const CACHE_MAGIC: &[u8; 8] = b"DMAPDOE\0";
pub const CACHE_VERSION: u32 = 1;

pub fn write_cache<W: Write>(ds: &LabeledDataset, mut w: W) -> Result<()> {
    w.write_all(CACHE_MAGIC)?;
    w.write_all(&CACHE_VERSION.to_le_bytes())?;
    w.write_all(&(ds.shape.x_bins as u32).to_le_bytes())?;
    w.write_all(&(ds.shape.y_levels as u32).to_le_bytes())?;
    w.write_all(&ds.per_family_count.to_le_bytes())?;
    w.write_all(&(ds.entries.len() as u32).to_le_bytes())?;
    w.write_all(&ds.master_seed.to_le_bytes())?;
    let mut buf = Vec::new();
    for e in &ds.entries {
        buf.clear();
        buf.extend_from_slice(&(e.family.id() as u32).to_le_bytes());
        buf.extend_from_slice(&e.index.to_le_bytes());
        buf.extend_from_slice(&e.spec.sample_size.to_le_bytes());
        buf.extend_from_slice(&e.seed.to_le_bytes());
        for p in e.spec.params.to_slots() {
            buf.extend_from_slice(&p.to_le_bytes());
        }
        let s = &e.stats;
        for v in [s.entropy, s.skewness, s.ks_uniform, s.d_pos, s.d_neg] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for &c in &e.grid.cells {
            buf.extend_from_slice(&(c as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Format(format!("dataset cache truncated at byte {}", self.pos)));
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn read_cache<R: Read>(mut r: R) -> Result<LabeledDataset> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut c = Cursor { bytes: &bytes, pos: 0 };
    if c.take(8)? != CACHE_MAGIC {
        return Err(Error::Format("not a dataset cache (bad magic)".into()));
    }
    let version = c.u32()?;
    if version != CACHE_VERSION {
        return Err(Error::Format(format!("unsupported cache version {version}")));
    }
    let shape = GridShape::new(c.u32()? as usize, c.u32()? as usize)?;
    let per_family_count = c.u32()?;
    let n = c.u32()? as usize;
    let master_seed = c.u64()?;
    let mut entries = Vec::with_capacity(n);
    for _ in 0..n {
        let family = Family::from_id(c.u32()?)?;
        let index = c.u32()?;
        let sample_size = c.u32()?;
        let seed = c.u64()?;
        let mut slots = [0.0; 5];
        for s in &mut slots {
            *s = c.f64()?;
        }
        let mut st = [0.0; 5];
        for s in &mut st {
            *s = c.f64()?;
        }
        let cells = c
            .take(4 * shape.len())?
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect();
        entries.push(DoeEntry {
            family,
            index,
            spec: DistSpec::new(ParamSet::from_slots(family, slots), sample_size),
            seed,
            grid: CdfGrid { shape, cells },
            stats: SeriesStats {
                entropy: st[0],
                skewness: st[1],
                ks_uniform: st[2],
                d_pos: st[3],
                d_neg: st[4],
            },
        });
    }
    if c.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after dataset cache".into()));
    }
    Ok(LabeledDataset {
        shape,
        master_seed,
        per_family_count,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distgen::build_doe;

    #[test]
    fn round_trip_preserves_everything_but_cell_precision() {
        let ds = build_doe(2, GridShape::new(16, 15).unwrap(), 11).unwrap();
        let mut bytes = Vec::new();
        write_cache(&ds, &mut bytes).unwrap();
        assert_eq!(bytes.len(), 36 + 26 * (20 + 80 + 4 * 240));
        let back = read_cache(&bytes[..]).unwrap();
        assert_eq!(back.shape, ds.shape);
        assert_eq!(back.len(), 26);
        for (a, b) in ds.entries.iter().zip(&back.entries) {
            assert_eq!(a.spec, b.spec);
            assert_eq!(a.stats, b.stats);
            assert_eq!(a.seed, b.seed);
            for (x, y) in a.grid.cells.iter().zip(&b.grid.cells) {
                assert_eq!(*x as f32 as f64, *y);
            }
        }
        // re-encoding the loaded dataset is byte-identical
        let mut again = Vec::new();
        write_cache(&back, &mut again).unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn rejects_corrupt_input() {
        let ds = build_doe(1, GridShape::default(), 1).unwrap();
        let mut bytes = Vec::new();
        write_cache(&ds, &mut bytes).unwrap();
        assert!(read_cache(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(read_cache(&bad[..]).is_err());
        bytes.push(0);
        assert!(read_cache(&bytes[..]).is_err());
    }
}
