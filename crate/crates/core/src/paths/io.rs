//! Binary path files.
//!
//! Layout (little endian): magic `ARBK`, version byte `0x01`, then
//! `d: u32, N: u32, M: u32, T: f64, root_seed: u64, aux_count: u32`, the aux
//! names as `u32` length + UTF-8 bytes, `N + 1` grid times, the values in
//! path-time-component order, and finally one block per aux series: a `u32`
//! width followed by `M * width` values.

use std::io::{self, Read, Write};

use super::{AuxKind, PathBundle, PathsError, TimeGrid, AUX_ABSORPTION_INDEX};

pub const MAGIC: &[u8; 4] = b"ARBK";
pub const VERSION: u8 = 0x01;

pub fn write_bundle<W: Write>(w: &mut W, bundle: &PathBundle) -> io::Result<()> {
    let names: Vec<&str> = bundle.aux_names().collect();
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION])?;
    w.write_all(&(bundle.dim() as u32).to_le_bytes())?;
    w.write_all(&(bundle.grid().steps() as u32).to_le_bytes())?;
    w.write_all(&(bundle.n_paths() as u32).to_le_bytes())?;
    w.write_all(&bundle.grid().horizon().to_le_bytes())?;
    w.write_all(&bundle.root_seed().to_le_bytes())?;
    w.write_all(&(names.len() as u32).to_le_bytes())?;
    for name in &names {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
    }
    write_f64s(w, bundle.grid().times())?;
    write_f64s(w, bundle.values())?;
    for name in &names {
        let series = bundle.aux(name).expect("name comes from the bundle");
        w.write_all(&(series.width as u32).to_le_bytes())?;
        write_f64s(w, &series.data)?;
    }
    Ok(())
}

fn write_f64s<W: Write>(w: &mut W, xs: &[f64]) -> io::Result<()> {
    let mut buf = Vec::with_capacity(xs.len() * 8);
    for x in xs {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> io::Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn read_bundle<R: Read>(r: &mut R) -> Result<PathBundle, PathsError> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic[..4] != MAGIC || magic[4] != VERSION {
        return Err(PathsError::Format("bad magic or version".into()));
    }
    let d = read_u32(r)? as usize;
    let n = read_u32(r)? as usize;
    let m = read_u32(r)? as usize;
    let horizon = f64::from_bits(read_u64(r)?);
    let seed = read_u64(r)?;
    let aux_count = read_u32(r)? as usize;
    let mut names = Vec::with_capacity(aux_count);
    for _ in 0..aux_count {
        let len = read_u32(r)? as usize;
        let mut b = vec![0u8; len];
        r.read_exact(&mut b)?;
        names.push(String::from_utf8(b).map_err(|_| PathsError::Format("aux name is not UTF-8".into()))?);
    }
    let grid = TimeGrid::from_times(read_f64s(r, n + 1)?)?;
    if grid.horizon() != horizon {
        return Err(PathsError::Format("horizon does not match the grid".into()));
    }
    let values = read_f64s(r, m * (n + 1) * d)?;
    let mut bundle = PathBundle::new(grid, d, m, seed, values)?;
    for name in names {
        let width = read_u32(r)? as usize;
        let data = read_f64s(r, m * width)?;
        let kind = if width == n + 1 {
            AuxKind::PerTime
        } else if name == AUX_ABSORPTION_INDEX {
            AuxKind::GridIndex
        } else {
            AuxKind::PerPath
        };
        bundle.insert_aux(&name, kind, data)?;
    }
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let grid = TimeGrid::uniform(1.5, 3).unwrap();
        let mut b = PathBundle::new(grid, 2, 2, 77, (0..16).map(|x| x as f64 * 0.5).collect()).unwrap();
        b.insert_aux("xi", AuxKind::PerPath, vec![0.1, 0.2]).unwrap();
        b.insert_aux("Z", AuxKind::PerTime, vec![1.0; 8]).unwrap();
        let mut buf = Vec::new();
        write_bundle(&mut buf, &b).unwrap();
        assert_eq!(&buf[..5], b"ARBK\x01");
        let back = read_bundle(&mut buf.as_slice()).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn bad_magic() {
        let buf = b"NOPE\x01rest".to_vec();
        assert!(matches!(read_bundle(&mut buf.as_slice()), Err(PathsError::Format(_))));
    }
}
