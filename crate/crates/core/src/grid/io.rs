//! Field dump (binary) and slice export (CSV).
//!
//! Binary layout, little-endian: `u32 nx, u32 ny, u32 nz, f64 resolution,
//! f64 origin_x, f64 origin_y, f64 origin_z`, then `nx·ny·nz` f64 values in
//! row-major `(x, y, z)` order with `z` fastest.

use std::io::{Read, Write};

use super::{DistanceField, GridGeometry};
use crate::error::{Error, Result};
use crate::Vec3;

pub const HEADER_BYTES: usize = 3 * 4 + 4 * 8;

pub fn write_field(field: &DistanceField, mut w: impl Write) -> Result<()> {
    let g = &field.geometry;
    for n in g.dims {
        let n = u32::try_from(n).map_err(|_| Error::Format("dimension exceeds u32".into()))?;
        w.write_all(&n.to_le_bytes())?;
    }
    w.write_all(&g.resolution.to_le_bytes())?;
    for a in 0..3 {
        w.write_all(&g.origin[a].to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(field.values().len() * 8);
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_field(mut r: impl Read) -> Result<DistanceField> {
    let mut header = [0u8; HEADER_BYTES];
    r.read_exact(&mut header)
        .map_err(|e| Error::Format(format!("truncated field header: {e}")))?;
    let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(header[o..o + 8].try_into().unwrap());
    let dims = [u32_at(0), u32_at(4), u32_at(8)];
    let resolution = f64_at(12);
    let origin = Vec3::new(f64_at(20), f64_at(28), f64_at(36));
    let geometry = GridGeometry::new(origin, resolution, dims)?;
    let mut bytes = vec![0u8; geometry.len() * 8];
    r.read_exact(&mut bytes)
        .map_err(|e| Error::Format(format!("truncated field body: {e}")))?;
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DistanceField::from_values(geometry, values)
}

/// Writes `x,y,value` rows for every cell center of the layer containing `z`.
pub fn write_slice_csv(field: &DistanceField, z: f64, mut w: impl Write) -> Result<()> {
    let g = &field.geometry;
    let k = ((z - g.origin.z) / g.resolution).floor();
    if !(k >= 0.0 && (k as usize) < g.dims[2]) {
        return Err(Error::OutOfBounds(format!("slice height {z} outside the field")));
    }
    let k = k as usize;
    writeln!(w, "x,y,value")?;
    for i in 0..g.dims[0] {
        for j in 0..g.dims[1] {
            let c = g.cell_center([i, j, k]);
            writeln!(w, "{},{},{}", c.x, c.y, field.at([i, j, k]))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip_and_layout() {
        let g = GridGeometry::new(Vec3::new(-1.0, 0.5, 2.0), 0.25, [3, 4, 5]).unwrap();
        let f = DistanceField::from_fn(g, |p| p.x + 10.0 * p.y + 100.0 * p.z);
        let mut buf = Vec::new();
        write_field(&f, &mut buf).unwrap();
        assert_eq!(buf.len(), HEADER_BYTES + 60 * 8);
        assert_eq!(&buf[0..4], &3u32.to_le_bytes());
        assert_eq!(&buf[12..20], &0.25f64.to_le_bytes());
        // Second value is cell (0, 0, 1).
        let second = f64::from_le_bytes(buf[HEADER_BYTES + 8..HEADER_BYTES + 16].try_into().unwrap());
        assert_eq!(second, f.at([0, 0, 1]));
        assert_eq!(read_field(&buf[..]).unwrap(), f);
        assert!(read_field(&buf[..buf.len() - 1]).is_err());
    }

    #[test]
    fn slice_rows() {
        let g = GridGeometry::new(Vec3::zeros(), 0.5, [4, 3, 3]).unwrap();
        let f = DistanceField::from_fn(g, |p| p.z);
        let mut out = Vec::new();
        write_slice_csv(&f, 0.7, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 1 + 12);
        assert!(lines[1].ends_with(",0.75"));
        assert!(write_slice_csv(&f, 9.0, Vec::new()).is_err());
    }
}
