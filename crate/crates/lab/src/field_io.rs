//! Flat binary grid fields, all little-endian:
//! `u32 d`, `d × u64` dims, `f64 h`, `d × f64` origin, then the values
//! as `f64` in row-major order (last axis fastest).

use std::io::{self, Read, Write};

use sieve_core::grid::{Grid, GridField};

pub fn write_field<W: Write>(mut out: W, field: &GridField) -> io::Result<()> {
    let g = &field.grid;
    out.write_all(&(g.dim() as u32).to_le_bytes())?;
    for &n in g.dims() {
        out.write_all(&(n as u64).to_le_bytes())?;
    }
    out.write_all(&g.h().to_le_bytes())?;
    for &o in g.origin() {
        out.write_all(&o.to_le_bytes())?;
    }
    for &v in &field.values {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn field_bytes(field: &GridField) -> Vec<u8> {
    let mut buf = Vec::with_capacity(8 * field.values.len() + 64);
    write_field(&mut buf, field).expect("writing to memory cannot fail");
    buf
}

fn invalid(msg: &str) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.to_string())
}

fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> io::Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

pub fn read_field<R: Read>(mut input: R) -> io::Result<GridField> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    let d = u32::from_le_bytes(b) as usize;
    if d == 0 || d > 4 {
        return Err(invalid("field dimension must be between 1 and 4"));
    }
    let dims = (0..d).map(|_| read_u64(&mut input).map(|n| n as usize)).collect::<io::Result<Vec<_>>>()?;
    let h = read_f64(&mut input)?;
    let origin = (0..d).map(|_| read_f64(&mut input)).collect::<io::Result<Vec<_>>>()?;
    let grid = Grid::new(origin, dims, h).map_err(|e| invalid(&e.to_string()))?;
    let values = (0..grid.len()).map(|_| read_f64(&mut input)).collect::<io::Result<Vec<_>>>()?;
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(invalid("trailing bytes after the field values"));
    }
    GridField::new(grid, values).map_err(|e| invalid(&e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_and_round_trip() {
        let grid = Grid::new(vec![-1.0, 0.5], vec![2, 3], 0.25).unwrap();
        let field = GridField::new(grid, vec![0.0, 1.0, 2.0, 3.0, 4.0, -5.5]).unwrap();
        let bytes = field_bytes(&field);
        assert_eq!(bytes.len(), 4 + 2 * 8 + 8 + 2 * 8 + 6 * 8);
        assert_eq!(&bytes[..4], &2u32.to_le_bytes());
        assert_eq!(&bytes[4..12], &2u64.to_le_bytes());
        assert_eq!(&bytes[20..28], &0.25f64.to_le_bytes());
        assert_eq!(&bytes[bytes.len() - 8..], &(-5.5f64).to_le_bytes());
        assert_eq!(read_field(bytes.as_slice()).unwrap(), field);
    }

    #[test]
    fn truncated_and_padded_inputs_fail() {
        let grid = Grid::new(vec![0.0, 0.0], vec![2, 2], 1.0).unwrap();
        let bytes = field_bytes(&GridField::new(grid, vec![1.0; 4]).unwrap());
        assert!(read_field(&bytes[..bytes.len() - 1]).is_err());
        let mut padded = bytes.clone();
        padded.push(0);
        assert!(read_field(padded.as_slice()).is_err());
        assert!(read_field(&[9u8, 0, 0, 0][..]).is_err());
    }
}
