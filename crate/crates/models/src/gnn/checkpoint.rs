//! Versioned binary checkpoint: magic `GRLB1`, then per tensor a u32 name
//! length, the UTF-8 name, u32 rows, u32 cols and row-major little-endian
//! f64 values, repeated to end of file.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use grl_core::DenseMatrix;

use crate::{ModelError, Result};

const MAGIC: &[u8; 5] = b"GRLB1";

pub fn save_checkpoint(params: &[(String, &DenseMatrix)], path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MAGIC)?;
    for (name, tensor) in params {
        let bytes = name.as_bytes();
        out.write_all(&(bytes.len() as u32).to_le_bytes())?;
        out.write_all(bytes)?;
        out.write_all(&(tensor.rows() as u32).to_le_bytes())?;
        out.write_all(&(tensor.cols() as u32).to_le_bytes())?;
        for v in tensor.as_slice() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Vec<(String, DenseMatrix)>> {
    let mut input = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 5];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(ModelError::BadCheckpoint(format!(
            "wrong magic {:?}",
            String::from_utf8_lossy(&magic)
        )));
    }
    let mut tensors = Vec::new();
    loop {
        let mut len_buf = [0u8; 4];
        match input.read_exact(&mut len_buf) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let name_len = u32::from_le_bytes(len_buf) as usize;
        if name_len > 1 << 16 {
            return Err(ModelError::BadCheckpoint(format!("name length {name_len}")));
        }
        let mut name = vec![0u8; name_len];
        input.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|e| ModelError::BadCheckpoint(format!("name not utf-8: {e}")))?;
        let mut dim = [0u8; 4];
        input.read_exact(&mut dim)?;
        let rows = u32::from_le_bytes(dim) as usize;
        input.read_exact(&mut dim)?;
        let cols = u32::from_le_bytes(dim) as usize;
        let mut data = vec![0.0f64; rows * cols];
        let mut buf = [0u8; 8];
        for v in &mut data {
            input.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        tensors.push((name, DenseMatrix::from_vec(rows, cols, data)));
    }
    Ok(tensors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_names_shapes_bits() {
        let dir = std::env::temp_dir().join(format!("grl_ckpt_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.grlb");
        let w = DenseMatrix::from_vec(2, 3, vec![0.1, -2.5, 3e-17, f64::MIN_POSITIVE, 1.0, -0.0]);
        let b = DenseMatrix::from_vec(1, 3, vec![1.0, 2.0, 3.0]);
        save_checkpoint(
            &[("layer0.weight".into(), &w), ("layer0.bias".into(), &b)],
            &path,
        )
        .unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded[0].0, "layer0.weight");
        assert_eq!(loaded[0].1, w);
        assert_eq!(loaded[1].1, b);
    }

    #[test]
    fn rejects_wrong_magic() {
        let dir = std::env::temp_dir().join(format!("grl_ckpt_bad_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.grlb");
        std::fs::write(&path, b"NOPE!rest").unwrap();
        assert!(matches!(load_checkpoint(&path), Err(ModelError::BadCheckpoint(_))));
    }
}
