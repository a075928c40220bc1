//! Byte-stable binary checkpoint format.
//!
//! Layout: magic, dtype tag, JSON metadata blob, then named tensors with
//! explicit dims and little-endian payloads. Writing the same model twice
//! produces identical bytes.

use crate::error::{Error, Result};
use crate::scalar::{Dtype, Real};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{ArrayD, ArrayViewD, IxDyn};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 6] = b"VCKP1\n";

pub fn save_tensors<R: Real>(
    path: &Path,
    meta: &serde_json::Value,
    tensors: &[(String, ArrayViewD<'_, R>)],
) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    let dtype = R::dtype().as_str().as_bytes();
    w.write_u8(dtype.len() as u8)?;
    w.write_all(dtype)?;
    let meta_bytes = serde_json::to_vec(meta)?;
    w.write_u32::<LittleEndian>(meta_bytes.len() as u32)?;
    w.write_all(&meta_bytes)?;
    w.write_u32::<LittleEndian>(tensors.len() as u32)?;
    for (name, tensor) in tensors {
        let name_bytes = name.as_bytes();
        w.write_u16::<LittleEndian>(name_bytes.len() as u16)?;
        w.write_all(name_bytes)?;
        w.write_u8(tensor.ndim() as u8)?;
        for &d in tensor.shape() {
            w.write_u32::<LittleEndian>(d as u32)?;
        }
        let owned = tensor.to_owned();
        let slice = owned.as_slice().expect("tensor is standard layout");
        match R::dtype() {
            Dtype::F32 => {
                for &v in slice {
                    w.write_f32::<LittleEndian>(v.to_f64_() as f32)?;
                }
            }
            Dtype::F64 => {
                for &v in slice {
                    w.write_f64::<LittleEndian>(v.to_f64_())?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_tensors<R: Real>(path: &Path) -> Result<(serde_json::Value, Vec<(String, ArrayD<R>)>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 6];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint(format!(
            "bad magic in {}",
            path.display()
        )));
    }
    let dtype_len = r.read_u8()? as usize;
    let mut dtype_bytes = vec![0u8; dtype_len];
    r.read_exact(&mut dtype_bytes)?;
    let dtype_str = String::from_utf8(dtype_bytes)
        .map_err(|_| Error::Checkpoint("invalid dtype tag".into()))?;
    let dtype = Dtype::from_str(&dtype_str)
        .ok_or_else(|| Error::Checkpoint(format!("unknown dtype {dtype_str}")))?;
    if dtype != R::dtype() {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds {dtype_str} tensors but {} was requested",
            R::dtype().as_str()
        )));
    }
    let meta_len = r.read_u32::<LittleEndian>()? as usize;
    let mut meta_bytes = vec![0u8; meta_len];
    r.read_exact(&mut meta_bytes)?;
    let meta: serde_json::Value = serde_json::from_slice(&meta_bytes)?;
    let count = r.read_u32::<LittleEndian>()? as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = r.read_u16::<LittleEndian>()? as usize;
        let mut name_bytes = vec![0u8; name_len];
        r.read_exact(&mut name_bytes)?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| Error::Checkpoint("invalid tensor name".into()))?;
        let ndim = r.read_u8()? as usize;
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(r.read_u32::<LittleEndian>()? as usize);
        }
        let n: usize = dims.iter().product();
        let mut data = Vec::with_capacity(n);
        match dtype {
            Dtype::F32 => {
                for _ in 0..n {
                    data.push(R::of(r.read_f32::<LittleEndian>()? as f64));
                }
            }
            Dtype::F64 => {
                for _ in 0..n {
                    data.push(R::of(r.read_f64::<LittleEndian>()?));
                }
            }
        }
        let arr = ArrayD::from_shape_vec(IxDyn(&dims), data)
            .map_err(|e| Error::Checkpoint(format!("tensor {name}: {e}")))?;
        tensors.push((name, arr));
    }
    Ok((meta, tensors))
}

/// Assigns loaded tensors onto model slots by name, checking shapes.
pub fn assign_named<R: Real>(
    slots: &mut crate::nn::param::NamedSlots<'_, R>,
    tensors: &[(String, ArrayD<R>)],
) -> Result<()> {
    let map: std::collections::BTreeMap<&str, &ArrayD<R>> =
        tensors.iter().map(|(n, t)| (n.as_str(), t)).collect();
    for (name, slot) in slots.iter_mut() {
        let tensor = map
            .get(name.as_str())
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
        let mut value = slot.value_mut();
        if value.shape() != tensor.shape() {
            return Err(Error::Checkpoint(format!(
                "tensor {name} has shape {:?}, expected {:?}",
                tensor.shape(),
                value.shape()
            )));
        }
        value.assign(tensor);
    }
    Ok(())
}

/// Dimension-erased views of every slot value, for saving.
pub fn slot_views<'a, R: Real>(
    slots: &'a crate::nn::param::NamedSlots<'_, R>,
) -> Vec<(String, ArrayViewD<'a, R>)> {
    slots
        .iter()
        .map(|(name, slot)| (name.clone(), slot.value()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{ArrayD, IxDyn};

    #[test]
    fn round_trip_and_byte_stability() {
        let dir = tempfile::tempdir().unwrap();
        let path_a = dir.path().join("a.ckpt");
        let path_b = dir.path().join("b.ckpt");
        let meta = serde_json::json!({"purpose": "test", "dims": [2, 3]});
        let t1 = ArrayD::from_shape_vec(IxDyn(&[2, 3]), vec![1.0f32, 2.0, 3.0, 4.0, 5.0, 6.0])
            .unwrap();
        let t2 = ArrayD::from_shape_vec(IxDyn(&[4]), vec![-1.0f32, 0.5, 0.25, 0.125]).unwrap();
        let tensors = vec![
            ("layer.w".to_string(), t1.view()),
            ("layer.b".to_string(), t2.view()),
        ];
        save_tensors(&path_a, &meta, &tensors).unwrap();
        save_tensors(&path_b, &meta, &tensors).unwrap();
        assert_eq!(std::fs::read(&path_a).unwrap(), std::fs::read(&path_b).unwrap());

        let (meta_back, loaded) = load_tensors::<f32>(&path_a).unwrap();
        assert_eq!(meta_back, meta);
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded[0].0, "layer.w");
        assert_eq!(loaded[0].1, t1);
        assert_eq!(loaded[1].1, t2);
    }

    #[test]
    fn dtype_mismatch_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ckpt");
        let t = ArrayD::from_shape_vec(IxDyn(&[2]), vec![1.0f32, 2.0]).unwrap();
        save_tensors(&path, &serde_json::json!({}), &[("t".to_string(), t.view())]).unwrap();
        assert!(load_tensors::<f64>(&path).is_err());
    }
}
