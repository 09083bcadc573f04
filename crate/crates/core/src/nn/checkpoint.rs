//! Debug checkpoints: one JSON header line describing tensor shapes, then the
//! parameters as consecutive little-endian `f64` values in buffer order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MlpParams;
use crate::error::{PllError, Result};

#[derive(Serialize, Deserialize)]
struct Header {
    dtype: String,
    d: usize,
    hidden: usize,
    q: usize,
    tensors: Vec<TensorShape>,
}

#[derive(Serialize, Deserialize)]
struct TensorShape {
    name: String,
    shape: [usize; 2],
}

pub fn save_checkpoint(params: &MlpParams, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let header = Header {
        dtype: "f64le".into(),
        d: params.input_dim(),
        hidden: params.hidden_width(),
        q: params.num_classes(),
        tensors: params
            .tensor_shapes()
            .iter()
            .map(|(name, shape)| TensorShape {
                name: (*name).into(),
                shape: *shape,
            })
            .collect(),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for v in params.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<MlpParams> {
    let mut r = BufReader::new(File::open(path)?);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: Header = serde_json::from_str(line.trim_end())?;
    if header.dtype != "f64le" {
        return Err(PllError::Shape(format!("unsupported dtype {}", header.dtype)));
    }
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() % 8 != 0 {
        return Err(PllError::Shape("truncated parameter data".into()));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    MlpParams::from_parts(header.d, header.hidden, header.q, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::mlp::init_params_with_width;

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let p = init_params_with_width(5, 7, 3, 12);
        save_checkpoint(&p, &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), p);
    }
}
