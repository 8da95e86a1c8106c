//! Binary model checkpoints: versioned header (dims, vocabulary), then
//! named parameters as (name, shape, little-endian f64 values).
//! Round trips are bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{MCQModel, ModelConfig};
use crate::tensor::{ParamStore, Tensor};
use crate::vocab::Vocab;

const MAGIC: &[u8; 4] = b"MCQM";
const VERSION: u32 = 1;

pub fn save_model(model: &MCQModel, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    write_u32(&mut w, VERSION)?;
    let cfg = model.config();
    write_u32(&mut w, cfg.embed_dim as u32)?;
    write_u32(&mut w, cfg.hidden_dim as u32)?;
    write_u32(&mut w, cfg.n_choices as u32)?;
    write_u32(&mut w, cfg.max_len as u32)?;

    let tokens = model.vocab().tokens();
    write_u32(&mut w, tokens.len() as u32)?;
    for t in tokens {
        write_bytes(&mut w, t.as_bytes())?;
    }

    write_u32(&mut w, model.params().len() as u32)?;
    for (name, tensor) in model.params().iter() {
        write_bytes(&mut w, name.as_bytes())?;
        write_u32(&mut w, tensor.shape().len() as u32)?;
        for &d in tensor.shape() {
            write_u64(&mut w, d as u64)?;
        }
        for &v in tensor.values() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<MCQModel> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a model checkpoint (bad magic)".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let cfg = ModelConfig {
        embed_dim: read_u32(&mut r)? as usize,
        hidden_dim: read_u32(&mut r)? as usize,
        n_choices: read_u32(&mut r)? as usize,
        max_len: read_u32(&mut r)? as usize,
    };

    let token_count = read_u32(&mut r)? as usize;
    let mut tokens = Vec::with_capacity(token_count);
    for _ in 0..token_count {
        tokens.push(read_string(&mut r)?);
    }
    let vocab = Vocab::from_tokens(tokens);

    let param_count = read_u32(&mut r)? as usize;
    let mut params = ParamStore::new();
    for _ in 0..param_count {
        let name = read_string(&mut r)?;
        let ndim = read_u32(&mut r)? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(read_u64(&mut r)? as usize);
        }
        let numel: usize = shape.iter().product();
        let mut values = vec![0.0; numel];
        let mut buf = [0u8; 8];
        for v in &mut values {
            r.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        params.insert(&name, Tensor::new(shape, values)?)?;
    }
    MCQModel::from_parts(cfg, vocab, params)
}

fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_bytes<W: Write>(w: &mut W, bytes: &[u8]) -> Result<()> {
    write_u32(w, bytes.len() as u32)?;
    w.write_all(bytes)?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_string<R: Read>(r: &mut R) -> Result<String> {
    let len = read_u32(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Format(format!("invalid utf-8 in checkpoint: {e}")))
}
