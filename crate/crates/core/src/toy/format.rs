//! Binary dataset and model files. All integers and floats are little-endian;
//! the byte layouts are documented in `docs/FORMATS.md`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::repr::{ImageDims, Keypoint};

use super::dataset::{synthetic_pose, to_byte, Dataset, SyntheticSample};
use super::model::{Head, ToyModel};

pub const DATASET_MAGIC: [u8; 4] = *b"SDRD";
pub const DATASET_VERSION: u32 = 1;
pub const MODEL_MAGIC: [u8; 4] = *b"SDRM";
pub const MODEL_VERSION: u32 = 1;

const HEAD_SIMDR: u8 = 0;
const HEAD_HEATMAP: u8 = 1;

pub fn write_dataset(data: &Dataset, w: &mut impl Write) -> Result<()> {
    let dims = data.dims();
    w.write_all(&DATASET_MAGIC)?;
    w.write_all(&DATASET_VERSION.to_le_bytes())?;
    w.write_all(&dims.width().to_le_bytes())?;
    w.write_all(&dims.height().to_le_bytes())?;
    w.write_all(&(data.n_keypoints() as u32).to_le_bytes())?;
    w.write_all(&(data.len() as u64).to_le_bytes())?;
    let mut bytes = Vec::with_capacity(dims.area());
    for s in data.samples() {
        w.write_all(&s.id.to_le_bytes())?;
        bytes.clear();
        bytes.extend(s.image.as_slice().iter().map(|v| to_byte(*v)));
        w.write_all(&bytes)?;
        for kp in s.gt.keypoints() {
            w.write_all(&kp.x.to_le_bytes())?;
            w.write_all(&kp.y.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_dataset(bytes: &[u8]) -> Result<Dataset> {
    let mut r = Reader::new(bytes, "dataset");
    r.magic(DATASET_MAGIC)?;
    r.version(DATASET_VERSION)?;
    let dims = ImageDims::new(r.u32()?, r.u32()?).map_err(|e| r.corrupt(e.to_string()))?;
    let n_keypoints = r.u32()? as usize;
    let count = r.u64()? as usize;
    let record = 8 + dims.area() + 16 * n_keypoints;
    if r.remaining()
        != count
            .checked_mul(record)
            .ok_or_else(|| r.corrupt("sample count overflows"))?
    {
        return Err(r.corrupt(format!(
            "{} payload bytes for {count} records of {record} bytes",
            r.remaining()
        )));
    }
    let (h, w) = (dims.height() as usize, dims.width() as usize);
    let mut samples = Vec::with_capacity(count);
    for _ in 0..count {
        let id = r.u64()?;
        let data = r.take(dims.area())?.iter().map(|b| *b as f64 / 255.0).collect();
        let image = Grid::from_vec(h, w, data)?;
        let mut keypoints = Vec::with_capacity(n_keypoints);
        for _ in 0..n_keypoints {
            keypoints.push(Keypoint::new(r.f64()?, r.f64()?));
        }
        samples.push(SyntheticSample {
            image,
            gt: synthetic_pose(dims, keypoints)?,
            id,
        });
    }
    Dataset::new(dims, n_keypoints, samples).map_err(|e| r.corrupt(e.to_string()))
}

pub fn save_dataset(data: &Dataset, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    write_dataset(data, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    read_dataset(&fs::read(path)?)
}

pub fn write_model(model: &ToyModel, w: &mut impl Write) -> Result<()> {
    let dims = model.dims();
    w.write_all(&MODEL_MAGIC)?;
    w.write_all(&MODEL_VERSION.to_le_bytes())?;
    let (tag, sigma) = match model.head() {
        Head::SimDR { .. } => (HEAD_SIMDR, 0.0),
        Head::Heatmap { sigma, .. } => (HEAD_HEATMAP, sigma),
    };
    w.write_all(&[tag])?;
    w.write_all(&model.head().param().to_le_bytes())?;
    w.write_all(&sigma.to_le_bytes())?;
    w.write_all(&dims.width().to_le_bytes())?;
    w.write_all(&dims.height().to_le_bytes())?;
    w.write_all(&(model.n_keypoints() as u32).to_le_bytes())?;
    w.write_all(&(model.output_size() as u64).to_le_bytes())?;
    w.write_all(&(model.input_size() as u64).to_le_bytes())?;
    for v in model.weights().iter().chain(model.biases()) {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_model(bytes: &[u8]) -> Result<ToyModel> {
    let mut r = Reader::new(bytes, "model");
    r.magic(MODEL_MAGIC)?;
    r.version(MODEL_VERSION)?;
    let tag = r.take(1)?[0];
    let param = r.u32()?;
    let sigma = r.f64()?;
    let head = match tag {
        HEAD_SIMDR => Head::SimDR { k: param },
        HEAD_HEATMAP => Head::Heatmap { lambda: param, sigma },
        other => return Err(r.corrupt(format!("unknown head tag {other}"))),
    };
    let dims = ImageDims::new(r.u32()?, r.u32()?).map_err(|e| r.corrupt(e.to_string()))?;
    let n_keypoints = r.u32()? as usize;
    let out = r.u64()? as usize;
    let inp = r.u64()? as usize;
    let n_params = out
        .checked_mul(inp)
        .and_then(|n| n.checked_add(out))
        .ok_or_else(|| r.corrupt("parameter count overflows"))?;
    if r.remaining() != n_params * 8 {
        return Err(r.corrupt(format!("{} payload bytes for {n_params} parameters", r.remaining())));
    }
    let weights = (0..out * inp).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let biases = (0..out).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    ToyModel::from_parts(dims, n_keypoints, head, weights, biases).map_err(|e| r.corrupt(e.to_string()))
}

pub fn save_model(model: &ToyModel, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    write_model(model, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ToyModel> {
    read_model(&fs::read(path)?)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], what: &'static str) -> Self {
        Self { bytes, pos: 0, what }
    }

    fn corrupt(&self, detail: impl Into<String>) -> Error {
        Error::Corrupt {
            what: self.what,
            detail: detail.into(),
        }
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(self.corrupt(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn magic(&mut self, expected: [u8; 4]) -> Result<()> {
        let found = self.array::<4>()?;
        if found != expected {
            return Err(self.corrupt(format!("bad magic {found:?}")));
        }
        Ok(())
    }

    fn version(&mut self, expected: u32) -> Result<()> {
        let found = self.u32()?;
        if found != expected {
            return Err(Error::Version {
                what: self.what,
                found,
                expected,
            });
        }
        Ok(())
    }
}
