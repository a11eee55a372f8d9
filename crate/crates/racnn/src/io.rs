//! Binary model files and IDX dataset ingestion.
//!
//! Model format, all multi-byte integers little-endian:
//!
//! ```text
//! magic  "RACN" (4 bytes)
//! version u32
//! layer count u32
//! per layer: kind tag u8, dim header (u32 each), payload (f32 each)
//! crc32 of all preceding bytes, u32
//! ```
//!
//! Kind tags and their headers/payloads:
//!
//! | tag | kind         | dims  | payload                          |
//! |-----|--------------|-------|----------------------------------|
//! | 1   | conv3        | d, f  | w `9d*f`                         |
//! | 2   | conv1        | d, f  | w `d*f`                          |
//! | 3   | racnn        | d, f  | w1 `d*f`, w3_hollow `9d*f`, w_alpha `d`, b_alpha |
//! | 4   | relu         | none  | none                             |
//! | 5   | maxpool2     | none  | none                             |
//! | 6   | flatten      | none  | none                             |
//! | 7   | dense        | in, out | w `in*out`, b `out`            |
//! | 8   | softmax_xent | none  | none                             |
//!
//! Parameters are stored as f32; hollow-center zeros are stored rather
//! than elided. Loading verifies, in order: length, magic, version, CRC,
//! record structure, then parameter invariants.

use std::fs;
use std::path::{Path, PathBuf};

use crate::conv::RacnnParams;
use crate::nn::dataset::Dataset;
use crate::nn::{Graph, Layer};
use crate::{lit, to_f64, Error, Mat, Result, Scalar, Tensor3};

pub const MODEL_MAGIC: [u8; 4] = *b"RACN";
pub const MODEL_VERSION: u32 = 1;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn push_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn push_f32s<T: Scalar>(out: &mut Vec<u8>, vs: &[T]) {
    for &v in vs {
        out.extend_from_slice(&(to_f64(v) as f32).to_le_bytes());
    }
}

/// Serializes a graph to the model byte format.
pub fn model_to_bytes<T: Scalar>(g: &Graph<T>) -> Result<Vec<u8>> {
    g.validate()?;
    let mut out = Vec::new();
    out.extend_from_slice(&MODEL_MAGIC);
    push_u32(&mut out, MODEL_VERSION);
    push_u32(&mut out, g.layers.len() as u32);
    for layer in &g.layers {
        match layer {
            Layer::Conv3 { w } => {
                out.push(1);
                push_u32(&mut out, (w.rows / 9) as u32);
                push_u32(&mut out, w.cols as u32);
                push_f32s(&mut out, &w.data);
            }
            Layer::Conv1 { w } => {
                out.push(2);
                push_u32(&mut out, w.rows as u32);
                push_u32(&mut out, w.cols as u32);
                push_f32s(&mut out, &w.data);
            }
            Layer::Racnn(p) => {
                out.push(3);
                push_u32(&mut out, p.d as u32);
                push_u32(&mut out, p.f as u32);
                push_f32s(&mut out, &p.w1.data);
                push_f32s(&mut out, &p.w3_hollow.data);
                push_f32s(&mut out, &p.w_alpha);
                push_f32s(&mut out, &[p.b_alpha]);
            }
            Layer::Relu => out.push(4),
            Layer::MaxPool2 => out.push(5),
            Layer::Flatten => out.push(6),
            Layer::Dense { w, b } => {
                out.push(7);
                push_u32(&mut out, w.rows as u32);
                push_u32(&mut out, w.cols as u32);
                push_f32s(&mut out, &w.data);
                push_f32s(&mut out, b);
            }
            Layer::SoftmaxXent => out.push(8),
        }
    }
    let crc = crc32fast::hash(&out);
    push_u32(&mut out, crc);
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn fail<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Format { offset: self.pos as u64, message: message.into() })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return self
                .fail(format!("needed {n} bytes, only {} remain", self.bytes.len() - self.pos));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f32s<T: Scalar>(&mut self, n: usize) -> Result<Vec<T>> {
        let b = self.take(n.checked_mul(4).ok_or(Error::Format {
            offset: self.pos as u64,
            message: "parameter count overflows".into(),
        })?)?;
        Ok(b.chunks_exact(4)
            .map(|c| lit(f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]]))))
            .collect())
    }
}

fn checked_elems(a: usize, b: usize, cur: &Cursor) -> Result<usize> {
    a.checked_mul(b).ok_or(Error::Format {
        offset: cur.pos as u64,
        message: "layer dimensions overflow".into(),
    })
}

/// Parses the model byte format. Checks run in a fixed order so every
/// corruption maps to one specific error: length, magic, version, CRC,
/// record structure, parameter invariants.
pub fn model_from_bytes<T: Scalar>(bytes: &[u8]) -> Result<Graph<T>> {
    if bytes.len() < 16 {
        return Err(Error::Format {
            offset: 0,
            message: format!("file is {} bytes, shorter than any valid model", bytes.len()),
        });
    }
    if bytes[0..4] != MODEL_MAGIC {
        let mut found = [0u8; 4];
        found.copy_from_slice(&bytes[0..4]);
        return Err(Error::BadMagic { found });
    }
    let version = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]);
    if version != MODEL_VERSION {
        return Err(Error::BadVersion { expected: MODEL_VERSION, found: version });
    }
    let body = &bytes[..bytes.len() - 4];
    let tail = &bytes[bytes.len() - 4..];
    let stored = u32::from_le_bytes([tail[0], tail[1], tail[2], tail[3]]);
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::CrcMismatch { stored, computed });
    }

    let mut cur = Cursor { bytes: body, pos: 8 };
    let count = cur.u32()? as usize;
    let mut layers = Vec::new();
    for _ in 0..count {
        let tag = cur.u8()?;
        let layer = match tag {
            1 => {
                let d = cur.u32()? as usize;
                let f = cur.u32()? as usize;
                let n = checked_elems(9 * d, f, &cur)?;
                Layer::Conv3 { w: Mat::from_vec(9 * d, f, cur.f32s(n)?)? }
            }
            2 => {
                let d = cur.u32()? as usize;
                let f = cur.u32()? as usize;
                let n = checked_elems(d, f, &cur)?;
                Layer::Conv1 { w: Mat::from_vec(d, f, cur.f32s(n)?)? }
            }
            3 => {
                let d = cur.u32()? as usize;
                let f = cur.u32()? as usize;
                let n1 = checked_elems(d, f, &cur)?;
                let n3 = checked_elems(9 * d, f, &cur)?;
                let w1 = Mat::from_vec(d, f, cur.f32s(n1)?)?;
                let w3_hollow = Mat::from_vec(9 * d, f, cur.f32s(n3)?)?;
                let w_alpha = cur.f32s(d)?;
                let b_alpha = cur.f32s::<T>(1)?[0];
                Layer::Racnn(RacnnParams::new(w1, w3_hollow, w_alpha, b_alpha)?)
            }
            4 => Layer::Relu,
            5 => Layer::MaxPool2,
            6 => Layer::Flatten,
            7 => {
                let rows = cur.u32()? as usize;
                let cols = cur.u32()? as usize;
                let n = checked_elems(rows, cols, &cur)?;
                let w = Mat::from_vec(rows, cols, cur.f32s(n)?)?;
                let b = cur.f32s(cols)?;
                Layer::Dense { w, b }
            }
            8 => Layer::SoftmaxXent,
            other => return cur.fail(format!("unknown layer kind tag {other}")),
        };
        layers.push(layer);
    }
    if cur.pos != body.len() {
        return cur.fail(format!("{} trailing bytes after last layer", body.len() - cur.pos));
    }
    Graph::new(layers)
}

/// Writes the model atomically: the bytes land in a sibling temp file
/// that is renamed over the target, so a failed save never leaves a
/// partial model at `path`.
pub fn save_model<T: Scalar>(g: &Graph<T>, path: &Path) -> Result<()> {
    let bytes = model_to_bytes(g)?;
    let mut os = path.as_os_str().to_os_string();
    os.push(".tmp");
    let tmp = PathBuf::from(os);
    if let Err(e) = fs::write(&tmp, &bytes) {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    if let Err(e) = fs::rename(&tmp, path) {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    Ok(())
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<Graph<T>> {
    model_from_bytes(&fs::read(path)?)
}

fn idx_header(bytes: &[u8], want_magic: u32, dims: usize, path: &Path) -> Result<Vec<usize>> {
    let needed = 4 + 4 * dims;
    if bytes.len() < needed {
        return Err(Error::Format {
            offset: bytes.len() as u64,
            message: format!("{}: truncated IDX header", path.display()),
        });
    }
    let magic = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    if magic != want_magic {
        return Err(Error::Format {
            offset: 0,
            message: format!(
                "{}: IDX magic {magic:#010x}, expected {want_magic:#010x}",
                path.display()
            ),
        });
    }
    Ok((0..dims)
        .map(|i| {
            let o = 4 + 4 * i;
            u32::from_be_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]) as usize
        })
        .collect())
}

/// Reads an IDX ubyte image file into single-channel tensors scaled to
/// [0, 1].
pub fn load_idx_images<T: Scalar>(path: &Path) -> Result<Vec<Tensor3<T>>> {
    let bytes = fs::read(path)?;
    let dims = idx_header(&bytes, IDX_IMAGES_MAGIC, 3, path)?;
    let (n, rows, cols) = (dims[0], dims[1], dims[2]);
    if rows == 0 || cols == 0 {
        return Err(Error::Format {
            offset: 8,
            message: format!("{}: zero image dimensions {rows}x{cols}", path.display()),
        });
    }
    let start = 16usize;
    let need = rows.checked_mul(cols).and_then(|v| v.checked_mul(n)).ok_or(Error::Format {
        offset: 4,
        message: format!("{}: image count overflows", path.display()),
    })?;
    if bytes.len() - start != need {
        return Err(Error::Format {
            offset: bytes.len() as u64,
            message: format!(
                "{}: payload is {} bytes, header implies {need}",
                path.display(),
                bytes.len() - start
            ),
        });
    }
    let mut images = Vec::with_capacity(n);
    for s in 0..n {
        let o = start + s * rows * cols;
        let data = bytes[o..o + rows * cols].iter().map(|&b| lit(f64::from(b) / 255.0)).collect();
        images.push(Tensor3::from_vec(rows, cols, 1, data)?);
    }
    Ok(images)
}

/// Reads an IDX ubyte label file.
pub fn load_idx_labels(path: &Path) -> Result<Vec<usize>> {
    let bytes = fs::read(path)?;
    let dims = idx_header(&bytes, IDX_LABELS_MAGIC, 1, path)?;
    let n = dims[0];
    let start = 8usize;
    if bytes.len() - start != n {
        return Err(Error::Format {
            offset: bytes.len() as u64,
            message: format!(
                "{}: payload is {} bytes, header implies {n}",
                path.display(),
                bytes.len() - start
            ),
        });
    }
    Ok(bytes[start..].iter().map(|&b| b as usize).collect())
}

/// Pairs IDX image and label files into a dataset; class count is one
/// past the largest label.
pub fn load_idx_dataset<T: Scalar>(images: &Path, labels: &Path) -> Result<Dataset<T>> {
    let images = load_idx_images(images)?;
    let labels = load_idx_labels(labels)?;
    let classes = labels.iter().max().map_or(1, |&m| m + 1);
    Dataset::new(images, labels, classes)
}
