//! Model files.
//!
//! Layout: an ASCII header of `key value` lines beginning with the magic
//! line `TRMF1` and ending with a line `data`, then the numeric blocks as
//! little-endian `f64` in row-major order, then a little-endian CRC32 of
//! every preceding byte. Header floats use Rust's shortest round-trip
//! formatting, so a save/load cycle reproduces every value bit for bit.
//!
//! Blocks by `kind`:
//!
//! | kind               | blocks                                           |
//! |--------------------|--------------------------------------------------|
//! | `trmf`, `tcf`      | F (n×k), X (k×T), W (k×\|L\|), trace (u64 sweep, f64 value) × len |
//! | `mean`             | mean (1)                                         |
//! | `ar1`              | A (n×n), last column (n)                         |
//! | `svd_ar1`          | F (n×k), X (k×T), A (k×k)                        |

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::baselines::BaselineModel;
use crate::error::{Error, Result};
use crate::graph::LagSet;
use crate::linalg::DenseMatrix;
use crate::model::{ARWeights, Hyperparams, TrmfModel};

const MAGIC: &str = "TRMF1";

/// Anything the CLI can persist.
#[derive(Clone, Debug, PartialEq)]
pub enum SavedModel {
    Trmf(TrmfModel),
    Baseline(BaselineModel),
}

pub fn save_model(model: &TrmfModel, path: impl AsRef<Path>) -> Result<()> {
    save_saved(&SavedModel::Trmf(model.clone()), path)
}

/// Loads a factor model (`trmf` or `tcf` kind).
pub fn load_model(path: impl AsRef<Path>) -> Result<TrmfModel> {
    match load_saved(path)? {
        SavedModel::Trmf(m) | SavedModel::Baseline(BaselineModel::Tcf(m)) => Ok(m),
        SavedModel::Baseline(b) => Err(Error::InvalidArgument(format!(
            "model file holds a {} baseline, not a factor model",
            b.kind()
        ))),
    }
}

pub fn save_saved(model: &SavedModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_saved(path: impl AsRef<Path>) -> Result<SavedModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

pub fn to_bytes(model: &SavedModel) -> Vec<u8> {
    let mut header = vec![MAGIC.to_string()];
    let mut body = Vec::new();
    let push_f64s = |vals: &[f64], body: &mut Vec<u8>| {
        for v in vals {
            body.extend_from_slice(&v.to_le_bytes());
        }
    };
    match model {
        SavedModel::Trmf(m) | SavedModel::Baseline(BaselineModel::Tcf(m)) => {
            let kind = if matches!(model, SavedModel::Trmf(_)) { "trmf" } else { "tcf" };
            header.push(format!("kind {kind}"));
            header.push(format!("n {}", m.n()));
            header.push(format!("k {}", m.k()));
            header.push(format!("t {}", m.t_count()));
            header.push(format!("lags {}", m.ar.lag_set));
            let h = &m.hyper;
            header.push(format!("lambda_f {}", h.lambda_f));
            header.push(format!("lambda_x {}", h.lambda_x));
            header.push(format!("lambda_w {}", h.lambda_w));
            header.push(format!("eta {}", h.eta));
            header.push(format!("max_outer_iters {}", h.max_outer_iters));
            header.push(format!("rel_tol {}", h.rel_tol));
            header.push(format!("cg_tol {}", h.cg_tol));
            header.push(format!("cg_max_iter {}", h.cg_max_iter));
            header.push(format!("seed {}", h.seed));
            header.push(format!("trace {}", m.fit_trace.len()));
            push_f64s(m.f_mat.as_slice(), &mut body);
            push_f64s(m.x_mat.as_slice(), &mut body);
            push_f64s(m.ar.w.as_slice(), &mut body);
            for &(sweep, value) in &m.fit_trace {
                body.extend_from_slice(&(sweep as u64).to_le_bytes());
                body.extend_from_slice(&value.to_le_bytes());
            }
        }
        SavedModel::Baseline(BaselineModel::Mean { mean, n, t_count }) => {
            header.push("kind mean".into());
            header.push(format!("n {n}"));
            header.push(format!("t {t_count}"));
            push_f64s(&[*mean], &mut body);
        }
        SavedModel::Baseline(BaselineModel::Ar1 { transition, last }) => {
            header.push("kind ar1".into());
            header.push(format!("n {}", last.len()));
            push_f64s(transition.as_slice(), &mut body);
            push_f64s(last, &mut body);
        }
        SavedModel::Baseline(BaselineModel::SvdAr1 {
            f_mat,
            x_mat,
            transition,
        }) => {
            header.push("kind svd_ar1".into());
            header.push(format!("n {}", f_mat.rows()));
            header.push(format!("k {}", f_mat.cols()));
            header.push(format!("t {}", x_mat.cols()));
            push_f64s(f_mat.as_slice(), &mut body);
            push_f64s(x_mat.as_slice(), &mut body);
            push_f64s(transition.as_slice(), &mut body);
        }
    }
    header.push("data".into());
    let mut bytes = header.join("\n").into_bytes();
    bytes.push(b'\n');
    bytes.extend_from_slice(&body);
    let crc = crc32fast::hash(&bytes);
    bytes.extend_from_slice(&crc.to_le_bytes());
    bytes
}

pub fn from_bytes(bytes: &[u8]) -> Result<SavedModel> {
    let corrupt = |msg: &str| Error::CorruptFile(msg.to_string());
    let first_line_end = bytes.iter().position(|&b| b == b'\n').unwrap_or(bytes.len());
    let magic = String::from_utf8_lossy(&bytes[..first_line_end.min(16)]).to_string();
    if magic != MAGIC {
        return Err(if magic.starts_with("TRMF") {
            Error::VersionMismatch(magic)
        } else {
            corrupt("missing TRMF magic")
        });
    }
    if bytes.len() < 4 {
        return Err(corrupt("too short"));
    }
    let (content, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    if crc32fast::hash(content) != stored {
        return Err(corrupt("checksum mismatch"));
    }

    let marker = b"\ndata\n";
    let split = content
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| corrupt("missing data marker"))?;
    let header = std::str::from_utf8(&content[..split]).map_err(|_| corrupt("header is not UTF-8"))?;
    let mut reader = BlockReader {
        bytes: &content[split + marker.len()..],
        pos: 0,
    };

    let fields: HashMap<&str, &str> = header
        .lines()
        .skip(1)
        .filter_map(|line| line.split_once(' '))
        .collect();
    let get = |key: &str| fields.get(key).copied().ok_or_else(|| corrupt(&format!("missing {key}")));
    let num = |key: &str| -> Result<usize> { get(key)?.parse().map_err(|_| corrupt(&format!("bad {key}"))) };
    let float = |key: &str| -> Result<f64> { get(key)?.parse().map_err(|_| corrupt(&format!("bad {key}"))) };

    let model = match get("kind")? {
        kind @ ("trmf" | "tcf") => {
            let (n, k, t) = (num("n")?, num("k")?, num("t")?);
            let lag_set: LagSet = get("lags")?.parse().map_err(|_| corrupt("bad lags"))?;
            let hyper = Hyperparams {
                k,
                lambda_f: float("lambda_f")?,
                lambda_x: float("lambda_x")?,
                lambda_w: float("lambda_w")?,
                eta: float("eta")?,
                max_outer_iters: num("max_outer_iters")?,
                rel_tol: float("rel_tol")?,
                cg_tol: float("cg_tol")?,
                cg_max_iter: num("cg_max_iter")?,
                seed: get("seed")?.parse().map_err(|_| corrupt("bad seed"))?,
            };
            let trace_len = num("trace")?;
            let f_mat = reader.matrix(n, k)?;
            let x_mat = reader.matrix(k, t)?;
            let w = reader.matrix(k, lag_set.len())?;
            let mut fit_trace = Vec::with_capacity(trace_len);
            for _ in 0..trace_len {
                let sweep = reader.u64()? as usize;
                fit_trace.push((sweep, reader.f64()?));
            }
            let m = TrmfModel {
                f_mat,
                x_mat,
                ar: ARWeights::new(lag_set, w)?,
                hyper,
                fit_trace,
            };
            if kind == "trmf" {
                SavedModel::Trmf(m)
            } else {
                SavedModel::Baseline(BaselineModel::Tcf(m))
            }
        }
        "mean" => SavedModel::Baseline(BaselineModel::Mean {
            n: num("n")?,
            t_count: num("t")?,
            mean: reader.f64()?,
        }),
        "ar1" => {
            let n = num("n")?;
            let transition = reader.matrix(n, n)?;
            let last = reader.matrix(1, n)?.into_vec();
            SavedModel::Baseline(BaselineModel::Ar1 { transition, last })
        }
        "svd_ar1" => {
            let (n, k, t) = (num("n")?, num("k")?, num("t")?);
            SavedModel::Baseline(BaselineModel::SvdAr1 {
                f_mat: reader.matrix(n, k)?,
                x_mat: reader.matrix(k, t)?,
                transition: reader.matrix(k, k)?,
            })
        }
        other => return Err(corrupt(&format!("unknown kind {other:?}"))),
    };
    if reader.pos != reader.bytes.len() {
        return Err(corrupt("trailing bytes after data blocks"));
    }
    Ok(model)
}

struct BlockReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl BlockReader<'_> {
    fn take8(&mut self) -> Result<[u8; 8]> {
        let chunk = self
            .bytes
            .get(self.pos..self.pos + 8)
            .ok_or_else(|| Error::CorruptFile("data block truncated".into()))?;
        self.pos += 8;
        Ok(chunk.try_into().expect("8 bytes"))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take8()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take8()?))
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<DenseMatrix> {
        let vals = (0..rows * cols).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        DenseMatrix::from_vec(rows, cols, vals).map_err(|e| Error::CorruptFile(e.to_string()))
    }
}
