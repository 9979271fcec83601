//! Text checkpoint format, version 1.
//!
//! ```text
//! superconv-checkpoint 1
//! seed <u64>
//! layers <count>
//! dense <inputs> <outputs> | relu | batchnorm <dim> <maf> | dropout <ratio>   (one per line)
//! dropout-rng <word position>
//! params <count>
//! <one value per line, flat layout order>
//! running <batchnorm layer count>
//! mean <dim values>
//! var <dim values>                                           (pair per batchnorm layer)
//! ```
//!
//! Values are written in Rust's shortest round-trip float form, so a
//! reload reproduces every bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{LayerSpec, Model, ModelSpec};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &str = "superconv-checkpoint";

pub fn write_checkpoint(model: &Model, path: &Path) -> Result<()> {
    let mut out = String::new();
    let spec = model.spec();
    writeln!(out, "{MAGIC} {CHECKPOINT_VERSION}").unwrap();
    writeln!(out, "seed {}", spec.seed).unwrap();
    writeln!(out, "layers {}", spec.layers.len()).unwrap();
    for layer in &spec.layers {
        match layer {
            LayerSpec::Dense { inputs, outputs } => writeln!(out, "dense {inputs} {outputs}"),
            LayerSpec::Relu => writeln!(out, "relu"),
            LayerSpec::Batchnorm { dim, maf } => writeln!(out, "batchnorm {dim} {maf:?}"),
            LayerSpec::Dropout { ratio } => writeln!(out, "dropout {ratio:?}"),
        }
        .unwrap();
    }
    writeln!(out, "dropout-rng {}", model.dropout_rng().get_word_pos()).unwrap();
    writeln!(out, "params {}", model.n_params()).unwrap();
    for p in model.params() {
        writeln!(out, "{p:?}").unwrap();
    }
    writeln!(out, "running {}", model.running_stats().len()).unwrap();
    for stats in model.running_stats() {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
        writeln!(out, "mean {}", join(&stats.mean)).unwrap();
        writeln!(out, "var {}", join(&stats.var)).unwrap();
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

struct Lines<'a> {
    path: &'a Path,
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Config {
            path: self.path.to_path_buf(),
            message: format!("line {}: {}", line + 1, msg.into()),
        }
    }

    fn next(&mut self) -> Result<(usize, Vec<&'a str>)> {
        match self.inner.next() {
            Some((i, l)) => Ok((i, l.split_whitespace().collect())),
            None => Err(Error::Config {
                path: self.path.to_path_buf(),
                message: "unexpected end of checkpoint".into(),
            }),
        }
    }

    fn keyed(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (i, words) = self.next()?;
        if words.first() != Some(&key) {
            return Err(self.err(i, format!("expected `{key}`")));
        }
        Ok((i, words[1..].to_vec()))
    }

    fn parse<T: std::str::FromStr>(&self, line: usize, word: Option<&&str>) -> Result<T> {
        word.and_then(|w| w.parse().ok()).ok_or_else(|| self.err(line, "malformed number"))
    }
}

pub fn read_checkpoint(path: &Path) -> Result<Model> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = Lines {
        path,
        inner: text.lines().enumerate(),
    };
    let (i, version) = lines.keyed(MAGIC)?;
    let version: u32 = lines.parse(i, version.first())?;
    if version != CHECKPOINT_VERSION {
        return Err(lines.err(i, format!("unsupported checkpoint version {version}")));
    }
    let (i, w) = lines.keyed("seed")?;
    let seed = lines.parse(i, w.first())?;
    let (i, w) = lines.keyed("layers")?;
    let n_layers: usize = lines.parse(i, w.first())?;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let (i, w) = lines.next()?;
        let layer = match w.first().copied() {
            Some("dense") => LayerSpec::Dense {
                inputs: lines.parse(i, w.get(1))?,
                outputs: lines.parse(i, w.get(2))?,
            },
            Some("relu") => LayerSpec::Relu,
            Some("batchnorm") => LayerSpec::Batchnorm {
                dim: lines.parse(i, w.get(1))?,
                maf: lines.parse(i, w.get(2))?,
            },
            Some("dropout") => LayerSpec::Dropout {
                ratio: lines.parse(i, w.get(1))?,
            },
            _ => return Err(lines.err(i, "unknown layer kind")),
        };
        layers.push(layer);
    }
    let mut model = Model::new(ModelSpec { layers, seed })?;
    let (i, w) = lines.keyed("dropout-rng")?;
    let pos: u128 = lines.parse(i, w.first())?;
    model.rng.set_word_pos(pos);
    let (i, w) = lines.keyed("params")?;
    let count: usize = lines.parse(i, w.first())?;
    if count != model.n_params() {
        return Err(lines.err(i, format!("{count} parameters for a model with {}", model.n_params())));
    }
    for k in 0..count {
        let (i, w) = lines.next()?;
        model.params[k] = lines.parse(i, w.first())?;
    }
    let (i, w) = lines.keyed("running")?;
    let count: usize = lines.parse(i, w.first())?;
    if count != model.running.len() {
        return Err(lines.err(i, "running-statistics count does not match batchnorm layers"));
    }
    for b in 0..count {
        for key in ["mean", "var"] {
            let (i, w) = lines.keyed(key)?;
            let dim = model.running[b].mean.len();
            if w.len() != dim {
                return Err(lines.err(i, format!("expected {dim} values")));
            }
            let vals = w.iter().map(|s| lines.parse(i, Some(s))).collect::<Result<Vec<f64>>>()?;
            if key == "mean" {
                model.running[b].mean = vals;
            } else {
                model.running[b].var = vals;
            }
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Mode;
    use ndarray::array;

    #[test]
    fn round_trip_preserves_everything() {
        let mut m = Model::new(ModelSpec::mlp(3, &[4], 2, Some(0.95), Some(0.25), 11)).unwrap();
        let x = array![[0.1, 0.2, 0.3], [1.0, -1.0, 0.5], [0.3, 0.3, 0.9]];
        let t = m.forward(x.view(), &[0, 1, 1], Mode::Train).unwrap();
        let g = m.backward(&t).unwrap();
        for (p, g) in m.params_mut().iter_mut().zip(g) {
            *p -= 0.1 * g;
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        write_checkpoint(&m, &path).unwrap();
        let mut back = read_checkpoint(&path).unwrap();
        assert_eq!(back.spec(), m.spec());
        assert_eq!(back.params(), m.params());
        assert_eq!(back.running_stats(), m.running_stats());
        // the dropout stream continues where it left off
        let a = m.forward(x.view(), &[0, 1, 1], Mode::Train).unwrap();
        let b = back.forward(x.view(), &[0, 1, 1], Mode::Train).unwrap();
        assert_eq!(a.loss().to_bits(), b.loss().to_bits());
    }

    #[test]
    fn rejects_bad_version_and_counts() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        fs::write(&path, "superconv-checkpoint 2\n").unwrap();
        assert!(matches!(read_checkpoint(&path), Err(Error::Config { .. })));
        let m = Model::new(ModelSpec::mlp(2, &[2], 2, None, None, 0)).unwrap();
        write_checkpoint(&m, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap().replace("params 12", "params 13");
        fs::write(&path, text).unwrap();
        assert!(read_checkpoint(&path).is_err());
    }
}
