use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::InputSource;
use crate::classifier::{ClassIndex, Classifier};
use crate::error::{Error, Result};
use crate::noise::{derive_seed_list, sample_noise, split_seed, NoiseSpec};

/// Inputs with ids and reference labels, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSet {
    dim: usize,
    data: Vec<f64>,
    labels: Vec<ClassIndex>,
}

#[derive(Serialize, Deserialize)]
struct RawHeader {
    count: usize,
    dim: usize,
    #[serde(default)]
    labels: bool,
}

impl InputSet {
    pub fn new(dim: usize, data: Vec<f64>, labels: Vec<ClassIndex>) -> Result<Self> {
        if dim == 0 || data.len() != dim * labels.len() {
            return Err(Error::domain(format!(
                "{} values do not form {} vectors of dimension {dim}",
                data.len(),
                labels.len()
            )));
        }
        Ok(Self { dim, data, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> ClassIndex {
        self.labels[i]
    }

    pub fn id(&self, i: usize) -> String {
        format!("x{i:06}")
    }

    pub fn from_source(source: &InputSource, reference: &Classifier, sigma: f64) -> Result<Self> {
        match source {
            InputSource::Random {
                count,
                dim,
                first,
                spread,
                seed,
                label,
            } => {
                if *count == 0 {
                    return Err(Error::Config("input set is empty".into()));
                }
                let spec = NoiseSpec::new(*spread, *dim)?;
                let seeds = derive_seed_list(split_seed(*seed, 0x1_0000), *count)?;
                let mut data = Vec::with_capacity(count * dim);
                for &s in seeds.as_slice() {
                    let mut v = sample_noise(&spec, s)?;
                    if let Some(f) = first {
                        v[0] = *f;
                    }
                    data.extend(v);
                }
                Self::labelled(*dim, data, *label, reference, sigma)
            }
            InputSource::Grid {
                start,
                stop,
                count,
                dim,
            } => {
                if *count == 0 || *dim == 0 {
                    return Err(Error::Config("grid needs count >= 1 and dim >= 1".into()));
                }
                let mut data = vec![0.0; count * dim];
                for i in 0..*count {
                    let t = if *count == 1 { 0.0 } else { i as f64 / (*count - 1) as f64 };
                    data[i * dim] = start + t * (stop - start);
                }
                Self::labelled(*dim, data, None, reference, sigma)
            }
            InputSource::File { path } => {
                let (set, has_labels) = Self::read_raw(path)?;
                if has_labels {
                    Ok(set)
                } else {
                    Self::labelled(set.dim, set.data, None, reference, sigma)
                }
            }
        }
    }

    /// Labels from the fixed value, or from the exact smoothed prediction of
    /// the reference classifier.
    fn labelled(
        dim: usize,
        data: Vec<f64>,
        label: Option<ClassIndex>,
        reference: &Classifier,
        sigma: f64,
    ) -> Result<Self> {
        let labels = match label {
            Some(l) => vec![l; data.len() / dim],
            None => data
                .chunks_exact(dim)
                .map(|x| reference.exact_smoothed_prediction(x, sigma))
                .collect::<Result<_>>()
                .map_err(|e| {
                    Error::Config(format!("inputs carry no labels and none can be derived: {e}"))
                })?,
        };
        Self::new(dim, data, labels)
    }

    /// Reads a raw input file: one JSON line `{"count":N,"dim":M,"labels":B}`,
    /// then N·M little-endian f32, then N little-endian u16 labels if B.
    /// Returns the set and whether labels were present (zeros otherwise).
    pub fn read_raw(path: &Path) -> Result<(Self, bool)> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = BufReader::new(file);
        let mut line = String::new();
        reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
        let header: RawHeader = serde_json::from_str(line.trim_end())
            .map_err(|e| Error::Config(format!("bad input header in {}: {e}", path.display())))?;
        let mut buf = vec![0u8; header.count * header.dim * 4];
        reader.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
        let data = buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        let labels = if header.labels {
            let mut lb = vec![0u8; header.count * 2];
            reader.read_exact(&mut lb).map_err(|e| Error::io(path, e))?;
            lb.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect()
        } else {
            vec![0; header.count]
        };
        Ok((Self::new(header.dim, data, labels)?, header.labels))
    }

    pub fn write_raw(&self, path: &Path) -> Result<()> {
        let mut out = serde_json::to_vec(&RawHeader {
            count: self.len(),
            dim: self.dim,
            labels: true,
        })
        .expect("header serializes");
        out.push(b'\n');
        for v in &self.data {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        for l in &self.labels {
            out.extend_from_slice(&l.to_le_bytes());
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(&out))
            .map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_labels_follow_smoothed_prediction() {
        let f = Classifier::threshold(0.0, 2).unwrap();
        let set = InputSet::from_source(
            &InputSource::Grid {
                start: -1.0,
                stop: 1.0,
                count: 5,
                dim: 2,
            },
            &f,
            0.5,
        )
        .unwrap();
        assert_eq!(set.len(), 5);
        assert_eq!(set.vector(4), &[1.0, 0.0]);
        assert_eq!((0..5).map(|i| set.label(i)).collect::<Vec<_>>(), vec![0, 0, 0, 1, 1]);
    }

    #[test]
    fn raw_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inputs.bin");
        let set = InputSet::new(3, vec![0.5, -1.25, 2.0, 4.0, 0.0, -0.75], vec![1, 0]).unwrap();
        set.write_raw(&path).unwrap();
        let (back, labelled) = InputSet::read_raw(&path).unwrap();
        assert!(labelled);
        assert_eq!(back, set);
    }
}
