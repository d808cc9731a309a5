//! Flat binary sample files.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic         8 bytes  "LCSAMP01"
//! version       u32      1
//! n             u64      number of samples
//! seq_len       u32      20
//! feat_dim      u32      10
//! aux_dim       u32      6
//! prov_len      u32      length of the provenance JSON that follows
//! provenance    prov_len bytes, UTF-8 JSON
//! features      n * seq_len * feat_dim f32, row-major per sample
//! aux           n * aux_dim f32 (T-Rear style statistics)
//! episode_id    n u32
//! action        n u8   (0 = LK, 1 = LC)
//! style         n u8   (0 aggressive, 1 normal, 2 conservative, 255 unassigned)
//! split         n u8   (0 train, 1 validation)
//! ```

use std::path::Path;

use super::samples::{Action, Sample, SampleSet, Split, Style, AUX_DIM, FEATURE_DIM, SEQ_LEN};
use crate::artifact::{read_bytes, write_bytes};
use crate::config::Provenance;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"LCSAMP01";
pub const VERSION: u32 = 1;
const NO_STYLE: u8 = 255;

pub fn encode_samples(set: &SampleSet, provenance: &Provenance) -> Result<Vec<u8>> {
    let prov = serde_json::to_vec(provenance)?;
    let n = set.len();
    let mut buf = Vec::with_capacity(48 + prov.len() + n * (SEQ_LEN * FEATURE_DIM * 4 + AUX_DIM * 4 + 7));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    for d in [SEQ_LEN, FEATURE_DIM, AUX_DIM, prov.len()] {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    buf.extend_from_slice(&prov);
    for s in &set.samples {
        if s.features.len() != SEQ_LEN * FEATURE_DIM {
            return Err(Error::shape(format!(
                "sample of episode {} has {} feature values, expected {}",
                s.episode_id,
                s.features.len(),
                SEQ_LEN * FEATURE_DIM
            )));
        }
        s.features.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
    }
    for s in &set.samples {
        s.aux.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
    }
    for s in &set.samples {
        buf.extend_from_slice(&s.episode_id.to_le_bytes());
    }
    buf.extend(set.samples.iter().map(|s| s.action.bit()));
    buf.extend(set.samples.iter().map(|s| s.style.map_or(NO_STYLE, |st| st.index() as u8)));
    buf.extend(set.samples.iter().map(|s| s.split as u8));
    Ok(buf)
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| Error::Data(format!("sample file truncated at byte {}", self.pos)))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        Ok(self
            .take(n.checked_mul(4).ok_or_else(|| Error::Data("sample count overflow".into()))?)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }
}

pub fn decode_samples(data: &[u8]) -> Result<(Provenance, SampleSet)> {
    let mut c = Cursor { data, pos: 0 };
    if c.take(8)? != MAGIC {
        return Err(Error::Data("not a lanecoop sample file (bad magic)".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::Data(format!("unsupported sample file version {version}")));
    }
    let n = c.u64()? as usize;
    let dims = (c.u32()? as usize, c.u32()? as usize, c.u32()? as usize);
    if dims != (SEQ_LEN, FEATURE_DIM, AUX_DIM) {
        return Err(Error::Data(format!(
            "sample dims {dims:?} differ from the expected ({SEQ_LEN}, {FEATURE_DIM}, {AUX_DIM})"
        )));
    }
    let prov_len = c.u32()? as usize;
    let provenance: Provenance = serde_json::from_slice(c.take(prov_len)?)?;
    let feats = c.f32s(n * SEQ_LEN * FEATURE_DIM)?;
    let aux = c.f32s(n * AUX_DIM)?;
    let ids: Vec<u32> = c
        .take(n * 4)?
        .chunks_exact(4)
        .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
        .collect();
    let actions = c.take(n)?;
    let styles = c.take(n)?;
    let splits = c.take(n)?;
    if c.pos != data.len() {
        return Err(Error::Data(format!("{} trailing bytes in sample file", data.len() - c.pos)));
    }
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let bad = |what: &str, v: u8| Error::Data(format!("sample {i}: invalid {what} byte {v}"));
        let action = Action::from_bit(actions[i]).ok_or_else(|| bad("action", actions[i]))?;
        let style = match styles[i] {
            NO_STYLE => None,
            b => Some(Style::from_index(b as usize).ok_or_else(|| bad("style", b))?),
        };
        let split = match splits[i] {
            0 => Split::Train,
            1 => Split::Val,
            b => return Err(bad("split", b)),
        };
        let f = &feats[i * SEQ_LEN * FEATURE_DIM..(i + 1) * SEQ_LEN * FEATURE_DIM];
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("sample {i}: non-finite feature")));
        }
        samples.push(Sample {
            episode_id: ids[i],
            features: f.to_vec(),
            aux: aux[i * AUX_DIM..(i + 1) * AUX_DIM].try_into().expect("aux width"),
            action,
            style,
            split,
        });
    }
    Ok((provenance, SampleSet { samples }))
}

pub fn write_samples(path: &Path, set: &SampleSet, provenance: &Provenance) -> Result<()> {
    write_bytes(path, &encode_samples(set, provenance)?)
}

pub fn read_samples(path: &Path) -> Result<(Provenance, SampleSet)> {
    decode_samples(&read_bytes(path)?).map_err(|e| match e {
        Error::Data(m) => Error::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;

    fn sample(id: u32, action: Action, style: Option<Style>) -> Sample {
        Sample {
            episode_id: id,
            features: (0..SEQ_LEN * FEATURE_DIM).map(|i| i as f32 * 0.5 - id as f32).collect(),
            aux: [1.0, 2.0, 3.0, 4.0, 5.0, id as f32],
            action,
            style,
            split: if id % 2 == 0 { Split::Train } else { Split::Val },
        }
    }

    #[test]
    fn round_trip() {
        let set = SampleSet {
            samples: vec![
                sample(1, Action::Lk, None),
                sample(2, Action::Lc, Some(Style::Conservative)),
            ],
        };
        let prov = Provenance::new(42, &Config::default());
        let bytes = encode_samples(&set, &prov).unwrap();
        let (p2, back) = decode_samples(&bytes).unwrap();
        assert_eq!(p2, prov);
        assert_eq!(back, set);
        assert_eq!(encode_samples(&back, &p2).unwrap(), bytes);
    }

    #[test]
    fn truncation_and_magic_are_data_errors() {
        let set = SampleSet {
            samples: vec![sample(1, Action::Lk, None)],
        };
        let bytes = encode_samples(&set, &Provenance::new(1, &Config::default())).unwrap();
        assert!(matches!(decode_samples(&bytes[..bytes.len() - 1]), Err(Error::Data(_))));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_samples(&bad), Err(Error::Data(_))));
    }
}
