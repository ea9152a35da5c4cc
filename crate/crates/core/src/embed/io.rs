//! Binary model file.
//!
//! ```text
//! "CCTV"                      magic
//! u16                         format version
//! u32 dim, u32 epochs, u32 negative_samples, f64 learning_rate,
//! u64 seed, u32 infer_epochs  config block
//! u32 len, bytes              OOV symbol
//! [u8; 16]                    vocabulary fingerprint
//! u32 n                       term count
//! n x (u32 len, bytes, u64)   term table (text, corpus count)
//! n x dim x f32               output vectors
//! [u8; 32]                    SHA-256 of everything above
//! ```
//!
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{EmbedConfig, EmbeddingModel};
use crate::error::EmbedError;

pub const MAGIC: &[u8; 4] = b"CCTV";
pub const FORMAT_VERSION: u16 = 1;
const CHECKSUM_LEN: usize = 32;

impl EmbeddingModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let cfg = &self.config;
        let mut out = Vec::with_capacity(64 + self.output.len() * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        put_u32(&mut out, cfg.dim);
        put_u32(&mut out, cfg.epochs);
        put_u32(&mut out, cfg.negative_samples);
        out.extend_from_slice(&cfg.learning_rate.to_le_bytes());
        out.extend_from_slice(&cfg.seed.to_le_bytes());
        put_u32(&mut out, cfg.infer_epochs);
        put_str(&mut out, &self.oov_symbol);
        out.extend_from_slice(&self.vocab_ref);
        put_u32(&mut out, self.terms.len());
        for (term, count) in self.terms.iter().zip(&self.counts) {
            put_str(&mut out, term);
            out.extend_from_slice(&count.to_le_bytes());
        }
        for x in &self.output {
            out.extend_from_slice(&x.to_le_bytes());
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EmbedError> {
        if bytes.len() < 6 || &bytes[..4] != MAGIC {
            return Err(EmbedError::BadMagic);
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != FORMAT_VERSION {
            return Err(EmbedError::VersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        if bytes.len() < 6 + CHECKSUM_LEN {
            return Err(EmbedError::CorruptFile("file is truncated".into()));
        }
        let (body, checksum) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
        if Sha256::digest(body).as_slice() != checksum {
            return Err(EmbedError::CorruptFile("checksum mismatch".into()));
        }

        let mut r = Reader { buf: body, pos: 6 };
        let config = EmbedConfig {
            dim: r.u32()? as usize,
            epochs: r.u32()? as usize,
            negative_samples: r.u32()? as usize,
            learning_rate: f64::from_le_bytes(r.array()?),
            seed: u64::from_le_bytes(r.array()?),
            infer_epochs: r.u32()? as usize,
        };
        config
            .validate()
            .map_err(|e| EmbedError::CorruptFile(e.to_string()))?;
        let oov_symbol = r.string()?;
        let vocab_ref: [u8; 16] = r.array()?;
        let n = r.u32()? as usize;
        let mut terms = Vec::with_capacity(n.min(body.len()));
        let mut counts = Vec::with_capacity(n.min(body.len()));
        for _ in 0..n {
            terms.push(r.string()?);
            counts.push(u64::from_le_bytes(r.array()?));
        }
        let len = n
            .checked_mul(config.dim)
            .ok_or_else(|| EmbedError::CorruptFile("vector block too large".into()))?;
        let mut output = Vec::with_capacity(len.min(body.len() / 4));
        for _ in 0..len {
            output.push(f32::from_le_bytes(r.array()?));
        }
        if r.pos != body.len() {
            return Err(EmbedError::CorruptFile("trailing bytes".into()));
        }
        if n < 2 || counts.iter().all(|&c| c == 0) {
            return Err(EmbedError::CorruptFile("term table is degenerate".into()));
        }
        if output.iter().any(|x| !x.is_finite()) {
            return Err(EmbedError::CorruptFile("non-finite vector component".into()));
        }
        Ok(EmbeddingModel::from_parts(
            config, oov_symbol, vocab_ref, terms, counts, output,
        ))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), EmbedError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EmbedError> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    let v = u32::try_from(v).expect("value fits the u32 file field");
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], EmbedError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| EmbedError::CorruptFile("unexpected end of data".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], EmbedError> {
        Ok(self.take(N)?.try_into().expect("take returns N bytes"))
    }

    fn u32(&mut self) -> Result<u32, EmbedError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn string(&mut self) -> Result<String, EmbedError> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| EmbedError::CorruptFile("term is not UTF-8".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::TokenSequence;
    use crate::embed::train;

    fn model() -> EmbeddingModel {
        let seq = |items: &[&str]| {
            TokenSequence::new(items.iter().map(|s| s.to_string()).collect()).unwrap()
        };
        let corpus = vec![seq(&["a", "b", "c"]), seq(&["c", "d"]), seq(&["a", "d", "d"])];
        let cfg = EmbedConfig {
            dim: 6,
            epochs: 3,
            infer_epochs: 5,
            seed: 11,
            ..EmbedConfig::default()
        };
        train(&corpus, &cfg, None).unwrap()
    }

    #[test]
    fn round_trip_preserves_inference() {
        let m = model();
        let back = EmbeddingModel::from_bytes(&m.to_bytes()).unwrap();
        assert_eq!(back, m);
        let probe = TokenSequence::new(vec!["a".into(), "d".into()]).unwrap();
        assert_eq!(back.infer(&probe), m.infer(&probe));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.cct");
        let m = model();
        m.save(&path).unwrap();
        assert_eq!(EmbeddingModel::load(&path).unwrap(), m);
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let bytes = model().to_bytes();
        for cut in [bytes.len() - 1, bytes.len() / 2, 10] {
            assert!(matches!(
                EmbeddingModel::from_bytes(&bytes[..cut]),
                Err(EmbedError::CorruptFile(_))
            ));
        }
    }

    #[test]
    fn flipped_byte_is_corrupt() {
        let mut bytes = model().to_bytes();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        assert!(matches!(
            EmbeddingModel::from_bytes(&bytes),
            Err(EmbedError::CorruptFile(_))
        ));
    }

    #[test]
    fn bumped_version_is_rejected() {
        let mut bytes = model().to_bytes();
        bytes[4] = bytes[4].wrapping_add(1);
        assert!(matches!(
            EmbeddingModel::from_bytes(&bytes),
            Err(EmbedError::VersionMismatch { found: 2, expected: 1 })
        ));
    }

    #[test]
    fn bad_magic() {
        assert!(matches!(
            EmbeddingModel::from_bytes(b"NOPE\x01\x00"),
            Err(EmbedError::BadMagic)
        ));
    }
}
