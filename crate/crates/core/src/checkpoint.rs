//! Versioned binary checkpoint format.
//!
//! Layout (all integers little-endian): magic `PLCK`, format version u32,
//! then epoch u32, learning rate f64, best dev perplexity f64 (NaN when
//! absent), seed u64, vocabulary hash u64, the model configuration
//! (six u32 dims plus an ablation bitfield), and the named tensors: count
//! u32, then per slot a length-prefixed UTF-8 name, rank u32, dims u32 each,
//! and the values as f64 bits. Values round-trip bit-identically.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::model::{AblationFlags, ModelConfig};
use crate::params::ParameterStore;
use crate::tensor::{Real, Tensor};

const MAGIC: &[u8; 4] = b"PLCK";
const VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub epoch: u32,
    pub learning_rate: Real,
    /// Best development perplexity seen so far, if any.
    pub dev_perplexity: Option<Real>,
    pub seed: u64,
    /// Hash of the vocabulary files the model was trained with.
    pub vocab_hash: u64,
    pub config: ModelConfig,
    pub store: ParameterStore,
}

/// FNV-1a over arbitrary bytes; used to detect vocabulary drift between
/// preprocessing and decoding.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u32(&mut self, x: u32) {
        self.buf.extend_from_slice(&x.to_le_bytes());
    }
    fn u64(&mut self, x: u64) {
        self.buf.extend_from_slice(&x.to_le_bytes());
    }
    fn f64(&mut self, x: f64) {
        self.buf.extend_from_slice(&x.to_bits().to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(CoreError::Checkpoint("unexpected end of data".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }
    fn str(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| CoreError::Checkpoint("slot name is not UTF-8".into()))
    }
}

// The `as f64` casts are identity in the default build but required when
// `Real` is f32.
#[allow(clippy::unnecessary_cast)]
impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer { buf: Vec::new() };
        w.buf.extend_from_slice(MAGIC);
        w.u32(VERSION);
        w.u32(self.epoch);
        w.f64(self.learning_rate as f64);
        w.f64(self.dev_perplexity.map(|x| x as f64).unwrap_or(f64::NAN));
        w.u64(self.seed);
        w.u64(self.vocab_hash);
        for dim in [
            self.config.src_vocab,
            self.config.tgt_vocab,
            self.config.num_labels,
            self.config.word_dim,
            self.config.action_dim,
            self.config.hidden_dim,
        ] {
            w.u32(dim as u32);
        }
        let flags = (self.config.ablation.without_buffer as u32)
            | ((self.config.ablation.without_action as u32) << 1)
            | ((self.config.ablation.without_stack as u32) << 2);
        w.u32(flags);

        w.u32(self.store.len() as u32);
        for id in self.store.ids() {
            w.str(self.store.name(id));
            let t = self.store.value(id);
            w.u32(t.shape().len() as u32);
            for &d in t.shape() {
                w.u32(d as u32);
            }
            for &x in t.data() {
                w.f64(x as f64);
            }
        }
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(CoreError::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(CoreError::Checkpoint(alloc::format!(
                "unsupported format version {version}"
            )));
        }
        let epoch = r.u32()?;
        let learning_rate = r.f64()? as Real;
        let ppl = r.f64()?;
        let dev_perplexity = if ppl.is_nan() {
            None
        } else {
            Some(ppl as Real)
        };
        let seed = r.u64()?;
        let vocab_hash = r.u64()?;
        let src_vocab = r.u32()? as usize;
        let tgt_vocab = r.u32()? as usize;
        let num_labels = r.u32()? as usize;
        let word_dim = r.u32()? as usize;
        let action_dim = r.u32()? as usize;
        let hidden_dim = r.u32()? as usize;
        let flags = r.u32()?;
        let config = ModelConfig {
            src_vocab,
            tgt_vocab,
            num_labels,
            word_dim,
            action_dim,
            hidden_dim,
            ablation: AblationFlags {
                without_buffer: flags & 1 != 0,
                without_action: flags & 2 != 0,
                without_stack: flags & 4 != 0,
            },
        };

        let slots = r.u32()? as usize;
        let mut store = ParameterStore::new();
        for _ in 0..slots {
            let name = r.str()?;
            let rank = r.u32()? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u32()? as usize);
            }
            let len: usize = shape.iter().product();
            let mut data = vec![0.0; len];
            for x in data.iter_mut() {
                *x = r.f64()? as Real;
            }
            store.add(&name, Tensor::from_vec(&shape, data)?)?;
        }
        if r.pos != bytes.len() {
            return Err(CoreError::Checkpoint("trailing bytes".into()));
        }
        Ok(Checkpoint {
            epoch,
            learning_rate,
            dev_perplexity,
            seed,
            vocab_hash,
            config,
            store,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Model;
    use crate::trainer::init_parameters;

    fn config() -> ModelConfig {
        ModelConfig {
            src_vocab: 5,
            tgt_vocab: 6,
            num_labels: 2,
            word_dim: 3,
            action_dim: 2,
            hidden_dim: 4,
            ablation: AblationFlags {
                without_stack: true,
                ..Default::default()
            },
        }
    }

    #[test]
    fn roundtrip_is_bit_identical() {
        let (store, _) = init_parameters(config(), 123).unwrap();
        let ckpt = Checkpoint {
            epoch: 7,
            learning_rate: 0.25,
            dev_perplexity: Some(3.5),
            seed: 99,
            vocab_hash: fnv1a64(b"vocab"),
            config: config(),
            store,
        };
        let bytes = ckpt.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back.epoch, 7);
        assert_eq!(back.learning_rate, 0.25);
        assert_eq!(back.dev_perplexity, Some(3.5));
        assert_eq!(back.seed, 99);
        assert_eq!(back.vocab_hash, ckpt.vocab_hash);
        assert_eq!(back.config, config());
        for (a, b) in ckpt.store.ids().zip(back.store.ids()) {
            assert_eq!(ckpt.store.name(a), back.store.name(b));
            assert_eq!(ckpt.store.value(a), back.store.value(b));
        }
        // Re-serialization is byte-identical too.
        assert_eq!(bytes, back.to_bytes());
        // And the model binds to the reloaded store.
        Model::from_store(&back.store, back.config).unwrap();
    }

    #[test]
    fn corrupted_bytes_are_rejected() {
        let (store, _) = init_parameters(config(), 1).unwrap();
        let ckpt = Checkpoint {
            epoch: 0,
            learning_rate: 1.0,
            dev_perplexity: None,
            seed: 0,
            vocab_hash: 0,
            config: config(),
            store,
        };
        let mut bytes = ckpt.to_bytes();
        bytes[0] = b'X';
        assert!(Checkpoint::from_bytes(&bytes).is_err());
        let bytes = ckpt.to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
    }

    #[test]
    fn fnv_is_stable() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_ne!(fnv1a64(b"a"), fnv1a64(b"b"));
    }
}
