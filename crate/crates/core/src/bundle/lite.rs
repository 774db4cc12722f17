//! `.kosm` binary codec.
//!
//! ```text
//! "KOSM"  u32 version
//! section* : u32 byte length, payload        (in this order)
//!   header          u64 created_unix, u64 seed, f64 train_mae, f64 val_mae, str arch
//!   schema          u32 n, n x (str name, u8 kind)        kind: 0 categorical, 1 numeric
//!   vocabularies    u32 n, n x (str column, u32 k, k x str), u32 m, m x (u32 kota, u32 area)
//!   normalization   u32 n, u64 count, n x f64 mean, n x f64 variance
//!   facilities      u32 n, n x str
//!   layers          u32 n, n x (u32 in, u32 out, u8 act, in*out x f32 weights, out x f32 bias)
//! u32 checksum      CRC-32 (IEEE) of every preceding byte, no length prefix
//! ```
//!
//! Integers and floats are little-endian; `str` is a u32 length followed by
//! UTF-8 bytes; activation 0 is ReLU and 1 is linear. Weights are row-major
//! `in x out` and narrowed to 32 bits.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use super::{Metadata, ModelBundle};
use crate::encoding::{
    Column, ColumnKind, ColumnSchema, FeatureEncoder, NormalizationStats, Vocabulary,
};
use crate::matrix::Matrix;
use crate::neuralnet::{Activation, DenseLayer, MlpModel};

pub const MAGIC: [u8; 4] = *b"KOSM";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LiteError {
    #[error("not a kosm file (bad magic)")]
    BadMagic,
    #[error("unsupported kosm format version {0} (supported: {FORMAT_VERSION})")]
    UnsupportedVersion(u32),
    #[error("truncated {section} section")]
    Truncated { section: &'static str },
    #[error("corrupt {section} section: {reason}")]
    Corrupt {
        section: &'static str,
        reason: String,
    },
    #[error("checksum mismatch (stored {stored:08x}, computed {computed:08x})")]
    Checksum { stored: u32, computed: u32 },
}

const SECTIONS: [&str; 6] = [
    "header",
    "schema",
    "vocabularies",
    "normalization",
    "facilities",
    "layers",
];

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn len(&mut self, v: usize) {
        self.u32(u32::try_from(v).expect("length fits in u32"));
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f32(&mut self, v: f64) {
        self.buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.len(s.len());
        self.buf.extend_from_slice(s.as_bytes());
    }
    fn section(&mut self, body: Writer) {
        self.len(body.buf.len());
        self.buf.extend_from_slice(&body.buf);
    }
}

pub fn encode(bundle: &ModelBundle) -> Vec<u8> {
    let mut out = Writer::default();
    out.buf.extend_from_slice(&MAGIC);
    out.u32(FORMAT_VERSION);

    let m = &bundle.metadata;
    let mut w = Writer::default();
    w.u64(m.created_unix);
    w.u64(m.training_seed);
    w.f64(m.train_mae);
    w.f64(m.val_mae);
    w.str(&m.arch_summary);
    out.section(w);

    let enc = &bundle.encoder;
    let mut w = Writer::default();
    w.len(enc.schema.columns.len());
    for c in &enc.schema.columns {
        w.str(&c.name);
        w.u8(match c.kind {
            ColumnKind::Categorical => 0,
            ColumnKind::Numeric => 1,
        });
    }
    out.section(w);

    let mut w = Writer::default();
    let vocabs = enc.vocabularies();
    w.len(vocabs.len());
    for (name, vocab) in vocabs {
        w.str(name);
        w.len(vocab.len());
        for t in vocab.tokens() {
            w.str(t);
        }
    }
    w.len(enc.area_cities.len());
    for &(k, a) in &enc.area_cities {
        w.u32(k);
        w.u32(a);
    }
    out.section(w);

    let mut w = Writer::default();
    w.len(enc.norm.means.len());
    w.u64(enc.norm.count);
    enc.norm.means.iter().for_each(|&v| w.f64(v));
    enc.norm.variances.iter().for_each(|&v| w.f64(v));
    out.section(w);

    let mut w = Writer::default();
    w.len(bundle.facility_catalog.len());
    for f in &bundle.facility_catalog {
        w.str(f);
    }
    out.section(w);

    let mut w = Writer::default();
    w.len(bundle.model.layers.len());
    for l in &bundle.model.layers {
        w.len(l.in_dim());
        w.len(l.out_dim());
        w.u8(match l.activation {
            Activation::Relu => 0,
            Activation::Linear => 1,
        });
        l.weights.as_slice().iter().for_each(|&v| w.f32(v));
        l.bias.iter().for_each(|&v| w.f32(v));
    }
    out.section(w);
    let crc = crc32fast::hash(&out.buf);
    out.u32(crc);
    out.buf
}

struct Reader<'a> {
    buf: &'a [u8],
    section: &'static str,
}

impl<'a> Reader<'a> {
    fn corrupt(&self, reason: impl Into<String>) -> LiteError {
        LiteError::Corrupt {
            section: self.section,
            reason: reason.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], LiteError> {
        if self.buf.len() < n {
            return Err(self.corrupt(format!("needs {n} more bytes, {} left", self.buf.len())));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], LiteError> {
        Ok(self.take(N)?.try_into().expect("exact length"))
    }

    fn u8(&mut self) -> Result<u8, LiteError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, LiteError> {
        self.array().map(u32::from_le_bytes)
    }
    fn u64(&mut self) -> Result<u64, LiteError> {
        self.array().map(u64::from_le_bytes)
    }
    fn f64(&mut self) -> Result<f64, LiteError> {
        self.array().map(f64::from_le_bytes)
    }
    fn f32(&mut self) -> Result<f64, LiteError> {
        self.array().map(|b| f64::from(f32::from_le_bytes(b)))
    }

    /// A count whose items need at least `min_item` bytes each, checked
    /// against what is left so corrupt counts cannot force huge allocations.
    fn count(&mut self, min_item: usize) -> Result<usize, LiteError> {
        let n = self.u32()? as usize;
        if n.saturating_mul(min_item) > self.buf.len() {
            return Err(self.corrupt(format!("count {n} exceeds remaining bytes")));
        }
        Ok(n)
    }

    fn str(&mut self) -> Result<String, LiteError> {
        let n = self.count(1)?;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| self.corrupt("invalid UTF-8"))
    }

    fn strings(&mut self) -> Result<Vec<String>, LiteError> {
        let n = self.count(4)?;
        (0..n).map(|_| self.str()).collect()
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, LiteError> {
        (0..n).map(|_| self.f64()).collect()
    }

    fn finish(self) -> Result<(), LiteError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(self.corrupt(format!("{} unexpected trailing bytes", self.buf.len())))
        }
    }
}

/// Splits the next length-prefixed section off `rest`.
fn next_section<'a>(rest: &mut &'a [u8], section: &'static str) -> Result<Reader<'a>, LiteError> {
    let truncated = LiteError::Truncated { section };
    if rest.len() < 4 {
        return Err(truncated);
    }
    let (len, tail) = rest.split_at(4);
    let len = u32::from_le_bytes(len.try_into().expect("4 bytes")) as usize;
    if tail.len() < len {
        return Err(truncated);
    }
    let (body, tail) = tail.split_at(len);
    *rest = tail;
    Ok(Reader { buf: body, section })
}

pub fn decode(bytes: &[u8]) -> Result<ModelBundle, LiteError> {
    if bytes.len() < 4 {
        return Err(LiteError::Truncated { section: "magic" });
    }
    if bytes[..4] != MAGIC {
        return Err(LiteError::BadMagic);
    }
    if bytes.len() < 8 {
        return Err(LiteError::Truncated { section: "version" });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(LiteError::UnsupportedVersion(version));
    }
    let mut rest = &bytes[8..];
    let [s_header, s_schema, s_vocab, s_norm, s_fac, s_layers] = SECTIONS;

    let mut r = next_section(&mut rest, s_header)?;
    let created_unix = r.u64()?;
    let training_seed = r.u64()?;
    let train_mae = r.f64()?;
    let val_mae = r.f64()?;
    let arch_summary = r.str()?;
    r.finish()?;
    let metadata = Metadata {
        format_version: version,
        created_unix,
        training_seed,
        arch_summary,
        train_mae,
        val_mae,
    };

    let mut r = next_section(&mut rest, s_schema)?;
    let n = r.count(5)?;
    let mut columns = Vec::with_capacity(n);
    for _ in 0..n {
        let name = r.str()?;
        let kind = match r.u8()? {
            0 => ColumnKind::Categorical,
            1 => ColumnKind::Numeric,
            k => return Err(r.corrupt(format!("unknown column kind {k}"))),
        };
        columns.push(Column { name, kind });
    }
    let schema = ColumnSchema { columns };
    schema.validate().map_err(|e| r.corrupt(format!("{e}")))?;
    r.finish()?;

    let mut r = next_section(&mut rest, s_vocab)?;
    let n = r.count(8)?;
    let expected = ["kota", "type_kos", "area"];
    if n != expected.len() {
        return Err(r.corrupt(format!("expected 3 vocabularies, found {n}")));
    }
    let mut vocabs = Vec::with_capacity(3);
    for want in expected {
        let name = r.str()?;
        if name != want {
            return Err(r.corrupt(format!("expected vocabulary {want:?}, found {name:?}")));
        }
        let tokens = r.strings()?;
        vocabs.push(Vocabulary::from_tokens(tokens).map_err(|e| r.corrupt(format!("{e}")))?);
    }
    let n_pairs = r.count(8)?;
    let mut area_cities = Vec::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        let (k, a) = (r.u32()?, r.u32()?);
        if k == 0 || k as usize > vocabs[0].len() || a == 0 || a as usize > vocabs[2].len() {
            return Err(r.corrupt(format!("area/city pair ({k}, {a}) out of range")));
        }
        area_cities.push((k, a));
    }
    r.finish()?;
    let area = vocabs.pop().expect("3 vocabularies");
    let type_kos = vocabs.pop().expect("3 vocabularies");
    let kota = vocabs.pop().expect("3 vocabularies");

    let mut r = next_section(&mut rest, s_norm)?;
    let n = r.u32()? as usize;
    if n != schema.columns.len() {
        return Err(r.corrupt(format!(
            "expected {} features, found {n}",
            schema.columns.len()
        )));
    }
    let count = r.u64()?;
    let means = r.f64s(n)?;
    let variances = r.f64s(n)?;
    if variances.iter().any(|v| v.is_nan() || *v < 0.0) {
        return Err(r.corrupt("negative or NaN variance"));
    }
    r.finish()?;
    let norm = NormalizationStats {
        means,
        variances,
        count,
    };

    let mut r = next_section(&mut rest, s_fac)?;
    let facility_catalog = r.strings()?;
    r.finish()?;

    let mut r = next_section(&mut rest, s_layers)?;
    let n = r.count(13)?;
    let mut layers = Vec::with_capacity(n);
    for _ in 0..n {
        let in_dim = r.u32()? as usize;
        let out_dim = r.u32()? as usize;
        let activation = match r.u8()? {
            0 => Activation::Relu,
            1 => Activation::Linear,
            a => return Err(r.corrupt(format!("unknown activation {a}"))),
        };
        let n_weights = in_dim
            .checked_mul(out_dim)
            .filter(|&w| w.saturating_add(out_dim).saturating_mul(4) <= r.buf.len())
            .ok_or_else(|| {
                r.corrupt(format!("layer {in_dim}x{out_dim} exceeds remaining bytes"))
            })?;
        let weights = (0..n_weights)
            .map(|_| r.f32())
            .collect::<Result<Vec<_>, _>>()?;
        let bias = (0..out_dim)
            .map(|_| r.f32())
            .collect::<Result<Vec<_>, _>>()?;
        let weights = Matrix::from_vec(in_dim, out_dim, weights).expect("sized buffer");
        layers.push(DenseLayer {
            weights,
            bias,
            activation,
        });
    }
    r.finish()?;
    let model = MlpModel::from_layers(layers).map_err(|e| r_corrupt(s_layers, e))?;

    if rest.len() < 4 {
        return Err(LiteError::Truncated {
            section: "checksum",
        });
    }
    if rest.len() > 4 {
        return Err(LiteError::Corrupt {
            section: "trailer",
            reason: format!("{} bytes after the checksum", rest.len() - 4),
        });
    }
    let body_len = bytes.len() - 4;
    let stored = u32::from_le_bytes(rest.try_into().expect("4 bytes"));
    let computed = crc32fast::hash(&bytes[..body_len]);
    if stored != computed {
        return Err(LiteError::Checksum { stored, computed });
    }

    let encoder = FeatureEncoder {
        schema,
        kota,
        type_kos,
        area,
        area_cities,
        norm,
    };
    ModelBundle::new(encoder, model, metadata, facility_catalog).map_err(|e| r_corrupt(s_layers, e))
}

fn r_corrupt(section: &'static str, e: impl core::fmt::Display) -> LiteError {
    LiteError::Corrupt {
        section,
        reason: format!("{e}"),
    }
}
