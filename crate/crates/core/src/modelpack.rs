//! Int8 quantization and the `.toz` artifact format.
//!
//! Quantization is symmetric: weights share one scale `s_w = max|w|/127`
//! (1.0 when all weights are zero) and standardized inputs are clipped to
//! [`CLIP_SIGMA`] standard deviations, then quantized with the fixed scale
//! [`INPUT_SCALE`] = 4/127. The multiply-accumulate runs in 32-bit integers.
//!
//! Artifact layout, all little-endian:
//!
//! | offset | bytes | content                                  |
//! |--------|-------|------------------------------------------|
//! | 0      | 4     | magic `TOZ1`                             |
//! | 4      | 1     | version = 1                              |
//! | 5      | 1     | scheme: 0 = float32, 1 = int8 symmetric  |
//! | 6      | 1     | feature count d (1..=3)                  |
//! | 7      | 1     | reserved = 0                             |
//! | 8      | d     | role codes: 0 = co, 1 = temperature, 2 = pressure |
//! | 8+d    | 4d    | means, f32                               |
//! | 8+5d   | 4d    | stds, f32                                |
//! | ...    |       | scheme 0: weights 4d + bias 4            |
//! | ...    |       | scheme 1: q_weights d, zero pad to 4-byte alignment, s_w 4, bias 4 |
//! | tail   | 4     | CRC-32 (reflected, poly 0xEDB88320) of all preceding bytes |

use thiserror::Error;

use crate::datapipe::{FeatureRole, Scaler};
use crate::regress::LinearModel;

pub const MAGIC: [u8; 4] = *b"TOZ1";
pub const VERSION: u8 = 1;
/// Standardized inputs are clipped to this many standard deviations.
pub const CLIP_SIGMA: f64 = 4.0;
/// Fixed input scale: a clipped standardized input spans exactly 127 steps.
pub const INPUT_SCALE: f32 = 4.0 / 127.0;

const SCHEME_FLOAT: u8 = 0;
const SCHEME_INT8: u8 = 1;
const HEADER_LEN: usize = 8;
const TAIL_LEN: usize = 4;
pub const MAX_FEATURES: usize = 3;

#[derive(Debug, Error)]
pub enum PackError {
    #[error("BadMagic: artifact does not start with TOZ1")]
    BadMagic,
    #[error("UnsupportedVersion: {0}")]
    UnsupportedVersion(u8),
    #[error("ChecksumMismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("Truncated: need {needed} bytes, got {got}")]
    Truncated { needed: usize, got: usize },
    #[error("MalformedField: {0}")]
    MalformedField(String),
}

// --- Quantized models ---

/// An int8-symmetric model: quantized weights with one shared scale, plus
/// the f32 scaler and bias it needs for inference.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedModel {
    features: Vec<FeatureRole>,
    means: Vec<f32>,
    stds: Vec<f32>,
    q_weights: Vec<i8>,
    weight_scale: f32,
    bias: f32,
}

impl QuantizedModel {
    pub fn new(
        features: Vec<FeatureRole>,
        means: Vec<f32>,
        stds: Vec<f32>,
        q_weights: Vec<i8>,
        weight_scale: f32,
        bias: f32,
    ) -> Result<Self, PackError> {
        let d = features.len();
        if d == 0 || d > MAX_FEATURES {
            return Err(PackError::MalformedField(format!(
                "feature count {d} outside 1..={MAX_FEATURES}"
            )));
        }
        if means.len() != d || stds.len() != d || q_weights.len() != d {
            return Err(PackError::MalformedField(
                "mismatched field lengths".to_string(),
            ));
        }
        for (i, role) in features.iter().enumerate() {
            if !role.is_predictor() || features[..i].contains(role) {
                return Err(PackError::MalformedField(format!("bad role '{role}'")));
            }
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(PackError::MalformedField("non-finite mean".to_string()));
        }
        if stds.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(PackError::MalformedField(
                "stds must be finite and positive".to_string(),
            ));
        }
        if q_weights.iter().any(|&q| q == i8::MIN) {
            return Err(PackError::MalformedField(
                "quantized weight -128 outside symmetric range".to_string(),
            ));
        }
        if !(weight_scale.is_finite() && weight_scale > 0.0) {
            return Err(PackError::MalformedField(
                "weight scale must be finite and positive".to_string(),
            ));
        }
        if !bias.is_finite() {
            return Err(PackError::MalformedField("non-finite bias".to_string()));
        }
        Ok(Self {
            features,
            means,
            stds,
            q_weights,
            weight_scale,
            bias,
        })
    }

    pub fn features(&self) -> &[FeatureRole] {
        &self.features
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn means(&self) -> &[f32] {
        &self.means
    }

    pub fn stds(&self) -> &[f32] {
        &self.stds
    }

    pub fn q_weights(&self) -> &[i8] {
        &self.q_weights
    }

    pub fn weight_scale(&self) -> f32 {
        self.weight_scale
    }

    pub fn bias(&self) -> f32 {
        self.bias
    }

    /// The float model this quantized one represents: weights scaled back
    /// to f64, scaler and bias promoted.
    pub fn dequantize(&self) -> LinearModel {
        let weights = self
            .q_weights
            .iter()
            .map(|&q| self.weight_scale as f64 * q as f64)
            .collect();
        let scaler = Scaler::new(
            self.means.iter().map(|&v| v as f64).collect(),
            self.stds.iter().map(|&v| v as f64).collect(),
        )
        .expect("validated on construction");
        LinearModel::new(weights, self.bias as f64, scaler, self.features.clone())
            .expect("validated on construction")
    }

    /// Worst-case absolute deviation of the quantized path from the float
    /// model it was quantized from, for inputs within the clip range.
    ///
    /// Per feature the weight-rounding error contributes at most
    /// `(s_w/2) * CLIP_SIGMA` and the input-rounding error at most
    /// `|w_j| * s_in/2`; bounding the unknown `|w_j|` by the dequantized
    /// magnitude costs a further `s_w*s_in/4` each, the `d * s_w*s_in/4`
    /// term. An all-zero quantized vector can only come from an all-zero
    /// weight vector (any nonzero weight would quantize the maximum to
    /// +/-127), so the rounding terms vanish and only the slack remains.
    pub fn error_bound(&self) -> f64 {
        let s_w = self.weight_scale as f64;
        let s_in = INPUT_SCALE as f64;
        let d = self.q_weights.len() as f64;
        let slack = d * s_w * s_in / 4.0;
        if self.q_weights.iter().all(|&q| q == 0) {
            return slack;
        }
        let per_feature: f64 = self
            .q_weights
            .iter()
            .map(|&q| {
                let w_hat = s_w * (q as f64).abs();
                (s_w / 2.0) * CLIP_SIGMA + w_hat * s_in / 2.0
            })
            .sum();
        per_feature + slack
    }
}

/// Quantizes a float model to int8 symmetric weights.
///
/// `q_j = round_half_to_even(w_j / s_w)` saturated to [-127, 127] with
/// `s_w = max|w|/127`, or 1.0 for an all-zero weight vector. Scaler and
/// bias are narrowed to f32.
pub fn quantize(model: &LinearModel) -> QuantizedModel {
    let max_abs = model
        .weights()
        .iter()
        .fold(0.0f64, |acc, w| acc.max(w.abs()));
    let weight_scale = if max_abs == 0.0 {
        1.0f32
    } else {
        (max_abs / 127.0) as f32
    };
    let q_weights: Vec<i8> = model
        .weights()
        .iter()
        .map(|w| (w / weight_scale as f64).round_ties_even().clamp(-127.0, 127.0) as i8)
        .collect();
    // f32 narrowing must not collapse a positive std to zero
    let stds = model
        .scaler()
        .stds()
        .iter()
        .map(|&s| (s as f32).max(f32::MIN_POSITIVE))
        .collect();
    QuantizedModel {
        features: model.features().to_vec(),
        means: model.scaler().means().iter().map(|&m| m as f32).collect(),
        stds,
        q_weights,
        weight_scale,
        bias: model.bias() as f32,
    }
}

// --- Serialization ---

/// Either model kind, as stored in an artifact.
#[derive(Debug, Clone, PartialEq)]
pub enum PackedModel {
    Float(LinearModel),
    Quantized(QuantizedModel),
}

impl PackedModel {
    pub fn features(&self) -> &[FeatureRole] {
        match self {
            PackedModel::Float(m) => m.features(),
            PackedModel::Quantized(q) => q.features(),
        }
    }

    pub fn n_features(&self) -> usize {
        self.features().len()
    }

    pub fn scheme_name(&self) -> &'static str {
        match self {
            PackedModel::Float(_) => "float32",
            PackedModel::Quantized(_) => "int8",
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        match self {
            PackedModel::Float(m) => serialize_float(m),
            PackedModel::Quantized(q) => serialize_quantized(q),
        }
    }
}

fn push_header(out: &mut Vec<u8>, scheme: u8, features: &[FeatureRole]) {
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(scheme);
    out.push(features.len() as u8);
    out.push(0);
    out.extend(features.iter().map(|r| r.code()));
}

fn push_f32s(out: &mut Vec<u8>, values: impl IntoIterator<Item = f32>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn finish(mut out: Vec<u8>) -> Vec<u8> {
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

/// Serializes a float model (scheme 0); f64 parameters narrow to f32.
pub fn serialize_float(model: &LinearModel) -> Vec<u8> {
    let mut out = Vec::with_capacity(float_len(model.n_features()));
    push_header(&mut out, SCHEME_FLOAT, model.features());
    push_f32s(&mut out, model.scaler().means().iter().map(|&v| v as f32));
    push_f32s(&mut out, model.scaler().stds().iter().map(|&v| v as f32));
    push_f32s(&mut out, model.weights().iter().map(|&v| v as f32));
    push_f32s(&mut out, [model.bias() as f32]);
    finish(out)
}

/// Serializes a quantized model (scheme 1).
pub fn serialize_quantized(q: &QuantizedModel) -> Vec<u8> {
    let mut out = Vec::with_capacity(quantized_len(q.n_features()));
    push_header(&mut out, SCHEME_INT8, q.features());
    push_f32s(&mut out, q.means().iter().copied());
    push_f32s(&mut out, q.stds().iter().copied());
    out.extend(q.q_weights().iter().map(|&b| b as u8));
    while out.len() % 4 != 0 {
        out.push(0);
    }
    push_f32s(&mut out, [q.weight_scale(), q.bias()]);
    finish(out)
}

fn float_len(d: usize) -> usize {
    HEADER_LEN + d + 8 * d + 4 * d + 4 + TAIL_LEN
}

fn quantized_len(d: usize) -> usize {
    let unpadded = HEADER_LEN + d + 8 * d + d;
    let padded = unpadded.div_ceil(4) * 4;
    padded + 8 + TAIL_LEN
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> &'a [u8] {
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        slice
    }

    fn f32(&mut self) -> f32 {
        f32::from_le_bytes(self.take(4).try_into().unwrap())
    }

    fn f32s(&mut self, n: usize) -> Vec<f32> {
        (0..n).map(|_| self.f32()).collect()
    }
}

/// Parses and validates an artifact.
///
/// Check order: minimum length (`Truncated`), magic, version, declared
/// length vs actual (`Truncated` when bytes are missing), CRC-32
/// (`ChecksumMismatch`), then field semantics (`MalformedField`). The CRC
/// runs before any field is trusted, so a single corrupted bit anywhere
/// from the scheme byte through the checksum tail surfaces as
/// `ChecksumMismatch`, never as a confusing field error.
pub fn deserialize(bytes: &[u8]) -> Result<PackedModel, PackError> {
    let min = HEADER_LEN + TAIL_LEN;
    if bytes.len() < min {
        return Err(PackError::Truncated {
            needed: min,
            got: bytes.len(),
        });
    }
    if bytes[..4] != MAGIC {
        return Err(PackError::BadMagic);
    }
    if bytes[4] != VERSION {
        return Err(PackError::UnsupportedVersion(bytes[4]));
    }

    let scheme = bytes[5];
    let d = bytes[6] as usize;
    let expected = match (scheme, d) {
        (SCHEME_FLOAT, 1..=MAX_FEATURES) => Some(float_len(d)),
        (SCHEME_INT8, 1..=MAX_FEATURES) => Some(quantized_len(d)),
        _ => None,
    };
    if let Some(expected) = expected {
        if bytes.len() < expected {
            return Err(PackError::Truncated {
                needed: expected,
                got: bytes.len(),
            });
        }
    }

    let (body, tail) = bytes.split_at(bytes.len() - TAIL_LEN);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(PackError::ChecksumMismatch { stored, computed });
    }

    let expected = expected.ok_or_else(|| {
        PackError::MalformedField(format!("scheme {scheme} with {d} features"))
    })?;
    if bytes.len() != expected {
        return Err(PackError::MalformedField(format!(
            "artifact is {} bytes, format says {expected}",
            bytes.len()
        )));
    }
    if bytes[7] != 0 {
        return Err(PackError::MalformedField(format!(
            "reserved byte is {}",
            bytes[7]
        )));
    }

    let mut cur = Cursor {
        bytes: body,
        pos: HEADER_LEN,
    };
    let mut features = Vec::with_capacity(d);
    for &code in cur.take(d) {
        let role = FeatureRole::from_code(code)
            .filter(|r| r.is_predictor())
            .ok_or_else(|| PackError::MalformedField(format!("role code {code}")))?;
        if features.contains(&role) {
            return Err(PackError::MalformedField(format!(
                "duplicate role '{role}'"
            )));
        }
        features.push(role);
    }
    let means = cur.f32s(d);
    let stds = cur.f32s(d);

    match scheme {
        SCHEME_FLOAT => {
            let weights = cur.f32s(d);
            let bias = cur.f32();
            let scaler = Scaler::new(
                means.iter().map(|&v| v as f64).collect(),
                stds.iter().map(|&v| v as f64).collect(),
            )
            .map_err(|e| PackError::MalformedField(e.to_string()))?;
            let model = LinearModel::new(
                weights.iter().map(|&v| v as f64).collect(),
                bias as f64,
                scaler,
                features,
            )
            .map_err(|e| PackError::MalformedField(e.to_string()))?;
            Ok(PackedModel::Float(model))
        }
        SCHEME_INT8 => {
            let q_weights: Vec<i8> = cur.take(d).iter().map(|&b| b as i8).collect();
            let padding = cur.take(cur.pos.next_multiple_of(4) - cur.pos);
            if padding.iter().any(|&b| b != 0) {
                return Err(PackError::MalformedField("nonzero padding".to_string()));
            }
            let weight_scale = cur.f32();
            let bias = cur.f32();
            Ok(PackedModel::Quantized(QuantizedModel::new(
                features,
                means,
                stds,
                q_weights,
                weight_scale,
                bias,
            )?))
        }
        _ => unreachable!("scheme validated above"),
    }
}

// --- Tests ---
