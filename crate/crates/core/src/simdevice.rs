//! Device-in-the-loop simulation: planted air-quality trajectories, an
//! MQ7-style CO sensor with ADC quantization, the on-device inference
//! loop, and the 16x2 LCD renderer.
//!
//! Everything is seeded and bit-deterministic. Two independent ChaCha8
//! streams are used: one for the physical processes, one (salted) for
//! sensor noise, so changing a noise amplitude never re-times the other
//! stream's draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::datapipe::FeatureRole;
use crate::inferkernel::{infer_packed, KernelError};
use crate::modelpack::{self, PackError};
use crate::record::Record;

const SENSOR_STREAM_SALT: u64 = 0x5345_4E53_4F52_5331;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("InvalidParams: {0}")]
    InvalidParams(String),
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error("NonPositivePpm: {0}")]
    NonPositivePpm(f64),
    #[error("SaturatedReading: adc {adc} is at the rail")]
    SaturatedReading { adc: u16 },
    #[error("ArtifactInvalid: {0}")]
    ArtifactInvalid(#[from] PackError),
    #[error("Kernel: {0}")]
    Kernel(#[from] KernelError),
}

// --- MQ7-style CO sensor ---

/// Power-law gas sensor with a resistive divider and an ADC.
///
/// Concentration model: `ppm = a * (Rs/R0)^b` with `b < 0`. The divider
/// voltage fraction is `RL / (Rs + RL)`, quantized to `2^adc_bits - 1`
/// codes with round-half-to-even.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mq7Params {
    pub a: f64,
    pub b: f64,
    pub r0: f64,
    pub rl: f64,
    pub adc_bits: u32,
}

impl Default for Mq7Params {
    fn default() -> Self {
        Self {
            a: 100.0,
            b: -1.5,
            r0: 10_000.0,
            rl: 10_000.0,
            adc_bits: 10,
        }
    }
}

impl Mq7Params {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(SimError::InvalidParams(format!(
                "curve coefficient a must be positive, got {}",
                self.a
            )));
        }
        if !(self.b.is_finite() && self.b < 0.0) {
            return Err(SimError::InvalidParams(format!(
                "curve exponent b must be negative, got {}",
                self.b
            )));
        }
        if !(self.r0.is_finite() && self.r0 > 0.0) || !(self.rl.is_finite() && self.rl > 0.0) {
            return Err(SimError::InvalidParams(
                "r0 and rl must be positive".to_string(),
            ));
        }
        if !(8..=16).contains(&self.adc_bits) {
            return Err(SimError::InvalidParams(format!(
                "adc_bits must be within 8..=16, got {}",
                self.adc_bits
            )));
        }
        Ok(())
    }

    /// Highest ADC code, `2^adc_bits - 1`.
    pub fn full_scale(&self) -> u16 {
        ((1u32 << self.adc_bits) - 1) as u16
    }

    /// Forward path: concentration to ADC code, saturating at the rails.
    pub fn adc_from_ppm(&self, ppm: f64) -> Result<u16, SimError> {
        self.validate()?;
        if !(ppm.is_finite() && ppm > 0.0) {
            return Err(SimError::NonPositivePpm(ppm));
        }
        let rs = self.r0 * (ppm / self.a).powf(1.0 / self.b);
        let fraction = self.rl / (rs + self.rl);
        let fs = self.full_scale() as f64;
        Ok((fraction * fs).round_ties_even().clamp(0.0, fs) as u16)
    }

    /// Inverse path: ADC code back to concentration. Codes at either rail
    /// carry no usable information and are rejected as saturated.
    pub fn ppm_from_adc(&self, adc: u16) -> Result<f64, SimError> {
        self.validate()?;
        let fs = self.full_scale();
        if adc == 0 || adc >= fs {
            return Err(SimError::SaturatedReading { adc });
        }
        let rs = self.rl * (fs - adc) as f64 / adc as f64;
        Ok(self.a * (rs / self.r0).powf(self.b))
    }
}

// --- Planted world ---

/// Mean-reverting channel advanced by Euler steps:
/// `x += reversion * (mean - x) * dt + noise * sqrt(dt) * eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelProcess {
    pub initial: f64,
    pub mean: f64,
    pub reversion: f64,
    pub noise: f64,
}

/// Ground-truth ozone as an affine function of the three channels plus
/// gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedRelation {
    pub co_slope: f64,
    pub temp_slope: f64,
    pub pressure_slope: f64,
    pub intercept: f64,
    pub noise: f64,
}

/// Per-sensor additive gaussian noise, applied before quantization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorNoise {
    pub co_ppm: f64,
    pub temp_c: f64,
    pub pressure_hpa: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub steps: usize,
    pub dt: f64,
    pub co: ChannelProcess,
    pub temperature: ChannelProcess,
    pub pressure: ChannelProcess,
    pub relation: PlantedRelation,
    pub sensor_noise: SensorNoise,
    pub mq7: Mq7Params,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            steps: 500,
            dt: 1.0,
            co: ChannelProcess {
                initial: 9.0,
                mean: 9.0,
                reversion: 0.05,
                noise: 0.3,
            },
            temperature: ChannelProcess {
                initial: 22.0,
                mean: 25.0,
                reversion: 0.02,
                noise: 0.2,
            },
            pressure: ChannelProcess {
                initial: 1008.0,
                mean: 1010.0,
                reversion: 0.01,
                noise: 0.5,
            },
            relation: PlantedRelation {
                co_slope: 3.0,
                temp_slope: 0.5,
                pressure_slope: -2.0,
                intercept: 2100.0,
                noise: 1.0,
            },
            sensor_noise: SensorNoise {
                co_ppm: 0.2,
                temp_c: 0.1,
                pressure_hpa: 0.3,
            },
            mq7: Mq7Params::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.steps == 0 {
            return Err(SimError::InvalidConfig("steps must be at least 1".to_string()));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        for (name, ch) in [
            ("co", &self.co),
            ("temperature", &self.temperature),
            ("pressure", &self.pressure),
        ] {
            if !(ch.initial.is_finite() && ch.mean.is_finite()) {
                return Err(SimError::InvalidConfig(format!(
                    "{name} channel has non-finite level"
                )));
            }
            if !(ch.reversion.is_finite() && ch.reversion >= 0.0) {
                return Err(SimError::InvalidConfig(format!(
                    "{name} reversion must be non-negative"
                )));
            }
            if !(ch.noise.is_finite() && ch.noise >= 0.0) {
                return Err(SimError::InvalidConfig(format!(
                    "{name} noise must be non-negative"
                )));
            }
        }
        let r = &self.relation;
        if ![r.co_slope, r.temp_slope, r.pressure_slope, r.intercept]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(SimError::InvalidConfig(
                "relation coefficients must be finite".to_string(),
            ));
        }
        if !(r.noise.is_finite() && r.noise >= 0.0) {
            return Err(SimError::InvalidConfig(
                "relation noise must be non-negative".to_string(),
            ));
        }
        let sn = &self.sensor_noise;
        if ![sn.co_ppm, sn.temp_c, sn.pressure_hpa]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0)
        {
            return Err(SimError::InvalidConfig(
                "sensor noise must be non-negative".to_string(),
            ));
        }
        self.mq7.validate()
    }
}

/// One step of ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthSample {
    pub t: usize,
    pub co: f64,
    pub temperature: f64,
    pub pressure: f64,
    pub ozone: f64,
}

fn ou_step(x: f64, ch: &ChannelProcess, dt: f64, sqrt_dt: f64, rng: &mut ChaCha8Rng) -> f64 {
    let eps: f64 = rng.sample(StandardNormal);
    x + ch.reversion * (ch.mean - x) * dt + ch.noise * sqrt_dt * eps
}

/// Generates the planted ground truth.
///
/// The draw order per step is part of the contract: three process draws
/// (co, temperature, pressure) on every step after the first, then one
/// relation-noise draw on every step, taken even when its amplitude is
/// zero. Amplitudes therefore change values but never re-time the stream.
pub fn gen_trajectory(cfg: &SimConfig) -> Result<Vec<TruthSample>, SimError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sqrt_dt = cfg.dt.sqrt();
    let mut co = cfg.co.initial;
    let mut temperature = cfg.temperature.initial;
    let mut pressure = cfg.pressure.initial;
    let mut out = Vec::with_capacity(cfg.steps);
    for t in 0..cfg.steps {
        if t > 0 {
            co = ou_step(co, &cfg.co, cfg.dt, sqrt_dt, &mut rng);
            temperature = ou_step(temperature, &cfg.temperature, cfg.dt, sqrt_dt, &mut rng);
            pressure = ou_step(pressure, &cfg.pressure, cfg.dt, sqrt_dt, &mut rng);
        }
        let eps: f64 = rng.sample(StandardNormal);
        let r = &cfg.relation;
        let ozone = r.intercept
            + r.co_slope * co
            + r.temp_slope * temperature
            + r.pressure_slope * pressure
            + r.noise * eps;
        out.push(TruthSample {
            t,
            co,
            temperature,
            pressure,
            ozone,
        });
    }
    Ok(out)
}

// --- Run loop ---

/// What the device sees at one step: the raw CO ADC code plus the two
/// directly-read channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorFrame {
    pub t: usize,
    pub adc_co: u16,
    pub temp_c: f64,
    pub pressure_hpa: f64,
}

/// One step of the device loop. Saturated steps carry no recovered CO,
/// no prediction and no display.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub frame: SensorFrame,
    pub co_ppm: Option<f64>,
    pub prediction: Option<f64>,
    pub display: Option<DisplayRecord>,
    pub saturated: bool,
}

impl StepRecord {
    pub fn to_record(&self) -> Record {
        let mut rec = Record::new("step")
            .field("t", self.frame.t)
            .field("adc", self.frame.adc_co)
            .field("temp", self.frame.temp_c)
            .field("pressure", self.frame.pressure_hpa);
        if self.saturated {
            rec = rec.field("saturated", 1);
        }
        if let Some(co) = self.co_ppm {
            rec = rec.field("co", co);
        }
        if let Some(p) = self.prediction {
            rec = rec.field("o3", p);
        }
        if let Some(d) = &self.display {
            rec = rec
                .field("lcd1", format!("[{}]", d.line1()))
                .field("lcd2", format!("[{}]", d.line2()));
        }
        rec
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    pub used: usize,
    pub saturated: usize,
    pub mse: Option<f64>,
    pub r2: Option<f64>,
}

impl RunSummary {
    pub fn to_record(&self) -> Record {
        let mut rec = Record::new("summary")
            .field("steps", self.steps)
            .field("used", self.used)
            .field("saturated", self.saturated);
        if let Some(mse) = self.mse {
            rec = rec.field("mse", mse);
        }
        if let Some(r2) = self.r2 {
            rec = rec.field("r2", r2);
        }
        rec
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRun {
    pub records: Vec<StepRecord>,
    pub summary: RunSummary,
}

/// Runs the device loop against a serialized model artifact.
///
/// Per step: sensor noise is added to the truth (three draws, co then
/// temperature then pressure, always taken), CO passes through the MQ7
/// forward path and back, and the recovered reading feeds the model. A
/// CO reading at either ADC rail, or a non-positive noisy concentration,
/// marks the step saturated: it is counted, carried in the records, and
/// excluded from the error summary. The summary compares predictions
/// against true ozone over the non-saturated steps.
pub fn run_loop(cfg: &SimConfig, artifact: &[u8]) -> Result<SimRun, SimError> {
    let model = modelpack::deserialize(artifact)?;
    let truth = gen_trajectory(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ SENSOR_STREAM_SALT);
    let noise = &cfg.sensor_noise;
    let mut records = Vec::with_capacity(truth.len());
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    let mut saturated = 0usize;

    for s in &truth {
        let e_co: f64 = rng.sample(StandardNormal);
        let e_temp: f64 = rng.sample(StandardNormal);
        let e_pressure: f64 = rng.sample(StandardNormal);
        let sensed_co = s.co + noise.co_ppm * e_co;
        let temp_c = s.temperature + noise.temp_c * e_temp;
        let pressure_hpa = s.pressure + noise.pressure_hpa * e_pressure;

        let (adc_co, recovered) = if sensed_co > 0.0 {
            let adc = cfg.mq7.adc_from_ppm(sensed_co)?;
            match cfg.mq7.ppm_from_adc(adc) {
                Ok(ppm) => (adc, Some(ppm)),
                Err(SimError::SaturatedReading { .. }) => (adc, None),
                Err(e) => return Err(e),
            }
        } else {
            (0, None)
        };

        let frame = SensorFrame {
            t: s.t,
            adc_co,
            temp_c,
            pressure_hpa,
        };
        let record = match recovered {
            Some(co_ppm) => {
                let mut buf = [0.0f64; 3];
                let d = model.n_features();
                for (slot, role) in buf.iter_mut().zip(model.features()) {
                    *slot = match role {
                        FeatureRole::Co => co_ppm,
                        FeatureRole::Temperature => temp_c,
                        FeatureRole::Pressure => pressure_hpa,
                        FeatureRole::Ozone => unreachable!("artifacts carry predictors only"),
                    };
                }
                let prediction = infer_packed(&model, &buf[..d])?;
                pairs.push((s.ozone, prediction));
                StepRecord {
                    frame,
                    co_ppm: Some(co_ppm),
                    prediction: Some(prediction),
                    display: Some(render_lcd(prediction, co_ppm, temp_c, pressure_hpa)),
                    saturated: false,
                }
            }
            None => {
                saturated += 1;
                StepRecord {
                    frame,
                    co_ppm: None,
                    prediction: None,
                    display: None,
                    saturated: true,
                }
            }
        };
        records.push(record);
    }

    let used = pairs.len();
    let (mse, r2) = if used == 0 {
        (None, None)
    } else {
        let mean_y = pairs.iter().map(|p| p.0).sum::<f64>() / used as f64;
        let sse: f64 = pairs.iter().map(|(y, p)| (y - p) * (y - p)).sum();
        let sst: f64 = pairs.iter().map(|(y, _)| (y - mean_y) * (y - mean_y)).sum();
        let r2 = if sst > 0.0 {
            1.0 - sse / sst
        } else if sse == 0.0 {
            1.0
        } else {
            f64::NEG_INFINITY
        };
        (Some(sse / used as f64), Some(r2))
    };

    Ok(SimRun {
        records,
        summary: RunSummary {
            steps: cfg.steps,
            used,
            saturated,
            mse,
            r2,
        },
    })
}

// --- LCD ---

/// Two rendered 16x2 character LCD lines, always exactly 16 ASCII bytes
/// each; out-of-range fields fill with `#`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DisplayRecord {
    line1: String,
    line2: String,
}

impl DisplayRecord {
    pub fn line1(&self) -> &str {
        &self.line1
    }

    pub fn line2(&self) -> &str {
        &self.line2
    }
}

impl std::fmt::Display for DisplayRecord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{}", self.line1)?;
        write!(f, "{}", self.line2)
    }
}

fn fill(width: usize) -> String {
    "#".repeat(width)
}

fn field_right(v: f64, width: usize) -> String {
    if !v.is_finite() {
        return fill(width);
    }
    let s = format!("{v:.1}");
    if s.len() > width {
        fill(width)
    } else {
        format!("{s:>width$}")
    }
}

fn field_padded(v: f64, width: usize) -> String {
    if !v.is_finite() {
        return fill(width);
    }
    let s = format!("{v:0width$.1}");
    if s.len() > width {
        fill(width)
    } else {
        s
    }
}

fn field_int(v: f64, width: usize) -> String {
    if !v.is_finite() || v.abs() >= 1e15 {
        return fill(width);
    }
    let s = format!("{:0width$}", v.round_ties_even() as i64);
    if s.len() > width {
        fill(width)
    } else {
        s
    }
}

/// Renders the two LCD lines:
/// `O3 <o3:>6.1> ug/m3 ` and `CO<co:04.1> T<temp:02d> P<pressure:04d>`.
pub fn render_lcd(o3: f64, co_ppm: f64, temp_c: f64, pressure_hpa: f64) -> DisplayRecord {
    let line1 = format!("O3 {} ug/m3 ", field_right(o3, 6));
    let line2 = format!(
        "CO{} T{} P{}",
        field_padded(co_ppm, 4),
        field_int(temp_c, 2),
        field_int(pressure_hpa, 4)
    );
    debug_assert_eq!(line1.len(), 16);
    debug_assert_eq!(line2.len(), 16);
    DisplayRecord { line1, line2 }
}

// --- Tests ---
