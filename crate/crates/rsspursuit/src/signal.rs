//! Discrete signal representation, WAV ingestion and energy/SRR metrics.

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("failed to read WAV file: {0}")]
    WavRead(#[from] hound::Error),
    #[error("unsupported WAV encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("empty signal")]
    Empty,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// A finite discrete real signal. Immutable after construction; safe to
/// share read-only across workers.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    /// Informational only; no processing in this crate depends on it.
    sample_rate: u32,
}

impl Signal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, SignalError> {
        if samples.is_empty() {
            return Err(SignalError::Empty);
        }
        Ok(Signal {
            samples,
            sample_rate,
        })
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Self {
        assert!(len > 0);
        Signal {
            samples: vec![0.0; len],
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false // length is always positive by construction
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|x| x * x).sum()
    }

    /// Reads a mono signal from a RIFF WAV file. 16-bit PCM samples are
    /// scaled by 1/32768 (so -32768 maps to -1.0 and +32767 to slightly
    /// below +1.0); 32-bit float samples are taken as-is. Multichannel
    /// files contribute channel 0 only.
    pub fn load_wav<P: AsRef<Path>>(path: P) -> Result<Self, SignalError> {
        let mut reader = hound::WavReader::open(path)?;
        let spec = reader.spec();
        if spec.channels > 1 {
            eprintln!(
                "warning: {}-channel WAV, taking channel 0 only",
                spec.channels
            );
        }
        let step = spec.channels as usize;
        let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
            (hound::SampleFormat::Int, 16) => reader
                .samples::<i16>()
                .step_by(step)
                .map(|s| Ok(s? as f64 / 32768.0))
                .collect::<Result<_, hound::Error>>()?,
            (hound::SampleFormat::Float, 32) => reader
                .samples::<f32>()
                .step_by(step)
                .map(|s| Ok(s? as f64))
                .collect::<Result<_, hound::Error>>()?,
            (fmt, bits) => {
                return Err(SignalError::UnsupportedEncoding(format!(
                    "{:?} {} bits",
                    fmt, bits
                )))
            }
        };
        Signal::new(samples, spec.sample_rate)
    }

    /// Writes the signal as 32-bit float WAV.
    pub fn save_wav<P: AsRef<Path>>(&self, path: P) -> Result<(), SignalError> {
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: self.sample_rate,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let mut writer = hound::WavWriter::create(path, spec)?;
        for &x in &self.samples {
            writer.write_sample(x as f32)?;
        }
        writer.finalize()?;
        Ok(())
    }
}

/// Signal-to-residual ratio in dB: `10 log10(||f_n||^2 / ||f - f_n||^2)`.
///
/// Returns `+inf` when the residual energy is exactly zero and `-inf` when
/// the approximant is zero but the residual is not.
pub fn srr(reference: &Signal, approximant: &Signal) -> Result<f64, SignalError> {
    if reference.len() != approximant.len() {
        return Err(SignalError::LengthMismatch(
            reference.len(),
            approximant.len(),
        ));
    }
    let approx_energy = approximant.energy();
    let residual_energy: f64 = reference
        .samples()
        .iter()
        .zip(approximant.samples())
        .map(|(f, a)| (f - a) * (f - a))
        .sum();
    Ok(srr_from_energies(approx_energy, residual_energy))
}

/// SRR from precomputed approximant and residual energies.
pub fn srr_from_energies(approx_energy: f64, residual_energy: f64) -> f64 {
    if residual_energy == 0.0 {
        f64::INFINITY
    } else if approx_energy == 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * (approx_energy / residual_energy).log10()
    }
}
