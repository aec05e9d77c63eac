//! Multiscale time-frequency dictionaries: Gabor and MDCT unions.
//!
//! Atoms are parameterized by (scale, time, frequency bin) plus the
//! subdictionary time shift that produced them. All atoms are unit L2 norm
//! after discretization; atoms whose support crosses a signal edge are
//! truncated and renormalized. Analysis (projection of a residual on every
//! atom of a subdictionary) runs on per-frame fast transforms and is exact
//! against naive dot products to within FFT rounding.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::signal::Signal;

#[derive(Debug, Error)]
pub enum DictError {
    #[error("invalid dictionary config: {0}")]
    InvalidConfig(String),
    #[error("atom parameter out of range: {0}")]
    InvalidParam(String),
    #[error("atom support is empty after boundary truncation")]
    EmptySupport,
    #[error("residual length {0} does not match signal length {1}")]
    LengthMismatch(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Hann,
    Gaussian,
    Sine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DictFamily {
    Gabor,
    Mdct,
}

/// Static description of a multiscale dictionary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DictConfig {
    scales: Vec<usize>,
    signal_length: usize,
    window: WindowKind,
    family: DictFamily,
}

impl DictConfig {
    pub fn new(
        scales: Vec<usize>,
        signal_length: usize,
        window: WindowKind,
        family: DictFamily,
    ) -> Result<Self, DictError> {
        if scales.is_empty() {
            return Err(DictError::InvalidConfig("no scales".into()));
        }
        if signal_length == 0 {
            return Err(DictError::InvalidConfig("zero signal length".into()));
        }
        for w in scales.windows(2) {
            if w[0] >= w[1] {
                return Err(DictError::InvalidConfig(
                    "scales must be strictly increasing".into(),
                ));
            }
        }
        for &s in &scales {
            if s % 2 != 0 || s < 4 {
                return Err(DictError::InvalidConfig(format!(
                    "scale {} must be even and >= 4",
                    s
                )));
            }
            if s > signal_length {
                return Err(DictError::InvalidConfig(format!(
                    "scale {} exceeds signal length {}",
                    s, signal_length
                )));
            }
        }
        Ok(DictConfig {
            scales,
            signal_length,
            window,
            family,
        })
    }

    pub fn scales(&self) -> &[usize] {
        &self.scales
    }

    pub fn signal_length(&self) -> usize {
        self.signal_length
    }

    pub fn window(&self) -> WindowKind {
        self.window
    }

    pub fn family(&self) -> DictFamily {
        self.family
    }

    /// Frequency bins per frame at scale index `k`: s_k / 2 for both families.
    pub fn bins(&self, k: usize) -> usize {
        self.scales[k] / 2
    }

    /// Key=value text block used in bitstream headers and CSV provenance.
    pub fn to_text(&self) -> String {
        let scales: Vec<String> = self.scales.iter().map(|s| s.to_string()).collect();
        format!(
            "family={} window={} n={} scales={}",
            match self.family {
                DictFamily::Gabor => "gabor",
                DictFamily::Mdct => "mdct",
            },
            match self.window {
                WindowKind::Hann => "hann",
                WindowKind::Gaussian => "gaussian",
                WindowKind::Sine => "sine",
            },
            self.signal_length,
            scales.join(",")
        )
    }

    pub fn from_text(text: &str) -> Result<Self, DictError> {
        let mut family = None;
        let mut window = None;
        let mut n = None;
        let mut scales = None;
        for field in text.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| DictError::InvalidConfig(format!("bad field '{}'", field)))?;
            match key {
                "family" => {
                    family = Some(match value {
                        "gabor" => DictFamily::Gabor,
                        "mdct" => DictFamily::Mdct,
                        _ => return Err(DictError::InvalidConfig(format!("family {}", value))),
                    })
                }
                "window" => {
                    window = Some(match value {
                        "hann" => WindowKind::Hann,
                        "gaussian" => WindowKind::Gaussian,
                        "sine" => WindowKind::Sine,
                        _ => return Err(DictError::InvalidConfig(format!("window {}", value))),
                    })
                }
                "n" => {
                    n = Some(
                        value
                            .parse()
                            .map_err(|_| DictError::InvalidConfig(format!("n={}", value)))?,
                    )
                }
                "scales" => {
                    let parsed: Result<Vec<usize>, _> =
                        value.split(',').map(|v| v.parse()).collect();
                    scales = Some(
                        parsed.map_err(|_| DictError::InvalidConfig(format!("scales={}", value)))?,
                    );
                }
                _ => return Err(DictError::InvalidConfig(format!("unknown key {}", key))),
            }
        }
        match (family, window, n, scales) {
            (Some(f), Some(w), Some(n), Some(s)) => DictConfig::new(s, n, w, f),
            _ => Err(DictError::InvalidConfig("missing field".into())),
        }
    }
}

impl fmt::Display for DictConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_text())
    }
}

/// One atom's parameters. `time` is the support center for Gabor atoms and
/// the frame start for MDCT atoms; `shift` is the subdictionary offset tau
/// that produced the atom (zero for the fixed grid).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AtomParam {
    pub scale_index: usize,
    pub time: i64,
    pub freq_bin: usize,
    pub shift: i64,
}

/// A subdictionary: per-scale time shifts plus a frame-grid subsampling
/// factor. `subsample == 1` is the coarse half-overlap grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SubdictSpec {
    config: DictConfig,
    shifts: Vec<i64>,
    subsample: u32,
    /// Which decimation coset of the frame grid each scale keeps, in frame
    /// units (0 ≤ offset < subsample). All zero when subsample == 1.
    frame_offsets: Vec<u32>,
}

impl SubdictSpec {
    pub fn new(config: DictConfig, shifts: Vec<i64>, subsample: u32) -> Self {
        let offsets = vec![0; config.scales().len()];
        SubdictSpec::with_frame_offsets(config, shifts, subsample, offsets)
    }

    pub fn with_frame_offsets(
        config: DictConfig,
        shifts: Vec<i64>,
        subsample: u32,
        frame_offsets: Vec<u32>,
    ) -> Self {
        assert_eq!(shifts.len(), config.scales().len());
        assert_eq!(frame_offsets.len(), config.scales().len());
        assert!(subsample >= 1);
        for (k, &tau) in shifts.iter().enumerate() {
            let q = (config.scales()[k] / 4) as i64;
            assert!(tau >= -q && tau <= q, "shift {} out of [-s/4, s/4]", tau);
        }
        for &off in &frame_offsets {
            assert!(off < subsample, "frame offset {} out of [0, d)", off);
        }
        SubdictSpec {
            config,
            shifts,
            subsample,
            frame_offsets,
        }
    }

    pub fn coarse(config: DictConfig) -> Self {
        let shifts = vec![0; config.scales().len()];
        SubdictSpec::new(config, shifts, 1)
    }

    pub fn config(&self) -> &DictConfig {
        &self.config
    }

    pub fn shifts(&self) -> &[i64] {
        &self.shifts
    }

    pub fn subsample(&self) -> u32 {
        self.subsample
    }

    /// Frame start-of-grid times for scale `k`, in ascending order. This is
    /// the single source of truth for subdictionary enumeration: projection,
    /// size computation and codec index mapping all use it.
    pub fn frame_offsets(&self) -> &[u32] {
        &self.frame_offsets
    }

    /// The first kept frame of scale `k`: the coset offset, reduced so
    /// scales with fewer frames than the subsampling factor keep one frame.
    fn first_frame(&self, k: usize) -> i64 {
        let s = self.config.scales()[k] as i64;
        let frames = 2 * self.config.signal_length() as i64 / s;
        (self.frame_offsets[k] as i64).min(frames.max(1) - 1)
    }

    /// Frame start-of-grid times for scale `k`, in ascending order. This is
    /// the single source of truth for subdictionary enumeration: projection,
    /// size computation and codec index mapping all use it.
    pub fn frame_times(&self, k: usize) -> Vec<i64> {
        let s = self.config.scales()[k] as i64;
        let n = self.config.signal_length() as i64;
        let hop = s / 2;
        let frames = 2 * n / s; // floor
        (self.first_frame(k)..frames)
            .step_by(self.subsample as usize)
            .map(|p| p * hop + self.shifts[k])
            .collect()
    }

    pub fn frame_count(&self, k: usize) -> usize {
        let s = self.config.scales()[k] as i64;
        let frames = 2 * self.config.signal_length() as i64 / s;
        ((frames - self.first_frame(k)) as usize).div_ceil(self.subsample as usize)
    }
}

/// Exact atom count: full dictionary when `sub` is None, else the
/// subdictionary. The full Gabor count follows the formula
/// sum_k s_k * N / 2 (every integer time, s_k/2 bins per scale); the full
/// MDCT "dictionary" is its unshifted coarse frame grid.
pub fn dict_size(config: &DictConfig, sub: Option<&SubdictSpec>) -> u64 {
    match sub {
        Some(sub) => config
            .scales()
            .iter()
            .enumerate()
            .map(|(k, _)| sub.frame_count(k) as u64 * config.bins(k) as u64)
            .sum(),
        None => match config.family() {
            DictFamily::Gabor => config
                .scales()
                .iter()
                .map(|&s| (s as u64) * (config.signal_length() as u64) / 2)
                .sum(),
            DictFamily::Mdct => {
                let coarse = SubdictSpec::coarse(config.clone());
                dict_size(config, Some(&coarse))
            }
        },
    }
}

fn window_samples(kind: WindowKind, s: usize) -> Vec<f64> {
    (0..s)
        .map(|j| {
            let x = (j as f64 + 0.5) / s as f64;
            match kind {
                WindowKind::Hann => {
                    let v = (PI * x).sin();
                    v * v
                }
                WindowKind::Sine => (PI * x).sin(),
                WindowKind::Gaussian => {
                    let center = (s as f64 - 1.0) / 2.0;
                    let sigma = s as f64 / 8.0;
                    let t = (j as f64 - center) / sigma;
                    (-0.5 * t * t).exp()
                }
            }
        })
        .collect()
}

/// Kernel value (window excluded) of sample `j` within an atom's support.
#[inline]
fn kernel_value(family: DictFamily, s: usize, bin: usize, j: usize) -> f64 {
    match family {
        DictFamily::Gabor => {
            // Real cosine phase, referenced to the support center.
            (2.0 * PI * bin as f64 * (j as f64 - s as f64 / 2.0) / s as f64).cos()
        }
        DictFamily::Mdct => {
            let n = s as f64 / 2.0;
            ((PI / n) * (j as f64 + 0.5 + n / 2.0) * (bin as f64 + 0.5)).cos()
        }
    }
}

/// An atom restricted to its in-signal support, unit norm.
#[derive(Debug, Clone)]
pub struct SparseAtom {
    pub start: usize,
    pub values: Vec<f64>,
}

impl SparseAtom {
    pub fn dot(&self, samples: &[f64]) -> f64 {
        self.values
            .iter()
            .zip(&samples[self.start..self.start + self.values.len()])
            .map(|(a, b)| a * b)
            .sum()
    }

    /// `samples[supp] += c * atom[supp]`.
    pub fn add_scaled(&self, samples: &mut [f64], c: f64) {
        for (x, v) in samples[self.start..self.start + self.values.len()]
            .iter_mut()
            .zip(&self.values)
        {
            *x += c * v;
        }
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        out[self.start..self.start + self.values.len()].copy_from_slice(&self.values);
        out
    }
}

/// Support start of an atom in signal coordinates (may be negative).
fn support_start(family: DictFamily, s: usize, time: i64) -> i64 {
    match family {
        DictFamily::Gabor => time - (s as i64) / 2,
        DictFamily::Mdct => time,
    }
}

/// Builds the truncated, renormalized waveform of an atom at any time
/// position (grid membership is not checked here).
pub(crate) fn atom_sparse(param: &AtomParam, config: &DictConfig) -> Result<SparseAtom, DictError> {
    let k = param.scale_index;
    if k >= config.scales().len() {
        return Err(DictError::InvalidParam(format!("scale index {}", k)));
    }
    let s = config.scales()[k];
    if param.freq_bin >= config.bins(k) {
        return Err(DictError::InvalidParam(format!(
            "freq bin {} at scale {}",
            param.freq_bin, s
        )));
    }
    let n = config.signal_length() as i64;
    let a = support_start(config.family(), s, param.time);
    let lo = a.max(0);
    let hi = (a + s as i64).min(n);
    if lo >= hi {
        return Err(DictError::EmptySupport);
    }
    let window = window_samples(effective_window(config), s);
    let mut values: Vec<f64> = (lo..hi)
        .map(|t| {
            let j = (t - a) as usize;
            window[j] * kernel_value(config.family(), s, param.freq_bin, j)
        })
        .collect();
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(DictError::EmptySupport);
    }
    for v in &mut values {
        *v /= norm;
    }
    Ok(SparseAtom {
        start: lo as usize,
        values,
    })
}

/// MDCT always uses the sine window regardless of the configured kind.
fn effective_window(config: &DictConfig) -> WindowKind {
    match config.family() {
        DictFamily::Mdct => WindowKind::Sine,
        DictFamily::Gabor => config.window(),
    }
}

/// Full-length waveform of a Gabor atom (unit norm, cosine phase).
pub fn gabor_atom(param: &AtomParam, config: &DictConfig) -> Result<Vec<f64>, DictError> {
    if config.family() != DictFamily::Gabor {
        return Err(DictError::InvalidParam("config family is not Gabor".into()));
    }
    Ok(atom_sparse(param, config)?.to_dense(config.signal_length()))
}

/// Full-length waveform of an MDCT atom. `param.time` must lie on the frame
/// grid `p * s_k/2 + shift`.
pub fn mdct_atom(param: &AtomParam, config: &DictConfig) -> Result<Vec<f64>, DictError> {
    if config.family() != DictFamily::Mdct {
        return Err(DictError::InvalidParam("config family is not MDCT".into()));
    }
    let hop = (config.scales()[param.scale_index] / 2) as i64;
    let rel = param.time - param.shift;
    if rel.rem_euclid(hop) != 0 {
        return Err(DictError::InvalidParam(format!(
            "time {} is off the frame grid (hop {}, shift {})",
            param.time, hop, param.shift
        )));
    }
    Ok(atom_sparse(param, config)?.to_dense(config.signal_length()))
}

/// Waveform of any atom of the configured family, off-grid times allowed
/// (used for locally refined atoms).
pub fn atom_waveform(param: &AtomParam, config: &DictConfig) -> Result<Vec<f64>, DictError> {
    Ok(atom_sparse(param, config)?.to_dense(config.signal_length()))
}

// ---------------------------------------------------------------------------
// Projection engine
// ---------------------------------------------------------------------------

struct ScaleTables {
    scale: usize,
    window: Vec<f64>,
    window_sq: Vec<f64>,
    /// Unit-norm denominators for untruncated frames, one per bin.
    interior_norms: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

/// Precomputed per-scale state for fast repeated projections with one
/// dictionary config. Construction is cheap (one FFT per scale); the engine
/// is immutable and can be shared across threads.
pub struct ProjectionEngine {
    config: DictConfig,
    tables: Vec<ScaleTables>,
}

impl ProjectionEngine {
    pub fn new(config: DictConfig) -> Self {
        let mut planner = FftPlanner::new();
        let tables = config
            .scales()
            .iter()
            .map(|&s| {
                let window = window_samples(effective_window(&config), s);
                let window_sq: Vec<f64> = window.iter().map(|w| w * w).collect();
                let fft = planner.plan_fft_forward(s);
                let mut t = ScaleTables {
                    scale: s,
                    window,
                    window_sq,
                    interior_norms: Vec::new(),
                    fft,
                };
                t.interior_norms = bin_norms(config.family(), &t, 0, s);
                t
            })
            .collect();
        ProjectionEngine { config, tables }
    }

    pub fn config(&self) -> &DictConfig {
        &self.config
    }

    /// Inner products of `residual` with every atom of `sub`.
    pub fn project(&self, residual: &[f64], sub: &SubdictSpec) -> CoefficientTable {
        assert_eq!(sub.config(), &self.config);
        assert_eq!(residual.len(), self.config.signal_length());
        let n = residual.len() as i64;
        let scales = self
            .tables
            .iter()
            .enumerate()
            .map(|(k, tables)| {
                let s = tables.scale;
                let bins = s / 2;
                let frame_times = sub.frame_times(k);
                let mut values = vec![0.0; frame_times.len() * bins];
                let mut buf = vec![Complex::new(0.0, 0.0); s];
                for (fi, &u) in frame_times.iter().enumerate() {
                    let a = support_start(self.config.family(), s, u);
                    let lo = a.max(0);
                    let hi = (a + s as i64).min(n);
                    if lo >= hi {
                        continue; // fully outside, coefficients stay zero
                    }
                    // Windowed frame, zero outside the signal.
                    for c in buf.iter_mut() {
                        *c = Complex::new(0.0, 0.0);
                    }
                    for t in lo..hi {
                        let j = (t - a) as usize;
                        buf[j] = Complex::new(residual[t as usize] * tables.window[j], 0.0);
                    }
                    let raw = match self.config.family() {
                        DictFamily::Gabor => gabor_frame_raw(tables, &mut buf),
                        DictFamily::Mdct => mdct_frame_raw(tables, &mut buf),
                    };
                    let interior = lo == a && hi == a + s as i64;
                    let out = &mut values[fi * bins..(fi + 1) * bins];
                    if interior {
                        for (x, (r, nm)) in out
                            .iter_mut()
                            .zip(raw.iter().zip(&tables.interior_norms))
                        {
                            *x = r / nm;
                        }
                    } else {
                        let norms = bin_norms(
                            self.config.family(),
                            tables,
                            (lo - a) as usize,
                            (hi - a) as usize,
                        );
                        for (x, (r, nm)) in out.iter_mut().zip(raw.iter().zip(&norms)) {
                            *x = if *nm > 0.0 { r / nm } else { 0.0 };
                        }
                    }
                }
                ScaleCoeffs {
                    scale_index: k,
                    shift: sub.shifts()[k],
                    bins,
                    frame_times,
                    values,
                }
            })
            .collect();
        CoefficientTable { scales }
    }
}

/// One projection call without engine reuse.
pub fn project(residual: &Signal, sub: &SubdictSpec) -> Result<CoefficientTable, DictError> {
    if residual.len() != sub.config().signal_length() {
        return Err(DictError::LengthMismatch(
            residual.len(),
            sub.config().signal_length(),
        ));
    }
    let engine = ProjectionEngine::new(sub.config().clone());
    Ok(engine.project(residual.samples(), sub))
}

/// Raw (unnormalized-atom) inner products for one Gabor frame; `buf` holds
/// the windowed samples on input and is clobbered.
fn gabor_frame_raw(tables: &ScaleTables, buf: &mut [Complex<f64>]) -> Vec<f64> {
    let s = tables.scale;
    tables.fft.process(buf);
    (0..s / 2)
        .map(|xi| {
            let sign = if xi % 2 == 0 { 1.0 } else { -1.0 };
            sign * buf[xi].re
        })
        .collect()
}

/// Raw inner products for one MDCT frame via fold + DCT-IV, DCT-IV done with
/// a length-2n complex FFT. `buf` holds the 2n windowed samples on input.
fn mdct_frame_raw(tables: &ScaleTables, buf: &mut [Complex<f64>]) -> Vec<f64> {
    let s = tables.scale;
    let half = s / 2; // n
    let quarter = half / 2;
    // TDAC fold of the 2n windowed samples into an n-point sequence.
    let x: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let mut folded = vec![0.0; half];
    for m in 0..quarter {
        folded[m] = -x[3 * half / 2 - 1 - m] - x[m + 3 * half / 2];
    }
    for m in quarter..half {
        folded[m] = x[m - quarter] - x[3 * half / 2 - 1 - m];
    }
    // DCT-IV of `folded` via the odd-frequency trick on a 2n FFT.
    for c in buf.iter_mut() {
        *c = Complex::new(0.0, 0.0);
    }
    for (j, &v) in folded.iter().enumerate() {
        let phase = -PI * j as f64 / (2.0 * half as f64);
        buf[j] = Complex::new(v * phase.cos(), v * phase.sin());
    }
    tables.fft.process(buf);
    (0..half)
        .map(|k| {
            let phase = -PI * (2 * k + 1) as f64 / (4.0 * half as f64);
            (Complex::new(phase.cos(), phase.sin()) * buf[k]).re
        })
        .collect()
}

/// Squared-norm-derived unit denominators for every bin of one frame whose
/// valid support is `[lo, hi)` within the window (full frame: `[0, s)`).
/// One FFT of the masked squared window yields all bins at once.
fn bin_norms(family: DictFamily, tables: &ScaleTables, lo: usize, hi: usize) -> Vec<f64> {
    let s = tables.scale;
    let mut buf = vec![Complex::new(0.0, 0.0); s];
    let mut total = 0.0;
    for j in lo..hi {
        buf[j] = Complex::new(tables.window_sq[j], 0.0);
        total += tables.window_sq[j];
    }
    tables.fft.process(&mut buf);
    (0..s / 2)
        .map(|xi| {
            let modulated = match family {
                DictFamily::Gabor => buf[2 * xi].re,
                DictFamily::Mdct => {
                    let half = s as f64 / 2.0;
                    let m = (2 * xi + 1) as f64;
                    let phase = -PI * (0.5 + half / 2.0) * m / half;
                    (Complex::new(phase.cos(), phase.sin()) * buf[(2 * xi + 1) % s]).re
                }
            };
            let nsq = 0.5 * total + 0.5 * modulated;
            if nsq > 1e-300 {
                nsq.sqrt()
            } else {
                0.0
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Coefficient table
// ---------------------------------------------------------------------------

pub struct ScaleCoeffs {
    pub scale_index: usize,
    pub shift: i64,
    pub bins: usize,
    pub frame_times: Vec<i64>,
    /// Frame-major: `values[frame * bins + bin]`.
    pub values: Vec<f64>,
}

pub struct CoefficientTable {
    scales: Vec<ScaleCoeffs>,
}

impl CoefficientTable {
    pub fn scales(&self) -> &[ScaleCoeffs] {
        &self.scales
    }

    pub fn len(&self) -> usize {
        self.scales.iter().map(|s| s.values.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = (AtomParam, f64)> + '_ {
        self.scales.iter().flat_map(|sc| {
            sc.frame_times.iter().enumerate().flat_map(move |(fi, &u)| {
                (0..sc.bins).map(move |bin| {
                    (
                        AtomParam {
                            scale_index: sc.scale_index,
                            time: u,
                            freq_bin: bin,
                            shift: sc.shift,
                        },
                        sc.values[fi * sc.bins + bin],
                    )
                })
            })
        })
    }

    /// Entry with maximum absolute value. Ties go to the smallest
    /// (scale_index, time, freq_bin) in lexicographic order, which is the
    /// iteration order here. Returns None when every coefficient is zero.
    pub fn best(&self) -> Option<(AtomParam, f64)> {
        let mut best: Option<(AtomParam, f64)> = None;
        for (param, value) in self.iter() {
            match &best {
                Some((_, b)) if value.abs() <= b.abs() => {}
                _ if value == 0.0 => {}
                _ => best = Some((param, value)),
            }
        }
        best
    }

    pub fn get(&self, param: &AtomParam) -> Option<f64> {
        let sc = self.scales.get(param.scale_index)?;
        let fi = sc.frame_times.iter().position(|&u| u == param.time)?;
        if param.freq_bin >= sc.bins {
            return None;
        }
        Some(sc.values[fi * sc.bins + param.freq_bin])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Xoshiro256;

    fn gabor_config(scales: Vec<usize>, n: usize) -> DictConfig {
        DictConfig::new(scales, n, WindowKind::Hann, DictFamily::Gabor).unwrap()
    }

    fn mdct_config(scales: Vec<usize>, n: usize) -> DictConfig {
        DictConfig::new(scales, n, WindowKind::Sine, DictFamily::Mdct).unwrap()
    }

    fn random_signal(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = Xoshiro256::new(seed);
        (0..n).map(|_| rng.next_normal()).collect()
    }

    /// Brute-force projection oracle: enumerate every subdictionary atom and
    /// take plain dot products with dense waveforms.
    fn naive_project(residual: &[f64], sub: &SubdictSpec) -> Vec<(AtomParam, f64)> {
        let config = sub.config();
        let mut out = Vec::new();
        for (k, _) in config.scales().iter().enumerate() {
            for &u in &sub.frame_times(k) {
                for bin in 0..config.bins(k) {
                    let param = AtomParam {
                        scale_index: k,
                        time: u,
                        freq_bin: bin,
                        shift: sub.shifts()[k],
                    };
                    let v = match atom_sparse(&param, config) {
                        Ok(atom) => atom.dot(residual),
                        Err(_) => 0.0,
                    };
                    out.push((param, v));
                }
            }
        }
        out
    }

    #[test]
    fn config_rejects_bad_scales() {
        assert!(DictConfig::new(vec![8, 8], 64, WindowKind::Hann, DictFamily::Gabor).is_err());
        assert!(DictConfig::new(vec![7], 64, WindowKind::Hann, DictFamily::Gabor).is_err());
        assert!(DictConfig::new(vec![128], 64, WindowKind::Hann, DictFamily::Gabor).is_err());
        assert!(DictConfig::new(vec![], 64, WindowKind::Hann, DictFamily::Gabor).is_err());
    }

    #[test]
    fn config_text_roundtrip() {
        let c = gabor_config(vec![32, 128, 512], 2048);
        assert_eq!(DictConfig::from_text(&c.to_text()).unwrap(), c);
        let m = mdct_config(vec![128, 1024], 8192);
        assert_eq!(DictConfig::from_text(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn dict_size_full_gabor_formula() {
        let c = gabor_config(vec![4], 8);
        assert_eq!(dict_size(&c, None), 16);
        let c = gabor_config(vec![32, 128, 512], 10_000);
        assert_eq!(dict_size(&c, None), 3_360_000);
    }

    #[test]
    fn dict_size_coarse_subdict_is_kn() {
        let c = gabor_config(vec![32, 128, 512], 10_000);
        let sub = SubdictSpec::coarse(c.clone());
        // floor-division frame grids: sum over k of floor(2N/s_k) * s_k/2.
        let expected: u64 = c
            .scales()
            .iter()
            .map(|&s| (2 * 10_000 / s) as u64 * (s / 2) as u64)
            .sum();
        assert_eq!(dict_size(&c, Some(&sub)), expected);
        // With scales dividing 2N the count is exactly K*N.
        let c2 = gabor_config(vec![32, 128, 512], 8192);
        let sub2 = SubdictSpec::coarse(c2.clone());
        assert_eq!(dict_size(&c2, Some(&sub2)), 3 * 8192);
    }

    #[test]
    fn dict_size_subsampling_halves() {
        let c = gabor_config(vec![8], 64);
        let d1 = SubdictSpec::new(c.clone(), vec![0], 1);
        let d2 = SubdictSpec::new(c.clone(), vec![0], 2);
        assert_eq!(dict_size(&c, Some(&d1)), 64);
        assert_eq!(dict_size(&c, Some(&d2)), 32);
    }

    #[test]
    fn atoms_have_unit_norm() {
        for config in [gabor_config(vec![8, 16], 64), mdct_config(vec![8, 16], 64)] {
            for k in 0..2 {
                let s = config.scales()[k] as i64;
                for &u in &[0i64, s / 2, 3 * s / 2, 60] {
                    for bin in 0..config.bins(k) {
                        let param = AtomParam {
                            scale_index: k,
                            time: u,
                            freq_bin: bin,
                            shift: 0,
                        };
                        let atom = atom_sparse(&param, &config).unwrap();
                        let norm: f64 = atom.values.iter().map(|v| v * v).sum();
                        assert!((norm - 1.0).abs() < 1e-12, "{:?}", param);
                    }
                }
            }
        }
    }

    #[test]
    fn gabor_dc_atom_is_window_shaped() {
        // xi = 0, Hann, s = 8, u = 0: support [-4, 4) truncated to [0, 4),
        // so the atom is proportional to the second half of the window.
        let config = gabor_config(vec![8], 16);
        let param = AtomParam {
            scale_index: 0,
            time: 0,
            freq_bin: 0,
            shift: 0,
        };
        let atom = atom_sparse(&param, &config).unwrap();
        assert_eq!(atom.start, 0);
        assert_eq!(atom.values.len(), 4);
        let w = window_samples(WindowKind::Hann, 8);
        let ratio = atom.values[0] / w[4];
        for (v, wj) in atom.values.iter().zip(&w[4..8]) {
            assert!((v / wj - ratio).abs() < 1e-12);
        }
    }

    #[test]
    fn gabor_shift_equivariance() {
        // Boundary-free atoms differing only by time translate exactly.
        let config = gabor_config(vec![16], 128);
        for bin in 0..8 {
            let a = atom_sparse(
                &AtomParam {
                    scale_index: 0,
                    time: 40,
                    freq_bin: bin,
                    shift: 0,
                },
                &config,
            )
            .unwrap();
            let b = atom_sparse(
                &AtomParam {
                    scale_index: 0,
                    time: 43,
                    freq_bin: bin,
                    shift: 3,
                },
                &config,
            )
            .unwrap();
            assert_eq!(b.start, a.start + 3);
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn empty_support_errors() {
        let config = gabor_config(vec![8], 64);
        let param = AtomParam {
            scale_index: 0,
            time: -10,
            freq_bin: 0,
            shift: 0,
        };
        assert!(matches!(
            atom_sparse(&param, &config),
            Err(DictError::EmptySupport)
        ));
    }

    #[test]
    fn mdct_atom_rejects_off_grid_time() {
        let config = mdct_config(vec![8], 64);
        let bad = AtomParam {
            scale_index: 0,
            time: 3,
            freq_bin: 1,
            shift: 0,
        };
        assert!(mdct_atom(&bad, &config).is_err());
        let good = AtomParam {
            scale_index: 0,
            time: 4,
            freq_bin: 1,
            shift: 0,
        };
        assert!(mdct_atom(&good, &config).is_ok());
    }

    #[test]
    fn mdct_same_frame_bins_are_orthogonal() {
        let config = mdct_config(vec![16], 128);
        for b1 in 0..8 {
            for b2 in (b1 + 1)..8 {
                let a = atom_sparse(
                    &AtomParam {
                        scale_index: 0,
                        time: 40,
                        freq_bin: b1,
                        shift: 0,
                    },
                    &config,
                )
                .unwrap()
                .to_dense(128);
                let b = atom_sparse(
                    &AtomParam {
                        scale_index: 0,
                        time: 40,
                        freq_bin: b2,
                        shift: 0,
                    },
                    &config,
                )
                .unwrap();
                assert!(b.dot(&a).abs() < 1e-10, "bins {} {}", b1, b2);
            }
        }
    }

    #[test]
    fn project_matches_naive_gabor() {
        let config = gabor_config(vec![8, 16], 64);
        let residual = random_signal(64, 11);
        for (shifts, d) in [(vec![0i64, 0], 1u32), (vec![-2, 3], 1), (vec![1, -4], 2)] {
            let sub = SubdictSpec::new(config.clone(), shifts, d);
            let table = ProjectionEngine::new(config.clone()).project(&residual, &sub);
            let oracle = naive_project(&residual, &sub);
            assert_eq!(table.len(), oracle.len());
            for ((p1, v1), (p2, v2)) in table.iter().zip(oracle) {
                assert_eq!(p1, p2);
                let tol = 1e-10 * v2.abs().max(1.0);
                assert!((v1 - v2).abs() < tol, "{:?}: {} vs {}", p1, v1, v2);
            }
        }
    }

    #[test]
    fn project_matches_naive_mdct() {
        let config = mdct_config(vec![8, 32], 128);
        let residual = random_signal(128, 5);
        for (shifts, d) in [(vec![0i64, 0], 1u32), (vec![-2, 7], 1), (vec![2, -8], 4)] {
            let sub = SubdictSpec::new(config.clone(), shifts, d);
            let table = ProjectionEngine::new(config.clone()).project(&residual, &sub);
            let oracle = naive_project(&residual, &sub);
            assert_eq!(table.len(), oracle.len());
            for ((p1, v1), (p2, v2)) in table.iter().zip(oracle) {
                assert_eq!(p1, p2);
                let tol = 1e-10 * v2.abs().max(1.0);
                assert!((v1 - v2).abs() < tol, "{:?}: {} vs {}", p1, v1, v2);
            }
        }
    }

    #[test]
    fn self_projection_is_one_and_maximal() {
        for config in [gabor_config(vec![16], 128), mdct_config(vec![16], 128)] {
            let sub = SubdictSpec::coarse(config.clone());
            let param = AtomParam {
                scale_index: 0,
                time: sub.frame_times(0)[4],
                freq_bin: 3,
                shift: 0,
            };
            let atom = atom_sparse(&param, &config).unwrap().to_dense(128);
            let table = ProjectionEngine::new(config.clone()).project(&atom, &sub);
            let own = table.get(&param).unwrap();
            assert!((own - 1.0).abs() < 1e-10);
            let (best, v) = table.best().unwrap();
            assert_eq!(best, param);
            assert!((v - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_residual_projects_to_zero() {
        let config = gabor_config(vec![8], 64);
        let sub = SubdictSpec::coarse(config.clone());
        let table = ProjectionEngine::new(config).project(&vec![0.0; 64], &sub);
        assert!(table.iter().all(|(_, v)| v == 0.0));
        assert!(table.best().is_none());
    }

    #[test]
    fn mdct_single_scale_is_tight_frame_on_interior() {
        // For tau = 0, d = 1, a single MDCT scale preserves the energy of a
        // signal supported away from the edges.
        let n = 256;
        let s = 16;
        let config = mdct_config(vec![s], n);
        let sub = SubdictSpec::coarse(config.clone());
        let mut f = vec![0.0; n];
        let mut rng = Xoshiro256::new(3);
        for x in f.iter_mut().take(n - 2 * s).skip(2 * s) {
            *x = rng.next_normal();
        }
        let energy: f64 = f.iter().map(|x| x * x).sum();
        let table = ProjectionEngine::new(config).project(&f, &sub);
        let coeff_energy: f64 = table.iter().map(|(_, v)| v * v).sum();
        assert!(
            (coeff_energy - energy).abs() < 1e-9 * energy,
            "{} vs {}",
            coeff_energy,
            energy
        );
    }

    #[test]
    fn best_breaks_ties_lexicographically() {
        // Two mirror-symmetric impulses produce exactly tied coefficients.
        let config = gabor_config(vec![8], 64);
        let sub = SubdictSpec::coarse(config.clone());
        let mut f = vec![0.0; 64];
        f[16] = 1.0;
        f[48] = 1.0;
        let table = ProjectionEngine::new(config).project(&f, &sub);
        let (best, bv) = table.best().unwrap();
        let tied: Vec<AtomParam> = table
            .iter()
            .filter(|(_, v)| (v.abs() - bv.abs()).abs() < 1e-12)
            .map(|(p, _)| p)
            .collect();
        assert!(tied.len() >= 2, "expected a tie, got {:?}", tied);
        assert_eq!(best, *tied.iter().min().unwrap());
    }
}
