//! The generic two-step greedy engine: atom selection over the iteration's
//! subdictionary, then an MP, OMP or LoMP update, with stopping criteria and
//! a per-iteration residual trace.

use std::io::Write;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::dictionary::{
    atom_sparse, AtomParam, CoefficientTable, DictConfig, DictError, DictFamily, ProjectionEngine,
    SparseAtom,
};
#[cfg(test)]
use crate::dictionary::SubdictSpec;
use crate::signal::{srr_from_energies, Signal};
use crate::subseq::{subdict_at, SequenceSpec};

#[derive(Debug, Error)]
pub enum PursuitError {
    #[error("coefficient table is all zero: residual is exactly represented")]
    ExactRepresentation,
    #[error("invalid pursuit config: {0}")]
    InvalidConfig(String),
    #[error("selected atoms are numerically dependent")]
    DependentAtoms,
    #[error(transparent)]
    Dict(#[from] DictError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Mp,
    Omp,
    Lomp,
}

/// Where step 1 searches: a sequence of subdictionaries, or the full
/// dictionary (Gabor only; used as the reference algorithm in experiments).
#[derive(Debug, Clone)]
pub enum Search {
    Sequence(SequenceSpec),
    Full,
}

#[derive(Debug, Clone)]
pub struct StopRule {
    pub target_srr: Option<f64>,
    pub max_atoms: Option<usize>,
    /// Relative residual-energy floor guarding against infinite loops on
    /// numerically exhausted residuals.
    pub residual_floor: f64,
}

impl StopRule {
    pub fn srr(db: f64) -> Self {
        StopRule {
            target_srr: Some(db),
            max_atoms: None,
            residual_floor: 1e-12,
        }
    }

    pub fn atoms(n: usize) -> Self {
        StopRule {
            target_srr: None,
            max_atoms: Some(n),
            residual_floor: 1e-12,
        }
    }

    pub fn with_max_atoms(mut self, n: usize) -> Self {
        self.max_atoms = Some(n);
        self
    }
}

#[derive(Debug, Clone)]
pub struct PursuitConfig {
    pub variant: Variant,
    pub stop: StopRule,
    pub search: Search,
    pub dict: DictConfig,
}

impl PursuitConfig {
    fn validate(&self) -> Result<(), PursuitError> {
        if self.stop.target_srr.is_none() && self.stop.max_atoms.is_none() {
            return Err(PursuitError::InvalidConfig(
                "need at least one stop criterion".into(),
            ));
        }
        if self.variant == Variant::Omp {
            if let Some(m) = self.stop.max_atoms {
                if m > self.dict.signal_length() {
                    return Err(PursuitError::InvalidConfig(
                        "OMP max_atoms exceeds signal length".into(),
                    ));
                }
            }
        }
        if matches!(self.search, Search::Full) && self.dict.family() != DictFamily::Gabor {
            return Err(PursuitError::InvalidConfig(
                "full-dictionary search is only defined for the Gabor family".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ApproxEntry {
    pub param: AtomParam,
    pub weight: f64,
    pub iteration: usize,
}

/// The output of a pursuit: selected atoms with weights, plus the residual
/// energy after every iteration (`trace[0]` is the signal energy).
#[derive(Debug, Clone)]
pub struct Approximant {
    pub entries: Vec<ApproxEntry>,
    pub reference_energy: f64,
    pub trace: Vec<f64>,
    pub budget_exhausted: bool,
    pub sample_rate: u32,
}

impl Approximant {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sums weight * atom in iteration order. The summation order is part of
    /// the codec contract, so keep it exactly as written.
    pub fn synthesize(&self, config: &DictConfig) -> Result<Signal, PursuitError> {
        let mut samples = vec![0.0; config.signal_length()];
        for entry in &self.entries {
            let atom = atom_sparse(&entry.param, config)?;
            atom.add_scaled(&mut samples, entry.weight);
        }
        Ok(Signal::new(samples, self.sample_rate).expect("length is positive"))
    }

    pub fn final_residual_energy(&self) -> f64 {
        *self.trace.last().expect("trace is never empty")
    }

    /// SRR implied by the energy trace (approximant energy taken as
    /// ||f||^2 - ||R||^2, exact under the MP energy conservation).
    pub fn srr_db(&self) -> f64 {
        let r = self.final_residual_energy();
        srr_from_energies(self.reference_energy - r, r)
    }

    /// Per-iteration CSV: iteration, scale, u, xi, tau, alpha,
    /// residual_energy, srr_db.
    pub fn write_trace_csv<W: Write>(&self, config: &DictConfig, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# {}", config.to_text())?;
        writeln!(
            w,
            "iteration,scale,u,xi,tau,alpha,residual_energy,srr_db"
        )?;
        for (i, entry) in self.entries.iter().enumerate() {
            let r = self.trace[i + 1];
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                entry.iteration,
                config.scales()[entry.param.scale_index],
                entry.param.time,
                entry.param.freq_bin,
                entry.param.shift,
                entry.weight,
                r,
                srr_from_energies(self.reference_energy - r, r)
            )?;
        }
        Ok(())
    }
}

/// Maximum-magnitude entry of a coefficient table. Ties break toward the
/// smallest (scale, time, bin). An all-zero table means the residual is
/// exactly represented already.
pub fn select_atom(table: &CoefficientTable) -> Result<(AtomParam, f64), PursuitError> {
    table.best().ok_or(PursuitError::ExactRepresentation)
}

/// MP residual update: `R <- R - weight * atom`.
pub fn mp_update(residual: &mut [f64], atom: &SparseAtom, weight: f64) {
    atom.add_scaled(residual, -weight);
}

/// Incremental least-squares state over a growing set of column vectors,
/// backed by a Cholesky factorization of the Gram matrix with rank-1 row
/// appends. Near-dependent columns are rejected before they poison the
/// factorization.
pub struct OlsState {
    cols: Vec<Vec<f64>>,
    /// Lower-triangular rows of the Cholesky factor of the Gram matrix.
    chol: Vec<Vec<f64>>,
    rhs: Vec<f64>,
}

pub const OLS_PIVOT_TOL: f64 = 1e-10;

impl OlsState {
    pub fn new() -> Self {
        OlsState {
            cols: Vec::new(),
            chol: Vec::new(),
            rhs: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    /// Appends a column if it is numerically independent of the current
    /// ones; returns false (leaving the state unchanged) otherwise.
    pub fn try_push(&mut self, col: Vec<f64>, f: &[f64]) -> bool {
        let m = self.cols.len();
        let mut g: Vec<f64> = self
            .cols
            .iter()
            .map(|c| dot(c, &col))
            .collect();
        // Forward-solve L y = g to get the new Cholesky row.
        for i in 0..m {
            let mut v = g[i];
            for j in 0..i {
                v -= self.chol[i][j] * g[j];
            }
            g[i] = v / self.chol[i][i];
        }
        let diag_sq = dot(&col, &col) - g.iter().map(|y| y * y).sum::<f64>();
        if diag_sq < OLS_PIVOT_TOL {
            return false;
        }
        g.push(diag_sq.sqrt());
        self.chol.push(g);
        self.rhs.push(dot(&col, f));
        self.cols.push(col);
        true
    }

    /// Least-squares weights for the current columns.
    pub fn solve(&self) -> Vec<f64> {
        let m = self.cols.len();
        let mut y = vec![0.0; m];
        for i in 0..m {
            let mut v = self.rhs[i];
            for j in 0..i {
                v -= self.chol[i][j] * y[j];
            }
            y[i] = v / self.chol[i][i];
        }
        let mut w = vec![0.0; m];
        for i in (0..m).rev() {
            let mut v = y[i];
            for j in (i + 1)..m {
                v -= self.chol[j][i] * w[j];
            }
            w[i] = v / self.chol[i][i];
        }
        w
    }

    pub fn residual(&self, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let w = self.solve();
        let mut r = f.to_vec();
        for (col, &wi) in self.cols.iter().zip(&w) {
            for (rj, cj) in r.iter_mut().zip(col) {
                *rj -= wi * cj;
            }
        }
        (w, r)
    }
}

impl Default for OlsState {
    fn default() -> Self {
        Self::new()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One-shot orthogonal update: least-squares weights over `selected` and the
/// resulting residual. Errors if the atoms are numerically dependent.
pub fn omp_update(selected: &[Vec<f64>], f: &[f64]) -> Result<(Vec<f64>, Vec<f64>), PursuitError> {
    let mut state = OlsState::new();
    for col in selected {
        if !state.try_push(col.clone(), f) {
            return Err(PursuitError::DependentAtoms);
        }
    }
    Ok(state.residual(f))
}

/// Time-localization refinement: scans every integer shift within
/// +-s_k/4 of the atom's time (other parameters fixed) and returns the
/// position with the largest absolute correlation, together with that
/// correlation. The original position is part of the scanned set, so the
/// returned magnitude never decreases.
pub fn lomp_refine(
    param: &AtomParam,
    residual: &[f64],
    config: &DictConfig,
) -> Result<(AtomParam, f64), PursuitError> {
    let s = config.scales()[param.scale_index];
    let q = (s / 4) as i64;
    let n = residual.len() as i64;

    // Unnormalized kernel of the atom (window * oscillation), length s.
    let dense = atom_kernel(param, config);
    let a0 = match config.family() {
        DictFamily::Gabor => param.time - (s as i64) / 2,
        DictFamily::Mdct => param.time,
    };

    // Cross-correlate the residual segment [a0 - q, a0 + q + s) with the
    // kernel; c[d] is the raw inner product at delta = d - q.
    let seg_len = s + 2 * q as usize;
    let pad = seg_len.next_power_of_two();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(pad);
    let ifft = planner.plan_fft_inverse(pad);
    let mut seg = vec![Complex::new(0.0, 0.0); pad];
    for (i, c) in seg.iter_mut().enumerate().take(seg_len) {
        let t = a0 - q + i as i64;
        if (0..n).contains(&t) {
            *c = Complex::new(residual[t as usize], 0.0);
        }
    }
    let mut ker = vec![Complex::new(0.0, 0.0); pad];
    for (c, &v) in ker.iter_mut().zip(&dense) {
        *c = Complex::new(v, 0.0);
    }
    fft.process(&mut seg);
    fft.process(&mut ker);
    for (a, b) in seg.iter_mut().zip(&ker) {
        *a *= b.conj();
    }
    ifft.process(&mut seg);
    let scale = 1.0 / pad as f64;

    let interior_norm = dense.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut best: Option<(i64, f64)> = None;
    for d in 0..=(2 * q) {
        let delta = d - q;
        let start = a0 + delta;
        let end = start + s as i64;
        let value = if start < 0 || end > n {
            // Truncated candidate: renormalize against the clipped support.
            let cand = AtomParam {
                time: param.time + delta,
                ..*param
            };
            match atom_sparse(&cand, config) {
                Ok(atom) => atom.dot(residual),
                Err(_) => continue,
            }
        } else {
            seg[d as usize].re * scale / interior_norm
        };
        let better = match best {
            None => true,
            Some((_, bv)) => value.abs() > bv.abs(),
        };
        if better {
            best = Some((delta, value));
        }
    }
    let (delta, value) = best.ok_or(PursuitError::ExactRepresentation)?;
    Ok((
        AtomParam {
            time: param.time + delta,
            ..*param
        },
        value,
    ))
}

/// Unnormalized sample values of an atom over its full (untruncated)
/// support.
fn atom_kernel(param: &AtomParam, config: &DictConfig) -> Vec<f64> {
    // Build from a far-interior copy of the atom so no truncation applies,
    // then un-normalize is unnecessary: the caller only needs a fixed
    // multiple of the kernel, and a unit-norm interior copy is exactly that.
    let s = config.scales()[param.scale_index] as i64;
    let n = config.signal_length() as i64;
    let interior_time = match config.family() {
        DictFamily::Gabor => (n / 2 / s) * s + s / 2,
        DictFamily::Mdct => ((n / 2) / s) * s,
    };
    let interior = AtomParam {
        time: interior_time,
        ..*param
    };
    atom_sparse(&interior, config)
        .expect("interior atom support is never empty")
        .values
}

// ---------------------------------------------------------------------------
// Full-dictionary Gabor search
// ---------------------------------------------------------------------------

struct FullScale {
    scale: usize,
    pad: usize,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    /// conj(FFT(kernel)) per bin, at pad length.
    kernels: Vec<Vec<Complex<f64>>>,
    /// Unit denominators: interior, and per head/tail truncation depth.
    interior_norms: Vec<f64>,
    head_norms: Vec<Vec<f64>>, // [h][bin], h = samples cut at the front
    tail_norms: Vec<Vec<f64>>, // [t][bin]
}

/// Exhaustive argmax over the full Gabor dictionary (every integer time in
/// [0, N), every bin), via per-bin FFT cross-correlation. Used by the
/// reference Full MP algorithm and by oracle checks.
pub struct FullGaborEngine {
    config: DictConfig,
    scales: Vec<FullScale>,
}

impl FullGaborEngine {
    pub fn new(config: DictConfig) -> Result<Self, PursuitError> {
        if config.family() != DictFamily::Gabor {
            return Err(PursuitError::InvalidConfig(
                "full search requires a Gabor config".into(),
            ));
        }
        let n = config.signal_length();
        let mut planner = FftPlanner::new();
        let scales = config
            .scales()
            .iter()
            .enumerate()
            .map(|(k, &s)| {
                let pad = (n + s).next_power_of_two();
                let fft = planner.plan_fft_forward(pad);
                let ifft = planner.plan_fft_inverse(pad);
                let bins = config.bins(k);
                let window = window_for(&config, s);
                let mut kernels = Vec::with_capacity(bins);
                let mut interior_norms = Vec::with_capacity(bins);
                let mut kernel_sq = Vec::with_capacity(bins); // [bin][j]
                for bin in 0..bins {
                    let vals: Vec<f64> = (0..s)
                        .map(|j| window[j] * gabor_oscillation(s, bin, j))
                        .collect();
                    interior_norms.push(vals.iter().map(|v| v * v).sum::<f64>().sqrt());
                    let mut buf = vec![Complex::new(0.0, 0.0); pad];
                    for (c, &v) in buf.iter_mut().zip(&vals) {
                        *c = Complex::new(v, 0.0);
                    }
                    fft.process(&mut buf);
                    for c in buf.iter_mut() {
                        *c = c.conj();
                    }
                    kernel_sq.push(vals.iter().map(|v| v * v).collect::<Vec<f64>>());
                    kernels.push(buf);
                }
                // Truncated norms by running subtraction from the full norm.
                let half = s / 2;
                let mut head_norms = vec![vec![0.0; bins]; half + 1];
                let mut tail_norms = vec![vec![0.0; bins]; half + 1];
                for bin in 0..bins {
                    let full: f64 = kernel_sq[bin].iter().sum();
                    let mut acc = full;
                    head_norms[0][bin] = full.max(0.0).sqrt();
                    for h in 1..=half {
                        acc -= kernel_sq[bin][h - 1];
                        head_norms[h][bin] = acc.max(0.0).sqrt();
                    }
                    acc = full;
                    tail_norms[0][bin] = full.max(0.0).sqrt();
                    for t in 1..=half {
                        acc -= kernel_sq[bin][s - t];
                        tail_norms[t][bin] = acc.max(0.0).sqrt();
                    }
                }
                FullScale {
                    scale: s,
                    pad,
                    fft,
                    ifft,
                    kernels,
                    interior_norms,
                    head_norms,
                    tail_norms,
                }
            })
            .collect();
        Ok(FullGaborEngine { config, scales })
    }

    pub fn config(&self) -> &DictConfig {
        &self.config
    }

    /// Maximum-|correlation| atom over every (scale, time, bin). Ties break
    /// toward the smallest (scale, time, bin). None if all zero.
    pub fn best_atom(&self, residual: &[f64]) -> Option<(AtomParam, f64)> {
        let n = residual.len();
        let mut best: Option<(AtomParam, f64)> = None;
        for (k, fs) in self.scales.iter().enumerate() {
            let s = fs.scale;
            let half = s / 2;
            let mut spec = vec![Complex::new(0.0, 0.0); fs.pad];
            for (c, &v) in spec.iter_mut().zip(residual) {
                *c = Complex::new(v, 0.0);
            }
            fs.fft.process(&mut spec);
            let inv_pad = 1.0 / fs.pad as f64;
            let mut buf = vec![Complex::new(0.0, 0.0); fs.pad];
            for (bin, kernel) in fs.kernels.iter().enumerate() {
                for ((b, sp), kc) in buf.iter_mut().zip(&spec).zip(kernel) {
                    *b = sp * kc;
                }
                fs.ifft.process(&mut buf);
                for u in 0..n {
                    let m = u as i64 - half as i64;
                    let idx = m.rem_euclid(fs.pad as i64) as usize;
                    let raw = buf[idx].re * inv_pad;
                    let head = half.saturating_sub(u);
                    let tail = (u + half).saturating_sub(n);
                    let norm = if head == 0 && tail == 0 {
                        fs.interior_norms[bin]
                    } else if head > 0 {
                        fs.head_norms[head][bin]
                    } else {
                        fs.tail_norms[tail][bin]
                    };
                    if norm <= 0.0 {
                        continue;
                    }
                    let value = raw / norm;
                    if value == 0.0 {
                        continue;
                    }
                    let better = match &best {
                        None => true,
                        Some((bp, bv)) => {
                            value.abs() > bv.abs()
                                || (value.abs() == bv.abs()
                                    && (k, u as i64, bin)
                                        < (bp.scale_index, bp.time, bp.freq_bin))
                        }
                    };
                    if better {
                        best = Some((
                            AtomParam {
                                scale_index: k,
                                time: u as i64,
                                freq_bin: bin,
                                shift: 0,
                            },
                            value,
                        ));
                    }
                }
            }
        }
        best
    }
}

fn window_for(config: &DictConfig, s: usize) -> Vec<f64> {
    // The dictionary module owns window generation; reuse it through a
    // far-interior unit atom at bin 0 (pure window shape).
    let param = AtomParam {
        scale_index: config
            .scales()
            .iter()
            .position(|&x| x == s)
            .expect("scale belongs to config"),
        time: interior_time_for(config, s),
        freq_bin: 0,
        shift: 0,
    };
    let atom = atom_sparse(&param, config).expect("interior atom exists");
    // Un-normalize so that kernel construction matches atom_sparse up to a
    // single global factor (irrelevant for argmax and norms ratios, but keep
    // max near 1 for conditioning).
    atom.values
}

fn interior_time_for(config: &DictConfig, s: usize) -> i64 {
    let n = config.signal_length() as i64;
    let s = s as i64;
    match config.family() {
        DictFamily::Gabor => (n / 2 / s) * s + s / 2,
        DictFamily::Mdct => ((n / 2) / s) * s,
    }
}

fn gabor_oscillation(s: usize, bin: usize, j: usize) -> f64 {
    (2.0 * std::f64::consts::PI * bin as f64 * (j as f64 - s as f64 / 2.0) / s as f64).cos()
}

// ---------------------------------------------------------------------------
// The pursuit loop
// ---------------------------------------------------------------------------

/// Runs the configured pursuit on `f`. Deterministic given (f, config).
pub fn run(f: &Signal, config: &PursuitConfig) -> Result<Approximant, PursuitError> {
    config.validate()?;
    let reference_energy = f.energy();
    if reference_energy <= 0.0 {
        return Err(PursuitError::InvalidConfig("zero-energy signal".into()));
    }
    if f.len() != config.dict.signal_length() {
        return Err(PursuitError::Dict(DictError::LengthMismatch(
            f.len(),
            config.dict.signal_length(),
        )));
    }
    let engine = match config.search {
        Search::Sequence(_) => Some(ProjectionEngine::new(config.dict.clone())),
        Search::Full => None,
    };
    let full_engine = match config.search {
        Search::Full => Some(FullGaborEngine::new(config.dict.clone())?),
        Search::Sequence(_) => None,
    };

    let mut residual: Vec<f64> = f.samples().to_vec();
    let mut residual_energy = reference_energy;
    let mut entries: Vec<ApproxEntry> = Vec::new();
    let mut trace = vec![reference_energy];
    let mut ols = OlsState::new();
    let hard_cap = config.stop.max_atoms.unwrap_or(usize::MAX);
    let mut budget_exhausted = false;

    loop {
        // Stop checks on the state *before* the next selection.
        if let Some(target) = config.stop.target_srr {
            let db = srr_from_energies(reference_energy - residual_energy, residual_energy);
            if db >= target {
                break;
            }
        }
        if residual_energy <= config.stop.residual_floor * reference_energy {
            break;
        }
        if entries.len() >= hard_cap {
            budget_exhausted = config.stop.target_srr.is_some();
            break;
        }

        let iteration = entries.len();
        let selection: Result<(AtomParam, f64, Option<CoefficientTable>), PursuitError> =
            match &config.search {
                Search::Sequence(spec) => {
                    let sub = subdict_at(spec, &config.dict, iteration);
                    let table = engine
                        .as_ref()
                        .expect("engine exists for sequence search")
                        .project(&residual, &sub);
                    select_atom(&table).map(|(p, v)| (p, v, Some(table)))
                }
                Search::Full => full_engine
                    .as_ref()
                    .expect("full engine exists")
                    .best_atom(&residual)
                    .ok_or(PursuitError::ExactRepresentation)
                    .map(|(p, v)| (p, v, None)),
            };
        let (mut param, mut value, table) = match selection {
            Ok(x) => x,
            Err(PursuitError::ExactRepresentation) => break,
            Err(e) => return Err(e),
        };

        if config.variant == Variant::Lomp {
            let (refined, refined_value) = lomp_refine(&param, &residual, &config.dict)?;
            param = refined;
            value = refined_value;
        }

        match config.variant {
            Variant::Mp | Variant::Lomp => {
                let atom = atom_sparse(&param, &config.dict)?;
                mp_update(&mut residual, &atom, value);
                entries.push(ApproxEntry {
                    param,
                    weight: value,
                    iteration,
                });
            }
            Variant::Omp => {
                // Insert the best candidate that keeps the basis independent.
                let table = table.expect("OMP runs on subdictionary sequences");
                let mut candidates: Vec<(AtomParam, f64)> =
                    table.iter().filter(|(_, v)| *v != 0.0).collect();
                candidates.sort_by(|(pa, va), (pb, vb)| {
                    vb.abs()
                        .partial_cmp(&va.abs())
                        .expect("finite coefficients")
                        .then_with(|| pa.cmp(pb))
                });
                let mut inserted = None;
                for (p, v) in candidates {
                    let atom = atom_sparse(&p, &config.dict)?;
                    if ols.try_push(atom.to_dense(f.len()), f.samples()) {
                        inserted = Some((p, v));
                        break;
                    }
                }
                match inserted {
                    Some((p, v)) => {
                        let (_, r) = ols.residual(f.samples());
                        residual = r;
                        entries.push(ApproxEntry {
                            param: p,
                            weight: v, // replaced by the final solve below
                            iteration,
                        });
                    }
                    None => break, // every remaining atom is dependent
                }
            }
        }
        residual_energy = residual.iter().map(|x| x * x).sum();
        trace.push(residual_energy);
    }

    if config.variant == Variant::Omp && !entries.is_empty() {
        let weights = ols.solve();
        for (entry, w) in entries.iter_mut().zip(weights) {
            entry.weight = w;
        }
    }

    Ok(Approximant {
        entries,
        reference_energy,
        trace,
        budget_exhausted,
        sample_rate: f.sample_rate(),
    })
}
