//! Bitstream codec for approximants. The subdictionary sequence is
//! regenerated at the decoder from the seed carried in the header, so an
//! atom costs only its index within the (small) subdictionary of its
//! iteration plus an entropy-coded quantized weight. Decoding sums atoms in
//! iteration order with no reassociation; this summation order is part of
//! the format contract and makes decode bit-exact against the encoder-side
//! reconstruction.

use thiserror::Error;

use crate::dictionary::{atom_sparse, AtomParam, DictConfig, DictError, SubdictSpec};
use crate::pursuit::{run, Approximant, PursuitConfig, PursuitError, Search};
use crate::signal::{srr, Signal, SignalError};
use crate::subseq::{subdict_at, SequenceKind, SequenceSpec};

const MAGIC: &[u8; 4] = b"RSSP";
const VERSION: u8 = 1;
const FLAG_SHIFT_BITS: u8 = 0x01;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("invalid bitstream: {0}")]
    InvalidStream(String),
    #[error("atom count exceeds the 32-bit format limit")]
    TooManyAtoms,
    #[error("atom at iteration {0} is not on the subdictionary grid")]
    OffGridAtom(usize),
    #[error(transparent)]
    Dict(#[from] DictError),
    #[error(transparent)]
    Pursuit(#[from] PursuitError),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

// ---------------------------------------------------------------------------
// Quantizer
// ---------------------------------------------------------------------------

/// Uniform mid-tread quantizer over [-alpha_max, alpha_max]: symbol 0 sits
/// at zero, step 2*alpha_max/(2^B - 1), symbols clamped to |q| <= 2^(B-1)-1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerSpec {
    pub bits: u8,
    pub alpha_max: f64,
}

impl QuantizerSpec {
    pub fn new(bits: u8, alpha_max: f64) -> Self {
        assert!((2..=24).contains(&bits), "weight bits out of 2..=24");
        assert!(alpha_max > 0.0 && alpha_max.is_finite());
        QuantizerSpec { bits, alpha_max }
    }

    pub fn step(&self) -> f64 {
        2.0 * self.alpha_max / ((1u64 << self.bits) - 1) as f64
    }

    pub fn max_symbol(&self) -> i32 {
        (1i32 << (self.bits - 1)) - 1
    }

    /// Round half away from zero, then clamp. The bool reports clamping.
    pub fn quantize(&self, alpha: f64) -> (i32, bool) {
        debug_assert!(alpha.is_finite());
        let scaled = alpha / self.step();
        let rounded = if scaled >= 0.0 {
            (scaled + 0.5).floor()
        } else {
            (scaled - 0.5).ceil()
        };
        let max = self.max_symbol() as f64;
        if rounded > max {
            (self.max_symbol(), true)
        } else if rounded < -max {
            (-self.max_symbol(), true)
        } else {
            (rounded as i32, false)
        }
    }

    pub fn dequantize(&self, symbol: i32) -> f64 {
        symbol as f64 * self.step()
    }
}

// ---------------------------------------------------------------------------
// Bit-level I/O (MSB-first)
// ---------------------------------------------------------------------------

#[derive(Debug, Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    /// Bits used in the last byte (0 = byte-aligned).
    partial: u8,
}

impl BitWriter {
    pub fn new() -> Self {
        BitWriter::default()
    }

    pub fn bit_len(&self) -> u64 {
        self.bytes.len() as u64 * 8 - if self.partial == 0 { 0 } else { (8 - self.partial) as u64 }
    }

    pub fn write_bits(&mut self, value: u64, nbits: u8) {
        debug_assert!(nbits <= 64);
        debug_assert!(nbits == 64 || value < (1u64 << nbits).max(1));
        for i in (0..nbits).rev() {
            let bit = ((value >> i) & 1) as u8;
            if self.partial == 0 {
                self.bytes.push(0);
            }
            let last = self.bytes.last_mut().expect("pushed above");
            *last |= bit << (7 - self.partial);
            self.partial = (self.partial + 1) % 8;
        }
    }

    pub fn write_bytes(&mut self, data: &[u8]) {
        for &b in data {
            self.write_bits(b as u64, 8);
        }
    }

    /// Pads to a byte boundary and returns (bytes, padding bits added).
    pub fn finish(mut self) -> (Vec<u8>, u8) {
        let pad = if self.partial == 0 { 0 } else { 8 - self.partial };
        self.partial = 0;
        (self.bytes, pad)
    }
}

#[derive(Debug)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: u64, // in bits
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        BitReader { bytes, pos: 0 }
    }

    pub fn read_bits(&mut self, nbits: u8) -> Result<u64, CodecError> {
        let mut v = 0u64;
        for _ in 0..nbits {
            let byte = (self.pos / 8) as usize;
            if byte >= self.bytes.len() {
                return Err(CodecError::InvalidStream("truncated payload".into()));
            }
            let bit = (self.bytes[byte] >> (7 - (self.pos % 8))) & 1;
            v = (v << 1) | bit as u64;
            self.pos += 1;
        }
        Ok(v)
    }

    pub fn read_bytes(&mut self, n: usize) -> Result<Vec<u8>, CodecError> {
        (0..n).map(|_| self.read_bits(8).map(|b| b as u8)).collect()
    }
}

// ---------------------------------------------------------------------------
// Canonical Huffman
// ---------------------------------------------------------------------------

/// Static canonical Huffman code over weight symbols. Only the (symbol,
/// length) table travels in the header; codes are reassigned canonically
/// (sorted by length, then symbol) on both sides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HuffmanCode {
    /// Sorted by symbol.
    pub lengths: Vec<(i32, u8)>,
}

impl HuffmanCode {
    /// Builds code lengths from symbol frequencies. A single distinct
    /// symbol gets a 1-bit code.
    pub fn from_frequencies(freqs: &[(i32, u64)]) -> Self {
        assert!(!freqs.is_empty());
        if freqs.len() == 1 {
            return HuffmanCode {
                lengths: vec![(freqs[0].0, 1)],
            };
        }
        // Package-merge-free tree build with deterministic tie-breaks:
        // (count, min symbol in subtree) orders the heap.
        #[derive(Debug)]
        struct Node {
            count: u64,
            min_symbol: i32,
            leaves: Vec<usize>, // indexes into freqs
            depth_bump: Vec<u8>,
        }
        let mut pool: Vec<Node> = freqs
            .iter()
            .enumerate()
            .map(|(idx, &(sym, count))| Node {
                count,
                min_symbol: sym,
                leaves: vec![idx],
                depth_bump: vec![0],
            })
            .collect();
        let mut depths = vec![0u8; freqs.len()];
        while pool.len() > 1 {
            pool.sort_by(|a, b| {
                a.count
                    .cmp(&b.count)
                    .then_with(|| a.min_symbol.cmp(&b.min_symbol))
            });
            let a = pool.remove(0);
            let b = pool.remove(0);
            let mut leaves = a.leaves;
            let mut bumps = a.depth_bump;
            leaves.extend(b.leaves);
            bumps.extend(b.depth_bump);
            for (l, d) in leaves.iter().zip(bumps.iter_mut()) {
                *d += 1;
                depths[*l] = *d;
            }
            pool.push(Node {
                count: a.count + b.count,
                min_symbol: a.min_symbol.min(b.min_symbol),
                leaves,
                depth_bump: bumps,
            });
        }
        let mut lengths: Vec<(i32, u8)> = freqs
            .iter()
            .zip(&depths)
            .map(|(&(sym, _), &d)| (sym, d))
            .collect();
        lengths.sort_by_key(|&(sym, _)| sym);
        HuffmanCode { lengths }
    }

    /// Canonical code assignment: codes increase with (length, symbol).
    pub fn codebook(&self) -> Vec<(i32, u64, u8)> {
        let mut order: Vec<(i32, u8)> = self.lengths.clone();
        order.sort_by_key(|&(sym, len)| (len, sym));
        let mut out = Vec::with_capacity(order.len());
        let mut code = 0u64;
        let mut prev_len = 0u8;
        for (sym, len) in order {
            code <<= len - prev_len;
            out.push((sym, code, len));
            code += 1;
            prev_len = len;
        }
        out.sort_by_key(|&(sym, _, _)| sym);
        out
    }

    pub fn encode_symbol(
        &self,
        codebook: &[(i32, u64, u8)],
        symbol: i32,
        w: &mut BitWriter,
    ) -> Result<u8, CodecError> {
        let entry = codebook
            .binary_search_by_key(&symbol, |&(s, _, _)| s)
            .map_err(|_| CodecError::InvalidStream(format!("symbol {} not in code", symbol)))?;
        let (_, code, len) = codebook[entry];
        w.write_bits(code, len);
        Ok(len)
    }

    pub fn decode_symbol(&self, r: &mut BitReader) -> Result<i32, CodecError> {
        let mut book: Vec<(i32, u64, u8)> = self.codebook();
        book.sort_by_key(|&(sym, _, len)| (len, sym));
        let mut code = 0u64;
        let mut len = 0u8;
        let mut idx = 0usize;
        let max_len = book.last().map(|&(_, _, l)| l).unwrap_or(0);
        while len < max_len {
            code = (code << 1) | r.read_bits(1)?;
            len += 1;
            while idx < book.len() && book[idx].2 == len {
                if book[idx].1 == code {
                    return Ok(book[idx].0);
                }
                idx += 1;
            }
        }
        Err(CodecError::InvalidStream("invalid weight code".into()))
    }

    pub fn serialize(&self, w: &mut BitWriter) {
        w.write_bits(self.lengths.len() as u64, 32);
        for &(sym, len) in &self.lengths {
            w.write_bits(sym as u32 as u64, 32);
            w.write_bits(len as u64, 8);
        }
    }

    pub fn deserialize(r: &mut BitReader) -> Result<Self, CodecError> {
        let n = r.read_bits(32)? as usize;
        if n == 0 || n > 1 << 24 {
            return Err(CodecError::InvalidStream("bad huffman table size".into()));
        }
        let mut lengths = Vec::with_capacity(n);
        let mut prev: Option<i32> = None;
        for _ in 0..n {
            let sym = r.read_bits(32)? as u32 as i32;
            let len = r.read_bits(8)? as u8;
            if len == 0 || len > 64 {
                return Err(CodecError::InvalidStream("bad huffman length".into()));
            }
            if let Some(p) = prev {
                if sym <= p {
                    return Err(CodecError::InvalidStream("unsorted huffman table".into()));
                }
            }
            prev = Some(sym);
            lengths.push((sym, len));
        }
        // Kraft check so a corrupt table cannot produce ambiguous codes.
        let kraft: f64 = lengths.iter().map(|&(_, l)| 0.5f64.powi(l as i32)).sum();
        if lengths.len() > 1 && kraft > 1.0 + 1e-9 {
            return Err(CodecError::InvalidStream("huffman table violates Kraft".into()));
        }
        Ok(HuffmanCode { lengths })
    }
}

// ---------------------------------------------------------------------------
// Atom indexing within a subdictionary
// ---------------------------------------------------------------------------

fn ceil_log2(n: u64) -> u8 {
    if n <= 1 {
        0
    } else {
        (64 - (n - 1).leading_zeros()) as u8
    }
}

/// Number of atoms in the subdictionary grid (frames x bins per scale).
pub fn subdict_len(sub: &SubdictSpec) -> u64 {
    let config = sub.config();
    (0..config.scales().len())
        .map(|k| sub.frame_count(k) as u64 * config.bins(k) as u64)
        .sum()
}

/// Canonical index of a grid atom: scales in order, frames within scale,
/// bins within frame — the same order the projection table iterates.
pub fn atom_index(sub: &SubdictSpec, param: &AtomParam) -> Option<u64> {
    let config = sub.config();
    let mut offset = 0u64;
    for k in 0..config.scales().len() {
        let bins = config.bins(k) as u64;
        let frames = sub.frame_times(k);
        if k == param.scale_index {
            let pos = frames.iter().position(|&t| t == param.time)?;
            if param.freq_bin >= bins as usize {
                return None;
            }
            return Some(offset + pos as u64 * bins + param.freq_bin as u64);
        }
        offset += frames.len() as u64 * bins;
    }
    None
}

/// Inverse of `atom_index`.
pub fn atom_at(sub: &SubdictSpec, index: u64) -> Option<AtomParam> {
    let config = sub.config();
    let mut rest = index;
    for k in 0..config.scales().len() {
        let bins = config.bins(k) as u64;
        let frames = sub.frame_times(k);
        let count = frames.len() as u64 * bins;
        if rest < count {
            return Some(AtomParam {
                scale_index: k,
                time: frames[(rest / bins) as usize],
                freq_bin: (rest % bins) as usize,
                shift: sub.shifts()[k],
            });
        }
        rest -= count;
    }
    None
}

/// Bits for the LoMP time offset of scale s: the refinement scans the
/// inclusive range [-s/4, s/4], i.e. s/2 + 1 values.
fn shift_delta_bits(scale: usize) -> u8 {
    ceil_log2(scale as u64 / 2 + 1)
}

// ---------------------------------------------------------------------------
// Encode / decode
// ---------------------------------------------------------------------------

/// An encoded stream plus its exact bit accounting. The component costs
/// and padding always sum to 8 * bytes.len().
#[derive(Debug, Clone)]
pub struct EncodedStream {
    pub bytes: Vec<u8>,
    pub header_bits: u64,
    pub index_bits: u64,
    pub weight_bits: u64,
    pub shift_bits: u64,
    pub padding_bits: u64,
    pub quantizer: QuantizerSpec,
    pub clamped: u32,
}

impl EncodedStream {
    pub fn total_bits(&self) -> u64 {
        self.bytes.len() as u64 * 8
    }
}

/// Everything the decoder recovered besides the signal itself.
#[derive(Debug, Clone)]
pub struct DecodedStream {
    pub signal: Signal,
    pub dict: DictConfig,
    pub sequence: SequenceSpec,
    pub quantizer: QuantizerSpec,
    pub f_energy: f64,
    pub entries: Vec<(AtomParam, f64)>,
}

fn write_header_fields(
    w: &mut BitWriter,
    dict: &DictConfig,
    seq: &SequenceSpec,
    q: &QuantizerSpec,
    sample_rate: u32,
    f_energy: f64,
    atom_count: u32,
    lomp: bool,
) {
    w.write_bytes(MAGIC);
    w.write_bits(VERSION as u64, 8);
    w.write_bits(if lomp { FLAG_SHIFT_BITS } else { 0 } as u64, 8);
    w.write_bytes(&sample_rate.to_le_bytes());
    w.write_bytes(&(dict.signal_length() as u64).to_le_bytes());
    w.write_bytes(&f_energy.to_le_bytes());
    let text = dict.to_text();
    w.write_bytes(&(text.len() as u16).to_le_bytes());
    w.write_bytes(text.as_bytes());
    w.write_bits(seq.kind.code() as u64, 8);
    w.write_bytes(&seq.seed.to_le_bytes());
    w.write_bytes(&(seq.refresh_period as u16).to_le_bytes());
    w.write_bytes(&(seq.subsample as u16).to_le_bytes());
    w.write_bits(q.bits as u64, 8);
    w.write_bytes(&q.alpha_max.to_le_bytes());
    w.write_bytes(&atom_count.to_le_bytes());
}

/// Encodes an approximant produced with `seq` over `dict`. `lomp` marks
/// streams whose atom times carry a per-atom offset from the subdictionary
/// grid (the LoMP refinement), stored in extra bits.
pub fn encode(
    approx: &Approximant,
    dict: &DictConfig,
    seq: &SequenceSpec,
    bits_weight: u8,
    lomp: bool,
) -> Result<EncodedStream, CodecError> {
    if approx.entries.len() > u32::MAX as usize {
        return Err(CodecError::TooManyAtoms);
    }
    let alpha_max = approx
        .entries
        .iter()
        .map(|e| e.weight.abs())
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let q = QuantizerSpec::new(bits_weight, alpha_max);

    // Pass 1: locate every atom on its iteration's grid and quantize.
    struct Record {
        index: u64,
        index_bits: u8,
        symbol: i32,
        /// LoMP time offset from the grid, in [-s/4, s/4].
        delta: i64,
        delta_bits: u8,
        scale: usize,
    }
    let mut records = Vec::with_capacity(approx.entries.len());
    let mut clamped = 0u32;
    for entry in &approx.entries {
        let sub = subdict_at(seq, dict, entry.iteration);
        let nbits = ceil_log2(subdict_len(&sub));
        let (grid_param, delta) = if lomp {
            let scale = dict.scales()[entry.param.scale_index] as i64;
            // Nearest grid time of this scale; the refinement range is
            // +-s/4, within half a frame hop, so the nearest frame is the
            // origin frame.
            let frames = sub.frame_times(entry.param.scale_index);
            let nearest = frames
                .iter()
                .copied()
                .min_by_key(|&t| (t - entry.param.time).abs())
                .ok_or(CodecError::OffGridAtom(entry.iteration))?;
            let delta = entry.param.time - nearest;
            if delta < -scale / 4 || delta > scale / 4 {
                return Err(CodecError::OffGridAtom(entry.iteration));
            }
            (
                AtomParam {
                    time: nearest,
                    ..entry.param
                },
                delta,
            )
        } else {
            (entry.param, 0)
        };
        let index = atom_index(&sub, &grid_param)
            .ok_or(CodecError::OffGridAtom(entry.iteration))?;
        let (symbol, was_clamped) = q.quantize(entry.weight);
        if was_clamped {
            clamped += 1;
        }
        let scale = dict.scales()[entry.param.scale_index];
        records.push(Record {
            index,
            index_bits: nbits,
            symbol,
            delta,
            delta_bits: if lomp { shift_delta_bits(scale) } else { 0 },
            scale,
        });
    }

    // Weight symbol statistics for the entropy coder.
    let mut freqs: Vec<(i32, u64)> = Vec::new();
    {
        let mut sorted: Vec<i32> = records.iter().map(|r| r.symbol).collect();
        sorted.sort_unstable();
        for s in sorted {
            match freqs.last_mut() {
                Some((sym, count)) if *sym == s => *count += 1,
                _ => freqs.push((s, 1)),
            }
        }
    }

    let mut w = BitWriter::new();
    write_header_fields(
        &mut w,
        dict,
        seq,
        &q,
        approx.sample_rate,
        approx.reference_energy,
        records.len() as u32,
        lomp,
    );
    let code = if records.is_empty() {
        None
    } else {
        let code = HuffmanCode::from_frequencies(&freqs);
        code.serialize(&mut w);
        Some(code)
    };
    let header_bits = w.bit_len();

    let codebook = code.as_ref().map(|c| c.codebook());
    let mut index_bits = 0u64;
    let mut weight_bits = 0u64;
    let mut shift_bits = 0u64;
    for r in &records {
        w.write_bits(r.index, r.index_bits);
        index_bits += r.index_bits as u64;
        let len = code
            .as_ref()
            .expect("records imply a code")
            .encode_symbol(codebook.as_ref().expect("code built"), r.symbol, &mut w)?;
        weight_bits += len as u64;
        if r.delta_bits > 0 {
            // Offset biased into [0, s/2].
            let biased = (r.delta + r.scale as i64 / 4) as u64;
            w.write_bits(biased, r.delta_bits);
            shift_bits += r.delta_bits as u64;
        }
    }

    let (bytes, pad) = w.finish();
    Ok(EncodedStream {
        bytes,
        header_bits,
        index_bits,
        weight_bits,
        shift_bits,
        padding_bits: pad as u64,
        quantizer: q,
        clamped,
    })
}

/// Decodes a bitstream back into a signal, regenerating each iteration's
/// subdictionary from the header's sequence description.
pub fn decode(bytes: &[u8]) -> Result<DecodedStream, CodecError> {
    let mut r = BitReader::new(bytes);
    let magic = r.read_bytes(4)?;
    if magic != MAGIC {
        return Err(CodecError::InvalidStream("bad magic".into()));
    }
    let version = r.read_bits(8)? as u8;
    if version != VERSION {
        return Err(CodecError::InvalidStream(format!(
            "unknown version {}",
            version
        )));
    }
    let flags = r.read_bits(8)? as u8;
    let lomp = flags & FLAG_SHIFT_BITS != 0;
    let sample_rate = u32::from_le_bytes(
        r.read_bytes(4)?
            .try_into()
            .expect("read_bytes returns the requested length"),
    );
    let n = u64::from_le_bytes(r.read_bytes(8)?.try_into().expect("8 bytes")) as usize;
    let f_energy = f64::from_le_bytes(r.read_bytes(8)?.try_into().expect("8 bytes"));
    let text_len = u16::from_le_bytes(r.read_bytes(2)?.try_into().expect("2 bytes")) as usize;
    let text = String::from_utf8(r.read_bytes(text_len)?)
        .map_err(|_| CodecError::InvalidStream("dict config is not UTF-8".into()))?;
    let dict = DictConfig::from_text(&text)?;
    if dict.signal_length() != n {
        return Err(CodecError::InvalidStream(
            "signal length disagrees with dictionary config".into(),
        ));
    }
    let kind = SequenceKind::from_code(r.read_bits(8)? as u8)
        .ok_or_else(|| CodecError::InvalidStream("bad sequence kind".into()))?;
    let seed = u64::from_le_bytes(r.read_bytes(8)?.try_into().expect("8 bytes"));
    let refresh = u16::from_le_bytes(r.read_bytes(2)?.try_into().expect("2 bytes")) as u32;
    let subsample = u16::from_le_bytes(r.read_bytes(2)?.try_into().expect("2 bytes")) as u32;
    if refresh < 1 || subsample < 1 {
        return Err(CodecError::InvalidStream("bad sequence parameters".into()));
    }
    let sequence = SequenceSpec::new(kind, seed)
        .with_refresh(refresh)
        .with_subsample(subsample);
    let qbits = r.read_bits(8)? as u8;
    if !(2..=24).contains(&qbits) {
        return Err(CodecError::InvalidStream("bad quantizer bits".into()));
    }
    let alpha_max = f64::from_le_bytes(r.read_bytes(8)?.try_into().expect("8 bytes"));
    if !(alpha_max.is_finite() && alpha_max > 0.0) {
        return Err(CodecError::InvalidStream("bad quantizer anchor".into()));
    }
    let quantizer = QuantizerSpec::new(qbits, alpha_max);
    let atom_count = u32::from_le_bytes(r.read_bytes(4)?.try_into().expect("4 bytes"));
    let code = if atom_count > 0 {
        Some(HuffmanCode::deserialize(&mut r)?)
    } else {
        None
    };

    let mut samples = vec![0.0f64; n];
    // Preallocation capped: a corrupt count must fail in the payload loop,
    // not by exhausting memory here.
    let mut entries = Vec::with_capacity((atom_count as usize).min(1 << 16));
    for i in 0..atom_count as usize {
        let sub = subdict_at(&sequence, &dict, i);
        let nbits = ceil_log2(subdict_len(&sub));
        let index = r.read_bits(nbits)?;
        let mut param = atom_at(&sub, index)
            .ok_or_else(|| CodecError::InvalidStream(format!("atom index {} invalid", index)))?;
        let symbol = code
            .as_ref()
            .expect("atom_count > 0 implies a code")
            .decode_symbol(&mut r)?;
        let weight = quantizer.dequantize(symbol);
        if lomp {
            let scale = dict.scales()[param.scale_index];
            let biased = r.read_bits(shift_delta_bits(scale))?;
            if biased > scale as u64 / 2 {
                return Err(CodecError::InvalidStream("time offset out of range".into()));
            }
            param.time += biased as i64 - scale as i64 / 4;
        }
        // Iteration-order summation: part of the format contract.
        let atom = atom_sparse(&param, &dict)?;
        atom.add_scaled(&mut samples, weight);
        entries.push((param, weight));
    }
    let signal = Signal::new(samples, sample_rate)?;
    Ok(DecodedStream {
        signal,
        dict,
        sequence,
        quantizer,
        f_energy,
        entries,
    })
}

/// One point of a rate-distortion curve.
#[derive(Debug, Clone)]
pub struct RdPoint {
    pub target_srr: f64,
    pub atoms: usize,
    pub bits: u64,
    pub snr_db: f64,
    /// False if the pursuit's atom budget ran out before the target.
    pub reached: bool,
}

/// Runs one pursuit to the largest SRR target and encodes the prefix
/// approximant at each target crossing, measuring true bitstream length and
/// decoded SNR.
pub fn rate_distortion_curve(
    f: &Signal,
    pursuit: &PursuitConfig,
    bits_weight: u8,
    srr_targets: &[f64],
) -> Result<Vec<RdPoint>, CodecError> {
    let seq = match &pursuit.search {
        Search::Sequence(s) => *s,
        Search::Full => {
            return Err(CodecError::InvalidStream(
                "rate-distortion encoding needs a subdictionary sequence".into(),
            ))
        }
    };
    let lomp = pursuit.variant == crate::pursuit::Variant::Lomp;
    let approx = run(f, pursuit)?;
    let reference_energy = approx.reference_energy;
    let mut out = Vec::with_capacity(srr_targets.len());
    for &target in srr_targets {
        // First iteration count whose trace reaches the target.
        let crossing = approx.trace.iter().position(|&r| {
            crate::signal::srr_from_energies(reference_energy - r, r) >= target
        });
        let (atoms, reached) = match crossing {
            Some(i) => (i, true),
            None => (approx.entries.len(), false),
        };
        let prefix = Approximant {
            entries: approx.entries[..atoms].to_vec(),
            reference_energy,
            trace: approx.trace[..=atoms].to_vec(),
            budget_exhausted: !reached,
            sample_rate: approx.sample_rate,
        };
        let stream = encode(&prefix, &pursuit.dict, &seq, bits_weight, lomp)?;
        let decoded = decode(&stream.bytes)?;
        let snr_db = srr(f, &decoded.signal)?;
        out.push(RdPoint {
            target_srr: target,
            atoms,
            bits: stream.total_bits(),
            snr_db,
            reached,
        });
    }
    Ok(out)
}
