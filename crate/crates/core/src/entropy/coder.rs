//! Byte-oriented range coder with carry propagation.
//!
//! Encoder state is a 64-bit window `low` (carries tracked through a
//! 128-bit add) and a 64-bit `range` kept at or above `2^56` by emitting
//! the top byte of `low` and shifting. With 16-bit frequency totals the
//! per-symbol truncation loss is below `2^-40` bits, so encoded length
//! stays within a few bits of the table's information content plus the
//! 8-byte decoder priming and 1-byte flush.
//!
//! Termination rounds `low` up to the next multiple of `2^56` inside the
//! final interval; that value has 56 trailing zero bits, so one flushed
//! byte plus implicit zero padding pins the code value exactly.
//!
//! Out-of-alphabet symbols are coded as the table's escape slot followed by
//! the value as a fixed-width 32-bit integer, sent as 4 bytes through a
//! uniform byte model inside the same arithmetic stream.
//!
//! Container layout (little-endian integers):
//!
//! ```text
//! magic "JSCCBITS" | u32 symbol count | u32 table hash | payload bytes
//! ```

use std::sync::atomic::{AtomicU64, Ordering};

use crate::entropy::freq::FreqTable;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"JSCCBITS";
const RENORM: u64 = 1 << 56;
const LOW_MASK: u128 = u64::MAX as u128;

/// Uniform model for raw escape bytes: 256 slots of frequency 256.
const BYTE_TOTAL: u32 = 1 << 16;

static ENCODE_CALLS: AtomicU64 = AtomicU64::new(0);

/// Number of `arith_encode` invocations since process start. Training-path
/// tests use this to verify the coder is bypassed during training.
pub fn encode_invocations() -> u64 {
    ENCODE_CALLS.load(Ordering::Relaxed)
}

/// An encoded symbol sequence plus the framing needed to decode it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitstream {
    bytes: Vec<u8>,
    symbol_count: u32,
    table_hash: u32,
}

impl Bitstream {
    /// Payload length in bits (byte-aligned by construction).
    pub fn bit_len(&self) -> usize {
        self.bytes.len() * 8
    }

    pub fn symbol_count(&self) -> u32 {
        self.symbol_count
    }

    pub fn table_hash(&self) -> u32 {
        self.table_hash
    }

    pub fn payload(&self) -> &[u8] {
        &self.bytes
    }

    /// Serializes the container.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.bytes.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.symbol_count.to_le_bytes());
        out.extend_from_slice(&self.table_hash.to_le_bytes());
        out.extend_from_slice(&self.bytes);
        out
    }

    /// Parses a container produced by [`Bitstream::to_bytes`].
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 {
            return Err(Error::Format("bitstream shorter than header".into()));
        }
        if &bytes[..8] != MAGIC {
            return Err(Error::Format("bad bitstream magic".into()));
        }
        let symbol_count = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        let table_hash = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
        Ok(Bitstream {
            bytes: bytes[16..].to_vec(),
            symbol_count,
            table_hash,
        })
    }
}

struct RangeEncoder {
    low: u128,
    range: u64,
    out: Vec<u8>,
}

impl RangeEncoder {
    fn new() -> Self {
        RangeEncoder {
            low: 0,
            range: u64::MAX,
            out: Vec::new(),
        }
    }

    fn encode(&mut self, cum: u32, freq: u32, total: u32) {
        debug_assert!(freq > 0 && cum + freq <= total);
        let r = self.range / total as u64;
        self.low += r as u128 * cum as u128;
        if self.low >> 64 != 0 {
            propagate_carry(&mut self.out);
            self.low &= LOW_MASK;
        }
        self.range = r * freq as u64;
        while self.range < RENORM {
            self.out.push((self.low >> 56) as u8);
            self.low = (self.low << 8) & LOW_MASK;
            self.range <<= 8;
        }
    }

    fn finish(mut self) -> Vec<u8> {
        // Smallest multiple of 2^56 in [low, low + range); range >= 2^56
        // guarantees one exists.
        let step = 1u128 << 56;
        let rounded = (self.low + (step - 1)) / step * step;
        debug_assert!(rounded < self.low + self.range as u128);
        if rounded >> 64 != 0 {
            propagate_carry(&mut self.out);
        }
        self.out.push(((rounded & LOW_MASK) >> 56) as u8);
        self.out
    }
}

fn propagate_carry(out: &mut [u8]) {
    for b in out.iter_mut().rev() {
        if *b == 0xFF {
            *b = 0;
        } else {
            *b += 1;
            return;
        }
    }
    unreachable!("carry out of an empty emitted prefix");
}

struct RangeDecoder<'a> {
    code: u64,
    range: u64,
    input: &'a [u8],
    pos: usize,
}

impl<'a> RangeDecoder<'a> {
    fn new(input: &'a [u8]) -> Self {
        let mut code = 0u64;
        let mut pos = 0usize;
        for _ in 0..8 {
            code = (code << 8) | Self::byte_at(input, &mut pos);
        }
        RangeDecoder {
            code,
            range: u64::MAX,
            input,
            pos,
        }
    }

    fn byte_at(input: &[u8], pos: &mut usize) -> u64 {
        // Past-the-end bytes decode as the encoder's implicit zero padding.
        let b = input.get(*pos).copied().unwrap_or(0) as u64;
        *pos += 1;
        b
    }

    fn decode(&mut self, cum_of: impl Fn(u32) -> (usize, u32, u32), total: u32) -> Result<usize> {
        let r = self.range / total as u64;
        let offset = ((self.code / r) as u32).min(total - 1);
        let (slot, cum, freq) = cum_of(offset);
        self.code -= cum as u64 * r;
        self.range = r * freq as u64;
        if self.code >= self.range {
            return Err(Error::Decode("corrupted or truncated stream".into()));
        }
        while self.range < RENORM {
            self.code = (self.code << 8) | Self::byte_at(self.input, &mut self.pos);
            self.range <<= 8;
        }
        Ok(slot)
    }
}

/// Encodes a symbol sequence against a frozen table. Symbols outside the
/// alphabet take the escape path and must fit in an `i32`.
pub fn arith_encode(symbols: &[i64], table: &FreqTable) -> Result<Bitstream> {
    ENCODE_CALLS.fetch_add(1, Ordering::Relaxed);
    let count = u32::try_from(symbols.len())
        .map_err(|_| Error::Config("sequence longer than u32 symbol count".into()))?;
    let mut enc = RangeEncoder::new();
    if !symbols.is_empty() {
        for &q in symbols {
            match table.alphabet.index_of(q) {
                Some(slot) => {
                    let (cum, freq) = table.slot_range(slot);
                    enc.encode(cum, freq, table.total());
                }
                None => {
                    let raw: i32 = q.try_into().map_err(|_| {
                        Error::Config(format!("escape symbol {q} exceeds 32-bit range"))
                    })?;
                    let (cum, freq) = table.slot_range(table.escape_index());
                    enc.encode(cum, freq, table.total());
                    for byte in (raw as u32).to_le_bytes() {
                        enc.encode(byte as u32 * 256, 256, BYTE_TOTAL);
                    }
                }
            }
        }
    }
    let bytes = if symbols.is_empty() {
        Vec::new()
    } else {
        enc.finish()
    };
    Ok(Bitstream {
        bytes,
        symbol_count: count,
        table_hash: table.hash(),
    })
}

/// Decodes `n` symbols. The stream must have been produced with an
/// identical table (checked via the embedded hash) and symbol count.
pub fn arith_decode(bits: &Bitstream, table: &FreqTable, n: usize) -> Result<Vec<i64>> {
    if bits.table_hash != table.hash() {
        return Err(Error::Decode(format!(
            "table hash mismatch: stream {:08x}, table {:08x}",
            bits.table_hash,
            table.hash()
        )));
    }
    if n as u32 != bits.symbol_count {
        return Err(Error::Decode(format!(
            "expected {} symbols, stream holds {}",
            n, bits.symbol_count
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut dec = RangeDecoder::new(&bits.bytes);
    let escape = table.escape_index();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let slot = dec.decode(
            |offset| {
                let s = table.slot_for_offset(offset);
                let (cum, freq) = table.slot_range(s);
                (s, cum, freq)
            },
            table.total(),
        )?;
        if slot == escape {
            let mut raw = [0u8; 4];
            for b in &mut raw {
                let byte = dec.decode(|offset| ((offset / 256) as usize, offset / 256 * 256, 256), BYTE_TOTAL)?;
                *b = byte as u8;
            }
            out.push(u32::from_le_bytes(raw) as i32 as i64);
        } else {
            out.push(table.alphabet.symbol_at(slot));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::freq::SymbolAlphabet;
    use crate::rng::NoiseSource;

    fn table_from(probs: &[f64], lo: i64) -> FreqTable {
        let hi = lo + probs.len() as i64 - 1;
        let alphabet = SymbolAlphabet::new(lo, hi).unwrap();
        let mut weights = probs.to_vec();
        weights.push(1e-6);
        FreqTable::from_weights(alphabet, &weights, 16).unwrap()
    }

    /// Information content of a sequence under the table's own
    /// probabilities, in bits.
    fn ideal_bits(symbols: &[i64], table: &FreqTable) -> f64 {
        symbols
            .iter()
            .map(|&q| {
                let slot = table.alphabet.index_of(q).expect("in-alphabet");
                -table.slot_prob(slot).log2()
            })
            .sum()
    }

    #[test]
    fn roundtrip_small() {
        let table = table_from(&[0.2, 0.5, 0.3], -1);
        let symbols = vec![-1, 0, 1, 1, 0, -1, 0, 0, 1];
        let bits = arith_encode(&symbols, &table).unwrap();
        let back = arith_decode(&bits, &table, symbols.len()).unwrap();
        assert_eq!(symbols, back);
    }

    #[test]
    fn roundtrip_empty() {
        let table = table_from(&[0.5, 0.5], 0);
        let bits = arith_encode(&[], &table).unwrap();
        assert_eq!(bits.bit_len(), 0);
        assert_eq!(arith_decode(&bits, &table, 0).unwrap(), Vec::<i64>::new());
    }

    #[test]
    fn roundtrip_with_escapes() {
        let table = table_from(&[0.7, 0.3], 0);
        let symbols = vec![0, 1, 999, 0, -12345, 1, i32::MAX as i64, i32::MIN as i64];
        let bits = arith_encode(&symbols, &table).unwrap();
        let back = arith_decode(&bits, &table, symbols.len()).unwrap();
        assert_eq!(symbols, back);
    }

    #[test]
    fn escape_beyond_i32_is_rejected() {
        let table = table_from(&[0.7, 0.3], 0);
        assert!(arith_encode(&[1 << 40], &table).is_err());
    }

    #[test]
    fn roundtrip_randomized_tables_and_sequences() {
        let mut rng = NoiseSource::new(1234, 0);
        for case in 0..300 {
            let span = 2 + rng.below(40) as i64;
            let lo = -(rng.below(20) as i64);
            let alphabet = SymbolAlphabet::new(lo, lo + span).unwrap();
            let weights: Vec<f64> = (0..alphabet.size() + 1)
                .map(|_| rng.uniform01().powi(3))
                .collect();
            let table = FreqTable::from_weights(alphabet, &weights, 16).unwrap();
            let len = rng.below(500);
            let symbols: Vec<i64> = (0..len)
                .map(|_| lo + rng.below(span as usize + 1) as i64)
                .collect();
            let bits = arith_encode(&symbols, &table).unwrap();
            let back = arith_decode(&bits, &table, len).unwrap();
            assert_eq!(symbols, back, "case {case}");
            let bound = ideal_bits(&symbols, &table).ceil() + 16.0;
            assert!(
                (bits.bit_len() as f64) <= bound,
                "case {case}: {} bits > bound {bound}",
                bits.bit_len()
            );
        }
    }

    #[test]
    fn uniform_256_sequence_is_near_eight_bits_per_symbol() {
        let alphabet = SymbolAlphabet::new(0, 255).unwrap();
        let mut weights = vec![1.0; 256];
        weights.push(1e-9);
        let table = FreqTable::from_weights(alphabet, &weights, 16).unwrap();
        let mut rng = NoiseSource::new(9, 0);
        let symbols: Vec<i64> = (0..1000).map(|_| rng.below(256) as i64).collect();
        let bits = arith_encode(&symbols, &table).unwrap();
        assert!(
            bits.bit_len() <= 8000 + 32,
            "{} bits for 1000 uniform bytes",
            bits.bit_len()
        );
    }

    #[test]
    fn wrong_table_fails_roundtrip() {
        let table_a = table_from(&[0.9, 0.1], 0);
        let table_b = table_from(&[0.1, 0.9], 0);
        let symbols = vec![0, 0, 1, 0];
        let bits = arith_encode(&symbols, &table_a).unwrap();
        assert!(arith_decode(&bits, &table_b, symbols.len()).is_err());
    }

    #[test]
    fn wrong_count_is_rejected() {
        let table = table_from(&[0.5, 0.5], 0);
        let bits = arith_encode(&[0, 1, 0], &table).unwrap();
        assert!(arith_decode(&bits, &table, 2).is_err());
    }

    #[test]
    fn container_roundtrip_and_validation() {
        let table = table_from(&[0.6, 0.4], 0);
        let bits = arith_encode(&[0, 1, 1, 0, 0], &table).unwrap();
        let raw = bits.to_bytes();
        let parsed = Bitstream::from_bytes(&raw).unwrap();
        assert_eq!(parsed, bits);
        assert!(Bitstream::from_bytes(&raw[..10]).is_err());
        let mut bad = raw.clone();
        bad[0] = b'X';
        assert!(Bitstream::from_bytes(&bad).is_err());
    }

    #[test]
    fn skewed_binary_source_compresses_near_entropy() {
        // H(0.9) = 0.468996 bits/symbol.
        let table = table_from(&[0.9, 0.1], 0);
        let n = 10_000;
        let mut rng = NoiseSource::new(2024, 0);
        let symbols: Vec<i64> = (0..n)
            .map(|_| if rng.uniform01() < 0.9 { 0 } else { 1 })
            .collect();
        let bits = arith_encode(&symbols, &table).unwrap();
        let per_symbol = bits.bit_len() as f64 / n as f64;
        assert!(
            (0.469..=0.479).contains(&per_symbol),
            "rate {per_symbol} bits/symbol"
        );
    }

    #[test]
    fn adversarial_carry_patterns_roundtrip() {
        // Highly skewed tables drive long runs of 0xFF bytes in `low`.
        let table = table_from(&[0.999, 0.001], 0);
        let mut symbols = vec![0i64; 5000];
        for i in (0..5000).step_by(997) {
            symbols[i] = 1;
        }
        let bits = arith_encode(&symbols, &table).unwrap();
        let back = arith_decode(&bits, &table, symbols.len()).unwrap();
        assert_eq!(symbols, back);
    }
}
