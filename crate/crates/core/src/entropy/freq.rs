//! Integer frequency tables for the range coder.
//!
//! A table assigns every symbol of a contiguous integer alphabet, plus one
//! escape slot, a frequency `>= 1`; frequencies sum to exactly
//! `2^precision_bits`. Out-of-alphabet symbols are coded through the
//! escape slot followed by a fixed-width 32-bit raw value.

use crate::entropy::gmm::GmmEntropyModel;
use crate::error::{Error, Result};

/// Contiguous integer symbol range `[q_min, q_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymbolAlphabet {
    pub q_min: i64,
    pub q_max: i64,
}

impl SymbolAlphabet {
    pub fn new(q_min: i64, q_max: i64) -> Result<Self> {
        if q_min >= q_max {
            return Err(Error::Config(format!(
                "alphabet needs q_min < q_max, got [{q_min}, {q_max}]"
            )));
        }
        Ok(SymbolAlphabet { q_min, q_max })
    }

    /// Alphabet spanning observed symbols with a guard margin of 4 on each
    /// side, the policy used when freezing a trained digital model.
    pub fn covering(symbols: impl IntoIterator<Item = i64>) -> Result<Self> {
        let mut lo = i64::MAX;
        let mut hi = i64::MIN;
        for s in symbols {
            lo = lo.min(s);
            hi = hi.max(s);
        }
        if lo > hi {
            return Err(Error::Config("empty symbol set".into()));
        }
        Self::new(lo - 4, hi + 4)
    }

    pub fn size(&self) -> usize {
        (self.q_max - self.q_min + 1) as usize
    }

    /// Slot index of an in-alphabet symbol.
    pub fn index_of(&self, q: i64) -> Option<usize> {
        if q >= self.q_min && q <= self.q_max {
            Some((q - self.q_min) as usize)
        } else {
            None
        }
    }

    pub fn symbol_at(&self, index: usize) -> i64 {
        self.q_min + index as i64
    }
}

/// Frozen frequency table over an alphabet plus escape slot.
#[derive(Debug, Clone)]
pub struct FreqTable {
    pub alphabet: SymbolAlphabet,
    freqs: Vec<u32>,
    cum: Vec<u32>,
    total: u32,
    hash: u32,
}

impl FreqTable {
    /// Builds from nonnegative weights (one per alphabet symbol plus the
    /// escape slot, in that order). Weights need not be normalized.
    pub fn from_weights(
        alphabet: SymbolAlphabet,
        weights: &[f64],
        precision_bits: u32,
    ) -> Result<Self> {
        let slots = alphabet.size() + 1;
        if weights.len() != slots {
            return Err(Error::Config(format!(
                "{} weights for {} slots",
                weights.len(),
                slots
            )));
        }
        if precision_bits == 0 || precision_bits > 16 {
            return Err(Error::Config("precision_bits must be in 1..=16".into()));
        }
        let total: u64 = 1 << precision_bits;
        if slots as u64 > total {
            return Err(Error::Config(format!(
                "alphabet of {} slots exceeds 2^{} precision",
                slots, precision_bits
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Config("weights must be finite and >= 0".into()));
        }
        let wsum: f64 = weights.iter().sum();
        let norm: Vec<f64> = if wsum > 0.0 {
            weights.iter().map(|w| w / wsum).collect()
        } else {
            vec![1.0 / slots as f64; slots]
        };

        // Every slot starts at 1; the remaining mass is distributed by the
        // largest-remainder method so frequencies sum to exactly `total`.
        let spare = total - slots as u64;
        let mut freqs: Vec<u32> = vec![1; slots];
        let mut fractions: Vec<(usize, f64)> = Vec::with_capacity(slots);
        let mut assigned = 0u64;
        for (i, p) in norm.iter().enumerate() {
            let ideal = p * spare as f64;
            let base = ideal.floor() as u64;
            freqs[i] += base as u32;
            assigned += base;
            fractions.push((i, ideal - base as f64));
        }
        let mut leftover = spare - assigned;
        fractions.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        for (i, _) in fractions {
            if leftover == 0 {
                break;
            }
            freqs[i] += 1;
            leftover -= 1;
        }
        debug_assert_eq!(freqs.iter().map(|f| *f as u64).sum::<u64>(), total);

        let mut cum = Vec::with_capacity(slots + 1);
        let mut acc = 0u32;
        for f in &freqs {
            cum.push(acc);
            acc += f;
        }
        cum.push(acc);

        let hash = fnv1a32(&alphabet, &freqs);
        Ok(FreqTable {
            alphabet,
            freqs,
            cum,
            total: total as u32,
            hash,
        })
    }

    /// Table matching the model's symbol distribution over the alphabet;
    /// the escape slot receives the leftover tail mass.
    pub fn from_model(
        model: &GmmEntropyModel,
        alphabet: SymbolAlphabet,
        precision_bits: u32,
    ) -> Result<Self> {
        let mut weights: Vec<f64> = (alphabet.q_min..=alphabet.q_max)
            .map(|q| model.pmf(q as f64))
            .collect();
        let mass: f64 = weights.iter().sum();
        weights.push((1.0 - mass).max(0.0));
        Self::from_weights(alphabet, &weights, precision_bits)
    }

    /// Table from empirical symbol counts (escape weight proportional to
    /// one count).
    pub fn from_counts(
        alphabet: SymbolAlphabet,
        counts: &[u64],
        precision_bits: u32,
    ) -> Result<Self> {
        if counts.len() != alphabet.size() {
            return Err(Error::Config("one count per alphabet symbol".into()));
        }
        let mut weights: Vec<f64> = counts.iter().map(|c| *c as f64).collect();
        weights.push(1.0);
        Self::from_weights(alphabet, &weights, precision_bits)
    }

    pub fn total(&self) -> u32 {
        self.total
    }

    pub fn hash(&self) -> u32 {
        self.hash
    }

    /// Number of slots including the escape slot.
    pub fn slots(&self) -> usize {
        self.freqs.len()
    }

    /// Escape is always the last slot.
    pub fn escape_index(&self) -> usize {
        self.freqs.len() - 1
    }

    /// `(cumulative, frequency)` of a slot.
    pub fn slot_range(&self, slot: usize) -> (u32, u32) {
        (self.cum[slot], self.freqs[slot])
    }

    /// Probability the table assigns to a slot.
    pub fn slot_prob(&self, slot: usize) -> f64 {
        self.freqs[slot] as f64 / self.total as f64
    }

    /// Slot containing a cumulative offset in `[0, total)`.
    pub fn slot_for_offset(&self, offset: u32) -> usize {
        debug_assert!(offset < self.total);
        // cum is sorted; find the last slot with cum <= offset.
        match self.cum.binary_search(&offset) {
            Ok(mut i) => {
                // Skip zero-width entries (none exist since freqs >= 1,
                // but exact hits on boundaries need the left slot check).
                while i + 1 < self.cum.len() && self.cum[i + 1] == offset {
                    i += 1;
                }
                i.min(self.freqs.len() - 1)
            }
            Err(i) => i - 1,
        }
    }
}

fn fnv1a32(alphabet: &SymbolAlphabet, freqs: &[u32]) -> u32 {
    let mut h: u32 = 0x811c9dc5;
    let mut eat = |bytes: &[u8]| {
        for b in bytes {
            h ^= *b as u32;
            h = h.wrapping_mul(0x0100_0193);
        }
    };
    eat(&alphabet.q_min.to_le_bytes());
    eat(&alphabet.q_max.to_le_bytes());
    for f in freqs {
        eat(&f.to_le_bytes());
    }
    h
}

/// Frequency table for a trained entropy model (spec-facing alias of
/// [`FreqTable::from_model`]).
pub fn build_freq_table(
    model: &GmmEntropyModel,
    alphabet: SymbolAlphabet,
    precision_bits: u32,
) -> Result<FreqTable> {
    FreqTable::from_model(model, alphabet, precision_bits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_weights_give_near_equal_frequencies() {
        let alphabet = SymbolAlphabet::new(0, 99).unwrap();
        let weights = vec![1.0; 101];
        let table = FreqTable::from_weights(alphabet, &weights, 16).unwrap();
        let min = (0..table.slots()).map(|s| table.slot_range(s).1).min().unwrap();
        let max = (0..table.slots()).map(|s| table.slot_range(s).1).max().unwrap();
        assert!(max - min <= 1, "uniform table spread {min}..{max}");
    }

    #[test]
    fn every_slot_gets_at_least_one() {
        let alphabet = SymbolAlphabet::new(-10, 10).unwrap();
        let mut weights = vec![0.0; 22];
        weights[0] = 1.0;
        let table = FreqTable::from_weights(alphabet, &weights, 16).unwrap();
        for s in 0..table.slots() {
            assert!(table.slot_range(s).1 >= 1);
        }
        let sum: u64 = (0..table.slots())
            .map(|s| table.slot_range(s).1 as u64)
            .sum();
        assert_eq!(sum, 1 << 16);
    }

    #[test]
    fn model_table_tracks_pmf() {
        let model = GmmEntropyModel::with_params(&[1.0], &[0.0], &[1.5]);
        let alphabet = SymbolAlphabet::new(-12, 12).unwrap();
        let table = FreqTable::from_model(&model, alphabet, 16).unwrap();
        let quantum = 1.0 / (1u64 << 16) as f64;
        for q in -12..=12 {
            let slot = alphabet.index_of(q).unwrap();
            let table_p = table.slot_prob(slot);
            let model_p = model.pmf(q as f64);
            // One base count plus rounding per slot.
            assert!(
                (table_p - model_p).abs() < 30.0 * quantum,
                "q={q}: table {table_p} vs pmf {model_p}"
            );
        }
    }

    #[test]
    fn alphabet_wider_than_precision_errors() {
        let alphabet = SymbolAlphabet::new(0, 70_000).unwrap();
        let weights = vec![1.0; 70_002];
        assert!(FreqTable::from_weights(alphabet, &weights, 16).is_err());
    }

    #[test]
    fn offset_lookup_covers_all_slots() {
        let alphabet = SymbolAlphabet::new(0, 5).unwrap();
        let weights = vec![5.0, 1.0, 9.0, 2.0, 2.0, 7.0, 1.0];
        let table = FreqTable::from_weights(alphabet, &weights, 8).unwrap();
        for offset in 0..table.total() {
            let slot = table.slot_for_offset(offset);
            let (cum, freq) = table.slot_range(slot);
            assert!(offset >= cum && offset < cum + freq, "offset {offset}");
        }
    }

    #[test]
    fn covering_adds_margin() {
        let alphabet = SymbolAlphabet::covering(vec![-2, 0, 7]).unwrap();
        assert_eq!(alphabet.q_min, -6);
        assert_eq!(alphabet.q_max, 11);
        assert_eq!(alphabet.index_of(-6), Some(0));
        assert_eq!(alphabet.index_of(12), None);
    }
}
