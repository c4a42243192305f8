//! Context-triggered piecewise hashing.
//!
//! A 7-byte rolling hash sweeps the input; whenever its value is congruent
//! to `block_size - 1` modulo the block size, the current piece is closed
//! and contributes one symbol — the low six bits of a 32-bit FNV-style
//! incremental hash of the piece mapped into a 64-symbol alphabet. The
//! signature is recomputed with a doubled block size whenever it would
//! exceed 64 symbols, and a second signature at twice the final block size
//! (capped at 32 symbols) allows comparison across neighbouring levels.

use std::fmt;
use std::str::FromStr;

const SYMBOLS: &[u8; 64] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
const ROLLING_WINDOW: usize = 7;
const PIECE_HASH_INIT: u32 = 0x2802_1967;
const PIECE_HASH_PRIME: u32 = 0x0100_0193;
pub const MIN_BLOCK_SIZE: u32 = 3;
pub const SIG1_MAX: usize = 64;
pub const SIG2_MAX: usize = 32;

/// Two-level piecewise signature with its base block size.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FuzzyHash {
    /// Base block size, always 3·2^k.
    pub block_size: u32,
    /// Signature at `block_size`, at most 64 symbols.
    pub sig1: String,
    /// Signature at `2 × block_size`, at most 32 symbols.
    pub sig2: String,
}

impl fmt::Display for FuzzyHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.block_size, self.sig1, self.sig2)
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("malformed fuzzy hash: {0}")]
pub struct ParseFuzzyHashError(String);

impl FromStr for FuzzyHash {
    type Err = ParseFuzzyHashError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.splitn(3, ':');
        let (Some(bs), Some(sig1), Some(sig2)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(ParseFuzzyHashError(format!("expected 3 fields in {s:?}")));
        };
        let block_size: u32 = bs
            .parse()
            .map_err(|_| ParseFuzzyHashError(format!("bad block size in {s:?}")))?;
        let valid = |sig: &str| sig.bytes().all(|b| SYMBOLS.contains(&b));
        if !valid(sig1) || !valid(sig2) || sig1.len() > SIG1_MAX || sig2.len() > SIG2_MAX {
            return Err(ParseFuzzyHashError(format!("bad signature in {s:?}")));
        }
        Ok(FuzzyHash {
            block_size,
            sig1: sig1.to_string(),
            sig2: sig2.to_string(),
        })
    }
}

/// The spamsum-family rolling hash over a 7-byte window.
#[derive(Default)]
struct RollingHash {
    window: [u8; ROLLING_WINDOW],
    h1: u32,
    h2: u32,
    h3: u32,
    n: usize,
}

impl RollingHash {
    fn push(&mut self, b: u8) {
        let b32 = u32::from(b);
        self.h2 = self.h2.wrapping_sub(self.h1);
        self.h2 = self.h2.wrapping_add(ROLLING_WINDOW as u32 * b32);
        self.h1 = self.h1.wrapping_add(b32);
        self.h1 = self
            .h1
            .wrapping_sub(u32::from(self.window[self.n % ROLLING_WINDOW]));
        self.window[self.n % ROLLING_WINDOW] = b;
        self.n += 1;
        self.h3 = (self.h3 << 5) ^ b32;
    }

    fn value(&self) -> u32 {
        self.h1.wrapping_add(self.h2).wrapping_add(self.h3)
    }
}

fn piece_step(h: u32, b: u8) -> u32 {
    h.wrapping_mul(PIECE_HASH_PRIME) ^ u32::from(b)
}

enum Overflow {
    /// Abandon the pass when the signature would exceed the limit.
    Restart,
    /// Stop emitting symbols once the limit is reached.
    Truncate,
}

/// One signature pass. Returns `None` only under [`Overflow::Restart`].
fn signature_pass(data: &[u8], block_size: u32, limit: usize, overflow: Overflow) -> Option<String> {
    let mut rolling = RollingHash::default();
    let mut piece = PIECE_HASH_INIT;
    let mut sig = String::new();
    for &b in data {
        rolling.push(b);
        piece = piece_step(piece, b);
        if rolling.value() % block_size == block_size - 1 {
            if sig.len() < limit {
                sig.push(SYMBOLS[(piece % 64) as usize] as char);
            } else if matches!(overflow, Overflow::Restart) {
                return None;
            }
            piece = PIECE_HASH_INIT;
        }
    }
    // a trailing partial piece still identifies its bytes
    if rolling.value() != 0 {
        if sig.len() < limit {
            sig.push(SYMBOLS[(piece % 64) as usize] as char);
        } else if matches!(overflow, Overflow::Restart) {
            return None;
        }
    }
    Some(sig)
}

fn initial_block_size(len: usize) -> u32 {
    let mut bs = MIN_BLOCK_SIZE;
    while (bs as usize) * SIG1_MAX < len {
        bs *= 2;
    }
    bs
}

/// Hash arbitrary bytes. Empty input yields empty signatures at the minimum
/// block size.
pub fn ctph_hash(data: &[u8]) -> FuzzyHash {
    let mut block_size = initial_block_size(data.len());
    loop {
        match signature_pass(data, block_size, SIG1_MAX, Overflow::Restart) {
            Some(sig1) => {
                let sig2 = signature_pass(data, block_size * 2, SIG2_MAX, Overflow::Truncate)
                    .expect("truncating pass always completes");
                return FuzzyHash {
                    block_size,
                    sig1,
                    sig2,
                };
            }
            None => block_size *= 2,
        }
    }
}

/// True when the signatures share a run of 7 identical symbols — the same
/// guard spamsum uses to reject coincidental alignment between unrelated
/// inputs.
fn has_common_substring(a: &str, b: &str) -> bool {
    let (a, b) = (a.as_bytes(), b.as_bytes());
    if a.len() < ROLLING_WINDOW || b.len() < ROLLING_WINDOW {
        return false;
    }
    for win in a.windows(ROLLING_WINDOW) {
        if b.windows(ROLLING_WINDOW).any(|w| w == win) {
            return true;
        }
    }
    false
}

/// Weighted edit distance: insert/delete cost 1, substitute cost 2.
fn edit_distance(a: &[u8], b: &[u8]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + if ca == cb { 0 } else { 2 };
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Similarity of two signature strings at one level, 0..100.
fn score_strings(a: &str, b: &str) -> u32 {
    if a == b {
        return if a.len() >= 3 { 100 } else { 0 };
    }
    if !has_common_substring(a, b) {
        return 0;
    }
    let e = edit_distance(a.as_bytes(), b.as_bytes());
    let total = a.len() + b.len();
    let scaled = 100.0 - 100.0 * e as f64 / total as f64;
    scaled.clamp(0.0, 100.0).round() as u32
}

/// Compare two fuzzy hashes on their shared block-size level, 0..100.
/// Levels are comparable when block sizes are equal or differ by ×2;
/// otherwise the result is 0.
pub fn ctph_compare(a: &FuzzyHash, b: &FuzzyHash) -> u32 {
    if a.block_size == b.block_size {
        score_strings(&a.sig1, &b.sig1).max(score_strings(&a.sig2, &b.sig2))
    } else if a.block_size == 2 * b.block_size {
        score_strings(&a.sig1, &b.sig2)
    } else if b.block_size == 2 * a.block_size {
        score_strings(&a.sig2, &b.sig1)
    } else {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(n: usize, seed: u64) -> Vec<u8> {
        // xorshift-ish filler, deterministic, non-repeating texture
        let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
        (0..n)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state % 251) as u8
            })
            .collect()
    }

    #[test]
    fn hashing_is_deterministic() {
        let data = sample(8192, 1);
        assert_eq!(ctph_hash(&data), ctph_hash(&data));
    }

    #[test]
    fn empty_input_gives_empty_signatures() {
        let h = ctph_hash(b"");
        assert_eq!(h.block_size, MIN_BLOCK_SIZE);
        assert_eq!(h.sig1, "");
        assert_eq!(h.sig2, "");
    }

    #[test]
    fn signature_lengths_are_bounded() {
        for seed in 0..20 {
            let n = 100 + (seed as usize) * 1500;
            let h = ctph_hash(&sample(n, seed));
            assert!(h.sig1.len() <= SIG1_MAX, "{h}");
            assert!(h.sig2.len() <= SIG2_MAX, "{h}");
            assert!(h.block_size >= MIN_BLOCK_SIZE);
            assert_eq!(h.block_size % 3, 0);
            assert!((h.block_size / 3).is_power_of_two());
        }
    }

    #[test]
    fn identical_hashes_score_100() {
        let h = ctph_hash(&sample(4096, 2));
        assert!(h.sig1.len() >= 3);
        assert_eq!(ctph_compare(&h, &h), 100);
    }

    #[test]
    fn incomparable_levels_score_0() {
        let a = FuzzyHash {
            block_size: 3,
            sig1: "ABCDEFGHIJK".into(),
            sig2: "ABCDEF".into(),
        };
        let b = FuzzyHash {
            block_size: 24,
            sig1: "ABCDEFGHIJK".into(),
            sig2: "ABCDEF".into(),
        };
        assert_eq!(ctph_compare(&a, &b), 0);
    }

    #[test]
    fn adjacent_levels_compare_cross_signature() {
        let data = sample(12000, 3);
        let h = ctph_hash(&data);
        // force the neighbour level by hashing at double the block size:
        // prepend enough data to push the initial estimate up one level
        let mut bigger = data.clone();
        bigger.extend_from_slice(&sample(64 * h.block_size as usize, 4));
        let h2 = ctph_hash(&bigger);
        if h2.block_size == 2 * h.block_size {
            // shared prefix keeps some similarity visible cross-level
            assert!(ctph_compare(&h, &h2) > 0, "{h} vs {h2}");
        }
    }

    #[test]
    fn serialization_round_trips() {
        let h = ctph_hash(&sample(5000, 5));
        let s = h.to_string();
        assert_eq!(s.parse::<FuzzyHash>().unwrap(), h);
        assert!("not-a-hash".parse::<FuzzyHash>().is_err());
        assert!("12:abc".parse::<FuzzyHash>().is_err());
    }

    #[test]
    fn small_edit_keeps_high_score() {
        let data = sample(8192, 6);
        let mut edited = data.clone();
        // replace ~2% of the bytes in one contiguous run
        let patch = sample(160, 7);
        edited[4000..4160].copy_from_slice(&patch);
        let score = ctph_compare(&ctph_hash(&data), &ctph_hash(&edited));
        assert!(score >= 90, "score {score}");
    }

    #[test]
    fn unrelated_inputs_score_low() {
        let mut max = 0;
        for seed in 0..100 {
            let a = ctph_hash(&sample(8192, 1000 + seed));
            let b = ctph_hash(&sample(8192, 5000 + seed));
            max = max.max(ctph_compare(&a, &b));
        }
        assert!(max <= 10, "max {max}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn compare_is_symmetric_and_bounded(na in 0usize..6000, nb in 0usize..6000, sa in 0u64..1000, sb in 0u64..1000) {
            let a = ctph_hash(&sample(na, sa));
            let b = ctph_hash(&sample(nb, sb));
            let ab = ctph_compare(&a, &b);
            prop_assert_eq!(ab, ctph_compare(&b, &a));
            prop_assert!(ab <= 100);
        }

        #[test]
        fn self_comparison_is_100_when_long_enough(n in 200usize..20000, s in 0u64..1000) {
            let h = ctph_hash(&sample(n, s));
            if h.sig1.len() >= 3 {
                prop_assert_eq!(ctph_compare(&h, &h), 100);
            }
        }
    }
}
