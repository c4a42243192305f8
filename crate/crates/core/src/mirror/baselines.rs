//! SimHash and MinHash baselines for the deduplication benchmark.
//!
//! Both operate on extracted page text. SimHash folds word-feature hashes
//! into a 64-bit fingerprint compared by Hamming distance; MinHash estimates
//! Jaccard similarity of 4-word shingle sets through 128 independent
//! min-hash functions.

/// Decision threshold the benchmark uses for SimHash similarity.
pub const SIMHASH_THRESHOLD: f64 = 0.8;
/// Decision threshold the benchmark uses for MinHash similarity.
pub const MINHASH_THRESHOLD: f64 = 0.4;

pub const MINHASH_PERMUTATIONS: usize = 128;
const SHINGLE_WORDS: usize = 4;

fn fnv1a64(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit SimHash fingerprint over whitespace-separated words.
pub fn simhash(text: &str) -> u64 {
    let mut counters = [0i64; 64];
    for word in text.split_whitespace() {
        let h = fnv1a64(word);
        for (i, counter) in counters.iter_mut().enumerate() {
            if (h >> i) & 1 == 1 {
                *counter += 1;
            } else {
                *counter -= 1;
            }
        }
    }
    let mut fp = 0u64;
    for (i, counter) in counters.iter().enumerate() {
        if *counter > 0 {
            fp |= 1 << i;
        }
    }
    fp
}

/// 1 − hamming/64.
pub fn simhash_sim(a: u64, b: u64) -> f64 {
    1.0 - f64::from((a ^ b).count_ones()) / 64.0
}

/// Consecutive 4-word shingles; a text with fewer than 4 words contributes
/// a single whole-text shingle, an empty text none.
pub fn shingles(text: &str) -> Vec<String> {
    let words: Vec<&str> = text.split_whitespace().collect();
    if words.is_empty() {
        return Vec::new();
    }
    if words.len() < SHINGLE_WORDS {
        return vec![words.join(" ")];
    }
    words.windows(SHINGLE_WORDS).map(|w| w.join(" ")).collect()
}

/// Per-permutation minima over the shingle set. An empty text yields the
/// sentinel all-MAX signature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinHashSignature(pub Vec<u64>);

pub fn minhash(text: &str) -> MinHashSignature {
    let shingle_hashes: Vec<u64> = shingles(text).iter().map(|s| fnv1a64(s)).collect();
    let mut mins = vec![u64::MAX; MINHASH_PERMUTATIONS];
    for (i, min) in mins.iter_mut().enumerate() {
        let seed = splitmix64(i as u64);
        for &x in &shingle_hashes {
            let h = splitmix64(x ^ seed);
            if h < *min {
                *min = h;
            }
        }
    }
    MinHashSignature(mins)
}

/// Fraction of matching minima — an unbiased Jaccard estimate.
pub fn minhash_sim(a: &MinHashSignature, b: &MinHashSignature) -> f64 {
    debug_assert_eq!(a.0.len(), b.0.len());
    let matching = a.0.iter().zip(&b.0).filter(|(x, y)| x == y).count();
    matching as f64 / a.0.len() as f64
}
