//! Link identifiers and in-packet Bloom filter forwarding identifiers.
//!
//! Every directed link gets a fixed-width bit pattern with exactly `k` set
//! bits. A delivery tree is encoded by ORing the patterns of its links into
//! a single 256-bit forwarding identifier; a switch forwards a packet on
//! every link whose pattern is a bit-subset of the packet's identifier.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Filter width in bits: the packet carries the filter in the space of two
/// IPv6 addresses.
pub const FILTER_BITS: u16 = 256;

const WORDS: usize = 4;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BloomError {
    #[error("hashes per link must be in 1..=16, got {0}")]
    HashCountOutOfRange(u16),

    #[error("link key must be non-empty")]
    EmptyLinkKey,
}

/// Parameters for link identifier generation.
///
/// `width` is fixed at 256; `hashes_per_link` is the number of bits set in
/// each link identifier; `seed` makes generation reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BloomParams {
    pub width: u16,
    pub hashes_per_link: u16,
    pub seed: u64,
}

impl BloomParams {
    pub fn new(hashes_per_link: u16, seed: u64) -> Result<Self, BloomError> {
        if hashes_per_link == 0 || hashes_per_link > 16 {
            return Err(BloomError::HashCountOutOfRange(hashes_per_link));
        }
        Ok(Self {
            width: FILTER_BITS,
            hashes_per_link,
            seed,
        })
    }
}

impl Default for BloomParams {
    /// k = 5 balances false positives against tree density at 256 bits.
    fn default() -> Self {
        Self {
            width: FILTER_BITS,
            hashes_per_link: 5,
            seed: 0,
        }
    }
}

/// 256-bit string with most-significant-bit-first indexing.
///
/// Bit 0 is the most significant bit of the first hex digit when rendered.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Bits256 {
    words: [u64; WORDS],
}

impl Bits256 {
    pub const ZERO: Bits256 = Bits256 { words: [0; WORDS] };

    pub fn set(&mut self, index: u16) {
        debug_assert!(index < FILTER_BITS);
        let w = (index / 64) as usize;
        let b = 63 - (index % 64);
        self.words[w] |= 1u64 << b;
    }

    pub fn get(&self, index: u16) -> bool {
        let w = (index / 64) as usize;
        let b = 63 - (index % 64);
        (self.words[w] >> b) & 1 == 1
    }

    pub fn or(&self, other: &Bits256) -> Bits256 {
        let mut words = self.words;
        for (w, o) in words.iter_mut().zip(other.words.iter()) {
            *w |= o;
        }
        Bits256 { words }
    }

    /// True when every set bit of `self` is also set in `other`.
    pub fn subset_of(&self, other: &Bits256) -> bool {
        self.words
            .iter()
            .zip(other.words.iter())
            .all(|(a, b)| a & b == *a)
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    /// 64 lowercase hex characters, most significant bit first.
    pub fn to_hex(&self) -> String {
        let mut s = String::with_capacity(64);
        for w in &self.words {
            s.push_str(&format!("{w:016x}"));
        }
        s
    }

    pub fn from_hex(hex: &str) -> Option<Bits256> {
        if hex.len() != 64 {
            return None;
        }
        let mut words = [0u64; WORDS];
        for (i, word) in words.iter_mut().enumerate() {
            *word = u64::from_str_radix(&hex[i * 16..(i + 1) * 16], 16).ok()?;
        }
        Some(Bits256 { words })
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        let mut out = [0u8; 32];
        for (chunk, w) in out.chunks_exact_mut(8).zip(self.words.iter()) {
            chunk.copy_from_slice(&w.to_be_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8; 32]) -> Bits256 {
        let mut words = [0u64; WORDS];
        for (i, word) in words.iter_mut().enumerate() {
            *word = u64::from_be_bytes(bytes[i * 8..(i + 1) * 8].try_into().unwrap());
        }
        Bits256 { words }
    }
}

impl fmt::Debug for Bits256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bits256({})", self.to_hex())
    }
}

/// Identifier of one directed link: a 256-bit pattern with exactly `k` set
/// bits, fully determined by the link key and the generation seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkId {
    bits: Bits256,
    set_positions: Vec<u16>,
}

impl LinkId {
    /// Builds a link identifier from explicit distinct bit positions.
    ///
    /// Used by tests and by the collision-free assignment mode of the
    /// conformant topology generator.
    pub fn from_positions(positions: &[u16]) -> LinkId {
        let mut set_positions: Vec<u16> = positions.to_vec();
        set_positions.sort_unstable();
        set_positions.dedup();
        assert_eq!(
            set_positions.len(),
            positions.len(),
            "positions must be distinct"
        );
        let mut bits = Bits256::ZERO;
        for &p in &set_positions {
            assert!(p < FILTER_BITS);
            bits.set(p);
        }
        LinkId {
            bits,
            set_positions,
        }
    }

    pub fn bits(&self) -> &Bits256 {
        &self.bits
    }

    pub fn set_positions(&self) -> &[u16] {
        &self.set_positions
    }

    pub fn popcount(&self) -> u32 {
        self.bits.count_ones()
    }
}

/// In-packet forwarding identifier: the OR of the link identifiers of a
/// delivery tree. The all-zeros identifier matches no link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ForwardingId {
    bits: Bits256,
}

impl ForwardingId {
    pub const ZERO: ForwardingId = ForwardingId {
        bits: Bits256::ZERO,
    };

    pub fn bits(&self) -> &Bits256 {
        &self.bits
    }

    pub fn is_zero(&self) -> bool {
        self.bits.is_zero()
    }

    pub fn popcount(&self) -> u32 {
        self.bits.count_ones()
    }

    pub fn to_hex(&self) -> String {
        self.bits.to_hex()
    }

    pub fn from_hex(hex: &str) -> Option<ForwardingId> {
        Bits256::from_hex(hex).map(|bits| ForwardingId { bits })
    }

    pub fn from_bits(bits: Bits256) -> ForwardingId {
        ForwardingId { bits }
    }

    pub fn with_link(&self, link: &LinkId) -> ForwardingId {
        ForwardingId {
            bits: self.bits.or(&link.bits),
        }
    }
}

/// Derives the link identifier for `link_key`: `k` distinct bit positions
/// drawn from a keyed deterministic generator over `(seed, link_key)`.
pub fn new_link_id(link_key: &str, params: &BloomParams) -> Result<LinkId, BloomError> {
    if link_key.is_empty() {
        return Err(BloomError::EmptyLinkKey);
    }
    if params.hashes_per_link == 0 || params.hashes_per_link > 16 {
        return Err(BloomError::HashCountOutOfRange(params.hashes_per_link));
    }

    let mut hasher = Sha256::new();
    hasher.update(params.seed.to_le_bytes());
    hasher.update((link_key.len() as u64).to_le_bytes());
    hasher.update(link_key.as_bytes());
    let digest = hasher.finalize();
    let mut rng = ChaCha8Rng::from_seed(digest.into());

    let k = params.hashes_per_link as usize;
    let mut set_positions = rand::seq::index::sample(&mut rng, FILTER_BITS as usize, k)
        .into_iter()
        .map(|p| p as u16)
        .collect::<Vec<_>>();
    set_positions.sort_unstable();

    let mut bits = Bits256::ZERO;
    for &p in &set_positions {
        bits.set(p);
    }
    Ok(LinkId {
        bits,
        set_positions,
    })
}

/// ORs a path's link identifiers together. The empty path encodes to the
/// all-zeros identifier.
pub fn encode_path<'a, I>(links: I) -> ForwardingId
where
    I: IntoIterator<Item = &'a LinkId>,
{
    let mut bits = Bits256::ZERO;
    for link in links {
        bits = bits.or(&link.bits);
    }
    ForwardingId { bits }
}

/// ORs two forwarding identifiers: the encoding of the union of the two
/// delivery trees.
pub fn merge(a: &ForwardingId, b: &ForwardingId) -> ForwardingId {
    ForwardingId {
        bits: a.bits.or(&b.bits),
    }
}

/// Membership test used for the forwarding decision: true iff every bit of
/// the link identifier is set in the forwarding identifier.
pub fn matches(link: &LinkId, fid: &ForwardingId) -> bool {
    !link.bits.is_zero() && link.bits.subset_of(&fid.bits)
}

/// Standard Bloom filter false-positive estimate `(1 - e^(-k*n/m))^k` for a
/// filter holding `n_links` link identifiers.
pub fn theoretical_fp_rate(n_links: u64, params: &BloomParams) -> f64 {
    let k = params.hashes_per_link as f64;
    let m = params.width as f64;
    let n = n_links as f64;
    (1.0 - (-(k * n) / m).exp()).powi(params.hashes_per_link as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    // (1 - e^(-5*n/256))^5 recomputed at 40 decimal digits.
    const FP_N5: f64 = 0.000006971626107715566168967938387222707239629;
    const FP_N10: f64 = 0.0001758096496773028268517979496349660483286;
    const FP_N20: f64 = 0.003535678808828171079843465314584207220711;
    const FP_N40: f64 = 0.04684507629321845166030927357260434067132;

    fn params(k: u16, seed: u64) -> BloomParams {
        BloomParams::new(k, seed).unwrap()
    }

    #[test]
    fn link_id_is_deterministic_and_has_k_bits() {
        let p = params(5, 7);
        let a = new_link_id("s1-s2", &p).unwrap();
        let b = new_link_id("s1-s2", &p).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.popcount(), 5);
        assert_eq!(a.set_positions().len(), 5);
    }

    #[test]
    fn distinct_keys_keep_the_k_bit_invariant() {
        let p = params(5, 7);
        for key in ["s1-s2", "s2-s1", "s2-s3", "n1-s1"] {
            assert_eq!(new_link_id(key, &p).unwrap().popcount(), 5);
        }
    }

    #[test]
    fn seed_change_moves_the_set_positions() {
        let a = new_link_id("s1-s2", &params(5, 7)).unwrap();
        let b = new_link_id("s1-s2", &params(5, 8)).unwrap();
        assert_ne!(a.set_positions(), b.set_positions());
    }

    #[test]
    fn empty_key_and_bad_k_are_rejected() {
        assert_eq!(
            new_link_id("", &params(5, 0)),
            Err(BloomError::EmptyLinkKey)
        );
        assert_eq!(
            BloomParams::new(0, 0),
            Err(BloomError::HashCountOutOfRange(0))
        );
        assert_eq!(
            BloomParams::new(17, 0),
            Err(BloomError::HashCountOutOfRange(17))
        );
    }

    #[test]
    fn empty_path_encodes_to_zero() {
        let fid = encode_path([]);
        assert!(fid.is_zero());
        let link = new_link_id("a-b", &params(5, 0)).unwrap();
        assert!(!matches(&link, &fid));
    }

    #[test]
    fn singleton_path_has_exactly_the_link_bits() {
        let link = new_link_id("a-b", &params(5, 0)).unwrap();
        let fid = encode_path([&link]);
        assert_eq!(fid.bits(), link.bits());
    }

    #[test]
    fn two_link_path_contains_both_links() {
        let p = params(5, 0);
        let l1 = new_link_id("a-b", &p).unwrap();
        let l2 = new_link_id("b-c", &p).unwrap();
        let fid = encode_path([&l1, &l2]);
        assert!(matches(&l1, &fid));
        assert!(matches(&l2, &fid));
        assert!(fid.popcount() <= l1.popcount() + l2.popcount());
    }

    #[test]
    fn merge_identity_and_idempotence() {
        let p = params(5, 3);
        let l1 = new_link_id("x-y", &p).unwrap();
        let f = encode_path([&l1]);
        assert_eq!(merge(&f, &ForwardingId::ZERO), f);
        assert_eq!(merge(&f, &f), f);
    }

    #[test]
    fn matches_rejects_zero_fid() {
        let link = new_link_id("a-b", &params(5, 0)).unwrap();
        assert!(!matches(&link, &ForwardingId::ZERO));
    }

    #[test]
    fn fp_rate_zero_links_is_zero() {
        assert_eq!(theoretical_fp_rate(0, &params(5, 0)), 0.0);
    }

    #[test]
    fn fp_rate_approaches_one_from_below() {
        let p = params(5, 0);
        // n=500 is the largest the exponential still resolves in f64.
        let big = theoretical_fp_rate(500, &p);
        assert!(big < 1.0);
        assert!(big > 0.999);
        assert!(theoretical_fp_rate(1_000_000, &p) <= 1.0);
        let mut prev = 0.0;
        for n in 0..200 {
            let v = theoretical_fp_rate(n, &p);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn fp_rate_matches_high_precision_reference() {
        let p = params(5, 0);
        assert!((theoretical_fp_rate(5, &p) - FP_N5).abs() < 1e-15);
        assert!((theoretical_fp_rate(10, &p) - FP_N10).abs() < 1e-15);
        assert!((theoretical_fp_rate(20, &p) - FP_N20).abs() < 1e-15);
        assert!((theoretical_fp_rate(40, &p) - FP_N40).abs() < 1e-14);
    }

    #[test]
    fn hex_round_trip_is_msb_first() {
        let mut bits = Bits256::ZERO;
        bits.set(0);
        assert_eq!(&bits.to_hex()[..1], "8");
        assert_eq!(bits.to_hex().len(), 64);
        bits.set(255);
        let hex = bits.to_hex();
        assert_eq!(&hex[63..], "1");
        assert_eq!(Bits256::from_hex(&hex), Some(bits));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn link_keys() -> impl Strategy<Value = Vec<String>> {
            proptest::collection::vec("[a-z0-9]{1,12}", 1..=30)
        }

        proptest! {
            // Every link of a path matches the path's encoding.
            #[test]
            fn encoding_never_loses_a_path_member(
                keys in link_keys(),
                k in 1u16..=8,
                seed in any::<u64>(),
            ) {
                let p = BloomParams::new(k, seed).unwrap();
                let links: Vec<LinkId> =
                    keys.iter().map(|key| new_link_id(key, &p).unwrap()).collect();
                let fid = encode_path(links.iter());
                for link in &links {
                    prop_assert!(matches(link, &fid));
                }
            }

            // Merge is a commutative idempotent monoid with a zero identity.
            #[test]
            fn merge_monoid_laws(
                ka in link_keys(),
                kb in link_keys(),
                kc in link_keys(),
                seed in any::<u64>(),
            ) {
                let p = BloomParams::default();
                let fid = |keys: &[String]| {
                    let links: Vec<LinkId> = keys
                        .iter()
                        .map(|key| new_link_id(&format!("{seed}-{key}"), &p).unwrap())
                        .collect();
                    encode_path(links.iter())
                };
                let (a, b, c) = (fid(&ka), fid(&kb), fid(&kc));
                prop_assert_eq!(merge(&a, &b), merge(&b, &a));
                prop_assert_eq!(merge(&merge(&a, &b), &c), merge(&a, &merge(&b, &c)));
                prop_assert_eq!(merge(&a, &a), a);
                prop_assert_eq!(merge(&a, &ForwardingId::ZERO), a);
            }
        }
    }

    #[test]
    fn spurious_match_rate_tracks_the_estimate() {
        // Unconditional Monte Carlo: fresh filter of n links per batch, fresh
        // probe links, fixed seeds. Checked within 3 standard errors.
        let p = params(5, 0);
        for (case, n_links) in [(0u64, 5u64), (1, 10), (2, 20), (3, 40)] {
            let batches = 500usize;
            let probes_per_batch = 200usize;
            let mut hits = 0u64;
            for b in 0..batches {
                let fid = encode_path(
                    (0..n_links)
                        .map(|i| new_link_id(&format!("tree-{case}-{b}-{i}"), &p).unwrap())
                        .collect::<Vec<_>>()
                        .iter(),
                );
                for j in 0..probes_per_batch {
                    let probe = new_link_id(&format!("probe-{case}-{b}-{j}"), &p).unwrap();
                    if matches(&probe, &fid) {
                        hits += 1;
                    }
                }
            }
            let total = (batches * probes_per_batch) as f64;
            let measured = hits as f64 / total;
            let expected = theoretical_fp_rate(n_links, &p);
            let se = (expected * (1.0 - expected) / total).sqrt();
            assert!(
                (measured - expected).abs() <= 3.0 * se + 1e-12,
                "n={n_links}: measured {measured} vs expected {expected} (3se {})",
                3.0 * se
            );
        }
    }
}
