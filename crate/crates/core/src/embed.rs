//! Text embedding behind a pluggable interface.
//!
//! The default embedder is a signed feature-hashing scheme over character
//! (3,4,5)-grams: each gram is hashed with FNV-1a 64 under a fixed seed,
//! assigned to one of 256 buckets, added with a sign taken from the top
//! hash bit, and the accumulated vector is L2-normalized. It is a pure
//! function of the text, identical across runs and platforms. The same
//! gram scheme builds the per-speaker style vectors.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

/// Dimension of every stored and query vector.
pub const DIM: usize = 256;

/// FNV-1a 64 offset basis.
const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
/// FNV-1a 64 prime.
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a 64 with the seed folded into the offset basis.
pub fn fnv1a64(bytes: &[u8], seed: u64) -> u64 {
    let mut h = FNV_OFFSET ^ seed;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// L2 norm computed in f64.
pub fn norm(v: &[f32]) -> f64 {
    v.iter()
        .map(|&x| f64::from(x) * f64::from(x))
        .sum::<f64>()
        .sqrt()
}

/// Normalizes to unit L2 norm in place. Zero vectors are left untouched.
pub fn l2_normalize(v: &mut [f32]) {
    let n = norm(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x = (f64::from(*x) / n) as f32;
        }
    }
}

/// Cosine similarity accumulated in f64, with explicit norm division so
/// that identical vectors score 1.0 to within a few ulps. Returns 0.0 if
/// either vector has zero norm.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (&x, &y) in a.iter().zip(b.iter()) {
        let (x, y) = (f64::from(x), f64::from(y));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na.sqrt() * nb.sqrt())
}

/// Hashed char-(3,4,5)-gram bag, signed, L2-normalized. Texts too short
/// to yield any gram (fewer than three chars) produce the canonical unit
/// vector with bucket 0 set to 1.0.
pub fn ngram_vector_seeded(text: &str, seed: u64) -> Vec<f32> {
    let chars: Vec<char> = text.chars().collect();
    let mut v = vec![0.0f32; DIM];
    let mut any = false;
    let mut buf = String::new();
    for len in [3usize, 4, 5] {
        if chars.len() < len {
            continue;
        }
        for window in chars.windows(len) {
            buf.clear();
            buf.extend(window.iter());
            let h = fnv1a64(buf.as_bytes(), seed);
            let bucket = (h % DIM as u64) as usize;
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            v[bucket] += sign;
            any = true;
        }
    }
    if !any {
        v[0] = 1.0;
        return v;
    }
    l2_normalize(&mut v);
    // Cancellation can zero the accumulated vector; fall back to the
    // canonical vector so the unit-norm invariant holds.
    if norm(&v) == 0.0 {
        v[0] = 1.0;
    }
    v
}

/// The gram scheme with the default seed; used for both the default
/// embedder and the engram style vectors.
pub fn ngram_vector(text: &str) -> Vec<f32> {
    ngram_vector_seeded(text, 0)
}

/// Pluggable text embedder. Implementations must be pure: the same text
/// always maps to the same vector. The name is recorded in store metadata
/// and checked on reopen.
pub trait Embedder: Send + Sync {
    fn name(&self) -> &str;

    fn dimension(&self) -> usize {
        DIM
    }

    /// Embeds text into a unit-norm vector of [`Self::dimension`] values.
    fn embed(&self, text: &str) -> Vec<f32>;
}

/// Default embedder: signed char-(3,4,5)-gram hashing, 256 buckets.
#[derive(Debug, Clone, Default)]
pub struct NgramHashEmbedder {
    seed: u64,
}

impl NgramHashEmbedder {
    pub fn new() -> Self {
        NgramHashEmbedder { seed: 0 }
    }

    pub fn with_seed(seed: u64) -> Self {
        NgramHashEmbedder { seed }
    }
}

impl Embedder for NgramHashEmbedder {
    fn name(&self) -> &str {
        "default-hash-256"
    }

    fn embed(&self, text: &str) -> Vec<f32> {
        ngram_vector_seeded(text, self.seed)
    }
}

/// Word-level signed feature hashing. A coarser embedder class kept for
/// ablation grids and embedder-mismatch tests.
#[derive(Debug, Clone, Default)]
pub struct TokenHashEmbedder;

impl Embedder for TokenHashEmbedder {
    fn name(&self) -> &str {
        "token-hash-256"
    }

    fn embed(&self, text: &str) -> Vec<f32> {
        let mut v = vec![0.0f32; DIM];
        let mut any = false;
        for token in crate::text::tokenize(text) {
            let h = fnv1a64(token.as_bytes(), 1);
            let bucket = (h % DIM as u64) as usize;
            v[bucket] += if h >> 63 == 0 { 1.0 } else { -1.0 };
            any = true;
        }
        if !any {
            v[0] = 1.0;
            return v;
        }
        l2_normalize(&mut v);
        if norm(&v) == 0.0 {
            v[0] = 1.0;
        }
        v
    }
}

/// Wraps another embedder and counts calls. Used to verify early-exit
/// paths that must not touch the embedder.
pub struct CountingEmbedder {
    inner: Arc<dyn Embedder>,
    calls: AtomicU64,
}

impl CountingEmbedder {
    pub fn new(inner: Arc<dyn Embedder>) -> Self {
        CountingEmbedder {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Embedder for CountingEmbedder {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn embed(&self, text: &str) -> Vec<f32> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.embed(text)
    }
}

/// Looks up a built-in embedder by its config name.
pub fn builtin_embedder(name: &str) -> Option<Arc<dyn Embedder>> {
    match name {
        "default-hash-256" => Some(Arc::new(NgramHashEmbedder::new())),
        "token-hash-256" => Some(Arc::new(TokenHashEmbedder)),
        _ => None,
    }
}
