//! Seeded procedural test-case generation and the test-set file format.
//!
//! Determinism contract: all randomness comes from ChaCha8 streams keyed with
//! `SeedableRng::seed_from_u64`. Integers in `[0, span)` are drawn as
//! `next_u64() % span` (span here is at most 3.3e7, so modulo bias is below
//! 2^-39 and irrelevant). A test set is generated from a master stream keyed
//! on the set seed, which emits one seed per candidate case; candidates whose
//! content (kind, mode, payload — per-case seed excluded) repeats an earlier
//! case are skipped. This makes sets reproducible from `(prng, seed, count)`
//! alone and pairwise distinct by construction.
//!
//! File format (line-delimited JSON, documented in docs/formats.md):
//! line 1 is the header `{format_version, kind, mode, seed, count, prng}`,
//! followed by `count` case records in generation order.

use std::collections::BTreeSet;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{EnvError, EnvKind, Family, Mode, TestCase};

pub const FORMAT_VERSION: u32 = 1;
pub const PRNG_NAME: &str = "chacha8";

#[derive(Debug, Error)]
pub enum TestSetError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("empty test-set file")]
    Empty,
    #[error("malformed header: {0}")]
    Header(String),
    #[error("unsupported format_version {0}")]
    Version(u32),
    #[error("unsupported prng {0:?}")]
    Prng(String),
    #[error("malformed case record at index {index}: {message}")]
    Case { index: usize, message: String },
    #[error("duplicate case content at index {index}")]
    Duplicate { index: usize },
    #[error("header declares {declared} cases, file holds {found}")]
    CountMismatch { declared: usize, found: usize },
    #[error("case at index {index} has kind/mode {found}, header says {expected}")]
    KindMismatch {
        index: usize,
        found: String,
        expected: String,
    },
    #[error("cannot generate {requested} distinct cases for {kind} {mode}")]
    SpaceExhausted {
        requested: usize,
        kind: EnvKind,
        mode: Mode,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestSetHeader {
    pub format_version: u32,
    pub kind: EnvKind,
    pub mode: Mode,
    pub seed: u64,
    pub count: usize,
    pub prng: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestSet {
    pub header: TestSetHeader,
    pub cases: Vec<TestCase>,
}

/// Decode a Prüfer sequence over `0..node_count` into the canonical edge list
/// of the labeled tree it encodes. `seq.len()` must be `node_count - 2`;
/// uniform sequences give uniform labeled trees.
pub fn prufer_decode(seq: &[usize], node_count: usize) -> Vec<(usize, usize)> {
    assert!(node_count >= 2, "trees need at least two nodes");
    assert_eq!(seq.len(), node_count - 2, "sequence length mismatch");
    let mut degree = vec![1usize; node_count];
    for &s in seq {
        assert!(s < node_count, "sequence entry out of range");
        degree[s] += 1;
    }
    // Min-heap of current leaves keeps the decode order canonical.
    let mut leaves: std::collections::BinaryHeap<std::cmp::Reverse<usize>> = (0..node_count)
        .filter(|&n| degree[n] == 1)
        .map(std::cmp::Reverse)
        .collect();
    let mut edges = Vec::with_capacity(node_count - 1);
    for &s in seq {
        let std::cmp::Reverse(leaf) = leaves.pop().expect("a tree always has a leaf");
        edges.push((leaf.min(s), leaf.max(s)));
        degree[leaf] -= 1;
        degree[s] -= 1;
        if degree[s] == 1 {
            leaves.push(std::cmp::Reverse(s));
        }
    }
    let std::cmp::Reverse(a) = leaves.pop().expect("two nodes remain");
    let std::cmp::Reverse(b) = leaves.pop().expect("two nodes remain");
    edges.push((a.min(b), a.max(b)));
    edges.sort_unstable();
    edges
}

pub(crate) fn draw_below(rng: &mut ChaCha8Rng, span: u64) -> u64 {
    debug_assert!(span > 0);
    rng.next_u64() % span
}

/// Generate the single case determined by `(kind, mode, seed)`.
pub fn gen_case(kind: EnvKind, mode: Mode, seed: u64) -> TestCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind.family() {
        Family::Guess => {
            let (low, high) = kind.guess_bounds(mode).unwrap();
            let span = (high - low + 1) as u64;
            let target = low + draw_below(&mut rng, span) as i64;
            TestCase::guess(kind, mode, seed, target).expect("generated target is in bounds")
        }
        Family::Dfs | Family::Bfs => {
            let node_count = kind.node_count(mode).unwrap();
            let seq: Vec<usize> = (0..node_count - 2)
                .map(|_| draw_below(&mut rng, node_count as u64) as usize)
                .collect();
            let edges = prufer_decode(&seq, node_count);
            TestCase::tree(kind, mode, seed, edges).expect("decoded tree is valid")
        }
    }
}

/// Generate `count` pairwise-distinct cases from the set seed.
pub fn gen_set(
    kind: EnvKind,
    mode: Mode,
    seed: u64,
    count: usize,
) -> Result<TestSet, TestSetError> {
    let space: Option<u64> = match kind.family() {
        Family::Guess => {
            let (low, high) = kind.guess_bounds(mode).unwrap();
            Some((high - low + 1) as u64)
        }
        Family::Dfs | Family::Bfs => {
            // Labeled trees on n nodes: n^(n-2); None when it overflows u64.
            let n = kind.node_count(mode).unwrap() as u64;
            n.checked_pow(n as u32 - 2)
        }
    };
    if space.is_some_and(|s| count as u64 > s) {
        return Err(TestSetError::SpaceExhausted {
            requested: count,
            kind,
            mode,
        });
    }
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = BTreeSet::new();
    let mut cases = Vec::with_capacity(count);
    // Generous cap: duplicates are rare at canonical sizes; the cap only
    // guards against pathological collision rates.
    let max_attempts = count.saturating_mul(100).saturating_add(10_000);
    let mut attempts = 0;
    while cases.len() < count {
        attempts += 1;
        if attempts > max_attempts {
            return Err(TestSetError::SpaceExhausted {
                requested: count,
                kind,
                mode,
            });
        }
        let case = gen_case(kind, mode, master.next_u64());
        if seen.insert(case.content_key()) {
            cases.push(case);
        }
    }
    Ok(TestSet {
        header: TestSetHeader {
            format_version: FORMAT_VERSION,
            kind,
            mode,
            seed,
            count,
            prng: PRNG_NAME.to_string(),
        },
        cases,
    })
}

pub fn save_to_string(set: &TestSet) -> String {
    let mut out = serde_json::to_string(&set.header).expect("header serializes");
    out.push('\n');
    for case in &set.cases {
        out.push_str(&serde_json::to_string(case).expect("case serializes"));
        out.push('\n');
    }
    out
}

pub fn save(set: &TestSet, path: &Path) -> Result<(), TestSetError> {
    Ok(std::fs::write(path, save_to_string(set))?)
}

pub fn load_from_str(text: &str) -> Result<TestSet, TestSetError> {
    let mut lines = text.lines();
    let header_line = lines.next().ok_or(TestSetError::Empty)?;
    let header: TestSetHeader = serde_json::from_str(header_line)
        .map_err(|e| TestSetError::Header(e.to_string()))?;
    if header.format_version != FORMAT_VERSION {
        return Err(TestSetError::Version(header.format_version));
    }
    if header.prng != PRNG_NAME {
        return Err(TestSetError::Prng(header.prng));
    }
    let mut seen = BTreeSet::new();
    let mut cases = Vec::with_capacity(header.count);
    for (index, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let case: TestCase = serde_json::from_str(line).map_err(|e| TestSetError::Case {
            index,
            message: e.to_string(),
        })?;
        case.validate().map_err(|e: EnvError| TestSetError::Case {
            index,
            message: e.to_string(),
        })?;
        if case.kind != header.kind || case.mode != header.mode {
            return Err(TestSetError::KindMismatch {
                index,
                found: format!("{}/{}", case.kind, case.mode),
                expected: format!("{}/{}", header.kind, header.mode),
            });
        }
        if !seen.insert(case.content_key()) {
            return Err(TestSetError::Duplicate { index });
        }
        cases.push(case);
    }
    if cases.len() != header.count {
        return Err(TestSetError::CountMismatch {
            declared: header.count,
            found: cases.len(),
        });
    }
    Ok(TestSet {
        header,
        cases,
    })
}

pub fn load(path: &Path) -> Result<TestSet, TestSetError> {
    load_from_str(&std::fs::read_to_string(path)?)
}
