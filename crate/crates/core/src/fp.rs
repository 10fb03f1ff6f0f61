//! Circular (Morgan / ECFP-style) fingerprints folded into fixed-length bit
//! vectors.
//!
//! Identifiers are produced with a fixed FNV-1a hash over little-endian
//! words followed by the murmur3 32-bit finalizer, so fingerprints are
//! identical across runs and platforms. Bit positions are not compatible
//! with other toolkits.

use std::collections::HashSet;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::{ring_atoms, Molecule};

pub const ECFP4_RADIUS: usize = 2;
pub const DEFAULT_BITS: usize = 1024;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FpError {
    #[error("fingerprint length must be positive")]
    ZeroLength,
    #[error("hex string of length {got} does not encode {n_bits} bits")]
    BadHex { got: usize, n_bits: usize },
}

const FNV_OFFSET: u32 = 0x811c_9dc5;
const FNV_PRIME: u32 = 0x0100_0193;

fn fmix32(mut h: u32) -> u32 {
    h ^= h >> 16;
    h = h.wrapping_mul(0x85eb_ca6b);
    h ^= h >> 13;
    h = h.wrapping_mul(0xc2b2_ae35);
    h ^= h >> 16;
    h
}

/// Platform-independent 32-bit hash of a sequence of integers.
pub fn hash_words(words: &[i64]) -> u32 {
    let mut h = FNV_OFFSET;
    for w in words {
        for byte in w.to_le_bytes() {
            h ^= byte as u32;
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    fmix32(h)
}

/// Round-0 identifiers: hash of (atomic number, heavy degree, total H,
/// formal charge, ring membership, aromaticity).
pub fn initial_invariants(mol: &Molecule) -> Vec<u32> {
    let in_ring = ring_atoms(mol);
    mol.atoms
        .iter()
        .enumerate()
        .map(|(i, a)| {
            hash_words(&[
                a.atomic_number as i64,
                mol.heavy_degree(i) as i64,
                a.total_h() as i64,
                a.formal_charge as i64,
                in_ring[i] as i64,
                a.aromatic as i64,
            ])
        })
        .collect()
}

/// All identifiers from rounds 0..=radius with duplicate environments
/// removed. An environment is the set of atoms within `r` bonds of the
/// center; a new identifier is dropped when its atom set was already
/// covered in an earlier round, and among identical sets produced in the
/// same round only the smallest identifier survives.
pub fn morgan_identifiers(mol: &Molecule, radius: usize) -> Vec<u32> {
    let n = mol.atoms.len();
    let adj = mol.adjacency();
    let mut ids = initial_invariants(mol);
    // Atom sets as sorted index vectors.
    let mut envs: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut out = Vec::new();

    let mut accept_round = |ids: &[u32], envs: &[Vec<usize>], seen: &mut HashSet<Vec<usize>>| {
        let mut order: Vec<usize> = (0..n).collect();
        // Smallest identifier first so it wins within-round ties.
        order.sort_by_key(|&i| (ids[i], i));
        let mut this_round: HashSet<&Vec<usize>> = HashSet::new();
        let mut accepted = Vec::new();
        for i in order {
            if seen.contains(&envs[i]) || !this_round.insert(&envs[i]) {
                continue;
            }
            accepted.push(i);
        }
        for &i in &accepted {
            seen.insert(envs[i].clone());
            out.push(ids[i]);
        }
    };

    accept_round(&ids, &envs, &mut seen);
    for round in 1..=radius {
        let mut next_ids = Vec::with_capacity(n);
        let mut next_envs = Vec::with_capacity(n);
        for i in 0..n {
            let mut nbrs: Vec<(i64, i64)> = adj[i]
                .iter()
                .map(|&(j, order)| (order.code() as i64, ids[j] as i64))
                .collect();
            nbrs.sort_unstable();
            let mut words = Vec::with_capacity(2 + 2 * nbrs.len());
            words.push(round as i64);
            words.push(ids[i] as i64);
            for (o, id) in nbrs {
                words.push(o);
                words.push(id);
            }
            next_ids.push(hash_words(&words));

            let mut env = envs[i].clone();
            for &(j, _) in &adj[i] {
                env.extend_from_slice(&envs[j]);
            }
            env.sort_unstable();
            env.dedup();
            next_envs.push(env);
        }
        ids = next_ids;
        envs = next_envs;
        accept_round(&ids, &envs, &mut seen);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fingerprint {
    n_bits: usize,
    words: Vec<u64>,
    popcount: usize,
}

impl Fingerprint {
    pub fn zeros(n_bits: usize) -> Result<Self, FpError> {
        if n_bits == 0 {
            return Err(FpError::ZeroLength);
        }
        Ok(Fingerprint {
            n_bits,
            words: vec![0; n_bits.div_ceil(64)],
            popcount: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.n_bits
    }

    pub fn is_empty(&self) -> bool {
        self.popcount == 0
    }

    pub fn popcount(&self) -> usize {
        self.popcount
    }

    pub fn get(&self, bit: usize) -> bool {
        self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn set(&mut self, bit: usize) {
        let mask = 1u64 << (bit % 64);
        let w = &mut self.words[bit / 64];
        if *w & mask == 0 {
            *w |= mask;
            self.popcount += 1;
        }
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_bits).filter(|&b| self.get(b))
    }

    /// Bits as 0.0 / 1.0 values.
    pub fn to_dense(&self) -> Vec<f64> {
        (0..self.n_bits)
            .map(|b| if self.get(b) { 1.0 } else { 0.0 })
            .collect()
    }

    /// Tanimoto similarity; two empty fingerprints count as identical.
    pub fn tanimoto(&self, other: &Fingerprint) -> f64 {
        let common: u32 = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum();
        let union = self.popcount + other.popcount - common as usize;
        if union == 0 {
            1.0
        } else {
            common as f64 / union as f64
        }
    }

    /// Lowercase hex, two digits per byte; byte k holds bits 8k..8k+7 with
    /// bit 8k in the least significant position.
    pub fn to_hex(&self) -> String {
        let n_bytes = self.n_bits.div_ceil(8);
        let mut s = String::with_capacity(n_bytes * 2);
        for k in 0..n_bytes {
            let byte = (self.words[k / 8] >> ((k % 8) * 8)) as u8;
            s.push_str(&format!("{byte:02x}"));
        }
        s
    }

    pub fn from_hex(hex: &str, n_bits: usize) -> Result<Self, FpError> {
        let mut fp = Fingerprint::zeros(n_bits)?;
        let bad = || FpError::BadHex {
            got: hex.len(),
            n_bits,
        };
        if hex.len() != n_bits.div_ceil(8) * 2 {
            return Err(bad());
        }
        for k in 0..hex.len() / 2 {
            let byte = u8::from_str_radix(hex.get(2 * k..2 * k + 2).ok_or_else(bad)?, 16)
                .map_err(|_| bad())?;
            for b in 0..8 {
                let bit = 8 * k + b;
                if byte >> b & 1 == 1 {
                    if bit >= n_bits {
                        return Err(bad());
                    }
                    fp.set(bit);
                }
            }
        }
        Ok(fp)
    }
}

/// Sets bit `id mod n_bits` for every identifier.
pub fn fold(ids: &[u32], n_bits: usize) -> Result<Fingerprint, FpError> {
    let mut fp = Fingerprint::zeros(n_bits)?;
    for &id in ids {
        fp.set(id as usize % n_bits);
    }
    Ok(fp)
}

/// 1024-bit, radius-2 circular fingerprint.
pub fn ecfp4(mol: &Molecule) -> Fingerprint {
    fold(&morgan_identifiers(mol, ECFP4_RADIUS), DEFAULT_BITS).expect("nonzero length")
}

/// Radius-2 circular fingerprint folded to `n_bits`.
pub fn ecfp4_bits(mol: &Molecule, n_bits: usize) -> Result<Fingerprint, FpError> {
    fold(&morgan_identifiers(mol, ECFP4_RADIUS), n_bits)
}

/// Stacks fingerprints as 0/1 rows. All fingerprints must share a length.
pub fn dense_matrix(fps: &[Fingerprint]) -> Array2<f64> {
    let n_bits = fps.first().map_or(0, Fingerprint::len);
    let mut out = Array2::zeros((fps.len(), n_bits));
    for (i, fp) in fps.iter().enumerate() {
        assert_eq!(fp.len(), n_bits, "fingerprint lengths differ");
        for b in fp.ones() {
            out[[i, b]] = 1.0;
        }
    }
    out
}
