#![allow(dead_code)]

use std::path::PathBuf;

use molbench::chem::{Atom, Bond, Molecule};
use molbench::graphrep::MolGraph;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

pub const ESOL_TARGET: &str = "measured log solubility in mols per litre";

pub fn esol_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/esol.csv")
}

/// SMILES column of the vendored ESOL file, in file order.
pub fn esol_smiles() -> Vec<String> {
    let mut reader = csv::Reader::from_path(esol_path()).expect("esol.csv present");
    let col = reader
        .headers()
        .unwrap()
        .iter()
        .position(|h| h == "smiles")
        .expect("smiles column");
    reader
        .records()
        .map(|r| r.unwrap()[col].to_string())
        .collect()
}

pub fn random_permutation(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

/// Relabels atoms so that old atom `i` becomes atom `perm[i]`; bonds are
/// renumbered and listed in shuffled order.
pub fn permute_molecule(mol: &Molecule, perm: &[usize], rng: &mut impl Rng) -> Molecule {
    let mut atoms: Vec<Option<Atom>> = vec![None; mol.atoms.len()];
    for (i, a) in mol.atoms.iter().enumerate() {
        atoms[perm[i]] = Some(a.clone());
    }
    let mut bonds: Vec<Bond> = mol
        .bonds
        .iter()
        .map(|b| {
            let (u, v) = b.endpoints();
            Bond::new(perm[u], perm[v], b.order)
        })
        .collect();
    bonds.shuffle(rng);
    Molecule::new(
        atoms.into_iter().map(|a| a.expect("permutation")).collect(),
        bonds,
    )
}

/// Connected graph on `n` nodes: a random spanning tree plus a few chords,
/// with uniform random features in [-1, 1).
pub fn random_graph(n: usize, d: usize, rng: &mut impl Rng) -> MolGraph {
    let mut edges = Vec::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        edges.push((u, v));
    }
    for _ in 0..rng.random_range(0..=n / 2) {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        let e = (u.min(v), u.max(v));
        if u != v && !edges.contains(&e) {
            edges.push(e);
        }
    }
    let features = Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0));
    MolGraph { features, edges }
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.sample(StandardNormal))
}

/// Random orthogonal matrix from the QR factorization of a Gaussian one.
pub fn random_orthogonal(d: usize, rng: &mut impl Rng) -> Array2<f64> {
    let g = gaussian(d, d, rng);
    let m = nalgebra::DMatrix::from_row_slice(d, d, g.as_slice().unwrap());
    let q = m.qr().q();
    Array2::from_shape_fn((d, d), |(i, j)| q[(i, j)])
}
