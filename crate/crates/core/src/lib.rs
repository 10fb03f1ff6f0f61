//! Molecular property regression toolkit: SMILES parsing and
//! standardization, ECFP-style fingerprints, single-layer graph neural
//! network regressors with an optional fingerprint fusion branch, classical
//! fingerprint baselines, and RBF-kernel centered kernel alignment for
//! comparing learned and fixed molecular representations.

pub mod ad;
pub mod bench;
pub mod chem;
pub mod cka;
pub mod exec;
pub mod fp;
pub mod gnn;
pub mod graphrep;
pub mod models;
