//! Molecular graphs with a six-column raw node feature matrix:
//! atomic number, heavy degree, hydrogen count, formal charge,
//! hybridization code, aromatic flag.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::{elements, BondOrder, Molecule};

pub const NODE_FEATURES: usize = 6;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("cannot featurize a molecule without atoms")]
    EmptyMolecule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hybridization {
    Other = 0,
    Sp = 1,
    Sp2 = 2,
    Sp3 = 3,
}

impl Hybridization {
    pub fn code(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MolGraph {
    /// N x 6 raw (or normalized) node features.
    pub features: Array2<f64>,
    /// Undirected edges, lower index first, no duplicates.
    pub edges: Vec<(usize, usize)>,
}

impl MolGraph {
    pub fn n_nodes(&self) -> usize {
        self.features.nrows()
    }

    pub fn degree(&self, node: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(u, v)| u == node || v == node)
            .count()
    }
}

pub fn perceive_hybridization(mol: &Molecule, atom: usize) -> Hybridization {
    let a = &mol.atoms[atom];
    let mut doubles = 0;
    let mut triple = false;
    let mut all_single = true;
    for bond in mol.bonds.iter().filter(|b| b.other(atom).is_some()) {
        match bond.order {
            BondOrder::Double => doubles += 1,
            BondOrder::Triple => triple = true,
            _ => {}
        }
        if bond.order != BondOrder::Single {
            all_single = false;
        }
    }
    if triple || doubles >= 2 {
        Hybridization::Sp
    } else if a.aromatic || doubles == 1 {
        Hybridization::Sp2
    } else if all_single
        && matches!(
            a.atomic_number,
            elements::BORON
                | elements::CARBON
                | elements::NITROGEN
                | elements::OXYGEN
                | elements::PHOSPHORUS
                | elements::SULFUR
        )
    {
        Hybridization::Sp3
    } else {
        Hybridization::Other
    }
}

pub fn featurize(mol: &Molecule) -> Result<MolGraph, GraphError> {
    let n = mol.atoms.len();
    if n == 0 {
        return Err(GraphError::EmptyMolecule);
    }
    let mut features = Array2::zeros((n, NODE_FEATURES));
    for (i, atom) in mol.atoms.iter().enumerate() {
        let row = [
            atom.atomic_number as f64,
            mol.heavy_degree(i) as f64,
            atom.total_h() as f64,
            atom.formal_charge as f64,
            perceive_hybridization(mol, i).code() as f64,
            if atom.aromatic { 1.0 } else { 0.0 },
        ];
        features.row_mut(i).assign(&Array1::from(row.to_vec()));
    }
    let edges = mol.bonds.iter().map(|b| b.endpoints()).collect();
    Ok(MolGraph { features, edges })
}

/// Per-column z-score statistics fitted on training graphs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Columns with a standard deviation below this are only centered, and end
/// up all zero.
pub const MIN_STD: f64 = 1e-8;

impl FeatureStats {
    /// Population mean/std over every node row of the training graphs.
    pub fn fit<'a>(graphs: impl IntoIterator<Item = &'a MolGraph>) -> Self {
        let mut sum = [0.0; NODE_FEATURES];
        let mut sum_sq = [0.0; NODE_FEATURES];
        let mut count = 0usize;
        let graphs: Vec<&MolGraph> = graphs.into_iter().collect();
        for g in &graphs {
            for row in g.features.rows() {
                for (j, &x) in row.iter().enumerate() {
                    sum[j] += x;
                }
                count += 1;
            }
        }
        let n = count.max(1) as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        for g in &graphs {
            for row in g.features.rows() {
                for (j, &x) in row.iter().enumerate() {
                    sum_sq[j] += (x - mean[j]).powi(2);
                }
            }
        }
        let std = sum_sq.iter().map(|s| (s / n).sqrt()).collect();
        FeatureStats { mean, std }
    }

    pub fn identity() -> Self {
        FeatureStats {
            mean: vec![0.0; NODE_FEATURES],
            std: vec![1.0; NODE_FEATURES],
        }
    }

    pub fn apply(&self, graph: &MolGraph) -> MolGraph {
        let mut features = graph.features.clone();
        for (j, mut col) in features.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (self.mean[j], self.std[j]);
            col.mapv_inplace(|x| if s < MIN_STD { 0.0 } else { (x - m) / s });
        }
        MolGraph {
            features,
            edges: graph.edges.clone(),
        }
    }
}

/// Z-scores `graph` with statistics fitted on `training`.
pub fn normalize_features(training: &[MolGraph], graph: &MolGraph) -> MolGraph {
    FeatureStats::fit(training).apply(graph)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::{parse_smiles, standardize};
    use ndarray::array;

    fn graph(s: &str) -> MolGraph {
        featurize(&parse_smiles(s).unwrap()).unwrap()
    }

    #[test]
    fn hybridization_rules() {
        let m = parse_smiles("C#C").unwrap();
        assert_eq!(perceive_hybridization(&m, 0), Hybridization::Sp);
        let m = parse_smiles("O=C=O").unwrap();
        assert_eq!(perceive_hybridization(&m, 1), Hybridization::Sp);
        assert_eq!(perceive_hybridization(&m, 0), Hybridization::Sp2);
        let m = parse_smiles("c1ccccc1").unwrap();
        assert_eq!(perceive_hybridization(&m, 0), Hybridization::Sp2);
        let m = parse_smiles("C").unwrap();
        assert_eq!(perceive_hybridization(&m, 0), Hybridization::Sp3);
        let m = parse_smiles("CCl").unwrap();
        assert_eq!(perceive_hybridization(&m, 1), Hybridization::Other);
        let m = parse_smiles("[Na+]").unwrap();
        assert_eq!(perceive_hybridization(&m, 0), Hybridization::Other);
    }

    #[test]
    fn methane_row() {
        assert_eq!(graph("C").features, array![[6.0, 0.0, 4.0, 0.0, 3.0, 0.0]]);
    }

    #[test]
    fn benzene_rows() {
        let g = graph("c1ccccc1");
        for row in g.features.rows() {
            assert_eq!(row.to_vec(), vec![6.0, 2.0, 1.0, 0.0, 2.0, 1.0]);
        }
        assert_eq!(g.edges.len(), 6);
    }

    #[test]
    fn acetate_charge_column() {
        let g = graph("CC(=O)[O-]");
        assert_eq!(g.features[[3, 3]], -1.0);
        assert_eq!(g.features[[3, 2]], 0.0);
    }

    #[test]
    fn degree_matches_incident_edges() {
        let g = featurize(&standardize("CC(C)(C)c1ccc(O)cc1[N+](=O)[O-]").unwrap()).unwrap();
        for i in 0..g.n_nodes() {
            assert_eq!(g.features[[i, 1]] as usize, g.degree(i));
        }
    }

    #[test]
    fn empty_molecule_is_an_error() {
        let empty = Molecule::new(Vec::new(), Vec::new());
        assert_eq!(featurize(&empty), Err(GraphError::EmptyMolecule));
    }

    #[test]
    fn normalization_rules() {
        let mk = |rows: Vec<[f64; 6]>| MolGraph {
            features: Array2::from_shape_vec((rows.len(), 6), rows.into_iter().flatten().collect())
                .unwrap(),
            edges: vec![],
        };
        let train = mk(vec![
            [0.0, 5.0, 1.0, 1.0, 1.0, 1.0],
            [2.0, 5.0, 1.0, 1.0, 1.0, 1.0],
        ]);
        let out = normalize_features(std::slice::from_ref(&train), &train);
        assert_eq!(out.features.column(0).to_vec(), vec![-1.0, 1.0]);
        assert_eq!(out.features.column(1).to_vec(), vec![0.0, 0.0]);

        let single = graph("C");
        let out = normalize_features(std::slice::from_ref(&single), &single);
        assert!(out.features.iter().all(|&x| x == 0.0));
    }
}
