//! Molecules parsed from SMILES and the standardization steps applied
//! before featurization: salt stripping, neutralization and hydrogen
//! suppression.

pub mod elements;
mod hydrogens;
mod parser;
mod rings;
mod standardize;
mod writer;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use hydrogens::{assign_implicit_hydrogens, default_implicit_h};
pub use parser::parse_smiles;
pub use rings::ring_atoms;
pub use standardize::{neutralize, remove_hydrogens, standardize, strip_salts};
pub use writer::to_smiles;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChemError {
    #[error("empty SMILES string")]
    Empty,
    #[error("non-ASCII character at position {pos}")]
    NonAscii { pos: usize },
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown element symbol '{symbol}' at position {pos}")]
    UnknownElement { pos: usize, symbol: String },
    #[error("ring bond {label} opened at position {pos} is never closed")]
    UnclosedRing { pos: usize, label: u32 },
    #[error(
        "valence overflow on atom {atom}: bond order sum {bond_sum} exceeds the allowed valence"
    )]
    ValenceOverflow { atom: usize, bond_sum: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Contribution to an atom's bond order sum (aromatic counts 1.5).
    pub fn valence(self) -> f64 {
        match self {
            BondOrder::Single => 1.0,
            BondOrder::Double => 2.0,
            BondOrder::Triple => 3.0,
            BondOrder::Aromatic => 1.5,
        }
    }

    /// Integer code used when hashing bond environments.
    pub fn code(self) -> u32 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub atomic_number: u8,
    pub formal_charge: i8,
    pub aromatic: bool,
    pub isotope: Option<u16>,
    /// Hydrogen count written inside a bracket atom; `Some` marks a bracket atom.
    pub explicit_h: Option<u8>,
    pub implicit_h: u8,
}

impl Atom {
    pub fn new(atomic_number: u8) -> Self {
        Atom {
            atomic_number,
            formal_charge: 0,
            aromatic: false,
            isotope: None,
            explicit_h: None,
            implicit_h: 0,
        }
    }

    pub fn total_h(&self) -> u32 {
        self.implicit_h as u32 + self.explicit_h.unwrap_or(0) as u32
    }

    pub fn is_heavy(&self) -> bool {
        self.atomic_number > elements::HYDROGEN
    }

    pub fn symbol(&self) -> &'static str {
        elements::symbol(self.atomic_number)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bond {
    a: usize,
    b: usize,
    pub order: BondOrder,
}

impl Bond {
    /// Endpoints are stored lower index first. Panics on a self-bond.
    pub fn new(u: usize, v: usize, order: BondOrder) -> Self {
        assert_ne!(u, v, "self-bond on atom {u}");
        Bond {
            a: u.min(v),
            b: u.max(v),
            order,
        }
    }

    pub fn endpoints(&self) -> (usize, usize) {
        (self.a, self.b)
    }

    pub fn other(&self, atom: usize) -> Option<usize> {
        if atom == self.a {
            Some(self.b)
        } else if atom == self.b {
            Some(self.a)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Molecule {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
    pub fragment_count: usize,
}

impl Molecule {
    /// Builds a molecule and computes its connected-component count.
    pub fn new(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Self {
        let mut mol = Molecule {
            atoms,
            bonds,
            fragment_count: 0,
        };
        mol.fragment_count = mol.component_labels().iter().max().map_or(0, |m| m + 1);
        mol
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn heavy_atom_count(&self) -> usize {
        self.atoms.iter().filter(|a| a.is_heavy()).count()
    }

    /// Per-atom neighbor lists with the connecting bond order.
    pub fn adjacency(&self) -> Vec<Vec<(usize, BondOrder)>> {
        let mut adj = vec![Vec::new(); self.atoms.len()];
        for bond in &self.bonds {
            let (u, v) = bond.endpoints();
            adj[u].push((v, bond.order));
            adj[v].push((u, bond.order));
        }
        adj
    }

    pub fn bond_order_sum(&self, atom: usize) -> f64 {
        self.bonds
            .iter()
            .filter(|b| b.other(atom).is_some())
            .map(|b| b.order.valence())
            .sum()
    }

    pub fn heavy_degree(&self, atom: usize) -> usize {
        self.bonds
            .iter()
            .filter_map(|b| b.other(atom))
            .filter(|&n| self.atoms[n].is_heavy())
            .count()
    }

    pub fn net_charge(&self) -> i32 {
        self.atoms.iter().map(|a| a.formal_charge as i32).sum()
    }

    /// Connected-component label per atom, numbered by first atom occurrence.
    pub fn component_labels(&self) -> Vec<usize> {
        let adj = self.adjacency();
        let mut label = vec![usize::MAX; self.atoms.len()];
        let mut next = 0;
        let mut stack = Vec::new();
        for start in 0..self.atoms.len() {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = next;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for &(v, _) in &adj[u] {
                    if label[v] == usize::MAX {
                        label[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        label
    }

    /// Sub-molecule induced by `keep` (ascending atom indices), reindexed
    /// in the original order.
    pub(crate) fn induced(&self, keep: &[usize]) -> Molecule {
        let mut remap = vec![usize::MAX; self.atoms.len()];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        let atoms = keep.iter().map(|&i| self.atoms[i].clone()).collect();
        let bonds = self
            .bonds
            .iter()
            .filter_map(|b| {
                let (u, v) = b.endpoints();
                (remap[u] != usize::MAX && remap[v] != usize::MAX)
                    .then(|| Bond::new(remap[u], remap[v], b.order))
            })
            .collect();
        Molecule::new(atoms, bonds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bond_endpoints_are_ordered() {
        let b = Bond::new(5, 2, BondOrder::Double);
        assert_eq!(b.endpoints(), (2, 5));
        assert_eq!(b.other(5), Some(2));
        assert_eq!(b.other(3), None);
    }

    #[test]
    #[should_panic]
    fn self_bond_panics() {
        Bond::new(1, 1, BondOrder::Single);
    }
}
