use super::elements::{HYDROGEN, NITROGEN, OXYGEN, PHOSPHORUS, SULFUR};
use super::{parse_smiles, BondOrder, ChemError, Molecule};

/// Keeps the fragment with the most heavy atoms. Ties go to the larger bond
/// count, then to the fragment containing the lowest original atom index.
pub fn strip_salts(mol: &Molecule) -> Molecule {
    if mol.fragment_count <= 1 {
        return mol.clone();
    }
    let labels = mol.component_labels();
    let n_comp = mol.fragment_count;
    let mut heavy = vec![0usize; n_comp];
    let mut bonds = vec![0usize; n_comp];
    for (atom, &c) in mol.atoms.iter().zip(&labels) {
        if atom.is_heavy() {
            heavy[c] += 1;
        }
    }
    for bond in &mol.bonds {
        bonds[labels[bond.endpoints().0]] += 1;
    }
    // Labels are assigned in first-atom order, so a lower label means a
    // lower first atom index.
    let best = (0..n_comp)
        .max_by(|&a, &b| {
            (heavy[a], bonds[a])
                .cmp(&(heavy[b], bonds[b]))
                .then(b.cmp(&a))
        })
        .expect("at least one fragment");
    let keep: Vec<usize> = (0..mol.atoms.len())
        .filter(|&i| labels[i] == best)
        .collect();
    mol.induced(&keep)
}

/// Neutralizes common charged groups:
///
/// * O⁻ / S⁻ without a positively charged neighbor gains one H;
/// * N⁺ / P⁺ with at least one H and only single bonds loses one H.
///
/// Quaternary cations and charge-separated groups such as nitro are left
/// untouched. Neutralized atoms carry their hydrogens as implicit H.
pub fn neutralize(mol: &Molecule) -> Molecule {
    let adj = mol.adjacency();
    let mut out = mol.clone();
    for (i, atom) in mol.atoms.iter().enumerate() {
        let z = atom.atomic_number;
        let neighbors = &adj[i];
        let new_h = match atom.formal_charge {
            -1 if z == OXYGEN || z == SULFUR => {
                let cation_neighbor = neighbors
                    .iter()
                    .any(|&(n, _)| mol.atoms[n].formal_charge > 0);
                (!cation_neighbor).then(|| atom.total_h() + 1)
            }
            1 if z == NITROGEN || z == PHOSPHORUS => {
                let all_single = neighbors.iter().all(|&(_, o)| o == BondOrder::Single);
                (all_single && atom.total_h() >= 1 && !atom.aromatic).then(|| atom.total_h() - 1)
            }
            _ => None,
        };
        if let Some(h) = new_h {
            let a = &mut out.atoms[i];
            a.formal_charge = 0;
            a.explicit_h = None;
            a.implicit_h = h as u8;
        }
    }
    out
}

/// Folds hydrogen atoms bonded to exactly one heavy atom into that atom's
/// hydrogen count. Isotopic or charged hydrogens stay explicit.
pub fn remove_hydrogens(mol: &Molecule) -> Molecule {
    let adj = mol.adjacency();
    let removable: Vec<bool> = mol
        .atoms
        .iter()
        .enumerate()
        .map(|(i, a)| {
            a.atomic_number == HYDROGEN
                && a.isotope.is_none()
                && a.formal_charge == 0
                && a.total_h() == 0
                && adj[i].len() == 1
                && adj[i][0].1 == BondOrder::Single
                && mol.atoms[adj[i][0].0].is_heavy()
        })
        .collect();
    if !removable.iter().any(|&r| r) {
        return mol.clone();
    }
    let mut base = mol.clone();
    for (i, _) in removable.iter().enumerate().filter(|(_, &r)| r) {
        let heavy = adj[i][0].0;
        let atom = &mut base.atoms[heavy];
        match atom.explicit_h.as_mut() {
            Some(h) => *h += 1,
            None => atom.implicit_h += 1,
        }
    }
    let keep: Vec<usize> = (0..mol.atoms.len()).filter(|&i| !removable[i]).collect();
    base.induced(&keep)
}

/// Full preprocessing: parse, strip salts, neutralize, fold explicit H.
pub fn standardize(smiles: &str) -> Result<Molecule, ChemError> {
    let mol = parse_smiles(smiles)?;
    Ok(remove_hydrogens(&neutralize(&strip_salts(&mol))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::to_smiles;

    fn p(s: &str) -> Molecule {
        parse_smiles(s).unwrap()
    }

    #[test]
    fn acetate_salt_keeps_acetate_and_neutralizes() {
        let stripped = strip_salts(&p("CC(=O)[O-].[Na+]"));
        assert_eq!(stripped.atoms.len(), 4);
        assert_eq!(stripped.fragment_count, 1);
        let acid = neutralize(&stripped);
        assert_eq!(acid.net_charge(), 0);
        let o = &acid.atoms[3];
        assert_eq!(o.formal_charge, 0);
        assert_eq!(o.implicit_h, 1);
        assert_eq!(o.explicit_h, None);
    }

    #[test]
    fn single_fragment_is_unchanged() {
        let m = p("CCO");
        assert_eq!(strip_salts(&m), m);
    }

    #[test]
    fn tie_goes_to_first_fragment() {
        let m = strip_salts(&p("C.C"));
        assert_eq!(m.atoms.len(), 1);
        // Equal heavy atoms: the ring wins on bond count.
        let m = strip_salts(&p("CCC.C1CC1"));
        assert_eq!(m.bonds.len(), 3);
        let m = strip_salts(&p("OCC.CCN"));
        assert_eq!(m.atoms[0].atomic_number, OXYGEN);
    }

    #[test]
    fn salt_at_front_is_removed() {
        let m = strip_salts(&p("[Cl-].C[NH3+]"));
        assert_eq!(m.atoms.len(), 2);
        let n = neutralize(&m);
        assert_eq!(n.atoms[1].total_h(), 2);
        assert_eq!(n.net_charge(), 0);
    }

    #[test]
    fn charged_amine_and_quaternary() {
        let m = neutralize(&p("C[NH3+]"));
        assert_eq!(m.atoms[1].formal_charge, 0);
        assert_eq!(m.atoms[1].total_h(), 2);
        let quat = p("C[N+](C)(C)C");
        assert_eq!(neutralize(&quat), quat);
    }

    #[test]
    fn nitro_and_n_oxide_left_alone() {
        let nitro = p("C[N+](=O)[O-]");
        assert_eq!(neutralize(&nitro), nitro);
        let oxide = p("C[N+](C)(C)[O-]");
        assert_eq!(neutralize(&oxide), oxide);
    }

    #[test]
    fn thiolate_and_phosphonium() {
        let m = neutralize(&p("C[S-]"));
        assert_eq!(m.atoms[1].total_h(), 1);
        let m = neutralize(&p("C[PH3+]"));
        assert_eq!(m.atoms[1].total_h(), 2);
        assert_eq!(m.net_charge(), 0);
    }

    #[test]
    fn neutralize_is_idempotent() {
        for s in [
            "CC(=O)[O-]",
            "C[NH3+]",
            "C[N+](=O)[O-]",
            "[O-]c1ccccc1",
            "OCC[NH2+]C",
        ] {
            let once = neutralize(&p(s));
            assert_eq!(neutralize(&once), once, "{s}");
        }
    }

    #[test]
    fn explicit_hydrogens_are_folded() {
        let m = remove_hydrogens(&p("[H]C([H])([H])O"));
        assert_eq!(m.atoms.len(), 2);
        assert_eq!(m.atoms[0].total_h(), 3);
        assert_eq!(m.atoms[1].total_h(), 1);
        let m = remove_hydrogens(&p("[H][C@@H](N)O"));
        assert_eq!(m.atoms[0].explicit_h, Some(2));
        let d = p("[2H]C");
        assert_eq!(remove_hydrogens(&d), d);
        let h2 = p("[H][H]");
        assert_eq!(remove_hydrogens(&h2), h2);
    }

    #[test]
    fn standardize_pipeline() {
        let m = standardize("CC(=O)[O-].[Na+]").unwrap();
        assert_eq!(to_smiles(&m), "CC(=O)O");
        assert!(standardize("C(").is_err());
    }
}
