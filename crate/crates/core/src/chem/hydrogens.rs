use super::elements::organic_valences;
use super::Molecule;

/// Implicit hydrogen count for a non-bracket atom from its bond order sum
/// (aromatic bonds count 1.5).
///
/// Aromatic atoms use their lowest valence and round the remainder down, so
/// a ring carbon with two aromatic bonds gets one H and a fused carbon none.
/// Aliphatic atoms take the smallest allowed valence that fits the bond sum;
/// `None` means the sum exceeds every allowed valence. Elements outside the
/// organic subset never receive implicit hydrogens.
pub fn default_implicit_h(atomic_number: u8, aromatic: bool, bond_sum: f64) -> Option<u8> {
    let Some(valences) = organic_valences(atomic_number) else {
        return Some(0);
    };
    if aromatic {
        let h = (valences[0] as f64 - bond_sum).floor();
        return Some(h.max(0.0) as u8);
    }
    let sum = bond_sum.round() as i64;
    valences
        .iter()
        .map(|&v| v as i64)
        .find(|&v| v >= sum)
        .map(|v| (v - sum) as u8)
}

/// Recomputes `implicit_h` for every non-bracket atom. Overflowing atoms are
/// clamped to zero; bracket atoms keep `implicit_h = 0`.
pub fn assign_implicit_hydrogens(mol: &Molecule) -> Molecule {
    let mut out = mol.clone();
    for (i, atom) in out.atoms.iter_mut().enumerate() {
        atom.implicit_h = if atom.explicit_h.is_some() {
            0
        } else {
            default_implicit_h(atom.atomic_number, atom.aromatic, mol.bond_order_sum(i))
                .unwrap_or(0)
        };
    }
    out
}
