//! Non-canonical SMILES writer. Output depends on atom order; it re-parses
//! to the same labeled graph with the same hydrogen counts.

use std::fmt::Write;

use super::elements::is_organic_subset;
use super::hydrogens::default_implicit_h;
use super::{BondOrder, Molecule};

pub fn to_smiles(mol: &Molecule) -> String {
    let n = mol.atoms.len();
    let mut adj = mol.adjacency();
    for list in &mut adj {
        list.sort_by_key(|&(v, _)| v);
    }

    // Pass 1: DFS spanning forest plus ring-closure edges.
    let mut visited = vec![false; n];
    let mut children: Vec<Vec<(usize, BondOrder)>> = vec![Vec::new(); n];
    // ring events per atom: (partner, order, is_opening)
    let mut ring_events: Vec<Vec<(usize, BondOrder, bool)>> = vec![Vec::new(); n];
    let mut roots = Vec::new();
    let mut tree_parent = vec![usize::MAX; n];
    for root in 0..n {
        if visited[root] {
            continue;
        }
        roots.push(root);
        let mut stack = vec![(root, 0usize)];
        visited[root] = true;
        while let Some(&mut (u, ref mut cursor)) = stack.last_mut() {
            let Some(&(v, order)) = adj[u].get(*cursor) else {
                stack.pop();
                continue;
            };
            *cursor += 1;
            if v == tree_parent[u] {
                continue;
            }
            if !visited[v] {
                visited[v] = true;
                tree_parent[v] = u;
                children[u].push((v, order));
                stack.push((v, 0));
            } else if !ring_events[u].iter().any(|&(p, _, _)| p == v) {
                // v is an ancestor still on the stack: open at v, close at u.
                ring_events[v].push((u, order, true));
                ring_events[u].push((v, order, false));
            }
        }
    }

    let mut out = String::new();
    let mut labels: Vec<Option<(usize, usize)>> = Vec::new();
    for (i, &root) in roots.iter().enumerate() {
        if i > 0 {
            out.push('.');
        }
        write_branch(mol, root, &children, &ring_events, &mut labels, &mut out);
    }
    out
}

fn write_branch(
    mol: &Molecule,
    u: usize,
    children: &[Vec<(usize, BondOrder)>],
    ring_events: &[Vec<(usize, BondOrder, bool)>],
    labels: &mut Vec<Option<(usize, usize)>>,
    out: &mut String,
) {
    write_atom(mol, u, out);
    let mut events = ring_events[u].clone();
    // Closings first so their labels can be reused by openings.
    events.sort_by_key(|&(p, _, opening)| (opening, p));
    for (partner, order, opening) in events {
        if opening {
            let slot = match labels.iter().position(Option::is_none) {
                Some(s) => s,
                None => {
                    labels.push(None);
                    labels.len() - 1
                }
            };
            labels[slot] = Some((u, partner));
            out.push_str(bond_symbol(mol, u, partner, order));
            write_label(slot + 1, out);
        } else {
            let slot = labels
                .iter()
                .position(|l| *l == Some((partner, u)))
                .expect("ring opened before closing");
            labels[slot] = None;
            write_label(slot + 1, out);
        }
    }
    let kids = &children[u];
    for (k, &(v, order)) in kids.iter().enumerate() {
        let last = k + 1 == kids.len();
        if !last {
            out.push('(');
        }
        out.push_str(bond_symbol(mol, u, v, order));
        write_branch(mol, v, children, ring_events, labels, out);
        if !last {
            out.push(')');
        }
    }
}

fn write_label(label: usize, out: &mut String) {
    if label < 10 {
        write!(out, "{label}").unwrap();
    } else {
        write!(out, "%{label:02}").unwrap();
    }
}

fn bond_symbol(mol: &Molecule, u: usize, v: usize, order: BondOrder) -> &'static str {
    let both_aromatic = mol.atoms[u].aromatic && mol.atoms[v].aromatic;
    match order {
        BondOrder::Single if both_aromatic => "-",
        BondOrder::Single => "",
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
        BondOrder::Aromatic if both_aromatic => "",
        BondOrder::Aromatic => ":",
    }
}

fn write_atom(mol: &Molecule, i: usize, out: &mut String) {
    let atom = &mol.atoms[i];
    let symbol = atom.symbol();
    let organic = atom.explicit_h.is_none()
        && atom.formal_charge == 0
        && atom.isotope.is_none()
        && is_organic_subset(atom.atomic_number)
        && default_implicit_h(atom.atomic_number, atom.aromatic, mol.bond_order_sum(i))
            == Some(atom.implicit_h);
    let shown = if atom.aromatic {
        symbol.to_ascii_lowercase()
    } else {
        symbol.to_string()
    };
    if organic {
        out.push_str(&shown);
        return;
    }
    out.push('[');
    if let Some(iso) = atom.isotope {
        write!(out, "{iso}").unwrap();
    }
    out.push_str(&shown);
    match atom.total_h() {
        0 => {}
        1 => out.push('H'),
        h => write!(out, "H{h}").unwrap(),
    }
    match atom.formal_charge {
        0 => {}
        1 => out.push('+'),
        -1 => out.push('-'),
        c if c > 0 => write!(out, "+{c}").unwrap(),
        c => write!(out, "-{}", -c).unwrap(),
    }
    out.push(']');
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    fn round(s: &str) -> String {
        to_smiles(&parse_smiles(s).unwrap())
    }

    #[test]
    fn simple_outputs() {
        assert_eq!(round("CCO"), "CCO");
        assert_eq!(round("CC(=O)O"), "CC(=O)O");
        assert_eq!(round("c1ccccc1"), "c1ccccc1");
        assert_eq!(round("C[NH3+]"), "C[NH3+]");
        assert_eq!(round("[13CH4]"), "[13CH4]");
        assert_eq!(round("CC.[Na+]"), "CC.[Na+]");
        assert_eq!(round("c1ccccc1-c1ccccc1"), "c1ccccc1-c1ccccc1");
        assert_eq!(round("c1cc[nH]c1"), "c1cc[nH]c1");
    }

    #[test]
    fn reparse_gives_same_molecule_for_fused_rings() {
        for s in [
            "c1ccc2ccccc2c1",
            "C1CC2CCC1CC2",
            "O=C1CCC(=O)N1",
            "C12C3C4C1C5C2C3C45",
        ] {
            let m = parse_smiles(s).unwrap();
            let back = parse_smiles(&to_smiles(&m)).unwrap();
            assert_eq!(back.atoms.len(), m.atoms.len(), "{s}");
            assert_eq!(back.bonds.len(), m.bonds.len(), "{s}");
            let h: Vec<u32> = m.atoms.iter().map(|a| a.total_h()).collect();
            let hb: Vec<u32> = back.atoms.iter().map(|a| a.total_h()).collect();
            let mut h1 = h.clone();
            let mut h2 = hb.clone();
            h1.sort();
            h2.sort();
            assert_eq!(h1, h2, "{s}");
        }
    }
}
