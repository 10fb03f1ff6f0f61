use super::Molecule;

/// Ring membership per atom: an atom is in a ring when it touches a bond
/// that is not a bridge of the bond graph.
pub fn ring_atoms(mol: &Molecule) -> Vec<bool> {
    let n = mol.atoms.len();
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (id, bond) in mol.bonds.iter().enumerate() {
        let (u, v) = bond.endpoints();
        adj[u].push((v, id));
        adj[v].push((u, id));
    }

    // Iterative Tarjan lowlink over DFS trees.
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut is_bridge = vec![false; mol.bonds.len()];
    let mut timer = 0;
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // (node, parent edge id, next neighbor cursor)
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(&mut (u, parent_edge, ref mut cursor)) = stack.last_mut() {
            if let Some(&(v, edge)) = adj[u].get(*cursor) {
                *cursor += 1;
                if edge == parent_edge {
                    continue;
                }
                if disc[v] == usize::MAX {
                    disc[v] = timer;
                    low[v] = timer;
                    timer += 1;
                    stack.push((v, edge, 0));
                } else {
                    low[u] = low[u].min(disc[v]);
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[u]);
                    if low[u] > disc[p] {
                        is_bridge[parent_edge] = true;
                    }
                }
            }
        }
    }

    let mut in_ring = vec![false; n];
    for (bond, bridge) in mol.bonds.iter().zip(&is_bridge) {
        if !bridge {
            let (u, v) = bond.endpoints();
            in_ring[u] = true;
            in_ring[v] = true;
        }
    }
    in_ring
}
