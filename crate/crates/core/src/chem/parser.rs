//! OpenSMILES reader. Stereo markers are consumed and dropped; wildcards,
//! reaction arrows and quadruple bonds are rejected.

use std::collections::BTreeMap;

use super::elements::{self, atomic_number, can_be_aromatic, is_organic_subset};
use super::hydrogens::default_implicit_h;
use super::{Atom, Bond, BondOrder, ChemError, Molecule};

/// Parses a SMILES string into a molecule with implicit hydrogens assigned.
pub fn parse_smiles(text: &str) -> Result<Molecule, ChemError> {
    if text.is_empty() {
        return Err(ChemError::Empty);
    }
    if let Some(pos) = text.bytes().position(|b| !b.is_ascii()) {
        return Err(ChemError::NonAscii { pos });
    }
    let mol = Parser::new(text.as_bytes()).run()?;
    assign_checked(mol)
}

fn assign_checked(mut mol: Molecule) -> Result<Molecule, ChemError> {
    let sums: Vec<f64> = (0..mol.atoms.len())
        .map(|i| mol.bond_order_sum(i))
        .collect();
    for (i, atom) in mol.atoms.iter_mut().enumerate() {
        if atom.explicit_h.is_some() {
            atom.implicit_h = 0;
            continue;
        }
        atom.implicit_h = default_implicit_h(atom.atomic_number, atom.aromatic, sums[i]).ok_or(
            ChemError::ValenceOverflow {
                atom: i,
                bond_sum: sums[i],
            },
        )?;
    }
    Ok(mol)
}

struct RingOpening {
    atom: usize,
    order: Option<BondOrder>,
    pos: usize,
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    prev: Option<usize>,
    pending: Option<(BondOrder, usize)>,
    branches: Vec<(Option<usize>, usize, usize)>,
    rings: BTreeMap<u32, RingOpening>,
    after_dot: bool,
}

impl<'a> Parser<'a> {
    fn new(src: &'a [u8]) -> Self {
        Parser {
            src,
            pos: 0,
            atoms: Vec::new(),
            bonds: Vec::new(),
            prev: None,
            pending: None,
            branches: Vec::new(),
            rings: BTreeMap::new(),
            after_dot: false,
        }
    }

    fn syntax<T>(&self, pos: usize, msg: impl Into<String>) -> Result<T, ChemError> {
        Err(ChemError::Syntax {
            pos,
            msg: msg.into(),
        })
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn run(mut self) -> Result<Molecule, ChemError> {
        while let Some(c) = self.peek() {
            let start = self.pos;
            match c {
                b'(' => {
                    if self.prev.is_none() {
                        return self.syntax(start, "branch opened before any atom");
                    }
                    if self.pending.is_some() {
                        return self.syntax(start, "bond symbol before '('");
                    }
                    self.branches.push((self.prev, self.atoms.len(), start));
                    self.pos += 1;
                }
                b')' => {
                    let Some((saved, atoms_before, _)) = self.branches.pop() else {
                        return self.syntax(start, "unbalanced ')'");
                    };
                    if self.pending.is_some() {
                        return self.syntax(start, "dangling bond symbol before ')'");
                    }
                    if self.atoms.len() == atoms_before {
                        return self.syntax(start, "empty branch");
                    }
                    self.prev = saved;
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if self.prev.is_none() {
                        return self.syntax(start, "bond symbol without a preceding atom");
                    }
                    if self.pending.is_some() {
                        return self.syntax(start, "two consecutive bond symbols");
                    }
                    let order = match c {
                        b'=' => BondOrder::Double,
                        b'#' => BondOrder::Triple,
                        b':' => BondOrder::Aromatic,
                        _ => BondOrder::Single,
                    };
                    self.pending = Some((order, start));
                    self.pos += 1;
                }
                b'$' => return self.syntax(start, "quadruple bonds are not supported"),
                b'.' => {
                    if self.prev.is_none() || self.pending.is_some() {
                        return self.syntax(start, "misplaced '.'");
                    }
                    self.prev = None;
                    self.after_dot = true;
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => self.ring_bond()?,
                b'[' => {
                    let atom = self.bracket_atom()?;
                    self.push_atom(atom, start)?;
                }
                b'*' => return self.syntax(start, "wildcard atoms are not supported"),
                b'>' => return self.syntax(start, "reaction SMILES are not supported"),
                _ if c.is_ascii_alphabetic() => {
                    let atom = self.organic_atom()?;
                    self.push_atom(atom, start)?;
                }
                _ => return self.syntax(start, format!("unexpected character '{}'", c as char)),
            }
        }
        if let Some((_, pos)) = self.pending {
            return self.syntax(pos, "dangling bond symbol at end of input");
        }
        if let Some(&(_, _, pos)) = self.branches.last() {
            return self.syntax(pos, "unbalanced '('");
        }
        if let Some((&label, open)) = self.rings.iter().next() {
            return Err(ChemError::UnclosedRing {
                pos: open.pos,
                label,
            });
        }
        if self.after_dot {
            return self.syntax(self.src.len(), "trailing '.'");
        }
        Ok(Molecule::new(self.atoms, self.bonds))
    }

    fn push_atom(&mut self, atom: Atom, pos: usize) -> Result<(), ChemError> {
        let idx = self.atoms.len();
        let aromatic = atom.aromatic;
        self.atoms.push(atom);
        if let Some(prev) = self.prev {
            let order = match self.pending.take() {
                Some((order, _)) => order,
                None if aromatic && self.atoms[prev].aromatic => BondOrder::Aromatic,
                None => BondOrder::Single,
            };
            self.add_bond(prev, idx, order, pos)?;
        }
        self.prev = Some(idx);
        self.after_dot = false;
        Ok(())
    }

    fn add_bond(
        &mut self,
        u: usize,
        v: usize,
        order: BondOrder,
        pos: usize,
    ) -> Result<(), ChemError> {
        if u == v {
            return self.syntax(pos, "ring closure onto the same atom");
        }
        let bond = Bond::new(u, v, order);
        if self.bonds.iter().any(|b| b.endpoints() == bond.endpoints()) {
            return self.syntax(pos, "duplicate bond between the same atoms");
        }
        if order == BondOrder::Aromatic && !(self.atoms[u].aromatic && self.atoms[v].aromatic) {
            return self.syntax(pos, "aromatic bond between non-aromatic atoms");
        }
        self.bonds.push(bond);
        Ok(())
    }

    fn ring_bond(&mut self) -> Result<(), ChemError> {
        let start = self.pos;
        let label = if self.src[self.pos] == b'%' {
            let digits = self.src.get(self.pos + 1..self.pos + 3);
            match digits {
                Some(d) if d.iter().all(u8::is_ascii_digit) => {
                    self.pos += 3;
                    ((d[0] - b'0') * 10 + (d[1] - b'0')) as u32
                }
                _ => return self.syntax(start, "'%' must be followed by two digits"),
            }
        } else {
            self.pos += 1;
            (self.src[start] - b'0') as u32
        };
        let Some(atom) = self.prev else {
            return self.syntax(start, "ring bond without a preceding atom");
        };
        let here = self.pending.take().map(|(o, _)| o);
        match self.rings.remove(&label) {
            Some(open) => {
                let order = match (open.order, here) {
                    (Some(a), Some(b)) if a != b => {
                        return self.syntax(
                            start,
                            format!("conflicting bond orders on ring bond {label}"),
                        )
                    }
                    (Some(a), _) | (None, Some(a)) => a,
                    (None, None) => {
                        if self.atoms[open.atom].aromatic && self.atoms[atom].aromatic {
                            BondOrder::Aromatic
                        } else {
                            BondOrder::Single
                        }
                    }
                };
                self.add_bond(open.atom, atom, order, start)
            }
            None => {
                self.rings.insert(
                    label,
                    RingOpening {
                        atom,
                        order: here,
                        pos: start,
                    },
                );
                Ok(())
            }
        }
    }

    fn organic_atom(&mut self) -> Result<Atom, ChemError> {
        let start = self.pos;
        let c = self.src[self.pos];
        let next = self.src.get(self.pos + 1).copied();
        let (symbol, aromatic, len) = match (c, next) {
            (b'C', Some(b'l')) => ("Cl", false, 2),
            (b'B', Some(b'r')) => ("Br", false, 2),
            (b'B' | b'C' | b'N' | b'O' | b'P' | b'S' | b'F' | b'I', _) => (
                std::str::from_utf8(&self.src[start..start + 1]).unwrap(),
                false,
                1,
            ),
            (b'b', _) => ("B", true, 1),
            (b'c', _) => ("C", true, 1),
            (b'n', _) => ("N", true, 1),
            (b'o', _) => ("O", true, 1),
            (b'p', _) => ("P", true, 1),
            (b's', _) => ("S", true, 1),
            _ => {
                return Err(ChemError::UnknownElement {
                    pos: start,
                    symbol: (c as char).to_string(),
                })
            }
        };
        self.pos += len;
        let z = atomic_number(symbol).expect("organic subset symbols are valid");
        debug_assert!(is_organic_subset(z));
        let mut atom = Atom::new(z);
        atom.aromatic = aromatic;
        Ok(atom)
    }

    fn read_number(&mut self) -> Option<u32> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        (self.pos > start).then(|| {
            std::str::from_utf8(&self.src[start..self.pos])
                .unwrap()
                .parse()
                .unwrap_or(u32::MAX)
        })
    }

    fn bracket_atom(&mut self) -> Result<Atom, ChemError> {
        let open = self.pos;
        self.pos += 1;
        let isotope = self.read_number();

        let sym_start = self.pos;
        let Some(first) = self.peek() else {
            return self.syntax(open, "unterminated bracket atom");
        };
        if first == b'*' {
            return self.syntax(sym_start, "wildcard atoms are not supported");
        }
        if !first.is_ascii_alphabetic() {
            return self.syntax(sym_start, "expected element symbol in bracket atom");
        }
        let (z, aromatic) = if first.is_ascii_lowercase() {
            let two = self.src.get(self.pos..self.pos + 2);
            match two {
                Some(b"se") => {
                    self.pos += 2;
                    (34, true)
                }
                Some(b"as") => {
                    self.pos += 2;
                    (33, true)
                }
                _ => {
                    let upper = (first.to_ascii_uppercase() as char).to_string();
                    match atomic_number(&upper).filter(|&z| can_be_aromatic(z)) {
                        Some(z) => {
                            self.pos += 1;
                            (z, true)
                        }
                        None => {
                            return Err(ChemError::UnknownElement {
                                pos: sym_start,
                                symbol: (first as char).to_string(),
                            })
                        }
                    }
                }
            }
        } else {
            let two = self
                .src
                .get(self.pos + 1)
                .filter(|c| c.is_ascii_lowercase())
                .and_then(|&c| atomic_number(&format!("{}{}", first as char, c as char)));
            match two {
                Some(z) => {
                    self.pos += 2;
                    (z, false)
                }
                None => match atomic_number(&(first as char).to_string()) {
                    Some(z) => {
                        self.pos += 1;
                        (z, false)
                    }
                    None => {
                        let end = (self.pos + 2).min(self.src.len());
                        return Err(ChemError::UnknownElement {
                            pos: sym_start,
                            symbol: String::from_utf8_lossy(&self.src[self.pos..end]).into_owned(),
                        });
                    }
                },
            }
        };

        // Chirality: @, @@, @TH1, @AL2, @SP3, @TB12, @OH25
        if self.peek() == Some(b'@') {
            self.pos += 1;
            if self.peek() == Some(b'@') {
                self.pos += 1;
            } else if let Some(tag) = self.src.get(self.pos..self.pos + 2) {
                if matches!(tag, b"TH" | b"AL" | b"SP" | b"TB" | b"OH") {
                    self.pos += 2;
                    if self.read_number().is_none() {
                        return self.syntax(self.pos, "chirality class requires a number");
                    }
                }
            }
        }

        let mut h_count = 0u8;
        if self.peek() == Some(b'H') {
            self.pos += 1;
            h_count = match self.read_number() {
                Some(n) if n <= 9 => n as u8,
                Some(_) => return self.syntax(self.pos, "hydrogen count too large"),
                None => 1,
            };
        }

        let mut charge: i32 = 0;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let unit = if sign == b'+' { 1 } else { -1 };
            self.pos += 1;
            if let Some(n) = self.read_number() {
                if n > 15 {
                    return self.syntax(self.pos, "formal charge out of range");
                }
                charge = unit * n as i32;
            } else {
                charge = unit;
                while self.peek() == Some(sign) {
                    self.pos += 1;
                    charge += unit;
                }
                if charge.abs() > 15 {
                    return self.syntax(self.pos, "formal charge out of range");
                }
            }
        }

        if self.peek() == Some(b':') {
            self.pos += 1;
            if self.read_number().is_none() {
                return self.syntax(self.pos, "atom class requires a number");
            }
        }

        if self.peek() != Some(b']') {
            return self.syntax(self.pos.min(self.src.len()), "unterminated bracket atom");
        }
        self.pos += 1;

        if z == elements::HYDROGEN && h_count > 0 {
            // [HH] style molecular hydrogen is legal but pointless here.
            return self.syntax(sym_start, "hydrogen atom with attached hydrogen count");
        }

        Ok(Atom {
            atomic_number: z,
            formal_charge: charge as i8,
            aromatic,
            isotope: isotope.map(|i| i.min(u16::MAX as u32) as u16),
            explicit_h: Some(h_count),
            implicit_h: 0,
        })
    }
}
