//! Periodic table symbols and organic-subset valence rules.

const SYMBOLS: [&str; 118] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk",
    "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh",
    "Fl", "Mc", "Lv", "Ts", "Og",
];

pub const HYDROGEN: u8 = 1;
pub const BORON: u8 = 5;
pub const CARBON: u8 = 6;
pub const NITROGEN: u8 = 7;
pub const OXYGEN: u8 = 8;
pub const FLUORINE: u8 = 9;
pub const PHOSPHORUS: u8 = 15;
pub const SULFUR: u8 = 16;
pub const CHLORINE: u8 = 17;
pub const BROMINE: u8 = 35;
pub const IODINE: u8 = 53;

/// Atomic number for an element symbol with standard capitalization.
pub fn atomic_number(symbol: &str) -> Option<u8> {
    SYMBOLS
        .iter()
        .position(|s| *s == symbol)
        .map(|i| (i + 1) as u8)
}

pub fn symbol(atomic_number: u8) -> &'static str {
    SYMBOLS[(atomic_number as usize).saturating_sub(1).min(117)]
}

/// Allowed valences for organic-subset elements, ascending. `None` for
/// elements outside the subset.
pub fn organic_valences(atomic_number: u8) -> Option<&'static [u8]> {
    match atomic_number {
        BORON => Some(&[3]),
        CARBON => Some(&[4]),
        NITROGEN => Some(&[3, 5]),
        OXYGEN => Some(&[2]),
        PHOSPHORUS => Some(&[3, 5]),
        SULFUR => Some(&[2, 4, 6]),
        FLUORINE | CHLORINE | BROMINE | IODINE => Some(&[1]),
        _ => None,
    }
}

pub fn is_organic_subset(atomic_number: u8) -> bool {
    organic_valences(atomic_number).is_some()
}

/// Elements that may be written as lowercase aromatic symbols.
pub fn can_be_aromatic(atomic_number: u8) -> bool {
    matches!(
        atomic_number,
        BORON | CARBON | NITROGEN | OXYGEN | PHOSPHORUS | SULFUR | 33 | 34
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbols_round_trip() {
        for z in 1..=118u8 {
            assert_eq!(atomic_number(symbol(z)), Some(z));
        }
        assert_eq!(atomic_number("Cl"), Some(17));
        assert_eq!(atomic_number("Xx"), None);
    }
}
