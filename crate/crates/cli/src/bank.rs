//! Fixed bank of tuning variants used by the validation suites.
//!
//! Each entry multiplies the reference `(kr, Ti, Td)`. The bank spans
//! 0.3x to 3x: single-parameter sweeps first, then joint variations. It
//! is a reproducible stand-in for a handbook collection of tuning rules,
//! not a copy of one.

/// Identity, then `kr`, `Ti` and `Td` sweeps, then joint variations.
pub const TUNING_BANK: [[f64; 3]; 35] = [
    [1.0, 1.0, 1.0],
    [0.3, 1.0, 1.0],
    [0.5, 1.0, 1.0],
    [0.7, 1.0, 1.0],
    [0.9, 1.0, 1.0],
    [1.1, 1.0, 1.0],
    [1.3, 1.0, 1.0],
    [1.6, 1.0, 1.0],
    [2.0, 1.0, 1.0],
    [3.0, 1.0, 1.0],
    [1.0, 0.3, 1.0],
    [1.0, 0.5, 1.0],
    [1.0, 0.7, 1.0],
    [1.0, 0.9, 1.0],
    [1.0, 1.1, 1.0],
    [1.0, 1.5, 1.0],
    [1.0, 2.0, 1.0],
    [1.0, 3.0, 1.0],
    [1.0, 1.0, 0.3],
    [1.0, 1.0, 0.5],
    [1.0, 1.0, 0.9],
    [1.0, 1.0, 1.1],
    [1.0, 1.0, 2.0],
    [1.0, 1.0, 3.0],
    [0.9, 1.1, 1.0],
    [1.1, 0.9, 1.0],
    [0.95, 1.05, 1.05],
    [1.05, 0.95, 0.95],
    [0.7, 1.5, 1.0],
    [1.5, 0.7, 1.0],
    [0.5, 2.0, 0.5],
    [2.0, 0.5, 2.0],
    [1.2, 1.2, 1.2],
    [0.8, 0.8, 0.8],
    [1.3, 0.7, 1.3],
];

/// Index of the `kr x3` variant.
pub const TRIPLE_GAIN: usize = 9;

/// The 20-entry subset used for the higher-order processes: the first four
/// of every block of seven.
pub fn higher_order_bank() -> Vec<(usize, [f64; 3])> {
    TUNING_BANK
        .iter()
        .copied()
        .enumerate()
        .filter(|(i, _)| i % 7 < 4)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bank_shape() {
        assert_eq!(higher_order_bank().len(), 20);
        assert_eq!(TUNING_BANK[TRIPLE_GAIN], [3.0, 1.0, 1.0]);
        let flat = TUNING_BANK.iter().flatten();
        assert!(flat.clone().all(|&a| (0.3..=3.0).contains(&a)));
        let mut seen = TUNING_BANK.to_vec();
        seen.sort_by(|a, b| a.partial_cmp(b).unwrap());
        seen.dedup();
        assert_eq!(seen.len(), 35);
    }
}
