use crate::consensus::Fraction;

/// Byte conversions use binary megabytes.
pub const BYTES_PER_MB: u64 = 1 << 20;

pub fn bytes_to_mb(bytes: u64) -> Fraction {
    Fraction::new(bytes, BYTES_PER_MB)
}

/// Decimal rendering with six places, rounded half up.
pub fn fmt_mb(mb: Fraction) -> String {
    let scaled = (mb * Fraction::from_integer(1_000_000) + Fraction::new(1, 2))
        .floor()
        .to_integer();
    format!("{}.{:06}", scaled / 1_000_000, scaled % 1_000_000)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StorageParams {
    /// Average relevant transaction, MB.
    pub size_relevant: Fraction,
    /// Bloat padding an encrypted hidden transaction, MB.
    pub size_bloat_large: Fraction,
    /// Bloat padding a game hash, bytes.
    pub size_bloat_small: u64,
    pub game_hash_size: u64,
    /// Relevant and bloat transactions per pattern period.
    pub ratio_relevant: u64,
    pub ratio_bloat: u64,
    pub child_capacity: Fraction,
}

impl Default for StorageParams {
    fn default() -> Self {
        StorageParams {
            size_relevant: Fraction::new(1, 1000),
            size_bloat_large: Fraction::new(1, 100),
            size_bloat_small: 32,
            game_hash_size: 32,
            ratio_relevant: 1,
            ratio_bloat: 1,
            child_capacity: Fraction::from_integer(1),
        }
    }
}

impl StorageParams {
    /// Padded-scenario variant with 0.1 MB relevant transactions.
    pub fn padded() -> Self {
        StorageParams {
            size_relevant: Fraction::new(1, 10),
            ..Self::default()
        }
    }

    pub fn is_valid(&self) -> bool {
        let zero = Fraction::from_integer(0);
        self.size_relevant > zero
            && self.size_bloat_large > zero
            && self.size_bloat_small > 0
            && self.game_hash_size > 0
            && self.ratio_relevant > 0
            && self.child_capacity > zero
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mb_rendering() {
        assert_eq!(fmt_mb(Fraction::from_integer(600)), "600.000000");
        assert_eq!(fmt_mb(Fraction::new(1, 3)), "0.333333");
        assert_eq!(fmt_mb(Fraction::new(2, 3)), "0.666667");
        assert_eq!(bytes_to_mb(32), Fraction::new(1, 32768));
    }
}
