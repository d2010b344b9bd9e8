//! Numeric fog of war: published values deviate from the truth by a
//! percentage drawn from a committed random value.

use thiserror::Error;

use crate::chain::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FogPolicy {
    /// Band half-width in percent.
    pub band: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FogReport {
    pub published: u64,
    /// Percentage deviation in `-band..=band`.
    pub deviation: i64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FogError {
    #[error("{} published {published} outside {low}..={high}", blamed.label)]
    OutOfBand {
        blamed: NodeId,
        published: u64,
        low: u64,
        high: u64,
    },
    #[error("{} published {published}, the committed random value gives {expected}", blamed.label)]
    NotDerived {
        blamed: NodeId,
        published: u64,
        expected: u64,
    },
}

impl FogPolicy {
    pub fn deviation(&self, random: u64) -> i64 {
        let x = self.band as u64;
        (random % (2 * x + 1)) as i64 - x as i64
    }

    /// Closed band around `v`, rounded towards `v`.
    pub fn bounds(&self, v: u64) -> (u64, u64) {
        let d = v as u128 * self.band as u128 / 100;
        (v - d.min(v as u128) as u64, (v as u128 + d) as u64)
    }
}

/// `random` is the output of a randomization session committed before
/// the report.
pub fn fog_report(true_value: u64, policy: &FogPolicy, random: u64) -> FogReport {
    let deviation = policy.deviation(random);
    let shift = true_value as i128 * deviation as i128 / 100;
    FogReport {
        published: (true_value as i128 + shift) as u64,
        deviation,
    }
}

/// Check a report once the true value and the random value are revealed.
pub fn verify_fog(
    emitter: &NodeId,
    true_value: u64,
    policy: &FogPolicy,
    random: u64,
    published: u64,
) -> Result<(), FogError> {
    let (low, high) = policy.bounds(true_value);
    if published < low || published > high {
        return Err(FogError::OutOfBand {
            blamed: emitter.clone(),
            published,
            low,
            high,
        });
    }
    let expected = fog_report(true_value, policy, random).published;
    if published != expected {
        return Err(FogError::NotDerived {
            blamed: emitter.clone(),
            published,
            expected,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deviation_edges() {
        let p = FogPolicy { band: 30 };
        assert_eq!(p.deviation(0), -30);
        assert_eq!(p.deviation(60), 30);
        assert_eq!(fog_report(100, &p, 0).published, 70);
        assert_eq!(fog_report(100, &p, 60).published, 130);
        assert_eq!(p.bounds(100), (70, 130));
    }
}
