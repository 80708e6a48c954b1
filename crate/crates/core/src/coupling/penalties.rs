use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::Side;

const TOL: f64 = 1e-14;

/// Penalty strengths of one interface side.
///
/// `outer_e`/`outer_h` scale the outer-region `Ez` and normal-`H` terms,
/// `embedded_e`/`embedded_h` the embedded-block ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SidePenalties {
    pub outer_e: f64,
    pub outer_h: f64,
    pub embedded_e: f64,
    pub embedded_h: f64,
}

impl SidePenalties {
    /// Outer penalties with the embedded ones chosen to cancel the
    /// cross-coupling terms.
    pub fn from_outer(outer_e: f64, outer_h: f64) -> Self {
        Self {
            outer_e,
            outer_h,
            embedded_e: outer_h,
            embedded_h: outer_e,
        }
    }

    pub fn validate(&self, side: Side) -> Result<()> {
        let all = [self.outer_e, self.outer_h, self.embedded_e, self.embedded_h];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Penalty(format!("side {side}: penalties must be finite")));
        }
        let outer = 1.0 + self.outer_e + self.outer_h;
        if outer.abs() > TOL {
            return Err(Error::Penalty(format!(
                "side {side}: 1 + outer_e + outer_h = {outer:e}, must be 0"
            )));
        }
        let inner = 1.0 + self.embedded_e + self.embedded_h;
        if inner.abs() > TOL {
            return Err(Error::Penalty(format!(
                "side {side}: 1 + embedded_e + embedded_h = {inner:e}, must be 0"
            )));
        }
        if (self.embedded_h - self.outer_e).abs() > TOL {
            return Err(Error::Penalty(format!(
                "side {side}: embedded_h ({}) must equal outer_e ({}) for the cross terms to cancel",
                self.embedded_h, self.outer_e
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SatConfig {
    pub west: SidePenalties,
    pub east: SidePenalties,
    pub south: SidePenalties,
    pub north: SidePenalties,
}

impl SatConfig {
    pub fn uniform(p: SidePenalties) -> Self {
        Self {
            west: p,
            east: p,
            south: p,
            north: p,
        }
    }

    pub fn side(&self, s: Side) -> &SidePenalties {
        match s {
            Side::West => &self.west,
            Side::East => &self.east,
            Side::South => &self.south,
            Side::North => &self.north,
        }
    }

    pub fn validate(&self) -> Result<()> {
        Side::ALL.iter().try_for_each(|s| self.side(*s).validate(*s))
    }

    /// All penalties zero; not a valid configuration, used to isolate the
    /// volume terms.
    pub fn zero() -> Self {
        let z = SidePenalties {
            outer_e: 0.0,
            outer_h: 0.0,
            embedded_e: 0.0,
            embedded_h: 0.0,
        };
        Self::uniform(z)
    }
}

impl Default for SatConfig {
    fn default() -> Self {
        default_penalties()
    }
}

/// All sixteen penalties equal to −½.
pub fn default_penalties() -> SatConfig {
    SatConfig::uniform(SidePenalties::from_outer(-0.5, -0.5))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_minus_half_and_valid() {
        let d = default_penalties();
        for s in Side::ALL {
            let p = d.side(s);
            for v in [p.outer_e, p.outer_h, p.embedded_e, p.embedded_h] {
                assert_eq!(v, -0.5);
            }
            assert_eq!(1.0 + p.outer_e + p.outer_h, 0.0);
        }
        d.validate().unwrap();
    }

    #[test]
    fn asymmetric_split_is_accepted() {
        let c = SatConfig::uniform(SidePenalties::from_outer(-1.0, 0.0));
        c.validate().unwrap();
        assert_eq!(c.west.embedded_h, -1.0);
        assert_eq!(c.west.embedded_e, 0.0);
    }

    #[test]
    fn violations_are_named() {
        let mut c = default_penalties();
        c.south.outer_e = -0.4;
        let e = c.validate().unwrap_err().to_string();
        assert!(e.contains("side S"), "{e}");
        let mut c = default_penalties();
        c.east = SidePenalties {
            outer_e: -1.0,
            outer_h: 0.0,
            embedded_e: -0.5,
            embedded_h: -0.5,
        };
        let e = c.validate().unwrap_err().to_string();
        assert!(e.contains("cross"), "{e}");
    }
}
