use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::MaterialField;
use crate::topology::{Field, StaggeredLayout};

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Medium {
    #[serde(default = "one")]
    pub eps_rel: f64,
    #[serde(default = "one")]
    pub mu_rel: f64,
    #[serde(default)]
    pub sigma: f64,
}

impl Default for Medium {
    fn default() -> Self {
        Self {
            eps_rel: 1.0,
            mu_rel: 1.0,
            sigma: 0.0,
        }
    }
}

impl Medium {
    fn validate(&self, path: &str) -> Result<()> {
        if !(self.eps_rel > 0.0 && self.eps_rel.is_finite()) {
            return Err(Error::config(format!("{path}.eps_rel"), "must be positive"));
        }
        if !(self.mu_rel > 0.0 && self.mu_rel.is_finite()) {
            return Err(Error::config(format!("{path}.mu_rel"), "must be positive"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::config(format!("{path}.sigma"), "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Rect {
        x0: f64,
        x1: f64,
        y0: f64,
        y1: f64,
    },
    Disk {
        center: [f64; 2],
        radius: f64,
    },
    /// Annulus with an optional straight cut of width `gap` centred on
    /// the ray at `gap_angle_deg` from the +x axis.
    Ring {
        center: [f64; 2],
        r_inner: f64,
        r_outer: f64,
        #[serde(default)]
        gap: f64,
        #[serde(default)]
        gap_angle_deg: f64,
    },
}

const EDGE_TOL: f64 = 1e-9;

impl Shape {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Shape::Rect { x0, x1, y0, y1 } => {
                let t = EDGE_TOL * (x1 - x0).abs().max((y1 - y0).abs());
                x >= x0 - t && x <= x1 + t && y >= y0 - t && y <= y1 + t
            }
            Shape::Disk { center, radius } => (x - center[0]).hypot(y - center[1]) <= radius * (1.0 + EDGE_TOL),
            Shape::Ring {
                center,
                r_inner,
                r_outer,
                gap,
                gap_angle_deg,
            } => {
                let (dx, dy) = (x - center[0], y - center[1]);
                let r = dx.hypot(dy);
                let t = EDGE_TOL * r_outer;
                if r < r_inner - t || r > r_outer + t {
                    return false;
                }
                if gap <= 0.0 {
                    return true;
                }
                let (s, c) = gap_angle_deg.to_radians().sin_cos();
                let along = dx * c + dy * s;
                let across = (-dx * s + dy * c).abs();
                !(along > 0.0 && across < 0.5 * gap)
            }
        }
    }

    fn validate(&self, path: &str) -> Result<()> {
        let ok = match *self {
            Shape::Rect { x0, x1, y0, y1 } => x1 > x0 && y1 > y0,
            Shape::Disk { radius, .. } => radius > 0.0,
            Shape::Ring {
                r_inner, r_outer, gap, ..
            } => r_inner >= 0.0 && r_outer > r_inner && gap >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("{path}.shape"), "degenerate shape extents"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paint {
    pub shape: Shape,
    #[serde(default = "one")]
    pub eps_rel: f64,
    #[serde(default = "one")]
    pub mu_rel: f64,
    #[serde(default)]
    pub sigma: f64,
}

impl Paint {
    pub fn medium(&self) -> Medium {
        Medium {
            eps_rel: self.eps_rel,
            mu_rel: self.mu_rel,
            sigma: self.sigma,
        }
    }
}

/// Background medium overpainted by shapes; later shapes win.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialsSpec {
    #[serde(default)]
    pub background: Medium,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub paint: Vec<Paint>,
}

impl MaterialsSpec {
    pub fn validate(&self) -> Result<()> {
        self.background.validate("materials.background")?;
        for (k, p) in self.paint.iter().enumerate() {
            let path = format!("materials.paint[{k}]");
            p.medium().validate(&path)?;
            p.shape.validate(&path)?;
        }
        Ok(())
    }

    pub fn medium_at(&self, x: f64, y: f64) -> Medium {
        self.paint
            .iter()
            .rev()
            .find(|p| p.shape.contains(x, y))
            .map_or(self.background, Paint::medium)
    }

    /// Samples the media at each component's own nodes.
    pub fn sample(&self, layout: &StaggeredLayout) -> MaterialField {
        let at = |f: Field, k: usize| {
            let (x, y) = layout.coord(f, k);
            self.medium_at(x, y)
        };
        let ez: Vec<Medium> = (0..layout.n_ez()).map(|k| at(Field::Ez, k)).collect();
        MaterialField {
            eps_rel: ez.iter().map(|m| m.eps_rel).collect(),
            sigma: ez.iter().map(|m| m.sigma).collect(),
            mu_rel_hy: (0..layout.n_hy()).map(|k| at(Field::Hy, k).mu_rel).collect(),
            mu_rel_hx: (0..layout.n_hx()).map(|k| at(Field::Hx, k).mu_rel).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_ring_excludes_gap() {
        let r = Shape::Ring {
            center: [0.0, 0.0],
            r_inner: 1.0,
            r_outer: 2.0,
            gap: 0.5,
            gap_angle_deg: 0.0,
        };
        assert!(!r.contains(1.5, 0.0));
        assert!(r.contains(-1.5, 0.0));
        assert!(r.contains(0.0, 1.5));
        assert!(r.contains(1.5, 0.3));
        assert!(!r.contains(0.5, 0.0));
        assert!(!r.contains(2.5, 0.0));
    }

    #[test]
    fn later_paint_wins() {
        let m = MaterialsSpec {
            background: Medium::default(),
            paint: vec![
                Paint {
                    shape: Shape::Disk {
                        center: [0.0, 0.0],
                        radius: 2.0,
                    },
                    eps_rel: 5.0,
                    mu_rel: 1.0,
                    sigma: 0.1,
                },
                Paint {
                    shape: Shape::Disk {
                        center: [0.0, 0.0],
                        radius: 1.0,
                    },
                    eps_rel: 12.0,
                    mu_rel: 1.0,
                    sigma: 0.0,
                },
            ],
        };
        assert_eq!(m.medium_at(0.5, 0.0).eps_rel, 12.0);
        assert_eq!(m.medium_at(1.5, 0.0).eps_rel, 5.0);
        assert_eq!(m.medium_at(3.0, 0.0), Medium::default());
        let l = StaggeredLayout::new(4, 4, 1.0, 1.0, -2.0, -2.0);
        let f = m.sample(&l);
        assert_eq!(f.eps_rel[l.ez(2, 2)], 12.0);
        assert_eq!(f.eps_rel[l.ez(0, 0)], 1.0);
        f.validate(&l).unwrap();
    }

    #[test]
    fn invalid_media_are_named() {
        let mut m = MaterialsSpec::default();
        m.background.sigma = -1.0;
        assert!(m.validate().unwrap_err().to_string().contains("materials.background.sigma"));
    }
}
