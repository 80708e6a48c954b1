use crate::error::{Error, Result};
use crate::topology::StaggeredLayout;

pub const EPS0: f64 = 8.8541878128e-12;
pub const C0: f64 = 299_792_458.0;
pub const MU0: f64 = 1.0 / (EPS0 * C0 * C0);

const MIN_REL: f64 = 1e-6;

/// Material samples at each field component's own nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialField {
    /// Relative permittivity at `Ez` nodes.
    pub eps_rel: Vec<f64>,
    /// Conductivity (S/m) at `Ez` nodes.
    pub sigma: Vec<f64>,
    /// Relative permeability at `Hy` nodes.
    pub mu_rel_hy: Vec<f64>,
    /// Relative permeability at `Hx` nodes.
    pub mu_rel_hx: Vec<f64>,
}

impl MaterialField {
    pub fn vacuum(layout: &StaggeredLayout) -> Self {
        Self {
            eps_rel: vec![1.0; layout.n_ez()],
            sigma: vec![0.0; layout.n_ez()],
            mu_rel_hy: vec![1.0; layout.n_hy()],
            mu_rel_hx: vec![1.0; layout.n_hx()],
        }
    }

    pub fn validate(&self, layout: &StaggeredLayout) -> Result<()> {
        let lens = [
            ("eps_rel", self.eps_rel.len(), layout.n_ez()),
            ("sigma", self.sigma.len(), layout.n_ez()),
            ("mu_rel_hy", self.mu_rel_hy.len(), layout.n_hy()),
            ("mu_rel_hx", self.mu_rel_hx.len(), layout.n_hx()),
        ];
        for (name, got, want) in lens {
            if got != want {
                return Err(Error::Dimension(format!("{name} has {got} samples, layout needs {want}")));
            }
        }
        let check = |name: &str, v: &[f64], min: f64| -> Result<()> {
            match v.iter().position(|x| !x.is_finite() || *x < min) {
                Some(k) => Err(Error::Material(format!("{name}[{k}] = {} is below {min}", v[k]))),
                None => Ok(()),
            }
        };
        check("eps_rel", &self.eps_rel, MIN_REL)?;
        check("mu_rel_hy", &self.mu_rel_hy, MIN_REL)?;
        check("mu_rel_hx", &self.mu_rel_hx, MIN_REL)?;
        check("sigma", &self.sigma, 0.0)
    }

    /// Absolute permittivity at `Ez` nodes.
    pub fn eps(&self) -> Vec<f64> {
        self.eps_rel.iter().map(|e| e * EPS0).collect()
    }

    pub fn mu_hy(&self) -> Vec<f64> {
        self.mu_rel_hy.iter().map(|m| m * MU0).collect()
    }

    pub fn mu_hx(&self) -> Vec<f64> {
        self.mu_rel_hx.iter().map(|m| m * MU0).collect()
    }

    pub fn is_lossless(&self) -> bool {
        self.sigma.iter().all(|s| *s == 0.0)
    }

    /// Largest wave speed over the block.
    pub fn max_speed(&self) -> f64 {
        let eps_min = self.eps_rel.iter().cloned().fold(f64::INFINITY, f64::min);
        let mu_min = self
            .mu_rel_hy
            .iter()
            .chain(&self.mu_rel_hx)
            .cloned()
            .fold(f64::INFINITY, f64::min);
        C0 / (eps_min * mu_min).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_validates_and_bad_values_are_named() {
        let l = StaggeredLayout::new(3, 2, 1.0, 1.0, 0.0, 0.0);
        let mut m = MaterialField::vacuum(&l);
        m.validate(&l).unwrap();
        assert!((m.max_speed() - C0).abs() < 1e-6);
        m.eps_rel[4] = 0.0;
        let e = m.validate(&l).unwrap_err().to_string();
        assert!(e.contains("eps_rel[4]"), "{e}");
        let mut m = MaterialField::vacuum(&l);
        m.sigma[0] = -1.0;
        assert!(m.validate(&l).is_err());
        m.sigma.pop();
        assert!(matches!(m.validate(&l), Err(Error::Dimension(_))));
    }

    #[test]
    fn mu0_is_consistent() {
        assert!((MU0 - 1.25663706212e-6).abs() < 1e-15);
    }
}
