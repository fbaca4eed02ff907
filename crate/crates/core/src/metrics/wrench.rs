use std::f64::consts::TAU;

use thiserror::Error;

use crate::geom::{tangent_basis, Vec3};

/// A force/torque pair `(f, λ τ)` flattened to six components.
pub type Wrench = [f64; 6];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("grasp has no contacts")]
    NoContacts,
    #[error("invalid friction model: {0}")]
    InvalidFriction(String),
}

/// Coulomb point contact with a linearized `cone_edges`-sided cone.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrictionModel {
    pub mu: f64,
    pub cone_edges: usize,
}

impl Default for FrictionModel {
    fn default() -> Self {
        FrictionModel {
            mu: 0.4,
            cone_edges: 8,
        }
    }
}

impl FrictionModel {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(MetricsError::InvalidFriction(format!("mu = {}", self.mu)));
        }
        if self.cone_edges < 4 {
            return Err(MetricsError::InvalidFriction(format!(
                "cone_edges = {} < 4",
                self.cone_edges
            )));
        }
        Ok(())
    }

    /// Edge forces of the cone at a contact with outward normal `n`. Each
    /// pushes into the object with unit normal component. A frictionless
    /// cone has the single edge `-n`.
    ///
    /// The first edge leans along the tangential part of `reference`, so
    /// the pyramid turns with the object when `reference` does. A reference
    /// parallel to `n` falls back to a fixed tangent basis.
    pub fn edges(&self, n: &Vec3, reference: &Vec3) -> Vec<Vec3> {
        if self.mu == 0.0 {
            return vec![-n];
        }
        let tangential = reference - n * n.dot(reference);
        let (t1, t2) = if tangential.norm() > 1e-9 * reference.norm() {
            let t1 = tangential.normalize();
            (t1, n.cross(&t1))
        } else {
            tangent_basis(n)
        };
        (0..self.cone_edges)
            .map(|j| {
                let a = TAU * j as f64 / self.cone_edges as f64;
                -n + (t1 * a.cos() + t2 * a.sin()) * self.mu
            })
            .collect()
    }
}

/// Primitive contact wrenches about a reference center.
#[derive(Clone, Debug, PartialEq)]
pub struct WrenchSet {
    pub wrenches: Vec<Wrench>,
    /// Index of the contact each wrench came from.
    pub contact_of: Vec<usize>,
    pub n_contacts: usize,
    pub center: Vec3,
    /// `λ`, multiplies torques so they share units with forces.
    pub torque_scale: f64,
}

impl WrenchSet {
    /// Builds the set from `(point, outward normal)` pairs.
    pub fn from_contacts(
        contacts: &[(Vec3, Vec3)],
        center: Vec3,
        torque_scale: f64,
        fm: &FrictionModel,
    ) -> Result<WrenchSet, MetricsError> {
        fm.validate()?;
        if contacts.is_empty() {
            return Err(MetricsError::NoContacts);
        }
        let mut wrenches = Vec::with_capacity(contacts.len() * fm.cone_edges);
        let mut contact_of = Vec::with_capacity(wrenches.capacity());
        for (i, (p, n)) in contacts.iter().enumerate() {
            for f in fm.edges(n, &(p - center)) {
                wrenches.push(wrench(&center, torque_scale, p, &f));
                contact_of.push(i);
            }
        }
        Ok(WrenchSet {
            wrenches,
            contact_of,
            n_contacts: contacts.len(),
            center,
            torque_scale,
        })
    }

    /// Wrench of `force` applied at `point`.
    pub fn wrench_at(&self, point: &Vec3, force: &Vec3) -> Wrench {
        wrench(&self.center, self.torque_scale, point, force)
    }
}

pub(crate) fn wrench(center: &Vec3, scale: f64, p: &Vec3, f: &Vec3) -> Wrench {
    let t = (p - center).cross(f) * scale;
    [f.x, f.y, f.z, t.x, t.y, t.z]
}
