//! Nuclear configuration and the orbital roster ℓ ↔ (atom, orbital).

use serde::{Deserialize, Serialize};

use crate::model_basis::PairTable;
use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub species: usize,
    pub position: Vec3,
    pub velocity: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrbitalSite {
    pub atom: usize,
    pub species: usize,
    /// Index into the species' orbital list.
    pub orbital: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemGeometry {
    pub atoms: Vec<Atom>,
    pub masses: Vec<f64>,
    pub roster: Vec<OrbitalSite>,
}

impl SystemGeometry {
    pub fn new(table: &PairTable, atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::config("geometry.atoms", "at least one atom is required"));
        }
        let mut roster = Vec::new();
        let mut masses = Vec::new();
        for (i, atom) in atoms.iter().enumerate() {
            let sp = table.species.get(atom.species).ok_or_else(|| {
                Error::config(format!("geometry.atoms[{i}].species"), "undefined species")
            })?;
            masses.push(sp.mass);
            for orbital in 0..sp.orbitals.len() {
                roster.push(OrbitalSite {
                    atom: i,
                    species: atom.species,
                    orbital,
                });
            }
        }
        Ok(SystemGeometry {
            atoms,
            masses,
            roster,
        })
    }

    /// Builds atoms at rest from `(species name, position)` pairs.
    pub fn from_positions(table: &PairTable, atoms: &[(&str, [f64; 3])]) -> Result<Self> {
        let list = atoms
            .iter()
            .map(|(name, x)| {
                let species = table
                    .index_of(name)
                    .ok_or_else(|| Error::config("geometry.atoms.species", format!("undefined species `{name}`")))?;
                Ok(Atom {
                    species,
                    position: Vec3::from(*x),
                    velocity: Vec3::zeros(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        SystemGeometry::new(table, list)
    }

    pub fn n_orbitals(&self) -> usize {
        self.roster.len()
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn center(&self, l: usize) -> Vec3 {
        self.atoms[self.roster[l].atom].position
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.atoms.iter().map(|a| a.position).collect()
    }

    pub fn velocities(&self) -> Vec<Vec3> {
        self.atoms.iter().map(|a| a.velocity).collect()
    }

    pub fn set_positions(&mut self, x: &[Vec3]) {
        for (a, p) in self.atoms.iter_mut().zip(x) {
            a.position = *p;
        }
    }

    pub fn set_velocities(&mut self, v: &[Vec3]) {
        for (a, p) in self.atoms.iter_mut().zip(v) {
            a.velocity = *p;
        }
    }

    pub fn kinetic_energy(&self) -> f64 {
        self.atoms
            .iter()
            .zip(&self.masses)
            .map(|(a, m)| 0.5 * m * a.velocity.norm_squared())
            .sum()
    }

    pub fn total_momentum(&self) -> Vec3 {
        self.atoms
            .iter()
            .zip(&self.masses)
            .map(|(a, m)| a.velocity * *m)
            .sum()
    }

    pub fn max_distance(&self) -> f64 {
        let mut best: f64 = 0.0;
        for i in 0..self.atoms.len() {
            for j in i + 1..self.atoms.len() {
                best = best.max((self.atoms[i].position - self.atoms[j].position).norm());
            }
        }
        best
    }

    /// Fails if two atoms come closer than 0.1 bohr.
    pub fn check_separation(&self) -> Result<()> {
        for i in 0..self.atoms.len() {
            for j in i + 1..self.atoms.len() {
                let distance = (self.atoms[i].position - self.atoms[j].position).norm();
                if distance < 0.1 {
                    return Err(Error::AtomOverlap { i, j, distance });
                }
            }
        }
        Ok(())
    }
}
