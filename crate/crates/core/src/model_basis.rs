//! Model orbitals and field-free two-center matrix elements.
//!
//! Orbitals are single normalized Cartesian Gaussians (s, p_x, p_y, p_z).
//! The field-free Hamiltonian is of extended-Hückel form:
//! on-site diagonal elements are the orbital energies ε, every other element
//! is K·S₀·(ε' + ε)/2.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::gaussian::{pair_integrals, PairIntegrals, Primitive};
use crate::units::{ELECTRON_CHARGE, ELECTRON_MASSES_PER_AMU, HBAR};
use crate::{Error, Result, C64};

pub const DEFAULT_HUECKEL_K: f64 = 1.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShellKind {
    S,
    Px,
    Py,
    Pz,
}

impl ShellKind {
    pub fn powers(self) -> [usize; 3] {
        match self {
            ShellKind::S => [0, 0, 0],
            ShellKind::Px => [1, 0, 0],
            ShellKind::Py => [0, 1, 0],
            ShellKind::Pz => [0, 0, 1],
        }
    }

    /// True when the orbital is odd under inversion through its center.
    pub fn is_odd(self) -> bool {
        !matches!(self, ShellKind::S)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitalSpec {
    pub species: String,
    pub kind: ShellKind,
    /// Gaussian exponent, bohr⁻².
    pub alpha: f64,
    /// On-site energy, hartree.
    pub epsilon: f64,
}

impl OrbitalSpec {
    pub fn new(species: &str, kind: ShellKind, alpha: f64, epsilon: f64) -> Self {
        OrbitalSpec {
            species: species.to_string(),
            kind,
            alpha,
            epsilon,
        }
    }

    pub fn primitive(&self) -> Primitive {
        Primitive::new(self.alpha, self.kind.powers())
    }

    fn same_parity(&self, other: &OrbitalSpec) -> bool {
        self.kind.is_odd() == other.kind.is_odd()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Species {
    pub name: String,
    /// Nuclear mass in electron masses.
    pub mass: f64,
    pub hueckel_k: f64,
    pub orbitals: Vec<OrbitalSpec>,
}

/// Two-center separation beyond which every element is set to zero.
pub fn cutoff_radius(a: &OrbitalSpec, b: &OrbitalSpec) -> f64 {
    10.0 / a.alpha.min(b.alpha).sqrt()
}

fn norm3(d: [f64; 3]) -> f64 {
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

fn is_onsite(d: [f64; 3]) -> bool {
    d == [0.0; 3]
}

fn check_finite(d: [f64; 3]) {
    assert!(
        d.iter().all(|x| x.is_finite()),
        "displacement must be finite, got {d:?}"
    );
}

fn integrals(bra: &OrbitalSpec, ket: &OrbitalSpec, d: [f64; 3]) -> Option<PairIntegrals> {
    check_finite(d);
    if norm3(d) > cutoff_radius(bra, ket) {
        return None;
    }
    let mut ints = pair_integrals(&bra.primitive(), &ket.primitive(), d);
    if is_onsite(d) && bra.same_parity(ket) {
        // Odd integrand under inversion through the common center.
        ints.mu = [0.0; 3];
        ints.grad = [0.0; 3];
    }
    Some(ints)
}

/// S₀(a', a; d) for bra centered at X' = X + d.
pub fn overlap_s0(bra: &OrbitalSpec, ket: &OrbitalSpec, d: [f64; 3]) -> C64 {
    C64::new(integrals(bra, ket, d).map_or(0.0, |i| i.s), 0.0)
}

/// μ₀ = q ∫ φ'(x - X') (x - X) φ(x - X), the moment taken about the ket center.
pub fn dipole_mu0(bra: &OrbitalSpec, ket: &OrbitalSpec, d: [f64; 3]) -> [C64; 3] {
    let mu = integrals(bra, ket, d).map_or([0.0; 3], |i| i.mu);
    mu.map(|m| C64::new(ELECTRON_CHARGE * m, 0.0))
}

/// p₀ = ∫ φ' (-iħ∇) φ. Off-site this is evaluated as iħ ∂S₀/∂X.
pub fn momentum_p0(bra: &OrbitalSpec, ket: &OrbitalSpec, d: [f64; 3]) -> [C64; 3] {
    match integrals(bra, ket, d) {
        None => [C64::new(0.0, 0.0); 3],
        Some(i) if is_onsite(d) => i.grad.map(|g| C64::new(0.0, -HBAR * g)),
        // ∂/∂X = -∂/∂d with d = X' - X.
        Some(i) => i.ds.map(|g| C64::new(0.0, -HBAR * g)),
    }
}

pub fn hamiltonian_h0(bra: &OrbitalSpec, ket: &OrbitalSpec, d: [f64; 3], hueckel_k: f64) -> C64 {
    if is_onsite(d) && bra == ket {
        return C64::new(ket.epsilon, 0.0);
    }
    let s = overlap_s0(bra, ket, d).re;
    C64::new(hueckel_k * s * 0.5 * (bra.epsilon + ket.epsilon), 0.0)
}

/// Field-free elements of one ordered pair together with their derivatives
/// with respect to the displacement d = X' - X.
#[derive(Debug, Clone, Copy, Default)]
pub struct PairElements {
    pub s0: f64,
    pub h0: f64,
    pub mu0: [f64; 3],
    /// Real factor g with p₀ = -iħ g (ket gradient on-site, ∂S₀/∂d off-site).
    pub grad: [f64; 3],
    pub ds0: [f64; 3],
    pub dh0: [f64; 3],
    /// ∂μ₀_j/∂d_k as `[j][k]`.
    pub dmu0: [[f64; 3]; 3],
    /// ∂g_j/∂d_k as `[j][k]`, only meaningful off-site.
    pub dgrad: [[f64; 3]; 3],
}

impl PairElements {
    pub fn p0(&self) -> [C64; 3] {
        self.grad.map(|g| C64::new(0.0, -HBAR * g))
    }

    pub fn dp0(&self, component: usize, axis: usize) -> C64 {
        C64::new(0.0, -HBAR * self.dgrad[component][axis])
    }
}

/// Species roster plus the pair-element evaluator used by matrix assembly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTable {
    pub species: Vec<Species>,
}

impl PairTable {
    pub fn new(species: Vec<Species>) -> Result<Self> {
        for sp in &species {
            if !(sp.mass > 0.0) {
                return Err(Error::config(
                    format!("species.{}.mass", sp.name),
                    "mass must be positive",
                ));
            }
            if sp.orbitals.is_empty() {
                return Err(Error::config(
                    format!("species.{}.shells", sp.name),
                    "at least one shell is required",
                ));
            }
            for o in &sp.orbitals {
                if !(o.alpha > 0.0) || !o.alpha.is_finite() {
                    return Err(Error::config(
                        format!("species.{}.shells.alpha", sp.name),
                        "exponent must be positive",
                    ));
                }
            }
        }
        Ok(PairTable { species })
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s.name == name)
    }

    pub fn species(&self, index: usize) -> &Species {
        &self.species[index]
    }

    pub fn pair_k(&self, bra_species: usize, ket_species: usize) -> f64 {
        0.5 * (self.species[bra_species].hueckel_k + self.species[ket_species].hueckel_k)
    }

    pub fn max_cutoff(&self) -> f64 {
        self.species
            .iter()
            .flat_map(|s| s.orbitals.iter())
            .map(|o| 10.0 / o.alpha.sqrt())
            .fold(0.0, f64::max)
    }

    /// Elements of the ordered pair (bra, ket). `same_orbital` marks the
    /// diagonal of the assembled matrix.
    pub fn elements(
        &self,
        bra: (usize, usize),
        ket: (usize, usize),
        d: [f64; 3],
        same_orbital: bool,
    ) -> PairElements {
        let ob = &self.species[bra.0].orbitals[bra.1];
        let ok = &self.species[ket.0].orbitals[ket.1];
        let k = self.pair_k(bra.0, ket.0);
        let ints = match integrals(ob, ok, d) {
            Some(i) => i,
            None => return PairElements::default(),
        };
        let eps_avg = 0.5 * (ob.epsilon + ok.epsilon);
        let onsite = is_onsite(d);
        let h0 = if same_orbital {
            ok.epsilon
        } else {
            k * eps_avg * ints.s
        };
        let mut e = PairElements {
            s0: ints.s,
            h0,
            mu0: ints.mu.map(|m| ELECTRON_CHARGE * m),
            grad: if onsite { ints.grad } else { ints.ds },
            ..Default::default()
        };
        if !onsite {
            for j in 0..3 {
                e.ds0[j] = ints.ds[j];
                e.dh0[j] = k * eps_avg * ints.ds[j];
                for a in 0..3 {
                    e.dmu0[j][a] = ELECTRON_CHARGE * ints.dmu[j][a];
                    e.dgrad[j][a] = ints.d2s[j][a];
                }
            }
        }
        e
    }
}

// ---------------------------------------------------------------------------
// Parameter file
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShellEntry {
    /// "s", "p" (all three components), "px", "py" or "pz".
    pub kind: String,
    pub alpha: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesEntry {
    /// Nuclear mass in unified atomic mass units.
    pub mass_amu: f64,
    #[serde(rename = "hueckel_K", default = "default_k")]
    pub hueckel_k: f64,
    pub shells: Vec<ShellEntry>,
}

fn default_k() -> f64 {
    DEFAULT_HUECKEL_K
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesFile {
    pub species: BTreeMap<String, SpeciesEntry>,
}

pub fn species_from_entries(entries: &BTreeMap<String, SpeciesEntry>) -> Result<Vec<Species>> {
    let mut out = Vec::new();
    for (name, entry) in entries {
        let mut orbitals = Vec::new();
        for shell in &entry.shells {
            let kinds: &[ShellKind] = match shell.kind.as_str() {
                "s" => &[ShellKind::S],
                "p" => &[ShellKind::Px, ShellKind::Py, ShellKind::Pz],
                "px" => &[ShellKind::Px],
                "py" => &[ShellKind::Py],
                "pz" => &[ShellKind::Pz],
                other => {
                    return Err(Error::config(
                        format!("species.{name}.shells.kind"),
                        format!("unknown shell kind `{other}` (expected s, p, px, py, pz)"),
                    ))
                }
            };
            for &kind in kinds {
                orbitals.push(OrbitalSpec::new(name, kind, shell.alpha, shell.epsilon));
            }
        }
        out.push(Species {
            name: name.clone(),
            mass: entry.mass_amu * ELECTRON_MASSES_PER_AMU,
            hueckel_k: entry.hueckel_k,
            orbitals,
        });
    }
    Ok(out)
}

pub fn parse_species_file(text: &str) -> Result<Vec<Species>> {
    let file: SpeciesFile =
        toml::from_str(text).map_err(|e| Error::config("species file", e.to_string()))?;
    species_from_entries(&file.species)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn s(alpha: f64) -> OrbitalSpec {
        OrbitalSpec::new("A", ShellKind::S, alpha, -0.5)
    }

    fn pz(alpha: f64) -> OrbitalSpec {
        OrbitalSpec::new("A", ShellKind::Pz, alpha, -0.2)
    }

    #[test]
    fn normalization_and_parity() {
        assert_relative_eq!(overlap_s0(&s(0.4), &s(0.4), [0.0; 3]).re, 1.0, epsilon = 1e-14);
        assert_eq!(overlap_s0(&s(0.4), &pz(0.4), [0.0; 3]).re, 0.0);
        assert_eq!(dipole_mu0(&s(0.4), &s(0.4), [0.0; 3]), [C64::new(0.0, 0.0); 3]);
        assert_eq!(momentum_p0(&s(0.4), &s(0.4), [0.0; 3]), [C64::new(0.0, 0.0); 3]);
        assert_eq!(momentum_p0(&pz(0.4), &pz(0.4), [0.0; 3]), [C64::new(0.0, 0.0); 3]);
        let mu = dipole_mu0(&s(0.4), &pz(0.4), [0.0; 3]);
        assert!(mu[2].re.abs() > 0.1);
        assert_eq!(mu[0].re, 0.0);
    }

    #[test]
    fn equal_exponent_dipole_sits_at_midpoint() {
        let d = [0.4, -0.3, 1.6];
        let s0 = overlap_s0(&s(0.5), &s(0.5), d).re;
        let mu = dipole_mu0(&s(0.5), &s(0.5), d);
        for k in 0..3 {
            assert_relative_eq!(mu[k].re, -s0 * d[k] / 2.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn hamiltonian_rules() {
        let a = s(0.5);
        assert_eq!(hamiltonian_h0(&a, &a, [0.0; 3], 1.75).re, -0.5);
        let far = [0.0, 0.0, 20.0];
        assert_eq!(hamiltonian_h0(&a, &a, far, 1.75).re, 0.0);
        let b = pz(0.3);
        let d = [0.3, 0.2, 1.1];
        let neg = [-0.3, -0.2, -1.1];
        assert_relative_eq!(
            hamiltonian_h0(&a, &b, d, 1.75).re,
            hamiltonian_h0(&b, &a, neg, 1.75).conj().re,
            epsilon = 1e-15
        );
    }

    #[test]
    fn momentum_off_site_is_i_hbar_ds_dx() {
        let a = s(0.6);
        let b = pz(0.35);
        let d = [0.5, 0.1, 1.3];
        let h = 1e-5;
        let p = momentum_p0(&a, &b, d);
        for k in 0..3 {
            let mut plus = d;
            let mut minus = d;
            // X moves by +h means d moves by -h.
            plus[k] -= h;
            minus[k] += h;
            let ds_dx = (overlap_s0(&a, &b, plus).re - overlap_s0(&a, &b, minus).re) / (2.0 * h);
            assert_relative_eq!(p[k].im, ds_dx, epsilon = 1e-7);
            assert_eq!(p[k].re, 0.0);
        }
    }

    #[test]
    fn strict_species_file() {
        let good = r#"
            [species.H]
            mass_amu = 1.008
            hueckel_K = 1.75
            shells = [{ kind = "s", alpha = 0.4, epsilon = -0.5 }]
        "#;
        let sp = parse_species_file(good).unwrap();
        assert_eq!(sp[0].orbitals.len(), 1);
        let bad = r#"
            [species.H]
            mass_amu = 1.008
            colour = "red"
            shells = [{ kind = "s", alpha = 0.4, epsilon = -0.5 }]
        "#;
        assert!(parse_species_file(bad).is_err());
        let bad_kind = r#"
            [species.H]
            mass_amu = 1.0
            shells = [{ kind = "d", alpha = 0.4, epsilon = -0.5 }]
        "#;
        assert!(parse_species_file(bad_kind).is_err());
    }
}
