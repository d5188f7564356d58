//! Run configuration (TOML, schema version 1).
//!
//! Every table rejects unknown keys. Lengths are bohr unless
//! `geometry.units = "angstrom"`; times are femtoseconds or attoseconds as
//! the key names say; energies are hartree unless suffixed `_ev`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adiabatic::{AdiabaticParams, MomentumModel};
use crate::branching::SelectionPolicy;
use crate::coupling::{CouplingFlags, CouplingMode, VelocityConvention};
use crate::field::{Envelope, PulseSpec};
use crate::geometry::{Atom, SystemGeometry};
use crate::ionization::SinkSpec;
use crate::model_basis::{parse_species_file, species_from_entries, PairTable, SpeciesEntry};
use crate::nuclei::RepulsionSpec;
use crate::propagator::StepControl;
use crate::units::{ev_to_hartree, fs_to_au, AU_PER_AS, BOHR_PER_ANGSTROM};
use crate::{Error, Result, Vec3};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Path of a species parameter file, relative to the config file.
    #[serde(default)]
    pub species_file: Option<PathBuf>,
    /// Inline species blocks (same schema as the parameter file).
    #[serde(default)]
    pub species: BTreeMap<String, SpeciesEntry>,
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub repulsion: RepulsionSpec,
    #[serde(default)]
    pub pulse: Option<PulseConfig>,
    #[serde(default)]
    pub coupling: CouplingConfig,
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub electrons: ElectronsConfig,
    #[serde(default)]
    pub nuclei: NucleiConfig,
    #[serde(default)]
    pub branching: BranchingConfig,
    #[serde(default)]
    pub ionization: SinkSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LengthUnit {
    #[default]
    Bohr,
    Angstrom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    #[serde(default)]
    pub units: LengthUnit,
    pub atoms: Vec<AtomConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    pub species: String,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Velocities in bohr per a.u. time (regardless of `units`).
    #[serde(default)]
    pub vx: f64,
    #[serde(default)]
    pub vy: f64,
    #[serde(default)]
    pub vz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    /// Peak vector potential A₀ (a.u.); give this or `intensity_wcm2`.
    #[serde(default)]
    pub amplitude: Option<f64>,
    #[serde(default)]
    pub intensity_wcm2: Option<f64>,
    #[serde(default)]
    pub omega_au: Option<f64>,
    #[serde(default)]
    pub omega_ev: Option<f64>,
    pub envelope: Envelope,
    #[serde(default)]
    pub tau_fs: Option<f64>,
    #[serde(default)]
    pub phase: f64,
    #[serde(default = "z_axis")]
    pub polarization: [f64; 3],
    /// Envelope center; defaults so the pulse starts at t = 0.
    #[serde(default)]
    pub t0_fs: Option<f64>,
    #[serde(default)]
    pub delta_a: [f64; 3],
}

fn z_axis() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

impl PulseConfig {
    pub fn build(&self) -> Result<PulseSpec> {
        let omega = match (self.omega_au, self.omega_ev) {
            (Some(w), None) => w,
            (None, Some(e)) => ev_to_hartree(e),
            _ => return Err(Error::config("pulse.omega", "give exactly one of omega_au, omega_ev")),
        };
        let amplitude = match (self.amplitude, self.intensity_wcm2) {
            (Some(a), None) => a,
            (None, Some(i)) if i >= 0.0 => PulseSpec::amplitude_from_intensity(i, omega),
            _ => {
                return Err(Error::config(
                    "pulse.amplitude",
                    "give exactly one of amplitude, intensity_wcm2 (>= 0)",
                ))
            }
        };
        let tau = match (self.envelope, self.tau_fs) {
            (_, Some(t)) => fs_to_au(t),
            (Envelope::Constant, None) => 1.0,
            _ => return Err(Error::config("pulse.tau_fs", "required for gaussian and sin2 envelopes")),
        };
        let mut spec = PulseSpec::new(amplitude, omega, self.envelope, tau, self.polarization, 0.0)?
            .with_phase(self.phase)
            .with_offset(self.delta_a);
        spec.t0 = match self.t0_fs {
            Some(t) => fs_to_au(t),
            None => match spec.support() {
                Some((start, _)) => -start,
                None => 0.0,
            },
        };
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    #[serde(default)]
    pub mode: CouplingMode,
    #[serde(default = "yes")]
    pub dipole: bool,
    #[serde(default = "yes")]
    pub velocity_term: bool,
    #[serde(default)]
    pub velocity_convention: VelocityConvention,
}

fn yes() -> bool {
    true
}

impl Default for CouplingConfig {
    fn default() -> Self {
        CouplingConfig {
            mode: CouplingMode::Full,
            dipole: true,
            velocity_term: true,
            velocity_convention: VelocityConvention::Ket,
        }
    }
}

impl CouplingConfig {
    pub fn flags(&self) -> CouplingFlags {
        CouplingFlags {
            mode: self.mode,
            dipole: self.dipole,
            velocity: self.velocity_term,
            convention: self.velocity_convention,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    #[serde(default = "default_dt_as")]
    pub dt_as: f64,
    /// Electronic steps per nuclear step.
    #[serde(default = "default_ratio")]
    pub nuclear_ratio: usize,
    pub t_end_fs: f64,
}

fn default_dt_as() -> f64 {
    0.5
}

fn default_ratio() -> usize {
    10
}

impl IntegratorConfig {
    pub fn dt(&self) -> f64 {
        self.dt_as * AU_PER_AS
    }

    pub fn nuclear_dt(&self) -> f64 {
        self.dt() * self.nuclear_ratio as f64
    }

    pub fn t_end(&self) -> f64 {
        fs_to_au(self.t_end_fs)
    }

    pub fn nuclear_steps(&self) -> usize {
        (self.t_end() / self.nuclear_dt()).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ElectronsConfig {
    /// Electron count; fills the lowest eigenstates two at a time.
    #[serde(default)]
    pub count: Option<usize>,
    /// Explicit eigenstate indices to occupy (overrides `count`).
    #[serde(default)]
    pub occupied: Option<Vec<usize>>,
    #[serde(default)]
    pub occupations: Option<Vec<f64>>,
}

impl ElectronsConfig {
    /// (eigenstate index, occupation) pairs.
    pub fn resolve(&self, n_orbitals: usize) -> Result<(Vec<usize>, Vec<f64>)> {
        let (idx, occ) = match (&self.occupied, self.count) {
            (Some(idx), _) => {
                let occ = match &self.occupations {
                    Some(o) => o.clone(),
                    None => vec![2.0; idx.len()],
                };
                (idx.clone(), occ)
            }
            (None, Some(count)) => {
                let full = count / 2;
                let mut idx: Vec<usize> = (0..full).collect();
                let mut occ = vec![2.0; full];
                if count % 2 == 1 {
                    idx.push(full);
                    occ.push(1.0);
                }
                (idx, occ)
            }
            (None, None) => (vec![0], vec![2.0]),
        };
        if idx.len() != occ.len() {
            return Err(Error::config("electrons.occupations", "one occupation per occupied state"));
        }
        if idx.is_empty() {
            return Err(Error::config("electrons", "at least one occupied state is required"));
        }
        let mut seen = vec![false; n_orbitals];
        for &i in &idx {
            if i >= n_orbitals || seen[i] {
                return Err(Error::config(
                    "electrons.occupied",
                    format!("index {i} out of range or repeated ({n_orbitals} orbitals)"),
                ));
            }
            seen[i] = true;
        }
        if occ.iter().any(|f| !(*f > 0.0 && *f <= 2.0)) {
            return Err(Error::config("electrons.occupations", "occupations must lie in (0, 2]"));
        }
        Ok((idx, occ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NuclearDynamics {
    #[default]
    Ehrenfest,
    /// Nuclei held fixed at their initial positions.
    Clamped,
    /// Nuclei move at their initial velocities, ignoring forces.
    Prescribed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct NucleiConfig {
    #[serde(default)]
    pub dynamics: NuclearDynamics,
    /// Draw Maxwell–Boltzmann velocities at this temperature (overrides atom velocities).
    #[serde(default)]
    pub temperature_k: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    #[default]
    Argmax,
    Sampled,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchingConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default)]
    pub policy: PolicyKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub index: usize,
    #[serde(default = "default_delta_pop")]
    pub delta_pop: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Nuclear steps between adiabatic analyses.
    #[serde(default = "one_step")]
    pub analysis_stride: usize,
    #[serde(default)]
    pub manual_times_fs: Vec<f64>,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_eps_deg")]
    pub eps_deg: f64,
    #[serde(default)]
    pub momentum: MomentumModel,
    #[serde(default)]
    pub representative_mass: Option<f64>,
}

fn default_delta_pop() -> f64 {
    0.01
}
fn default_threshold() -> f64 {
    0.05
}
fn one_step() -> usize {
    1
}
fn default_theta() -> f64 {
    0.1
}
fn default_eps_deg() -> f64 {
    1e-8
}

impl Default for BranchingConfig {
    fn default() -> Self {
        BranchingConfig {
            enabled: false,
            policy: PolicyKind::Argmax,
            seed: 0,
            index: 0,
            delta_pop: default_delta_pop(),
            threshold: default_threshold(),
            analysis_stride: 1,
            manual_times_fs: Vec::new(),
            theta: default_theta(),
            eps_deg: default_eps_deg(),
            momentum: MomentumModel::VelocityProjected,
            representative_mass: None,
        }
    }
}

impl BranchingConfig {
    pub fn policy(&self) -> SelectionPolicy {
        match self.policy {
            PolicyKind::Argmax => SelectionPolicy::Argmax,
            PolicyKind::Sampled => SelectionPolicy::Sampled { seed: self.seed },
            PolicyKind::Fixed => SelectionPolicy::Fixed { index: self.index },
        }
    }

    pub fn adiabatic(&self) -> AdiabaticParams {
        AdiabaticParams {
            theta: self.theta,
            eps_deg: self.eps_deg,
            momentum: self.momentum,
            representative_mass: self.representative_mass,
        }
    }
}

/// Named tolerances with their defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Frames whose |ψ†Sψ + absorbed - 1| exceeds this carry a warning.
    #[serde(default = "norm_band")]
    pub norm: f64,
    /// Frames whose largest |ψ_n†Sψ_m| exceeds this carry a warning.
    #[serde(default = "norm_band")]
    pub orthogonality: f64,
    /// One-step drift that triggers step halving.
    #[serde(default = "step_drift")]
    pub step_drift: f64,
    #[serde(default = "max_halvings")]
    pub max_halvings: u32,
}

fn norm_band() -> f64 {
    1e-8
}
fn step_drift() -> f64 {
    1e-6
}
fn max_halvings() -> u32 {
    8
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            norm: norm_band(),
            orthogonality: norm_band(),
            step_drift: step_drift(),
            max_halvings: max_halvings(),
        }
    }
}

impl Tolerances {
    pub fn step_control(&self) -> StepControl {
        StepControl {
            drift_tolerance: self.step_drift,
            max_halvings: self.max_halvings,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RecordFormat {
    #[default]
    Ndjson,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Trajectory record path, relative to the config file.
    #[serde(default)]
    pub record: Option<PathBuf>,
    #[serde(default)]
    pub format: RecordFormat,
    /// Nuclear steps between frames.
    #[serde(default = "one_step")]
    pub stride: usize,
    /// Directory for checkpoints and the branch manifest.
    #[serde(default)]
    pub checkpoint_dir: Option<PathBuf>,
    /// Also checkpoint every this many nuclear steps (0 = only at events).
    #[serde(default)]
    pub checkpoint_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            record: None,
            format: RecordFormat::Ndjson,
            stride: 1,
            checkpoint_dir: None,
            checkpoint_every: 0,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .map(|s| {
                    let line = text[..s.start.min(text.len())].lines().count().max(1);
                    format!("line {line}")
                })
                .unwrap_or_else(|| "config".into());
            Error::config(field, e.message().to_string())
        })?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", cfg.schema_version),
            ));
        }
        Ok(cfg)
    }

    /// Reads a config and makes its relative paths absolute.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = RunConfig::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(q) = p {
                if q.is_relative() {
                    *q = base.join(&*q);
                }
            }
        };
        fix(&mut cfg.species_file);
        fix(&mut cfg.output.record);
        fix(&mut cfg.output.checkpoint_dir);
        Ok(cfg)
    }

    pub fn pair_table(&self) -> Result<PairTable> {
        let mut species = species_from_entries(&self.species)?;
        if let Some(path) = &self.species_file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::config("species_file", format!("{}: {e}", path.display())))?;
            for sp in parse_species_file(&text)? {
                if species.iter().any(|s| s.name == sp.name) {
                    return Err(Error::config(
                        format!("species.{}", sp.name),
                        "defined both inline and in the species file",
                    ));
                }
                species.push(sp);
            }
        }
        if species.is_empty() {
            return Err(Error::config("species", "no species defined"));
        }
        PairTable::new(species)
    }

    pub fn pulse(&self) -> Result<PulseSpec> {
        match &self.pulse {
            Some(p) => p.build(),
            None => Ok(PulseSpec::zero()),
        }
    }

    /// Initial geometry with configured velocities (thermal draws are applied by the driver).
    pub fn geometry(&self, table: &PairTable) -> Result<SystemGeometry> {
        let scale = match self.geometry.units {
            LengthUnit::Bohr => 1.0,
            LengthUnit::Angstrom => BOHR_PER_ANGSTROM,
        };
        let mut atoms = Vec::new();
        for (i, a) in self.geometry.atoms.iter().enumerate() {
            let species = table.index_of(&a.species).ok_or_else(|| {
                Error::config(format!("geometry.atoms[{i}].species"), format!("undefined species `{}`", a.species))
            })?;
            atoms.push(Atom {
                species,
                position: Vec3::new(a.x, a.y, a.z) * scale,
                velocity: Vec3::new(a.vx, a.vy, a.vz),
            });
        }
        let g = SystemGeometry::new(table, atoms)?;
        g.check_separation()?;
        Ok(g)
    }

    /// Everything that can be checked before any compute.
    pub fn validate(&self) -> Result<()> {
        let table = self.pair_table()?;
        let geom = self.geometry(&table)?;
        let integ = &self.integrator;
        if !(integ.dt_as > 0.0) {
            return Err(Error::config("integrator.dt_as", "must be positive"));
        }
        if integ.nuclear_ratio == 0 {
            return Err(Error::config("integrator.nuclear_ratio", "must be at least 1"));
        }
        if !(integ.t_end_fs > 0.0) {
            return Err(Error::config("integrator.t_end_fs", "must be positive"));
        }
        if self.output.stride == 0 || self.branching.analysis_stride == 0 {
            return Err(Error::config("output.stride", "strides must be at least 1"));
        }
        self.pulse()?;
        self.electrons.resolve(geom.n_orbitals())?;
        if self.nuclei.dynamics == NuclearDynamics::Ehrenfest && geom.n_atoms() > 1 {
            self.repulsion.validate(&table, &geom)?;
        }
        if let Some(t) = self.nuclei.temperature_k {
            if !(t >= 0.0) {
                return Err(Error::config("nuclei.temperature_k", "must be >= 0"));
            }
        }
        if self.ionization.enabled {
            self.ionization.validate(geom.n_orbitals())?;
        }
        if !(self.branching.threshold >= 0.0 && self.branching.delta_pop >= 0.0) {
            return Err(Error::config("branching", "threshold and delta_pop must be >= 0"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = r#"
schema_version = 1

[species.H]
mass_amu = 1.008
shells = [{ kind = "s", alpha = 0.4, epsilon = -0.5 }]

[geometry]
atoms = [{ species = "H", x = 0.0, y = 0.0, z = 0.0 }, { species = "H", x = 0.0, y = 0.0, z = 1.4 }]

[repulsion]
pairs = [{ a = "H", b = "H", B = 2.0, lambda = 1.5, cutoff = 10.0 }]

[integrator]
t_end_fs = 1.0
"#;

    #[test]
    fn minimal_config_validates() {
        let c = RunConfig::from_toml(MINIMAL).unwrap();
        c.validate().unwrap();
        assert_eq!(c.integrator.nuclear_ratio, 10);
        assert_eq!(c.coupling.mode, CouplingMode::Full);
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let text = MINIMAL.replace("t_end_fs = 1.0", "t_end_fs = 1.0\ndt = 3");
        match RunConfig::from_toml(&text) {
            Err(Error::Config { field, message }) => {
                assert!(field.starts_with("line"), "{field}");
                assert!(message.contains("dt"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn schema_version_is_checked() {
        let text = MINIMAL.replace("schema_version = 1", "schema_version = 7");
        assert!(matches!(RunConfig::from_toml(&text), Err(Error::Config { .. })));
    }

    #[test]
    fn undefined_species_named_in_error() {
        let text = MINIMAL.replace(r#"z = 1.4 }"#, r#"z = 1.4 }, { species = "C", x = 3.0, y = 0.0, z = 0.0 }"#);
        let c = RunConfig::from_toml(&text).unwrap();
        match c.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "geometry.atoms[2].species"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sin2_pulse_starts_at_zero_by_default() {
        let p = PulseConfig {
            amplitude: Some(0.1),
            intensity_wcm2: None,
            omega_au: Some(0.057),
            omega_ev: None,
            envelope: Envelope::Sin2,
            tau_fs: Some(5.0),
            phase: 0.0,
            polarization: z_axis(),
            t0_fs: None,
            delta_a: [0.0; 3],
        }
        .build()
        .unwrap();
        let (start, end) = p.support().unwrap();
        assert!(start.abs() < 1e-12);
        assert!((end - fs_to_au(5.0)).abs() < 1e-9);
    }
}
