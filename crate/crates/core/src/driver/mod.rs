//! Full runs: configuration, the interleaved electron/nuclear loop, event
//! handling, checkpoints and record output.

pub mod analyze;
pub mod config;
pub mod record;

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adiabatic::{AdiabaticParams, AdiabaticSnapshot};
use crate::branching::{collapse, enumerate_branches, BranchEvent, EventDetector, SelectionPolicy, Trigger};
use crate::coupling::{assemble, assemble_sh, gauge_phases, CouplingFlags};
use crate::field::PulseSpec;
use crate::geometry::SystemGeometry;
use crate::ionization::SinkSpec;
use crate::model_basis::{PairTable, Species};
use crate::nuclei::{accelerations, electronic_energy, forces, verlet_step, NuclearPath};
use crate::propagator::{step, ElectronState, StepControl};
use crate::units::{BOLTZMANN, HBAR};
use crate::{adiabatic, Error, Result, Vec3, C64};

use config::{NuclearDynamics, RunConfig, SCHEMA_VERSION};
use record::{Entry, EventEntry, FileSink, Footer, Frame, Header, MemorySink, RecordSink, TrajectoryRecord};

/// Everything that evolves during a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    /// Nuclear steps completed.
    pub step: usize,
    pub t: f64,
    pub geometry: SystemGeometry,
    pub accel: Vec<Vec3>,
    pub electrons: ElectronState,
    pub absorbed: Vec<f64>,
    pub sink_amplitude: Vec<C64>,
    pub channels: Vec<f64>,
    pub detector: EventDetector,
    pub events: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendingCollapse {
    pub trigger: Trigger,
    pub index: usize,
}

/// A resumable snapshot of a run. `pending` is set for checkpoints written
/// at a branch event, just before the collapse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub species: Vec<Species>,
    pub config: RunConfig,
    pub state: SimState,
    pub pending: Option<PendingCollapse>,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let v: serde_json::Value = serde_json::from_slice(&bytes)?;
        match v.get("schema_version").and_then(|x| x.as_u64()) {
            Some(x) if x == SCHEMA_VERSION as u64 => {}
            other => {
                return Err(Error::Schema {
                    expected: SCHEMA_VERSION,
                    found: other.map_or("missing".into(), |x| x.to_string()),
                })
            }
        }
        Ok(serde_json::from_value(v)?)
    }
}

/// Entry of the branch manifest written next to the checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub event: usize,
    pub t: f64,
    pub trigger: Trigger,
    pub populations: Vec<f64>,
    pub chosen: usize,
    pub branches: Vec<(usize, f64)>,
    pub checkpoint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub record: Option<String>,
    pub threshold: f64,
    pub events: Vec<ManifestEntry>,
}

pub struct Simulation {
    pub config: RunConfig,
    pub table: PairTable,
    pub pulse: PulseSpec,
    pub flags: CouplingFlags,
    pub sink: Option<SinkSpec>,
    pub params: AdiabaticParams,
    pub control: StepControl,
    pub state: SimState,
    manifest: Manifest,
    resumed_from: Option<String>,
}

/// Maxwell–Boltzmann velocities at temperature `t_k` with the centre-of-mass
/// motion removed.
pub fn thermal_velocities(masses: &[f64], t_k: f64, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<Vec3> = masses
        .iter()
        .map(|m| {
            let sigma = (BOLTZMANN * t_k / m).sqrt();
            match Normal::new(0.0, sigma) {
                Ok(d) => Vec3::new(d.sample(&mut rng), d.sample(&mut rng), d.sample(&mut rng)),
                Err(_) => Vec3::zeros(),
            }
        })
        .collect();
    if masses.len() > 1 {
        let total: f64 = masses.iter().sum();
        let p: Vec3 = v.iter().zip(masses).map(|(v, m)| v * *m).sum();
        for x in v.iter_mut() {
            *x -= p / total;
        }
    }
    v
}

impl Simulation {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let table = config.pair_table()?;
        let mut geometry = config.geometry(&table)?;
        let pulse = config.pulse()?;
        match config.nuclei.dynamics {
            NuclearDynamics::Clamped => geometry.set_velocities(&vec![Vec3::zeros(); geometry.n_atoms()]),
            _ => {
                if let Some(t_k) = config.nuclei.temperature_k {
                    let v = thermal_velocities(&geometry.masses, t_k, config.nuclei.seed);
                    geometry.set_velocities(&v);
                }
            }
        }
        if let Some(w) = pulse.wavelength_warning(geometry.max_distance()) {
            log::warn!("{w}");
        }
        let (occupied, occupations) = config.electrons.resolve(geometry.n_orbitals())?;
        let basis = adiabatic::eigensolve(&geometry, &table)?;
        let mut vectors = basis.vectors.clone();
        let d = gauge_phases(&geometry, pulse.a_bar(0.0));
        for (l, mut row) in vectors.row_iter_mut().enumerate() {
            row *= d[l];
        }
        let electrons = ElectronState::from_columns(&vectors, &occupied, &occupations, 0.0);
        let n_states = electrons.n_states();
        let detector = EventDetector::new(
            config.branching.delta_pop,
            pulse.end_time(),
            config.branching.manual_times_fs.iter().map(|t| crate::units::fs_to_au(*t)).collect(),
        );
        let state = SimState {
            step: 0,
            t: 0.0,
            accel: vec![Vec3::zeros(); geometry.n_atoms()],
            geometry,
            electrons,
            absorbed: vec![0.0; n_states],
            sink_amplitude: vec![C64::new(0.0, 0.0); n_states],
            channels: vec![0.0; basis.energies.len()],
            detector,
            events: 0,
        };
        let mut sim = Simulation::assemble_parts(config, table, pulse, state)?;
        sim.refresh_accelerations()?;
        Ok(sim)
    }

    fn assemble_parts(config: RunConfig, table: PairTable, pulse: PulseSpec, state: SimState) -> Result<Self> {
        let flags = config.coupling.flags();
        let sink = config.ionization.enabled.then(|| config.ionization.clone());
        let params = config.branching.adiabatic();
        let control = config.tolerances.step_control();
        let manifest = Manifest {
            record: config.output.record.as_ref().map(|p| p.display().to_string()),
            threshold: config.branching.threshold,
            events: vec![],
        };
        Ok(Simulation {
            config,
            table,
            pulse,
            flags,
            sink,
            params,
            control,
            state,
            manifest,
            resumed_from: None,
        })
    }

    /// Continues from a checkpoint. A pending collapse is applied first, with
    /// `branch` selecting the eigenstate (the configured policy otherwise).
    pub fn resume(cp: Checkpoint, branch: Option<usize>, source: Option<String>) -> Result<(Self, Option<EventEntry>)> {
        let table = PairTable::new(cp.species.clone())?;
        let pulse = cp.config.pulse()?;
        let mut sim = Simulation::assemble_parts(cp.config.clone(), table, pulse, cp.state.clone())?;
        sim.resumed_from = source;
        let mut entry = None;
        if let Some(p) = cp.pending {
            let policy = match branch {
                Some(index) => SelectionPolicy::Fixed { index },
                None => sim.config.branching.policy(),
            };
            let ev = sim.apply_collapse(p.trigger, p.index, policy)?;
            entry = Some(EventEntry { event: ev, checkpoint: sim.resumed_from.clone() });
        } else if branch.is_some() {
            return Err(Error::config("--branch", "checkpoint has no pending branch event"));
        }
        Ok((sim, entry))
    }

    pub fn nuclear_dt(&self) -> f64 {
        self.config.integrator.nuclear_dt()
    }

    pub fn total_steps(&self) -> usize {
        self.config.integrator.nuclear_steps()
    }

    fn force_at(&self, geom: &SystemGeometry, electrons: &ElectronState, t: f64) -> Result<Vec<Vec3>> {
        forces(
            geom,
            &self.table,
            electrons,
            self.pulse.a_bar(t),
            self.pulse.e_bar(t),
            self.flags,
            &self.config.repulsion,
        )
    }

    fn refresh_accelerations(&mut self) -> Result<()> {
        if self.config.nuclei.dynamics == NuclearDynamics::Ehrenfest {
            let f = self.force_at(&self.state.geometry, &self.state.electrons, self.state.t)?;
            self.state.accel = accelerations(&self.state.geometry, &f);
        }
        Ok(())
    }

    /// One nuclear step with its electronic substeps.
    pub fn advance(&mut self) -> Result<()> {
        let ratio = self.config.integrator.nuclear_ratio;
        let dt = self.config.integrator.dt();
        let t0 = self.state.t;
        let t1 = (self.state.step + 1) as f64 * self.nuclear_dt();
        let path = NuclearPath {
            table: &self.table,
            start: self.state.geometry.clone(),
            t0,
            accel: match self.config.nuclei.dynamics {
                NuclearDynamics::Ehrenfest => self.state.accel.clone(),
                _ => vec![Vec3::zeros(); self.state.geometry.n_atoms()],
            },
            pulse: &self.pulse,
            flags: self.flags,
            sink: self.sink.as_ref(),
        };
        let mut electrons = self.state.electrons.clone();
        let total_f: f64 = electrons.occupations.iter().sum();
        for k in 0..ratio {
            let report = step(&electrons, &path, dt, &self.control)?;
            for n in 0..report.absorbed.len() {
                self.state.absorbed[n] += report.absorbed[n];
                self.state.sink_amplitude[n] += report.sink_amplitude[n];
            }
            electrons = report.state;
            electrons.t = if k + 1 == ratio { t1 } else { t0 + dt * (k + 1) as f64 };
            if let Some(sink) = &self.sink {
                let tm = electrons.t - 0.5 * dt;
                let a = self.pulse.a_pulse(tm);
                for (psi, f) in electrons.psi.iter().zip(&electrons.occupations) {
                    for (c, r) in self.state.channels.iter_mut().zip(sink.channel_rates(psi, &a)) {
                        *c += dt * r * f / total_f;
                    }
                }
            }
        }
        let geometry = match self.config.nuclei.dynamics {
            NuclearDynamics::Ehrenfest => {
                let (g, a1) = verlet_step(&self.state.geometry, &self.state.accel, self.nuclear_dt(), |g| {
                    self.force_at(g, &electrons, t1)
                })?;
                self.state.accel = a1;
                g
            }
            NuclearDynamics::Prescribed => {
                let g = path.geometry_at(t1);
                g.check_separation()?;
                g
            }
            NuclearDynamics::Clamped => self.state.geometry.clone(),
        };
        self.state.geometry = geometry;
        self.state.electrons = electrons;
        self.state.t = t1;
        self.state.step += 1;
        Ok(())
    }

    pub fn overlap_now(&self) -> crate::CMatrix {
        crate::coupling::assemble_overlap(&self.state.geometry, &self.table, self.pulse.a_bar(self.state.t))
    }

    pub fn snapshot(&self) -> Result<AdiabaticSnapshot> {
        let s = self.overlap_now();
        AdiabaticSnapshot::new(
            &self.state.geometry,
            &self.table,
            self.pulse.a_bar(self.state.t),
            &s,
            &self.state.electrons,
            &self.params,
        )
    }

    pub fn frame(&self) -> Result<Frame> {
        let st = &self.state;
        let t = st.t;
        let (abar, ebar) = (self.pulse.a_bar(t), self.pulse.e_bar(t));
        let (s, h) = assemble_sh(&st.geometry, &self.table, abar, ebar, self.flags);
        let snap = AdiabaticSnapshot::new(&st.geometry, &self.table, abar, &s, &st.electrons, &self.params)?;
        let norms = st.electrons.norms(&s);
        let cross = st.electrons.max_cross_overlap(&s);
        let e_el = electronic_energy(&st.electrons, &s, &h);
        let e_kin = st.geometry.kinetic_energy();
        let e_rep = if st.geometry.n_atoms() > 1 {
            self.config.repulsion.energy(&self.table, &st.geometry)
        } else {
            0.0
        };
        let f = &st.electrons.occupations;
        let total_f: f64 = f.iter().sum();
        let bound = norms.iter().zip(f).map(|(n, f)| n * f).sum::<f64>() / total_f;
        let mut warnings = Vec::new();
        for (k, (n, a)) in norms.iter().zip(&st.absorbed).enumerate() {
            if (n + a - 1.0).abs() > self.config.tolerances.norm {
                warnings.push(format!("state {k}: norm {n:.12} + absorbed {a:.3e} deviates from 1"));
            }
        }
        if cross > self.config.tolerances.orthogonality {
            warnings.push(format!("orthogonality loss {cross:.3e}"));
        }
        Ok(Frame {
            t,
            positions: st.geometry.positions().iter().map(|x| [x[0], x[1], x[2]]).collect(),
            velocities: st.geometry.velocities().iter().map(|x| [x[0], x[1], x[2]]).collect(),
            energies: snap.energies.clone(),
            adiabatic_populations: snap.weighted_populations(f),
            orbital_populations: snap.populations.clone(),
            e_total: e_el + e_kin + e_rep,
            e_kinetic: e_kin,
            e_electronic: e_el,
            bound_norm: bound,
            norms,
            max_cross_overlap: cross,
            absorbed: st.absorbed.clone(),
            channels: st.channels.clone(),
            nonadiabatic_pairs: snap.nonadiabatic_pairs().into_iter().map(|(i, j)| [i, j]).collect(),
            abar: [abar[0], abar[1], abar[2]],
            ebar: [ebar[0], ebar[1], ebar[2]],
            warnings,
        })
    }

    /// Ω = E₀|ê·μ₀₁|/ħ between the two lowest eigenstates of the initial geometry.
    fn reference_rabi(&self) -> Option<f64> {
        let g = &self.state.geometry;
        if g.n_orbitals() < 2 || self.pulse.amplitude == 0.0 {
            return None;
        }
        let m = assemble(g, &self.table, Vec3::zeros(), Vec3::zeros(), CouplingFlags::field_free(), 0.0);
        let basis = adiabatic::eigensolve(g, &self.table).ok()?;
        let (v0, v1) = (basis.vectors.column(0), basis.vectors.column(1));
        let e = Vec3::from(self.pulse.polarization);
        let mu: C64 = (0..3).map(|k| v0.dotc(&(&m.mu[k] * v1)) * e[k]).sum();
        Some(self.pulse.peak_field() * mu.norm() / HBAR)
    }

    pub fn header(&self) -> Header {
        Header {
            schema_version: SCHEMA_VERSION,
            n_atoms: self.state.geometry.n_atoms(),
            n_orbitals: self.state.geometry.n_orbitals(),
            species: self.table.species.iter().map(|s| s.name.clone()).collect(),
            pulse_end: self.pulse.end_time(),
            reference_rabi: self.reference_rabi(),
            config: self.config.clone(),
            resumed_from: self.resumed_from.clone(),
        }
    }

    pub fn checkpoint(&self, pending: Option<PendingCollapse>) -> Checkpoint {
        Checkpoint {
            schema_version: SCHEMA_VERSION,
            species: self.table.species.clone(),
            config: self.config.clone(),
            state: self.state.clone(),
            pending,
        }
    }

    fn checkpoint_dir(&self) -> Option<PathBuf> {
        self.config.output.checkpoint_dir.clone()
    }

    fn apply_collapse(&mut self, trigger: Trigger, index: usize, policy: SelectionPolicy) -> Result<BranchEvent> {
        let snap = self.snapshot()?;
        let s = self.overlap_now();
        let (electrons, event) = collapse(&self.state.electrons, &snap, &s, policy, trigger, index)?;
        self.state.electrons = electrons;
        // The collapsed state is a fresh, fully bound start.
        for a in self.state.absorbed.iter_mut() {
            *a = 0.0;
        }
        self.state.events = index + 1;
        self.refresh_accelerations()?;
        Ok(event)
    }

    fn handle_trigger(&mut self, trigger: Trigger, out: &mut dyn RecordSink) -> Result<()> {
        let index = self.state.events;
        let pending = PendingCollapse { trigger, index };
        let checkpoint = match self.checkpoint_dir() {
            Some(dir) => {
                let path = dir.join(format!("event-{index:04}.json"));
                self.checkpoint(Some(pending)).save(&path)?;
                Some(path.display().to_string())
            }
            None => None,
        };
        let event = self.apply_collapse(trigger, index, self.config.branching.policy())?;
        self.manifest.events.push(ManifestEntry {
            event: index,
            t: event.t,
            trigger,
            populations: event.populations.clone(),
            chosen: event.chosen,
            branches: enumerate_branches(&event, self.config.branching.threshold),
            checkpoint: checkpoint.clone(),
        });
        out.write(&Entry::Event(Box::new(EventEntry { event, checkpoint })))?;
        Ok(())
    }

    /// Runs to the configured end time, streaming entries into `out`.
    pub fn run_into(&mut self, out: &mut dyn RecordSink, initial_event: Option<EventEntry>) -> Result<Footer> {
        out.write(&Entry::Header(Box::new(self.header())))?;
        let mut frames = 0;
        let mut events = 0;
        if let Some(e) = initial_event {
            out.write(&Entry::Event(Box::new(e)))?;
            events += 1;
        }
        if self.state.step == 0 {
            out.write(&Entry::Frame(Box::new(self.frame()?)))?;
            frames += 1;
        }
        let n = self.total_steps();
        let stride = self.config.output.stride;
        let every = self.config.output.checkpoint_every;
        let result = (|| -> Result<()> {
            while self.state.step < n {
                self.advance()?;
                let k = self.state.step;
                if self.config.branching.enabled && k % self.config.branching.analysis_stride == 0 {
                    let snap = self.snapshot()?;
                    let pops = snap.weighted_populations(&self.state.electrons.occupations);
                    if let Some(trigger) = self.state.detector.observe(&snap, &pops) {
                        self.handle_trigger(trigger, out)?;
                        events += 1;
                    }
                }
                if k % stride == 0 || k == n {
                    out.write(&Entry::Frame(Box::new(self.frame()?)))?;
                    frames += 1;
                }
                if every > 0 && k % every == 0 {
                    if let Some(dir) = self.checkpoint_dir() {
                        self.checkpoint(None).save(&dir.join(format!("step-{k:08}.json")))?;
                    }
                }
            }
            Ok(())
        })();
        let status = match &result {
            Ok(()) => "complete".to_string(),
            Err(e) => format!("aborted at t = {:.6}: {e}", self.state.t),
        };
        let result = result.map_err(|e| {
            let checkpoint = self.checkpoint_dir().and_then(|dir| {
                let path = dir.join("last-good.json");
                self.checkpoint(None).save(&path).ok().map(|_| path.display().to_string())
            });
            Error::Aborted { t: self.state.t, checkpoint, source: Box::new(e) }
        });
        let footer = Footer { frames, events, status };
        out.write(&Entry::Footer(footer.clone()))?;
        out.finish()?;
        if let Some(dir) = self.checkpoint_dir() {
            if !self.manifest.events.is_empty() {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("branches.json"), serde_json::to_vec_pretty(&self.manifest)?)?;
            }
        }
        result.map(|_| footer)
    }

    /// Runs, writing the configured record file (if any) and returning the
    /// record in memory.
    pub fn run_to_record(&mut self, initial_event: Option<EventEntry>, path: Option<&Path>) -> Result<TrajectoryRecord> {
        let mut mem = MemorySink::default();
        match path {
            Some(p) => {
                let mut file = FileSink::create(p, self.config.output.format)?;
                let mut tee = record::Tee(vec![&mut mem, &mut file]);
                self.run_into(&mut tee, initial_event)?;
            }
            None => {
                self.run_into(&mut mem, initial_event)?;
            }
        }
        TrajectoryRecord::from_entries(mem.entries)
    }
}

/// Validates, runs and returns the record; writes output files when configured.
pub fn run(config: RunConfig) -> Result<TrajectoryRecord> {
    let path = config.output.record.clone();
    let mut sim = Simulation::new(config)?;
    sim.run_to_record(None, path.as_deref())
}

/// Replays several branches of one event checkpoint in parallel.
pub fn fan_out(cp: &Checkpoint, branches: &[usize]) -> Vec<Result<TrajectoryRecord>> {
    branches
        .par_iter()
        .map(|&b| {
            let (mut sim, ev) = Simulation::resume(cp.clone(), Some(b), None)?;
            sim.run_to_record(ev, None)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const CFG: &str = r#"
schema_version = 1

[species.H]
mass_amu = 1.008
shells = [{ kind = "s", alpha = 0.4, epsilon = -0.5 }, { kind = "pz", alpha = 0.3, epsilon = -0.1 }]

[geometry]
atoms = [{ species = "H", x = 0.0, y = 0.0, z = 0.0 }, { species = "H", x = 0.0, y = 0.0, z = 1.6 }]

[repulsion]
pairs = [{ a = "H", b = "H", B = 1.0, lambda = 1.5, cutoff = 10.0 }]

[pulse]
amplitude = 0.5
omega_au = 0.3
envelope = "sin2"
tau_fs = 0.3

[integrator]
dt_as = 2.0
nuclear_ratio = 5
t_end_fs = 0.5

[electrons]
count = 2
"#;

    #[test]
    fn runs_are_deterministic() {
        let c = RunConfig::from_toml(CFG).unwrap();
        let a = run(c.clone()).unwrap();
        let b = run(c).unwrap();
        assert_eq!(a, b);
        assert!(a.frames.len() > 2);
        assert_eq!(a.footer.as_ref().unwrap().status, "complete");
    }

    #[test]
    fn thermal_velocities_have_no_net_momentum() {
        let m = [1836.0, 3000.0, 22000.0];
        let v = thermal_velocities(&m, 300.0, 9);
        let p: Vec3 = v.iter().zip(&m).map(|(v, m)| v * *m).sum();
        assert!(p.norm() < 1e-12);
        assert_eq!(v, thermal_velocities(&m, 300.0, 9));
    }
}
