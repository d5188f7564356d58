//! Reduced-Ehrenfest branching: event detection, collapse onto adiabatic
//! eigenstates and branch enumeration.
//!
//! Collapse acts orbital by orbital. The occupied orbital whose adiabatic
//! populations are most spread is the branch orbital; the selection policy
//! picks its eigenstate. Every other orbital goes to its dominant eigenstate
//! among those not yet taken, so the collapsed orbitals stay S-orthonormal.

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adiabatic::{project, AdiabaticSnapshot, PairClass};
use crate::linalg::metric_inner;
use crate::propagator::ElectronState;
use crate::{CMatrix, Error, Result, C64};

/// Populations below this are never selected.
pub const EMPTY_BRANCH: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    PulseEnd,
    NonadiabaticExit,
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SelectionPolicy {
    Argmax,
    Sampled { seed: u64 },
    Fixed { index: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitalCollapse {
    pub state: usize,
    pub populations: Vec<f64>,
    pub chosen: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchEvent {
    /// Sequence number within the run.
    pub index: usize,
    pub t: f64,
    pub trigger: Trigger,
    /// Normalized populations of the branch orbital before collapse.
    pub populations: Vec<f64>,
    pub chosen: usize,
    pub policy: SelectionPolicy,
    pub branch_orbital: usize,
    pub orbitals: Vec<OrbitalCollapse>,
    pub state_hash: String,
}

/// Watches successive snapshots for events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventDetector {
    pub delta_pop: f64,
    pulse_end: Option<f64>,
    pulse_fired: bool,
    manual: Vec<f64>,
    /// Open nonadiabatic episodes: pair → populations when it opened.
    open: Vec<([usize; 2], Vec<f64>)>,
    last: Option<Vec<f64>>,
}

impl EventDetector {
    pub fn new(delta_pop: f64, pulse_end: Option<f64>, mut manual: Vec<f64>) -> Self {
        manual.sort_by(f64::total_cmp);
        EventDetector {
            delta_pop,
            pulse_end,
            pulse_fired: false,
            manual,
            open: Vec::new(),
            last: None,
        }
    }

    /// Feeds one snapshot (with occupation-weighted populations) and reports
    /// at most one trigger.
    pub fn observe(&mut self, snap: &AdiabaticSnapshot, populations: &[f64]) -> Option<Trigger> {
        let t = snap.t;
        let before = self.last.replace(populations.to_vec());
        let mut fired = None;
        for p in &snap.pairs {
            let key = [p.i, p.j];
            let slot = self.open.iter().position(|(k, _)| *k == key);
            match p.class {
                PairClass::Nonadiabatic => {
                    if slot.is_none() {
                        let start = before.clone().unwrap_or_else(|| populations.to_vec());
                        self.open.push((key, start));
                    }
                }
                PairClass::Adiabatic => {
                    if let Some((_, start)) = slot.map(|k| self.open.remove(k)) {
                        let change = [p.i, p.j]
                            .iter()
                            .map(|&k| (populations[k] - start[k]).abs())
                            .fold(0.0, f64::max);
                        if change > self.delta_pop {
                            fired = Some(Trigger::NonadiabaticExit);
                        }
                    }
                }
            }
        }
        if !self.pulse_fired {
            if let Some(end) = self.pulse_end {
                if t >= end {
                    self.pulse_fired = true;
                    fired = Some(Trigger::PulseEnd);
                }
            }
        }
        if let Some(&m) = self.manual.first() {
            if t >= m {
                self.manual.remove(0);
                fired = fired.or(Some(Trigger::Manual));
            }
        }
        if fired.is_some() {
            // A collapse follows; episodes restart from the collapsed state.
            self.open.clear();
            self.last = None;
        }
        fired
    }
}

fn normalized(p: &[f64]) -> Vec<f64> {
    let total: f64 = p.iter().sum();
    if total > 0.0 {
        p.iter().map(|x| x / total).collect()
    } else {
        p.to_vec()
    }
}

fn select(
    pops: &[f64],
    taken: &[bool],
    policy: SelectionPolicy,
    rng: &mut ChaCha8Rng,
) -> Result<usize> {
    let available = |i: usize| !taken[i] && pops[i] > EMPTY_BRANCH;
    match policy {
        SelectionPolicy::Fixed { index } => {
            if index >= pops.len() || !available(index) {
                return Err(Error::EmptyBranch {
                    index,
                    population: pops.get(index).copied().unwrap_or(0.0),
                });
            }
            Ok(index)
        }
        SelectionPolicy::Argmax => {
            let mut best = None;
            for i in 0..pops.len() {
                if available(i) && best.is_none_or(|b: usize| pops[i] > pops[b]) {
                    best = Some(i);
                }
            }
            best.ok_or(Error::EmptyBranch {
                index: 0,
                population: 0.0,
            })
        }
        SelectionPolicy::Sampled { .. } => {
            let w: Vec<f64> = (0..pops.len()).map(|i| if available(i) { pops[i] } else { 0.0 }).collect();
            let dist = WeightedIndex::new(&w).map_err(|_| Error::EmptyBranch {
                index: 0,
                population: 0.0,
            })?;
            Ok(dist.sample(rng))
        }
    }
}

/// SHA-256 over the coefficients and occupations.
pub fn state_hash(state: &ElectronState) -> String {
    let mut h = Sha256::new();
    for (p, f) in state.psi.iter().zip(&state.occupations) {
        h.update(f.to_le_bytes());
        for c in p.iter() {
            h.update(c.re.to_le_bytes());
            h.update(c.im.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// Collapses every occupied orbital onto one adiabatic eigenstate.
///
/// `s` is the overlap in the state's gauge. The RNG for sampled selection is
/// seeded from the policy seed and `event_index`, so replays are exact.
pub fn collapse(
    state: &ElectronState,
    snap: &AdiabaticSnapshot,
    s: &CMatrix,
    policy: SelectionPolicy,
    trigger: Trigger,
    event_index: usize,
) -> Result<(ElectronState, BranchEvent)> {
    let n_states = state.n_states();
    let coeffs: Vec<_> = state.psi.iter().map(|p| project(&snap.vectors, s, p)).collect();
    let pops: Vec<Vec<f64>> = coeffs
        .iter()
        .map(|c| normalized(&c.iter().map(|z| z.norm_sqr()).collect::<Vec<_>>()))
        .collect();
    let peak = |n: usize| pops[n].iter().cloned().fold(0.0, f64::max);
    let branch_orbital = (0..n_states)
        .min_by(|&a, &b| peak(a).total_cmp(&peak(b)).then(a.cmp(&b)))
        .unwrap_or(0);
    let seed = match policy {
        SelectionPolicy::Sampled { seed } => seed,
        _ => 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(event_index as u64);

    let mut order: Vec<usize> = (0..n_states).filter(|&n| n != branch_orbital).collect();
    order.sort_by(|&a, &b| peak(b).total_cmp(&peak(a)).then(a.cmp(&b)));
    order.insert(0, branch_orbital);

    let mut taken = vec![false; snap.energies.len()];
    let mut chosen = vec![0; n_states];
    for &n in &order {
        let p = if n == branch_orbital { policy } else { SelectionPolicy::Argmax };
        let i = select(&pops[n], &taken, p, &mut rng)?;
        taken[i] = true;
        chosen[n] = i;
    }

    let mut out = state.clone();
    for n in 0..n_states {
        let i = chosen[n];
        let c = coeffs[n][i];
        // Keep the phase of the surviving component.
        let phase = if c.norm() > 0.0 { c / c.norm() } else { C64::new(1.0, 0.0) };
        let mut v = snap.vectors.column(i) * phase;
        let norm = metric_inner(&v, s, &v).re.sqrt();
        v /= C64::new(norm, 0.0);
        out.psi[n] = v;
    }
    let event = BranchEvent {
        index: event_index,
        t: state.t,
        trigger,
        populations: pops[branch_orbital].clone(),
        chosen: chosen[branch_orbital],
        policy,
        branch_orbital,
        orbitals: (0..n_states)
            .map(|n| OrbitalCollapse {
                state: n,
                populations: pops[n].clone(),
                chosen: chosen[n],
            })
            .collect(),
        state_hash: state_hash(&out),
    };
    Ok((out, event))
}

/// Branches with population at or above `threshold`.
pub fn enumerate_branches(event: &BranchEvent, threshold: f64) -> Vec<(usize, f64)> {
    event
        .populations
        .iter()
        .enumerate()
        .filter(|(_, p)| **p >= threshold)
        .map(|(i, p)| (i, *p))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adiabatic::{Eigenbasis, PairRecord};
    use crate::CVector;

    fn snapshot(t: f64, classes: &[PairClass]) -> AdiabaticSnapshot {
        let basis = Eigenbasis {
            energies: vec![0.0, 0.5, 1.0],
            vectors: CMatrix::identity(3, 3),
        };
        let pairs = classes
            .iter()
            .map(|&class| PairRecord { i: 0, j: 1, ratio: 0.0, class })
            .collect();
        let st = ElectronState::new(vec![], vec![], t);
        AdiabaticSnapshot::from_parts(t, &basis, None, &CMatrix::identity(3, 3), &st, pairs)
    }

    fn superposition(w: &[f64]) -> ElectronState {
        let v = CVector::from_iterator(w.len(), w.iter().map(|x| C64::new(x.sqrt(), 0.0)));
        ElectronState::new(vec![v], vec![1.0], 0.0)
    }

    #[test]
    fn argmax_and_fixed_policies() {
        let snap = snapshot(0.0, &[]);
        let s = CMatrix::identity(3, 3);
        let st = superposition(&[0.7, 0.3, 0.0]);
        let (out, ev) = collapse(&st, &snap, &s, SelectionPolicy::Argmax, Trigger::Manual, 0).unwrap();
        assert_eq!(ev.chosen, 0);
        assert!((out.psi[0][0] - C64::new(1.0, 0.0)).norm() < 1e-15);
        let (_, ev) = collapse(&st, &snap, &s, SelectionPolicy::Fixed { index: 1 }, Trigger::Manual, 0).unwrap();
        assert_eq!(ev.chosen, 1);
        let r = collapse(&st, &snap, &s, SelectionPolicy::Fixed { index: 2 }, Trigger::Manual, 0);
        assert!(matches!(r, Err(Error::EmptyBranch { index: 2, .. })));
    }

    #[test]
    fn pure_state_is_unchanged() {
        let snap = snapshot(0.0, &[]);
        let s = CMatrix::identity(3, 3);
        let mut st = superposition(&[0.0, 1.0, 0.0]);
        st.psi[0] *= C64::new(0.6, 0.8);
        for policy in [SelectionPolicy::Argmax, SelectionPolicy::Sampled { seed: 3 }, SelectionPolicy::Fixed { index: 1 }] {
            let (out, _) = collapse(&st, &snap, &s, policy, Trigger::Manual, 0).unwrap();
            assert!((&out.psi[0] - &st.psi[0]).norm() < 1e-15);
        }
    }

    #[test]
    fn sampled_choice_is_reproducible() {
        let snap = snapshot(0.0, &[]);
        let s = CMatrix::identity(3, 3);
        let st = superposition(&[0.5, 0.5, 0.0]);
        let run = |seed, ev| collapse(&st, &snap, &s, SelectionPolicy::Sampled { seed }, Trigger::Manual, ev).unwrap().1;
        let first = run(42, 3);
        for _ in 0..5 {
            assert_eq!(run(42, 3), first);
        }
        let picks: Vec<usize> = (0..64).map(|e| run(42, e).chosen).collect();
        assert!(picks.contains(&0) && picks.contains(&1));
    }

    #[test]
    fn occupied_orbitals_never_share_a_branch() {
        let snap = snapshot(0.0, &[]);
        let s = CMatrix::identity(3, 3);
        let a = CVector::from_vec(vec![C64::new(0.9f64.sqrt(), 0.0), C64::new(0.1f64.sqrt(), 0.0), C64::new(0.0, 0.0)]);
        let b = CVector::from_vec(vec![C64::new(-(0.1f64.sqrt()), 0.0), C64::new(0.9f64.sqrt(), 0.0), C64::new(0.0, 0.0)]);
        let st = ElectronState::new(vec![a, b], vec![2.0, 2.0], 0.0);
        let (out, ev) = collapse(&st, &snap, &s, SelectionPolicy::Fixed { index: 1 }, Trigger::Manual, 0).unwrap();
        assert_eq!(ev.orbitals[ev.branch_orbital].chosen, 1);
        let other = 1 - ev.branch_orbital;
        assert_eq!(ev.orbitals[other].chosen, 0);
        assert!(out.max_cross_overlap(&s) < 1e-15);
    }

    #[test]
    fn enumeration_filters_by_threshold() {
        let ev = BranchEvent {
            index: 0,
            t: 0.0,
            trigger: Trigger::Manual,
            populations: vec![0.9, 0.09, 0.01],
            chosen: 0,
            policy: SelectionPolicy::Argmax,
            branch_orbital: 0,
            orbitals: vec![],
            state_hash: String::new(),
        };
        assert_eq!(enumerate_branches(&ev, 0.05), vec![(0, 0.9), (1, 0.09)]);
    }

    #[test]
    fn detector_fires_pulse_end_once() {
        let mut d = EventDetector::new(0.01, Some(5.0), vec![]);
        let mut fired = vec![];
        for k in 0..20 {
            let snap = snapshot(k as f64 * 0.5, &[PairClass::Adiabatic]);
            if let Some(tr) = d.observe(&snap, &[1.0, 0.0, 0.0]) {
                fired.push((snap.t, tr));
            }
        }
        assert_eq!(fired, vec![(5.0, Trigger::PulseEnd)]);
    }

    #[test]
    fn detector_needs_population_change_to_exit() {
        let mut d = EventDetector::new(0.01, None, vec![]);
        let seq = [
            (PairClass::Adiabatic, 1.0),
            (PairClass::Nonadiabatic, 0.9),
            (PairClass::Nonadiabatic, 0.8),
            (PairClass::Adiabatic, 0.8),
            (PairClass::Nonadiabatic, 0.8),
            (PairClass::Adiabatic, 0.8),
        ];
        let fired: Vec<_> = seq
            .iter()
            .enumerate()
            .filter_map(|(k, (c, p))| d.observe(&snapshot(k as f64, &[*c]), &[*p, 1.0 - p, 0.0]).map(|t| (k, t)))
            .collect();
        assert_eq!(fired, vec![(3, Trigger::NonadiabaticExit)]);
    }
}
