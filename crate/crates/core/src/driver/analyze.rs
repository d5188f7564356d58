//! Post-processing of trajectory records.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use super::record::{Frame, TrajectoryRecord};
use crate::branching::enumerate_branches;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Query {
    Populations,
    Gaps,
    AbsorbedEnergy,
    Branches,
    Norms,
    RabiPeriod,
}

impl FromStr for Query {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "populations" => Query::Populations,
            "gaps" => Query::Gaps,
            "absorbed-energy" => Query::AbsorbedEnergy,
            "branches" => Query::Branches,
            "norms" => Query::Norms,
            "rabi-period" => Query::RabiPeriod,
            other => {
                return Err(Error::config(
                    "query",
                    format!("unknown query `{other}` (populations, gaps, absorbed-energy, branches, norms, rabi-period)"),
                ))
            }
        })
    }
}

/// A named table: one row per frame (or per event).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn to_tsv(&self) -> String {
        let mut out = format!("# {}\n{}\n", self.name, self.columns.join("\t"));
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|x| format!("{x:.12e}")).collect();
            let _ = writeln!(out, "{}", cells.join("\t"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub frames: usize,
    pub events: usize,
    pub t_start: Option<f64>,
    pub t_end: Option<f64>,
    pub status: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Analysis {
    pub summary: Summary,
    pub tables: Vec<Table>,
    /// Scalars such as the absorbed energy or the fitted Rabi period.
    pub scalars: Vec<(String, f64)>,
}

impl Analysis {
    pub fn scalar(&self, name: &str) -> Option<f64> {
        self.scalars.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn to_text(&self) -> String {
        let s = &self.summary;
        let mut out = format!("frames\t{}\nevents\t{}\n", s.frames, s.events);
        if let (Some(a), Some(b)) = (s.t_start, s.t_end) {
            let _ = writeln!(out, "t_range\t{a:.6}\t{b:.6}");
        }
        if let Some(st) = &s.status {
            let _ = writeln!(out, "status\t{st}");
        }
        for (n, v) in &self.scalars {
            let _ = writeln!(out, "{n}\t{v:.12e}");
        }
        for t in &self.tables {
            out.push_str(&t.to_tsv());
        }
        out
    }
}

/// Period of an oscillating series from its mean-level crossings.
pub fn fitted_period(t: &[f64], y: &[f64]) -> Option<f64> {
    if t.len() < 3 {
        return None;
    }
    let (lo, hi) = y.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    let level = 0.5 * (lo + hi);
    let mut crossings = Vec::new();
    for k in 1..t.len() {
        let (a, b) = (y[k - 1] - level, y[k] - level);
        if a < 0.0 && b >= 0.0 {
            crossings.push(t[k - 1] + (t[k] - t[k - 1]) * a / (a - b));
        }
    }
    if crossings.len() < 2 {
        return None;
    }
    Some((crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64)
}

pub fn analyze(record: &TrajectoryRecord, queries: &[Query]) -> Result<Analysis> {
    let frames = &record.frames;
    let summary = Summary {
        frames: frames.len(),
        events: record.events.len(),
        t_start: frames.first().map(|f| f.t),
        t_end: frames.last().map(|f| f.t),
        status: record.footer.as_ref().map(|f| f.status.clone()),
    };
    let mut tables = Vec::new();
    let mut scalars = Vec::new();
    let n_eig = frames.first().map_or(0, |f| f.energies.len());
    for q in queries {
        match q {
            Query::Populations => {
                let mut columns = vec!["t".to_string()];
                columns.extend((0..n_eig).map(|i| format!("p{i}")));
                let rows = frames
                    .iter()
                    .map(|f| std::iter::once(f.t).chain(f.adiabatic_populations.iter().copied()).collect())
                    .collect();
                tables.push(Table { name: "populations".into(), columns, rows });
            }
            Query::Gaps => {
                let mut columns = vec!["t".to_string()];
                columns.extend((1..n_eig).map(|i| format!("gap{}_{i}", i - 1)));
                let rows = frames
                    .iter()
                    .map(|f| std::iter::once(f.t).chain(f.energies.windows(2).map(|w| w[1] - w[0])).collect())
                    .collect();
                tables.push(Table { name: "gaps".into(), columns, rows });
            }
            Query::Norms => {
                let n = frames.first().map_or(0, |f| f.norms.len());
                let mut columns = vec!["t".to_string(), "bound_norm".into(), "max_cross_overlap".into()];
                columns.extend((0..n).map(|i| format!("norm{i}")));
                columns.extend((0..n).map(|i| format!("absorbed{i}")));
                let rows = frames
                    .iter()
                    .map(|f| {
                        let mut r = vec![f.t, f.bound_norm, f.max_cross_overlap];
                        r.extend(&f.norms);
                        r.extend(&f.absorbed);
                        r
                    })
                    .collect();
                tables.push(Table { name: "norms".into(), columns, rows });
            }
            Query::AbsorbedEnergy => {
                // Electronic energy in the field-free eigenbasis, Σ f_n |c_ni|² E_i,
                // plus the nuclear part. It equals E_total whenever Ā = 0 and
                // stays meaningful while the field is on.
                let (_, occ) = record.header.config.electrons.resolve(record.header.n_orbitals)?;
                let adiabatic = |f: &Frame| -> f64 {
                    let el: f64 = f
                        .orbital_populations
                        .iter()
                        .zip(&occ)
                        .map(|(p, w)| w * p.iter().zip(&f.energies).map(|(p, e)| p * e).sum::<f64>())
                        .sum();
                    el + f.e_total - f.e_electronic
                };
                let end = record.header.pulse_end;
                let before = frames.first();
                let after = match end {
                    Some(te) => frames.iter().find(|f| f.t >= te).or(frames.last()),
                    None => frames.last(),
                };
                if let (Some(b), Some(a)) = (before, after) {
                    scalars.push(("absorbed_energy".into(), adiabatic(a) - adiabatic(b)));
                }
                let columns = vec![
                    "t".into(),
                    "e_total".into(),
                    "e_kinetic".into(),
                    "e_electronic".into(),
                    "e_adiabatic".into(),
                ];
                let rows = frames
                    .iter()
                    .map(|f| vec![f.t, f.e_total, f.e_kinetic, f.e_electronic, adiabatic(f)])
                    .collect();
                tables.push(Table { name: "energy".into(), columns, rows });
            }
            Query::Branches => {
                let threshold = record.header.config.branching.threshold;
                let columns = vec!["event".into(), "t".into(), "chosen".into(), "state".into(), "population".into()];
                let mut rows = Vec::new();
                for e in &record.events {
                    for (i, p) in enumerate_branches(&e.event, threshold) {
                        rows.push(vec![e.event.index as f64, e.event.t, e.event.chosen as f64, i as f64, p]);
                    }
                }
                tables.push(Table { name: "branches".into(), columns, rows });
            }
            Query::RabiPeriod => {
                if n_eig >= 2 {
                    let t: Vec<f64> = frames.iter().map(|f| f.t).collect();
                    let y: Vec<f64> = frames.iter().map(|f| f.adiabatic_populations[1]).collect();
                    if let Some(p) = fitted_period(&t, &y) {
                        scalars.push(("rabi_period".into(), p));
                    }
                }
                if let Some(omega) = record.header.reference_rabi {
                    scalars.push(("rabi_period_reference".into(), 2.0 * std::f64::consts::PI / omega));
                }
            }
        }
    }
    Ok(Analysis { summary, tables, scalars })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn period_of_sampled_sine() {
        let t: Vec<f64> = (0..2000).map(|k| k as f64 * 0.05).collect();
        let y: Vec<f64> = t.iter().map(|t| (0.7 * t / 2.0).sin().powi(2)).collect();
        let p = fitted_period(&t, &y).unwrap();
        assert!((p - 2.0 * std::f64::consts::PI / 0.7).abs() < 1e-3);
    }

    #[test]
    fn parses_queries() {
        assert_eq!("rabi-period".parse::<Query>().unwrap(), Query::RabiPeriod);
        assert!("nope".parse::<Query>().is_err());
    }
}
