//! Trajectory records: newline-delimited JSON or a compact binary stream.
//!
//! NDJSON: one object per line, tagged by `"type"`: a `header`, then `frame`
//! and `event` entries in time order, then a `footer`.
//!
//! Binary: the magic `LUMENREC`, then entries of the form
//! `tag: u8, length: u32 LE, payload`. Headers, events and footers carry their
//! JSON as payload; frames are packed little-endian (see [`Frame::encode`]).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::branching::BranchEvent;
use crate::driver::config::{RecordFormat, RunConfig, SCHEMA_VERSION};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"LUMENREC";
const TAG_HEADER: u8 = 1;
const TAG_FRAME: u8 = 2;
const TAG_EVENT: u8 = 3;
const TAG_FOOTER: u8 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub schema_version: u32,
    pub n_atoms: usize,
    pub n_orbitals: usize,
    pub species: Vec<String>,
    /// End of the pulse envelope (a.u.), if it has one.
    pub pulse_end: Option<f64>,
    /// Rabi-type reference frequency Ω = |Ē₀·μ|/ħ between the two lowest
    /// eigenstates at t = 0, for analysis.
    pub reference_rabi: Option<f64>,
    pub config: RunConfig,
    /// Set when this record continues from a checkpoint.
    pub resumed_from: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub t: f64,
    pub positions: Vec<[f64; 3]>,
    pub velocities: Vec<[f64; 3]>,
    /// Adiabatic eigenvalues (hartree).
    pub energies: Vec<f64>,
    /// Occupation-weighted adiabatic populations.
    pub adiabatic_populations: Vec<f64>,
    /// |c_i|² per occupied state, `[state][eigenstate]`.
    pub orbital_populations: Vec<Vec<f64>>,
    pub e_total: f64,
    pub e_kinetic: f64,
    pub e_electronic: f64,
    pub bound_norm: f64,
    pub norms: Vec<f64>,
    pub max_cross_overlap: f64,
    /// Cumulative probability removed by the sink, per state.
    pub absorbed: Vec<f64>,
    /// Cumulative sink loss resolved by orbital channel ℓ.
    pub channels: Vec<f64>,
    pub nonadiabatic_pairs: Vec<[usize; 2]>,
    pub abar: [f64; 3],
    pub ebar: [f64; 3],
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventEntry {
    pub event: BranchEvent,
    /// Checkpoint holding the pre-collapse state, if one was written.
    pub checkpoint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Footer {
    pub frames: usize,
    pub events: usize,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Entry {
    Header(Box<Header>),
    Frame(Box<Frame>),
    Event(Box<EventEntry>),
    Footer(Footer),
}

/// A complete record in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub header: Header,
    pub frames: Vec<Frame>,
    pub events: Vec<EventEntry>,
    pub footer: Option<Footer>,
}

impl TrajectoryRecord {
    pub fn read(path: &Path) -> Result<Self> {
        let mut file = File::open(path)?;
        let mut magic = [0u8; 8];
        let n = file.read(&mut magic)?;
        drop(file);
        let entries = if n == 8 && &magic == MAGIC {
            read_binary(path)?
        } else {
            read_ndjson(path)?
        };
        TrajectoryRecord::from_entries(entries)
    }

    pub fn from_entries(entries: Vec<Entry>) -> Result<Self> {
        let mut it = entries.into_iter();
        let header = match it.next() {
            Some(Entry::Header(h)) => *h,
            _ => return Err(Error::Schema { expected: SCHEMA_VERSION, found: "no header".into() }),
        };
        if header.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema {
                expected: SCHEMA_VERSION,
                found: header.schema_version.to_string(),
            });
        }
        let mut rec = TrajectoryRecord { header, frames: vec![], events: vec![], footer: None };
        for e in it {
            match e {
                Entry::Frame(f) => rec.frames.push(*f),
                Entry::Event(e) => rec.events.push(*e),
                Entry::Footer(f) => rec.footer = Some(f),
                Entry::Header(_) => {
                    return Err(Error::Schema { expected: SCHEMA_VERSION, found: "second header".into() })
                }
            }
        }
        Ok(rec)
    }
}

fn schema_probe(line: &str) -> Result<()> {
    // Report a version mismatch before trying to parse the full header.
    let v: serde_json::Value = serde_json::from_str(line)?;
    match v.get("schema_version").and_then(|x| x.as_u64()) {
        Some(x) if x == SCHEMA_VERSION as u64 => Ok(()),
        Some(x) => Err(Error::Schema { expected: SCHEMA_VERSION, found: x.to_string() }),
        None => Err(Error::Schema { expected: SCHEMA_VERSION, found: "missing".into() }),
    }
}

fn read_ndjson(path: &Path) -> Result<Vec<Entry>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 {
            schema_probe(&line)?;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

fn read_binary(path: &Path) -> Result<Vec<Entry>> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let mut pos = MAGIC.len();
    let mut out = Vec::new();
    let corrupt = || Error::Schema { expected: SCHEMA_VERSION, found: "truncated binary record".into() };
    while pos < bytes.len() {
        if pos + 5 > bytes.len() {
            return Err(corrupt());
        }
        let tag = bytes[pos];
        let len = u32::from_le_bytes(bytes[pos + 1..pos + 5].try_into().unwrap()) as usize;
        pos += 5;
        let payload = bytes.get(pos..pos + len).ok_or_else(corrupt)?;
        pos += len;
        let entry = match tag {
            TAG_HEADER => {
                let text = std::str::from_utf8(payload).map_err(|_| corrupt())?;
                schema_probe(text)?;
                Entry::Header(Box::new(serde_json::from_str(text)?))
            }
            TAG_FRAME => Entry::Frame(Box::new(Frame::decode(payload).ok_or_else(corrupt)?)),
            TAG_EVENT => Entry::Event(Box::new(serde_json::from_slice(payload)?)),
            TAG_FOOTER => Entry::Footer(serde_json::from_slice(payload)?),
            _ => return Err(corrupt()),
        };
        out.push(entry);
    }
    Ok(out)
}

impl Frame {
    /// Packed layout: t, then length-prefixed (u32) f64 arrays in field order,
    /// scalars as single f64, pair list as u32 pairs, warnings as JSON.
    pub fn encode(&self) -> Vec<u8> {
        let mut b = Vec::new();
        let f = |b: &mut Vec<u8>, x: f64| b.extend_from_slice(&x.to_le_bytes());
        let arr = |b: &mut Vec<u8>, xs: &[f64]| {
            b.extend_from_slice(&(xs.len() as u32).to_le_bytes());
            for x in xs {
                b.extend_from_slice(&x.to_le_bytes());
            }
        };
        f(&mut b, self.t);
        arr(&mut b, &self.positions.concat());
        arr(&mut b, &self.velocities.concat());
        arr(&mut b, &self.energies);
        arr(&mut b, &self.adiabatic_populations);
        b.extend_from_slice(&(self.orbital_populations.len() as u32).to_le_bytes());
        for p in &self.orbital_populations {
            arr(&mut b, p);
        }
        for x in [self.e_total, self.e_kinetic, self.e_electronic, self.bound_norm] {
            f(&mut b, x);
        }
        arr(&mut b, &self.norms);
        f(&mut b, self.max_cross_overlap);
        arr(&mut b, &self.absorbed);
        arr(&mut b, &self.channels);
        b.extend_from_slice(&(self.nonadiabatic_pairs.len() as u32).to_le_bytes());
        for [i, j] in &self.nonadiabatic_pairs {
            b.extend_from_slice(&(*i as u32).to_le_bytes());
            b.extend_from_slice(&(*j as u32).to_le_bytes());
        }
        arr(&mut b, &self.abar);
        arr(&mut b, &self.ebar);
        let w = serde_json::to_vec(&self.warnings).unwrap_or_default();
        b.extend_from_slice(&(w.len() as u32).to_le_bytes());
        b.extend_from_slice(&w);
        b
    }

    pub fn decode(bytes: &[u8]) -> Option<Frame> {
        struct Cursor<'a> {
            b: &'a [u8],
            pos: usize,
        }
        impl Cursor<'_> {
            fn u32(&mut self) -> Option<u32> {
                let v = u32::from_le_bytes(self.b.get(self.pos..self.pos + 4)?.try_into().ok()?);
                self.pos += 4;
                Some(v)
            }
            fn f64(&mut self) -> Option<f64> {
                let v = f64::from_le_bytes(self.b.get(self.pos..self.pos + 8)?.try_into().ok()?);
                self.pos += 8;
                Some(v)
            }
            fn arr(&mut self) -> Option<Vec<f64>> {
                let n = self.u32()? as usize;
                (0..n).map(|_| self.f64()).collect()
            }
        }
        let mut c = Cursor { b: bytes, pos: 0 };
        let triples = |v: Vec<f64>| v.chunks(3).map(|x| [x[0], x[1], x[2]]).collect::<Vec<_>>();
        let t = c.f64()?;
        let positions = triples(c.arr()?);
        let velocities = triples(c.arr()?);
        let energies = c.arr()?;
        let adiabatic_populations = c.arr()?;
        let n = c.u32()? as usize;
        let orbital_populations = (0..n).map(|_| c.arr()).collect::<Option<Vec<_>>>()?;
        let (e_total, e_kinetic, e_electronic, bound_norm) = (c.f64()?, c.f64()?, c.f64()?, c.f64()?);
        let norms = c.arr()?;
        let max_cross_overlap = c.f64()?;
        let absorbed = c.arr()?;
        let channels = c.arr()?;
        let np = c.u32()? as usize;
        let nonadiabatic_pairs = (0..np)
            .map(|_| Some([c.u32()? as usize, c.u32()? as usize]))
            .collect::<Option<Vec<_>>>()?;
        let a = c.arr()?;
        let e = c.arr()?;
        let wl = c.u32()? as usize;
        let warnings = serde_json::from_slice(c.b.get(c.pos..c.pos + wl)?).ok()?;
        Some(Frame {
            t,
            positions,
            velocities,
            energies,
            adiabatic_populations,
            orbital_populations,
            e_total,
            e_kinetic,
            e_electronic,
            bound_norm,
            norms,
            max_cross_overlap,
            absorbed,
            channels,
            nonadiabatic_pairs,
            abar: a.try_into().ok()?,
            ebar: e.try_into().ok()?,
            warnings,
        })
    }
}

/// Receives entries as a run produces them.
pub trait RecordSink {
    fn write(&mut self, entry: &Entry) -> Result<()>;
    fn finish(&mut self) -> Result<()> {
        Ok(())
    }
}

/// Keeps everything in memory.
#[derive(Debug, Default)]
pub struct MemorySink {
    pub entries: Vec<Entry>,
}

impl RecordSink for MemorySink {
    fn write(&mut self, entry: &Entry) -> Result<()> {
        self.entries.push(entry.clone());
        Ok(())
    }
}

pub struct FileSink {
    out: BufWriter<File>,
    format: RecordFormat,
}

impl FileSink {
    pub fn create(path: &Path, format: RecordFormat) -> Result<Self> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        let mut out = BufWriter::new(File::create(path)?);
        if format == RecordFormat::Binary {
            out.write_all(MAGIC)?;
        }
        Ok(FileSink { out, format })
    }
}

impl RecordSink for FileSink {
    fn write(&mut self, entry: &Entry) -> Result<()> {
        match self.format {
            RecordFormat::Ndjson => {
                serde_json::to_writer(&mut self.out, entry)?;
                self.out.write_all(b"\n")?;
            }
            RecordFormat::Binary => {
                let (tag, payload) = match entry {
                    Entry::Header(h) => (TAG_HEADER, serde_json::to_vec(h)?),
                    Entry::Frame(f) => (TAG_FRAME, f.encode()),
                    Entry::Event(e) => (TAG_EVENT, serde_json::to_vec(e)?),
                    Entry::Footer(f) => (TAG_FOOTER, serde_json::to_vec(f)?),
                };
                self.out.write_all(&[tag])?;
                self.out.write_all(&(payload.len() as u32).to_le_bytes())?;
                self.out.write_all(&payload)?;
            }
        }
        Ok(())
    }

    fn finish(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Writes to several sinks at once.
pub struct Tee<'a>(pub Vec<&'a mut dyn RecordSink>);

impl RecordSink for Tee<'_> {
    fn write(&mut self, entry: &Entry) -> Result<()> {
        for s in self.0.iter_mut() {
            s.write(entry)?;
        }
        Ok(())
    }

    fn finish(&mut self) -> Result<()> {
        for s in self.0.iter_mut() {
            s.finish()?;
        }
        Ok(())
    }
}
