//! On-disk MCMC chain layout. A chain directory holds:
//!
//! * `chain.bin`: magic `HDACHAIN`, `u32` header length, JSON [`ChainHeader`],
//!   then fixed-width little-endian records: `u64` iteration, `u8` move,
//!   `u8` accepted (0/1, 255 when the move has no accept step), `f64` log-likelihood,
//!   `f64 × P` parameters.
//! * `snapshots.bin`: `u64` iteration followed by one field block, every
//!   `thin` iterations.
//! * `scalars.csv`: the records as text.

use std::fs::{File, OpenOptions};
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::io::{self, FieldBlock};
use crate::spectral::{SpectralScalarField, SpectralVelocityField};

const MAGIC: &[u8; 8] = b"HDACHAIN";
const NOT_APPLICABLE: u8 = 255;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum MoveKind {
    Velocity = 0,
    Beta2 = 1,
    Alpha = 2,
    /// One full sweep of the advection-diffusion sampler.
    Sweep = 3,
}

impl MoveKind {
    pub fn from_u8(b: u8) -> Result<Self> {
        Ok(match b {
            0 => MoveKind::Velocity,
            1 => MoveKind::Beta2,
            2 => MoveKind::Alpha,
            3 => MoveKind::Sweep,
            _ => return Err(Error::Format(format!("unknown move code {b}"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            MoveKind::Velocity => "v",
            MoveKind::Beta2 => "beta2",
            MoveKind::Alpha => "alpha",
            MoveKind::Sweep => "sweep",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainHeader {
    pub format: String,
    pub version: String,
    /// `ns` or `spde`.
    pub case: String,
    pub n: usize,
    pub ordering_tag: u32,
    pub seed: u64,
    pub chain_index: u32,
    pub thin: usize,
    pub burn_in: usize,
    pub param_names: Vec<String>,
    pub config: serde_json::Value,
}

impl ChainHeader {
    pub fn record_len(&self) -> usize {
        8 + 1 + 1 + 8 + 8 * self.param_names.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainRecord {
    pub iteration: u64,
    pub move_kind: MoveKind,
    pub accepted: Option<bool>,
    pub loglik: f64,
    pub params: Vec<f64>,
}

impl ChainRecord {
    fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.iteration.to_le_bytes());
        out.push(self.move_kind as u8);
        out.push(match self.accepted {
            None => NOT_APPLICABLE,
            Some(a) => u8::from(a),
        });
        out.extend_from_slice(&self.loglik.to_le_bytes());
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
    }

    fn decode(buf: &[u8], params: usize) -> Result<Self> {
        let f = |o: usize| f64::from_le_bytes(buf[o..o + 8].try_into().unwrap());
        Ok(ChainRecord {
            iteration: u64::from_le_bytes(buf[..8].try_into().unwrap()),
            move_kind: MoveKind::from_u8(buf[8])?,
            accepted: match buf[9] {
                NOT_APPLICABLE => None,
                0 => Some(false),
                1 => Some(true),
                b => return Err(Error::Format(format!("bad accept flag {b}"))),
            },
            loglik: f(10),
            params: (0..params).map(|i| f(18 + 8 * i)).collect(),
        })
    }
}

/// A field snapshot, tagged with its iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub iteration: u64,
    pub field: FieldBlock,
}

/// Byte lengths of the three chain files; a checkpoint stores these so a
/// resumed run can truncate anything written after it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainOffsets {
    pub records: u64,
    pub snapshots: u64,
    pub csv: u64,
}

pub struct ChainWriter {
    header: ChainHeader,
    dir: PathBuf,
    records: BufWriter<File>,
    snapshots: BufWriter<File>,
    csv: BufWriter<File>,
    buf: Vec<u8>,
}

fn paths(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    (dir.join("chain.bin"), dir.join("snapshots.bin"), dir.join("scalars.csv"))
}

impl ChainWriter {
    pub fn create(dir: &Path, header: ChainHeader) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let (rp, sp, cp) = paths(dir);
        let mut records = BufWriter::new(File::create(rp)?);
        let json = serde_json::to_vec(&header)?;
        records.write_all(MAGIC)?;
        records.write_all(&(json.len() as u32).to_le_bytes())?;
        records.write_all(&json)?;
        let snapshots = BufWriter::new(File::create(sp)?);
        let mut csv = BufWriter::new(File::create(cp)?);
        write!(csv, "iteration,move,accepted,loglik")?;
        for name in &header.param_names {
            write!(csv, ",{name}")?;
        }
        writeln!(csv)?;
        Ok(ChainWriter {
            header,
            dir: dir.to_path_buf(),
            records,
            snapshots,
            csv,
            buf: Vec::new(),
        })
    }

    /// Reopens an existing chain, discarding bytes past `offsets`.
    pub fn resume(dir: &Path, offsets: ChainOffsets) -> Result<Self> {
        let header = read_header(&mut BufReader::new(File::open(dir.join("chain.bin"))?))?.0;
        let (rp, sp, cp) = paths(dir);
        let open = |p: &Path, len: u64| -> Result<BufWriter<File>> {
            let mut f = OpenOptions::new().write(true).open(p)?;
            if f.metadata()?.len() < len {
                return Err(Error::Checkpoint(format!("{} is shorter than the checkpoint", p.display())));
            }
            f.set_len(len)?;
            f.seek(SeekFrom::End(0))?;
            Ok(BufWriter::new(f))
        };
        Ok(ChainWriter {
            records: open(&rp, offsets.records)?,
            snapshots: open(&sp, offsets.snapshots)?,
            csv: open(&cp, offsets.csv)?,
            header,
            dir: dir.to_path_buf(),
            buf: Vec::new(),
        })
    }

    pub fn header(&self) -> &ChainHeader {
        &self.header
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn append(&mut self, r: &ChainRecord) -> Result<()> {
        if r.params.len() != self.header.param_names.len() {
            return Err(Error::DimensionMismatch(format!(
                "record has {} parameters, header names {}",
                r.params.len(),
                self.header.param_names.len()
            )));
        }
        self.buf.clear();
        r.encode(&mut self.buf);
        self.records.write_all(&self.buf)?;
        let acc = match r.accepted {
            None => "",
            Some(true) => "1",
            Some(false) => "0",
        };
        write!(self.csv, "{},{},{},{:e}", r.iteration, r.move_kind.name(), acc, r.loglik)?;
        for p in &r.params {
            write!(self.csv, ",{p:e}")?;
        }
        writeln!(self.csv)?;
        Ok(())
    }

    pub fn snapshot_velocity(&mut self, iteration: u64, v: &SpectralVelocityField) -> Result<()> {
        self.snapshots.write_all(&iteration.to_le_bytes())?;
        io::write_velocity(&mut self.snapshots, v)
    }

    pub fn snapshot_scalar(&mut self, iteration: u64, s: &SpectralScalarField) -> Result<()> {
        self.snapshots.write_all(&iteration.to_le_bytes())?;
        io::write_scalar(&mut self.snapshots, s)
    }

    /// Flushes and returns current file lengths.
    pub fn flush(&mut self) -> Result<ChainOffsets> {
        self.records.flush()?;
        self.snapshots.flush()?;
        self.csv.flush()?;
        Ok(ChainOffsets {
            records: self.records.get_ref().metadata()?.len(),
            snapshots: self.snapshots.get_ref().metadata()?.len(),
            csv: self.csv.get_ref().metadata()?.len(),
        })
    }
}

fn read_header<R: Read>(r: &mut R) -> Result<(ChainHeader, usize)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a chain file".into()));
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let len = u32::from_le_bytes(len) as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)?;
    Ok((serde_json::from_slice(&json)?, 12 + len))
}

#[derive(Clone, Debug)]
pub struct Chain {
    pub header: ChainHeader,
    pub records: Vec<ChainRecord>,
    pub snapshots: Vec<Snapshot>,
}

impl Chain {
    /// Values of parameter `name` for every record.
    pub fn param(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.param_names.iter().position(|p| p == name)?;
        Some(self.records.iter().map(|r| r.params[i]).collect())
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

pub fn read_chain(dir: &Path) -> Result<Chain> {
    let (rp, sp, _) = paths(dir);
    if !rp.exists() {
        return Err(Error::Format(format!("no chain file in {}", dir.display())));
    }
    let mut r = BufReader::new(File::open(rp)?);
    let (header, _) = read_header(&mut r)?;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    let rl = header.record_len();
    if rest.len() % rl != 0 {
        return Err(Error::Format("truncated chain record".into()));
    }
    let records = rest
        .chunks_exact(rl)
        .map(|c| ChainRecord::decode(c, header.param_names.len()))
        .collect::<Result<Vec<_>>>()?;

    let mut s = BufReader::new(File::open(sp)?);
    let lattice = crate::spectral::WavenumberSet::shared(header.n)?;
    let mut snapshots = Vec::new();
    loop {
        let mut it = [0u8; 8];
        match s.read_exact(&mut it) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        snapshots.push(Snapshot {
            iteration: u64::from_le_bytes(it),
            field: io::read_block(&mut s, Some(&lattice))?,
        });
    }
    Ok(Chain {
        header,
        records,
        snapshots,
    })
}
