//! Feature grids: file formats, synthetic objects and traversal protocols.
//!
//! # FGRD binary layout (little-endian)
//!
//! | bytes | field                                  |
//! |-------|----------------------------------------|
//! | 4     | magic `FGRD`                           |
//! | 2     | version (`1`)                          |
//! | 4     | example count                          |
//! | 2     | grid side (`5`)                        |
//! | 2     | feature dimension (`128`)              |
//! | 2     | active bits per feature (`19`)         |
//!
//! followed, per example, by one label byte and `side^2` runs of `k` `u16`
//! indices, each run strictly ascending. Positions are row-major.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, FormatError, FormatErrorKind, Result};
use crate::sdr::Sdr;

pub const MAGIC: &[u8; 4] = b"FGRD";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Synthetic,
    Encoded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridLayout {
    pub grid_side: usize,
    pub feature_dim: usize,
    pub active_bits: usize,
}

impl Default for GridLayout {
    fn default() -> Self {
        Self { grid_side: 5, feature_dim: 128, active_bits: 19 }
    }
}

impl GridLayout {
    pub fn num_positions(&self) -> usize {
        self.grid_side * self.grid_side
    }

    fn record_len(&self) -> usize {
        1 + 2 * self.num_positions() * self.active_bits
    }
}

/// A labelled side x side grid of sparse binary features.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureGrid {
    pub label: u8,
    pub source: Source,
    /// Row-major, `side^2` entries.
    pub features: Vec<Sdr>,
}

impl FeatureGrid {
    pub fn label(&self) -> usize {
        self.label as usize
    }

    pub fn validate(&self, layout: &GridLayout) -> Result<()> {
        if self.features.len() != layout.num_positions() {
            return Err(Error::DimensionMismatch {
                expected: layout.num_positions(),
                found: self.features.len(),
            });
        }
        for f in &self.features {
            if f.dimension() != layout.feature_dim {
                return Err(Error::DimensionMismatch { expected: layout.feature_dim, found: f.dimension() });
            }
            if f.cardinality() != layout.active_bits {
                return Err(Error::InvalidConfig(format!(
                    "feature has {} active bits, expected {}",
                    f.cardinality(),
                    layout.active_bits
                )));
            }
        }
        Ok(())
    }
}

fn fmt_err(record: Option<usize>, offset: usize, kind: FormatErrorKind) -> Error {
    Error::Format(FormatError { record, offset: offset as u64, kind })
}

pub fn encode_fgrd(grids: &[FeatureGrid], layout: &GridLayout) -> Result<Vec<u8>> {
    for (name, v) in [
        ("grid side", layout.grid_side),
        ("feature dimension", layout.feature_dim),
        ("active bits", layout.active_bits),
    ] {
        if v > u16::MAX as usize {
            return Err(Error::InvalidConfig(format!("{name} does not fit the format")));
        }
    }
    let mut out = Vec::with_capacity(HEADER_LEN + grids.len() * layout.record_len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(grids.len() as u32).to_le_bytes());
    out.extend_from_slice(&(layout.grid_side as u16).to_le_bytes());
    out.extend_from_slice(&(layout.feature_dim as u16).to_le_bytes());
    out.extend_from_slice(&(layout.active_bits as u16).to_le_bytes());
    for g in grids {
        g.validate(layout)?;
        out.push(g.label);
        for f in &g.features {
            for &i in f.active() {
                out.extend_from_slice(&(i as u16).to_le_bytes());
            }
        }
    }
    Ok(out)
}

/// Parses an FGRD buffer; every grid is tagged with `source`.
pub fn decode_fgrd(bytes: &[u8], source: Source) -> Result<(GridLayout, Vec<FeatureGrid>)> {
    let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(fmt_err(None, 0, FormatErrorKind::BadMagic));
    }
    if bytes.len() < HEADER_LEN {
        return Err(fmt_err(None, bytes.len(), FormatErrorKind::Truncated));
    }
    let version = u16_at(4);
    if version != VERSION {
        return Err(fmt_err(None, 4, FormatErrorKind::UnsupportedVersion(version)));
    }
    let count = u32::from_le_bytes([bytes[6], bytes[7], bytes[8], bytes[9]]) as usize;
    let layout = GridLayout {
        grid_side: u16_at(10) as usize,
        feature_dim: u16_at(12) as usize,
        active_bits: u16_at(14) as usize,
    };
    if layout.grid_side == 0 {
        return Err(fmt_err(None, 10, FormatErrorKind::HeaderMismatch("grid side")));
    }
    if layout.feature_dim == 0 {
        return Err(fmt_err(None, 12, FormatErrorKind::HeaderMismatch("feature dimension")));
    }
    if layout.active_bits > layout.feature_dim {
        return Err(fmt_err(None, 14, FormatErrorKind::HeaderMismatch("active bits")));
    }

    let rec_len = layout.record_len();
    let mut grids = Vec::with_capacity(count.min(1 << 20));
    let mut off = HEADER_LEN;
    for r in 0..count {
        if bytes.len() < off + rec_len {
            return Err(fmt_err(Some(r), bytes.len(), FormatErrorKind::Truncated));
        }
        let label = bytes[off];
        off += 1;
        let mut features = Vec::with_capacity(layout.num_positions());
        for _ in 0..layout.num_positions() {
            let mut idx = Vec::with_capacity(layout.active_bits);
            for _ in 0..layout.active_bits {
                let v = u16_at(off) as u32;
                if v as usize >= layout.feature_dim {
                    return Err(fmt_err(Some(r), off, FormatErrorKind::IndexOutOfRange(v)));
                }
                if let Some(&prev) = idx.last() {
                    if v == prev {
                        return Err(fmt_err(Some(r), off, FormatErrorKind::Duplicate(v)));
                    }
                    if v < prev {
                        return Err(fmt_err(Some(r), off, FormatErrorKind::Unsorted));
                    }
                }
                idx.push(v);
                off += 2;
            }
            features.push(Sdr::from_sorted_unchecked(layout.feature_dim, idx));
        }
        grids.push(FeatureGrid { label, source, features });
    }
    if off != bytes.len() {
        return Err(fmt_err(None, off, FormatErrorKind::Syntax("trailing bytes after last record".into())));
    }
    Ok((layout, grids))
}

pub fn save_fgrd(path: impl AsRef<Path>, grids: &[FeatureGrid], layout: &GridLayout) -> Result<()> {
    fs::write(path, encode_fgrd(grids, layout)?)?;
    Ok(())
}

pub fn load_fgrd(path: impl AsRef<Path>) -> Result<(GridLayout, Vec<FeatureGrid>)> {
    decode_fgrd(&fs::read(path)?, Source::Encoded)
}

#[derive(Serialize, Deserialize)]
struct JsonGrid {
    label: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source: Option<Source>,
    features: Vec<Vec<u32>>,
}

pub fn write_jsonl<W: Write>(mut w: W, grids: &[FeatureGrid]) -> Result<()> {
    for g in grids {
        let rec = JsonGrid {
            label: g.label,
            source: Some(g.source),
            features: g.features.iter().map(|f| f.active().to_vec()).collect(),
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads one grid per non-empty line. Errors carry the record index and the
/// one-based line number.
pub fn read_jsonl<R: BufRead>(r: R, layout: &GridLayout) -> Result<Vec<FeatureGrid>> {
    let mut grids = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = grids.len();
        let err = |kind| fmt_err(Some(record), lineno + 1, kind);
        let rec: JsonGrid =
            serde_json::from_str(&line).map_err(|e| err(FormatErrorKind::Syntax(e.to_string())))?;
        if rec.features.len() != layout.num_positions() {
            return Err(err(FormatErrorKind::WrongCount {
                expected: layout.num_positions(),
                found: rec.features.len(),
            }));
        }
        let mut features = Vec::with_capacity(rec.features.len());
        for idx in rec.features {
            if idx.len() != layout.active_bits {
                return Err(err(FormatErrorKind::WrongCount { expected: layout.active_bits, found: idx.len() }));
            }
            for (i, &v) in idx.iter().enumerate() {
                if v as usize >= layout.feature_dim {
                    return Err(err(FormatErrorKind::IndexOutOfRange(v)));
                }
                if i > 0 && v == idx[i - 1] {
                    return Err(err(FormatErrorKind::Duplicate(v)));
                }
                if i > 0 && v < idx[i - 1] {
                    return Err(err(FormatErrorKind::Unsorted));
                }
            }
            features.push(Sdr::from_sorted_unchecked(layout.feature_dim, idx));
        }
        grids.push(FeatureGrid {
            label: rec.label,
            source: rec.source.unwrap_or(Source::Encoded),
            features,
        });
    }
    Ok(grids)
}

/// Loads either format, chosen by extension (`.jsonl`/`.json` or binary).
pub fn load_grids(path: impl AsRef<Path>) -> Result<(GridLayout, Vec<FeatureGrid>)> {
    let path = path.as_ref();
    if let Err(e) = fs::metadata(path) {
        return Err(Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))));
    }
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") | Some("json") => {
            let layout = GridLayout::default();
            let grids = read_jsonl(BufReader::new(fs::File::open(path)?), &layout)?;
            Ok((layout, grids))
        }
        _ => load_fgrd(path),
    }
}

pub fn save_grids(path: impl AsRef<Path>, grids: &[FeatureGrid], layout: &GridLayout) -> Result<()> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") | Some("json") => {
            for g in grids {
                g.validate(layout)?;
            }
            let mut w = std::io::BufWriter::new(fs::File::create(path)?);
            write_jsonl(&mut w, grids)?;
            w.flush()?;
            Ok(())
        }
        _ => save_fgrd(path, grids, layout),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub feature_pool_size: usize,
    /// Probability that a position of a sampled example carries a novel
    /// feature instead of its class feature.
    pub perturbation: f64,
    pub layout: GridLayout,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self { num_classes: 10, feature_pool_size: 40, perturbation: 0.0, layout: GridLayout::default() }
    }
}

impl SyntheticSpec {
    /// Parses `key=value` pairs separated by commas, e.g.
    /// `classes=10,pool=40,perturb=0.1`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut spec = Self::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("expected key=value, got {part:?}")))?;
            let bad = |_| Error::InvalidConfig(format!("bad value for {k}: {v:?}"));
            match k.trim() {
                "classes" => spec.num_classes = v.trim().parse().map_err(bad)?,
                "pool" => spec.feature_pool_size = v.trim().parse().map_err(bad)?,
                "perturb" => {
                    spec.perturbation = v.trim().parse().map_err(|_| Error::InvalidConfig(format!("bad value for {k}: {v:?}")))?
                }
                other => return Err(Error::InvalidConfig(format!("unknown synthetic key {other:?}"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_pool_size == 0 {
            return Err(Error::InvalidConfig("feature pool must not be empty".into()));
        }
        if self.num_classes == 0 || self.num_classes > 256 {
            return Err(Error::InvalidConfig("class count must be in 1..=256".into()));
        }
        if !(0.0..=1.0).contains(&self.perturbation) {
            return Err(Error::InvalidConfig("perturbation must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Class prototypes built from a shared pool of random features.
#[derive(Debug, Clone)]
pub struct SyntheticObjects {
    pub spec: SyntheticSpec,
    pub pool: Vec<Sdr>,
    /// `[class][position]` -> pool index.
    pub assignments: Vec<Vec<usize>>,
}

impl SyntheticObjects {
    /// Draws a pool of distinct features and deals them to every
    /// (class, position) slot from a reshuffled deck, so pool features are
    /// used evenly and are all distinct when the pool covers every slot.
    pub fn generate<R: Rng + ?Sized>(spec: &SyntheticSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let l = spec.layout;
        let mut pool: Vec<Sdr> = Vec::with_capacity(spec.feature_pool_size);
        while pool.len() < spec.feature_pool_size {
            let f = Sdr::random(l.feature_dim, l.active_bits, rng)?;
            if !pool.contains(&f) {
                pool.push(f);
            }
        }
        let mut deck: Vec<usize> = Vec::new();
        let assignments = (0..spec.num_classes)
            .map(|_| {
                (0..l.num_positions())
                    .map(|_| {
                        if deck.is_empty() {
                            deck = (0..spec.feature_pool_size).collect();
                            deck.shuffle(rng);
                        }
                        deck.pop().expect("refilled deck")
                    })
                    .collect()
            })
            .collect();
        Ok(Self { spec: spec.clone(), pool, assignments })
    }

    pub fn prototype(&self, label: usize) -> FeatureGrid {
        FeatureGrid {
            label: label as u8,
            source: Source::Synthetic,
            features: self.assignments[label].iter().map(|&i| self.pool[i].clone()).collect(),
        }
    }

    /// One example of class `label`: the prototype with each position
    /// independently replaced, with probability `perturbation`, by a freshly
    /// drawn random feature.
    pub fn sample<R: Rng + ?Sized>(&self, label: usize, rng: &mut R) -> FeatureGrid {
        let mut grid = self.prototype(label);
        if self.spec.perturbation > 0.0 {
            let l = self.spec.layout;
            for f in grid.features.iter_mut() {
                if rng.gen_bool(self.spec.perturbation) {
                    *f = Sdr::random(l.feature_dim, l.active_bits, rng).expect("k <= dimension");
                }
            }
        }
        grid
    }

    /// `per_class` examples of every class, class-major.
    pub fn dataset<R: Rng + ?Sized>(&self, per_class: usize, rng: &mut R) -> Vec<FeatureGrid> {
        (0..self.spec.num_classes)
            .flat_map(|y| (0..per_class).map(move |_| y))
            .map(|y| self.sample(y, rng))
            .collect()
    }
}

pub fn generate_synthetic_objects<R: Rng + ?Sized>(
    spec: &SyntheticSpec,
    examples_per_class: usize,
    rng: &mut R,
) -> Result<Vec<FeatureGrid>> {
    Ok(SyntheticObjects::generate(spec, rng)?.dataset(examples_per_class, rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProtocolKind {
    /// One permutation shared by every example, at training and test time.
    Fixed,
    /// A fresh permutation per example.
    Arbitrary,
    /// Arbitrary permutations, truncated to the first `n` positions at test time.
    Partial(usize),
}

impl ProtocolKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(Self::Fixed),
            "arbitrary" => Ok(Self::Arbitrary),
            _ => {
                let n = s
                    .strip_prefix("partial:")
                    .and_then(|n| n.parse().ok())
                    .ok_or_else(|| Error::InvalidConfig(format!("unknown protocol {s:?}")))?;
                if n == 0 {
                    return Err(Error::InvalidConfig("partial protocol needs at least 1 sensation".into()));
                }
                Ok(Self::Partial(n))
            }
        }
    }
}

impl std::fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Fixed => write!(f, "fixed"),
            Self::Arbitrary => write!(f, "arbitrary"),
            Self::Partial(n) => write!(f, "partial:{n}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SequenceProtocol {
    pub kind: ProtocolKind,
    pub seed: u64,
    pub num_positions: usize,
}

impl SequenceProtocol {
    pub fn new(kind: ProtocolKind, seed: u64, num_positions: usize) -> Self {
        Self { kind, seed, num_positions }
    }

    fn permutation(&self, stream: u64) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        let mut order: Vec<usize> = (0..self.num_positions).collect();
        order.shuffle(&mut rng);
        order
    }

    /// Full traversal order for example `index` of `split`.
    pub fn order(&self, split: Split, index: usize) -> Vec<usize> {
        match self.kind {
            ProtocolKind::Fixed => self.permutation(0),
            ProtocolKind::Arbitrary | ProtocolKind::Partial(_) => {
                let tag = match split {
                    Split::Train => 1u64 << 62,
                    Split::Test => 2u64 << 62,
                };
                self.permutation(tag | index as u64)
            }
        }
    }

    /// Number of sensations available at test time.
    pub fn max_sensations(&self) -> usize {
        match self.kind {
            ProtocolKind::Partial(n) => n.min(self.num_positions),
            _ => self.num_positions,
        }
    }
}
