use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{ensure, Error, Result};
use crate::scalar::{energy, Real};
use crate::wav::read_wav;

/// Equal-length exemplar vectors, each tagged with an identity label.
#[derive(Debug, Clone, PartialEq)]
pub struct ExemplarBank<T: Real> {
    exemplars: Vec<Vec<T>>,
    labels: Vec<usize>,
    identities: Vec<String>,
}

impl<T: Real> ExemplarBank<T> {
    pub fn new(exemplars: Vec<Vec<T>>, labels: Vec<usize>, identities: Vec<String>) -> Result<Self> {
        ensure!(!exemplars.is_empty(), Config, "exemplar bank is empty");
        ensure!(exemplars.len() == labels.len(), Shape, "one label per exemplar is required");
        let len = exemplars[0].len();
        ensure!(len > 0, Shape, "exemplars are empty");
        ensure!(exemplars.iter().all(|e| e.len() == len), Shape, "exemplars differ in length");
        ensure!(
            labels.iter().all(|&l| l < identities.len()),
            Config,
            "label out of range of the identity list"
        );
        for c in 0..identities.len() {
            ensure!(labels.contains(&c), Config, "identity '{}' has no exemplars", identities[c]);
        }
        Ok(Self { exemplars, labels, identities })
    }

    /// Bank with a single identity.
    pub fn single(exemplars: Vec<Vec<T>>, identity: &str) -> Result<Self> {
        let labels = vec![0; exemplars.len()];
        Self::new(exemplars, labels, vec![identity.to_string()])
    }

    pub fn exemplars(&self) -> &[Vec<T>] {
        &self.exemplars
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn identities(&self) -> &[String] {
        &self.identities
    }

    pub fn len(&self) -> usize {
        self.exemplars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exemplars.is_empty()
    }

    pub fn exemplar_len(&self) -> usize {
        self.exemplars[0].len()
    }

    pub fn of_identity(&self, label: usize) -> impl Iterator<Item = &[T]> {
        self.exemplars
            .iter()
            .zip(&self.labels)
            .filter(move |(_, &l)| l == label)
            .map(|(e, _)| e.as_slice())
    }

    pub fn rms(&self) -> T {
        let total: T = self.exemplars.iter().map(|e| energy(e)).sum();
        (total / T::of_usize(self.len() * self.exemplar_len())).sqrt()
    }

    /// Concatenates banks, keeping identities distinct.
    pub fn merge(banks: Vec<Self>) -> Result<Self> {
        let mut exemplars = Vec::new();
        let mut labels = Vec::new();
        let mut identities = Vec::new();
        for b in banks {
            let base = identities.len();
            exemplars.extend(b.exemplars);
            labels.extend(b.labels.into_iter().map(|l| l + base));
            identities.extend(b.identities);
        }
        Self::new(exemplars, labels, identities)
    }
}

fn wav_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav"))
        })
        .collect();
    out.sort();
    Ok(out)
}

fn cut<T: Real>(samples: Vec<T>, patch: Option<usize>) -> Vec<Vec<T>> {
    match patch {
        Some(p) => samples.chunks_exact(p).map(|c| c.to_vec()).collect(),
        None => vec![samples],
    }
}

/// Loads a bank from a directory of WAV segments. Each subdirectory is one identity; WAV files
/// directly inside `dir` form a single identity named after the directory. With `patch`, files
/// are cut into consecutive non-overlapping exemplars of that length.
pub fn load_bank_dir<T: Real>(dir: impl AsRef<Path>, patch: Option<usize>) -> Result<ExemplarBank<T>> {
    let dir = dir.as_ref();
    ensure!(patch != Some(0), Config, "patch length must be positive");
    let mut groups: Vec<(String, Vec<PathBuf>)> = Vec::new();
    let root_files = wav_files(dir)?;
    if !root_files.is_empty() {
        let name = dir.file_name().map_or("bank".into(), |n| n.to_string_lossy().into_owned());
        groups.push((name, root_files));
    }
    let mut subdirs: Vec<PathBuf> =
        fs::read_dir(dir)?.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_dir()).collect();
    subdirs.sort();
    for sub in subdirs {
        let files = wav_files(&sub)?;
        if !files.is_empty() {
            groups.push((sub.file_name().unwrap().to_string_lossy().into_owned(), files));
        }
    }
    ensure!(!groups.is_empty(), Config, "no WAV files found under {}", dir.display());
    let mut exemplars = Vec::new();
    let mut labels = Vec::new();
    let mut identities = Vec::new();
    for (label, (name, files)) in groups.into_iter().enumerate() {
        for f in files {
            let pieces = cut(read_wav::<T>(&f)?.into_samples(), patch);
            labels.extend(std::iter::repeat(label).take(pieces.len()));
            exemplars.extend(pieces);
        }
        identities.push(name);
    }
    ExemplarBank::new(exemplars, labels, identities)
}

/// Reads the binary bank format: little-endian `u32` count, `u32` length, then `count·length`
/// little-endian `f32` values. The result has a single identity.
pub fn load_bank_binary<T: Real>(path: impl AsRef<Path>) -> Result<ExemplarBank<T>> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    ensure!(bytes.len() >= 8, Parse, "bank header truncated");
    let count = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    let len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let expected = count
        .checked_mul(len)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Parse("bank header overflows".into()))?;
    ensure!(
        bytes.len() - 8 == expected,
        Parse,
        "bank body has {} bytes, header implies {}",
        bytes.len() - 8,
        expected
    );
    let values: Vec<T> = bytes[8..]
        .chunks_exact(4)
        .map(|c| T::of(f32::from_le_bytes(c.try_into().unwrap()) as f64))
        .collect();
    let exemplars = values.chunks(len.max(1)).map(|c| c.to_vec()).collect();
    let name = path.file_stem().map_or("bank".into(), |n| n.to_string_lossy().into_owned());
    ExemplarBank::single(exemplars, &name)
}

pub fn save_bank_binary<T: Real>(path: impl AsRef<Path>, bank: &ExemplarBank<T>) -> Result<()> {
    let mut out = Vec::with_capacity(8 + 4 * bank.len() * bank.exemplar_len());
    out.extend_from_slice(&(bank.len() as u32).to_le_bytes());
    out.extend_from_slice(&(bank.exemplar_len() as u32).to_le_bytes());
    for e in bank.exemplars() {
        for &v in e {
            out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    fs::File::create(path)?.write_all(&out)?;
    Ok(())
}
