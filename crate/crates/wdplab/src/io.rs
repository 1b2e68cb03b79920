//! JSON file formats: instances, allocations, labeled instances, datasets
//! (JSON lines) and models.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use wdplab_core::gnn::{GnnModel, ModelFile};
use wdplab_core::model::evaluate_allocation;
use wdplab_core::samples::{LabeledInstance, SampleSource, TrainingSample};
use wdplab_core::{Allocation, AuctionInstance};

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    serde_json::from_reader(BufReader::new(file)).with_context(|| format!("malformed JSON in {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Reads an instance and rejects it unless every invariant holds.
pub fn read_instance(path: &Path) -> Result<AuctionInstance> {
    let inst: AuctionInstance = read_json(path)?;
    check_instance(&inst).with_context(|| format!("invalid instance {}", path.display()))?;
    Ok(inst)
}

fn check_instance(inst: &AuctionInstance) -> Result<()> {
    let violations = inst.validate();
    if let Some(first) = violations.first() {
        bail!("{first} ({} violation(s))", violations.len());
    }
    Ok(())
}

pub fn write_instance(path: &Path, inst: &AuctionInstance) -> Result<()> {
    write_json(path, inst)
}

/// All `*.json` files of a directory, sorted by file name.
pub fn json_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("cannot list {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.extension().is_some_and(|e| e == "json"));
    files.sort();
    Ok(files)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationFile {
    pub decisions: Vec<u8>,
    pub revenue: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proven_optimal: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gnn_calls: Option<usize>,
}

impl AllocationFile {
    pub fn new(instance: &AuctionInstance, alloc: &Allocation) -> Result<Self> {
        let eval = evaluate_allocation(instance, alloc)?;
        Ok(AllocationFile { decisions: alloc.bits(), revenue: eval.revenue, proven_optimal: None, gnn_calls: None })
    }

    pub fn allocation(&self) -> Result<Allocation> {
        ensure!(self.decisions.iter().all(|&d| d <= 1), "decisions must be 0 or 1");
        Ok(Allocation::from_bits(&self.decisions))
    }
}

pub fn write_allocation(path: &Path, file: &AllocationFile) -> Result<()> {
    write_json(path, file)
}

pub fn read_allocation(path: &Path) -> Result<AllocationFile> {
    read_json(path)
}

/// An instance together with its exact label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelFile {
    pub instance: AuctionInstance,
    pub allocation: AllocationFile,
    pub proven_optimal: bool,
}

impl LabelFile {
    pub fn new(labeled: &LabeledInstance) -> Result<Self> {
        Ok(LabelFile {
            instance: labeled.instance.clone(),
            allocation: AllocationFile::new(&labeled.instance, &labeled.allocation)?,
            proven_optimal: labeled.optimal,
        })
    }

    pub fn labeled(&self) -> Result<LabeledInstance> {
        check_instance(&self.instance)?;
        let allocation = self.allocation.allocation()?;
        let eval = evaluate_allocation(&self.instance, &allocation)?;
        ensure!(eval.feasible, "label of {} is infeasible", self.instance.name);
        Ok(LabeledInstance { instance: self.instance.clone(), allocation, optimal: self.proven_optimal })
    }
}

pub fn write_label(path: &Path, labeled: &LabeledInstance) -> Result<()> {
    write_json(path, &LabelFile::new(labeled)?)
}

pub fn read_label(path: &Path) -> Result<LabeledInstance> {
    let file: LabelFile = read_json(path)?;
    file.labeled().with_context(|| format!("bad label file {}", path.display()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Source {
    Optimal,
    Suboptimal,
}

#[derive(Serialize, Deserialize)]
struct DatasetRecord {
    instance: AuctionInstance,
    label_index: usize,
    source: Source,
}

/// Writes one JSON document per line.
pub fn write_dataset(path: &Path, samples: &[TrainingSample]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    for s in samples {
        let source = match s.source {
            SampleSource::Optimal => Source::Optimal,
            SampleSource::Suboptimal => Source::Suboptimal,
        };
        let rec = DatasetRecord { instance: s.state.clone(), label_index: s.label, source };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Vec<TrainingSample>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DatasetRecord =
            serde_json::from_str(&line).with_context(|| format!("{}:{}: malformed record", path.display(), n + 1))?;
        ensure!(
            rec.label_index < rec.instance.num_bids(),
            "{}:{}: label {} out of range",
            path.display(),
            n + 1,
            rec.label_index
        );
        let source = match rec.source {
            Source::Optimal => SampleSource::Optimal,
            Source::Suboptimal => SampleSource::Suboptimal,
        };
        out.push(TrainingSample { state: rec.instance, label: rec.label_index, source });
    }
    Ok(out)
}

pub fn save_model(path: &Path, model: &GnnModel) -> Result<()> {
    write_json(path, &model.to_file())
}

pub fn load_model(path: &Path) -> Result<GnnModel> {
    let file: ModelFile = read_json(path)?;
    GnnModel::from_file(&file).with_context(|| format!("cannot load model {}", path.display()))
}
