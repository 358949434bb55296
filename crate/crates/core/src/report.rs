//! Table serialization and the end-to-end pipeline.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::ccgp::{ccgp_table, CcgpParams, CcgpTable};
use crate::corpus::{Axis, Corpus, Space};
use crate::embed::{emit_scatter_svg, herb_embedding, rgb_colors, ColorCode, Embedding};
use crate::error::{Error, Result};
use crate::geometry::{dimension_variance, permutation_test, LabeledVectors, VarianceKind};
use crate::herbtree::{depth_sweep, TreeReport, DEFAULT_DEPTHS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceRow {
    pub axis: String,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbstractionRow {
    pub axis: String,
    pub space: String,
    pub index: f64,
    pub p_value: f64,
    pub n_permutations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingRow {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

/// Writes `rows` to `dir/<stem>.<ext>` and returns the path.
pub fn write_table<T: Serialize>(rows: &[T], dir: &Path, stem: &str, format: OutputFormat) -> Result<PathBuf> {
    let path = dir.join(format!("{stem}.{}", format.extension()));
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_path(&path)?;
            for r in rows {
                w.serialize(r)?;
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
        }
        OutputFormat::Json => {
            let mut text = serde_json::to_string_pretty(rows)?;
            text.push('\n');
            fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
    }
    Ok(path)
}

pub fn variance_rows(corpus: &Corpus) -> Result<Vec<VarianceRow>> {
    let v = dimension_variance(corpus, VarianceKind::Population)?;
    Ok(Axis::ALL
        .iter()
        .map(|a| VarianceRow {
            axis: a.name().to_string(),
            variance: v[a.index()],
        })
        .collect())
}

pub fn abstraction_rows(corpus: &Corpus, space: Space, permutations: usize, seed: u64) -> Result<Vec<AbstractionRow>> {
    Axis::ALL
        .iter()
        .map(|&axis| {
            let data = LabeledVectors::from_corpus(corpus, space, axis)?;
            let r = permutation_test(&data, permutations, seed)?;
            Ok(AbstractionRow {
                axis: axis.name().to_string(),
                space: space.name().to_string(),
                index: r.index,
                p_value: r.p_value,
                n_permutations: r.n_permutations,
            })
        })
        .collect()
}

pub fn embedding_rows(corpus: &Corpus, embedding: &Embedding, colors: &[ColorCode]) -> Vec<EmbeddingRow> {
    corpus
        .provisions()
        .iter()
        .zip(embedding.coords.rows())
        .zip(colors)
        .map(|((p, c), col)| EmbeddingRow {
            id: p.id.clone(),
            x: c[0],
            y: c[1],
            z: c[2],
            r: col.r,
            g: col.g,
            b: col.b,
        })
        .collect()
}

/// Writes one scatter per axis pair and returns the paths.
pub fn write_manifold_svgs(corpus: &Corpus, colors: &[ColorCode], dir: &Path) -> Result<Vec<PathBuf>> {
    Axis::pairs()
        .iter()
        .map(|&(a, b)| {
            let path = dir.join(format!("manifold_{}_vs_{}.svg", a.key(), b.key()));
            emit_scatter_svg(corpus, a, b, colors, &path)?;
            Ok(path)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub iterations: usize,
    pub permutations: usize,
    pub sample_size: Option<usize>,
    pub depths: Vec<usize>,
    pub c: f64,
    pub min_samples_split: usize,
    pub format: OutputFormat,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 42,
            iterations: 1000,
            permutations: 10_000,
            sample_size: None,
            depths: DEFAULT_DEPTHS.to_vec(),
            c: 1.0,
            min_samples_split: 2,
            format: OutputFormat::Csv,
        }
    }
}

impl PipelineConfig {
    pub fn ccgp_params(&self) -> CcgpParams {
        CcgpParams {
            sample_size: self.sample_size,
            n_iterations: self.iterations,
            c: self.c,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

pub fn manifest_entry(path: &Path) -> Result<ManifestEntry> {
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(ManifestEntry {
        file: path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        sha256: hex::encode(Sha256::digest(&data)),
        bytes: data.len() as u64,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineReport {
    pub variance: Vec<VarianceRow>,
    pub abstraction_symptom: Vec<AbstractionRow>,
    pub abstraction_herb: Vec<AbstractionRow>,
    pub ccgp_symptom: CcgpTable,
    pub ccgp_herb: CcgpTable,
    pub tree_symptom: Vec<TreeReport>,
    pub tree_concat: Vec<TreeReport>,
    /// Every emitted file except `manifest.json` itself.
    pub manifest: Vec<ManifestEntry>,
}

/// Runs every analysis and writes the tables, the herb embedding, three
/// manifold cross-sections and `manifest.json` into `out_dir`.
pub fn run_pipeline(corpus: &Corpus, config: &PipelineConfig, out_dir: &Path) -> Result<PipelineReport> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let fmt = config.format;
    let mut files = Vec::new();

    let variance = variance_rows(corpus)?;
    files.push(write_table(&variance, out_dir, "variance", fmt)?);

    let abstraction_symptom = abstraction_rows(corpus, Space::Symptom, config.permutations, config.seed)?;
    files.push(write_table(&abstraction_symptom, out_dir, "abstraction_symptom", fmt)?);
    let abstraction_herb = abstraction_rows(corpus, Space::Herb, config.permutations, config.seed)?;
    files.push(write_table(&abstraction_herb, out_dir, "abstraction_herb", fmt)?);

    let params = config.ccgp_params();
    let ccgp_symptom = ccgp_table(corpus, Space::Symptom, &params)?;
    files.push(write_table(&ccgp_symptom.rows(), out_dir, "ccgp_symptom", fmt)?);
    let ccgp_herb = ccgp_table(corpus, Space::Herb, &params)?;
    files.push(write_table(&ccgp_herb.rows(), out_dir, "ccgp_herb", fmt)?);

    let tree_symptom = depth_sweep(corpus, &config.depths, false, config.min_samples_split)?;
    let rows: Vec<_> = tree_symptom.iter().map(TreeReport::to_row).collect();
    files.push(write_table(&rows, out_dir, "tree_symptom", fmt)?);
    let tree_concat = depth_sweep(corpus, &config.depths, true, config.min_samples_split)?;
    let rows: Vec<_> = tree_concat.iter().map(TreeReport::to_row).collect();
    files.push(write_table(&rows, out_dir, "tree_concat", fmt)?);

    let embedding = herb_embedding(corpus)?;
    let colors = rgb_colors(&embedding);
    files.push(write_table(
        &embedding_rows(corpus, &embedding, &colors),
        out_dir,
        "embedding",
        fmt,
    )?);
    files.extend(write_manifold_svgs(corpus, &colors, out_dir)?);

    let manifest = files.iter().map(|p| manifest_entry(p)).collect::<Result<Vec<_>>>()?;
    let manifest_path = out_dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))?;

    Ok(PipelineReport {
        variance,
        abstraction_symptom,
        abstraction_herb,
        ccgp_symptom,
        ccgp_herb,
        tree_symptom,
        tree_concat,
        manifest,
    })
}
