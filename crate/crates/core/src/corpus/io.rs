//! Corpus file formats.
//!
//! * corpus: JSON Lines, one provision per line:
//!   `{"id": "...", "symptoms": [...], "herbs": [...], "scores": {"ext_int": i, "cold_heat": i, "def_exc": i}}`
//! * vocabularies: UTF-8, one token per line, index = 0-based line number
//! * category map: CSV with header `token,category`

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BitVector, CategoryMap, Corpus, PatternScores, ProvisionDraft, Vocabulary};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusPaths {
    pub corpus: PathBuf,
    pub symptom_vocab: PathBuf,
    pub herb_vocab: PathBuf,
    pub category_map: Option<PathBuf>,
}

impl CorpusPaths {
    /// Conventional file names inside `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        CorpusPaths {
            corpus: dir.join("corpus.jsonl"),
            symptom_vocab: dir.join("symptoms.txt"),
            herb_vocab: dir.join("herbs.txt"),
            category_map: Some(dir.join("categories.csv")),
        }
    }
}

#[derive(Deserialize)]
struct RecordIn {
    id: String,
    symptoms: Vec<String>,
    herbs: Vec<String>,
    scores: ScoresIn,
}

#[derive(Deserialize)]
struct ScoresIn {
    ext_int: serde_json::Number,
    cold_heat: serde_json::Number,
    def_exc: serde_json::Number,
}

#[derive(Serialize)]
struct RecordOut<'a> {
    id: &'a str,
    symptoms: Vec<&'a str>,
    herbs: Vec<&'a str>,
    scores: &'a PatternScores,
}

pub fn read_vocabulary(path: &Path) -> Result<Vocabulary> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut tokens = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let token = line.strip_suffix('\r').unwrap_or(line);
        let reason = if token.is_empty() {
            Some("empty token".to_string())
        } else if !seen.insert(token) {
            Some(format!("duplicate token {token:?}"))
        } else {
            None
        };
        if let Some(reason) = reason {
            return Err(Error::InvalidVocabulary {
                path: path.to_path_buf(),
                line: i + 1,
                reason,
            });
        }
        tokens.push(token.to_string());
    }
    Ok(Vocabulary::new(tokens).expect("duplicates rejected above"))
}

pub fn read_category_map(path: &Path, raw: &Vocabulary) -> Result<CategoryMap> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "token" || &headers[1] != "category" {
        return Err(Error::InvalidVocabulary {
            path: path.to_path_buf(),
            line: 1,
            reason: "expected header `token,category`".into(),
        });
    }
    let rows: Vec<(String, String)> = reader
        .records()
        .map(|r| r.map(|r| (r[0].to_string(), r[1].to_string())))
        .collect::<std::result::Result<_, _>>()?;
    CategoryMap::from_entries(raw, rows.iter().map(|(t, c)| (t.as_str(), c.as_str()))).map_err(|token| {
        Error::UnknownToken {
            provision: format!("<category map {}>", path.display()),
            kind: "symptom",
            token,
        }
    })
}

fn score_value(id: &str, axis: super::Axis, n: &serde_json::Number) -> Result<i64> {
    let err = || Error::ScoreOutOfRange {
        provision: id.to_string(),
        axis,
        value: n.to_string(),
    };
    if let Some(v) = n.as_i64() {
        return Ok(v);
    }
    match n.as_f64() {
        Some(f) if f.fract() == 0.0 && f.abs() <= 3.0 => Ok(f as i64),
        _ => Err(err()),
    }
}

fn encode(id: &str, tokens: &[String], vocab: &Vocabulary, kind: &'static str) -> Result<BitVector> {
    let mut bits = BitVector::zeros(vocab.len());
    for t in tokens {
        let i = vocab.get(t).ok_or_else(|| Error::UnknownToken {
            provision: id.to_string(),
            kind,
            token: t.clone(),
        })?;
        bits.set(i);
    }
    Ok(bits)
}

/// Reads and validates a corpus. Without a category map every raw symptom
/// is its own category.
pub fn load_corpus(paths: &CorpusPaths) -> Result<Corpus> {
    let symptoms = read_vocabulary(&paths.symptom_vocab)?;
    let herbs = read_vocabulary(&paths.herb_vocab)?;
    let categories = match &paths.category_map {
        Some(p) => read_category_map(p, &symptoms)?,
        None => CategoryMap::identity(&symptoms),
    };

    let text = fs::read_to_string(&paths.corpus).map_err(|e| Error::io(&paths.corpus, e))?;
    let mut drafts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: RecordIn = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: paths.corpus.clone(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        let values = [
            score_value(&rec.id, super::Axis::ExtInt, &rec.scores.ext_int)?,
            score_value(&rec.id, super::Axis::ColdHeat, &rec.scores.cold_heat)?,
            score_value(&rec.id, super::Axis::DefExc, &rec.scores.def_exc)?,
        ];
        let scores = PatternScores::checked(&rec.id, values)?;
        drafts.push(ProvisionDraft {
            symptoms: encode(&rec.id, &rec.symptoms, &symptoms, "symptom")?,
            herbs: encode(&rec.id, &rec.herbs, &herbs, "herb")?,
            scores,
            id: rec.id,
        });
    }
    Corpus::new(symptoms, herbs, categories, drafts)
}

fn write_lines<'a>(path: &Path, lines: impl IntoIterator<Item = &'a str>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for l in lines {
        writeln!(w, "{l}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes the four corpus files into `dir` (created if missing) under the
/// names of [`CorpusPaths::in_dir`]. Tokens within a provision are written in
/// vocabulary order.
pub fn write_corpus(corpus: &Corpus, dir: &Path) -> Result<CorpusPaths> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = CorpusPaths::in_dir(dir);

    write_lines(
        &paths.symptom_vocab,
        corpus.symptom_vocab().tokens().iter().map(String::as_str),
    )?;
    write_lines(
        &paths.herb_vocab,
        corpus.herb_vocab().tokens().iter().map(String::as_str),
    )?;

    let cat_path = paths.category_map.as_ref().expect("in_dir sets a category map");
    let mut w = csv::Writer::from_path(cat_path)?;
    w.write_record(["token", "category"])?;
    for (t, c) in corpus.category_map().explicit_entries(corpus.symptom_vocab()) {
        w.write_record([t, c])?;
    }
    w.flush().map_err(|e| Error::io(cat_path, e))?;

    let mut lines = Vec::with_capacity(corpus.len());
    for p in corpus.provisions() {
        let rec = RecordOut {
            id: &p.id,
            symptoms: p
                .symptoms_raw
                .iter_ones()
                .map(|i| corpus.symptom_vocab().token(i))
                .collect(),
            herbs: p.herbs.iter_ones().map(|i| corpus.herb_vocab().token(i)).collect(),
            scores: &p.scores,
        };
        lines.push(serde_json::to_string(&rec)?);
    }
    write_lines(&paths.corpus, lines.iter().map(String::as_str))?;
    Ok(paths)
}
