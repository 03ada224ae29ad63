//! IMDB and SNLI loaders.
//!
//! IMDB layout: `<dir>/{train,test}/{neg,pos}/*.txt`, one review per file,
//! label 0 = negative, 1 = positive.
//!
//! SNLI layout: `<dir>/snli_1.0_{train,dev,test}.txt`, tab-separated with a
//! header naming at least `gold_label`, `sentence1` and `sentence2`. Labels
//! map entailment → 0, contradiction → 1, neutral → 2; pairs whose gold
//! label is `-` are excluded and counted.

use std::fs;
use std::io::{self, BufRead, BufReader};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{encode, stratified_indices, tokenize, Dataset, EmbeddingTable, SequenceSample};
use crate::error::{Error, Result};
use crate::network::InputBundle;

pub const IMDB_SEQ_LEN: usize = 600;
pub const SNLI_SEQ_LEN: usize = 25;
pub const SNLI_LABELS: [&str; 3] = ["entailment", "contradiction", "neutral"];

/// Sequence length and optional stratified subsampling applied per split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoaderOptions {
    pub seq_len: usize,
    pub limit: Option<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct ImdbSplits {
    pub train: Dataset,
    pub test: Dataset,
    /// Reviews that tokenized to nothing and were dropped.
    pub skipped_empty: usize,
}

#[derive(Debug, Clone)]
pub struct SnliSplits {
    pub train: Dataset,
    pub dev: Dataset,
    pub test: Dataset,
    /// Pairs dropped because their gold label is `-`, per split (train, dev, test).
    pub unlabeled: [usize; 3],
    pub skipped_empty: usize,
}

fn require_dir(path: &Path) -> Result<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Error::Io(io::Error::new(
            io::ErrorKind::NotFound,
            format!("directory {} not found", path.display()),
        )))
    }
}

fn select(labels: &[usize], num_classes: usize, opts: &LoaderOptions) -> Vec<usize> {
    match opts.limit {
        Some(limit) => stratified_indices(labels, num_classes, limit, opts.seed),
        None => (0..labels.len()).collect(),
    }
}

fn imdb_split(dir: &Path, table: &EmbeddingTable, opts: &LoaderOptions) -> Result<(Dataset, usize)> {
    require_dir(dir)?;
    let mut files: Vec<(PathBuf, usize)> = Vec::new();
    for (label, sub) in ["neg", "pos"].iter().enumerate() {
        let class_dir = dir.join(sub);
        require_dir(&class_dir)?;
        let mut paths: Vec<PathBuf> = fs::read_dir(&class_dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "txt"))
            .collect();
        paths.sort();
        files.extend(paths.into_iter().map(|p| (p, label)));
    }
    let labels: Vec<usize> = files.iter().map(|(_, l)| *l).collect();
    let chosen = select(&labels, 2, opts);
    let encoded: Vec<Option<SequenceSample>> = chosen
        .par_iter()
        .map(|&i| -> Result<Option<SequenceSample>> {
            let (path, label) = &files[i];
            let text = fs::read_to_string(path)?;
            let (x, valid) = encode(&tokenize(&text), table, opts.seq_len)?;
            Ok((valid > 0).then(|| SequenceSample {
                input: InputBundle {
                    seqs: vec![x],
                    valid_lengths: vec![valid],
                },
                label: *label,
                num_classes: 2,
            }))
        })
        .collect::<Result<_>>()?;
    let skipped = encoded.iter().filter(|s| s.is_none()).count();
    Ok((Dataset::new(encoded.into_iter().flatten().collect(), 2), skipped))
}

/// Load the IMDB review corpus.
pub fn load_imdb(dir: impl AsRef<Path>, table: &EmbeddingTable, opts: &LoaderOptions) -> Result<ImdbSplits> {
    let dir = dir.as_ref();
    require_dir(dir)?;
    let (train, s1) = imdb_split(&dir.join("train"), table, opts)?;
    let (test, s2) = imdb_split(&dir.join("test"), table, opts)?;
    Ok(ImdbSplits {
        train,
        test,
        skipped_empty: s1 + s2,
    })
}

struct SnliRow {
    premise: String,
    hypothesis: String,
    label: usize,
}

fn read_snli_rows<R: BufRead>(reader: R) -> Result<(Vec<SnliRow>, usize)> {
    let mut lines = reader.lines();
    let header = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        msg: "empty SNLI file".into(),
    })??;
    let cols: Vec<&str> = header.split('\t').collect();
    let find = |name: &str| {
        cols.iter().position(|c| *c == name).ok_or_else(|| Error::Parse {
            line: 1,
            msg: format!("missing column `{name}`"),
        })
    };
    let (gold, s1, s2) = (find("gold_label")?, find("sentence1")?, find("sentence2")?);
    let mut rows = Vec::new();
    let mut unlabeled = 0;
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let get = |k: usize| {
            fields.get(k).copied().ok_or_else(|| Error::Parse {
                line: i + 2,
                msg: format!("expected at least {} fields", k + 1),
            })
        };
        let label = match get(gold)? {
            "-" => {
                unlabeled += 1;
                continue;
            }
            g => SNLI_LABELS.iter().position(|l| *l == g).ok_or_else(|| Error::Parse {
                line: i + 2,
                msg: format!("unknown gold label `{g}`"),
            })?,
        };
        rows.push(SnliRow {
            premise: get(s1)?.to_string(),
            hypothesis: get(s2)?.to_string(),
            label,
        });
    }
    Ok((rows, unlabeled))
}

fn snli_split(path: &Path, table: &EmbeddingTable, opts: &LoaderOptions) -> Result<(Dataset, usize, usize)> {
    let (rows, unlabeled) = read_snli_rows(BufReader::new(fs::File::open(path)?))?;
    let labels: Vec<usize> = rows.iter().map(|r| r.label).collect();
    let chosen = select(&labels, 3, opts);
    let encoded: Vec<Option<SequenceSample>> = chosen
        .par_iter()
        .map(|&i| -> Result<Option<SequenceSample>> {
            let row = &rows[i];
            let (a, la) = encode(&tokenize(&row.premise), table, opts.seq_len)?;
            let (b, lb) = encode(&tokenize(&row.hypothesis), table, opts.seq_len)?;
            Ok((la > 0 && lb > 0).then(|| SequenceSample {
                input: InputBundle {
                    seqs: vec![a, b],
                    valid_lengths: vec![la, lb],
                },
                label: row.label,
                num_classes: 3,
            }))
        })
        .collect::<Result<_>>()?;
    let skipped = encoded.iter().filter(|s| s.is_none()).count();
    Ok((Dataset::new(encoded.into_iter().flatten().collect(), 3), unlabeled, skipped))
}

/// Load the SNLI pair corpus.
pub fn load_snli(dir: impl AsRef<Path>, table: &EmbeddingTable, opts: &LoaderOptions) -> Result<SnliSplits> {
    let dir = dir.as_ref();
    require_dir(dir)?;
    let (train, u0, k0) = snli_split(&dir.join("snli_1.0_train.txt"), table, opts)?;
    let (dev, u1, k1) = snli_split(&dir.join("snli_1.0_dev.txt"), table, opts)?;
    let (test, u2, k2) = snli_split(&dir.join("snli_1.0_test.txt"), table, opts)?;
    if u0 + u1 + u2 > 0 {
        log::info!("SNLI: excluded {} pairs without a gold label", u0 + u1 + u2);
    }
    Ok(SnliSplits {
        train,
        dev,
        test,
        unlabeled: [u0, u1, u2],
        skipped_empty: k0 + k1 + k2,
    })
}
