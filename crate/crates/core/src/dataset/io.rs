//! CSV + JSON dataset interchange.
//!
//! A dataset directory holds `features.csv` (`die_id,<col>...`),
//! `targets.csv` (`die_id,<pattern>...`), a group-spec JSON file and a
//! manifest tying them together. Manifest paths are relative to the manifest.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::GroupSpec;
use crate::nn::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeLabel {
    Base,
    Target,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub features_path: PathBuf,
    pub targets_path: PathBuf,
    pub groupspec_path: PathBuf,
    pub node_label: NodeLabel,
    pub temperatures: Vec<i32>,
    /// Directory the relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn features_file(&self) -> PathBuf {
        self.resolve(&self.features_path)
    }

    pub fn targets_file(&self) -> PathBuf {
        self.resolve(&self.targets_path)
    }

    pub fn groupspec_file(&self) -> PathBuf {
        self.resolve(&self.groupspec_path)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: Matrix,
    pub column_names: Vec<String>,
    pub row_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetMatrix {
    pub values: Matrix,
    pub column_names: Vec<String>,
    pub row_ids: Vec<String>,
}

impl FeatureMatrix {
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            values: self.values.select_rows(rows),
            column_names: self.column_names.clone(),
            row_ids: rows.iter().map(|&r| self.row_ids[r].clone()).collect(),
        }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }
}

impl TargetMatrix {
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            values: self.values.select_rows(rows),
            column_names: self.column_names.clone(),
            row_ids: rows.iter().map(|&r| self.row_ids[r].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: FeatureMatrix,
    pub targets: TargetMatrix,
    pub groups: GroupSpec,
    pub node_label: NodeLabel,
    pub temperatures: Vec<i32>,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.features.values.rows()
    }
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut manifest: DatasetManifest =
        serde_json::from_str(&text).map_err(|e| Error::Document {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
    manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(manifest)
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Document {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Document {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

struct Table {
    header: Vec<String>,
    ids: Vec<String>,
    values: Matrix,
}

fn read_table(path: &Path) -> Result<Table> {
    let file = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Document {
                path: file.clone(),
                message: format!("{other:?}"),
            },
        })?;

    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Document {
            path: file.clone(),
            message: e.to_string(),
        })?
        .iter()
        .skip(1)
        .map(str::to_string)
        .collect();
    if header.is_empty() {
        return Err(Error::Schema(format!("{file}: no value columns after die id")));
    }
    let mut unique = HashSet::new();
    if let Some(dup) = header.iter().find(|h| !unique.insert(h.as_str())) {
        return Err(Error::Schema(format!("{file}: duplicate column `{dup}`")));
    }

    let mut ids = Vec::new();
    let mut data = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse {
            file: file.clone(),
            row,
            column: "*".into(),
            message: e.to_string(),
        })?;
        if record.len() != header.len() + 1 {
            return Err(Error::Parse {
                file: file.clone(),
                row,
                column: "*".into(),
                message: format!("expected {} fields, found {}", header.len() + 1, record.len()),
            });
        }
        ids.push(record[0].to_string());
        for (cell, name) in record.iter().skip(1).zip(&header) {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                file: file.clone(),
                row,
                column: name.clone(),
                message: format!("`{cell}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    file: file.clone(),
                    row,
                    column: name.clone(),
                    message: format!("`{cell}` is not finite"),
                });
            }
            data.push(v);
        }
    }
    let values = Matrix::from_vec(ids.len(), header.len(), data)?;
    Ok(Table { header, ids, values })
}

fn write_table(path: &Path, header: &[String], ids: &[String], values: &Matrix) -> Result<()> {
    let mut out = String::with_capacity(values.as_slice().len() * 12);
    out.push_str("die_id");
    for h in header {
        out.push(',');
        out.push_str(h);
    }
    out.push('\n');
    for (r, id) in ids.iter().enumerate() {
        out.push_str(id);
        for v in values.row(r) {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads features, targets and groups, aligning target rows to feature rows
/// by die id.
pub fn load_dataset(manifest: &DatasetManifest) -> Result<Dataset> {
    let groups: GroupSpec = read_json(&manifest.groupspec_file())?;
    groups.validate()?;
    let feats = read_table(&manifest.features_file())?;
    let targs = read_table(&manifest.targets_file())?;
    groups.check_columns(&feats.header)?;

    if feats.ids.len() != targs.ids.len() {
        return Err(Error::Alignment(format!(
            "{} feature rows but {} target rows",
            feats.ids.len(),
            targs.ids.len()
        )));
    }
    let mut target_pos = HashMap::with_capacity(targs.ids.len());
    for (i, id) in targs.ids.iter().enumerate() {
        if target_pos.insert(id.as_str(), i).is_some() {
            return Err(Error::Alignment(format!("duplicate die id `{id}` in targets")));
        }
    }
    let mut seen = HashSet::with_capacity(feats.ids.len());
    let mut order = Vec::with_capacity(feats.ids.len());
    for id in &feats.ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::Alignment(format!("duplicate die id `{id}` in features")));
        }
        match target_pos.get(id.as_str()) {
            Some(&i) => order.push(i),
            None => {
                return Err(Error::Alignment(format!("die `{id}` has no target row")));
            }
        }
    }

    Ok(Dataset {
        features: FeatureMatrix {
            values: feats.values,
            column_names: feats.header,
            row_ids: feats.ids.clone(),
        },
        targets: TargetMatrix {
            values: targs.values.select_rows(&order),
            column_names: targs.header,
            row_ids: feats.ids,
        },
        groups,
        node_label: manifest.node_label,
        temperatures: manifest.temperatures.clone(),
    })
}

/// Writes a dataset directory and returns the manifest path.
pub fn write_dataset(dataset: &Dataset, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = DatasetManifest {
        features_path: "features.csv".into(),
        targets_path: "targets.csv".into(),
        groupspec_path: "groups.json".into(),
        node_label: dataset.node_label,
        temperatures: dataset.temperatures.clone(),
        base_dir: dir.to_path_buf(),
    };
    let f = &dataset.features;
    write_table(&manifest.features_file(), &f.column_names, &f.row_ids, &f.values)?;
    let t = &dataset.targets;
    write_table(&manifest.targets_file(), &t.column_names, &t.row_ids, &t.values)?;
    write_json(&manifest.groupspec_file(), &dataset.groups)?;
    let path = dir.join("manifest.json");
    write_json(&path, &manifest)?;
    Ok(path)
}
