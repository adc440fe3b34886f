use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKind {
    /// Process-monitor features present on both nodes.
    Common,
    /// Base-node-only features; never fed to the model.
    Legacy,
    /// Silicon odometer frequencies (target node only).
    Odometer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGroup {
    pub name: String,
    pub kind: GroupKind,
    pub columns: Vec<String>,
}

/// Ordered list of functional feature groups.
///
/// Serialized as a bare JSON array of `{name, kind, columns}` objects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupSpec {
    pub groups: Vec<FeatureGroup>,
}

/// Column indices of every model-input group, in model wiring order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputLayout {
    pub group_names: Vec<String>,
    pub columns: Vec<Vec<usize>>,
}

impl InputLayout {
    pub fn group_sizes(&self) -> Vec<usize> {
        self.columns.iter().map(Vec::len).collect()
    }

    pub fn all_columns(&self) -> Vec<usize> {
        self.columns.iter().flatten().copied().collect()
    }
}

impl GroupSpec {
    pub fn new(groups: Vec<FeatureGroup>) -> Result<Self> {
        let spec = Self { groups };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = HashSet::new();
        let mut seen = HashSet::new();
        for g in &self.groups {
            if !names.insert(g.name.as_str()) {
                return Err(Error::Schema(format!("duplicate group name `{}`", g.name)));
            }
            if g.columns.is_empty() {
                return Err(Error::Schema(format!("group `{}` has no columns", g.name)));
            }
            for c in &g.columns {
                if !seen.insert(c.as_str()) {
                    return Err(Error::Schema(format!(
                        "column `{c}` appears in more than one group"
                    )));
                }
            }
        }
        if self.model_groups().next().is_none() {
            return Err(Error::Schema("no model-input (non-legacy) groups".into()));
        }
        Ok(())
    }

    /// Non-legacy groups in wiring order: common groups in file order, then
    /// odometer groups in file order.
    pub fn model_groups(&self) -> impl Iterator<Item = &FeatureGroup> {
        let common = self.groups.iter().filter(|g| g.kind == GroupKind::Common);
        let odo = self.groups.iter().filter(|g| g.kind == GroupKind::Odometer);
        common.chain(odo)
    }

    pub fn model_group_sizes(&self) -> Vec<usize> {
        self.model_groups().map(|g| g.columns.len()).collect()
    }

    pub fn has_kind(&self, kind: GroupKind) -> bool {
        self.groups.iter().any(|g| g.kind == kind)
    }

    /// Copy of this spec without groups of the given kind.
    pub fn without_kind(&self, kind: GroupKind) -> Result<Self> {
        Self::new(self.groups.iter().filter(|g| g.kind != kind).cloned().collect())
    }

    pub fn legacy_columns(&self) -> Vec<&str> {
        self.groups
            .iter()
            .filter(|g| g.kind == GroupKind::Legacy)
            .flat_map(|g| g.columns.iter().map(String::as_str))
            .collect()
    }

    /// Checks that every column named by any group exists.
    pub fn check_columns(&self, column_names: &[String]) -> Result<()> {
        let present: HashSet<&str> = column_names.iter().map(String::as_str).collect();
        for g in &self.groups {
            if let Some(missing) = g.columns.iter().find(|c| !present.contains(c.as_str())) {
                return Err(Error::Schema(format!(
                    "group `{}` references column `{missing}` which is not in the feature file",
                    g.name
                )));
            }
        }
        Ok(())
    }

    /// Resolves model-input groups against a header.
    pub fn resolve(&self, column_names: &[String]) -> Result<InputLayout> {
        self.check_columns(column_names)?;
        let index: HashMap<&str, usize> = column_names
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();
        let mut layout = InputLayout {
            group_names: Vec::new(),
            columns: Vec::new(),
        };
        for g in self.model_groups() {
            layout.group_names.push(g.name.clone());
            layout
                .columns
                .push(g.columns.iter().map(|c| index[c.as_str()]).collect());
        }
        Ok(layout)
    }
}
