//! Tabular die-level data: feature and target matrices, functional feature
//! groups, min-max normalization and deterministic train/test splits.

mod groups;
mod io;
mod norm;
mod split;

pub use groups::{GroupKind, GroupSpec, FeatureGroup, InputLayout};
pub use io::{
    load_dataset, read_manifest, write_dataset, Dataset, DatasetManifest, FeatureMatrix, NodeLabel,
    TargetMatrix,
};
pub(crate) use io::{read_json, write_json};
pub use norm::{apply_minmax, fit_minmax, NormScope, NormStats};
pub use split::{split, Split};

use crate::nn::Matrix;

/// Per-row mean over all target patterns, as a single-column target.
pub fn make_average_target(targets: &TargetMatrix) -> TargetMatrix {
    let v = &targets.values;
    let o = v.cols().max(1) as f64;
    let data = (0..v.rows()).map(|r| v.row(r).iter().sum::<f64>() / o).collect();
    TargetMatrix {
        values: Matrix::from_vec(v.rows(), 1, data).expect("one value per row"),
        column_names: vec!["vmin_mean".to_string()],
        row_ids: targets.row_ids.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn targets(rows: &[&[f64]]) -> TargetMatrix {
        let cols = rows[0].len();
        TargetMatrix {
            values: Matrix::from_rows(rows).unwrap(),
            column_names: (0..cols).map(|c| format!("p{c}")).collect(),
            row_ids: (0..rows.len()).map(|r| format!("d{r}")).collect(),
        }
    }

    #[test]
    fn average_of_row() {
        let t = make_average_target(&targets(&[&[1.0, 2.0, 3.0]]));
        assert_eq!(t.values.as_slice(), &[2.0]);
        assert_eq!(t.row_ids, vec!["d0"]);
    }

    #[test]
    fn single_column_is_identity() {
        let t = targets(&[&[4.5], &[-1.25]]);
        assert_eq!(make_average_target(&t).values, t.values);
    }
}
