//! Results directory writer: `<base>/<experiment>/<stamp>/` with a
//! `table.csv`, one `series-<label>.csv` per series, and a `meta.json`
//! recording all inputs and seeds.

use std::path::{Path, PathBuf};

use crate::error::Result;

/// Everything one experiment run wants written to disk.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub experiment: String,
    pub table_csv: Option<String>,
    /// (label, csv) pairs, written as `series-<label>.csv`.
    pub series: Vec<(String, String)>,
    pub meta: serde_json::Value,
}

/// Writes the output under `<base>/<experiment>/<stamp>/` and returns that
/// directory.
pub fn write_results(base: &Path, stamp: &str, output: &ExperimentOutput) -> Result<PathBuf> {
    let dir = base.join(&output.experiment).join(stamp);
    std::fs::create_dir_all(&dir)?;
    if let Some(table) = &output.table_csv {
        std::fs::write(dir.join("table.csv"), table)?;
    }
    for (label, csv) in &output.series {
        std::fs::write(dir.join(format!("series-{label}.csv")), csv)?;
    }
    let meta = serde_json::to_string_pretty(&output.meta).expect("meta is plain json");
    std::fs::write(dir.join("meta.json"), meta + "\n")?;
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_expected_layout() {
        let tmp = tempfile::tempdir().unwrap();
        let output = ExperimentOutput {
            experiment: "alpha-sweep".into(),
            table_csv: Some("row,col,mean,sd\n".into()),
            series: vec![("si-slice_all".into(), "x,mean,sd\n".into())],
            meta: serde_json::json!({"seed": 42}),
        };
        let dir = write_results(tmp.path(), "stamp", &output).unwrap();
        assert!(dir.ends_with("alpha-sweep/stamp"));
        assert!(dir.join("table.csv").exists());
        assert!(dir.join("series-si-slice_all.csv").exists());
        assert!(dir.join("meta.json").exists());
    }
}
