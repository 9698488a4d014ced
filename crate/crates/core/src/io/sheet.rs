//! JSON trial sheets.
//!
//! A sheet is an array with one object per trial: the [`TrialSpec`] fields
//! plus `cells`, the four design-matrix labels of the trial's row exactly as
//! they appear in the matrix.

use serde::{Deserialize, Serialize};

use crate::doe::{oa_matrix, TrialSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SheetEntry {
    #[serde(flatten)]
    pub trial: TrialSpec,
    pub cells: [String; 4],
}

impl SheetEntry {
    pub fn new(trial: &TrialSpec) -> Self {
        let row = &oa_matrix()[trial.matrix_row as usize - 1];
        Self {
            trial: trial.clone(),
            cells: row.labels().map(String::from),
        }
    }
}

pub fn write_sheet(trials: &[TrialSpec]) -> String {
    let entries: Vec<SheetEntry> = trials.iter().map(SheetEntry::new).collect();
    let mut text = serde_json::to_string_pretty(&entries).expect("trial specs serialize");
    text.push('\n');
    text
}

pub fn parse_sheet(text: &str) -> Result<Vec<TrialSpec>> {
    let entries: Vec<SheetEntry> = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        field: "<sheet>".into(),
        message: e.to_string(),
    })?;
    Ok(entries.into_iter().map(|e| e.trial).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doe::{campaign, default_layout};
    use crate::geometry::ClassRegistry;

    #[test]
    fn round_trip() {
        let trials = campaign(&default_layout(), &ClassRegistry::default()).unwrap();
        let text = write_sheet(&trials);
        assert_eq!(parse_sheet(&text).unwrap(), trials);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 72);
        assert_eq!(v[0]["cells"][0], "Stationary - NL - NA");
        assert_eq!(v[0]["class_id"], "MW");
    }

    #[test]
    fn malformed_sheet() {
        assert!(matches!(parse_sheet("[{\"trial_id\": 1}]"), Err(Error::Parse { .. })));
    }
}
