//! Layered-grid export of a finished task, shaped like a multi-channel image.

use serde::{Deserialize, Serialize};

use crate::error::ExportError;
use crate::session::Session;

pub const LAYER_NAMES: [&str; 4] = ["raw_elevation", "visit_count", "visit_order", "final_choice"];

/// `shape = [layers, height, width]`; `values` is row-major over that shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayeredGrid {
    pub shape: [usize; 3],
    pub layers: Vec<String>,
    pub values: Vec<f64>,
}

impl LayeredGrid {
    pub fn layer(&self, k: usize) -> &[f64] {
        let size = self.shape[1] * self.shape[2];
        &self.values[k * size..(k + 1) * size]
    }

    /// Copy with every value rounded to six decimals.
    pub fn rounded(&self) -> Self {
        LayeredGrid {
            values: self.values.iter().map(|v| (v * 1e6).round() / 1e6).collect(),
            ..self.clone()
        }
    }

    /// JSON text of [`LayeredGrid::rounded`].
    pub fn to_text(&self) -> String {
        serde_json::to_string(&self.rounded()).expect("layered grids always serialize")
    }

    pub fn from_text(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Layers: raw elevation, visit count, first-visit rank over duration (0 when
/// unvisited), and a one-hot of the final choice. Visits are the
/// participant-visible evaluations.
pub fn export_layers(session: &Session, task_index: usize) -> Result<LayeredGrid, ExportError> {
    let spec = session
        .tasks
        .get(task_index)
        .ok_or(ExportError::UnknownTask(task_index))?;
    let record = &session.records[task_index];
    let result = record.result.ok_or(ExportError::TaskNotFinalized(task_index))?;
    let landscape = &spec.landscape.landscape;
    let torus = landscape.torus();
    let size = torus.len();

    let mut values = vec![0.0; 4 * size];
    values[..size].copy_from_slice(&landscape.grid);
    let duration = record.history.len() as f64;
    for (rank, e) in record.history.iter().enumerate() {
        let i = torus.index(e.setting);
        values[size + i] += 1.0;
        if values[2 * size + i] == 0.0 {
            values[2 * size + i] = (rank + 1) as f64 / duration;
        }
    }
    values[3 * size + torus.index(result.final_setting)] = 1.0;
    Ok(LayeredGrid {
        shape: [4, torus.height, torus.width],
        layers: LAYER_NAMES.iter().map(|s| s.to_string()).collect(),
        values,
    })
}
