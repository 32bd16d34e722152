//! JSON encoding for command reports: complex numbers as [re, im]
//! pairs, matrices as row-major nested arrays, matching the instance
//! file layout.

use qsde_core::{CMat, ElementTable, C64};
use serde_json::{json, Value};

pub fn complex_json(z: C64) -> Value {
    json!([z.re, z.im])
}

pub fn cmat_json(mat: &CMat) -> Value {
    Value::Array(
        (0..mat.nrows())
            .map(|r| Value::Array((0..mat.ncols()).map(|c| complex_json(mat[(r, c)])).collect()))
            .collect(),
    )
}

pub fn table_json(table: &ElementTable) -> Value {
    Value::Array(table.entries.iter().map(cmat_json).collect())
}

/// One verification record. The pass flag is always the literal
/// comparison `residual <= bound`, so reports can be audited without
/// trusting the tool.
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub bound: f64,
    pub seed: Option<u64>,
    pub note: Option<String>,
}

impl Check {
    pub fn new(name: impl Into<String>, residual: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            residual,
            bound,
            seed: None,
            note: None,
        }
    }

    pub fn seeded(name: impl Into<String>, residual: f64, bound: f64, seed: u64) -> Self {
        Check {
            seed: Some(seed),
            ..Check::new(name, residual, bound)
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn pass(&self) -> bool {
        self.residual <= self.bound
    }

    pub fn json(&self) -> Value {
        let mut obj = json!({
            "name": self.name,
            "residual": self.residual,
            "bound": self.bound,
            "pass": self.pass(),
        });
        if let Some(seed) = self.seed {
            obj["seed"] = json!(seed);
        }
        if let Some(note) = &self.note {
            obj["note"] = json!(note);
        }
        obj
    }
}

pub fn checks_json(checks: &[Check]) -> Value {
    Value::Array(checks.iter().map(Check::json).collect())
}
