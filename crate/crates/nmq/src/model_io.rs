//! JSON model files. Complex entries are `[re, im]` pairs; every operator
//! part carries its own schedule; an optional `init` block holds the initial
//! composite density matrix.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::algebra::{c, CMat, CVec, Coupling, ModelSpec, Schedule, ScheduledOp};
use crate::error::{Error, Result};

type MatrixDef = Vec<Vec<[f64; 2]>>;

fn default_schedule() -> Schedule {
    Schedule::Constant
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ScheduledOpDef {
    matrix: MatrixDef,
    #[serde(default = "default_schedule")]
    schedule: Schedule,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct CouplingDef {
    l_s: ScheduledOpDef,
    l_sa: ScheduledOpDef,
    l_a: ScheduledOpDef,
}

/// On-disk model description.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub n_s: usize,
    pub n_a: usize,
    /// Auxiliary basis vectors (rows); defaults to the computational basis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    aux_basis: Option<MatrixDef>,
    h_s: ScheduledOpDef,
    h_a: ScheduledOpDef,
    h_sa: ScheduledOpDef,
    couplings: Vec<CouplingDef>,
    l0: ScheduledOpDef,
    /// Initial composite density matrix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    init: Option<MatrixDef>,
}

fn mat_from_def(def: &MatrixDef, rows: usize, cols: usize, field: &str) -> Result<CMat> {
    if def.len() != rows || def.iter().any(|r| r.len() != cols) {
        return Err(Error::Parse(format!(
            "field '{field}': expected a {rows}×{cols} matrix, got {}×{}",
            def.len(),
            def.first().map(|r| r.len()).unwrap_or(0)
        )));
    }
    Ok(CMat::from_fn(rows, cols, |i, j| c(def[i][j][0], def[i][j][1])))
}

fn mat_to_def(m: &CMat) -> MatrixDef {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

fn op_from_def(def: &ScheduledOpDef, dim: usize, field: &str) -> Result<ScheduledOp> {
    Ok(ScheduledOp { base: mat_from_def(&def.matrix, dim, dim, field)?, schedule: def.schedule.clone() })
}

fn op_to_def(op: &ScheduledOp) -> ScheduledOpDef {
    ScheduledOpDef { matrix: mat_to_def(&op.base), schedule: op.schedule.clone() }
}

impl ModelFile {
    pub fn to_spec(&self) -> Result<(ModelSpec, Option<CMat>)> {
        if self.n_s == 0 || self.n_a == 0 {
            return Err(Error::Parse("n_s and n_a must be >= 1".into()));
        }
        let d = self.n_s * self.n_a;
        let mut spec = ModelSpec::empty(self.n_s, self.n_a);
        if let Some(basis) = &self.aux_basis {
            if basis.len() != self.n_a {
                return Err(Error::Parse(format!(
                    "field 'aux_basis': expected {} vectors, got {}",
                    self.n_a,
                    basis.len()
                )));
            }
            spec.aux_basis = basis
                .iter()
                .enumerate()
                .map(|(k, row)| {
                    if row.len() != self.n_a {
                        return Err(Error::Parse(format!(
                            "field 'aux_basis[{k}]': expected length {}, got {}",
                            self.n_a,
                            row.len()
                        )));
                    }
                    Ok(CVec::from_fn(self.n_a, |i, _| c(row[i][0], row[i][1])))
                })
                .collect::<Result<_>>()?;
        }
        spec.h_s = op_from_def(&self.h_s, self.n_s, "h_s")?;
        spec.h_a = op_from_def(&self.h_a, self.n_a, "h_a")?;
        spec.h_sa = op_from_def(&self.h_sa, d, "h_sa")?;
        spec.couplings = self
            .couplings
            .iter()
            .enumerate()
            .map(|(k, cdef)| {
                Ok(Coupling {
                    l_s: op_from_def(&cdef.l_s, self.n_s, &format!("couplings[{k}].l_s"))?,
                    l_sa: op_from_def(&cdef.l_sa, d, &format!("couplings[{k}].l_sa"))?,
                    l_a: op_from_def(&cdef.l_a, self.n_a, &format!("couplings[{k}].l_a"))?,
                })
            })
            .collect::<Result<_>>()?;
        spec.l0 = op_from_def(&self.l0, self.n_s, "l0")?;
        let init = match &self.init {
            Some(def) => Some(mat_from_def(def, d, d, "init")?),
            None => None,
        };
        Ok((spec, init))
    }

    pub fn from_spec(spec: &ModelSpec, init: Option<&CMat>) -> Self {
        let computational: Vec<CVec> = crate::algebra::computational_basis(spec.n_a);
        let aux_basis = if spec.aux_basis == computational {
            None
        } else {
            Some(
                spec.aux_basis
                    .iter()
                    .map(|v| (0..spec.n_a).map(|i| [v[i].re, v[i].im]).collect())
                    .collect(),
            )
        };
        Self {
            n_s: spec.n_s,
            n_a: spec.n_a,
            aux_basis,
            h_s: op_to_def(&spec.h_s),
            h_a: op_to_def(&spec.h_a),
            h_sa: op_to_def(&spec.h_sa),
            couplings: spec
                .couplings
                .iter()
                .map(|cp| CouplingDef {
                    l_s: op_to_def(&cp.l_s),
                    l_sa: op_to_def(&cp.l_sa),
                    l_a: op_to_def(&cp.l_a),
                })
                .collect(),
            l0: op_to_def(&spec.l0),
            init: init.map(mat_to_def),
        }
    }
}

/// Load a model (and optional initial state) from a JSON file.
pub fn load_model(path: &Path) -> Result<(ModelSpec, Option<CMat>)> {
    let text = std::fs::read_to_string(path)?;
    let file: ModelFile = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    file.to_spec()
}

/// Write a model (and optional initial state) as pretty-printed JSON.
pub fn save_model(spec: &ModelSpec, init: Option<&CMat>, path: &Path) -> Result<()> {
    let file = ModelFile::from_spec(spec, init);
    let text = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::Parse(format!("serialization failed: {e}")))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::validate_model;
    use crate::models::{reference_init, reference_model};

    #[test]
    fn round_trip_preserves_the_model() {
        let spec = reference_model();
        let init = reference_init();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&spec, Some(&init), &path).unwrap();
        let (back, binit) = load_model(&path).unwrap();
        assert_eq!(spec, back);
        assert_eq!(binit.unwrap(), init);
    }

    #[test]
    fn schedule_defaults_to_constant() {
        let json = r#"{
            "n_s": 2, "n_a": 1,
            "h_s": {"matrix": [[[0.5, 0.0], [0.0, 0.0]], [[0.0, 0.0], [-0.5, 0.0]]]},
            "h_a": {"matrix": [[[0.0, 0.0]]]},
            "h_sa": {"matrix": [[[0.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]]},
            "couplings": [],
            "l0": {"matrix": [[[0.0, 0.0], [0.0, 0.0]], [[0.5, 0.0], [0.0, 0.0]]], "schedule": {"kind": "sinusoidal", "amplitude": 1.0, "frequency": 2.0, "phase": 0.0}}
        }"#;
        let file: ModelFile = serde_json::from_str(json).unwrap();
        let (spec, init) = file.to_spec().unwrap();
        assert!(spec.h_s.is_constant());
        assert!(!spec.l0.is_constant());
        assert!(init.is_none());
        assert!(validate_model(&spec).is_empty());
    }

    #[test]
    fn dimension_errors_name_the_field() {
        let json = r#"{
            "n_s": 2, "n_a": 1,
            "h_s": {"matrix": [[[0.0, 0.0]]]},
            "h_a": {"matrix": [[[0.0, 0.0]]]},
            "h_sa": {"matrix": [[[0.0,0.0],[0.0,0.0]],[[0.0,0.0],[0.0,0.0]]]},
            "couplings": [],
            "l0": {"matrix": [[[0.0,0.0],[0.0,0.0]],[[0.0,0.0],[0.0,0.0]]]}
        }"#;
        let file: ModelFile = serde_json::from_str(json).unwrap();
        let err = file.to_spec().unwrap_err();
        assert!(err.to_string().contains("h_s"), "unexpected error: {err}");
    }

    #[test]
    fn truncated_file_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("broken.json");
        std::fs::write(&path, "{\"n_s\": 2, \"n_a\":").unwrap();
        let err = load_model(&path).unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
    }
}
