//! Instance files: a JSON description of one equation setup shared by
//! the command-line tools and the verification suites.
//!
//! Layout, with every complex number an `[re, im]` pair:
//!
//! ```json
//! {
//!   "d": 1,
//!   "m": 2,
//!   "p": 2,
//!   "p_prime": 2,
//!   "phi": "(d+1) x (d+1) grid of m x m complex matrices",
//!   "kappa": "m matrices of shape p' x p",
//!   "involution": "m x m complex matrix",
//!   "functions": { "name": { "ends": [0.5, 1.0], "values": "one d-vector per piece" } },
//!   "fe": { "time_coeff": 2.0, "l2_coeff": 2.0 },
//!   "defaults": { "truncation": 18, "slots": 64, "quadrature_steps": 64 },
//!   "coalgebra": { "delta": "m_c x m_c x m_c tensor", "counit": "m_c vector", "varphi": "m_c matrices of shape (d+1) x (d+1)" },
//!   "seed": 7
//! }
//! ```
//!
//! `d`, `m` and `phi` are required. `p` and `p_prime` default to `m`;
//! a missing `kappa` defaults to the identity units exactly when
//! p = p' = m. The involution is shape-checked here but its defect is
//! only examined when a conjugation structure is actually requested,
//! so deliberately broken instances still load. Parse errors carry the
//! JSON path of the offending field.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::coalgebra::{Coalgebra, GeneratorFunctional};
use crate::coefficient::{Coefficient, InitialMap, InitialSpace};
use crate::error::Error;
use crate::linalg::{c, CMat, CVec, C64};
use crate::noise::{ExpPair, FeConstant, StepFunction};
use crate::series::DEFAULT_TRUNCATION;
use crate::Result;

/// Engine parameters used when a command does not override them.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EngineDefaults {
    pub truncation: usize,
    pub slots: usize,
    pub quadrature_steps: usize,
}

impl Default for EngineDefaults {
    fn default() -> Self {
        EngineDefaults {
            truncation: DEFAULT_TRUNCATION,
            slots: 64,
            quadrature_steps: 64,
        }
    }
}

/// Coalgebraic convolution setup carried by an instance. Its space is
/// independent of the coefficient space; only the noise dimension is
/// shared.
#[derive(Clone, Debug)]
pub struct CoalgebraSection {
    pub coalgebra: Coalgebra,
    pub generator: GeneratorFunctional,
}

/// One equation setup: coefficient, initial condition, optional
/// conjugation, a named library of step functions, and solver
/// defaults.
#[derive(Clone, Debug)]
pub struct Instance {
    pub d: usize,
    pub m: usize,
    pub p: usize,
    pub p_prime: usize,
    pub phi: Coefficient,
    pub kappa: InitialMap,
    pub involution: Option<CMat>,
    pub functions: BTreeMap<String, StepFunction>,
    pub fe: FeConstant,
    pub defaults: EngineDefaults,
    pub coalgebra: Option<CoalgebraSection>,
    pub seed: u64,
}

fn parse_err(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.into(),
        message: message.into(),
    }
}

fn as_object<'v>(v: &'v Value, path: &str) -> Result<&'v Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| parse_err(path, "expected an object"))
}

fn as_array<'v>(v: &'v Value, path: &str) -> Result<&'v Vec<Value>> {
    v.as_array()
        .ok_or_else(|| parse_err(path, "expected an array"))
}

fn as_finite_f64(v: &Value, path: &str) -> Result<f64> {
    let x = v
        .as_f64()
        .ok_or_else(|| parse_err(path, "expected a number"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(parse_err(path, "number is not finite"))
    }
}

fn as_usize(v: &Value, path: &str) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| parse_err(path, "expected a nonnegative integer"))
}

fn as_complex(v: &Value, path: &str) -> Result<C64> {
    let pair = as_array(v, path)?;
    if pair.len() != 2 {
        return Err(parse_err(path, "complex entries are [re, im] pairs"));
    }
    let re = as_finite_f64(&pair[0], path)?;
    let im = as_finite_f64(&pair[1], path)?;
    Ok(c(re, im))
}

fn as_cvec(v: &Value, path: &str, len: usize) -> Result<CVec> {
    let arr = as_array(v, path)?;
    if arr.len() != len {
        return Err(parse_err(
            path,
            format!("expected {len} entries, found {}", arr.len()),
        ));
    }
    let mut out = CVec::zeros(len);
    for (i, entry) in arr.iter().enumerate() {
        out[i] = as_complex(entry, &format!("{path}[{i}]"))?;
    }
    Ok(out)
}

fn as_cmat(v: &Value, path: &str, rows: usize, cols: usize) -> Result<CMat> {
    let arr = as_array(v, path)?;
    if arr.len() != rows {
        return Err(parse_err(
            path,
            format!("expected {rows} rows, found {}", arr.len()),
        ));
    }
    let mut out = CMat::zeros(rows, cols);
    for (r, row) in arr.iter().enumerate() {
        let row_path = format!("{path}[{r}]");
        let row_arr = as_array(row, &row_path)?;
        if row_arr.len() != cols {
            return Err(parse_err(
                &row_path,
                format!("expected {cols} columns, found {}", row_arr.len()),
            ));
        }
        for (col, entry) in row_arr.iter().enumerate() {
            out[(r, col)] = as_complex(entry, &format!("{row_path}[{col}]"))?;
        }
    }
    Ok(out)
}

fn check_known_keys(map: &Map<String, Value>, path: &str, known: &[&str]) -> Result<()> {
    for key in map.keys() {
        if !known.contains(&key.as_str()) {
            let full = if path.is_empty() {
                key.clone()
            } else {
                format!("{path}.{key}")
            };
            return Err(parse_err(full, "unknown field"));
        }
    }
    Ok(())
}

fn complex_json(z: C64) -> Value {
    json!([z.re, z.im])
}

fn cvec_json(v: &CVec) -> Value {
    Value::Array(v.iter().map(|z| complex_json(*z)).collect())
}

fn cmat_json(mat: &CMat) -> Value {
    Value::Array(
        (0..mat.nrows())
            .map(|r| Value::Array((0..mat.ncols()).map(|col| complex_json(mat[(r, col)])).collect()))
            .collect(),
    )
}

impl Instance {
    /// Reads and validates an instance file.
    pub fn load(path: impl AsRef<Path>) -> Result<Instance> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Instance::from_str(&text)
    }

    /// Parses an instance from JSON text.
    #[allow(clippy::should_implement_trait)]
    pub fn from_str(text: &str) -> Result<Instance> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| parse_err("$", e.to_string()))?;
        Instance::from_json(&value)
    }

    /// Parses an instance from a JSON value. Every reported error
    /// names the JSON path of the field that failed.
    pub fn from_json(value: &Value) -> Result<Instance> {
        let root = as_object(value, "$")?;
        check_known_keys(
            root,
            "",
            &[
                "d",
                "m",
                "p",
                "p_prime",
                "phi",
                "kappa",
                "involution",
                "functions",
                "fe",
                "defaults",
                "coalgebra",
                "seed",
            ],
        )?;
        let d = as_usize(
            root.get("d").ok_or_else(|| parse_err("d", "missing field"))?,
            "d",
        )?;
        let m = as_usize(
            root.get("m").ok_or_else(|| parse_err("m", "missing field"))?,
            "m",
        )?;
        if m == 0 {
            return Err(parse_err("m", "the coefficient space must have dimension at least 1"));
        }
        let p = match root.get("p") {
            Some(v) => as_usize(v, "p")?,
            None => m,
        };
        let p_prime = match root.get("p_prime") {
            Some(v) => as_usize(v, "p_prime")?,
            None => p,
        };
        if p == 0 || p_prime == 0 {
            return Err(parse_err("p", "initial-condition shapes must be at least 1"));
        }

        let dhat = d + 1;
        let phi_value = root
            .get("phi")
            .ok_or_else(|| parse_err("phi", "missing field"))?;
        let phi_grid = as_array(phi_value, "phi")?;
        if phi_grid.len() != dhat {
            return Err(parse_err(
                "phi",
                format!("expected {dhat} block rows, found {}", phi_grid.len()),
            ));
        }
        let mut theta = Vec::with_capacity(dhat);
        for (mu, row) in phi_grid.iter().enumerate() {
            let row_path = format!("phi[{mu}]");
            let row_arr = as_array(row, &row_path)?;
            if row_arr.len() != dhat {
                return Err(parse_err(
                    &row_path,
                    format!("expected {dhat} blocks, found {}", row_arr.len()),
                ));
            }
            let mut blocks = Vec::with_capacity(dhat);
            for (nu, block) in row_arr.iter().enumerate() {
                blocks.push(as_cmat(block, &format!("{row_path}[{nu}]"), m, m)?);
            }
            theta.push(blocks);
        }
        let phi = Coefficient::new(m, d, theta)
            .map_err(|e| parse_err("phi", e.to_string()))?;

        let kappa = match root.get("kappa") {
            Some(v) => {
                let arr = as_array(v, "kappa")?;
                if arr.len() != m {
                    return Err(parse_err(
                        "kappa",
                        format!("expected {m} basis images, found {}", arr.len()),
                    ));
                }
                let mats = arr
                    .iter()
                    .enumerate()
                    .map(|(i, mat)| as_cmat(mat, &format!("kappa[{i}]"), p_prime, p))
                    .collect::<Result<Vec<_>>>()?;
                InitialMap::new(mats).map_err(|e| parse_err("kappa", e.to_string()))?
            }
            None => {
                if p == m && p_prime == m {
                    InitialMap::diagonal_units(m)
                } else {
                    return Err(parse_err(
                        "kappa",
                        "required unless the initial shape is square (p = p' = m)",
                    ));
                }
            }
        };

        let involution = match root.get("involution") {
            Some(v) => Some(as_cmat(v, "involution", m, m)?),
            None => None,
        };

        let mut functions = BTreeMap::new();
        if let Some(v) = root.get("functions") {
            let obj = as_object(v, "functions")?;
            for (name, body) in obj {
                let path = format!("functions.{name}");
                let entry = as_object(body, &path)?;
                check_known_keys(entry, &path, &["ends", "values"])?;
                let ends_value = entry
                    .get("ends")
                    .ok_or_else(|| parse_err(format!("{path}.ends"), "missing field"))?;
                let ends_arr = as_array(ends_value, &format!("{path}.ends"))?;
                let ends = ends_arr
                    .iter()
                    .enumerate()
                    .map(|(i, e)| as_finite_f64(e, &format!("{path}.ends[{i}]")))
                    .collect::<Result<Vec<_>>>()?;
                let values_value = entry
                    .get("values")
                    .ok_or_else(|| parse_err(format!("{path}.values"), "missing field"))?;
                let values_arr = as_array(values_value, &format!("{path}.values"))?;
                let values = values_arr
                    .iter()
                    .enumerate()
                    .map(|(i, piece)| as_cvec(piece, &format!("{path}.values[{i}]"), d))
                    .collect::<Result<Vec<_>>>()?;
                let function = StepFunction::new(d, ends, values)
                    .map_err(|e| parse_err(&path, e.to_string()))?;
                functions.insert(name.clone(), function);
            }
        }

        let fe = match root.get("fe") {
            Some(v) => {
                let obj = as_object(v, "fe")?;
                check_known_keys(obj, "fe", &["time_coeff", "l2_coeff"])?;
                let base = FeConstant::default();
                let time_coeff = match obj.get("time_coeff") {
                    Some(x) => as_finite_f64(x, "fe.time_coeff")?,
                    None => base.time_coeff,
                };
                let l2_coeff = match obj.get("l2_coeff") {
                    Some(x) => as_finite_f64(x, "fe.l2_coeff")?,
                    None => base.l2_coeff,
                };
                FeConstant {
                    time_coeff,
                    l2_coeff,
                }
            }
            None => FeConstant::default(),
        };

        let defaults = match root.get("defaults") {
            Some(v) => {
                let obj = as_object(v, "defaults")?;
                check_known_keys(obj, "defaults", &["truncation", "slots", "quadrature_steps"])?;
                let base = EngineDefaults::default();
                EngineDefaults {
                    truncation: match obj.get("truncation") {
                        Some(x) => as_usize(x, "defaults.truncation")?,
                        None => base.truncation,
                    },
                    slots: match obj.get("slots") {
                        Some(x) => as_usize(x, "defaults.slots")?,
                        None => base.slots,
                    },
                    quadrature_steps: match obj.get("quadrature_steps") {
                        Some(x) => as_usize(x, "defaults.quadrature_steps")?,
                        None => base.quadrature_steps,
                    },
                }
            }
            None => EngineDefaults::default(),
        };

        let coalgebra = match root.get("coalgebra") {
            Some(v) => {
                let obj = as_object(v, "coalgebra")?;
                check_known_keys(obj, "coalgebra", &["delta", "counit", "varphi"])?;
                let delta_value = obj
                    .get("delta")
                    .ok_or_else(|| parse_err("coalgebra.delta", "missing field"))?;
                let delta_arr = as_array(delta_value, "coalgebra.delta")?;
                let mc = delta_arr.len();
                if mc == 0 {
                    return Err(parse_err("coalgebra.delta", "expected at least one block"));
                }
                let delta = delta_arr
                    .iter()
                    .enumerate()
                    .map(|(i, block)| as_cmat(block, &format!("coalgebra.delta[{i}]"), mc, mc))
                    .collect::<Result<Vec<_>>>()?;
                let counit_value = obj
                    .get("counit")
                    .ok_or_else(|| parse_err("coalgebra.counit", "missing field"))?;
                let counit = as_cvec(counit_value, "coalgebra.counit", mc)?;
                let varphi_value = obj
                    .get("varphi")
                    .ok_or_else(|| parse_err("coalgebra.varphi", "missing field"))?;
                let varphi_arr = as_array(varphi_value, "coalgebra.varphi")?;
                if varphi_arr.len() != mc {
                    return Err(parse_err(
                        "coalgebra.varphi",
                        format!("expected {mc} matrices, found {}", varphi_arr.len()),
                    ));
                }
                let varphi = varphi_arr
                    .iter()
                    .enumerate()
                    .map(|(k, mat)| as_cmat(mat, &format!("coalgebra.varphi[{k}]"), dhat, dhat))
                    .collect::<Result<Vec<_>>>()?;
                let coalgebra = Coalgebra::new(delta, counit)
                    .map_err(|e| parse_err("coalgebra", e.to_string()))?;
                let generator = GeneratorFunctional::new(varphi)
                    .map_err(|e| parse_err("coalgebra.varphi", e.to_string()))?;
                Some(CoalgebraSection {
                    coalgebra,
                    generator,
                })
            }
            None => None,
        };

        let seed = match root.get("seed") {
            Some(v) => v
                .as_u64()
                .ok_or_else(|| parse_err("seed", "expected a nonnegative integer"))?,
            None => 0,
        };

        Ok(Instance {
            d,
            m,
            p,
            p_prime,
            phi,
            kappa,
            involution,
            functions,
            fe,
            defaults,
            coalgebra,
            seed,
        })
    }

    /// Serializes the instance back to its JSON form. Defaults that
    /// were filled in at parse time are written out explicitly, so
    /// serialize-then-parse is stable.
    pub fn to_json(&self) -> Value {
        let dhat = self.d + 1;
        let phi = Value::Array(
            (0..dhat)
                .map(|mu| {
                    Value::Array((0..dhat).map(|nu| cmat_json(self.phi.theta(mu, nu))).collect())
                })
                .collect(),
        );
        let kappa = Value::Array(self.kappa.matrices().iter().map(cmat_json).collect());
        let functions: Map<String, Value> = self
            .functions
            .iter()
            .map(|(name, f)| {
                let ends: Vec<Value> = f.breakpoints().iter().map(|e| json!(e)).collect();
                let values: Vec<Value> = f.values().iter().map(cvec_json).collect();
                (
                    name.clone(),
                    json!({ "ends": ends, "values": values }),
                )
            })
            .collect();
        let mut root = Map::new();
        root.insert("d".into(), json!(self.d));
        root.insert("m".into(), json!(self.m));
        root.insert("p".into(), json!(self.p));
        root.insert("p_prime".into(), json!(self.p_prime));
        root.insert("phi".into(), phi);
        root.insert("kappa".into(), kappa);
        if let Some(j) = &self.involution {
            root.insert("involution".into(), cmat_json(j));
        }
        root.insert("functions".into(), Value::Object(functions));
        root.insert(
            "fe".into(),
            json!({ "time_coeff": self.fe.time_coeff, "l2_coeff": self.fe.l2_coeff }),
        );
        root.insert(
            "defaults".into(),
            json!({
                "truncation": self.defaults.truncation,
                "slots": self.defaults.slots,
                "quadrature_steps": self.defaults.quadrature_steps,
            }),
        );
        if let Some(section) = &self.coalgebra {
            let delta =
                Value::Array(section.coalgebra.delta_blocks().iter().map(cmat_json).collect());
            let varphi =
                Value::Array(section.generator.values().iter().map(cmat_json).collect());
            root.insert(
                "coalgebra".into(),
                json!({
                    "delta": delta,
                    "counit": cvec_json(section.coalgebra.counit()),
                    "varphi": varphi,
                }),
            );
        }
        root.insert("seed".into(), json!(self.seed));
        Value::Object(root)
    }

    pub fn to_string_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("instance JSON is serializable")
    }

    /// The initial space, with the involution attached and checked if
    /// one was supplied. A broken involution surfaces here, not at
    /// load time, so verification suites can report it as a failure.
    pub fn space(&self) -> Result<InitialSpace> {
        match &self.involution {
            Some(j) => InitialSpace::with_involution(self.m, j.clone()),
            None => Ok(InitialSpace::new(self.m)),
        }
    }

    /// Looks up a named step function.
    pub fn function(&self, name: &str) -> Result<&StepFunction> {
        self.functions.get(name).ok_or_else(|| {
            parse_err(
                format!("functions.{name}"),
                "no step function with this name",
            )
        })
    }

    /// Builds the evaluation pair from two named functions; the empty
    /// name stands for the zero function.
    pub fn pair(&self, g_p_name: &str, g_name: &str) -> Result<ExpPair> {
        let left = self.resolve(g_p_name)?;
        let right = self.resolve(g_name)?;
        ExpPair::new(left, right)
    }

    fn resolve(&self, name: &str) -> Result<StepFunction> {
        if name.is_empty() {
            Ok(StepFunction::zero(self.d))
        } else {
            Ok(self.function(name)?.clone())
        }
    }
}
