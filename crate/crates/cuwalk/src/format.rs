//! JSON file formats.
//!
//! Complex numbers are `[re, im]` pairs and matrices are row-major:
//!
//! ```json
//! {"rows": 2, "cols": 2, "entries": [[1,0],[0,0],[0,0],[1,0]]}
//! ```
//!
//! Floats are written in shortest round-trip form, so reading a file back
//! reproduces every value bit for bit.

use std::fs;
use std::path::Path;

use cuwalk_core::channel::{build_classical_unitary, ClassicalUnitary};
use cuwalk_core::limit::{DriverSpec, LimitTensors, SdeModel};
use cuwalk_core::obtuse::{validate_obtuse, ObtuseSystem};
use cuwalk_core::presets::Preset;
use cuwalk_core::tensor3::ThreeTensor;
use cuwalk_core::{CMatrix, CVector, C64};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub type Complex = [f64; 2];

fn to_pair(z: C64) -> Complex {
    [z.re, z.im]
}

fn from_pair(p: &Complex) -> C64 {
    C64::new(p[0], p[1])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<Complex>,
}

impl From<&CMatrix> for MatrixJson {
    fn from(m: &CMatrix) -> Self {
        Self { rows: m.rows(), cols: m.cols(), entries: m.as_slice().iter().map(|z| to_pair(*z)).collect() }
    }
}

impl MatrixJson {
    pub fn to_matrix(&self) -> Result<CMatrix, CliError> {
        Ok(CMatrix::new(self.rows, self.cols, self.entries.iter().map(from_pair).collect())?)
    }
}

pub fn vector_json(v: &CVector) -> Vec<Complex> {
    v.iter().map(|z| to_pair(*z)).collect()
}

pub fn vector_from_json(v: &[Complex]) -> Result<CVector, CliError> {
    Ok(CVector::new(v.iter().map(from_pair).collect())?)
}

/// `{"dim": N, "vectors": [...], "probabilities": [...]}`; probabilities are
/// recomputed on input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObtuseJson {
    pub dim: usize,
    pub vectors: Vec<Vec<Complex>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<Vec<f64>>,
}

impl From<&ObtuseSystem> for ObtuseJson {
    fn from(s: &ObtuseSystem) -> Self {
        Self {
            dim: s.dim(),
            vectors: s.vectors().iter().map(vector_json).collect(),
            probabilities: Some(s.probabilities().to_vec()),
        }
    }
}

impl ObtuseJson {
    pub fn to_system(&self) -> Result<ObtuseSystem, CliError> {
        let vectors = self.vectors.iter().map(|v| vector_from_json(v)).collect::<Result<Vec<_>, _>>()?;
        if vectors.iter().any(|v| v.dim() != self.dim) {
            return Err(CliError::Input(format!("every vector must have dim = {}", self.dim)));
        }
        Ok(validate_obtuse(vectors)?)
    }
}

/// `{"n": N, "coeffs": [[i, j, k, re, im], ...]}` with indices in `0..=N`;
/// absent coefficients are zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorJson {
    pub n: usize,
    pub coeffs: Vec<(usize, usize, usize, f64, f64)>,
}

impl From<&ThreeTensor> for TensorJson {
    fn from(t: &ThreeTensor) -> Self {
        let coeffs = t.nonzero(0.0).into_iter().map(|(i, j, k, z)| (i, j, k, z.re, z.im)).collect();
        Self { n: t.n(), coeffs }
    }
}

impl TensorJson {
    pub fn to_tensor(&self) -> Result<ThreeTensor, CliError> {
        let mut t = ThreeTensor::zeros(self.n);
        for &(i, j, k, re, im) in &self.coeffs {
            if i > self.n || j > self.n || k > self.n {
                return Err(CliError::Input(format!("coefficient ({i},{j},{k}) outside 0..={}", self.n)));
            }
            if !(re.is_finite() && im.is_finite()) {
                return Err(CliError::Input(format!("coefficient ({i},{j},{k}) is not finite")));
            }
            t.set(i, j, k, C64::new(re, im));
        }
        Ok(t)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchJson {
    /// Environment state `φ_i`.
    pub state: Vec<Complex>,
    /// System unitary `U_i`.
    pub unitary: MatrixJson,
}

/// Quantities derived from the branches; written on output, ignored on
/// input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedJson {
    pub probabilities: Vec<f64>,
    pub values: Vec<Vec<Complex>>,
    pub a: MatrixJson,
    pub b: Vec<MatrixJson>,
    pub reconstruction_residual: f64,
}

/// A classical unitary given either by its branches or by the full
/// operator on `H ⊗ K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalUnitaryJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim_sys: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim_env: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branches: Option<Vec<BranchJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_total: Option<MatrixJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derived: Option<DerivedJson>,
}

impl From<&ClassicalUnitary> for ClassicalUnitaryJson {
    fn from(cu: &ClassicalUnitary) -> Self {
        let branches =
            cu.branches().iter().map(|(phi, u)| BranchJson { state: vector_json(phi), unitary: u.into() }).collect();
        Self {
            dim_sys: Some(cu.dim_sys()),
            dim_env: Some(cu.dim_env()),
            branches: Some(branches),
            u_total: None,
            derived: Some(derived_json(cu)),
        }
    }
}

pub fn derived_json(cu: &ClassicalUnitary) -> DerivedJson {
    DerivedJson {
        probabilities: cu.probabilities().to_vec(),
        values: cu.rv().system().vectors().iter().map(vector_json).collect(),
        a: cu.a().into(),
        b: cu.b().iter().map(MatrixJson::from).collect(),
        reconstruction_residual: cu.reconstruction_residual(),
    }
}

/// Tolerance used to recognise branch form in a bare `u_total`.
const BRANCH_FORM_TOL: f64 = 1e-9;

impl ClassicalUnitaryJson {
    pub fn to_classical_unitary(&self) -> Result<ClassicalUnitary, CliError> {
        if let Some(branches) = &self.branches {
            let parsed = branches
                .iter()
                .map(|b| Ok((vector_from_json(&b.state)?, b.unitary.to_matrix()?)))
                .collect::<Result<Vec<_>, CliError>>()?;
            let cu = build_classical_unitary(parsed)?;
            if self.dim_sys.is_some_and(|d| d != cu.dim_sys()) || self.dim_env.is_some_and(|d| d != cu.dim_env()) {
                return Err(CliError::Input("dim_sys/dim_env disagree with the branches".into()));
            }
            return Ok(cu);
        }
        let (Some(u), Some(ds), Some(de)) = (&self.u_total, self.dim_sys, self.dim_env) else {
            return Err(CliError::Input("need `branches`, or `u_total` with `dim_sys` and `dim_env`".into()));
        };
        let u = u.to_matrix()?;
        match cuwalk_core::channel::is_branch_form(&u, ds, de, BRANCH_FORM_TOL)? {
            Some(branches) => Ok(build_classical_unitary(branches)?),
            None => Err(CliError::Precondition("u_total is not of the form sum_i U_i (x) |phi_i><phi_i|".into())),
        }
    }
}

/// `{"preset": name, "p": .., "tau": ..}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyJson {
    pub preset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
}

impl FamilyJson {
    pub fn to_preset(&self) -> Result<Preset, CliError> {
        Ok(Preset::from_name(&self.preset, self.p, self.tau)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriverJson {
    pub n_brownian: usize,
    pub intensities: Vec<f64>,
    /// Columns: Brownian motions first, then Poisson processes.
    pub mixing: MatrixJson,
}

impl From<&DriverSpec> for DriverJson {
    fn from(d: &DriverSpec) -> Self {
        Self { n_brownian: d.n_brownian, intensities: d.intensities.clone(), mixing: (&d.mixing).into() }
    }
}

impl DriverJson {
    pub fn to_driver(&self) -> Result<DriverSpec, CliError> {
        Ok(DriverSpec::new(self.n_brownian, self.intensities.clone(), self.mixing.to_matrix()?)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelJson {
    /// Driver template that produced `driver`, when synthesized.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<String>,
    pub a_tilde: MatrixJson,
    pub b_tilde: Vec<MatrixJson>,
    pub driver: DriverJson,
}

impl From<&SdeModel> for ModelJson {
    fn from(m: &SdeModel) -> Self {
        Self {
            template: None,
            a_tilde: (&m.a_tilde).into(),
            b_tilde: m.b_tilde.iter().map(MatrixJson::from).collect(),
            driver: (&m.driver).into(),
        }
    }
}

impl ModelJson {
    pub fn to_model(&self) -> Result<SdeModel, CliError> {
        let b = self.b_tilde.iter().map(MatrixJson::to_matrix).collect::<Result<Vec<_>, _>>()?;
        Ok(SdeModel::new(self.a_tilde.to_matrix()?, b, self.driver.to_driver()?)?)
    }
}

/// Limit tensors with per-entry extrapolation errors; `m[k]` is the
/// matrix `(M^{ij}_k)_{ij}`, `k = 0..=N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitTensorsJson {
    pub n: usize,
    pub probe_hs: Vec<f64>,
    pub m: Vec<MatrixJson>,
    pub errors: Vec<Vec<f64>>,
    /// `[i, j, k]` with 1-based `i`, `j`.
    pub flagged: Vec<[usize; 3]>,
}

impl From<&LimitTensors> for LimitTensorsJson {
    fn from(t: &LimitTensors) -> Self {
        let n = t.n();
        let m = (0..=n).map(|k| MatrixJson::from(if k == 0 { t.m0() } else { t.mk(k) })).collect();
        let errors = (0..=n)
            .map(|k| (1..=n).flat_map(|i| (1..=n).map(move |j| (i, j))).map(|(i, j)| t.error(i, j, k)).collect())
            .collect();
        Self {
            n,
            probe_hs: t.probe_hs.clone(),
            m,
            errors,
            flagged: t.flagged.iter().map(|&(i, j, k)| [i, j, k]).collect(),
        }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn to_json_string<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serialisable report")
}

#[cfg(test)]
mod tests {
    use super::*;
    use cuwalk_core::limit::HFamily;
    use cuwalk_core::presets::dim2_example;

    #[test]
    fn matrix_round_trip_is_exact() {
        let m = CMatrix::from_fn(2, 3, |r, c| C64::new(0.1 * r as f64 + 1.0 / 3.0, -(c as f64) / 7.0));
        let text = serde_json::to_string(&MatrixJson::from(&m)).unwrap();
        let back: MatrixJson = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_matrix().unwrap(), m);
    }

    #[test]
    fn classical_unitary_round_trip() {
        let cu = dim2_example(0.3, 0.7).unwrap();
        let text = to_json_string(&ClassicalUnitaryJson::from(&cu));
        let back: ClassicalUnitaryJson = serde_json::from_str(&text).unwrap();
        let cu2 = back.to_classical_unitary().unwrap();
        assert!(cu2.u_total().distance(cu.u_total()) < 1e-14);
    }

    #[test]
    fn bare_operator_is_split_into_branches() {
        let cu = Preset::Dim2Poisson.build(0.1).unwrap();
        let json = ClassicalUnitaryJson {
            dim_sys: Some(2),
            dim_env: Some(2),
            branches: None,
            u_total: Some(cu.u_total().into()),
            derived: None,
        };
        let back = json.to_classical_unitary().unwrap();
        assert!(back.u_total().distance(cu.u_total()) < 1e-9);
        let mut probs = back.probabilities().to_vec();
        probs.sort_by(f64::total_cmp);
        let mut want = cu.probabilities().to_vec();
        want.sort_by(f64::total_cmp);
        assert!((probs[0] - want[0]).abs() < 1e-9);
    }

    #[test]
    fn tensor_indices_are_checked() {
        let bad = TensorJson { n: 1, coeffs: vec![(0, 0, 2, 1.0, 0.0)] };
        assert!(matches!(bad.to_tensor(), Err(CliError::Input(_))));
    }

    #[test]
    fn malformed_matrix_is_an_input_error() {
        let m = MatrixJson { rows: 2, cols: 2, entries: vec![[1.0, 0.0]] };
        assert!(matches!(m.to_matrix(), Err(CliError::Input(_))));
    }
}
