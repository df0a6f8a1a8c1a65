use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_column_simplex, EstimatorKind};
use crate::simplex::{is_simplex, SIMPLEX_TOL};

/// Parameters of one simulated scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub label: String,
    pub description: String,
    pub a0: u64,
    pub a: u64,
    pub q0: Vec<f64>,
    pub q: Vec<f64>,
    /// Rows are basket types, columns are segments.
    #[serde(with = "row_matrix")]
    pub r0: DMatrix<f64>,
    pub f0: Vec<f64>,
    pub alpha_r: Option<f64>,
    pub alpha_f: Option<f64>,
    /// Set when the last column of `r0` was replaced by the mean of the others.
    pub dependent_last_column: bool,
    pub replications: usize,
    pub master_seed: u64,
    /// Estimators evaluated besides naive and maximum likelihood.
    #[serde(default)]
    pub extra_estimators: Vec<EstimatorKind>,
}

/// Serializes a matrix as a list of rows.
pub mod row_matrix {
    use nalgebra::DMatrix;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("matrix rows must be non-empty and of equal length"));
        }
        Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
    }
}

pub const DEFAULT_REPLICATIONS: usize = 2000;
pub const DEFAULT_SEED: u64 = 20_190_314;

fn benchmark_r0() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        6,
        3,
        &[
            0.40, 0.10, 0.10, //
            0.20, 0.10, 0.10, //
            0.10, 0.40, 0.10, //
            0.10, 0.20, 0.10, //
            0.10, 0.10, 0.40, //
            0.10, 0.10, 0.20,
        ],
    )
}

/// The benchmark scenario: six basket types, three segments, 10^6 transactions per sample.
pub fn benchmark_parameters() -> ScenarioConfig {
    ScenarioConfig {
        label: "ii".into(),
        description: "Benchmark scenario".into(),
        a0: 1_000_000,
        a: 1_000_000,
        q0: vec![0.6, 0.2, 0.2],
        q: vec![0.2, 0.2, 0.6],
        r0: benchmark_r0(),
        f0: vec![6.0, 3.0, 1.5],
        alpha_r: None,
        alpha_f: None,
        dependent_last_column: false,
        replications: DEFAULT_REPLICATIONS,
        master_seed: DEFAULT_SEED,
        extra_estimators: Vec::new(),
    }
}

/// Replaces the last column with the average of the preceding columns.
pub fn make_last_column_dependent(r: &mut DMatrix<f64>) {
    let m = r.ncols();
    for i in 0..r.nrows() {
        let avg = (0..m - 1).map(|j| r[(i, j)]).sum::<f64>() / (m - 1) as f64;
        r[(i, m - 1)] = avg;
    }
}

/// The nine benchmark scenarios, labeled `i` to `ix`.
pub fn scenario_catalog() -> Vec<ScenarioConfig> {
    let base = benchmark_parameters();
    let with = |label: &str, description: &str, edit: &dyn Fn(&mut ScenarioConfig)| {
        let mut c = base.clone();
        c.label = label.into();
        c.description = description.into();
        edit(&mut c);
        c
    };
    vec![
        with("i", "No change in q", &|c| c.q = c.q0.clone()),
        base.clone(),
        with("iii", "Small a0 = 1000", &|c| c.a0 = 1000),
        with("iv", "Small a = 1000", &|c| c.a = 1000),
        with("v", "Small a0 = a = 1000", &|c| {
            c.a0 = 1000;
            c.a = 1000;
        }),
        with("vi", "Change in r", &|c| c.alpha_r = Some(100.0)),
        with("vii", "Change in f", &|c| c.alpha_f = Some(100.0)),
        with("viii", "Change in r and f", &|c| {
            c.alpha_r = Some(100.0);
            c.alpha_f = Some(100.0);
        }),
        with("ix", "Linear dependence in r", &|c| {
            make_last_column_dependent(&mut c.r0);
            c.dependent_last_column = true;
        }),
    ]
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let m = self.r0.ncols();
        if self.q0.len() != m || self.q.len() != m || self.f0.len() != m {
            return Err(Error::dim(format!(
                "scenario {}: q0, q and f0 must have {m} entries",
                self.label
            )));
        }
        if !is_simplex(&self.q0, SIMPLEX_TOL) || !is_simplex(&self.q, SIMPLEX_TOL) {
            return Err(Error::input(format!("scenario {}: q0 and q must be probability vectors", self.label)));
        }
        check_column_simplex(&self.r0)?;
        if self.f0.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::input(format!("scenario {}: frequencies must be positive", self.label)));
        }
        if self.replications == 0 {
            return Err(Error::input("at least one replication is required"));
        }
        for alpha in [self.alpha_r, self.alpha_f].into_iter().flatten() {
            if !(alpha > 0.0) {
                return Err(Error::input(format!("concentration multiplier must be positive, got {alpha}")));
            }
        }
        Ok(())
    }

    /// Expected unique customers behind `a` transactions with mix `q` and frequencies `f`.
    pub fn expected_customers(a: u64, q: &[f64], f: &[f64]) -> f64 {
        a as f64 * q.iter().zip(f).map(|(qj, fj)| qj / fj).sum::<f64>()
    }
}
