//! Scenario files: a versioned TOML document mirroring [`Scenario`] plus
//! optional sweep blocks.
//!
//! Matrices are written row-major with explicit dimensions,
//! `{ rows = 2, cols = 2, data = [1.0, 0.0, 0.0, 0.0001] }`. Units: inertia kg,
//! damping N s/m, stiffness N/m, positions m, velocities m/s, efforts N, times s.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controllers::{AgentObjective, References};
use crate::dynamics::{ImpedanceParams, State};
use crate::linalg::{Matrix, Vector};
use crate::riccati::CrossEffort;
use crate::simulation::{Scenario, SweepParam, DEFAULT_COST_WINDOW};

/// Schema tag every scenario file must carry.
pub const SCHEMA: &str = "coopgame.scenario/1";

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unsupported schema `{found}` (expected `{SCHEMA}`)")]
    Schema { found: String },
    #[error("invalid field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid { field: field.into(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub rows: usize,
    pub cols: usize,
    /// Row-major entries.
    pub data: Vec<f64>,
}

impl MatrixSpec {
    pub fn to_matrix(&self, field: &str) -> Result<Matrix, ScenarioError> {
        if self.data.len() != self.rows * self.cols {
            return Err(invalid(
                field,
                format!("{}x{} matrix needs {} entries, got {}", self.rows, self.cols, self.rows * self.cols, self.data.len()),
            ));
        }
        if !self.data.iter().all(|x| x.is_finite()) {
            return Err(invalid(field, "entries must be finite"));
        }
        Ok(Matrix::from_row_slice(self.rows, self.cols, &self.data))
    }

    pub fn from_matrix(m: &Matrix) -> Self {
        let data = (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| (i, j))).map(|ij| m[ij]).collect();
        Self { rows: m.nrows(), cols: m.ncols(), data }
    }

    fn square(&self, field: &str, n: usize) -> Result<Matrix, ScenarioError> {
        if self.rows != n || self.cols != n {
            return Err(invalid(field, format!("expected {n}x{n}, got {}x{}", self.rows, self.cols)));
        }
        self.to_matrix(field)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSpec {
    pub dof: usize,
    pub inertia: MatrixSpec,
    pub damping: MatrixSpec,
    pub stiffness: MatrixSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec {
    pub q_on_href: MatrixSpec,
    pub q_on_rref: MatrixSpec,
    pub r_self: MatrixSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferencesSpec {
    pub human: Vec<f64>,
    pub robot: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub controller: String,
    pub alpha: f64,
    pub duration: f64,
    pub dt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_window: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_position: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_velocity: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossEffortSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_on_robot: Option<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robot_on_human: Option<MatrixSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub param: String,
    pub values: Vec<f64>,
}

/// On-disk layout of a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema: String,
    pub plant: PlantSpec,
    pub human: ObjectiveSpec,
    pub robot: ObjectiveSpec,
    pub references: ReferencesSpec,
    pub run: RunSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_effort: Option<CrossEffortSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepSpec>,
}

/// A parsed sweep block.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepBlock {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

/// A validated scenario together with its sweep blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioDocument {
    pub scenario: Scenario,
    pub sweeps: Vec<SweepBlock>,
}

fn objective(spec: &ObjectiveSpec, who: &str, n: usize) -> Result<AgentObjective, ScenarioError> {
    let q_h = spec.q_on_href.square(&format!("{who}.q_on_href"), 2 * n)?;
    let q_r = spec.q_on_rref.square(&format!("{who}.q_on_rref"), 2 * n)?;
    let r = spec.r_self.square(&format!("{who}.r_self"), n)?;
    AgentObjective::new(q_h, q_r, r).map_err(|e| invalid(who, e.to_string()))
}

fn vector(field: &str, data: &[f64], len: usize) -> Result<Vector, ScenarioError> {
    if data.len() != len {
        return Err(invalid(field, format!("expected {len} entries, got {}", data.len())));
    }
    if !data.iter().all(|x| x.is_finite()) {
        return Err(invalid(field, "entries must be finite"));
    }
    Ok(Vector::from_column_slice(data))
}

impl ScenarioFile {
    pub fn to_document(&self) -> Result<ScenarioDocument, ScenarioError> {
        if self.schema != SCHEMA {
            return Err(ScenarioError::Schema { found: self.schema.clone() });
        }
        let n = self.plant.dof;
        if n == 0 {
            return Err(invalid("plant.dof", "must be at least 1"));
        }
        let plant = ImpedanceParams::new(
            self.plant.inertia.square("plant.inertia", n)?,
            self.plant.damping.square("plant.damping", n)?,
            self.plant.stiffness.square("plant.stiffness", n)?,
        )
        .map_err(|e| invalid("plant", e.to_string()))?;
        let human = objective(&self.human, "human", n)?;
        let robot = objective(&self.robot, "robot", n)?;
        let refs = References::new(
            vector("references.human", &self.references.human, 2 * n)?,
            vector("references.robot", &self.references.robot, 2 * n)?,
        )
        .map_err(|e| invalid("references", e.to_string()))?;

        let run = &self.run;
        let pos = match &run.initial_position {
            Some(p) => vector("run.initial_position", p, n)?,
            None => Vector::zeros(n),
        };
        let vel = match &run.initial_velocity {
            Some(v) => vector("run.initial_velocity", v, n)?,
            None => Vector::zeros(n),
        };
        let cost_window = run.cost_window.map_or(DEFAULT_COST_WINDOW, |[a, b]| (a, b));

        let mut cross = CrossEffort::default();
        if let Some(spec) = &self.cross_effort {
            if let Some(m) = &spec.human_on_robot {
                cross.human_on_robot = Some(m.square("cross_effort.human_on_robot", n)?);
            }
            if let Some(m) = &spec.robot_on_human {
                cross.robot_on_human = Some(m.square("cross_effort.robot_on_human", n)?);
            }
        }

        let scenario = Scenario {
            plant,
            human,
            robot,
            refs,
            alpha: run.alpha,
            controller: run.controller.clone(),
            duration: run.duration,
            dt: run.dt,
            initial_state: State { pos, vel },
            cost_window,
            cross,
        };
        scenario.validate().map_err(|e| invalid("run", e.to_string()))?;

        let sweeps = self
            .sweep
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let param = s.param.parse().map_err(|e: String| invalid(format!("sweep[{i}].param"), e))?;
                if s.values.is_empty() {
                    return Err(invalid(format!("sweep[{i}].values"), "must not be empty"));
                }
                Ok(SweepBlock { param, values: s.values.clone() })
            })
            .collect::<Result<_, _>>()?;
        Ok(ScenarioDocument { scenario, sweeps })
    }

    pub fn from_document(doc: &ScenarioDocument) -> Self {
        let s = &doc.scenario;
        let obj = |o: &AgentObjective| ObjectiveSpec {
            q_on_href: MatrixSpec::from_matrix(&o.q_on_href),
            q_on_rref: MatrixSpec::from_matrix(&o.q_on_rref),
            r_self: MatrixSpec::from_matrix(&o.r_self),
        };
        let cross = (s.cross.human_on_robot.is_some() || s.cross.robot_on_human.is_some()).then(|| CrossEffortSpec {
            human_on_robot: s.cross.human_on_robot.as_ref().map(MatrixSpec::from_matrix),
            robot_on_human: s.cross.robot_on_human.as_ref().map(MatrixSpec::from_matrix),
        });
        ScenarioFile {
            schema: SCHEMA.to_string(),
            plant: PlantSpec {
                dof: s.plant.dof(),
                inertia: MatrixSpec::from_matrix(s.plant.inertia()),
                damping: MatrixSpec::from_matrix(s.plant.damping()),
                stiffness: MatrixSpec::from_matrix(s.plant.stiffness()),
            },
            human: obj(&s.human),
            robot: obj(&s.robot),
            references: ReferencesSpec {
                human: s.refs.human.iter().copied().collect(),
                robot: s.refs.robot.iter().copied().collect(),
            },
            run: RunSpec {
                controller: s.controller.clone(),
                alpha: s.alpha,
                duration: s.duration,
                dt: s.dt,
                cost_window: Some([s.cost_window.0, s.cost_window.1]),
                initial_position: Some(s.initial_state.pos.iter().copied().collect()),
                initial_velocity: Some(s.initial_state.vel.iter().copied().collect()),
            },
            cross_effort: cross,
            sweep: doc
                .sweeps
                .iter()
                .map(|b| SweepSpec { param: b.param.name().to_string(), values: b.values.clone() })
                .collect(),
        }
    }
}

pub fn parse_scenario(text: &str) -> Result<ScenarioDocument, ScenarioError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    file.to_document()
}

pub fn load_scenario(path: &Path) -> Result<ScenarioDocument, ScenarioError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
    parse_scenario(&text)
}

pub fn to_toml(doc: &ScenarioDocument) -> String {
    toml::to_string(&ScenarioFile::from_document(doc)).expect("scenario file serializes")
}
