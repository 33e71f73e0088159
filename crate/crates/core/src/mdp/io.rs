use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CostFn, FiniteMdp, Kernel, Space, StationaryPolicy};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// JSON layout of a space: `{"labels": [...], "coords": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceFile {
    pub labels: Vec<String>,
    pub coords: Vec<f64>,
}

/// JSON model document; `kernel` is indexed `[state][action][next_state]`
/// and `cost` is indexed `[state][action]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub states: SpaceFile,
    pub actions: SpaceFile,
    pub kernel: Vec<Vec<Vec<f64>>>,
    pub cost: Vec<Vec<f64>>,
}

/// JSON policy document: `{"choice": [action index per state]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyFile {
    pub choice: Vec<usize>,
}

pub(crate) fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::validation(path, e.into_inner().to_string())
    })
}

pub(crate) fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

fn prefixed(err: Error, prefix: &str) -> Error {
    match err {
        Error::Validation { path, message } => Error::Validation { path: format!("{prefix}.{path}"), message },
        other => other,
    }
}

impl<S: Scalar> FiniteMdp<S> {
    pub fn from_model_file(file: ModelFile) -> Result<Self> {
        let states = Space::new(file.states.labels, file.states.coords).map_err(|e| prefixed(e, "states"))?;
        let actions = Space::new(file.actions.labels, file.actions.coords).map_err(|e| prefixed(e, "actions"))?;
        if file.kernel.len() != states.len() {
            return Err(Error::validation(
                "kernel",
                format!("{} state rows, expected {}", file.kernel.len(), states.len()),
            ));
        }
        if let Some(x) = file.kernel.iter().position(|r| r.len() != actions.len()) {
            return Err(Error::validation(
                format!("kernel[{x}]"),
                format!("{} actions, expected {}", file.kernel[x].len(), actions.len()),
            ));
        }
        if file.cost.len() != states.len() {
            return Err(Error::validation(
                "cost",
                format!("{} state rows, expected {}", file.cost.len(), states.len()),
            ));
        }
        if let Some(x) = file.cost.iter().position(|r| r.len() != actions.len()) {
            return Err(Error::validation(
                format!("cost[{x}]"),
                format!("{} actions, expected {}", file.cost[x].len(), actions.len()),
            ));
        }
        let kernel = Kernel::new(
            file.kernel
                .into_iter()
                .map(|per_action| per_action.into_iter().map(|row| row.into_iter().map(S::lit).collect()).collect())
                .collect(),
        )?;
        let cost = CostFn::new(file.cost.into_iter().map(|row| row.into_iter().map(S::lit).collect()).collect())?;
        Self::new(states, actions, kernel, cost)
    }

    pub fn to_model_file(&self) -> ModelFile {
        ModelFile {
            states: SpaceFile { labels: self.states.labels.clone(), coords: self.states.coords.clone() },
            actions: SpaceFile { labels: self.actions.labels.clone(), coords: self.actions.coords.clone() },
            kernel: self
                .kernel
                .to_nested()
                .into_iter()
                .map(|per_action| {
                    per_action.into_iter().map(|row| row.into_iter().map(S::to_f64_lossy).collect()).collect()
                })
                .collect(),
            cost: self
                .cost
                .to_nested()
                .into_iter()
                .map(|row| row.into_iter().map(S::to_f64_lossy).collect())
                .collect(),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Self::from_model_file(parse_json(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&read_file(path)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_model_file()).expect("model serializes")
    }
}

impl StationaryPolicy {
    pub fn from_json_str(text: &str, n_actions: usize) -> Result<Self> {
        let file: PolicyFile = parse_json(text)?;
        Self::new(file.choice, n_actions)
    }

    pub fn load(path: &Path, n_actions: usize) -> Result<Self> {
        Self::from_json_str(&read_file(path)?, n_actions)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&PolicyFile { choice: self.choice().to_vec() }).expect("policy serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MODEL: &str = r#"{
        "states": {"labels": ["a", "b"], "coords": [0.0, 1.0]},
        "actions": {"labels": ["stay"], "coords": [0.0]},
        "kernel": [[[0.5, 0.5]], [[0.25, 0.75]]],
        "cost": [[1.0], [2.0]]
    }"#;

    #[test]
    fn loads_and_round_trips() {
        let mdp = FiniteMdp::<f64>::from_json_str(MODEL).unwrap();
        assert_eq!(mdp.kernel().prob(1, 0, 1), 0.75);
        let again = FiniteMdp::<f64>::from_json_str(&mdp.to_json_string()).unwrap();
        assert_eq!(mdp, again);
    }

    #[test]
    fn reports_first_offending_index() {
        let bad = MODEL.replace("[[0.25, 0.75]]", "[[0.25, 0.70]]");
        let err = FiniteMdp::<f64>::from_json_str(&bad).unwrap_err();
        assert!(err.to_string().contains("kernel[1][0]"), "{err}");

        let bad = MODEL.replace("\"cost\": [[1.0], [2.0]]", "\"cost\": [[1.0], [2.0, 3.0]]");
        let err = FiniteMdp::<f64>::from_json_str(&bad).unwrap_err();
        assert!(err.to_string().contains("cost[1]"), "{err}");

        let bad = MODEL.replace("\"coords\": [0.0, 1.0]", "\"coords\": [0.0]");
        let err = FiniteMdp::<f64>::from_json_str(&bad).unwrap_err();
        assert!(err.to_string().contains("states.coords"), "{err}");
    }

    #[test]
    fn type_errors_carry_a_json_path() {
        let bad = MODEL.replace("[[1.0], [2.0]]", "[[1.0], [\"x\"]]");
        let err = FiniteMdp::<f64>::from_json_str(&bad).unwrap_err();
        assert!(err.to_string().contains("cost[1][0]"), "{err}");
    }

    #[test]
    fn policy_file() {
        let p = StationaryPolicy::from_json_str(r#"{"choice": [0, 1, 1]}"#, 2).unwrap();
        assert_eq!(p.choice(), &[0, 1, 1]);
        assert!(StationaryPolicy::from_json_str(r#"{"choice": [0, 2]}"#, 2).is_err());
    }
}
