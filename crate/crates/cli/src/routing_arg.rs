use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::Context;
use routecap::routing::{degree_biased, shortest_path_routing, uniform_random_walk};
use routecap::{Graph, RoutingSpec, TransitionMatrix};
use serde::{Serialize, Serializer};

/// Routing choice as given on the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum RoutingArg {
    Walk,
    DegreeBiased(f64),
    ShortestPath,
    Matrix(PathBuf),
}

impl RoutingArg {
    pub fn build(&self, g: &Graph) -> anyhow::Result<RoutingSpec> {
        let spec = match self {
            Self::Walk => RoutingSpec::Local(uniform_random_walk(g)),
            Self::DegreeBiased(beta) => RoutingSpec::Local(degree_biased(g, *beta)),
            Self::ShortestPath => shortest_path_routing(g)?,
            Self::Matrix(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let p = TransitionMatrix::parse(&text, g.n()).with_context(|| format!("parsing {}", path.display()))?;
                RoutingSpec::Local(p)
            }
        };
        spec.validate(g)?;
        Ok(spec)
    }

    pub fn input_path(&self) -> Option<&PathBuf> {
        match self {
            Self::Matrix(path) => Some(path),
            _ => None,
        }
    }
}

impl FromStr for RoutingArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "walk" => return Ok(Self::Walk),
            "shortest-path" => return Ok(Self::ShortestPath),
            _ => {}
        }
        if let Some(beta) = s.strip_prefix("degree-biased:") {
            let beta: f64 = beta.parse().map_err(|_| format!("`{beta}` is not a number"))?;
            if !beta.is_finite() {
                return Err(format!("beta must be finite, got {beta}"));
            }
            return Ok(Self::DegreeBiased(beta));
        }
        if let Some(path) = s.strip_prefix("matrix:") {
            if path.is_empty() {
                return Err("matrix: needs a file path".into());
            }
            return Ok(Self::Matrix(PathBuf::from(path)));
        }
        Err(format!(
            "unknown routing `{s}` (expected walk, degree-biased:<beta>, shortest-path or matrix:<path>)"
        ))
    }
}

impl fmt::Display for RoutingArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Walk => f.write_str("walk"),
            Self::DegreeBiased(beta) => write!(f, "degree-biased:{beta}"),
            Self::ShortestPath => f.write_str("shortest-path"),
            Self::Matrix(path) => write!(f, "matrix:{}", path.display()),
        }
    }
}

impl Serialize for RoutingArg {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}
