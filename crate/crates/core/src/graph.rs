//! Address-level transaction multigraph and its degree distributions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geostats::{EmpiricalDistribution, Unit};
use crate::model::Dataset;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    In,
    Out,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Degree {
    pub in_degree: usize,
    pub out_degree: usize,
}

/// One directed edge per record; parallel edges and self-loops are kept.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct UserGraph {
    degrees: BTreeMap<String, Degree>,
    edges: usize,
}

impl UserGraph {
    pub fn from_edges<'a>(edges: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let mut g = UserGraph::default();
        for (from, to) in edges {
            g.add(from, to);
        }
        g
    }

    fn add(&mut self, from: &str, to: &str) {
        self.degrees.entry(from.to_string()).or_default().out_degree += 1;
        self.degrees.entry(to.to_string()).or_default().in_degree += 1;
        self.edges += 1;
    }

    pub fn node_count(&self) -> usize {
        self.degrees.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges
    }

    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.degrees.keys().map(String::as_str)
    }

    pub fn degree(&self, address: &str) -> Option<Degree> {
        self.degrees.get(address).copied()
    }

    pub fn degrees(&self) -> &BTreeMap<String, Degree> {
        &self.degrees
    }

    pub fn in_degree(&self, address: &str) -> usize {
        self.degree(address).map_or(0, |d| d.in_degree)
    }

    pub fn out_degree(&self, address: &str) -> usize {
        self.degree(address).map_or(0, |d| d.out_degree)
    }
}

pub fn build_user_graph(ds: &Dataset) -> UserGraph {
    UserGraph::from_edges(
        ds.records()
            .iter()
            .map(|r| (r.sender.address_id.as_str(), r.receiver.address_id.as_str())),
    )
}

/// Per-node degrees, zeros included for nodes seen only in the other
/// direction.
pub fn degree_distribution<S: Scalar>(g: &UserGraph, direction: Direction) -> EmpiricalDistribution<S> {
    let v = g
        .degrees
        .values()
        .map(|d| {
            S::of_usize(match direction {
                Direction::In => d.in_degree,
                Direction::Out => d.out_degree,
            })
        })
        .collect();
    EmpiricalDistribution::from_finite(v, Unit::Count)
}
