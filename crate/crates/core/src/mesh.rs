//! Graded 1D and radial node sets with exact boundary distances.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

/// Computational domain: a symmetric interval `(0, L)` or a ball of
/// radius `R` in dimension `N`, reduced to its radial coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Geometry {
    Interval { length: f64 },
    Ball { radius: f64, dim: u32 },
}

/// Node set with per-node exact boundary distance. Grading exponent
/// `q >= 1` clusters nodes toward the boundary with spacing
/// `~ d^{1-1/q}/n`.
#[derive(Debug)]
pub struct Mesh {
    geometry: Geometry,
    nodes: Vec<f64>,
    distance: Vec<f64>,
    q: f64,
}

pub fn build_mesh(geometry: Geometry, n: usize, q: f64) -> Result<Arc<Mesh>> {
    if n < 4 {
        return Err(Error::invalid("n", format!("{n} cells is too small (need >= 4)")));
    }
    if !(q >= 1.0) {
        return Err(Error::invalid("q", format!("{q} must be >= 1")));
    }
    let (nodes, distance) = match geometry {
        Geometry::Interval { length } => {
            if !(length > 0.0) {
                return Err(Error::invalid("length", format!("{length}")));
            }
            // Symmetric two-sided grading map m(t) = t^q / (t^q + (1-t)^q);
            // the right half mirrors the left exactly, distances included.
            let mut nodes = vec![0.0; n + 1];
            let mut distance = vec![0.0; n + 1];
            for i in 0..=n / 2 {
                let t = i as f64 / n as f64;
                let tq = t.powf(q);
                let m = tq / (tq + (1.0 - t).powf(q));
                nodes[i] = length * m;
                nodes[n - i] = length - nodes[i];
                distance[i] = nodes[i];
                distance[n - i] = nodes[i];
            }
            (nodes, distance)
        }
        Geometry::Ball { radius, dim } => {
            if !(radius > 0.0) {
                return Err(Error::invalid("radius", format!("{radius}")));
            }
            if dim < 1 {
                return Err(Error::invalid("dim", format!("{dim}")));
            }
            // One-sided grading toward r = R: d = R (1-t)^q exactly.
            let mut nodes = Vec::with_capacity(n + 1);
            let mut distance = Vec::with_capacity(n + 1);
            for i in 0..=n {
                let u = (n - i) as f64 / n as f64;
                let d = radius * u.powf(q);
                nodes.push(radius - d);
                distance.push(d);
            }
            (nodes, distance)
        }
    };
    for w in nodes.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::Table(format!(
                "degenerate mesh: nodes {} and {} are not increasing",
                w[0], w[1]
            )));
        }
    }
    Ok(Arc::new(Mesh {
        geometry,
        nodes,
        distance,
        q,
    }))
}

impl Mesh {
    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Exact distance to the boundary per node.
    pub fn distance(&self) -> &[f64] {
        &self.distance
    }

    pub fn grading(&self) -> f64 {
        self.q
    }

    pub fn n_cells(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Global indices of the unknowns: the ball keeps its center (a
    /// symmetry point, not a boundary), the interval drops both ends.
    pub fn interior(&self) -> std::ops::Range<usize> {
        match self.geometry {
            Geometry::Interval { .. } => 1..self.nodes.len() - 1,
            Geometry::Ball { .. } => 0..self.nodes.len() - 1,
        }
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        !self.interior().contains(&i)
    }

    pub fn min_cell(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest boundary distance in the domain (L/2 or R).
    pub fn domain_radius(&self) -> f64 {
        match self.geometry {
            Geometry::Interval { length } => 0.5 * length,
            Geometry::Ball { radius, .. } => radius,
        }
    }
}

/// Nodal scalar values on a mesh.
#[derive(Clone, Debug)]
pub struct Field {
    mesh: Arc<Mesh>,
    pub values: Vec<f64>,
}

impl Field {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.nodes().len() {
            return Err(Error::invalid(
                "values",
                format!(
                    "length {} does not match node count {}",
                    values.len(),
                    mesh.nodes().len()
                ),
            ));
        }
        Ok(Self { mesh, values })
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let n = mesh.nodes().len();
        Self {
            mesh,
            values: vec![0.0; n],
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}
