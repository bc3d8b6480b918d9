//! Double-bubble generating configurations: trees of annular bands, realized
//! arc diagrams, and the instability audit.
//!
//! A configuration is a set of traced arcs with region adjacency on each
//! side, triple junctions, and optional region pressures. The associated
//! tree has the bottom component at its root; the root carries at most one
//! branch and the two bottom caps are pieces of spheres.

mod audit;
mod realize;

pub use audit::{audit, AdmissionError, AuditFinding, AuditReport, StackSummary, VertexSummary};
pub use realize::{
    realize, standard_configuration, standard_junction, BoundarySpec, PressureSpec,
    RealizeError, RealizeSpec, Realized, ResidualReport, ShootingInit, ShootingOptions,
    ShootingSpec,
};

use crate::delaunay::{EventKind, GeneratingCurve, TraceEvent};
use crate::junctions::{ArcEnd, RegionPressures, VertexGeometry, VertexSide};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// What lies on one side of an arc.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionLabel {
    Region1,
    Region2,
    Exterior,
}

impl RegionLabel {
    pub fn pressure(&self, p: &RegionPressures) -> f64 {
        match self {
            RegionLabel::Region1 => p.h1(),
            RegionLabel::Region2 => p.h2(),
            RegionLabel::Exterior => 0.0,
        }
    }
}

/// An arc of a configuration with its region adjacency. The arc's normal
/// `N = (sin theta, -cos theta)` points into the `right` region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigArc {
    pub curve: GeneratingCurve,
    pub left: RegionLabel,
    pub right: RegionLabel,
}

/// An arc end on the axis, with the smoothness residual `|cos theta|` there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisEndpoint {
    pub arc: usize,
    pub end: ArcEnd,
    pub x: f64,
    pub cos_theta_residual: f64,
}

/// A double-bubble generating diagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub arcs: Vec<ConfigArc>,
    pub vertices: Vec<VertexGeometry>,
    pub pressures: Option<RegionPressures>,
    pub axis_endpoints: Vec<AxisEndpoint>,
}

/// Where an arc end attaches in the 1-complex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Attachment {
    Vertex(usize),
    /// Cluster index of coincident axis endpoints.
    Axis(usize),
    Free,
}

impl Configuration {
    /// A bare one-arc configuration (no vertices, no pressures); the form
    /// used to audit individual traced curves.
    pub fn single_arc(curve: GeneratingCurve) -> Self {
        let mut axis_endpoints = Vec::new();
        for ev in &curve.events {
            if ev.kind == EventKind::AxisApproach {
                axis_endpoints.push(AxisEndpoint {
                    arc: 0,
                    end: ArcEnd::Finish,
                    x: ev.state.x,
                    cos_theta_residual: ev.state.theta.cos().abs(),
                });
            }
        }
        Self {
            arcs: vec![ConfigArc {
                curve,
                left: RegionLabel::Exterior,
                right: RegionLabel::Region1,
            }],
            vertices: Vec::new(),
            pressures: None,
            axis_endpoints,
        }
    }

    /// Characteristic length: the largest arc height.
    pub fn scale(&self) -> f64 {
        self.arcs
            .iter()
            .flat_map(|a| a.curve.states.iter())
            .map(|s| s.y)
            .fold(0.0, f64::max)
            .max(1e-12)
    }

    /// Per-arc attachments `(start, end)` in the 1-complex: vertices by the
    /// vertex table, coincident axis endpoints clustered by position.
    pub fn attachments(&self) -> Vec<(Attachment, Attachment)> {
        let mut out = vec![(Attachment::Free, Attachment::Free); self.arcs.len()];
        for (vi, v) in self.vertices.iter().enumerate() {
            for inc in &v.incident {
                if inc.arc >= out.len() {
                    continue;
                }
                match inc.end {
                    ArcEnd::Start => out[inc.arc].0 = Attachment::Vertex(vi),
                    ArcEnd::Finish => out[inc.arc].1 = Attachment::Vertex(vi),
                }
            }
        }
        // Cluster axis endpoints within a tolerance of the diagram scale.
        let tol = 1e-6 * self.scale();
        let mut clusters: Vec<f64> = Vec::new();
        for ep in &self.axis_endpoints {
            let cluster = clusters
                .iter()
                .position(|&cx| (cx - ep.x).abs() <= tol)
                .unwrap_or_else(|| {
                    clusters.push(ep.x);
                    clusters.len() - 1
                });
            if ep.arc < out.len() {
                match ep.end {
                    ArcEnd::Start => out[ep.arc].0 = Attachment::Axis(cluster),
                    ArcEnd::Finish => out[ep.arc].1 = Attachment::Axis(cluster),
                }
            }
        }
        out
    }

    /// Mirror the configuration through the vertical line `x = 0`.
    ///
    /// States map as `(x, y, theta) -> (-x, y, pi - theta)`; the normal
    /// orientation flips, so `H -> -H` and `F -> -F`, region sides swap, and
    /// limiting axis signs flip. Rotation notches negate under this map.
    pub fn reflect_x(&self) -> Self {
        use crate::junctions::AxisSign;
        let arcs = self
            .arcs
            .iter()
            .map(|a| {
                let params = a.curve.params.flipped();
                let states = a
                    .curve
                    .states
                    .iter()
                    .map(|s| crate::delaunay::CurveState {
                        x: -s.x,
                        y: s.y,
                        theta: std::f64::consts::PI - s.theta,
                        t: s.t,
                    })
                    .collect();
                let events = a
                    .curve
                    .events
                    .iter()
                    .map(|ev| TraceEvent {
                        kind: match ev.kind {
                            EventKind::XBound { min, max } => {
                                EventKind::XBound { min: -max, max: -min }
                            }
                            EventKind::AngleReaches(phi) => {
                                EventKind::AngleReaches(std::f64::consts::PI - phi)
                            }
                            other => other,
                        },
                        state: crate::delaunay::CurveState {
                            x: -ev.state.x,
                            y: ev.state.y,
                            theta: std::f64::consts::PI - ev.state.theta,
                            t: ev.state.t,
                        },
                    })
                    .collect();
                ConfigArc {
                    curve: GeneratingCurve {
                        params,
                        states,
                        force: -a.curve.force,
                        force_drift: a.curve.force_drift,
                        events,
                        class: a.curve.class,
                    },
                    left: a.right,
                    right: a.left,
                }
            })
            .collect();

        let vertices = self
            .vertices
            .iter()
            .map(|v| {
                let mut incident = v.incident;
                for inc in &mut incident {
                    inc.tangent = std::f64::consts::PI - inc.tangent;
                    inc.curvature = -inc.curvature;
                    inc.endpoint = (-inc.endpoint.0, inc.endpoint.1);
                    inc.limit_f = inc.limit_f.map(|s| match s {
                        AxisSign::PlusInfinity => AxisSign::MinusInfinity,
                        AxisSign::MinusInfinity => AxisSign::PlusInfinity,
                    });
                }
                VertexGeometry {
                    position: (-v.position.0, v.position.1),
                    incident,
                    side: match v.side {
                        VertexSide::Left => VertexSide::Right,
                        VertexSide::Right => VertexSide::Left,
                    },
                }
            })
            .collect();

        Self {
            arcs,
            vertices,
            pressures: self.pressures,
            axis_endpoints: self
                .axis_endpoints
                .iter()
                .map(|ep| AxisEndpoint { x: -ep.x, ..*ep })
                .collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// Configuration trees
// ---------------------------------------------------------------------------

/// One component of the associated tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub id: usize,
    /// Region label, 1 or 2.
    pub region: u8,
    pub parent: Option<usize>,
    #[serde(default)]
    pub children: Vec<usize>,
}

/// The tree of components: the root is the bottom component; a single-node
/// tree denotes the standard double bubble itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigTree {
    pub nodes: Vec<TreeNode>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("tree has no root (a node with no parent)")]
    NoRoot,
    #[error("tree has multiple roots: nodes {0} and {1}")]
    MultipleRoots(usize, usize),
    #[error("the root may have at most one branch, found {0}")]
    RootBranching(usize),
    #[error("node {child} lists parent {parent}, but the parent does not list it as a child")]
    InconsistentLink { parent: usize, child: usize },
    #[error("node {0} has region label {1}; labels must be 1 or 2")]
    BadRegion(usize, u8),
    #[error("adjacent components {parent} and {child} share region label {region}")]
    LabelClash { parent: usize, child: usize, region: u8 },
    #[error("unknown node id {0}")]
    UnknownId(usize),
    #[error("duplicate node id {0}")]
    DuplicateId(usize),
    #[error("tree is not connected or contains a cycle")]
    NotATree,
}

impl ConfigTree {
    pub fn validate(&self) -> Result<(), TreeError> {
        let mut by_id = std::collections::BTreeMap::new();
        for node in &self.nodes {
            if by_id.insert(node.id, node).is_some() {
                return Err(TreeError::DuplicateId(node.id));
            }
            if node.region != 1 && node.region != 2 {
                return Err(TreeError::BadRegion(node.id, node.region));
            }
        }
        let mut root = None;
        for node in &self.nodes {
            match node.parent {
                None => match root {
                    None => root = Some(node.id),
                    Some(r) => return Err(TreeError::MultipleRoots(r, node.id)),
                },
                Some(p) => {
                    let parent = by_id.get(&p).ok_or(TreeError::UnknownId(p))?;
                    if !parent.children.contains(&node.id) {
                        return Err(TreeError::InconsistentLink { parent: p, child: node.id });
                    }
                    if parent.region == node.region {
                        return Err(TreeError::LabelClash {
                            parent: p,
                            child: node.id,
                            region: node.region,
                        });
                    }
                }
            }
        }
        let root = root.ok_or(TreeError::NoRoot)?;
        let root_node = by_id[&root];
        if root_node.children.len() > 1 {
            return Err(TreeError::RootBranching(root_node.children.len()));
        }
        // Reachability from the root covers every node exactly once.
        let mut seen = std::collections::BTreeSet::new();
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            if !seen.insert(id) {
                return Err(TreeError::NotATree);
            }
            let node = by_id.get(&id).ok_or(TreeError::UnknownId(id))?;
            for &c in &node.children {
                if !by_id.contains_key(&c) {
                    return Err(TreeError::UnknownId(c));
                }
                stack.push(c);
            }
        }
        if seen.len() != self.nodes.len() {
            return Err(TreeError::NotATree);
        }
        Ok(())
    }

    pub fn root(&self) -> Option<&TreeNode> {
        self.nodes.iter().find(|n| n.parent.is_none())
    }

    pub fn node(&self, id: usize) -> Option<&TreeNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// The path root -> leaf when every node has at most one child.
    pub fn chain(&self) -> Option<Vec<usize>> {
        let mut out = Vec::new();
        let mut cur = self.root()?;
        loop {
            out.push(cur.id);
            match cur.children.len() {
                0 => return Some(out),
                1 => cur = self.node(cur.children[0])?,
                _ => return None,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(id: usize, region: u8, parent: Option<usize>, children: Vec<usize>) -> TreeNode {
        TreeNode { id, region, parent, children }
    }

    #[test]
    fn validates_single_node() {
        let t = ConfigTree { nodes: vec![node(0, 1, None, vec![])] };
        t.validate().unwrap();
        assert_eq!(t.chain().unwrap(), vec![0]);
    }

    #[test]
    fn validates_chain() {
        let t = ConfigTree {
            nodes: vec![
                node(0, 1, None, vec![1]),
                node(1, 2, Some(0), vec![2]),
                node(2, 1, Some(1), vec![]),
            ],
        };
        t.validate().unwrap();
        assert_eq!(t.chain().unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn rejects_branching_root() {
        let t = ConfigTree {
            nodes: vec![
                node(0, 1, None, vec![1, 2]),
                node(1, 2, Some(0), vec![]),
                node(2, 2, Some(0), vec![]),
            ],
        };
        assert_eq!(t.validate(), Err(TreeError::RootBranching(2)));
    }

    #[test]
    fn rejects_label_clash() {
        let t = ConfigTree {
            nodes: vec![node(0, 1, None, vec![1]), node(1, 1, Some(0), vec![])],
        };
        assert!(matches!(t.validate(), Err(TreeError::LabelClash { .. })));
    }

    #[test]
    fn rejects_orphan_and_cycle() {
        let t = ConfigTree {
            nodes: vec![node(0, 1, None, vec![1]), node(1, 2, Some(0), vec![]), node(7, 1, Some(9), vec![])],
        };
        assert!(t.validate().is_err());
    }
}
