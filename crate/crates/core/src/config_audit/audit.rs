//! The combined instability audit: separating sets, rotation notches,
//! leaf/stack classification, stack ordering, pressure checks, and root
//! constraints, evaluated on a realized configuration.
//!
//! Band structure is reconstructed from the vertex table. Each band vertex
//! lists its incident arcs as `[parent-side, interface, outer]`; the
//! interface is validated as the one incident arc without the exterior on
//! either side. Rule evaluations are pure and deterministic; every violated
//! rule is reported with a semantic id and a geometric witness.

use super::{Configuration, RegionLabel};
use crate::axis_map::{
    audit_class, separating_audit, vertex_notch, AxisPoint, ResolutionError, SeparatingReport,
    SeparatingViolation,
};
use crate::config_audit::realize::{incident_axis_value, measure_residuals, ResidualReport};
use crate::delaunay::DelaunayClass;
use crate::junctions::{outer_boundary_check, ArcEnd, VertexSide};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Closure residual above which auditing is refused.
pub const ADMISSION_TOL: f64 = 1e-6;

/// Strictness margin (scale-relative) for the stack ordering inequality.
const ORDER_MARGIN: f64 = 1e-9;

/// Tolerance for the shared-invariants check on outer boundaries.
const OUTER_TOL: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum AdmissionError {
    #[error("closure residual {closure:.3e} exceeds the admission threshold {threshold:.3e}")]
    ResidualsTooLarge { closure: f64, threshold: f64 },
    #[error("configuration has band vertices but carries no region pressures")]
    MissingPressures,
    #[error("vertex {vertex} does not follow the [parent, interface, outer] layout: {reason}")]
    BadVertexLayout { vertex: usize, reason: String },
    #[error(transparent)]
    Resolution(#[from] ResolutionError),
}

/// One violated audit rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditFinding {
    /// Semantic rule id, e.g. `separating-cross-arc` or `leaf-near-graph`.
    pub rule: String,
    pub arcs: Vec<usize>,
    pub vertices: Vec<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexSummary {
    pub vertex: usize,
    pub side: VertexSide,
    pub notch: Option<i32>,
}

/// A reconstructed band: an annular component between its interface and its
/// outer boundary pieces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackSummary {
    pub interface_arc: usize,
    pub outer_arcs: Vec<usize>,
    pub left_vertex: usize,
    pub right_vertex: usize,
    /// Parent band index; `None` when attached to the root component.
    pub parent: Option<usize>,
    pub region: RegionLabel,
    pub right_side_up: bool,
    pub is_leaf: bool,
    pub notches: (Option<i32>, Option<i32>),
    pub near_graph: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub resolution: f64,
    pub residuals: ResidualReport,
    pub vertices: Vec<VertexSummary>,
    pub bands: Vec<StackSummary>,
    pub separating: SeparatingReport,
    pub findings: Vec<AuditFinding>,
}

impl AuditReport {
    pub fn clean(&self) -> bool {
        self.findings.is_empty()
    }
}

/// Audit a realized configuration against the instability rules.
pub fn audit(config: &Configuration, resolution: f64) -> Result<AuditReport, AdmissionError> {
    let residuals = measure_residuals(config, true, 0.0, 0);
    if residuals.closure > ADMISSION_TOL {
        return Err(AdmissionError::ResidualsTooLarge {
            closure: residuals.closure,
            threshold: ADMISSION_TOL,
        });
    }
    if !config.vertices.is_empty() && config.pressures.is_none() && config.arcs.len() > 1 {
        return Err(AdmissionError::MissingPressures);
    }

    let mut findings: Vec<AuditFinding> = Vec::new();

    // Separating-set rules.
    let separating = separating_audit(config, resolution)?;
    for v in &separating.violations {
        findings.push(separating_finding(v));
    }

    // Per-vertex rotation notches.
    let mut vertices = Vec::new();
    for (vi, v) in config.vertices.iter().enumerate() {
        let notch = match vertex_notch(v) {
            Ok(m) => Some(m),
            Err(e) => {
                findings.push(AuditFinding {
                    rule: "vertex-notch-unresolved".into(),
                    arcs: v.incident.iter().map(|inc| inc.arc).collect(),
                    vertices: vec![vi],
                    message: format!("notch could not be assigned: {e}"),
                });
                None
            }
        };
        vertices.push(VertexSummary { vertex: vi, side: v.side, notch });
    }

    // Band reconstruction and component rules.
    let bands = reconstruct_bands(config, &vertices)?;
    component_rules(config, &bands, &mut findings);
    root_rules(config, &bands, &mut findings);
    outer_invariant_rules(config, &bands, &mut findings);

    findings.sort_by(|a, b| (a.rule.clone(), a.arcs.clone()).cmp(&(b.rule.clone(), b.arcs.clone())));

    Ok(AuditReport { resolution, residuals, vertices, bands, separating, findings })
}

fn separating_finding(v: &SeparatingViolation) -> AuditFinding {
    match v {
        SeparatingViolation::DownwardVerticalPair { arc, x, t1, t2 } => AuditFinding {
            rule: "separating-internal-pair".into(),
            arcs: vec![*arc],
            vertices: vec![],
            message: format!(
                "arc {arc} turns past the vertical and carries an internal pair at axis value {x:.6} (t = {t1:.4}, {t2:.4})"
            ),
        },
        SeparatingViolation::TwiceVertical { arc, verticals, witness_x, witness_pair } => {
            let witness = match (witness_x, witness_pair) {
                (Some(x), Some((t1, t2))) => {
                    format!("; internal pair exhibited at axis value {x:.6} (t = {t1:.4}, {t2:.4})")
                }
                _ => String::new(),
            };
            AuditFinding {
                rule: "separating-twice-vertical".into(),
                arcs: vec![*arc],
                vertices: vec![],
                message: format!(
                    "arc {arc} goes vertical {} times with an interior vertical{witness}",
                    verticals.len()
                ),
            }
        }
        SeparatingViolation::CrossArcSeparating { x, points, occurrences } => {
            let arcs: Vec<usize> = {
                let mut a: Vec<usize> = points.iter().map(|p| p.arc).collect();
                a.sort_unstable();
                a.dedup();
                a
            };
            let x_str = match x {
                AxisPoint::Finite(v) => format!("{v:.6}"),
                AxisPoint::Infinity => "inf".into(),
            };
            AuditFinding {
                rule: "separating-cross-arc".into(),
                arcs: arcs.clone(),
                vertices: vec![],
                message: format!(
                    "preimage of axis value {x_str} spans the interiors of arcs {arcs:?} and separates the diagram ({occurrences} candidate values)"
                ),
            }
        }
    }
}

/// Reconstruct the bands (annular components) from the vertex table.
fn reconstruct_bands(
    config: &Configuration,
    vertices: &[VertexSummary],
) -> Result<Vec<StackSummary>, AdmissionError> {
    // Pair vertices sharing an interface arc.
    let mut by_interface: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (vi, v) in config.vertices.iter().enumerate() {
        let interface = v.incident[1].arc;
        let ia = config
            .arcs
            .get(interface)
            .ok_or_else(|| AdmissionError::BadVertexLayout {
                vertex: vi,
                reason: format!("interface arc {interface} out of range"),
            })?;
        if ia.left == RegionLabel::Exterior || ia.right == RegionLabel::Exterior {
            return Err(AdmissionError::BadVertexLayout {
                vertex: vi,
                reason: "incident[1] must be the interface (no exterior side)".into(),
            });
        }
        by_interface.entry(interface).or_default().push(vi);
    }

    let mut bands = Vec::new();
    for (interface_arc, verts) in by_interface {
        if verts.len() == 1 {
            // A standard-type junction: the interface runs from the vertex
            // to the axis rather than to a partner vertex. Not a band.
            continue;
        }
        if verts.len() > 2 {
            return Err(AdmissionError::BadVertexLayout {
                vertex: verts[0],
                reason: format!(
                    "interface arc {interface_arc} is shared by {} vertices, expected 2",
                    verts.len()
                ),
            });
        }
        let (left_vertex, right_vertex) = match (
            config.vertices[verts[0]].side,
            config.vertices[verts[1]].side,
        ) {
            (VertexSide::Left, VertexSide::Right) => (verts[0], verts[1]),
            (VertexSide::Right, VertexSide::Left) => (verts[1], verts[0]),
            _ => {
                return Err(AdmissionError::BadVertexLayout {
                    vertex: verts[0],
                    reason: "band vertices must be one left, one right".into(),
                })
            }
        };

        let outer_arcs: Vec<usize> = {
            let mut o = vec![
                config.vertices[left_vertex].incident[2].arc,
                config.vertices[right_vertex].incident[2].arc,
            ];
            o.sort_unstable();
            o.dedup();
            o
        };
        // Band region: the non-exterior side of the outer boundary.
        let oa = &config.arcs[outer_arcs[0]];
        let region = if oa.left == RegionLabel::Exterior { oa.right } else { oa.left };

        let mean_y = |arc: usize| -> f64 {
            let states = &config.arcs[arc].curve.states;
            states.iter().map(|s| s.y).sum::<f64>() / states.len() as f64
        };
        let outer_mean =
            outer_arcs.iter().map(|&a| mean_y(a)).sum::<f64>() / outer_arcs.len() as f64;
        let right_side_up = mean_y(interface_arc) <= outer_mean;

        let notches = (
            vertices[left_vertex].notch,
            vertices[right_vertex].notch,
        );
        let near_graph = matches!(notches, (Some(0), Some(0)) | (Some(0), Some(1)) | (Some(-1), Some(0)));

        bands.push(StackSummary {
            interface_arc,
            outer_arcs,
            left_vertex,
            right_vertex,
            parent: None,
            region,
            right_side_up,
            is_leaf: true,
            notches,
            near_graph,
        });
    }

    // Parent links: a band whose parent-side arc is an outer arc of another
    // band is that band's child; otherwise it hangs off the root.
    let parent_arcs: Vec<usize> = bands
        .iter()
        .map(|b| config.vertices[b.left_vertex].incident[0].arc)
        .collect();
    for i in 0..bands.len() {
        for j in 0..bands.len() {
            if i != j && bands[j].outer_arcs.contains(&parent_arcs[i]) {
                bands[i].parent = Some(j);
                bands[j].is_leaf = false;
            }
        }
    }
    Ok(bands)
}

/// Every leaf must be near graph and every taller stack near graph and
/// right side up; upside-down near-graph leaves need strictly higher pressure.
fn component_rules(config: &Configuration, bands: &[StackSummary], findings: &mut Vec<AuditFinding>) {
    for (bi, band) in bands.iter().enumerate() {
        let band_arcs = || {
            let mut a = vec![band.interface_arc];
            a.extend(&band.outer_arcs);
            a
        };
        if band.is_leaf {
            if !band.near_graph {
                findings.push(AuditFinding {
                    rule: "leaf-near-graph".into(),
                    arcs: band_arcs(),
                    vertices: vec![band.left_vertex, band.right_vertex],
                    message: format!(
                        "leaf band {bi} has notches {:?}, outside the near-graph set",
                        band.notches
                    ),
                });
            }
        } else {
            // Base of a stack of height > 1: must be near graph and the
            // whole stack right side up.
            if !band.near_graph || !band.right_side_up {
                findings.push(AuditFinding {
                    rule: "stack-near-graph".into(),
                    arcs: band_arcs(),
                    vertices: vec![band.left_vertex, band.right_vertex],
                    message: format!(
                        "stack base {bi} has notches {:?} (right side up: {})",
                        band.notches, band.right_side_up
                    ),
                });
            }
        }

        // Upside-down near-graph leaf: its region must have strictly higher
        // pressure than the region across the interface.
        if band.is_leaf && !band.right_side_up && band.near_graph {
            if let Some(p) = &config.pressures {
                let ia = &config.arcs[band.interface_arc];
                let parent_region = if ia.left == band.region { ia.right } else { ia.left };
                let leaf_pressure = band.region.pressure(p);
                let parent_pressure = parent_region.pressure(p);
                if leaf_pressure <= parent_pressure {
                    findings.push(AuditFinding {
                        rule: "leaf-pressure".into(),
                        arcs: vec![band.interface_arc],
                        vertices: vec![band.left_vertex, band.right_vertex],
                        message: format!(
                            "upside-down leaf band {bi} has pressure {leaf_pressure} <= surrounding {parent_pressure}"
                        ),
                    });
                }
            }
        }

        // Right-side-up near-graph stacks: parent-side axis values must be
        // ordered left < right, and the boundary arcs leaving the stack must
        // not turn downward past the vertical.
        if band.right_side_up && stack_is_near_graph(bands, bi) {
            stack_order_rule(config, bands, bi, findings);
            no_downward_turn_rule(config, band, bi, findings);
        }
    }
}

/// A stack (band plus descendants) is near graph when every member is.
fn stack_is_near_graph(bands: &[StackSummary], base: usize) -> bool {
    bands.iter().enumerate().all(|(i, b)| {
        if i == base || is_descendant(bands, i, base) {
            b.near_graph && b.right_side_up
        } else {
            true
        }
    })
}

fn is_descendant(bands: &[StackSummary], mut node: usize, ancestor: usize) -> bool {
    while let Some(p) = bands[node].parent {
        if p == ancestor {
            return true;
        }
        node = p;
    }
    false
}

/// Lemma pattern: for a right-side-up near-graph stack the parent boundary
/// continues strictly rightward, `f(p) < f(q)` on the parent-side rays.
fn stack_order_rule(
    config: &Configuration,
    bands: &[StackSummary],
    bi: usize,
    findings: &mut Vec<AuditFinding>,
) {
    let band = &bands[bi];
    let vl = &config.vertices[band.left_vertex];
    let vr = &config.vertices[band.right_vertex];
    let f_left = incident_axis_value(vl, 0);
    let f_right = incident_axis_value(vr, 0);
    if let (AxisPoint::Finite(fl), AxisPoint::Finite(fr)) = (f_left, f_right) {
        let margin = ORDER_MARGIN * config.scale();
        if fl >= fr - margin {
            findings.push(AuditFinding {
                rule: "stack-axis-order".into(),
                arcs: vec![
                    config.vertices[band.left_vertex].incident[0].arc,
                    config.vertices[band.right_vertex].incident[0].arc,
                ],
                vertices: vec![band.left_vertex, band.right_vertex],
                message: format!(
                    "stack base {bi}: parent-side axis values are out of order ({fl:.6} >= {fr:.6})"
                ),
            });
        }
    }
}

/// Corollary pattern: the outer boundary cannot turn downward past the
/// vertical after leaving a right-side-up near-graph stack.
fn no_downward_turn_rule(
    config: &Configuration,
    band: &StackSummary,
    bi: usize,
    findings: &mut Vec<AuditFinding>,
) {
    for (vi, v) in [
        (band.left_vertex, &config.vertices[band.left_vertex]),
        (band.right_vertex, &config.vertices[band.right_vertex]),
    ] {
        let inc = &v.incident[0];
        let Some(arc) = config.arcs.get(inc.arc) else { continue };
        let profile = match crate::axis_map::AxisProfile::new(&arc.curve) {
            Ok(p) => p,
            Err(_) => continue,
        };
        // Downward in the direction leaving the vertex.
        let leaving_downward = |downward: bool| match inc.end {
            ArcEnd::Start => downward,
            ArcEnd::Finish => !downward,
        };
        if profile
            .verticals
            .iter()
            .any(|c| c.interior && leaving_downward(c.downward))
        {
            findings.push(AuditFinding {
                rule: "stack-no-downward-turn".into(),
                arcs: vec![inc.arc],
                vertices: vec![vi],
                message: format!(
                    "outer boundary arc {} turns downward past the vertical after leaving stack base {bi}",
                    inc.arc
                ),
            });
        }
    }
}

/// Root constraints: the two bottom caps are sphere pieces, the root's child
/// attaches with notches in {-1, 0, 1}, and the child cannot be an
/// upside-down near-graph leaf or the base of a right-side-up near-graph
/// stack.
fn root_rules(config: &Configuration, bands: &[StackSummary], findings: &mut Vec<AuditFinding>) {
    for ep in &config.axis_endpoints {
        let Some(arc) = config.arcs.get(ep.arc) else { continue };
        let class = audit_class(&arc.curve);
        if class != DelaunayClass::Sphere && class != DelaunayClass::VerticalHyperplane {
            findings.push(AuditFinding {
                rule: "root-caps-sphere".into(),
                arcs: vec![ep.arc],
                vertices: vec![],
                message: format!(
                    "axis-terminating arc {} is {class} rather than a sphere piece",
                    ep.arc
                ),
            });
        }
    }

    for (bi, band) in bands.iter().enumerate() {
        if band.parent.is_some() {
            continue;
        }
        // Attached to the root.
        for (vi, m) in [
            (band.left_vertex, band.notches.0),
            (band.right_vertex, band.notches.1),
        ] {
            if let Some(m) = m {
                if !(-1..=1).contains(&m) {
                    findings.push(AuditFinding {
                        rule: "root-child-notches".into(),
                        arcs: vec![config.vertices[vi].incident[0].arc],
                        vertices: vec![vi],
                        message: format!(
                            "root cap cannot rotate to notch {m} at vertex {vi}"
                        ),
                    });
                }
            }
        }
        let upside_down_leaf = band.is_leaf && !band.right_side_up && band.near_graph;
        let rsu_stack_base = band.right_side_up && stack_is_near_graph(bands, bi);
        if upside_down_leaf || rsu_stack_base {
            findings.push(AuditFinding {
                rule: "root-child-type".into(),
                arcs: vec![band.interface_arc],
                vertices: vec![band.left_vertex, band.right_vertex],
                message: format!(
                    "the root's child (band {bi}) is {}, which cannot occur in a minimizer",
                    if upside_down_leaf {
                        "an upside-down near-graph leaf"
                    } else {
                        "the base of a right-side-up near-graph stack"
                    }
                ),
            });
        }
    }
}

/// Outer boundaries of each component share `(H, F)` up to orientation.
fn outer_invariant_rules(
    config: &Configuration,
    bands: &[StackSummary],
    findings: &mut Vec<AuditFinding>,
) {
    // Canonical orientation: flip so H > 0, or F > 0 at H = 0.
    let canonical = |arc: usize| -> (f64, f64) {
        let c = &config.arcs[arc].curve;
        let (h, f) = (c.params.h(), c.force);
        if h < 0.0 || (h == 0.0 && f < 0.0) {
            (-h, -f)
        } else {
            (h, f)
        }
    };

    // Root component: in a banded configuration both axis caps bound the
    // bottom component, so they share invariants. A standard-type bubble
    // (no bands) has one outer cap per lobe and nothing to compare.
    let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
    if !bands.is_empty() {
        let root_arcs: Vec<usize> = config
            .axis_endpoints
            .iter()
            .map(|e| e.arc)
            .filter(|&a| {
                let arc = &config.arcs[a];
                arc.left == RegionLabel::Exterior || arc.right == RegionLabel::Exterior
            })
            .collect();
        if root_arcs.len() >= 2 {
            groups.push(("root".into(), root_arcs));
        }
    }
    for (bi, band) in bands.iter().enumerate() {
        if band.outer_arcs.len() >= 2 {
            groups.push((format!("band {bi}"), band.outer_arcs.clone()));
        }
    }

    for (name, arcs) in groups {
        let pairs: Vec<(f64, f64)> = arcs.iter().map(|&a| canonical(a)).collect();
        let check = outer_boundary_check(&pairs, OUTER_TOL);
        if !check.ok {
            let w = check.witness.unwrap();
            findings.push(AuditFinding {
                rule: "outer-boundary-invariants".into(),
                arcs: vec![arcs[w.first], arcs[w.second]],
                vertices: vec![],
                message: format!(
                    "outer boundary of {name}: arcs {} and {} disagree on {} ({:.9} vs {:.9})",
                    arcs[w.first], arcs[w.second], w.quantity, w.values.0, w.values.1
                ),
            });
        }
    }
}
