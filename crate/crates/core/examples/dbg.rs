use bubbles_core::config_audit::{
    audit, realize, standard_configuration, ConfigTree, PressureSpec, RealizeSpec, ShootingInit,
    ShootingOptions, ShootingSpec, TreeNode,
};
use bubbles_core::junctions::RegionPressures;
use bubbles_core::delaunay::TraceOptions;
use std::collections::BTreeMap;

fn main() {
    // Negative control: standard double bubble.
    for (h1, h2) in [(1.0, 1.0), (1.3, 0.9)] {
        let p = RegionPressures::new(h1, h2).unwrap();
        let realized = standard_configuration(3, &p, &TraceOptions::default()).unwrap();
        let report = audit(&realized.configuration, 0.1).unwrap();
        println!("standard ({h1},{h2}): findings {}", report.findings.len());
        for f in &report.findings {
            println!("  {} {:?}: {}", f.rule, f.arcs, f.message);
        }
    }

    // Positive control: the 1+1 torus bubble.
    let tree = ConfigTree {
        nodes: vec![
            TreeNode { id: 0, region: 1, parent: None, children: vec![1] },
            TreeNode { id: 1, region: 2, parent: Some(0), children: vec![] },
        ],
    };
    let mut lengths = BTreeMap::new();
    lengths.insert("i1".to_string(), 1.0);
    lengths.insert("o1".to_string(), 1.25);
    let spec = RealizeSpec {
        tree,
        pressures: PressureSpec { h1: 1.0, h2: 1.1 },
        boundaries: vec![],
        shooting: ShootingSpec {
            initial: ShootingInit { cap_omega: Some(1.0), arc_lengths: lengths },
            tol: Some(1e-10),
            max_iter: Some(60),
        },
        dim: 3,
    };
    let r = realize(&spec, &ShootingOptions::default()).unwrap();
    let report = audit(&r.configuration, 0.05).unwrap();
    println!("torus 1+1: findings {}", report.findings.len());
    for f in &report.findings {
        println!("  {} arcs {:?} vertices {:?}: {}", f.rule, f.arcs, f.vertices, f.message);
    }
    println!("bands: {:?}", report.bands);
}
