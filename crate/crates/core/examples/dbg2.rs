use bubbles_core::config_audit::{
    realize, ConfigTree, PressureSpec, RealizeSpec, ShootingInit, ShootingOptions, ShootingSpec,
    TreeNode,
};
use bubbles_core::axis_map::{separating_audit, AxisPoint};
use std::collections::BTreeMap;

fn main() {
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
    let report = separating_audit(&r.configuration, 0.05).unwrap();
    for c in &report.candidates {
        if let AxisPoint::Finite(x) = c.x {
            if (x - 1.1357).abs() < 0.01 {
                println!("candidate x = {x}");
                for p in &c.preimages {
                    println!("  arc {} t {:.4} pos ({:.4},{:.4}) interior {}", p.arc, p.t, p.x, p.y, p.interior);
                }
                println!("  disconnects: {}", c.disconnects);
            }
        }
    }
}
