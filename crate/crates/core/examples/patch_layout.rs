//! Periodic patch lattice on the bottom face and the node tags of a mesh.

use obstacle_homog::geometry::{build_layout, DomainSpec};
use obstacle_homog::mesh::{build_mesh, MeshOptions, NodeTag};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = DomainSpec::unit(3)?;
    for eps in [0.25, 0.125, 0.0625] {
        let layout = build_layout(&spec, eps, 1.0)?;
        println!(
            "eps = {eps:<7} patches = {:<4} r = {:.6}  count * (2 eps)^2 = {}",
            layout.len(),
            layout.radius(0),
            layout.len() as f64 * (2.0 * eps).powi(2)
        );
    }

    let layout = build_layout(&spec, 0.25, 1.0)?;
    let c = layout.center(0).to_vec();
    let r = layout.radius(0);
    println!("\ncenter {c:?}, r = {r}");
    println!("  center in T_eps:          {}", layout.in_t_eps(&c));
    println!("  distance r in T_eps:      {}", layout.in_t_eps(&[c[0] + r, c[1], 0.0]));
    println!("  distance 1.5 r in T_eps:  {}", layout.in_t_eps(&[c[0] + 1.5 * r, c[1], 0.0]));

    let mesh = build_mesh(&spec, &layout, 1.0 / 32.0, MeshOptions::default())?;
    let patch_nodes = mesh.tags().iter().filter(|t| matches!(t, NodeTag::Patch(_))).count();
    println!("\nh = 1/32: {} nodes, {patch_nodes} patch nodes", mesh.node_count());
    println!("per patch: {:?}", mesh.patch_node_counts());

    match build_mesh(&spec, &layout, 1.0 / 8.0, MeshOptions::default()) {
        Ok(_) => println!("h = 1/8 accepted"),
        Err(e) => println!("h = 1/8 rejected: {e}"),
    }
    Ok(())
}
