//! Inserting a dipole into the zero-energy grid field.

use std::f64::consts::PI;

use cosserat::cuboid::{default_alpha, insert_dipole, QuadratureOptions};
use cosserat::degree::ProbeOptions;
use cosserat::grid::{CosseratField, GridDomain, Shape};
use cosserat::so3::{MaterialConstants, Vec3};

fn main() -> cosserat::Result<()> {
    let c = MaterialConstants::unit();
    let base = CosseratField::rigid_base(GridDomain::new(Shape::Ball { center: [0.0; 3], radius: 1.0 }, 1.0 / 32.0)?);
    let (p, n) = (Vec3::new(0.0, 0.0, -0.25), Vec3::new(0.0, 0.0, 0.25));
    for m in [4, 8] {
        let (field, dipole) = insert_dipole(&base, p, n, m, default_alpha(0.5, m))?;
        let changed = (0..field.domain.node_count()).filter(|&k| field.n[k] != base.n[k]).count();
        let man = dipole.manifest(&c, &QuadratureOptions::default(), &ProbeOptions::default())?;
        println!("m = {m}: energy {:.4} (64πd = {:.4}), {changed} grid nodes changed", man.energy.report.total, 32.0 * PI);
        for r in &man.energy.report.per_region {
            println!("  region {:>4}: {:.6}", r.label, r.deformation + r.curvature);
        }
        let ledger: Vec<String> = man
            .degree_ledger
            .iter()
            .filter_map(|e| e.mod2_degree.map(|d| format!("{}:{d}/{}", e.label, e.lift_degree.unwrap_or(0))))
            .collect();
        println!("  ledger {}, dipole verified {}", ledger.join(" "), man.dipole.verified);
    }
    Ok(())
}
