//! Field files, VTK export and JSON manifests.

use cosserat::grid::{CosseratField, GridDomain, Shape};
use cosserat::io::{load_field, load_json, read_vtk, save_field, save_json, write_vtk};
use cosserat::sampler::{FieldSampler, Hedgehog};
use cosserat::so3::{MaterialConstants, Vec3};

fn main() -> cosserat::Result<()> {
    let dir = std::env::temp_dir().join("cosserat-io-example");
    std::fs::create_dir_all(&dir)?;
    let hog = Hedgehog { center: Vec3::new(0.1, 0.0, 0.0) };
    let shape = Shape::Box { min: [-0.5; 3], max: [0.5; 3] };
    let f = CosseratField::from_fn(GridDomain::new(shape, 1.0 / 16.0)?, |x| hog.sample(x).unwrap());

    let path = dir.join("field.csrf");
    save_field(&f, &path)?;
    let g = load_field(&path)?;
    println!("{}: {} bytes, identical {}", path.display(), std::fs::metadata(&path)?.len(), g == f);

    let vtk = dir.join("field.vtk");
    write_vtk(&f, std::fs::File::create(&vtk)?)?;
    let v = read_vtk(std::fs::File::open(&vtk)?)?;
    let err = f.n.iter().zip(&v.n).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    println!("{}: axis error after text round trip {err:.1e}", vtk.display());

    let energy = f.energy(&MaterialConstants::unit());
    let json = dir.join("energy.json");
    save_json(&energy, &json)?;
    let back: cosserat::grid::EnergyReport = load_json(&json)?;
    println!("{}: {:.6}, identical {}", json.display(), back.total, back == energy);
    Ok(())
}
