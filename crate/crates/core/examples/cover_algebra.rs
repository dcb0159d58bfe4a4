//! The double cover q ↦ 2qqᵀ − I and the energy operator P.

use cosserat::so3::{axis_of, canonical_sign, cover, cover_differential, p_operator, MaterialConstants, Mat3, UnitVector, Vec3};

fn main() -> cosserat::Result<()> {
    let q = UnitVector::new(Vec3::new(1.0, 2.0, 2.0) / 3.0)?;
    let r = cover(&q);
    println!("F(q) =\n{}", r.matrix());
    println!("F(−q) == F(q): {}", cover(&-q).matrix() == r.matrix());
    println!("trace {:.3}, det {:.3}", r.matrix().trace(), r.matrix().determinant());
    println!("axis recovered: {}", canonical_sign(axis_of(&r).into_inner()).transpose());

    let v = Vec3::new(2.0, -1.0, 0.0) / 5f64.sqrt();
    let d = cover_differential(&q, &v)?;
    println!("|dF(v)|² = {:.12}, 8|v|² = {:.12}", d.norm_squared(), 8.0 * v.norm_squared());

    let c = MaterialConstants::new(2.0, 0.5, 3.0, 1.0, 2.0)?;
    let a = Mat3::new(1.0, 2.0, 0.0, -1.0, 0.5, 0.3, 0.0, 0.2, -0.4);
    println!("P(A) =\n{}", p_operator(&a, &c));
    println!("unit constants: P = id: {}", p_operator(&a, &MaterialConstants::unit()) == a);
    Ok(())
}
