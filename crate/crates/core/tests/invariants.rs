use cosserat::cuboid::{default_alpha, insert_dipole, CuboidDecomposition};
use cosserat::degree::sphere_degree;
use cosserat::grid::{CosseratField, GridDomain, Shape};
use cosserat::io::{read_field, write_field};
use cosserat::mesh::TriMesh;
use cosserat::minimize::{minimize_restricted, Dirichlet, SolverConfig};
use cosserat::so3::{cover, cover_differential, p_operator, MaterialConstants, Mat3, UnitVector, Vec3};
use nalgebra::{Rotation3, Unit};
use proptest::prelude::*;

fn vec3(r: f64) -> impl Strategy<Value = Vec3> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn unit() -> impl Strategy<Value = Vec3> {
    vec3(1.0).prop_filter("nonzero", |v| v.norm() > 1e-3).prop_map(|v| v.normalize())
}

fn mat3() -> impl Strategy<Value = Mat3> {
    proptest::collection::vec(-2.0..2.0f64, 9).prop_map(|v| Mat3::from_column_slice(&v))
}

fn constants() -> impl Strategy<Value = MaterialConstants> {
    (0.1..3.0f64, 0.1..3.0f64, 0.1..3.0f64, 0.1..3.0f64, 2.0..3.0f64).prop_map(|(a, b, c, l, p)| MaterialConstants::new(a, b, c, l, p).unwrap())
}

proptest! {
    #[test]
    fn cover_is_a_homothety(q in unit(), v in vec3(10.0)) {
        let q = UnitVector::new(q).unwrap();
        let v = v - q.as_vec() * q.as_vec().dot(&v);
        let d = cover_differential(&q, &v).unwrap();
        prop_assert!((d.norm_squared() - 8.0 * v.norm_squared()).abs() <= 1e-10 * (1.0 + v.norm_squared()));
    }

    #[test]
    fn cover_is_even_and_lands_in_half_turns(q in unit()) {
        let r = *cover(&UnitVector::new(q).unwrap()).matrix();
        prop_assert_eq!(r, *cover(&UnitVector::new(-q).unwrap()).matrix());
        prop_assert!((r - r.transpose()).norm() < 1e-14);
        prop_assert!((r * r - Mat3::identity()).norm() < 1e-13);
        prop_assert!((r.trace() + 1.0).abs() < 1e-14);
    }

    #[test]
    fn p_operator_is_self_adjoint(a in mat3(), b in mat3(), c in constants()) {
        let lhs = p_operator(&a, &c).dot(&b);
        let rhs = a.dot(&p_operator(&b, &c));
        prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn degree_is_invariant_under_rotations(k in 1u32..4, axis in unit(), angle in 0.0..6.0f64, axis2 in unit(), angle2 in 0.0..6.0f64) {
        let domain = Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle);
        let target = Rotation3::from_axis_angle(&Unit::new_normalize(axis2), angle2);
        let mesh = TriMesh::icosphere(Vec3::zeros(), 1.0, 5);
        // winds k times around the z axis in longitude
        let wind = |x: &Vec3| {
            let y = domain * x;
            let (r, th) = ((y.x * y.x + y.y * y.y).sqrt(), y.y.atan2(y.x) * k as f64);
            target * Vec3::new(r * th.cos(), r * th.sin(), y.z)
        };
        let values: Vec<Vec3> = mesh.vertices.iter().map(wind).collect();
        prop_assert_eq!(sphere_degree(&mesh, &values).unwrap(), k as i64);
        let flipped: Vec<Vec3> = values.iter().map(|v| -v).collect();
        prop_assert_eq!(sphere_degree(&mesh, &flipped).unwrap(), -(k as i64));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn dipole_insertion_is_local(p in vec3(0.3), dir in unit(), d in 0.15..0.4f64, m in 2usize..6) {
        let n = p + dir * d;
        let base = CosseratField::rigid_base(GridDomain::new(Shape::Ball { center: [0.0; 3], radius: 1.0 }, 1.0 / 16.0).unwrap());
        let (f, _) = insert_dipole(&base, p, n, m, default_alpha(d, m)).unwrap();
        let dec = CuboidDecomposition::new(p, n, m).unwrap();
        for k in 0..base.domain.node_count() {
            if !dec.contains(&base.domain.position(k)) {
                prop_assert_eq!(f.phi[k], base.phi[k]);
                prop_assert_eq!(f.n[k], base.n[k]);
            }
        }
    }

    #[test]
    fn field_files_round_trip(seed in any::<u64>(), h in 0.08..0.12f64, box_shape in any::<bool>()) {
        let shape = if box_shape {
            Shape::Box { min: [-0.5, -0.25, 0.0], max: [0.5, 0.25, 0.75] }
        } else {
            Shape::Ball { center: [0.0; 3], radius: 1.0 }
        };
        let s = seed as f64 / u64::MAX as f64;
        let f = CosseratField::from_fn(GridDomain::new(shape, h).unwrap(), |x| {
            (x * (1.0 + s) + Vec3::repeat(s), Vec3::new(x.y + s, x.z - 0.3, 1.0 + x.x * s).normalize())
        });
        let mut buf = Vec::new();
        write_field(&f, &mut buf).unwrap();
        let g = read_field(buf.as_slice()).unwrap();
        prop_assert_eq!(&g.phi, &f.phi);
        prop_assert_eq!(&g.n, &f.n);
        prop_assert_eq!(&g.dirichlet, &f.dirichlet);
        prop_assert_eq!(&g.domain.mask, &f.domain.mask);
        prop_assert_eq!(g.domain.dims, f.domain.dims);
    }

    #[test]
    fn descent_keeps_unit_axes(amp in 0.05..0.5f64, freq in 1.0..4.0f64, fixed in any::<bool>()) {
        let domain = GridDomain::new(Shape::Ball { center: [0.0; 3], radius: 1.0 }, 1.0 / 8.0).unwrap();
        let init = CosseratField::from_fn(domain, |x| {
            let n = Vec3::new(amp * (freq * x.y).sin(), amp * (freq * x.z).cos(), 1.0).normalize();
            (Vec3::new(-x.x, -x.y, x.z) + Vec3::repeat(amp * (freq * x.x).sin()), n)
        });
        let mut cfg = SolverConfig { max_iters: 20, ..SolverConfig::default() };
        if fixed {
            cfg.step_rule = cosserat::minimize::StepRule::Fixed;
        }
        let out = minimize_restricted(&init, &Dirichlet::from_field(&init), &cfg, &MaterialConstants::unit()).unwrap();
        for n in &out.field.n {
            prop_assert!((n.norm() - 1.0).abs() < 1e-12);
        }
        prop_assert!(out.fin.total <= out.initial.total);
    }
}
