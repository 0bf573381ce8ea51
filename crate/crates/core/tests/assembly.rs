mod common;

use std::sync::Arc;

use lgfem::assembly::{
    assemble_divergence, assemble_mass, assemble_stabilization, assemble_stiffness, build_system,
    load_vector, local_mass, local_stiffness, mean_value_vector, ElementPair, Operators,
    SystemParams,
};
use lgfem::fe::{basis, FeSpace, Field};
use lgfem::linsolve::{LinearSolver, SolverOptions};
use lgfem::mesh::{Mesh, MeshPattern};
use lgfem::quadrature::triangle_rule;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn square(n: usize) -> Arc<Mesh> {
    Arc::new(Mesh::unit_square(n, MeshPattern::Crisscross).unwrap())
}

fn single(p: [[f64; 2]; 3]) -> Arc<Mesh> {
    Arc::new(Mesh::from_raw(p.to_vec(), vec![[0, 1, 2]]).unwrap())
}

#[test]
fn p1_local_mass_matches_closed_form() {
    let mesh = single([[0.1, 0.2], [0.9, 0.35], [0.3, 0.8]]);
    let s = FeSpace::new(mesh.clone(), 1).unwrap();
    let m = local_mass(&s, 0);
    let a = mesh.area(0);
    for i in 0..3 {
        for j in 0..3 {
            let want = a / 12.0 * if i == j { 2.0 } else { 1.0 };
            assert!((m[i][j] - want).abs() <= 1e-14);
        }
    }
}

#[test]
fn p1_local_stiffness_on_unit_right_triangle() {
    let mesh = single([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
    let s = FeSpace::new(mesh, 1).unwrap();
    let k = local_stiffness(&s, 0);
    let want = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
    for i in 0..3 {
        for j in 0..3 {
            assert!((k[i][j] - want[i][j]).abs() <= 1e-14);
        }
    }
}

#[test]
fn p2_mass_integrates_products_of_polynomials() {
    // x^T M y = int p q for interpolants of quadratics
    let mesh = square(3);
    let s = FeSpace::new(mesh, 2).unwrap();
    let m = assemble_mass(&s);
    let p = s.interpolate_scalar(|x| x[0] * x[1]).unwrap();
    let q = s.interpolate_scalar(|x| 1.0 + x[0]).unwrap();
    let v: f64 = m
        .matvec(q.coefficients())
        .iter()
        .zip(p.coefficients())
        .map(|(a, b)| a * b)
        .sum();
    // int x y (1 + x) = 1/4 + 1/6
    assert!((v - (0.25 + 1.0 / 6.0)).abs() < 1e-14);
    let a = assemble_stiffness(&s);
    let g = a.quadratic_form(p.coefficients());
    // |grad(xy)|^2 = x^2 + y^2
    assert!((g - 2.0 / 3.0).abs() < 1e-14);
}

#[test]
fn divergence_of_constant_field_vanishes_off_boundary() {
    let mesh = square(4);
    for (kv, kp) in [(2, 1), (2, 2), (1, 1)] {
        let v = FeSpace::new(mesh.clone(), kv).unwrap();
        let p = FeSpace::new(mesh.clone(), kp).unwrap();
        let b = assemble_divergence(&v, &p).unwrap();
        let c = v.interpolate_vector(|_| [0.3, -1.7]).unwrap();
        let bc = b.matvec(c.coefficients());
        for row in bc {
            assert!(row.abs() < 1e-14);
        }
    }
}

#[test]
fn divergence_annihilates_constants_for_zero_boundary_fields() {
    let mesh = square(5);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (kv, kp) in [(2, 1), (2, 2), (1, 1)] {
        let v = FeSpace::new(mesh.clone(), kv).unwrap();
        let p = FeSpace::new(mesh.clone(), kp).unwrap();
        let b = assemble_divergence(&v, &p).unwrap();
        let one = vec![1.0; p.n_dofs()];
        for _ in 0..5 {
            let mut u = common::random_field(&v, &mut rng);
            u.zero_boundary();
            let val: f64 = b
                .matvec(u.coefficients())
                .iter()
                .zip(&one)
                .map(|(a, b)| a * b)
                .sum();
            assert!(val.abs() < 1e-12, "{val:e}");
        }
    }
}

#[test]
fn divergence_of_polynomial_field_matches_integral() {
    // u = (x^2, x y), div u = 3x; -(div u, 1) = -3/2
    let mesh = square(3);
    let v = FeSpace::new(mesh.clone(), 2).unwrap();
    let p = FeSpace::new(mesh, 1).unwrap();
    let b = assemble_divergence(&v, &p).unwrap();
    let u = v
        .interpolate_vector(|x| [x[0] * x[0], x[0] * x[1]])
        .unwrap();
    let total: f64 = b.matvec(u.coefficients()).iter().sum();
    assert!((total + 1.5).abs() < 1e-13);
}

#[test]
fn mesh_mismatch_is_rejected() {
    let v = FeSpace::new(square(3), 2).unwrap();
    let p = FeSpace::new(square(3), 1).unwrap();
    assert!(assemble_divergence(&v, &p).is_err());
}

#[test]
fn stabilization_single_element_examples() {
    let pts = [[0.0, 0.0], [0.6, 0.1], [0.2, 0.5]];
    let mesh = single(pts);
    let (h, area) = (mesh.diameter(0), mesh.area(0));
    let p1 = FeSpace::new(mesh.clone(), 1).unwrap();
    let g = [0.7, -2.0];
    let q = p1
        .interpolate_scalar(|x| g[0] * x[0] + g[1] * x[1] + 3.0)
        .unwrap();
    let c1 = assemble_stabilization(&p1);
    let want = h * h * (g[0] * g[0] + g[1] * g[1]) * area;
    assert!((c1.quadratic_form(q.coefficients()) - want).abs() < 1e-14);

    let p2 = FeSpace::new(mesh, 2).unwrap();
    let c2 = assemble_stabilization(&p2);
    let q = p2.interpolate_scalar(|x| x[0] * x[0]).unwrap();
    assert!((c2.quadratic_form(q.coefficients()) - 4.0 * h.powi(4) * area).abs() < 1e-14);
    let q = p2.interpolate_scalar(|x| x[0] * x[1]).unwrap();
    assert!((c2.quadratic_form(q.coefficients()) - h.powi(4) * area).abs() < 1e-14);
}

/// `sum_K h_K^{2k} |q|_{k,K}^2` by finite differences of the local
/// polynomial at quadrature points, independent of the basis Hessians.
fn brute_seminorm(q: &Field) -> f64 {
    let space = q.space();
    let mesh = space.mesh();
    let k = space.degree();
    let mut total = 0.0;
    for e in 0..mesh.n_elements() {
        let local = q.local(0, e);
        let eval = |x: [f64; 2]| {
            let phi = basis::values(k, mesh.barycentric(e, x));
            (0..space.n_local()).map(|i| local[i] * phi[i]).sum::<f64>()
        };
        let mut s = 0.0;
        for (l, w) in triangle_rule(4).iter() {
            let x = mesh.point_at(e, *l);
            let d = 1e-3;
            let terms: Vec<f64> = if k == 1 {
                vec![
                    (eval([x[0] + d, x[1]]) - eval([x[0] - d, x[1]])) / (2.0 * d),
                    (eval([x[0], x[1] + d]) - eval([x[0], x[1] - d])) / (2.0 * d),
                ]
            } else {
                let f = |a: f64, b: f64| eval([x[0] + a, x[1] + b]);
                vec![
                    (f(d, 0.0) - 2.0 * f(0.0, 0.0) + f(-d, 0.0)) / (d * d),
                    (f(d, d) - f(d, -d) - f(-d, d) + f(-d, -d)) / (4.0 * d * d),
                    (f(0.0, d) - 2.0 * f(0.0, 0.0) + f(0.0, -d)) / (d * d),
                ]
            };
            s += w * mesh.area(e) * terms.iter().map(|t| t * t).sum::<f64>();
        }
        total += mesh.diameter(e).powi(2 * k as i32) * s;
    }
    total
}

#[test]
fn stabilization_form_matches_brute_force_seminorm() {
    // finite differences are exact for the piecewise polynomials up to
    // rounding; scale the comparison accordingly
    let mesh = square(3);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for k in [1, 2] {
        let s = FeSpace::new(mesh.clone(), k).unwrap();
        let c = assemble_stabilization(&s);
        for _ in 0..20 {
            let coeffs: Vec<f64> = (0..s.n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let q = Field::from_coefficients(s.clone(), 1, coeffs).unwrap();
            let a = c.quadratic_form(q.coefficients());
            let b = brute_seminorm(&q);
            assert!((a - b).abs() <= 1e-9 * b.max(1.0), "k={k}: {a} vs {b}");
        }
    }
}

#[test]
fn mean_value_vector_integrates_basis() {
    let mesh = square(4);
    for k in [1, 2] {
        let s = FeSpace::new(mesh.clone(), k).unwrap();
        let m = mean_value_vector(&s);
        assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        let p = s.interpolate_scalar(|x| x[1]).unwrap();
        let v: f64 = m.iter().zip(p.coefficients()).map(|(a, b)| a * b).sum();
        assert!((v - 0.5).abs() < 1e-14);
    }
}

#[test]
fn square_matrices_have_nonnegative_rayleigh_quotients() {
    let mesh = Arc::new(Mesh::unit_square(4, MeshPattern::AlternatingDiagonal).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for k in [1, 2] {
        let s = FeSpace::new(mesh.clone(), k).unwrap();
        let m = assemble_mass(&s);
        let a = assemble_stiffness(&s);
        let c = assemble_stabilization(&s);
        for _ in 0..100 {
            let x: Vec<f64> = (0..s.n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let xx: f64 = x.iter().map(|v| v * v).sum();
            assert!(m.quadratic_form(&x) / xx > 0.0);
            assert!(a.quadratic_form(&x) / xx >= -1e-12);
            assert!(c.quadratic_form(&x) / xx >= -1e-12);
        }
    }
}

#[test]
fn load_vector_constant_and_refined_oracle() {
    let mesh = square(4);
    let s = FeSpace::new(mesh, 2).unwrap();
    let m = mean_value_vector(&s);
    let b = load_vector(&s, &|_| [2.0, -0.5], 8);
    let n = s.n_dofs();
    for d in 0..n {
        assert!((b[d] - 2.0 * m[d]).abs() < 1e-15);
        assert!((b[n + d] + 0.5 * m[d]).abs() < 1e-15);
    }
    let f = |x: [f64; 2]| [0.0, 10.0 * (2.0 * std::f64::consts::PI * x[1]).sin()];
    let s16 = FeSpace::new(square(16), 2).unwrap();
    let d = common::max_abs_diff(&load_vector(&s16, &f, 8), &load_vector(&s16, &f, 16));
    assert!(d < 1e-12);
}

fn operators(n: usize, k: usize, equal: bool) -> Operators {
    let mesh = square(n);
    let v = FeSpace::new(mesh.clone(), k).unwrap();
    let p = FeSpace::new(mesh, if equal { k } else { k - 1 }).unwrap();
    Operators::assemble(v, p).unwrap()
}

#[test]
fn system_structure() {
    let ops = operators(3, 2, true);
    let params = SystemParams {
        dt: 0.01,
        nu: 1e-2,
        pair: ElementPair::EqualOrder { delta0: 0.1 },
    };
    let sys = build_system(params, &ops).unwrap();
    let nf = sys.n_free();
    assert_eq!(sys.dim(), 2 * nf + sys.n_pressure() + 1);
    // only row <= col is stored, and the full expansion is symmetric
    for (r, c, v) in sys.matrix().upper().iter() {
        assert!(r <= c);
        assert_eq!(sys.matrix().get(c, r), v);
    }
    // pressure block is -delta0 C
    let c = ops.stabilization().unwrap();
    for i in 0..sys.n_pressure() {
        for j in i..sys.n_pressure() {
            assert_eq!(sys.matrix().get(2 * nf + i, 2 * nf + j), -0.1 * c.get(i, j));
        }
    }

    let th = build_system(
        SystemParams {
            pair: ElementPair::TaylorHood,
            ..params
        },
        &operators(3, 2, false),
    )
    .unwrap();
    let nf = th.n_free();
    for (r, c, v) in th.matrix().upper().iter() {
        if r >= 2 * nf && c < th.dim() - 1 {
            assert_eq!(v, 0.0, "({r}, {c})");
        }
    }
}

#[test]
fn invalid_pairings_are_rejected() {
    let eq = operators(2, 2, true);
    let p = |pair| SystemParams {
        dt: 0.1,
        nu: 1.0,
        pair,
    };
    assert!(build_system(p(ElementPair::EqualOrder { delta0: 0.0 }), &eq).is_err());
    assert!(build_system(p(ElementPair::EqualOrder { delta0: -1.0 }), &eq).is_err());
    assert!(build_system(p(ElementPair::TaylorHood), &operators(2, 1, true)).is_err());
}

#[test]
fn zero_data_gives_zero_solution() {
    let ops = operators(2, 2, true);
    let sys = build_system(
        SystemParams {
            dt: 0.1,
            nu: 1.0,
            pair: ElementPair::EqualOrder { delta0: 0.1 },
        },
        &ops,
    )
    .unwrap();
    let zero = vec![0.0; 2 * ops.velocity().n_dofs()];
    let rhs = sys.assemble_rhs(&zero, &zero).unwrap();
    assert!(rhs.iter().all(|&v| v == 0.0));
    let mut solver = LinearSolver::new(SolverOptions::default());
    let (x, stats) = solver.solve(&sys, &rhs, true).unwrap();
    assert!(x.iter().all(|&v| v == 0.0));
    assert!(stats.residual <= 1e-12);
}

#[test]
fn rhs_combines_load_and_composite() {
    let ops = operators(3, 2, false);
    let sys = build_system(
        SystemParams {
            dt: 0.5,
            nu: 1.0,
            pair: ElementPair::TaylorHood,
        },
        &ops,
    )
    .unwrap();
    let n = ops.velocity().n_dofs();
    let load: Vec<f64> = (0..2 * n).map(|i| i as f64).collect();
    let comp: Vec<f64> = (0..2 * n).map(|i| 1.0 + i as f64).collect();
    let rhs = sys.assemble_rhs(&load, &comp).unwrap();
    for (i, &d) in sys.free_dofs().iter().enumerate() {
        assert_eq!(rhs[i], load[d] + comp[d] / 0.5);
        assert_eq!(rhs[sys.n_free() + i], load[n + d] + comp[n + d] / 0.5);
    }
    assert!(rhs[2 * sys.n_free()..].iter().all(|&v| v == 0.0));
    assert!(sys.assemble_rhs(&load[1..], &comp).is_err());
}

#[test]
fn coordinate_dump_round_trips_values() {
    let ops = operators(2, 1, true);
    let mut buf = Vec::new();
    ops.mass().write_coordinate(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), ops.mass().nnz());
    for line in text.lines() {
        let f: Vec<&str> = line.split(' ').collect();
        let (r, c, v): (usize, usize, f64) = (
            f[0].parse().unwrap(),
            f[1].parse().unwrap(),
            f[2].parse().unwrap(),
        );
        assert_eq!(ops.mass().get(r, c), v);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mass_reproduces_l2_inner_product_of_linears(a in -2.0..2.0f64, b in -2.0..2.0f64, c in -2.0..2.0f64, n in 2usize..5) {
        let s = FeSpace::new(square(n), 1).unwrap();
        let m = assemble_mass(&s);
        let p = s.interpolate_scalar(|x| a + b * x[0] + c * x[1]).unwrap();
        // int (a + b x + c y)^2 over the unit square
        let exact = a * a + a * (b + c) + (b * b + c * c) / 3.0 + b * c / 2.0;
        prop_assert!((m.quadratic_form(p.coefficients()) - exact).abs() < 1e-13);
    }

    #[test]
    fn system_is_symmetric_for_any_parameters(dt in 1e-4..1.0f64, nu in 1e-6..1.0f64, delta0 in 1e-4..1.0f64) {
        let ops = operators(2, 2, true);
        let sys = build_system(SystemParams { dt, nu, pair: ElementPair::EqualOrder { delta0 } }, &ops).unwrap();
        let full = sys.matrix().full_triplets();
        for (r, c, v) in full {
            prop_assert_eq!(sys.matrix().get(c, r), v);
        }
    }
}
