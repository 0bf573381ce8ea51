#![allow(dead_code)]

use std::sync::Arc;

use lgfem::fe::{FeSpace, Field};
use lgfem::mesh::{Mesh, MeshPattern};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random piecewise-linear field vanishing on the boundary, scaled so that
/// `dt |w|_{1,inf}` equals `target`.
pub fn random_w_star(p1: &Arc<FeSpace>, dt: f64, target: f64, rng: &mut ChaCha8Rng) -> Field {
    let n = p1.n_dofs();
    let mut c = vec![0.0; 2 * n];
    for comp in 0..2 {
        for i in 0..n {
            if !p1.dirichlet_mask()[i] {
                c[comp * n + i] = rng.gen_range(-1.0..1.0);
            }
        }
    }
    let mut w = Field::from_coefficients(p1.clone(), 2, c).unwrap();
    let s = w.w1inf_seminorm();
    if s > 0.0 {
        w.scale(target / (dt * s));
    }
    w
}

pub fn random_field(space: &Arc<FeSpace>, rng: &mut ChaCha8Rng) -> Field {
    let c = (0..2 * space.n_dofs())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    Field::from_coefficients(space.clone(), 2, c).unwrap()
}

pub struct Instance {
    pub p1: Arc<FeSpace>,
    pub space: Arc<FeSpace>,
    pub w_star: Field,
    pub u_prev: Field,
    pub dt: f64,
}

/// Mesh with `N <= 8`, random `w*` with `dt |w*|_{1,inf} <= 0.2`, random
/// `u_prev` of degree 1 or 2.
pub fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let n = rng.gen_range(2..=8);
    let pattern = if rng.gen_bool(0.5) {
        MeshPattern::Crisscross
    } else {
        MeshPattern::AlternatingDiagonal
    };
    let mesh = Arc::new(Mesh::unit_square(n, pattern).unwrap());
    let degree = rng.gen_range(1..=2);
    let p1 = FeSpace::new(mesh.clone(), 1).unwrap();
    let space = if degree == 1 {
        p1.clone()
    } else {
        FeSpace::new(mesh, 2).unwrap()
    };
    let dt = rng.gen_range(0.01..0.1);
    let measure = rng.gen_range(0.05..0.2);
    let w_star = random_w_star(&p1, dt, measure, rng);
    let u_prev = random_field(&space, rng);
    Instance {
        p1,
        space,
        w_star,
        u_prev,
        dt,
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Momentum residual `du/dt + (u . grad) u - nu lap u + grad p - f` of a
/// problem's closed-form data, with all derivatives by central differences.
/// First derivatives use step `h`, second derivatives step `h2`.
pub fn fd_momentum_residual(
    p: &lgfem::problems::ProblemDef,
    nu: f64,
    x: [f64; 2],
    t: f64,
    h: f64,
    h2: f64,
) -> [f64; 2] {
    let u = p.exact_u.as_ref().unwrap();
    let pr = p.exact_p.as_ref().unwrap();
    let e = [[1.0, 0.0], [0.0, 1.0]];
    let shift = |d: [f64; 2], s: f64| [x[0] + s * d[0], x[1] + s * d[1]];
    let u0 = u(x, t);
    let ut: Vec<f64> = (0..2)
        .map(|i| (u(x, t + h)[i] - u(x, t - h)[i]) / (2.0 * h))
        .collect();
    let mut grad = [[0.0; 2]; 2];
    let mut lap = [0.0; 2];
    let mut gp = [0.0; 2];
    for j in 0..2 {
        let (up, um) = (u(shift(e[j], h), t), u(shift(e[j], -h), t));
        let (up2, um2) = (u(shift(e[j], h2), t), u(shift(e[j], -h2), t));
        for i in 0..2 {
            grad[i][j] = (up[i] - um[i]) / (2.0 * h);
            lap[i] += (up2[i] - 2.0 * u0[i] + um2[i]) / (h2 * h2);
        }
        gp[j] = (pr(shift(e[j], h), t) - pr(shift(e[j], -h), t)) / (2.0 * h);
    }
    let f = (p.forcing)(x, t);
    std::array::from_fn(|i| {
        ut[i] + u0[0] * grad[i][0] + u0[1] * grad[i][1] - nu * lap[i] + gp[i] - f[i]
    })
}

/// Dense LU with partial pivoting, row-major `n x n`.
pub struct DenseLu {
    n: usize,
    a: Vec<f64>,
    piv: Vec<usize>,
}

impl DenseLu {
    pub fn new(n: usize, mut a: Vec<f64>) -> Self {
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| a[i * n + k].abs().total_cmp(&a[j * n + k].abs()))
                .unwrap();
            assert!(a[p * n + k].abs() > 1e-300, "singular matrix");
            if p != k {
                for c in 0..n {
                    a.swap(k * n + c, p * n + c);
                }
                piv.swap(k, p);
            }
            let d = a[k * n + k];
            for i in k + 1..n {
                let l = a[i * n + k] / d;
                if l != 0.0 {
                    a[i * n + k] = l;
                    for c in k + 1..n {
                        a[i * n + c] -= l * a[k * n + c];
                    }
                }
            }
        }
        DenseLu { n, a, piv }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.piv.iter().map(|&i| b[i]).collect();
        for i in 0..n {
            for k in 0..i {
                x[i] -= self.a[i * n + k] * x[k];
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                x[i] -= self.a[i * n + k] * x[k];
            }
            x[i] /= self.a[i * n + i];
        }
        x
    }
}

/// Manufactured flow with the forcing of the unsteady Stokes equations
/// and `w = 0`.
pub fn stokes_problem(cp: f64, nu: f64) -> lgfem::problems::ProblemDef {
    use lgfem::problems::{example41, Manufactured, ProblemKind};
    let m = Manufactured { cp };
    let mut p = example41(cp, nu, ProblemKind::Oseen);
    p.forcing = Arc::new(move |x, t| {
        let f = m.forcing(x, t, nu);
        let u = m.velocity(x, t);
        let g = m.velocity_gradient(x, t);
        [
            f[0] - u[0] * g[0][0] - u[1] * g[0][1],
            f[1] - u[0] * g[1][0] - u[1] * g[1][1],
        ]
    });
    p.w = Some(Arc::new(|_, _| [0.0, 0.0]));
    p
}
