//! Model problems on the unit square: a manufactured smooth flow with
//! closed-form forcing, and a forced flow at rest with a hydrostatic
//! pressure.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::mesh::Point;

pub type VectorFn = Arc<dyn Fn(Point, f64) -> [f64; 2] + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>;
pub type InitialFn = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;

/// Whether the advecting velocity is prescribed (Oseen) or the solution
/// itself (Navier-Stokes).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    Oseen,
    NavierStokes,
}

/// Data of a transient problem on the unit square with homogeneous
/// Dirichlet velocity.
#[derive(Clone)]
pub struct ProblemDef {
    pub name: String,
    pub final_time: f64,
    pub exact_u: Option<VectorFn>,
    pub exact_p: Option<ScalarFn>,
    pub forcing: VectorFn,
    pub u0: InitialFn,
    /// Prescribed advecting velocity; `None` for Navier-Stokes.
    pub w: Option<VectorFn>,
    pub cp: f64,
    /// Viscosity the problem is posed with, if fixed.
    pub nu: Option<f64>,
}

impl std::fmt::Debug for ProblemDef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemDef")
            .field("name", &self.name)
            .field("final_time", &self.final_time)
            .field("has_exact_u", &self.exact_u.is_some())
            .field("has_exact_p", &self.exact_p.is_some())
            .field("has_w", &self.w.is_some())
            .field("cp", &self.cp)
            .field("nu", &self.nu)
            .finish()
    }
}

/// `phi(a, b, t) = -sin^2(pi a) sin(pi b) [sin(pi (a + t)) + 3 sin(pi (a + 2b + t))]`
/// and the derivatives needed for the forcing.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhiJet {
    pub value: f64,
    pub da: f64,
    pub db: f64,
    pub dt: f64,
    pub daa: f64,
    pub dbb: f64,
}

pub fn phi_jet(a: f64, b: f64, t: f64) -> PhiJet {
    let (sa, ca) = (PI * a).sin_cos();
    let (sb, cb) = (PI * b).sin_cos();
    let (s1, c1) = (PI * (a + t)).sin_cos();
    let (s2, c2) = (PI * (a + 2.0 * b + t)).sin_cos();
    let f = sa * sa;
    let f1 = 2.0 * PI * sa * ca;
    let f2 = 2.0 * PI * PI * (ca * ca - sa * sa);
    let g = s1 + 3.0 * s2;
    let ga = PI * (c1 + 3.0 * c2);
    let gb = 6.0 * PI * c2;
    let gaa = -PI * PI * g;
    let gbb = -12.0 * PI * PI * s2;
    PhiJet {
        value: -f * sb * g,
        da: -(f1 * sb * g + f * sb * ga),
        db: -(f * PI * cb * g + f * sb * gb),
        dt: -f * sb * ga,
        daa: -(f2 * sb * g + 2.0 * f1 * sb * ga + f * sb * gaa),
        dbb: -(-PI * PI * f * sb * g + 2.0 * f * PI * cb * gb + f * sb * gbb),
    }
}

/// The manufactured flow `u = (phi(x1, x2, t), -phi(x2, x1, t))`,
/// `p = cp sin(pi (x1 + 2 x2) + 1 + t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Manufactured {
    pub cp: f64,
}

impl Manufactured {
    pub fn velocity(&self, x: Point, t: f64) -> [f64; 2] {
        [phi_jet(x[0], x[1], t).value, -phi_jet(x[1], x[0], t).value]
    }

    /// `grad[i][j] = d u_i / d x_j`.
    pub fn velocity_gradient(&self, x: Point, t: f64) -> [[f64; 2]; 2] {
        let p = phi_jet(x[0], x[1], t);
        let q = phi_jet(x[1], x[0], t);
        [[p.da, p.db], [-q.db, -q.da]]
    }

    pub fn pressure(&self, x: Point, t: f64) -> f64 {
        self.cp * (PI * (x[0] + 2.0 * x[1]) + 1.0 + t).sin()
    }

    pub fn pressure_gradient(&self, x: Point, t: f64) -> [f64; 2] {
        let c = self.cp * (PI * (x[0] + 2.0 * x[1]) + 1.0 + t).cos();
        [PI * c, 2.0 * PI * c]
    }

    /// `f = du/dt + (u . grad) u - nu lap u + grad p`.
    pub fn forcing(&self, x: Point, t: f64, nu: f64) -> [f64; 2] {
        let p = phi_jet(x[0], x[1], t);
        let q = phi_jet(x[1], x[0], t);
        let u = [p.value, -q.value];
        let grad = [[p.da, p.db], [-q.db, -q.da]];
        let lap = [p.daa + p.dbb, -(q.daa + q.dbb)];
        let dudt = [p.dt, -q.dt];
        let gp = self.pressure_gradient(x, t);
        std::array::from_fn(|i| {
            dudt[i] + u[0] * grad[i][0] + u[1] * grad[i][1] - nu * lap[i] + gp[i]
        })
    }
}

/// The manufactured problem on `(0, 1)` in time. For the Oseen kind the
/// advecting velocity is the exact solution itself.
pub fn example41(cp: f64, nu: f64, kind: ProblemKind) -> ProblemDef {
    let m = Manufactured { cp };
    let exact_u: VectorFn = Arc::new(move |x, t| m.velocity(x, t));
    ProblemDef {
        name: format!("manufactured(cp={cp})"),
        final_time: 1.0,
        exact_p: Some(Arc::new(move |x, t| m.pressure(x, t))),
        forcing: Arc::new(move |x, t| m.forcing(x, t, nu)),
        u0: Arc::new(move |x| m.velocity(x, 0.0)),
        w: (kind == ProblemKind::Oseen).then(|| exact_u.clone()),
        exact_u: Some(exact_u),
        cp,
        nu: Some(nu),
    }
}

/// Fluid at rest under the force `(0, 10 sin(2 pi x2))`, balanced by the
/// pressure `-(5/pi) cos(2 pi x2)`; `T = 40`, `nu = 1e-4`.
pub fn example42() -> ProblemDef {
    ProblemDef {
        name: "hydrostatic".into(),
        final_time: 40.0,
        exact_u: Some(Arc::new(|_, _| [0.0, 0.0])),
        exact_p: Some(Arc::new(|x, _| -(5.0 / PI) * (2.0 * PI * x[1]).cos())),
        forcing: Arc::new(|x, _| [0.0, 10.0 * (2.0 * PI * x[1]).sin()]),
        u0: Arc::new(|_| [0.0, 0.0]),
        w: None,
        cp: 0.0,
        nu: Some(1e-4),
    }
}

/// `f = 0`, `u0 = 0` with the trivial exact solution.
pub fn zero_problem(final_time: f64, kind: ProblemKind) -> ProblemDef {
    let zero: VectorFn = Arc::new(|_, _| [0.0, 0.0]);
    ProblemDef {
        name: "zero".into(),
        final_time,
        exact_u: Some(zero.clone()),
        exact_p: Some(Arc::new(|_, _| 0.0)),
        forcing: zero.clone(),
        u0: Arc::new(|_| [0.0, 0.0]),
        w: (kind == ProblemKind::Oseen).then_some(zero),
        cp: 0.0,
        nu: None,
    }
}
