//! Quadrature rules on the reference triangle.
//!
//! Rules are stored in barycentric form with weights normalised to sum to one,
//! so `area * sum_q w_q f(x_q)` approximates the integral over any triangle.
//! Degrees up to 4 and 7-8 use classical symmetric rules (centroid, 3, 6 and
//! 16 points); everything else is a collapsed Gauss-Legendre product rule, which is exact
//! for any requested polynomial degree.

use std::sync::OnceLock;

/// Highest polynomial degree for which cached rules are built.
pub const MAX_DEGREE: usize = 30;

/// A quadrature rule on a triangle in barycentric coordinates.
#[derive(Clone, Debug)]
pub struct TriangleRule {
    degree: usize,
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

impl TriangleRule {
    /// Polynomial degree integrated exactly.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Barycentric coordinates of the nodes.
    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    /// Weights, summing to one.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; 3], f64)> + '_ {
        self.points.iter().zip(self.weights.iter().copied())
    }

    fn centroid() -> Self {
        TriangleRule {
            degree: 1,
            points: vec![[1.0 / 3.0; 3]],
            weights: vec![1.0],
        }
    }

    fn three_point() -> Self {
        let a = 2.0 / 3.0;
        let b = 1.0 / 6.0;
        TriangleRule {
            degree: 2,
            points: vec![[a, b, b], [b, a, b], [b, b, a]],
            weights: vec![1.0 / 3.0; 3],
        }
    }

    fn six_point() -> Self {
        // Strang-Fix / Dunavant degree-4 rule.
        const A1: f64 = 0.445_948_490_915_964_9;
        const W1: f64 = 0.223_381_589_678_011_47;
        const A2: f64 = 0.091_576_213_509_770_743;
        const W2: f64 = 0.109_951_743_655_321_87;
        let mut points = Vec::with_capacity(6);
        let mut weights = Vec::with_capacity(6);
        for (a, w) in [(A1, W1), (A2, W2)] {
            let b = 1.0 - 2.0 * a;
            points.extend([[b, a, a], [a, b, a], [a, a, b]]);
            weights.extend([w; 3]);
        }
        TriangleRule {
            degree: 4,
            points,
            weights,
        }
    }

    fn sixteen_point() -> Self {
        // Dunavant degree-8 rule.
        const W0: f64 = 0.144_315_607_677_787;
        const ORBITS3: [(f64, f64); 3] = [
            (0.459_292_588_292_723, 0.095_091_634_267_285),
            (0.170_569_307_751_760, 0.103_217_370_534_718),
            (0.050_547_228_317_031, 0.032_458_497_623_198),
        ];
        const ORBIT6: [f64; 3] = [
            0.263_112_829_634_638,
            0.008_394_777_409_958,
            0.728_492_392_955_404,
        ];
        const W6: f64 = 0.027_230_314_174_435;
        let mut points = vec![[1.0 / 3.0; 3]];
        let mut weights = vec![W0];
        for (a, w) in ORBITS3 {
            let b = 1.0 - 2.0 * a;
            points.extend([[b, a, a], [a, b, a], [a, a, b]]);
            weights.extend([w; 3]);
        }
        let [a, b, c] = ORBIT6;
        points.extend([
            [a, b, c],
            [a, c, b],
            [b, a, c],
            [b, c, a],
            [c, a, b],
            [c, b, a],
        ]);
        weights.extend([W6; 6]);
        TriangleRule {
            degree: 8,
            points,
            weights,
        }
    }

    /// Collapsed (Duffy) product of two Gauss-Legendre rules, exact for
    /// polynomials of total degree `degree`.
    pub fn collapsed(degree: usize) -> Self {
        // in the collapsed direction the Jacobian adds one degree
        let n = (degree + 3) / 2;
        let (x, w) = gauss_legendre_unit(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for i in 0..n {
            let u = x[i];
            for j in 0..n {
                let v = x[j] * (1.0 - u);
                // reference triangle has area 1/2, so normalise by 2
                weights.push(2.0 * w[i] * w[j] * (1.0 - u));
                points.push([1.0 - u - v, u, v]);
            }
        }
        TriangleRule {
            degree,
            points,
            weights,
        }
    }
}

/// Smallest cached rule that integrates polynomials of `degree` exactly.
///
/// Panics if `degree > MAX_DEGREE`.
pub fn triangle_rule(degree: usize) -> &'static TriangleRule {
    static RULES: OnceLock<Vec<TriangleRule>> = OnceLock::new();
    assert!(degree <= MAX_DEGREE, "no cached rule of degree {degree}");
    let rules = RULES.get_or_init(|| {
        (0..=MAX_DEGREE)
            .map(|d| match d {
                0 | 1 => TriangleRule::centroid(),
                2 => TriangleRule::three_point(),
                3 | 4 => TriangleRule::six_point(),
                7 | 8 => TriangleRule::sixteen_point(),
                _ => TriangleRule::collapsed(d),
            })
            .collect()
    });
    &rules[degree]
}

/// Collapsed Gauss rule of the given degree, cached. Used where an
/// independent high-order reference is wanted.
pub fn collapsed_rule(degree: usize) -> &'static TriangleRule {
    static RULES: OnceLock<Vec<TriangleRule>> = OnceLock::new();
    assert!(degree <= MAX_DEGREE, "no cached rule of degree {degree}");
    let rules = RULES.get_or_init(|| (0..=MAX_DEGREE).map(TriangleRule::collapsed).collect());
    &rules[degree]
}

/// Gauss-Legendre nodes and weights on [0, 1].
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let dp = legendre(n, z).1;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = 0.5 * (1.0 - z);
        nodes[n - 1 - i] = 0.5 * (1.0 + z);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

/// Legendre polynomial P_n and its derivative at z.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}
