//! Benchmark problems: the parameterized heat equation with a manufactured
//! solution, and the Brusselator reaction-diffusion system.

/// Admissible diffusivity range of the heat studies.
pub const HEAT_MU_RANGE: (f64, f64) = (0.5, 9.5);

fn bump(s: f64) -> f64 {
    s * s * (1.0 - s) * (1.0 - s)
}

fn bump_prime(s: f64) -> f64 {
    2.0 * s * (1.0 - s) * (1.0 - 2.0 * s)
}

/// Exact solution for `mu = 1`: `10 t x^2 (1-x)^2 y^2 (1-y)^2`.
pub fn manufactured_u(t: f64, x: f64, y: f64) -> f64 {
    10.0 * t * bump(x) * bump(y)
}

pub fn manufactured_grad(t: f64, x: f64, y: f64) -> (f64, f64) {
    (10.0 * t * bump_prime(x) * bump(y), 10.0 * t * bump(x) * bump_prime(y))
}

/// Source term matching [`manufactured_u`] for `mu = 1`.
pub fn manufactured_f(t: f64, x: f64, y: f64) -> f64 {
    let px = 6.0 * x * x - 6.0 * x + 1.0;
    let py = 6.0 * y * y - 6.0 * y + 1.0;
    10.0 * (bump(x) * bump(y) - 2.0 * t * (px * bump(y) + py * bump(x)))
}

/// `u_t - mu Δu = f` on the unit square with homogeneous Dirichlet data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatProblem {
    pub mu: f64,
    pub t0: f64,
    pub t_end: f64,
}

impl HeatProblem {
    pub fn new(mu: f64, t0: f64, t_end: f64) -> Self {
        HeatProblem { mu, t0, t_end }
    }

    pub fn source(&self, t: f64, x: f64, y: f64) -> f64 {
        manufactured_f(t, x, y)
    }

    /// True when the manufactured solution is exact for this diffusivity.
    pub fn has_exact_solution(&self) -> bool {
        (self.mu - 1.0).abs() < 1e-12
    }

    pub fn in_range(&self) -> bool {
        (HEAT_MU_RANGE.0..=HEAT_MU_RANGE.1).contains(&self.mu)
    }
}

/// Brusselator parameters `(a, b, alpha)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrusselatorParams {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
}

pub const BRUSSELATOR_BOUNDS: [(f64, f64); 3] = [(2.0, 4.0), (1.0, 4.0), (0.001, 0.05)];

impl BrusselatorParams {
    pub fn new(a: f64, b: f64, alpha: f64) -> Self {
        BrusselatorParams { a, b, alpha }
    }

    /// Spatially homogeneous steady state `(a, b / a)`.
    pub fn steady_state(&self) -> (f64, f64) {
        (self.a, self.b / self.a)
    }

    /// The homogeneous steady state is linearly stable for `b <= 1 + a^2`.
    pub fn is_stable(&self) -> bool {
        self.b <= 1.0 + self.a * self.a
    }

    pub fn in_range(&self) -> bool {
        let v = [self.a, self.b, self.alpha];
        v.iter().zip(BRUSSELATOR_BOUNDS).all(|(x, (lo, hi))| (lo..=hi).contains(x))
    }
}

/// Initial concentrations on the unit square.
pub fn brusselator_initial(x: f64, y: f64) -> (f64, f64) {
    (2.0 + 0.25 * y, 1.0 + 0.8 * x)
}

/// Pointwise reaction terms `(a + u1² u2 - (b+1) u1, b u1 - u1² u2)`.
pub fn brusselator_rhs(p: &BrusselatorParams, u1: f64, u2: f64) -> (f64, f64) {
    let q = u1 * u1 * u2;
    (p.a + q - (p.b + 1.0) * u1, p.b * u1 - q)
}

/// Partial derivatives of [`brusselator_rhs`]: `[[d r1/d u1, d r1/d u2], [d r2/d u1, d r2/d u2]]`.
pub fn brusselator_jacobian(p: &BrusselatorParams, u1: f64, u2: f64) -> [[f64; 2]; 2] {
    let d1 = 2.0 * u1 * u2;
    let d2 = u1 * u1;
    [[d1 - (p.b + 1.0), d2], [p.b - d1, -d2]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manufactured_values() {
        assert!((manufactured_u(1.0, 0.5, 0.5) - 0.0390625).abs() < 1e-16);
        assert!((manufactured_u(2.0, 0.5, 0.5) - 0.078125).abs() < 1e-16);
        for s in [0.0, 0.3, 1.0] {
            assert_eq!(manufactured_u(3.0, 0.0, s), 0.0);
            assert_eq!(manufactured_u(3.0, 1.0, s), 0.0);
            assert_eq!(manufactured_u(3.0, s, 0.0), 0.0);
            assert_eq!(manufactured_u(3.0, s, 1.0), 0.0);
        }
        assert_eq!(manufactured_f(7.0, 0.0, 0.0), 0.0);
        assert!((manufactured_f(0.0, 0.5, 0.5) - 0.0390625).abs() < 1e-16);
    }

    #[test]
    fn brusselator_examples() {
        let p = BrusselatorParams::new(3.0, 2.0, 0.008);
        let (s1, s2) = p.steady_state();
        let (r1, r2) = brusselator_rhs(&p, s1, s2);
        assert!(r1.abs() < 1e-15 && r2.abs() < 1e-15);
        assert_eq!(brusselator_rhs(&p, 0.0, 5.0), (3.0, 0.0));
        assert_eq!(brusselator_rhs(&p, 1.0, 1.0), (1.0, 1.0));
        assert!(p.is_stable() && p.in_range());
        assert!(!BrusselatorParams::new(1.0, 3.0, 0.01).is_stable());
    }

    #[test]
    fn jacobian_matches_differences() {
        let p = BrusselatorParams::new(2.5, 3.0, 0.01);
        let (u1, u2) = (1.3, 0.7);
        let j = brusselator_jacobian(&p, u1, u2);
        let e = 1e-6;
        let f = |a, b| brusselator_rhs(&p, a, b);
        let d1 = ((f(u1 + e, u2).0 - f(u1 - e, u2).0) / (2.0 * e), (f(u1 + e, u2).1 - f(u1 - e, u2).1) / (2.0 * e));
        let d2 = ((f(u1, u2 + e).0 - f(u1, u2 - e).0) / (2.0 * e), (f(u1, u2 + e).1 - f(u1, u2 - e).1) / (2.0 * e));
        assert!((j[0][0] - d1.0).abs() < 1e-8 && (j[1][0] - d1.1).abs() < 1e-8);
        assert!((j[0][1] - d2.0).abs() < 1e-8 && (j[1][1] - d2.1).abs() < 1e-8);
    }
}
