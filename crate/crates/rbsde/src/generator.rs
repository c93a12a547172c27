//! BSDE coefficients f(t, y): nonincreasing and continuous in y.
//!
//! Builtin families are monotone by construction; tabulated ones are
//! validated at load time. The approximation transforms used by the
//! solvers (Moreau inf-convolution, truncation at a decaying floor, the
//! clamped-and-weighted ladder) wrap an inner generator and keep the
//! monotonicity and bound metadata the schemes rely on.

use crate::error::{Error, Result};

/// Declared pointwise lower bound l(t) <= f(t, y).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LowerBound {
    Const(f64),
    /// l(t) = -scale * exp(-t).
    NegExpScaled(f64),
}

impl LowerBound {
    pub fn eval(self, t: f64) -> f64 {
        match self {
            LowerBound::Const(c) => c,
            LowerBound::NegExpScaled(s) => -s * (-t).exp(),
        }
    }

    fn floor_at_zero(self) -> LowerBound {
        match self {
            LowerBound::Const(c) => LowerBound::Const(c.min(0.0)),
            LowerBound::NegExpScaled(s) => LowerBound::NegExpScaled(s),
        }
    }
}

/// Truncation floor g(t) > 0 for the monotone scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Floor {
    /// g(t) = exp(-t), the default.
    ExpDecay,
    Const(f64),
}

impl Floor {
    pub fn eval(self, t: f64) -> f64 {
        match self {
            Floor::ExpDecay => (-t).exp(),
            Floor::Const(c) => c,
        }
    }
}

/// Weight c_n(t) in the Moreau approximation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MoreauWeight {
    /// c_n = 1; the right choice on finite horizons.
    Unit,
    /// c_n(t) = n rho(t) / (1 + n rho(t)) with rho(t) = exp(-t).
    ExpDecay,
}

#[derive(Debug, Clone)]
enum Kind {
    Zero,
    /// f = a - b y with b >= 0.
    Affine { a: f64, b: f64 },
    /// f = a - b sign(y) |y|^p with b >= 0, p > 0.
    Power { a: f64, b: f64, p: f64 },
    /// f = a - c / (1 + exp(-k (y - y0))) with c, k >= 0.
    Logistic { a: f64, c: f64, k: f64, y0: f64 },
    /// Piecewise linear through sorted knots, constant beyond the ends.
    Tabulated { knots: Vec<(f64, f64)> },
    /// Moreau inf-convolution: c_n(t) inf_x { f(x) + n |y - x| }.
    Moreau { inner: Box<Generator>, n: f64, weight: MoreauWeight },
    /// f v (-n g(t)): truncation from below at a decaying floor.
    FloorTruncated { inner: Box<Generator>, n: f64, floor: Floor },
    /// (n rho / (1 + n rho)) max(min(f, n), -m) with rho(t) = rho_scale e^{-t}.
    Clamped { inner: Box<Generator>, n: f64, m: f64, rho_scale: f64 },
}

#[derive(Debug, Clone)]
pub struct Generator {
    kind: Kind,
    lipschitz: Option<f64>,
    lower_bound: Option<LowerBound>,
}

impl Generator {
    pub fn zero() -> Self {
        Generator { kind: Kind::Zero, lipschitz: Some(0.0), lower_bound: Some(LowerBound::Const(0.0)) }
    }

    pub fn affine(a: f64, b: f64) -> Result<Self> {
        if b < 0.0 {
            return Err(Error::Scenario("affine generator needs b >= 0".into()));
        }
        Ok(Generator {
            kind: Kind::Affine { a, b },
            lipschitz: Some(b),
            lower_bound: (b == 0.0).then_some(LowerBound::Const(a)),
        })
    }

    pub fn power(a: f64, b: f64, p: f64) -> Result<Self> {
        if b < 0.0 || p <= 0.0 {
            return Err(Error::Scenario("power generator needs b >= 0 and p > 0".into()));
        }
        Ok(Generator {
            kind: Kind::Power { a, b, p },
            lipschitz: (p == 1.0).then_some(b),
            lower_bound: (b == 0.0).then_some(LowerBound::Const(a)),
        })
    }

    pub fn logistic(a: f64, c: f64, k: f64, y0: f64) -> Result<Self> {
        if c < 0.0 || k < 0.0 {
            return Err(Error::Scenario("logistic generator needs c, k >= 0".into()));
        }
        Ok(Generator {
            kind: Kind::Logistic { a, c, k, y0 },
            lipschitz: Some(c * k / 4.0),
            lower_bound: Some(LowerBound::Const(a - c)),
        })
    }

    /// Piecewise-linear generator through `knots` sorted by y, constant
    /// beyond the first and last knot. Monotonicity is checked exactly.
    pub fn tabulated(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::Scenario("tabulated generator needs at least two knots".into()));
        }
        let mut lipschitz = 0.0f64;
        for w in knots.windows(2) {
            let ((y0, f0), (y1, f1)) = (w[0], w[1]);
            if y1 <= y0 {
                return Err(Error::Scenario("tabulated knots must be strictly increasing in y".into()));
            }
            if f1 > f0 {
                return Err(Error::NonMonotoneGenerator { t: 0.0, y_lo: y0, y_hi: y1, f_lo: f0, f_hi: f1 });
            }
            lipschitz = lipschitz.max((f0 - f1) / (y1 - y0));
        }
        let min_f = knots.last().unwrap().1;
        Ok(Generator {
            kind: Kind::Tabulated { knots },
            lipschitz: Some(lipschitz),
            lower_bound: Some(LowerBound::Const(min_f)),
        })
    }

    /// Overrides the declared Lipschitz constant.
    pub fn with_lipschitz(mut self, lambda: f64) -> Self {
        self.lipschitz = Some(lambda);
        self
    }

    /// Overrides the declared lower bound.
    pub fn with_lower_bound(mut self, bound: LowerBound) -> Self {
        self.lower_bound = Some(bound);
        self
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn lower_bound(&self) -> Option<LowerBound> {
        self.lower_bound
    }

    /// Moreau inf-convolution with slope n: n-Lipschitz, below f, increasing
    /// in n. Requires a declared lower bound to window the minimization.
    pub fn moreau(&self, n: f64, weight: MoreauWeight) -> Result<Generator> {
        let lower = self.lower_bound.ok_or(Error::MissingLowerBound)?;
        Ok(Generator {
            kind: Kind::Moreau { inner: Box::new(self.clone()), n, weight },
            lipschitz: Some(n),
            lower_bound: Some(match weight {
                MoreauWeight::Unit => lower,
                MoreauWeight::ExpDecay => lower.floor_at_zero(),
            }),
        })
    }

    /// Truncation from below: f v (-n g(t)).
    pub fn truncated_below(&self, n: f64, floor: Floor) -> Generator {
        let lower = match floor {
            Floor::ExpDecay => LowerBound::NegExpScaled(n),
            Floor::Const(c) => LowerBound::Const(-n * c),
        };
        Generator {
            kind: Kind::FloorTruncated { inner: Box::new(self.clone()), n, floor },
            lipschitz: self.lipschitz,
            lower_bound: Some(lower),
        }
    }

    /// Clamped-and-weighted ladder generator.
    pub fn clamped_ladder(&self, n: f64, m: f64, rho_scale: f64) -> Generator {
        Generator {
            kind: Kind::Clamped { inner: Box::new(self.clone()), n, m, rho_scale },
            lipschitz: self.lipschitz,
            lower_bound: Some(LowerBound::Const(-m)),
        }
    }

    pub fn eval(&self, t: f64, y: f64) -> f64 {
        match &self.kind {
            Kind::Zero => 0.0,
            Kind::Affine { a, b } => a - b * y,
            Kind::Power { a, b, p } => a - b * y.signum() * y.abs().powf(*p),
            Kind::Logistic { a, c, k, y0 } => a - c / (1.0 + (-k * (y - y0)).exp()),
            Kind::Tabulated { knots } => {
                if y <= knots[0].0 {
                    return knots[0].1;
                }
                if y >= knots[knots.len() - 1].0 {
                    return knots[knots.len() - 1].1;
                }
                let i = knots.partition_point(|&(ky, _)| ky <= y);
                let (y0, f0) = knots[i - 1];
                let (y1, f1) = knots[i];
                f0 + (f1 - f0) * (y - y0) / (y1 - y0)
            }
            Kind::Moreau { inner, n, weight } => {
                let w = match weight {
                    MoreauWeight::Unit => 1.0,
                    MoreauWeight::ExpDecay => {
                        let rho = (-t).exp();
                        n * rho / (1.0 + n * rho)
                    }
                };
                w * moreau_value(inner, t, y, *n)
            }
            Kind::FloorTruncated { inner, n, floor } => inner.eval(t, y).max(-n * floor.eval(t)),
            Kind::Clamped { inner, n, m, rho_scale } => {
                let rho = rho_scale * (-t).exp();
                let w = n * rho / (1.0 + n * rho);
                w * inner.eval(t, y).min(*n).max(-m)
            }
        }
    }

    /// Checks y -> f(t, y) is nonincreasing on a 64-point probe grid.
    pub fn probe_monotone(&self, t: f64, y_lo: f64, y_hi: f64) -> Result<()> {
        let steps = 64;
        let mut prev_y = y_lo;
        let mut prev_f = self.eval(t, y_lo);
        for i in 1..=steps {
            let y = y_lo + (y_hi - y_lo) * i as f64 / steps as f64;
            let f = self.eval(t, y);
            if f > prev_f {
                return Err(Error::NonMonotoneGenerator { t, y_lo: prev_y, y_hi: y, f_lo: prev_f, f_hi: f });
            }
            prev_y = y;
            prev_f = f;
        }
        Ok(())
    }
}

/// inf_x { f(t, x) + n |y - x| }, by windowed grid search plus golden
/// section. Outside [y - (f(y) - l) / n, y + (f(y) - l) / n] the objective
/// exceeds f(t, y), so the window always contains the minimizer.
fn moreau_value(inner: &Generator, t: f64, y: f64, n: f64) -> f64 {
    let f_y = inner.eval(t, y);
    // When f is already n-Lipschitz the infimum is attained at x = y.
    if let Some(lambda) = inner.lipschitz {
        if lambda <= n {
            return f_y;
        }
    }
    let floor = inner
        .lower_bound
        .expect("moreau generators are constructed with a lower bound")
        .eval(t);
    let radius = (f_y - floor) / n;
    if !(radius > 0.0) {
        return f_y;
    }
    let objective = |x: f64| inner.eval(t, x) + n * (y - x).abs();
    let cells = 128;
    let lo = y - radius;
    let hi = y + radius;
    let mut best_i = 0;
    let mut best = f64::INFINITY;
    for i in 0..=cells {
        let x = lo + (hi - lo) * i as f64 / cells as f64;
        let v = objective(x);
        if v < best {
            best = v;
            best_i = i;
        }
    }
    let cell = (hi - lo) / cells as f64;
    let mut a = lo + cell * best_i.saturating_sub(1) as f64;
    let mut b = (lo + cell * (best_i + 1) as f64).min(hi);
    let inv_phi = 0.618_033_988_749_894_9_f64;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = objective(x1);
    let mut f2 = objective(x2);
    for _ in 0..80 {
        if b - a < 1e-13 * (1.0 + y.abs()) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = objective(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = objective(x2);
        }
    }
    best.min(f1).min(f2).min(f_y)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// f(y) = max(-2y, 0) on [-10, 10] as a piecewise-linear table.
    fn hinge() -> Generator {
        Generator::tabulated(vec![(-10.0, 20.0), (0.0, 0.0), (10.0, 0.0)]).unwrap()
    }

    #[test]
    fn family_evaluation() {
        let f = Generator::affine(1.0, 2.0).unwrap();
        assert_eq!(f.eval(0.0, 3.0), -5.0);
        let f = Generator::power(0.0, 1.0, 3.0).unwrap();
        assert_eq!(f.eval(0.0, 2.0), -8.0);
        assert_eq!(f.eval(0.0, -2.0), 8.0);
        let f = Generator::logistic(1.0, 2.0, 1.0, 0.0).unwrap();
        assert_eq!(f.eval(0.0, 0.0), 0.0);
        let f = hinge();
        assert_eq!(f.eval(0.0, -1.0), 2.0);
        assert_eq!(f.eval(0.0, 1.0), 0.0);
        assert_eq!(f.eval(0.0, -20.0), 20.0);
    }

    #[test]
    fn tabulated_rejects_non_monotone() {
        assert!(Generator::tabulated(vec![(0.0, 0.0), (1.0, 1.0)]).is_err());
    }

    #[test]
    fn probe_monotone_accepts_families() {
        for f in [
            Generator::affine(1.0, 0.5).unwrap(),
            Generator::power(0.2, 1.0, 2.0).unwrap(),
            Generator::logistic(0.0, 1.0, 2.0, 0.5).unwrap(),
            hinge(),
        ] {
            f.probe_monotone(0.0, -5.0, 5.0).unwrap();
        }
    }

    #[test]
    fn moreau_equals_f_for_lipschitz_inner() {
        // f is 2-Lipschitz; with n = 2 the infimum sits at x = y.
        let f = hinge();
        let fn1 = f.moreau(2.0, MoreauWeight::Unit).unwrap();
        for y in [-3.0, -1.0, -0.25, 0.0, 0.5, 2.0] {
            assert_eq!(fn1.eval(0.0, y), f.eval(0.0, y));
        }
    }

    #[test]
    fn moreau_hinge_at_slope_one() {
        // inf_x { max(-2x, 0) + |y - x| } at y = -1 is 1 (minimizer x = 0).
        let f = hinge().with_lipschitz(2.0);
        let f1 = f.moreau(1.0, MoreauWeight::Unit).unwrap();
        assert!((f1.eval(0.0, -1.0) - 1.0).abs() < 1e-9);
        // At y = 1, f(1) = 0 and the envelope is squeezed between 0 and f.
        assert!((f1.eval(0.0, 1.0)).abs() < 1e-9);
    }

    #[test]
    fn moreau_increases_with_n_and_stays_below_f() {
        let f = hinge().with_lipschitz(2.0);
        let f1 = f.moreau(1.0, MoreauWeight::Unit).unwrap();
        let f2 = f.moreau(1.5, MoreauWeight::Unit).unwrap();
        for i in 0..33 {
            let y = -4.0 + i as f64 * 0.25;
            let (v1, v2, v) = (f1.eval(0.0, y), f2.eval(0.0, y), f.eval(0.0, y));
            assert!(v1 <= v2 + 1e-9 && v2 <= v + 1e-9, "ordering violated at y={y}");
        }
    }

    #[test]
    fn truncation_decreases_with_n_and_dominates_f() {
        let f = Generator::power(0.0, 1.0, 3.0).unwrap();
        let f1 = f.truncated_below(1.0, Floor::ExpDecay);
        let f2 = f.truncated_below(2.0, Floor::ExpDecay);
        for i in 0..33 {
            let y = -4.0 + i as f64 * 0.25;
            for t in [0.0, 0.5, 1.5] {
                let (v1, v2, v) = (f1.eval(t, y), f2.eval(t, y), f.eval(t, y));
                assert!(v1 >= v2 && v2 >= v, "f_n >= f_{{n+1}} >= f violated at y={y}, t={t}");
            }
        }
        assert_eq!(f1.lower_bound(), Some(LowerBound::NegExpScaled(1.0)));
    }

    #[test]
    fn clamped_ladder_formula() {
        // Near-unit weight: f_{4,4}(3) for f = -y^2 is max(min(-9, 4), -4) = -4.
        let f = Generator::power(0.0, 1.0, 2.0).unwrap();
        let g = f.clamped_ladder(4.0, 4.0, 1e12);
        assert!((g.eval(0.0, 3.0) - (-4.0)).abs() < 1e-9);
        // m -> infinity recovers the weighted min(f, n).
        let g = f.clamped_ladder(4.0, 1e18, 1e12);
        assert!((g.eval(0.0, 3.0) - (-9.0)).abs() < 1e-6);
        assert!((g.eval(0.0, -1.0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn transforms_keep_monotonicity() {
        let f = Generator::power(0.5, 1.0, 2.0).unwrap();
        f.truncated_below(2.0, Floor::ExpDecay)
            .probe_monotone(0.3, -4.0, 4.0)
            .unwrap();
        f.clamped_ladder(4.0, 4.0, 1e9).probe_monotone(0.3, -4.0, 4.0).unwrap();
        hinge().moreau(1.0, MoreauWeight::Unit).unwrap().probe_monotone(0.0, -4.0, 4.0).unwrap();
    }
}
