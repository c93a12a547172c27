//! Shared backward induction engine on the doubled grid.
//!
//! One sweep handles the unreflected equation, one- and two-sided
//! reflection, and sub-problems stopped at an arbitrary rule: terminal
//! values are injected on the stop frontier and values beyond it are
//! frozen. Generator mass accrues only on open intervals (t+, t+1) with
//! weight h; right jumps are carried by the driver and reflection parts,
//! never by the martingale.

use crate::error::{Error, Result};
use crate::filtration::{FilteredTree, Frontier, NodeId};
use crate::generator::Generator;
use crate::processes::{FvProcess, LatticeProcess, MartingalePart, Phase};

/// Generator restricted to the interval (t+, t+1) at a node; `y` is the
/// unknown value carried on the open interval.
pub trait IntervalRate {
    fn rate(&self, tree: &FilteredTree, node: NodeId, y: f64) -> f64;
}

pub struct ZeroRate;

impl IntervalRate for ZeroRate {
    fn rate(&self, _: &FilteredTree, _: NodeId, _: f64) -> f64 {
        0.0
    }
}

pub struct GenRate<'a>(pub &'a Generator);

impl IntervalRate for GenRate<'_> {
    fn rate(&self, tree: &FilteredTree, node: NodeId, y: f64) -> f64 {
        self.0.eval(tree.time(tree.level(node)), y)
    }
}

/// Generator composed with a per-slot shift: f(t, y - s(node, t+)).
pub struct ShiftedRate<'a> {
    pub gen: &'a Generator,
    pub shift: &'a LatticeProcess,
}

impl IntervalRate for ShiftedRate<'_> {
    fn rate(&self, tree: &FilteredTree, node: NodeId, y: f64) -> f64 {
        let s = self.shift.get(tree, node, Phase::Plus);
        self.gen.eval(tree.time(tree.level(node)), y - s)
    }
}

/// Frozen rate read off a process at the plus slot, independent of y.
pub struct FrozenRate<'a>(pub &'a LatticeProcess);

impl IntervalRate for FrozenRate<'_> {
    fn rate(&self, tree: &FilteredTree, node: NodeId, y: f64) -> f64 {
        let _ = y;
        self.0.get(tree, node, Phase::Plus)
    }
}

const BRACKET_LIMIT: f64 = 1e9;
const ROOT_TOL: f64 = 1e-13;

/// Unique root of y - h g(y) = target for nonincreasing g, by bisection on
/// an expanding bracket.
pub fn solve_root(target: f64, h: f64, g: impl Fn(f64) -> f64, t_for_error: f64) -> Result<f64> {
    if h == 0.0 {
        return Ok(target);
    }
    let residual = |y: f64| y - h * g(y) - target;
    let r0 = residual(target);
    if r0 == 0.0 {
        return Ok(target);
    }
    // residual is strictly increasing in y.
    let (mut lo, mut hi);
    if r0 > 0.0 {
        hi = target;
        let mut width = 1.0;
        loop {
            lo = target - width;
            if residual(lo) <= 0.0 {
                break;
            }
            width *= 2.0;
            if width > BRACKET_LIMIT {
                return Err(Error::UnboundedGeneratorStep { t: t_for_error, limit: BRACKET_LIMIT });
            }
        }
    } else {
        lo = target;
        let mut width = 1.0;
        loop {
            hi = target + width;
            if residual(hi) >= 0.0 {
                break;
            }
            width *= 2.0;
            if width > BRACKET_LIMIT {
                return Err(Error::UnboundedGeneratorStep { t: t_for_error, limit: BRACKET_LIMIT });
            }
        }
    }
    bisect(lo, hi, residual)
}

fn bisect(mut lo: f64, mut hi: f64, residual: impl Fn(f64) -> f64) -> Result<f64> {
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let r = residual(mid);
        if r.abs() <= ROOT_TOL || hi - lo <= f64::EPSILON * mid.abs().max(1.0) {
            return Ok(mid);
        }
        if r > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(mid)
}

/// Root of the interval equation clamped between optional barriers, with
/// the reflection increments needed to hold the value at a barrier.
///
/// Returns (value, dK*+ lower push, dK*- upper push).
fn clamped_root(
    target: f64,
    h: f64,
    g: impl Fn(f64) -> f64,
    lower: Option<f64>,
    upper: Option<f64>,
    t_for_error: f64,
) -> Result<(f64, f64, f64)> {
    let residual = |y: f64| y - h * g(y) - target;
    if let Some(l) = lower {
        let r = residual(l);
        if r >= 0.0 {
            // Unconstrained root sits at or below the barrier.
            return Ok((l, r, 0.0));
        }
    }
    if let Some(u) = upper {
        let r = residual(u);
        if r <= 0.0 {
            return Ok((u, 0.0, -r));
        }
    }
    let y = match (lower, upper) {
        (Some(l), Some(u)) => bisect(l, u, residual)?,
        _ => solve_root(target, h, g, t_for_error)?,
    };
    Ok((y, 0.0, 0.0))
}

pub struct SweepSpec<'a> {
    /// Stop frontier where terminal values are injected.
    pub horizon: &'a Frontier,
    /// Terminal value per frontier node.
    pub terminal: &'a dyn Fn(NodeId) -> f64,
    pub rate: &'a dyn IntervalRate,
    pub driver: Option<&'a FvProcess>,
    pub lower: Option<&'a LatticeProcess>,
    pub upper: Option<&'a LatticeProcess>,
}

pub struct SweepOut {
    pub y: LatticeProcess,
    pub m: MartingalePart,
    /// Lower reflection (increasing, predictable cadlag channel).
    pub k_plus: FvProcess,
    /// Upper reflection (increasing, predictable cadlag channel).
    pub k_minus: FvProcess,
    /// Largest bisection residual left in an interval equation.
    pub max_root_residual: f64,
}

pub fn sweep(tree: &FilteredTree, spec: &SweepSpec) -> Result<SweepOut> {
    let n = tree.node_count();
    let mut y = LatticeProcess::constant(tree, 0.0);
    let mut m_inc = vec![0.0; n];
    let mut k_cad = vec![0.0; n];
    let mut k_right = vec![0.0; n];
    let mut r_cad = vec![0.0; n];
    let mut r_right = vec![0.0; n];
    let mut max_root_residual = 0.0f64;
    let h = tree.step();

    for node in (0..n).rev() {
        if !spec.horizon.live[node] {
            continue;
        }
        let level = tree.level(node);
        match spec.horizon.stop_phase[node] {
            Some(Phase::Instant) => {
                let val = (spec.terminal)(node);
                y.set(tree, node, Phase::Instant, val);
                if level < tree.horizon() {
                    y.set(tree, node, Phase::Plus, val);
                }
                continue;
            }
            Some(Phase::Plus) => {
                y.set(tree, node, Phase::Plus, (spec.terminal)(node));
            }
            None => {
                // Interval step (t+, t+1]: conditional target plus driver,
                // implicit in the generator, clamped at the plus slot.
                let mut target = 0.0;
                for (i, &w) in tree.children(node).iter().enumerate() {
                    let dv = spec.driver.map_or(0.0, |v| v.cadlag_jump(tree, w));
                    target += tree.branch_probability(node, i) * (y.get(tree, w, Phase::Instant) + dv);
                }
                let (val, push_up, push_down) = clamped_root(
                    target,
                    h,
                    |z| spec.rate.rate(tree, node, z),
                    spec.lower.map(|l| l.get(tree, node, Phase::Plus)),
                    spec.upper.map(|u| u.get(tree, node, Phase::Plus)),
                    tree.time(level),
                )?;
                if push_up == 0.0 && push_down == 0.0 {
                    let r = (val - h * spec.rate.rate(tree, node, val) - target).abs();
                    max_root_residual = max_root_residual.max(r);
                }
                y.set(tree, node, Phase::Plus, val);
                for (i, &w) in tree.children(node).iter().enumerate() {
                    let _ = i;
                    let dv = spec.driver.map_or(0.0, |v| v.cadlag_jump(tree, w));
                    k_cad[w] = push_up;
                    r_cad[w] = push_down;
                    m_inc[w] = y.get(tree, w, Phase::Instant) + dv - target;
                }
            }
        }
        // Instant half-step (t, t+]: driver right jump plus reflection.
        let base = y.get(tree, node, Phase::Plus) + spec.driver.map_or(0.0, |v| v.right_jump(tree, node));
        let mut val = base;
        if let Some(l) = spec.lower {
            let lv = l.get(tree, node, Phase::Instant);
            if val < lv {
                k_right[node] = lv - val;
                val = lv;
            }
        }
        if let Some(u) = spec.upper {
            let uv = u.get(tree, node, Phase::Instant);
            if val > uv {
                r_right[node] = val - uv;
                val = uv;
            }
        }
        y.set(tree, node, Phase::Instant, val);
    }

    // Freeze values strictly after the frontier.
    let mut frozen = vec![0.0; n];
    for node in tree.nodes_by_level() {
        if spec.horizon.live[node] {
            if let Some(phase) = spec.horizon.stop_phase[node] {
                frozen[node] = y.get(tree, node, phase);
            }
        } else {
            let p = tree.parent(node).expect("non-live node has a parent");
            frozen[node] = frozen[p];
            y.set(tree, node, Phase::Instant, frozen[node]);
            if tree.level(node) < tree.horizon() {
                y.set(tree, node, Phase::Plus, frozen[node]);
            }
        }
    }

    Ok(SweepOut {
        y,
        m: MartingalePart::from_increments(tree, &m_inc),
        k_plus: FvProcess::from_jumps(tree, &k_cad, &k_right),
        k_minus: FvProcess::from_jumps(tree, &r_cad, &r_right),
        max_root_residual,
    })
}

/// Worst pathwise defect of the dynamics identity
/// `Y_t+ = Y_{t+1} + h f + dV* + dK* - dR* - dM` and
/// `Y_t = Y_t+ + d+V + d+K - d+R` over live slots.
#[allow(clippy::too_many_arguments)]
pub fn dynamics_residual(
    tree: &FilteredTree,
    horizon: &Frontier,
    y: &LatticeProcess,
    m: &MartingalePart,
    k_plus: &FvProcess,
    k_minus: &FvProcess,
    rate: &dyn IntervalRate,
    driver: Option<&FvProcess>,
) -> f64 {
    let h = tree.step();
    let mut worst = 0.0f64;
    for node in 0..tree.node_count() {
        if !horizon.live[node] || horizon.stop_phase[node].is_some() {
            continue;
        }
        let plus = y.get(tree, node, Phase::Plus);
        let f_val = rate.rate(tree, node, plus);
        for &w in tree.children(node) {
            let dv = driver.map_or(0.0, |v| v.cadlag_jump(tree, w));
            let dm = m.base.get(tree, w, Phase::Instant) - m.base.get(tree, node, Phase::Plus);
            let rebuilt = y.get(tree, w, Phase::Instant) + h * f_val + dv + k_plus.cadlag_jump(tree, w)
                - k_minus.cadlag_jump(tree, w)
                - dm;
            worst = worst.max((rebuilt - plus).abs());
        }
        let dv = driver.map_or(0.0, |v| v.right_jump(tree, node));
        let rebuilt =
            plus + dv + k_plus.right_jump(tree, node) - k_minus.right_jump(tree, node);
        worst = worst.max((rebuilt - y.get(tree, node, Phase::Instant)).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn root_examples() {
        // y = 2 - y  =>  y = 1.
        let y = solve_root(2.0, 1.0, |y| -y, 0.0).unwrap();
        assert!((y - 1.0).abs() <= 1e-12);
        // Zero step returns the target.
        assert_eq!(solve_root(5.0, 0.0, |y| -y * y * y, 0.0).unwrap(), 5.0);
        // y = 2 - y^3  =>  y = 1.
        let y = solve_root(2.0, 1.0, |y| -y * y * y, 0.0).unwrap();
        assert!((y - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn root_is_monotone_in_target() {
        let mut prev = f64::NEG_INFINITY;
        for i in 0..20 {
            let target = -2.0 + 0.37 * i as f64;
            let y = solve_root(target, 0.5, |y| 1.0 - y.powi(3), 0.0).unwrap();
            assert!(y >= prev);
            prev = y;
        }
    }

    #[test]
    fn root_matches_affine_closed_form() {
        for (target, h, a, b) in [(2.0, 1.0, 0.0, 1.0), (-3.0, 0.25, 1.5, 2.0), (0.7, 0.01, -1.0, 10.0)] {
            let y = solve_root(target, h, |y| a - b * y, 0.0).unwrap();
            let exact = (target + h * a) / (1.0 + h * b);
            assert!((y - exact).abs() <= 1e-12, "y={y}, exact={exact}");
        }
    }

    #[test]
    fn runaway_bracket_errors() {
        // y = target + h (1 + y) has no root once h = 1: residual -> -target-1.
        let err = solve_root(2.0, 1.0, |y| 1.0 + y, 0.0).unwrap_err();
        assert!(matches!(err, Error::UnboundedGeneratorStep { .. }));
    }
}
