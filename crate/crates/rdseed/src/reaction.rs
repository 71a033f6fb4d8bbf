//! Reaction terms with exact first and second derivatives, convexity
//! classification and the scalar equation f'(v) = target used on the
//! singular arc.

use crate::error::{Error, Result};

/// Derivative order for [`ReactionModel::eval`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Deriv {
    F,
    FPrime,
    FSecond,
}

/// Closed-form reaction term. All variants evaluate (by the same formula)
/// on an extended range around [0, 1] since optimizer intermediates and
/// convex-model solutions can leave the unit interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReactionModel {
    /// f(u) = u (1 - u)(u - theta); stable zeros at 0 and 1, unstable at theta.
    Bistable { theta: f64 },
    /// f(u) = (u + theta) u (1 - u); monostable on (0, 1), not concave.
    MonostableShifted { theta: f64 },
    /// f(u) = |u|^a / a; convex with f(0) = 0 (even extension below zero).
    ConvexPower { a: f64 },
    /// f(u) = c3 u^3 + c2 u^2 + c1 u + c0.
    CubicCustom { c3: f64, c2: f64, c1: f64, c0: f64 },
}

impl ReactionModel {
    pub fn bistable(theta: f64) -> Result<Self> {
        if !(0.0 < theta && theta < 1.0) {
            return Err(Error::Config(format!(
                "bistable: need theta in (0,1), got {theta}"
            )));
        }
        Ok(ReactionModel::Bistable { theta })
    }

    pub fn monostable_shifted(theta: f64) -> Result<Self> {
        if !(0.0 < theta && theta < 1.0) {
            return Err(Error::Config(format!(
                "monostable: need theta in (0,1), got {theta}"
            )));
        }
        Ok(ReactionModel::MonostableShifted { theta })
    }

    pub fn convex_power(a: f64) -> Result<Self> {
        if !(a > 1.0) {
            return Err(Error::Config(format!("convex power: need a > 1, got {a}")));
        }
        Ok(ReactionModel::ConvexPower { a })
    }

    pub fn cubic(c3: f64, c2: f64, c1: f64, c0: f64) -> Self {
        ReactionModel::CubicCustom { c3, c2, c1, c0 }
    }

    /// Identically-zero reaction (useful as the pure-diffusion model).
    pub fn zero() -> Self {
        ReactionModel::CubicCustom {
            c3: 0.0,
            c2: 0.0,
            c1: 0.0,
            c0: 0.0,
        }
    }

    /// Exact evaluation of f, f' or f''.
    pub fn eval(&self, order: Deriv, v: f64) -> f64 {
        match *self {
            ReactionModel::Bistable { theta } => {
                // f = -u^3 + (1+theta) u^2 - theta u
                match order {
                    Deriv::F => v * (1.0 - v) * (v - theta),
                    Deriv::FPrime => -3.0 * v * v + 2.0 * (1.0 + theta) * v - theta,
                    Deriv::FSecond => -6.0 * v + 2.0 * (1.0 + theta),
                }
            }
            ReactionModel::MonostableShifted { theta } => {
                // f = -u^3 + (1-theta) u^2 + theta u
                match order {
                    Deriv::F => (v + theta) * v * (1.0 - v),
                    Deriv::FPrime => -3.0 * v * v + 2.0 * (1.0 - theta) * v + theta,
                    Deriv::FSecond => -6.0 * v + 2.0 * (1.0 - theta),
                }
            }
            ReactionModel::ConvexPower { a } => {
                let s = v.signum();
                let av = v.abs();
                match order {
                    Deriv::F => av.powf(a) / a,
                    Deriv::FPrime => s * av.powf(a - 1.0),
                    Deriv::FSecond => (a - 1.0) * av.powf(a - 2.0),
                }
            }
            ReactionModel::CubicCustom { c3, c2, c1, c0 } => match order {
                Deriv::F => ((c3 * v + c2) * v + c1) * v + c0,
                Deriv::FPrime => (3.0 * c3 * v + 2.0 * c2) * v + c1,
                Deriv::FSecond => 6.0 * c3 * v + 2.0 * c2,
            },
        }
    }

    pub fn f(&self, v: f64) -> f64 {
        self.eval(Deriv::F, v)
    }

    pub fn fp(&self, v: f64) -> f64 {
        self.eval(Deriv::FPrime, v)
    }

    pub fn fpp(&self, v: f64) -> f64 {
        self.eval(Deriv::FSecond, v)
    }

    /// Sign of f''(v) with a zero band |f''| <= 1e-12.
    pub fn concavity_sign(&self, v: f64) -> i8 {
        let s = self.fpp(v);
        if s.abs() <= 1e-12 {
            0
        } else if s > 0.0 {
            1
        } else {
            -1
        }
    }

    /// Largest |f'| over `[lo, hi]` by dense sampling; used for the
    /// documented stability envelope of the linearized reaction treatment.
    pub fn max_abs_fprime(&self, lo: f64, hi: f64) -> f64 {
        let n = 256;
        (0..=n)
            .map(|i| {
                let v = lo + (hi - lo) * i as f64 / n as f64;
                self.fp(v).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// A root of f'(v) = target annotated with the local concavity of f.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FprimeRoot {
    pub value: f64,
    pub concavity: i8,
}

/// All solutions of `f'(v) = target` in `[lo, hi]`, sorted ascending.
///
/// f' is split into monotone pieces at the sign changes of f'' (found by
/// dense sampling), each bracketed root is refined by bisection to
/// |f'(v) - target| <= 1e-12, and tangency points (where a piece endpoint
/// itself hits the target) are kept once.
pub fn solve_fprime(model: &ReactionModel, target: f64, lo: f64, hi: f64) -> Vec<FprimeRoot> {
    assert!(lo < hi, "solve_fprime: need lo < hi");
    const RES_TOL: f64 = 1e-12;

    // breakpoints = lo, hi and sign changes of f''
    let samples = 512;
    let mut breaks = vec![lo];
    let mut prev = model.fpp(lo);
    let mut prev_x = lo;
    for i in 1..=samples {
        let x = lo + (hi - lo) * i as f64 / samples as f64;
        let cur = model.fpp(x);
        if prev == 0.0 || prev.signum() != cur.signum() {
            // refine the f'' zero by bisection on [prev_x, x]
            let (mut a, mut b) = (prev_x, x);
            let fa = model.fpp(a);
            for _ in 0..90 {
                let m = 0.5 * (a + b);
                if model.fpp(m).signum() == fa.signum() && model.fpp(m) != 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            breaks.push(0.5 * (a + b));
        }
        prev = cur;
        prev_x = x;
    }
    breaks.push(hi);
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-13 * (hi - lo).max(1.0));

    let g = |v: f64| model.fp(v) - target;
    let mut roots: Vec<f64> = Vec::new();
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (ga, gb) = (g(a), g(b));
        if ga.abs() <= RES_TOL {
            roots.push(a);
        }
        if gb.abs() <= RES_TOL {
            roots.push(b);
        }
        if ga * gb < 0.0 {
            let (mut x0, mut x1) = (a, b);
            let mut g0 = ga;
            for _ in 0..200 {
                let xm = 0.5 * (x0 + x1);
                let gm = g(xm);
                if gm.abs() <= RES_TOL {
                    x0 = xm;
                    x1 = xm;
                    break;
                }
                if g0 * gm < 0.0 {
                    x1 = xm;
                } else {
                    x0 = xm;
                    g0 = gm;
                }
            }
            roots.push(0.5 * (x0 + x1));
        }
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * (hi - lo).max(1.0));
    roots
        .into_iter()
        .map(|value| FprimeRoot {
            value,
            concavity: model.concavity_sign(value),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const THETA: f64 = 0.25;

    fn bi() -> ReactionModel {
        ReactionModel::bistable(THETA).unwrap()
    }

    #[test]
    fn bistable_roots_and_inflection() {
        let m = bi();
        assert_eq!(m.f(0.0), 0.0);
        assert_eq!(m.f(1.0), 0.0);
        assert_eq!(m.f(THETA), 0.0);
        // f'' is affine: -6v + 2(1+theta), zero at (1+theta)/3
        let eta = (1.0 + THETA) / 3.0;
        assert!(m.fpp(eta).abs() < 1e-15);
        assert_eq!(m.concavity_sign(0.9), -1);
        assert_eq!(m.concavity_sign(0.1), 1);
    }

    #[test]
    fn convex_power_is_convex_everywhere_sampled() {
        let m = ReactionModel::convex_power(2.0).unwrap();
        assert_eq!(m.f(0.0), 0.0);
        for i in 0..50 {
            let v = 1.5 * i as f64 / 49.0;
            assert_eq!(m.concavity_sign(v), 1);
        }
        // quadratic case evaluates on negatives by the same (even) formula
        assert!((m.f(-0.5) - 0.125).abs() < 1e-15);
        assert!((m.fp(-0.5) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn derivative_consistency_finite_difference() {
        // |eval(order k) - centered FD of eval(order k-1)| small over [0,1]
        let models = [
            bi(),
            ReactionModel::monostable_shifted(0.25).unwrap(),
            ReactionModel::convex_power(2.0).unwrap(),
            ReactionModel::cubic(1.3, -0.7, 0.2, 0.05),
        ];
        let h = 1e-6;
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for m in models {
            for _ in 0..1000 {
                let v = next();
                let fd1 = (m.f(v + h) - m.f(v - h)) / (2.0 * h);
                assert!((m.fp(v) - fd1).abs() <= 1e-6, "{m:?} v={v}");
                let fd2 = (m.fp(v + h) - m.fp(v - h)) / (2.0 * h);
                assert!((m.fpp(v) - fd2).abs() <= 1e-6, "{m:?} v={v}");
            }
        }
    }

    /// Quadratic-formula oracle for f'(v) = t on the bistable cubic:
    /// -3v^2 + 2(1+theta)v - theta = t.
    fn bistable_fprime_roots_oracle(theta: f64, t: f64) -> Vec<f64> {
        let (a, b, c) = (-3.0, 2.0 * (1.0 + theta), -(theta + t));
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return vec![];
        }
        let s = disc.sqrt();
        let mut r = vec![(-b + s) / (2.0 * a), (-b - s) / (2.0 * a)];
        r.sort_by(|x, y| x.partial_cmp(y).unwrap());
        r.dedup_by(|x, y| (*x - *y).abs() < 1e-14);
        r
    }

    #[test]
    fn solve_fprime_two_roots_one_concave() {
        // two roots in [0,1] need target in (f'(0), max f'), i.e. the
        // concave-side root in (5/12, 5/6); 0.8 qualifies
        let m = bi();
        let t = m.fp(0.8);
        let roots = solve_fprime(&m, t, 0.0, 1.0);
        let oracle = bistable_fprime_roots_oracle(THETA, t);
        assert_eq!(roots.len(), 2);
        assert_eq!(oracle.len(), 2);
        for (r, o) in roots.iter().zip(&oracle) {
            assert!((r.value - o).abs() < 1e-10, "root {} vs oracle {o}", r.value);
        }
        let concave: Vec<_> = roots.iter().filter(|r| r.concavity <= 0).collect();
        assert_eq!(concave.len(), 1);
        assert!((concave[0].value - 0.8).abs() < 1e-10);
    }

    #[test]
    fn solve_fprime_companion_root_can_leave_unit_interval() {
        // f'(0.9) = -0.43 < f'(0): the second root sits at v = -0.067, so
        // only 0.9 remains in [0,1] and it is the concave one
        let m = bi();
        let roots = solve_fprime(&m, m.fp(0.9), 0.0, 1.0);
        assert_eq!(roots.len(), 1);
        assert!((roots[0].value - 0.9).abs() < 1e-10);
        assert_eq!(roots[0].concavity, -1);
        let wide = solve_fprime(&m, m.fp(0.9), -0.5, 1.0);
        assert_eq!(wide.len(), 2, "companion root reappears on [-0.5, 1]");
    }

    #[test]
    fn solve_fprime_tangency_and_empty() {
        let m = bi();
        let eta = (1.0 + THETA) / 3.0;
        let tmax = m.fp(eta);
        let roots = solve_fprime(&m, tmax, 0.0, 1.0);
        assert_eq!(roots.len(), 1, "tangency should give a single root");
        assert!((roots[0].value - eta).abs() < 1e-7);
        assert!(solve_fprime(&m, tmax + 1.0, 0.0, 1.0).is_empty());
    }

    #[test]
    fn solve_fprime_matches_dense_sampling() {
        // every sign change found by a 1e4-point scan is matched by a root,
        // and every returned root is a genuine solution
        let m = bi();
        for &t in &[-0.2, -0.05, 0.05, 0.15, 0.25] {
            let roots = solve_fprime(&m, t, 0.0, 1.0);
            for r in &roots {
                assert!((m.fp(r.value) - t).abs() <= 1e-10);
            }
            let n = 10_000;
            let mut scan_count = 0;
            let mut prev = m.fp(0.0) - t;
            for i in 1..=n {
                let v = i as f64 / n as f64;
                let cur = m.fp(v) - t;
                if prev * cur < 0.0 {
                    scan_count += 1;
                    let inside = roots
                        .iter()
                        .any(|r| r.value >= v - 1.0 / n as f64 && r.value <= v);
                    assert!(inside, "scan found a crossing near {v} with no root");
                }
                prev = cur;
            }
            assert!(roots.len() >= scan_count);
            assert!(roots.len() <= 2, "bistable f' is a parabola");
            assert!(roots.iter().filter(|r| r.concavity == -1).count() <= 1);
        }
    }
}
