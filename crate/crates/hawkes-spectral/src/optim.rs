//! Box-constrained limited-memory quasi-Newton minimizer (L-BFGS-B).
//!
//! Classic structure: at each iterate, walk the projected-gradient path
//! through the box to a generalized Cauchy point, minimize the
//! limited-memory quadratic model over the variables still free there
//! (direct primal method with a Sherman-Morrison-Woodbury solve), and take
//! a strong-Wolfe line search along the resulting direction. The compact
//! representation keeps `B = theta I - W M W^T` with one `n x 2m` matrix
//! and one small square matrix.
//!
//! The objective callback returns the function value and gradient
//! together. Non-finite values are treated as "too far" by the line
//! search, which lets callers implement barriers by returning infinity.

use nalgebra::{DMatrix, DVector};

/// Lower/upper bounds per coordinate (finite, `lo <= hi`).
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len(), "bound vectors differ in length");
        for (l, h) in lo.iter().zip(&hi) {
            assert!(l.is_finite() && h.is_finite() && l <= h, "bad bound pair ({l}, {h})");
        }
        Self { lo, hi }
    }

    pub fn len(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_empty()
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for i in 0..x.len() {
            x[i] = x[i].clamp(self.lo[i], self.hi[i]);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *v >= *l && *v <= *h)
    }
}

#[derive(Debug, Clone)]
pub struct OptimOptions {
    /// Number of curvature pairs kept.
    pub memory: usize,
    pub max_iters: usize,
    /// Convergence when the projected gradient's infinity norm drops below
    /// this.
    pub grad_tol: f64,
    /// Convergence when the relative decrease of `f` drops below this.
    pub f_rel_tol: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self { memory: 10, max_iters: 500, grad_tol: 1e-6, f_rel_tol: 1e-10 }
    }
}

#[derive(Debug, Clone)]
pub struct OptimOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    /// Human-readable termination reason.
    pub message: String,
}

/// Infinity norm of `P(x - g) - x`, the projected gradient step.
pub fn projected_gradient_norm(x: &[f64], g: &[f64], bounds: &Bounds) -> f64 {
    x.iter()
        .zip(g)
        .enumerate()
        .map(|(i, (&xi, &gi))| ((xi - gi).clamp(bounds.lo[i], bounds.hi[i]) - xi).abs())
        .fold(0.0, f64::max)
}

const WOLFE_C1: f64 = 1e-4;
const WOLFE_C2: f64 = 0.9;
const MAX_LINE_EVALS: usize = 40;

struct Model {
    /// Curvature pairs, oldest first.
    s: Vec<DVector<f64>>,
    y: Vec<DVector<f64>>,
    theta: f64,
    /// `[Y, theta S]`, `n x 2k`.
    w: DMatrix<f64>,
    /// Inverse of the middle matrix; `2k x 2k`.
    m: DMatrix<f64>,
}

impl Model {
    fn fresh(n: usize) -> Self {
        Self {
            s: Vec::new(),
            y: Vec::new(),
            theta: 1.0,
            // Single zero column so the products below are well-typed noops.
            w: DMatrix::zeros(n, 1),
            m: DMatrix::zeros(1, 1),
        }
    }

    fn reboot(&mut self, n: usize) {
        *self = Self::fresh(n);
    }

    /// Stores an (s, y) pair if it carries positive curvature and rebuilds
    /// the compact matrices. Returns false when the middle matrix could not
    /// be inverted (caller should reboot).
    fn update(&mut self, s: DVector<f64>, y: DVector<f64>, memory: usize) -> bool {
        let sy = s.dot(&y);
        let yy = y.dot(&y);
        if !(sy > f64::EPSILON * yy) || !sy.is_finite() {
            return true; // skip the pair, keep the current model
        }
        self.s.push(s);
        self.y.push(y);
        if self.s.len() > memory {
            self.s.remove(0);
            self.y.remove(0);
        }
        self.theta = yy / sy;
        let k = self.s.len();
        let n = self.s[0].len();
        let mut w = DMatrix::zeros(n, 2 * k);
        for j in 0..k {
            w.set_column(j, &self.y[j]);
            w.set_column(k + j, &(&self.s[j] * self.theta));
        }
        // Middle matrix [[-D, L^T], [L, theta S^T S]] with
        // D_jj = s_j . y_j and L_ij = s_i . y_j for i > j.
        let mut mid = DMatrix::zeros(2 * k, 2 * k);
        for i in 0..k {
            mid[(i, i)] = -self.s[i].dot(&self.y[i]);
            for j in 0..k {
                if i > j {
                    let lij = self.s[i].dot(&self.y[j]);
                    mid[(k + i, j)] = lij;
                    mid[(j, k + i)] = lij;
                }
                mid[(k + i, k + j)] = self.theta * self.s[i].dot(&self.s[j]);
            }
        }
        match mid.try_inverse() {
            Some(inv) => {
                self.w = w;
                self.m = inv;
                true
            }
            None => false,
        }
    }
}

/// Generalized Cauchy point: minimizes the quadratic model along the
/// piecewise-linear projected steepest-descent path. Returns the point and
/// the accumulated `c = W^T (xcp - x)` needed by the subspace step.
fn cauchy_point(
    x: &[f64],
    g: &[f64],
    bounds: &Bounds,
    model: &Model,
) -> (Vec<f64>, DVector<f64>) {
    let n = x.len();
    let mut xcp = x.to_vec();
    let mut d = DVector::zeros(n);
    let mut breaks: Vec<(f64, usize)> = Vec::new();
    for i in 0..n {
        let t = if g[i] < 0.0 {
            (x[i] - bounds.hi[i]) / g[i]
        } else if g[i] > 0.0 {
            (x[i] - bounds.lo[i]) / g[i]
        } else {
            f64::INFINITY
        };
        if t > 0.0 {
            d[i] = -g[i];
            if t.is_finite() {
                breaks.push((t, i));
            }
        }
        // t == 0: the variable sits on a bound with the gradient pushing
        // outward; it never moves along this path.
    }
    breaks.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut p = model.w.transpose() * &d;
    let mut c = DVector::zeros(p.len());
    let dd = d.dot(&d);
    let mut fp = -dd;
    let mut fpp = model.theta * dd - (&p.transpose() * &model.m * &p)[(0, 0)];
    let mut t_old = 0.0;

    let advance = |xcp: &mut Vec<f64>, d: &DVector<f64>, dt: f64| {
        for i in 0..n {
            xcp[i] += dt * d[i];
        }
    };

    for &(t_b, b) in &breaks {
        let dt = t_b - t_old;
        let dt_min = if fpp > 0.0 {
            -fp / fpp
        } else if fp < 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        if dt_min < dt {
            let step = dt_min.max(0.0);
            advance(&mut xcp, &d, step);
            c += &p * step;
            bounds.clamp(&mut xcp);
            return (xcp, c);
        }
        // Variable b reaches its bound; freeze it there exactly.
        advance(&mut xcp, &d, dt);
        c += &p * dt;
        xcp[b] = if g[b] < 0.0 { bounds.hi[b] } else { bounds.lo[b] };

        let gb = g[b];
        let wb = model.w.row(b).transpose();
        let zb = xcp[b] - x[b];
        let mc = &model.m * &c;
        let mp = &model.m * &p;
        let mw = &model.m * &wb;
        fp += dt * fpp + gb * gb + model.theta * gb * zb - gb * wb.dot(&mc);
        fpp += -model.theta * gb * gb - 2.0 * gb * wb.dot(&mp) - gb * gb * wb.dot(&mw);
        p += &wb * gb;
        d[b] = 0.0;
        t_old = t_b;
    }
    // All remaining directions have infinite breakpoints (zero gradient),
    // so d = 0 here and xcp is final; if some d survived (all breakpoints
    // consumed), land on the model minimizer along it.
    let dt_min = if fpp > 0.0 { (-fp / fpp).max(0.0) } else { 0.0 };
    if dt_min > 0.0 && d.iter().any(|v| *v != 0.0) {
        advance(&mut xcp, &d, dt_min);
        c += &p * dt_min;
    }
    bounds.clamp(&mut xcp);
    (xcp, c)
}

/// Direct primal subspace minimization over the variables free at the
/// Cauchy point, truncated back into the box.
fn subspace_min(
    x: &[f64],
    g: &[f64],
    xcp: &[f64],
    c: &DVector<f64>,
    bounds: &Bounds,
    model: &Model,
) -> Vec<f64> {
    let n = x.len();
    let free: Vec<usize> = (0..n)
        .filter(|&i| xcp[i] > bounds.lo[i] && xcp[i] < bounds.hi[i])
        .collect();
    if free.is_empty() {
        return xcp.to_vec();
    }
    // Reduced gradient of the model at the Cauchy point.
    let wmc = &model.w * (&model.m * c);
    let rhat = DVector::from_iterator(
        free.len(),
        free.iter()
            .map(|&i| g[i] + model.theta * (xcp[i] - x[i]) - wmc[i]),
    );
    let dir = if model.s.is_empty() {
        -&rhat / model.theta
    } else {
        let k2 = model.w.ncols();
        let mut wz = DMatrix::zeros(free.len(), k2);
        for (r, &i) in free.iter().enumerate() {
            wz.set_row(r, &model.w.row(i));
        }
        let v = &model.m * (wz.transpose() * &rhat);
        let nmat = DMatrix::identity(k2, k2) - (&model.m * (wz.transpose() * &wz)) / model.theta;
        match nmat.lu().solve(&v) {
            Some(vv) => -(&rhat + (&wz * vv) / model.theta) / model.theta,
            None => -&rhat / model.theta,
        }
    };
    // Longest fraction of the step that stays inside the box.
    let mut alpha: f64 = 1.0;
    for (r, &i) in free.iter().enumerate() {
        let di = dir[r];
        if di > 0.0 {
            alpha = alpha.min((bounds.hi[i] - xcp[i]) / di);
        } else if di < 0.0 {
            alpha = alpha.min((bounds.lo[i] - xcp[i]) / di);
        }
    }
    alpha = alpha.clamp(0.0, 1.0);
    let mut out = xcp.to_vec();
    for (r, &i) in free.iter().enumerate() {
        out[i] += alpha * dir[r];
    }
    bounds.clamp(&mut out);
    out
}

struct LineResult {
    alpha: f64,
    f: f64,
    g: Vec<f64>,
}

/// Strong-Wolfe line search on `phi(a) = f(x + a dir)`, `a in (0, a_max]`.
/// Falls back to the best Armijo point if the curvature condition is out
/// of reach (e.g. the step is clipped by the box). `None` means no
/// acceptable decrease was found.
fn line_search<F>(
    eval: &mut F,
    x: &[f64],
    dir: &[f64],
    f0: f64,
    dphi0: f64,
    a_max: f64,
    evals: &mut usize,
) -> Option<LineResult>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let probe = |a: f64, eval: &mut F| -> (f64, Vec<f64>) {
        let xa: Vec<f64> = x.iter().zip(dir).map(|(xi, di)| xi + a * di).collect();
        eval(&xa)
    };
    let armijo = |a: f64, f: f64| f <= f0 + WOLFE_C1 * a * dphi0;

    let eval_budget = *evals + MAX_LINE_EVALS;
    let mut best: Option<LineResult> = None;
    let mut a_prev = 0.0;
    let mut f_prev = f0;
    let mut d_prev = dphi0;
    let mut a = 1.0_f64.min(a_max);
    // Bracketing phase.
    let mut bracket: Option<(f64, f64, f64, f64, f64)> = None; // (alo, flo, dlo, ahi, fhi)
    let mut first = true;
    while *evals < eval_budget {
        let (f, g) = probe(a, eval);
        *evals += 1;
        if !f.is_finite() {
            // Too far out; shrink toward the last good point.
            a = 0.5 * (a_prev + a);
            if a - a_prev < 1e-16 * (1.0 + a_prev) {
                break;
            }
            continue;
        }
        let dphi: f64 = g.iter().zip(dir).map(|(gi, di)| gi * di).sum();
        if !armijo(a, f) || (!first && f >= f_prev) {
            bracket = Some((a_prev, f_prev, d_prev, a, f));
            break;
        }
        first = false;
        let res = LineResult { alpha: a, f, g };
        if dphi.abs() <= -WOLFE_C2 * dphi0 {
            return Some(res);
        }
        best = Some(res);
        if dphi >= 0.0 {
            bracket = Some((a, f, dphi, a_prev, f_prev));
            break;
        }
        if a >= a_max {
            return best;
        }
        a_prev = a;
        f_prev = f;
        d_prev = dphi;
        a = (2.0 * a).min(a_max);
    }

    // Zoom phase on the bracketing interval.
    let (mut alo, mut flo, mut dlo, mut ahi, mut fhi) = bracket?;
    for _ in 0..MAX_LINE_EVALS {
        if *evals >= eval_budget + MAX_LINE_EVALS {
            break;
        }
        // Quadratic interpolation with a safeguarded bisection fallback.
        let width = ahi - alo;
        let denom = fhi - flo - dlo * width;
        let mut a = if denom.abs() > 1e-300 {
            alo - dlo * width * width / (2.0 * denom)
        } else {
            alo + 0.5 * width
        };
        let (lo, hi) = if alo < ahi { (alo, ahi) } else { (ahi, alo) };
        let margin = 0.1 * (hi - lo);
        if !(a.is_finite()) || a < lo + margin || a > hi - margin {
            a = 0.5 * (alo + ahi);
        }
        if (ahi - alo).abs() < 1e-14 * (1.0 + alo.abs()) {
            break;
        }
        let (f, g) = probe(a, eval);
        *evals += 1;
        if !f.is_finite() {
            ahi = a;
            fhi = f64::INFINITY;
            continue;
        }
        let dphi: f64 = g.iter().zip(dir).map(|(gi, di)| gi * di).sum();
        if !armijo(a, f) || f >= flo {
            ahi = a;
            fhi = f;
        } else {
            let res = LineResult { alpha: a, f, g };
            if dphi.abs() <= -WOLFE_C2 * dphi0 {
                return Some(res);
            }
            if dphi * (ahi - alo) >= 0.0 {
                ahi = alo;
                fhi = flo;
            }
            let keep_best = best.as_ref().map_or(true, |b| f < b.f);
            if keep_best {
                best = Some(res);
            }
            alo = a;
            flo = f;
            dlo = dphi;
        }
    }
    best
}

/// Minimizes `f_and_grad` over the box. `x0` is clamped into the box first.
pub fn lbfgsb<F>(mut f_and_grad: F, x0: &[f64], bounds: &Bounds, opts: &OptimOptions) -> OptimOutcome
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    assert_eq!(bounds.len(), n, "bounds and x0 differ in length");
    let mut x = x0.to_vec();
    bounds.clamp(&mut x);
    let (mut f, mut g) = f_and_grad(&x);
    let mut evaluations = 1;
    if !f.is_finite() {
        return OptimOutcome {
            x,
            f,
            converged: false,
            iterations: 0,
            evaluations,
            message: "objective not finite at the start point".into(),
        };
    }
    let mut model = Model::fresh(n);
    let mut iterations = 0;
    let message;

    loop {
        let pg = projected_gradient_norm(&x, &g, bounds);
        if pg <= opts.grad_tol {
            message = format!("converged: projected gradient {pg:.2e}");
            return OptimOutcome { x, f, converged: true, iterations, evaluations, message };
        }
        if iterations >= opts.max_iters {
            message = format!("iteration limit ({}) reached", opts.max_iters);
            return OptimOutcome { x, f, converged: false, iterations, evaluations, message };
        }
        iterations += 1;

        let (xcp, c) = cauchy_point(&x, &g, bounds, &model);
        let xbar = subspace_min(&x, &g, &xcp, &c, bounds, &model);
        let dir: Vec<f64> = xbar.iter().zip(&x).map(|(b, a)| b - a).collect();
        let dphi0: f64 = g.iter().zip(&dir).map(|(gi, di)| gi * di).sum();
        let dir_scale = dir.iter().fold(0.0_f64, |m, v| m.max(v.abs()));

        let mut failed = dir_scale <= 1e-15 * (1.0 + pg) || dphi0 >= 0.0;
        if !failed {
            // Largest feasible multiple of dir (>= 1 since xbar is feasible).
            let mut a_max = f64::INFINITY;
            for i in 0..n {
                if dir[i] > 0.0 {
                    a_max = a_max.min((bounds.hi[i] - x[i]) / dir[i]);
                } else if dir[i] < 0.0 {
                    a_max = a_max.min((bounds.lo[i] - x[i]) / dir[i]);
                }
            }
            a_max = a_max.max(1.0);
            match line_search(&mut f_and_grad, &x, &dir, f, dphi0, a_max, &mut evaluations) {
                Some(res) => {
                    let mut x_new: Vec<f64> = x
                        .iter()
                        .zip(&dir)
                        .map(|(xi, di)| xi + res.alpha * di)
                        .collect();
                    bounds.clamp(&mut x_new);
                    let s = DVector::from_iterator(n, x_new.iter().zip(&x).map(|(a, b)| a - b));
                    let y = DVector::from_iterator(n, res.g.iter().zip(&g).map(|(a, b)| a - b));
                    let f_old = f;
                    x = x_new;
                    f = res.f;
                    g = res.g;
                    if !model.update(s, y, opts.memory) {
                        model.reboot(n);
                    }
                    let df = f_old - f;
                    if df.abs() <= opts.f_rel_tol * f.abs().max(f_old.abs()).max(1.0) {
                        message = format!("converged: function change {df:.2e}");
                        return OptimOutcome {
                            x,
                            f,
                            converged: true,
                            iterations,
                            evaluations,
                            message,
                        };
                    }
                }
                None => failed = true,
            }
        }
        if failed {
            if model.s.is_empty() {
                message = "line search failed along steepest descent".into();
                return OptimOutcome { x, f, converged: false, iterations, evaluations, message };
            }
            // Drop the curvature memory and retry from steepest descent.
            model.reboot(n);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> (f64, Vec<f64>) {
        let mut f = 0.0;
        let mut g = vec![0.0; x.len()];
        for i in 0..x.len() - 1 {
            let a = x[i + 1] - x[i] * x[i];
            let b = 1.0 - x[i];
            f += 100.0 * a * a + b * b;
            g[i] += -400.0 * x[i] * a - 2.0 * b;
            g[i + 1] += 200.0 * a;
        }
        (f, g)
    }

    #[test]
    fn quadratic_interior_minimum() {
        let obj = |x: &[f64]| {
            let f = (x[0] - 1.0).powi(2) + 4.0 * (x[1] + 0.5).powi(2);
            (f, vec![2.0 * (x[0] - 1.0), 8.0 * (x[1] + 0.5)])
        };
        let bounds = Bounds::new(vec![-5.0, -5.0], vec![5.0, 5.0]);
        let out = lbfgsb(obj, &[4.0, 4.0], &bounds, &OptimOptions::default());
        assert!(out.converged, "{}", out.message);
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] + 0.5).abs() < 1e-6);
    }

    #[test]
    fn quadratic_active_bound() {
        // Minimum of (x - 2)^2 over [0, 1] is at the bound x = 1.
        let obj = |x: &[f64]| ((x[0] - 2.0).powi(2), vec![2.0 * (x[0] - 2.0)]);
        let bounds = Bounds::new(vec![0.0], vec![1.0]);
        let out = lbfgsb(obj, &[0.1], &bounds, &OptimOptions::default());
        assert!(out.converged, "{}", out.message);
        assert_eq!(out.x[0], 1.0);
    }

    #[test]
    fn rosenbrock_unconstrained_region() {
        let bounds = Bounds::new(vec![-5.0; 2], vec![5.0; 2]);
        let out = lbfgsb(rosenbrock, &[-1.2, 1.0], &bounds, &OptimOptions::default());
        assert!(out.converged, "{}", out.message);
        assert!((out.x[0] - 1.0).abs() < 1e-4, "x = {:?}", out.x);
        assert!((out.x[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn rosenbrock_five_dimensional() {
        let bounds = Bounds::new(vec![-5.0; 5], vec![5.0; 5]);
        let out = lbfgsb(rosenbrock, &[-1.2, 1.0, -0.5, 0.8, 2.0], &bounds, &OptimOptions::default());
        assert!(out.converged, "{}", out.message);
        for v in &out.x {
            assert!((v - 1.0).abs() < 1e-4, "x = {:?}", out.x);
        }
    }

    #[test]
    fn rosenbrock_clipped_by_box() {
        // With x0 capped at 0.8, minimizing over x1 for fixed x0 gives
        // x1 = x0^2 exactly, and the objective pushes x0 to its bound.
        let bounds = Bounds::new(vec![-2.0, -2.0], vec![0.8, 2.0]);
        let out = lbfgsb(rosenbrock, &[-1.0, 1.5], &bounds, &OptimOptions::default());
        assert!(out.converged, "{}", out.message);
        assert_eq!(out.x[0], 0.8, "x = {:?}", out.x);
        assert!((out.x[1] - 0.64).abs() < 1e-5, "x = {:?}", out.x);
    }

    #[test]
    fn barrier_style_infinities_are_skirted() {
        // The objective blows up for x >= 1 inside the box [0, 2]; the line
        // search must pull back into the finite region and still converge
        // to a point with a tiny projected gradient.
        let obj = |x: &[f64]| {
            let v = x[0];
            if v >= 1.0 {
                (f64::INFINITY, vec![0.0])
            } else {
                let f = -(1.0 - v).ln() + 4.0 * (v - 0.25) * (v - 0.25);
                (f, vec![1.0 / (1.0 - v) + 8.0 * (v - 0.25)])
            }
        };
        let bounds = Bounds::new(vec![0.0], vec![2.0]);
        let out = lbfgsb(obj, &[0.9], &bounds, &OptimOptions::default());
        assert!(out.converged, "{}", out.message);
        assert!(out.f.is_finite() && out.x[0] < 1.0);
        let (_, g) = obj(&out.x);
        assert!(projected_gradient_norm(&out.x, &g, &bounds) <= 1e-6);
    }

    #[test]
    fn already_optimal_start_returns_immediately() {
        let obj = |x: &[f64]| ((x[0] - 2.0).powi(2), vec![2.0 * (x[0] - 2.0)]);
        let bounds = Bounds::new(vec![0.0], vec![1.0]);
        let out = lbfgsb(obj, &[1.0], &bounds, &OptimOptions::default());
        assert!(out.converged && out.iterations == 0);
    }
}
