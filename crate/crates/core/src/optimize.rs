//! Local minimizers: a Nelder–Mead simplex search for small derivative-free
//! problems and limited-memory BFGS for smooth objectives with gradients.
//!
//! The simplex uses the dimension-adaptive coefficients of Gao and Han. After
//! the simplex collapses it can be rebuilt around the best vertex a few
//! times, which catches the premature stagnation the method is known for.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Absolute spread of function values at which the simplex is converged.
    pub ftol_abs: f64,
    /// Relative spread (to |f_best|) at which the simplex is converged.
    pub ftol_rel: f64,
    /// Largest ∞-norm distance of a vertex from the best one at convergence.
    pub xtol: f64,
    /// How many times to rebuild a converged simplex around the best point.
    pub rebuilds: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evals: 10_000,
            ftol_abs: 1e-12,
            ftol_rel: 1e-12,
            xtol: 1e-9,
            rebuilds: 2,
        }
    }
}

/// Best point found by a local minimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

struct Counted<F> {
    f: F,
    evals: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    fn call(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

/// Minimizes `f` starting from `x0`, with initial simplex edges `steps`.
pub fn nelder_mead<F>(f: F, x0: &[f64], steps: &[f64], opts: &NelderMeadOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(x0.len(), steps.len());
    let mut obj = Counted { f, evals: 0 };
    let n = x0.len();
    if n == 0 {
        let v = obj.call(x0);
        return Minimum {
            x: Vec::new(),
            f: v,
            evals: 1,
            converged: true,
        };
    }
    let mut best_x = x0.to_vec();
    let mut best_f = obj.call(x0);
    let mut converged = false;
    let mut scale = 1.0;
    for round in 0..=opts.rebuilds {
        let before = best_f;
        let (x, fx, conv) = run_simplex(&mut obj, &best_x, best_f, steps, scale, opts);
        if fx <= best_f {
            best_x = x;
            best_f = fx;
        }
        converged = conv;
        if !conv || obj.evals >= opts.max_evals {
            break;
        }
        if round > 0 && before - best_f <= opts.ftol_abs + opts.ftol_rel * best_f.abs() {
            break;
        }
        scale *= 0.5;
    }
    Minimum {
        x: best_x,
        f: best_f,
        evals: obj.evals,
        converged,
    }
}

fn run_simplex<F: FnMut(&[f64]) -> f64>(
    obj: &mut Counted<F>,
    x0: &[f64],
    f0: f64,
    steps: &[f64],
    scale: f64,
    opts: &NelderMeadOptions,
) -> (Vec<f64>, f64, bool) {
    let n = x0.len();
    let nf = n as f64;
    let (alpha, beta, gamma, delta) = if n >= 2 {
        (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf)
    } else {
        (1.0, 2.0, 0.5, 0.5)
    };

    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut vals: Vec<f64> = Vec::with_capacity(n + 1);
    pts.push(x0.to_vec());
    vals.push(f0);
    for i in 0..n {
        let mut p = x0.to_vec();
        let s = steps[i] * scale;
        p[i] += if s == 0.0 { 1e-4 } else { s };
        vals.push(obj.call(&p));
        pts.push(p);
    }
    let mut sum = vec![0.0; n];
    let recompute_sum = |pts: &Vec<Vec<f64>>, sum: &mut Vec<f64>| {
        sum.iter_mut().for_each(|s| *s = 0.0);
        for p in pts {
            for (s, v) in sum.iter_mut().zip(p) {
                *s += v;
            }
        }
    };
    recompute_sum(&pts, &mut sum);

    let mut xr = vec![0.0; n];
    let mut xe = vec![0.0; n];
    let mut centroid = vec![0.0; n];
    let mut iter = 0usize;
    loop {
        // best, worst, second worst
        let (mut ib, mut iw) = (0, 0);
        for i in 1..=n {
            if vals[i] < vals[ib] {
                ib = i;
            }
            if vals[i] > vals[iw] {
                iw = i;
            }
        }
        let mut is = ib;
        for i in 0..=n {
            if i != iw && vals[i] >= vals[is] {
                is = i;
            }
        }
        let fb = vals[ib];
        let spread = vals[iw] - fb;
        let ftol = opts.ftol_abs + opts.ftol_rel * fb.abs();
        if spread <= ftol {
            let xspread = pts
                .iter()
                .map(|p| {
                    p.iter()
                        .zip(&pts[ib])
                        .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()))
                })
                .fold(0.0f64, f64::max);
            if xspread <= opts.xtol || spread <= ftol * 1e-3 {
                return (pts[ib].clone(), fb, true);
            }
        }
        if obj.evals >= opts.max_evals {
            return (pts[ib].clone(), fb, false);
        }
        iter += 1;
        if iter.is_multiple_of(64) {
            recompute_sum(&pts, &mut sum);
        }

        for j in 0..n {
            centroid[j] = (sum[j] - pts[iw][j]) / nf;
        }
        for j in 0..n {
            xr[j] = centroid[j] + alpha * (centroid[j] - pts[iw][j]);
        }
        let fr = obj.call(&xr);
        let mut replace: Option<(bool, f64)> = None; // (use xe buffer?, value)
        if fr < fb {
            for j in 0..n {
                xe[j] = centroid[j] + beta * (xr[j] - centroid[j]);
            }
            let fe = obj.call(&xe);
            replace = Some(if fe < fr { (true, fe) } else { (false, fr) });
        } else if fr < vals[is] {
            replace = Some((false, fr));
        } else {
            let outside = fr < vals[iw];
            for j in 0..n {
                xe[j] = if outside {
                    centroid[j] + gamma * (xr[j] - centroid[j])
                } else {
                    centroid[j] + gamma * (pts[iw][j] - centroid[j])
                };
            }
            let fc = obj.call(&xe);
            if (outside && fc <= fr) || (!outside && fc < vals[iw]) {
                replace = Some((true, fc));
            }
        }
        match replace {
            Some((use_xe, v)) => {
                let src = if use_xe { &xe } else { &xr };
                for j in 0..n {
                    sum[j] += src[j] - pts[iw][j];
                }
                pts[iw].copy_from_slice(src);
                vals[iw] = v;
            }
            None => {
                let best = pts[ib].clone();
                for i in 0..=n {
                    if i == ib {
                        continue;
                    }
                    for j in 0..n {
                        pts[i][j] = best[j] + delta * (pts[i][j] - best[j]);
                    }
                    vals[i] = obj.call(&pts[i]);
                }
                recompute_sum(&pts, &mut sum);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsOptions {
    /// Budget of objective-and-gradient evaluations.
    pub max_evals: usize,
    pub memory: usize,
    /// Stop once ‖∇f‖∞ falls below this.
    pub gtol: f64,
    /// Stop after three consecutive steps improving f by at most
    /// ftol_abs + ftol_rel·|f|.
    pub ftol_abs: f64,
    pub ftol_rel: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            max_evals: 5_000,
            memory: 12,
            gtol: 1e-10,
            ftol_abs: 1e-14,
            ftol_rel: 1e-13,
        }
    }
}

/// Minimizes a smooth function with limited-memory BFGS and a backtracking
/// Armijo line search. `fg` returns f(x) and writes ∇f(x) into its second
/// argument.
pub fn lbfgs<F>(mut fg: F, x0: &[f64], opts: &LbfgsOptions) -> Minimum
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut f = fg(&x, &mut g);
    let mut evals = 1;
    if !f.is_finite() || n == 0 {
        return Minimum {
            x,
            f,
            evals,
            converged: n == 0,
        };
    }
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();
    let mut xn = vec![0.0; n];
    let mut gn = vec![0.0; n];
    let mut dir = vec![0.0; n];
    let mut alpha = vec![0.0; opts.memory];
    let mut stalls = 0;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let inf_norm = |a: &[f64]| a.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    loop {
        if inf_norm(&g) <= opts.gtol {
            return Minimum {
                x,
                f,
                evals,
                converged: true,
            };
        }
        // two-loop recursion
        dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi);
        let k = s_hist.len();
        for i in (0..k).rev() {
            alpha[i] = rho_hist[i] * dot(&s_hist[i], &dir);
            for (d, y) in dir.iter_mut().zip(&y_hist[i]) {
                *d -= alpha[i] * y;
            }
        }
        if k > 0 {
            let gamma = dot(&s_hist[k - 1], &y_hist[k - 1]) / dot(&y_hist[k - 1], &y_hist[k - 1]);
            dir.iter_mut().for_each(|d| *d *= gamma);
        }
        for i in 0..k {
            let beta = rho_hist[i] * dot(&y_hist[i], &dir);
            for (d, s) in dir.iter_mut().zip(&s_hist[i]) {
                *d += (alpha[i] - beta) * s;
            }
        }
        let mut slope = dot(&dir, &g);
        if !(slope < 0.0) {
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi);
            slope = dot(&dir, &g);
        }
        let mut t = if s_hist.is_empty() {
            (1.0 / inf_norm(&g)).min(1.0)
        } else {
            1.0
        };
        let mut accepted = false;
        for _ in 0..50 {
            if evals >= opts.max_evals {
                break;
            }
            for i in 0..n {
                xn[i] = x[i] + t * dir[i];
            }
            let fnew = fg(&xn, &mut gn);
            evals += 1;
            if fnew.is_finite() && fnew <= f + 1e-4 * t * slope {
                accepted = true;
                let improvement = f - fnew;
                let s: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
                let y: Vec<f64> = (0..n).map(|i| gn[i] - g[i]).collect();
                let sy = dot(&s, &y);
                if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
                    if s_hist.len() == opts.memory {
                        s_hist.remove(0);
                        y_hist.remove(0);
                        rho_hist.remove(0);
                    }
                    s_hist.push(s);
                    y_hist.push(y);
                    rho_hist.push(1.0 / sy);
                }
                std::mem::swap(&mut x, &mut xn);
                std::mem::swap(&mut g, &mut gn);
                f = fnew;
                if improvement <= opts.ftol_abs + opts.ftol_rel * f.abs() {
                    stalls += 1;
                } else {
                    stalls = 0;
                }
                break;
            }
            t *= 0.5;
        }
        if stalls >= 3 {
            return Minimum {
                x,
                f,
                evals,
                converged: true,
            };
        }
        if !accepted {
            if evals >= opts.max_evals {
                return Minimum {
                    x,
                    f,
                    evals,
                    converged: false,
                };
            }
            if s_hist.is_empty() {
                // no descent along the gradient at machine precision
                return Minimum {
                    x,
                    f,
                    evals,
                    converged: true,
                };
            }
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }
    }
}
