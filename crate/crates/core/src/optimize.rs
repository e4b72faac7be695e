//! Derivative-free minimisation: Nelder-Mead with dimension-adaptive
//! coefficients, plus a golden-section line search.

/// Stopping rule and budget for [`nelder_mead`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Total objective evaluations allowed, restarts included.
    pub max_evals: usize,
    /// A cycle (n+1 iterations) converges when both the best-value
    /// improvement and the simplex spread are at most
    /// `rel_tol·|f_best| + abs_tol`.
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Initial simplex edge per coordinate.
    pub step: f64,
    /// Number of restarts from the best vertex after convergence.
    pub restarts: usize,
    /// Keep the best value after every iteration in [`NelderMeadResult::trace`].
    pub record_trace: bool,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { max_evals: 100_000, rel_tol: 1e-9, abs_tol: 1e-18, step: 0.05, restarts: 1, record_trace: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<f64>,
}

/// Minimises `f` from `x0`. Deterministic: the simplex is `x0` plus `step`
/// along each axis and ties are broken by vertex index.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evals = 0usize;
    let mut iterations = 0usize;
    let mut trace = Vec::new();
    let mut best_x = x0.to_vec();
    let mut best_f = {
        evals += 1;
        f(x0)
    };
    let mut converged = false;

    for _round in 0..=opts.restarts {
        if evals >= opts.max_evals {
            break;
        }
        let run = run_simplex(&mut f, &best_x, best_f, opts, &mut evals, &mut iterations, &mut trace);
        if run.1 <= best_f {
            best_x = run.0;
            best_f = run.1;
        }
        converged = run.2;
        if !converged {
            break;
        }
    }

    if n == 0 {
        converged = true;
    }
    NelderMeadResult { x: best_x, value: best_f, evaluations: evals, iterations, converged, trace }
}

fn run_simplex<F>(
    f: &mut F,
    start: &[f64],
    start_f: f64,
    opts: &NelderMeadOptions,
    evals: &mut usize,
    iterations: &mut usize,
    trace: &mut Vec<f64>,
) -> (Vec<f64>, f64, bool)
where
    F: FnMut(&[f64]) -> f64,
{
    let n = start.len();
    if n == 0 {
        return (Vec::new(), start_f, true);
    }
    let nf = n as f64;
    let (alpha, beta, gamma, delta) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);

    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut values: Vec<f64> = Vec::with_capacity(n + 1);
    simplex.push(start.to_vec());
    values.push(start_f);
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += opts.step;
        values.push(eval(&v, evals));
        simplex.push(v);
    }

    let mut order: Vec<usize> = (0..=n).collect();
    let mut cycle_start_best = f64::INFINITY;
    let mut iter_in_cycle = 0usize;
    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial2 = vec![0.0; n];

    loop {
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        let (best, worst, second) = (order[0], order[n], order[n - 1]);
        let fbest = values[best];

        if iter_in_cycle == 0 {
            cycle_start_best = fbest;
        } else if iter_in_cycle > n {
            let tol = opts.rel_tol * fbest.abs() + opts.abs_tol;
            let improvement = cycle_start_best - fbest;
            let spread = values[worst] - fbest;
            if improvement <= tol && spread <= tol {
                return (simplex[best].clone(), fbest, true);
            }
            iter_in_cycle = 0;
            cycle_start_best = fbest;
        }
        if *evals >= opts.max_evals {
            return (simplex[best].clone(), fbest, false);
        }
        *iterations += 1;
        iter_in_cycle += 1;

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for &k in &order[..n] {
            for (c, x) in centroid.iter_mut().zip(&simplex[k]) {
                *c += x / nf;
            }
        }
        let xw = &simplex[worst];
        for i in 0..n {
            trial[i] = centroid[i] + alpha * (centroid[i] - xw[i]);
        }
        let fr = eval(&trial, evals);

        if fr < fbest {
            for i in 0..n {
                trial2[i] = centroid[i] + beta * (trial[i] - centroid[i]);
            }
            let fe = eval(&trial2, evals);
            if fe < fr {
                simplex[worst].copy_from_slice(&trial2);
                values[worst] = fe;
            } else {
                simplex[worst].copy_from_slice(&trial);
                values[worst] = fr;
            }
        } else if fr < values[second] {
            simplex[worst].copy_from_slice(&trial);
            values[worst] = fr;
        } else {
            let outside = fr < values[worst];
            for i in 0..n {
                trial2[i] = if outside {
                    centroid[i] + gamma * (trial[i] - centroid[i])
                } else {
                    centroid[i] - gamma * (centroid[i] - simplex[worst][i])
                };
            }
            let fc = eval(&trial2, evals);
            if (outside && fc <= fr) || (!outside && fc < values[worst]) {
                simplex[worst].copy_from_slice(&trial2);
                values[worst] = fc;
            } else {
                let xb = simplex[best].clone();
                for &k in &order[1..] {
                    for i in 0..n {
                        simplex[k][i] = xb[i] + delta * (simplex[k][i] - xb[i]);
                    }
                    values[k] = eval(&simplex[k], evals);
                }
            }
        }
        if opts.record_trace {
            trace.push(values.iter().copied().fold(f64::INFINITY, f64::min));
        }
    }
}

/// Maximises a unimodal `f` on `[a, b]` by golden-section search until the
/// bracket is narrower than `tol`. Returns `(x, f(x))`.
pub fn golden_section_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mut best = (0.5 * (a + b), f(0.5 * (a + b)));
    for (x, v) in [(c, fc), (d, fd)] {
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        x.windows(2).map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2)).sum()
    }

    #[test]
    fn quadratic_bowl_16d() {
        let target: Vec<f64> = (0..16).map(|i| i as f64 * 0.1 - 0.7).collect();
        let f =
            |x: &[f64]| x.iter().zip(&target).enumerate().map(|(i, (a, b))| (1.0 + i as f64) * (a - b).powi(2)).sum();
        let r = nelder_mead(f, &[0.0; 16], &NelderMeadOptions { step: 0.5, ..Default::default() });
        assert!(r.converged, "{r:?}");
        for (a, b) in r.x.iter().zip(&target) {
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
    }

    #[test]
    fn rosenbrock_2d() {
        let r = nelder_mead(rosenbrock, &[-1.2, 1.0], &NelderMeadOptions { step: 0.1, ..Default::default() });
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{:?}", r.x);
    }

    #[test]
    fn budget_exhaustion_reports_not_converged() {
        let opts = NelderMeadOptions { max_evals: 50, ..Default::default() };
        let r = nelder_mead(rosenbrock, &[-1.2, 1.0, 0.5, 0.3], &opts);
        assert!(!r.converged);
        assert!(r.evaluations <= 50 + 5);
    }

    #[test]
    fn best_value_trace_is_monotone() {
        let opts = NelderMeadOptions { record_trace: true, step: 0.1, ..Default::default() };
        let r = nelder_mead(rosenbrock, &[-1.2, 1.0, 0.0], &opts);
        assert!(!r.trace.is_empty());
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn golden_section_interior_and_boundary() {
        let (x, _) = golden_section_max(|x| -(x - 0.3).powi(2), 0.0, 1.0, 1e-8);
        assert!((x - 0.3).abs() < 1e-8);
        let (x, _) = golden_section_max(|x| x, 0.0, 1.0, 1e-8);
        assert!((x - 1.0).abs() < 1e-8);
    }
}
