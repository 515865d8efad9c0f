//! Bounded-budget Nelder-Mead simplex with dimension-adaptive coefficients.

/// Stopping rules and initial simplex size.
#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadOptions {
    pub max_evaluations: usize,
    /// Spread of simplex values.
    pub ftol: f64,
    /// Infinity-norm extent of the simplex.
    pub xtol: f64,
    /// Per-coordinate offset of the initial vertices.
    pub initial_step: Vec<f64>,
}

impl NelderMeadOptions {
    pub fn new(dim: usize) -> Self {
        Self { max_evaluations: 5000, ftol: 1e-10, xtol: 1e-8, initial_step: vec![0.5; dim] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// `(evaluations, best value)` each time the best vertex improves.
    pub trace: Vec<(usize, f64)>,
}

/// Minimizes `f` from `x0`. Non-finite values are treated as `+inf`.
pub fn minimize<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], options: &NelderMeadOptions) -> Minimum {
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() { f64::INFINITY } else { v }
    };
    if n == 0 {
        let value = eval(x0, &mut evals);
        return Minimum { x: vec![], value, evaluations: evals, converged: true, trace: vec![(1, value)] };
    }

    let nf = n as f64;
    let (alpha, beta, gamma, delta) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for k in 0..n {
        let mut v = x0.to_vec();
        v[k] += options.initial_step.get(k).copied().unwrap_or(0.5);
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evals)).collect();
    let mut trace = Vec::new();
    let mut best_seen = f64::INFINITY;
    let mut converged = false;

    let along = |c: &[f64], w: &[f64], t: f64| -> Vec<f64> { c.iter().zip(w).map(|(a, b)| a + t * (b - a)).collect() };

    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        simplex = order.iter().map(|&k| simplex[k].clone()).collect();
        values = order.iter().map(|&k| values[k]).collect();

        if values[0] < best_seen {
            best_seen = values[0];
            trace.push((evals, best_seen));
        }

        let fspread = values[n] - values[0];
        let xspread = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if (fspread.abs() <= options.ftol || (values[0].is_infinite() && values[n].is_infinite()))
            && xspread <= options.xtol
        {
            converged = true;
            break;
        }
        if evals >= options.max_evaluations {
            break;
        }

        let centroid: Vec<f64> = (0..n).map(|k| simplex[..n].iter().map(|v| v[k]).sum::<f64>() / nf).collect();
        let worst = simplex[n].clone();
        let xr = along(&centroid, &worst, -alpha);
        let fr = eval(&xr, &mut evals);

        if fr < values[0] {
            let xe = along(&centroid, &worst, -alpha * beta);
            let fe = eval(&xe, &mut evals);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let x = along(&centroid, &worst, -alpha * gamma);
            let v = eval(&x, &mut evals);
            (x, v)
        } else {
            let x = along(&centroid, &worst, gamma);
            let v = eval(&x, &mut evals);
            (x, v)
        };
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        let best = simplex[0].clone();
        for k in 1..=n {
            simplex[k] = along(&best, &simplex[k], delta);
            values[k] = eval(&simplex[k], &mut evals);
        }
    }

    Minimum { x: simplex[0].clone(), value: values[0], evaluations: evals, converged, trace }
}
