//! Derivative-free minimization by the Nelder–Mead simplex method with
//! dimension-adaptive coefficients.

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Stop once the best value is at or below this target.
    pub f_target: f64,
    /// Stop once the spread of simplex values is below this.
    pub f_spread_tol: f64,
    /// Stop once the simplex diameter is below this.
    pub x_tol: f64,
    /// Initial simplex edge length.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions { max_evals: 4000, f_target: 0.0, f_spread_tol: 1e-18, x_tol: 1e-12, initial_step: 0.1 }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

/// Minimizes `f` from `x0`. Coefficients follow Gao and Han's adaptive
/// choice, which behaves better than the classical ones above a handful of
/// dimensions.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> Minimum {
    let d = x0.len();
    if d == 0 {
        let value = f(x0);
        return Minimum { x: Vec::new(), value, evals: 1 };
    }
    let df = d as f64;
    let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / df, 0.75 - 0.5 / df, 1.0 - 1.0 / df);

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    simplex.push(x0.to_vec());
    for k in 0..d {
        let mut x = x0.to_vec();
        x[k] += opts.initial_step;
        simplex.push(x);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| f(x)).collect();
    let mut evals = d + 1;

    let point = |c: &[f64], x: &[f64], t: f64| -> Vec<f64> { c.iter().zip(x).map(|(ci, xi)| ci + t * (xi - ci)).collect() };

    loop {
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let best = values[0];
        let worst = values[d];
        let diameter = simplex[1..]
            .iter()
            .map(|x| x.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if best <= opts.f_target
            || evals >= opts.max_evals
            || (worst - best).abs() <= opts.f_spread_tol
            || diameter <= opts.x_tol
        {
            break;
        }

        let mut centroid = vec![0.0; d];
        for x in &simplex[..d] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / df;
            }
        }

        let xr = point(&centroid, &simplex[d], -alpha);
        let fr = f(&xr);
        evals += 1;
        if fr < best {
            let xe = point(&centroid, &simplex[d], -alpha * gamma);
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                simplex[d] = xe;
                values[d] = fe;
            } else {
                simplex[d] = xr;
                values[d] = fr;
            }
            continue;
        }
        if fr < values[d - 1] {
            simplex[d] = xr;
            values[d] = fr;
            continue;
        }
        let (xc, fc) = if fr < worst {
            let xc = point(&centroid, &simplex[d], -alpha * rho);
            let fc = f(&xc);
            (xc, fc)
        } else {
            let xc = point(&centroid, &simplex[d], rho);
            let fc = f(&xc);
            (xc, fc)
        };
        evals += 1;
        if fc < fr.min(worst) {
            simplex[d] = xc;
            values[d] = fc;
            continue;
        }
        for k in 1..=d {
            simplex[k] = point(&simplex[0], &simplex[k], sigma);
            values[k] = f(&simplex[k]);
        }
        evals += d;
    }
    let k = (0..=d).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    Minimum { x: simplex[k].clone(), value: values[k], evals }
}
