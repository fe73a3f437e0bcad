//! Derivative-free minimization via the Nelder–Mead simplex method.
//!
//! Used for the small smooth problems in this crate (GARCH and ARMA
//! likelihoods, Student-t profile fits), always in an unconstrained
//! reparameterization so no penalty handling is needed here.

/// Outcome of a Nelder–Mead run.
pub(crate) struct NmResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Final spread max(f) − min(f) across the simplex.
    pub spread: f64,
}

pub(crate) struct NmOptions {
    pub max_iterations: usize,
    pub f_tolerance: f64,
    pub initial_step: f64,
}

impl Default for NmOptions {
    fn default() -> Self {
        NmOptions {
            max_iterations: 2000,
            f_tolerance: 1e-10,
            initial_step: 0.25,
        }
    }
}

/// Minimizes `f` starting from `x0` with the classic Nelder–Mead
/// coefficients (reflection 1, expansion 2, contraction 1/2, shrink 1/2).
pub(crate) fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    opts: &NmOptions,
) -> NmResult {
    let n = x0.len();
    assert!(n > 0);
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        let step = if v[i].abs() > 1e-8 {
            opts.initial_step * v[i].abs()
        } else {
            opts.initial_step
        };
        v[i] += step;
        simplex.push(v);
    }
    let mut fvals: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        // Order the simplex by objective value.
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| fvals[a].partial_cmp(&fvals[b]).unwrap_or(std::cmp::Ordering::Equal));
        let reorder_v: Vec<Vec<f64>> = idx.iter().map(|&i| simplex[i].clone()).collect();
        let reorder_f: Vec<f64> = idx.iter().map(|&i| fvals[i]).collect();
        simplex = reorder_v;
        fvals = reorder_f;

        let spread = fvals[n] - fvals[0];
        if spread.abs() < opts.f_tolerance {
            converged = true;
            break;
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; n];
        for v in simplex.iter().take(n) {
            for j in 0..n {
                centroid[j] += v[j] / n as f64;
            }
        }

        let lerp = |from: &[f64], coeff: f64| -> Vec<f64> {
            (0..n)
                .map(|j| centroid[j] + coeff * (centroid[j] - from[j]))
                .collect()
        };

        let reflected = lerp(&simplex[n], 1.0);
        let fr = f(&reflected);
        if fr < fvals[0] {
            let expanded = lerp(&simplex[n], 2.0);
            let fe = f(&expanded);
            if fe < fr {
                simplex[n] = expanded;
                fvals[n] = fe;
            } else {
                simplex[n] = reflected;
                fvals[n] = fr;
            }
        } else if fr < fvals[n - 1] {
            simplex[n] = reflected;
            fvals[n] = fr;
        } else {
            // Contract toward the better of worst/reflected.
            let (base, fbase) = if fr < fvals[n] {
                (reflected.clone(), fr)
            } else {
                (simplex[n].clone(), fvals[n])
            };
            let contracted: Vec<f64> = (0..n)
                .map(|j| centroid[j] + 0.5 * (base[j] - centroid[j]))
                .collect();
            let fc = f(&contracted);
            if fc < fbase {
                simplex[n] = contracted;
                fvals[n] = fc;
            } else {
                // Shrink toward the best vertex.
                for i in 1..=n {
                    for j in 0..n {
                        simplex[i][j] = simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]);
                    }
                    fvals[i] = f(&simplex[i]);
                }
            }
        }
    }

    let mut best = 0;
    for i in 1..=n {
        if fvals[i] < fvals[best] {
            best = i;
        }
    }
    let spread = {
        let fmin = fvals.iter().cloned().fold(f64::INFINITY, f64::min);
        let fmax = fvals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        fmax - fmin
    };
    NmResult {
        x: simplex[best].clone(),
        fx: fvals[best],
        iterations,
        converged,
        spread,
    }
}

/// Runs Nelder–Mead, then restarts once from the found optimum with a
/// smaller initial step. Cheap insurance against premature simplex collapse.
pub(crate) fn nelder_mead_restarted<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    opts: &NmOptions,
) -> NmResult {
    let first = nelder_mead(&mut f, x0, opts);
    let second_opts = NmOptions {
        max_iterations: opts.max_iterations,
        f_tolerance: opts.f_tolerance,
        initial_step: opts.initial_step * 0.1,
    };
    let second = nelder_mead(&mut f, &first.x, &second_opts);
    if second.fx <= first.fx {
        NmResult {
            iterations: first.iterations + second.iterations,
            ..second
        }
    } else {
        first
    }
}

/// Central-difference gradient norm, used when reporting non-convergence.
pub(crate) fn gradient_norm<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64]) -> f64 {
    let mut sum = 0.0;
    for i in 0..x.len() {
        let h = 1e-5 * (1.0 + x[i].abs());
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += h;
        xm[i] -= h;
        let g = (f(&xp) - f(&xm)) / (2.0 * h);
        sum += g * g;
    }
    sum.sqrt()
}
