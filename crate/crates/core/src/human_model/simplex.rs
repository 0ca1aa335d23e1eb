//! Downhill-simplex (Nelder-Mead) minimization.
//!
//! Plain implementation with the classic coefficient set and an f-spread
//! termination test. Non-finite objective values are treated as +inf so the
//! simplex retreats from invalid regions instead of crashing.

/// Coefficients and stopping rules.
#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// f-spread tolerance: `f(worst) - f(best) < tol`.
    pub tol: f64,
    /// Simplex-size tolerance, needed alongside the f-spread so a simplex
    /// sitting symmetric around the optimum (equal values, nonzero extent)
    /// keeps contracting instead of stopping early.
    pub x_tol: f64,
    pub max_iter: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            tol: 1e-10,
            x_tol: 1e-7,
            max_iter: 2000,
        }
    }
}

/// Minimization result.
#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    /// True when the f-spread tolerance triggered the exit.
    pub converged: bool,
}

fn guard(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

/// Minimize `objective` from `x0`.
///
/// The initial simplex perturbs each coordinate by 5% (0.00025 absolute for
/// zero coordinates), the usual choice for unscaled problems.
pub fn nelder_mead<F>(mut objective: F, x0: &[f64], options: &SimplexOptions) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    assert!(n >= 1, "nelder_mead needs at least one dimension");

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        if v[i] != 0.0 {
            v[i] *= 1.05;
        } else {
            v[i] = 0.00025;
        }
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| guard(objective(v))).collect();

    let mut iterations = 0;
    let mut converged = false;

    while iterations < options.max_iter {
        iterations += 1;

        // Order: best first.
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        let reordered: Vec<Vec<f64>> = order.iter().map(|&i| simplex[i].clone()).collect();
        let revalues: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        simplex = reordered;
        values = revalues;

        let spread = values[n] - values[0];
        let extent = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(simplex[0].iter()).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max);
        if spread.is_finite() && spread < options.tol && extent < options.x_tol {
            converged = true;
            break;
        }

        // Centroid of all but the worst.
        let mut centroid = vec![0.0; n];
        for v in simplex.iter().take(n) {
            for (c, x) in centroid.iter_mut().zip(v.iter()) {
                *c += x / n as f64;
            }
        }

        let worst = simplex[n].clone();
        let f_best = values[0];
        let f_second_worst = values[n - 1];
        let f_worst = values[n];

        let reflect: Vec<f64> = centroid
            .iter()
            .zip(worst.iter())
            .map(|(c, w)| c + options.reflection * (c - w))
            .collect();
        let f_reflect = guard(objective(&reflect));

        if f_reflect < f_best {
            let expand: Vec<f64> = centroid
                .iter()
                .zip(worst.iter())
                .map(|(c, w)| c + options.reflection * options.expansion * (c - w))
                .collect();
            let f_expand = guard(objective(&expand));
            if f_expand < f_reflect {
                simplex[n] = expand;
                values[n] = f_expand;
            } else {
                simplex[n] = reflect;
                values[n] = f_reflect;
            }
            continue;
        }

        if f_reflect < f_second_worst {
            simplex[n] = reflect;
            values[n] = f_reflect;
            continue;
        }

        // Contraction, outside or inside of the worst vertex.
        let contracted: Vec<f64> = if f_reflect < f_worst {
            centroid
                .iter()
                .zip(reflect.iter())
                .map(|(c, r)| c + options.contraction * (r - c))
                .collect()
        } else {
            centroid
                .iter()
                .zip(worst.iter())
                .map(|(c, w)| c + options.contraction * (w - c))
                .collect()
        };
        let f_contracted = guard(objective(&contracted));
        if f_contracted < f_worst.min(f_reflect) {
            simplex[n] = contracted;
            values[n] = f_contracted;
            continue;
        }

        // Shrink toward the best vertex.
        for i in 1..=n {
            let best = simplex[0].clone();
            for (x, b) in simplex[i].iter_mut().zip(best.iter()) {
                *x = b + options.shrink * (*x - b);
            }
            values[i] = guard(objective(&simplex[i]));
        }
    }

    let mut best = 0;
    for i in 1..=n {
        if values[i] < values[best] {
            best = i;
        }
    }
    SimplexResult {
        x: simplex[best].clone(),
        f: values[best],
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_converges_fast() {
        let r = nelder_mead(
            |x| x.iter().map(|v| v * v).sum(),
            &[1.0, 1.0],
            &SimplexOptions {
                max_iter: 200,
                tol: 1e-12,
                ..SimplexOptions::default()
            },
        );
        let norm: f64 = r.x.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 1e-4, "|x*| = {norm} after {} iterations", r.iterations);
        assert!(r.f <= 1.0);
    }

    #[test]
    fn constant_objective_returns_start_point() {
        // Flat objective: every move ties, the simplex shrinks to nothing,
        // and the tolerance exit hands back x0 as the best vertex.
        let r = nelder_mead(|_| 3.5, &[0.2, -0.8, 1.0], &SimplexOptions::default());
        assert!(r.converged);
        assert!(r.iterations < 200);
        assert_eq!(r.x, vec![0.2, -0.8, 1.0]);
        assert_eq!(r.f, 3.5);
    }

    #[test]
    fn rosenbrock_reaches_minimum() {
        let rosen = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
        };
        let r = nelder_mead(
            rosen,
            &[-1.2, 1.0],
            &SimplexOptions {
                max_iter: 2000,
                tol: 1e-14,
                ..SimplexOptions::default()
            },
        );
        assert!(r.f < 1e-6, "f* = {} after {} iterations", r.f, r.iterations);
        assert!((r.x[0] - 1.0).abs() < 1e-2);
    }

    #[test]
    fn result_never_exceeds_start_value() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + (x[1] + 1.0).abs();
        let start = [10.0, 10.0];
        let r = nelder_mead(f, &start, &SimplexOptions::default());
        assert!(r.f <= f(&start));
    }

    #[test]
    fn non_finite_regions_are_avoided() {
        // Objective is NaN left of x = 0; minimum at x = 1.
        let f = |x: &[f64]| {
            if x[0] < 0.0 {
                f64::NAN
            } else {
                (x[0] - 1.0).powi(2)
            }
        };
        let r = nelder_mead(f, &[0.5], &SimplexOptions::default());
        assert!(r.f < 1e-8);
        assert!((r.x[0] - 1.0).abs() < 1e-4);
    }
}
