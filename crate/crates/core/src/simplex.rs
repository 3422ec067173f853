//! Derivative-free Nelder-Mead simplex minimization.

use crate::scalar::Real;

/// Nelder-Mead settings. Standard coefficients: reflection 1, expansion 2,
/// contraction 1/2, shrink 1/2.
#[derive(Debug, Clone, Copy)]
pub struct NelderMead<T = f64> {
    /// Offset added to each coordinate of the start point to build the
    /// initial simplex.
    pub initial_step: T,
    /// Converged when both the vertex spread and the value spread, relative
    /// to the best vertex, fall below this.
    pub tolerance: T,
    pub max_evaluations: usize,
}

impl<T: Real> Default for NelderMead<T> {
    fn default() -> Self {
        Self {
            initial_step: T::lit(0.25),
            tolerance: T::lit(1e-3),
            max_evaluations: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum<T = f64> {
    pub x: Vec<T>,
    pub value: T,
    pub evaluations: usize,
    pub converged: bool,
}

impl<T: Real> NelderMead<T> {
    pub fn new(initial_step: T, tolerance: T, max_evaluations: usize) -> Self {
        Self {
            initial_step,
            tolerance,
            max_evaluations,
        }
    }

    /// Minimizes `f` from `x0`. Non-finite objective values are treated as
    /// `+inf`.
    pub fn minimize<F>(&self, mut f: F, x0: &[T]) -> Minimum<T>
    where
        F: FnMut(&[T]) -> T,
    {
        let dim = x0.len();
        assert!(dim > 0, "empty parameter vector");
        let mut evaluations = 0usize;
        let mut eval = |x: &[T], count: &mut usize| -> T {
            *count += 1;
            let v = f(x);
            if v.is_nan() {
                T::infinity()
            } else {
                v
            }
        };

        let mut simplex: Vec<Vec<T>> = Vec::with_capacity(dim + 1);
        simplex.push(x0.to_vec());
        for i in 0..dim {
            let mut v = x0.to_vec();
            v[i] = v[i] + self.initial_step;
            simplex.push(v);
        }
        let mut values: Vec<T> = simplex.iter().map(|x| eval(x, &mut evaluations)).collect();

        let half = T::lit(0.5);
        let two = T::lit(2.0);
        let mut converged = false;

        loop {
            sort_simplex(&mut simplex, &mut values);
            if self.has_converged(&simplex, &values) {
                converged = true;
                break;
            }
            if evaluations >= self.max_evaluations {
                break;
            }

            let worst = dim;
            let mut centroid = vec![T::zero(); dim];
            for v in &simplex[..worst] {
                for (c, x) in centroid.iter_mut().zip(v) {
                    *c = *c + *x;
                }
            }
            let inv = T::one() / T::from_usize_lossy(dim);
            for c in centroid.iter_mut() {
                *c = *c * inv;
            }
            let along = |t: T, from: &[T]| -> Vec<T> {
                centroid
                    .iter()
                    .zip(from)
                    .map(|(c, w)| *c + (*c - *w) * t)
                    .collect()
            };

            let reflected = along(T::one(), &simplex[worst]);
            let f_reflected = eval(&reflected, &mut evaluations);

            if f_reflected < values[0] {
                let expanded = along(two, &simplex[worst]);
                let f_expanded = eval(&expanded, &mut evaluations);
                if f_expanded < f_reflected {
                    simplex[worst] = expanded;
                    values[worst] = f_expanded;
                } else {
                    simplex[worst] = reflected;
                    values[worst] = f_reflected;
                }
                continue;
            }
            if f_reflected < values[worst - 1] {
                simplex[worst] = reflected;
                values[worst] = f_reflected;
                continue;
            }

            // Contraction, outside when the reflection improved on the worst.
            let (contracted, f_contracted) = if f_reflected < values[worst] {
                let c = along(half, &simplex[worst]);
                let fc = eval(&c, &mut evaluations);
                (c, fc)
            } else {
                let c = along(-half, &simplex[worst]);
                let fc = eval(&c, &mut evaluations);
                (c, fc)
            };
            if f_contracted < values[worst].min(f_reflected) {
                simplex[worst] = contracted;
                values[worst] = f_contracted;
                continue;
            }

            let best = simplex[0].clone();
            for i in 1..=dim {
                for (x, b) in simplex[i].iter_mut().zip(&best) {
                    *x = *b + (*x - *b) * half;
                }
                values[i] = eval(&simplex[i], &mut evaluations);
            }
        }

        sort_simplex(&mut simplex, &mut values);
        Minimum {
            x: simplex.swap_remove(0),
            value: values[0],
            evaluations,
            converged,
        }
    }

    fn has_converged(&self, simplex: &[Vec<T>], values: &[T]) -> bool {
        let best = &simplex[0];
        let x_spread = simplex[1..]
            .iter()
            .flat_map(|v| {
                v.iter()
                    .zip(best)
                    .map(|(x, b)| (*x - *b).abs() / b.abs().max(T::one()))
            })
            .fold(T::zero(), |a, b| a.max(b));
        let f_best = values[0];
        let f_spread = values[1..]
            .iter()
            .map(|v| (*v - f_best).abs())
            .fold(T::zero(), |a, b| a.max(b));
        x_spread <= self.tolerance
            && f_spread <= self.tolerance * f_best.abs().max(T::lit(1e-12))
    }
}

fn sort_simplex<T: Real>(simplex: &mut [Vec<T>], values: &mut [T]) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
    let s: Vec<Vec<T>> = order.iter().map(|&i| simplex[i].clone()).collect();
    let v: Vec<T> = order.iter().map(|&i| values[i]).collect();
    simplex.clone_from_slice(&s);
    values.copy_from_slice(&v);
}
