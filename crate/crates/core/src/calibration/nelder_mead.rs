//! Derivative-free simplex minimization (Nelder-Mead with standard coefficients).
//!
//! Non-finite objective values are treated as `+inf`, so the search simply backs away from
//! regions where the objective cannot be evaluated.

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions<T> {
    pub max_iters: usize,
    /// Offset of each initial vertex from the start point along one coordinate axis.
    pub initial_step: T,
    /// Converged once every vertex lies within this distance (max-norm) of the best vertex.
    pub x_tol: T,
}

impl<T: Scalar> Default for NelderMeadOptions<T> {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            initial_step: T::lit(0.2),
            x_tol: T::lit(1e-4),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult<T> {
    pub x: Vec<T>,
    pub value: T,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

struct Vertex<T> {
    x: Vec<T>,
    f: T,
}

fn sanitize<T: Scalar>(v: T) -> T {
    if v.is_nan() {
        T::infinity()
    } else {
        v
    }
}

pub fn minimize<T, F>(mut f: F, x0: &[T], opts: &NelderMeadOptions<T>) -> NelderMeadResult<T>
where
    T: Scalar,
    F: FnMut(&[T]) -> T,
{
    let n = x0.len();
    assert!(n >= 1, "need at least one free parameter");
    let mut evaluations = 0usize;
    let mut eval = |x: &[T]| {
        evaluations += 1;
        sanitize(f(x))
    };

    let mut simplex: Vec<Vertex<T>> = Vec::with_capacity(n + 1);
    simplex.push(Vertex {
        x: x0.to_vec(),
        f: eval(x0),
    });
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += opts.initial_step;
        let fx = eval(&x);
        simplex.push(Vertex { x, f: fx });
    }

    let (alpha, gamma, rho, sigma) = (T::one(), T::lit(2.0), T::lit(0.5), T::lit(0.5));
    let mut iterations = 0;
    let mut converged = false;

    loop {
        // stable sort keeps earlier vertices first among ties
        simplex.sort_by(|a, b| a.f.partial_cmp(&b.f).unwrap_or(std::cmp::Ordering::Equal));
        if spread(&simplex) < opts.x_tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iters {
            break;
        }
        iterations += 1;

        let worst = n;
        let centroid = centroid(&simplex[..n]);
        let along =
            |t: T, from: &[T]| -> Vec<T> { centroid.iter().zip(from).map(|(&c, &w)| c + t * (c - w)).collect() };

        let xr = along(alpha, &simplex[worst].x);
        let fr = eval(&xr);
        if fr < simplex[0].f {
            let xe = along(gamma, &simplex[worst].x);
            let fe = eval(&xe);
            simplex[worst] = if fe < fr {
                Vertex { x: xe, f: fe }
            } else {
                Vertex { x: xr, f: fr }
            };
            continue;
        }
        if fr < simplex[n - 1].f {
            simplex[worst] = Vertex { x: xr, f: fr };
            continue;
        }
        // contraction: outside if the reflection improved on the worst point, inside otherwise
        let (xc, fc) = if fr < simplex[worst].f {
            let xc = along(rho, &simplex[worst].x);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(-rho, &simplex[worst].x);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < fr.min(simplex[worst].f) {
            simplex[worst] = Vertex { x: xc, f: fc };
            continue;
        }
        // shrink towards the best vertex
        let best = simplex[0].x.clone();
        for v in simplex.iter_mut().skip(1) {
            for (xi, &bi) in v.x.iter_mut().zip(&best) {
                *xi = bi + sigma * (*xi - bi);
            }
            v.f = eval(&v.x);
        }
    }

    let best = simplex.swap_remove(0);
    NelderMeadResult {
        x: best.x,
        value: best.f,
        iterations,
        evaluations,
        converged,
    }
}

fn centroid<T: Scalar>(vertices: &[Vertex<T>]) -> Vec<T> {
    let n = T::from_usize(vertices.len()).unwrap();
    let dim = vertices[0].x.len();
    (0..dim)
        .map(|j| vertices.iter().map(|v| v.x[j]).sum::<T>() / n)
        .collect()
}

fn spread<T: Scalar>(simplex: &[Vertex<T>]) -> T {
    let best = &simplex[0].x;
    simplex[1..]
        .iter()
        .flat_map(|v| v.x.iter().zip(best).map(|(&a, &b)| (a - b).abs()))
        .fold(T::zero(), |m, d| if d > m { d } else { m })
}
