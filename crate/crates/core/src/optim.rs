//! Nelder–Mead simplex search with seeded multi-start.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadConfig {
    pub max_iterations: usize,
    /// Stop when the simplex value spread is below `ftol·|f_best| + fatol`...
    pub ftol: f64,
    pub fatol: f64,
    /// ...and its diameter below `xtol`.
    pub xtol: f64,
    /// Edge length of the initial orthogonal simplex.
    pub initial_step: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self { max_iterations: 4000, ftol: 1e-13, fatol: 1e-15, xtol: 1e-9, initial_step: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

struct Simplex<'f, F> {
    f: &'f F,
    points: Vec<(Vec<f64>, f64)>,
    evaluations: usize,
}

impl<F: Fn(&[f64]) -> f64> Simplex<'_, F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evaluations += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }

    fn sort(&mut self) {
        self.points.sort_by(|a, b| a.1.total_cmp(&b.1));
    }

    fn diameter(&self) -> f64 {
        let best = &self.points[0].0;
        self.points[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(best).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
            .fold(0.0, f64::max)
    }
}

fn lerp(from: &[f64], to: &[f64], t: f64) -> Vec<f64> {
    from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect()
}

/// Minimizes `f` from `x0`. The run is restarted once from its own optimum
/// with a fresh simplex before convergence is reported.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], cfg: &NelderMeadConfig) -> Minimum {
    let first = run(f, x0, cfg, cfg.initial_step);
    let polish = run(f, &first.x, cfg, cfg.initial_step * 0.1);
    let best = if polish.value <= first.value { polish.clone() } else { first.clone() };
    Minimum {
        x: best.x,
        value: best.value,
        iterations: first.iterations + polish.iterations,
        evaluations: first.evaluations + polish.evaluations,
        converged: first.converged && polish.converged,
    }
}

fn run<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], cfg: &NelderMeadConfig, step: f64) -> Minimum {
    let n = x0.len();
    let mut s = Simplex { f, points: Vec::with_capacity(n + 1), evaluations: 0 };
    let v0 = s.eval(x0);
    if n == 0 {
        return Minimum { x: Vec::new(), value: v0, iterations: 0, evaluations: 1, converged: true };
    }
    s.points.push((x0.to_vec(), v0));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        let v = s.eval(&x);
        s.points.push((x, v));
    }
    s.sort();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iterations {
        let best = s.points[0].1;
        let worst = s.points[n].1;
        if (worst - best).abs() <= cfg.ftol * best.abs() + cfg.fatol && s.diameter() <= cfg.xtol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for (x, _) in &s.points[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let worst_x = s.points[n].0.clone();
        let reflected = lerp(&centroid, &worst_x, -REFLECT);
        let fr = s.eval(&reflected);

        if fr < s.points[0].1 {
            let expanded = lerp(&centroid, &worst_x, -EXPAND);
            let fe = s.eval(&expanded);
            s.points[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < s.points[n - 1].1 {
            s.points[n] = (reflected, fr);
        } else {
            // contraction: outside if the reflection improved on the worst point
            let (candidate, reference) = if fr < s.points[n].1 {
                (lerp(&centroid, &reflected, CONTRACT), fr)
            } else {
                (lerp(&centroid, &worst_x, CONTRACT), s.points[n].1)
            };
            let fc = s.eval(&candidate);
            if fc < reference {
                s.points[n] = (candidate, fc);
            } else {
                let best_x = s.points[0].0.clone();
                for i in 1..=n {
                    let x = lerp(&best_x, &s.points[i].0, SHRINK);
                    let v = s.eval(&x);
                    s.points[i] = (x, v);
                }
            }
        }
        s.sort();
    }
    let (x, value) = s.points.swap_remove(0);
    Minimum { x, value, iterations, evaluations: s.evaluations, converged }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartOutcome {
    pub start: Vec<f64>,
    pub minimum: Minimum,
}

/// Runs `restarts` independent searches from points drawn by `sample`.
/// Restart `i` draws from stream `i` of a ChaCha generator seeded with
/// `seed`, so results do not depend on scheduling.
pub fn multi_start<F, S>(f: &F, sample: &S, restarts: usize, seed: u64, cfg: &NelderMeadConfig) -> Vec<RestartOutcome>
where
    F: Fn(&[f64]) -> f64 + Sync,
    S: Fn(&mut ChaCha8Rng) -> Vec<f64> + Sync,
{
    (0..restarts)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let start = sample(&mut rng);
            let minimum = nelder_mead(f, &start, cfg);
            RestartOutcome { start, minimum }
        })
        .collect()
}
