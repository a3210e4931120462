//! Trapped particle coupled to a bath of trapped particles, at the level of
//! Gaussian moments.
//!
//! After shifting bath coordinates to the central particle
//! (`x̃_k = x_k − x`, `p̃ = p + Σ p_k`) the system Hamiltonian becomes a
//! harmonic oscillator of mass `M` and frequency `Ω̃`, with
//! `Ω̃² = Ω² + (N m / M) ω²`, and the interaction splits into a momentum term
//! `−p̃ Σp̃_k / M` and a position term `m ω² x̃ Σx̃_k`. The dispersion sieve over
//! one oscillator period then reduces to closed-form integrals of the second
//! moments, minimized by minimum-uncertainty states with `δx̃² = 1/(2MΩ̃)`.

use std::f64::consts::TAU;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::optim::{multi_start, NelderMeadConfig};

fn positive(name: &'static str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::invalid(name, format!("must be positive and finite, got {v}")))
    }
}

/// Central particle of mass `M` in a trap of frequency `Ω`, with `N` bath
/// particles of mass `m` in traps of frequency `ω`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QbmParams {
    pub mass: f64,
    pub bath_mass: f64,
    pub bath_size: usize,
    pub trap_frequency: f64,
    pub bath_frequency: f64,
}

impl QbmParams {
    pub fn new(mass: f64, bath_mass: f64, bath_size: usize, trap_frequency: f64, bath_frequency: f64) -> Result<Self> {
        Ok(Self {
            mass: positive("mass", mass)?,
            bath_mass: positive("bath_mass", bath_mass)?,
            bath_size,
            trap_frequency: positive("trap_frequency", trap_frequency)?,
            bath_frequency: positive("bath_frequency", bath_frequency)?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.mass, self.bath_mass, self.bath_size, self.trap_frequency, self.bath_frequency).map(|_| ())
    }
}

/// `Ω̃ = sqrt(Ω² + (N m / M) ω²)`
pub fn omega_tilde(params: &QbmParams) -> f64 {
    let n = params.bath_size as f64;
    (params.trap_frequency.powi(2) + n * params.bath_mass / params.mass * params.bath_frequency.powi(2)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    Position,
    Momentum,
}

/// `coefficient · q̃ ⊗ Σ_k q̃_k`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingTerm {
    pub system: Quadrature,
    pub coefficient: f64,
    /// Bath quadrature summed over all bath particles.
    pub environment: Quadrature,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformedModel {
    pub mass: f64,
    /// `M Ω² + N m ω²`
    pub stiffness: f64,
    pub frequency: f64,
    pub bath_size: usize,
    pub interaction_terms: Vec<CouplingTerm>,
    /// The environment Hamiltonian is not used by any computation here.
    pub environment_description: String,
}

impl TransformedModel {
    pub fn term(&self, system: Quadrature) -> Option<&CouplingTerm> {
        self.interaction_terms.iter().find(|t| t.system == system)
    }

    /// Phase-space center of the mean-field oscillator for bath averages
    /// `κ_p = ⟨Σp̃_k⟩` and `κ_x = ⟨Σx̃_k⟩`.
    pub fn mean_field_center(&self, kappa_p: f64, kappa_x: f64) -> (f64, f64) {
        let force = self.term(Quadrature::Position).map_or(0.0, |t| t.coefficient * kappa_x);
        let shift = self.term(Quadrature::Momentum).map_or(0.0, |t| -t.coefficient * self.mass * kappa_p);
        (-force / self.stiffness, shift)
    }
}

pub fn transform_model(params: &QbmParams) -> TransformedModel {
    let n = params.bath_size as f64;
    let stiffness = params.mass * params.trap_frequency.powi(2) + n * params.bath_mass * params.bath_frequency.powi(2);
    let interaction_terms = if params.bath_size == 0 {
        Vec::new()
    } else {
        vec![
            CouplingTerm {
                system: Quadrature::Momentum,
                coefficient: -1.0 / params.mass,
                environment: Quadrature::Momentum,
            },
            CouplingTerm {
                system: Quadrature::Position,
                coefficient: params.bath_mass * params.bath_frequency.powi(2),
                environment: Quadrature::Position,
            },
        ]
    };
    TransformedModel {
        mass: params.mass,
        stiffness,
        frequency: omega_tilde(params),
        bath_size: params.bath_size,
        interaction_terms,
        environment_description: format!(
            "Σ_k [p̃_k²/2m + m ω² x̃_k²/2] + (Σ_k p̃_k)²/2M + Σ_k U1(x̃_k) + Σ_(k>j) U2(x̃_k − x̃_j), \
             N = {}, m = {}, ω = {}",
            params.bath_size, params.bath_mass, params.bath_frequency
        ),
    }
}

/// First and second moments of a one-dimensional Gaussian state (ħ = 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianState {
    pub x_mean: f64,
    pub p_mean: f64,
    pub dx2: f64,
    pub dp2: f64,
    /// Symmetrized covariance `⟨{x, p}⟩/2 − ⟨x⟩⟨p⟩`.
    pub sxp: f64,
}

pub const UNCERTAINTY_SLACK: f64 = 1e-12;

impl GaussianState {
    pub fn new(x_mean: f64, p_mean: f64, dx2: f64, dp2: f64, sxp: f64) -> Result<Self> {
        let g = Self { x_mean, p_mean, dx2, dp2, sxp };
        if [x_mean, p_mean, dx2, dp2, sxp].iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidState("Gaussian moments must be finite".into()));
        }
        if dx2 < 0.0 || dp2 < 0.0 {
            return Err(Error::InvalidState("variances must be non-negative".into()));
        }
        if g.uncertainty() < 0.25 - UNCERTAINTY_SLACK {
            return Err(Error::InvalidState(format!(
                "dx2·dp2 − sxp² = {} violates the uncertainty bound 1/4",
                g.uncertainty()
            )));
        }
        Ok(g)
    }

    /// Ground state of the oscillator with the given mass and frequency.
    pub fn coherent(mass: f64, omega: f64) -> Self {
        Self { x_mean: 0.0, p_mean: 0.0, dx2: 1.0 / (2.0 * mass * omega), dp2: mass * omega / 2.0, sxp: 0.0 }
    }

    /// `dx2·dp2 − sxp²`, conserved by linear symplectic evolution.
    pub fn uncertainty(&self) -> f64 {
        self.dx2 * self.dp2 - self.sxp * self.sxp
    }
}

/// Harmonic evolution about the origin.
pub fn gaussian_evolve(g0: &GaussianState, mass: f64, omega_t: f64, t: f64) -> GaussianState {
    gaussian_evolve_about(g0, mass, omega_t, (0.0, 0.0), t)
}

/// Harmonic evolution about the phase-space point `center`: displacements
/// from it rotate as `x → x cos Ω̃t + p/(MΩ̃) sin Ω̃t`,
/// `p → p cos Ω̃t − MΩ̃ x sin Ω̃t`.
pub fn gaussian_evolve_about(g0: &GaussianState, mass: f64, omega_t: f64, center: (f64, f64), t: f64) -> GaussianState {
    let (s, c) = (omega_t * t).sin_cos();
    let k = mass * omega_t;
    let (x, p) = (g0.x_mean - center.0, g0.p_mean - center.1);
    GaussianState {
        x_mean: center.0 + c * x + s / k * p,
        p_mean: center.1 + c * p - s * k * x,
        dx2: c * c * g0.dx2 + 2.0 * c * s / k * g0.sxp + s * s / (k * k) * g0.dp2,
        dp2: c * c * g0.dp2 - 2.0 * c * s * k * g0.sxp + s * s * k * k * g0.dx2,
        sxp: (c * c - s * s) * g0.sxp + c * s * (g0.dp2 / k - k * g0.dx2),
    }
}

/// Integrals of `δp̃²`, `δx̃²` and `σ_xp` over one period `T = 2π/Ω̃`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodIntegrals {
    pub ip: f64,
    pub ix: f64,
    pub ixp: f64,
}

pub fn period(omega_t: f64) -> f64 {
    TAU / omega_t
}

pub fn period_integrals(g0: &GaussianState, mass: f64, omega_t: f64) -> PeriodIntegrals {
    let t = period(omega_t);
    let k2 = (mass * omega_t).powi(2);
    PeriodIntegrals {
        ip: 0.5 * (k2 * g0.dx2 + g0.dp2) * t,
        ix: 0.5 * (g0.dx2 + g0.dp2 / k2) * t,
        // cos² − sin² and cos·sin both average to zero over a period
        ixp: 0.0,
    }
}

/// `a·Ip + b·Ix`
pub fn qbm_objective(g0: &GaussianState, weights: (f64, f64), mass: f64, omega_t: f64) -> Result<f64> {
    positive("weights.0", weights.0)?;
    positive("weights.1", weights.1)?;
    let i = period_integrals(g0, mass, omega_t);
    Ok(weights.0 * i.ip + weights.1 * i.ix)
}

/// Minimum-uncertainty state with `δx̃² = 1/(2MΩ̃)`, centered at the origin.
pub fn qbm_pointer_state(mass: f64, omega_t: f64) -> Result<GaussianState> {
    positive("mass", mass)?;
    positive("omega_tilde", omega_t)?;
    Ok(GaussianState::coherent(mass, omega_t))
}

/// Covariance matrices with `det ≥ 1/4`, via a Cholesky factor
/// `[[e^u, 0], [v, g e^{-u}]]` with `g = (1 + w²)/2`. The bound is attained
/// at `w = 0`, an interior point of the parameter space.
pub fn covariance_from_params(params: &[f64]) -> (f64, f64, f64) {
    let (u, v, w) = (params[0], params[1], params[2]);
    let g = 0.5 * (1.0 + w * w);
    let l11 = u.exp();
    let l22 = g / l11;
    (l11 * l11, v * v + l22 * l22, v * l11)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QbmSieveConfig {
    pub restarts: usize,
    pub seed: u64,
    pub nelder_mead: NelderMeadConfig,
}

impl Default for QbmSieveConfig {
    fn default() -> Self {
        Self { restarts: 4, seed: 0, nelder_mead: NelderMeadConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QbmRestart {
    pub start: Vec<f64>,
    pub parameters: Vec<f64>,
    pub objective: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QbmSieveResult {
    pub state: GaussianState,
    pub objective: f64,
    pub converged: bool,
    pub restarts: usize,
    pub history: Vec<QbmRestart>,
}

/// Minimizes [`qbm_objective`] over Gaussian covariances obeying the
/// uncertainty bound. Means do not enter the objective and are set to zero.
pub fn qbm_sieve(mass: f64, omega_t: f64, weights: (f64, f64), cfg: &QbmSieveConfig) -> Result<QbmSieveResult> {
    positive("mass", mass)?;
    positive("omega_tilde", omega_t)?;
    positive("weights.0", weights.0)?;
    positive("weights.1", weights.1)?;
    if cfg.restarts == 0 {
        return Err(Error::invalid("restarts", "must be positive"));
    }
    let state_of = |p: &[f64]| {
        let (dx2, dp2, sxp) = covariance_from_params(p);
        GaussianState { x_mean: 0.0, p_mean: 0.0, dx2, dp2, sxp }
    };
    let score = |p: &[f64]| {
        let i = period_integrals(&state_of(p), mass, omega_t);
        weights.0 * i.ip + weights.1 * i.ix
    };
    // start around the natural length scale of the trap
    let log_scale = -0.5 * (2.0 * mass * omega_t).ln();
    let sample = |rng: &mut ChaCha8Rng| {
        vec![log_scale + rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]
    };
    let outcomes = multi_start(&score, &sample, cfg.restarts, cfg.seed, &cfg.nelder_mead);
    let history: Vec<QbmRestart> = outcomes
        .iter()
        .map(|o| QbmRestart {
            start: o.start.clone(),
            parameters: o.minimum.x.clone(),
            objective: o.minimum.value,
            converged: o.minimum.converged,
        })
        .collect();
    let best = history.iter().min_by(|a, b| a.objective.total_cmp(&b.objective)).expect("at least one restart");
    Ok(QbmSieveResult {
        state: state_of(&best.parameters),
        objective: best.objective,
        converged: best.converged,
        restarts: cfg.restarts,
        history: history.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

    #[test]
    fn omega_tilde_examples() {
        let p = QbmParams::new(2.0, 0.5, 4, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(omega_tilde(&p), SQRT_2, epsilon = 1e-15);
        let free = QbmParams::new(2.0, 0.5, 0, 1.3, 1.0).unwrap();
        assert_eq!(omega_tilde(&free), 1.3);
        let light = QbmParams::new(2.0, 1e-12, 10, 1.3, 1.0).unwrap();
        assert_abs_diff_eq!(omega_tilde(&light), 1.3, epsilon = 1e-10);
        assert!(QbmParams::new(0.0, 0.5, 4, 1.0, 1.0).is_err());
        assert!(QbmParams::new(1.0, 0.5, 4, -1.0, 1.0).is_err());
    }

    #[test]
    fn transform_model_examples() {
        let p = QbmParams::new(2.0, 0.5, 4, 1.0, 1.0).unwrap();
        let t = transform_model(&p);
        assert_abs_diff_eq!((t.stiffness / t.mass).sqrt(), omega_tilde(&p), epsilon = 1e-15);
        assert_eq!(t.frequency, omega_tilde(&p));
        assert_eq!(t.interaction_terms.len(), 2);
        assert_eq!(t.term(Quadrature::Momentum).unwrap().coefficient, -0.5);

        let q = QbmParams::new(1.0, 0.5, 3, 1.0, 2.0).unwrap();
        assert_eq!(transform_model(&q).term(Quadrature::Position).unwrap().coefficient, 2.0);

        let none = QbmParams::new(1.0, 0.5, 0, 1.0, 2.0).unwrap();
        assert!(transform_model(&none).interaction_terms.is_empty());
    }

    #[test]
    fn gaussian_validation() {
        assert!(GaussianState::new(0.0, 0.0, 1.0, 0.2, 0.0).is_err());
        assert!(GaussianState::new(0.0, 0.0, 1.0, 0.25, 0.0).is_ok());
        assert!(GaussianState::new(0.0, 0.0, 1.0, 1.0, 0.9).is_err());
        assert!(GaussianState::new(0.0, 0.0, -1.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn coherent_state_is_stationary() {
        let g = GaussianState::coherent(1.7, 0.8);
        for t in [0.3, 2.0, 11.0] {
            let e = gaussian_evolve(&g, 1.7, 0.8, t);
            assert_abs_diff_eq!(e.dx2, g.dx2, epsilon = 1e-14);
            assert_abs_diff_eq!(e.dp2, g.dp2, epsilon = 1e-14);
            assert_abs_diff_eq!(e.sxp, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn full_period_returns_initial_moments() {
        let g = GaussianState::new(0.4, -1.2, 0.9, 0.6, 0.3).unwrap();
        let e = gaussian_evolve(&g, 1.3, 2.1, period(2.1));
        for (a, b) in [(e.x_mean, g.x_mean), (e.p_mean, g.p_mean), (e.dx2, g.dx2), (e.dp2, g.dp2), (e.sxp, g.sxp)] {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    /// RK4 on the moment equations `ẋ = p/M, ṗ = −MΩ²x` and their second-moment
    /// counterparts.
    fn moment_ode(g: &GaussianState, m: f64, w: f64, t: f64, steps: usize) -> GaussianState {
        let f = |y: [f64; 5]| -> [f64; 5] {
            let [x, p, xx, pp, xp] = y;
            [p / m, -m * w * w * x, 2.0 * xp / m, -2.0 * m * w * w * xp, pp / m - m * w * w * xx]
        };
        let mut y = [g.x_mean, g.p_mean, g.dx2, g.dp2, g.sxp];
        let h = t / steps as f64;
        let add = |a: [f64; 5], b: [f64; 5], s: f64| -> [f64; 5] { std::array::from_fn(|i| a[i] + s * b[i]) };
        for _ in 0..steps {
            let k1 = f(y);
            let k2 = f(add(y, k1, h / 2.0));
            let k3 = f(add(y, k2, h / 2.0));
            let k4 = f(add(y, k3, h));
            y = std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        }
        GaussianState { x_mean: y[0], p_mean: y[1], dx2: y[2], dp2: y[3], sxp: y[4] }
    }

    #[test]
    fn quarter_period_swaps_squeezed_variances() {
        let g = GaussianState::new(0.0, 0.0, 1.0, 0.25, 0.0).unwrap();
        let e = gaussian_evolve(&g, 1.0, 1.0, FRAC_PI_2);
        assert_abs_diff_eq!(e.dx2, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(e.dp2, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e.sxp, 0.0, epsilon = 1e-15);
        let oracle = moment_ode(&g, 1.0, 1.0, FRAC_PI_2, 2000);
        assert_abs_diff_eq!(e.dx2, oracle.dx2, epsilon = 1e-10);
        assert_abs_diff_eq!(e.dp2, oracle.dp2, epsilon = 1e-10);
        assert_abs_diff_eq!(e.sxp, oracle.sxp, epsilon = 1e-10);
    }

    #[test]
    fn evolution_matches_moment_ode_for_generic_state() {
        let g = GaussianState::new(0.3, 0.7, 0.8, 0.9, -0.2).unwrap();
        let e = gaussian_evolve(&g, 1.6, 0.7, 3.3);
        let o = moment_ode(&g, 1.6, 0.7, 3.3, 4000);
        for (a, b) in [(e.x_mean, o.x_mean), (e.p_mean, o.p_mean), (e.dx2, o.dx2), (e.dp2, o.dp2), (e.sxp, o.sxp)] {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn period_integral_examples() {
        let g = GaussianState::new(0.0, 0.0, 0.5, 0.5, 0.0).unwrap();
        let i = period_integrals(&g, 1.0, 1.0);
        assert_abs_diff_eq!(i.ip, PI, epsilon = 1e-15);
        assert_abs_diff_eq!(i.ix, PI, epsilon = 1e-15);
        let c = GaussianState::coherent(2.0, 3.0);
        assert_relative_eq!(period_integrals(&c, 2.0, 3.0).ix, period(3.0) * c.dx2, max_relative = 1e-15);
    }

    #[test]
    fn objective_examples() {
        let c = GaussianState::coherent(1.0, 1.0);
        assert_abs_diff_eq!(qbm_objective(&c, (1.0, 1.0), 1.0, 1.0).unwrap(), TAU, epsilon = 1e-14);
        let g = GaussianState::new(0.0, 0.0, 0.8, 0.5, 0.1).unwrap();
        let a = qbm_objective(&g, (0.3, 1.7), 1.2, 0.9).unwrap();
        let b = qbm_objective(&g, (0.6, 3.4), 1.2, 0.9).unwrap();
        assert_relative_eq!(b, 2.0 * a, max_relative = 1e-15);
        let ptr = qbm_pointer_state(1.2, 0.9).unwrap();
        for factor in [4.0, 0.25] {
            let squeezed = GaussianState::new(0.0, 0.0, ptr.dx2 * factor, ptr.dp2 / factor, 0.0).unwrap();
            assert!(
                qbm_objective(&ptr, (1.0, 1.0), 1.2, 0.9).unwrap()
                    < qbm_objective(&squeezed, (1.0, 1.0), 1.2, 0.9).unwrap()
            );
        }
        assert!(qbm_objective(&g, (0.0, 1.0), 1.0, 1.0).is_err());
        assert!(qbm_objective(&g, (1.0, -1.0), 1.0, 1.0).is_err());
    }

    #[test]
    fn pointer_state_examples() {
        let p = qbm_pointer_state(1.0, 1.0).unwrap();
        assert_eq!((p.dx2, p.dp2), (0.5, 0.5));
        let p = qbm_pointer_state(2.0, SQRT_2).unwrap();
        assert_abs_diff_eq!(p.dx2, 1.0 / (4.0 * SQRT_2), epsilon = 1e-15);
        assert_abs_diff_eq!(p.dx2, 0.176777, epsilon = 1e-6);
        assert_abs_diff_eq!(p.uncertainty(), 0.25, epsilon = 1e-16);
        assert!(qbm_pointer_state(0.0, 1.0).is_err());
    }

    #[test]
    fn mean_field_shift_leaves_dispersions_unchanged() {
        let params = QbmParams::new(1.5, 0.4, 5, 0.9, 1.3).unwrap();
        let model = transform_model(&params);
        let center = model.mean_field_center(0.7, -1.1);
        assert!(center != (0.0, 0.0));
        let g = GaussianState::new(0.2, -0.3, 0.7, 0.6, 0.15).unwrap();
        for t in [0.4, 2.5, 9.0] {
            let free = gaussian_evolve(&g, model.mass, model.frequency, t);
            let shifted = gaussian_evolve_about(&g, model.mass, model.frequency, center, t);
            assert_eq!((free.dx2, free.dp2, free.sxp), (shifted.dx2, shifted.dp2, shifted.sxp));
            assert!((free.x_mean - shifted.x_mean).abs() > 1e-6 || (free.p_mean - shifted.p_mean).abs() > 1e-6);
        }
    }

    #[test]
    fn mean_field_center_is_an_equilibrium() {
        // h = p²/2M + ½ K x² − κ_p p/M + c_x κ_x x is stationary at the center
        let params = QbmParams::new(1.5, 0.4, 5, 0.9, 1.3).unwrap();
        let model = transform_model(&params);
        let (kp, kx) = (0.7, -1.1);
        let (x0, p0) = model.mean_field_center(kp, kx);
        let c_x = model.term(Quadrature::Position).unwrap().coefficient;
        let c_p = model.term(Quadrature::Momentum).unwrap().coefficient;
        // ẋ = ∂h/∂p, ṗ = −∂h/∂x
        let xdot = p0 / model.mass + c_p * kp;
        let pdot = -(model.stiffness * x0 + c_x * kx);
        assert_abs_diff_eq!(xdot, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pdot, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn covariance_chart_respects_uncertainty() {
        for p in [[0.3, -0.8, 0.0], [-1.0, 2.0, 1.5], [2.0, 0.1, -0.4]] {
            let (dx2, dp2, sxp) = covariance_from_params(&p);
            let g = GaussianState::new(0.0, 0.0, dx2, dp2, sxp).unwrap();
            let expected = (0.5 * (1.0 + p[2] * p[2])).powi(2);
            assert_relative_eq!(g.uncertainty(), expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn qbm_sieve_finds_pointer_state() {
        let r = qbm_sieve(1.0, 1.0, (1.0, 1.0), &QbmSieveConfig::default()).unwrap();
        assert!(r.converged);
        assert_relative_eq!(r.state.dx2, 0.5, max_relative = 1e-4);
        assert_abs_diff_eq!(r.state.uncertainty(), 0.25, epsilon = 1e-6);
        assert_relative_eq!(r.objective, TAU, max_relative = 1e-10);
        let w = qbm_sieve(1.0, 1.0, (10.0, 1.0), &QbmSieveConfig::default()).unwrap();
        assert_relative_eq!(w.state.dx2, r.state.dx2, max_relative = 1e-4);
        assert!(qbm_sieve(1.0, 1.0, (0.0, 1.0), &QbmSieveConfig::default()).is_err());
    }

    #[test]
    fn pointer_width_scales_with_mass_and_frequency() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let m: f64 = rng.random_range(0.2..5.0);
            let w: f64 = rng.random_range(0.2..5.0);
            let c: f64 = rng.random_range(0.1..10.0);
            let base = qbm_pointer_state(m, w).unwrap().dx2;
            let scaled = qbm_pointer_state(c * m, w / c.sqrt()).unwrap().dx2;
            assert_relative_eq!(scaled * c.sqrt(), base, max_relative = 1e-14);
        }
    }
}
