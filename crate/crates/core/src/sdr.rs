//! Semidefinite-relaxation baseline for `M ≥ 2`.
//!
//! The gain `‖c·θ + h_d‖²` (with `c = G·diag(h_r)`) is homogenized by an
//! auxiliary unit-modulus variable `t`, giving `max θ̄ᴴRθ̄` over unit-modulus
//! `θ̄ = [θ; t]`. Lifting `Q = θ̄θ̄ᴴ` and dropping the rank constraint leaves
//! the diagonally constrained SDP
//!
//! ```text
//! max tr(RQ)  s.t.  Q ⪰ 0,  Q_ii = 1
//! ```
//!
//! which is solved here with a low-rank factorization `Q = VVᴴ` (unit-norm
//! rows of `V`) and projected gradient ascent. A feasible `θ̄` is recovered by
//! Gaussian randomization from `CN(0, Q)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::channel::{complex_normal, ChannelRealization};
use crate::error::{argument, Error, Result};
use crate::objective::{unit_normalize, PhaseVector};
use crate::rng::{stream_rng, Domain};

/// Eigenvalues of `Q` below this are treated as zero when sampling `CN(0, Q)`.
pub const PSD_CLAMP: f64 = 1e-9;

const MIN_STEP: f64 = 1e-14;

/// Homogeneous QCQP data `R` for one channel realization.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogenizedProblem {
    /// Hermitian `(N+1) × (N+1)` matrix.
    pub r: DMatrix<Complex64>,
    /// `‖h_d‖²`, the constant dropped by homogenization.
    pub h_d_norm_sq: f64,
}

impl HomogenizedProblem {
    pub fn dim(&self) -> usize {
        self.r.nrows()
    }

    /// `Re(xᴴRx)`.
    pub fn quadratic_form(&self, x: &[Complex64]) -> f64 {
        quadratic_form(&self.r, x)
    }
}

fn quadratic_form(r: &DMatrix<Complex64>, x: &[Complex64]) -> f64 {
    let n = r.nrows();
    let mut acc = 0.0;
    for j in 0..n {
        let mut col = Complex64::new(0.0, 0.0);
        for i in 0..n {
            col += x[i].conj() * r[(i, j)];
        }
        acc += (col * x[j]).re;
    }
    acc
}

/// Assembles `R = [[DᴴGᴴGD, DᴴGᴴh_d], [h_dᴴGD, 0]]` with `D = diag(h_r)`.
pub fn build_homogenized(ch: &ChannelRealization) -> Result<HomogenizedProblem> {
    let n = ch.n();
    if ch.h_r.len() != n || ch.h_d.len() != ch.m() {
        return Err(argument("channel dimensions disagree"));
    }
    let c = ch.cascade();
    let gram = c.adjoint() * &c;
    let cross = c.adjoint() * &ch.h_d;
    let mut r = DMatrix::zeros(n + 1, n + 1);
    r.view_mut((0, 0), (n, n)).copy_from(&gram);
    for i in 0..n {
        r[(i, n)] = cross[i];
        r[(n, i)] = cross[i].conj();
    }
    // Exact Hermitian symmetry; the Gram product can differ in the last ulp.
    for i in 0..n {
        r[(i, i)].im = 0.0;
        for j in 0..i {
            r[(i, j)] = r[(j, i)].conj();
        }
    }
    Ok(HomogenizedProblem { r, h_d_norm_sq: ch.h_d.norm_squared() })
}

/// Tuning for the SDP solve and the randomization stage.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Gaussian randomization trials.
    pub trials: usize,
    /// Stop when the relative objective change between iterations drops below this.
    pub tol: f64,
    /// Maximum number of random initializations.
    pub restarts: usize,
    /// Iteration cap per initialization.
    pub max_iters: usize,
    /// Factorization width; `None` uses `ceil(sqrt(2(N+1)))`.
    pub rank: Option<usize>,
    /// Seed for the restart initializations when calling [`solve_sdp`] directly.
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { trials: 100, tol: 1e-7, restarts: 20, max_iters: 5000, rank: None, seed: 0 }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(argument("sdr trials must be >= 1"));
        }
        if self.restarts == 0 || self.max_iters == 0 {
            return Err(argument("sdr restarts and max_iters must be >= 1"));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(argument(format!("sdr tol must be positive (got {})", self.tol)));
        }
        if self.rank == Some(0) {
            return Err(argument("sdr rank must be >= 1"));
        }
        Ok(())
    }

    fn rank_for(&self, dim: usize) -> usize {
        self.rank.unwrap_or_else(|| (2.0 * dim as f64).sqrt().ceil() as usize).clamp(1, dim.max(1))
    }
}

/// Relaxed solution plus the best randomized candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct SdrSolution {
    /// `Q = VVᴴ`, unit diagonal.
    pub q: DMatrix<Complex64>,
    /// Low-rank factor `V` of `Q`.
    pub factor: DMatrix<Complex64>,
    /// `tr(RQ)`.
    pub sdp_value: f64,
    /// Best randomized `θ̄`; `None` until [`gaussian_randomize`] runs.
    pub theta_bar_best: Option<DVector<Complex64>>,
    /// `θ̄ᴴRθ̄` of every randomization trial, in draw order.
    pub randomization_values: Vec<f64>,
    /// Iterations summed over all restarts.
    pub iterations: usize,
    /// Restarts actually run.
    pub restarts: usize,
    /// False if the best restart hit `max_iters` before meeting `tol`.
    pub converged: bool,
}

impl SdrSolution {
    /// Objective of the best randomized candidate.
    pub fn best_value(&self) -> Option<f64> {
        self.randomization_values.iter().copied().reduce(f64::max)
    }
}

fn normalize_rows(v: &mut DMatrix<Complex64>) {
    for mut row in v.row_iter_mut() {
        let norm = row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            row /= Complex64::new(norm, 0.0);
        } else {
            row.fill(Complex64::new(0.0, 0.0));
            row[0] = Complex64::new(1.0, 0.0);
        }
    }
}

/// `Re tr(VᴴRV)` given `RV`.
fn factor_objective(v: &DMatrix<Complex64>, rv: &DMatrix<Complex64>) -> f64 {
    v.iter().zip(rv.iter()).map(|(a, b)| (a.conj() * b).re).sum()
}

struct AscentRun {
    factor: DMatrix<Complex64>,
    value: f64,
    iterations: usize,
    converged: bool,
}

fn ascend(r: &DMatrix<Complex64>, mut v: DMatrix<Complex64>, opts: &SolverOptions) -> AscentRun {
    normalize_rows(&mut v);
    let mut rv = r * &v;
    let mut value = factor_objective(&v, &rv);
    let scale = r.norm();
    if scale == 0.0 {
        return AscentRun { factor: v, value, iterations: 0, converged: true };
    }
    let mut step = 1.0 / scale;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        iterations += 1;
        let mut accepted = None;
        while step >= MIN_STEP / scale {
            let mut candidate = &v + &rv * Complex64::new(2.0 * step, 0.0);
            normalize_rows(&mut candidate);
            let rc = r * &candidate;
            let cand_value = factor_objective(&candidate, &rc);
            if cand_value >= value {
                accepted = Some((candidate, rc, cand_value));
                break;
            }
            step *= 0.5;
        }
        let Some((candidate, rc, cand_value)) = accepted else {
            // No ascent direction at any step size: stationary point.
            return AscentRun { factor: v, value, iterations, converged: true };
        };
        let change = (cand_value - value).abs();
        v = candidate;
        rv = rc;
        let previous = value;
        value = cand_value;
        if change <= opts.tol * previous.abs().max(f64::MIN_POSITIVE) {
            return AscentRun { factor: v, value, iterations, converged: true };
        }
        step *= 2.0;
    }
    AscentRun { factor: v, value, iterations, converged: false }
}

fn lambda_max(r: &DMatrix<Complex64>) -> f64 {
    r.clone().symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Solves the relaxed SDP from `opts.restarts` random initializations and
/// keeps the best.
pub fn solve_sdp(prob: &HomogenizedProblem, opts: &SolverOptions) -> Result<SdrSolution> {
    opts.validate()?;
    let dim = prob.dim();
    if dim == 0 || prob.r.ncols() != dim {
        return Err(argument("R must be a non-empty square matrix"));
    }
    let asymmetry = (&prob.r - prob.r.adjoint()).norm();
    if asymmetry > 1e-12 * prob.r.norm().max(1.0) {
        return Err(argument("R is not Hermitian"));
    }
    let rank = opts.rank_for(dim);

    let mut best: Option<AscentRun> = None;
    let mut iterations = 0;
    let mut restarts = 0;
    for restart in 0..opts.restarts {
        let mut rng = stream_rng(opts.seed, Domain::Solver, restart as u64);
        let init = DMatrix::from_fn(dim, rank, |_, _| complex_normal(&mut rng));
        let run = ascend(&prob.r, init, opts);
        iterations += run.iterations;
        restarts += 1;
        match &best {
            Some(b) if b.value >= run.value => {}
            _ => best = Some(run),
        }
        if prob.r.norm() == 0.0 {
            // Every feasible Q is optimal.
            break;
        }
    }
    let best = best.expect("at least one restart");

    let q = &best.factor * best.factor.adjoint();
    let sdp_value = best.value;
    let bound = dim as f64 * lambda_max(&prob.r);
    if sdp_value > bound + 1e-9 * bound.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::Solver(format!("tr(RQ) = {sdp_value} exceeds (N+1)·λmax(R) = {bound}")));
    }
    Ok(SdrSolution {
        q,
        factor: best.factor,
        sdp_value,
        theta_bar_best: None,
        randomization_values: Vec::new(),
        iterations,
        restarts,
        converged: best.converged,
    })
}

/// Draws `trials` candidates from `CN(0, Q)`, projects each onto the unit
/// circle element-wise and keeps the one with the largest `θ̄ᴴRθ̄`.
pub fn gaussian_randomize<R: Rng + ?Sized>(
    mut sol: SdrSolution,
    prob: &HomogenizedProblem,
    trials: usize,
    rng: &mut R,
) -> Result<SdrSolution> {
    if trials == 0 {
        return Err(argument("randomization needs at least one trial"));
    }
    let dim = prob.dim();
    if sol.q.nrows() != dim {
        return Err(argument("Q and R dimensions disagree"));
    }
    let eig = sol.q.clone().symmetric_eigen();
    let mut factor = eig.eigenvectors.clone();
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let s = if lambda > PSD_CLAMP { lambda.sqrt() } else { 0.0 };
        factor.column_mut(k).scale_mut(s);
    }

    let mut best_value = f64::NEG_INFINITY;
    let mut best = DVector::from_element(dim, Complex64::new(1.0, 0.0));
    let mut values = Vec::with_capacity(trials);
    let mut candidate = vec![Complex64::new(0.0, 0.0); dim];
    for _ in 0..trials {
        let z = DVector::from_fn(dim, |_, _| complex_normal(rng));
        let xi = &factor * z;
        for (c, x) in candidate.iter_mut().zip(xi.iter()) {
            *c = unit_normalize(*x);
        }
        let value = prob.quadratic_form(&candidate);
        values.push(value);
        if value > best_value {
            best_value = value;
            best.copy_from_slice(&candidate);
        }
    }
    sol.theta_bar_best = Some(best);
    sol.randomization_values = values;
    Ok(sol)
}

/// `θ_n = Norm(θ̄_n / θ̄_{N+1})`; a zero auxiliary entry is treated as `t = 1`.
pub fn extract_theta(theta_bar: &[Complex64]) -> Result<PhaseVector> {
    if theta_bar.len() < 2 {
        return Err(argument("homogenized vector needs at least two entries"));
    }
    let (body, t) = theta_bar.split_at(theta_bar.len() - 1);
    let t = if t[0] == Complex64::new(0.0, 0.0) { Complex64::new(1.0, 0.0) } else { t[0] };
    Ok(PhaseVector::normalized(body.iter().map(|z| z / t)))
}

/// Phase design plus the solver diagnostics behind it.
#[derive(Debug, Clone)]
pub struct SdrOutcome {
    pub theta: PhaseVector,
    pub solution: SdrSolution,
}

impl SdrOutcome {
    pub fn converged(&self) -> bool {
        self.solution.converged
    }
}

/// Full pipeline: homogenize, solve the relaxation, randomize, extract `θ`.
/// The restart seed is drawn from `rng` so the result depends only on the
/// caller's stream.
pub fn sdr_beamform<R: Rng + ?Sized>(ch: &ChannelRealization, opts: &SolverOptions, rng: &mut R) -> Result<SdrOutcome> {
    let prob = build_homogenized(ch)?;
    let solve_opts = SolverOptions { seed: rng.random(), ..opts.clone() };
    let sol = solve_sdp(&prob, &solve_opts)?;
    let sol = gaussian_randomize(sol, &prob, opts.trials, rng)?;
    let theta_bar = sol.theta_bar_best.as_ref().expect("randomized");
    let theta = extract_theta(theta_bar.as_slice())?;
    Ok(SdrOutcome { theta, solution: sol })
}
