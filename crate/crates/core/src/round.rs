//! Rounding relaxation solutions onto `St(n,p)` and Riemannian polishing.

use crate::error::{Error, Result};
use crate::instances::QpsInstance;
use crate::linalg::{mat, sym_eig, thin_qr, thin_svd, vec, DenseMatrix, SymMatrix};

/// Points handed out by this module satisfy `‖UᵀU − I‖_max` below this.
pub const STIEFEL_TOL: f64 = 1e-10;

/// An n×p matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelPoint {
    u: DenseMatrix,
}

impl StiefelPoint {
    pub fn new(u: DenseMatrix) -> Result<Self> {
        if u.rows() < u.cols() {
            return Err(Error::Dimension(format!(
                "Stiefel point needs n >= p, got {}x{}",
                u.rows(),
                u.cols()
            )));
        }
        let residual = u.orthonormality_residual();
        if !(residual <= STIEFEL_TOL) {
            return Err(Error::Infeasible { residual });
        }
        Ok(Self { u })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.u
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.u
    }

    pub fn n(&self) -> usize {
        self.u.rows()
    }

    pub fn p(&self) -> usize {
        self.u.cols()
    }

    /// Column-stacked `vec(U)`.
    pub fn to_vec(&self) -> Vec<f64> {
        vec(&self.u)
    }
}

/// Gradient descent settings for [`refine`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineSettings {
    pub max_iters: usize,
    /// Stop once the Frobenius norm of the Riemannian gradient drops below.
    pub grad_tolerance: f64,
    /// Trial step of the first iteration. Later iterations start from a
    /// Barzilai–Borwein estimate.
    pub initial_step: f64,
    pub backtracking: f64,
    pub armijo: f64,
}

impl Default for RefineSettings {
    fn default() -> Self {
        Self {
            max_iters: 500,
            grad_tolerance: 1e-8,
            initial_step: 1.0,
            backtracking: 0.5,
            armijo: 1e-4,
        }
    }
}

impl RefineSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("grad_tolerance", self.grad_tolerance),
            ("initial_step", self.initial_step),
            ("armijo", self.armijo),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Parameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::Parameter("max_iters must be positive".into()));
        }
        if !(self.backtracking > 0.0 && self.backtracking < 1.0) {
            return Err(Error::Parameter(format!(
                "backtracking factor must lie in (0,1), got {}",
                self.backtracking
            )));
        }
        if !(self.armijo < 1.0) {
            return Err(Error::Parameter(format!(
                "armijo constant must be below 1, got {}",
                self.armijo
            )));
        }
        Ok(())
    }
}

/// Result of [`refine`].
#[derive(Debug, Clone)]
pub struct Refined {
    pub point: StiefelPoint,
    pub value: f64,
    pub start_value: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    /// False when the iteration or line-search budget ran out before the
    /// gradient tolerance was met. `point` is still the best iterate.
    pub converged: bool,
    /// Objective after each accepted step, starting with `start_value`,
    /// accumulated from the per-step changes.
    pub history: Vec<f64>,
}

/// Below this fraction of `√p` (the norm of any feasible `u`) the `u` part of
/// a relaxation solution carries no usable direction.
pub const DEGENERATE_U: f64 = 1e-3;

/// Rounds a relaxation solution `(u, X)`.
///
/// Normally this is [`round_to_stiefel`] applied to `u`. When the objective
/// is even (`g = 0`), the solver's iterates stay symmetric and `u` comes back
/// as zero or roundoff; the direction is then read from `X ≈ uuᵀ` instead:
/// `√λ₁ q₁` for its leading eigenpair, with the sign giving the lower
/// objective.
pub fn round_solution(inst: &QpsInstance, u: &[f64], x: &SymMatrix) -> Result<StiefelPoint> {
    let (n, p) = (inst.n(), inst.p());
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > DEGENERATE_U * (p as f64).sqrt() || x.order() != n * p {
        return round_to_stiefel(u, n, p);
    }
    let eig = sym_eig(x)?;
    let scale = eig.values[0].max(0.0).sqrt();
    if scale == 0.0 {
        return round_to_stiefel(u, n, p);
    }
    let v: Vec<f64> = (0..n * p).map(|a| scale * eig.vectors[(a, 0)]).collect();
    let neg: Vec<f64> = v.iter().map(|a| -a).collect();
    let plus = round_to_stiefel(&v, n, p)?;
    let minus = round_to_stiefel(&neg, n, p)?;
    Ok(
        if primal_value(inst, &minus)? < primal_value(inst, &plus)? {
            minus
        } else {
            plus
        },
    )
}

/// Polar factor `U0·V0ᵀ` of `mat(u)` from its thin SVD.
///
/// When `mat(u)` is rank deficient the missing left singular vectors are
/// taken from the columns of `I_n` (Gram–Schmidt in index order), so the
/// result is always a Stiefel point.
pub fn round_to_stiefel(u: &[f64], n: usize, p: usize) -> Result<StiefelPoint> {
    if p == 0 || p > n {
        return Err(Error::Parameter(format!(
            "need 1 <= p <= n, got n={n}, p={p}"
        )));
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "cannot round a vector with non-finite entries".into(),
        ));
    }
    let svd = thin_svd(&mat(u, n, p)?)?;
    StiefelPoint::new(svd.polar_factor())
}

/// `uᵀHu + 2gᵀu` at a Stiefel point.
pub fn primal_value(inst: &QpsInstance, point: &StiefelPoint) -> Result<f64> {
    inst.eval_objective(point.matrix())
}

/// Projection of the Euclidean gradient onto the tangent space at `U`:
/// `G − U·sym(UᵀG)`.
pub fn riemannian_grad(inst: &QpsInstance, point: &StiefelPoint) -> DenseMatrix {
    let u = point.matrix();
    let g = inst.euclidean_gradient(u);
    project_tangent(u, &g)
}

/// `Z − U·sym(UᵀZ)`.
pub fn project_tangent(u: &DenseMatrix, z: &DenseMatrix) -> DenseMatrix {
    let utz = u.t_matmul(z).expect("shapes agree");
    let p = utz.rows();
    let sym = DenseMatrix::from_fn(p, p, |i, j| 0.5 * (utz[(i, j)] + utz[(j, i)]));
    z.sub(&u.matmul(&sym).expect("shapes agree"))
        .expect("shapes agree")
}

/// QR retraction `qf(U + ξ)`, with the R factor's diagonal nonnegative.
pub fn retract(u: &DenseMatrix, xi: &DenseMatrix) -> Result<DenseMatrix> {
    Ok(thin_qr(&u.add(xi)?)?.q)
}

/// Riemannian gradient descent with QR retraction and Armijo backtracking.
/// The objective never increases from one iterate to the next.
pub fn refine(
    inst: &QpsInstance,
    start: &StiefelPoint,
    settings: &RefineSettings,
) -> Result<Refined> {
    settings.validate()?;
    if (start.n(), start.p()) != (inst.n(), inst.p()) {
        return Err(Error::Dimension(format!(
            "start point is {}x{}, instance expects {}x{}",
            start.n(),
            start.p(),
            inst.n(),
            inst.p()
        )));
    }
    let start_value = primal_value(inst, start)?;
    let mut u = start.matrix().clone();
    let mut f = start_value;
    let mut grad = riemannian_grad(inst, start);
    let mut gnorm2 = grad.frobenius_sq();
    let mut history = vec![f];
    let mut step = settings.initial_step;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < settings.max_iters {
        if gnorm2.sqrt() <= settings.grad_tolerance {
            converged = true;
            break;
        }
        let mut t = step;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = StiefelPoint {
                u: retract(&u, &grad.scale(-t))?,
            };
            let df = objective_change(inst, &u, &trial.u);
            if df <= -settings.armijo * t * gnorm2 && df < 0.0 {
                accepted = Some((trial, f + df, None));
                break;
            }
            // Near a minimizer the Armijo decrease can fall below what f
            // resolves; a step that does not increase f and shrinks the
            // gradient is still progress.
            if df <= 0.0 {
                let gt = riemannian_grad(inst, &trial);
                if gt.frobenius_sq() < (1.0 - settings.armijo) * gnorm2 {
                    accepted = Some((trial, f + df, Some(gt)));
                    break;
                }
            }
            t *= settings.backtracking;
        }
        let Some((next_point, fnext, next_grad)) = accepted else {
            break;
        };
        iterations += 1;
        let next_grad = next_grad.unwrap_or_else(|| riemannian_grad(inst, &next_point));

        // Barzilai–Borwein guess for the next trial step, using the
        // projected gradient difference as the curvature probe.
        let s = next_point.u.sub(&u)?;
        let y = next_grad.sub(&project_tangent(&next_point.u, &grad))?;
        let sy: f64 = dot_mat(&s, &y);
        let ss = s.frobenius_sq();
        step = if sy > 0.0 {
            (ss / sy).clamp(1e-10, 1e10)
        } else {
            (2.0 * t).min(1e10)
        };

        u = next_point.u;
        f = fnext;
        grad = next_grad;
        gnorm2 = grad.frobenius_sq();
        history.push(f);
    }
    if !converged && gnorm2.sqrt() <= settings.grad_tolerance {
        converged = true;
    }
    let point = StiefelPoint::new(u)?;
    Ok(Refined {
        value: inst.quadratic_form(&point.to_vec()),
        point,
        start_value,
        iterations,
        grad_norm: gnorm2.sqrt(),
        converged,
        history,
    })
}

/// `f(V) − f(U)` as `(v − u)ᵀH(v + u) + 2gᵀ(v − u)`, which keeps its relative
/// accuracy when the two values agree to many digits.
fn objective_change(inst: &QpsInstance, u: &DenseMatrix, v: &DenseMatrix) -> f64 {
    let uv = vec(u);
    let vv = vec(v);
    let diff: Vec<f64> = vv.iter().zip(&uv).map(|(a, b)| a - b).collect();
    let sum: Vec<f64> = vv.iter().zip(&uv).map(|(a, b)| a + b).collect();
    crate::linalg::dot(&diff, &inst.h().matvec(&sum)) + 2.0 * crate::linalg::dot(inst.g(), &diff)
}

fn dot_mat(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    crate::linalg::dot(a.as_slice(), b.as_slice())
}
