use rand::RngCore;

use super::{argmax_arm, linear_scores, Policy};
use crate::env::ArmContext;
use crate::error::{Error, Result};
use crate::history::DecisionRecord;
use crate::linalg::{check_len, spd_cholesky, Matrix, Vector};
use crate::posterior_exact::{recover_params, PosteriorState, Recovery, DEFAULT_EPS_SINGULAR};

/// `β = 1 + √(ln(2T)/2)`
pub fn default_beta(horizon: usize) -> f64 {
    1.0 + ((2.0 * horizon.max(1) as f64).ln() / 2.0).sqrt()
}

/// Ridge accumulator `A = λI + Σ x xᵀ`, `b = Σ V x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ridge {
    gram: Matrix,
    moment: Vector,
}

impl Ridge {
    pub fn new(dim: usize, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::config("lambda", "must be positive"));
        }
        Ok(Self {
            gram: Matrix::identity(dim, dim) * lambda,
            moment: Vector::zeros(dim),
        })
    }

    pub fn dim(&self) -> usize {
        self.moment.len()
    }

    pub fn add(&mut self, x: &[f64], value: f64) -> Result<()> {
        check_len(x, self.dim())?;
        let x = Vector::from_column_slice(x);
        self.gram.ger(1.0, &x, &x, 1.0);
        self.moment.axpy(value, &x, 1.0);
        Ok(())
    }

    /// `(θ̂, bonus)` where `bonus(x) = √(xᵀ A⁻¹ x)` for each row of `xs`.
    pub fn estimate_and_widths(&self, xs: &[Vec<f64>]) -> Result<(Vector, Vec<f64>)> {
        let chol = spd_cholesky(&self.gram, "ridge design matrix")?;
        let theta = chol.solve(&self.moment);
        let l = chol.l();
        let widths = xs
            .iter()
            .map(|x| {
                check_len(x, self.dim())?;
                let z = l
                    .solve_lower_triangular(&Vector::from_column_slice(x))
                    .expect("Cholesky factor has a positive diagonal");
                Ok(z.norm())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((theta, widths))
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::config(
            "beta",
            "exploration constant must be finite and non-negative",
        ));
    }
    Ok(())
}

/// LinUCB on `(x, V)`, blind to the herding term.
#[derive(Debug, Clone)]
pub struct LinUcb {
    name: String,
    ridge: Ridge,
    beta: f64,
}

impl LinUcb {
    pub fn new(dim: usize, lambda: f64, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        Ok(Self {
            name: "linucb".into(),
            ridge: Ridge::new(dim, lambda)?,
            beta,
        })
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn scores(&self, offered: &[ArmContext]) -> Result<Vec<f64>> {
        let xs: Vec<Vec<f64>> = offered.iter().map(|c| c.features.clone()).collect();
        let (theta, widths) = self.ridge.estimate_and_widths(&xs)?;
        let means = linear_scores(theta.as_slice(), offered)?;
        Ok(means
            .iter()
            .zip(&widths)
            .map(|(m, w)| m + self.beta * w)
            .collect())
    }
}

impl Policy for LinUcb {
    fn name(&self) -> &str {
        &self.name
    }

    fn select(&mut self, offered: &[ArmContext], _rng: &mut dyn RngCore) -> Result<usize> {
        argmax_arm(offered, &self.scores(offered)?)
    }

    fn observe(&mut self, record: &DecisionRecord) -> Result<()> {
        self.ridge.add(&record.features, record.feedback_value)
    }
}

/// Linear Thompson sampling on `(x, V)`: `θ ~ N(A⁻¹b, v² A⁻¹)`.
#[derive(Debug, Clone)]
pub struct GaussianTs {
    name: String,
    posterior: PosteriorState,
    scale: f64,
}

impl GaussianTs {
    pub fn new(dim: usize, lambda: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::config("v", "posterior scale must be positive"));
        }
        Ok(Self {
            name: "ts".into(),
            posterior: PosteriorState::isotropic(dim, lambda, 1.0)?,
            scale,
        })
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

impl Policy for GaussianTs {
    fn name(&self) -> &str {
        &self.name
    }

    fn select(&mut self, offered: &[ArmContext], rng: &mut dyn RngCore) -> Result<usize> {
        let mut theta = self.posterior.sample(rng)?;
        if self.scale != 1.0 {
            let mean = self.posterior.mean()?;
            theta = &mean + (theta - &mean) * self.scale;
        }
        argmax_arm(offered, &linear_scores(theta.as_slice(), offered)?)
    }

    fn observe(&mut self, record: &DecisionRecord) -> Result<()> {
        self.posterior
            .observe(&record.features, record.feedback_value)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ScoreMode {
    /// `θ̂̃ᵀx̃ + β‖x̃‖_{A⁻¹}`, which rewards the herding term too.
    #[default]
    Augmented,
    /// `θ̂ᵀx + β‖x̃‖_{A⁻¹}` with `θ̂` recovered from `θ̂̃`.
    Recovered,
}

/// LinUCB on the augmented features `x̃ = [h; x]`.
#[derive(Debug, Clone)]
pub struct LinUcbConf {
    name: String,
    ridge: Ridge,
    beta: f64,
    mode: ScoreMode,
}

impl LinUcbConf {
    pub fn new(dim: usize, lambda: f64, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        Ok(Self {
            name: "linucb-conf".into(),
            ridge: Ridge::new(dim + 1, lambda)?,
            beta,
            mode: ScoreMode::Augmented,
        })
    }

    pub fn with_mode(mut self, mode: ScoreMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn scores(&self, offered: &[ArmContext]) -> Result<Vec<f64>> {
        let xs: Vec<Vec<f64>> = offered.iter().map(ArmContext::augmented).collect();
        let (theta_tilde, widths) = self.ridge.estimate_and_widths(&xs)?;
        let means: Vec<f64> = match self.mode {
            ScoreMode::Augmented => xs
                .iter()
                .map(|x| theta_tilde.dot(&Vector::from_column_slice(x)))
                .collect(),
            ScoreMode::Recovered => {
                let (_, theta) = recover_params(
                    theta_tilde.as_slice(),
                    DEFAULT_EPS_SINGULAR,
                    Recovery::Clamp,
                )?;
                linear_scores(&theta, offered)?
            }
        };
        Ok(means
            .iter()
            .zip(&widths)
            .map(|(m, w)| m + self.beta * w)
            .collect())
    }
}

impl Policy for LinUcbConf {
    fn name(&self) -> &str {
        &self.name
    }

    fn select(&mut self, offered: &[ArmContext], _rng: &mut dyn RngCore) -> Result<usize> {
        argmax_arm(offered, &self.scores(offered)?)
    }

    fn observe(&mut self, record: &DecisionRecord) -> Result<()> {
        self.ridge.add(&record.augmented(), record.feedback_value)
    }
}
