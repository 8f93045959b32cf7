use crate::error::{Error, Result};

/// Default training chain length.
pub const DEFAULT_T_STEPS: usize = 1000;
/// Default linear-beta endpoints.
pub const DEFAULT_BETA1: f64 = 8.5e-4;
pub const DEFAULT_BETA_T: f64 = 0.012;
/// Default inference step count.
pub const DEFAULT_INFER_STEPS: usize = 50;

/// Forward-process schedule. Arrays are 0-indexed by `t - 1` for the
/// 1-based diffusion step t; `beta_tilde[0]` is 0 under the ᾱ_0 := 1
/// convention, so the final reverse step adds no noise.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSchedule {
    pub t_steps: usize,
    pub beta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub alpha_bar: Vec<f64>,
    pub beta_tilde: Vec<f64>,
    pub infer_steps: usize,
}

/// The inference-time sub-chain: original timesteps `taus` (ascending) with
/// effective per-hop coefficients. With `infer_steps == t_steps` the arrays
/// are bitwise copies of the full schedule, so strided sampling degenerates
/// to the exact ancestral chain.
#[derive(Debug, Clone, PartialEq)]
pub struct StridedSchedule {
    pub taus: Vec<usize>,
    pub beta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub alpha_bar: Vec<f64>,
    pub beta_tilde: Vec<f64>,
}

pub fn make_schedule(
    t_steps: usize,
    beta1: f64,
    beta_t: f64,
    infer_steps: usize,
) -> Result<DiffusionSchedule> {
    if t_steps < 2 {
        return Err(Error::ScheduleInvalid(format!(
            "need at least 2 steps, got {t_steps}"
        )));
    }
    if !(beta1 > 0.0 && beta1 < beta_t && beta_t < 1.0) {
        return Err(Error::ScheduleInvalid(format!(
            "need 0 < beta1 < betaT < 1, got ({beta1}, {beta_t})"
        )));
    }
    if infer_steps < 1 || infer_steps > t_steps {
        return Err(Error::ScheduleInvalid(format!(
            "infer_steps {infer_steps} outside 1..={t_steps}"
        )));
    }
    let mut beta: Vec<f64> = (0..t_steps)
        .map(|i| beta1 + (beta_t - beta1) * i as f64 / (t_steps - 1) as f64)
        .collect();
    // Pin the endpoints so they hold exactly in floating point.
    beta[0] = beta1;
    beta[t_steps - 1] = beta_t;
    let alpha: Vec<f64> = beta.iter().map(|b| 1.0 - b).collect();
    let mut alpha_bar = Vec::with_capacity(t_steps);
    let mut prod = 1.0f64;
    for &a in &alpha {
        prod *= a;
        alpha_bar.push(prod);
    }
    let mut beta_tilde = Vec::with_capacity(t_steps);
    for i in 0..t_steps {
        let prev = if i == 0 { 1.0 } else { alpha_bar[i - 1] };
        beta_tilde.push((1.0 - prev) / (1.0 - alpha_bar[i]) * beta[i]);
    }
    let sched = DiffusionSchedule {
        t_steps,
        beta,
        alpha,
        alpha_bar,
        beta_tilde,
        infer_steps,
    };
    sched.validate()?;
    Ok(sched)
}

impl DiffusionSchedule {
    pub fn default_paper() -> Self {
        make_schedule(DEFAULT_T_STEPS, DEFAULT_BETA1, DEFAULT_BETA_T, DEFAULT_INFER_STEPS)
            .expect("default schedule is valid")
    }

    fn validate(&self) -> Result<()> {
        let n = self.t_steps;
        if self.beta.len() != n || self.alpha.len() != n || self.alpha_bar.len() != n || self.beta_tilde.len() != n {
            return Err(Error::ScheduleInvalid("array lengths disagree".into()));
        }
        for i in 0..n {
            if !(self.beta[i] > 0.0 && self.beta[i] < 1.0) {
                return Err(Error::ScheduleInvalid(format!("beta[{i}] out of (0,1)")));
            }
            if i > 0 && self.beta[i] <= self.beta[i - 1] {
                return Err(Error::ScheduleInvalid(format!("beta not increasing at {i}")));
            }
            if i > 0 && self.alpha_bar[i] >= self.alpha_bar[i - 1] {
                return Err(Error::ScheduleInvalid(format!("alpha_bar not decreasing at {i}")));
            }
            if !(self.beta_tilde[i] >= 0.0 && self.beta_tilde[i] <= self.beta[i]) {
                return Err(Error::ScheduleInvalid(format!("beta_tilde[{i}] outside [0, beta]")));
            }
        }
        if self.beta_tilde[0] != 0.0 {
            return Err(Error::ScheduleInvalid("beta_tilde[1] must be 0".into()));
        }
        Ok(())
    }

    fn check_t(&self, t: usize) -> Result<()> {
        if t < 1 || t > self.t_steps {
            return Err(Error::StepOutOfRange {
                t,
                t_max: self.t_steps,
            });
        }
        Ok(())
    }

    pub fn beta_at(&self, t: usize) -> Result<f64> {
        self.check_t(t)?;
        Ok(self.beta[t - 1])
    }

    pub fn alpha_at(&self, t: usize) -> Result<f64> {
        self.check_t(t)?;
        Ok(self.alpha[t - 1])
    }

    pub fn alpha_bar_at(&self, t: usize) -> Result<f64> {
        self.check_t(t)?;
        Ok(self.alpha_bar[t - 1])
    }

    pub fn beta_tilde_at(&self, t: usize) -> Result<f64> {
        self.check_t(t)?;
        Ok(self.beta_tilde[t - 1])
    }

    /// Evenly spaced `infer_steps` timesteps of the chain, endpoints
    /// included: τ_s = 1 + round((s−1)(T−1)/(S−1)).
    pub fn strided(&self) -> StridedSchedule {
        let (t_n, s_n) = (self.t_steps, self.infer_steps);
        if s_n == t_n {
            return StridedSchedule {
                taus: (1..=t_n).collect(),
                beta: self.beta.clone(),
                alpha: self.alpha.clone(),
                alpha_bar: self.alpha_bar.clone(),
                beta_tilde: self.beta_tilde.clone(),
            };
        }
        let taus: Vec<usize> = if s_n == 1 {
            vec![t_n]
        } else {
            (0..s_n)
                .map(|s| 1 + ((s * (t_n - 1)) as f64 / (s_n - 1) as f64).round() as usize)
                .collect()
        };
        let alpha_bar: Vec<f64> = taus.iter().map(|&t| self.alpha_bar[t - 1]).collect();
        let mut alpha = Vec::with_capacity(s_n);
        let mut beta = Vec::with_capacity(s_n);
        let mut beta_tilde = Vec::with_capacity(s_n);
        for s in 0..s_n {
            let prev = if s == 0 { 1.0 } else { alpha_bar[s - 1] };
            let a = alpha_bar[s] / prev;
            alpha.push(a);
            beta.push(1.0 - a);
            beta_tilde.push((1.0 - prev) / (1.0 - alpha_bar[s]) * (1.0 - a));
        }
        StridedSchedule {
            taus,
            beta,
            alpha,
            alpha_bar,
            beta_tilde,
        }
    }
}
