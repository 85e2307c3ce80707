use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};

/// Statistics of the atom injection times.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InjectionMode {
    /// Equally spaced entries (pumping statistics p = 1).
    Regular,
    /// Exponential gaps (p = 0).
    Poisson,
}

impl InjectionMode {
    /// Maps an endpoint pumping-statistics value to a mode.
    pub fn from_p(p: f64) -> Result<Self> {
        if p == 1.0 {
            Ok(InjectionMode::Regular)
        } else if p == 0.0 {
            Ok(InjectionMode::Poisson)
        } else {
            Err(Error::InvalidParameter {
                name: "pump.p",
                value: p,
                reason: "the simulator implements only p = 0 (Poisson) and p = 1 (regular)",
            })
        }
    }

    pub fn p(self) -> f64 {
        match self {
            InjectionMode::Regular => 1.0,
            InjectionMode::Poisson => 0.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            InjectionMode::Regular => "regular",
            InjectionMode::Poisson => "poisson",
        }
    }
}

/// Entry times in `[0, duration)`, sorted.
pub fn schedule_injections(
    rate: f64,
    mode: InjectionMode,
    duration: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    schedule_with(rate, mode, duration, &mut rng)
}

pub(crate) fn schedule_with(
    rate: f64,
    mode: InjectionMode,
    duration: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    if !(rate > 0.0 && duration > 0.0 && rate.is_finite() && duration.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "pump.rate",
            value: rate,
            reason: "rate and duration must be positive",
        });
    }
    if rate * duration < 1.0 {
        return Err(Error::Insufficient(format!(
            "no atoms in window: rate·duration = {:.3e} < 1",
            rate * duration
        )));
    }
    let times: Vec<f64> = match mode {
        InjectionMode::Regular => {
            let n = (rate * duration).ceil() as usize;
            (0..n)
                .map(|j| j as f64 / rate)
                .filter(|&t| t < duration)
                .collect()
        }
        InjectionMode::Poisson => {
            let gaps = Exp::new(rate).expect("rate checked positive");
            let mut out = Vec::with_capacity((rate * duration * 1.1) as usize + 16);
            let mut t = gaps.sample(rng);
            while t < duration {
                out.push(t);
                t += gaps.sample(rng);
            }
            out
        }
    };
    if times.is_empty() {
        return Err(Error::Insufficient("no atoms in window".into()));
    }
    Ok(times)
}
