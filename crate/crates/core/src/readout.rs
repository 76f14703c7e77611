//! Ion-qubit state readout from fluorescence arrival statistics.
//!
//! The bright state scatters at a high detected rate until an exponential
//! leakage event pumps it dark; the dark state only produces background.
//! Classification is either a count threshold or an arrival-time likelihood
//! ratio, and a calibration routine solves for the dark and leakage rates
//! that reproduce target fidelities at a fixed bright rate.

use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};
use serde::{Deserialize, Serialize};
use statrs::distribution::{DiscreteCDF, Poisson as PoissonDist};
use thiserror::Error;

use crate::quad::{bisect, integrate};

/// The two logical readout outcomes: |↑⟩ fluoresces (bright), |↓⟩ stays dark.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IonState {
    Up,
    Down,
}

#[derive(Debug, Error)]
pub enum ReadoutError {
    #[error("invalid readout model: {0}")]
    InvalidModel(String),
    #[error("targets ({up}, {down}) infeasible at bright rate {bright_rate_hz} Hz: {reason}")]
    InfeasibleTargets { up: f64, down: f64, bright_rate_hz: f64, reason: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Classifier {
    /// counts > threshold → bright.
    Threshold(u32),
    /// Likelihood-ratio test on the full arrival-time record.
    ArrivalLikelihood,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ReadoutModel {
    /// Mean detected fluorescence rate of the bright state, counts/s.
    pub bright_rate_hz: f64,
    /// Background + dark-count rate, counts/s.
    pub dark_rate_hz: f64,
    /// Bright → dark pumping rate during readout, 1/s.
    pub leak_rate_hz: f64,
    pub window_s: f64,
    pub classifier: Classifier,
}

pub const DEFAULT_BRIGHT_RATE_HZ: f64 = 30_000.0;
pub const DEFAULT_THRESHOLD: u32 = 1;

impl ReadoutModel {
    pub fn validate(&self) -> Result<(), ReadoutError> {
        if self.bright_rate_hz < 0.0 || self.dark_rate_hz < 0.0 || self.leak_rate_hz < 0.0 {
            return Err(ReadoutError::InvalidModel("rates must be >= 0".into()));
        }
        if self.window_s < 0.0 {
            return Err(ReadoutError::InvalidModel("window must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ReadoutResult {
    pub state: IonState,
    pub counts: u32,
    pub arrivals: Vec<f64>,
}

pub fn threshold_classifier(counts: u32, threshold: u32) -> IonState {
    if counts > threshold {
        IonState::Up
    } else {
        IonState::Down
    }
}

fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u32 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as u32
}

fn uniform_arrivals<R: Rng + ?Sized>(n: u32, a: f64, b: f64, rng: &mut R) -> Vec<f64> {
    let mut t: Vec<f64> = (0..n).map(|_| rng.random_range(a..b)).collect();
    t.sort_by(|x, y| x.partial_cmp(y).expect("finite times"));
    t
}

/// Draw one readout record for a known true state and classify it.
pub fn simulate_readout<R: Rng + ?Sized>(
    true_state: IonState,
    model: &ReadoutModel,
    rng: &mut R,
) -> ReadoutResult {
    let t_window = model.window_s;
    let arrivals = match true_state {
        IonState::Down => {
            let n = sample_poisson(model.dark_rate_hz * t_window, rng);
            if t_window > 0.0 {
                uniform_arrivals(n, 0.0, t_window, rng)
            } else {
                Vec::new()
            }
        }
        IonState::Up => {
            let leak_time = if model.leak_rate_hz > 0.0 {
                Exp::new(model.leak_rate_hz).expect("positive rate").sample(rng)
            } else {
                f64::INFINITY
            };
            let t_bright = leak_time.min(t_window);
            let n_bright = sample_poisson(model.bright_rate_hz * t_bright, rng);
            let n_dark = sample_poisson(model.dark_rate_hz * (t_window - t_bright), rng);
            let mut t = if t_bright > 0.0 {
                uniform_arrivals(n_bright, 0.0, t_bright, rng)
            } else {
                Vec::new()
            };
            if t_window > t_bright {
                t.extend(uniform_arrivals(n_dark, t_bright, t_window, rng));
            }
            t
        }
    };
    let counts = arrivals.len() as u32;
    let state = match model.classifier {
        Classifier::Threshold(k) => threshold_classifier(counts, k),
        Classifier::ArrivalLikelihood => likelihood_classify(&arrivals, model),
    };
    ReadoutResult { state, counts, arrivals }
}

/// log ∫_a^b e^{-c τ} dτ, stable for any sign of c.
fn ln_int_exp(c: f64, a: f64, b: f64) -> f64 {
    debug_assert!(b > a);
    let width = b - a;
    if (c * width).abs() < 1e-12 {
        return width.ln();
    }
    if c > 0.0 {
        -c * a + (-(-c * width).exp()).ln_1p() - c.ln()
    } else {
        -c * b + (-(c * width).exp()).ln_1p() - (-c).ln()
    }
}

/// Log-likelihood of the arrival record under the bright hypothesis,
/// marginalized over the exponential leakage time.
fn log_likelihood_bright(arrivals: &[f64], model: &ReadoutModel) -> f64 {
    let (rb, rd, lam, t_end) =
        (model.bright_rate_hz, model.dark_rate_hz, model.leak_rate_hz, model.window_s);
    let n = arrivals.len();
    let mut terms: Vec<f64> = Vec::with_capacity(n + 2);
    // no leak inside the window
    let no_leak = if n > 0 && rb == 0.0 {
        f64::NEG_INFINITY
    } else {
        -lam * t_end + n as f64 * rb.max(f64::MIN_POSITIVE).ln() - rb * t_end
    };
    terms.push(no_leak);
    if lam > 0.0 {
        let c = lam + rb - rd;
        for k in 0..=n {
            // leak in (t_k, t_{k+1}): k bright counts then n-k dark counts
            if n - k > 0 && rd == 0.0 {
                continue;
            }
            let a = if k == 0 { 0.0 } else { arrivals[k - 1] };
            let b = if k == n { t_end } else { arrivals[k] };
            if b <= a {
                continue;
            }
            let mut lg = lam.ln() - rd * t_end + ln_int_exp(c, a, b);
            if k > 0 {
                lg += k as f64 * rb.max(f64::MIN_POSITIVE).ln();
            }
            if n - k > 0 {
                lg += (n - k) as f64 * rd.ln();
            }
            terms.push(lg);
        }
    }
    log_sum_exp(&terms)
}

fn log_likelihood_dark(arrivals: &[f64], model: &ReadoutModel) -> f64 {
    let rd = model.dark_rate_hz;
    let n = arrivals.len();
    if n > 0 && rd == 0.0 {
        return f64::NEG_INFINITY;
    }
    let rate_term = if n > 0 { n as f64 * rd.ln() } else { 0.0 };
    rate_term - rd * model.window_s
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// Equal-prior likelihood-ratio classification of an arrival record.
pub fn likelihood_classify(arrivals: &[f64], model: &ReadoutModel) -> IonState {
    if log_likelihood_bright(arrivals, model) > log_likelihood_dark(arrivals, model) {
        IonState::Up
    } else {
        IonState::Down
    }
}

fn poisson_cdf(mean: f64, n: u32) -> f64 {
    if mean <= 0.0 {
        1.0
    } else {
        PoissonDist::new(mean).expect("positive mean").cdf(n as u64)
    }
}

/// Analytic threshold-classifier fidelities (P(correct | ↑), P(correct | ↓))
/// for the Poisson mixture with exponential bright → dark leakage.
pub fn analytic_threshold_fidelities(model: &ReadoutModel, threshold: u32) -> (f64, f64) {
    let (rb, rd, lam, t_end) =
        (model.bright_rate_hz, model.dark_rate_hz, model.leak_rate_hz, model.window_s);
    let p_down = poisson_cdf(rd * t_end, threshold);
    let p_up = if t_end == 0.0 {
        0.0
    } else if lam <= 0.0 {
        1.0 - poisson_cdf(rb * t_end, threshold)
    } else {
        // truncate where the leak-time density has decayed away
        let upper = t_end.min(40.0 / lam);
        let integral = integrate(
            |tau| {
                let mu = rb * tau + rd * (t_end - tau);
                lam * (-lam * tau).exp() * (1.0 - poisson_cdf(mu, threshold))
            },
            0.0,
            upper,
            128,
        );
        (-lam * t_end).exp() * (1.0 - poisson_cdf(rb * t_end, threshold)) + integral
    };
    (p_up, p_down)
}

/// Threshold maximizing the analytic average fidelity.
pub fn optimal_threshold(model: &ReadoutModel, max_threshold: u32) -> u32 {
    (0..=max_threshold)
        .max_by(|&a, &b| {
            let fa = analytic_threshold_fidelities(model, a);
            let fb = analytic_threshold_fidelities(model, b);
            let avg = |f: (f64, f64)| 0.5 * (f.0 + f.1);
            avg(fa).partial_cmp(&avg(fb)).expect("finite fidelities")
        })
        .unwrap_or(DEFAULT_THRESHOLD)
}

/// Solve for (dark rate, leakage rate) reproducing the target fidelities at
/// the given bright rate and threshold. The dark rate is fixed by the dark
/// target alone and the leakage rate by the bright target given it; both
/// solves are deterministic bisections on monotone responses.
pub fn calibrate_readout(
    target_up: f64,
    target_down: f64,
    window_s: f64,
    bright_rate_hz: f64,
    threshold: u32,
) -> Result<ReadoutModel, ReadoutError> {
    for t in [target_up, target_down] {
        if !(t > 0.5 && t < 1.0) {
            return Err(ReadoutError::InfeasibleTargets {
                up: target_up,
                down: target_down,
                bright_rate_hz,
                reason: format!("target {t} outside the open interval (0.5, 1)"),
            });
        }
    }
    if window_s <= 0.0 || bright_rate_hz <= 0.0 {
        return Err(ReadoutError::InvalidModel("window and bright rate must be positive".into()));
    }
    // dark: P(Poisson(rd*T) <= threshold) = target_down, decreasing in rd
    let f_dark = |mu: f64| poisson_cdf(mu, threshold) - target_down;
    let mu_dark = bisect(f_dark, 1e-12, 200.0, 1e-12).ok_or_else(|| {
        ReadoutError::InfeasibleTargets {
            up: target_up,
            down: target_down,
            bright_rate_hz,
            reason: "dark-rate solve found no bracket".into(),
        }
    })?;
    let dark_rate_hz = mu_dark / window_s;

    let model_with = |leak: f64| ReadoutModel {
        bright_rate_hz,
        dark_rate_hz,
        leak_rate_hz: leak,
        window_s,
        classifier: Classifier::Threshold(threshold),
    };
    let best_up = analytic_threshold_fidelities(&model_with(0.0), threshold).0;
    if best_up <= target_up {
        return Err(ReadoutError::InfeasibleTargets {
            up: target_up,
            down: target_down,
            bright_rate_hz,
            reason: format!(
                "bright fidelity cannot exceed {best_up:.4} in a {:.3e} s window at this rate",
                window_s
            ),
        });
    }
    // bright fidelity decreases from best_up toward the dark-state value as
    // the leak rate grows
    let f_bright =
        |leak: f64| analytic_threshold_fidelities(&model_with(leak), threshold).0 - target_up;
    let leak = bisect(f_bright, 1e-9, 1e7, 1e-9).ok_or_else(|| {
        ReadoutError::InfeasibleTargets {
            up: target_up,
            down: target_down,
            bright_rate_hz,
            reason: "leak-rate solve found no bracket".into(),
        }
    })?;
    let model = model_with(leak);
    let (fu, fd) = analytic_threshold_fidelities(&model, threshold);
    if (fu - target_up).abs() > 1e-3 || (fd - target_down).abs() > 1e-3 {
        return Err(ReadoutError::InfeasibleTargets {
            up: target_up,
            down: target_down,
            bright_rate_hz,
            reason: format!("solve converged to ({fu:.4}, {fd:.4})"),
        });
    }
    Ok(model)
}
