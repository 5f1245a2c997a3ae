//! Closed-form probabilities of the stochastic decisions.
//!
//! An agent with conviction `c1` clears a Poisson cutoff `K` for acting or
//! reacting positively when `K <= c1`, and reacts negatively when `K >= c1`.

use crate::config::Thresholds;

/// `P[Poisson(lambda) <= k]`, summed in log space.
pub fn poisson_cdf(lambda: f64, k: u64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let ln_lambda = libm::log(lambda);
    let mut total = 0.0;
    for i in 0..=k {
        let x = i as f64;
        total += libm::exp(-lambda + x * ln_lambda - libm::lgamma(x + 1.0));
    }
    total.min(1.0)
}

/// Probability that an agent with `c1` commits a microaggression.
pub fn action_probability(c1: f64, t: &Thresholds) -> f64 {
    if c1 < t.action {
        return 0.0;
    }
    poisson_cdf(t.action_lambda(), libm::floor(c1) as u64)
}

/// Probability of a positive reaction from an agent with `c1`.
pub fn positive_probability(c1: f64, t: &Thresholds) -> f64 {
    if c1 < t.positive {
        return 0.0;
    }
    poisson_cdf(t.positive_lambda(), libm::floor(c1) as u64)
}

/// Probability of a negative reaction from an agent with `c1`.
pub fn negative_probability(c1: f64, t: &Thresholds) -> f64 {
    if c1 >= t.positive || c1 > t.negative {
        return 0.0;
    }
    let needed = libm::ceil(c1) as u64;
    if needed == 0 {
        return 1.0;
    }
    1.0 - poisson_cdf(t.negative_lambda(), needed - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn reference_values() {
        // independently computed reference values
        assert!(close(poisson_cdf(83.3, 70), 0.07750025939998038));
        assert!(close(poisson_cdf(83.3, 80), 0.3858556270507611));
        assert!(close(poisson_cdf(83.3, 90), 0.7869652320464479));
        assert!(close(poisson_cdf(83.3, 100), 0.9672922593441347));
        assert!(close(poisson_cdf(75.0, 50), 0.0014027041448515909));
        assert!(close(poisson_cdf(75.0, 60), 0.043339801249904455));
        assert!(close(poisson_cdf(75.0, 70), 0.30661428367982313));
        assert!(close(poisson_cdf(75.0, 80), 0.7410532579730875));
        assert!(close(poisson_cdf(75.0, 100), 0.9975680855238174));
        assert!(close(1.0 - poisson_cdf(7.5, 4), 0.8679381437122794));
        assert!(close(1.0 - poisson_cdf(7.5, 9), 0.22359238698028533));
        assert!(close(1.0 - poisson_cdf(7.5, 14), 0.010260427912342602));
        assert!(close(poisson_cdf(7.5, 0), 0.0005530843701478336));
    }

    #[test]
    fn decision_probabilities() {
        let t = Thresholds { action: 66.6, positive: 50.0, negative: 15.0 };
        assert_eq!(action_probability(60.0, &t), 0.0);
        assert!(close(action_probability(80.0, &t), 0.3858556270507611));
        assert!(close(action_probability(80.5, &t), 0.3858556270507611));
        assert_eq!(positive_probability(49.9, &t), 0.0);
        assert!(close(positive_probability(70.0, &t), 0.30661428367982313));
        assert_eq!(negative_probability(15.1, &t), 0.0);
        assert!(close(negative_probability(10.0, &t), 0.22359238698028533));
        assert!(close(negative_probability(9.5, &t), 0.22359238698028533));
        assert_eq!(negative_probability(0.0, &t), 1.0);
        assert_eq!(poisson_cdf(0.0, 0), 1.0);
    }
}
