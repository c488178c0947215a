//! Waiting-time algebra for exponential headways and the MoD matching queue.
//!
//! All rates are per minute. A line running `f` buses per hour has rate `f/60`.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum WaitError {
    #[error("combined rate must be positive")]
    ZeroRate,
    #[error("rates must be finite and nonnegative")]
    BadRate,
}

/// Matching coefficient and fleet of one zone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoDZoneParams {
    /// Matching coefficient, 1/(vehicle minute).
    pub matching: f64,
    /// Vacant vehicles deployed in the zone.
    pub vehicles: f64,
}

impl MoDZoneParams {
    pub fn rate(&self) -> f64 {
        self.matching * self.vehicles
    }
}

/// Mean MoD wait `1/(A V)` in minutes.
pub fn mod_wait_minutes(p: MoDZoneParams) -> Result<f64, WaitError> {
    let r = p.rate();
    if !r.is_finite() || r < 0.0 {
        return Err(WaitError::BadRate);
    }
    if r == 0.0 {
        return Err(WaitError::ZeroRate);
    }
    Ok(1.0 / r)
}

pub fn per_minute(buses_per_hour: f64) -> f64 {
    buses_per_hour / 60.0
}

/// Probability of boarding each line first, and the expected wait `1/F`.
pub fn line_choice_probabilities(rates: &[f64]) -> Result<(Vec<f64>, f64), WaitError> {
    if rates.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(WaitError::BadRate);
    }
    let total: f64 = rates.iter().sum();
    if total <= 0.0 {
        return Err(WaitError::ZeroRate);
    }
    Ok((rates.iter().map(|r| r / total).collect(), 1.0 / total))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeChoice {
    pub p_mod: f64,
    pub p_transit: f64,
    pub expected_wait: f64,
}

/// Choice between the combined transit rate and the MoD rate at an access node.
pub fn mode_choice_probabilities(transit_rate: f64, mod_rate: f64) -> Result<ModeChoice, WaitError> {
    if !transit_rate.is_finite() || !mod_rate.is_finite() || transit_rate < 0.0 || mod_rate < 0.0 {
        return Err(WaitError::BadRate);
    }
    let total = transit_rate + mod_rate;
    if total <= 0.0 {
        return Err(WaitError::ZeroRate);
    }
    Ok(ModeChoice {
        p_mod: mod_rate / total,
        p_transit: transit_rate / total,
        expected_wait: 1.0 / total,
    })
}

/// Expected wait restricted to the event that option `i` arrives first,
/// `f_i / F^2`. These sum to `1/F`.
pub fn conditional_waits(rates: &[f64]) -> Result<Vec<f64>, WaitError> {
    let (_, ew) = line_choice_probabilities(rates)?;
    Ok(rates.iter().map(|r| r * ew * ew).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mod_wait_examples() {
        let p = MoDZoneParams { matching: 0.0017, vehicles: 100.0 };
        assert!((mod_wait_minutes(p).unwrap() - 5.882).abs() < 1e-3);
        assert!((p.rate() - 0.17).abs() < 1e-12);
        let sentinel = MoDZoneParams { matching: 0.0017, vehicles: 0.01 };
        assert!((mod_wait_minutes(sentinel).unwrap() - 58_823.53).abs() < 0.01);
        let doubled = MoDZoneParams { matching: 0.0017, vehicles: 200.0 };
        assert!((mod_wait_minutes(doubled).unwrap() * 2.0 - mod_wait_minutes(p).unwrap()).abs() < 1e-12);
        assert_eq!(
            mod_wait_minutes(MoDZoneParams { matching: 0.0017, vehicles: 0.0 }),
            Err(WaitError::ZeroRate)
        );
    }

    #[test]
    fn line_choice_examples() {
        let (p, ew) = line_choice_probabilities(&[1.0 / 6.0, 0.5]).unwrap();
        assert!((p[0] - 0.25).abs() < 1e-12 && (p[1] - 0.75).abs() < 1e-12);
        assert!((ew - 1.5).abs() < 1e-12);
        let (p, ew) = line_choice_probabilities(&[0.2]).unwrap();
        assert_eq!(p, vec![1.0]);
        assert!((ew - 5.0).abs() < 1e-12);
        let (p, _) = line_choice_probabilities(&[0.3, 0.3, 0.3]).unwrap();
        assert!(p.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-12));
        assert!(line_choice_probabilities(&[]).is_err());
    }

    #[test]
    fn mode_choice_examples() {
        let m = mode_choice_probabilities(8.0 / 12.0, 0.0017 * 100.0).unwrap();
        assert!((m.p_mod - 0.2).abs() < 0.005);
        assert!((m.p_mod + m.p_transit - 1.0).abs() < 1e-12);
        assert!((m.expected_wait - 1.0 / (8.0 / 12.0 + 0.17)).abs() < 1e-12);
        let m = mode_choice_probabilities(0.5, 0.0).unwrap();
        assert_eq!(m.p_transit, 1.0);
        assert!((m.expected_wait - 2.0).abs() < 1e-12);
        let m = mode_choice_probabilities(0.0, 0.25).unwrap();
        assert_eq!(m.p_mod, 1.0);
        assert!(mode_choice_probabilities(0.0, 0.0).is_err());
    }

    #[test]
    fn conditional_waits_sum_to_expected_wait() {
        let rates = [0.1, 0.25, 0.05];
        let total: f64 = conditional_waits(&rates).unwrap().iter().sum();
        assert!((total - 1.0 / 0.4).abs() < 1e-12);
    }
}
