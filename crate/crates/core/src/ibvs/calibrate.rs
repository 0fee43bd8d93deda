use serde::Serialize;

use super::IbvsError;

/// Success rate measured at one candidate standoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationTrial {
    pub standoff: f64,
    pub side_px: f64,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub target_size_px: f64,
    pub standoff: f64,
    pub trials: Vec<CalibrationTrial>,
}

/// Picks the apparent tag size to servo to.
///
/// `trial` runs scripted grasps from a standoff distance and returns the
/// apparent tag side there and the success rate. The candidate with the
/// highest rate wins; ties go to the nearest (smallest) standoff. A single
/// candidate is returned without running any trial.
pub fn calibrate_target_size<F>(standoffs: &[f64], mut trial: F) -> Result<Calibration, IbvsError>
where
    F: FnMut(f64) -> (f64, f64),
{
    if standoffs.is_empty() || standoffs.iter().any(|d| !(*d > 0.0)) {
        return Err(IbvsError::InvalidConfig("standoffs must be non-empty and positive".into()));
    }
    let mut trials: Vec<CalibrationTrial> = standoffs
        .iter()
        .map(|&standoff| {
            let (side_px, success_rate) = trial(standoff);
            CalibrationTrial { standoff, side_px, success_rate }
        })
        .collect();
    if trials.len() > 1 && trials.iter().all(|t| t.success_rate == 0.0) {
        return Err(IbvsError::CalibrationFailed);
    }
    trials.sort_by(|a, b| a.standoff.total_cmp(&b.standoff));
    let best = trials
        .iter()
        .fold(None::<&CalibrationTrial>, |best, t| match best {
            Some(b) if b.success_rate >= t.success_rate => Some(b),
            _ => Some(t),
        })
        .expect("non-empty");
    Ok(Calibration { target_size_px: best.side_px, standoff: best.standoff, trials: trials.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn side(d: f64) -> f64 {
        50.0 / d
    }

    #[test]
    fn picks_best_standoff() {
        let c = calibrate_target_size(&[0.4, 0.5, 0.6], |d| {
            (side(d), if (d - 0.5).abs() < 1e-9 { 1.0 } else { 0.2 })
        })
        .unwrap();
        assert_eq!(c.standoff, 0.5);
        assert_eq!(c.target_size_px, 100.0);
    }

    #[test]
    fn ties_go_to_nearest() {
        let c = calibrate_target_size(&[0.6, 0.4, 0.5], |d| (side(d), 0.8)).unwrap();
        assert_eq!(c.standoff, 0.4);
    }

    #[test]
    fn single_candidate_unconditional() {
        let c = calibrate_target_size(&[0.7], |d| (side(d), 0.0)).unwrap();
        assert_eq!(c.standoff, 0.7);
    }

    #[test]
    fn all_failures_is_an_error() {
        assert_eq!(calibrate_target_size(&[0.4, 0.5], |d| (side(d), 0.0)), Err(IbvsError::CalibrationFailed));
        assert!(calibrate_target_size(&[], |d| (side(d), 1.0)).is_err());
    }
}
