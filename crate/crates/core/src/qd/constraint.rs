use super::EvalResult;

/// Time constraint: rewards finishing close to `t_ideal`, with losses
/// scaled by 0.25. A distance below one tick counts as one, so a perfect
/// win scores 1 and a perfect loss 0.25.
pub fn constraint_p(win: bool, t_win: f64, t_survival: f64, t_ideal: f64) -> f64 {
    let gap = |t: f64| (t - t_ideal).abs().max(1.0);
    if win {
        1.0 / gap(t_win)
    } else {
        0.25 / gap(t_survival)
    }
}

/// Idle constraint: 1 once at least half of the idle runs survive, else the
/// pass ratio.
pub fn constraint_e(n_pass: u32, n_total: u32) -> f64 {
    assert!(n_total >= 1 && n_pass <= n_total, "need 0 <= n_pass <= n_total and n_total >= 1");
    let ratio = n_pass as f64 / n_total as f64;
    if ratio >= 0.5 {
        1.0
    } else {
        ratio
    }
}

/// Feasible when the idle tests pass outright and the time score reaches
/// the threshold.
pub fn is_feasible(result: &EvalResult, threshold: f64) -> bool {
    result.e == 1.0 && result.p >= threshold
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_score_examples() {
        assert!((constraint_p(true, 80.0, 0.0, 70.0) - 0.1).abs() < 1e-12);
        assert!((constraint_p(true, 60.0, 0.0, 70.0) - 0.1).abs() < 1e-12);
        assert!((constraint_p(false, 0.0, 72.0, 70.0) - 0.125).abs() < 1e-12);
        assert_eq!(constraint_p(true, 70.0, 0.0, 70.0), 1.0);
        assert_eq!(constraint_p(false, 0.0, 70.0, 70.0), 0.25);
        assert_eq!(constraint_p(true, 70.5, 0.0, 70.0), 1.0);
    }

    #[test]
    fn idle_score_examples() {
        assert_eq!(constraint_e(3, 5), 1.0);
        assert_eq!(constraint_e(0, 5), 0.0);
        assert!((constraint_e(2, 5) - 0.4).abs() < 1e-12);
        assert_eq!(constraint_e(1, 2), 1.0);
    }

    #[test]
    #[should_panic]
    fn idle_score_rejects_zero_runs() {
        constraint_e(0, 0);
    }
}
