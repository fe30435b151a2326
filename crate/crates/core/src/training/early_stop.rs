#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop,
}

/// Patience-based early stopping on a lower-is-better metric.
///
/// The state starts from a baseline (the metric and parameters before any
/// training), so a run that never improves returns the baseline.
#[derive(Clone, Debug)]
pub struct EarlyStopState<T> {
    patience: usize,
    best_metric: f64,
    epochs_since_best: usize,
    updates: usize,
    best_update: usize,
    best: T,
}

impl<T> EarlyStopState<T> {
    pub fn new(patience: usize, baseline_metric: f64, baseline: T) -> Self {
        EarlyStopState {
            patience,
            best_metric: baseline_metric,
            epochs_since_best: 0,
            updates: 0,
            best_update: 0,
            best: baseline,
        }
    }

    pub fn patience(&self) -> usize {
        self.patience
    }

    pub fn best_metric(&self) -> f64 {
        self.best_metric
    }

    pub fn epochs_since_best(&self) -> usize {
        self.epochs_since_best
    }

    /// Number of updates seen when the best snapshot was taken (0 = baseline).
    pub fn best_update(&self) -> usize {
        self.best_update
    }

    pub fn best(&self) -> &T {
        &self.best
    }

    pub fn into_best(self) -> T {
        self.best
    }

    /// True once patience is exhausted, including the degenerate patience 0.
    pub fn should_stop(&self) -> bool {
        self.epochs_since_best >= self.patience
    }

    /// Records one epoch's metric. `snapshot` is only called on improvement.
    pub fn update(&mut self, metric: f64, snapshot: impl FnOnce() -> T) -> StopDecision {
        self.updates += 1;
        if metric < self.best_metric {
            self.best_metric = metric;
            self.best = snapshot();
            self.best_update = self.updates;
            self.epochs_since_best = 0;
        } else {
            self.epochs_since_best += 1;
        }
        if self.should_stop() {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decreasing_metric_never_stops() {
        let mut state = EarlyStopState::new(35, f64::INFINITY, 0usize);
        for i in 0..100 {
            let d = state.update(100.0 - i as f64, || i);
            assert_eq!(d, StopDecision::Continue);
        }
        assert_eq!(*state.best(), 99);
    }

    #[test]
    fn constant_metric_stops_after_patience() {
        let mut state = EarlyStopState::new(35, 0.5, "baseline");
        let mut stopped_at = None;
        for i in 1..=100 {
            if state.update(0.5, || "later") == StopDecision::Stop {
                stopped_at = Some(i);
                break;
            }
        }
        assert_eq!(stopped_at, Some(35));
        assert_eq!(state.into_best(), "baseline");
    }

    #[test]
    fn improvement_resets_counter() {
        let mut state = EarlyStopState::new(35, 1.0, 0);
        for _ in 0..34 {
            assert_eq!(state.update(1.0, || 1), StopDecision::Continue);
        }
        assert_eq!(state.epochs_since_best(), 34);
        state.update(0.9, || 2);
        assert_eq!(state.epochs_since_best(), 0);
        assert_eq!(*state.best(), 2);
    }

    #[test]
    fn returns_minimum_not_last() {
        let mut state = EarlyStopState::new(3, f64::INFINITY, 0);
        let stream = [0.5, 0.3, 0.4, 0.35, 0.31];
        let mut last = StopDecision::Continue;
        for (i, &m) in stream.iter().enumerate() {
            last = state.update(m, || i + 1);
        }
        assert_eq!(last, StopDecision::Stop);
        assert_eq!(*state.best(), 2);
        assert_eq!(state.best_metric(), 0.3);
        assert_eq!(state.best_update(), 2);
    }

    #[test]
    fn zero_patience_stops_immediately() {
        let state = EarlyStopState::new(0, 1.0, ());
        assert!(state.should_stop());
    }
}
