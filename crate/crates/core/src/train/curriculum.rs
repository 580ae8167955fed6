//! Success-rate driven noise and residual-scale curriculum.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurriculumConfig {
    /// Noise level at the end of the curriculum, mm (and degrees).
    pub n_max: f64,
    pub step: f64,
    /// Episodes per evaluation window.
    pub window: usize,
    /// Raise the level when the window's success rate is above this.
    pub raise_above: f64,
    /// Lower the level when the window's success rate is below this.
    pub lower_below: f64,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            n_max: 5.0,
            step: 0.1,
            window: 100,
            raise_above: 0.75,
            lower_below: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurriculumState {
    pub n: f64,
    pub n_max: f64,
    pub step: f64,
    pub window_size: usize,
    pub raise_above: f64,
    pub lower_below: f64,
    pub window: VecDeque<bool>,
}

impl CurriculumState {
    pub fn new(cfg: &CurriculumConfig, n: f64) -> Self {
        Self {
            n: n.clamp(0.0, cfg.n_max),
            n_max: cfg.n_max,
            step: cfg.step,
            window_size: cfg.window,
            raise_above: cfg.raise_above,
            lower_below: cfg.lower_below,
            window: VecDeque::with_capacity(cfg.window),
        }
    }

    /// Residual scale tied to the noise level.
    pub fn beta(&self) -> f64 {
        if self.n_max > 0.0 {
            self.n / self.n_max
        } else {
            1.0
        }
    }

    /// Adds an episode outcome, keeping the most recent `window_size`, and
    /// applies [`curriculum_update`] once the window is full. Returns whether
    /// the level changed.
    pub fn record(&mut self, success: bool) -> bool {
        if self.window.len() == self.window_size {
            self.window.pop_front();
        }
        self.window.push_back(success);
        if self.window.len() < self.window_size {
            return false;
        }
        let before = self.n;
        *self = curriculum_update(self);
        self.n != before
    }
}

/// Moves the level one step up above the raise threshold, one step down below
/// the lower threshold, clamped to `[0, n_max]`; clears the window after a
/// change of level.
pub fn curriculum_update(state: &CurriculumState) -> CurriculumState {
    let mut next = state.clone();
    if state.window.is_empty() {
        return next;
    }
    let rate = state.window.iter().filter(|&&s| s).count() as f64 / state.window.len() as f64;
    // Levels within rounding of a bound snap to it, so repeated steps reach
    // 0 and n_max exactly.
    let eps = 1e-9 * state.step;
    let target = if rate > state.raise_above {
        let up = state.n + state.step;
        if up >= state.n_max - eps {
            state.n_max
        } else {
            up
        }
    } else if rate < state.lower_below {
        let down = state.n - state.step;
        if down <= eps {
            0.0
        } else {
            down
        }
    } else {
        state.n
    };
    if target != state.n {
        next.n = target;
        next.window.clear();
    }
    next
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(n: f64, outcomes: &[bool]) -> CurriculumState {
        let mut s = CurriculumState::new(&CurriculumConfig::default(), n);
        s.window = outcomes.iter().copied().collect();
        s
    }

    fn window(successes: usize) -> Vec<bool> {
        (0..100).map(|i| i < successes).collect()
    }

    #[test]
    fn raise_lower_and_hold() {
        let up = curriculum_update(&state(1.0, &window(80)));
        assert_eq!(up.n, 1.1);
        assert_eq!(up.beta(), 1.1 / 5.0);
        assert!(up.window.is_empty());
        assert_eq!(curriculum_update(&state(1.0, &window(40))).n, 0.9);
        let hold = curriculum_update(&state(1.0, &window(60)));
        assert_eq!(hold.n, 1.0);
        assert_eq!(hold.window.len(), 100);
        // Thresholds are strict.
        assert_eq!(curriculum_update(&state(1.0, &window(75))).n, 1.0);
        assert_eq!(curriculum_update(&state(1.0, &window(50))).n, 1.0);
    }

    #[test]
    fn clamps_at_both_ends() {
        let top = curriculum_update(&state(5.0, &window(100)));
        assert_eq!((top.n, top.beta()), (5.0, 1.0));
        assert_eq!(curriculum_update(&state(4.95, &window(100))).n, 5.0);
        let bottom = curriculum_update(&state(0.0, &window(0)));
        assert_eq!((bottom.n, bottom.beta()), (0.0, 0.0));
        assert_eq!(curriculum_update(&state(0.05, &window(10))).n, 0.0);
    }

    #[test]
    fn repeated_steps_reach_the_bounds_exactly() {
        let mut s = state(0.0, &[]);
        let mut changes = 0;
        while s.n < s.n_max {
            s.window = window(100).into();
            s = curriculum_update(&s);
            changes += 1;
        }
        assert_eq!((changes, s.n, s.beta()), (50, 5.0, 1.0));
        while s.n > 0.0 {
            s.window = window(0).into();
            s = curriculum_update(&s);
            changes += 1;
        }
        assert_eq!((changes, s.n), (100, 0.0));
    }

    /// Independent replay of the same rule over a recorded outcome stream,
    /// counting integer levels of 0.1 mm.
    fn replay(outcomes: &[bool], w: usize) -> Vec<i64> {
        let mut level = 0i64;
        let mut buf: Vec<bool> = Vec::new();
        let mut trace = Vec::new();
        for &o in outcomes {
            buf.push(o);
            if buf.len() > w {
                buf.remove(0);
            }
            if buf.len() == w {
                let k = buf.iter().filter(|&&x| x).count();
                let new = if 4 * k > 3 * w {
                    (level + 1).min(50)
                } else if 2 * k < w {
                    (level - 1).max(0)
                } else {
                    level
                };
                if new != level {
                    level = new;
                    buf.clear();
                }
            }
            trace.push(level);
        }
        trace
    }

    #[test]
    fn recorded_streams_replay_exactly() {
        let cfg = CurriculumConfig {
            window: 10,
            ..CurriculumConfig::default()
        };
        // Long success streak (hits the ceiling), then a failure streak (hits the floor).
        let mut outcomes = vec![true; 10 * 60];
        outcomes.extend(vec![false; 10 * 60]);
        outcomes.extend((0..300).map(|i| i % 3 != 0));
        outcomes.extend((0..300).map(|i| (i * 7) % 5 < 2));
        let mut s = CurriculumState::new(&cfg, 0.0);
        let want = replay(&outcomes, 10);
        for (&o, &level) in outcomes.iter().zip(&want) {
            s.record(o);
            assert!((s.n - level as f64 / 10.0).abs() < 1e-12, "{} vs level {level}", s.n);
            assert_eq!(s.beta(), s.n / 5.0);
            if level == 0 || level == 50 {
                assert_eq!(s.n, level as f64 / 10.0);
            }
        }
        assert!(want.contains(&50));
        assert!(want[10 * 60..].contains(&0));
    }

    #[test]
    fn all_success_windows_never_lower_noise() {
        let mut s = CurriculumState::new(&CurriculumConfig::default(), 0.0);
        let mut last = s.n;
        for _ in 0..10_000 {
            s.record(true);
            assert!(s.n >= last);
            last = s.n;
        }
        assert_eq!(s.n, 5.0);
    }
}
