//! Membrane rupture hysteresis.
//!
//! Loading past the rupture threshold softens stiffness to `puncture_drop`
//! for `puncture_window_ms`, then stiffness returns to full along a C1
//! smoothstep. A new rupture is only possible after the tool has been
//! unloaded, i.e. the normal load fell below the ruptured material's
//! `sigmoid_width` on the intact branch. Layered tissue can be softer below
//! a membrane, so a partial unload is not treated as a new insertion.

use super::material::HapticMaterial;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PuncturePhase {
    /// `armed` is false after a recovery until the load is released.
    Intact { armed: bool },
    /// Time since the rupture, ms. Covers the descent and the held drop.
    Ruptured { elapsed_ms: f64 },
    /// Fraction of the recovery ramp completed, in `[0, 1)`.
    Recovering { progress: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PunctureState {
    pub phase: PuncturePhase,
    /// Stiffness multiplier applied on the next tick, in `[puncture_drop, 1]`.
    pub modifier: f64,
    pub ruptures: u32,
    /// Load below which a disarmed state re-arms, N.
    pub rearm_below: f64,
}

impl Default for PunctureState {
    fn default() -> Self {
        Self {
            phase: PuncturePhase::Intact { armed: true },
            modifier: 1.0,
            ruptures: 0,
            rearm_below: 0.0,
        }
    }
}

impl PunctureState {
    pub fn is_intact(&self) -> bool {
        matches!(self.phase, PuncturePhase::Intact { .. })
    }
}

/// C1 cubic step: 0 at 0, 1 at 1, zero slope at both ends.
pub fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Logistic weight of the load relative to the rupture threshold.
pub fn rupture_drive(f_n: f64, mat: &HapticMaterial) -> f64 {
    1.0 / (1.0 + (-(f_n - mat.f_thresh) / mat.sigmoid_width).exp())
}

/// Largest modifier change the schedule can make in one step of `dt_ms`.
pub fn max_modifier_step(mat: &HapticMaterial, dt_ms: f64) -> f64 {
    // Max slope of smoothstep is 1.5.
    let span = 1.0 - mat.puncture_drop;
    let onset = if mat.rupture_onset_ms > 0.0 {
        1.5 * dt_ms / mat.rupture_onset_ms
    } else {
        1.0
    };
    let recovery = 1.5 * dt_ms / mat.recovery_ms;
    span * onset.max(recovery).min(1.0)
}

fn ruptured_modifier(elapsed_ms: f64, mat: &HapticMaterial) -> f64 {
    let span = 1.0 - mat.puncture_drop;
    if elapsed_ms < mat.rupture_onset_ms {
        1.0 - span * smoothstep(elapsed_ms / mat.rupture_onset_ms)
    } else {
        mat.puncture_drop
    }
}

/// Advances the hysteresis by `dt_ms` given this tick's normal load.
/// Returns the new state and whether a rupture happened on this tick.
pub fn puncture_update(
    state: &PunctureState,
    f_n: f64,
    mat: &HapticMaterial,
    dt_ms: f64,
) -> (PunctureState, bool) {
    let hold_end = mat.rupture_onset_ms + mat.puncture_window_ms;
    let mut next = *state;
    let mut ruptured = false;
    match state.phase {
        PuncturePhase::Intact { armed } => {
            if armed && rupture_drive(f_n, mat) > 0.5 {
                ruptured = true;
                next.ruptures += 1;
                next.rearm_below = mat.sigmoid_width.min(mat.f_thresh - mat.sigmoid_width);
                next.phase = PuncturePhase::Ruptured { elapsed_ms: dt_ms };
                next.modifier = ruptured_modifier(dt_ms, mat);
            } else {
                let rearm = armed || f_n < state.rearm_below;
                next.phase = PuncturePhase::Intact { armed: rearm };
                next.modifier = 1.0;
            }
        }
        PuncturePhase::Ruptured { elapsed_ms } => {
            let elapsed = elapsed_ms + dt_ms;
            if elapsed <= hold_end {
                next.phase = PuncturePhase::Ruptured { elapsed_ms: elapsed };
                next.modifier = ruptured_modifier(elapsed, mat);
            } else {
                let progress = (elapsed - hold_end) / mat.recovery_ms;
                next = recovering(next, progress, mat);
            }
        }
        PuncturePhase::Recovering { progress } => {
            next = recovering(next, progress + dt_ms / mat.recovery_ms, mat);
        }
    }
    if next.modifier < mat.puncture_drop {
        next.modifier = mat.puncture_drop;
    }
    (next, ruptured)
}

fn recovering(mut s: PunctureState, progress: f64, mat: &HapticMaterial) -> PunctureState {
    if progress >= 1.0 {
        s.phase = PuncturePhase::Intact { armed: false };
        s.modifier = 1.0;
    } else {
        s.phase = PuncturePhase::Recovering { progress };
        s.modifier = mat.puncture_drop + (1.0 - mat.puncture_drop) * smoothstep(progress);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(loads: impl IntoIterator<Item = f64>, mat: &HapticMaterial) -> (Vec<f64>, u32) {
        let mut s = PunctureState::default();
        let mut mods = vec![s.modifier];
        let mut events = 0;
        for f in loads {
            let (n, ev) = puncture_update(&s, f, mat, 1.0);
            events += ev as u32;
            s = n;
            mods.push(s.modifier);
        }
        (mods, events)
    }

    #[test]
    fn stays_intact_below_threshold() {
        let mat = HapticMaterial::default();
        let (mods, events) = run((0..500).map(|i| 0.5 * (i as f64 / 500.0)), &mat);
        assert_eq!(events, 0);
        assert!(mods.iter().all(|m| *m == 1.0));
    }

    #[test]
    fn step_load_holds_drop_for_window() {
        let mat = HapticMaterial::default();
        let (mods, events) = run(std::iter::repeat(mat.f_thresh + 0.5).take(400), &mat);
        assert_eq!(events, 1);
        let held: Vec<usize> = (0..mods.len()).filter(|&i| mods[i] == 0.5).collect();
        let first = *held.first().unwrap();
        let last = *held.last().unwrap();
        assert_eq!(held.len(), last - first + 1, "plateau is contiguous");
        assert_eq!((last - first) as f64, mat.puncture_window_ms);
        assert_eq!(*mods.last().unwrap(), 1.0);
    }

    #[test]
    fn load_cycle_is_continuous() {
        let mat = HapticMaterial::default();
        // Ramp up past threshold, hold, then unload.
        let loads = (0..300)
            .map(|i| 2.0 * i as f64 / 300.0)
            .chain(std::iter::repeat(2.0).take(300))
            .chain((0..300).map(|i| 2.0 * (1.0 - i as f64 / 300.0)));
        let (mods, events) = run(loads, &mat);
        assert_eq!(events, 1);
        // Independent finite-difference bound: smoothstep slope <= 1.5.
        let bound = 0.5 * 1.5 / mat.rupture_onset_ms;
        let worst = mods.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        assert!(worst <= bound + 1e-12, "{worst} > {bound}");
        assert!(worst <= max_modifier_step(&mat, 1.0) + 1e-12);
        assert!(mods.iter().all(|m| *m >= mat.puncture_drop && *m <= 1.0));
    }

    #[test]
    fn rearms_only_after_unloading() {
        let mat = HapticMaterial::default();
        let high = mat.f_thresh + 0.3;
        let mut loads: Vec<f64> = vec![high; 600];
        let (_, events) = run(loads.iter().copied(), &mat);
        assert_eq!(events, 1, "sustained load ruptures once");
        loads.extend(std::iter::repeat(0.0).take(5));
        loads.extend(std::iter::repeat(high).take(10));
        let (_, events) = run(loads, &mat);
        assert_eq!(events, 2, "release and reload ruptures again");
    }

    #[test]
    fn rearm_level_follows_ruptured_material() {
        let thin = HapticMaterial::membrane();
        let tough = HapticMaterial {
            f_thresh: 3.0,
            ..HapticMaterial::default()
        };
        let mut s = PunctureState::default();
        let (n, ev) = puncture_update(&s, thin.f_thresh + 0.2, &thin, 1.0);
        assert!(ev);
        s = n;
        // Deeper layer with a higher threshold carries a moderate load
        // through the whole recovery.
        for _ in 0..400 {
            s = puncture_update(&s, 1.5, &tough, 1.0).0;
        }
        assert_eq!(s.phase, PuncturePhase::Intact { armed: false });
        // Partial unload, then back in the thin layer above its threshold:
        // still disarmed.
        let (s, _) = puncture_update(&s, 0.5, &tough, 1.0);
        let (s, ev) = puncture_update(&s, thin.f_thresh + 0.2, &thin, 1.0);
        assert!(!ev);
        let (s, _) = puncture_update(&s, 0.0, &thin, 1.0);
        assert_eq!(s.phase, PuncturePhase::Intact { armed: true });
    }

    #[test]
    fn smoothstep_endpoints() {
        assert_eq!(smoothstep(0.0), 0.0);
        assert_eq!(smoothstep(1.0), 1.0);
        assert_eq!(smoothstep(0.5), 0.5);
        assert!((rupture_drive(1.2, &HapticMaterial::default()) - 0.5).abs() < 1e-15);
    }
}
