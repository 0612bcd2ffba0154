//! Unit system and conversion factors.
//!
//! All internal quantities use μm (length), s (time) and N (force):
//! pressure in N/μm², flow in μm³/s, viscosity in N·s/μm². One N/μm²
//! equals 1e12 Pa, so physiological constants become very small numbers;
//! keeping the system consistent makes the material and power cost terms
//! land on the same N·μm/s (μW) scale.

/// 1 mmHg in N/μm² (133.322 Pa · 1e-12).
pub const MMHG: f64 = 1.33322e-10;

/// 1 ml/min in μm³/s (1e12 μm³ per ml, 60 s per min).
pub const ML_PER_MIN: f64 = 1e12 / 60.0;

/// 1 Pa·s in N·s/μm².
pub const PA_S: f64 = 1e-12;

/// 1 mm² in μm².
pub const MM2: f64 = 1e6;

pub fn mmhg_to_internal(p: f64) -> f64 {
    p * MMHG
}

pub fn internal_to_mmhg(p: f64) -> f64 {
    p / MMHG
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inlet_flow_in_internal_units() {
        // 7 ml/min is ~1.167e11 μm³/s.
        let q0 = 7.0 * ML_PER_MIN;
        assert!((q0 - 1.1667e11).abs() / 1.1667e11 < 1e-3);
    }

    #[test]
    fn viscosity_of_blood() {
        // 3.6e-3 Pa·s is 3.6e-15 N·s/μm².
        assert!((3.6e-3 * PA_S - 3.6e-15).abs() < 1e-25);
    }

    #[test]
    fn mmhg_round_trip() {
        let p = mmhg_to_internal(100.0);
        assert!((internal_to_mmhg(p) - 100.0).abs() < 1e-9);
    }
}
