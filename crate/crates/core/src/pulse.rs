//! Flux waveforms, conditional-phase integration along them, and CZ gate
//! calibration.
//!
//! Phases follow the rotating frame of the idle point: the conditional phase
//! is phi = integral of 4 * (2 pi g_zz) dt (positive when both qubits are
//! biased away from half flux), while the single-qubit phases are the
//! physical e^{-i w t} frame phases zeta_i = -integral of
//! 2 pi (f01_i(t) - f01_i(idle)) dt, negative for excursions since the
//! fluxonium frequency rises away from its sweet spot.

use nalgebra::{Complex, DMatrix};
use rayon::prelude::*;
use serde::Serialize;

use crate::coupled::{coupling_strengths_simplified, CoupledEvaluator, CoupledSystem};
use crate::error::{Error, Result};
use crate::quad::{adaptive_simpson, fixed_simpson};
use crate::qubit::{fit_two_level, TwoLevelParams};
use crate::units::{phase_rad, wrap_phase, TAU};

type C64 = Complex<f64>;

/// Absolute quadrature tolerance for conditional-phase integrals, rad.
pub const PHASE_QUAD_TOL: f64 = 1e-5;
/// Minimum samples per modulation period for sinusoidal integrands.
pub const MIN_SAMPLES_PER_PERIOD: usize = 40;
/// Companion-amplitude search range for CZ calibration, flux quanta.
pub const CALIBRATION_AMP_MAX: f64 = 0.15;
/// Default tanh rise time for square pulses, ns.
pub const DEFAULT_RISE_TIME: f64 = 2.0;
/// Default two-level fit window used when the simplified model needs
/// (Delta, I_p), flux quanta.
const SIMPLIFIED_FIT_HALF_WIDTH: f64 = 0.05;

/// Waveform shapes for the per-qubit external flux.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PulseKind {
    Constant,
    SquareTanh,
    NetZero,
    Sinusoidal,
}

/// A per-qubit time-dependent external flux waveform, in flux quanta.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FluxPulse {
    pub kind: PulseKind,
    /// Flux offset the pulse starts from (the idle point, usually 0.5).
    pub base: f64,
    /// Pulse amplitude delta-Phi in flux quanta.
    pub amplitude: f64,
    /// Duration tau in ns.
    pub duration: f64,
    /// Tanh rise time in ns (square_tanh only).
    pub rise_time: f64,
    /// Modulation frequency omega_m / 2 pi in GHz (sinusoidal only).
    pub mod_freq: f64,
    /// Modulation phase in rad (sinusoidal only); the default 0 gives
    /// sin(omega_m t), which starts and ends at `base` over integer periods.
    pub phase: f64,
}

impl FluxPulse {
    pub fn constant(base: f64, duration: f64) -> Result<Self> {
        Self::build(PulseKind::Constant, base, 0.0, duration, 0.0, 0.0, 0.0)
    }

    pub fn square_tanh(base: f64, amplitude: f64, duration: f64, rise_time: f64) -> Result<Self> {
        if !(rise_time > 0.0) {
            return Err(Error::ParameterDomain("rise time must be positive".into()));
        }
        Self::build(PulseKind::SquareTanh, base, amplitude, duration, rise_time, 0.0, 0.0)
    }

    pub fn net_zero(base: f64, amplitude: f64, duration: f64) -> Result<Self> {
        Self::build(PulseKind::NetZero, base, amplitude, duration, 0.0, 0.0, 0.0)
    }

    pub fn sinusoidal(base: f64, amplitude: f64, duration: f64, mod_freq: f64, phase: f64) -> Result<Self> {
        if !(mod_freq > 0.0) {
            return Err(Error::ParameterDomain(
                "sinusoidal modulation frequency must be positive".into(),
            ));
        }
        Self::build(PulseKind::Sinusoidal, base, amplitude, duration, 0.0, mod_freq, phase)
    }

    fn build(
        kind: PulseKind,
        base: f64,
        amplitude: f64,
        duration: f64,
        rise_time: f64,
        mod_freq: f64,
        phase: f64,
    ) -> Result<Self> {
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(Error::ParameterDomain(format!(
                "pulse duration must be positive and finite, got {duration}"
            )));
        }
        if !base.is_finite() || !amplitude.is_finite() {
            return Err(Error::ParameterDomain("non-finite pulse parameters".into()));
        }
        Ok(Self { kind, base, amplitude, duration, rise_time, mod_freq, phase })
    }

    /// True when the duration is an integer number of modulation periods
    /// (sinusoidal decoupling is only effective there). Non-sinusoidal
    /// pulses trivially satisfy this.
    pub fn integer_periods(&self) -> bool {
        if self.kind != PulseKind::Sinusoidal {
            return true;
        }
        let periods = self.mod_freq * self.duration;
        (periods - periods.round()).abs() < 1e-9 * periods.max(1.0)
    }
}

/// Flux value of a pulse at time t in [0, duration].
pub fn sample_pulse(p: &FluxPulse, t: f64) -> Result<f64> {
    if !(0.0..=p.duration).contains(&t) {
        return Err(Error::OutOfRange(format!(
            "sample time {t} outside [0, {}]",
            p.duration
        )));
    }
    Ok(match p.kind {
        PulseKind::Constant => p.base,
        PulseKind::SquareTanh => {
            let env = (t / p.rise_time).tanh() * ((p.duration - t) / p.rise_time).tanh();
            p.base - p.amplitude * env
        }
        PulseKind::NetZero => {
            if t < 0.5 * p.duration {
                p.base - p.amplitude
            } else {
                p.base + p.amplitude
            }
        }
        PulseKind::Sinusoidal => p.base - p.amplitude * (TAU * p.mod_freq * t + p.phase).sin(),
    })
}

/// A simultaneous two-qubit flux schedule: shared pulse duration t_cz plus
/// an appended idle at the base point.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GateSchedule {
    pub pulse_a: FluxPulse,
    pub pulse_b: FluxPulse,
    pub t_cz: f64,
    pub t_idle: f64,
}

impl GateSchedule {
    pub fn new(pulse_a: FluxPulse, pulse_b: FluxPulse, t_idle: f64) -> Result<Self> {
        if (pulse_a.duration - pulse_b.duration).abs() > 1e-12 {
            return Err(Error::ParameterDomain(format!(
                "pulses must share one duration, got {} and {}",
                pulse_a.duration, pulse_b.duration
            )));
        }
        if !(t_idle >= 0.0) {
            return Err(Error::ParameterDomain("t_idle must be non-negative".into()));
        }
        Ok(Self { pulse_a, pulse_b, t_cz: pulse_a.duration, t_idle })
    }
}

/// Which g_zz enters phase integrals: the exact dressed-state ZZ shift or
/// the fitted two-level model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PhaseModel {
    Full,
    Simplified,
}

/// Calibrated CZ gate quantities.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CZResult {
    /// Conditional phase in rad (unwrapped; pi at calibration).
    pub phi: f64,
    /// Single-qubit phases in rad accumulated over the schedule.
    pub zeta_a: f64,
    pub zeta_b: f64,
    /// Calibrated companion amplitude on qubit B, flux quanta.
    pub delta_phi_b: f64,
}

struct SimplifiedModel {
    tlp_a: TwoLevelParams,
    tlp_b: TwoLevelParams,
    j_eff: f64,
}

fn simplified_model(sys: &CoupledSystem) -> Result<SimplifiedModel> {
    let tlp_a = fit_two_level(&sys.qubit_a, SIMPLIFIED_FIT_HALF_WIDTH, sys.n_basis)?;
    let tlp_b = fit_two_level(&sys.qubit_b, SIMPLIFIED_FIT_HALF_WIDTH, sys.n_basis)?;
    let j_eff = crate::coupled::effective_j(sys, &tlp_a, &tlp_b);
    Ok(SimplifiedModel { tlp_a, tlp_b, j_eff })
}

fn min_panels(sched: &GateSchedule) -> usize {
    let mut panels = 8usize;
    for p in [&sched.pulse_a, &sched.pulse_b] {
        match p.kind {
            PulseKind::Sinusoidal => {
                let periods = (p.mod_freq * sched.t_cz).ceil().max(1.0) as usize;
                // progressive midpoint evaluation in the adaptive pass gives
                // >= MIN_SAMPLES_PER_PERIOD samples per period
                panels = panels.max(periods * MIN_SAMPLES_PER_PERIOD / 4);
            }
            PulseKind::SquareTanh | PulseKind::NetZero => panels = panels.max(32),
            PulseKind::Constant => {}
        }
    }
    panels
}

/// The instantaneous 4 * 2 pi * g_zz in rad/ns along the schedule.
fn zz_rate_at(
    sched: &GateSchedule,
    model: PhaseModel,
    simp: Option<&SimplifiedModel>,
    cache: &mut CoupledEvaluator,
    t: f64,
) -> Result<f64> {
    let fa = sample_pulse(&sched.pulse_a, t)?;
    let fb = sample_pulse(&sched.pulse_b, t)?;
    let g_zz = match model {
        PhaseModel::Full => cache.zeta(fa, fb)? / 4.0,
        PhaseModel::Simplified => {
            let m = simp.expect("simplified model prepared");
            coupling_strengths_simplified(&m.tlp_a, &m.tlp_b, m.j_eff, fa, fb).g_zz
        }
    };
    Ok(4.0 * TAU * g_zz)
}

fn conditional_phase_cached(
    sys: &CoupledSystem,
    sched: &GateSchedule,
    model: PhaseModel,
    cache: &mut CoupledEvaluator,
) -> Result<f64> {
    let simp = match model {
        PhaseModel::Simplified => Some(simplified_model(sys)?),
        PhaseModel::Full => None,
    };
    let mut f = |t: f64| zz_rate_at(sched, model, simp.as_ref(), cache, t);
    let pulse_part = adaptive_simpson(&mut f, 0.0, sched.t_cz, PHASE_QUAD_TOL, min_panels(sched))?;
    let idle_rate = match model {
        PhaseModel::Full => {
            let base_a = sched.pulse_a.base;
            let base_b = sched.pulse_b.base;
            4.0 * TAU * cache.zeta(base_a, base_b)? / 4.0
        }
        // the simplified g_zz vanishes identically at the idle point
        PhaseModel::Simplified => 0.0,
    };
    Ok(pulse_part + sched.t_idle * idle_rate)
}

/// Conditional phase phi accumulated over the schedule, in rad (unwrapped):
/// the integral of 4 * (2 pi g_zz(Phi_A(t), Phi_B(t))) over the pulse, plus
/// the idle segment at the residual-ZZ rate.
pub fn conditional_phase(sys: &CoupledSystem, sched: &GateSchedule, model: PhaseModel) -> Result<f64> {
    let mut cache = CoupledEvaluator::new(sys);
    conditional_phase_cached(sys, sched, model, &mut cache)
}

/// Independent re-verification path: fixed-step Simpson at the given panel
/// count, no adaptivity, fresh evaluator.
pub fn conditional_phase_fixed_step(
    sys: &CoupledSystem,
    sched: &GateSchedule,
    model: PhaseModel,
    panels: usize,
) -> Result<f64> {
    let mut cache = CoupledEvaluator::new(sys);
    let simp = match model {
        PhaseModel::Simplified => Some(simplified_model(sys)?),
        PhaseModel::Full => None,
    };
    let mut f = |t: f64| zz_rate_at(sched, model, simp.as_ref(), &mut cache, t);
    let pulse_part = fixed_simpson(&mut f, 0.0, sched.t_cz, panels)?;
    let idle_rate = match model {
        PhaseModel::Full => TAU * cache.zeta(sched.pulse_a.base, sched.pulse_b.base)?,
        PhaseModel::Simplified => 0.0,
    };
    Ok(pulse_part + sched.t_idle * idle_rate)
}

/// Single-qubit phases (zeta_A, zeta_B) in rad over the schedule, in the
/// rotating frame of the idle-point frequencies:
/// zeta_i = -int 2 pi (f01_i(t) - f01_i(idle)) dt over t_cz. The full model
/// uses dressed frequencies conditioned on the partner in its ground state.
pub fn single_qubit_phases(
    sys: &CoupledSystem,
    sched: &GateSchedule,
    model: PhaseModel,
) -> Result<(f64, f64)> {
    let mut cache = CoupledEvaluator::new(sys);
    single_qubit_phases_cached(sys, sched, model, &mut cache)
}

fn single_qubit_phases_cached(
    sys: &CoupledSystem,
    sched: &GateSchedule,
    model: PhaseModel,
    cache: &mut CoupledEvaluator,
) -> Result<(f64, f64)> {
    let simp = match model {
        PhaseModel::Simplified => Some(simplified_model(sys)?),
        PhaseModel::Full => None,
    };
    let mut out = [0.0; 2];
    for which in 0..2 {
        let f_idle = match model {
            PhaseModel::Full => {
                cache.f01_given_partner_ground(which, sched.pulse_a.base, sched.pulse_b.base)?
            }
            PhaseModel::Simplified => {
                let m = simp.as_ref().unwrap();
                let tlp = if which == 0 { &m.tlp_a } else { &m.tlp_b };
                let base = if which == 0 { sched.pulse_a.base } else { sched.pulse_b.base };
                tlp.f01(base)
            }
        };
        let mut f = |t: f64| -> Result<f64> {
            let fa = sample_pulse(&sched.pulse_a, t)?;
            let fb = sample_pulse(&sched.pulse_b, t)?;
            let f01 = match model {
                PhaseModel::Full => cache.f01_given_partner_ground(which, fa, fb)?,
                PhaseModel::Simplified => {
                    let m = simp.as_ref().unwrap();
                    let tlp = if which == 0 { &m.tlp_a } else { &m.tlp_b };
                    tlp.f01(if which == 0 { fa } else { fb })
                }
            };
            Ok(-TAU * (f01 - f_idle))
        };
        out[which] = adaptive_simpson(&mut f, 0.0, sched.t_cz, PHASE_QUAD_TOL, min_panels(sched))?;
    }
    Ok((out[0], out[1]))
}

/// Calibrate the companion amplitude delta_Phi_B of a sinusoidal CZ gate so
/// that the conditional phase reaches pi: bracket scan over (0, 0.15],
/// bisection to a 1e-3 bracket, then secant to |phi - pi| <= 1e-6 rad.
///
/// For sinusoidal schedules t_cz should be an integer number of modulation
/// periods; violations are tolerated (exploration) but the decoupling and
/// phase identities only hold at integer periods.
pub fn calibrate_cz(
    sys: &CoupledSystem,
    delta_phi_a: f64,
    omega_m: f64,
    t_cz: f64,
    t_idle: f64,
    model: PhaseModel,
) -> Result<CZResult> {
    if !(delta_phi_a > 0.0 && delta_phi_a <= CALIBRATION_AMP_MAX) {
        return Err(Error::ParameterDomain(format!(
            "delta_phi_a = {delta_phi_a} outside (0, {CALIBRATION_AMP_MAX}]"
        )));
    }
    let mut cache = CoupledEvaluator::new(sys);
    let sched_for = |amp_b: f64| -> Result<GateSchedule> {
        GateSchedule::new(
            FluxPulse::sinusoidal(0.5, delta_phi_a, t_cz, omega_m, 0.0)?,
            FluxPulse::sinusoidal(0.5, amp_b, t_cz, omega_m, 0.0)?,
            t_idle,
        )
    };
    let phi_of = |amp_b: f64, cache: &mut CoupledEvaluator| -> Result<f64> {
        conditional_phase_cached(sys, &sched_for(amp_b)?, model, cache)
    };

    // Bracket scan; phi is monotone increasing in the companion amplitude on
    // the physical branch (asserted as we go).
    const SCAN: usize = 15;
    let target = std::f64::consts::PI;
    let mut lo = CALIBRATION_AMP_MAX / SCAN as f64 * 1e-3;
    let mut phi_lo = phi_of(lo, &mut cache)?;
    let mut bracket = None;
    let mut prev_phi = phi_lo;
    for i in 1..=SCAN {
        let amp = CALIBRATION_AMP_MAX * i as f64 / SCAN as f64;
        let phi = phi_of(amp, &mut cache)?;
        if phi < prev_phi - PHASE_QUAD_TOL {
            return Err(Error::Numeric(format!(
                "conditional phase not monotone in companion amplitude near {amp}: \
                 {prev_phi} -> {phi}"
            )));
        }
        if (phi_lo - target) * (phi - target) <= 0.0 {
            bracket = Some((lo, amp, phi_lo, phi));
            break;
        }
        lo = amp;
        phi_lo = phi;
        prev_phi = phi;
    }
    let (mut a, mut b, mut phi_a, mut phi_b) = bracket.ok_or(Error::CalibrationInfeasible {
        phi_min: phi_lo.min(prev_phi),
        phi_max: prev_phi.max(phi_lo),
        target,
    })?;

    // Bisection to a 1e-3 flux bracket.
    while b - a > 1e-3 {
        let m = 0.5 * (a + b);
        let phi_m = phi_of(m, &mut cache)?;
        if (phi_a - target) * (phi_m - target) <= 0.0 {
            b = m;
            phi_b = phi_m;
        } else {
            a = m;
            phi_a = phi_m;
        }
    }

    // Secant polish on phi(amp) - target.
    let (mut x0, mut f0) = (a, phi_a - target);
    let (mut x1, mut f1) = (b, phi_b - target);
    let mut best = if f1.abs() < f0.abs() { (x1, f1) } else { (x0, f0) };
    for _ in 0..40 {
        if best.1.abs() <= 1e-6 {
            break;
        }
        let denom = f1 - f0;
        let mut x2 = if denom.abs() > 1e-300 { x1 - f1 * (x1 - x0) / denom } else { 0.5 * (a + b) };
        if !(a..=b).contains(&x2) {
            x2 = 0.5 * (a + b);
        }
        let f2 = phi_of(x2, &mut cache)? - target;
        if (f2 < 0.0) == (phi_a - target < 0.0) {
            a = x2;
        } else {
            b = x2;
        }
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = f2;
        if f2.abs() < best.1.abs() {
            best = (x2, f2);
        }
    }
    if best.1.abs() > 1e-6 {
        return Err(Error::Numeric(format!(
            "CZ calibration stalled at |phi - pi| = {:.2e} rad",
            best.1.abs()
        )));
    }
    let amp_b = best.0;
    let sched = sched_for(amp_b)?;
    let (zeta_a, zeta_b) = single_qubit_phases_cached(sys, &sched, model, &mut cache)?;
    Ok(CZResult {
        phi: best.1 + target,
        zeta_a,
        zeta_b,
        delta_phi_b: amp_b,
    })
}

/// The diagonal entangling unitary diag(1, e^{i zeta_A}, e^{i zeta_B},
/// e^{i (zeta_A + zeta_B + phi)}), basis ordered |00>, |01>, |10>, |11> with
/// qubit A as the fast index (entry 2 carries qubit A's phase).
pub fn cz_unitary(res: &CZResult) -> DMatrix<C64> {
    let mut u = DMatrix::<C64>::zeros(4, 4);
    u[(0, 0)] = C64::new(1.0, 0.0);
    u[(1, 1)] = C64::from_polar(1.0, res.zeta_a);
    u[(2, 2)] = C64::from_polar(1.0, res.zeta_b);
    u[(3, 3)] = C64::from_polar(1.0, res.zeta_a + res.zeta_b + res.phi);
    u
}

/// Conditional phase after n repeated gates, wrapped into (-pi, pi].
pub fn n_gate_conditional_phase(res: &CZResult, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::ParameterDomain("gate count must be >= 1".into()));
    }
    Ok(wrap_phase(n as f64 * res.phi))
}

/// A map of conditional-phase accumulation speed v_phi = phi/tau over
/// amplitude grids. `values` is row-major over (amplitude_a, amplitude_b);
/// resonant cells are None.
#[derive(Debug, Clone, Serialize)]
pub struct VPhiMap {
    pub amplitudes_a: Vec<f64>,
    pub amplitudes_b: Vec<f64>,
    /// v_phi in rad/us; None where the trajectory crosses a resonance.
    pub values: Vec<Option<f64>>,
    pub invalid_cells: usize,
}

impl VPhiMap {
    pub fn value(&self, i: usize, j: usize) -> Option<f64> {
        self.values[i * self.amplitudes_b.len() + j]
    }

    pub fn max_value(&self) -> Option<f64> {
        self.values
            .iter()
            .flatten()
            .copied()
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
    }
}

/// Pulse shape used for every cell of a v_phi map; the amplitude is filled
/// per cell.
#[derive(Debug, Clone, Copy, Serialize)]
pub enum MapPulse {
    SquareTanh { rise_time: f64 },
    Sinusoidal { mod_freq: f64 },
    NetZero,
}

impl MapPulse {
    fn realize(&self, amplitude: f64, duration: f64) -> Result<FluxPulse> {
        match *self {
            MapPulse::SquareTanh { rise_time } => {
                FluxPulse::square_tanh(0.5, amplitude, duration, rise_time)
            }
            MapPulse::Sinusoidal { mod_freq } => {
                FluxPulse::sinusoidal(0.5, amplitude, duration, mod_freq, 0.0)
            }
            MapPulse::NetZero => FluxPulse::net_zero(0.5, amplitude, duration),
        }
    }
}

/// Conditional-phase speed map over per-qubit amplitude grids, full model,
/// in rad/us. Cells whose trajectories cross a resonance are marked invalid
/// and recorded, not fatal. Cells evaluate in parallel.
pub fn v_phi_map(
    sys: &CoupledSystem,
    amplitudes_a: &[f64],
    amplitudes_b: &[f64],
    pulse: MapPulse,
    tau: f64,
) -> Result<VPhiMap> {
    for &a in amplitudes_a.iter().chain(amplitudes_b.iter()) {
        if !(a.is_finite() && a.abs() <= 0.15) {
            return Err(Error::ParameterDomain(format!(
                "map amplitude {a} outside +-0.15 flux quanta"
            )));
        }
    }
    let cells: Vec<(usize, usize)> = (0..amplitudes_a.len())
        .flat_map(|i| (0..amplitudes_b.len()).map(move |j| (i, j)))
        .collect();
    let values: Vec<Result<Option<f64>>> = cells
        .par_iter()
        .map(|&(i, j)| {
            let sched = GateSchedule::new(
                pulse.realize(amplitudes_a[i], tau)?,
                pulse.realize(amplitudes_b[j], tau)?,
                0.0,
            )?;
            match conditional_phase(sys, &sched, PhaseModel::Full) {
                // rad over ns -> rad/us
                Ok(phi) => Ok(Some(phi / tau * 1e3)),
                Err(Error::LabeledState { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut out = Vec::with_capacity(values.len());
    let mut invalid = 0;
    for v in values {
        let v = v?;
        if v.is_none() {
            invalid += 1;
        }
        out.push(v);
    }
    Ok(VPhiMap {
        amplitudes_a: amplitudes_a.to_vec(),
        amplitudes_b: amplitudes_b.to_vec(),
        values: out,
        invalid_cells: invalid,
    })
}

/// Phase accumulated at the idle point per unit time, rad/us (the residual
/// conditional-phase speed).
pub fn v_phi_residual(sys: &CoupledSystem) -> Result<f64> {
    let z = crate::coupled::zz_shift_exact(sys, 0.5, 0.5)?;
    Ok(phase_rad(z.zeta, 1.0) * 1e3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubit::{QubitLabel, QubitParams};

    fn system() -> CoupledSystem {
        CoupledSystem::new(
            QubitParams::new(1.61, 0.45, 2.89, QubitLabel::A).unwrap(),
            QubitParams::new(1.24, 0.45, 2.68, QubitLabel::B).unwrap(),
            0.0035,
        )
        .unwrap()
    }

    #[test]
    fn pulse_shapes_anchor_values() {
        let s = FluxPulse::sinusoidal(0.5, 0.1, 20.0, 0.05, 0.0).unwrap();
        assert_eq!(sample_pulse(&s, 0.0).unwrap(), 0.5);
        // quarter period: base - amplitude
        assert!((sample_pulse(&s, 5.0).unwrap() - 0.4).abs() < 1e-12);
        let sq = FluxPulse::square_tanh(0.5, 0.1, 200.0, 2.0).unwrap();
        assert!((sample_pulse(&sq, 100.0).unwrap() - 0.4).abs() < 1e-6);
        assert!(sample_pulse(&sq, 201.0).is_err());
    }

    #[test]
    fn net_zero_integrates_to_zero() {
        // midpoint rule with the sign flip on a panel boundary is exact for
        // the piecewise-constant waveform
        let p = FluxPulse::net_zero(0.5, 0.08, 60.0).unwrap();
        let n = 6000;
        let h = p.duration / n as f64;
        let mut area = 0.0;
        for i in 0..n {
            let t = (i as f64 + 0.5) * h;
            area += (sample_pulse(&p, t).unwrap() - p.base) * h;
        }
        assert!(area.abs() < 1e-10 * 0.08 * 60.0, "area = {area}");
    }

    #[test]
    fn conditional_phase_zero_for_idle_simplified() {
        let sys = system();
        let sched = GateSchedule::new(
            FluxPulse::constant(0.5, 50.0).unwrap(),
            FluxPulse::constant(0.5, 50.0).unwrap(),
            0.0,
        )
        .unwrap();
        let phi = conditional_phase(&sys, &sched, PhaseModel::Simplified).unwrap();
        assert!(phi.abs() < 1e-12);
    }

    #[test]
    fn idle_full_model_reproduces_residual_speed() {
        let sys = system();
        let tau = 1000.0;
        let sched = GateSchedule::new(
            FluxPulse::constant(0.5, tau).unwrap(),
            FluxPulse::constant(0.5, tau).unwrap(),
            0.0,
        )
        .unwrap();
        let phi = conditional_phase(&sys, &sched, PhaseModel::Full).unwrap();
        // |phi| ~ 0.438 rad over 1 us, within +-50%
        assert!(phi < 0.0, "residual conditional phase is negative");
        assert!(phi.abs() > 0.219 && phi.abs() < 0.657, "phi = {phi}");
        let v = v_phi_residual(&sys).unwrap();
        assert!((phi - v * tau / 1e3).abs() < 1e-6);
    }

    #[test]
    fn sinusoidal_phase_additive_over_periods() {
        let sys = system();
        let mk = |periods: f64| {
            GateSchedule::new(
                FluxPulse::sinusoidal(0.5, 0.06, 20.0 * periods, 0.05, 0.0).unwrap(),
                FluxPulse::sinusoidal(0.5, 0.05, 20.0 * periods, 0.05, 0.0).unwrap(),
                0.0,
            )
            .unwrap()
        };
        let one = conditional_phase(&sys, &mk(1.0), PhaseModel::Full).unwrap();
        let two = conditional_phase(&sys, &mk(2.0), PhaseModel::Full).unwrap();
        assert!((two - 2.0 * one).abs() < 2e-5, "{two} vs 2*{one}");
        // cross-check against the fine fixed-step oracle
        let fixed = conditional_phase_fixed_step(&sys, &mk(1.0), PhaseModel::Full, 800).unwrap();
        assert!((one - fixed).abs() < 2e-5);
    }

    #[test]
    fn phase_sign_symmetries_simplified() {
        let sys = system();
        let mk = |sa: f64, sb: f64| {
            GateSchedule::new(
                FluxPulse::sinusoidal(0.5, sa * 0.06, 20.0, 0.05, 0.0).unwrap(),
                FluxPulse::sinusoidal(0.5, sb * 0.05, 20.0, 0.05, 0.0).unwrap(),
                0.0,
            )
            .unwrap()
        };
        let pp = conditional_phase(&sys, &mk(1.0, 1.0), PhaseModel::Simplified).unwrap();
        let mm = conditional_phase(&sys, &mk(-1.0, -1.0), PhaseModel::Simplified).unwrap();
        let pm = conditional_phase(&sys, &mk(1.0, -1.0), PhaseModel::Simplified).unwrap();
        assert!((pp - mm).abs() < 1e-4);
        assert!((pm + pp).abs() < 1e-4);
    }

    #[test]
    fn single_qubit_phase_sign_and_linearity() {
        let sys = system();
        let mk = |periods: f64| {
            GateSchedule::new(
                FluxPulse::sinusoidal(0.5, 0.0673, 20.0 * periods, 0.05, 0.0).unwrap(),
                FluxPulse::constant(0.5, 20.0 * periods).unwrap(),
                0.0,
            )
            .unwrap()
        };
        let (za1, zb1) = single_qubit_phases(&sys, &mk(1.0), PhaseModel::Full).unwrap();
        assert!(za1 < 0.0, "zeta_A = {za1} (frame phase is negative)");
        assert!(zb1.abs() < 0.05 * za1.abs(), "parked qubit B stays put: {zb1}");
        let (za2, _) = single_qubit_phases(&sys, &mk(2.0), PhaseModel::Full).unwrap();
        assert!((za2 - 2.0 * za1).abs() < 5e-4, "{za2} vs 2*{za1}");
    }

    #[test]
    fn constant_idle_single_qubit_phases_vanish() {
        let sys = system();
        let sched = GateSchedule::new(
            FluxPulse::constant(0.5, 30.0).unwrap(),
            FluxPulse::constant(0.5, 30.0).unwrap(),
            10.0,
        )
        .unwrap();
        let (za, zb) = single_qubit_phases(&sys, &sched, PhaseModel::Full).unwrap();
        assert!(za.abs() < 1e-10 && zb.abs() < 1e-10);
    }

    #[test]
    fn cz_unitary_anchors_and_unitarity() {
        let ideal = CZResult { phi: std::f64::consts::PI, zeta_a: 0.0, zeta_b: 0.0, delta_phi_b: 0.0 };
        let u = cz_unitary(&ideal);
        assert!((u[(3, 3)].re + 1.0).abs() < 1e-15);
        assert!((u[(0, 0)].re - 1.0).abs() < 1e-15);
        let za = CZResult { phi: 0.0, zeta_a: std::f64::consts::PI, zeta_b: 0.0, delta_phi_b: 0.0 };
        let uz = cz_unitary(&za);
        assert!((uz[(1, 1)].re + 1.0).abs() < 1e-15);
        assert!((uz[(2, 2)].re - 1.0).abs() < 1e-15);
        assert!((uz[(3, 3)].re + 1.0).abs() < 1e-15);
        let arb = CZResult { phi: 0.83, zeta_a: -12.4, zeta_b: 3.7, delta_phi_b: 0.05 };
        let ua = cz_unitary(&arb);
        let prod = &ua * ua.adjoint();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - C64::new(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn n_gate_phase_wrapping() {
        let res = CZResult { phi: std::f64::consts::PI, zeta_a: 0.0, zeta_b: 0.0, delta_phi_b: 0.0 };
        assert!(n_gate_conditional_phase(&res, 2).unwrap().abs() < 1e-12);
        assert!((n_gate_conditional_phase(&res, 3).unwrap().abs() - std::f64::consts::PI).abs() < 1e-12);
        let off = CZResult { phi: std::f64::consts::PI + 0.01, ..res };
        assert!((n_gate_conditional_phase(&off, 8).unwrap() - 0.08).abs() < 1e-12);
        // composition: U^n diagonal phase equals n*phi (mod 2 pi)
        let u = cz_unitary(&off);
        let mut acc = DMatrix::<C64>::identity(4, 4);
        for _ in 0..8 {
            acc = &acc * &u;
        }
        let angle = acc[(3, 3)].arg() - 8.0 * (off.zeta_a + off.zeta_b);
        let expect = n_gate_conditional_phase(&off, 8).unwrap();
        assert!((wrap_phase(angle - expect)).abs() < 1e-9);
    }

    #[test]
    fn calibration_infeasible_with_tiny_drive() {
        let sys = system();
        // a 0.4 ns gate cannot reach phi = pi within the amplitude range
        let err = calibrate_cz(&sys, 0.01, 0.05, 0.4, 0.0, PhaseModel::Simplified);
        assert!(matches!(err, Err(Error::CalibrationInfeasible { .. })));
    }
}
