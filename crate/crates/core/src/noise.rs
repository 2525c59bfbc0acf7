//! Flux-noise spectra, dephasing filter functions, stochastic noise traces,
//! and decay-curve analysis.
//!
//! The noise model is a sum of sinusoids at equally spaced frequencies with
//! uniform random phases; amplitudes follow Phi_i^2 = (2/pi) * integral of
//! the double-sided PSD over each bin. All dephasing exponents here are
//! exact consequences of that model,
//!
//! ```text
//!   exponent = <dphi^2>/2 = (t^2 alpha^2 / 4 pi) * int S(w) g_n(w, t) dw
//! ```
//!
//! with g_static = sinc^2(wt/2), g_net_zero = sin^2(wt/4) sinc^2(wt/4), and
//! g_sinusoidal = (1/4)[sinc^2((w-wm)t/2) + sinc^2((w+wm)t/2)
//!                      - 2 sinc((w-wm)t/2) sinc((w+wm)t/2) cos(wm t)],
//!
//! a squared magnitude (hence non-negative) that equals 1/4 at w = wm over
//! integer modulation periods and vanishes at DC there. The Monte Carlo
//! path below reproduces these exponents realization-by-realization and is
//! the independent oracle for them.
//!
//! This module works in SI units: times in seconds, frequencies in Hz,
//! angular frequencies in rad/s, dispersion slopes alpha in rad/s per flux
//! quantum.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::units::TAU;

/// Double-sided flux-noise power spectral density model: a 1/f branch with
/// amplitude A (flux quanta per sqrt Hz at 1 Hz) plus an optional white
/// floor, clamped to zero outside [f_low, f_high] in |f|.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NoiseSpectrum {
    /// 1/f amplitude A: S_1/f(f) = A^2 / (2 |f|).
    pub one_over_f_amp: f64,
    /// Flat double-sided floor, flux-quanta^2 per Hz.
    pub white_floor: f64,
    /// Lower integration cutoff, Hz.
    pub f_low: f64,
    /// Upper integration cutoff, Hz.
    pub f_high: f64,
}

impl NoiseSpectrum {
    pub fn new(one_over_f_amp: f64, white_floor: f64, f_low: f64, f_high: f64) -> Result<Self> {
        let s = Self { one_over_f_amp, white_floor, f_low, f_high };
        s.validate()?;
        Ok(s)
    }

    /// Pure 1/f spectrum with the default cutoffs [1 Hz, 1 GHz].
    pub fn one_over_f(amp: f64) -> Result<Self> {
        Self::new(amp, 0.0, 1.0, 1.0e9)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.one_over_f_amp >= 0.0) || !(self.white_floor >= 0.0) {
            return Err(Error::ParameterDomain(
                "noise amplitudes must be non-negative".into(),
            ));
        }
        if !(self.f_low > 0.0 && self.f_high > self.f_low && self.f_high.is_finite()) {
            return Err(Error::ParameterDomain(format!(
                "cutoffs must satisfy 0 < f_low < f_high, got [{}, {}]",
                self.f_low, self.f_high
            )));
        }
        Ok(())
    }

    /// Integral of the double-sided PSD in angular frequency over
    /// [w_lo, w_hi] (positive branch), used for trace-bin amplitudes.
    fn band_power_angular(&self, w_lo: f64, w_hi: f64) -> f64 {
        let f_lo = (w_lo / TAU).max(self.f_low);
        let f_hi = (w_hi / TAU).min(self.f_high);
        if f_hi <= f_lo {
            return 0.0;
        }
        // int S dw = 2 pi int S df
        TAU * (0.5 * self.one_over_f_amp.powi(2) * (f_hi / f_lo).ln()
            + self.white_floor * (f_hi - f_lo))
    }
}

/// Double-sided PSD value at frequency f (Hz), flux-quanta^2 per Hz.
pub fn psd(spec: &NoiseSpectrum, f: f64) -> Result<f64> {
    if f == 0.0 {
        return Err(Error::ParameterDomain("PSD undefined at f = 0".into()));
    }
    spec.validate()?;
    let fa = f.abs();
    if fa < spec.f_low || fa > spec.f_high {
        return Ok(0.0);
    }
    Ok(spec.one_over_f_amp.powi(2) / (2.0 * fa) + spec.white_floor)
}

fn psd_angular(spec: &NoiseSpectrum, w: f64) -> f64 {
    let fa = (w / TAU).abs();
    if fa < spec.f_low || fa > spec.f_high {
        return 0.0;
    }
    spec.one_over_f_amp.powi(2) / (2.0 * fa) + spec.white_floor
}

/// sin(x)/x with the removable singularity filled in.
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Control sequences whose noise-filtering behavior is modeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FilterKind {
    Static,
    NetZero,
    Sinusoidal,
}

/// Dimensionless noise-filtering weight g_n(w, t); `omega_m` matters only
/// for the sinusoidal kind. t in seconds, w in rad/s.
pub fn filter_function(kind: FilterKind, omega: f64, t: f64, omega_m: f64) -> f64 {
    match kind {
        FilterKind::Static => sinc(omega * t / 2.0).powi(2),
        FilterKind::NetZero => {
            let x = omega * t / 4.0;
            x.sin().powi(2) * sinc(x).powi(2)
        }
        FilterKind::Sinusoidal => {
            let sm = sinc((omega - omega_m) * t / 2.0);
            let sp = sinc((omega + omega_m) * t / 2.0);
            0.25 * (sm * sm + sp * sp - 2.0 * sm * sp * (omega_m * t).cos())
        }
    }
}

/// Integral of S(w) * g(w) over the double-sided band, by a hybrid scheme:
/// adaptive Simpson on a log axis through the infrared part (where 1/f
/// concentrates and g is smooth), then fixed-step Simpson in the oscillation
/// variable x = w t / 2 for the remainder.
fn integrate_psd_filter<G: Fn(f64) -> f64>(spec: &NoiseSpectrum, g: G, t: f64) -> Result<f64> {
    let w_lo = TAU * spec.f_low;
    let w_hi = TAU * spec.f_high;
    let w_split = (20.0 / t).clamp(w_lo, w_hi);

    let mut total = 0.0;
    if w_split > w_lo {
        let mut f_log = |u: f64| -> Result<f64> {
            let w = u.exp();
            Ok(psd_angular(spec, w) * g(w) * w)
        };
        let a = w_lo.ln();
        let b = w_split.ln();
        let coarse = crate::quad::fixed_simpson(&mut f_log, a, b, 64)?;
        let tol = (coarse.abs() * 1e-7).max(1e-300);
        total += crate::quad::adaptive_simpson(&mut f_log, a, b, tol, 64)?;
    }
    if w_hi > w_split {
        // x-space composite Simpson, >= 8 panels per half-oscillation of the
        // sinc structure
        let x_lo = w_split * t / 2.0;
        let x_hi = w_hi * t / 2.0;
        let panels = (((x_hi - x_lo) / std::f64::consts::PI * 8.0).ceil() as usize)
            .clamp(64, 6_000_000);
        let mut f_x = |x: f64| -> Result<f64> {
            let w = 2.0 * x / t;
            Ok(psd_angular(spec, w) * g(w) * 2.0 / t)
        };
        total += crate::quad::fixed_simpson(&mut f_x, x_lo, x_hi, panels)?;
    }
    // double-sided: S and every filter here are even in w
    Ok(2.0 * total)
}

/// A dephasing exponent and the corresponding coherence decay factor.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DephasingResult {
    /// <dphi^2(t)>/2, dimensionless.
    pub exponent: f64,
    /// exp(-exponent).
    pub decay: f64,
    /// Evolution time, ns.
    pub t: f64,
}

impl DephasingResult {
    fn from_exponent(exponent: f64, t_s: f64) -> Self {
        Self { exponent, decay: (-exponent).exp(), t: t_s * 1e9 }
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::ParameterDomain(format!(
            "evolution time must be positive and finite, got {t}"
        )));
    }
    Ok(())
}

/// Dephasing exponent under a constant dispersion slope `alpha`
/// (rad/s per flux quantum) for evolution time `t` (seconds).
pub fn static_dephasing_exponent(alpha: f64, t: f64, spec: &NoiseSpectrum) -> Result<DephasingResult> {
    check_time(t)?;
    spec.validate()?;
    let integral = integrate_psd_filter(spec, |w| filter_function(FilterKind::Static, w, t, 0.0), t)?;
    let exponent = t * t * alpha * alpha / (4.0 * std::f64::consts::PI) * integral;
    Ok(DephasingResult::from_exponent(exponent, t))
}

/// Dephasing exponent under sinusoidal dispersion modulation
/// alpha(t') = alpha sin(omega_m t'), omega_m in rad/s.
pub fn sinusoidal_dephasing_exponent(
    alpha: f64,
    omega_m: f64,
    t: f64,
    spec: &NoiseSpectrum,
) -> Result<DephasingResult> {
    check_time(t)?;
    if !(omega_m > 0.0) {
        return Err(Error::ParameterDomain("omega_m must be positive".into()));
    }
    spec.validate()?;
    let integral =
        integrate_psd_filter(spec, |w| filter_function(FilterKind::Sinusoidal, w, t, omega_m), t)?;
    let exponent = t * t * alpha * alpha / (4.0 * std::f64::consts::PI) * integral;
    Ok(DephasingResult::from_exponent(exponent, t))
}

/// Dephasing exponent for net-zero (back-to-back opposite squares) control.
pub fn net_zero_dephasing_exponent(alpha: f64, t: f64, spec: &NoiseSpectrum) -> Result<DephasingResult> {
    check_time(t)?;
    spec.validate()?;
    let integral = integrate_psd_filter(spec, |w| filter_function(FilterKind::NetZero, w, t, 0.0), t)?;
    let exponent = t * t * alpha * alpha / (4.0 * std::f64::consts::PI) * integral;
    Ok(DephasingResult::from_exponent(exponent, t))
}

/// Generic route: exponent computed through `filter_function` for any kind.
/// Matches the dedicated closed-form operations to the quadrature tolerance.
pub fn exponent_via_filter(
    kind: FilterKind,
    alpha: f64,
    omega_m: f64,
    t: f64,
    spec: &NoiseSpectrum,
) -> Result<DephasingResult> {
    check_time(t)?;
    spec.validate()?;
    let integral = integrate_psd_filter(spec, |w| filter_function(kind, w, t, omega_m), t)?;
    let exponent = t * t * alpha * alpha / (4.0 * std::f64::consts::PI) * integral;
    Ok(DephasingResult::from_exponent(exponent, t))
}

/// A realized sum-of-sinusoids noise trace: Phi_n(t) = sum_i a_i
/// sin(w_i t + xi_i), reproducible per seed.
#[derive(Debug, Clone, Serialize)]
pub struct NoiseTrace {
    /// Bin-center angular frequencies, rad/s.
    pub omegas: Vec<f64>,
    /// Bin amplitudes, flux quanta.
    pub amplitudes: Vec<f64>,
    /// Random phases in [0, 2 pi).
    pub phases: Vec<f64>,
}

impl NoiseTrace {
    /// Flux-noise value at time t (seconds), flux quanta.
    pub fn value(&self, t: f64) -> f64 {
        self.omegas
            .iter()
            .zip(&self.amplitudes)
            .zip(&self.phases)
            .map(|((w, a), xi)| a * (w * t + xi).sin())
            .sum()
    }

    /// Ensemble variance of the trace value at any fixed time:
    /// sum of a_i^2 / 2.
    pub fn theoretical_variance(&self) -> f64 {
        self.amplitudes.iter().map(|a| a * a / 2.0).sum::<f64>()
    }
}

fn trace_bins(spec: &NoiseSpectrum, delta_f: f64) -> (Vec<f64>, Vec<f64>) {
    let n_bins = ((spec.f_high - spec.f_low) / delta_f).ceil() as usize;
    let mut omegas = Vec::with_capacity(n_bins);
    let mut amplitudes = Vec::with_capacity(n_bins);
    for i in 0..n_bins {
        let f_lo = spec.f_low + i as f64 * delta_f;
        let f_hi = (f_lo + delta_f).min(spec.f_high);
        let w_c = TAU * 0.5 * (f_lo + f_hi);
        // Phi_i^2 = (2/pi) * int_bin S(w) dw
        let a2 = 2.0 / std::f64::consts::PI * spec.band_power_angular(TAU * f_lo, TAU * f_hi);
        omegas.push(w_c);
        amplitudes.push(a2.max(0.0).sqrt());
    }
    (omegas, amplitudes)
}

/// Draw one noise trace with frequency resolution `delta_f` (Hz) suitable
/// for a window of length `duration` (seconds). The resolution guard
/// requires delta_f <= 1/(10 * duration).
pub fn generate_noise_trace(
    spec: &NoiseSpectrum,
    delta_f: f64,
    duration: f64,
    seed: u64,
) -> Result<NoiseTrace> {
    spec.validate()?;
    if !(delta_f > 0.0) || !(duration > 0.0) {
        return Err(Error::ParameterDomain(
            "delta_f and duration must be positive".into(),
        ));
    }
    if delta_f > 1.0 / (10.0 * duration) {
        return Err(Error::ParameterDomain(format!(
            "resolution guard: delta_f = {delta_f} exceeds 1/(10 * duration) = {}",
            1.0 / (10.0 * duration)
        )));
    }
    let (omegas, amplitudes) = trace_bins(spec, delta_f);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let phases = (0..omegas.len()).map(|_| rng.gen::<f64>() * TAU).collect();
    Ok(NoiseTrace { omegas, amplitudes, phases })
}

/// Time dependence of the dispersion slope during a control sequence,
/// rad/s per flux quantum.
#[derive(Debug, Clone)]
pub enum AlphaWaveform {
    Constant(f64),
    /// alpha(t) = amplitude * sin(omega_m t), omega_m in rad/s.
    Sinusoidal { amplitude: f64, omega_m: f64 },
    /// Piecewise-linear samples (t_seconds, alpha); clamped outside.
    Sampled(Vec<(f64, f64)>),
}

impl AlphaWaveform {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            AlphaWaveform::Constant(a) => *a,
            AlphaWaveform::Sinusoidal { amplitude, omega_m } => amplitude * (omega_m * t).sin(),
            AlphaWaveform::Sampled(pts) => {
                if pts.is_empty() {
                    return 0.0;
                }
                if t <= pts[0].0 {
                    return pts[0].1;
                }
                if t >= pts[pts.len() - 1].0 {
                    return pts[pts.len() - 1].1;
                }
                let idx = pts.partition_point(|p| p.0 <= t);
                let (t0, a0) = pts[idx - 1];
                let (t1, a1) = pts[idx];
                a0 + (a1 - a0) * (t - t0) / (t1 - t0)
            }
        }
    }
}

/// Monte Carlo dephasing estimate with its statistical uncertainty.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct McDephasing {
    /// <dphi^2>/2 over the ensemble.
    pub exponent: f64,
    /// One standard error of `exponent` (exponent * sqrt(2/n)).
    pub std_error: f64,
    pub n_ensembles: usize,
    /// Evolution time, ns.
    pub t: f64,
}

impl McDephasing {
    pub fn result(&self) -> DephasingResult {
        DephasingResult { exponent: self.exponent, decay: (-self.exponent).exp(), t: self.t }
    }
}

/// Monte Carlo dephasing: the ensemble variance of the accumulated phase
/// dphi = integral alpha(t') Phi_n(t') dt' over random noise realizations.
///
/// For each frequency bin the time integral splits into deterministic
/// quadratures I_s(w) = int alpha sin(w t') dt' and I_c(w) = int alpha
/// cos(w t') dt', so each realization costs one pass over the bins with its
/// own phases. Realizations use per-realization ChaCha streams of `seed`
/// and reduce with pairwise summation for a reproducible total.
pub fn mc_dephasing(
    waveform: &AlphaWaveform,
    t: f64,
    spec: &NoiseSpectrum,
    n_ensembles: usize,
    seed: u64,
) -> Result<McDephasing> {
    check_time(t)?;
    spec.validate()?;
    if n_ensembles < 100 {
        return Err(Error::ParameterDomain(format!(
            "need at least 100 realizations, got {n_ensembles}"
        )));
    }
    let delta_f = 1.0 / (40.0 * t);
    let (omegas, amplitudes) = trace_bins(spec, delta_f);

    // Shared fine time grid resolving the fastest bin.
    let mut nt = ((16.0 * spec.f_high * t).ceil() as usize).clamp(512, 4_000_000);
    if nt % 2 == 1 {
        nt += 1;
    }
    let dt = t / nt as f64;
    let alpha_samples: Vec<f64> = (0..=nt).map(|i| waveform.value(i as f64 * dt)).collect();
    let simpson_w = |i: usize| -> f64 {
        if i == 0 || i == nt {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        }
    };
    let proj: Vec<(f64, f64)> = omegas
        .par_iter()
        .map(|&w| {
            let mut is = 0.0;
            let mut ic = 0.0;
            for i in 0..=nt {
                let ti = i as f64 * dt;
                let (s, c) = (w * ti).sin_cos();
                let wgt = simpson_w(i) * alpha_samples[i];
                is += wgt * s;
                ic += wgt * c;
            }
            (is * dt / 3.0, ic * dt / 3.0)
        })
        .collect();

    let phases_sq: Vec<f64> = (0..n_ensembles)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(r as u64 + 1);
            let mut dphi = 0.0;
            for (a, (is, ic)) in amplitudes.iter().zip(&proj) {
                let xi = rng.gen::<f64>() * TAU;
                let (sx, cx) = xi.sin_cos();
                dphi += a * (cx * is + sx * ic);
            }
            dphi * dphi
        })
        .collect();

    // pairwise reduction, order independent of thread scheduling
    fn pairwise_sum(v: &[f64]) -> f64 {
        match v.len() {
            0 => 0.0,
            1 => v[0],
            n => {
                let (a, b) = v.split_at(n / 2);
                pairwise_sum(a) + pairwise_sum(b)
            }
        }
    }
    let mean_sq = pairwise_sum(&phases_sq) / n_ensembles as f64;
    let exponent = mean_sq / 2.0;
    Ok(McDephasing {
        exponent,
        std_error: exponent * (2.0 / n_ensembles as f64).sqrt(),
        n_ensembles,
        t: t * 1e9,
    })
}

/// First 1/e crossing of a decay curve by linear interpolation. Samples are
/// (time, value) pairs, expected monotone non-increasing overall; the time
/// unit of the input is the time unit of the output.
pub fn t2_from_decay(samples: &[(f64, f64)]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::ParameterDomain("need at least two samples".into()));
    }
    let target = (-1.0f64).exp();
    let y0 = samples[0].1;
    let norm = if y0 > 0.0 { y0 } else { 1.0 };
    let mut prev = (samples[0].0, samples[0].1 / norm);
    if prev.1 <= target {
        return Ok(prev.0);
    }
    for &(t, y) in &samples[1..] {
        let yn = y / norm;
        if yn <= target {
            let frac = (prev.1 - target) / (prev.1 - yn);
            return Ok(prev.0 + frac * (t - prev.0));
        }
        prev = (t, yn);
    }
    Err(Error::OutOfRange(format!(
        "decay never reaches 1/e within the sampled range (last value {:.4})",
        prev.1
    )))
}

/// Parameters of the double-exponential energy-decay model
/// y(t) = exp(beta (exp(-t/t_beta) - 1)) * exp(-t/t1_tilde).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecayFit {
    pub beta: f64,
    pub t_beta: f64,
    pub t1_tilde: f64,
    pub residual_rms: f64,
}

fn decay_model(beta: f64, t_beta: f64, t1: f64, t: f64) -> f64 {
    (beta * ((-t / t_beta).exp() - 1.0) - t / t1).exp()
}

/// Levenberg-Marquardt fit of the double-exponential decay model.
///
/// Needs at least 8 samples spanning a decade of decay. Initialization:
/// beta = 1, t_beta = first 1/e time, t1_tilde from the slope of the last
/// quarter of the curve; a few deterministic restarts guard against bad
/// basins. Times are fit in log space to stay positive; beta is clamped to
/// be non-negative.
pub fn fit_double_exponential(samples: &[(f64, f64)]) -> Result<DecayFit> {
    if samples.len() < 8 {
        return Err(Error::ParameterDomain(format!(
            "need at least 8 samples, got {}",
            samples.len()
        )));
    }
    let y0 = samples[0].1;
    if !(y0 > 0.0) {
        return Err(Error::ParameterDomain("first sample must be positive".into()));
    }
    let pts: Vec<(f64, f64)> = samples.iter().map(|&(t, y)| (t, y / y0)).collect();
    let y_min = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    if y_min > 0.1 {
        return Err(Error::ParameterDomain(
            "samples must span at least one decade of decay".into(),
        ));
    }

    // inits
    let t_e = t2_from_decay(&pts).unwrap_or(pts[pts.len() - 1].0 / 3.0);
    let tail_start = pts.len() - (pts.len() / 4).max(2);
    let tail = &pts[tail_start..];
    let mut t1_init = t_e;
    {
        let n = tail.len() as f64;
        let (mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0);
        let mut ok = true;
        for &(t, y) in tail {
            if y <= 0.0 {
                ok = false;
                break;
            }
            let ly = y.ln();
            st += t;
            sy += ly;
            stt += t * t;
            sty += t * ly;
        }
        if ok {
            let slope = (n * sty - st * sy) / (n * stt - st * st);
            if slope < -1e-300 {
                t1_init = -1.0 / slope;
            }
        }
    }

    let run = |beta0: f64, tb0: f64, t10: f64| -> Option<(f64, f64, f64, f64)> {
        let mut beta = beta0.max(0.0);
        let mut ltb = tb0.max(1e-12).ln();
        let mut lt1 = t10.max(1e-12).ln();
        let mut lambda = 1e-3;
        let mut chi2 = f64::INFINITY;
        for _ in 0..400 {
            let tb = ltb.exp();
            let t1 = lt1.exp();
            // residuals and normal equations for params (beta, ln tb, ln t1)
            let mut jtj = [[0.0f64; 3]; 3];
            let mut jtr = [0.0f64; 3];
            let mut c2 = 0.0;
            for &(t, y) in &pts {
                let m = decay_model(beta, tb, t1, t);
                let r = y - m;
                c2 += r * r;
                let e = (-t / tb).exp();
                let j = [
                    (e - 1.0) * m,            // d m / d beta
                    beta * e * (t / tb) * m,  // d m / d ln tb
                    (t / t1) * m,             // d m / d ln t1
                ];
                for a in 0..3 {
                    for b in 0..3 {
                        jtj[a][b] += j[a] * j[b];
                    }
                    jtr[a] += j[a] * r;
                }
            }
            if c2 < chi2 {
                chi2 = c2;
            }
            // solve (JtJ + lambda diag) step = Jtr
            let mut m3 = jtj;
            for a in 0..3 {
                m3[a][a] *= 1.0 + lambda;
                m3[a][a] += 1e-300;
            }
            let step = solve3(&m3, &jtr)?;
            let nb = (beta + step[0]).max(0.0);
            let nltb = ltb + step[1].clamp(-2.0, 2.0);
            let nlt1 = lt1 + step[2].clamp(-2.0, 2.0);
            // evaluate candidate
            let (ctb, ct1) = (nltb.exp(), nlt1.exp());
            let mut c2_new = 0.0;
            for &(t, y) in &pts {
                let r = y - decay_model(nb, ctb, ct1, t);
                c2_new += r * r;
            }
            if c2_new <= c2 {
                let converged = (c2 - c2_new) < 1e-16 * c2.max(1e-30)
                    && step.iter().all(|s| s.abs() < 1e-10);
                beta = nb;
                ltb = nltb;
                lt1 = nlt1;
                chi2 = c2_new;
                lambda = (lambda * 0.3).max(1e-12);
                if converged {
                    break;
                }
            } else {
                lambda *= 10.0;
                if lambda > 1e12 {
                    break;
                }
            }
        }
        let rms = (chi2 / pts.len() as f64).sqrt();
        Some((beta, ltb.exp(), lt1.exp(), rms))
    };

    let mut best: Option<(f64, f64, f64, f64)> = None;
    for (b0, tb_m, t1_m) in [
        (1.0, 1.0, 1.0),
        (0.3, 0.5, 1.5),
        (3.0, 2.0, 0.7),
        (0.0, 1.0, 1.0),
    ] {
        if let Some(fit) = run(b0, t_e * tb_m, t1_init * t1_m) {
            if fit.3.is_finite() && best.map_or(true, |b| fit.3 < b.3) {
                best = Some(fit);
            }
        }
    }
    let (beta, t_beta, t1_tilde, residual_rms) =
        best.ok_or_else(|| Error::Numeric("double-exponential fit failed to converge".into()))?;
    if !residual_rms.is_finite() || residual_rms > 0.2 {
        return Err(Error::Numeric(format!(
            "double-exponential fit residual RMS {residual_rms:.3} too large"
        )));
    }
    Ok(DecayFit { beta, t_beta, t1_tilde, residual_rms })
}

fn solve3(m: &[[f64; 3]; 3], b: &[f64; 3]) -> Option<[f64; 3]> {
    let mut a = *m;
    let mut x = *b;
    for i in 0..3 {
        // partial pivot
        let mut piv = i;
        for r in (i + 1)..3 {
            if a[r][i].abs() > a[piv][i].abs() {
                piv = r;
            }
        }
        if a[piv][i].abs() < 1e-300 {
            return None;
        }
        a.swap(i, piv);
        x.swap(i, piv);
        for r in (i + 1)..3 {
            let f = a[r][i] / a[i][i];
            for c in i..3 {
                a[r][c] -= f * a[i][c];
            }
            x[r] -= f * x[i];
        }
    }
    let mut out = [0.0; 3];
    for i in (0..3).rev() {
        let mut s = x[i];
        for c in (i + 1)..3 {
            s -= a[i][c] * out[c];
        }
        out[i] = s / a[i][i];
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_1f() -> NoiseSpectrum {
        NoiseSpectrum::one_over_f(10.6e-6).unwrap()
    }

    #[test]
    fn psd_anchor_and_symmetry() {
        let s = spec_1f();
        let v = psd(&s, 1.0).unwrap();
        assert!((v - 5.618e-11).abs() < 1e-14, "psd(1 Hz) = {v}");
        assert_eq!(psd(&s, 5.0e3).unwrap(), psd(&s, -5.0e3).unwrap());
        assert!(psd(&s, 0.5).unwrap() == 0.0); // below f_low
        assert!(psd(&s, 0.0).is_err());
        let white = NoiseSpectrum::new(0.0, 3.0e-12, 1.0, 1e9).unwrap();
        assert_eq!(psd(&white, 777.0).unwrap(), 3.0e-12);
    }

    #[test]
    fn filter_anchors() {
        assert_eq!(filter_function(FilterKind::Static, 0.0, 20e-9, 0.0), 1.0);
        assert_eq!(filter_function(FilterKind::NetZero, 0.0, 20e-9, 0.0), 0.0);
        let wm = TAU * 50e6;
        let t = 20e-9; // one period
        let at_peak = filter_function(FilterKind::Sinusoidal, wm, t, wm);
        assert!((at_peak - 0.25).abs() < 1e-9, "g(wm) = {at_peak}");
        let at_dc = filter_function(FilterKind::Sinusoidal, 1e-6, t, wm);
        assert!(at_dc.abs() < 1e-12, "g(0) = {at_dc}");
    }

    #[test]
    fn filter_positivity_on_dense_grid() {
        let t = 20e-9;
        let wm = TAU * 50e6;
        for kind in [FilterKind::Static, FilterKind::NetZero, FilterKind::Sinusoidal] {
            for i in 0..4000 {
                let w = TAU * (1.0 + 1e6 * i as f64);
                assert!(filter_function(kind, w, t, wm) >= -1e-15);
            }
        }
    }

    #[test]
    fn zero_alpha_means_no_dephasing() {
        let s = spec_1f();
        assert_eq!(static_dephasing_exponent(0.0, 20e-9, &s).unwrap().exponent, 0.0);
        assert_eq!(
            sinusoidal_dephasing_exponent(0.0, TAU * 50e6, 20e-9, &s).unwrap().exponent,
            0.0
        );
    }

    #[test]
    fn white_noise_exponent_linear_in_time() {
        let s = NoiseSpectrum::new(0.0, 1.0e-12, 1.0, 1e9).unwrap();
        let a = 1.0e10;
        let e1 = static_dephasing_exponent(a, 5e-6, &s).unwrap().exponent;
        let e2 = static_dephasing_exponent(a, 10e-6, &s).unwrap().exponent;
        assert!((e2 / e1 - 2.0).abs() < 1e-3, "ratio = {}", e2 / e1);
        // closed form t alpha^2 S0 / 2 in the wide-band limit
        assert!((e1 - 5e-6 * a * a * 1.0e-12 / 2.0).abs() / e1 < 5e-3);
    }

    #[test]
    fn one_over_f_grows_faster_than_linear() {
        let s = spec_1f();
        let a = 5.0e10;
        let e1 = static_dephasing_exponent(a, 20e-9, &s).unwrap().exponent;
        let e2 = static_dephasing_exponent(a, 40e-9, &s).unwrap().exponent;
        assert!(e2 / e1 > 2.0, "1/f ratio = {}", e2 / e1);
    }

    #[test]
    fn quadrature_regression_values() {
        // frozen from an independent 400k-point log-grid Simpson evaluation
        let s = spec_1f();
        let e_st = static_dephasing_exponent(5e10, 20e-9, &s).unwrap().exponent;
        assert!((e_st - 9.445194e-4).abs() / e_st < 1e-4, "{e_st}");
        let e_sin = sinusoidal_dephasing_exponent(5e10, TAU * 50e6, 20e-9, &s).unwrap().exponent;
        assert!((e_sin - 1.961798e-5).abs() / e_sin < 1e-4, "{e_sin}");
    }

    #[test]
    fn filter_route_matches_closed_form_route() {
        let s = spec_1f();
        let t = 20e-9;
        let wm = TAU * 50e6;
        let a = 5e10;
        let pairs = [
            (
                static_dephasing_exponent(a, t, &s).unwrap().exponent,
                exponent_via_filter(FilterKind::Static, a, 0.0, t, &s).unwrap().exponent,
            ),
            (
                sinusoidal_dephasing_exponent(a, wm, t, &s).unwrap().exponent,
                exponent_via_filter(FilterKind::Sinusoidal, a, wm, t, &s).unwrap().exponent,
            ),
            (
                net_zero_dephasing_exponent(a, t, &s).unwrap().exponent,
                exponent_via_filter(FilterKind::NetZero, a, 0.0, t, &s).unwrap().exponent,
            ),
        ];
        for (x, y) in pairs {
            assert!((x - y).abs() <= 1e-6 * x.abs().max(y.abs()));
        }
    }

    #[test]
    fn modulation_beats_static_at_gate_horizon_and_orders_at_integer_periods() {
        let s = spec_1f();
        let a = 6.17e10;
        let t = 20e-9;
        let e_static = static_dephasing_exponent(a, t, &s).unwrap().exponent;
        for fm in [0.5e6, 5e6, 50e6] {
            let e = sinusoidal_dephasing_exponent(a, TAU * fm, t, &s).unwrap().exponent;
            assert!(e < e_static, "fm = {fm}: {e} vs static {e_static}");
        }
        // strict ordering where every modulation completes integer periods
        let t2 = 2e-6;
        let mut prev = f64::INFINITY;
        for fm in [0.5e6, 5e6, 50e6] {
            let e = sinusoidal_dephasing_exponent(a, TAU * fm, t2, &s).unwrap().exponent;
            assert!(e < prev, "ordering violated at fm = {fm}");
            prev = e;
        }
    }

    #[test]
    fn trace_single_bin_is_pure_sinusoid() {
        let s = NoiseSpectrum::new(0.0, 2.0e-12, 10.0, 20.0).unwrap();
        let tr = generate_noise_trace(&s, 10.0, 1e-3, 42).unwrap();
        assert_eq!(tr.omegas.len(), 1);
        let expect = (2.0 / std::f64::consts::PI * s.band_power_angular(TAU * 10.0, TAU * 20.0)).sqrt();
        assert!((tr.amplitudes[0] - expect).abs() < 1e-18);
        // value oscillates at the bin center
        let w = tr.omegas[0];
        let t_quarter = TAU / w / 4.0;
        let v0 = tr.value(0.0);
        let v1 = tr.value(t_quarter);
        assert!((v0 * v0 + v1 * v1 - tr.amplitudes[0] * tr.amplitudes[0]).abs() < 1e-24);
    }

    #[test]
    fn trace_reproducible_and_seed_sensitive() {
        let s = spec_1f();
        let a = generate_noise_trace(&s, 1e6, 2e-8, 7).unwrap();
        let b = generate_noise_trace(&s, 1e6, 2e-8, 7).unwrap();
        let c = generate_noise_trace(&s, 1e6, 2e-8, 8).unwrap();
        assert_eq!(a.value(3.3e-9).to_bits(), b.value(3.3e-9).to_bits());
        assert_ne!(a.value(3.3e-9).to_bits(), c.value(3.3e-9).to_bits());
    }

    #[test]
    fn trace_resolution_guard() {
        let s = spec_1f();
        assert!(generate_noise_trace(&s, 1e7, 2e-8, 7).is_err());
    }

    #[test]
    fn trace_ensemble_variance_matches_identity() {
        let s = NoiseSpectrum::new(3.0e-6, 0.0, 1.0, 1.0e5).unwrap();
        let delta_f = 1.0e3;
        let mut acc = 0.0;
        let n = 10_000;
        let mut theory = 0.0;
        for seed in 0..n {
            let tr = generate_noise_trace(&s, delta_f, 1e-5, seed).unwrap();
            let v = tr.value(0.0);
            acc += v * v;
            if seed == 0 {
                theory = tr.theoretical_variance();
            }
        }
        let var = acc / n as f64;
        assert!((var - theory).abs() / theory < 0.05, "{var} vs {theory}");
    }

    #[test]
    fn mc_zero_alpha_is_exactly_zero() {
        let s = spec_1f();
        let mc = mc_dephasing(&AlphaWaveform::Constant(0.0), 20e-9, &s, 200, 3).unwrap();
        assert_eq!(mc.exponent, 0.0);
    }

    #[test]
    fn mc_matches_static_exponent() {
        let s = spec_1f();
        let a = 5e10;
        let t = 20e-9;
        let analytic = static_dephasing_exponent(a, t, &s).unwrap().exponent;
        let mc = mc_dephasing(&AlphaWaveform::Constant(a), t, &s, 10_000, 11).unwrap();
        assert!(
            (mc.exponent - analytic).abs() <= 3.0 * mc.std_error,
            "pull = {}",
            (mc.exponent - analytic) / mc.std_error
        );
    }

    #[test]
    fn mc_matches_sinusoidal_exponent() {
        let s = spec_1f();
        let a = 5e10;
        let t = 20e-9;
        let wm = TAU * 50e6;
        let analytic = sinusoidal_dephasing_exponent(a, wm, t, &s).unwrap().exponent;
        let mc = mc_dephasing(
            &AlphaWaveform::Sinusoidal { amplitude: a, omega_m: wm },
            t,
            &s,
            10_000,
            12,
        )
        .unwrap();
        assert!(
            (mc.exponent - analytic).abs() <= 3.0 * mc.std_error,
            "pull = {}",
            (mc.exponent - analytic) / mc.std_error
        );
    }

    #[test]
    fn mc_matches_net_zero_exponent() {
        let s = spec_1f();
        let a = 4e10;
        let t = 24e-9;
        let analytic = net_zero_dephasing_exponent(a, t, &s).unwrap().exponent;
        let half = t / 2.0;
        let wave = AlphaWaveform::Sampled(vec![
            (0.0, a),
            (half * (1.0 - 1e-9), a),
            (half * (1.0 + 1e-9), -a),
            (t, -a),
        ]);
        let mc = mc_dephasing(&wave, t, &s, 10_000, 13).unwrap();
        assert!(
            (mc.exponent - analytic).abs() <= 3.0 * mc.std_error,
            "pull = {}",
            (mc.exponent - analytic) / mc.std_error
        );
    }

    #[test]
    fn t2_extraction_anchors() {
        let tau = 37.0;
        let exp_curve: Vec<(f64, f64)> =
            (0..200).map(|i| (i as f64, (-(i as f64) / tau).exp())).collect();
        let t2 = t2_from_decay(&exp_curve).unwrap();
        assert!((t2 - tau).abs() < 0.05);
        let gauss: Vec<(f64, f64)> =
            (0..200).map(|i| (i as f64, (-(i as f64 / tau).powi(2)).exp())).collect();
        assert!((t2_from_decay(&gauss).unwrap() - tau).abs() < 0.05);
        // product: root of t/t1 + (t/t2)^2 = 1
        let (ta, tb) = (60.0, 45.0);
        let prod: Vec<(f64, f64)> = (0..400)
            .map(|i| {
                let t = i as f64 * 0.25;
                (t, (-(t / ta) - (t / tb).powi(2)).exp())
            })
            .collect();
        let root = tb * tb / 2.0 * ((1.0 / (ta * ta) + 4.0 / (tb * tb)).sqrt() - 1.0 / ta);
        assert!((t2_from_decay(&prod).unwrap() - root).abs() < 0.05);
        // no crossing
        let flat: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 1.0)).collect();
        assert!(t2_from_decay(&flat).is_err());
    }

    #[test]
    fn double_exponential_roundtrip() {
        let (beta, tb, t1) = (1.5, 20.0, 80.0);
        let pts: Vec<(f64, f64)> = (0..60)
            .map(|i| {
                let t = i as f64 * 5.0;
                (t, decay_model(beta, tb, t1, t))
            })
            .collect();
        let fit = fit_double_exponential(&pts).unwrap();
        assert!((fit.beta - beta).abs() / beta < 1e-4, "beta = {}", fit.beta);
        assert!((fit.t_beta - tb).abs() / tb < 1e-4);
        assert!((fit.t1_tilde - t1).abs() / t1 < 1e-4);
        assert!(fit.residual_rms < 1e-8);
    }

    #[test]
    fn double_exponential_degenerate_beta_zero() {
        let t1 = 55.0;
        let pts: Vec<(f64, f64)> = (0..50)
            .map(|i| {
                let t = i as f64 * 4.0;
                (t, (-t / t1).exp())
            })
            .collect();
        let fit = fit_double_exponential(&pts).unwrap();
        assert!(fit.beta.abs() <= 1e-3, "beta = {}", fit.beta);
        assert!((fit.t1_tilde - t1).abs() / t1 < 1e-3);
    }

    #[test]
    fn double_exponential_with_noise() {
        let (beta, tb, t1) = (1.5, 20.0, 80.0);
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let pts: Vec<(f64, f64)> = (0..80)
            .map(|i| {
                let t = i as f64 * 4.0;
                let noise = 0.01 * (2.0 * rng.gen::<f64>() - 1.0);
                (t, decay_model(beta, tb, t1, t) + noise)
            })
            .collect();
        let fit = fit_double_exponential(&pts).unwrap();
        assert!((fit.beta - beta).abs() / beta < 0.05);
        assert!((fit.t_beta - tb).abs() / tb < 0.05);
        assert!((fit.t1_tilde - t1).abs() / t1 < 0.05);
    }

    #[test]
    fn fit_rejects_insufficient_data() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 1.0 / (i + 1) as f64)).collect();
        assert!(fit_double_exponential(&pts).is_err());
        let shallow: Vec<(f64, f64)> =
            (0..20).map(|i| (i as f64, 1.0 - 0.001 * i as f64)).collect();
        assert!(fit_double_exponential(&shallow).is_err());
    }
}
