//! Single-fluxonium Hamiltonians, spectra, and effective two-level parameters.
//!
//! The circuit is the standard fluxonium: a small junction (E_J) shunted by a
//! large inductance (E_L) and capacitance (E_C),
//!
//! ```text
//!   H = 4 E_C n^2 + (E_L/2) (phi - phi_e)^2 - E_J cos(phi),   phi_e = 2*pi*Phi/Phi0
//! ```
//!
//! with all energies stored as linear frequencies (GHz = E/h). The qubit is
//! first-order flux-insensitive at half flux, where the potential is a
//! symmetric double well and the splitting equals the tunneling energy Delta.
//!
//! Everything is built in the harmonic-oscillator basis of the (E_C, E_L) LC
//! mode displaced to the inductive minimum phi_e, where the LC part is
//! diagonal with spacing sqrt(8 E_C E_L) and the Josephson term has exact
//! closed-form matrix elements (associated-Laguerre form of the displacement
//! operator). cos and sin of the displaced phase x = phi - phi_e are computed
//! once per basis size; the flux enters only through scalar cos/sin factors,
//! so sweeps are cheap and the truncation error is the exact projection error
//! of the infinite-dimensional operator.

use nalgebra::{Complex, DMatrix};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator::{eigensystem_real, HermitianOperator};
use crate::units::TAU;

type C64 = Complex<f64>;

/// Minimum allowed oscillator-basis size.
pub const MIN_BASIS: usize = 20;
/// Default oscillator-basis size; convergence 80 -> 160 is a tested invariant.
pub const DEFAULT_BASIS: usize = 80;
/// Central finite-difference step for flux dispersions, in flux quanta.
pub const DISPERSION_STEP: f64 = 1e-5;

/// Which physical qubit a parameter set describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum QubitLabel {
    A,
    B,
}

impl std::fmt::Display for QubitLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            QubitLabel::A => write!(f, "A"),
            QubitLabel::B => write!(f, "B"),
        }
    }
}

/// Circuit energies of one fluxonium, as linear frequencies (GHz).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QubitParams {
    /// Charging energy E_C/h.
    pub e_c: f64,
    /// Inductive energy E_L/h.
    pub e_l: f64,
    /// Josephson energy E_J/h. Zero is allowed (harmonic limit); the
    /// fluxonium double-well regime additionally needs e_j > e_l.
    pub e_j: f64,
    pub label: QubitLabel,
}

impl QubitParams {
    pub fn new(e_c: f64, e_l: f64, e_j: f64, label: QubitLabel) -> Result<Self> {
        let p = Self { e_c, e_l, e_j, label };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.e_c > 0.0) || !(self.e_l > 0.0) || !(self.e_j >= 0.0) {
            return Err(Error::ParameterDomain(format!(
                "qubit {} energies must satisfy e_c > 0, e_l > 0, e_j >= 0; \
                 got e_c={}, e_l={}, e_j={}",
                self.label, self.e_c, self.e_l, self.e_j
            )));
        }
        if !(self.e_c.is_finite() && self.e_l.is_finite() && self.e_j.is_finite()) {
            return Err(Error::ParameterDomain("non-finite circuit energy".into()));
        }
        Ok(())
    }

    /// Plasma frequency of the bare LC mode, sqrt(8 E_C E_L), in GHz.
    pub fn lc_frequency(&self) -> f64 {
        (8.0 * self.e_c * self.e_l).sqrt()
    }

    /// Zero-point spread of the phase in the LC ground state.
    pub fn phi_zpf(&self) -> f64 {
        (2.0 * self.e_c / self.e_l).powf(0.25)
    }
}

/// Effective two-level (persistent-current) parameters near half flux.
///
/// `delta` is the tunneling energy Delta/h in GHz. `i_p` is the persistent
/// current expressed as the flux slope of the two-state energy difference:
/// eps/h = i_p * (Phi/Phi0 - 1/2), i.e. i_p stores 2*I_p*Phi0/h in GHz per
/// flux quantum, so f01 = sqrt((eps/h)^2 + delta^2).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TwoLevelParams {
    pub delta: f64,
    pub i_p: f64,
}

impl TwoLevelParams {
    /// eps/h at the given external flux (flux quanta), in GHz.
    pub fn epsilon(&self, flux: f64) -> f64 {
        self.i_p * (flux - 0.5)
    }

    /// Two-level prediction of the qubit frequency, GHz.
    pub fn f01(&self, flux: f64) -> f64 {
        self.epsilon(flux).hypot(self.delta)
    }

    /// Two-level prediction of the flux dispersion df01/dPhi, GHz per Phi0.
    pub fn dispersion(&self, flux: f64) -> f64 {
        let eps = self.epsilon(flux);
        self.i_p * eps / eps.hypot(self.delta)
    }
}

/// Mixing angle theta = atan2(delta, eps/h), continuous in (0, pi), equal to
/// pi/2 exactly at half flux.
pub fn mixing_angle(tlp: &TwoLevelParams, flux: f64) -> f64 {
    f64::atan2(tlp.delta, tlp.epsilon(flux))
}

/// Exact Laguerre-form matrix elements of cos(x) and sin(x) for
/// x = lambda (a + a^dag) in the number basis |0..n).
///
/// <m|exp(i lambda (a+a^dag))|k> = e^{-lambda^2/2} sqrt(k!/m!) (i lambda)^{m-k}
/// L_k^{(m-k)}(lambda^2) for m >= k, which leaves cos on even |m-k| and sin
/// on odd |m-k| with alternating signs.
fn cos_sin_matrices(n: usize, lambda: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let x = lambda * lambda;
    let pref = (-x / 2.0).exp();
    let mut cos_m = DMatrix::<f64>::zeros(n, n);
    let mut sin_m = DMatrix::<f64>::zeros(n, n);
    for d in 0..n {
        // sqrt(k!/m!) lambda^d for m = k + d, updated along k; Laguerre
        // recurrence in k at fixed order d.
        let mut lag_km2 = 0.0;
        let mut lag_km1 = 0.0;
        for k in 0..(n - d) {
            let m = k + d;
            let lag = if k == 0 {
                1.0
            } else if k == 1 {
                1.0 + d as f64 - x
            } else {
                let kf = k as f64;
                ((2.0 * kf - 1.0 + d as f64 - x) * lag_km1 - (kf - 1.0 + d as f64) * lag_km2) / kf
            };
            lag_km2 = lag_km1;
            lag_km1 = lag;
            // sqrt(k!/m!) = 1/sqrt((k+1)(k+2)..m)
            let mut scale = lambda.powi(d as i32);
            for j in (k + 1)..=m {
                scale /= (j as f64).sqrt();
            }
            let amp = pref * scale * lag;
            if d % 2 == 0 {
                let val = amp * if (d / 2) % 2 == 0 { 1.0 } else { -1.0 };
                cos_m[(m, k)] = val;
                cos_m[(k, m)] = val;
            } else {
                let val = amp * if ((d - 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
                sin_m[(m, k)] = val;
                sin_m[(k, m)] = val;
            }
        }
    }
    (cos_m, sin_m)
}

/// The displaced-oscillator ingredients of one fluxonium at a given basis
/// size: LC diagonal, cos/sin of the displaced phase, and the displaced
/// phase operator itself.
pub(crate) struct HoBasis {
    pub n: usize,
    pub omega_lc: f64,
    pub cos_x: DMatrix<f64>,
    pub sin_x: DMatrix<f64>,
    /// x = phi - phi_e, tridiagonal lambda*(a + a^dag).
    pub x_op: DMatrix<f64>,
}

impl HoBasis {
    pub fn new(params: &QubitParams, n: usize) -> Self {
        let lambda = params.phi_zpf();
        let (cos_x, sin_x) = cos_sin_matrices(n, lambda);
        let mut x_op = DMatrix::<f64>::zeros(n, n);
        for i in 0..n - 1 {
            let v = lambda * ((i + 1) as f64).sqrt();
            x_op[(i, i + 1)] = v;
            x_op[(i + 1, i)] = v;
        }
        Self {
            n,
            omega_lc: params.lc_frequency(),
            cos_x,
            sin_x,
            x_op,
        }
    }

    /// Real Hamiltonian matrix at external flux (flux quanta).
    pub fn hamiltonian(&self, params: &QubitParams, flux: f64) -> DMatrix<f64> {
        let phi_e = TAU * flux;
        let (s, c) = phi_e.sin_cos();
        // -E_J cos(x + phi_e) = -E_J (cos x cos phi_e - sin x sin phi_e)
        let mut h = &self.cos_x * (-params.e_j * c) + &self.sin_x * (params.e_j * s);
        for i in 0..self.n {
            h[(i, i)] += self.omega_lc * (i as f64 + 0.5);
        }
        h
    }
}

fn check_build_inputs(params: &QubitParams, flux: f64, n_basis: usize) -> Result<()> {
    params.validate()?;
    if !flux.is_finite() {
        return Err(Error::ParameterDomain("flux must be finite".into()));
    }
    if n_basis < MIN_BASIS {
        return Err(Error::ParameterDomain(format!(
            "n_basis = {n_basis} below minimum {MIN_BASIS}"
        )));
    }
    Ok(())
}

/// Build the truncated single-fluxonium Hamiltonian at the given external
/// flux (in flux quanta) in the displaced harmonic-oscillator basis of the
/// (E_C, E_L) LC mode.
pub fn build_single_hamiltonian(
    params: &QubitParams,
    flux: f64,
    n_basis: usize,
) -> Result<HermitianOperator> {
    check_build_inputs(params, flux, n_basis)?;
    let basis = HoBasis::new(params, n_basis);
    HermitianOperator::from_real(basis.hamiltonian(params, flux))
}

/// Lowest-k eigensystem of one qubit, plus the projected displaced-phase
/// operator x = phi - phi_e in the eigenbasis. This is the working
/// representation for everything coupled.
pub(crate) struct QubitEig {
    pub energies: Vec<f64>,
    /// <i| (phi - phi_e) |j> for the k lowest eigenstates.
    pub x_proj: DMatrix<f64>,
}

pub(crate) fn single_qubit_eig(
    params: &QubitParams,
    flux: f64,
    n_basis: usize,
    k: usize,
) -> Result<QubitEig> {
    check_build_inputs(params, flux, n_basis)?;
    if k == 0 || k > n_basis {
        return Err(Error::ParameterDomain(format!(
            "level count {k} outside 1..={n_basis}"
        )));
    }
    let basis = HoBasis::new(params, n_basis);
    let h = basis.hamiltonian(params, flux);
    let (energies, states) = eigensystem_real(&h, k)?;
    let x_proj = states.transpose() * &basis.x_op * &states;
    Ok(QubitEig { energies, x_proj })
}

/// Qubit transition frequency f01 = E_1 - E_0 in GHz.
pub fn transition_frequency(params: &QubitParams, flux: f64, n_basis: usize) -> Result<f64> {
    let eig = single_qubit_eig(params, flux, n_basis, 2)?;
    Ok(eig.energies[1] - eig.energies[0])
}

/// Flux dispersion df01/dPhi in GHz per flux quantum, central finite
/// difference with step 1e-5 flux quanta.
pub fn flux_dispersion(params: &QubitParams, flux: f64, n_basis: usize) -> Result<f64> {
    let fp = transition_frequency(params, flux + DISPERSION_STEP, n_basis)?;
    let fm = transition_frequency(params, flux - DISPERSION_STEP, n_basis)?;
    Ok((fp - fm) / (2.0 * DISPERSION_STEP))
}

/// Matrix element <i| phi |j> of the (undisplaced) phase operator between
/// eigenstates at the given flux. Real-valued in the chosen gauge; returned
/// as complex per the operator contract, with the Hermitian pairing
/// <i|phi|j> = conj(<j|phi|i>).
pub fn phase_matrix_element(
    params: &QubitParams,
    flux: f64,
    i: usize,
    j: usize,
    n_basis: usize,
) -> Result<C64> {
    let k = i.max(j) + 1;
    let eig = single_qubit_eig(params, flux, n_basis, k)?;
    // phi = x + phi_e: the displacement shifts only the diagonal.
    let mut v = eig.x_proj[(i, j)];
    if i == j {
        v += TAU * flux;
    }
    Ok(C64::new(v, 0.0))
}

/// Least-squares fit of f01(Phi) over a window centered on half flux to the
/// two-level model sqrt((i_p*(Phi-1/2))^2 + delta^2).
///
/// `half_width` is the window half-width in flux quanta, restricted to
/// [0.02, 0.08]. Initialization solves the linearized problem in
/// (i_p^2, delta^2); Gauss-Newton then polishes the true residual.
pub fn fit_two_level(
    params: &QubitParams,
    half_width: f64,
    n_basis: usize,
) -> Result<TwoLevelParams> {
    if !(0.02..=0.08).contains(&half_width) {
        return Err(Error::ParameterDomain(format!(
            "fit window half-width {half_width} outside [0.02, 0.08]"
        )));
    }
    const NPTS: usize = 41;
    let mut us = [0.0; NPTS];
    let mut f = [0.0; NPTS];
    for (i, (u, fi)) in us.iter_mut().zip(f.iter_mut()).enumerate() {
        *u = -half_width + 2.0 * half_width * i as f64 / (NPTS - 1) as f64;
        *fi = transition_frequency(params, 0.5 + *u, n_basis)?;
    }

    // Linear init on squares: f^2 = ip^2 u^2 + delta^2.
    let (mut s_xx, mut s_x, mut s_xy, mut s_y) = (0.0, 0.0, 0.0, 0.0);
    for (u, fi) in us.iter().zip(f.iter()) {
        let x = u * u;
        let y = fi * fi;
        s_xx += x * x;
        s_x += x;
        s_xy += x * y;
        s_y += y;
    }
    let n = NPTS as f64;
    let det = n * s_xx - s_x * s_x;
    let ip2 = (n * s_xy - s_x * s_y) / det;
    let d2 = (s_y * s_xx - s_x * s_xy) / det;
    let mut ip = ip2.max(1e-12).sqrt();
    let mut delta = d2.max(1e-12).sqrt();

    // Gauss-Newton on the true residual.
    for _ in 0..60 {
        let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (u, fi) in us.iter().zip(f.iter()) {
            let model = (ip * u).hypot(delta);
            let r = fi - model;
            let j1 = ip * u * u / model;
            let j2 = delta / model;
            a11 += j1 * j1;
            a12 += j1 * j2;
            a22 += j2 * j2;
            b1 += j1 * r;
            b2 += j2 * r;
        }
        let det = a11 * a22 - a12 * a12;
        if det.abs() < 1e-300 {
            return Err(Error::Numeric("two-level fit normal equations singular".into()));
        }
        let d_ip = (a22 * b1 - a12 * b2) / det;
        let d_delta = (a11 * b2 - a12 * b1) / det;
        ip += d_ip;
        delta += d_delta;
        if d_ip.abs() < 1e-14 * ip.abs().max(1.0) && d_delta.abs() < 1e-14 * delta.abs().max(1.0) {
            break;
        }
    }
    let ip = ip.abs();
    let delta = delta.abs();
    if !(ip.is_finite() && delta.is_finite() && delta > 0.0) {
        return Err(Error::Numeric("two-level fit did not converge".into()));
    }

    // Postconditions: residual RMS <= 1% of delta; delta matches f01(0.5) to 0.1%.
    let rms = (us
        .iter()
        .zip(f.iter())
        .map(|(u, fi)| {
            let r = fi - (ip * u).hypot(delta);
            r * r
        })
        .sum::<f64>()
        / n)
        .sqrt();
    if rms > 0.01 * delta {
        return Err(Error::Numeric(format!(
            "two-level fit residual RMS {rms:.3e} exceeds 1% of delta = {delta:.6}"
        )));
    }
    let f_half = transition_frequency(params, 0.5, n_basis)?;
    if (delta - f_half).abs() > 1e-3 * f_half {
        return Err(Error::Numeric(format!(
            "fitted delta {delta:.6} deviates from f01(0.5) = {f_half:.6} by more than 0.1%"
        )));
    }
    Ok(TwoLevelParams { delta, i_p: ip })
}
