//! The inductively coupled pair: product-space Hamiltonian, the four
//! coupling strengths (full and simplified models), exact ZZ shifts, and
//! two-qubit spectra.
//!
//! The interaction is J_bare * (phi_A - phi_eA) * (phi_B - phi_eB), built by
//! projecting each qubit onto its K lowest eigenstates at its own flux. The
//! four computational dressed states are identified by maximum overlap with
//! the bare product states; inside a resonance region the labeling is
//! refused rather than guessed.

use std::collections::HashMap;
use std::rc::Rc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator::{eigensystem_real, HermitianOperator};
use crate::qubit::{
    mixing_angle, single_qubit_eig, QubitEig, QubitParams, TwoLevelParams, DEFAULT_BASIS,
};
use crate::units::TAU;

/// Overlap threshold below which dressed-state labeling is declared
/// ambiguous (resonance region).
pub const LABEL_OVERLAP_THRESHOLD: f64 = 0.7;

/// Default number of single-qubit levels kept per qubit in the product
/// space. Two is not enough: the residual ZZ at the idle point comes from
/// transverse couplings to higher states, and K-convergence is a tested
/// invariant.
pub const DEFAULT_LEVELS_PER_QUBIT: usize = 6;

/// Two fluxonium qubits with a bare inductive coupling strength (GHz).
#[derive(Debug, Clone, Serialize)]
pub struct CoupledSystem {
    pub qubit_a: QubitParams,
    pub qubit_b: QubitParams,
    /// Bare coupling J_bare/h in GHz (Table-style parameter).
    pub j_bare: f64,
    /// Single-qubit levels kept in the product space.
    pub levels_per_qubit: usize,
    /// Oscillator basis size for the single-qubit diagonalizations.
    pub n_basis: usize,
}

impl CoupledSystem {
    pub fn new(qubit_a: QubitParams, qubit_b: QubitParams, j_bare: f64) -> Result<Self> {
        let sys = Self {
            qubit_a,
            qubit_b,
            j_bare,
            levels_per_qubit: DEFAULT_LEVELS_PER_QUBIT,
            n_basis: DEFAULT_BASIS,
        };
        sys.validate()?;
        Ok(sys)
    }

    pub fn with_levels(mut self, k: usize) -> Result<Self> {
        self.levels_per_qubit = k;
        self.validate()?;
        Ok(self)
    }

    pub fn with_basis(mut self, n: usize) -> Result<Self> {
        self.n_basis = n;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.qubit_a.validate()?;
        self.qubit_b.validate()?;
        if !self.j_bare.is_finite() || self.j_bare < 0.0 {
            return Err(Error::ParameterDomain(format!(
                "bare coupling must be finite and non-negative, got {}",
                self.j_bare
            )));
        }
        if self.levels_per_qubit < 2 {
            return Err(Error::ParameterDomain(
                "levels_per_qubit must be at least 2".into(),
            ));
        }
        Ok(())
    }

    /// The coupling is treated perturbatively; above 10% of the smaller
    /// inductive energy that assumption deserves scrutiny.
    pub fn is_perturbative(&self) -> bool {
        self.j_bare <= 0.1 * self.qubit_a.e_l.min(self.qubit_b.e_l)
    }
}

/// The four interaction strengths of the two-qubit coupling Hamiltonian,
/// in GHz: g_xx sx*sx, g_zz sz*sz, g_xz sx_A*sz_B, g_zx sz_A*sx_B.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CouplingStrengths {
    pub g_xx: f64,
    pub g_zz: f64,
    pub g_xz: f64,
    pub g_zx: f64,
}

/// Exact ZZ interaction strength from dressed two-qubit eigenenergies:
/// zeta = (E_ee - E_eg - E_ge + E_gg)/h, in GHz. Equals 4*g_zz of the
/// simplified model in its validity window.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ZZShift {
    pub zeta: f64,
}

fn qubit_eig(sys: &CoupledSystem, which: usize, flux: f64) -> Result<QubitEig> {
    let params = if which == 0 { &sys.qubit_a } else { &sys.qubit_b };
    single_qubit_eig(params, flux, sys.n_basis, sys.levels_per_qubit)
}

/// Build the K^2-dimensional coupled Hamiltonian at the given fluxes, each
/// qubit projected onto its K lowest eigenstates at its own flux, with the
/// interaction expressed through the projected (phi - phi_e) operators.
pub fn build_coupled_hamiltonian(
    sys: &CoupledSystem,
    flux_a: f64,
    flux_b: f64,
) -> Result<HermitianOperator> {
    let ea = qubit_eig(sys, 0, flux_a)?;
    let eb = qubit_eig(sys, 1, flux_b)?;
    HermitianOperator::from_real(coupled_matrix(sys, &ea, &eb))
}

fn coupled_matrix(sys: &CoupledSystem, ea: &QubitEig, eb: &QubitEig) -> DMatrix<f64> {
    let k = sys.levels_per_qubit;
    let mut h = DMatrix::<f64>::zeros(k * k, k * k);
    for i in 0..k {
        for j in 0..k {
            h[(i * k + j, i * k + j)] = ea.energies[i] + eb.energies[j];
        }
    }
    for i1 in 0..k {
        for i2 in 0..k {
            for j1 in 0..k {
                for j2 in 0..k {
                    h[(i1 * k + j1, i2 * k + j2)] += sys.j_bare * ea.x_proj[(i1, i2)] * eb.x_proj[(j1, j2)];
                }
            }
        }
    }
    h
}

/// Dressed energies of the four computational states, labeled
/// [E_gg, E_ge, E_eg, E_ee] with the first letter indexing qubit A.
fn labeled_energies_from(
    sys: &CoupledSystem,
    ea: &QubitEig,
    eb: &QubitEig,
    flux_a: f64,
    flux_b: f64,
) -> Result<[f64; 4]> {
    let k = sys.levels_per_qubit;
    let h = coupled_matrix(sys, ea, eb);
    let (energies, states) = eigensystem_real(&h, k * k)?;
    let mut used = vec![false; k * k];
    let mut out = [0.0; 4];
    for (slot, (a, b)) in [(0usize, 0usize), (0, 1), (1, 0), (1, 1)].iter().enumerate() {
        let bare_index = a * k + b;
        let mut best = usize::MAX;
        let mut best_ov = -1.0;
        for col in 0..k * k {
            if used[col] {
                continue;
            }
            let ov = states[(bare_index, col)].powi(2);
            if ov > best_ov {
                best_ov = ov;
                best = col;
            }
        }
        if best_ov < LABEL_OVERLAP_THRESHOLD {
            return Err(Error::LabeledState {
                flux_a,
                flux_b,
                max_overlap: best_ov,
                threshold: LABEL_OVERLAP_THRESHOLD,
            });
        }
        used[best] = true;
        out[slot] = energies[best];
    }
    Ok(out)
}

/// Exact ZZ shift at the given fluxes.
pub fn zz_shift_exact(sys: &CoupledSystem, flux_a: f64, flux_b: f64) -> Result<ZZShift> {
    let ea = qubit_eig(sys, 0, flux_a)?;
    let eb = qubit_eig(sys, 1, flux_b)?;
    let e = labeled_energies_from(sys, &ea, &eb, flux_a, flux_b)?;
    Ok(ZZShift {
        zeta: e[3] - e[2] - e[1] + e[0],
    })
}

/// The four coupling strengths evaluated from phase matrix elements of the
/// full single-qubit eigenstates:
/// g_pq = (J_bare/4) * (x-factor or z-factor of A) * (same of B), where the
/// x-factor is <g|phi|e> + <e|phi|g> and the z-factor is <e|phi|e> - <g|phi|g>.
pub fn coupling_strengths_full(
    sys: &CoupledSystem,
    flux_a: f64,
    flux_b: f64,
) -> Result<CouplingStrengths> {
    let ea = qubit_eig(sys, 0, flux_a)?;
    let eb = qubit_eig(sys, 1, flux_b)?;
    let xa = ea.x_proj[(0, 1)] + ea.x_proj[(1, 0)];
    let za = ea.x_proj[(1, 1)] - ea.x_proj[(0, 0)];
    let xb = eb.x_proj[(0, 1)] + eb.x_proj[(1, 0)];
    let zb = eb.x_proj[(1, 1)] - eb.x_proj[(0, 0)];
    let q = sys.j_bare / 4.0;
    Ok(CouplingStrengths {
        g_xx: q * xa * xb,
        g_zz: q * za * zb,
        g_xz: q * xa * zb,
        g_zx: q * za * xb,
    })
}

/// The simplified (two-level persistent-current) coupling strengths:
/// g_xx = J sin(a)sin(b), g_zz = J cos(a)cos(b), g_xz = -J sin(a)cos(b),
/// g_zx = -J cos(a)sin(b), with J = j_eff in GHz and a,b the mixing angles.
pub fn coupling_strengths_simplified(
    tlp_a: &TwoLevelParams,
    tlp_b: &TwoLevelParams,
    j_eff: f64,
    flux_a: f64,
    flux_b: f64,
) -> CouplingStrengths {
    let ta = mixing_angle(tlp_a, flux_a);
    let tb = mixing_angle(tlp_b, flux_b);
    CouplingStrengths {
        g_xx: j_eff * ta.sin() * tb.sin(),
        g_zz: j_eff * ta.cos() * tb.cos(),
        g_xz: -j_eff * ta.sin() * tb.cos(),
        g_zx: -j_eff * ta.cos() * tb.sin(),
    }
}

/// Effective two-level coupling J/h in GHz.
///
/// The mutual inductance is M = J_bare * L_A * L_B / (Phi0/2pi)^2 with loop
/// inductances L_i = (Phi0/2pi)^2 / E_L^i, and J = M * I_p^A * I_p^B with
/// the persistent currents recovered from the stored slopes
/// i_p = 2 I_p Phi0 / h. All constants cancel into
/// J/h = j_bare * i_p^A * i_p^B / (16 pi^2 e_l^A e_l^B).
pub fn effective_j(sys: &CoupledSystem, tlp_a: &TwoLevelParams, tlp_b: &TwoLevelParams) -> f64 {
    sys.j_bare * tlp_a.i_p * tlp_b.i_p
        / (4.0 * TAU * TAU * sys.qubit_a.e_l * sys.qubit_b.e_l)
}

/// One point of a conditional-spectrum scan of qubit A.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConditionalPoint {
    pub flux_b: f64,
    /// f01 of qubit A with qubit B in its ground state, GHz.
    pub f_a_given_g: Option<f64>,
    /// f01 of qubit A with qubit B excited, GHz.
    pub f_a_given_e: Option<f64>,
    /// True where dressed-state labeling failed (resonance region).
    pub resonant: bool,
}

/// Qubit-A transition frequencies conditioned on qubit B's state, along a
/// grid of qubit-B fluxes. Resonant grid points are reported, not fatal.
pub fn conditional_spectrum(
    sys: &CoupledSystem,
    flux_a: f64,
    flux_b_grid: &[f64],
) -> Result<Vec<ConditionalPoint>> {
    if let Some(bad) = flux_b_grid
        .iter()
        .find(|f| !f.is_finite() || !(0.3..=0.7).contains(*f))
    {
        return Err(Error::ParameterDomain(format!(
            "conditional-spectrum grid point {bad} outside [0.3, 0.7]"
        )));
    }
    let ea = qubit_eig(sys, 0, flux_a)?;
    let mut out = Vec::with_capacity(flux_b_grid.len());
    for &fb in flux_b_grid {
        let eb = qubit_eig(sys, 1, fb)?;
        match labeled_energies_from(sys, &ea, &eb, flux_a, fb) {
            Ok(e) => out.push(ConditionalPoint {
                flux_b: fb,
                f_a_given_g: Some(e[2] - e[0]),
                f_a_given_e: Some(e[3] - e[1]),
                resonant: false,
            }),
            Err(Error::LabeledState { .. }) => out.push(ConditionalPoint {
                flux_b: fb,
                f_a_given_g: None,
                f_a_given_e: None,
                resonant: true,
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Fluxes of qubit B at which the bare f01 curves cross, found by bisection
/// on each side of half flux within [0.3, 0.7]. Returns zero, one, or both
/// symmetric solutions, ascending.
pub fn find_resonance(sys: &CoupledSystem, flux_a: f64) -> Result<Vec<f64>> {
    let fa = crate::qubit::transition_frequency(&sys.qubit_a, flux_a, sys.n_basis)?;
    let f01_b = |fb: f64| crate::qubit::transition_frequency(&sys.qubit_b, fb, sys.n_basis);
    let mut roots = Vec::new();
    for (lo0, hi0) in [(0.3, 0.5), (0.5, 0.7)] {
        let mut lo = lo0;
        let mut hi = hi0;
        let g_lo = f01_b(lo)? - fa;
        let g_hi = f01_b(hi)? - fa;
        if g_lo == 0.0 {
            roots.push(lo);
            continue;
        }
        if g_hi == 0.0 {
            roots.push(hi);
            continue;
        }
        if g_lo * g_hi > 0.0 {
            continue;
        }
        let mut g_lo = g_lo;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let g_mid = f01_b(mid)? - fa;
            if g_mid == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if g_lo * g_mid < 0.0 {
                hi = mid;
            } else {
                lo = mid;
                g_lo = g_mid;
            }
            if hi - lo < 1e-7 {
                break;
            }
        }
        roots.push(0.5 * (lo + hi));
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(roots)
}

/// Memoizing evaluator for repeated dressed-energy queries along pulse
/// trajectories. Caches single-qubit eigensystems per flux and labeled
/// energies per flux pair; resonance failures are cached too.
pub(crate) struct CoupledEvaluator<'a> {
    sys: &'a CoupledSystem,
    eig_a: HashMap<u64, Rc<QubitEig>>,
    eig_b: HashMap<u64, Rc<QubitEig>>,
    labeled: HashMap<(u64, u64), Option<[f64; 4]>>,
}

impl<'a> CoupledEvaluator<'a> {
    pub fn new(sys: &'a CoupledSystem) -> Self {
        Self {
            sys,
            eig_a: HashMap::new(),
            eig_b: HashMap::new(),
            labeled: HashMap::new(),
        }
    }

    fn eig(&mut self, which: usize, flux: f64) -> Result<Rc<QubitEig>> {
        let map = if which == 0 { &mut self.eig_a } else { &mut self.eig_b };
        if let Some(e) = map.get(&flux.to_bits()) {
            return Ok(Rc::clone(e));
        }
        let e = Rc::new(qubit_eig(self.sys, which, flux)?);
        let map = if which == 0 { &mut self.eig_a } else { &mut self.eig_b };
        map.insert(flux.to_bits(), Rc::clone(&e));
        Ok(e)
    }

    pub fn labeled_energies(&mut self, flux_a: f64, flux_b: f64) -> Result<[f64; 4]> {
        let key = (flux_a.to_bits(), flux_b.to_bits());
        if let Some(cached) = self.labeled.get(&key) {
            return match cached {
                Some(e) => Ok(*e),
                None => Err(Error::LabeledState {
                    flux_a,
                    flux_b,
                    max_overlap: 0.0,
                    threshold: LABEL_OVERLAP_THRESHOLD,
                }),
            };
        }
        let ea = self.eig(0, flux_a)?;
        let eb = self.eig(1, flux_b)?;
        match labeled_energies_from(self.sys, &ea, &eb, flux_a, flux_b) {
            Ok(e) => {
                self.labeled.insert(key, Some(e));
                Ok(e)
            }
            Err(err @ Error::LabeledState { .. }) => {
                self.labeled.insert(key, None);
                Err(err)
            }
            Err(e) => Err(e),
        }
    }

    /// zeta in GHz.
    pub fn zeta(&mut self, flux_a: f64, flux_b: f64) -> Result<f64> {
        let e = self.labeled_energies(flux_a, flux_b)?;
        Ok(e[3] - e[2] - e[1] + e[0])
    }

    /// Conditioned transition frequency of one qubit with the partner in g:
    /// for qubit A this is E_eg - E_gg, for qubit B it is E_ge - E_gg.
    pub fn f01_given_partner_ground(
        &mut self,
        which: usize,
        flux_a: f64,
        flux_b: f64,
    ) -> Result<f64> {
        let e = self.labeled_energies(flux_a, flux_b)?;
        Ok(if which == 0 { e[2] - e[0] } else { e[1] - e[0] })
    }
}
