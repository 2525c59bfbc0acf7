//! Dense Hermitian operators and their eigendecomposition.
//!
//! Wraps nalgebra's symmetric eigensolver with the conventions the rest of
//! the crate relies on: ascending eigenvalues, a deterministic phase gauge,
//! and residual checks. Real-symmetric matrices (the common case here: the
//! fluxonium Hamiltonian is real in the displaced oscillator basis) take a
//! faster real path that produces the same gauge.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

type C64 = Complex<f64>;

/// Relative tolerance for the Hermiticity invariant.
const HERMITICITY_RTOL: f64 = 1e-12;
/// Residual bound ||H v - E v|| <= RESIDUAL_RTOL * ||H||.
const RESIDUAL_RTOL: f64 = 1e-8;

/// A dense Hermitian matrix (entries equal their conjugate transpose to
/// within 1e-12 relative tolerance, checked at construction).
#[derive(Debug, Clone)]
pub struct HermitianOperator {
    entries: DMatrix<C64>,
}

impl HermitianOperator {
    /// Wrap a complex matrix, verifying Hermiticity.
    pub fn new(entries: DMatrix<C64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() == 0 {
            return Err(Error::ParameterDomain(format!(
                "operator must be square and non-empty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let scale = entries.camax().max(f64::MIN_POSITIVE);
        for i in 0..entries.nrows() {
            for j in 0..=i {
                let d = entries[(i, j)] - entries[(j, i)].conj();
                if d.norm() > HERMITICITY_RTOL * scale {
                    return Err(Error::ParameterDomain(format!(
                        "matrix is not Hermitian: |H[{i},{j}] - conj(H[{j},{i}])| = {:.3e} \
                         exceeds {:.1e} * max|H|",
                        d.norm(),
                        HERMITICITY_RTOL
                    )));
                }
            }
        }
        Ok(Self { entries })
    }

    /// Wrap a real symmetric matrix.
    pub fn from_real(m: DMatrix<f64>) -> Result<Self> {
        Self::new(m.map(|x| C64::new(x, 0.0)))
    }

    pub fn dimension(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    fn max_imag(&self) -> f64 {
        self.entries.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }
}

/// The k lowest eigenpairs of a Hermitian operator, energies ascending,
/// states orthonormal, in the deterministic gauge where each state's
/// largest-magnitude component (lowest index on ties) is real positive.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub energies: Vec<f64>,
    /// One column per eigenvalue.
    pub states: DMatrix<C64>,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn state(&self, j: usize) -> DVector<C64> {
        self.states.column(j).into_owned()
    }
}

/// Index of the largest-magnitude component, lowest index breaking ties.
fn gauge_pivot<T, F: Fn(&T) -> f64>(v: &[T], mag: F) -> usize {
    let mut best = 0;
    let mut best_mag = mag(&v[0]);
    for (i, x) in v.iter().enumerate().skip(1) {
        let m = mag(x);
        if m > best_mag {
            best = i;
            best_mag = m;
        }
    }
    best
}

/// Compute the `k` lowest eigenpairs of `h`.
pub fn eigensystem(h: &HermitianOperator, k: usize) -> Result<EigenSystem> {
    let n = h.dimension();
    if k == 0 || k > n {
        return Err(Error::ParameterDomain(format!(
            "requested {k} eigenpairs of a {n}-dimensional operator"
        )));
    }
    let norm = h.norm();
    // Real-symmetric fast path when the imaginary parts vanish identically.
    let (energies, states) = if h.max_imag() <= HERMITICITY_RTOL * norm.max(f64::MIN_POSITIVE) {
        let (e, v) = eigensystem_real(&h.entries.map(|z| z.re), k)?;
        (e, v.map(|x| C64::new(x, 0.0)))
    } else {
        eigensystem_complex(&h.entries, k)?
    };

    // Residual check per pair.
    for j in 0..k {
        let v = states.column(j);
        let hv = h.entries() * v;
        let res = (&hv - v * C64::new(energies[j], 0.0)).norm();
        if res > RESIDUAL_RTOL * norm.max(f64::MIN_POSITIVE) {
            return Err(Error::Numeric(format!(
                "eigenpair {j} residual {res:.3e} exceeds {RESIDUAL_RTOL:.1e} * ||H|| = {:.3e}",
                RESIDUAL_RTOL * norm
            )));
        }
    }
    Ok(EigenSystem { energies, states })
}

/// Real-symmetric eigendecomposition: k lowest pairs, ascending, gauged.
pub(crate) fn eigensystem_real(m: &DMatrix<f64>, k: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let decomp = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        decomp.eigenvalues[a]
            .partial_cmp(&decomp.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    if decomp.eigenvalues.iter().any(|e| !e.is_finite()) {
        return Err(Error::Numeric(
            "eigensolver returned non-finite eigenvalues".into(),
        ));
    }
    let mut energies = Vec::with_capacity(k);
    let mut states = DMatrix::<f64>::zeros(n, k);
    for (col, &idx) in order.iter().take(k).enumerate() {
        energies.push(decomp.eigenvalues[idx]);
        let mut v: Vec<f64> = decomp.eigenvectors.column(idx).iter().copied().collect();
        let piv = gauge_pivot(&v, |x| x.abs());
        if v[piv] < 0.0 {
            for x in v.iter_mut() {
                *x = -*x;
            }
        }
        states.set_column(col, &DVector::from_vec(v));
    }
    Ok((energies, states))
}

fn eigensystem_complex(m: &DMatrix<C64>, k: usize) -> Result<(Vec<f64>, DMatrix<C64>)> {
    let n = m.nrows();
    let decomp = m.clone().symmetric_eigen();
    if decomp.eigenvalues.iter().any(|e| !e.is_finite()) {
        return Err(Error::Numeric(
            "eigensolver returned non-finite eigenvalues".into(),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        decomp.eigenvalues[a]
            .partial_cmp(&decomp.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut energies = Vec::with_capacity(k);
    let mut states = DMatrix::<C64>::zeros(n, k);
    for (col, &idx) in order.iter().take(k).enumerate() {
        energies.push(decomp.eigenvalues[idx]);
        let mut v: Vec<C64> = decomp.eigenvectors.column(idx).iter().copied().collect();
        let piv = gauge_pivot(&v, |z| z.norm());
        let mag = v[piv].norm();
        if mag > 0.0 {
            let phase = v[piv].conj() / mag;
            for z in v.iter_mut() {
                *z *= phase;
            }
        }
        states.set_column(col, &DVector::from_vec(v));
    }
    Ok((energies, states))
}
