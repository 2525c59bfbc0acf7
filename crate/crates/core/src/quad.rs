//! Adaptive and fixed-step Simpson quadrature over fallible integrands.

use crate::error::{Error, Result};

/// Adaptive Simpson integration of `f` over [a, b] to absolute tolerance
/// `tol`, starting from `min_panels` uniform panels. Each panel is refined
/// recursively with the standard Richardson acceptance test.
pub fn adaptive_simpson<F>(
    f: &mut F,
    a: f64,
    b: f64,
    tol: f64,
    min_panels: usize,
) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(b > a) {
        if b == a {
            return Ok(0.0);
        }
        return Err(Error::ParameterDomain(format!(
            "integration bounds reversed: [{a}, {b}]"
        )));
    }
    let panels = min_panels.max(1);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    let panel_tol = tol / panels as f64;
    for i in 0..panels {
        let lo = a + i as f64 * h;
        let hi = if i + 1 == panels { b } else { lo + h };
        let mid = 0.5 * (lo + hi);
        let flo = f(lo)?;
        let fmid = f(mid)?;
        let fhi = f(hi)?;
        total += simpson_refine(f, lo, hi, flo, fmid, fhi, panel_tol, 28)?;
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn simpson_refine<F>(
    f: &mut F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    tol: f64,
    depth: usize,
) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let h = b - a;
    let whole = h / 6.0 * (fa + 4.0 * fm + fb);
    let left = h / 12.0 * (fa + 4.0 * flm + fm);
    let right = h / 12.0 * (fm + 4.0 * frm + fb);
    let err = left + right - whole;
    if err.abs() <= 15.0 * tol || depth == 0 {
        return Ok(left + right + err / 15.0);
    }
    let l = simpson_refine(f, a, m, fa, flm, fm, tol / 2.0, depth - 1)?;
    let r = simpson_refine(f, m, b, fm, frm, fb, tol / 2.0, depth - 1)?;
    Ok(l + r)
}

/// Composite Simpson with a fixed number of panels (independent check path).
pub fn fixed_simpson<F>(f: &mut F, a: f64, b: f64, panels: usize) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if b == a {
        return Ok(0.0);
    }
    let n = panels.max(1);
    let h = (b - a) / n as f64;
    let mut acc = f(a)? + f(b)?;
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h)?;
    }
    if n % 2 == 1 {
        // odd panel count: fall back to per-panel Simpson on midpoints
        let mut total = 0.0;
        for i in 0..n {
            let lo = a + i as f64 * h;
            let hi = lo + h;
            total += (hi - lo) / 6.0 * (f(lo)? + 4.0 * f(0.5 * (lo + hi))? + f(hi)?);
        }
        return Ok(total);
    }
    Ok(acc * h / 3.0)
}
