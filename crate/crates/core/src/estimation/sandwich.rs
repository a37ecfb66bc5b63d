//! Sandwich covariance `I^{-1} J I^{-T} / (NT)` for one or more jointly
//! estimated multiplicative-error equations.
//!
//! With equations `e, f` evaluated at the estimate,
//!
//! ```text
//! Σ_e   = mean x_e^{-2} ∂x_e ∂x_eᵀ        κ_e  = mean (y_e / x_e)²
//! Σ_ef  = mean (x_e x_f)^{-1} ∂x_e ∂x_fᵀ  κ_ef = mean (y_e / x_e)(y_f / x_f)
//! I = blockdiag(Σ_e),  J_ee = (κ_e − 1) Σ_e,  J_ef = (κ_ef − 1) Σ_ef
//! ```
//!
//! where means run over assets and days `2..=T`.

use nalgebra::DMatrix;

use super::equation::Contributions;

/// Relative singular-value cutoff below which `I` is treated as singular.
const SINGULAR_RTOL: f64 = 1e-12;

pub(crate) struct SandwichParts {
    pub cov: DMatrix<f64>,
    /// `κ` moments: diagonal `κ_e`, off-diagonal `κ_ef`.
    pub kappa: DMatrix<f64>,
    pub warnings: Vec<String>,
}

pub(crate) fn sandwich(eqs: &[&Contributions], n: usize, t_len: usize) -> SandwichParts {
    let m = eqs.len();
    let offsets: Vec<usize> = eqs
        .iter()
        .scan(0, |acc, c| {
            let o = *acc;
            *acc += c.k;
            Some(o)
        })
        .collect();
    let dim: usize = eqs.iter().map(|c| c.k).sum();
    let count = eqs.first().map_or(0, |c| c.x.len());
    let mut info = DMatrix::<f64>::zeros(dim, dim);
    let mut outer = DMatrix::<f64>::zeros(dim, dim);
    let mut kappa = DMatrix::<f64>::zeros(m, m);
    for a in 0..m {
        for b in a..m {
            let (ea, eb) = (eqs[a], eqs[b]);
            let (ka, kb) = (ea.k, eb.k);
            let mut sigma = DMatrix::<f64>::zeros(ka, kb);
            let mut kap = 0.0;
            for j in 0..count {
                let w = 1.0 / (ea.x[j] * eb.x[j]);
                let da = &ea.dx[j * ka..(j + 1) * ka];
                let db = &eb.dx[j * kb..(j + 1) * kb];
                for p in 0..ka {
                    for q in 0..kb {
                        sigma[(p, q)] += w * da[p] * db[q];
                    }
                }
                kap += (ea.y[j] / ea.x[j]) * (eb.y[j] / eb.x[j]);
            }
            let denom = count.max(1) as f64;
            sigma /= denom;
            kap /= denom;
            kappa[(a, b)] = kap;
            kappa[(b, a)] = kap;
            let (oa, ob) = (offsets[a], offsets[b]);
            outer.view_mut((oa, ob), (ka, kb)).copy_from(&(&sigma * (kap - 1.0)));
            if a == b {
                info.view_mut((oa, ob), (ka, kb)).copy_from(&sigma);
            } else {
                outer.view_mut((ob, oa), (kb, ka)).copy_from(&(sigma.transpose() * (kap - 1.0)));
            }
        }
    }
    let mut warnings = Vec::new();
    let svd = info.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let inv = if smax > 0.0 && smin > SINGULAR_RTOL * smax { info.clone().try_inverse() } else { None };
    let inv = inv.unwrap_or_else(|| {
        warnings.push(format!(
            "information matrix is singular (singular values {smin:.3e}..{smax:.3e}); using pseudo-inverse"
        ));
        info.clone().pseudo_inverse(SINGULAR_RTOL * smax.max(f64::MIN_POSITIVE)).expect("non-negative tolerance")
    });
    let mut cov = &inv * outer * inv.transpose() / (n * t_len) as f64;
    cov = (&cov + cov.transpose()) * 0.5;
    SandwichParts { cov, kappa, warnings }
}

pub(crate) fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Square roots of the diagonal; negative round-off is clipped to zero.
pub(crate) fn std_errors(m: &DMatrix<f64>) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, i)].max(0.0).sqrt()).collect()
}
