use num_complex::Complex64;

use super::density::{BipartiteDensityMatrix, Matrix9};
use super::ChannelParams;
use crate::error::{Error, Result};
use crate::lgmodes::{normalization, LgIndex};

/// Couplings of the exponent, as `(i, j, kind)` over the generating
/// variables `μ = (μ_m, μ_p, μ_n, μ_q)`. Cross-photon pairs carry `M0 − M1`
/// and `S⁺`; same-side pairs carry `M0 + M1` and `S⁻`.
#[derive(Clone, Copy)]
enum Coupling {
    Same,
    Opposite,
}

const PAIRS: [(usize, usize, Coupling); 6] = [
    (0, 2, Coupling::Same),
    (0, 3, Coupling::Same),
    (1, 2, Coupling::Same),
    (1, 3, Coupling::Same),
    (0, 1, Coupling::Opposite),
    (2, 3, Coupling::Opposite),
];

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// `S±` selector. `sign(0) = 0`, so any coupling touching an ℓ = 0 index is
/// switched off; such an index is never differentiated anyway.
fn selector(a: i32, b: i32, kind: Coupling) -> bool {
    let (sa, sb) = (a.signum(), b.signum());
    if sa == 0 || sb == 0 {
        return false;
    }
    match kind {
        Coupling::Same => sa == sb,
        Coupling::Opposite => sa == -sb,
    }
}

/// Coefficient `∂^{|ℓ_m|}∂^{|ℓ_n|}∂^{|ℓ_p|}∂^{|ℓ_q|} 𝒢_ρ |_{μ=0}` times the
/// four LG normalizations, for `ells = [ℓ_m, ℓ_n, ℓ_p, ℓ_q]`.
///
/// `ℓ_m, ℓ_n` label photon A (row and column), `ℓ_p, ℓ_q` photon B.
pub fn generating_coefficient(ells: [i32; 4], params: &ChannelParams) -> Result<f64> {
    let [lm, ln, lp, lq] = ells;
    let big = ells.iter().map(|l| l.unsigned_abs()).max().unwrap_or(0);
    if ells.iter().any(|l| l.unsigned_abs() != 0 && l.unsigned_abs() != big) {
        return Err(Error::param(
            "ells",
            format!("all |ℓ| must be 0 or a common value, got {ells:?}"),
        ));
    }
    let mu = [lm, lp, ln, lq];
    let degree = mu.map(|l| l.unsigned_abs());
    let (m0, m1) = (params.m0(), params.m1());
    let weights: Vec<(usize, usize, f64)> = PAIRS
        .iter()
        .filter(|(i, j, kind)| selector(mu[*i], mu[*j], *kind))
        .map(|&(i, j, kind)| {
            let c = match kind {
                Coupling::Same => m0 - m1,
                Coupling::Opposite => m0 + m1,
            };
            (i, j, c)
        })
        .collect();

    // Sum over pair multiplicities k_t with Σ_{t∋i} k_t = degree[i].
    fn expand(
        weights: &[(usize, usize, f64)],
        remaining: [u32; 4],
        acc: f64,
        total: &mut f64,
    ) {
        let Some((&(i, j, c), rest)) = weights.split_first() else {
            if remaining == [0; 4] {
                *total += acc;
            }
            return;
        };
        let kmax = remaining[i].min(remaining[j]);
        let mut term = acc;
        for k in 0..=kmax {
            if k > 0 {
                term *= c / f64::from(k);
            }
            let mut r = remaining;
            r[i] -= k;
            r[j] -= k;
            expand(rest, r, term, total);
        }
    }
    let mut sum = 0.0;
    expand(&weights, degree, 1.0, &mut sum);

    let derivative_factor: f64 = degree.iter().map(|&d| factorial(d)).product();
    let norms: f64 = mu.iter().map(|&l| normalization(LgIndex::new(0, l))).product();
    Ok(m0 * m1 * derivative_factor * sum * norms)
}

/// Output state of the quadratic structure-function model for the
/// `{-ℓ, 0, +ℓ}` basis, assembled as `ρ[(ℓ_m,ℓ_p),(ℓ_n,ℓ_q)]` and normalized.
pub fn analytic_density_matrix(ell: u32, params: &ChannelParams) -> Result<BipartiteDensityMatrix> {
    if !(1..=3).contains(&ell) {
        return Err(Error::param("ell", format!("basis ℓ must be 1, 2 or 3, got {ell}")));
    }
    let l = ell as i32;
    let ells = [-l, 0, l];
    let mut rho = Matrix9::zeros();
    for (a, &lm) in ells.iter().enumerate() {
        for (b, &lp) in ells.iter().enumerate() {
            for (c, &ln) in ells.iter().enumerate() {
                for (d, &lq) in ells.iter().enumerate() {
                    let v = generating_coefficient([lm, ln, lp, lq], params)?;
                    rho[(3 * a + b, 3 * c + d)] = Complex64::from(v);
                }
            }
        }
    }
    BipartiteDensityMatrix::from_unnormalized(rho, ell)
}
