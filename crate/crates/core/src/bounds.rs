//! Quantum speed limits: each bound is a distance between the endpoint
//! states divided by an average speed, with validity gates and a combined
//! report.

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

use crate::dynamics::{gp_distance_numeric, GpOptions};
use crate::error::{QslError, Result};
use crate::geometry;
use crate::linalg;
use crate::states::DensityOperator;

/// Rounding slack in the spectral-width gate, so that boundary cases such
/// as width = 3·min stay on the valid side.
pub const WIDTH_SLACK: f64 = 1e-12;

/// Slack used when checking ordering relations between bounds.
pub const ORDERING_TOL: f64 = 1e-8;

fn check_delta(delta_e: f64) -> Result<()> {
    if !(delta_e > 0.0) || !delta_e.is_finite() {
        return Err(QslError::NonpositiveUncertainty(delta_e));
    }
    Ok(())
}

/// Mandelstam–Tamm bound arccos√tr(ρ₀ρ₁)/ΔE for pure states.
pub fn tau_mt(rho0: &DensityOperator, rho1: &DensityOperator, delta_e: f64) -> Result<f64> {
    check_delta(delta_e)?;
    Ok(geometry::fs_distance_pure(rho0, rho1)? / delta_e)
}

/// Grassmann bound: product-Grassmann distance over ΔE.
pub fn tau_g(rho0: &DensityOperator, rho1: &DensityOperator, delta_e: f64) -> Result<f64> {
    check_delta(delta_e)?;
    Ok(geometry::product_grassmann_distance(rho0, rho1)? / delta_e)
}

/// Plücker bound √(Σ_j p_j arccos²|det F_{j;0}†F_{j;1}|)/ΔE.
pub fn tau_fs(rho0: &DensityOperator, rho1: &DensityOperator, delta_e: f64) -> Result<f64> {
    check_delta(delta_e)?;
    Ok(geometry::product_plucker_distance(rho0, rho1)? / delta_e)
}

/// Uhlmann bound: Bures angle over ΔE. Defined for any pair of states.
pub fn tau_u(rho0: &DensityOperator, rho1: &DensityOperator, delta_e: f64) -> Result<f64> {
    check_delta(delta_e)?;
    Ok(geometry::bures_angle(rho0, rho1)? / delta_e)
}

/// Fröwis bound 2·(Bures angle)/⟨√F⟩.
pub fn tau_frowis(rho0: &DensityOperator, rho1: &DensityOperator, sqrt_qfi_average: f64) -> Result<f64> {
    check_delta(sqrt_qfi_average)?;
    Ok(2.0 * geometry::bures_angle(rho0, rho1)? / sqrt_qfi_average)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WyBound {
    pub value: f64,
    pub valid: bool,
    pub reason: Option<String>,
}

/// Wigner–Yanase bound arccos(tr√ρ₀√ρ₁)/ΔE. It is a speed limit only when
/// ρ₀ is faithful and the width of its spectrum is at most three times its
/// smallest eigenvalue; otherwise the value is returned flagged invalid.
pub fn tau_wy(rho0: &DensityOperator, rho1: &DensityOperator, delta_e: f64) -> Result<WyBound> {
    check_delta(delta_e)?;
    let value = geometry::wy_distance(rho0, rho1)? / delta_e;
    let spectrum = rho0.full_spectrum();
    let max = spectrum.first().copied().unwrap_or(0.0);
    let min = spectrum.last().copied().unwrap_or(0.0);
    let reason = if !rho0.is_faithful() {
        Some(format!("initial state is not faithful (rank {} < {})", rho0.rank(), rho0.dim()))
    } else if max - min > 3.0 * min + WIDTH_SLACK {
        Some(format!("spectral width {:.6} exceeds three times the smallest eigenvalue {:.6}", max - min, min))
    } else {
        None
    };
    Ok(WyBound { value, valid: reason.is_none(), reason })
}

#[derive(Debug, Clone, Serialize)]
pub struct TauP {
    pub lower: f64,
    pub upper: f64,
    pub exact: Option<f64>,
    /// Which closed form produced `exact`.
    pub exact_case: Option<String>,
    pub converged: bool,
}

/// Bound from the g_p distance, as an interval: the product-Grassmann
/// distance below, the best connecting curve found above, both over ΔE.
/// Three cases have a known value: states with two distinct eigenvalues,
/// orthogonal supports, and commuting states related by an involutive
/// permutation of eigenvectors. When one applies, `upper` equals it and no
/// search is run.
pub fn tau_p(rho0: &DensityOperator, rho1: &DensityOperator, delta_e: f64, opts: &GpOptions) -> Result<TauP> {
    check_delta(delta_e)?;
    let lower = geometry::product_grassmann_distance(rho0, rho1)?;
    if let Some((value, case)) = exact_gp_distance(rho0, rho1)? {
        return Ok(TauP {
            lower: lower / delta_e,
            upper: value.max(lower) / delta_e,
            exact: Some(value / delta_e),
            exact_case: Some(case.into()),
            converged: true,
        });
    }
    let d = gp_distance_numeric(rho0, rho1, opts)?;
    Ok(TauP {
        lower: d.lower / delta_e,
        upper: d.upper / delta_e,
        exact: None,
        exact_case: None,
        converged: d.converged,
    })
}

/// The g_p distance where a closed form is known.
pub fn exact_gp_distance(rho0: &DensityOperator, rho1: &DensityOperator) -> Result<Option<(f64, &'static str)>> {
    let pairs = geometry::paired_eigenspaces(rho0, rho1)?;
    let spec = rho0.spectrum();

    if spec.len() == 2 {
        let (p1, a, b) = &pairs[0];
        let p2 = spec.eigenvalues[1];
        let d = geometry::grassmann_distance(a, b)?;
        return Ok(Some(((p1 + p2).sqrt() * d, "two-eigenvalues")));
    }
    if spec.len() == 1 {
        return Ok(Some((0.0, "single-eigenvalue")));
    }

    let overlap = rho0.support_projector() * rho1.support_projector();
    if overlap.norm() < 1e-12 {
        return Ok(Some((FRAC_PI_2, "orthogonal-supports")));
    }

    if let Some(moved) = commuting_involution_weight(rho0, rho1) {
        return Ok(Some((FRAC_PI_2 * moved.sqrt(), "commuting-involution")));
    }
    Ok(None)
}

/// For commuting nondegenerate states with ρ₁ = Σ_j p_j |u_σ(j)⟩⟨u_σ(j)|
/// and σ an involution, Σ_{j≠σ(j)} p_j.
fn commuting_involution_weight(rho0: &DensityOperator, rho1: &DensityOperator) -> Option<f64> {
    if rho0.spectrum().multiplicities.iter().any(|&m| m > 1) {
        return None;
    }
    if linalg::commutator(rho0.matrix(), rho1.matrix()).norm() > 1e-10 {
        return None;
    }
    let basis = rho0.eigenbasis();
    let p = rho0.full_spectrum();
    let in_basis = basis.adjoint() * rho1.matrix() * &basis;
    let n = p.len();
    let mut sigma = vec![usize::MAX; n];
    for j in 0..n {
        // ρ₁ has weight p_j on u_σ(j).
        let k = (0..n).find(|&k| (in_basis[(k, k)].re - p[j]).abs() < 1e-9)?;
        sigma[j] = k;
    }
    if sigma.iter().enumerate().any(|(j, &s)| sigma[s] != j) {
        return None;
    }
    Some(sigma.iter().enumerate().filter(|(j, s)| *j != **s).map(|(j, _)| p[j]).sum())
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderingCheck {
    pub relation: String,
    pub holds: bool,
}

#[derive(Debug, Clone, Default)]
pub struct BoundsOptions {
    pub gp: GpOptions,
    /// Trajectory average of √F; enables the Fröwis bound.
    pub sqrt_qfi_average: Option<f64>,
    /// Skip the g_p search when no closed form applies.
    pub skip_gp_search: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub delta_e: f64,
    pub isospectral: bool,
    pub tau_mt: Option<f64>,
    pub tau_g: Option<f64>,
    pub tau_fs: Option<f64>,
    pub tau_u: f64,
    pub tau_frowis: Option<f64>,
    pub tau_frowis_note: String,
    pub tau_wy: WyBound,
    pub tau_p: Option<TauP>,
    /// τ_G − τ_U, reported without any claim about its sign.
    pub tau_g_minus_tau_u: Option<f64>,
    pub warnings: Vec<String>,
    pub ordering: Vec<OrderingCheck>,
}

impl BoundReport {
    pub fn ordering_holds(&self) -> bool {
        self.ordering.iter().all(|c| c.holds)
    }

    /// Every bound that is a valid speed limit for this pair, by name.
    pub fn valid_bounds(&self) -> Vec<(&'static str, f64)> {
        let mut out = Vec::new();
        if let Some(v) = self.tau_mt {
            out.push(("tau_mt", v));
        }
        if let Some(v) = self.tau_g {
            out.push(("tau_g", v));
        }
        if let Some(v) = self.tau_fs {
            out.push(("tau_fs", v));
        }
        out.push(("tau_u", self.tau_u));
        if let Some(v) = self.tau_frowis {
            out.push(("tau_frowis", v));
        }
        if self.tau_wy.valid {
            out.push(("tau_wy", self.tau_wy.value));
        }
        if let Some(p) = &self.tau_p {
            out.push(("tau_p_lower", p.lower));
        }
        out
    }
}

/// Every applicable bound for the pair, with validity flags and the outcome
/// of the ordering relations between them.
pub fn compare_bounds(rho0: &DensityOperator, rho1: &DensityOperator, delta_e: f64, opts: &BoundsOptions) -> Result<BoundReport> {
    check_delta(delta_e)?;
    rho0.check_dim(rho1.dim())?;
    let isospectral = rho0.is_isospectral(rho1, geometry::ISOSPECTRAL_TOL);
    let mut warnings = Vec::new();

    let pure = rho0.is_pure() && rho1.is_pure();
    let tau_mt = if pure { Some(tau_mt(rho0, rho1, delta_e)?) } else { None };
    let (tau_g, tau_fs, tau_p) = if isospectral {
        let p = if opts.skip_gp_search && exact_gp_distance(rho0, rho1)?.is_none() {
            None
        } else {
            Some(tau_p(rho0, rho1, delta_e, &opts.gp)?)
        };
        (Some(tau_g(rho0, rho1, delta_e)?), Some(tau_fs(rho0, rho1, delta_e)?), p)
    } else {
        warnings.push("states are not isospectral: no unitary evolution connects them; tau_g, tau_fs and tau_p do not apply".into());
        (None, None, None)
    };
    if let Some(p) = &tau_p {
        if !p.converged {
            warnings.push("g_p search did not reach the final state; tau_p upper is the length of a connecting non-geodesic path".into());
        }
    }
    let tau_u = tau_u(rho0, rho1, delta_e)?;
    let (tau_frowis, tau_frowis_note) = match opts.sqrt_qfi_average {
        Some(avg) if avg > 0.0 => (Some(tau_frowis(rho0, rho1, avg)?), "denominator is the supplied trajectory average of √F".to_string()),
        Some(_) => (None, "trajectory average of √F is zero: the state never moves".to_string()),
        None => (None, "needs the trajectory average of √F".to_string()),
    };
    let tau_wy = tau_wy(rho0, rho1, delta_e)?;
    if !tau_wy.valid {
        warnings.push(format!("tau_wy is not a speed limit here: {}", tau_wy.reason.clone().unwrap_or_default()));
    }

    let mut ordering = Vec::new();
    let mut check = |relation: &str, holds: bool| ordering.push(OrderingCheck { relation: relation.into(), holds });
    if let (Some(fs), Some(g)) = (tau_fs, tau_g) {
        check("tau_fs <= tau_g", fs <= g + ORDERING_TOL);
    }
    if let (Some(g), Some(p)) = (tau_g, &tau_p) {
        check("tau_g <= tau_p.upper", g <= p.upper + ORDERING_TOL);
        check("tau_p.lower <= tau_p.upper", p.lower <= p.upper + ORDERING_TOL);
    }
    if let (Some(f), Some(avg)) = (tau_frowis, opts.sqrt_qfi_average) {
        if avg <= 2.0 * delta_e {
            check("tau_u <= tau_frowis", tau_u <= f + ORDERING_TOL);
        }
    }
    if let Some(mt) = tau_mt {
        let same = |x: Option<f64>| x.is_none_or(|v| (v - mt).abs() < 1e-10);
        check("pure states: tau_g = tau_fs = tau_u = tau_mt", same(tau_g) && same(tau_fs) && same(Some(tau_u)));
    }
    let all = [tau_mt, tau_g, tau_fs, Some(tau_u), tau_frowis, Some(tau_wy.value)];
    check("all bounds nonnegative", all.iter().flatten().all(|v| *v >= 0.0));

    Ok(BoundReport {
        delta_e,
        isospectral,
        tau_mt,
        tau_g,
        tau_fs,
        tau_u,
        tau_frowis,
        tau_frowis_note,
        tau_wy,
        tau_g_minus_tau_u: tau_g.map(|g| g - tau_u),
        tau_p,
        warnings,
        ordering,
    })
}
