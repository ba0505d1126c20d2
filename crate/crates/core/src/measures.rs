//! Wave, particle and distinguishability measures, visibilities and the
//! classical distances between outcome distributions.

use num_complex::Complex64;
use serde::Serialize;

use crate::combinatorics::Transversal;
use crate::error::{Error, Result};
use crate::linalg::{self, factor_fidelity, factor_trace_distance, CMatrix};
use crate::states::{sparse_inner, Amplitudes, ExternalBlock, PreparedState};
use crate::tolerances::Tolerances;

/// Outcome distribution with semantic labels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbDist {
    labels: Vec<String>,
    probs: Vec<f64>,
    /// Drift of the raw sum from one when it was renormalized.
    #[serde(skip_serializing_if = "Option::is_none")]
    renormalized: Option<f64>,
}

impl ProbDist {
    pub fn new(labels: Vec<String>, probs: Vec<f64>) -> Result<Self> {
        Self::with_tolerances(labels, probs, &Tolerances::DEFAULT)
    }

    /// Negative entries down to `-prob_negative` and entries smaller than
    /// `prob_noise` in magnitude become zero. A sum within `prob_sum` of one
    /// is kept as is, within `prob_fail` it is renormalized, beyond that the
    /// distribution is rejected.
    pub fn with_tolerances(labels: Vec<String>, mut probs: Vec<f64>, tol: &Tolerances) -> Result<Self> {
        if labels.len() != probs.len() {
            return Err(Error::LengthMismatch {
                expected: labels.len(),
                found: probs.len(),
            });
        }
        for (l, p) in labels.iter().zip(probs.iter_mut()) {
            if !p.is_finite() {
                return Err(Error::NonPhysical(format!("p({l}) is not finite")));
            }
            if *p < -tol.prob_negative {
                return Err(Error::NonPhysical(format!("p({l}) = {p:e} is negative")));
            }
            if *p < tol.prob_noise {
                *p = 0.0;
            }
        }
        let sum: f64 = probs.iter().sum();
        let drift = (sum - 1.0).abs();
        let mut renormalized = None;
        if drift > tol.prob_fail {
            return Err(Error::NonPhysical(format!("probabilities sum to {sum}")));
        }
        if drift > tol.prob_sum {
            probs.iter_mut().for_each(|p| *p /= sum);
            renormalized = Some(drift);
        }
        Ok(Self {
            labels,
            probs,
            renormalized,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn renormalized(&self) -> Option<f64> {
        self.renormalized
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.labels.iter().position(|l| l == label).map(|i| self.probs[i])
    }
}

fn same_labels(a: &ProbDist, b: &ProbDist) -> Result<()> {
    if a.labels != b.labels {
        return Err(Error::LabelMismatch);
    }
    Ok(())
}

/// `(1/2) Σ |p_j - q_j|`.
pub fn kolmogorov(a: &ProbDist, b: &ProbDist) -> Result<f64> {
    same_labels(a, b)?;
    let d: f64 = a.probs.iter().zip(&b.probs).map(|(p, q)| (p - q).abs()).sum();
    Ok((0.5 * d).clamp(0.0, 1.0))
}

/// `Σ √(p_j q_j)`.
pub fn bhattacharyya(a: &ProbDist, b: &ProbDist) -> Result<f64> {
    same_labels(a, b)?;
    let f: f64 = a.probs.iter().zip(&b.probs).map(|(p, q)| (p * q).sqrt()).sum();
    Ok(f.clamp(0.0, 1.0))
}

/// `1 - Σ √(p_j q_j) = (1/2) Σ (√p_j - √q_j)²` for normalized distributions.
/// The right-hand form keeps nearly identical distributions at zero instead
/// of rounding noise.
pub fn hellinger_sq(a: &ProbDist, b: &ProbDist) -> Result<f64> {
    same_labels(a, b)?;
    let h: f64 = a.probs.iter().zip(&b.probs).map(|(p, q)| (p.sqrt() - q.sqrt()).powi(2)).sum();
    Ok((0.5 * h).clamp(0.0, 1.0))
}

fn check_r(r: usize) -> Result<f64> {
    if r < 2 {
        return Err(Error::Degenerate);
    }
    Ok(r as f64)
}

/// Normalization `R / (R - 1)`.
fn gain(r: usize) -> Result<f64> {
    let r = check_r(r)?;
    Ok(r / (r - 1.0))
}

/// `(W_C, W_P)` from a matrix of overlaps or block entries; only the
/// moduli of off-diagonal entries matter, scaled by `scale`.
fn wave_from_offdiagonal(m: &CMatrix, scale: f64) -> Result<(f64, f64)> {
    let r = m.nrows();
    let rf = check_r(r)?;
    let mut l1 = 0.0;
    let mut l2 = 0.0;
    for mu in 0..r {
        for nu in 0..r {
            if mu != nu {
                let a = m[(mu, nu)].norm() * scale;
                l1 += a;
                l2 += a * a;
            }
        }
    }
    let pairs = rf * (rf - 1.0);
    Ok(((l1 / pairs).clamp(0.0, 1.0), (l2 / pairs).sqrt().clamp(0.0, 1.0)))
}

/// `W_C = (1/(R-1)) Σ_{mu≠nu} |[rho_E]_{mu nu}|`.
pub fn wave_coherence(p: &PreparedState) -> Result<f64> {
    let t = p.transversal()?;
    check_r(t.r_count())?;
    Ok(wave_from_offdiagonal(&p.overlap_matrix(&t)?, 1.0)?.0)
}

/// `W_P = √((R/(R-1)) (tr rho_E² - 1/R))`.
pub fn wave_purity(p: &PreparedState) -> Result<f64> {
    let t = p.transversal()?;
    check_r(t.r_count())?;
    Ok(wave_from_offdiagonal(&p.overlap_matrix(&t)?, 1.0)?.1)
}

/// `(W_C, W_P)` of a block, whose entries already carry the `1/R`.
pub fn wave_measures_block(b: &ExternalBlock) -> Result<(f64, f64)> {
    wave_from_offdiagonal(b.matrix(), b.r_count() as f64)
}

/// Labeled internal states of one prepared state, kept as dense factors
/// `A_mu` (columns `√q_j Omega_{kappa mu}^(j)`) and sparse components.
struct Labeled {
    r: usize,
    weights: Vec<f64>,
    sparse: Vec<Vec<Amplitudes>>,
    m: usize,
    dim: usize,
}

impl Labeled {
    fn new(p: &PreparedState, t: &Transversal) -> Result<Self> {
        let comps = p.labeled_components(t)?;
        let dim = p.internal().dim().unwrap_or(usize::MAX);
        let weights = comps.iter().map(|(q, _)| *q).collect();
        let sparse = comps.into_iter().map(|(_, o)| o).collect();
        Ok(Self {
            r: t.r_count(),
            weights,
            sparse,
            m: p.internal().m(),
            dim,
        })
    }

    fn factor(&self, mu: usize) -> Result<CMatrix> {
        if self.dim > crate::tolerances::Caps::DEFAULT.dim {
            return Err(Error::CapExceeded {
                what: "m^N",
                value: self.dim,
                cap: crate::tolerances::Caps::DEFAULT.dim,
            });
        }
        let mut a = CMatrix::zeros(self.dim, self.weights.len());
        for (j, (q, omegas)) in self.weights.iter().zip(&self.sparse).enumerate() {
            let w = q.sqrt();
            for (t, c) in &omegas[mu] {
                a[(crate::combinatorics::basis_index(t, self.m), j)] += c * w;
            }
        }
        Ok(a)
    }

    /// `F(rho_I^mu, rho_I^nu)` as the nuclear norm of the cross-overlap matrix.
    fn fidelity(&self, mu: usize, nu: usize) -> f64 {
        let l = self.weights.len();
        let g = CMatrix::from_fn(l, l, |j, k| {
            let w = (self.weights[j] * self.weights[k]).sqrt();
            Complex64::new(w, 0.0) * sparse_inner(&self.sparse[j][mu], &self.sparse[k][nu])
        });
        linalg::nuclear_norm(&g).clamp(0.0, 1.0)
    }
}

/// Mean over ordered pairs `mu ≠ nu` of a symmetric pair function.
fn pair_mean(r: usize, mut f: impl FnMut(usize, usize) -> Result<f64>) -> Result<f64> {
    let rf = check_r(r)?;
    let mut acc = 0.0;
    for mu in 0..r {
        for nu in mu + 1..r {
            acc += 2.0 * f(mu, nu)?;
        }
    }
    Ok(acc / (rf * (rf - 1.0)))
}

/// `P_T`: mean pairwise trace distance of the labeled internal states.
pub fn particle_trace(p: &PreparedState) -> Result<f64> {
    let t = p.transversal()?;
    check_r(t.r_count())?;
    let l = Labeled::new(p, &t)?;
    let factors = (0..l.r).map(|mu| l.factor(mu)).collect::<Result<Vec<_>>>()?;
    Ok(pair_mean(l.r, |mu, nu| factor_trace_distance(&factors[mu], &factors[nu]))?.clamp(0.0, 1.0))
}

/// `ℱ`: root mean square of the pairwise fidelities.
pub fn pairwise_fidelity(p: &PreparedState) -> Result<f64> {
    let t = p.transversal()?;
    check_r(t.r_count())?;
    let l = Labeled::new(p, &t)?;
    Ok(pair_mean(l.r, |mu, nu| Ok(l.fidelity(mu, nu).powi(2)))?.clamp(0.0, 1.0).sqrt())
}

/// `P_F = √(1 - ℱ²)`.
pub fn particle_fidelity(p: &PreparedState) -> Result<f64> {
    let f = pairwise_fidelity(p)?;
    Ok((1.0 - f * f).max(0.0).sqrt())
}

/// Wave and particle measures of a prepared state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasureReport {
    pub w_c: f64,
    pub w_p: f64,
    pub p_t: f64,
    pub p_f: f64,
    pub pairwise_f: f64,
    pub r_count: usize,
}

pub fn measure_report(p: &PreparedState) -> Result<MeasureReport> {
    let t = p.transversal()?;
    let r = t.r_count();
    check_r(r)?;
    let (w_c, w_p) = wave_from_offdiagonal(&p.overlap_matrix(&t)?, 1.0)?;
    let l = Labeled::new(p, &t)?;
    let factors = (0..r).map(|mu| l.factor(mu)).collect::<Result<Vec<_>>>()?;
    let p_t = pair_mean(r, |mu, nu| factor_trace_distance(&factors[mu], &factors[nu]))?.clamp(0.0, 1.0);
    let f2 = pair_mean(r, |mu, nu| Ok(factor_fidelity(&factors[mu], &factors[nu]).powi(2)))?.clamp(0.0, 1.0);
    Ok(MeasureReport {
        w_c,
        w_p,
        p_t,
        p_f: (1.0 - f2).max(0.0).sqrt(),
        pairwise_f: f2.sqrt(),
        r_count: r,
    })
}

/// `(𝒫_T, 𝒫_F)` from the distributions `P^kappa`, one per labeling.
pub fn classical_particle_measures(dists: &[ProbDist]) -> Result<(f64, f64)> {
    let r = dists.len();
    check_r(r)?;
    for d in &dists[1..] {
        same_labels(&dists[0], d)?;
    }
    let t = pair_mean(r, |a, b| kolmogorov(&dists[a], &dists[b]))?;
    // 1 - B² = h (2 - h) with h the squared Hellinger distance.
    let one_minus_f2 = pair_mean(r, |a, b| {
        let h = hellinger_sq(&dists[a], &dists[b])?;
        Ok(h * (2.0 - h))
    })?;
    Ok((t.clamp(0.0, 1.0), one_minus_f2.clamp(0.0, 1.0).sqrt()))
}

/// `(D_T, D_F)` of a block.
pub fn distinguishability_block(b: &ExternalBlock) -> Result<(f64, f64)> {
    let g = gain(b.r_count())?;
    let rho = b.density();
    let dist = b.distinguishable();
    let d = linalg::trace_distance(&dist, &rho)?;
    let f = linalg::fidelity(&dist, &rho)?;
    let d_t = 1.0 - g * d;
    let d_f = 1.0 - g * (1.0 - f * f);
    Ok((d_t.clamp(0.0, 1.0), d_f.clamp(0.0, 1.0)))
}

/// `D_T = 1 - (R/(R-1)) D(rho_E^D, rho_E)`,
/// `D_F = 1 - (R/(R-1)) (1 - F²(rho_E^D, rho_E))`.
pub fn distinguishability_measures(p: &PreparedState) -> Result<(f64, f64)> {
    distinguishability_block(&ExternalBlock::from_prepared(p)?)
}

/// `(V_T, V_F)` of the statistics `p_actual` against the distinguishable
/// statistics `p_dist`.
pub fn visibilities(p_dist: &ProbDist, p_actual: &ProbDist, r_count: usize) -> Result<(f64, f64)> {
    let g = gain(r_count)?;
    let d = kolmogorov(p_dist, p_actual)?;
    let h = hellinger_sq(p_dist, p_actual)?;
    Ok(((g * d).max(0.0), (g * h * (2.0 - h)).max(0.0)))
}

/// `lambda = <psi_B(F)| rho_E |psi_B(F)>` of a block.
pub fn ideal_fidelity_lambda_block(b: &ExternalBlock) -> Result<f64> {
    let psi = nalgebra::DVector::from_vec(b.ideal_vector()?);
    Ok((psi.adjoint() * b.matrix() * &psi)[(0, 0)].re.clamp(0.0, 1.0))
}

pub fn ideal_fidelity_lambda(p: &PreparedState) -> Result<f64> {
    ideal_fidelity_lambda_block(&ExternalBlock::from_prepared(p)?)
}

/// Residual `‖rho_E psi - lambda psi‖₂` of the eigenvalue relation.
pub fn eigen_residual_block(b: &ExternalBlock) -> Result<f64> {
    let psi = nalgebra::DVector::from_vec(b.ideal_vector()?);
    let lam = ideal_fidelity_lambda_block(b)?;
    Ok((b.matrix() * &psi - psi.scale(lam)).norm())
}
