//! Evolutions (single-particle lifts, Bose-Hubbard), POVMs and outcome
//! statistics.

use num_complex::Complex64;

use crate::combinatorics::{
    basis_digits, basis_index, enumerate_occupations_with_caps, right_transversal_with_caps, ModeOccupation,
    Permutation,
};
use crate::error::{Error, Result};
use crate::linalg::{
    self, checked_pow, tensor_power_with_caps, CMatrix, DensityMatrix, HermitianOperator, UnitaryOperator, ONE,
    ZERO,
};
use crate::measures::ProbDist;
use crate::states::{ExternalBlock, PreparedState};
use crate::tolerances::{Caps, Tolerances};

/// `u^{⊗N}`.
pub fn lift_single_particle(u: &UnitaryOperator, particles: usize) -> Result<UnitaryOperator> {
    tensor_power_with_caps(u, particles, &Caps::DEFAULT)
}

/// Balanced beam splitter `(1/√2) [[1, 1], [1, -1]]`.
pub fn beam_splitter() -> UnitaryOperator {
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    UnitaryOperator::new(CMatrix::from_row_slice(2, 2, &[h, h, h, -h])).expect("unitary")
}

fn full_dim(modes: usize, particles: usize) -> Result<usize> {
    let dim = checked_pow(modes, particles).unwrap_or(usize::MAX);
    if dim > Caps::DEFAULT.dim {
        return Err(Error::CapExceeded {
            what: "n^N",
            value: dim,
            cap: Caps::DEFAULT.dim,
        });
    }
    Ok(dim)
}

/// Operator `Pi_pi` on `(C^n)^{⊗N}` with `Pi_pi |E> = |E_pi>`.
pub fn slot_permutation_operator(pi: &Permutation, modes: usize) -> Result<CMatrix> {
    let n = pi.len();
    let dim = full_dim(modes, n)?;
    let mut m = CMatrix::zeros(dim, dim);
    for col in 0..dim {
        let d = basis_digits(col, modes, n);
        let row = basis_index(&pi.apply(&d)?, modes);
        m[(row, col)] = ONE;
    }
    Ok(m)
}

/// Chain Bose-Hubbard parameters in units with `ħ = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoseHubbardParams {
    pub n_sites: usize,
    pub particles: usize,
    pub j: f64,
    pub u: f64,
    pub omegas: Vec<f64>,
}

impl BoseHubbardParams {
    /// Double well with on-site energies `(0, tilt)`.
    pub fn double_well(particles: usize, j: f64, u: f64, tilt: f64) -> Self {
        Self {
            n_sites: 2,
            particles,
            j,
            u,
            omegas: vec![0.0, tilt],
        }
    }

    /// `ω_2 - ω_1` of a double well.
    pub fn tilt(&self) -> Option<f64> {
        (self.omegas.len() == 2).then(|| self.omegas[1] - self.omegas[0])
    }
}

/// `H = -J Σ_{<j,k>} Σ_α |j><k|_α + U Σ_j Σ_{α<β} |j><j|_α |j><j|_β + Σ_j ω_j Σ_α |j><j|_α`
/// in the first-quantized basis. Neighbours are `(j, j+1)` along a chain,
/// each pair entering with both hopping directions.
pub fn bose_hubbard_hamiltonian(p: &BoseHubbardParams) -> Result<HermitianOperator> {
    if p.n_sites == 0 || p.particles == 0 {
        return Err(Error::InvalidOccupation("sites and particles must be positive".into()));
    }
    if p.omegas.len() != p.n_sites {
        return Err(Error::LengthMismatch {
            expected: p.n_sites,
            found: p.omegas.len(),
        });
    }
    let (n, big_n) = (p.n_sites, p.particles);
    let dim = full_dim(n, big_n)?;
    let mut h = CMatrix::zeros(dim, dim);
    for col in 0..dim {
        let d = basis_digits(col, n, big_n);
        let mut diag = 0.0;
        for a in 0..big_n {
            diag += p.omegas[d[a]];
            for b in a + 1..big_n {
                if d[a] == d[b] {
                    diag += p.u;
                }
            }
        }
        h[(col, col)] += Complex64::new(diag, 0.0);
        for a in 0..big_n {
            for to in [d[a].wrapping_sub(1), d[a] + 1] {
                if to < n {
                    let mut e = d.clone();
                    e[a] = to;
                    h[(basis_index(&e, n), col)] += Complex64::new(-p.j, 0.0);
                }
            }
        }
    }
    HermitianOperator::new(h)
}

/// Labeled POVM effects.
#[derive(Debug, Clone)]
pub struct Povm {
    effects: Vec<(String, HermitianOperator)>,
}

impl Povm {
    /// Checks positivity of every effect and completeness.
    pub fn new(effects: Vec<(String, HermitianOperator)>) -> Result<Self> {
        let tol = Tolerances::DEFAULT;
        let Some((_, first)) = effects.first() else {
            return Err(Error::Unsupported("POVM without effects".into()));
        };
        let dim = first.dim();
        let mut sum = CMatrix::zeros(dim, dim);
        for (label, e) in &effects {
            if e.dim() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: e.dim(),
                });
            }
            let min = e.eig()?.values.first().copied().unwrap_or(0.0);
            if min < tol.psd_floor {
                return Err(Error::NotPsd { min_eigenvalue: min });
            }
            if label.is_empty() {
                return Err(Error::Unsupported("empty effect label".into()));
            }
            sum += e.matrix();
        }
        let dev = linalg::max_abs_entry(&(sum - CMatrix::identity(dim, dim)));
        if dev > tol.povm {
            return Err(Error::InvariantViolation(format!(
                "POVM effects sum to identity only within {dev:e}"
            )));
        }
        Ok(Self { effects })
    }

    pub fn effects(&self) -> &[(String, HermitianOperator)] {
        &self.effects
    }

    pub fn labels(&self) -> Vec<String> {
        self.effects.iter().map(|(l, _)| l.clone()).collect()
    }

    pub fn dim(&self) -> usize {
        self.effects[0].1.dim()
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn effect(&self, label: &str) -> Option<&HermitianOperator> {
        self.effects.iter().find(|(l, _)| l == label).map(|(_, e)| e)
    }
}

/// One projector per output occupation `S`, onto the span of the `|E_mu(S)>`.
pub fn povm_occupation(modes: usize, particles: usize) -> Result<Povm> {
    let dim = full_dim(modes, particles)?;
    let mut effects = Vec::new();
    for occ in enumerate_occupations_with_caps(modes, particles, &Caps::DEFAULT)? {
        let mut diag = vec![0.0; dim];
        for a in right_transversal_with_caps(&occ, &Caps::DEFAULT)?.assignments() {
            diag[a.basis_index(modes)] = 1.0;
        }
        effects.push((occ.to_string(), HermitianOperator::from_real_diagonal(&diag)));
    }
    Povm::new(effects)
}

/// Density correlators of a double well. With `M_j = (1/N) Σ_α |j><j|_α`,
/// the effects are the binomial terms of `(M_1 + M_2)^k`.
pub fn povm_kpoint(modes: usize, particles: usize, k: usize) -> Result<Povm> {
    if modes != 2 {
        return Err(Error::Unsupported(format!("{k}-point POVM needs 2 modes, got {modes}")));
    }
    if !(1..=4).contains(&k) || particles < k {
        return Err(Error::Unsupported(format!("{k}-point POVM with {particles} particles")));
    }
    // (coefficient, power of M_1, power of M_2) in the conventional order.
    let terms: &[(f64, u32, u32)] = match k {
        1 => &[(1.0, 1, 0), (1.0, 0, 1)],
        2 => &[(1.0, 2, 0), (1.0, 0, 2), (2.0, 1, 1)],
        3 => &[(1.0, 3, 0), (1.0, 0, 3), (3.0, 1, 2), (3.0, 2, 1)],
        _ => &[(1.0, 4, 0), (1.0, 0, 4), (4.0, 1, 3), (4.0, 3, 1), (6.0, 2, 2)],
    };
    let dim = full_dim(modes, particles)?;
    let density: Vec<(f64, f64)> = (0..dim)
        .map(|i| {
            let d = basis_digits(i, modes, particles);
            let n1 = d.iter().filter(|&&x| x == 0).count() as f64 / particles as f64;
            (n1, 1.0 - n1)
        })
        .collect();
    let effects = terms
        .iter()
        .map(|&(c, a, b)| {
            let diag: Vec<f64> = density.iter().map(|&(m1, m2)| c * m1.powi(a as i32) * m2.powi(b as i32)).collect();
            (kpoint_label(c, a, b), HermitianOperator::from_real_diagonal(&diag))
        })
        .collect();
    Povm::new(effects)
}

fn kpoint_label(c: f64, a: u32, b: u32) -> String {
    let factor = |j: u32, p: u32| match p {
        0 => None,
        1 => Some(format!("M{j}")),
        _ => Some(format!("M{j}^{p}")),
    };
    let mut parts = Vec::new();
    if c != 1.0 {
        parts.push(format!("{}", c as u32));
    }
    parts.extend(factor(1, a));
    parts.extend(factor(2, b));
    parts.join("*")
}

/// Projectors onto the non-negative (`"+"`) and negative (`"-"`) eigenspaces
/// of `rho_a - rho_b`.
pub fn povm_helstrom(rho_a: &DensityMatrix, rho_b: &DensityMatrix) -> Result<Povm> {
    helstrom_from_difference(&(rho_a.matrix() - rho_b.matrix()))
}

pub fn helstrom_from_difference(diff: &CMatrix) -> Result<Povm> {
    let eig = linalg::eigh(diff)?;
    let dim = diff.nrows();
    let tie = Tolerances::DEFAULT.prob_negative;
    let mut plus = CMatrix::zeros(dim, dim);
    let mut minus = CMatrix::zeros(dim, dim);
    for (k, &v) in eig.values.iter().enumerate() {
        let col = eig.vectors.column(k);
        let proj = col * col.adjoint();
        if v >= -tie {
            plus += proj;
        } else {
            minus += proj;
        }
    }
    Povm::new(vec![
        ("+".into(), HermitianOperator::new(linalg::symmetrize(&plus))?),
        ("-".into(), HermitianOperator::new(linalg::symmetrize(&minus))?),
    ])
}

/// `p(j) = tr[M_j U rho U†]`.
pub fn measure(rho: &DensityMatrix, u: &UnitaryOperator, povm: &Povm) -> Result<ProbDist> {
    if rho.dim() != u.dim() || rho.dim() != povm.dim() {
        return Err(Error::DimensionMismatch {
            left: rho.dim(),
            right: u.dim().max(povm.dim()),
        });
    }
    let evolved = u.matrix() * rho.matrix() * u.matrix().adjoint();
    measure_evolved(&evolved, povm)
}

/// Statistics of an already evolved state.
pub fn measure_evolved(evolved: &CMatrix, povm: &Povm) -> Result<ProbDist> {
    let probs = povm
        .effects
        .iter()
        .map(|(_, e)| e.expectation(evolved))
        .collect::<Result<Vec<_>>>()?;
    ProbDist::new(povm.labels(), probs)
}

/// `(p^D(j), Σ_{mu≠nu} [rho_E]_{mu nu} <E_nu|U† M_j U|E_mu>)` for one effect.
pub fn interference_decomposition(
    p: &PreparedState,
    u: &UnitaryOperator,
    effect: &HermitianOperator,
) -> Result<(f64, f64)> {
    interference_decomposition_block(&ExternalBlock::from_prepared(p)?, u, effect)
}

pub fn interference_decomposition_block(
    b: &ExternalBlock,
    u: &UnitaryOperator,
    effect: &HermitianOperator,
) -> Result<(f64, f64)> {
    let dim = b.full_dim()?;
    if u.dim() != dim || effect.dim() != dim {
        return Err(Error::DimensionMismatch {
            left: dim,
            right: u.dim().max(effect.dim()),
        });
    }
    let idx = b.basis_indices();
    // Columns U|E_mu>.
    let cols = CMatrix::from_fn(dim, idx.len(), |row, mu| u.matrix()[(row, idx[mu])]);
    let g = cols.adjoint() * effect.matrix() * &cols;
    let rho = b.matrix();
    let r = idx.len();
    let mut p_d = 0.0;
    let mut coh = ZERO;
    for mu in 0..r {
        p_d += (rho[(mu, mu)] * g[(mu, mu)]).re;
        for nu in 0..r {
            if mu != nu {
                coh += rho[(mu, nu)] * g[(nu, mu)];
            }
        }
    }
    Ok((p_d, coh.re))
}

/// Effects compressed to the labeling orbit of one external occupation:
/// `G_j = V† U† M_j U V` with `V` the columns `|E_mu>`. Every state
/// supported on the orbit is then measured in `R × R` arithmetic.
#[derive(Debug, Clone)]
pub struct OrbitMeasurement {
    labels: Vec<String>,
    blocks: Vec<CMatrix>,
}

impl OrbitMeasurement {
    pub fn new(b: &ExternalBlock, u: &UnitaryOperator, povm: &Povm) -> Result<Self> {
        let dim = b.full_dim()?;
        if u.dim() != dim || povm.dim() != dim {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: u.dim().max(povm.dim()),
            });
        }
        let idx = b.basis_indices();
        let cols = CMatrix::from_fn(dim, idx.len(), |row, mu| u.matrix()[(row, idx[mu])]);
        let blocks = povm
            .effects
            .iter()
            .map(|(_, e)| cols.adjoint() * e.matrix() * &cols)
            .collect();
        Ok(Self {
            labels: povm.labels(),
            blocks,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Compressed effect `G_j`.
    pub fn block(&self, j: usize) -> &CMatrix {
        &self.blocks[j]
    }

    /// Outcome distribution of an orbit block `rho` (R × R).
    pub fn probabilities(&self, rho: &CMatrix) -> Result<ProbDist> {
        let r = self.blocks[0].nrows();
        if rho.nrows() != r || rho.ncols() != r {
            return Err(Error::DimensionMismatch {
                left: r,
                right: rho.nrows(),
            });
        }
        let probs = self
            .blocks
            .iter()
            .map(|g| (0..r).map(|i| (0..r).map(|k| rho[(i, k)] * g[(k, i)]).sum::<Complex64>()).sum::<Complex64>().re)
            .collect();
        ProbDist::new(self.labels.clone(), probs)
    }
}

/// Statistics `P^kappa` for every labeling `kappa` of the transversal.
pub fn labeled_statistics(p: &PreparedState, u: &UnitaryOperator, povm: &Povm) -> Result<Vec<ProbDist>> {
    let t = p.transversal()?;
    t.reps()
        .iter()
        .map(|kappa| {
            let q = p.clone().with_preparation(p.preparation().compose(kappa)?)?;
            let rho = ExternalBlock::from_prepared(&q)?.embed()?;
            measure(&rho, u, povm)
        })
        .collect()
}

/// Occupation of every output label of [`povm_occupation`].
pub fn occupation_labels(modes: usize, particles: usize) -> Result<Vec<ModeOccupation>> {
    enumerate_occupations_with_caps(modes, particles, &Caps::DEFAULT)
}
