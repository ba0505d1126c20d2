//! Internal states, prepared many-particle states and their reduced
//! external and internal density matrices.
//!
//! The reduced external state lives on the span of `|E_mu>`, `mu` in the
//! transversal; [`ExternalBlock`] stores that `R x R` block and embeds it into
//! the full `n^N` space on request. The joint external/internal state is never
//! built here.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{
    basis_index, right_transversal_with_caps, ModeOccupation, Permutation,
    Transversal,
};
use crate::error::{Error, Result};
use crate::linalg::{checked_pow, CMatrix, DensityMatrix, ZERO};
use crate::tolerances::{Caps, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParticleKind {
    Boson,
    Fermion,
}

impl ParticleKind {
    /// `(-1)^pi`: always `+1` for bosons, the parity for fermions.
    pub fn sign(self, p: &Permutation) -> f64 {
        match self {
            ParticleKind::Boson => 1.0,
            ParticleKind::Fermion => f64::from(p.sign()),
        }
    }
}

impl fmt::Display for ParticleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParticleKind::Boson => "boson",
            ParticleKind::Fermion => "fermion",
        })
    }
}

impl std::str::FromStr for ParticleKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "boson" | "bosons" | "b" => Ok(ParticleKind::Boson),
            "fermion" | "fermions" | "f" => Ok(ParticleKind::Fermion),
            other => Err(Error::Parse(format!("unknown particle kind {other:?}"))),
        }
    }
}

/// Sparse amplitudes over internal tuples (zero-based letters).
pub type Amplitudes = BTreeMap<Vec<usize>, Complex64>;

/// One pure component `q_j, C^(j)` of an internal state.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub q: f64,
    pub amps: Amplitudes,
}

impl Component {
    pub fn new(q: f64, amps: Amplitudes) -> Self {
        Self { q, amps }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|c| c.norm_sqr()).sum()
    }
}

/// Mixed internal state of `N` particles with `m` internal levels.
#[derive(Debug, Clone, PartialEq)]
pub struct InternalState {
    m: usize,
    particles: usize,
    components: Vec<Component>,
}

impl InternalState {
    /// Checks shapes only; physical constraints are checked by
    /// [`validate_internal`].
    pub fn new(m: usize, particles: usize, components: Vec<Component>) -> Result<Self> {
        if m == 0 || particles == 0 {
            return Err(Error::Parse("m and N must be positive".into()));
        }
        if components.is_empty() {
            return Err(Error::Parse("internal state has no components".into()));
        }
        for (j, comp) in components.iter().enumerate() {
            if !comp.q.is_finite() {
                return Err(Error::Parse(format!("component {j}: weight is not finite")));
            }
            for (t, c) in &comp.amps {
                if t.len() != particles {
                    return Err(Error::LengthMismatch {
                        expected: particles,
                        found: t.len(),
                    });
                }
                if let Some(&bad) = t.iter().find(|&&x| x >= m) {
                    return Err(Error::Parse(format!(
                        "component {j}: letter {} out of range 1..{m}",
                        bad + 1
                    )));
                }
                if !c.re.is_finite() || !c.im.is_finite() {
                    return Err(Error::Parse(format!("component {j}: amplitude is not finite")));
                }
            }
        }
        Ok(Self {
            m,
            particles,
            components,
        })
    }

    pub fn pure(m: usize, particles: usize, amps: Amplitudes) -> Result<Self> {
        Self::new(m, particles, vec![Component::new(1.0, amps)])
    }

    /// `|phi_1> ⊗ ... ⊗ |phi_N>`, slot `k` in state `factors[k]`.
    pub fn product(m: usize, factors: &[Vec<Complex64>]) -> Result<Self> {
        let mut amps = Amplitudes::new();
        amps.insert(Vec::new(), Complex64::new(1.0, 0.0));
        for f in factors {
            if f.len() != m {
                return Err(Error::LengthMismatch {
                    expected: m,
                    found: f.len(),
                });
            }
            let mut next = Amplitudes::new();
            for (t, c) in &amps {
                for (letter, &a) in f.iter().enumerate() {
                    let v = c * a;
                    if v.norm() > Tolerances::DEFAULT.amp_drop {
                        let mut t2 = t.clone();
                        t2.push(letter);
                        next.insert(t2, v);
                    }
                }
            }
            amps = next;
        }
        Self::pure(m, factors.len(), amps)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// `m^N`, or `None` on overflow.
    pub fn dim(&self) -> Option<usize> {
        checked_pow(self.m, self.particles)
    }

    /// Rescales every component to unit norm and the weights to unit sum.
    pub fn normalized(mut self) -> Result<Self> {
        let total: f64 = self.components.iter().map(|c| c.q).sum();
        if total <= 0.0 {
            return Err(Error::InvalidState(ValidationReport {
                violations: vec![Violation::BadWeights { sum: total }],
            }));
        }
        for (j, comp) in self.components.iter_mut().enumerate() {
            let norm = comp.norm_sqr().sqrt();
            if norm == 0.0 {
                return Err(Error::InvalidState(ValidationReport {
                    violations: vec![Violation::NotNormalized {
                        component: j,
                        norm_sqr: 0.0,
                    }],
                }));
            }
            comp.q /= total;
            for c in comp.amps.values_mut() {
                *c /= norm;
            }
        }
        Ok(self)
    }

    /// Drops components with `q_j = 0`; they cannot affect any measure.
    pub fn without_zero_weights(&self) -> Self {
        let components: Vec<Component> = self.components.iter().filter(|c| c.q > 0.0).cloned().collect();
        Self {
            m: self.m,
            particles: self.particles,
            components,
        }
    }

    /// Dense vector of component `j` in the `m^N` product basis.
    pub fn dense_component(&self, j: usize) -> Result<Vec<Complex64>> {
        let dim = self.dim().unwrap_or(usize::MAX);
        if dim > Caps::DEFAULT.dim {
            return Err(Error::CapExceeded {
                what: "m^N",
                value: dim,
                cap: Caps::DEFAULT.dim,
            });
        }
        Ok(dense(&self.components[j].amps, self.m, dim))
    }
}

fn dense(amps: &Amplitudes, m: usize, dim: usize) -> Vec<Complex64> {
    let mut v = vec![ZERO; dim];
    for (t, c) in amps {
        v[basis_index(t, m)] += c;
    }
    v
}

/// `⟨a|b⟩` for sparse vectors.
pub fn sparse_inner(a: &Amplitudes, b: &Amplitudes) -> Complex64 {
    if a.len() <= b.len() {
        a.iter()
            .filter_map(|(k, x)| b.get(k).map(|y| x.conj() * y))
            .sum()
    } else {
        b.iter()
            .filter_map(|(k, y)| a.get(k).map(|x| x.conj() * y))
            .sum()
    }
}

/// Amplitudes of `Omega_kappa`: the entry at `I_kappa` is `C_I`.
pub fn permute_amplitudes(amps: &Amplitudes, kappa: &Permutation) -> Result<Amplitudes> {
    amps.iter()
        .map(|(t, c)| Ok((kappa.apply(t)?, *c)))
        .collect()
}

/// `Omega_kappa` for every component.
pub fn permute_internal(s: &InternalState, kappa: &Permutation) -> Result<InternalState> {
    if kappa.len() != s.particles {
        return Err(Error::LengthMismatch {
            expected: s.particles,
            found: kappa.len(),
        });
    }
    let components = s
        .components
        .iter()
        .map(|c| Ok(Component::new(c.q, permute_amplitudes(&c.amps, kappa)?)))
        .collect::<Result<_>>()?;
    Ok(InternalState {
        m: s.m,
        particles: s.particles,
        components,
    })
}

/// `Σ_j q_j ⟨Omega_nu^(j)|Omega_mu^(j)⟩`.
pub fn internal_overlap(s: &InternalState, mu: &Permutation, nu: &Permutation) -> Result<Complex64> {
    let mut acc = ZERO;
    for c in &s.components {
        let a = permute_amplitudes(&c.amps, mu)?;
        let b = permute_amplitudes(&c.amps, nu)?;
        acc += c.q * sparse_inner(&b, &a);
    }
    Ok(acc)
}

fn fmt_tuple(t: &[usize]) -> String {
    let parts: Vec<String> = t.iter().map(|x| (x + 1).to_string()).collect();
    format!("({})", parts.join(","))
}

/// A single failed check of [`validate_internal`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    BadWeights { sum: f64 },
    NegativeWeight { component: usize, q: f64 },
    NotNormalized { component: usize, norm_sqr: f64 },
    SymmetryViolation {
        component: usize,
        tuple: Vec<usize>,
        permutation: String,
        expected: Complex64,
        found: Complex64,
    },
    PauliViolation { component: usize, tuple: Vec<usize> },
    ParticleCount { expected: usize, found: usize },
}

impl Violation {
    /// Component the violation refers to, if any.
    pub fn component(&self) -> Option<usize> {
        match self {
            Violation::NegativeWeight { component, .. }
            | Violation::NotNormalized { component, .. }
            | Violation::SymmetryViolation { component, .. }
            | Violation::PauliViolation { component, .. } => Some(*component),
            _ => None,
        }
    }

    pub fn tuple(&self) -> Option<&[usize]> {
        match self {
            Violation::SymmetryViolation { tuple, .. } | Violation::PauliViolation { tuple, .. } => Some(tuple),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Violation::BadWeights { .. } | Violation::NegativeWeight { .. } => "BadWeights",
            Violation::NotNormalized { .. } => "NotNormalized",
            Violation::SymmetryViolation { .. } => "SymmetryViolation",
            Violation::PauliViolation { .. } => "PauliViolation",
            Violation::ParticleCount { .. } => "ParticleCount",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BadWeights { sum } => write!(f, "BadWeights: weights sum to {sum}"),
            Violation::NegativeWeight { component, q } => {
                write!(f, "BadWeights: component {component} has weight {q}")
            }
            Violation::NotNormalized { component, norm_sqr } => {
                write!(f, "NotNormalized: component {component} has squared norm {norm_sqr}")
            }
            Violation::SymmetryViolation {
                component,
                tuple,
                permutation,
                expected,
                found,
            } => write!(
                f,
                "SymmetryViolation: component {component}, tuple {} under {permutation}: expected {expected}, found {found}",
                fmt_tuple(tuple)
            ),
            Violation::PauliViolation { component, tuple } => write!(
                f,
                "PauliViolation: component {component}, tuple {} puts equal letters in one mode",
                fmt_tuple(tuple)
            ),
            Violation::ParticleCount { expected, found } => {
                write!(f, "ParticleCount: occupation holds {expected} particles, state has {found}")
            }
        }
    }
}

/// Outcome of [`validate_internal`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::InvalidState(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Adjacent transpositions inside the equal-mode blocks; they generate `S_R`.
fn block_generators(occ: &ModeOccupation) -> Vec<(usize, Permutation)> {
    let n = occ.particles();
    let mut out = Vec::new();
    let mut offset = 0;
    for &r in occ.counts() {
        for p in offset..offset + r.saturating_sub(1) {
            let mut images: Vec<usize> = (0..n).collect();
            images.swap(p, p + 1);
            out.push((p, Permutation::from_images(images).expect("transposition")));
        }
        offset += r;
    }
    out
}

pub fn validate_internal(s: &InternalState, occ: &ModeOccupation, kind: ParticleKind) -> ValidationReport {
    validate_internal_with(s, occ, kind, &Tolerances::DEFAULT)
}

pub fn validate_internal_with(
    s: &InternalState,
    occ: &ModeOccupation,
    kind: ParticleKind,
    tol: &Tolerances,
) -> ValidationReport {
    let mut violations = Vec::new();
    if s.particles != occ.particles() {
        violations.push(Violation::ParticleCount {
            expected: occ.particles(),
            found: s.particles,
        });
        return ValidationReport { violations };
    }
    let sum: f64 = s.components.iter().map(|c| c.q).sum();
    if (sum - 1.0).abs() > tol.norm {
        violations.push(Violation::BadWeights { sum });
    }
    let generators = block_generators(occ);
    for (j, comp) in s.components.iter().enumerate() {
        if comp.q < 0.0 {
            violations.push(Violation::NegativeWeight { component: j, q: comp.q });
        }
        let norm_sqr = comp.norm_sqr();
        if (norm_sqr - 1.0).abs() > tol.norm {
            violations.push(Violation::NotNormalized { component: j, norm_sqr });
        }
        for (t, &c) in &comp.amps {
            if c.norm() <= tol.amp_drop {
                continue;
            }
            if kind == ParticleKind::Fermion && generators.iter().any(|(p, _)| t[*p] == t[*p + 1]) {
                violations.push(Violation::PauliViolation {
                    component: j,
                    tuple: t.clone(),
                });
                continue;
            }
            for (_, xi) in &generators {
                let image = xi.apply_unchecked(t);
                let found = comp.amps.get(&image).copied().unwrap_or(ZERO);
                // Each pair is visited from both ends; report it once.
                if comp.amps.contains_key(&image) && image < *t {
                    continue;
                }
                let expected = c * kind.sign(xi);
                if (found - expected).norm() > tol.norm {
                    violations.push(Violation::SymmetryViolation {
                        component: j,
                        tuple: image,
                        permutation: xi.to_string(),
                        expected,
                        found,
                    });
                }
            }
        }
    }
    ValidationReport { violations }
}

/// External occupation, particle kind, internal state and preparation
/// permutation `kappa` of the permuted state `rho^kappa`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedState {
    occupation: ModeOccupation,
    kind: ParticleKind,
    internal: InternalState,
    preparation: Permutation,
}

impl PreparedState {
    pub fn new(occupation: ModeOccupation, kind: ParticleKind, internal: InternalState) -> Result<Self> {
        validate_internal(&internal, &occupation, kind).into_result()?;
        let preparation = Permutation::identity(occupation.particles());
        Ok(Self {
            occupation,
            kind,
            internal,
            preparation,
        })
    }

    pub fn with_preparation(mut self, kappa: Permutation) -> Result<Self> {
        if kappa.len() != self.occupation.particles() {
            return Err(Error::LengthMismatch {
                expected: self.occupation.particles(),
                found: kappa.len(),
            });
        }
        self.preparation = kappa;
        Ok(self)
    }

    pub fn occupation(&self) -> &ModeOccupation {
        &self.occupation
    }

    pub fn kind(&self) -> ParticleKind {
        self.kind
    }

    pub fn internal(&self) -> &InternalState {
        &self.internal
    }

    pub fn preparation(&self) -> &Permutation {
        &self.preparation
    }

    pub fn modes(&self) -> usize {
        self.occupation.modes()
    }

    pub fn particles(&self) -> usize {
        self.occupation.particles()
    }

    pub fn transversal(&self) -> Result<Transversal> {
        right_transversal_with_caps(&self.occupation, &Caps::DEFAULT)
    }

    /// Weights `q_j` and labeled internal states `Omega_{kappa mu}^(j)` for
    /// every `mu` of the transversal, zero-weight components dropped.
    pub fn labeled_components(&self, t: &Transversal) -> Result<Vec<(f64, Vec<Amplitudes>)>> {
        let kept = self.internal.without_zero_weights();
        kept.components
            .iter()
            .map(|c| {
                let labeled = t
                    .reps()
                    .iter()
                    .map(|mu| permute_amplitudes(&c.amps, &self.preparation.compose(mu)?))
                    .collect::<Result<Vec<_>>>()?;
                Ok((c.q, labeled))
            })
            .collect()
    }

    /// `J_{mu nu} = Σ_j q_j ⟨Omega_{kappa nu}|Omega_{kappa mu}⟩` over the transversal.
    pub fn overlap_matrix(&self, t: &Transversal) -> Result<CMatrix> {
        let labeled = self.labeled_components(t)?;
        let r = t.r_count();
        let mut j = CMatrix::zeros(r, r);
        for (q, omegas) in &labeled {
            for mu in 0..r {
                for nu in mu..r {
                    let v = *q * sparse_inner(&omegas[nu], &omegas[mu]);
                    j[(mu, nu)] += v;
                    if nu != mu {
                        j[(nu, mu)] += v.conj();
                    }
                }
            }
        }
        Ok(j)
    }
}

/// The `R x R` block of the reduced external state in the basis
/// `|E_mu>`, `mu` in the transversal, with the exchange signs included.
#[derive(Debug, Clone)]
pub struct ExternalBlock {
    kind: ParticleKind,
    transversal: Transversal,
    block: CMatrix,
    factor: Option<CMatrix>,
}

impl ExternalBlock {
    pub fn from_prepared(p: &PreparedState) -> Result<Self> {
        let t = p.transversal()?;
        let r = t.r_count();
        let signs: Vec<f64> = t.reps().iter().map(|mu| p.kind.sign(mu)).collect();
        let labeled = p.labeled_components(&t)?;

        // Factor rows are labelings; columns are the internal tuples reached
        // by any labeled component.
        let mut columns: Vec<(f64, Vec<Amplitudes>, BTreeMap<Vec<usize>, usize>)> = Vec::new();
        let mut total_cols = 0;
        for (q, omegas) in labeled {
            let keys: BTreeSet<Vec<usize>> = omegas.iter().flat_map(|o| o.keys().cloned()).collect();
            let index: BTreeMap<Vec<usize>, usize> = keys.into_iter().enumerate().map(|(i, k)| (k, i)).collect();
            total_cols += index.len();
            columns.push((q, omegas, index));
        }
        let mut a = CMatrix::zeros(r, total_cols);
        let mut offset = 0;
        for (q, omegas, index) in &columns {
            let w = (q / r as f64).sqrt();
            for (mu, omega) in omegas.iter().enumerate() {
                for (k, c) in omega {
                    a[(mu, offset + index[k])] += c * (w * signs[mu]);
                }
            }
            offset += index.len();
        }
        let rho = DensityMatrix::from_factor(a)?;
        let factor = rho.factor()?;
        Ok(Self {
            kind: p.kind,
            transversal: t,
            block: rho.into_matrix(),
            factor: Some(factor),
        })
    }

    /// Builds a block from its matrix directly. It must be Hermitian and
    /// positive semidefinite with every diagonal entry equal to `1/R`.
    pub fn from_coherences(occ: &ModeOccupation, kind: ParticleKind, block: CMatrix) -> Result<Self> {
        let t = right_transversal_with_caps(occ, &Caps::DEFAULT)?;
        let r = t.r_count();
        if block.nrows() != r || block.ncols() != r {
            return Err(Error::DimensionMismatch {
                left: r,
                right: block.nrows(),
            });
        }
        let tol = Tolerances::DEFAULT;
        for i in 0..r {
            let d = block[(i, i)];
            if (d.re - 1.0 / r as f64).abs() > tol.trace || d.im.abs() > tol.herm {
                return Err(Error::InvalidState(ValidationReport {
                    violations: vec![Violation::NotNormalized {
                        component: i,
                        norm_sqr: d.re * r as f64,
                    }],
                }));
            }
        }
        let rho = DensityMatrix::new(block)?;
        Ok(Self {
            kind,
            transversal: t,
            block: rho.into_matrix(),
            factor: None,
        })
    }

    pub fn kind(&self) -> ParticleKind {
        self.kind
    }

    pub fn transversal(&self) -> &Transversal {
        &self.transversal
    }

    pub fn occupation(&self) -> &ModeOccupation {
        self.transversal.occupation()
    }

    pub fn r_count(&self) -> usize {
        self.transversal.r_count()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.block
    }

    /// The block as an `R x R` density matrix.
    pub fn density(&self) -> DensityMatrix {
        DensityMatrix::from_parts_unchecked(self.block.clone(), self.factor.clone())
    }

    /// Fully distinguishable limit `I/R` in block coordinates.
    pub fn distinguishable(&self) -> DensityMatrix {
        let r = self.r_count();
        let support: Vec<usize> = (0..r).collect();
        DensityMatrix::uniform_on(r, &support).expect("support within range")
    }

    /// `(1/√R) Σ_mu (-1)^mu |E_mu>` in block coordinates.
    pub fn ideal_vector(&self) -> Result<Vec<Complex64>> {
        ideal_check(self.occupation(), self.kind)?;
        let w = 1.0 / (self.r_count() as f64).sqrt();
        Ok(self
            .transversal
            .reps()
            .iter()
            .map(|mu| Complex64::new(w * self.kind.sign(mu), 0.0))
            .collect())
    }

    pub fn ideal(&self) -> Result<DensityMatrix> {
        DensityMatrix::pure(&self.ideal_vector()?)
    }

    /// Row indices of `|E_mu>` in the `n^N` external basis.
    pub fn basis_indices(&self) -> Vec<usize> {
        let n = self.occupation().modes();
        self.transversal.assignments().iter().map(|a| a.basis_index(n)).collect()
    }

    pub fn full_dim(&self) -> Result<usize> {
        external_dim(self.occupation())
    }

    /// Places a block-space matrix into the full `n^N` space.
    pub fn embed_matrix(&self, block: &CMatrix) -> Result<CMatrix> {
        let dim = self.full_dim()?;
        let idx = self.basis_indices();
        let mut m = CMatrix::zeros(dim, dim);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                m[(i, j)] = block[(a, b)];
            }
        }
        Ok(m)
    }

    /// The reduced external state in the full `n^N` space.
    pub fn embed(&self) -> Result<DensityMatrix> {
        embed_density(self, &self.density())
    }
}

/// Embeds a block density matrix, carrying its factor along.
pub fn embed_density(b: &ExternalBlock, rho: &DensityMatrix) -> Result<DensityMatrix> {
    let m = b.embed_matrix(rho.matrix())?;
    let f = rho.factor()?;
    let dim = m.nrows();
    let mut full = CMatrix::zeros(dim, f.ncols());
    for (a, &i) in b.basis_indices().iter().enumerate() {
        full.set_row(i, &f.row(a));
    }
    Ok(DensityMatrix::from_parts_unchecked(m, Some(full)))
}

fn external_dim(occ: &ModeOccupation) -> Result<usize> {
    let dim = checked_pow(occ.modes(), occ.particles()).unwrap_or(usize::MAX);
    if dim > Caps::DEFAULT.dim {
        return Err(Error::CapExceeded {
            what: "n^N",
            value: dim,
            cap: Caps::DEFAULT.dim,
        });
    }
    Ok(dim)
}

fn ideal_check(occ: &ModeOccupation, kind: ParticleKind) -> Result<()> {
    if kind == ParticleKind::Fermion && occ.max_occupation() > 1 {
        return Err(Error::PauliViolation(format!(
            "no antisymmetric external state for occupation {occ}"
        )));
    }
    Ok(())
}

/// `rho_E` in the full `n^N` external basis.
pub fn reduced_external(p: &PreparedState) -> Result<DensityMatrix> {
    ExternalBlock::from_prepared(p)?.embed()
}

/// `rho_E^D`: uniform over the labelings.
pub fn distinguishable_external(occ: &ModeOccupation, kind: ParticleKind) -> Result<DensityMatrix> {
    let block = ExternalBlock::from_coherences(occ, kind, identity_block(occ)?)?;
    embed_density(&block, &block.distinguishable())
}

/// `|psi_B>` or `|psi_F>` as a density matrix in the full external basis.
pub fn ideal_external(occ: &ModeOccupation, kind: ParticleKind) -> Result<DensityMatrix> {
    ideal_check(occ, kind)?;
    let block = ExternalBlock::from_coherences(occ, kind, identity_block(occ)?)?;
    embed_density(&block, &block.ideal()?)
}

fn identity_block(occ: &ModeOccupation) -> Result<CMatrix> {
    let r = occ.r_count();
    if r > Caps::DEFAULT.r_count {
        return Err(Error::CapExceeded {
            what: "R",
            value: r,
            cap: Caps::DEFAULT.r_count,
        });
    }
    Ok(CMatrix::identity(r, r).unscale(r as f64))
}

/// `rho_I^mu = Σ_j q_j |Omega_{kappa mu}^(j)><Omega_{kappa mu}^(j)|`, dense in `m^N`.
pub fn reduced_internal_labeled(p: &PreparedState, mu: &Permutation) -> Result<DensityMatrix> {
    let s = p.internal.without_zero_weights();
    let dim = internal_dim(&s)?;
    let label = p.preparation.compose(mu)?;
    let mut a = CMatrix::zeros(dim, s.components.len());
    for (j, c) in s.components.iter().enumerate() {
        let w = c.q.sqrt();
        for (t, amp) in permute_amplitudes(&c.amps, &label)? {
            a[(basis_index(&t, s.m), j)] += amp * w;
        }
    }
    DensityMatrix::from_factor(a)
}

/// `rho_I = (1/R) Σ_mu rho_I^mu`.
pub fn reduced_internal(p: &PreparedState) -> Result<DensityMatrix> {
    let t = p.transversal()?;
    let dim = internal_dim(&p.internal)?;
    let mut acc = CMatrix::zeros(dim, dim);
    for mu in t.reps() {
        acc += reduced_internal_labeled(p, mu)?.matrix();
    }
    DensityMatrix::new(acc.unscale(t.r_count() as f64))
}

fn internal_dim(s: &InternalState) -> Result<usize> {
    let dim = s.dim().unwrap_or(usize::MAX);
    if dim > Caps::DEFAULT.dim {
        return Err(Error::CapExceeded {
            what: "m^N",
            value: dim,
            cap: Caps::DEFAULT.dim,
        });
    }
    Ok(dim)
}

/// Random internal state: weights uniform on `[0,1]` then normalized; every
/// amplitude `r e^{i phi}` with `r` uniform on `[1 - k/K, 1]` and `phi`
/// uniform on `[-pi k/K, pi k/K]`, each component normalized afterwards.
///
/// Draw order: all weights first, then per component every tuple of
/// `{1..m}^N` in lexicographic order, `r` before `phi`.
pub fn random_internal_state<R: Rng + ?Sized>(
    rng: &mut R,
    k: usize,
    total: usize,
    components: usize,
    m: usize,
    particles: usize,
) -> Result<InternalState> {
    if total == 0 || k > total {
        return Err(Error::Parse(format!("index k = {k} must lie in 0..={total}")));
    }
    if components == 0 {
        return Err(Error::Parse("component count must be positive".into()));
    }
    let dim = checked_pow(m, particles)
        .filter(|&d| d <= Caps::DEFAULT.dim)
        .ok_or(Error::CapExceeded {
            what: "m^N",
            value: checked_pow(m, particles).unwrap_or(usize::MAX),
            cap: Caps::DEFAULT.dim,
        })?;
    let spread = k as f64 / total as f64;
    let weights: Vec<f64> = (0..components).map(|_| rng.random::<f64>()).collect();
    let mut comps = Vec::with_capacity(components);
    for q in weights {
        let mut amps = Amplitudes::new();
        for index in 0..dim {
            let r = if spread > 0.0 {
                rng.random_range(1.0 - spread..=1.0)
            } else {
                1.0
            };
            let phi = if spread > 0.0 {
                let a = std::f64::consts::PI * spread;
                rng.random_range(-a..=a)
            } else {
                0.0
            };
            let t = crate::combinatorics::basis_digits(index, m, particles);
            amps.insert(t, Complex64::from_polar(r, phi));
        }
        comps.push(Component::new(q, amps));
    }
    // A draw of exactly zero for every weight has probability zero; treat it
    // as equal weights rather than failing.
    if comps.iter().all(|c| c.q == 0.0) {
        comps.iter_mut().for_each(|c| c.q = 1.0);
    }
    InternalState::new(m, particles, comps)?.normalized()
}

/// Random state for the `k`-th of `K` draws: `N` bosons in distinct modes
/// `(1,...,1,0,...)` of `n`, with `l` internal components.
pub fn random_prepared_state(
    k: usize,
    total: usize,
    l: usize,
    n: usize,
    m: usize,
    particles: usize,
    seed: u64,
) -> Result<PreparedState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let occ = ModeOccupation::singly_occupied(n, particles)?;
    let internal = random_internal_state(&mut rng, k, total, l, m, particles)?;
    PreparedState::new(occ, ParticleKind::Boson, internal)
}

/// Largest entry of a full external matrix outside the labeling orbit.
pub fn orbit_leakage(b: &ExternalBlock, full: &CMatrix) -> f64 {
    let idx: BTreeSet<usize> = b.basis_indices().into_iter().collect();
    let mut worst: f64 = 0.0;
    for i in 0..full.nrows() {
        for j in 0..full.ncols() {
            if !(idx.contains(&i) && idx.contains(&j)) {
                worst = worst.max(full[(i, j)].norm());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::right_transversal;
    use crate::linalg::{self, fidelity, frobenius_distance, trace_distance};
    use proptest::prelude::*;
    use rand::Rng;

    pub(crate) fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn occ(v: &[usize]) -> ModeOccupation {
        ModeOccupation::new(v.to_vec()).unwrap()
    }

    fn cyc(n: usize, s: &str) -> Permutation {
        Permutation::parse_cycles(s, n).unwrap()
    }

    /// The three-particle example: letters a=0, b=1, occupation (2,1).
    fn worked_example() -> InternalState {
        let w = c(1.0 / 3f64.sqrt());
        let amps: Amplitudes = [(vec![0, 0, 0], w), (vec![0, 1, 1], w), (vec![1, 0, 1], w)].into();
        InternalState::pure(2, 3, amps).unwrap()
    }

    #[test]
    fn worked_example_validates() {
        let r = validate_internal(&worked_example(), &occ(&[2, 1]), ParticleKind::Boson);
        assert!(r.is_ok(), "{r}");
    }

    #[test]
    fn symmetry_violation_detected() {
        let w = 1.0 / 3f64.sqrt();
        let amps: Amplitudes = [(vec![0, 0, 0], c(w)), (vec![0, 1, 1], c(w)), (vec![1, 0, 1], c(-w))].into();
        let s = InternalState::pure(2, 3, amps).unwrap();
        let r = validate_internal(&s, &occ(&[2, 1]), ParticleKind::Boson);
        assert!(r.violations.iter().any(|v| v.name() == "SymmetryViolation"), "{r}");
    }

    #[test]
    fn pauli_violation_detected() {
        let amps: Amplitudes = [(vec![0, 0], c(1.0))].into();
        let s = InternalState::pure(2, 2, amps).unwrap();
        let r = validate_internal(&s, &occ(&[2, 0]), ParticleKind::Fermion);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].name(), "PauliViolation");
        // Antisymmetric singlet in one mode is fine.
        let h = 0.5f64.sqrt();
        let amps: Amplitudes = [(vec![0, 1], c(h)), (vec![1, 0], c(-h))].into();
        let s = InternalState::pure(2, 2, amps).unwrap();
        assert!(validate_internal(&s, &occ(&[2, 0]), ParticleKind::Fermion).is_ok());
        assert!(!validate_internal(&s, &occ(&[2, 0]), ParticleKind::Boson).is_ok());
    }

    #[test]
    fn weight_and_norm_violations() {
        let amps: Amplitudes = [(vec![0, 1], c(0.5))].into();
        let s = InternalState::new(2, 2, vec![Component::new(0.7, amps)]).unwrap();
        let r = validate_internal(&s, &occ(&[1, 1]), ParticleKind::Boson);
        let names: Vec<_> = r.violations.iter().map(|v| v.name()).collect();
        assert!(names.contains(&"BadWeights") && names.contains(&"NotNormalized"));
        assert_eq!(validate_internal(&s, &occ(&[1, 1]), ParticleKind::Boson), r);
    }

    #[test]
    fn permute_internal_example() {
        let s = worked_example();
        let p = permute_internal(&s, &cyc(3, "(13)")).unwrap();
        let keys: BTreeSet<Vec<usize>> = p.components()[0].amps.keys().cloned().collect();
        let expected: BTreeSet<Vec<usize>> = [vec![0, 0, 0], vec![1, 1, 0], vec![1, 0, 1]].into();
        assert_eq!(keys, expected);
        assert_eq!(permute_internal(&s, &Permutation::identity(3)).unwrap(), s);
        let k = cyc(3, "(123)");
        let back = permute_internal(&permute_internal(&s, &k).unwrap(), &k.inverse()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn overlap_examples() {
        let s = worked_example();
        let e = Permutation::identity(3);
        assert!((internal_overlap(&s, &e, &e).unwrap() - c(1.0)).norm() < 1e-15);
        let v = internal_overlap(&s, &cyc(3, "(13)"), &e).unwrap();
        assert!((v - c(2.0 / 3.0)).norm() < 1e-15);
        let same: Amplitudes = [(vec![1, 1, 1], c(1.0))].into();
        let s = InternalState::pure(2, 3, same).unwrap();
        for mu in right_transversal(&occ(&[1, 1, 1])).unwrap().reps() {
            assert!((internal_overlap(&s, mu, &e).unwrap() - c(1.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn reduced_external_limits() {
        let o = occ(&[1, 1, 1]);
        // Distinguishable: letters 0, 1, 2.
        let s = InternalState::product(3, &[vec![c(1.0), c(0.0), c(0.0)], vec![c(0.0), c(1.0), c(0.0)], vec![c(0.0), c(0.0), c(1.0)]]).unwrap();
        let p = PreparedState::new(o.clone(), ParticleKind::Boson, s).unwrap();
        let rho = reduced_external(&p).unwrap();
        let d = distinguishable_external(&o, ParticleKind::Boson).unwrap();
        assert!(frobenius_distance(rho.matrix(), d.matrix()) < 1e-14);

        // Indistinguishable bosons.
        let s = InternalState::product(2, &vec![vec![c(1.0), c(0.0)]; 3]).unwrap();
        let p = PreparedState::new(o.clone(), ParticleKind::Boson, s).unwrap();
        let rho = reduced_external(&p).unwrap();
        let ideal = ideal_external(&o, ParticleKind::Boson).unwrap();
        assert!(frobenius_distance(rho.matrix(), ideal.matrix()) < 1e-14);
    }

    #[test]
    fn hom_block_shape() {
        let o = occ(&[1, 1]);
        let r = 0.6;
        let th = 0.9;
        let half = 0.5;
        let z = Complex64::from_polar(r * half, th);
        let block = CMatrix::from_row_slice(2, 2, &[c(half), z, z.conj(), c(half)]);
        let b = ExternalBlock::from_coherences(&o, ParticleKind::Boson, block).unwrap();
        let full = b.embed().unwrap();
        assert_eq!(full.dim(), 4);
        assert!((full.matrix()[(1, 2)] - z).norm() < 1e-15);
        assert!((full.matrix()[(2, 1)] - z.conj()).norm() < 1e-15);
        assert!(full.matrix()[(0, 0)].norm() < 1e-15 && full.matrix()[(3, 3)].norm() < 1e-15);
        assert!(orbit_leakage(&b, full.matrix()) < 1e-15);
    }

    #[test]
    fn coherence_block_rejects_bad_diagonal() {
        let o = occ(&[1, 1]);
        let block = CMatrix::from_row_slice(2, 2, &[c(0.6), c(0.0), c(0.0), c(0.4)]);
        assert!(ExternalBlock::from_coherences(&o, ParticleKind::Boson, block).is_err());
        let block = CMatrix::from_row_slice(2, 2, &[c(0.5), c(0.9), c(0.9), c(0.5)]);
        assert!(matches!(
            ExternalBlock::from_coherences(&o, ParticleKind::Boson, block),
            Err(Error::NotPsd { .. })
        ));
    }

    #[test]
    fn ideal_states() {
        let o = occ(&[1, 1]);
        let b = ideal_external(&o, ParticleKind::Boson).unwrap();
        let f = ideal_external(&o, ParticleKind::Fermion).unwrap();
        // |1,2> has index 1, |2,1> has index 2.
        assert!((b.matrix()[(1, 2)] - c(0.5)).norm() < 1e-15);
        assert!((f.matrix()[(1, 2)] - c(-0.5)).norm() < 1e-15);
        assert!(matches!(
            ideal_external(&occ(&[2, 0]), ParticleKind::Fermion),
            Err(Error::PauliViolation(_))
        ));
        for counts in [vec![1, 1], vec![2, 1], vec![1, 1, 1]] {
            let o = ModeOccupation::new(counts).unwrap();
            let b = ideal_external(&o, ParticleKind::Boson).unwrap();
            let d = distinguishable_external(&o, ParticleKind::Boson).unwrap();
            let f = fidelity(&b, &d).unwrap();
            assert!((f * f - 1.0 / o.r_count() as f64).abs() < 1e-12);
        }
        let o = occ(&[1, 1]);
        let b = ideal_external(&o, ParticleKind::Boson).unwrap();
        let d = distinguishable_external(&o, ParticleKind::Boson).unwrap();
        assert!((trace_distance(&b, &d).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn labeled_internal_states() {
        let s = InternalState::product(2, &[vec![c(1.0), c(0.0)], vec![c(0.0), c(1.0)]]).unwrap();
        let p = PreparedState::new(occ(&[1, 1]), ParticleKind::Boson, s).unwrap();
        let a = reduced_internal_labeled(&p, &Permutation::identity(2)).unwrap();
        let b = reduced_internal_labeled(&p, &cyc(2, "(12)")).unwrap();
        assert!((a.purity() - 1.0).abs() < 1e-14);
        assert!(fidelity(&a, &b).unwrap() < 1e-14);
        let mix = reduced_internal(&p).unwrap();
        assert!((mix.purity() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn random_state_is_reproducible() {
        let a = random_prepared_state(17, 300, 3, 4, 4, 3, 42).unwrap();
        let b = random_prepared_state(17, 300, 3, 4, 4, 3, 42).unwrap();
        assert_eq!(a, b);
        let c0 = random_prepared_state(0, 300, 1, 4, 4, 3, 1).unwrap();
        let amps = &c0.internal().components()[0].amps;
        let first = amps.values().next().copied().unwrap();
        assert!(amps.values().all(|v| (v - first).norm() < 1e-15));
        assert!(random_prepared_state(301, 300, 1, 4, 4, 3, 1).is_err());
    }

    fn random_state(seed: u64) -> PreparedState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.random_range(0..=300);
        let l = rng.random_range(1..=4);
        random_prepared_state(k, 300, l, 3, 2, 3, seed).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn block_diagonal_and_bounds(seed in any::<u64>()) {
            let p = random_state(seed);
            let b = ExternalBlock::from_prepared(&p).unwrap();
            let r = b.r_count() as f64;
            for i in 0..b.r_count() {
                prop_assert!((b.matrix()[(i, i)].re - 1.0 / r).abs() < 1e-12);
                for j in 0..b.r_count() {
                    prop_assert!(b.matrix()[(i, j)].norm() <= 1.0 / r + 1e-12);
                }
            }
            let full = b.embed().unwrap();
            prop_assert!((linalg::trace(full.matrix()).re - 1.0).abs() < 1e-12);
        }

        #[test]
        fn overlap_is_conjugate_symmetric(seed in any::<u64>()) {
            let p = random_state(seed);
            let t = p.transversal().unwrap();
            let j = p.overlap_matrix(&t).unwrap();
            for a in 0..t.r_count() {
                for b in 0..t.r_count() {
                    let direct = internal_overlap(p.internal(), &t.reps()[a], &t.reps()[b]).unwrap();
                    prop_assert!((direct - j[(a, b)]).norm() < 1e-12);
                    prop_assert!((j[(a, b)] - j[(b, a)].conj()).norm() < 1e-12);
                }
            }
        }

        #[test]
        fn ideal_is_an_eigenvector(seed in any::<u64>()) {
            let p = random_state(seed);
            let b = ExternalBlock::from_prepared(&p).unwrap();
            let psi = nalgebra::DVector::from_vec(b.ideal_vector().unwrap());
            let lam = (psi.adjoint() * b.matrix() * &psi)[(0, 0)].re;
            let res = (b.matrix() * &psi - psi.scale(lam)).norm();
            prop_assert!(res <= 1e-10);
        }
    }
}
