//! Numerical tolerances and enumeration caps shared by every module.
//!
//! Comparisons elsewhere in the crate refer to these names rather than to
//! literal thresholds.

/// Tolerances applied when validating operators and outcome distributions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Entrywise bound on `|A - A^dagger|`.
    pub herm: f64,
    /// Smallest eigenvalue accepted as "non-negative"; eigenvalues in
    /// `[psd_floor, 0)` are clipped to zero.
    pub psd_floor: f64,
    /// Bound on `|tr rho - 1|`.
    pub trace: f64,
    /// Entrywise bound on `|U^dagger U - 1|`.
    pub unitary: f64,
    /// Relative spectral noise floor: eigenvalues below
    /// `spectral_noise * max(dim, 16) * lambda_max` are treated as exact zeros
    /// inside square roots.
    pub spectral_noise: f64,
    /// Probabilities below `-prob_negative` are rejected as non-physical.
    pub prob_negative: f64,
    /// Probabilities with magnitude below this are set to exactly zero.
    pub prob_noise: f64,
    /// Accepted drift of `sum p` from one without renormalization.
    pub prob_sum: f64,
    /// Drift of `sum p` beyond which a distribution is rejected.
    pub prob_fail: f64,
    /// Amplitudes below this magnitude are dropped from sparse maps.
    pub amp_drop: f64,
    /// Bound on weight and normalization errors of internal states.
    pub norm: f64,
    /// Entrywise bound for POVM completeness `sum M = 1`.
    pub povm: f64,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        herm: 1e-10,
        psd_floor: -1e-10,
        trace: 1e-10,
        unitary: 1e-10,
        spectral_noise: f64::EPSILON,
        prob_negative: 1e-12,
        prob_noise: 1e-14,
        prob_sum: 1e-9,
        prob_fail: 1e-6,
        amp_drop: 1e-14,
        norm: 1e-10,
        povm: 1e-9,
    };

    /// Absolute noise floor for a spectrum of the given dimension and scale.
    pub fn spectral_floor(&self, dim: usize, scale: f64) -> f64 {
        self.spectral_noise * (dim.max(16) as f64) * scale.abs().max(f64::MIN_POSITIVE)
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Size guards for exhaustive enumerations and dense matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Caps {
    /// Maximum `N!` (and stabilizer order) that may be enumerated.
    pub factorial: usize,
    /// Maximum number of particle labelings `R`.
    pub r_count: usize,
    /// Maximum dense matrix dimension.
    pub dim: usize,
    /// Maximum number of occupation lists enumerated at once.
    pub occupations: usize,
}

impl Caps {
    pub const DEFAULT: Caps = Caps {
        factorial: 40320,
        r_count: 5040,
        dim: 4096,
        occupations: 5040,
    };
}

impl Default for Caps {
    fn default() -> Self {
        Self::DEFAULT
    }
}
