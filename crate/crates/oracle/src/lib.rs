//! Brute-force references for testing `duality-core`.
//!
//! Nothing here reuses the core's permutation, transversal or reduced-state
//! code: joint states are built by summing over all of `S_N`, reductions are
//! literal index contractions, and occupation statistics of non-interacting
//! bosons come from a second-quantized expansion.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use duality_core::states::{ParticleKind, PreparedState};

pub type CMatrix = DMatrix<Complex64>;

/// Largest joint dimension `n^N m^N` the oracle will build.
pub const MAX_JOINT_DIM: usize = 1296;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("dimension {0} exceeds the oracle cap")]
    Cap(usize),
    #[error("(anti)symmetrized vector vanishes")]
    NormZero,
    #[error("joint state breaks exchange symmetry by {0:e}")]
    Symmetry(f64),
    #[error("unsupported input: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, OracleError>;

/// All permutations of `0..n` by Heap's algorithm, paired with their parity
/// from an inversion count.
pub fn permutations(n: usize) -> Vec<(Vec<usize>, f64)> {
    let mut a: Vec<usize> = (0..n).collect();
    let mut out = vec![a.clone()];
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            out.push(a.clone());
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out.into_iter()
        .map(|p| {
            let mut inv = 0;
            for x in 0..n {
                for y in x + 1..n {
                    if p[x] > p[y] {
                        inv += 1;
                    }
                }
            }
            let s = if inv % 2 == 0 { 1.0 } else { -1.0 };
            (p, s)
        })
        .collect()
}

fn index(digits: &[usize], base: usize) -> usize {
    digits.iter().fold(0, |acc, &d| acc * base + d)
}

fn digits(mut i: usize, base: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for d in out.iter_mut().rev() {
        *d = i % base;
        i /= base;
    }
    out
}

/// Dense joint state on `C^{n^N} ⊗ C^{m^N}` (external index most significant).
#[derive(Debug, Clone)]
pub struct JointState {
    pub ext_dim: usize,
    pub int_dim: usize,
    pub rho: CMatrix,
}

/// Builds `Σ_j q_j |Psi_j><Psi_j|` with
/// `|Psi_j> ∝ Σ_pi (-1)^pi |E_pi> ⊗ Pi_pi |Omega_kappa^(j)>`.
///
/// The prepared internal state `Omega_kappa` must itself be symmetric under
/// the stabilizer of the canonical assignment; otherwise the symmetrized
/// vector describes a different state and the input is rejected.
pub fn brute_force_joint(p: &PreparedState) -> Result<JointState> {
    let counts = p.occupation().counts().to_vec();
    let n = counts.len();
    let big_n: usize = counts.iter().sum();
    let m = p.internal().m();
    let ext_dim = n.pow(big_n as u32);
    let int_dim = m.pow(big_n as u32);
    let dim = ext_dim * int_dim;
    if dim > MAX_JOINT_DIM {
        return Err(OracleError::Cap(dim));
    }
    let e: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(j, &r)| std::iter::repeat_n(j, r))
        .collect();
    let fermion = p.kind() == ParticleKind::Fermion;
    let perms = permutations(big_n);
    let kappa = p.preparation().images().to_vec();

    let mut rho = CMatrix::zeros(dim, dim);
    for comp in p.internal().components() {
        if comp.q == 0.0 {
            continue;
        }
        // Omega_kappa: the amplitude of I_kappa is C_I.
        let prepared: Vec<(Vec<usize>, Complex64)> = comp
            .amps
            .iter()
            .map(|(t, c)| ((0..big_n).map(|i| t[kappa[i]]).collect(), *c))
            .collect();
        check_block_symmetry(&prepared, &e, fermion, m)?;
        let mut psi = vec![Complex64::new(0.0, 0.0); dim];
        for (pi, sign) in &perms {
            let s = if fermion { *sign } else { 1.0 };
            let ep: Vec<usize> = pi.iter().map(|&k| e[k]).collect();
            let row = index(&ep, n) * int_dim;
            for (t, c) in &prepared {
                let tp: Vec<usize> = pi.iter().map(|&k| t[k]).collect();
                psi[row + index(&tp, m)] += c * s;
            }
        }
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(OracleError::NormZero);
        }
        let v = nalgebra::DVector::from_vec(psi).unscale(norm);
        rho += (&v * v.adjoint()).scale(comp.q);
    }
    let j = JointState { ext_dim, int_dim, rho };
    let dev = symmetry_defect(&j, big_n, n, m);
    if dev > 1e-10 {
        return Err(OracleError::Symmetry(dev));
    }
    Ok(j)
}

fn check_block_symmetry(amps: &[(Vec<usize>, Complex64)], e: &[usize], fermion: bool, m: usize) -> Result<()> {
    let big_n = e.len();
    let lookup: std::collections::HashMap<usize, Complex64> =
        amps.iter().map(|(t, c)| (index(t, m), *c)).collect();
    for (pi, sign) in permutations(big_n) {
        if (0..big_n).any(|k| e[pi[k]] != e[k]) {
            continue;
        }
        let s = if fermion { sign } else { 1.0 };
        for (t, c) in amps {
            let tp: Vec<usize> = pi.iter().map(|&k| t[k]).collect();
            let found = lookup.get(&index(&tp, m)).copied().unwrap_or_default();
            if (found - c * s).norm() > 1e-10 {
                return Err(OracleError::Unsupported(
                    "prepared internal state is not symmetric within equal-mode blocks".into(),
                ));
            }
        }
    }
    Ok(())
}

/// Largest entry of `P rho P† - rho` over simultaneous slot permutations
/// `P = Pi^E ⊗ Pi^I`.
fn symmetry_defect(j: &JointState, big_n: usize, n: usize, m: usize) -> f64 {
    let dim = j.ext_dim * j.int_dim;
    let mut worst: f64 = 0.0;
    for (pi, _) in permutations(big_n) {
        let map: Vec<usize> = (0..dim)
            .map(|x| {
                let ed = digits(x / j.int_dim, n, big_n);
                let id = digits(x % j.int_dim, m, big_n);
                let ep: Vec<usize> = pi.iter().map(|&k| ed[k]).collect();
                let ip: Vec<usize> = pi.iter().map(|&k| id[k]).collect();
                index(&ep, n) * j.int_dim + index(&ip, m)
            })
            .collect();
        for a in 0..dim {
            for b in 0..dim {
                let d = (j.rho[(map[a], map[b])] - j.rho[(a, b)]).norm();
                worst = worst.max(d);
            }
        }
    }
    worst
}

/// Which side of the joint state survives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    External,
    Internal,
}

/// Literal partial trace of a joint state.
pub fn oracle_reduced(j: &JointState, keep: Side) -> CMatrix {
    let (de, di) = (j.ext_dim, j.int_dim);
    match keep {
        Side::External => {
            let mut out = CMatrix::zeros(de, de);
            for a in 0..de {
                for b in 0..de {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for i in 0..di {
                        acc += j.rho[(a * di + i, b * di + i)];
                    }
                    out[(a, b)] = acc;
                }
            }
            out
        }
        Side::Internal => {
            let mut out = CMatrix::zeros(di, di);
            for a in 0..di {
                for b in 0..di {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for x in 0..de {
                        acc += j.rho[(x * di + a, x * di + b)];
                    }
                    out[(a, b)] = acc;
                }
            }
            out
        }
    }
}

/// Probability of output occupation `occ_out` for non-interacting bosons
/// entering with `occ_in`, where the particle placed `k`-th (modes in
/// ascending order) carries internal state `internal[k]`. `u[(d, e)]` is the
/// amplitude for input mode `e` to reach output mode `d`.
pub fn second_quantized_reference(
    u: &CMatrix,
    occ_in: &[usize],
    occ_out: &[usize],
    internal: &[Vec<Complex64>],
) -> Result<f64> {
    let n = u.nrows();
    if u.ncols() != n || occ_in.len() != n || occ_out.len() != n {
        return Err(OracleError::Unsupported("mode count mismatch".into()));
    }
    let big_n: usize = occ_in.iter().sum();
    if occ_out.iter().sum::<usize>() != big_n || internal.len() != big_n {
        return Err(OracleError::Unsupported("particle count mismatch".into()));
    }
    if big_n > 7 {
        return Err(OracleError::Cap(big_n));
    }
    let expand = |occ: &[usize]| -> Vec<usize> {
        occ.iter()
            .enumerate()
            .flat_map(|(j, &r)| std::iter::repeat_n(j, r))
            .collect()
    };
    let e = expand(occ_in);
    let d = expand(occ_out);
    let inner = |a: usize, b: usize| -> Complex64 {
        internal[a]
            .iter()
            .zip(&internal[b])
            .map(|(x, y)| x.conj() * y)
            .sum()
    };
    let perms = permutations(big_n);

    let mut norm = Complex64::new(0.0, 0.0);
    for (pi, _) in &perms {
        let mut term = Complex64::new(1.0, 0.0);
        for k in 0..big_n {
            if e[k] != e[pi[k]] {
                term = Complex64::new(0.0, 0.0);
                break;
            }
            term *= inner(k, pi[k]);
        }
        norm += term;
    }

    let inverse = |p: &[usize]| -> Vec<usize> {
        let mut inv = vec![0; p.len()];
        for (i, &x) in p.iter().enumerate() {
            inv[x] = i;
        }
        inv
    };
    let amp = |sigma: &[usize]| -> Complex64 {
        (0..big_n).map(|k| u[(d[sigma[k]], e[k])]).product()
    };
    let mut acc = Complex64::new(0.0, 0.0);
    for (sigma, _) in &perms {
        let a_s = amp(sigma);
        if a_s.norm() == 0.0 {
            continue;
        }
        let si = inverse(sigma);
        for (tau, _) in &perms {
            let a_t = amp(tau);
            let ti = inverse(tau);
            let mut ov = Complex64::new(1.0, 0.0);
            for l in 0..big_n {
                ov *= inner(ti[l], si[l]);
            }
            acc += a_s * a_t.conj() * ov;
        }
    }
    let fact: f64 = occ_out.iter().map(|&s| (1..=s).product::<usize>() as f64).product();
    Ok(acc.re / (norm.re * fact))
}

/// Occupations of `particles` bosons on `sites` sites, first site highest.
pub fn occupation_basis(sites: usize, particles: usize) -> Vec<Vec<usize>> {
    fn rec(site: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if site + 1 == cur.len() {
            cur[site] = left;
            out.push(cur.clone());
            return;
        }
        for k in (0..=left).rev() {
            cur[site] = k;
            rec(site + 1, left - k, cur, out);
        }
    }
    let mut out = Vec::new();
    rec(0, particles, &mut vec![0; sites], &mut out);
    out
}

/// Bose-Hubbard Hamiltonian on a chain in the occupation basis of
/// [`occupation_basis`]:
/// `-J Σ_j (a†_j a_{j+1} + h.c.) + (U/2) Σ_j n_j (n_j - 1) + Σ_j ω_j n_j`.
pub fn second_quantized_bose_hubbard(sites: usize, particles: usize, j: f64, u: f64, omegas: &[f64]) -> CMatrix {
    let basis = occupation_basis(sites, particles);
    let pos = |occ: &Vec<usize>| basis.iter().position(|b| b == occ).expect("basis state");
    let dim = basis.len();
    let mut h = CMatrix::zeros(dim, dim);
    for (col, occ) in basis.iter().enumerate() {
        let mut diag = 0.0;
        for (s, &k) in occ.iter().enumerate() {
            let k = k as f64;
            diag += 0.5 * u * k * (k - 1.0) + omegas.get(s).copied().unwrap_or(0.0) * k;
        }
        h[(col, col)] += Complex64::new(diag, 0.0);
        for s in 0..sites.saturating_sub(1) {
            for (from, to) in [(s, s + 1), (s + 1, s)] {
                if occ[from] == 0 {
                    continue;
                }
                let mut next = occ.clone();
                let amp = ((occ[from] as f64) * (occ[to] as f64 + 1.0)).sqrt();
                next[from] -= 1;
                next[to] += 1;
                h[(pos(&next), col)] += Complex64::new(-j * amp, 0.0);
            }
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heap_enumerates_all() {
        for n in 0..=5 {
            let p = permutations(n);
            let fact: usize = (1..=n).product();
            assert_eq!(p.len(), fact);
            let mut set: Vec<_> = p.iter().map(|(x, _)| x.clone()).collect();
            set.sort();
            set.dedup();
            assert_eq!(set.len(), fact);
            let plus = p.iter().filter(|(_, s)| *s > 0.0).count();
            if n >= 2 {
                assert_eq!(plus * 2, fact);
            }
        }
    }

    #[test]
    fn hom_reference_endpoints() {
        let h = 0.5f64.sqrt();
        let u = CMatrix::from_row_slice(
            2,
            2,
            &[h, h, h, -h].map(|x| Complex64::new(x, 0.0)),
        );
        let a = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let b = vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        let same = second_quantized_reference(&u, &[1, 1], &[1, 1], &[a.clone(), a.clone()]).unwrap();
        assert!(same.abs() < 1e-15);
        let diff = second_quantized_reference(&u, &[1, 1], &[1, 1], &[a.clone(), b.clone()]).unwrap();
        assert!((diff - 0.5).abs() < 1e-15);
        let bunched = second_quantized_reference(&u, &[1, 1], &[2, 0], &[a.clone(), a]).unwrap();
        assert!((bunched - 0.5).abs() < 1e-15);
    }

    #[test]
    fn fourier_distinguishable_is_multinomial() {
        let w = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
        let s = 1.0 / 3f64.sqrt();
        let u = CMatrix::from_fn(3, 3, |i, j| w.powu((i * j) as u32) * s);
        let letters: Vec<Vec<Complex64>> = (0..3)
            .map(|k| (0..3).map(|i| Complex64::new(if i == k { 1.0 } else { 0.0 }, 0.0)).collect())
            .collect();
        // Each particle exits uniformly: p(S) = 3!/(∏S!) / 27.
        let mut total = 0.0;
        for out in occupation_basis(3, 3) {
            let p = second_quantized_reference(&u, &[1, 1, 1], &out, &letters).unwrap();
            let fact: f64 = out.iter().map(|&k| (1..=k).product::<usize>() as f64).product();
            assert!((p - 6.0 / fact / 27.0).abs() < 1e-14, "{out:?}: {p}");
            total += p;
        }
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn hubbard_is_hermitian_with_pair_energy() {
        let h = second_quantized_bose_hubbard(2, 2, 1.0, 3.0, &[0.0, 0.5]);
        assert!((&h - h.adjoint()).norm() < 1e-15);
        // Basis (2,0), (1,1), (0,2).
        assert!((h[(0, 0)].re - 3.0).abs() < 1e-15);
        assert!((h[(2, 2)].re - 4.0).abs() < 1e-15);
        assert!((h[(1, 0)].re + 2f64.sqrt()).abs() < 1e-15);
    }
}
