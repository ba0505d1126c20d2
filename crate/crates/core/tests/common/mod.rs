#![allow(dead_code)]

use duality_core::combinatorics::{basis_digits, stabilizer, ModeOccupation, Permutation};
use duality_core::linalg::CMatrix;
use duality_core::states::{permute_amplitudes, Amplitudes, Component, InternalState, ParticleKind, PreparedState};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn occ(v: &[usize]) -> ModeOccupation {
    ModeOccupation::new(v.to_vec()).unwrap()
}

/// Random amplitudes projected onto the block-(anti)symmetric subspace of
/// `occ`; `None` if the projection vanishes.
fn block_projected(rng: &mut ChaCha8Rng, o: &ModeOccupation, kind: ParticleKind, m: usize, support: usize) -> Option<Amplitudes> {
    let n = o.particles();
    let dim = m.pow(n as u32);
    let mut raw = Amplitudes::new();
    for _ in 0..support {
        let t = basis_digits(rng.random_range(0..dim), m, n);
        raw.insert(t, Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    }
    let mut acc = Amplitudes::new();
    for s in stabilizer(o).unwrap() {
        let sign = kind.sign(&s);
        for (t, a) in permute_amplitudes(&raw, &s).unwrap() {
            *acc.entry(t).or_default() += a * sign;
        }
    }
    acc.retain(|_, a| a.norm() > 1e-12);
    let norm: f64 = acc.values().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    (norm > 1e-6).then(|| acc.into_iter().map(|(t, a)| (t, a / norm)).collect())
}

/// Mixed internal state with `l` block-(anti)symmetric components.
pub fn random_block_state(seed: u64, o: &ModeOccupation, kind: ParticleKind, m: usize, l: usize) -> PreparedState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut comps = Vec::new();
    while comps.len() < l {
        let support = rng.random_range(1..=m.pow(o.particles() as u32).min(6));
        if let Some(amps) = block_projected(&mut rng, o, kind, m, support) {
            comps.push(Component::new(rng.random_range(0.1..1.0), amps));
        }
    }
    let total: f64 = comps.iter().map(|c| c.q).sum();
    comps.iter_mut().for_each(|c| c.q /= total);
    let s = InternalState::new(m, o.particles(), comps).unwrap();
    PreparedState::new(o.clone(), kind, s).unwrap()
}

/// `(|aaa> + |abb> + |bab>)/√3` for occupation (2,1).
pub fn worked_example() -> PreparedState {
    let w = c(1.0 / 3f64.sqrt());
    let amps: Amplitudes = [(vec![0, 0, 0], w), (vec![0, 1, 1], w), (vec![1, 0, 1], w)].into();
    let s = InternalState::pure(2, 3, amps).unwrap();
    PreparedState::new(occ(&[2, 1]), ParticleKind::Boson, s).unwrap()
}

/// The fixed matrix of small cases used for the oracle comparisons.
pub fn oracle_cases() -> Vec<(String, PreparedState)> {
    use ParticleKind::{Boson as B, Fermion as F};
    // (kind, occupation, m, components, preparation)
    let spec: &[(ParticleKind, &[usize], usize, usize, &str)] = &[
        (B, &[1, 1], 2, 1, "e"),
        (B, &[1, 1], 2, 2, "e"),
        (B, &[2, 0], 2, 1, "e"),
        (B, &[1, 1], 3, 3, "(12)"),
        (B, &[2, 1], 2, 1, "e"),
        (B, &[2, 1], 3, 2, "e"),
        (B, &[1, 1, 1], 2, 1, "e"),
        (B, &[1, 1, 1], 3, 2, "(13)"),
        (B, &[3, 0], 2, 1, "e"),
        (B, &[1, 2, 0], 2, 2, "e"),
        (B, &[1, 0, 2], 3, 1, "e"),
        (F, &[1, 1], 2, 1, "e"),
        (F, &[1, 1], 2, 2, "(12)"),
        (F, &[2, 0], 2, 1, "e"),
        (F, &[1, 1], 3, 3, "e"),
        (F, &[2, 1], 2, 1, "e"),
        (F, &[2, 1], 3, 2, "e"),
        (F, &[1, 1, 1], 2, 1, "e"),
        (F, &[1, 1, 1], 3, 2, "e"),
        (F, &[1, 1, 1], 3, 1, "(123)"),
        (F, &[0, 2, 1], 3, 1, "e"),
        (F, &[1, 1, 0], 3, 2, "e"),
        (F, &[2, 1], 3, 1, "e"),
    ];
    let mut out = vec![("worked example".to_string(), worked_example())];
    for (i, &(kind, o, m, l, prep)) in spec.iter().enumerate() {
        let o = occ(o);
        let mut p = random_block_state(1000 + i as u64, &o, kind, m, l);
        let kappa = Permutation::parse_cycles(prep, o.particles()).unwrap();
        p = p.with_preparation(kappa).unwrap();
        out.push((format!("{kind} {o} m={m} l={l} prep={prep}"), p));
    }
    out
}

pub fn frob(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm()
}

/// Frobenius errors of the reduced external and internal states against
/// literal partial traces of the brute-force joint state.
pub fn oracle_errors(p: &PreparedState) -> (f64, f64) {
    use duality_core::states::{reduced_internal, ExternalBlock};
    use duality_oracle::{brute_force_joint, oracle_reduced, Side};
    let joint = brute_force_joint(p).expect("oracle joint state");
    let ext = ExternalBlock::from_prepared(p).unwrap().embed().unwrap();
    let int = reduced_internal(p).unwrap();
    (
        frob(ext.matrix(), &oracle_reduced(&joint, Side::External)),
        frob(int.matrix(), &oracle_reduced(&joint, Side::Internal)),
    )
}

/// `W_C`, `W_P` and `lambda` computed from the oracle's external state.
pub fn oracle_worked_example_values() -> (f64, f64, f64) {
    use duality_core::states::ExternalBlock;
    use duality_oracle::{brute_force_joint, oracle_reduced, Side};
    let p = worked_example();
    let rho = oracle_reduced(&brute_force_joint(&p).unwrap(), Side::External);
    let b = ExternalBlock::from_prepared(&p).unwrap();
    let idx = b.basis_indices();
    let r = idx.len();
    // Restrict to the orbit; coherences are the off-diagonal entries there.
    let block = CMatrix::from_fn(r, r, |i, j| rho[(idx[i], idx[j])]);
    let off: f64 = (0..r)
        .flat_map(|i| (0..r).map(move |j| (i, j)))
        .filter(|(i, j)| i != j)
        .map(|(i, j)| block[(i, j)].norm())
        .sum();
    let w_c = off / (r as f64 - 1.0);
    let purity = (&block * &block).trace().re;
    let w_p = ((r as f64 * purity - 1.0) / (r as f64 - 1.0)).sqrt();
    // Bosonic ideal state: uniform superposition over the orbit.
    let psi = nalgebra::DVector::from_element(r, c(1.0 / (r as f64).sqrt()));
    let lambda = (psi.adjoint() * &block * &psi)[(0, 0)].re;
    (w_c, w_p, lambda)
}

/// Largest deviation between pipeline occupation statistics and the
/// second-quantized reference, for bosons entering `occ_in` with product
/// internal states `factors` (one per particle, modes ascending).
pub fn second_quantized_error(u1: &duality_core::linalg::UnitaryOperator, occ_in: &[usize], factors: &[Vec<Complex64>]) -> f64 {
    use duality_core::dynamics::{lift_single_particle, measure, occupation_labels, povm_occupation};
    use duality_core::states::ExternalBlock;
    let m = factors[0].len();
    let n_particles = factors.len();
    let modes = occ_in.len();
    let internal = InternalState::product(m, factors).unwrap();
    let p = PreparedState::new(occ(occ_in), ParticleKind::Boson, internal).unwrap();
    let rho = ExternalBlock::from_prepared(&p).unwrap().embed().unwrap();
    let u = lift_single_particle(u1, n_particles).unwrap();
    let dist = measure(&rho, &u, &povm_occupation(modes, n_particles).unwrap()).unwrap();
    occupation_labels(modes, n_particles)
        .unwrap()
        .iter()
        .map(|out| {
            let expect = duality_oracle::second_quantized_reference(u1.matrix(), occ_in, out.counts(), factors).unwrap();
            (dist.get(&out.to_string()).unwrap() - expect).abs()
        })
        .fold(0.0, f64::max)
}

/// Normalized random single-particle internal vector.
pub fn random_vector(rng: &mut ChaCha8Rng, m: usize) -> Vec<Complex64> {
    let v: Vec<Complex64> = (0..m)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let n = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|a| a / n).collect()
}
