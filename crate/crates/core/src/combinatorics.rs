//! Mode occupations, mode assignments, permutations of `S_N`, the stabilizer
//! `S_R` of the canonical assignment and its right transversal.
//!
//! Indices are zero-based in memory: particle slot `i` is `0..N`, mode `j`
//! is `0..n`. Display and cycle notation are one-based.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerances::Caps;

/// Number of particles per external mode.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct ModeOccupation {
    counts: Vec<usize>,
}

impl ModeOccupation {
    pub fn new(counts: Vec<usize>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidOccupation("no modes".into()));
        }
        if counts.iter().sum::<usize>() == 0 {
            return Err(Error::InvalidOccupation("no particles".into()));
        }
        Ok(Self { counts })
    }

    /// `N` particles in `N` distinct modes out of `n`.
    pub fn singly_occupied(n: usize, particles: usize) -> Result<Self> {
        if particles > n {
            return Err(Error::InvalidOccupation(format!(
                "{particles} particles cannot singly occupy {n} modes"
            )));
        }
        let mut counts = vec![0; n];
        counts[..particles].fill(1);
        Self::new(counts)
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Number of modes `n`.
    pub fn modes(&self) -> usize {
        self.counts.len()
    }

    /// Number of particles `N`.
    pub fn particles(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn max_occupation(&self) -> usize {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    /// Number of inequivalent particle labelings `R = N! / prod R_j!`.
    pub fn r_count(&self) -> usize {
        multinomial(&self.counts).unwrap_or(usize::MAX)
    }

    /// Order of the stabilizer `prod R_j!`.
    pub fn stabilizer_order(&self) -> usize {
        self.counts
            .iter()
            .try_fold(1usize, |acc, &r| acc.checked_mul(factorial(r)?))
            .unwrap_or(usize::MAX)
    }
}

impl TryFrom<Vec<usize>> for ModeOccupation {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ModeOccupation> for Vec<usize> {
    fn from(o: ModeOccupation) -> Self {
        o.counts
    }
}

impl fmt::Display for ModeOccupation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.counts.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Mode of each particle slot (zero-based modes).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeAssignment {
    modes: Vec<usize>,
}

impl ModeAssignment {
    pub fn new(modes: Vec<usize>) -> Self {
        Self { modes }
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// The occupation this assignment realizes in `n` modes.
    pub fn occupation(&self, n: usize) -> Result<ModeOccupation> {
        let mut counts = vec![0; n];
        for &e in &self.modes {
            if e >= n {
                return Err(Error::InvalidOccupation(format!("mode {} out of range", e + 1)));
            }
            counts[e] += 1;
        }
        ModeOccupation::new(counts)
    }

    /// Row index of `|E_1, ..., E_N>` in the `n^N` product basis, slot 1
    /// being the most significant digit.
    pub fn basis_index(&self, n: usize) -> usize {
        basis_index(&self.modes, n)
    }
}

impl fmt::Display for ModeAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.modes.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", e + 1)?;
        }
        write!(f, ")")
    }
}

/// Index of a digit tuple in a product basis of local dimension `base`.
pub fn basis_index(digits: &[usize], base: usize) -> usize {
    digits.iter().fold(0, |acc, &d| acc * base + d)
}

/// Inverse of [`basis_index`].
pub fn basis_digits(mut index: usize, base: usize, len: usize) -> Vec<usize> {
    let mut digits = vec![0; len];
    for d in digits.iter_mut().rev() {
        *d = index % base;
        index /= base;
    }
    digits
}

/// A permutation of particle slots. `images[i]` is `pi(i)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    images: Vec<usize>,
    sign: i8,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self {
            images: (0..n).collect(),
            sign: 1,
        }
    }

    pub fn from_images(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &i in &images {
            if i >= n || seen[i] {
                return Err(Error::InvalidPermutation(format!("{images:?} is not a bijection")));
            }
            seen[i] = true;
        }
        let sign = parity_from_cycles(&images);
        Ok(Self { images, sign })
    }

    /// Builds a permutation of `n` slots from one-based cycles.
    pub fn from_cycles(n: usize, cycles: &[Vec<usize>]) -> Result<Self> {
        let mut images: Vec<usize> = (0..n).collect();
        let mut used = vec![false; n];
        for cycle in cycles {
            for (k, &c) in cycle.iter().enumerate() {
                if c == 0 || c > n {
                    return Err(Error::InvalidPermutation(format!("slot {c} out of range 1..{n}")));
                }
                if used[c - 1] {
                    return Err(Error::InvalidPermutation(format!("slot {c} repeated")));
                }
                used[c - 1] = true;
                let next = cycle[(k + 1) % cycle.len()];
                if next == 0 || next > n {
                    return Err(Error::InvalidPermutation(format!("slot {next} out of range 1..{n}")));
                }
                images[c - 1] = next - 1;
            }
        }
        Self::from_images(images)
    }

    /// Parses cycle notation such as `(13)`, `(12)(34)`, `(1 10)` or `e`.
    pub fn parse_cycles(s: &str, n: usize) -> Result<Self> {
        let t = s.trim();
        if t.is_empty() || t == "e" || t == "ε" || t == "id" || t == "()" {
            return Ok(Self::identity(n));
        }
        let mut cycles = Vec::new();
        let mut rest = t;
        while !rest.is_empty() {
            let rest_trim = rest.trim_start();
            let Some(body) = rest_trim.strip_prefix('(') else {
                return Err(Error::InvalidPermutation(format!("expected '(' in {s:?}")));
            };
            let Some(end) = body.find(')') else {
                return Err(Error::InvalidPermutation(format!("unclosed cycle in {s:?}")));
            };
            let inner = &body[..end];
            let cycle: Vec<usize> = if inner.contains([',', ' ']) {
                inner
                    .split([',', ' '])
                    .filter(|p| !p.is_empty())
                    .map(|p| p.parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::InvalidPermutation(format!("{s:?}: {e}")))?
            } else {
                inner
                    .chars()
                    .map(|c| {
                        c.to_digit(10)
                            .map(|d| d as usize)
                            .ok_or_else(|| Error::InvalidPermutation(format!("bad slot {c:?} in {s:?}")))
                    })
                    .collect::<Result<_>>()?
            };
            if !cycle.is_empty() {
                cycles.push(cycle);
            }
            rest = body[end + 1..].trim_start();
        }
        Self::from_cycles(n, &cycles)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn image(&self, i: usize) -> usize {
        self.images[i]
    }

    /// Parity `(-1)^pi`.
    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &p)| i == p)
    }

    /// `self ∘ other`, i.e. `i -> self(other(i))`.
    ///
    /// With this convention `apply(compose(a, b), t) == apply(b, apply(a, t))`.
    pub fn compose(&self, other: &Permutation) -> Result<Permutation> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        let images = other.images.iter().map(|&i| self.images[i]).collect();
        Ok(Permutation {
            images,
            sign: self.sign * other.sign,
        })
    }

    pub fn inverse(&self) -> Permutation {
        let mut images = vec![0; self.len()];
        for (i, &p) in self.images.iter().enumerate() {
            images[p] = i;
        }
        Permutation {
            images,
            sign: self.sign,
        }
    }

    /// Permutes the entries of a slot tuple: `out[i] = t[pi(i)]`.
    pub fn apply<T: Clone>(&self, t: &[T]) -> Result<Vec<T>> {
        if t.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: t.len(),
            });
        }
        Ok(self.apply_unchecked(t))
    }

    pub(crate) fn apply_unchecked<T: Clone>(&self, t: &[T]) -> Vec<T> {
        self.images.iter().map(|&i| t[i].clone()).collect()
    }

    /// Disjoint cycles of length at least two, one-based.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.len()];
        let mut out = Vec::new();
        for start in 0..self.len() {
            if seen[start] {
                continue;
            }
            let mut cycle = vec![start + 1];
            seen[start] = true;
            let mut j = self.images[start];
            while j != start {
                seen[j] = true;
                cycle.push(j + 1);
                j = self.images[j];
            }
            if cycle.len() > 1 {
                out.push(cycle);
            }
        }
        out
    }
}

fn parity_from_cycles(images: &[usize]) -> i8 {
    let n = images.len();
    let mut seen = vec![false; n];
    let mut cycles = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        cycles += 1;
        let mut j = start;
        while !seen[j] {
            seen[j] = true;
            j = images[j];
        }
    }
    if (n - cycles).is_multiple_of(2) {
        1
    } else {
        -1
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cycles = self.cycles();
        if cycles.is_empty() {
            return write!(f, "e");
        }
        let wide = self.len() >= 10;
        for c in cycles {
            write!(f, "(")?;
            for (k, x) in c.iter().enumerate() {
                if wide && k > 0 {
                    write!(f, " ")?;
                }
                write!(f, "{x}")?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

pub fn compose(a: &Permutation, b: &Permutation) -> Result<Permutation> {
    a.compose(b)
}

pub fn invert(a: &Permutation) -> Permutation {
    a.inverse()
}

pub fn apply<T: Clone>(a: &Permutation, t: &[T]) -> Result<Vec<T>> {
    a.apply(t)
}

/// `n!`, or `None` on overflow.
pub fn factorial(n: usize) -> Option<usize> {
    (1..=n).try_fold(1usize, |acc, k| acc.checked_mul(k))
}

/// `(sum k)! / prod k!`, or `None` on overflow.
pub fn multinomial(parts: &[usize]) -> Option<usize> {
    let mut total = 0usize;
    let mut acc = 1usize;
    for &k in parts {
        for i in 1..=k {
            total += 1;
            // acc * total / i stays integral: acc counts arrangements so far.
            acc = acc.checked_mul(total)? / i;
        }
    }
    Some(acc)
}

/// The assignment with components listed in non-decreasing order.
pub fn canonical_assignment(occ: &ModeOccupation) -> ModeAssignment {
    let modes = occ
        .counts()
        .iter()
        .enumerate()
        .flat_map(|(j, &r)| std::iter::repeat_n(j, r))
        .collect();
    ModeAssignment::new(modes)
}

/// All permutations of `n` slots in lexicographic order of images.
pub fn all_permutations(n: usize) -> Result<Vec<Permutation>> {
    all_permutations_with_caps(n, &Caps::DEFAULT)
}

pub fn all_permutations_with_caps(n: usize, caps: &Caps) -> Result<Vec<Permutation>> {
    let count = factorial(n).unwrap_or(usize::MAX);
    if count > caps.factorial {
        return Err(Error::CapExceeded {
            what: "N!",
            value: count,
            cap: caps.factorial,
        });
    }
    let mut out = Vec::with_capacity(count);
    let mut images: Vec<usize> = (0..n).collect();
    loop {
        out.push(Permutation::from_images(images.clone())?);
        if !next_permutation(&mut images) {
            break;
        }
    }
    Ok(out)
}

/// Advances to the next lexicographic arrangement; `false` when exhausted.
fn next_permutation<T: Ord>(v: &mut [T]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// The subgroup `S_R = S_{R_1} x ... x S_{R_n}` permuting slots inside the
/// equal-mode blocks of the canonical assignment.
pub fn stabilizer(occ: &ModeOccupation) -> Result<Vec<Permutation>> {
    stabilizer_with_caps(occ, &Caps::DEFAULT)
}

pub fn stabilizer_with_caps(occ: &ModeOccupation, caps: &Caps) -> Result<Vec<Permutation>> {
    let order = occ.stabilizer_order();
    if order > caps.factorial {
        return Err(Error::CapExceeded {
            what: "|S_R|",
            value: order,
            cap: caps.factorial,
        });
    }
    let n = occ.particles();
    let mut group = vec![Permutation::identity(n)];
    let mut offset = 0;
    for &r in occ.counts() {
        if r >= 2 {
            let block = all_permutations_with_caps(r, caps)?;
            let mut next = Vec::with_capacity(group.len() * block.len());
            for g in &group {
                for b in &block {
                    let mut images = g.images.clone();
                    for (k, &bk) in b.images.iter().enumerate() {
                        images[offset + k] = offset + bk;
                    }
                    next.push(Permutation::from_images(images)?);
                }
            }
            group = next;
        }
        offset += r;
    }
    group.sort();
    Ok(group)
}

/// One representative per right coset `S_R · mu` of the stabilizer, together
/// with the assignments `E_mu` they produce.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transversal {
    occupation: ModeOccupation,
    reps: Vec<Permutation>,
    assignments: Vec<ModeAssignment>,
}

impl Transversal {
    pub fn occupation(&self) -> &ModeOccupation {
        &self.occupation
    }

    pub fn reps(&self) -> &[Permutation] {
        &self.reps
    }

    /// `E_mu` for each representative, in the same order.
    pub fn assignments(&self) -> &[ModeAssignment] {
        &self.assignments
    }

    /// `R`, the number of particle labelings.
    pub fn r_count(&self) -> usize {
        self.reps.len()
    }

    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    /// Position of the coset containing `pi`.
    pub fn coset_of(&self, pi: &Permutation) -> Option<usize> {
        let canonical = canonical_assignment(&self.occupation);
        let target = pi.apply(canonical.modes()).ok()?;
        self.assignments.iter().position(|a| a.modes() == target.as_slice())
    }
}

/// Right transversal of `S_R` in `S_N`.
///
/// Each coset is represented by its lexicographically smallest member (by
/// image sequence), and representatives are listed in lexicographic order.
pub fn right_transversal(occ: &ModeOccupation) -> Result<Transversal> {
    right_transversal_with_caps(occ, &Caps::DEFAULT)
}

pub fn right_transversal_with_caps(occ: &ModeOccupation, caps: &Caps) -> Result<Transversal> {
    let r = occ.r_count();
    if r > caps.r_count {
        return Err(Error::CapExceeded {
            what: "R",
            value: r,
            cap: caps.r_count,
        });
    }
    let canonical = canonical_assignment(occ);
    let n = canonical.len();
    let mut arrangement = canonical.modes().to_vec();
    let mut reps = Vec::with_capacity(r);
    loop {
        // Greedy: each slot takes the smallest unused source position that
        // carries the required mode, giving the smallest image sequence.
        let mut used = vec![false; n];
        let images: Vec<usize> = arrangement
            .iter()
            .map(|&mode| {
                let p = (0..n)
                    .find(|&p| !used[p] && canonical.modes()[p] == mode)
                    .expect("arrangement is a rearrangement of the canonical assignment");
                used[p] = true;
                p
            })
            .collect();
        reps.push(Permutation::from_images(images)?);
        if !next_permutation(&mut arrangement) {
            break;
        }
    }
    reps.sort();
    let assignments = reps
        .iter()
        .map(|mu| ModeAssignment::new(mu.apply_unchecked(canonical.modes())))
        .collect();
    Ok(Transversal {
        occupation: occ.clone(),
        reps,
        assignments,
    })
}

/// All occupations of `particles` particles in `n` modes, in descending
/// lexicographic order: `(N,0,..)` first, `(..,0,N)` last.
pub fn enumerate_occupations(n: usize, particles: usize) -> Result<Vec<ModeOccupation>> {
    enumerate_occupations_with_caps(n, particles, &Caps::DEFAULT)
}

pub fn enumerate_occupations_with_caps(
    n: usize,
    particles: usize,
    caps: &Caps,
) -> Result<Vec<ModeOccupation>> {
    if n == 0 || particles == 0 {
        return Err(Error::InvalidOccupation("n and N must be positive".into()));
    }
    // C(N + n - 1, n - 1)
    let count = binomial(particles + n - 1, n - 1).unwrap_or(usize::MAX);
    if count > caps.occupations {
        return Err(Error::CapExceeded {
            what: "number of occupations",
            value: count,
            cap: caps.occupations,
        });
    }
    let mut out = Vec::with_capacity(count);
    let mut current = vec![0; n];
    fill_occupations(0, particles, &mut current, &mut out);
    out.into_iter().map(ModeOccupation::new).collect()
}

fn fill_occupations(mode: usize, left: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if mode + 1 == current.len() {
        current[mode] = left;
        out.push(current.clone());
        return;
    }
    for k in (0..=left).rev() {
        current[mode] = k;
        fill_occupations(mode + 1, left - k, current, out);
    }
}

fn binomial(n: usize, k: usize) -> Option<usize> {
    let k = k.min(n - k.min(n));
    (0..k).try_fold(1usize, |acc, i| Some(acc.checked_mul(n - i)? / (i + 1)))
}

/// Distinct assignments produced by applying every representative to the
/// canonical assignment.
pub fn orbit_assignments(t: &Transversal) -> BTreeSet<ModeAssignment> {
    t.assignments().iter().cloned().collect()
}
