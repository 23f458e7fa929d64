//! Truncated multimode Fock spaces.
//!
//! A [`FockBasis`] holds every occupation vector of `num_modes` modes whose
//! total photon number lies in a declared set of sectors. A [`PureState`] is
//! an amplitude vector over that basis, optionally tensored with a finite
//! reference register (basis-major, register-minor ordering).
//!
//! Beam splitters are two-mode rotations. For modes `(k, l)` the generator is
//! `H = i (a_k† a_l − a_l† a_k)`, and `exp(−iθH)` sends
//! `a_k† → cos θ a_k† − sin θ a_l†` and `a_l† → sin θ a_k† + cos θ a_l†`, so
//! `|1,0⟩ ↦ cos θ |1,0⟩ − sin θ |0,1⟩`.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::{Error, Result};

/// Photon counts of every mode, in mode order.
pub type Occupation = Box<[u8]>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone)]
pub struct FockBasis {
    num_modes: usize,
    sectors: BTreeSet<usize>,
    states: Vec<Occupation>,
    index: HashMap<Occupation, usize>,
}

impl fmt::Debug for FockBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FockBasis")
            .field("num_modes", &self.num_modes)
            .field("sectors", &self.sectors)
            .field("len", &self.states.len())
            .finish()
    }
}

impl PartialEq for FockBasis {
    fn eq(&self, other: &Self) -> bool {
        // enumeration is deterministic, so modes and sectors pin the basis
        self.num_modes == other.num_modes && self.sectors == other.sectors
    }
}

impl Eq for FockBasis {}

impl FockBasis {
    /// Enumerates all occupation vectors of `num_modes` modes with total
    /// photon number in `sectors`. Sectors are ascending; within a sector the
    /// states are in descending lexicographic order, e.g. `(2,0), (1,1), (0,2)`.
    pub fn enumerate(num_modes: usize, sectors: impl IntoIterator<Item = usize>) -> Result<Self> {
        if num_modes == 0 {
            return Err(Error::InvalidBasis("a basis needs at least one mode".into()));
        }
        let sectors: BTreeSet<usize> = sectors.into_iter().collect();
        if sectors.is_empty() {
            return Err(Error::InvalidBasis("no photon sectors declared".into()));
        }
        if let Some(&n) = sectors.iter().find(|&&n| n > u8::MAX as usize) {
            return Err(Error::InvalidBasis(format!("sector {n} exceeds {}", u8::MAX)));
        }
        let mut states = Vec::new();
        let mut scratch = vec![0u8; num_modes];
        for &n in &sectors {
            fill_sector(&mut scratch, 0, n as u8, &mut states);
        }
        Ok(Self::from_states(num_modes, sectors, states))
    }

    /// The one-dimensional space of zero modes, used for the output of a
    /// device whose modes are all detected.
    pub(crate) fn trivial() -> Self {
        Self::from_states(0, BTreeSet::from([0]), vec![Box::from([])])
    }

    fn from_states(num_modes: usize, sectors: BTreeSet<usize>, states: Vec<Occupation>) -> Self {
        let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Self {
            num_modes,
            sectors,
            states,
            index,
        }
    }

    pub fn num_modes(&self) -> usize {
        self.num_modes
    }

    pub fn sectors(&self) -> &BTreeSet<usize> {
        &self.sectors
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Occupation] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &[u8] {
        &self.states[i]
    }

    pub fn index_of(&self, occupation: &[u8]) -> Option<usize> {
        self.index.get(occupation).copied()
    }

    pub(crate) fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.num_modes {
            return Err(Error::ModeOutOfRange {
                mode,
                num_modes: self.num_modes,
            });
        }
        Ok(())
    }

    pub(crate) fn check_pair(&self, (k, l): (usize, usize)) -> Result<()> {
        self.check_mode(k)?;
        self.check_mode(l)?;
        if k == l {
            return Err(Error::DuplicateMode(k));
        }
        Ok(())
    }
}

fn fill_sector(scratch: &mut [u8], mode: usize, left: u8, out: &mut Vec<Occupation>) {
    if mode + 1 == scratch.len() {
        scratch[mode] = left;
        out.push(Box::from(&*scratch));
        return;
    }
    for n in (0..=left).rev() {
        scratch[mode] = n;
        fill_sector(scratch, mode + 1, left - n, out);
    }
}

/// A state vector over a Fock basis tensored with a reference register.
#[derive(Clone, Debug)]
pub struct PureState {
    basis: Arc<FockBasis>,
    register_dim: usize,
    amplitudes: Vec<Complex64>,
}

impl PureState {
    pub fn new(basis: Arc<FockBasis>, register_dim: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        if register_dim == 0 {
            return Err(Error::InvalidInput("register dimension must be at least 1".into()));
        }
        let expected = basis.len() * register_dim;
        if amplitudes.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: amplitudes.len(),
            });
        }
        Ok(Self {
            basis,
            register_dim,
            amplitudes,
        })
    }

    pub fn zeros(basis: Arc<FockBasis>, register_dim: usize) -> Self {
        let n = basis.len() * register_dim;
        Self {
            basis,
            register_dim,
            amplitudes: vec![ZERO; n],
        }
    }

    /// `|occupation⟩ ⊗ |register⟩`.
    pub fn basis_state(basis: Arc<FockBasis>, register_dim: usize, occupation: &[u8], register: usize) -> Result<Self> {
        let i = basis
            .index_of(occupation)
            .ok_or_else(|| Error::SectorMismatch(format!("{occupation:?} is not in the basis")))?;
        if register >= register_dim {
            return Err(Error::IndexOutOfRange {
                index: register,
                len: register_dim,
            });
        }
        let mut state = Self::zeros(basis, register_dim);
        state.amplitudes[i * register_dim + register] = Complex64::new(1.0, 0.0);
        Ok(state)
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn register_dim(&self) -> usize {
        self.register_dim
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    /// Amplitude of `|occupation⟩ ⊗ |register⟩`, zero when the occupation is
    /// outside the basis.
    pub fn amplitude(&self, occupation: &[u8], register: usize) -> Complex64 {
        self.basis
            .index_of(occupation)
            .map(|i| self.amplitudes[i * self.register_dim + register])
            .unwrap_or(ZERO)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::InvalidInput("cannot normalise the zero vector".into()));
        }
        self.scale_mut(Complex64::new(1.0 / n, 0.0));
        Ok(self)
    }

    pub fn scale_mut(&mut self, c: Complex64) {
        self.amplitudes.iter_mut().for_each(|a| *a *= c);
    }

    pub fn scaled(mut self, c: Complex64) -> Self {
        self.scale_mut(c);
        self
    }

    pub fn check_compatible(&self, other: &PureState) -> Result<()> {
        if !(Arc::ptr_eq(&self.basis, &other.basis) || *self.basis == *other.basis) {
            return Err(Error::BasisMismatch(format!("{:?} vs {:?}", self.basis, other.basis)));
        }
        if self.register_dim != other.register_dim {
            return Err(Error::BasisMismatch(format!(
                "register dimension {} vs {}",
                self.register_dim, other.register_dim
            )));
        }
        Ok(())
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> Result<Complex64> {
        self.check_compatible(other)?;
        Ok(dot(&self.amplitudes, &other.amplitudes))
    }

    /// `self + c·other`.
    pub fn add_scaled(&mut self, c: Complex64, other: &PureState) -> Result<()> {
        self.check_compatible(other)?;
        for (a, b) in self.amplitudes.iter_mut().zip(&other.amplitudes) {
            *a += c * b;
        }
        Ok(())
    }

    /// Euclidean distance `‖self − other‖`.
    pub fn distance(&self, other: &PureState) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    /// Total squared amplitude per photon-number sector.
    pub fn sector_weights(&self) -> Vec<(usize, f64)> {
        self.basis
            .sectors
            .iter()
            .map(|&n| {
                let w = self
                    .basis
                    .states
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| s.iter().map(|&x| x as usize).sum::<usize>() == n)
                    .flat_map(|(i, _)| {
                        let d = self.register_dim;
                        self.amplitudes[i * d..(i + 1) * d].iter()
                    })
                    .map(|a| a.norm_sqr())
                    .sum();
                (n, w)
            })
            .collect()
    }
}

pub(crate) fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `⟨a|b⟩`, conjugating `a`.
pub fn inner_product(a: &PureState, b: &PureState) -> Result<Complex64> {
    a.inner(b)
}

/// Evolves `state` under `exp(−iθH)` for the two-mode rotation generator on `pair`.
pub fn apply_two_mode_rotation(state: &PureState, pair: (usize, usize), theta: f64) -> Result<PureState> {
    state.basis.check_pair(pair)?;
    let mut out = state.clone();
    rotate_in_place(&mut out, pair, theta);
    Ok(out)
}

/// `H|state⟩` for the two-mode rotation generator `H = i(a_k† a_l − a_l† a_k)`.
pub fn apply_rotation_generator(state: &PureState, pair: (usize, usize)) -> Result<PureState> {
    state.basis.check_pair(pair)?;
    let mut out = PureState::zeros(state.basis.clone(), state.register_dim);
    add_rotation_generator(state, pair, &mut out);
    Ok(out)
}

/// The `(t+1)×(t+1)` block of `exp(−iθH)` for `t` photons shared by two
/// modes, over `|t−j, j⟩`, `j = 0..=t`. `−iθH` is real antisymmetric there.
fn rotation_block(t: usize, theta: f64) -> DMatrix<f64> {
    let n = t + 1;
    let mut gen = DMatrix::<f64>::zeros(n, n);
    for j in 1..=t {
        let x = ((j * (t - j + 1)) as f64).sqrt() * theta;
        gen[(j - 1, j)] = x;
        gen[(j, j - 1)] = -x;
    }
    gen.exp()
}

pub(crate) fn rotate_in_place(state: &mut PureState, (k, l): (usize, usize), theta: f64) {
    if theta == 0.0 {
        return;
    }
    let basis = state.basis.clone();
    let d = state.register_dim;
    let max_t = basis.sectors.iter().copied().max().unwrap_or(0);
    let blocks: Vec<DMatrix<f64>> = (0..=max_t).map(|t| rotation_block(t, theta)).collect();
    let mut scratch: Vec<u8> = vec![0; basis.num_modes];
    let mut members: Vec<usize> = Vec::with_capacity(max_t + 1);
    let mut column = vec![ZERO; max_t + 1];
    for (i, occ) in basis.states.iter().enumerate() {
        // each block is visited once, from its member with n_l = 0
        if occ[l] != 0 || occ[k] == 0 {
            continue;
        }
        let t = occ[k] as usize;
        scratch.copy_from_slice(occ);
        members.clear();
        members.push(i);
        for j in 1..=t {
            scratch[k] = (t - j) as u8;
            scratch[l] = j as u8;
            members.push(basis.index[&scratch[..]]);
        }
        let block = &blocks[t];
        for r in 0..d {
            for (c, &m) in members.iter().enumerate() {
                column[c] = state.amplitudes[m * d + r];
            }
            for (row, &m) in members.iter().enumerate() {
                let mut acc = ZERO;
                for c in 0..=t {
                    acc += column[c] * block[(row, c)];
                }
                state.amplitudes[m * d + r] = acc;
            }
        }
    }
}

/// Accumulates `H|state⟩` into `out` for the rotation generator on `(k, l)`.
fn add_rotation_generator(state: &PureState, (k, l): (usize, usize), out: &mut PureState) {
    let basis = &state.basis;
    let d = state.register_dim;
    let i_unit = Complex64::new(0.0, 1.0);
    let mut scratch: Vec<u8> = vec![0; basis.num_modes];
    for (i, occ) in basis.states.iter().enumerate() {
        let src = &state.amplitudes[i * d..(i + 1) * d];
        if src.iter().all(|a| *a == ZERO) {
            continue;
        }
        // i a_k† a_l
        if occ[l] > 0 {
            scratch.copy_from_slice(occ);
            let amp = (occ[l] as f64 * (occ[k] as f64 + 1.0)).sqrt();
            scratch[l] -= 1;
            scratch[k] += 1;
            let j = basis.index[&scratch[..]];
            for r in 0..d {
                out.amplitudes[j * d + r] += i_unit * amp * src[r];
            }
        }
        // −i a_l† a_k
        if occ[k] > 0 {
            scratch.copy_from_slice(occ);
            let amp = (occ[k] as f64 * (occ[l] as f64 + 1.0)).sqrt();
            scratch[k] -= 1;
            scratch[l] += 1;
            let j = basis.index[&scratch[..]];
            for r in 0..d {
                out.amplitudes[j * d + r] -= i_unit * amp * src[r];
            }
        }
    }
}

/// A Hermitian, number-conserving generator `H` of a component `exp(−iθH)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Generator {
    /// `H = 0`.
    Zero,
    /// Sum of two-mode rotation generators on disjoint mode pairs. A
    /// polarised beam splitter is the H pair plus the V pair.
    Rotation(Vec<(usize, usize)>),
    /// `H = Σ w_k n_k`.
    Number(Vec<(usize, f64)>),
    /// `H = Σ h_ab a_{m_a}† a_{m_b}` for a Hermitian single-particle matrix `h`
    /// over `modes`.
    Quadratic {
        modes: Vec<usize>,
        matrix: DMatrix<Complex64>,
    },
}

impl Generator {
    /// Modes the generator touches, in first-appearance order.
    pub fn modes(&self) -> Vec<usize> {
        let mut seen = Vec::new();
        let mut push = |m: usize| {
            if !seen.contains(&m) {
                seen.push(m);
            }
        };
        match self {
            Generator::Zero => {}
            Generator::Rotation(pairs) => pairs.iter().for_each(|&(a, b)| {
                push(a);
                push(b);
            }),
            Generator::Number(w) => w.iter().for_each(|&(m, _)| push(m)),
            Generator::Quadratic { modes, .. } => modes.iter().for_each(|&m| push(m)),
        }
        seen
    }

    /// Checks mode ranges, pair disjointness and Hermiticity.
    pub fn validate(&self, num_modes: usize) -> Result<()> {
        let check = |m: usize| {
            if m >= num_modes {
                Err(Error::ModeOutOfRange { mode: m, num_modes })
            } else {
                Ok(())
            }
        };
        match self {
            Generator::Zero => Ok(()),
            Generator::Rotation(pairs) => {
                let mut used = BTreeSet::new();
                for &(a, b) in pairs {
                    check(a)?;
                    check(b)?;
                    if a == b {
                        return Err(Error::DuplicateMode(a));
                    }
                    for m in [a, b] {
                        if !used.insert(m) {
                            return Err(Error::DuplicateMode(m));
                        }
                    }
                }
                Ok(())
            }
            Generator::Number(w) => {
                let mut used = BTreeSet::new();
                for &(m, _) in w {
                    check(m)?;
                    if !used.insert(m) {
                        return Err(Error::DuplicateMode(m));
                    }
                }
                Ok(())
            }
            Generator::Quadratic { modes, matrix } => {
                let mut used = BTreeSet::new();
                for &m in modes {
                    check(m)?;
                    if !used.insert(m) {
                        return Err(Error::DuplicateMode(m));
                    }
                }
                if matrix.nrows() != modes.len() || matrix.ncols() != modes.len() {
                    return Err(Error::DimensionMismatch {
                        expected: modes.len(),
                        got: matrix.nrows(),
                    });
                }
                let dev = (matrix - matrix.adjoint()).camax();
                if dev > 1e-12 {
                    return Err(Error::NotHermitian(dev));
                }
                Ok(())
            }
        }
    }

    /// Returns the same generator with mode `m` renamed to `map(m)`.
    pub fn relabel(&self, map: impl Fn(usize) -> usize) -> Generator {
        match self {
            Generator::Zero => Generator::Zero,
            Generator::Rotation(p) => Generator::Rotation(p.iter().map(|&(a, b)| (map(a), map(b))).collect()),
            Generator::Number(w) => Generator::Number(w.iter().map(|&(m, x)| (map(m), x)).collect()),
            Generator::Quadratic { modes, matrix } => Generator::Quadratic {
                modes: modes.iter().map(|&m| map(m)).collect(),
                matrix: matrix.clone(),
            },
        }
    }

    /// `H|state⟩`.
    pub fn apply(&self, state: &PureState) -> Result<PureState> {
        self.validate(state.basis.num_modes)?;
        let mut out = PureState::zeros(state.basis.clone(), state.register_dim);
        match self {
            Generator::Zero => {}
            Generator::Rotation(pairs) => {
                for &pair in pairs {
                    add_rotation_generator(state, pair, &mut out);
                }
            }
            Generator::Number(w) => {
                let d = state.register_dim;
                for (i, occ) in state.basis.states.iter().enumerate() {
                    let x: f64 = w.iter().map(|&(m, wt)| wt * occ[m] as f64).sum();
                    for r in 0..d {
                        out.amplitudes[i * d + r] = state.amplitudes[i * d + r] * x;
                    }
                }
            }
            Generator::Quadratic { modes, matrix } => add_quadratic(state, modes, matrix, &mut out),
        }
        Ok(out)
    }

    /// `exp(−iθH)|state⟩`.
    pub fn evolve(&self, state: &PureState, theta: f64) -> Result<PureState> {
        self.validate(state.basis.num_modes)?;
        let mut out = state.clone();
        match self {
            Generator::Zero => {}
            Generator::Rotation(pairs) => {
                // disjoint pairs commute
                for &pair in pairs {
                    rotate_in_place(&mut out, pair, theta);
                }
            }
            Generator::Number(w) => {
                let d = state.register_dim;
                for (i, occ) in state.basis.states.iter().enumerate() {
                    let x: f64 = w.iter().map(|&(m, wt)| wt * occ[m] as f64).sum();
                    let phase = Complex64::from_polar(1.0, -theta * x);
                    for r in 0..d {
                        out.amplitudes[i * d + r] *= phase;
                    }
                }
            }
            Generator::Quadratic { .. } => {
                if theta != 0.0 {
                    evolve_dense(self, &mut out, theta)?;
                }
            }
        }
        Ok(out)
    }

    /// Dense matrix of `H` on `basis` (register excluded).
    pub fn matrix_on(&self, basis: &Arc<FockBasis>) -> Result<DMatrix<Complex64>> {
        let n = basis.len();
        let mut m = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            let col = PureState::basis_state(basis.clone(), 1, basis.state(i), 0)?;
            let h = self.apply(&col)?;
            for (r, a) in h.amplitudes.iter().enumerate() {
                m[(r, i)] = *a;
            }
        }
        Ok(m)
    }
}

fn add_quadratic(state: &PureState, modes: &[usize], h: &DMatrix<Complex64>, out: &mut PureState) {
    let basis = &state.basis;
    let d = state.register_dim;
    let mut scratch: Vec<u8> = vec![0; basis.num_modes];
    for (i, occ) in basis.states.iter().enumerate() {
        let src = &state.amplitudes[i * d..(i + 1) * d];
        for (a, &ma) in modes.iter().enumerate() {
            for (b, &mb) in modes.iter().enumerate() {
                let coef = h[(a, b)];
                if coef == ZERO || occ[mb] == 0 {
                    continue;
                }
                scratch.copy_from_slice(occ);
                let mut amp = (scratch[mb] as f64).sqrt();
                scratch[mb] -= 1;
                amp *= (scratch[ma] as f64 + 1.0).sqrt();
                scratch[ma] += 1;
                let j = basis.index[&scratch[..]];
                for r in 0..d {
                    out.amplitudes[j * d + r] += coef * amp * src[r];
                }
            }
        }
    }
}

/// Exact evolution by eigendecomposition of `H` restricted to each sector.
fn evolve_dense(gen: &Generator, state: &mut PureState, theta: f64) -> Result<()> {
    let basis = state.basis.clone();
    let d = state.register_dim;
    for &n in basis.sectors.iter() {
        let members: Vec<usize> = (0..basis.len())
            .filter(|&i| basis.states[i].iter().map(|&x| x as usize).sum::<usize>() == n)
            .collect();
        let sector = Arc::new(FockBasis::enumerate(basis.num_modes, [n])?);
        let h = gen.matrix_on(&sector)?;
        let u = unitary_from_hermitian(&h, theta);
        // sector enumeration order matches the parent basis order
        for r in 0..d {
            let col: Vec<Complex64> = members.iter().map(|&m| state.amplitudes[m * d + r]).collect();
            for (row, &m) in members.iter().enumerate() {
                let mut acc = ZERO;
                for (c, v) in col.iter().enumerate() {
                    acc += u[(row, c)] * v;
                }
                state.amplitudes[m * d + r] = acc;
            }
        }
    }
    Ok(())
}

/// `exp(−iθH)` for Hermitian `H`.
pub(crate) fn unitary_from_hermitian(h: &DMatrix<Complex64>, theta: f64) -> DMatrix<Complex64> {
    let eig = SymmetricEigen::new(h.clone());
    let phases = DMatrix::from_diagonal(
        &eig.eigenvalues
            .map(|lambda| Complex64::from_polar(1.0, -theta * lambda)),
    );
    &eig.eigenvectors * phases * eig.eigenvectors.adjoint()
}
