//! Truncated many-body representation: basis enumeration, second
//! quantization of coefficient matrices, and state preparation.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_defect, CMat, CVec};

pub const DEFAULT_DIMENSION_CAP: usize = 1 << 20;

/// How the occupation space is truncated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ModeKind {
    /// Independent maximum occupation per mode.
    Cutoffs(Vec<usize>),
    /// All occupations with a fixed total.
    Sector(usize),
}

/// Ordered occupation tuples with an index map.
#[derive(Debug)]
pub struct FockBasis {
    n: usize,
    kind: ModeKind,
    states: Vec<Vec<u16>>,
    index: HashMap<Vec<u16>, usize>,
}

impl PartialEq for FockBasis {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.kind == other.kind
    }
}

/// Binomial coefficient, exact in u128 for the sizes used here.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn sector_dim(n_modes: usize, total: usize) -> u128 {
    binomial(total + n_modes - 1, n_modes - 1)
}

impl FockBasis {
    pub fn new(n: usize, kind: ModeKind) -> Result<Arc<Self>> {
        Self::with_cap(n, kind, DEFAULT_DIMENSION_CAP)
    }

    pub fn sector(n: usize, total: usize) -> Result<Arc<Self>> {
        Self::new(n, ModeKind::Sector(total))
    }

    pub fn cutoffs(cutoffs: &[usize]) -> Result<Arc<Self>> {
        Self::new(cutoffs.len(), ModeKind::Cutoffs(cutoffs.to_vec()))
    }

    pub fn with_cap(n: usize, kind: ModeKind, cap: usize) -> Result<Arc<Self>> {
        if n == 0 {
            return Err(Error::Config("basis needs at least one mode".into()));
        }
        let dim: u128 = match &kind {
            ModeKind::Sector(total) => sector_dim(n, *total),
            ModeKind::Cutoffs(c) => {
                if c.len() != n {
                    return Err(Error::Config(format!("{} cutoffs for {n} modes", c.len())));
                }
                c.iter().fold(1u128, |acc, &x| acc.saturating_mul(x as u128 + 1))
            }
        };
        if dim > cap as u128 {
            return Err(Error::DimensionCap { dim: dim.min(usize::MAX as u128) as usize, cap });
        }
        if let ModeKind::Cutoffs(c) = &kind {
            if c.iter().any(|&x| x > u16::MAX as usize) {
                return Err(Error::Config("cutoff too large".into()));
            }
        }
        let mut states = Vec::with_capacity(dim as usize);
        let mut cur = vec![0u16; n];
        enumerate(&kind, 0, &mut cur, &mut states);
        let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Ok(Arc::new(Self { n, kind, states, index }))
    }

    pub fn modes(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &ModeKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[Vec<u16>] {
        &self.states
    }

    pub fn occupation(&self, i: usize) -> &[u16] {
        &self.states[i]
    }

    pub fn index_of(&self, occ: &[usize]) -> Option<usize> {
        if occ.len() != self.n || occ.iter().any(|&x| x > u16::MAX as usize) {
            return None;
        }
        let key: Vec<u16> = occ.iter().map(|&x| x as u16).collect();
        self.index.get(&key).copied()
    }

    fn require(&self, occ: &[usize]) -> Result<usize> {
        self.index_of(occ).ok_or_else(|| Error::OccupationNotInBasis(occ.to_vec()))
    }

    fn cutoffs_or_err(&self) -> Result<&[usize]> {
        match &self.kind {
            ModeKind::Cutoffs(c) => Ok(c),
            ModeKind::Sector(_) => Err(Error::BasisMismatch(
                "operation needs a per-mode cutoff basis".into(),
            )),
        }
    }
}

fn enumerate(kind: &ModeKind, mode: usize, cur: &mut Vec<u16>, out: &mut Vec<Vec<u16>>) {
    let n = cur.len();
    match kind {
        ModeKind::Cutoffs(c) => {
            if mode == n {
                out.push(cur.clone());
                return;
            }
            for v in 0..=c[mode] {
                cur[mode] = v as u16;
                enumerate(kind, mode + 1, cur, out);
            }
            cur[mode] = 0;
        }
        ModeKind::Sector(total) => {
            let used: usize = cur[..mode].iter().map(|&x| x as usize).sum();
            let left = total - used;
            if mode == n - 1 {
                cur[mode] = left as u16;
                out.push(cur.clone());
                cur[mode] = 0;
                return;
            }
            for v in 0..=left {
                cur[mode] = v as u16;
                enumerate(kind, mode + 1, cur, out);
            }
            cur[mode] = 0;
        }
    }
}

/// Compressed-row sparse complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub dim: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<Complex64>,
}

impl CsrMatrix {
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        (self.row_ptr[r]..self.row_ptr[r + 1])
            .find(|&i| self.col[i] == c)
            .map(|i| self.val[i])
            .unwrap_or_default()
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    pub fn mul_vec(&self, x: &CVec) -> CVec {
        let mut y = CVec::zeros(self.dim);
        for r in 0..self.dim {
            let mut acc = Complex64::default();
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.val[i] * x[self.col[i]];
            }
            y[r] = acc;
        }
        y
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.col[i])] += self.val[i];
            }
        }
        m
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (0..self.dim).all(|r| {
            (self.row_ptr[r]..self.row_ptr[r + 1])
                .all(|i| (self.val[i] - self.get(self.col[i], r).conj()).norm() <= tol)
        })
    }
}

/// Precomputed matrix elements of a_j†a_k on a basis.
///
/// Entry lists hold `(row, col, √(n_j+1)·√n_k)`-style factors.
#[derive(Debug)]
pub struct LadderTable {
    basis: Arc<FockBasis>,
    pairs: Vec<Vec<(u32, u32, f64)>>,
}

impl LadderTable {
    pub fn new(basis: Arc<FockBasis>) -> Self {
        let n = basis.modes();
        let cut: Option<Vec<usize>> = match basis.kind() {
            ModeKind::Cutoffs(c) => Some(c.clone()),
            ModeKind::Sector(_) => None,
        };
        let mut pairs = vec![Vec::new(); n * n];
        let mut key = vec![0u16; n];
        for (col, occ) in basis.states().iter().enumerate() {
            for k in 0..n {
                if occ[k] == 0 {
                    continue;
                }
                for j in 0..n {
                    if j == k {
                        pairs[j * n + k].push((col as u32, col as u32, occ[k] as f64));
                        continue;
                    }
                    if let Some(c) = &cut {
                        if occ[j] as usize + 1 > c[j] {
                            continue;
                        }
                    }
                    key.copy_from_slice(occ);
                    key[k] -= 1;
                    key[j] += 1;
                    if let Some(&row) = basis.index.get(&key) {
                        let v = ((occ[j] as f64 + 1.0) * occ[k] as f64).sqrt();
                        pairs[j * n + k].push((row as u32, col as u32, v));
                    }
                }
            }
        }
        Self { basis, pairs }
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    /// out = scale · H(h_a) · x, where H = Σ h_jk a_j†a_k.
    pub fn apply(&self, h_a: &CMat, scale: Complex64, x: &CVec, out: &mut CVec) {
        let n = self.basis.modes();
        out.fill(Complex64::default());
        for j in 0..n {
            for k in 0..n {
                let c = h_a[(j, k)] * scale;
                if c == Complex64::default() {
                    continue;
                }
                for &(r, col, v) in &self.pairs[j * n + k] {
                    out[r as usize] += c * v * x[col as usize];
                }
            }
        }
    }

    /// Sparse many-body matrix of Σ h_jk a_j†a_k.
    pub fn assemble(&self, h_a: &CMat) -> CsrMatrix {
        let n = self.basis.modes();
        let dim = self.basis.dim();
        let mut rows: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); dim];
        for j in 0..n {
            for k in 0..n {
                let c = h_a[(j, k)];
                if c == Complex64::default() {
                    continue;
                }
                for &(r, col, v) in &self.pairs[j * n + k] {
                    rows[r as usize].push((col as usize, c * v));
                }
            }
        }
        let mut m = CsrMatrix { dim, row_ptr: vec![0], col: Vec::new(), val: Vec::new() };
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *m.val.last_mut().expect("entry exists") += v;
                } else {
                    m.col.push(c);
                    m.val.push(v);
                    last = Some(c);
                }
            }
            m.row_ptr.push(m.col.len());
        }
        m
    }
}

/// H = Σ_jk H^a_jk a_j†a_k on the basis.
pub fn second_quantize(h_a: &CMat, basis: &Arc<FockBasis>) -> Result<CsrMatrix> {
    if h_a.nrows() != basis.modes() {
        return Err(Error::BasisMismatch(format!(
            "{}x{} coefficients for {} modes",
            h_a.nrows(),
            h_a.ncols(),
            basis.modes()
        )));
    }
    let defect = hermitian_defect(h_a);
    if defect > 1e-10 {
        return Err(Error::NotHermitian { defect });
    }
    Ok(LadderTable::new(basis.clone()).assemble(h_a))
}

/// Amplitudes on a basis plus the norm lost to truncation at preparation.
#[derive(Clone, Debug)]
pub struct StateVector {
    pub basis: Arc<FockBasis>,
    pub amp: CVec,
    pub deficit: f64,
}

impl StateVector {
    pub fn norm_sqr(&self) -> f64 {
        self.amp.norm_squared()
    }

    pub fn with_amp(&self, amp: CVec) -> Self {
        Self { basis: self.basis.clone(), amp, deficit: self.deficit }
    }
}

#[derive(Clone, Debug)]
pub struct DensityMatrix {
    pub basis: Arc<FockBasis>,
    pub rho: CMat,
    pub deficit: f64,
}

impl DensityMatrix {
    pub fn from_pure(psi: &StateVector) -> Self {
        Self {
            basis: psi.basis.clone(),
            rho: &psi.amp * psi.amp.adjoint(),
            deficit: psi.deficit,
        }
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }
}

pub fn fock_state(basis: &Arc<FockBasis>, occupation: &[usize]) -> Result<StateVector> {
    let i = basis.require(occupation)?;
    let mut amp = CVec::zeros(basis.dim());
    amp[i] = Complex64::new(1.0, 0.0);
    Ok(StateVector { basis: basis.clone(), amp, deficit: 0.0 })
}

pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-6;

/// Single-mode coherent amplitudes e^{−|α|²/2}αⁿ/√n! for n ≤ cutoff.
fn coherent_coeffs(alpha: Complex64, cutoff: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(cutoff + 1);
    let mut c = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    out.push(c);
    for n in 1..=cutoff {
        c = c * alpha / (n as f64).sqrt();
        out.push(c);
    }
    out
}

/// Smallest cutoff whose Poisson tail for mean `mean` drops below `tol`.
pub fn suggested_cutoff(mean: f64, tol: f64) -> usize {
    let mut p = (-mean).exp();
    let mut acc = p;
    let mut n = 0usize;
    while 1.0 - acc > tol && n < 100_000 {
        n += 1;
        p *= mean / n as f64;
        acc += p;
    }
    n
}

/// Embeds single-mode amplitudes on `mode` (others in vacuum).
fn embed_single_mode(
    basis: &Arc<FockBasis>,
    mode: usize,
    coeffs: &[Complex64],
) -> Result<CVec> {
    let mut amp = CVec::zeros(basis.dim());
    let mut occ = vec![0usize; basis.modes()];
    for (n, c) in coeffs.iter().enumerate() {
        occ[mode] = n;
        if let Some(i) = basis.index_of(&occ) {
            amp[i] = *c;
        }
    }
    Ok(amp)
}

fn check_mode(basis: &FockBasis, mode: usize) -> Result<()> {
    if mode == 0 || mode > basis.modes() {
        return Err(Error::IndexOutOfRange { index: mode, max: basis.modes() });
    }
    Ok(())
}

/// Coherent state |α⟩ on `mode` (1-based), vacuum elsewhere.
pub fn coherent_state(
    basis: &Arc<FockBasis>,
    mode: usize,
    alpha: Complex64,
    tol: f64,
) -> Result<StateVector> {
    check_mode(basis, mode)?;
    let cutoff = basis.cutoffs_or_err()?[mode - 1];
    let coeffs = coherent_coeffs(alpha, cutoff);
    let kept: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    let deficit = (1.0 - kept).max(0.0);
    if deficit > tol {
        return Err(Error::Truncation {
            deficit,
            suggested_cutoff: suggested_cutoff(alpha.norm_sqr(), tol),
        });
    }
    let amp = embed_single_mode(basis, mode - 1, &coeffs)?;
    Ok(StateVector { basis: basis.clone(), amp, deficit })
}

/// Even cat (|α⟩ + |−α⟩)/𝒩 on `mode`, renormalized on the truncated basis.
pub fn cat_state(
    basis: &Arc<FockBasis>,
    mode: usize,
    alpha: Complex64,
    tol: f64,
) -> Result<StateVector> {
    check_mode(basis, mode)?;
    let cutoff = basis.cutoffs_or_err()?[mode - 1];
    let plus = coherent_coeffs(alpha, cutoff);
    let minus = coherent_coeffs(-alpha, cutoff);
    let norm = (2.0 * (1.0 + (-2.0 * alpha.norm_sqr()).exp())).sqrt();
    let mut coeffs: Vec<Complex64> = plus.iter().zip(&minus).map(|(a, b)| (a + b) / norm).collect();
    for (n, c) in coeffs.iter_mut().enumerate() {
        if n % 2 == 1 {
            *c = Complex64::default();
        }
    }
    let kept: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    let deficit = (1.0 - kept).max(0.0);
    if deficit > tol {
        return Err(Error::Truncation {
            deficit,
            suggested_cutoff: suggested_cutoff(alpha.norm_sqr(), tol),
        });
    }
    let scale = 1.0 / kept.sqrt();
    coeffs.iter_mut().for_each(|c| *c *= scale);
    let amp = embed_single_mode(basis, mode - 1, &coeffs)?;
    Ok(StateVector { basis: basis.clone(), amp, deficit })
}

/// Thermal weights n̄ⁿ/(1+n̄)ⁿ⁺¹ for n = 0..=cutoff.
pub fn thermal_weights(nbar: f64, cutoff: usize) -> Vec<f64> {
    let r = nbar / (1.0 + nbar);
    let mut p = 1.0 / (1.0 + nbar);
    (0..=cutoff)
        .map(|_| {
            let v = p;
            p *= r;
            v
        })
        .collect()
}

/// Thermal mixture on `mode`, vacuum elsewhere.
pub fn thermal_state(
    basis: &Arc<FockBasis>,
    mode: usize,
    nbar: f64,
    tol: f64,
) -> Result<DensityMatrix> {
    check_mode(basis, mode)?;
    if !(nbar >= 0.0) {
        return Err(Error::Config(format!("mean occupation must be ≥ 0, got {nbar}")));
    }
    let cutoff = basis.cutoffs_or_err()?[mode - 1];
    let w = thermal_weights(nbar, cutoff);
    let deficit = (1.0 - w.iter().sum::<f64>()).max(0.0);
    if deficit > tol {
        return Err(Error::Truncation {
            deficit,
            suggested_cutoff: cutoff * 2,
        });
    }
    let mut rho = CMat::zeros(basis.dim(), basis.dim());
    let mut occ = vec![0usize; basis.modes()];
    for (n, p) in w.iter().enumerate() {
        occ[mode - 1] = n;
        if let Some(i) = basis.index_of(&occ) {
            rho[(i, i)] = Complex64::new(*p, 0.0);
        }
    }
    Ok(DensityMatrix { basis: basis.clone(), rho, deficit })
}

/// A factor in a tensor product.
pub enum Factor<'a> {
    Pure(&'a StateVector),
    Mixed(&'a DensityMatrix),
}

/// Product of single-mode-cutoff factors, or of sector factors when every
/// factor is pure. Returns a density matrix when any factor is mixed.
pub enum Product {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

fn combined_basis(bases: &[&Arc<FockBasis>]) -> Result<Arc<FockBasis>> {
    let mut cutoffs = Vec::new();
    for b in bases {
        cutoffs.extend_from_slice(b.cutoffs_or_err()?);
    }
    FockBasis::cutoffs(&cutoffs)
}

/// Kronecker product in mode order; the combined basis concatenates cutoffs.
pub fn tensor_product(factors: &[Factor]) -> Result<Product> {
    if factors.is_empty() {
        return Err(Error::BasisMismatch("empty tensor product".into()));
    }
    let bases: Vec<&Arc<FockBasis>> = factors
        .iter()
        .map(|f| match f {
            Factor::Pure(s) => &s.basis,
            Factor::Mixed(d) => &d.basis,
        })
        .collect();
    let basis = combined_basis(&bases)?;
    let deficit = 1.0
        - factors
            .iter()
            .map(|f| match f {
                Factor::Pure(s) => 1.0 - s.deficit,
                Factor::Mixed(d) => 1.0 - d.deficit,
            })
            .product::<f64>();
    let split = |occ: &[u16]| -> Vec<usize> {
        let mut idx = Vec::with_capacity(bases.len());
        let mut off = 0;
        for b in &bases {
            let part: Vec<usize> = occ[off..off + b.modes()].iter().map(|&x| x as usize).collect();
            idx.push(b.index_of(&part).expect("sub-occupation within cutoffs"));
            off += b.modes();
        }
        idx
    };
    let parts: Vec<Vec<usize>> = basis.states().iter().map(|o| split(o)).collect();
    if factors.iter().all(|f| matches!(f, Factor::Pure(_))) {
        let amp = CVec::from_iterator(
            basis.dim(),
            parts.iter().map(|p| {
                p.iter().zip(factors).fold(Complex64::new(1.0, 0.0), |acc, (&i, f)| match f {
                    Factor::Pure(s) => acc * s.amp[i],
                    Factor::Mixed(_) => unreachable!(),
                })
            }),
        );
        return Ok(Product::Pure(StateVector { basis, amp, deficit }));
    }
    let dim = basis.dim();
    let mut rho = CMat::zeros(dim, dim);
    for r in 0..dim {
        for c in 0..dim {
            let mut acc = Complex64::new(1.0, 0.0);
            for (f, (&i, &j)) in factors.iter().zip(parts[r].iter().zip(&parts[c])) {
                acc *= match f {
                    Factor::Pure(s) => s.amp[i] * s.amp[j].conj(),
                    Factor::Mixed(d) => d.rho[(i, j)],
                };
                if acc == Complex64::default() {
                    break;
                }
            }
            rho[(r, c)] = acc;
        }
    }
    Ok(Product::Mixed(DensityMatrix { basis, rho, deficit }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, max_abs};

    #[test]
    fn sector_dimensions() {
        assert_eq!(FockBasis::sector(3, 2).unwrap().dim(), 6);
        assert_eq!(FockBasis::sector(4, 5).unwrap().dim(), 56);
        assert_eq!(FockBasis::cutoffs(&[60, 60]).unwrap().dim(), 3721);
    }

    #[test]
    fn lexicographic_and_bijective() {
        let b = FockBasis::sector(3, 2).unwrap();
        let s = b.states();
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        for (i, o) in s.iter().enumerate() {
            let occ: Vec<usize> = o.iter().map(|&x| x as usize).collect();
            assert_eq!(b.index_of(&occ), Some(i));
        }
    }

    #[test]
    fn dimension_cap() {
        let r = FockBasis::with_cap(2, ModeKind::Cutoffs(vec![100, 100]), 1000);
        assert!(matches!(r, Err(Error::DimensionCap { .. })));
    }

    #[test]
    fn diagonal_coefficients() {
        let b = FockBasis::cutoffs(&[2, 3]).unwrap();
        let h = CMat::from_diagonal(&CVec::from_vec(vec![c(0.5, 0.), c(-1.25, 0.)]));
        let m = second_quantize(&h, &b).unwrap();
        for (i, o) in b.states().iter().enumerate() {
            let e = 0.5 * o[0] as f64 - 1.25 * o[1] as f64;
            assert!((m.get(i, i) - c(e, 0.)).norm() < 1e-15);
        }
    }

    #[test]
    fn single_excitation_reproduces_coefficients() {
        let b = FockBasis::sector(2, 1).unwrap();
        let j = c(0.3, -0.7);
        let h = CMat::from_row_slice(2, 2, &[c(0., 0.), j, j.conj(), c(0., 0.)]);
        let m = second_quantize(&h, &b).unwrap().to_dense();
        // basis order (0,1), (1,0): a1†a2 maps (0,1) → (1,0)
        let i10 = b.index_of(&[1, 0]).unwrap();
        let i01 = b.index_of(&[0, 1]).unwrap();
        assert!((m[(i10, i01)] - j).norm() < 1e-15);
        assert!((m[(i01, i10)] - j.conj()).norm() < 1e-15);
    }

    #[test]
    fn two_excitation_ladder_factor() {
        let b = FockBasis::sector(2, 2).unwrap();
        let h = CMat::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]);
        let m = second_quantize(&h, &b).unwrap();
        let i20 = b.index_of(&[2, 0]).unwrap();
        let i11 = b.index_of(&[1, 1]).unwrap();
        assert!((m.get(i20, i11).re - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn fock_state_errors() {
        let b = FockBasis::cutoffs(&[10, 10]).unwrap();
        let s = fock_state(&b, &[5, 0]).unwrap();
        assert_eq!(s.amp[b.index_of(&[5, 0]).unwrap()], c(1., 0.));
        assert!(fock_state(&b, &[11, 0]).is_err());
    }

    #[test]
    fn coherent_truncation() {
        let b = FockBasis::cutoffs(&[60, 0]).unwrap();
        let s = coherent_state(&b, 1, c(5., 0.), 1e-6).unwrap();
        assert!(s.deficit < 1e-6);
        let b30 = FockBasis::cutoffs(&[30, 0]).unwrap();
        match coherent_state(&b30, 1, c(5., 0.), 1e-6) {
            Err(Error::Truncation { suggested_cutoff, .. }) => assert!(suggested_cutoff > 30),
            other => panic!("expected truncation error, got {other:?}"),
        }
        let v = coherent_state(&b, 1, c(0., 0.), 1e-6).unwrap();
        assert_eq!(v.amp[0], c(1., 0.));
        assert_eq!(v.deficit, 0.0);
    }

    #[test]
    fn cat_parity_and_norm() {
        let b = FockBasis::cutoffs(&[60]).unwrap();
        let s = cat_state(&b, 1, c(5., 0.), 1e-6).unwrap();
        for n in (1..=59).step_by(2) {
            assert_eq!(s.amp[n], c(0., 0.));
        }
        assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
        let v = cat_state(&b, 1, c(1e-9, 0.), 1e-6).unwrap();
        assert!((v.amp[0].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn thermal_weights_and_tail() {
        let b = FockBasis::cutoffs(&[40]).unwrap();
        let r = thermal_state(&b, 1, 1.0, 1e-6).unwrap();
        assert_eq!(r.rho[(0, 0)].re, 0.5);
        assert_eq!(r.rho[(1, 1)].re, 0.25);
        assert_eq!(r.rho[(2, 2)].re, 0.125);
        assert!(r.deficit < 1e-12);
        let v = thermal_state(&b, 1, 0.0, 1e-6).unwrap();
        assert_eq!(v.rho[(0, 0)].re, 1.0);
        assert_eq!(v.trace(), 1.0);
    }

    #[test]
    fn products() {
        let b1 = FockBasis::cutoffs(&[6]).unwrap();
        let five = fock_state(&b1, &[5]).unwrap();
        let vac = fock_state(&b1, &[0]).unwrap();
        let Product::Pure(p) = tensor_product(&[Factor::Pure(&five), Factor::Pure(&vac)]).unwrap() else {
            panic!("expected pure product")
        };
        assert_eq!(p.amp[p.basis.index_of(&[5, 0]).unwrap()], c(1., 0.));

        let half = vac.with_amp(vac.amp.scale(0.5));
        let Product::Pure(q) = tensor_product(&[Factor::Pure(&half), Factor::Pure(&half)]).unwrap() else {
            panic!()
        };
        assert!((q.norm_sqr() - 0.0625).abs() < 1e-15);

        let th = thermal_state(&b1, 1, 1.0, 1.0).unwrap();
        let Product::Mixed(d) = tensor_product(&[Factor::Mixed(&th), Factor::Pure(&vac)]).unwrap() else {
            panic!()
        };
        let i20 = d.basis.index_of(&[2, 0]).unwrap();
        assert_eq!(d.rho[(i20, i20)].re, 0.125);
        assert!(max_abs(&(&d.rho - d.rho.adjoint())) == 0.0);
    }
}
