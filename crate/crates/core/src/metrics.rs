//! Observables over trajectories.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, FockBasis, StateVector};
use crate::linalg::{hermitian_defect, CVec};

fn same_basis(a: &Arc<FockBasis>, b: &Arc<FockBasis>) -> Result<()> {
    if Arc::ptr_eq(a, b) || (a.kind() == b.kind() && a.modes() == b.modes()) {
        Ok(())
    } else {
        Err(Error::BasisMismatch("states live on different bases".into()))
    }
}

/// |⟨φ|ψ⟩|².
pub fn fidelity_pure(psi: &StateVector, phi: &StateVector) -> Result<f64> {
    same_basis(&psi.basis, &phi.basis)?;
    Ok(phi.amp.dotc(&psi.amp).norm_sqr())
}

/// Overlap functional Tr[ρσ]. Not the Uhlmann fidelity: for identical mixed
/// states it equals the purity.
pub fn fidelity_mixed(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_basis(&rho.basis, &sigma.basis)?;
    for m in [&rho.rho, &sigma.rho] {
        let defect = hermitian_defect(m);
        if defect > 1e-10 {
            return Err(Error::NotHermitian { defect });
        }
    }
    // Tr[ρσ] = Σ ρ_ij σ_ji
    let dim = rho.basis.dim();
    let mut acc = Complex64::default();
    for i in 0..dim {
        for j in 0..dim {
            acc += rho.rho[(i, j)] * sigma.rho[(j, i)];
        }
    }
    Ok(acc.re)
}

/// Tr[ρσ]/Tr[σ²]: 1 when ρ reproduces σ.
pub fn fidelity_mixed_normalized(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    Ok(fidelity_mixed(rho, sigma)? / fidelity_mixed(sigma, sigma)?)
}

/// |⟨m|ψ⟩|².
pub fn population(psi: &StateVector, occupation: &[usize]) -> Result<f64> {
    let i = psi
        .basis
        .index_of(occupation)
        .ok_or_else(|| Error::OccupationNotInBasis(occupation.to_vec()))?;
    Ok(psi.amp[i].norm_sqr())
}

/// (|N0⟩ + |0N⟩)/√2 on modes (j, k), 1-based, vacuum on the rest.
pub fn noon_target(basis: &Arc<FockBasis>, j: usize, k: usize, n_exc: usize) -> Result<CVec> {
    let n = basis.modes();
    for idx in [j, k] {
        if idx == 0 || idx > n {
            return Err(Error::IndexOutOfRange { index: idx, max: n });
        }
    }
    if j == k {
        return Err(Error::Config(format!("NOON modes must differ, got ({j}, {k})")));
    }
    let mut amp = CVec::zeros(basis.dim());
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for which in [j, k] {
        let mut occ = vec![0; n];
        occ[which - 1] = n_exc;
        let i = basis.index_of(&occ).ok_or(Error::OccupationNotInBasis(occ))?;
        amp[i] += Complex64::new(s, 0.0);
    }
    Ok(amp)
}

/// |⟨ψ|(|φ(N)⟩_{jk} ⊗ |0⟩)|².
pub fn noon_fidelity(psi: &StateVector, j: usize, k: usize, n_exc: usize) -> Result<f64> {
    let target = noon_target(&psi.basis, j, k, n_exc)?;
    Ok(target.dotc(&psi.amp).norm_sqr())
}

/// A labelled real series on a time grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub label: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl ObservableSeries {
    pub fn new(label: impl Into<String>, times: Vec<f64>, values: Vec<f64>) -> Self {
        Self { label: label.into(), times, values }
    }

    /// Linear interpolation; clamps outside the grid. Duplicate times (stage
    /// joins) take the later sample.
    pub fn interpolate(&self, t: f64) -> f64 {
        let ts = &self.times;
        if t <= ts[0] {
            return self.values[0];
        }
        let i = ts.partition_point(|&x| x <= t);
        if i >= ts.len() {
            return *self.values.last().unwrap();
        }
        let (t0, t1) = (ts[i - 1], ts[i]);
        if t1 == t0 {
            return self.values[i];
        }
        let w = (t - t0) / (t1 - t0);
        self.values[i - 1] * (1.0 - w) + self.values[i] * w
    }

    /// Value at the last grid point with time ≤ `t` (exact stage ends).
    pub fn at_or_before(&self, t: f64) -> f64 {
        let i = self.times.partition_point(|&x| x <= t);
        self.values[i.saturating_sub(1)]
    }

    /// Strict interior local maxima that rise at least `prominence` above
    /// the lowest value since the previous counted peak.
    pub fn interior_maxima(&self, prominence: f64) -> Vec<f64> {
        let v = &self.values;
        let mut peaks = Vec::new();
        let mut low = f64::INFINITY;
        let mut candidate: Option<(usize, f64)> = None;
        for i in 0..v.len() {
            low = low.min(v[i]);
            if let Some((ci, cv)) = candidate {
                if cv - v[i] >= prominence {
                    peaks.push(self.times[ci]);
                    candidate = None;
                    low = v[i];
                }
            }
            if i > 0 && i + 1 < v.len() && v[i] > v[i - 1] && v[i] >= v[i + 1] && v[i] - low >= prominence {
                match candidate {
                    Some((_, cv)) if cv >= v[i] => {}
                    _ => candidate = Some((i, v[i])),
                }
            }
        }
        peaks
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
    }
}
