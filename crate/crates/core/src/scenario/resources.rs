//! Power control and pilot sequences.

use num_complex::Complex64;
use std::f64::consts::PI;

use super::ScenarioError;
use crate::linalg::CVector;

/// Per-user data (`p_lk`) and pilot (`q_lk`) powers in watts, shape `L × K`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub data: Vec<Vec<f64>>,
    pub pilot: Vec<Vec<f64>>,
    pub p_max: f64,
}

impl PowerAllocation {
    /// Same power for everyone (tests and diagnostics).
    pub fn uniform(cells: usize, users: usize, p: f64) -> Self {
        Self {
            data: vec![vec![p; users]; cells],
            pilot: vec![vec![p; users]; cells],
            p_max: p,
        }
    }

    pub fn cells(&self) -> usize {
        self.data.len()
    }
}

/// Statistical inverse power control: `p_lk = p_max · min_i β_lli / β_llk`,
/// so `p_lk·β_llk` is the same for every user of a cell and the weakest user
/// transmits at `p_max`. Pilot powers equal data powers.
pub fn assign_powers(beta_own: &[Vec<f64>], p_max: f64) -> Result<PowerAllocation, ScenarioError> {
    let mut data = Vec::with_capacity(beta_own.len());
    for (cell, betas) in beta_own.iter().enumerate() {
        if let Some(user) = betas.iter().position(|&b| b <= 0.0 || !b.is_finite()) {
            return Err(ScenarioError::ZeroBeta { cell, user });
        }
        let weakest = betas.iter().cloned().fold(f64::INFINITY, f64::min);
        data.push(
            betas
                .iter()
                .map(|&b| if b == weakest { p_max } else { p_max * weakest / b })
                .collect::<Vec<_>>(),
        );
    }
    Ok(PowerAllocation {
        pilot: data.clone(),
        data,
        p_max,
    })
}

/// `K` orthogonal pilot sequences of length `τ_p`; user `k` uses row `k` in
/// every cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotBook {
    pub sequences: Vec<CVector>,
    pub tau_p: usize,
}

/// Rows of the `τ_p`-point DFT basis: `[φ_k]_s = exp(j2π·k·s/τ_p)`.
pub fn dft_pilots(users: usize, tau_p: usize) -> Result<PilotBook, ScenarioError> {
    if users > tau_p {
        return Err(ScenarioError::TooManyUsers { users, tau_p });
    }
    let sequences = (0..users)
        .map(|k| {
            CVector::from_fn(tau_p, |s, _| {
                // Reduce the exponent mod τ_p before scaling for exact phases.
                let e = (k * s) % tau_p;
                Complex64::from_polar(1.0, 2.0 * PI * e as f64 / tau_p as f64)
            })
        })
        .collect();
    Ok(PilotBook { sequences, tau_p })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_gains_give_max_power() {
        let p = assign_powers(&[vec![1e-9; 4]], 0.01).unwrap();
        assert!(p.data[0].iter().all(|&x| x == 0.01));
        assert_eq!(p.data, p.pilot);
    }

    #[test]
    fn inverse_beta_scaling() {
        let p = assign_powers(&[vec![1.0, 2.0], vec![4.0, 1.0, ]], 1.0).unwrap();
        assert_eq!(p.data[0], vec![1.0, 0.5]);
        assert_eq!(p.data[1], vec![0.25, 1.0]);
        for cell in &p.data {
            assert_eq!(cell.iter().cloned().fold(0.0, f64::max), 1.0);
        }
    }

    #[test]
    fn received_power_is_equalized() {
        let betas = vec![vec![3e-10, 7e-12, 1e-9, 2.2e-11], vec![5e-13, 1e-8]];
        let p = assign_powers(&betas, 0.01).unwrap();
        for (l, cell) in betas.iter().enumerate() {
            let rx: Vec<f64> = cell.iter().zip(&p.data[l]).map(|(b, q)| b * q).collect();
            let mean = rx.iter().sum::<f64>() / rx.len() as f64;
            let sd = (rx.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / rx.len() as f64).sqrt();
            assert!(sd / mean < 1e-9);
            assert!(p.data[l].iter().all(|&x| x > 0.0 && x <= 0.01));
        }
    }

    #[test]
    fn zero_beta_rejected() {
        assert_eq!(
            assign_powers(&[vec![1.0, 0.0]], 1.0),
            Err(ScenarioError::ZeroBeta { cell: 0, user: 1 })
        );
    }

    #[test]
    fn dft_rows_are_orthogonal() {
        let book = dft_pilots(10, 10).unwrap();
        assert!(book.sequences[0].iter().all(|z| (*z - Complex64::new(1.0, 0.0)).norm() < 1e-15));
        for (k, a) in book.sequences.iter().enumerate() {
            assert!((a.norm_squared() - 10.0).abs() < 1e-12);
            for (i, b) in book.sequences.iter().enumerate() {
                let ip = b.dotc(a);
                let expect = if i == k { 10.0 } else { 0.0 };
                assert!((ip - Complex64::new(expect, 0.0)).norm() < 1e-9 * 10.0);
            }
        }
        assert_eq!(dft_pilots(11, 10), Err(ScenarioError::TooManyUsers { users: 11, tau_p: 10 }));
    }
}
