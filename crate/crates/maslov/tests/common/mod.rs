//! Shared model setups for the integration tests.
#![allow(dead_code)]

use maslov_box::models::gkdv::{gkdv_system, GkdvModel};
use maslov_box::models::kdvb::{kdvb_system, kdvb_wave, KdvbModel};
use maslov_box::shooting::{select_truncation, TruncationChoice};
use maslov_box::spectral::SystemDefinition;

pub const GKDV_L: f64 = 25.0;

pub fn gkdv(p: f64) -> (GkdvModel, SystemDefinition, TruncationChoice) {
    let m = GkdvModel::new(p, 0.5).unwrap();
    let sys = gkdv_system(&m);
    (m, sys, TruncationChoice::symmetric(GKDV_L))
}

/// KdV-Burgers front with the truncation chosen for the lambda window.
pub fn kdvb(nu: f64, lambda: (f64, f64)) -> (KdvbModel, SystemDefinition, TruncationChoice) {
    let m = kdvb_wave(nu).unwrap();
    let sys = kdvb_system(&m);
    let t = select_truncation(&sys, lambda, 1e-10).unwrap();
    (m, sys, t)
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

/// `|cos|` of the angle between two vectors and the sign of their dot product.
pub fn alignment(a: &[f64], b: &[f64]) -> (f64, f64) {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    ((d / (na * nb)).abs(), d.signum())
}
