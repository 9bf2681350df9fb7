//! Winding count properties on synthetic paths, and index invariances on the
//! built-in models.

mod common;

use std::f64::consts::PI;

use common::{gkdv, kdvb};
use maslov_box::index::{shelf_index, shelf_index_path, IndexOptions, PsiPath};
use maslov_box::models::gkdv::gkdv_shelf_zero;
use maslov_box::shelves::{exchange_parity_check, maslov_box, BoxWindow};
use maslov_box::shooting::ColumnPath;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Pair with vector angle `phi(t)` of `(psi1, -psi2)` and a nonvanishing radius.
#[derive(Debug, Clone)]
struct Synthetic {
    phi: Vec<f64>,
    r: Vec<f64>,
}

impl Synthetic {
    fn phi(&self, t: f64) -> f64 {
        self.phi.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }
    fn pair(&self, t: f64) -> (f64, f64) {
        let r = 1.0 + 0.5 * (self.r[0] * t + self.r[1]).sin();
        let a = self.phi(t);
        (r * a.cos(), -r * a.sin())
    }
    /// Counterclockwise minus clockwise passages of `2 phi` through odd
    /// multiples of pi, with the half-open endpoint rule.
    fn expected(&self, t0: f64, t1: f64) -> i64 {
        let f = |th: f64| ((th - PI) / (2.0 * PI)).floor() as i64;
        f(2.0 * self.phi(t1)) - f(2.0 * self.phi(t0))
    }
}

fn synthetic() -> impl Strategy<Value = Synthetic> {
    (prop::collection::vec(-6.0..6.0f64, 4), prop::collection::vec(-3.0..3.0f64, 2))
        .prop_map(|(phi, r)| Synthetic { phi, r })
}

fn opts(n: usize) -> IndexOptions {
    IndexOptions { n_initial: n, ..Default::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn index_is_the_angle_count(s in synthetic()) {
        let r = shelf_index(&|t: f64| Ok(s.pair(t)), 0.0, 1.0, &opts(64)).unwrap();
        prop_assert_eq!(r.index, s.expected(0.0, 1.0));
        let net: i64 = r.crossings.iter().map(|c| c.direction as i64).sum();
        prop_assert_eq!(net, r.index);
    }

    #[test]
    fn index_is_additive(s in synthetic(), cut in 0.05..0.95f64) {
        let src = |t: f64| Ok(s.pair(t));
        let whole = shelf_index(&src, 0.0, 1.0, &opts(64)).unwrap().index;
        let a = shelf_index(&src, 0.0, cut, &opts(64)).unwrap().index;
        let b = shelf_index(&src, cut, 1.0, &opts(64)).unwrap().index;
        prop_assert_eq!(whole, a + b);
    }

    #[test]
    fn index_survives_grid_halving(s in synthetic()) {
        let src = |t: f64| Ok(s.pair(t));
        let fine = shelf_index(&src, 0.0, 1.0, &opts(128)).unwrap().index;
        let coarse = shelf_index(&src, 0.0, 1.0, &opts(64)).unwrap().index;
        prop_assert_eq!(fine, coarse);
    }

    #[test]
    fn reversal_negates_index(s in synthetic()) {
        let path = shelf_index(&|t: f64| Ok(s.pair(t)), 0.0, 1.0, &opts(64)).unwrap().path;
        let fwd = shelf_index_path(&path, &opts(64)).unwrap().index;
        let back = shelf_index_path(&path.reversed(), &opts(64)).unwrap().index;
        prop_assert_eq!(fwd, -back);
    }
}

#[test]
fn sampled_path_examples() {
    // quarter turns of the tracking point on a hand-built path
    let ts: Vec<f64> = (0..7).map(|k| k as f64).collect();
    let psi1 = vec![1.0, 0.7, 0.3, -0.1, -0.5, -0.8, -1.0];
    let psi2 = vec![0.1, 0.7, 0.9, 1.0, 0.9, 0.6, 0.1];
    let path = PsiPath { ts, psi1, psi2 };
    let r = shelf_index_path(&path, &IndexOptions::default()).unwrap();
    assert_eq!(r.index, -1);
    assert_eq!(r.crossings.len(), 1);
    assert!(r.crossings[0].location > 2.0 && r.crossings[0].location < 3.0);
}

#[test]
fn gkdv_right_shelf_crossings_are_localized() {
    let (m, sys, t) = gkdv(3.5);
    let col = ColumnPath::full(&sys, 0.0, &t).unwrap();
    let (x1, x2) = m.crossing_points();
    let r = shelf_index(&|x: f64| Ok(col.psi_plus(x)), -5.0, 5.0, &opts(101)).unwrap();
    assert_eq!(r.crossings.len(), 2);
    for (c, want) in r.crossings.iter().zip([x1, x2]) {
        assert!((c.location - want).abs() < 1e-8, "crossing at {} vs {want}", c.location);
        // direction from the closed-form pair: sgn(psi1'/psi2)
        let h = 1e-5;
        let slope = (gkdv_shelf_zero(&m, want + h).0 - gkdv_shelf_zero(&m, want - h).0) / (2.0 * h);
        let dir = (slope / gkdv_shelf_zero(&m, want).1).signum() as i32;
        assert_eq!(c.direction, dir);
    }
    assert_eq!(r.index, -2);
}

fn random_m(rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    loop {
        let m: DMatrix<f64> = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
        if m.determinant().abs() > 0.05 {
            return m;
        }
    }
}

#[test]
fn exchanging_m_preserves_parity() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (m, g, tg) = gkdv(3.5);
    let (x1, x2) = m.crossing_points();
    let (_, k, tk) = kdvb(2.0, (-0.02, 0.0));
    let gcol = ColumnPath::full(&g, 0.0, &tg).unwrap();
    let kcol = ColumnPath::full(&k, 0.0, &tk).unwrap();
    for _ in 0..20 {
        let alt = random_m(&mut rng);
        for (col, range) in [(&gcol, (x1 - 1.0, x2 + 1.0)), (&kcol, (2.0, 10.0))] {
            let out = exchange_parity_check(col, range, &alt, &opts(201)).unwrap();
            if out.inconclusive {
                continue;
            }
            assert_eq!(out.difference.rem_euclid(2), 0, "{out:?}");
        }
    }
}

#[test]
fn box_index_stable_under_window_growth() {
    let (_, sys, t) = gkdv(3.5);
    let o = opts(141);
    let a = maslov_box(&sys, BoxWindow::new(-7.0, 0.0, -5.0, 5.0).unwrap(), &t, &o).unwrap();
    let b = maslov_box(&sys, BoxWindow::new(-7.0, 0.0, -6.0, 6.0).unwrap(), &t, &o).unwrap();
    assert_eq!(a.m, Some(-2));
    assert_eq!(a.m, b.m);
}

#[test]
fn box_index_even_around_loss_points() {
    // p = 4.5 has an invariance loss near (-4.58, -0.28) inside this box
    let (_, sys, t) = gkdv(4.5);
    let b = maslov_box(&sys, BoxWindow::new(-7.0, 0.0, -5.0, 5.0).unwrap(), &t, &opts(141)).unwrap();
    let m = b.m.expect("shelves stay invariant");
    assert_eq!(m.rem_euclid(2), 0, "m = {m}");
}
