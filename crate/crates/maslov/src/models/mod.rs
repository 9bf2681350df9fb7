//! The two built-in traveling-wave problems.

pub mod gkdv;
pub mod kdvb;

pub use gkdv::{gkdv_shelf_zero, gkdv_system, GkdvModel};
pub use kdvb::{kdvb_left_shelf_threshold, kdvb_shelf_zero, kdvb_system, kdvb_wave, KdvbModel};
