//! Numerical core: input-output tensors, Gaussian information decomposition,
//! technology clustering, synergy networks, economic complexity and
//! regression validation. `no_std` with `alloc`.

#![no_std]

extern crate alloc;

pub mod ecx;
pub mod gpid;
pub mod iotensor;
pub mod linalg;
pub mod seed;
pub mod stats;
pub mod synnet;
pub mod techclust;
pub mod valid;
