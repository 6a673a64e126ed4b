//! Known converged parameter sets for the built-in coupled Ramani system.
//!
//! Each row pairs the given parameters (wave numbers and tau diagonal in
//! the usual multiples-of-2pi convention, constant starting signs) with a
//! converged solution rounded to four decimals. The rows double as warm
//! starts -- re-converging from them reaches the underlying root to full
//! precision -- and as regression baselines for the table renderer.

use crate::residual::{GivenParams, UnknownVector};
use crate::scalar::{real, Real};
use crate::seed::{SeedConfig, SeedMode, DEFAULT_RNG_SEED};
use crate::theta::ThetaError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceRow {
    pub v0: f64,
    /// Wave numbers in units of 2pi/10.
    pub k_mult: &'static [f64],
    /// Tau diagonal in units of 2pi.
    pub tau_diag_mult: &'static [f64],
    pub c1_0: f64,
    pub c2_0: f64,
    pub omega: &'static [f64],
    pub l: &'static [f64],
    /// Strict upper triangle of tau, row-major (absolute values).
    pub tau_off: &'static [f64],
    pub c1: f64,
    pub c2: f64,
}

impl ReferenceRow {
    pub fn n(&self) -> usize {
        self.k_mult.len()
    }

    pub fn k<T: Real>(&self) -> Vec<T> {
        let base = T::two_pi() / real::<T>(10.0);
        self.k_mult.iter().map(|&m| real::<T>(m) * base).collect()
    }

    pub fn tau_diag<T: Real>(&self) -> Vec<T> {
        self.tau_diag_mult
            .iter()
            .map(|&m| real::<T>(m) * T::two_pi())
            .collect()
    }

    pub fn given<T: Real>(&self) -> Result<GivenParams<T>, ThetaError> {
        GivenParams::new(self.k(), self.tau_diag(), real(self.v0), T::zero())
    }

    /// The published 4-decimal solution as an unknown vector.
    pub fn warm_start<T: Real>(&self) -> UnknownVector<T> {
        UnknownVector {
            omega: self.omega.iter().map(|&v| real(v)).collect(),
            l: self.l.iter().map(|&v| real(v)).collect(),
            tau_off: self.tau_off.iter().map(|&v| real(v)).collect(),
            c1: real(self.c1),
            c2: real(self.c2),
        }
    }

    pub fn warm_seed<T: Real>(&self) -> SeedConfig<T> {
        SeedConfig {
            c1_0: real(self.c1_0),
            c2_0: real(self.c2_0),
            tau_off_0: vec![T::zero(); self.n() * (self.n() - 1) / 2],
            mode: SeedMode::WarmStart(self.warm_start()),
            root_index: 0,
            rng_seed: DEFAULT_RNG_SEED,
        }
    }

    pub fn dispersion_seed_config<T: Real>(&self) -> SeedConfig<T> {
        SeedConfig::dispersion(self.n(), real(self.c1_0), real(self.c2_0))
    }
}

/// Single-phase rows, v0 = 0. The second row is a z-independent (l = 0)
/// branch.
pub const ONE_PHASE_V0_ZERO: [ReferenceRow; 2] = [
    ReferenceRow {
        v0: 0.0,
        k_mult: &[1.0],
        tau_diag_mult: &[0.46],
        c1_0: 1.0,
        c2_0: 1.0,
        omega: &[0.1424],
        l: &[0.0921],
        tau_off: &[],
        c1: 0.8494,
        c2: 0.0419,
    },
    ReferenceRow {
        v0: 0.0,
        k_mult: &[1.0],
        tau_diag_mult: &[1.86],
        c1_0: 1.0,
        c2_0: 1.0,
        omega: &[-0.0423],
        l: &[0.0],
        tau_off: &[],
        c1: 0.00005,
        c2: 0.0,
    },
];

/// Single-phase rows, v0 = 1.
pub const ONE_PHASE_V0_ONE: [ReferenceRow; 2] = [
    ReferenceRow {
        v0: 1.0,
        k_mult: &[1.0],
        tau_diag_mult: &[0.46],
        c1_0: 1.0,
        c2_0: 1.0,
        omega: &[1.3800],
        l: &[1.9139],
        tau_off: &[],
        c1: 3.6650,
        c2: 0.8708,
    },
    ReferenceRow {
        v0: 1.0,
        k_mult: &[1.0],
        tau_diag_mult: &[1.86],
        c1_0: 1.0,
        c2_0: 1.0,
        omega: &[1.4071],
        l: &[1.4312],
        tau_off: &[],
        c1: 0.0004,
        c2: 0.0001,
    },
];

/// Two-phase rows, v0 = 0. The third row is the degenerate l = 0 branch.
pub const TWO_PHASE_V0_ZERO: [ReferenceRow; 3] = [
    ReferenceRow {
        v0: 0.0,
        k_mult: &[1.0, 2.0],
        tau_diag_mult: &[0.96, 1.23],
        c1_0: 1.0,
        c2_0: 1.0,
        omega: &[0.3556, -1.9620],
        l: &[0.0313, 3.0793],
        tau_off: &[0.9060],
        c1: 0.0460,
        c2: 0.0651,
    },
    ReferenceRow {
        v0: 0.0,
        k_mult: &[1.0, 2.0],
        tau_diag_mult: &[0.46, 1.03],
        c1_0: 1.0,
        c2_0: 1.0,
        omega: &[0.3724, -1.8403],
        l: &[0.2439, 2.9825],
        tau_off: &[1.0610],
        c1: 1.4268,
        c2: 0.3234,
    },
    ReferenceRow {
        v0: 0.0,
        k_mult: &[1.0, 2.0],
        tau_diag_mult: &[0.52, 1.13],
        c1_0: 1.0,
        c2_0: -1.0,
        omega: &[-0.2612, -0.8778],
        l: &[0.0, 0.0],
        tau_off: &[-0.5938],
        c1: 0.3925,
        c2: 0.0,
    },
];

/// Two-phase rows, v0 = 1.
pub const TWO_PHASE_V0_ONE: [ReferenceRow; 3] = [
    ReferenceRow {
        v0: 1.0,
        k_mult: &[1.0, 2.0],
        tau_diag_mult: &[0.96, 1.23],
        c1_0: 1.0,
        c2_0: 1.0,
        omega: &[1.4078, 3.3761],
        l: &[1.4515, 1.7779],
        tau_off: &[2.2216],
        c1: 0.6755,
        c2: 0.0575,
    },
    ReferenceRow {
        v0: 1.0,
        k_mult: &[1.0, 2.0],
        tau_diag_mult: &[0.46, 1.03],
        c1_0: 1.0,
        c2_0: 1.0,
        omega: &[1.3897, 3.3863],
        l: &[1.9282, 1.9582],
        tau_off: &[1.9332],
        c1: 5.1707,
        c2: 0.9571,
    },
    ReferenceRow {
        v0: 1.0,
        k_mult: &[1.0, 2.0],
        tau_diag_mult: &[0.52, 1.13],
        c1_0: 1.0,
        c2_0: -1.0,
        omega: &[1.3843, 3.3920],
        l: &[1.7341, 1.8698],
        tau_off: &[2.0174],
        c1: 3.1582,
        c2: 0.5405,
    },
];

/// Three-phase rows, v0 = 0. The third row is the l = 0 branch whose
/// normal matrix turns near-singular at the root; its residual only
/// reaches ~1e-9.
pub const THREE_PHASE_V0_ZERO: [ReferenceRow; 4] = [
    ReferenceRow {
        v0: 0.0,
        k_mult: &[1.0, 2.0, 3.0],
        tau_diag_mult: &[0.67, 0.86, 1.02],
        c1_0: 1.0,
        c2_0: 1.0,
        omega: &[0.4685, -0.8643, 7.0815],
        l: &[-0.9501, 1.0718, 0.0183],
        tau_off: &[-1.4992, 1.0605, 1.6167],
        c1: 24.5355,
        c2: 0.1485,
    },
    ReferenceRow {
        v0: 0.0,
        k_mult: &[1.0, 2.0, 3.0],
        tau_diag_mult: &[0.46, 1.02, 1.53],
        c1_0: -1.0,
        c2_0: 1.0,
        omega: &[0.1981, 2.1281, -2.8105],
        l: &[0.0942, 0.0220, -0.1015],
        tau_off: &[1.5832, -1.1454, 1.2599],
        c1: 3.2383,
        c2: 0.0428,
    },
    ReferenceRow {
        v0: 0.0,
        k_mult: &[1.0, 2.0, 3.0],
        tau_diag_mult: &[0.53, 0.75, 1.13],
        c1_0: 1.0,
        c2_0: 1.0,
        omega: &[0.8089, -1.0065, -0.1976],
        l: &[0.0, 0.0, 0.0],
        tau_off: &[-1.5390, 1.7911, 3.1734],
        c1: 36.8174,
        c2: 0.0,
    },
    ReferenceRow {
        v0: 0.0,
        k_mult: &[1.0, 2.0, 3.0],
        tau_diag_mult: &[0.53, 0.75, 1.13],
        c1_0: -1.0,
        c2_0: 1.0,
        omega: &[0.5147, 1.6120, -2.7811],
        l: &[-0.7670, -0.1002, 0.8148],
        tau_off: &[1.7865, -1.6037, 1.2270],
        c1: 23.1536,
        c2: -0.1155,
    },
];

/// Three-phase rows, v0 = 1.
pub const THREE_PHASE_V0_ONE: [ReferenceRow; 3] = [
    ReferenceRow {
        v0: 1.0,
        k_mult: &[1.0, 2.0, 3.0],
        tau_diag_mult: &[0.67, 0.86, 1.02],
        c1_0: 1.0,
        c2_0: 1.0,
        omega: &[1.4388, 3.1394, 7.9404],
        l: &[1.6866, 2.0555, 1.5475],
        tau_off: &[2.1251, 1.2939, 2.7630],
        c1: 24.0624,
        c2: 0.9121,
    },
    ReferenceRow {
        v0: 1.0,
        k_mult: &[1.0, 2.0, 3.0],
        tau_diag_mult: &[0.46, 1.02, 1.53],
        c1_0: -1.0,
        c2_0: 1.0,
        omega: &[1.3915, 3.3788, 8.3344],
        l: &[1.9342, 1.9653, 1.5315],
        tau_off: &[1.9341, 1.2573, 2.8808],
        c1: 6.0244,
        c2: 0.9791,
    },
    ReferenceRow {
        v0: 1.0,
        k_mult: &[1.0, 2.0, 3.0],
        tau_diag_mult: &[0.53, 0.75, 1.13],
        c1_0: -1.0,
        c2_0: 1.0,
        omega: &[1.3608, 2.4234, -3.9766],
        l: &[1.7988, 2.3352, 1.0781],
        tau_off: &[2.0257, -1.9751, 0.6098],
        c1: 44.3977,
        c2: 2.6950,
    },
];

/// Every reference row, first-phase groups first.
pub fn all_rows() -> Vec<&'static ReferenceRow> {
    ONE_PHASE_V0_ZERO
        .iter()
        .chain(&ONE_PHASE_V0_ONE)
        .chain(&TWO_PHASE_V0_ZERO)
        .chain(&TWO_PHASE_V0_ONE)
        .chain(&THREE_PHASE_V0_ZERO)
        .chain(&THREE_PHASE_V0_ONE)
        .collect()
}
