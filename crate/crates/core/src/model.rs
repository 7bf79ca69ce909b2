//! Fermionic lattice models shared by the mappings and the oracle.

use serde::{Deserialize, Serialize};

/// Nearest-neighbour t-V model or the Fermi-Hubbard model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Model {
    /// H = −T Σ (f†_r f_s + h.c.) + V Σ n_r n_s over edges.
    #[serde(rename = "tv")]
    TV { t: f64, v: f64 },
    /// H = −J Σ_σ (f†_{rσ} f_{sσ} + h.c.) + U Σ n_{r↑} n_{r↓}.
    FermiHubbard { j: f64, u: f64 },
}

impl Model {
    pub fn is_spinful(&self) -> bool {
        matches!(self, Model::FermiHubbard { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Model::TV { .. } => "tv",
            Model::FermiHubbard { .. } => "fermi_hubbard",
        }
    }

    /// Hopping amplitude (T or J).
    pub fn hopping(&self) -> f64 {
        match *self {
            Model::TV { t, .. } => t,
            Model::FermiHubbard { j, .. } => j,
        }
    }

    /// Interaction strength (V or U).
    pub fn interaction(&self) -> f64 {
        match *self {
            Model::TV { v, .. } => v,
            Model::FermiHubbard { u, .. } => u,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub const BOTH: [Spin; 2] = [Spin::Up, Spin::Down];

    pub fn label(self) -> &'static str {
        match self {
            Spin::Up => "up",
            Spin::Down => "down",
        }
    }
}

/// Spin species present in a model: `[None]` for spinless, both spins otherwise.
pub fn spin_species(spinful: bool) -> Vec<Option<Spin>> {
    if spinful {
        vec![Some(Spin::Up), Some(Spin::Down)]
    } else {
        vec![None]
    }
}
