//! Initial-state recipes shared by the fermionic oracle and the qudit engine.
//!
//! A recipe is a list of even fermionic operations applied in order to the
//! empty lattice. The oracle applies them with second-quantized operators and
//! the qudit side applies their mapped images after projecting the vacuum onto
//! the constraint sector, so both start from the same physical state.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fermion_oracle::{
    add_states, apply_fermion_op, apply_gamma, apply_gamma_prime, scale_state, FermionOp, FockBasis, FockState,
    ModelCase,
};
use crate::gamma_algebra::{OperatorSum, C1, CI};
use crate::lattice::{LatticeSpec, Site};
use crate::mappings::MappedModel;
use crate::model::Spin;
use crate::statevector::QuditState;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum RecipeStep {
    /// f†_a f†_b on the link a–b.
    PairCreate {
        a: Site,
        b: Site,
        #[serde(default)]
        spin: Option<Spin>,
    },
    /// (I + S_{from,to})/√2, where S_{from,to} moves a particle from `from` to `to`.
    HopSuperposition {
        from: Site,
        to: Site,
        #[serde(default)]
        spin: Option<Spin>,
    },
}

impl RecipeStep {
    fn sites(&self) -> (Site, Site, Option<Spin>) {
        match *self {
            RecipeStep::PairCreate { a, b, spin } => (a, b, spin),
            RecipeStep::HopSuperposition { from, to, spin } => (from, to, spin),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Recipe {
    pub steps: Vec<RecipeStep>,
}

/// Norms recorded while preparing a qudit state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreparationReport {
    /// Squared norm of the vacuum after projection onto the constraint sector.
    pub vacuum_survival: f64,
    /// Squared norm after all recipe operators, before the final normalization.
    pub recipe_norm: f64,
}

impl Recipe {
    /// Recipe of a named reference state.
    pub fn preset(case: ModelCase) -> Recipe {
        let s = Site::new;
        let steps = match case {
            ModelCase::TV2x3 => vec![
                RecipeStep::PairCreate {
                    a: s(0, 0),
                    b: s(1, 0),
                    spin: None,
                },
                RecipeStep::HopSuperposition {
                    from: s(1, 0),
                    to: s(2, 0),
                    spin: None,
                },
            ],
            ModelCase::FH2x3 => vec![
                RecipeStep::PairCreate {
                    a: s(0, 0),
                    b: s(1, 0),
                    spin: Some(Spin::Down),
                },
                RecipeStep::PairCreate {
                    a: s(0, 0),
                    b: s(1, 0),
                    spin: Some(Spin::Up),
                },
                RecipeStep::HopSuperposition {
                    from: s(1, 0),
                    to: s(1, 1),
                    spin: Some(Spin::Up),
                },
            ],
        };
        Recipe { steps }
    }

    /// Checks that every step acts on a lattice link and carries a spin iff the model is spinful.
    pub fn validate(&self, spec: &LatticeSpec, spinful: bool) -> Result<()> {
        for step in &self.steps {
            let (a, b, spin) = step.sites();
            spec.find_edge(a, b)?;
            if spin.is_some() != spinful {
                return Err(Error::SpinMismatch(format!(
                    "recipe step {step:?} does not match a {} model",
                    if spinful { "spinful" } else { "spinless" }
                )));
            }
        }
        Ok(())
    }

    /// Normalized fermionic state on the full Fock space of `spec`.
    pub fn fermion_state(&self, spec: &LatticeSpec, spinful: bool) -> Result<(FockBasis, FockState)> {
        self.validate(spec, spinful)?;
        let basis = FockBasis::full(spec.n_sites(), spinful)?;
        let mut psi: FockState = [(0u64, C1)].into_iter().collect();
        let half = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        for step in &self.steps {
            let (a, b, spin) = step.sites();
            let ma = basis.mode(spec.index(a), spin);
            let mb = basis.mode(spec.index(b), spin);
            psi = match step {
                RecipeStep::PairCreate { .. } => {
                    let t = apply_fermion_op(&basis, FermionOp::Create(mb), &psi);
                    apply_fermion_op(&basis, FermionOp::Create(ma), &t)
                }
                RecipeStep::HopSuperposition { .. } => {
                    // S_{ab} = i γ_a γ′_b
                    let s = scale_state(&apply_gamma(&basis, ma, &apply_gamma_prime(&basis, mb, &psi)), CI);
                    scale_state(&add_states(&psi, &s, C1), half)
                }
            };
        }
        let n2: f64 = psi.values().map(|a| a.norm_sqr()).sum();
        if n2 < 1e-24 {
            return Err(Error::Annihilated(n2));
        }
        Ok((basis, scale_state(&psi, Complex64::new(1.0 / n2.sqrt(), 0.0))))
    }

    /// Mapped operator of every step.
    pub fn qudit_operators(&self, mm: &MappedModel) -> Result<Vec<OperatorSum>> {
        self.validate(&mm.spec, mm.kind.is_spinful())?;
        let mapping = mm.mapping();
        let half = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        self.steps
            .iter()
            .map(|step| {
                let (a, b, spin) = step.sites();
                let edge = mm.spec.find_edge(a, b)?;
                Ok(match step {
                    RecipeStep::PairCreate { .. } => mapping.pair_creation(&edge, spin)?,
                    RecipeStep::HopSuperposition { .. } => {
                        let s: OperatorSum = mapping.hop_operator(&edge, spin)?.into();
                        (&OperatorSum::identity() + &s).scaled(half)
                    }
                })
            })
            .collect()
    }

    /// Projects the empty reference state onto the constraint sector and applies the recipe.
    pub fn prepare(&self, mm: &MappedModel, budget: u128) -> Result<(QuditState, PreparationReport)> {
        let ops = self.qudit_operators(mm)?;
        let mapping = mm.mapping();
        let mut state = QuditState::basis(mm.n_qudits(), mapping.empty_reference_index(), budget)?;
        let vacuum_survival = state.project_constraints(&mm.constraints)?;
        for op in &ops {
            state.apply_operator(op)?;
        }
        let recipe_norm = state.normalize()?;
        Ok((
            state,
            PreparationReport {
                vacuum_survival,
                recipe_norm,
            },
        ))
    }
}
