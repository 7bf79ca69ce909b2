//! Term grouping, symmetrized second-order Trotter steps and recorded runs
//! compared against the exact fermionic dynamics.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fermion_oracle::{build_fermion_hamiltonian_on, occupation, FockBasis};
use crate::gamma_algebra::{OperatorSum, QuditMonomial};
use crate::lattice::{Orientation, ParityClass};
use crate::mappings::{MappedModel, TermKind};
use crate::recipe::{PreparationReport, Recipe};
use crate::statevector::{CompiledGate, LocalTerm, QuditState};

/// Position of a group in the canonical ordering: horizontal hops, vertical hops, interactions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKind {
    HopX(ParityClass),
    HopY(ParityClass),
    Interaction,
}

impl GroupKind {
    fn of(kind: TermKind) -> GroupKind {
        match kind {
            TermKind::Hop {
                orientation: Orientation::Horizontal,
                class,
            } => GroupKind::HopX(class),
            TermKind::Hop {
                orientation: Orientation::Vertical,
                class,
            } => GroupKind::HopY(class),
            TermKind::Interaction => GroupKind::Interaction,
        }
    }

    pub fn label(self) -> String {
        let class = |c: ParityClass| match c {
            ParityClass::Even => "even",
            ParityClass::Odd => "odd",
            ParityClass::Extra => "extra",
        };
        match self {
            GroupKind::HopX(c) => format!("hop_x_{}", class(c)),
            GroupKind::HopY(c) => format!("hop_y_{}", class(c)),
            GroupKind::Interaction => "interaction".to_string(),
        }
    }
}

/// Mutually commuting local terms exponentiated together.
#[derive(Clone, Debug)]
pub struct TermGroup {
    pub kind: GroupKind,
    pub terms: Vec<LocalTerm>,
    operators: Vec<OperatorSum>,
}

impl TermGroup {
    /// Sum of all terms of the group.
    pub fn operator(&self) -> OperatorSum {
        self.operators.iter().fold(OperatorSum::zero(), |acc, o| &acc + o)
    }

    pub fn operators(&self) -> &[OperatorSum] {
        &self.operators
    }
}

/// Ordered groups H_1..H_m with the step size and a cache of compiled exponentials.
#[derive(Clone, Debug)]
pub struct TrotterPlan {
    pub groups: Vec<TermGroup>,
    pub tau: f64,
    pub n_steps: usize,
    half: Vec<Vec<CompiledGate>>,
    full_last: Vec<CompiledGate>,
}

/// Splits the Hamiltonian blocks into the canonical groups, merging monomials
/// whose qudits are covered by one local term. Empty groups are skipped.
pub fn group_terms(mm: &MappedModel) -> Result<Vec<TermGroup>> {
    let mut by_kind: BTreeMap<GroupKind, BTreeMap<Vec<usize>, Vec<QuditMonomial>>> = BTreeMap::new();
    let mut scalars: BTreeMap<GroupKind, Complex64> = BTreeMap::new();
    for block in &mm.blocks {
        let kind = GroupKind::of(block.kind);
        for t in &block.op.terms {
            if t.factors.is_empty() {
                *scalars.entry(kind).or_default() += t.coeff;
            } else {
                by_kind
                    .entry(kind)
                    .or_default()
                    .entry(t.support())
                    .or_default()
                    .push(t.clone());
            }
        }
    }
    let mut groups = Vec::new();
    for (kind, supports) in by_kind {
        // terms on a subset of another term's qudits join that term
        let mut merged: Vec<(Vec<usize>, Vec<QuditMonomial>)> = Vec::new();
        let mut entries: Vec<(Vec<usize>, Vec<QuditMonomial>)> = supports.into_iter().collect();
        entries.sort_by_key(|(s, _)| std::cmp::Reverse(s.len()));
        for (support, monomials) in entries {
            match merged.iter_mut().find(|(s, _)| support.iter().all(|q| s.contains(q))) {
                Some((_, ms)) => ms.extend(monomials),
                None => merged.push((support, monomials)),
            }
        }
        merged.sort_by(|a, b| a.0.cmp(&b.0));
        let mut operators: Vec<OperatorSum> = merged
            .into_iter()
            .map(|(_, ms)| OperatorSum::from_terms(ms))
            .filter(|o| !o.is_zero())
            .collect();
        if operators.is_empty() {
            continue;
        }
        if let Some(&c) = scalars.get(&kind) {
            operators[0] = &operators[0] + &OperatorSum::scalar(c);
        }
        check_commuting(kind, &operators)?;
        let terms = operators
            .iter()
            .map(LocalTerm::from_operator)
            .collect::<Result<Vec<_>>>()?;
        groups.push(TermGroup { kind, terms, operators });
    }
    Ok(groups)
}

fn check_commuting(kind: GroupKind, ops: &[OperatorSum]) -> Result<()> {
    for (i, a) in ops.iter().enumerate() {
        for b in &ops[i + 1..] {
            for ma in &a.terms {
                for mb in &b.terms {
                    if ma.commutation_sign(mb) != 1 {
                        return Err(Error::NonCommutingGroup {
                            group: kind.label(),
                            a: ma.pretty(),
                            b: mb.pretty(),
                        });
                    }
                }
            }
        }
    }
    Ok(())
}

impl TrotterPlan {
    pub fn new(mm: &MappedModel, tau: f64, n_steps: usize) -> Result<Self> {
        Self::from_groups(group_terms(mm)?, tau, n_steps)
    }

    pub fn from_groups(groups: Vec<TermGroup>, tau: f64, n_steps: usize) -> Result<Self> {
        if !tau.is_finite() {
            return Err(Error::Config(format!("tau must be finite, got {tau}")));
        }
        let compile = |g: &TermGroup, theta: f64| -> Result<Vec<CompiledGate>> {
            g.terms.iter().map(|t| t.exp_gate(theta)).collect()
        };
        let half = groups
            .iter()
            .map(|g| compile(g, tau / 2.0))
            .collect::<Result<Vec<_>>>()?;
        let full_last = match groups.last() {
            Some(g) => compile(g, tau)?,
            None => Vec::new(),
        };
        Ok(TrotterPlan {
            groups,
            tau,
            n_steps,
            half,
            full_last,
        })
    }

    /// Same groups with step −τ, for stepping backwards.
    pub fn reversed(&self) -> Result<Self> {
        Self::from_groups(self.groups.clone(), -self.tau, self.n_steps)
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    /// One symmetrized step ∏_{j=1..m} e^{−iH_jτ/2} ∏_{j=m..1} e^{−iH_jτ/2};
    /// the two middle factors are applied as one e^{−iH_mτ}.
    pub fn second_order_step(&self, state: &mut QuditState) -> Result<()> {
        let m = self.half.len();
        if m == 0 {
            return Ok(());
        }
        for gates in &self.half[..m - 1] {
            for g in gates {
                state.apply_gate(g)?;
            }
        }
        for g in &self.full_last {
            state.apply_gate(g)?;
        }
        for gates in self.half[..m - 1].iter().rev() {
            for g in gates {
                state.apply_gate(g)?;
            }
        }
        Ok(())
    }

    /// The full symmetrized sequence as (group index, θ) pairs, in application order.
    pub fn schedule(&self) -> Vec<(usize, f64)> {
        let m = self.groups.len();
        let mut out: Vec<(usize, f64)> = (0..m.saturating_sub(1)).map(|j| (j, self.tau / 2.0)).collect();
        if m > 0 {
            out.push((m - 1, self.tau));
        }
        out.extend((0..m.saturating_sub(1)).rev().map(|j| (j, self.tau / 2.0)));
        out
    }
}

/// Options of a recorded run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct RunOptions {
    /// Record max |⟨G_p⟩ − s_p| and the particle numbers at every step (extra passes over the state).
    pub monitor_invariants: bool,
}

/// Occupations of a Trotter run and of the exact dynamics at t = k·τ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub mapping: String,
    pub tau: f64,
    pub n_steps: usize,
    pub labels: Vec<String>,
    pub times: Vec<f64>,
    pub occupations: Vec<Vec<f64>>,
    pub exact: Vec<Vec<f64>>,
    pub delta_n: Vec<f64>,
    /// Δn split by spin (up, down); empty for spinless models.
    pub delta_n_per_spin: Vec<[f64; 2]>,
    pub survival_probability: f64,
    pub recipe_norm: f64,
    /// Max |⟨G_p⟩ − s_p| per recorded time; empty unless monitoring was requested.
    pub constraint_deviation: Vec<f64>,
    /// Total particle number per recorded time; empty unless monitoring was requested.
    pub particle_number: Vec<f64>,
}

fn fmt_f64(x: f64) -> String {
    // Display prints the shortest representation that round-trips
    format!("{x}")
}

impl RunRecord {
    fn csv(&self, rows: &[Vec<f64>], with_delta: bool) -> String {
        let mut out = String::from("t");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        if with_delta {
            out.push_str(",delta_n");
        }
        out.push('\n');
        for (k, row) in rows.iter().enumerate() {
            out.push_str(&fmt_f64(self.times[k]));
            for v in row {
                let _ = write!(out, ",{}", fmt_f64(*v));
            }
            if with_delta {
                let _ = write!(out, ",{}", fmt_f64(self.delta_n[k]));
            }
            out.push('\n');
        }
        out
    }

    /// Columns t, one per occupation label, delta_n.
    pub fn to_csv(&self) -> String {
        self.csv(&self.occupations, true)
    }

    /// Exact occupations with the same columns, without delta_n.
    pub fn exact_csv(&self) -> String {
        self.csv(&self.exact, false)
    }

    pub fn max_delta_n(&self) -> f64 {
        self.delta_n.iter().copied().fold(0.0, f64::max)
    }
}

/// Exact occupations of a recipe state under the fermionic Hamiltonian at the given times.
pub fn exact_occupations(mm: &MappedModel, recipe: &Recipe, times: &[f64]) -> Result<Vec<Vec<f64>>> {
    let spinful = mm.kind.is_spinful();
    let (full, psi) = recipe.fermion_state(&mm.spec, spinful)?;
    let mut sectors: Vec<(usize, usize)> = psi.keys().map(|&s| full.particle_numbers(s)).collect();
    sectors.sort();
    sectors.dedup();
    let basis = FockBasis::sectors(mm.spec.n_sites(), spinful, &sectors)?;
    let h = build_fermion_hamiltonian_on(&mm.spec, &mm.model_params, basis)?;
    let psi0 = h.dense_state(&psi)?;
    let prop = h.propagator()?;
    let n_modes = h.basis.n_modes;
    times
        .iter()
        .map(|&t| {
            let psi_t = prop.evolve(&psi0, t)?;
            Ok((0..n_modes).map(|m| occupation(&h.basis, &psi_t, m)).collect())
        })
        .collect()
}

/// Prepares the recipe state, runs `plan.n_steps` second-order steps and records
/// occupations and Δn against the exact dynamics after every step.
pub fn evolve_and_record(
    mm: &MappedModel,
    recipe: &Recipe,
    plan: &TrotterPlan,
    budget: u128,
    options: RunOptions,
) -> Result<RunRecord> {
    let (mut state, report) = recipe.prepare(mm, budget)?;
    evolve_prepared(mm, recipe, plan, &mut state, report, options)
}

/// As [`evolve_and_record`] for an already prepared state.
pub fn evolve_prepared(
    mm: &MappedModel,
    recipe: &Recipe,
    plan: &TrotterPlan,
    state: &mut QuditState,
    report: PreparationReport,
    options: RunOptions,
) -> Result<RunRecord> {
    let numbers = mm.number_operators()?;
    let labels: Vec<String> = numbers.iter().map(|(l, _)| l.clone()).collect();
    let ops: Vec<OperatorSum> = numbers.into_iter().map(|(_, o)| o).collect();
    let times: Vec<f64> = (0..=plan.n_steps).map(|k| k as f64 * plan.tau).collect();
    let exact = exact_occupations(mm, recipe, &times)?;
    let constraint_ops: Vec<(OperatorSum, f64)> = mm
        .constraints
        .iter()
        .map(|g| (g.op.clone().into(), g.sign as f64))
        .collect();
    let mut occupations = Vec::with_capacity(times.len());
    let mut constraint_deviation = Vec::new();
    let mut particle_number = Vec::new();
    for k in 0..=plan.n_steps {
        if k > 0 {
            plan.second_order_step(state)?;
        }
        let occ = state.diagonal_expectations(&ops)?;
        if options.monitor_invariants {
            let mut dev: f64 = 0.0;
            for (g, s) in &constraint_ops {
                dev = dev.max((state.expectation_real(g)? - s).abs());
            }
            constraint_deviation.push(dev);
            particle_number.push(occ.iter().sum());
        }
        occupations.push(occ);
    }
    let n_sites = mm.spec.n_sites();
    let spinful = mm.kind.is_spinful();
    let mut delta_n = Vec::with_capacity(times.len());
    let mut delta_n_per_spin = Vec::new();
    for (q, e) in occupations.iter().zip(&exact) {
        let diffs: Vec<f64> = q.iter().zip(e).map(|(a, b)| (a - b).abs()).collect();
        if spinful {
            let up: f64 = diffs[..n_sites].iter().sum();
            let down: f64 = diffs[n_sites..].iter().sum();
            delta_n_per_spin.push([up, down]);
            delta_n.push(up + down);
        } else {
            delta_n.push(diffs.iter().sum());
        }
    }
    Ok(RunRecord {
        mapping: mm.kind.name().to_string(),
        tau: plan.tau,
        n_steps: plan.n_steps,
        labels,
        times,
        occupations,
        exact,
        delta_n,
        delta_n_per_spin,
        survival_probability: report.vacuum_survival,
        recipe_norm: report.recipe_norm,
        constraint_deviation,
        particle_number,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fermion_oracle::ModelCase;
    use crate::gamma_algebra::commutator;
    use crate::lattice::LatticeSpec;
    use crate::mappings::{build_hamiltonian, MappingKind};
    use crate::model::Model;
    use crate::statevector::DEFAULT_BUDGET;

    fn tv(lx: usize, ly: usize) -> MappedModel {
        let spec = LatticeSpec::open(lx, ly).unwrap();
        build_hamiltonian(MappingKind::SpinlessLocal, spec, Model::TV { t: 1.0, v: 0.5 }).unwrap()
    }

    #[test]
    fn group_structure() {
        let kinds: Vec<GroupKind> = group_terms(&tv(3, 2)).unwrap().iter().map(|g| g.kind).collect();
        assert_eq!(
            kinds,
            vec![
                GroupKind::HopX(ParityClass::Even),
                GroupKind::HopX(ParityClass::Odd),
                GroupKind::HopY(ParityClass::Even),
                GroupKind::Interaction
            ]
        );
        let kinds: Vec<GroupKind> = group_terms(&tv(3, 3)).unwrap().iter().map(|g| g.kind).collect();
        assert_eq!(kinds.len(), 5);
        assert_eq!(group_terms(&tv(2, 2)).unwrap().len(), 3);
    }

    #[test]
    fn groups_sum_to_hamiltonian_and_commute_internally() {
        let mm = tv(3, 2);
        let groups = group_terms(&mm).unwrap();
        let total = groups.iter().fold(OperatorSum::zero(), |acc, g| &acc + &g.operator());
        assert_eq!(total, mm.hamiltonian);
        for g in &groups {
            for (i, a) in g.operators().iter().enumerate() {
                for b in &g.operators()[i + 1..] {
                    assert!(commutator(a, b).is_zero());
                }
            }
        }
    }

    #[test]
    fn zero_step_is_identity_and_norm_is_preserved() {
        let mm = tv(2, 2);
        let recipe = Recipe {
            steps: vec![crate::recipe::RecipeStep::PairCreate {
                a: crate::lattice::Site::new(0, 0),
                b: crate::lattice::Site::new(1, 0),
                spin: None,
            }],
        };
        let (state, _) = recipe.prepare(&mm, DEFAULT_BUDGET).unwrap();
        let plan = TrotterPlan::new(&mm, 0.0, 1).unwrap();
        let mut s = state.clone();
        plan.second_order_step(&mut s).unwrap();
        assert_eq!(s, state);
        let plan = TrotterPlan::new(&mm, 0.1, 200).unwrap();
        let mut s = state.clone();
        for _ in 0..200 {
            plan.second_order_step(&mut s).unwrap();
        }
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        let back = plan.reversed().unwrap();
        for _ in 0..200 {
            back.second_order_step(&mut s).unwrap();
        }
        assert!(1.0 - s.inner(&state).norm_sqr() < 1e-8);
    }

    #[test]
    fn schedule_is_symmetric() {
        let plan = TrotterPlan::new(&tv(3, 2), 0.1, 1).unwrap();
        let s = plan.schedule();
        assert_eq!(s.iter().map(|x| x.0).collect::<Vec<_>>(), vec![0, 1, 2, 3, 2, 1, 0]);
        let total: f64 = s.iter().filter(|x| x.0 == 0).map(|x| x.1).sum();
        assert!((total - 0.1).abs() < 1e-15);
    }

    #[test]
    fn short_tv_run_tracks_oracle() {
        let case = ModelCase::TV2x3;
        let spec = case.spec();
        let mm = build_hamiltonian(MappingKind::SpinlessLocal, spec, Model::TV { t: 1.0, v: 0.5 }).unwrap();
        let plan = TrotterPlan::new(&mm, 0.05, 20).unwrap();
        let rec = evolve_and_record(
            &mm,
            &Recipe::preset(case),
            &plan,
            DEFAULT_BUDGET,
            RunOptions {
                monitor_invariants: true,
            },
        )
        .unwrap();
        assert!(rec.delta_n[0] < 1e-9);
        assert!(rec.max_delta_n() < 1e-3);
        assert!(rec.constraint_deviation.iter().all(|d| *d < 1e-8));
        assert!(rec.particle_number.iter().all(|n| (n - 2.0).abs() < 1e-8));
        let csv = rec.to_csv();
        assert!(csv.starts_with("t,site_0,site_1,site_2,site_3,site_4,site_5,delta_n\n"));
        assert_eq!(csv.lines().count(), 22);
    }
}
