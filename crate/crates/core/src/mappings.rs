//! Edge, vertex, hopping, pair-creation and constraint operators of the four
//! fermion-to-ququart mappings, and assembly of mapped Hamiltonians.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gamma_algebra::{OperatorSum, QuditMonomial, SiteFactor, C1, CI};
use crate::lattice::{
    all_edges, enumerate_sites, plaquettes, polyakov_loops, Edge, LatticeSpec, Orientation, ParityClass, Plaquette,
    PolyakovLoop, Site,
};
use crate::model::{spin_species, Model, Spin};
use crate::sector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MappingKind {
    SpinlessLocal,
    SpinSplit,
    AuxiliaryParity,
    GeneralizedJw,
}

impl MappingKind {
    pub const ALL: [MappingKind; 4] = [
        MappingKind::SpinlessLocal,
        MappingKind::SpinSplit,
        MappingKind::AuxiliaryParity,
        MappingKind::GeneralizedJw,
    ];

    pub fn is_spinful(self) -> bool {
        self != MappingKind::SpinlessLocal
    }

    /// Number of ququart layers per lattice site.
    pub fn layers(self) -> usize {
        match self {
            MappingKind::SpinSplit | MappingKind::AuxiliaryParity => 2,
            MappingKind::SpinlessLocal | MappingKind::GeneralizedJw => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MappingKind::SpinlessLocal => "spinless_local",
            MappingKind::SpinSplit => "spin_split",
            MappingKind::AuxiliaryParity => "auxiliary_parity",
            MappingKind::GeneralizedJw => "generalized_jw",
        }
    }

    /// Parses a mapping name; `spinless`, `split`, `aux` and `gjw` are accepted shorthands.
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "spinless_local" | "spinless" => Ok(MappingKind::SpinlessLocal),
            "spin_split" | "split" => Ok(MappingKind::SpinSplit),
            "auxiliary_parity" | "aux" | "aux_parity" => Ok(MappingKind::AuxiliaryParity),
            "generalized_jw" | "gjw" => Ok(MappingKind::GeneralizedJw),
            _ => Err(Error::Config(format!("unknown mapping `{name}`"))),
        }
    }

    pub fn supports(self, model: &Model) -> bool {
        self.is_spinful() == model.is_spinful()
    }
}

impl fmt::Display for MappingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MappingKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        MappingKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown mapping kind `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    Physical,
    Primed,
}

/// Assignment of (site, layer) pairs to qudit indices; the physical layer comes first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuditLayout {
    pub n_qudits: usize,
    pub n_sites: usize,
    pub layers: usize,
    pub site_to_qudit: Vec<LayoutEntry>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayoutEntry {
    pub site: Site,
    pub layer: Layer,
    pub qudit: usize,
}

impl QuditLayout {
    pub fn new(spec: &LatticeSpec, layers: usize) -> Self {
        let n_sites = spec.n_sites();
        let mut site_to_qudit = Vec::with_capacity(layers * n_sites);
        for (l, layer) in [Layer::Physical, Layer::Primed].into_iter().take(layers).enumerate() {
            for (i, site) in enumerate_sites(spec).into_iter().enumerate() {
                site_to_qudit.push(LayoutEntry {
                    site,
                    layer,
                    qudit: l * n_sites + i,
                });
            }
        }
        QuditLayout {
            n_qudits: layers * n_sites,
            n_sites,
            layers,
            site_to_qudit,
        }
    }

    pub fn qudit(&self, site_index: usize, layer: Layer) -> usize {
        match layer {
            Layer::Physical => site_index,
            Layer::Primed => {
                assert!(self.layers == 2, "layout has no primed layer");
                self.n_sites + site_index
            }
        }
    }
}

/// Generator of the mapping for a fixed lattice: A, B, S, pair creation, constraints.
#[derive(Clone, Debug)]
pub struct Mapping {
    pub kind: MappingKind,
    pub spec: LatticeSpec,
    pub layout: QuditLayout,
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// i^k for integer k.
pub(crate) fn i_pow(k: usize) -> Complex64 {
    [C1, CI, -C1, -CI][k % 4]
}

impl Mapping {
    pub fn new(kind: MappingKind, spec: LatticeSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Mapping {
            kind,
            spec,
            layout: QuditLayout::new(&spec, kind.layers()),
        })
    }

    pub fn n_qudits(&self) -> usize {
        self.layout.n_qudits
    }

    fn check_spin(&self, spin: Option<Spin>) -> Result<()> {
        match (self.kind.is_spinful(), spin) {
            (false, Some(_)) => Err(Error::SpinMismatch(format!(
                "mapping {} is spinless but a spin was given",
                self.kind
            ))),
            (true, None) => Err(Error::SpinMismatch(format!(
                "mapping {} requires a spin label",
                self.kind
            ))),
            _ => Ok(()),
        }
    }

    fn check_site(&self, s: Site) -> Result<usize> {
        if self.spec.contains(s) {
            Ok(self.spec.index(s))
        } else {
            Err(Error::EdgeNotOnLattice(format!("site {s}")))
        }
    }

    /// Physical qudit carrying site `i` for the given spin.
    fn carrier(&self, i: usize, spin: Option<Spin>) -> usize {
        match (self.kind, spin) {
            (MappingKind::SpinSplit, Some(Spin::Down)) => self.layout.qudit(i, Layer::Primed),
            _ => self.layout.qudit(i, Layer::Physical),
        }
    }

    /// Generator pair (a, b) = (1, 2) for spin up and (3, 4) for spin down on shared qudits.
    fn generators(&self, spin: Option<Spin>) -> (SiteFactor, SiteFactor) {
        match (self.kind, spin) {
            (MappingKind::AuxiliaryParity | MappingKind::GeneralizedJw, Some(Spin::Down)) => {
                (SiteFactor::G3, SiteFactor::G4)
            }
            _ => (SiteFactor::G1, SiteFactor::G2),
        }
    }

    /// Jordan-Wigner Majoranas (γ_m, γ′_m) on the single-layer snake ordering.
    pub fn jw_majoranas(&self, m: usize, spin: Option<Spin>) -> (QuditMonomial, QuditMonomial) {
        let (a, b) = self.generators(spin);
        let mut string = QuditMonomial::identity();
        for k in 0..m {
            string = string.with(k, SiteFactor::TILDE);
        }
        let gamma = string.clone().with(m, a);
        let gamma_p = string.with(m, b).scaled(-C1);
        (gamma, gamma_p)
    }

    /// Edge operator A_{from,to}; traversing a link backwards negates it.
    pub fn edge_operator(&self, edge: &Edge, spin: Option<Spin>) -> Result<QuditMonomial> {
        self.check_spin(spin)?;
        if !self.spec.has_edge(edge) {
            return Err(Error::EdgeNotOnLattice(edge.to_string()));
        }
        let canonical = edge.canonical();
        let op = self.canonical_edge_operator(&canonical, spin);
        Ok(if edge.reversed { op.scaled(-C1) } else { op })
    }

    fn canonical_edge_operator(&self, e: &Edge, spin: Option<Spin>) -> QuditMonomial {
        let r = self.spec.index(e.from);
        let s = self.spec.index(e.to);
        let (a, b) = self.generators(spin);
        match self.kind {
            MappingKind::SpinlessLocal | MappingKind::SpinSplit => {
                let (qr, qs) = (self.carrier(r, spin), self.carrier(s, spin));
                match e.orientation {
                    Orientation::Horizontal => QuditMonomial::new(C1, &[(qr, SiteFactor::G1), (qs, SiteFactor::G2)]),
                    Orientation::Vertical => QuditMonomial::new(C1, &[(qr, SiteFactor::G3), (qs, SiteFactor::G4)]),
                }
            }
            MappingKind::AuxiliaryParity => {
                let rp = self.layout.qudit(r, Layer::Primed);
                let sp = self.layout.qudit(s, Layer::Primed);
                match e.orientation {
                    Orientation::Horizontal => {
                        QuditMonomial::new(-CI, &[(r, SiteFactor::TILDE), (r, b), (rp, SiteFactor::TILDE), (s, b)])
                    }
                    Orientation::Vertical => QuditMonomial::new(
                        C1,
                        &[
                            (r, SiteFactor::TILDE),
                            (r, b),
                            (s, SiteFactor::TILDE),
                            (s, b),
                            (rp, a),
                            (sp, b),
                        ],
                    ),
                }
            }
            MappingKind::GeneralizedJw => {
                let (gr, _) = self.jw_majoranas(r, spin);
                let (gs, _) = self.jw_majoranas(s, spin);
                gr.product(&gs).scaled(-CI)
            }
        }
    }

    /// Vertex operator B_r = −iγ_rγ′_r.
    pub fn vertex_operator(&self, site: Site, spin: Option<Spin>) -> Result<QuditMonomial> {
        self.check_spin(spin)?;
        let r = self.check_site(site)?;
        Ok(match self.kind {
            MappingKind::SpinlessLocal | MappingKind::SpinSplit => {
                QuditMonomial::single(self.carrier(r, spin), SiteFactor::TILDE)
            }
            MappingKind::AuxiliaryParity | MappingKind::GeneralizedJw => {
                let (a, b) = self.generators(spin);
                QuditMonomial::new(CI, &[(r, a), (r, b)])
            }
        })
    }

    /// Number operator n_r = (I − B_r)/2.
    pub fn number_operator(&self, site: Site, spin: Option<Spin>) -> Result<OperatorSum> {
        let b: OperatorSum = self.vertex_operator(site, spin)?.into();
        Ok((&OperatorSum::identity() - &b).scaled(c(0.5, 0.0)))
    }

    /// Hopping operator S_{from,to} = −i A_{from,to} B_to.
    pub fn hop_operator(&self, edge: &Edge, spin: Option<Spin>) -> Result<QuditMonomial> {
        let a = self.edge_operator(edge, spin)?;
        let b = self.vertex_operator(edge.to, spin)?;
        Ok(a.product(&b).scaled(-CI))
    }

    /// S_ij + S_ji = i A_ij (B_i − B_j), equal to 2(f†_i f_j + f†_j f_i).
    pub fn hopping_sum(&self, edge: &Edge, spin: Option<Spin>) -> Result<OperatorSum> {
        let a: OperatorSum = self.edge_operator(edge, spin)?.into();
        let bi: OperatorSum = self.vertex_operator(edge.from, spin)?.into();
        let bj: OperatorSum = self.vertex_operator(edge.to, spin)?.into();
        Ok((&a * &(&bi - &bj)).scaled(CI))
    }

    /// f†_i f†_j = (i/4) A_ij (I + B_i)(I + B_j).
    pub fn pair_creation(&self, edge: &Edge, spin: Option<Spin>) -> Result<OperatorSum> {
        let a: OperatorSum = self.edge_operator(edge, spin)?.into();
        let id = OperatorSum::identity();
        let bi: OperatorSum = self.vertex_operator(edge.from, spin)?.into();
        let bj: OperatorSum = self.vertex_operator(edge.to, spin)?.into();
        Ok((&(&a * &(&id + &bi)) * &(&id + &bj)).scaled(c(0.0, 0.25)))
    }

    /// i^L times the ordered product of edge operators around a closed path.
    fn loop_product(&self, path: &[Edge], spin: Option<Spin>) -> Result<QuditMonomial> {
        let mut g = QuditMonomial::scalar(i_pow(path.len()));
        for e in path {
            g = g.product(&self.edge_operator(e, spin)?);
        }
        Ok(g)
    }

    /// Plaquette constraint G_p = i^4 A_{r,r+x} A_{r+x,r+x+y} A_{r+x+y,r+y} A_{r+y,r}.
    pub fn plaquette_constraint(&self, p: &Plaquette, spin: Option<Spin>) -> Result<QuditMonomial> {
        self.loop_product(&p.edges, spin)
    }

    /// Loop constraint along a non-contractible path.
    pub fn polyakov_constraint(&self, lp: &PolyakovLoop, spin: Option<Spin>) -> Result<QuditMonomial> {
        if !self.spec.is_periodic() {
            return Err(Error::NotPeriodic);
        }
        self.loop_product(&lp.edges, spin)
    }

    /// Qudit Jordan-Wigner creation and annihilation operators (f†_m, f_m).
    pub fn jwt_operators(&self, m: usize, spin: Option<Spin>) -> Result<(OperatorSum, OperatorSum)> {
        if m >= self.spec.n_sites() {
            return Err(Error::EdgeNotOnLattice(format!("site index {m}")));
        }
        let (g, gp) = self.jw_majoranas(m, spin);
        // f† = (γ − iγ′)/2 and f = (γ + iγ′)/2 with γ′ = −S·Γb
        let g: OperatorSum = g.into();
        let gp: OperatorSum = gp.into();
        let create = (&g - &gp.scaled(CI)).scaled(c(0.5, 0.0));
        let annihilate = (&g + &gp.scaled(CI)).scaled(c(0.5, 0.0));
        Ok((create, annihilate))
    }

    /// Interaction term on one edge (t-V) or one site (Fermi-Hubbard), without its coupling constant.
    pub fn interaction_term(&self, sites: (Site, Site), spins: (Option<Spin>, Option<Spin>)) -> Result<OperatorSum> {
        let n1 = self.number_operator(sites.0, spins.0)?;
        let n2 = self.number_operator(sites.1, spins.1)?;
        Ok(&n1 * &n2)
    }

    /// The computational basis state in which every vertex operator equals +1
    /// (every mode empty) and every auxiliary qudit is |0⟩.
    pub fn empty_reference_index(&self) -> usize {
        let n = self.n_qudits();
        let digit = match self.kind {
            MappingKind::SpinlessLocal | MappingKind::SpinSplit => 0usize,
            MappingKind::AuxiliaryParity | MappingKind::GeneralizedJw => 3usize,
        };
        (0..self.spec.n_sites()).fold(0usize, |acc, i| acc | (digit << (2 * (n - 1 - i))))
    }
}

/// Origin of a Hamiltonian block, used to form Trotter groups.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermKind {
    Hop {
        orientation: Orientation,
        class: ParityClass,
    },
    Interaction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermBlock {
    pub kind: TermKind,
    pub label: String,
    pub op: OperatorSum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintCategory {
    Plaquette,
    PolyakovHorizontal,
    PolyakovVertical,
}

/// Loop constraint G with the sign s of the physical sector, G|ψ⟩ = s|ψ⟩.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub label: String,
    pub category: ConstraintCategory,
    pub spin: Option<Spin>,
    pub op: QuditMonomial,
    pub sign: i8,
}

impl Constraint {
    /// Projector (I + sG)/2 onto the physical sector of this constraint.
    pub fn projector(&self) -> OperatorSum {
        let g: OperatorSum = self.op.clone().scaled(c(self.sign as f64, 0.0)).into();
        (&OperatorSum::identity() + &g).scaled(c(0.5, 0.0))
    }
}

/// A lattice model written in qudit operators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MappedModel {
    pub spec: LatticeSpec,
    pub kind: MappingKind,
    pub layout: QuditLayout,
    pub model_params: Model,
    pub hamiltonian: OperatorSum,
    pub blocks: Vec<TermBlock>,
    pub constraints: Vec<Constraint>,
}

impl MappedModel {
    pub fn mapping(&self) -> Mapping {
        Mapping {
            kind: self.kind,
            spec: self.spec,
            layout: self.layout.clone(),
        }
    }

    pub fn n_qudits(&self) -> usize {
        self.layout.n_qudits
    }

    pub fn spins(&self) -> Vec<Option<Spin>> {
        spin_species(self.kind.is_spinful())
    }

    /// Number operators ordered site-major within each spin, spin up first.
    pub fn number_operators(&self) -> Result<Vec<(String, OperatorSum)>> {
        let mapping = self.mapping();
        let mut out = Vec::new();
        for spin in self.spins() {
            for (i, site) in enumerate_sites(&self.spec).into_iter().enumerate() {
                let label = match spin {
                    None => format!("site_{i}"),
                    Some(s) => format!("site_{i}_{}", s.label()),
                };
                out.push((label, mapping.number_operator(site, spin)?));
            }
        }
        Ok(out)
    }

    pub fn constraint_ops(&self) -> Vec<OperatorSum> {
        self.constraints.iter().map(|g| g.op.clone().into()).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: MappedModel = serde_json::from_str(s)?;
        m.spec.validate()?;
        if m.layout.n_qudits != m.layout.layers * m.spec.n_sites() || m.layout.layers != m.kind.layers() {
            return Err(Error::Config("layout does not match lattice and mapping".into()));
        }
        for t in m.hamiltonian.terms.iter().chain(m.constraints.iter().map(|g| &g.op)) {
            if let Some(q) = t.max_qudit() {
                if q >= m.layout.n_qudits {
                    return Err(Error::QuditOutOfRange {
                        qudit: q,
                        n_qudits: m.layout.n_qudits,
                    });
                }
            }
        }
        Ok(m)
    }
}

/// Builds the Hamiltonian and constraints with sector signs left at +1.
pub(crate) fn build_unsigned(kind: MappingKind, spec: LatticeSpec, model: Model) -> Result<MappedModel> {
    if !kind.supports(&model) {
        return Err(Error::IncompatibleModel {
            model: model.name().to_string(),
            kind: kind.name().to_string(),
        });
    }
    let mapping = Mapping::new(kind, spec)?;
    let spins = spin_species(kind.is_spinful());
    let hop = c(-model.hopping() / 2.0, 0.0);
    let mut blocks = Vec::new();
    for e in all_edges(&spec) {
        for &spin in &spins {
            let label = match spin {
                None => format!("hop {e}"),
                Some(s) => format!("hop {e} {}", s.label()),
            };
            blocks.push(TermBlock {
                kind: TermKind::Hop {
                    orientation: e.orientation,
                    class: e.parity_class,
                },
                label,
                op: mapping.hopping_sum(&e, spin)?.scaled(hop),
            });
        }
    }
    let coupling = c(model.interaction(), 0.0);
    match model {
        Model::TV { .. } => {
            for e in all_edges(&spec) {
                blocks.push(TermBlock {
                    kind: TermKind::Interaction,
                    label: format!("nn {e}"),
                    op: mapping.interaction_term((e.from, e.to), (None, None))?.scaled(coupling),
                });
            }
        }
        Model::FermiHubbard { .. } => {
            for site in enumerate_sites(&spec) {
                blocks.push(TermBlock {
                    kind: TermKind::Interaction,
                    label: format!("onsite {site}"),
                    op: mapping
                        .interaction_term((site, site), (Some(Spin::Up), Some(Spin::Down)))?
                        .scaled(coupling),
                });
            }
        }
    }
    let hamiltonian = blocks.iter().fold(OperatorSum::zero(), |acc, b| &acc + &b.op);
    let mut constraints = Vec::new();
    if kind != MappingKind::GeneralizedJw {
        for &spin in &spins {
            let suffix = spin.map(|s| format!(" {}", s.label())).unwrap_or_default();
            for p in plaquettes(&spec) {
                constraints.push(Constraint {
                    label: format!("plaquette {}{suffix}", p.corner),
                    category: ConstraintCategory::Plaquette,
                    spin,
                    op: mapping.plaquette_constraint(&p, spin)?,
                    sign: 1,
                });
            }
            for lp in polyakov_loops(&spec) {
                let (category, name) = match lp.orientation {
                    Orientation::Horizontal => (ConstraintCategory::PolyakovHorizontal, "row"),
                    Orientation::Vertical => (ConstraintCategory::PolyakovVertical, "column"),
                };
                constraints.push(Constraint {
                    label: format!("polyakov {name} {}{suffix}", lp.line),
                    category,
                    spin,
                    op: mapping.polyakov_constraint(&lp, spin)?,
                    sign: 1,
                });
            }
        }
    }
    Ok(MappedModel {
        spec,
        kind,
        layout: mapping.layout,
        model_params: model,
        hamiltonian,
        blocks,
        constraints,
    })
}

/// Maps a fermionic lattice model to qudits and fixes the physical-sector sign
/// of every constraint from the calibrated sign table of the mapping.
pub fn build_hamiltonian(kind: MappingKind, spec: LatticeSpec, model: Model) -> Result<MappedModel> {
    let mut mm = build_unsigned(kind, spec, model)?;
    if !mm.constraints.is_empty() {
        let table = sector::calibrated_signs(kind, spec.is_periodic())?;
        for g in &mut mm.constraints {
            g.sign = table.sign(g.category, g.spin);
        }
    }
    Ok(mm)
}
