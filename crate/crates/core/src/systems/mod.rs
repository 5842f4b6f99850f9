//! Registry of worked systems: each descriptor packages a Lagrangian and/or
//! Hamiltonian with its guards, named candidate solutions X: Q → TQ or
//! α: Q → T*Q, first integrals, conserved quantities for trajectory drift
//! reports, and (where the dynamics is not the Lagrangian SODE) a custom
//! right-hand side with an optional state projection.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::dynamics::{hamiltonian_field, lagrangian_sode, HamiltonianSystem, LagrangianSystem};
use crate::error::{HjtError, Result};
use crate::field::{Guard, ScalarField, SectionKind};
use crate::foliations::IntegralFamily;
use crate::geometry::DiffConfig;
use crate::grid::GridSpec;
use crate::hj_hamiltonian::CandidateOneForm;
use crate::hj_lagrangian::{CandidateVectorField, ResidualReport, VerifyMode};

pub mod free2d;
pub mod geodesic;
pub mod groups;
pub mod ho2d;
pub mod liegroup;
pub mod monopole;
pub mod rel2d;
pub mod rigid_body;
pub mod timedep;

/// A candidate section built from a spec: vector field on the Lagrangian
/// side or one-form on the Hamiltonian side.
pub enum BuiltCandidate {
    Vector(CandidateVectorField),
    OneForm(CandidateOneForm),
}

impl BuiltCandidate {
    pub fn kind(&self) -> SectionKind {
        match self {
            BuiltCandidate::Vector(_) => SectionKind::Vector,
            BuiltCandidate::OneForm(_) => SectionKind::OneForm,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            BuiltCandidate::Vector(c) => &c.name,
            BuiltCandidate::OneForm(c) => &c.name,
        }
    }
}

type Builder = Arc<dyn Fn(&BTreeMap<String, f64>) -> Result<BuiltCandidate> + Send + Sync>;

/// Named, parameterized candidate family registered on a system.
#[derive(Clone)]
pub struct CandidateSpec {
    pub name: &'static str,
    pub kind: SectionKind,
    pub summary: &'static str,
    /// Parameter names with default values.
    pub params: Vec<(&'static str, f64)>,
    /// True when the family solves the standard problem (not merely the
    /// generalized one) at its default parameters.
    pub standard: bool,
    /// Preferred verification grid when the system default does not respect
    /// this family's guard.
    pub grid: Option<GridSpec>,
    builder: Builder,
}

impl CandidateSpec {
    pub fn new(
        name: &'static str,
        kind: SectionKind,
        summary: &'static str,
        params: Vec<(&'static str, f64)>,
        builder: Builder,
    ) -> Self {
        CandidateSpec {
            name,
            kind,
            summary,
            params,
            standard: false,
            grid: None,
            builder,
        }
    }

    pub fn standard(mut self) -> Self {
        self.standard = true;
        self
    }

    pub fn with_grid(mut self, grid: GridSpec) -> Self {
        self.grid = Some(grid);
        self
    }

    /// Instantiate with defaults overridden by any matching keys in `overrides`.
    /// Keys that do not name a parameter of this family are ignored here; the
    /// caller is responsible for rejecting unknown keys.
    pub fn build(&self, overrides: &BTreeMap<String, f64>) -> Result<BuiltCandidate> {
        let mut p: BTreeMap<String, f64> = self
            .params
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        for (k, v) in overrides {
            if p.contains_key(k) {
                p.insert(k.clone(), *v);
            }
        }
        (self.builder)(&p)
    }

    pub fn has_param(&self, key: &str) -> bool {
        self.params.iter().any(|(k, _)| *k == key)
    }
}

pub type Rhs = Arc<dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync>;
pub type Projection = Arc<dyn Fn(&mut [f64]) + Send + Sync>;
type VerifyOverride = Arc<
    dyn Fn(&CandidateVectorField, &GridSpec, VerifyMode, f64, &DiffConfig, usize) -> Result<ResidualReport>
        + Send
        + Sync,
>;

/// One registered system.
pub struct SystemDescriptor {
    pub name: &'static str,
    pub summary: &'static str,
    /// Base (configuration) dimension served by candidates.
    pub dof: usize,
    /// Dimension of the integration state (2·dof unless the dynamics is
    /// custom, like the rigid body's group-plus-body-velocity state).
    pub state_dim: usize,
    pub lagrangian: Option<LagrangianSystem>,
    pub hamiltonian: Option<HamiltonianSystem>,
    /// Degenerate fiber Hessian anywhere on the domain.
    pub singular: bool,
    pub candidates: Vec<CandidateSpec>,
    /// Pool of first integrals on the state space (label, field of arity
    /// state_dim); subsets of size dof form leaf families.
    pub integrals: Vec<(String, ScalarField)>,
    /// Quantities reported as drift columns by trajectory runs.
    pub conserved: Vec<(String, ScalarField)>,
    /// Custom dynamics overriding the Lagrangian SODE or Hamiltonian field.
    pub dynamics: Option<Rhs>,
    /// Per-step state re-projection (group manifolds).
    pub projection: Option<Projection>,
    /// Domain predicate for trajectories.
    pub state_guard: Guard,
    pub default_x0: Vec<f64>,
    pub default_dt: f64,
    pub default_steps: usize,
    /// Default verification grid on the base Q.
    pub base_grid: GridSpec,
    /// Default grid on the state space (bracket tables).
    pub state_grid: GridSpec,
    /// System-level parameters (monopole strength, inertia entries) with
    /// defaults; rebuild through `build` to apply others.
    pub params: Vec<(&'static str, f64)>,
    /// Replacement verification path for systems whose dynamics is not
    /// derived from a registered Lagrangian (the monopole).
    pub verify_override: Option<VerifyOverride>,
}

impl SystemDescriptor {
    pub fn candidate(&self, name: &str) -> Option<&CandidateSpec> {
        self.candidates.iter().find(|c| c.name == name)
    }

    /// Select integrals by label, in the requested order.
    pub fn family(&self, labels: &[&str]) -> Option<IntegralFamily> {
        let mut members = Vec::with_capacity(labels.len());
        for want in labels {
            let (label, field) = self.integrals.iter().find(|(l, _)| l == want)?;
            members.push((label.clone(), field.clone()));
        }
        Some(IntegralFamily::new(self.dof, members))
    }

    pub fn integral(&self, label: &str) -> Option<&ScalarField> {
        self.integrals
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, f)| f)
    }

    pub fn has_param(&self, key: &str) -> bool {
        self.params.iter().any(|(k, _)| *k == key)
    }

    /// The trajectory right-hand side: custom dynamics when registered,
    /// otherwise the Lagrangian SODE (regular systems) or the Hamiltonian
    /// field.
    pub fn rhs(&self, cfg: DiffConfig) -> Result<Rhs> {
        if let Some(r) = &self.dynamics {
            return Ok(r.clone());
        }
        if let Some(l) = &self.lagrangian {
            if self.singular {
                return Err(HjtError::SingularHessian);
            }
            let sys = l.clone();
            let n = sys.dof();
            return Ok(Arc::new(move |x: &[f64]| {
                let sol = lagrangian_sode(&sys, x, &cfg)?;
                let mut out = x[n..2 * n].to_vec();
                out.extend(sol.acceleration);
                Ok(out)
            }));
        }
        if let Some(h) = &self.hamiltonian {
            let sys = h.clone();
            return Ok(Arc::new(move |x: &[f64]| hamiltonian_field(&sys, x, &cfg)));
        }
        Err(HjtError::SingularHessian)
    }
}

/// Stable listing of registered system names with one-line summaries.
pub fn names() -> Vec<(&'static str, &'static str)> {
    registry()
        .iter()
        .map(|d| (d.name, d.summary))
        .collect()
}

/// All descriptors at default parameters, in registration order.
pub fn registry() -> Vec<SystemDescriptor> {
    let none = BTreeMap::new();
    [
        "free2d",
        "ho2d",
        "ho2d_alt",
        "rel2d",
        "liegroup_su2",
        "rigid_body",
        "monopole",
        "td_free",
    ]
    .iter()
    .map(|n| build(n, &none).expect("registry names are exhaustive"))
    .collect()
}

/// Look up a system by name, applying any system-level parameters.
pub fn build(name: &str, params: &BTreeMap<String, f64>) -> Option<SystemDescriptor> {
    match name {
        "free2d" => Some(free2d::descriptor()),
        "ho2d" => Some(ho2d::descriptor()),
        "ho2d_alt" => Some(ho2d::descriptor_alt()),
        "rel2d" => Some(rel2d::descriptor()),
        "liegroup_su2" => Some(liegroup::descriptor()),
        "rigid_body" => Some(rigid_body::descriptor(params)),
        "monopole" => Some(monopole::descriptor(
            params.get("n").copied().unwrap_or(1.0),
        )),
        "td_free" => Some(timedep::descriptor()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_is_complete_and_consistent() {
        let all = registry();
        assert_eq!(all.len(), 8);
        for d in &all {
            assert!(
                d.lagrangian.is_some() || d.hamiltonian.is_some() || d.dynamics.is_some(),
                "{} has no dynamics source",
                d.name
            );
            assert_eq!(d.default_x0.len(), d.state_dim, "{} x0 dimension", d.name);
            for (_, c) in &d.conserved {
                assert_eq!(c.arity(), d.state_dim, "{} conserved arity", d.name);
            }
            if let Some(l) = &d.lagrangian {
                assert_eq!(l.dof(), d.dof, "{} dof", d.name);
            }
            assert_eq!(d.base_grid.dim(), d.dof, "{} base grid", d.name);
        }
    }

    #[test]
    fn lookup_applies_system_parameters() {
        let mut p = BTreeMap::new();
        p.insert("n".to_string(), 2.5);
        let d = build("monopole", &p).unwrap();
        let got = d.params.iter().find(|(k, _)| *k == "n").unwrap().1;
        assert_eq!(got, 2.5);
        assert!(build("nosuch", &p).is_none());
    }

    #[test]
    fn default_trajectories_stay_on_domain() {
        for d in registry() {
            let rhs = d.rhs(DiffConfig::default()).unwrap();
            let project: Option<&(dyn Fn(&mut [f64]) + Sync)> = match &d.projection {
                Some(p) => Some(&**p),
                None => None,
            };
            let traj = crate::dynamics::integrate(
                |x| rhs(x),
                &d.default_x0,
                1e-3,
                50,
                &d.state_guard,
                project,
            );
            assert!(traj.complete, "{} default trajectory left the domain", d.name);
        }
    }
}
