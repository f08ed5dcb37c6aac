//! The dissociation lattice of a query.
//!
//! A [`Dissociation`] adds a set of variables to every atom. Dissociations
//! are index-aligned with the atoms of the query they belong to. The
//! orders defined here decide which dissociations are dominated by others;
//! the probabilistic variants ignore deterministic relations and, with
//! functional dependencies, variables in the attribute closure of an atom.

use std::collections::BTreeMap;
use std::fmt;

use crate::db::{Database, Relation, Value};
use crate::error::PlanError;
use crate::query::{fmt_var_set, is_hierarchical_sets, Atom, Catalog, Query, Var, VarSet, DISSOCIATION_SEPARATOR};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Dissociation(Vec<VarSet>);

impl Dissociation {
    pub fn new(sets: Vec<VarSet>) -> Self {
        Dissociation(sets)
    }

    /// Adds nothing to any atom.
    pub fn bottom(q: &Query) -> Self {
        Dissociation(vec![VarSet::new(); q.atoms().len()])
    }

    /// Adds every missing existential variable to every atom.
    pub fn top(q: &Query) -> Self {
        let evars = q.evars();
        Dissociation(
            q.atoms()
                .iter()
                .map(|a| evars.difference(&a.vars()).cloned().collect())
                .collect(),
        )
    }

    pub fn sets(&self) -> &[VarSet] {
        &self.0
    }

    pub fn get(&self, atom: usize) -> &VarSet {
        &self.0[atom]
    }

    pub fn is_bottom(&self) -> bool {
        self.0.iter().all(VarSet::is_empty)
    }

    pub(crate) fn add(&mut self, atom: usize, vars: impl IntoIterator<Item = Var>) {
        self.0[atom].extend(vars);
    }

    /// Checks that every added set is disjoint from its atom and drawn from the query.
    pub fn validate(&self, q: &Query) -> Result<(), PlanError> {
        if self.0.len() != q.atoms().len() {
            return Err(PlanError::InvalidDissociation(format!(
                "{} sets for {} atoms",
                self.0.len(),
                q.atoms().len()
            )));
        }
        let all = q.vars();
        for (atom, added) in q.atoms().iter().zip(&self.0) {
            if let Some(v) = added.iter().find(|v| atom.args.contains(v)) {
                return Err(PlanError::InvalidDissociation(format!(
                    "`{v}` already occurs in {atom}"
                )));
            }
            if let Some(v) = added.iter().find(|v| !all.contains(*v)) {
                return Err(PlanError::InvalidDissociation(format!(
                    "`{v}` is not a variable of the query"
                )));
            }
        }
        Ok(())
    }

    /// Variable sets of the atoms of `q^Δ`.
    pub(crate) fn atom_var_sets(&self, q: &Query) -> Vec<VarSet> {
        q.atoms()
            .iter()
            .zip(&self.0)
            .map(|(a, y)| a.vars().union(y).cloned().collect())
            .collect()
    }
}

impl fmt::Display for Dissociation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|s| {
                if s.is_empty() {
                    "∅".to_string()
                } else {
                    fmt_var_set(s)
                }
            })
            .collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// Canonical name of a dissociated relation: `R__x_y` with sorted variables.
pub fn dissociated_name(relation: &str, added: &VarSet) -> String {
    if added.is_empty() {
        return relation.to_string();
    }
    let names: Vec<&str> = added.iter().map(Var::name).collect();
    format!("{relation}{DISSOCIATION_SEPARATOR}{}", names.join("_"))
}

/// Builds `q^Δ`: each atom `R(x)` becomes `R__y(x, y)`.
pub fn dissociate_query(q: &Query, d: &Dissociation) -> Result<Query, PlanError> {
    d.validate(q)?;
    let atoms = q
        .atoms()
        .iter()
        .zip(d.sets())
        .map(|(atom, added)| Atom {
            relation: dissociated_name(&atom.relation, added),
            args: atom.args.iter().chain(added.iter()).cloned().collect(),
        })
        .collect();
    Query::named(q.name(), atoms, q.head().clone()).map_err(|e| PlanError::InvalidDissociation(e.to_string()))
}

/// Whether `q^Δ` is hierarchical.
pub fn is_safe_dissociation(q: &Query, d: &Dissociation) -> bool {
    is_hierarchical_sets(&d.atom_var_sets(q), q.head())
}

/// Values each variable takes in the relations of the atoms that mention it.
pub fn active_domains(db: &Database, q: &Query) -> BTreeMap<Var, Vec<Value>> {
    let mut domains: BTreeMap<Var, std::collections::BTreeSet<Value>> = BTreeMap::new();
    for atom in q.atoms() {
        let Some(rel) = db.relation(&atom.relation) else {
            continue;
        };
        for (pos, v) in atom.args.iter().enumerate() {
            let dom = domains.entry(v.clone()).or_default();
            dom.extend(rel.tuples().iter().map(|t| t.values[pos].clone()));
        }
    }
    domains
        .into_iter()
        .map(|(v, dom)| (v, dom.into_iter().collect()))
        .collect()
}

/// Materializes `D^Δ`. Each dissociated relation copies every source tuple
/// once per combination of active-domain values of the added variables and
/// keeps the source probability. An empty active domain yields an empty
/// relation. Relations of the original database are kept.
pub fn dissociate_database(db: &Database, q: &Query, d: &Dissociation) -> Result<Database, PlanError> {
    d.validate(q)?;
    let domains = active_domains(db, q);
    let mut out = db.clone();
    for (atom, added) in q.atoms().iter().zip(d.sets()) {
        if added.is_empty() {
            continue;
        }
        let source = db.relation(&atom.relation).ok_or_else(|| {
            PlanError::PlanQueryMismatch(format!("relation `{}` missing from database", atom.relation))
        })?;
        let added_domains: Vec<&[Value]> = added
            .iter()
            .map(|v| domains.get(v).map_or(&[][..], Vec::as_slice))
            .collect();
        let mut rel = Relation::new(
            &dissociated_name(&atom.relation, added),
            atom.args.len() + added.len(),
            source.is_probabilistic(),
        );
        for t in source.tuples() {
            for combo in cartesian(&added_domains) {
                let mut values = t.values.clone();
                values.extend(combo);
                rel.push(values, t.p)
                    .map_err(|e| PlanError::InvalidDissociation(e.to_string()))?;
            }
        }
        out.insert(rel);
    }
    Ok(out)
}

fn cartesian(domains: &[&[Value]]) -> Vec<Vec<Value>> {
    domains.iter().fold(vec![Vec::new()], |acc, dom| {
        acc.iter()
            .flat_map(|prefix| {
                dom.iter().map(move |v| {
                    let mut next = prefix.clone();
                    next.push(v.clone());
                    next
                })
            })
            .collect()
    })
}

/// The three comparison relations on dissociations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    /// Componentwise inclusion.
    Plain,
    /// Inclusion on probabilistic atoms only.
    Prob,
    /// Inclusion on probabilistic atoms after removing each atom's attribute closure.
    ProbFd,
}

/// Is `d1` below or equal to `d2` under `order`?
pub fn compare(d1: &Dissociation, d2: &Dissociation, order: Order, q: &Query, catalog: &Catalog) -> bool {
    q.atoms().iter().enumerate().all(|(i, atom)| {
        let (a, b) = (d1.get(i), d2.get(i));
        match order {
            Order::Plain => a.is_subset(b),
            Order::Prob => !catalog.is_probabilistic(&atom.relation) || a.is_subset(b),
            Order::ProbFd => {
                if !catalog.is_probabilistic(&atom.relation) {
                    return true;
                }
                let closure = atom_closure(&atom.vars(), q, catalog);
                a.difference(&closure).all(|v| b.contains(v))
            }
        }
    })
}

/// Both directions of [`compare`].
pub fn equivalent(d1: &Dissociation, d2: &Dissociation, order: Order, q: &Query, catalog: &Catalog) -> bool {
    compare(d1, d2, order, q, catalog) && compare(d2, d1, order, q, catalog)
}

/// The functional dependencies of the catalog mapped onto query variables.
fn query_fds(q: &Query, catalog: &Catalog) -> Vec<(VarSet, VarSet)> {
    q.atoms()
        .iter()
        .flat_map(|atom| {
            catalog.fds_of(&atom.relation).map(move |fd| {
                let lhs = fd.determinant.iter().map(|&p| atom.args[p].clone()).collect();
                let rhs = fd.dependent.iter().map(|&p| atom.args[p].clone()).collect();
                (lhs, rhs)
            })
        })
        .collect()
}

/// Attribute closure of `attrs` under the query's functional dependencies.
pub fn fd_closure(attrs: &VarSet, q: &Query, catalog: &Catalog) -> VarSet {
    let fds = query_fds(q, catalog);
    let mut closure = attrs.clone();
    loop {
        let before = closure.len();
        for (lhs, rhs) in &fds {
            if lhs.is_subset(&closure) {
                closure.extend(rhs.iter().cloned());
            }
        }
        if closure.len() == before {
            return closure;
        }
    }
}

/// Closure of an atom's variables with the head variables seeded in, since
/// they act as constants.
fn atom_closure(own: &VarSet, q: &Query, catalog: &Catalog) -> VarSet {
    let seed: VarSet = own.union(q.head()).cloned().collect();
    fd_closure(&seed, q, catalog)
}

/// `Δ_Γ`: every atom gains the existential variables in the closure of its own variables.
pub fn delta_gamma(q: &Query, catalog: &Catalog) -> Dissociation {
    Dissociation(
        q.atoms()
            .iter()
            .map(|atom| {
                let own = atom.vars();
                atom_closure(&own, q, catalog)
                    .into_iter()
                    .filter(|v| !own.contains(v) && !q.head().contains(v))
                    .collect()
            })
            .collect(),
    )
}

/// Every dissociation over existential variables. Exponential; intended for
/// exhaustive checks on small queries.
pub fn all_dissociations(q: &Query) -> Vec<Dissociation> {
    let top = Dissociation::top(q);
    let choices: Vec<Vec<VarSet>> = top
        .sets()
        .iter()
        .map(|missing| {
            let items: Vec<&Var> = missing.iter().collect();
            (0..1usize << items.len())
                .map(|mask| {
                    items
                        .iter()
                        .enumerate()
                        .filter(|(bit, _)| mask & (1 << bit) != 0)
                        .map(|(_, v)| (*v).clone())
                        .collect()
                })
                .collect()
        })
        .collect();
    choices
        .iter()
        .fold(vec![Vec::new()], |acc, options| {
            acc.iter()
                .flat_map(|prefix| {
                    options.iter().map(move |o| {
                        let mut next: Vec<VarSet> = prefix.clone();
                        next.push(o.clone());
                        next
                    })
                })
                .collect()
        })
        .into_iter()
        .map(Dissociation)
        .collect()
}
