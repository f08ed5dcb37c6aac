//! Query plans and their correspondence with safe dissociations.
//!
//! Plans are built canonically: join and min children are kept sorted by
//! their canonical key, so two construction paths that produce the same
//! plan produce equal values.

use std::collections::BTreeMap;
use std::fmt;

use crate::dissociation::Dissociation;
use crate::error::PlanError;
use crate::query::{fmt_var_set, is_hierarchical_sets, partition, Atom, Query, VarSet};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Plan {
    Scan(Atom),
    Join(Vec<Plan>),
    /// Projection with duplicate elimination onto `head`.
    Project {
        head: VarSet,
        input: Box<Plan>,
    },
    /// Per-head-tuple minimum over plans for the same subquery.
    Min(Vec<Plan>),
    /// Reference to a named view with the given head.
    View {
        name: String,
        head: VarSet,
    },
}

impl Plan {
    pub fn scan(atom: Atom) -> Plan {
        Plan::Scan(atom)
    }

    pub fn project(head: VarSet, input: Plan) -> Plan {
        Plan::Project {
            head,
            input: Box::new(input),
        }
    }

    /// k-ary join with canonically ordered children.
    pub fn join(mut children: Vec<Plan>) -> Plan {
        children.sort_by_cached_key(Plan::key);
        Plan::Join(children)
    }

    /// Minimum over alternatives; a single alternative is returned as is.
    pub fn min(mut children: Vec<Plan>) -> Plan {
        children.sort_by_cached_key(Plan::key);
        children.dedup();
        if children.len() == 1 {
            children.pop().unwrap()
        } else {
            Plan::Min(children)
        }
    }

    /// Head variables of the plan's output.
    pub fn head(&self) -> VarSet {
        match self {
            Plan::Scan(atom) => atom.vars(),
            Plan::Join(children) => children.iter().flat_map(Plan::head).collect(),
            Plan::Project { head, .. } | Plan::View { head, .. } => head.clone(),
            Plan::Min(children) => children.first().map(Plan::head).unwrap_or_default(),
        }
    }

    /// Atoms scanned by this plan, in traversal order.
    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a Atom>) {
        match self {
            Plan::Scan(atom) => out.push(atom),
            Plan::Join(children) | Plan::Min(children) => children.iter().for_each(|c| c.collect_atoms(out)),
            Plan::Project { input, .. } => input.collect_atoms(out),
            Plan::View { .. } => {}
        }
    }

    pub fn count_nodes(&self, pred: &dyn Fn(&Plan) -> bool) -> usize {
        let own = usize::from(pred(self));
        own + match self {
            Plan::Join(children) | Plan::Min(children) => children.iter().map(|c| c.count_nodes(pred)).sum(),
            Plan::Project { input, .. } => input.count_nodes(pred),
            Plan::Scan(_) | Plan::View { .. } => 0,
        }
    }

    /// Single-line canonical rendering; equal plans have equal keys.
    pub fn key(&self) -> String {
        match self {
            Plan::Scan(atom) => atom.to_string(),
            Plan::Join(children) => {
                let parts: Vec<String> = children.iter().map(Plan::key).collect();
                format!("⋈({})", parts.join(","))
            }
            Plan::Project { head, input } => format!("π{}({})", fmt_var_set(head), input.key()),
            Plan::Min(children) => {
                let parts: Vec<String> = children.iter().map(Plan::key).collect();
                format!("min({})", parts.join(","))
            }
            Plan::View { name, head } => format!("{name}{}", fmt_var_set(head)),
        }
    }

    fn write_tree(&self, f: &mut fmt::Formatter<'_>, depth: usize) -> fmt::Result {
        let pad = "  ".repeat(depth);
        match self {
            Plan::Scan(atom) => writeln!(f, "{pad}{atom}"),
            Plan::View { name, head } => writeln!(f, "{pad}view {name} {}", fmt_var_set(head)),
            Plan::Project { head, input } => {
                if let Plan::Scan(atom) = input.as_ref() {
                    return writeln!(f, "{pad}π{} {atom}", fmt_var_set(head));
                }
                writeln!(f, "{pad}π{}", fmt_var_set(head))?;
                input.write_tree(f, depth + 1)
            }
            Plan::Join(children) => {
                writeln!(f, "{pad}⋈")?;
                children.iter().try_for_each(|c| c.write_tree(f, depth + 1))
            }
            Plan::Min(children) => {
                writeln!(f, "{pad}min")?;
                children.iter().try_for_each(|c| c.write_tree(f, depth + 1))
            }
        }
    }
}

/// Indented algebra text, one operator per line.
impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_tree(f, 0)
    }
}

/// A plan is safe iff the children of every join have the same head
/// variables, ignoring the plan's own output variables (constants).
pub fn is_safe_plan(p: &Plan) -> bool {
    fn check(p: &Plan, constants: &VarSet) -> bool {
        match p {
            Plan::Scan(_) | Plan::View { .. } => true,
            Plan::Project { input, .. } => check(input, constants),
            Plan::Min(children) => children.iter().all(|c| check(c, constants)),
            Plan::Join(children) => {
                let heads: Vec<VarSet> = children
                    .iter()
                    .map(|c| c.head().difference(constants).cloned().collect())
                    .collect();
                heads.windows(2).all(|w| w[0] == w[1]) && children.iter().all(|c| check(c, constants))
            }
        }
    }
    check(p, &p.head())
}

/// `Δ^P`: at every join, each child's atoms gain the join variables missing
/// from that child's head. Head variables of the query are never added.
pub fn plan_to_dissociation(p: &Plan, q: &Query) -> Result<Dissociation, PlanError> {
    let index: BTreeMap<&Atom, usize> = q.atoms().iter().enumerate().map(|(i, a)| (a, i)).collect();
    let scanned = p.atoms();
    let mut seen = vec![false; q.atoms().len()];
    for atom in &scanned {
        let i = *index
            .get(atom)
            .ok_or_else(|| PlanError::PlanQueryMismatch(format!("{atom} is not an atom of the query")))?;
        if std::mem::replace(&mut seen[i], true) {
            return Err(PlanError::PlanQueryMismatch(format!("{atom} is scanned twice")));
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(PlanError::PlanQueryMismatch(format!(
            "{} is never scanned",
            q.atoms()[i]
        )));
    }
    if &p.head() != q.head() {
        return Err(PlanError::PlanQueryMismatch(format!(
            "plan head {} differs from query head {}",
            fmt_var_set(&p.head()),
            fmt_var_set(q.head())
        )));
    }

    fn walk(p: &Plan, q: &Query, index: &BTreeMap<&Atom, usize>, d: &mut Dissociation) -> Result<(), PlanError> {
        match p {
            Plan::Scan(_) => Ok(()),
            Plan::Project { input, .. } => walk(input, q, index, d),
            Plan::Min(_) | Plan::View { .. } => Err(PlanError::PlanQueryMismatch(
                "min and view nodes have no single dissociation".into(),
            )),
            Plan::Join(children) => {
                let heads: Vec<VarSet> = children.iter().map(Plan::head).collect();
                let jvar: VarSet = heads.iter().flatten().cloned().collect();
                for (child, head) in children.iter().zip(&heads) {
                    let missing: VarSet = jvar
                        .difference(head)
                        .filter(|v| !q.head().contains(*v))
                        .cloned()
                        .collect();
                    for atom in child.atoms() {
                        let i = index[atom];
                        let own = atom.vars();
                        d.add(i, missing.iter().filter(|v| !own.contains(*v)).cloned());
                    }
                    walk(child, q, index, d)?;
                }
                Ok(())
            }
        }
    }

    let mut d = Dissociation::bottom(q);
    walk(p, q, &index, &mut d)?;
    Ok(d)
}

/// The unique safe plan of `q^Δ`, with the added variables dropped again so
/// that it scans the original relations of `q`.
pub fn dissociation_to_plan(q: &Query, d: &Dissociation) -> Result<Plan, PlanError> {
    d.validate(q)?;
    let var_sets = d.atom_var_sets(q);
    if !is_hierarchical_sets(&var_sets, q.head()) {
        return Err(PlanError::NotSafe);
    }
    let atoms: Vec<usize> = (0..q.atoms().len()).collect();
    safe_plan(q, &var_sets, &atoms, q.head())
}

pub(crate) fn safe_plan(q: &Query, var_sets: &[VarSet], atoms: &[usize], head: &VarSet) -> Result<Plan, PlanError> {
    if let [single] = atoms {
        let atom = &q.atoms()[*single];
        return Ok(Plan::project(
            head.intersection(&atom.vars()).cloned().collect(),
            Plan::scan(atom.clone()),
        ));
    }
    let groups = partition(atoms, |i| &var_sets[i], head);
    if groups.len() > 1 {
        let children = groups
            .iter()
            .map(|g| {
                let vars: VarSet = g.iter().flat_map(|&i| var_sets[i].iter().cloned()).collect();
                safe_plan(q, var_sets, g, &head.intersection(&vars).cloned().collect())
            })
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(Plan::join(children));
    }
    let separators: VarSet = atoms
        .iter()
        .map(|&i| var_sets[i].clone())
        .reduce(|acc, s| acc.intersection(&s).cloned().collect())
        .unwrap_or_default()
        .difference(head)
        .cloned()
        .collect();
    if separators.is_empty() {
        return Err(PlanError::NotSafe);
    }
    let extended: VarSet = head.union(&separators).cloned().collect();
    let input = safe_plan(q, var_sets, atoms, &extended)?;
    let kept = head.intersection(&input.head()).cloned().collect();
    Ok(Plan::project(kept, input))
}
