use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::eval::{evaluate, EvalContext, EvalError};
use super::expr::Expression;
use crate::report::{Issue, IssueCode};
use crate::runtime::StateKey;
use crate::scenario::ScenarioDefinition;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BindingTarget {
    /// Writes a scalar equipment variable every tick.
    State {
        instance: String,
        var: String,
    },
    Graph {
        name: String,
    },
    Text {
        name: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binding {
    pub id: String,
    pub target: BindingTarget,
    pub expr: Expression,
}

impl Binding {
    pub fn new(id: impl Into<String>, target: BindingTarget, expr: Expression) -> Self {
        Self {
            id: id.into(),
            target,
            expr,
        }
    }

    fn writes(&self) -> Option<StateKey> {
        match &self.target {
            BindingTarget::State { instance, var } => Some(StateKey::new(instance, var)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BindingError {
    #[error("bindings form a dependency cycle: {0:?}")]
    DependencyCycle(Vec<String>),
    #[error("binding `{binding}` failed: {source}")]
    Eval { binding: String, source: EvalError },
}

/// Values produced by one evaluation pass over all bindings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BindingOutput {
    pub writes: BTreeMap<StateKey, f64>,
    pub graph: BTreeMap<String, f64>,
    pub text: BTreeMap<String, f64>,
}

/// Static check of one binding against a scenario. Empty means every
/// reference resolves and a state target is a scalar variable.
pub fn check_binding(b: &Binding, s: &ScenarioDefinition) -> Vec<Issue> {
    let path = format!("bindings[{}]", b.id);
    let mut out = Vec::new();

    match &b.target {
        BindingTarget::State { instance, var } => match s.state_var(instance, var) {
            None => out.push(Issue::error(
                IssueCode::UnresolvedRef,
                format!("{path}.target"),
                format!("`{instance}.{var}` is not a declared equipment variable"),
            )),
            Some(v) if !v.kind.is_scalar() => out.push(Issue::error(
                IssueCode::TypeMismatch,
                format!("{path}.target"),
                format!(
                    "`{instance}.{var}` is {}, bindings can only write scalars",
                    v.kind.name()
                ),
            )),
            Some(_) => {}
        },
        BindingTarget::Graph { name } | BindingTarget::Text { name } => {
            if name.is_empty() {
                out.push(Issue::error(
                    IssueCode::UnresolvedRef,
                    format!("{path}.target"),
                    "channel name is empty",
                ));
            }
        }
    }

    let mut seen = BTreeSet::new();
    for r in b.expr.ast().refs() {
        if !seen.insert(r) {
            continue;
        }
        let epath = format!("{path}.expr");
        if let Some(table) = s.table(&r.scope) {
            if table.column(&r.name).is_none() {
                out.push(Issue::error(
                    IssueCode::UnresolvedRef,
                    epath,
                    format!("table `{}` has no column `{}`", r.scope, r.name),
                ));
            }
        } else if s.instance(&r.scope).is_some() {
            match s.state_var(&r.scope, &r.name) {
                None => out.push(Issue::error(
                    IssueCode::UnresolvedRef,
                    epath,
                    format!("`{r}` is not a declared equipment variable"),
                )),
                Some(v) if !v.kind.is_scalar() => out.push(Issue::error(
                    IssueCode::TypeMismatch,
                    epath,
                    format!("`{r}` is {}, expressions read scalars only", v.kind.name()),
                )),
                Some(_) => {}
            }
        } else {
            out.push(Issue::error(
                IssueCode::UnresolvedRef,
                epath,
                format!("`{}` is neither an instance nor a table", r.scope),
            ));
        }
    }
    out
}

/// Evaluation order: a binding that writes a variable runs before every
/// binding that reads it. Independent bindings run in id order, so the order
/// does not depend on declaration order. Reading one's own target sees the
/// value from before the pass. On a cycle, returns the ids involved.
pub fn binding_order(bindings: &[Binding]) -> Result<Vec<usize>, Vec<String>> {
    let writers: BTreeMap<StateKey, usize> = bindings
        .iter()
        .enumerate()
        .filter_map(|(i, b)| b.writes().map(|k| (k, i)))
        .collect();

    let mut indegree = alloc::vec![0usize; bindings.len()];
    let mut dependents: Vec<BTreeSet<usize>> = alloc::vec![BTreeSet::new(); bindings.len()];
    for (i, b) in bindings.iter().enumerate() {
        let reads: BTreeSet<StateKey> = b
            .expr
            .ast()
            .refs()
            .into_iter()
            .map(|r| StateKey::new(&r.scope, &r.name))
            .collect();
        for key in reads {
            if let Some(&w) = writers.get(&key) {
                if w != i && dependents[w].insert(i) {
                    indegree[i] += 1;
                }
            }
        }
    }

    let mut ready: BTreeSet<(&str, usize)> = bindings
        .iter()
        .enumerate()
        .filter(|(i, _)| indegree[*i] == 0)
        .map(|(i, b)| (b.id.as_str(), i))
        .collect();
    let mut order = Vec::with_capacity(bindings.len());
    while let Some(next) = ready.pop_first() {
        let i = next.1;
        order.push(i);
        for &d in &dependents[i] {
            indegree[d] -= 1;
            if indegree[d] == 0 {
                ready.insert((bindings[d].id.as_str(), d));
            }
        }
    }

    if order.len() == bindings.len() {
        Ok(order)
    } else {
        let mut stuck: Vec<String> = (0..bindings.len())
            .filter(|i| indegree[*i] > 0)
            .map(|i| bindings[i].id.clone())
            .collect();
        stuck.sort();
        Err(stuck)
    }
}

/// Evaluates all bindings once in dependency order. State writes are visible
/// to later readers within the same pass; nothing is written back to `ctx`.
pub fn apply_bindings(
    bindings: &[Binding],
    ctx: &EvalContext<'_>,
) -> Result<BindingOutput, BindingError> {
    let order = binding_order(bindings).map_err(BindingError::DependencyCycle)?;
    let mut scope = ctx.clone();
    let mut out = BindingOutput::default();
    for i in order {
        let b = &bindings[i];
        let v = evaluate(&b.expr, &scope).map_err(|source| BindingError::Eval {
            binding: b.id.clone(),
            source,
        })?;
        match &b.target {
            BindingTarget::State { instance, var } => {
                let key = StateKey::new(instance, var);
                scope.state.insert(key.clone(), v);
                out.writes.insert(key, v);
            }
            BindingTarget::Graph { name } => {
                out.graph.insert(name.clone(), v);
            }
            BindingTarget::Text { name } => {
                out.text.insert(name.clone(), v);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::parse_expression;

    fn state(id: &str, inst: &str, var: &str, expr: &str) -> Binding {
        Binding::new(
            id,
            BindingTarget::State {
                instance: inst.into(),
                var: var.into(),
            },
            parse_expression(expr).unwrap(),
        )
    }

    #[test]
    fn writers_run_before_readers() {
        let bindings = [state("a", "x", "v", "y.v * 2"), state("b", "y", "v", "10")];
        let ctx = EvalContext::new(&[], 0.0).with_state("y", "v", 1.0);
        let out = apply_bindings(&bindings, &ctx).unwrap();
        assert_eq!(out.writes[&StateKey::new("x", "v")], 20.0);
    }

    #[test]
    fn mutual_reads_are_a_cycle() {
        let bindings = [
            state("a", "a", "x", "b.y + 1"),
            state("b", "b", "y", "a.x + 1"),
        ];
        let ctx = EvalContext::new(&[], 0.0);
        assert_eq!(
            apply_bindings(&bindings, &ctx),
            Err(BindingError::DependencyCycle(alloc::vec![
                "a".into(),
                "b".into()
            ]))
        );
    }

    #[test]
    fn self_read_uses_previous_value() {
        let bindings = [state("acc", "a", "x", "a.x + 1")];
        let ctx = EvalContext::new(&[], 0.0).with_state("a", "x", 4.0);
        assert_eq!(
            apply_bindings(&bindings, &ctx).unwrap().writes[&StateKey::new("a", "x")],
            5.0
        );
    }

    #[test]
    fn constant_graph_channel() {
        let b = Binding::new(
            "k",
            BindingTarget::Graph { name: "k".into() },
            parse_expression("42").unwrap(),
        );
        let out = apply_bindings(&[b], &EvalContext::new(&[], 7.0)).unwrap();
        assert_eq!(out.graph["k"], 42.0);
    }
}
