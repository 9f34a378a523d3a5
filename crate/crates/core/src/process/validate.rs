use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;

use super::{Condition, Procedure, ProcessModel, SocketRef, Step};
use crate::report::{Issue, IssueCode, ValidationReport};
use crate::scenario::{InteractionKind, ScenarioDefinition};

/// Checks a process model against the scenario it will run in. Every step of
/// a model is reachable from its root by construction, so the checks are
/// about ids, references and condition parameters.
pub fn validate_process(p: &ProcessModel, s: &ScenarioDefinition) -> ValidationReport {
    let mut report = ValidationReport::new();
    let base = format!("processes[{}]", p.id);
    if p.id != p.root.id {
        report.push(Issue::warning(
            IssueCode::DuplicateId,
            &base,
            "process id differs from its root procedure id",
        ));
    }
    let mut ids = BTreeSet::new();
    check_procedure(&p.root, &base, s, &mut ids, &mut report);
    report
}

fn check_procedure<'a>(
    proc: &'a Procedure,
    base: &str,
    s: &ScenarioDefinition,
    ids: &mut BTreeSet<&'a str>,
    report: &mut ValidationReport,
) {
    let path = format!("{base}.steps[{}]", proc.id);
    check_id(&proc.id, &path, ids, report);
    if proc.steps.is_empty() {
        report.push(Issue::error(
            IssueCode::EmptyProcedure,
            &path,
            "procedure has no steps",
        ));
    }
    for step in &proc.steps {
        match step {
            Step::Procedure(child) => check_procedure(child, base, s, ids, report),
            Step::Instruction(ins) => {
                let ipath = format!("{base}.steps[{}]", ins.id);
                check_id(&ins.id, &ipath, ids, report);
                let is_wait = matches!(ins.condition, Condition::Wait { .. });
                if ins.equipment_refs.is_empty() && !is_wait {
                    report.push(Issue::error(
                        IssueCode::MissingEquipment,
                        &ipath,
                        "instruction refers to no equipment",
                    ));
                }
                for r in &ins.equipment_refs {
                    if s.instance(r).is_none() {
                        report.push(Issue::error(
                            IssueCode::UnresolvedEquipmentRef,
                            format!("{ipath}.equipment_refs"),
                            format!("instance `{r}` does not exist"),
                        ));
                    }
                }
                check_condition(&ins.condition, &format!("{ipath}.condition"), s, report);
            }
        }
    }
}

fn check_id<'a>(
    id: &'a str,
    path: &str,
    ids: &mut BTreeSet<&'a str>,
    report: &mut ValidationReport,
) {
    if id.is_empty() {
        report.push(Issue::error(
            IssueCode::DuplicateStepId,
            path,
            "step id is empty",
        ));
    } else if !ids.insert(id) {
        report.push(Issue::error(
            IssueCode::DuplicateStepId,
            path,
            format!("step id `{id}` is used more than once in the model"),
        ));
    }
}

fn unresolved_instance(instance: &str, path: &str) -> Issue {
    Issue::error(
        IssueCode::UnresolvedEquipmentRef,
        path,
        format!("instance `{instance}` does not exist"),
    )
}

fn check_condition(
    c: &Condition,
    path: &str,
    s: &ScenarioDefinition,
    report: &mut ValidationReport,
) {
    let invalid = |msg: String| Issue::error(IssueCode::InvalidCondition, path, msg);
    match c {
        Condition::StateEquals {
            instance,
            var,
            value,
        } => {
            if s.instance(instance).is_none() {
                report.push(unresolved_instance(instance, path));
            } else {
                match s.state_var(instance, var) {
                    None => report.push(Issue::error(
                        IssueCode::UnresolvedVar,
                        path,
                        format!("`{instance}` has no variable `{var}`"),
                    )),
                    Some(v) if !v.kind.accepts(value) => report.push(invalid(format!(
                        "`{value}` is not a valid {} value for `{instance}.{var}`",
                        v.kind.name()
                    ))),
                    Some(_) => {}
                }
            }
        }
        Condition::StateInRange {
            instance,
            var,
            lo,
            hi,
        } => {
            if s.instance(instance).is_none() {
                report.push(unresolved_instance(instance, path));
            } else {
                match s.state_var(instance, var) {
                    None => report.push(Issue::error(
                        IssueCode::UnresolvedVar,
                        path,
                        format!("`{instance}` has no variable `{var}`"),
                    )),
                    Some(v) if !v.kind.is_scalar() => {
                        report.push(invalid(format!("`{instance}.{var}` is not scalar")))
                    }
                    Some(_) => {}
                }
            }
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                report.push(invalid(format!("range [{lo}, {hi}] is invalid")));
            }
        }
        Condition::Connected { a, b } => {
            for sock in [a, b] {
                check_socket(sock, path, s, report);
            }
            if a == b {
                report.push(invalid(String::from("a socket cannot connect to itself")));
            }
        }
        Condition::Placed {
            instance,
            zone,
            tolerance,
        } => {
            if s.instance(instance).is_none() {
                report.push(unresolved_instance(instance, path));
            }
            if s.zone(zone).is_none() {
                report.push(Issue::error(
                    IssueCode::UnresolvedZone,
                    path,
                    format!("zone `{zone}` does not exist"),
                ));
            }
            if !(tolerance.is_finite() && *tolerance >= 0.0) {
                report.push(invalid(format!(
                    "tolerance must be non-negative, found {tolerance}"
                )));
            }
        }
        Condition::Wait { seconds } => {
            if !(seconds.is_finite() && *seconds > 0.0) {
                report.push(invalid(format!("wait must be positive, found {seconds}")));
            }
        }
        Condition::All { conditions } | Condition::Any { conditions } => {
            if conditions.is_empty() {
                report.push(invalid(String::from(
                    "all/any needs at least one condition",
                )));
            }
            for (i, inner) in conditions.iter().enumerate() {
                check_condition(inner, &format!("{path}[{i}]"), s, report);
            }
        }
    }
}

fn check_socket(
    sock: &SocketRef,
    path: &str,
    s: &ScenarioDefinition,
    report: &mut ValidationReport,
) {
    let Some(class) = s.instance_class(&sock.instance) else {
        if s.instance(&sock.instance).is_none() {
            report.push(unresolved_instance(&sock.instance, path));
        }
        return;
    };
    let is_socket = class
        .interaction(&sock.socket)
        .is_some_and(|p| matches!(p.kind, InteractionKind::CableSocket { .. }));
    if !is_socket {
        report.push(Issue::error(
            IssueCode::UnresolvedSocket,
            path,
            format!("`{sock}` is not a cable socket"),
        ));
    }
}
