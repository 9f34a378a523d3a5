use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{
    EquipmentClass, InteractionKind, InteractionPoint, ScenarioDefinition, StateVariable,
    Transform, Value, VarKind, FORMAT_VERSION,
};
use crate::data::{self, BindingTarget};
use crate::math;
use crate::process;
use crate::report::{Issue, IssueCode, ValidationReport};

const DIRECTION_NORM_TOLERANCE: f64 = 1e-6;
const DIAL_GRID_TOLERANCE: f64 = 1e-9;

/// Checks every structural invariant of the scenario. Problems are reported,
/// never raised; an error-free report means the scenario can be loaded into
/// a session.
pub fn validate(s: &ScenarioDefinition) -> ValidationReport {
    let mut report = ValidationReport::new();

    if s.format_version != FORMAT_VERSION {
        report.push(Issue::error(
            IssueCode::UnsupportedVersion,
            "format_version",
            format!("expected {FORMAT_VERSION}, found {}", s.format_version),
        ));
    }
    if s.name.trim().is_empty() {
        report.push(Issue::error(
            IssueCode::EmptyName,
            "name",
            "scenario name is empty",
        ));
    }
    if !(s.tick_seconds.is_finite() && s.tick_seconds > 0.0) {
        report.push(Issue::error(
            IssueCode::InvalidTickSeconds,
            "tick_seconds",
            format!("tick_seconds must be positive, found {}", s.tick_seconds),
        ));
    }

    check_environment(s, &mut report);

    report.extend(duplicates(
        "classes",
        s.classes.iter().map(|c| c.id.as_str()),
    ));
    report.extend(duplicates(
        "instances",
        s.instances.iter().map(|i| i.id.as_str()),
    ));
    report.extend(duplicates(
        "tables",
        s.tables.iter().map(|t| t.name.as_str()),
    ));
    report.extend(duplicates(
        "bindings",
        s.bindings.iter().map(|b| b.id.as_str()),
    ));
    report.extend(duplicates(
        "processes",
        s.processes.iter().map(|p| p.id.as_str()),
    ));

    let table_names: BTreeSet<&str> = s.tables.iter().map(|t| t.name.as_str()).collect();
    for inst in &s.instances {
        if table_names.contains(inst.id.as_str()) {
            report.push(Issue::error(
                IssueCode::AmbiguousRef,
                format!("instances[{}]", inst.id),
                "instance id collides with a table name; expression references would be ambiguous",
            ));
        }
    }

    for class in &s.classes {
        report.extend(check_class(class));
    }

    for inst in &s.instances {
        let path = format!("instances[{}]", inst.id);
        if let Some(issue) = check_transform(&path, &inst.transform) {
            report.push(issue);
        }
        match s.class(&inst.class_id) {
            Some(class) => report.extend(check_overrides(&path, class, &inst.state_overrides)),
            None => report.push(Issue::error(
                IssueCode::UnresolvedClassRef,
                format!("{path}.class_id"),
                format!("class `{}` does not exist", inst.class_id),
            )),
        }
    }

    for table in &s.tables {
        report.extend(data::check_table(table));
    }

    check_bindings(s, &mut report);

    for p in &s.processes {
        report.extend(process::validate_process(p, s).issues);
    }

    report
}

fn check_environment(s: &ScenarioDefinition, report: &mut ValidationReport) {
    let env = &s.environment;
    if !(env.bounds.is_finite() && env.bounds.has_positive_extent()) {
        report.push(Issue::error(
            IssueCode::InvalidEnvironment,
            "environment.bounds",
            "bounds must be finite with positive extent on every axis",
        ));
    }
    for (id, zone) in &env.named_zones {
        let path = format!("environment.named_zones[{id}]");
        if !zone.is_finite() || (0..3).any(|i| zone.min[i] > zone.max[i]) {
            report.push(Issue::error(
                IssueCode::InvalidEnvironment,
                path,
                "zone box is malformed",
            ));
        } else if !env.bounds.contains_box(zone) {
            report.push(Issue::error(
                IssueCode::ZoneOutOfBounds,
                path,
                "zone extends outside the environment bounds",
            ));
        }
    }
}

fn duplicates<'a>(collection: &str, ids: impl Iterator<Item = &'a str>) -> Vec<Issue> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for id in ids {
        if id.is_empty() {
            out.push(Issue::error(IssueCode::DuplicateId, collection, "empty id"));
        } else if !seen.insert(id) {
            out.push(Issue::error(
                IssueCode::DuplicateId,
                format!("{collection}[{id}]"),
                format!("id `{id}` is used more than once"),
            ));
        }
    }
    out
}

pub(crate) fn check_class(class: &EquipmentClass) -> Vec<Issue> {
    let path = format!("classes[{}]", class.id);
    let mut out = Vec::new();
    if class.id.is_empty() {
        out.push(Issue::error(
            IssueCode::DuplicateId,
            &path,
            "class id is empty",
        ));
    }

    let mut names = BTreeSet::new();
    for var in &class.state_vars {
        if !names.insert(var.name.as_str()) {
            out.push(Issue::error(
                IssueCode::InvalidStateVariable,
                format!("{path}.state_vars[{}]", var.name),
                "state variable name is not unique",
            ));
        }
        out.extend(check_state_var(&path, var));
    }

    let mut ids = BTreeSet::new();
    for p in &class.interactions {
        if !ids.insert(p.id.as_str()) {
            out.push(Issue::error(
                IssueCode::InvalidInteraction,
                format!("{path}.interactions[{}]", p.id),
                "interaction id is not unique",
            ));
        }
        out.extend(check_interaction(class, p));
    }
    out
}

fn check_state_var(class_path: &str, var: &StateVariable) -> Vec<Issue> {
    let path = format!("{class_path}.state_vars[{}]", var.name);
    let mut out = Vec::new();
    let mut bad = |msg: String| out.push(Issue::error(IssueCode::InvalidStateVariable, &path, msg));
    if var.name.is_empty() || var.name.contains('.') {
        bad(String::from(
            "variable name must be non-empty and contain no '.'",
        ));
    }
    match &var.kind {
        VarKind::Boolean => {}
        VarKind::Enum { values } => {
            let unique: BTreeSet<&String> = values.iter().collect();
            if values.is_empty() || unique.len() != values.len() {
                bad(String::from("enum values must be non-empty and unique"));
            }
        }
        VarKind::Scalar { min, max, .. } => {
            if !(min.is_finite() && max.is_finite() && min <= max) {
                bad(format!("scalar range [{min}, {max}] is invalid"));
            }
        }
    }
    if !var.kind.accepts(&var.initial) {
        bad(format!(
            "initial value `{}` is not a valid {} value",
            var.initial,
            var.kind.name()
        ));
    }
    out
}

pub(crate) fn check_interaction(class: &EquipmentClass, p: &InteractionPoint) -> Vec<Issue> {
    let path = format!("classes[{}].interactions[{}]", class.id, p.id);
    let mut problems: Vec<String> = Vec::new();

    if p.id.is_empty() {
        problems.push(String::from("interaction id is empty"));
    }
    if !(p.radius.is_finite() && p.radius > 0.0) {
        problems.push(format!("radius must be positive, found {}", p.radius));
    }
    if !p.local_position.iter().all(|v| v.is_finite()) {
        problems.push(String::from("local_position is not finite"));
    }
    let d = p.local_direction;
    let norm = math::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    if !(norm.is_finite() && (norm - 1.0).abs() <= DIRECTION_NORM_TOLERANCE) {
        problems.push(format!(
            "local_direction must be a unit vector, norm is {norm}"
        ));
    }

    match &p.kind {
        InteractionKind::Button {
            target_var,
            press_value,
        } => match class.state_var(target_var) {
            None => problems.push(format!(
                "button target `{target_var}` is not a variable of the class"
            )),
            Some(var) if !var.kind.accepts(press_value) => problems.push(format!(
                "press value `{press_value}` is not valid for {} variable `{target_var}`",
                var.kind.name()
            )),
            Some(_) => {}
        },
        InteractionKind::Dial {
            target_var,
            min,
            max,
            step,
        } => {
            let finite = min.is_finite() && max.is_finite() && step.is_finite();
            if !finite || min >= max {
                problems.push(format!("dial requires min < max, found [{min}, {max}]"));
            }
            if !(step.is_finite() && *step > 0.0) {
                problems.push(format!("dial step must be positive, found {step}"));
            } else if finite && min < max {
                let q = (max - min) / step;
                if ((q - math::round(q)) * step).abs() > DIAL_GRID_TOLERANCE {
                    problems.push(format!(
                        "dial range {}..{} is not a multiple of step {step}",
                        min, max
                    ));
                }
            }
            match class.state_var(target_var).map(|v| &v.kind) {
                None => problems.push(format!(
                    "dial target `{target_var}` is not a variable of the class"
                )),
                Some(VarKind::Scalar {
                    min: lo, max: hi, ..
                }) => {
                    if min < lo || max > hi {
                        problems.push(format!(
                            "dial range [{min}, {max}] exceeds variable range [{lo}, {hi}]"
                        ));
                    }
                }
                Some(kind) => problems.push(format!(
                    "dial target `{target_var}` is {}, not scalar",
                    kind.name()
                )),
            }
        }
        InteractionKind::CableSocket { compat_tag } => {
            if compat_tag.is_empty() {
                problems.push(String::from("cable socket compat_tag is empty"));
            }
        }
        InteractionKind::PlacementHandle => {}
    }

    problems
        .into_iter()
        .map(|m| Issue::error(IssueCode::InvalidInteraction, &path, m))
        .collect()
}

pub(crate) fn check_transform(path: &str, t: &Transform) -> Option<Issue> {
    let finite = t
        .position
        .iter()
        .chain(&t.rotation)
        .chain(&t.scale)
        .all(|v| v.is_finite());
    let positive = t.scale.iter().all(|s| *s > 0.0);
    (!finite || !positive).then(|| {
        Issue::error(
            IssueCode::BadTransform,
            format!("{path}.transform"),
            "transform must be finite with strictly positive scale",
        )
    })
}

pub(crate) fn check_overrides(
    path: &str,
    class: &EquipmentClass,
    overrides: &BTreeMap<String, Value>,
) -> Vec<Issue> {
    let mut out = Vec::new();
    for (name, value) in overrides {
        let p = format!("{path}.state_overrides[{name}]");
        match class.state_var(name) {
            None => out.push(Issue::error(
                IssueCode::InvalidOverride,
                p,
                format!("class `{}` declares no variable `{name}`", class.id),
            )),
            Some(var) if !var.kind.accepts(value) => out.push(Issue::error(
                IssueCode::InvalidOverride,
                p,
                format!("`{value}` is not a valid {} value", var.kind.name()),
            )),
            Some(_) => {}
        }
    }
    out
}

fn check_bindings(s: &ScenarioDefinition, report: &mut ValidationReport) {
    let mut binding_errors = false;
    for b in &s.bindings {
        let issues = data::check_binding(b, s);
        binding_errors |= !issues.is_empty();
        report.extend(issues);
    }

    let mut channels = BTreeSet::new();
    let mut targets = BTreeSet::new();
    for b in &s.bindings {
        let path = format!("bindings[{}].target", b.id);
        match &b.target {
            BindingTarget::Graph { name } | BindingTarget::Text { name } => {
                if !channels.insert(name.as_str()) {
                    binding_errors = true;
                    report.push(Issue::error(
                        IssueCode::DuplicateChannel,
                        path,
                        format!("channel `{name}` is bound more than once"),
                    ));
                }
            }
            BindingTarget::State { instance, var } => {
                if !targets.insert((instance.as_str(), var.as_str())) {
                    binding_errors = true;
                    report.push(Issue::error(
                        IssueCode::DuplicateTarget,
                        path,
                        format!("`{instance}.{var}` is written by more than one binding"),
                    ));
                }
            }
        }
    }

    if !binding_errors {
        if let Err(cycle) = data::binding_order(&s.bindings) {
            report.push(Issue::error(
                IssueCode::DependencyCycle,
                "bindings",
                format!(
                    "bindings depend on each other cyclically: {}",
                    cycle.join(", ")
                ),
            ));
        }
    }
}
