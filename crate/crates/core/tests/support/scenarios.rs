//! Seeded generator of valid scenarios covering every part of the model.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use twin_core::data::{import_table, parse_expression, Binding, BindingTarget};
use twin_core::process::{Condition, Instruction, Procedure, ProcessModel, SocketRef, Step};
use twin_core::scenario::{
    Aabb, EquipmentClass, InteractionKind, InteractionPoint, StateVariable, Transform, Value,
    VarKind,
};
use twin_core::ScenarioDefinition;

const TAGS: [&str; 2] = ["banana", "bnc"];

fn unit_dir(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 0.1 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

fn random_class(rng: &mut ChaCha8Rng, idx: usize) -> EquipmentClass {
    let mut c = EquipmentClass::new(
        format!("class{idx}"),
        format!("Class {idx}"),
        format!("meshes/c{idx}.obj"),
    );
    let n_vars = rng.random_range(0..4);
    for v in 0..n_vars {
        let name = format!("v{v}");
        let var = match rng.random_range(0..3) {
            0 => StateVariable::boolean(name, rng.random()),
            1 => StateVariable::enumeration(name, &["off", "low", "high"], "off"),
            _ => {
                let min = rng.random_range(-50.0..50.0);
                let max = min + rng.random_range(1.0..100.0);
                let init = rng.random_range(min..=max);
                StateVariable::scalar(name, "u", min, max, init)
            }
        };
        c = c.with_var(var);
    }
    let vars = c.state_vars.clone();
    let n_points = rng.random_range(0..4);
    for p in 0..n_points {
        let id = format!("p{p}");
        let kind = match rng.random_range(0..4) {
            0 => match vars.iter().find(|v| !v.kind.is_scalar()) {
                Some(v) => InteractionKind::Button {
                    target_var: v.name.clone(),
                    press_value: match &v.kind {
                        VarKind::Boolean => Value::Bool(true),
                        _ => Value::Enum("high".into()),
                    },
                },
                None => InteractionKind::PlacementHandle,
            },
            1 => match vars
                .iter()
                .find_map(|v| v.kind.scalar_range().map(|r| (v, r)))
            {
                Some((v, (min, max))) => {
                    let steps = ((max - min) / 0.5).floor().max(1.0);
                    InteractionKind::Dial {
                        target_var: v.name.clone(),
                        min,
                        max: min + 0.5 * steps.min(20.0),
                        step: 0.5,
                    }
                }
                None => InteractionKind::PlacementHandle,
            },
            2 => InteractionKind::CableSocket {
                compat_tag: TAGS[rng.random_range(0..TAGS.len())].into(),
            },
            _ => InteractionKind::PlacementHandle,
        };
        let mut point = InteractionPoint::new(id, kind).at(
            [
                rng.random_range(-0.2..0.2),
                rng.random_range(-0.2..0.2),
                rng.random_range(-0.2..0.2),
            ],
            unit_dir(rng),
        );
        point.radius = rng.random_range(0.01..0.1);
        c = c.with_interaction(point);
    }
    c
}

fn random_table(rng: &mut ChaCha8Rng, name: &str) -> twin_core::data::DataTable {
    let rows = rng.random_range(1..20);
    let time_indexed = rng.random();
    let mut csv = String::from(if time_indexed { "t,x,y\n" } else { "x,y,z\n" });
    for r in 0..rows {
        let first = if time_indexed {
            format!("{}", r as f64 * 0.25)
        } else {
            format!("{:.3}", rng.random_range(-10.0..10.0))
        };
        csv.push_str(&format!(
            "{first},{:.4},{:.2}\n",
            rng.random_range(-100.0..100.0),
            rng.random_range(0.0..5.0)
        ));
    }
    import_table(name, csv.as_bytes()).expect("generated csv is valid")
}

pub fn random_scenario(seed: u64) -> ScenarioDefinition {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s =
        ScenarioDefinition::new(format!("random {seed}"), format!("scenario-{seed}")).unwrap();
    s.tick_seconds = [0.1, 0.05, 0.25, 1.0 / 30.0][rng.random_range(0..4)];
    s.environment.bounds = Aabb::new([-5.0, 0.0, -5.0], [5.0, 3.0, 5.0]);
    if rng.random() {
        s.environment.mesh_ref = Some("meshes/room.stl".into());
    }
    for z in 0..rng.random_range(0..3) {
        let x = rng.random_range(-4.0..3.0);
        s.environment.named_zones.insert(
            format!("zone{z}"),
            Aabb::new([x, 0.5, -1.0], [x + 1.0, 1.5, 1.0]),
        );
    }

    for i in 0..rng.random_range(1..4) {
        let c = random_class(&mut rng, i);
        s.register_class(c).expect("generated class is valid");
    }
    let n_instances = rng.random_range(1..6);
    for i in 0..n_instances {
        let class = s.classes[rng.random_range(0..s.classes.len())].clone();
        let mut t = Transform::at([
            rng.random_range(-4.0..4.0),
            rng.random_range(0.0..2.5),
            rng.random_range(-4.0..4.0),
        ]);
        t.rotation = [
            rng.random_range(-180.0..180.0),
            0.0,
            rng.random_range(-90.0..90.0),
        ];
        t.scale = [rng.random_range(0.5..2.0); 3];
        let id = format!("inst{i}");
        s.instantiate(&class.id, &id, t)
            .expect("generated instance is valid");
        if let Some(v) = class.state_vars.iter().find(|v| v.kind.is_scalar()) {
            if rng.random() {
                let (lo, hi) = v.kind.scalar_range().unwrap();
                let inst = s.instances.last_mut().unwrap();
                inst.state_overrides
                    .insert(v.name.clone(), Value::Scalar(rng.random_range(lo..=hi)));
            }
        }
    }

    for k in 0..rng.random_range(0..3) {
        let name = format!("table{k}");
        s.tables.push(random_table(&mut rng, &name));
    }

    let mut b = 0;
    for t in s.tables.clone() {
        let col = &t.columns[1].name;
        s.bindings.push(Binding::new(
            format!("b{b}"),
            BindingTarget::Graph {
                name: format!("g{b}"),
            },
            parse_expression(&format!("{}.{col} * 2 + t", t.name)).unwrap(),
        ));
        b += 1;
    }
    let scalar_targets: Vec<(String, String, f64, f64)> = s
        .instances
        .iter()
        .flat_map(|inst| {
            let class = s.class(&inst.class_id).unwrap();
            class.state_vars.iter().filter_map(move |v| {
                v.kind
                    .scalar_range()
                    .map(|(lo, hi)| (inst.id.clone(), v.name.clone(), lo, hi))
            })
        })
        .collect();
    if let Some((inst, var, lo, hi)) = scalar_targets.first() {
        s.bindings.push(Binding::new(
            format!("b{b}"),
            BindingTarget::State {
                instance: inst.clone(),
                var: var.clone(),
            },
            parse_expression(&format!("clamp({lo} + t * 3, {lo}, {hi})")).unwrap(),
        ));
        s.bindings.push(Binding::new(
            format!("b{}", b + 1),
            BindingTarget::Text {
                name: "readout".into(),
            },
            parse_expression(&format!("{inst}.{var} / 2")).unwrap(),
        ));
    }

    if rng.random_range(0..4) > 0 {
        s.processes.push(random_process(&mut rng, &s));
    }
    s
}

fn random_process(rng: &mut ChaCha8Rng, s: &ScenarioDefinition) -> ProcessModel {
    let mut next_id = 0;
    let mut fresh = |prefix: &str| {
        next_id += 1;
        format!("{prefix}{next_id}")
    };
    let mut conditions: Vec<(Vec<String>, Condition)> = vec![(
        vec![],
        Condition::Wait {
            seconds: rng.random_range(1..20) as f64 * 0.5,
        },
    )];
    for inst in &s.instances {
        let class = s.class(&inst.class_id).unwrap();
        for v in &class.state_vars {
            let c = match &v.kind {
                VarKind::Boolean => Condition::StateEquals {
                    instance: inst.id.clone(),
                    var: v.name.clone(),
                    value: Value::Bool(true),
                },
                VarKind::Enum { .. } => Condition::StateEquals {
                    instance: inst.id.clone(),
                    var: v.name.clone(),
                    value: Value::Enum("high".into()),
                },
                VarKind::Scalar { min, max, .. } => Condition::StateInRange {
                    instance: inst.id.clone(),
                    var: v.name.clone(),
                    lo: *min,
                    hi: (min + max) / 2.0,
                },
            };
            conditions.push((vec![inst.id.clone()], c));
        }
        for z in s.environment.named_zones.keys() {
            conditions.push((
                vec![inst.id.clone()],
                Condition::Placed {
                    instance: inst.id.clone(),
                    zone: z.clone(),
                    tolerance: 0.05,
                },
            ));
        }
    }
    let sockets: Vec<SocketRef> = s
        .instances
        .iter()
        .flat_map(|inst| {
            let class = s.class(&inst.class_id).unwrap();
            class
                .interactions
                .iter()
                .filter(|p| matches!(p.kind, InteractionKind::CableSocket { .. }))
                .map(move |p| SocketRef::new(&inst.id, &p.id))
        })
        .collect();
    if sockets.len() >= 2 {
        conditions.push((
            vec![sockets[0].instance.clone(), sockets[1].instance.clone()],
            Condition::Connected {
                a: sockets[0].clone(),
                b: sockets[1].clone(),
            },
        ));
    }

    let pick = |rng: &mut ChaCha8Rng, fresh: &mut dyn FnMut(&str) -> String| {
        let (refs, c) = conditions[rng.random_range(0..conditions.len())].clone();
        let c = if !refs.is_empty() && rng.random_range(0..5) == 0 {
            Condition::Any {
                conditions: vec![c.clone(), Condition::Wait { seconds: 3.0 }],
            }
        } else {
            c
        };
        Step::Instruction(Instruction {
            id: fresh("i"),
            text: format!("do step {}", rng.random_range(0..100)),
            equipment_refs: refs,
            condition: c,
        })
    };

    let mut root_steps = Vec::new();
    for _ in 0..rng.random_range(1..4) {
        if rng.random_range(0..3) == 0 {
            let steps = (0..rng.random_range(1..4))
                .map(|_| pick(rng, &mut fresh))
                .collect();
            root_steps.push(Step::Procedure(Procedure {
                id: fresh("p"),
                title: "nested".into(),
                ordered: rng.random(),
                steps,
            }));
        } else {
            root_steps.push(pick(rng, &mut fresh));
        }
    }
    ProcessModel::new(Procedure {
        id: "root".into(),
        title: "Random procedure".into(),
        ordered: rng.random(),
        steps: root_steps,
    })
}
