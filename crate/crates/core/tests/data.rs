mod support;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use twin_core::data::{
    apply_bindings, check_binding, import_table, parse_expression, select_columns, Binding,
    BindingError, BindingTarget, DataError, EvalContext,
};
use twin_core::runtime::StateKey;
use twin_core::IssueCode;

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

fn graph(id: &str, name: &str, expr: &str) -> Binding {
    Binding::new(
        id,
        BindingTarget::Graph { name: name.into() },
        parse_expression(expr).unwrap(),
    )
}

#[test]
fn import_examples() {
    let t = import_table("d", b"t,speed\n0,0\n1,100").unwrap();
    assert_eq!(t.columns.len(), 2);
    assert_eq!(t.row_count, 2);
    assert_eq!(t.value("speed", 1), Some(100.0));

    assert!(matches!(
        import_table("d", b"a,b\n1"),
        Err(DataError::RaggedRows { .. })
    ));
    assert_eq!(
        import_table("d", b"a\nx"),
        Err(DataError::NonNumericCell {
            row: 1,
            column: "a".into()
        })
    );
    assert_eq!(import_table("d", b""), Err(DataError::EmptyInput));
    assert_eq!(import_table("d", b"a,b\n"), Err(DataError::EmptyInput));
}

#[test]
fn import_handles_quotes_and_crlf() {
    let t = import_table("d", b"\"t\",\"x y\"\r\n0,\"1.5\"\r\n1,2e1\r\n").unwrap();
    assert_eq!(t.column("x y").unwrap().values, vec![1.5, 20.0]);
}

#[test]
fn select_examples() {
    let t = import_table("d", b"a,b,c,d,speed\n1,2,3,4,5\n").unwrap();
    assert_eq!(select_columns(&t, &["speed"]).unwrap().names.len(), 1);
    assert_eq!(select_columns(&t, &["a", "b", "c"]).unwrap().names.len(), 3);
    assert_eq!(
        select_columns(&t, &["nope"]),
        Err(DataError::UnknownColumn("nope".into()))
    );
    assert_eq!(select_columns(&t, &[]), Err(DataError::EmptySelection));
}

#[test]
fn check_binding_examples() {
    let s = support::fixture();
    assert!(check_binding(&graph("g", "speed", "run_data.speed_rpm"), &s).is_empty());

    let issues = check_binding(&state("p", "psu1", "power", "1"), &s);
    assert_eq!(
        issues.iter().map(|i| i.code).collect::<Vec<_>>(),
        vec![IssueCode::TypeMismatch]
    );

    let issues = check_binding(&graph("g", "ghost", "ghost.var"), &s);
    assert_eq!(
        issues.iter().map(|i| i.code).collect::<Vec<_>>(),
        vec![IssueCode::UnresolvedRef]
    );
}

#[test]
fn fixture_binding_reads_the_cursor_row() {
    let s = support::fixture();
    let table = s.table("run_data").unwrap();
    let speeds = support::csv_column("speed_rpm");
    let b = state("m", "motor1", "speed", "run_data.speed_rpm");
    for cursor in [0, 3, 17, 60] {
        let ctx = EvalContext::new(&s.tables, 0.0).with_cursor("run_data", cursor);
        let out = apply_bindings(std::slice::from_ref(&b), &ctx).unwrap();
        assert_eq!(
            out.writes[&StateKey::new("motor1", "speed")],
            speeds[cursor]
        );
    }
    assert_eq!(table.row_count, speeds.len());
}

#[test]
fn time_cursor_rule() {
    let t = import_table("d", b"t,v\n0,0\n0.5,1\n1.5,2\n").unwrap();
    assert_eq!(t.cursor(0, 0.0), 0);
    assert_eq!(t.cursor(4, 0.4), 0);
    assert_eq!(t.cursor(5, 0.5), 1);
    assert_eq!(t.cursor(14, 1.4), 1);
    assert_eq!(t.cursor(99, 9.9), 2);
    let u = import_table("d", b"v\n1\n2\n3\n").unwrap();
    assert_eq!(u.cursor(0, 0.0), 0);
    assert_eq!(u.cursor(2, 0.2), 2);
    assert_eq!(u.cursor(50, 5.0), 2);
}

#[test]
fn cycle_is_rejected() {
    let bindings = [
        state("a", "a", "x", "b.y + 1"),
        state("b", "b", "y", "a.x + 1"),
    ];
    assert!(matches!(
        apply_bindings(&bindings, &EvalContext::new(&[], 0.0)),
        Err(BindingError::DependencyCycle(_))
    ));
}

#[test]
fn constant_channel_every_tick() {
    let b = graph("k", "k", "42");
    for tick in 0..20 {
        let ctx = EvalContext::new(&[], tick as f64 * 0.1);
        assert_eq!(
            apply_bindings(std::slice::from_ref(&b), &ctx)
                .unwrap()
                .graph["k"],
            42.0
        );
    }
}

#[test]
fn declaration_order_does_not_matter() {
    let tables = [import_table("run", b"t,x\n0,1\n1,2\n2,4\n").unwrap()];
    let base = vec![
        state("s1", "m", "a", "run.x * 10"),
        state("s2", "m", "b", "m.a + 1"),
        state("s3", "m", "c", "m.b * m.a"),
        state("s4", "n", "d", "t + 3"),
        graph("g1", "speed", "m.c - n.d"),
        graph("g2", "other", "run.x"),
        Binding::new(
            "x1",
            BindingTarget::Text { name: "txt".into() },
            parse_expression("m.b / 2").unwrap(),
        ),
    ];
    let ctx = EvalContext::new(&tables, 1.2)
        .with_cursor("run", 1)
        .with_state("m", "a", 0.0)
        .with_state("m", "b", 0.0)
        .with_state("m", "c", 0.0)
        .with_state("n", "d", 0.0);
    let reference = apply_bindings(&base, &ctx).unwrap();
    assert_eq!(reference.writes[&StateKey::new("m", "c")], 21.0 * 20.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let mut shuffled = base.clone();
        shuffled.shuffle(&mut rng);
        assert_eq!(apply_bindings(&shuffled, &ctx).unwrap(), reference);
    }
}
