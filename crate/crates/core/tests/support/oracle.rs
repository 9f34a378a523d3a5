//! A second, deliberately naive expression implementation: its own tree,
//! its own text renderer and a direct recursive evaluator. Shares nothing
//! with the library except the surface syntax. Only `compare` at the
//! bottom calls into the library.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twin_core::data::{evaluate, import_table, parse_expression, EvalContext, EvalError};

#[derive(Debug, Clone)]
pub enum Node {
    Lit(f64),
    Time,
    Var(String, String),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Fn(&'static str, Vec<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Failure {
    DivByZero,
    /// log of a non-positive number, clamp with lo > hi, or a non-finite
    /// result.
    Domain,
    Unbound,
}

pub struct Env {
    pub vars: HashMap<(String, String), f64>,
    pub t: f64,
}

fn check(v: f64) -> Result<f64, Failure> {
    if v.is_nan() || v.is_infinite() {
        Err(Failure::Domain)
    } else {
        Ok(v)
    }
}

pub fn eval(n: &Node, env: &Env) -> Result<f64, Failure> {
    match n {
        Node::Lit(v) => Ok(*v),
        Node::Time => Ok(env.t),
        Node::Var(a, b) => env
            .vars
            .get(&(a.clone(), b.clone()))
            .copied()
            .ok_or(Failure::Unbound),
        Node::Neg(x) => Ok(-eval(x, env)?),
        Node::Add(a, b) => {
            let x = eval(a, env)?;
            check(x + eval(b, env)?)
        }
        Node::Sub(a, b) => {
            let x = eval(a, env)?;
            check(x - eval(b, env)?)
        }
        Node::Mul(a, b) => {
            let x = eval(a, env)?;
            check(x * eval(b, env)?)
        }
        Node::Div(a, b) => {
            let x = eval(a, env)?;
            let y = eval(b, env)?;
            if y == 0.0 {
                return Err(Failure::DivByZero);
            }
            check(x / y)
        }
        Node::Pow(a, b) => {
            let x = eval(a, env)?;
            check(x.powf(eval(b, env)?))
        }
        Node::Fn(name, args) => {
            let mut vals = Vec::new();
            for a in args {
                vals.push(eval(a, env)?);
            }
            let v = match *name {
                "min" => {
                    let mut m = vals[0];
                    for v in &vals[1..] {
                        if *v < m {
                            m = *v;
                        }
                    }
                    m
                }
                "max" => {
                    let mut m = vals[0];
                    for v in &vals[1..] {
                        if *v > m {
                            m = *v;
                        }
                    }
                    m
                }
                "abs" => vals[0].abs(),
                "sin" => vals[0].sin(),
                "cos" => vals[0].cos(),
                "exp" => vals[0].exp(),
                "log" => {
                    if vals[0] <= 0.0 {
                        return Err(Failure::Domain);
                    }
                    vals[0].ln()
                }
                "clamp" => {
                    let (x, lo, hi) = (vals[0], vals[1], vals[2]);
                    if lo > hi {
                        return Err(Failure::Domain);
                    }
                    if x < lo {
                        lo
                    } else if x > hi {
                        hi
                    } else {
                        x
                    }
                }
                other => panic!("oracle has no function {other}"),
            };
            check(v)
        }
    }
}

/// Renders with redundant parentheses everywhere and a few literal spellings
/// the grammar allows.
pub fn render(n: &Node, rng: &mut ChaCha8Rng) -> String {
    match n {
        Node::Lit(v) => {
            let plain = format!("{v}");
            match rng.random_range(0..4) {
                0 if *v != 0.0 => format!("{v:e}"),
                1 => format!("{v:E}"),
                _ => plain,
            }
        }
        Node::Time => "t".to_string(),
        Node::Var(a, b) => format!("{a}.{b}"),
        Node::Neg(x) => format!("(-{})", render(x, rng)),
        Node::Add(a, b) => format!("({} + {})", render(a, rng), render(b, rng)),
        Node::Sub(a, b) => format!("({}-{})", render(a, rng), render(b, rng)),
        Node::Mul(a, b) => format!("({} * {})", render(a, rng), render(b, rng)),
        Node::Div(a, b) => format!("({} / {})", render(a, rng), render(b, rng)),
        Node::Pow(a, b) => format!("({} ^ {})", render(a, rng), render(b, rng)),
        Node::Fn(name, args) => {
            let parts: Vec<String> = args.iter().map(|a| render(a, rng)).collect();
            format!("{name}({})", parts.join(", "))
        }
    }
}

/// Depth as counted by the library: leaves are 1, each operator adds 1.
pub fn depth(n: &Node) -> usize {
    match n {
        Node::Lit(_) | Node::Time | Node::Var(..) => 1,
        Node::Neg(x) => 1 + depth(x),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
            1 + depth(a).max(depth(b))
        }
        Node::Fn(_, args) => 1 + args.iter().map(depth).max().unwrap_or(0),
    }
}

pub const VARS: [(&str, &str); 4] = [
    ("motor1", "speed"),
    ("psu1", "voltage"),
    ("run", "x"),
    ("run", "y"),
];

fn leaf(rng: &mut ChaCha8Rng) -> Node {
    match rng.random_range(0..10) {
        0 => Node::Lit(0.0),
        1..=4 => {
            let whole = rng.random_range(0..50) as f64;
            let frac = rng.random_range(0..4) as f64 * 0.25;
            Node::Lit(whole + frac)
        }
        5 => Node::Time,
        _ => {
            let (a, b) = VARS[rng.random_range(0..VARS.len())];
            Node::Var(a.into(), b.into())
        }
    }
}

/// Random tree of depth at most `max_depth` (at least 1).
pub fn random_node(rng: &mut ChaCha8Rng, max_depth: usize) -> Node {
    if max_depth <= 1 || rng.random_range(0..10) < 2 {
        return leaf(rng);
    }
    let sub = |rng: &mut ChaCha8Rng| Box::new(random_node(rng, max_depth - 1));
    match rng.random_range(0..12) {
        0 => Node::Neg(sub(rng)),
        1 => Node::Add(sub(rng), sub(rng)),
        2 => Node::Sub(sub(rng), sub(rng)),
        3 => Node::Mul(sub(rng), sub(rng)),
        4 | 5 => Node::Div(sub(rng), sub(rng)),
        6 => {
            // keep exponents small so most powers stay finite
            let e = rng.random_range(0..4) as f64 * 0.5;
            Node::Pow(sub(rng), Box::new(Node::Lit(e)))
        }
        7 => {
            let n = rng.random_range(1..4);
            let name = if rng.random() { "min" } else { "max" };
            Node::Fn(
                name,
                (0..n).map(|_| random_node(rng, max_depth - 1)).collect(),
            )
        }
        8 => Node::Fn(
            "clamp",
            (0..3).map(|_| random_node(rng, max_depth - 1)).collect(),
        ),
        9 => Node::Fn("log", vec![random_node(rng, max_depth - 1)]),
        10 => {
            let name = ["abs", "sin", "cos"][rng.random_range(0..3)];
            Node::Fn(name, vec![random_node(rng, max_depth - 1)])
        }
        _ if max_depth >= 3 => {
            let arg = random_node(rng, max_depth - 2);
            Node::Fn(
                "exp",
                vec![Node::Div(Box::new(arg), Box::new(Node::Lit(50.0)))],
            )
        }
        _ => Node::Fn("exp", vec![leaf(rng)]),
    }
}

pub fn relative_close(a: f64, b: f64, rel: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= rel * a.abs().max(b.abs())
}

pub struct Case {
    pub text: String,
    pub oracle: Result<f64, Failure>,
    pub lib: Result<f64, EvalError>,
}

/// Runs `n` random expressions through both evaluators. Returns the
/// agreeing count, the division-by-zero count and the disagreements.
pub fn compare(n: usize, seed: u64, rel: f64) -> (usize, usize, Vec<Case>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let csv = b"x,y\n1.5,-2\n3.25,0\n-7,4.5\n";
    let tables = [import_table("run", csv).unwrap()];
    let mut failures = Vec::new();
    let mut div_zero = 0;
    let mut ok = 0;
    for i in 0..n {
        let speed = (i % 37) as f64 * 12.5;
        let voltage = (i % 13) as f64 * 0.5;
        let row = i % 3;
        let clock = (i % 50) as f64 * 0.1;
        let node = random_node(&mut rng, 6);
        assert!(depth(&node) <= 6);
        let text = render(&node, &mut rng);

        let mut vars = HashMap::new();
        vars.insert(("motor1".into(), "speed".into()), speed);
        vars.insert(("psu1".into(), "voltage".into()), voltage);
        vars.insert(("run".into(), "x".into()), [1.5, 3.25, -7.0][row]);
        vars.insert(("run".into(), "y".into()), [-2.0, 0.0, 4.5][row]);
        let expected = eval(&node, &Env { vars, t: clock });

        let parsed = parse_expression(&text).unwrap_or_else(|e| panic!("{text}: {e}"));
        assert!(parsed.ast().depth() <= 6, "{text}");
        let ctx = EvalContext::new(&tables, clock)
            .with_state("motor1", "speed", speed)
            .with_state("psu1", "voltage", voltage)
            .with_cursor("run", row);
        let got = evaluate(&parsed, &ctx);

        let agree = match (&expected, &got) {
            (Ok(a), Ok(b)) => relative_close(*a, *b, rel),
            (Err(Failure::DivByZero), Err(EvalError::DomainError { op })) => {
                div_zero += 1;
                *op == "/"
            }
            (Err(Failure::Domain), Err(EvalError::DomainError { op })) => *op != "/",
            _ => false,
        };
        if agree {
            ok += 1;
        } else {
            failures.push(Case {
                text,
                oracle: expected,
                lib: got,
            });
        }
    }
    (ok, div_zero, failures)
}
