//! The parser/evaluator against an independent string-level oracle: random
//! trees are rendered to text, and evaluated by a separate tree walker that
//! never touches the crate's AST.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sumhess::frontend::expr::{Env, Expression};

#[derive(Debug, Clone)]
enum Ref {
    Num(f64),
    X(usize),
    U,
    P(usize),
    Neg(Box<Ref>),
    Bin(char, Box<Ref>, Box<Ref>),
    Call(&'static str, Box<Ref>),
}

const FUNCS: [&str; 6] = ["exp", "log", "sin", "cos", "sqrt", "abs"];

fn random_tree(rng: &mut ChaCha8Rng, depth: u32) -> Ref {
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..4) {
            0 => Ref::Num((rng.gen_range(-40..40) as f64) / 8.0),
            1 => Ref::X(rng.gen_range(0..3)),
            2 => Ref::U,
            _ => Ref::P(rng.gen_range(0..3)),
        };
    }
    match rng.gen_range(0..8) {
        0 => Ref::Neg(Box::new(random_tree(rng, depth - 1))),
        1 => Ref::Call(FUNCS[rng.gen_range(0..6)], Box::new(random_tree(rng, depth - 1))),
        _ => {
            let op = ['+', '-', '*', '/', '^'][rng.gen_range(0..5)];
            Ref::Bin(op, Box::new(random_tree(rng, depth - 1)), Box::new(random_tree(rng, depth - 1)))
        }
    }
}

/// Fully parenthesized text, so the parser's precedence never matters.
fn render(t: &Ref) -> String {
    match t {
        Ref::Num(v) if *v < 0.0 => format!("(-{})", -v),
        Ref::Num(v) => format!("{v}"),
        Ref::X(i) => format!("x{}", i + 1),
        Ref::U => "u".into(),
        Ref::P(i) => format!("p{}", i + 1),
        Ref::Neg(a) => format!("(-{})", render(a)),
        Ref::Bin(op, a, b) => format!("({} {op} {})", render(a), render(b)),
        Ref::Call(f, a) => format!("{f}({})", render(a)),
    }
}

fn reference(t: &Ref, x: &[f64; 3], u: f64, p: &[f64; 3]) -> Option<f64> {
    let v = match t {
        Ref::Num(v) => *v,
        Ref::X(i) => x[*i],
        Ref::U => u,
        Ref::P(i) => p[*i],
        Ref::Neg(a) => -reference(a, x, u, p)?,
        Ref::Bin(op, a, b) => {
            let (a, b) = (reference(a, x, u, p)?, reference(b, x, u, p)?);
            match op {
                '+' => a + b,
                '-' => a - b,
                '*' => a * b,
                '/' if b == 0.0 => return None,
                '/' => a / b,
                _ => a.powf(b),
            }
        }
        Ref::Call(f, a) => {
            let a = reference(a, x, u, p)?;
            match *f {
                "exp" => a.exp(),
                "log" if a <= 0.0 => return None,
                "log" => a.ln(),
                "sin" => a.sin(),
                "cos" => a.cos(),
                "sqrt" if a < 0.0 => return None,
                "sqrt" => a.sqrt(),
                _ => a.abs(),
            }
        }
    };
    v.is_finite().then_some(v)
}

#[test]
fn agrees_with_reference_evaluator() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut ok, mut err) = (0, 0);
    for _ in 0..1000 {
        let tree = random_tree(&mut rng, 5);
        let text = render(&tree);
        let x = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let u = rng.gen_range(-2.0..2.0);
        let p = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let expr = Expression::parse(&text).unwrap_or_else(|e| panic!("{text}: {e}"));
        let got = expr.eval(&Env::new(&x, u, &p));
        match (reference(&tree, &x, u, &p), got) {
            (Some(want), Ok(have)) => {
                assert!(
                    want == have || (want - have).abs() <= 1e-12 * want.abs().max(1.0),
                    "{text}: {want} vs {have}"
                );
                ok += 1;
            }
            (None, Err(_)) => err += 1,
            (want, have) => panic!("{text}: reference {want:?}, evaluator {have:?}"),
        }
    }
    assert!(ok > 300 && err > 10, "ok {ok} err {err}");
}

#[test]
fn print_parse_fixpoint_on_random_trees() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..1000 {
        let text = render(&random_tree(&mut rng, 6));
        let once = Expression::parse(&text).unwrap();
        let twice = Expression::parse(&once.to_string()).unwrap();
        assert_eq!(once, twice, "{text}");
    }
}

#[test]
fn documented_examples() {
    let env = |x1: f64, x2: f64, u: f64, p1: f64| Env::new(&[x1, x2, 0.0], u, &[p1, 0.0, 0.0]);
    let ev = |s: &str, e: &Env| Expression::parse(s).unwrap().eval(e);
    let zero = env(0.0, 0.0, 0.0, 0.0);
    assert_eq!(ev("12 + 6", &zero).unwrap(), 18.0);
    assert_eq!(ev("x1^2 + x2^2", &env(1.0, 2.0, 0.0, 0.0)).unwrap(), 5.0);
    assert_eq!(ev("exp(u) * (1 + p1^2)", &env(0.0, 0.0, 0.0, 2.0)).unwrap(), 5.0);
    assert!(ev("1/ (x1 - 1)", &env(1.0, 0.0, 0.0, 0.0)).is_err());
    assert_eq!(ev("sqrt(4)", &zero).unwrap(), 2.0);
    assert_eq!(ev("2+3*4^2", &zero).unwrap(), 50.0);
    assert_eq!(ev("-2^2", &zero).unwrap(), -4.0);
    assert_eq!(ev("2^3^2", &zero).unwrap(), 512.0);
    assert!(Expression::parse("x4 + 1").is_err());
}
