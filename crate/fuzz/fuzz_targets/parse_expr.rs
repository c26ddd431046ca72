#![no_main]

use libfuzzer_sys::fuzz_target;
use sumhess::frontend::expr::{Env, Expression};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(e) = Expression::parse(text) {
        let again = Expression::parse(&e.to_string()).expect("printed expression must parse");
        assert_eq!(e, again);
        let _ = e.eval(&Env::new(&[0.5, -0.25, 1.0], 0.1, &[1.0, 2.0, -1.0]));
    }
});
