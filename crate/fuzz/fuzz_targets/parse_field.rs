#![no_main]

use libfuzzer_sys::fuzz_target;
use sumhess::solver::ScalarField;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(f) = ScalarField::from_field_text(text) {
        let back = ScalarField::from_field_text(&f.to_field_text().expect("parsed field must print"))
            .expect("printed field must parse");
        assert_eq!(back.grid.cells(), f.grid.cells());
    }
});
