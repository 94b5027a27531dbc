#![no_main]

use levy_spde_lab::harness::Curve;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if data.len() > 1 << 16 {
        return;
    }
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(curve) = Curve::from_csv_str("fuzz", text) else {
        return;
    };
    let again = Curve::from_csv_str("fuzz", &curve.to_csv()).expect("written curve parses");
    assert_eq!(again.columns, curve.columns);
    assert_eq!(again.rows.len(), curve.rows.len());
    for (a, b) in again.rows.iter().flatten().zip(curve.rows.iter().flatten()) {
        assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
    }
});
