#![no_main]

use levy_spde_lab::harness::ExperimentReport;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if data.len() > 1 << 18 {
        return;
    }
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(report) = ExperimentReport::from_json_str(text) else {
        return;
    };
    let written = report.to_json_pretty();
    let again = ExperimentReport::from_json_str(&written).expect("written report parses");
    assert_eq!(again.to_json_pretty(), written);
    let _ = report.numerics();
});
