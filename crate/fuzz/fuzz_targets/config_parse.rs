#![no_main]

use levy_spde_lab::harness::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if data.len() > 1 << 16 {
        return;
    }
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cfg) = ExperimentConfig::from_json_str(text) else {
        return;
    };
    let _ = cfg.validate();
    let again = ExperimentConfig::from_json_str(&cfg.to_json_pretty()).expect("serialized config parses");
    assert_eq!(again.to_json_pretty(), cfg.to_json_pretty());
});
