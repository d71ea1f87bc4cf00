#![no_main]

use libfuzzer_sys::fuzz_target;
use spde_cli::config::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // anything that parses must survive a round trip
    if let Ok(c) = ExperimentConfig::parse(text) {
        let again = ExperimentConfig::parse(&c.to_config_string()).expect("canonical form re-parses");
        assert_eq!(again, c);
    }
});
