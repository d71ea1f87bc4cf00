#![no_main]

use libfuzzer_sys::fuzz_target;
use spde_cli::manifest::RunManifest;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(m) = RunManifest::parse(text) {
        let again = RunManifest::parse(&m.to_text()).expect("written manifest re-parses");
        assert_eq!(again.estimates.len(), m.estimates.len());
        assert_eq!(again.config, m.config);
    }
});
