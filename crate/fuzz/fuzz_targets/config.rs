#![no_main]

use gradual_dae::harness::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::parse_str(text) {
        // Paths with '#' or newlines cannot be re-emitted losslessly.
        let plain_paths = [&cfg.images, &cfg.labels, &cfg.test_images, &cfg.test_labels]
            .iter()
            .all(|p| p.as_ref().map_or(true, |p| !p.to_string_lossy().contains(['#', '\n', '\r'])));
        if plain_paths {
            let again = ExperimentConfig::parse_str(&cfg.to_config_string()).expect("emitted config parses");
            assert_eq!(again, cfg);
        }
    }
});
