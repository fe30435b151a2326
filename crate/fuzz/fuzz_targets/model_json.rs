#![no_main]

use gradual_dae::harness::ModelFile;
use gradual_dae::numerics::Matrix;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(model) = ModelFile::from_json(text) {
        let x = Matrix::zeros(1, model.encoder.input_dim());
        let _ = model.encoder.encode(&x);
    }
});
