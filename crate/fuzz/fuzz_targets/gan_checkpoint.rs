#![no_main]

use libfuzzer_sys::fuzz_target;
use mrf_core::gan::GanModel;

fuzz_target!(|data: &[u8]| {
    if let Ok(model) = GanModel::from_bytes(data) {
        let again = GanModel::from_bytes(&model.to_bytes()).expect("re-encoded model decodes");
        assert_eq!(model, again);
    }
});
