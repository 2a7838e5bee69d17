#![no_main]

use libfuzzer_sys::fuzz_target;
use mrf_core::Dictionary;

fuzz_target!(|data: &[u8]| {
    if let Ok(dict) = Dictionary::from_mrfd_bytes(data) {
        let again = Dictionary::from_mrfd_bytes(&dict.to_mrfd_bytes()).expect("re-encoded dictionary decodes");
        assert_eq!(dict, again);
    }
});
