#![no_main]

use dualbasis::pointset::io::{decode_kdb1, encode_kdb1};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(cloud) = decode_kdb1(data) {
        if let Ok(sites) = cloud.clone().into_sites(None) {
            let again = decode_kdb1(&encode_kdb1(&sites)).expect("encoded sites decode");
            assert_eq!(again, cloud);
        }
    }
});
