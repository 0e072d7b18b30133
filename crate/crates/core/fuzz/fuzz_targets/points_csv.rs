#![no_main]

use dualbasis::pointset::io::parse_points_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&flag, body)) = data.split_first() else { return };
    if let Ok(cloud) = parse_points_csv(body, flag & 1 == 1) {
        assert!(cloud.coords.iter().all(|v| v.is_finite()));
        if cloud.dim > 0 {
            assert_eq!(cloud.coords.len() % cloud.dim, 0);
        }
        let _ = cloud.into_sites(None);
    }
});
