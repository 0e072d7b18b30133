#![no_main]

use dualbasis::bench::{parse_records_csv, write_records_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(records) = parse_records_csv(data) {
        let mut out = Vec::new();
        write_records_csv(&records, &mut out).expect("writing to memory");
        let again = parse_records_csv(out.as_slice()).expect("written records parse");
        assert_eq!(again.len(), records.len());
    }
});
