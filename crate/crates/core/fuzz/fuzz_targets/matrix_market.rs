#![no_main]

use dualbasis::linalg::matrix_market::{read_matrix_market, to_matrix_market_string};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = read_matrix_market(data) {
        let text = to_matrix_market_string(&m);
        let again = read_matrix_market(text.as_bytes()).expect("written matrix parses");
        assert_eq!(again.nnz(), m.nnz());
    }
});
