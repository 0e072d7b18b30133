#![no_main]

use dualbasis::kernels::KernelSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = text.parse::<KernelSpec>() {
        for r in [0.0, 1e-3, 0.5, 2.0, 1e3] {
            let v = spec.eval(r);
            assert!(v.is_finite(), "{spec} at {r}");
        }
        let again: KernelSpec = spec.to_string().parse().expect("display output parses");
        assert_eq!(again.family(), spec.family());
    }
});
