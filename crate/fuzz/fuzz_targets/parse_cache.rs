#![no_main]

use libfuzzer_sys::fuzz_target;
use muscle_core::calibration::parse_cache;
use muscle_core::CalibrationCache;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(records) = parse_cache(text) else {
        return;
    };
    let rendered: String = records.iter().map(|r| r.to_line() + "\n").collect();
    let again = parse_cache(&rendered).expect("rendered records must parse");
    assert_eq!(records.len(), again.len());
    for (a, b) in records.iter().zip(&again) {
        assert!(a.key.same_as(&b.key));
        assert_eq!(a.m, b.m);
        assert_eq!(a.q.to_bits(), b.q.to_bits());
    }
    let _ = CalibrationCache::parse(text);
});
