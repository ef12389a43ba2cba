#![no_main]

use libfuzzer_sys::fuzz_target;
use muscle_core::{parse_series, ColumnSelector};

// First byte picks the column mode, the rest is the file text.
fuzz_target!(|data: &[u8]| {
    let Some((&mode, rest)) = data.split_first() else {
        return;
    };
    let Ok(text) = std::str::from_utf8(rest) else {
        return;
    };
    let column = match mode % 4 {
        0 => None,
        1 => Some(ColumnSelector::Index(mode as usize / 4 % 5 + 1)),
        2 => Some(ColumnSelector::Name("y".into())),
        _ => text.lines().next().and_then(|l| l.parse().ok()),
    };
    if let Ok(series) = parse_series(text, column.as_ref()) {
        assert!(!series.is_empty());
        assert!(series.values().iter().all(|v| v.is_finite()));
    }
});
