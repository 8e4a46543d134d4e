#![no_main]

use libfuzzer_sys::fuzz_target;
use peeg_session::read_csv;

fuzz_target!(|data: &[u8]| {
    if let Ok(table) = read_csv(data) {
        for row in &table.rows {
            assert_eq!(row.len(), table.columns.len());
        }
    }
});
