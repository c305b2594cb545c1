#![no_main]

use libfuzzer_sys::fuzz_target;
use symvol::io::read_trajectory_csv;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(table) = read_trajectory_csv(text) {
        for i in 0..table.rows.len() {
            let stm = table.stm(i);
            assert_eq!(stm.matrix.nrows(), 2 * table.n_pairs);
        }
    }
});
