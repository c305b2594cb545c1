#![no_main]

use libfuzzer_sys::fuzz_target;
use symvol::io::{parse_stm_json, write_stm_json};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(stm) = parse_stm_json(text) {
        let mut buf = Vec::new();
        write_stm_json(&stm, &mut buf).unwrap();
        let back = parse_stm_json(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back.matrix, stm.matrix);
    }
});
