#![no_main]

use libfuzzer_sys::fuzz_target;
use symvol_cli::config::{
    self, DiscConfig, HeisenbergConfig, InvariantsConfig, PropagateConfig, SkeletonConfig, SurfaceConfig,
};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // Errors are fine; panics are not.
    if let Ok(cfg) = config::parse::<PropagateConfig>(text) {
        let _ = cfg.build_system();
        let _ = cfg.initial();
        let _ = cfg.sample_spec().times(cfg.t_span[0], cfg.t_span[1]);
    }
    let _ = config::parse::<InvariantsConfig>(text);
    let _ = config::parse::<SkeletonConfig>(text);
    let _ = config::parse::<SurfaceConfig>(text);
    let _ = config::parse::<HeisenbergConfig>(text);
    let _ = config::parse::<DiscConfig>(text);
});
