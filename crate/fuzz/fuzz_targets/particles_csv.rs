#![no_main]

use libfuzzer_sys::fuzz_target;
use pdfactor::io::parse_particles_csv;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cloud) = parse_particles_csv(text) {
        assert!(cloud.positions().iter().flatten().all(|x| x.is_finite()));
        assert!(cloud.positions().iter().all(|p| p.len() == cloud.n()));
    }
});
