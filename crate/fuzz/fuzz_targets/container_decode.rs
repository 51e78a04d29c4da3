#![no_main]
use esnrae::container::WeightContainer;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(c) = WeightContainer::from_bytes(data) {
        // The layout has exactly one encoding per container.
        assert_eq!(c.to_bytes(), data);
    }
});
