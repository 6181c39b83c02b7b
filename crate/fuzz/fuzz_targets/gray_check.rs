//! Fuzz the Gray adjacency checker with arbitrary constellations:
//! construction rejects malformed input and the grid check never panics,
//! whatever the point geometry.

#![no_main]

use arbitrary::Arbitrary;
use libfuzzer_sys::fuzz_target;
use num_complex::Complex64;

use noma_link::must::{demodulate, gray_check, LabeledConstellation};

#[derive(Arbitrary, Debug)]
struct Input {
    points: Vec<(f64, f64)>,
    labels: Vec<u16>,
    bits: u8,
    probe: (f64, f64),
}

fuzz_target!(|input: Input| {
    let bits = (input.bits % 5).max(1) as u32;
    let n = 1usize << bits;
    if input.points.len() < n || input.labels.len() < n {
        return;
    }
    let points: Vec<Complex64> = input.points[..n]
        .iter()
        .map(|&(re, im)| Complex64::new(re, im))
        .collect();
    let labels = input.labels[..n].to_vec();
    let Ok(constellation) = LabeledConstellation::new(points, labels, bits) else {
        return;
    };
    let _ = gray_check(&constellation);
    if input.probe.0.is_finite() && input.probe.1.is_finite() {
        let _ = demodulate(
            &constellation,
            Complex64::new(input.probe.0, input.probe.1),
            1.0,
        );
    }
});
