//! Fuzz the superposition pipeline: spec validation, composite
//! construction, Gray checking and demodulation must never panic, and
//! accepted composites must keep their invariants.

#![no_main]

use arbitrary::Arbitrary;
use libfuzzer_sys::fuzz_target;
use num_complex::Complex64;

use noma_link::must::{
    build_composite, demodulate, gray_check, qam16, qpsk, Category, SuperpositionSpec,
};

#[derive(Arbitrary, Debug)]
struct Input {
    far_is_16: bool,
    near_is_16: bool,
    beta_bits: u16,
    raw_beta: f64,
    category: u8,
    re: f64,
    im: f64,
    noise_exp: i8,
}

fuzz_target!(|input: Input| {
    let far = if input.far_is_16 { qam16() } else { qpsk() };
    let near = if input.near_is_16 { qam16() } else { qpsk() };

    // raw beta exercises the validation path, including non-finite values
    let _ = SuperpositionSpec::new(far.clone(), near.clone(), input.raw_beta, Category::Cat1);

    // mapped beta always lies strictly inside (0.5, 1)
    let beta = 0.5 + (input.beta_bits as f64 + 0.5) / 65537.0 * 0.5;
    let category = Category::ALL[(input.category % 3) as usize];
    let Ok(spec) = SuperpositionSpec::new(far, near, beta, category) else {
        return;
    };
    let Ok(composite) = build_composite(&spec) else {
        return;
    };
    assert!((composite.average_power() - 1.0).abs() < 1e-9);
    let _ = gray_check(&composite);

    if input.re.is_finite() && input.im.is_finite() {
        let noise_var = 10f64.powi(input.noise_exp as i32 % 16);
        if noise_var > 0.0 {
            let demod = demodulate(&composite, Complex64::new(input.re, input.im), noise_var)
                .expect("positive noise variance");
            assert!(demod.llrs.iter().all(|l| !l.is_nan()));
        }
    }
});
