//! Bit blocks as hex text, most significant bit first.
//!
//! A block of `n` bits takes `ceil(n / 4)` digits; unused low bits of the
//! last digit must be zero.

pub fn bits_to_hex(bits: &[u8]) -> String {
    bits.chunks(4)
        .map(|nibble| {
            let v = nibble.iter().enumerate().fold(0u32, |acc, (i, &b)| acc | (((b & 1) as u32) << (3 - i)));
            char::from_digit(v, 16).expect("nibble < 16")
        })
        .collect()
}

pub fn hex_to_bits(text: &str, n_bits: usize) -> Result<Vec<u8>, String> {
    let digits = n_bits.div_ceil(4);
    if text.len() != digits {
        return Err(format!("expected {digits} hex digits for {n_bits} bits, found {}", text.len()));
    }
    let mut bits = Vec::with_capacity(digits * 4);
    for c in text.chars() {
        let v = c.to_digit(16).ok_or_else(|| format!("'{c}' is not a hex digit"))?;
        bits.extend((0..4).rev().map(|i| ((v >> i) & 1) as u8));
    }
    if bits[n_bits..].iter().any(|&b| b != 0) {
        return Err("padding bits of the last digit must be zero".into());
    }
    bits.truncate(n_bits);
    Ok(bits)
}
