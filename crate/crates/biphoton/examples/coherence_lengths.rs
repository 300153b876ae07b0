//! Coherence-length arithmetic: W = lambda^2 / d-lambda.
//!
//! The three bandwidths of the bench (25 nm pinhole, 10 nm broadband
//! filter, 0.86 nm narrowband filter) give wavepacket widths of roughly
//! 20, 50, and 570 um around 702 nm. Only the narrowband width exceeds
//! the 220 um interferometer path difference, so only that subensemble
//! can interfere.
//!
//! Run with: cargo run -p biphoton --example coherence_lengths

use biphoton::spectral::coherence_length;

fn main() -> biphoton::Result<()> {
    let lambda = 702.0;
    let delta = 220.0;
    println!("center wavelength {lambda} nm, interferometer Delta = {delta} um");
    println!();
    println!("{:>14} {:>12} {:>22}", "bandwidth", "W = l^2/dl", "vs Delta");
    for (label, bw) in [("25 nm pinhole", 25.0), ("10 nm F2", 10.0), ("0.86 nm F1", 0.86)] {
        let w = coherence_length(lambda, bw)?;
        let verdict = if w > delta {
            "packets overlap: fringes"
        } else {
            "packets separate: none"
        };
        println!("{label:>14} {w:>9.1} um {verdict:>26}");
    }
    println!();
    // sanity: the formula is quadratic in the wavelength
    let w = coherence_length(lambda, 25.0)?;
    let w2 = coherence_length(2.0 * lambda, 25.0)?;
    println!("doubling the wavelength quadruples W: {:.1} -> {:.1} um", w, w2);
    Ok(())
}
