//! Spectral density of a noisy Hawkes process with a rectangle kernel, and
//! its Taylor expansion around frequency zero.
//!
//! The expansion f(nu) = a + c1 nu^2 + c2 nu^4 + O(nu^6) shows which
//! parameter combinations survive at low frequencies: a depends on the
//! kernel only through alpha, so the kernel shape has to be recovered from
//! the curvature terms.
//!
//! Run with: cargo run --example rectangle_taylor

use hawkes_spectral::spectral::rect_taylor;
use hawkes_spectral::{spectral_density_rect, RectParams};

fn main() {
    let params = RectParams {
        mu: 1.0,
        alpha: 0.5,
        phi: 0.7,
        lambda0: 0.6,
    };
    let taylor = rect_taylor(&params).unwrap();
    println!(
        "rectangle kernel (mu 1, alpha 0.5, phi 0.7, lambda0 0.6):\n  a = {:.6}, c1 = {:.6}, c2 = {:.6}\n",
        taylor.a, taylor.c1, taylor.c2
    );

    println!("  nu      f(nu)      a + c1 nu^2 + c2 nu^4   error");
    for nu in [0.0, 0.02, 0.05, 0.1, 0.2, 0.4] {
        let exact = spectral_density_rect(&params, nu).unwrap();
        let approx = taylor.a + taylor.c1 * nu * nu + taylor.c2 * nu.powi(4);
        println!(
            "  {nu:<5}  {exact:.6}   {approx:.6}              {:.2e}",
            (exact - approx).abs()
        );
    }
    println!("\nthe expansion is accurate until nu^6 terms kick in.");
}
