//! Fits an occupancy MLP to an icosphere and reports reconstruction quality.
//!
//! Usage: `cargo run --release --example fit_sphere -- [epochs]`

use std::time::Instant;

use occgen::geometry::primitives::icosphere;
use occgen::inr::{fit_mlp, reconstruct, FitConfig};

fn main() -> occgen::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let mesh = icosphere(4, 0.4);
    let cfg = FitConfig { epochs, ..FitConfig::default() };
    let start = Instant::now();
    let (params, log) = fit_mlp(&mesh, &cfg)?;
    println!("fit: {epochs} epochs, {} steps, final loss {:.5}, {:.1}s", log.steps, log.final_loss().unwrap(), start.elapsed().as_secs_f64());
    let start = Instant::now();
    let rec = reconstruct(&params, 128)?;
    println!("reconstruct: {} faces, volume {:.5}, {:.1}s", rec.mesh.faces.len(), rec.mesh.signed_volume(), start.elapsed().as_secs_f64());
    Ok(())
}
