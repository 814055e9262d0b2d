//! Desk-scale memorization run: fit analytic shapes, train, sample, score.
//!
//! Usage: memorize [fit_epochs] [train_epochs] [resolution] [batch] [lr×1e5]

use std::time::Instant;

use occgen::diffusion::{generate, train, SampleConfig, ScheduleConfig, TrainConfig};
use occgen::geometry::primitives::{ellipsoid, icosphere};
use occgen::geometry::{surface_sample, Vec3};
use occgen::inr::{fit_mlp, FitConfig};
use occgen::metrics::set_metrics;
use occgen::rng::derive;
use occgen::weightspace::{flatten, DenoiserConfig};

fn main() -> occgen::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().expect("integer argument")).collect();
    let fit_epochs = args.first().copied().unwrap_or(200);
    let train_epochs = args.get(1).copied().unwrap_or(2000);
    let resolution = args.get(2).copied().unwrap_or(64);
    let batch = args.get(3).copied().unwrap_or(4);
    let lr = args.get(4).map(|&v| v as f32 * 1e-5).unwrap_or(5e-4);

    let shapes = vec![
        icosphere(4, 0.25),
        icosphere(4, 0.32),
        icosphere(4, 0.4),
        ellipsoid(4, Vec3::new(0.4, 0.3, 0.25)),
        ellipsoid(4, Vec3::new(0.25, 0.4, 0.3)),
        ellipsoid(4, Vec3::new(0.3, 0.25, 0.4)),
        ellipsoid(4, Vec3::new(0.42, 0.2, 0.2)),
        ellipsoid(4, Vec3::new(0.2, 0.35, 0.42)),
    ];
    let fit_cfg = FitConfig {
        epochs: fit_epochs,
        seed: 7,
        ..FitConfig::default()
    };
    let t = Instant::now();
    let thetas: Vec<Vec<f32>> = shapes
        .iter()
        .map(|m| flatten(&fit_mlp(m, &fit_cfg)?.0))
        .collect::<occgen::Result<_>>()?;
    println!("fit: {:.1}s", t.elapsed().as_secs_f64());
    for a in &thetas {
        for b in &thetas {
            print!("{:.3} ", a.iter().zip(b).map(|(x, y)| ((x - y) as f64).powi(2)).sum::<f64>().sqrt());
        }
        println!();
    }

    let t = Instant::now();
    let cfg = TrainConfig {
        epochs: train_epochs,
        batch,
        lr,
        seed: 3,
        ..TrainConfig::default()
    };
    let outcome = train(&thetas, &[], &cfg, &DenoiserConfig::desk(), &ScheduleConfig::default())?;
    let l = &outcome.log.train_loss;
    println!(
        "train: {:.1}s, loss first {:.4} last {:.5} min {:.5}",
        t.elapsed().as_secs_f64(),
        l[0],
        l[l.len() - 1],
        l.iter().cloned().fold(f64::INFINITY, f64::min)
    );

    let t = Instant::now();
    let sample = SampleConfig {
        count: 16,
        seed: 11,
        ..SampleConfig::default()
    };
    let generated = generate(&outcome.last, &sample, resolution)?;
    println!("generate: {:.1}s", t.elapsed().as_secs_f64());
    let ok = generated
        .iter()
        .filter(|g| !g.reconstruction.empty_surface && occgen::geometry::qa_report(&g.reconstruction.mesh).watertight)
        .count();
    println!("non-empty watertight: {ok}/16");
    for g in &generated {
        let (idx, near) = thetas
            .iter()
            .map(|t| t.iter().zip(&g.theta).map(|(a, b)| ((a - b) as f64).powi(2)).sum::<f64>().sqrt())
            .enumerate()
            .fold((0, f64::INFINITY), |best, (i, d)| if d < best.1 { (i, d) } else { best });
        print!("{idx}:{near:.3} ");
    }
    println!();

    for points in [2048usize, 20000] {
        let clouds = |meshes: Vec<&occgen::geometry::TriMesh>, stream: u64| -> occgen::Result<Vec<_>> {
            meshes
                .iter()
                .enumerate()
                .map(|(i, m)| surface_sample(m, points, &mut derive(stream, i as u64)))
                .collect()
        };
        let gen = clouds(generated.iter().filter(|g| !g.reconstruction.empty_surface).map(|g| &g.reconstruction.mesh).collect(), 100)?;
        let reference = clouds(shapes.iter().collect(), 200)?;
        let r = set_metrics(&gen, &reference, 0)?;
        for g in &gen {
            let d: Vec<f64> = reference.iter().map(|r| occgen::metrics::chamfer_l1(g, r)).collect::<occgen::Result<_>>()?;
            let (i, best) = d.iter().enumerate().fold((0, f64::INFINITY), |b, (i, &x)| if x < b.1 { (i, x) } else { b });
            print!("{i}:{:.4} ", best);
        }
        println!();
        println!("{points} pts: mmd_x100 {:.3} cov {:.1} 1nna {:.1} fgd {:.4}", r.mmd_x100, r.cov_pct, r.one_nna_pct, r.fgd);
    }
    Ok(())
}
