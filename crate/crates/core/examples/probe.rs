// Scratch exploration runs; not part of the deliverable surface.
use polyharm::density::{Density, UnitWeight};
use polyharm::discretization::{BoundaryCondition, DiscreteSpace};
use polyharm::geometry::Domain;
use polyharm::spectrum::{solve_generalized, SolverConfig};
use polyharm::bounds::weyl_reference;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    match args.get(1).map(|s| s.as_str()) {
        Some("weyl2d") => weyl2d(args.get(2).and_then(|s| s.parse().ok()).unwrap_or(12)),
        Some("rates1d") => rates1d(),
        Some("strip3d") => strip3d(args.get(2).and_then(|s| s.parse().ok()).unwrap_or(16)),
        Some("twopoint3d") => twopoint3d(args.get(2).and_then(|s| s.parse().ok()).unwrap_or(24)),
        Some("kernel3d") => kernel3d(),
        Some("shifttest") => shifttest(),
        Some("twopoint3dsweep") => twopoint3dsweep(),
        Some("log2d") => log2d(),
        Some("uniform2d") => uniform2d(),
        _ => eprintln!("unknown probe"),
    }
}

fn weyl2d(n: usize) {
    let dom = Domain::unit_square();
    let t0 = Instant::now();
    let s = DiscreteSpace::build(&dom, 1, n, BoundaryCondition::Natural, 1).unwrap();
    let k = s.assemble_stiffness();
    let m = s.assemble_mass(&UnitWeight).matrix;
    let cfg = SolverConfig::for_domain(&dom).with_seed(1);
    let spec = solve_generalized(&k, &m, 45, &cfg).unwrap();
    println!("n={n} dim={} elapsed={:?}", s.dim(), t0.elapsed());
    for j in [14, 15, 16, 17, 18, 19, 20, 21, 22, 25, 30, 35, 40] {
        let w = weyl_reference(2, 1, j, 1.0);
        println!("j={j:2} mu={:10.4} weyl={:10.4} ratio={:.4}", spec.eigenvalues[j-1], w, spec.eigenvalues[j-1]/w);
    }
    // smooth nonconstant rho
    let rho = |x: &[f64]| 1.0 + 0.8 * (std::f64::consts::PI * x[0]).sin() * (std::f64::consts::PI * x[1]).sin();
    let m2 = s.assemble_mass(&rho).matrix;
    let spec2 = solve_generalized(&k, &m2, 45, &cfg).unwrap();
    // ∫ rho dx = 1 + 0.8*(2/pi)^2
    let lp = 1.0 + 0.8 * (2.0 / std::f64::consts::PI).powi(2);
    println!("smooth rho, lp={lp}");
    for j in [15, 18, 20, 25, 30, 35, 40] {
        let w = weyl_reference(2, 1, j, lp);
        println!("j={j:2} mu={:10.4} weyl={:10.4} ratio={:.4}", spec2.eigenvalues[j-1], w, spec2.eigenvalues[j-1]/w);
    }
}

fn rates1d() {
    use polyharm::experiments::*;
    for (m, top, bot, n) in [(2usize, 0.08f64, 0.0052f64, 768usize), (2, 0.08, 0.0078, 512)] {
        let cfg = ExperimentConfig {
            domain: Domain::unit_interval(),
            m,
            family: DensityFamily::PointConcentration { delta: 0.1, center: vec![0.5] },
            eps_ladder: (0..8).map(|i| top * (bot/top).powf(i as f64 / 7.0)).collect(),
            elements: n,
            degree: None,
            eigen_count: polyharm::spectrum::polynomial_kernel_dim(1, m) + 2,
            seed: 7,
            bound_kinds: vec![],
            rate_targets: vec![],
        };
        let t0 = Instant::now();
        let sweep = run_sweep(&cfg).unwrap();
        let d = polyharm::spectrum::polynomial_kernel_dim(1, m);
        let fit = fit_rate(&sweep, d + 1).unwrap();
        println!("m={m}: slope={:.4} (expect {:.1}) r2={:.6} excluded={:?} elapsed={:?}",
                 fit.slope, -(2.0*m as f64 -1.0-0.1), fit.r_squared, fit.excluded, t0.elapsed());
        for p in &sweep.points {
            let ker_worst = p.spectrum.eigenvalues[..d].iter().cloned().fold(0.0f64, f64::max);
            let thresh = 1e-7 * p.spectrum.eigenvalues[d];
            println!("  eps={:.5} mu={:.6e} coarse={:.6e} ker_margin={:.1}x", p.eps, p.spectrum.eigenvalues[d], p.coarse_spectrum.eigenvalues[d], thresh / ker_worst);
        }
    }
}

fn strip3d(n: usize) {
    let dom = Domain::unit_cube();
    let ladder = [0.01f64, 0.00774, 0.006, 0.00464, 0.00359, 0.00278];
    let t0 = Instant::now();
    let s = DiscreteSpace::build(&dom, 1, n, BoundaryCondition::Natural, 1).unwrap();
    let k = s.assemble_stiffness();
    println!("n={n} dim={} assembleK={:?}", s.dim(), t0.elapsed());
    let cfg = SolverConfig::for_domain(&dom).with_seed(1);
    let mut pts = Vec::new();
    for &eps in &ladder {
        let rho = Density::boundary_strip_weyl(&dom, 1, eps).unwrap();
        let t1 = Instant::now();
        let mass = s.assemble_mass(&rho);
        let spec = solve_generalized(&k, &mass.matrix, 3, &cfg).unwrap();
        println!("  eps={eps:.4} mu2={:.5} prod={:.5} iface={} t={:?}", spec.eigenvalues[1], spec.eigenvalues[1]*eps.powf(1.0/3.0), mass.interface_cells, t1.elapsed());
        pts.push((eps.ln(), spec.eigenvalues[1].ln()));
    }
    let slope = ls_slope(&pts);
    println!("slope = {slope:.4} (expect -0.3333)");
}

fn twopoint3d(n: usize) {
    let dom = Domain::unit_cube();
    let t0 = Instant::now();
    let s = DiscreteSpace::build(&dom, 1, n, BoundaryCondition::Natural, 1).unwrap();
    let k = s.assemble_stiffness();
    println!("n={n} dim={} assembleK={:?}", s.dim(), t0.elapsed());
    let cfg = SolverConfig::for_domain(&dom).with_seed(1);
    let ladder = [0.18, 0.155, 0.133, 0.115, 0.099, 0.085];
    let centers = vec![vec![0.3, 0.5, 0.5], vec![0.7, 0.5, 0.5]];
    let mut pts = Vec::new();
    for &eps in &ladder {
        let rho = Density::multi_point(&dom, eps, centers.clone()).unwrap();
        let t1 = Instant::now();
        let mass = s.assemble_mass(&rho);
        let spec = solve_generalized(&k, &mass.matrix, 3, &cfg).unwrap();
        println!("  eps={eps:.4} mu2={:.6} mu3={:.6} t={:?}", spec.eigenvalues[1], spec.eigenvalues[2], t1.elapsed());
        pts.push((eps.ln(), spec.eigenvalues[1].ln()));
    }
    let slope = ls_slope(&pts);
    println!("slope = {slope:.4} (expect +1)");
}

fn kernel3d() {
    let dom = Domain::unit_cube();
    let t0 = Instant::now();
    let s = DiscreteSpace::build(&dom, 1, 24, BoundaryCondition::Natural, 2).unwrap();
    println!("build {:?}", t0.elapsed());
    let k = s.assemble_stiffness();
    println!("dim={} K assembled {:?}", s.dim(), t0.elapsed());
    let m = s.assemble_mass(&UnitWeight).matrix;
    println!("M assembled {:?}", t0.elapsed());
    let cfg = SolverConfig::for_domain(&dom).with_seed(1);
    let spec = solve_generalized(&k, &m, 4, &cfg).unwrap();
    println!("solve total {:?}; eigs {:?}", t0.elapsed(), spec.eigenvalues);
}

fn twopoint3dsweep() {
    use polyharm::experiments::*;
    let t0 = Instant::now();
    let top: f64 = 0.13;
    let bot: f64 = 0.075;
    let cfg = ExperimentConfig {
        domain: Domain::unit_cube(),
        m: 1,
        family: DensityFamily::MultiPoint {
            centers: vec![vec![0.3, 0.5, 0.5], vec![0.7, 0.5, 0.5]],
        },
        eps_ladder: (0..7).map(|i| top * (bot / top).powf(i as f64 / 6.0)).collect(),
        elements: 32,
        degree: Some(2),
        eigen_count: 3,
        seed: 7,
        bound_kinds: vec![],
        rate_targets: vec![],
    };
    let sweep = run_sweep(&cfg).unwrap();
    let fit = fit_rate(&sweep, 2).unwrap();
    println!(
        "slope={:.4} r2={:.6} excluded={:?} used={} elapsed={:?}",
        fit.slope, fit.r_squared, fit.excluded, fit.used_points, t0.elapsed()
    );
    for (i, p) in sweep.points.iter().enumerate() {
        println!(
            "  eps={:.4} mu2={:.6} coarse={:.6} flag={}",
            p.eps,
            p.spectrum.eigenvalues[1],
            p.coarse_spectrum.eigenvalues[1],
            sweep.flagged(i, 2)
        );
    }
}

fn shifttest() {
    let dom = Domain::unit_interval();
    let n = 1024usize;
    let s = DiscreteSpace::build(&dom, 2, n, BoundaryCondition::Natural, 2).unwrap();
    let k = s.assemble_stiffness();
    let rho = Density::point_concentration(&dom, 2, 0.06, 0.1, vec![0.5]).unwrap();
    let mass = s.assemble_mass(&rho).matrix;
    println!("normK={:.3e} normM={:.3e}", k.norm_inf(), mass.norm_inf());
    for shift in [1.0, 30.0, 1000.0, 3.0e4, 1.0e6] {
        let cfg = SolverConfig::new(shift).with_seed(7);
        match solve_generalized(&k, &mass, 4, &cfg) {
            Ok(spec) => println!(
                "shift={shift:.1e} eigs=[{:.3e}, {:.3e}, {:.6e}, {:.6e}] conv={}",
                spec.eigenvalues[0], spec.eigenvalues[1], spec.eigenvalues[2], spec.eigenvalues[3], spec.converged
            ),
            Err(e) => println!("shift={shift:.1e} error: {e}"),
        }
    }
}

fn log2d() {
    let dom = Domain::unit_square();
    let n = 128usize;
    let s = DiscreteSpace::build(&dom, 1, n, BoundaryCondition::Natural, 2).unwrap();
    let k = s.assemble_stiffness();
    let cfg = SolverConfig::for_domain(&dom).with_seed(1);
    let centers = vec![vec![0.3, 0.5], vec![0.7, 0.5]];
    for eps in [0.12, 0.09, 0.068, 0.051, 0.039, 0.029] {
        let rho = Density::multi_point(&dom, eps, centers.clone()).unwrap();
        let mass = s.assemble_mass(&rho);
        let spec = solve_generalized(&k, &mass.matrix, 3, &cfg).unwrap();
        let mu2 = spec.eigenvalues[1];
        println!("eps={eps:.4} mu2={mu2:.5} mu2*|log eps|={:.5}", mu2 * eps.ln().abs());
    }
}

fn uniform2d() {
    let dom = Domain::unit_square();
    let cfg = SolverConfig::for_domain(&dom).with_seed(1);
    let ladder = [0.1f64, 0.072, 0.052, 0.037, 0.027, 0.019, 0.0139, 0.01];
    for &eps in &ladder {
        let n = (((2.0 / eps).ceil() as usize) + 3) & !3usize;
        let s = DiscreteSpace::build(&dom, 1, n, BoundaryCondition::Natural, 2).unwrap();
        let k = s.assemble_stiffness();
        let rho = Density::point_concentration(&dom, 1, eps, 0.1, vec![0.5, 0.5]).unwrap();
        let mass = s.assemble_mass(&rho);
        let t1 = Instant::now();
        let spec = solve_generalized(&k, &mass.matrix, 6, &cfg).unwrap();
        let mrho = rho.mass(&dom);
        print!("eps={eps:.4} n={n} t={:?} ratios:", t1.elapsed());
        for j in 2..=6 {
            print!(" {:.4}", spec.eigenvalues[j-1] * mrho / j as f64);
        }
        println!();
    }
}

fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    sxy / sxx
}
