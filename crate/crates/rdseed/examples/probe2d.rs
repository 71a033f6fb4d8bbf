use rdseed::grid::*;
use rdseed::optimizer::*;
use rdseed::reaction::*;

fn main() {
    let g = Grid2D::new(-10.0, 10.0, -10.0, 10.0, 91, 91).unwrap();
    let m = 5.8 * std::f64::consts::PI;
    let tc = TimeConfig::new(30.0, 1500).unwrap();
    let bi = ReactionModel::bistable(0.25).unwrap();
    let mono = ReactionModel::monostable_shifted(0.25).unwrap();
    let ball = indicator_ball(g, 0.0, 0.0, m).unwrap();
    let stripe = indicator_stripe(g, 0.0, m).unwrap();
    let opts = OptimizeOpts { max_iter: 50, eps_flat_rel: 0.1, ..OptimizeOpts::default() };
    for (name, u0, model) in [("ball/bi", &ball, &bi), ("stripe/bi", &stripe, &bi), ("ball/mono", &ball, &mono)] {
        let t0 = std::time::Instant::now();
        let r = optimize(u0, model, &tc, m, &opts).unwrap();
        let rep = prop1_certificate(&r, model);
        let interior = r.final_iterate.values.iter().filter(|&&v| v > 0.05 && v < 0.95).count();
        println!("{name}: {:?} it {} J {:.4} -> {:.4} interior(0.05..0.95) {} arc {} max_fpp {:?} viol {:.3} wall {:.0?} solves {}",
            r.status, r.iterations, r.initial_objective, r.objective, interior, rep.arc_cell_count,
            rep.max_fpp_on_arc.map(|v| (v*1e4).round()/1e4), rep.violating_fraction, t0.elapsed(), r.pde_solves);
        let mut js: Vec<f64> = r.trace.iter().map(|t| t.objective).collect();
        js.truncate(12);
        println!("   trace head: {:?}", js.iter().map(|j| (j*100.0).round()/100.0).collect::<Vec<_>>());
    }
}
