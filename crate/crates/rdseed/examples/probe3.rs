use rdseed::grid::*;
use rdseed::reaction::*;
use rdseed::twoscale::*;

fn main() {
    let g = Grid1D::new(0.0, std::f64::consts::PI, 2048).unwrap();
    let theta = make_cutoff(0.9, 2.2, g).unwrap();
    let center = 0.5 * std::f64::consts::PI;
    let background = centered_block(g, center, std::f64::consts::PI / 4.0).unwrap();
    let model = ReactionModel::bistable(0.25).unwrap();
    let tc = TimeConfig::new(0.5, 5120).unwrap();
    let t0 = std::time::Instant::now();
    let sweep = remainder_sweep(&background, &model, &theta, &[4, 8, 16, 32], &tc).unwrap();
    println!("wall {:.1?}", t0.elapsed());
    for (i, &k) in sweep.k_list.iter().enumerate() {
        let k2 = (k*k) as f64;
        println!("k={k}: sup {:.4e}  sup*k^2 {:.4}  alpha*k^4 {:.2}  iint R^2 * k^4 {:.4e}",
            sweep.sup_norms[i], sweep.sup_norms[i]*k2, sweep.alpha[i].abs()*k2*k2, sweep.time_integrated[i]*k2*k2);
    }
    println!("slope {:.4} intercept {:.3} r2 {:.5}", sweep.slope, sweep.intercept, sweep.r2);
    let scaled: Vec<f64> = sweep.k_list.iter().zip(&sweep.sup_norms).map(|(&k,&s)| s*(k*k) as f64).collect();
    let (mn, mx) = scaled.iter().fold((f64::MAX, f64::MIN), |(a,b), &v| (a.min(v), b.max(v)));
    println!("sup*k^2 max/min = {:.3}", mx/mn);
    let (mn2, mx2) = sweep.time_integrated.iter().zip(&sweep.k_list).map(|(&v,&k)| v*((k*k*k*k) as f64)).fold((f64::MAX, f64::MIN), |(a,b), v| (a.min(v), b.max(v)));
    println!("iint*k^4 max/min = {:.3}", mx2/mn2);
}
