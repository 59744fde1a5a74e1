use psi_gnn::mesh::{generate_domain, triangulate, DomainSpec};
fn main() {
    let mut fails = 0;
    for seed in 0..60u64 {
        for h in [0.2, 0.15, 0.12, 0.1] {
            let spec = DomainSpec::<f64>::new(seed, h);
            let lp = generate_domain(&spec).unwrap();
            match triangulate(&lp, &spec) {
                Ok(m) => {
                    if seed < 6 { eprintln!("seed {seed} h {h}: N={} minang={:.1}", m.n_nodes(), m.min_angle_deg()); }
                }
                Err(e) => { fails += 1; eprintln!("seed {seed} h {h}: FAIL {e}"); }
            }
        }
    }
    eprintln!("total failures: {fails}/240");
}
