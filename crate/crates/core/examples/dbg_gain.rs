use tube_dmpc::model::{benchmark_msd, MsdParams};
use tube_dmpc::synth::{synth_global_gain, synth_global_gain_grid, tighten_sequences, GainSpec};
use tube_dmpc::linalg::spectral_radius;

fn main() {
    let net = benchmark_msd(&MsdParams::default()).unwrap();
    let (a, b) = net.assemble_global();
    for tau1 in [0.5, 0.9, 0.95, 0.98, 0.99] {
        match synth_global_gain(&net, tau1) {
            Ok(g) => println!(
                "tau1={tau1}: OK trace={:.2} rho={:.5} x_rows={} beta={:.3}",
                g.trace_s, spectral_radius(&(&a + &b * &g.k)), g.state_containment, g.input_slack
            ),
            Err(e) => println!("tau1={tau1}: FAIL {e}"),
        }
    }
    let grid: Vec<f64> = tube_dmpc::model::SynthesisConfig::default().tau1_grid;
    match synth_global_gain_grid(&net, &grid) {
        Ok(g) => {
            println!("grid best: tau1={} trace={:.2} rho={:.5} beta={:.3}",
                g.tau1, g.trace_s, spectral_radius(&(&a + &b * &g.k)), g.input_slack);
            match tighten_sequences(&net, &GainSpec::Global(&g.k), 5) {
                Ok(t) => {
                    for tt in 0..5 {
                        let rx = t.x_global[tt].chebyshev().unwrap().1;
                        let ru = t.u_global[tt].chebyshev().unwrap().1;
                        println!("  t={tt}: cheb radius X={rx:.4} U={ru:.4}");
                    }
                }
                Err(e) => println!("  tighten FAIL: {e}"),
            }
        }
        Err(e) => println!("grid: FAIL {e}"),
    }
}
