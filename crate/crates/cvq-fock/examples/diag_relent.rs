use cvq_fock::density::{moments, FockDensity};
use cvq_fock::gap::{extremality_gap, gaussianify_single_mode, relative_entropy_vs_gaussian, GapOptions};
use cvq_fock::ops::C64;
use nalgebra::DMatrix;

fn main() {
    let text = "dephase(0.08193013410735028, dephase(0.1493390717246243, squeezed:-0.45049340110243297))";
    let spec = cvq_fock::parse_state_spec(text).unwrap();
    for cutoff in [40usize, 56, 72] {
        let rho = cvq_fock::density::realize_with_budget(&spec, cutoff, 1e-2).unwrap();
        let rep = extremality_gap(&rho, &GapOptions { with_relative_entropy: false }).unwrap();
        let (d, g) = moments(&rho);
        println!("cutoff {cutoff}: tail={:.2e} gap={:.8}", rho.tail_mass(), rep.delta_h);
        for work in [cutoff + 30, 2 * cutoff + 30] {
            match gaussianify_single_mode(&d, &g, work) {
                Ok(tilde) => {
                    let rel = relative_entropy_vs_gaussian(&rho, &tilde).unwrap();
                    // moment deviation of the constructed density
                    let probe = FockDensity::from_matrix(1, work - 1, tilde.matrix.clone());
                    let (dm, gm) = moments(&probe);
                    let dev = (&gm - &g).iter().fold(0.0f64, |a, &x| a.max(x.abs()));
                    let _ = dm;
                    println!("  work {work}: rel={rel:.8} diff={:.3e} momdev={dev:.2e}", rep.delta_h - rel);
                }
                Err(e) => println!("  work {work}: {e}"),
            }
        }
    }
    let _ = DMatrix::<C64>::zeros(1, 1);
}
