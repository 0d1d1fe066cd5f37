//! Scratch probe: find a training budget where validation error has an
//! interior optimum along the batch axis on both dataset variants.

use mdtree_core::domain::DatasetVariant;
use mdtree_core::nnkit::{gen_synthetic, gen_synthetic_stream, train, ModelShape, INPUT_DIM, NUM_CLASSES};

const VAL_STREAM: u64 = 11;

fn main() {
    let widths = [2usize, 4, 8, 16, 64];
    let batches = [4usize, 8, 16, 32, 64, 128];
    let fractions = [0.125f64, 1.0];
    let seeds = [0u64, 1];
    let budgets = [(20usize, 0.5f64), (30, 0.5), (40, 0.5)];

    let val = gen_synthetic_stream(0, 4096, DatasetVariant::Clean, VAL_STREAM).unwrap();
    for variant in [DatasetVariant::Clean, DatasetVariant::LabelNoise10pct] {
        let pool = gen_synthetic(0, 1024, variant).unwrap();
        for &(epochs, lr) in &budgets {
            println!("== variant={} epochs={} lr={} ==", variant.as_str(), epochs, lr);
            for &f in &fractions {
                let n = (f * 1024.0) as usize;
                let subset = pool.prefix(n);
                for &w in &widths {
                    let shape = ModelShape::new(INPUT_DIM, w, NUM_CLASSES);
                    print!("  f={:5} w={:2} |", f, w);
                    for &b in &batches {
                        let mut te_sum = 0.0;
                        let mut ve_sum = 0.0;
                        for &s in &seeds {
                            let weights = train(shape, &subset, b, epochs, lr, s).unwrap();
                            let (_, te) = weights.loss_and_error(subset.inputs.view(), &subset.labels);
                            let (_, ve) = weights.loss_and_error(val.inputs.view(), &val.labels);
                            te_sum += te;
                            ve_sum += ve;
                        }
                        let k = seeds.len() as f64;
                        print!(" b{:3}: {:.3}/{:.3}", b, te_sum / k, ve_sum / k);
                    }
                    println!();
                }
            }
        }
    }
}
