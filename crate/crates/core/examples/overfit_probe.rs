use std::time::Instant;

use dehate_core::evaluate::iou;
use dehate_core::masker::{self, synthetic, MaskerConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let lr: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(0.5);
    let steps: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(2000);
    let cfg = MaskerConfig::default();
    let data = synthetic::rectangles(&cfg, 16, 11).unwrap();
    let batch = synthetic::to_batch(&data, cfg.span_embed_dim).unwrap();
    let mut model = masker::init(&cfg).unwrap();
    let t = Instant::now();
    let log = masker::train_with(
        &mut model,
        &[batch],
        &masker::TrainOptions { steps, lr, loss: masker::LossKind::Bce },
        |s, l| {
            if s % 200 == 0 {
                eprintln!("step {s} loss {l:.5} t={:.1}s", t.elapsed().as_secs_f64());
            }
        },
    )
    .unwrap();
    let mut sum = 0.0;
    for inst in &data {
        let (m, _) = masker::predict(&model, &inst.image, &inst.spans, 0.5).unwrap();
        sum += iou(&m, &inst.mask).unwrap();
    }
    println!("final loss {:.5} mean iou {:.4} time {:.1}s", log.losses.last().unwrap(), sum / 16.0, t.elapsed().as_secs_f64());
}
