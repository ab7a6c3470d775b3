use std::time::Instant;

use spada::selftrain::{train, validate_miou, Dataset, TrainConfig, TrainSample, ValSample};
use spada::synth::{generate_scene, SynthConfig};

fn benchmark_dataset(n_scenes: usize) -> Dataset {
    let cfg = SynthConfig {
        seed: 2024,
        height: 128,
        width: 128,
        n_regions: 12,
        noise_sigma: 0.05,
        n_points: 40,
        ..Default::default()
    };
    let mut train = Vec::new();
    let mut val = Vec::new();
    for k in 0..n_scenes {
        let scene = generate_scene(&cfg, k as u64).unwrap();
        let name = format!("scene_{k}");
        train.push(TrainSample {
            name: name.clone(),
            image: scene.image.clone(),
            scribbles: scene.scribbles,
            points: scene.points,
        });
        val.push(ValSample { name, image: scene.image, labels: scene.dense });
    }
    Dataset { train, val }
}

fn acceptance_cfg(seed: u64, mixing: bool, iters: u64) -> TrainConfig {
    TrainConfig {
        total_iters: iters,
        warmup_iters: 100,
        tile_size: 64,
        widths: vec![16, 32, 64],
        base_lr: 1e-3,
        alpha: 0.999,
        tau: 0.968,
        lambda: 1.0,
        val_interval: 0,
        log_interval: 0,
        seed,
        mixing,
        ..Default::default()
    }
}

#[test]
fn calibrate() {
    let dataset = benchmark_dataset(6);
    for (name, mixing, alpha, lr) in [
        ("spada a.99  lr1e-3", true, 0.99, 1e-3),
        ("spada a.98  lr1e-3", true, 0.98, 1e-3),
        ("spada a.99  lr2e-3", true, 0.99, 2e-3),
        ("base        lr2e-3", false, 0.99, 2e-3),
    ] {
        let mut cfg = acceptance_cfg(1, mixing, 2000);
        cfg.alpha = alpha;
        cfg.base_lr = lr;
        cfg.log_interval = 400;
        cfg.val_interval = 400;
        let t0 = Instant::now();
        let out = train(&dataset, &cfg).unwrap();
        for l in &out.log {
            println!("  iter {} cover {:.3} L_S {:.3} val {:?}", l.iter, l.pseudo_cover, l.loss_scribble, l.val_miou.map(|v| (v*10.0).round()/10.0));
        }
        let miou = validate_miou(&out.student, &dataset.val).unwrap().unwrap();
        println!("{name}: student mIoU {miou:.2} in {:.1}s", t0.elapsed().as_secs_f64());
    }
}
