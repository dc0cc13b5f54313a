#![allow(dead_code)]

use autodip::calibration::{CalibratedImage, GridResult, ImageGrid, SearchSpace};
use autodip::image::{Image, ImageMeta, Microscope};
use autodip::metrics::MetricReport;

/// Grid with made-up but internally consistent scores, seeded by `bias`.
pub fn synthetic_grid(id: &str, space: &SearchSpace, bias: f64) -> ImageGrid {
    let results = space
        .configs(0)
        .into_iter()
        .enumerate()
        .map(|(k, c)| {
            let psnr = 20.0 + ((k as f64 * 7.3 + bias * 13.1) % 11.0);
            let mse = 10f64.powf(-psnr / 10.0);
            GridResult {
                image_id: id.into(),
                spec: c.spec,
                iteration: c.iteration,
                metrics: MetricReport {
                    mae: mse.sqrt(),
                    mse,
                    psnr,
                    ssim: 0.5,
                    perceptual: ((k as f64 * 3.7 + bias * 1.9) % 5.0) / 10.0,
                    mean_gradient_diff: 0.01 * k as f64 - 0.3,
                },
            }
        })
        .collect();
    ImageGrid {
        image_id: id.into(),
        space: space.clone(),
        seed: 0,
        results,
        failures: vec![],
    }
}

pub fn calibrated(id: &str, microscope: Microscope, specimen: &str, bias: f64) -> CalibratedImage {
    let noisy = Image::from_fn(40, 40, |y, x| {
        ((y as f64 * bias + x as f64) % 9.0) as f32 / 9.0
    });
    CalibratedImage {
        meta: ImageMeta::new(id, microscope, specimen),
        noisy,
        grid: synthetic_grid(id, &SearchSpace::reduced(), bias),
    }
}

pub fn sample_images() -> Vec<CalibratedImage> {
    vec![
        calibrated("a", Microscope::Confocal, "dots", 1.0),
        calibrated("b", Microscope::Confocal, "filaments", 2.0),
        calibrated("c", Microscope::Widefield, "dots", 3.0),
        calibrated("d", Microscope::Widefield, "dots", 4.5),
        calibrated("e", Microscope::Unknown, "unknown", 5.0),
    ]
}
