use super::{
    build_store, CalibratedImage, CalibrationStore, GridResult, GroupObjective, ImageGrid,
    SearchSpace,
};
use crate::image::{Image, ImageMeta, Microscope};
use crate::metrics::MetricReport;

pub(crate) fn meta(id: &str, m: Microscope, s: &str) -> ImageMeta {
    ImageMeta::new(id, m, s)
}

pub(crate) fn fake_image(id: &str, m: Microscope, s: &str, bias: f64) -> CalibratedImage {
    let space = SearchSpace::reduced();
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
                    perceptual: ((k as f64 * 3.7 + bias) % 5.0) / 10.0,
                    mean_gradient_diff: 0.01 * k as f64 - 0.3,
                },
            }
        })
        .collect();
    let noisy = Image::from_fn(40, 40, |y, x| {
        ((y as f64 * bias + x as f64) % 9.0) as f32 / 9.0
    });
    CalibratedImage {
        meta: meta(id, m, s),
        noisy,
        grid: ImageGrid {
            image_id: id.into(),
            space,
            seed: 0,
            results,
            failures: vec![],
        },
    }
}

pub(crate) fn sample_store() -> CalibrationStore {
    let images = vec![
        fake_image("a", Microscope::Confocal, "dots", 1.0),
        fake_image("b", Microscope::Confocal, "filaments", 2.0),
        fake_image("c", Microscope::Widefield, "dots", 3.0),
        fake_image("d", Microscope::Unknown, "unknown", 4.0),
    ];
    build_store(&images, GroupObjective::MeanRankSum).unwrap()
}
