//! Train, validation and test sources described by a run config.

use d2nn::data::{load_images, load_mnist, two_spot_task, EncodedImages, Encoding, LabeledImage};
use d2nn::optics::GridSpec;
use d2nn::training::{FieldSet, SampleSource};

use crate::config::{DataConfig, RunConfig};
use crate::error::{CliError, CliResult};

pub enum Source {
    Images(EncodedImages),
    Fields(FieldSet),
}

impl Source {
    pub fn as_dyn(&self) -> &dyn SampleSource {
        match self {
            Source::Images(s) => s,
            Source::Fields(s) => s,
        }
    }
}

pub struct Datasets {
    pub train: Source,
    pub validation: Option<Source>,
    pub test: Source,
}

fn encoded(images: Vec<LabeledImage>, grid: GridSpec, object_extent: f64, binarize: bool) -> CliResult<Source> {
    Ok(Source::Images(EncodedImages::new(
        images,
        grid,
        Encoding {
            object_extent,
            binarize,
        },
    )?))
}

fn take_front(images: &mut Vec<LabeledImage>, count: usize, what: &str) -> CliResult<Vec<LabeledImage>> {
    if count > images.len() {
        return Err(CliError::Config(format!(
            "{what} asks for {count} images but only {} remain",
            images.len()
        )));
    }
    let rest = images.split_off(count);
    Ok(std::mem::replace(images, rest))
}

pub fn load(config: &RunConfig) -> CliResult<Datasets> {
    let grid = config.grid;
    match &config.data {
        DataConfig::Mnist {
            dir,
            object_extent,
            binarize,
            train_count,
            validation_count,
            test_count,
        } => {
            let mut mnist = load_mnist(dir)?;
            let train = take_front(&mut mnist.train, *train_count, "train_count")?;
            let validation = take_front(&mut mnist.train, *validation_count, "validation_count")?;
            let test = take_front(&mut mnist.test, *test_count, "test_count")?;
            log::info!(
                "MNIST: {} train, {} validation, {} test",
                train.len(),
                validation.len(),
                test.len()
            );
            Ok(Datasets {
                train: encoded(train, grid, *object_extent, *binarize)?,
                validation: if validation.is_empty() {
                    None
                } else {
                    Some(encoded(validation, grid, *object_extent, *binarize)?)
                },
                test: encoded(test, grid, *object_extent, *binarize)?,
            })
        }
        DataConfig::ImageDir {
            dir,
            object_extent,
            binarize,
            load_policy,
            test_count,
        } => {
            let mut images: Vec<LabeledImage> = load_images(dir, *load_policy)?
                .into_iter()
                .map(|(_, img)| img)
                .collect();
            if *test_count > images.len() {
                return Err(CliError::Config(format!(
                    "test_count {test_count} exceeds the {} images in {}",
                    images.len(),
                    dir.display()
                )));
            }
            let test = images.split_off(images.len() - test_count);
            log::info!("image corpus: {} train, {} test", images.len(), test.len());
            Ok(Datasets {
                train: encoded(images, grid, *object_extent, *binarize)?,
                validation: None,
                test: encoded(test, grid, *object_extent, *binarize)?,
            })
        }
        DataConfig::TwoSpot {
            train_count,
            test_count,
            offset,
            jitter,
            spot,
            seed,
        } => Ok(Datasets {
            train: Source::Fields(two_spot_task(grid, *train_count, *offset, *jitter, *spot, *seed)?),
            validation: None,
            test: Source::Fields(two_spot_task(
                grid,
                *test_count,
                *offset,
                *jitter,
                *spot,
                seed.wrapping_add(1),
            )?),
        }),
    }
}
