//! Corpus ingestion, the train/validation split and the manifest.

use std::fs;
use std::path::{Path, PathBuf};

use nsb_core::ppm::read_ppm;
use nsb_core::Image;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{input, read, CliError, CliResult};

pub const VAL_FRACTION: f64 = 0.2;

#[derive(Debug, Clone)]
pub struct Entry {
    pub path: PathBuf,
    pub class: String,
    pub image: Image,
}

fn sorted_dir(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| input(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    v.sort();
    Ok(v)
}

fn is_image(p: &Path) -> bool {
    matches!(
        p.extension().and_then(|e| e.to_str()),
        Some("ppm" | "pgm" | "pnm")
    )
}

fn largest_pow2(n: usize) -> usize {
    1 << (usize::BITS - 1 - n.leading_zeros())
}

/// PPM files under `dir/<class>/`, sorted by class then file name.
/// Unreadable images, and images whose extents differ from the first
/// accepted one or are not divisible by `2^levels`, are skipped with a warning.
pub fn ingest(dir: &Path, levels: usize, center_crop: bool) -> CliResult<Vec<Entry>> {
    let mut out: Vec<Entry> = Vec::new();
    let f = 1usize << levels;
    for class_dir in sorted_dir(dir)?.into_iter().filter(|p| p.is_dir()) {
        let class = class_dir
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| input(format!("{}: class directory name is not UTF-8", class_dir.display())))?
            .to_string();
        for path in sorted_dir(&class_dir)?.into_iter().filter(|p| is_image(p)) {
            let mut image = match read_ppm(&path) {
                Ok(i) => i,
                Err(e) => {
                    eprintln!("warning: skipping {}: {e}", path.display());
                    continue;
                }
            };
            if center_crop {
                let s = largest_pow2(image.height().min(image.width()));
                image = image.center_crop(s, s)?;
            }
            let (h, w, _) = image.dims();
            if h % f != 0 || w % f != 0 {
                eprintln!(
                    "warning: skipping {}: {h}x{w} is not divisible by 2^{levels}",
                    path.display()
                );
                continue;
            }
            if let Some(first) = out.first() {
                if first.image.dims() != image.dims() {
                    eprintln!(
                        "warning: skipping {}: extents {:?} differ from {:?}",
                        path.display(),
                        image.dims(),
                        first.image.dims()
                    );
                    continue;
                }
            }
            out.push(Entry {
                path,
                class: class.clone(),
                image,
            });
        }
    }
    Ok(out)
}

/// Seeded shuffle; the first `round(0.2 n)` shuffled positions are validation.
pub fn split(n: usize, seed: u64) -> Vec<bool> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = (n as f64 * VAL_FRACTION).round() as usize;
    let mut is_val = vec![false; n];
    for &i in &idx[..n_val] {
        is_val[i] = true;
    }
    is_val
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub file: String,
    pub class: String,
    pub val: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
}

impl Manifest {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("file,class,split\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{}\n",
                r.file,
                r.class,
                if r.val { "val" } else { "train" }
            ));
        }
        s
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut lines = text.lines();
        if lines.next() != Some("file,class,split") {
            return Err(input("manifest header must be file,class,split"));
        }
        let rows = lines
            .filter(|l| !l.is_empty())
            .map(|l| {
                let parts: Vec<&str> = l.rsplitn(3, ',').collect();
                match parts.as_slice() {
                    [split, class, file] => Ok(ManifestRow {
                        file: file.to_string(),
                        class: class.to_string(),
                        val: match *split {
                            "val" => true,
                            "train" => false,
                            other => return Err(input(format!("unknown split {other:?}"))),
                        },
                    }),
                    _ => Err(input(format!("malformed manifest row {l:?}"))),
                }
            })
            .collect::<CliResult<_>>()?;
        Ok(Manifest { rows })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let bytes = read(path)?;
        Self::parse(&String::from_utf8_lossy(&bytes))
    }

    /// Sorted distinct class names; a row's label is its index here.
    pub fn classes(&self) -> Vec<String> {
        let mut c: Vec<String> = self.rows.iter().map(|r| r.class.clone()).collect();
        c.sort();
        c.dedup();
        c
    }

    pub fn labels(&self) -> Vec<usize> {
        let classes = self.classes();
        self.rows
            .iter()
            .map(|r| classes.binary_search(&r.class).expect("class listed"))
            .collect()
    }

    pub fn is_val(&self, id: usize) -> bool {
        self.rows.get(id).is_some_and(|r| r.val)
    }

    pub fn resolve_class(&self, class: &str) -> CliResult<usize> {
        let classes = self.classes();
        if let Ok(i) = class.parse::<usize>() {
            if i < classes.len() {
                return Ok(i);
            }
        }
        classes
            .iter()
            .position(|c| c == class)
            .ok_or_else(|| input(format!("unknown class {class:?}; known: {}", classes.join(", "))))
    }
}

/// All PPM files directly inside `dir`, sorted by name.
pub fn read_image_dir(dir: &Path) -> CliResult<Vec<Image>> {
    let imgs = sorted_dir(dir)?
        .into_iter()
        .filter(|p| is_image(p))
        .map(|p| read_ppm(&p).map_err(|e| input(format!("{}: {e}", p.display()))))
        .collect::<CliResult<Vec<_>>>()?;
    if imgs.is_empty() {
        return Err(CliError::EmptyDataset(format!("no images in {}", dir.display())));
    }
    Ok(imgs)
}
