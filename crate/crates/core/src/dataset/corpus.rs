use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use image::GrayImage;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::font::default_catalog;
use super::{align_ground_truth, resize_to_height, DatasetError, FontSpec, PatchSequence, Result, WordImage, PATCH};
use crate::tensor::seeded_rng;

pub const MANIFEST_VERSION: u32 = 1;

const VOCABULARY: &[&str] = &[
    "ACE",
    "ACT",
    "AGE",
    "AIR",
    "ARC",
    "ART",
    "BAY",
    "BED",
    "BOX",
    "CAB",
    "CUP",
    "DEW",
    "DOT",
    "EAR",
    "EGG",
    "ELM",
    "FIG",
    "FOX",
    "GEM",
    "HUB",
    "ICE",
    "INK",
    "JAR",
    "JET",
    "KEY",
    "KIT",
    "LAW",
    "MAP",
    "NET",
    "OAK",
    "OWL",
    "PEN",
    "RAY",
    "SKY",
    "TAX",
    "VOW",
    "WAX",
    "YAK",
    "ZIP",
    "ATOM",
    "BARN",
    "CLAY",
    "DUSK",
    "ECHO",
    "FERN",
    "GLOW",
    "HAZE",
    "IRIS",
    "JADE",
    "KELP",
    "LAMP",
    "MINT",
    "NOVA",
    "ONYX",
    "PINE",
    "QUAY",
    "REEF",
    "SAND",
    "TIDE",
    "VASE",
    "WHIM",
    "YARN",
    "ZONE",
    "AMBER",
    "BLAZE",
    "CHORD",
    "DRIFT",
    "EMBER",
    "FROST",
    "GRAIN",
    "HONEY",
    "IVORY",
    "JOLLY",
    "KNACK",
    "LEMON",
    "MAPLE",
    "NIGHT",
    "OCEAN",
    "PLUME",
    "QUILT",
    "RIVER",
    "STONE",
    "THYME",
    "UNITY",
    "VELVET",
    "WALTZ",
    "XENON",
    "YACHT",
    "ZEBRA",
    "ANCHOR",
    "BRIDGE",
    "CANYON",
    "DRAGON",
    "EFFORT",
    "FOREST",
    "GALAXY",
    "HARBOR",
    "ISLAND",
    "JUNGLE",
    "KERNEL",
    "LAGOON",
    "MEADOW",
    "NECTAR",
    "ORCHID",
    "PEPPER",
    "QUARTZ",
    "RIBBON",
    "SILVER",
    "TUNDRA",
    "UPLAND",
    "VOYAGE",
    "WINTER",
    "ZENITH",
    "AVENUE",
    "BISCUIT",
    "CAPTAIN",
    "DOLPHIN",
    "ECLIPSE",
    "FEATHER",
    "GLACIER",
    "HARVEST",
    "JOURNEY",
    "LANTERN",
    "MONARCH",
    "NETWORK",
    "ORBITAL",
    "PILGRIM",
    "QUANTUM",
    "RAINBOW",
    "SUNRISE",
    "TORNADO",
    "UNIFORM",
    "VOLCANO",
    "WHISPER",
    "ALPHABET",
    "BLUEBIRD",
    "CATALOGUE",
    "DAYBREAK",
    "EVERGREEN",
    "FIREWORK",
    "GRAPHITE",
    "HEADLINE",
    "KEYBOARD",
    "LANDMARK",
    "MOONLIGHT",
    "NOTEBOOK",
    "OVERTURE",
    "PARCHMENT",
    "SKYLIGHT",
    "TYPEFACE",
    "WATERFALL",
];

/// The built-in word list.
pub fn default_vocabulary() -> Vec<String> {
    VOCABULARY.iter().map(|w| w.to_string()).collect()
}

/// Corpus generation settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub seed: u64,
    /// Explicit vocabulary; when absent, `word_count` words are drawn from
    /// the built-in list using `seed`.
    pub words: Option<Vec<String>>,
    pub word_count: usize,
    /// Use the first `font_count` fonts of the default catalog.
    pub font_count: usize,
    /// Explicit catalog, overriding `font_count`.
    pub fonts: Option<Vec<FontSpec>>,
    pub source_font: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            words: None,
            word_count: 64,
            font_count: 10,
            fonts: None,
            source_font: 0,
        }
    }
}

impl DatasetConfig {
    pub fn catalog(&self) -> Result<Vec<FontSpec>> {
        let fonts = match &self.fonts {
            Some(f) => f.clone(),
            None => default_catalog().into_iter().take(self.font_count).collect(),
        };
        if fonts.len() < 2 {
            return Err(DatasetError::TooFewFonts { got: fonts.len() });
        }
        for (i, f) in fonts.iter().enumerate() {
            if f.id != i {
                return Err(DatasetError::StyleOutOfRange {
                    field: "id",
                    value: format!("font {:?} has id {} at position {i}", f.name, f.id),
                });
            }
            super::make_procedural_font(f.id, f.name.clone(), f.style.clone())?;
        }
        if self.source_font >= fonts.len() {
            return Err(DatasetError::UnknownFont {
                id: self.source_font,
                fonts: fonts.len(),
            });
        }
        Ok(fonts)
    }

    pub fn vocabulary(&self) -> Vec<String> {
        match &self.words {
            Some(w) => w.clone(),
            None => {
                let mut all = default_vocabulary();
                all.shuffle(&mut seeded_rng(self.seed));
                all.truncate(self.word_count);
                all
            }
        }
    }
}

/// One training pair: a source-font word and its target-font rendering at
/// the same size.
#[derive(Clone, Debug, PartialEq)]
pub struct WordSample {
    pub word: String,
    pub source: PatchSequence,
    pub target: PatchSequence,
    pub source_font: usize,
    pub target_font: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRow {
    pub word: String,
    pub source_path: String,
    pub target_font_id: usize,
    pub target_path: String,
    pub width: usize,
    pub patch_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub seed: u64,
    pub fonts: Vec<FontSpec>,
    pub samples: Vec<ManifestRow>,
}

/// Deduplicated, validated, sorted vocabulary plus the number of duplicates
/// dropped.
fn clean_vocabulary(vocabulary: &[String]) -> Result<(Vec<String>, usize)> {
    if vocabulary.is_empty() {
        return Err(DatasetError::EmptyVocabulary);
    }
    let unique: BTreeSet<&String> = vocabulary.iter().collect();
    for w in &unique {
        if w.is_empty() {
            return Err(DatasetError::EmptyWord);
        }
        if let Some(ch) = w.chars().find(|c| !c.is_ascii_uppercase()) {
            return Err(DatasetError::UnsupportedCharacter {
                word: w.to_string(),
                ch,
            });
        }
    }
    let dropped = vocabulary.len() - unique.len();
    Ok((unique.into_iter().cloned().collect(), dropped))
}

fn source_image(font: &FontSpec, word: &str) -> Result<WordImage> {
    Ok(resize_to_height(&font.render_word(word)?, PATCH))
}

fn target_image(font: &FontSpec, word: &str, source: &WordImage) -> Result<WordImage> {
    let render = resize_to_height(&font.render_word(word)?, PATCH);
    Ok(align_ground_truth(source, &render))
}

/// In-memory samples for every (word, target font) pair in sorted order.
/// Target fonts are all catalog fonts except the source.
pub fn build_samples(catalog: &[FontSpec], vocabulary: &[String], source_font: usize) -> Result<Vec<WordSample>> {
    if catalog.len() < 2 {
        return Err(DatasetError::TooFewFonts { got: catalog.len() });
    }
    let src_font = catalog.get(source_font).ok_or(DatasetError::UnknownFont {
        id: source_font,
        fonts: catalog.len(),
    })?;
    let (words, _) = clean_vocabulary(vocabulary)?;
    let mut out = Vec::new();
    for word in &words {
        let src = source_image(src_font, word)?;
        let source = PatchSequence::extract(&src)?;
        for font in catalog.iter().filter(|f| f.id != source_font) {
            out.push(WordSample {
                word: word.clone(),
                source: source.clone(),
                target: PatchSequence::extract(&target_image(font, word, &src)?)?,
                source_font,
                target_font: font.id,
            });
        }
    }
    Ok(out)
}

pub fn save_png(img: &WordImage, path: &Path) -> Result<()> {
    let bytes = img
        .pixels()
        .iter()
        .map(|&v| ((v.clamp(-1.0, 1.0) + 1.0) * 127.5).round() as u8)
        .collect();
    let gray = GrayImage::from_raw(img.width() as u32, img.height() as u32, bytes).expect("buffer matches size");
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| DatasetError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    gray.save(path).map_err(|e| DatasetError::Image {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

pub fn load_png(path: &Path) -> Result<WordImage> {
    let img = image::open(path)
        .map_err(|e| DatasetError::Image {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?
        .into_luma8();
    let (w, h) = img.dimensions();
    let pixels = img.into_raw().into_iter().map(|b| b as f64 / 127.5 - 1.0).collect();
    WordImage::new(h as usize, w as usize, pixels)
}

/// Outcome of [`generate_dataset`].
#[derive(Clone, Debug)]
pub struct GenerateSummary {
    pub manifest: Manifest,
    pub manifest_path: PathBuf,
    pub duplicates_dropped: usize,
}

/// Write source and aligned target PNGs plus `manifest.json` under `out_dir`.
/// Rows are sorted by (word, target font).
pub fn generate_dataset(
    catalog: &[FontSpec],
    vocabulary: &[String],
    source_font: usize,
    out_dir: &Path,
    seed: u64,
) -> Result<GenerateSummary> {
    if catalog.len() < 2 {
        return Err(DatasetError::TooFewFonts { got: catalog.len() });
    }
    let src_font = catalog.get(source_font).ok_or(DatasetError::UnknownFont {
        id: source_font,
        fonts: catalog.len(),
    })?;
    let (words, duplicates_dropped) = clean_vocabulary(vocabulary)?;
    if duplicates_dropped > 0 {
        log::warn!("dropped {duplicates_dropped} duplicate word(s) from the vocabulary");
    }
    fs::create_dir_all(out_dir).map_err(|source| DatasetError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut rows = Vec::new();
    for word in &words {
        let src = source_image(src_font, word)?;
        let source_path = format!("source/{word}.png");
        save_png(&src, &out_dir.join(&source_path))?;
        let patch_count = src.width().div_ceil(PATCH);
        for font in catalog.iter().filter(|f| f.id != source_font) {
            let target_path = format!("target/{}/{word}.png", font.id);
            save_png(&target_image(font, word, &src)?, &out_dir.join(&target_path))?;
            rows.push(ManifestRow {
                word: word.clone(),
                source_path: source_path.clone(),
                target_font_id: font.id,
                target_path,
                width: src.width(),
                patch_count,
            });
        }
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        seed,
        fonts: catalog.to_vec(),
        samples: rows,
    };
    let manifest_path = out_dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    fs::write(&manifest_path, json).map_err(|source| DatasetError::Io {
        path: manifest_path.clone(),
        source,
    })?;
    Ok(GenerateSummary {
        manifest,
        manifest_path,
        duplicates_dropped,
    })
}

/// Read a manifest and every image it references.
pub fn load_samples(manifest_path: &Path) -> Result<(Manifest, Vec<WordSample>)> {
    let text = fs::read_to_string(manifest_path).map_err(|source| DatasetError::Io {
        path: manifest_path.to_path_buf(),
        source,
    })?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| DatasetError::Manifest {
        path: manifest_path.to_path_buf(),
        detail: e.to_string(),
    })?;
    let bad = |detail: String| DatasetError::Manifest {
        path: manifest_path.to_path_buf(),
        detail,
    };
    if manifest.version != MANIFEST_VERSION {
        return Err(bad(format!("unsupported manifest version {}", manifest.version)));
    }
    let root = manifest_path.parent().unwrap_or(Path::new("."));
    let k = manifest.fonts.len();
    let targets: BTreeSet<usize> = manifest.samples.iter().map(|r| r.target_font_id).collect();
    // The source font is the one catalog font never used as a target.
    let source_font = (0..k).find(|id| !targets.contains(id)).unwrap_or(0);
    let mut sources: BTreeMap<String, PatchSequence> = BTreeMap::new();
    let mut samples = Vec::with_capacity(manifest.samples.len());
    for row in &manifest.samples {
        if row.target_font_id >= k {
            return Err(DatasetError::UnknownFont {
                id: row.target_font_id,
                fonts: k,
            });
        }
        let source = match sources.get(&row.source_path) {
            Some(s) => s.clone(),
            None => {
                let seq = PatchSequence::extract(&load_png(&root.join(&row.source_path))?)?;
                sources.insert(row.source_path.clone(), seq.clone());
                seq
            }
        };
        let target = PatchSequence::extract(&load_png(&root.join(&row.target_path))?)?;
        if source.original_width() != row.width || target.original_width() != row.width {
            return Err(bad(format!(
                "image widths for {:?} disagree with the manifest",
                row.word
            )));
        }
        samples.push(WordSample {
            word: row.word.clone(),
            source,
            target,
            source_font,
            target_font: row.target_font_id,
        });
    }
    Ok((manifest, samples))
}

/// Group sample indices by patch count, shuffle within each group, chunk into
/// batches of at most `batch_size`, then shuffle the batch order. Every
/// batch holds words of a single patch count.
pub fn bucket_batches(samples: &[WordSample], batch_size: usize, seed: u64) -> Vec<Vec<usize>> {
    let batch_size = batch_size.max(1);
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        groups.entry(s.source.count()).or_default().push(i);
    }
    let mut rng = seeded_rng(seed);
    let mut batches = Vec::new();
    for (_, mut idx) in groups {
        idx.shuffle(&mut rng);
        batches.extend(idx.chunks(batch_size).map(<[usize]>::to_vec));
    }
    batches.shuffle(&mut rng);
    batches
}
