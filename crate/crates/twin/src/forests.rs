//! Forest files and training-sample CSVs for the geometry pipeline.
//!
//! Sample CSV columns: `forest,label,f0,f1,...`. `forest` is `accept`,
//! `plan` or `quality`; rows of shorter forests leave trailing cells
//! empty.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use twin_core::geometry::{
    train_forest, ForestParams, Forests, LabeledSample, RandomForest, SyntheticSet,
};

pub const FOREST_NAMES: [&str; 3] = ["accept", "plan", "quality"];

/// Parameters the shipped forests were trained with.
pub fn default_params() -> ForestParams {
    ForestParams {
        n_trees: 15,
        max_depth: Some(12),
        min_leaf: 1,
        feature_subsample: Some(4),
        bootstrap: true,
    }
}

pub fn load_forests(dir: &Path) -> Result<Forests> {
    let read = |name: &str| -> Result<RandomForest> {
        let path = dir.join(format!("{name}.forest.json"));
        let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))
    };
    Ok(Forests {
        accept: read("accept")?,
        plan: read("plan")?,
        quality: read("quality")?,
    })
}

pub fn save_forests(dir: &Path, f: &Forests) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (name, forest) in FOREST_NAMES.iter().zip([&f.accept, &f.plan, &f.quality]) {
        let mut bytes = serde_json::to_vec(forest)?;
        bytes.push(b'\n');
        fs::write(dir.join(format!("{name}.forest.json")), bytes)?;
    }
    Ok(())
}

pub fn train_all(set: &SyntheticSet, params: &ForestParams, seed: u64) -> Result<Forests> {
    let train = |name: &str, data: &[LabeledSample], salt: u64| {
        train_forest(data, params, seed.wrapping_add(salt))
            .with_context(|| format!("training the {name} forest"))
    };
    Ok(Forests {
        accept: train("accept", &set.accept, 0)?,
        plan: train("plan", &set.plan, 1)?,
        quality: train("quality", &set.quality, 2)?,
    })
}

pub fn samples_csv(set: &SyntheticSet) -> String {
    let groups = [
        ("accept", &set.accept),
        ("plan", &set.plan),
        ("quality", &set.quality),
    ];
    let width = groups
        .iter()
        .flat_map(|(_, g)| g.iter().map(|s| s.features.len()))
        .max()
        .unwrap_or(0);
    let mut out = String::from("forest,label");
    for i in 0..width {
        out.push_str(&format!(",f{i}"));
    }
    out.push('\n');
    for (name, group) in groups {
        for s in group.iter() {
            out.push_str(&format!("{name},{}", s.label));
            for i in 0..width {
                out.push(',');
                if let Some(v) = s.features.get(i) {
                    out.push_str(&v.to_string());
                }
            }
            out.push('\n');
        }
    }
    out
}

pub fn parse_samples_csv(text: &str) -> Result<SyntheticSet> {
    let mut set = SyntheticSet::default();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.starts_with("forest,label") => {}
        _ => bail!("missing `forest,label,...` header"),
    }
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut cells = line.split(',');
        let forest = cells.next().unwrap_or("");
        let label: u32 = cells
            .next()
            .unwrap_or("")
            .trim()
            .parse()
            .with_context(|| format!("line {}: bad label", i + 1))?;
        let features = cells
            .map(str::trim)
            .filter(|c| !c.is_empty())
            .map(|c| c.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("line {}: bad feature", i + 1))?;
        let sample = LabeledSample::new(features, label);
        match forest {
            "accept" => set.accept.push(sample),
            "plan" => set.plan.push(sample),
            "quality" => set.quality.push(sample),
            other => bail!("line {}: unknown forest `{other}`", i + 1),
        }
    }
    Ok(set)
}
