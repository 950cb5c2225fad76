//! Writes recorded classifier responses for the replica dataset, one
//! directory per prompt template, so that `retro eval --classifier replay`
//! reproduces a fixed outcome table offline.
//!
//!     cargo run -p retro-cli --example shape_replay -- data/replica.jsonl data/replay
//!
//! Each response lists the first `correct` items of a gold category under
//! their own heading, the next `incorrect` under another heading, leaves the
//! next `missing` out and puts the remaining `duplicated` under two headings.

use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;

use retro_core::classify::{build_prompt, heading_phrase, normalize, TemplateId};
use retro_core::domain::Category;
use retro_core::eval::load_dataset;
use retro_gateway::ReplayCompletion;

/// Per gold category, in `Category::ALL` order: (correct, incorrect, missing, duplicated).
type Shape = [(usize, usize, usize, usize); 4];

const SHAPES: [(TemplateId, Shape); 3] = [
    (TemplateId::P1, [(34, 1, 31, 0), (47, 16, 36, 0), (0, 5, 23, 0), (0, 1, 6, 0)]),
    (TemplateId::P2, [(47, 17, 2, 0), (78, 17, 4, 0), (23, 4, 1, 0), (0, 7, 0, 0)]),
    (TemplateId::P3, [(48, 17, 0, 1), (77, 16, 3, 3), (22, 4, 1, 1), (0, 3, 0, 4)]),
];

/// A heading of `template` other than `gold`'s.
fn wrong_heading(template: TemplateId, gold: Category) -> Category {
    let preferred = match gold {
        Category::WentWell => Category::DidNotGoWell,
        Category::DidNotGoWell => Category::WentWell,
        Category::UnclearNeutral => Category::DidNotGoWell,
        Category::Irrelevant => Category::WentWell,
    };
    if template.categories().contains(&preferred) && preferred != gold {
        preferred
    } else {
        *template.categories().iter().find(|c| **c != gold).expect("template has two headings")
    }
}

fn main() {
    let mut args = std::env::args().skip(1);
    let dataset = PathBuf::from(args.next().unwrap_or_else(|| "data/replica.jsonl".into()));
    let out_dir = PathBuf::from(args.next().unwrap_or_else(|| "data/replay".into()));
    let ds = load_dataset(&dataset).expect("dataset");

    let mut seen = HashSet::new();
    for item in &ds.items {
        assert!(seen.insert(normalize(&item.text)), "texts must be unique: {}", item.text);
    }

    let texts: Vec<&str> = ds.items.iter().map(|i| i.text.as_str()).collect();
    for (template, shape) in SHAPES {
        let mut sections: BTreeMap<Category, Vec<&str>> = BTreeMap::new();
        for (ci, gold) in Category::ALL.into_iter().enumerate() {
            let (correct, incorrect, missing, duplicated) = shape[ci];
            let items: Vec<&str> = ds.items.iter().filter(|i| i.gold == gold).map(|i| i.text.as_str()).collect();
            assert_eq!(items.len(), correct + incorrect + missing + duplicated, "{template} {gold:?}");
            let wrong = wrong_heading(template, gold);
            for (k, text) in items.into_iter().enumerate() {
                if k < correct {
                    sections.entry(gold).or_default().push(text);
                } else if k < correct + incorrect {
                    sections.entry(wrong).or_default().push(text);
                } else if k < correct + incorrect + missing {
                    continue;
                } else {
                    sections.entry(gold).or_default().push(text);
                    sections.entry(wrong).or_default().push(text);
                }
            }
        }

        let mut response = String::new();
        for category in template.categories() {
            response.push_str(heading_phrase(*category));
            response.push('\n');
            for text in sections.get(category).into_iter().flatten() {
                response.push_str("- ");
                response.push_str(text);
                response.push('\n');
            }
            response.push('\n');
        }

        let prompt = build_prompt(template, &texts).expect("prompt");
        let dir = out_dir.join(format!("prompt{}", template.number()));
        std::fs::create_dir_all(&dir).expect("create output dir");
        let path = ReplayCompletion::new(&dir).record(&prompt, &response).expect("write response");
        println!("{}", path.display());
    }
}
