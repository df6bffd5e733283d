//! Seeded synthetic movie database.
//!
//! `title` holds one row per movie. `production_year` and `budget` are
//! strongly correlated, `kind_id` is Zipf-skewed, `name` is a templated
//! phrase and `release` a parenthesized date whose year follows
//! `production_year`. `movie_info` references `title.id` with a skewed
//! fan-out; its `info_type_id` and `note` depend on the movie's kind.
//! An optional `cast_info` table references `title.id` as well.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Zipf};

use crate::data::{Column, ColumnData, Dataset, Table};
use crate::schema::{ForeignKey, IndexInfo};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetConfig {
    pub title_rows: usize,
    pub info_rows: usize,
    /// Zero leaves `cast_info` out.
    pub cast_rows: usize,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            title_rows: 10_000,
            info_rows: 10_000,
            cast_rows: 0,
            seed: 42,
        }
    }
}

const ADJECTIVES: &[&str] = &[
    "Dark", "Silent", "Golden", "Broken", "Last", "Hidden", "Wild", "Lost", "Red", "Eternal", "Frozen", "Secret",
];
const NOUNS: &[&str] = &[
    "Dinosaur", "Dingo", "River", "Kingdom", "Night", "Summer", "Garden", "Empire", "Island", "Storm", "Mirror",
    "Harbor", "Kaspar", "Desert", "Castle", "Circus",
];
const PLACES: &[&str] = &["Paris", "Tokyo", "Berlin", "Space", "Texas", "Rome", "Winter", "Venice"];
const NOTES: &[&[&str]] = &[
    &["(USA)", "(UK)", "(worldwide)", "(theatrical)"],
    &["(TV)", "(USA)", "(Canada)", "(syndication)"],
    &["(video)", "(DVD)", "(Blu-ray)", "(USA)"],
    &["(festival)", "(France)", "(Germany)", "(limited)"],
];

fn phrase(rng: &mut ChaCha8Rng, kind: i64) -> String {
    // Movie kinds favour different vocabularies.
    let k = kind as usize;
    let adj = ADJECTIVES[(k * 3 + rng.random_range(0..4)) % ADJECTIVES.len()];
    let noun = NOUNS[(k * 2 + rng.random_range(0..6)) % NOUNS.len()];
    match rng.random_range(0..3) {
        0 => format!("{adj} {noun}"),
        1 => format!("{noun} in {}", PLACES[rng.random_range(0..PLACES.len())]),
        _ => format!("The {adj} {noun} {}", rng.random_range(1..4)),
    }
}

fn int_col(table: &str, name: &str, v: Vec<i64>) -> Column {
    Column {
        name: format!("{table}.{name}"),
        data: ColumnData::Int(v),
    }
}

fn float_col(table: &str, name: &str, v: Vec<f64>) -> Column {
    Column {
        name: format!("{table}.{name}"),
        data: ColumnData::Float(v),
    }
}

fn str_col(table: &str, name: &str, v: Vec<String>) -> Column {
    Column {
        name: format!("{table}.{name}"),
        data: ColumnData::Str(v),
    }
}

pub fn generate_dataset(cfg: &DatasetConfig) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.title_rows;
    let zipf_kind = Zipf::new(7.0, 1.2).expect("valid zipf");
    let noise = Normal::new(0.0, 6.0).expect("valid normal");

    let mut year = Vec::with_capacity(n);
    let mut budget = Vec::with_capacity(n);
    let mut kind = Vec::with_capacity(n);
    let mut name = Vec::with_capacity(n);
    let mut release = Vec::with_capacity(n);
    for _ in 0..n {
        // Skewed toward recent years.
        let u: f64 = rng.random();
        let y = 1900 + (120.0 * u.sqrt()).floor() as i64;
        let k = zipf_kind.sample(&mut rng) as i64;
        let b = ((y - 1900) as f64 * 1.5 + noise.sample(&mut rng) + 10.0 * k as f64).max(0.5);
        year.push(y);
        budget.push((b * 100.0).round() / 100.0);
        kind.push(k);
        name.push(phrase(&mut rng, k));
        release.push(format!(
            "({y}-{:02}-{:02})",
            rng.random_range(1..=12),
            rng.random_range(1..=28)
        ));
    }
    let title = Table::new(
        "title",
        vec![
            int_col("title", "id", (0..n as i64).collect()),
            int_col("title", "production_year", year.clone()),
            float_col("title", "budget", budget),
            int_col("title", "kind_id", kind.clone()),
            str_col("title", "name", name),
            str_col("title", "release", release),
        ],
    );

    // Popular (low id within a kind bucket) movies get more info rows.
    let fanout = Zipf::new(n.max(1) as f64, 0.6).expect("valid zipf");
    let m = cfg.info_rows;
    let mut movie = Vec::with_capacity(m);
    let mut info_type = Vec::with_capacity(m);
    let mut votes = Vec::with_capacity(m);
    let mut note = Vec::with_capacity(m);
    for _ in 0..m {
        let t = (fanout.sample(&mut rng) as usize - 1).min(n.saturating_sub(1));
        let k = kind.get(t).copied().unwrap_or(1);
        let group = NOTES[(k as usize) % NOTES.len()];
        movie.push(t as i64);
        info_type.push(1 + (k * 3 + rng.random_range(0..3)) % 20);
        votes.push((year.get(t).copied().unwrap_or(1950) - 1890) * rng.random_range(1..40));
        note.push(group[rng.random_range(0..group.len())].to_string());
    }
    let info = Table::new(
        "movie_info",
        vec![
            int_col("movie_info", "id", (0..m as i64).collect()),
            int_col("movie_info", "movie_id", movie),
            int_col("movie_info", "info_type_id", info_type),
            int_col("movie_info", "votes", votes),
            str_col("movie_info", "note", note),
        ],
    );

    let mut tables = vec![title, info];
    let mut indexes = vec![
        IndexInfo {
            name: "title_pkey".into(),
            column: "title.id".into(),
        },
        IndexInfo {
            name: "title_year_idx".into(),
            column: "title.production_year".into(),
        },
        IndexInfo {
            name: "movie_info_movie_idx".into(),
            column: "movie_info.movie_id".into(),
        },
    ];
    let mut fks = vec![ForeignKey {
        from: "movie_info.movie_id".into(),
        to: "title.id".into(),
    }];
    if cfg.cast_rows > 0 {
        let c = cfg.cast_rows;
        let mut movie = Vec::with_capacity(c);
        let mut role = Vec::with_capacity(c);
        let mut person = Vec::with_capacity(c);
        for _ in 0..c {
            let t = rng.random_range(0..n.max(1)) as i64;
            movie.push(t);
            role.push(1 + (t % 11 + rng.random_range(0..2)) % 11);
            person.push(rng.random_range(0..(c as i64 / 4).max(1)));
        }
        tables.push(Table::new(
            "cast_info",
            vec![
                int_col("cast_info", "id", (0..c as i64).collect()),
                int_col("cast_info", "movie_id", movie),
                int_col("cast_info", "person_id", person),
                int_col("cast_info", "role_id", role),
            ],
        ));
        indexes.push(IndexInfo {
            name: "cast_info_movie_idx".into(),
            column: "cast_info.movie_id".into(),
        });
        fks.push(ForeignKey {
            from: "cast_info.movie_id".into(),
            to: "title.id".into(),
        });
    }
    Dataset::from_tables(tables, indexes, fks)
}

/// Pearson correlation of two numeric columns of one table.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}
