//! Seeded synthetic listing corpus whose marginals mirror the published
//! descriptive statistics: six cities with 23/7/24/23/15/29 districts, type
//! counts 511/441/214 for campur/putri/putra, 1,205 rows and a 68-listing
//! mode at Rp 1.000.000.
//!
//! Price rule: city base + district offset + type offset
//! + 75,000 per facility + N(0, 50,000), rounded to the nearest 25,000.

use kosm_core::dataset::{CleanDataset, Record};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const MIRROR_ROWS: usize = 1205;
pub const NOISE_SIGMA: f64 = 50_000.0;
pub const PER_FACILITY: f64 = 75_000.0;
pub const PRICE_STEP: f64 = 25_000.0;
pub const MODE_PRICE: u64 = 1_000_000;
pub const MODE_COUNT: usize = 68;
pub const MAX_FACILITIES: u32 = 10;

pub struct City {
    pub name: &'static str,
    pub rows: usize,
    pub base: f64,
    pub areas: &'static [&'static str],
}

pub const CITIES: [City; 6] = [
    City {
        name: "jogja",
        rows: 290,
        base: 450_000.0,
        areas: &[
            "depok",
            "mlati",
            "gamping",
            "ngaglik",
            "kalasan",
            "berbah",
            "umbulharjo",
            "gondokusuman",
            "danurejan",
            "gedongtengen",
            "jetis",
            "tegalrejo",
            "wirobrajan",
            "mantrijeron",
            "kraton",
            "mergangsan",
            "pakualaman",
            "gondomanan",
            "ngampilan",
            "kotagede",
            "banguntapan",
            "sewon",
            "kasihan",
        ],
    },
    City {
        name: "malang",
        rows: 160,
        base: 400_000.0,
        areas: &[
            "lowokwaru",
            "klojen",
            "blimbing",
            "sukun",
            "kedungkandang",
            "dau",
            "singosari",
        ],
    },
    City {
        name: "jakarta",
        rows: 240,
        base: 1_050_000.0,
        areas: &[
            "tebet",
            "setiabudi",
            "menteng",
            "kebayoran baru",
            "kebayoran lama",
            "mampang prapatan",
            "pancoran",
            "cilandak",
            "pasar minggu",
            "jagakarsa",
            "grogol petamburan",
            "palmerah",
            "kebon jeruk",
            "tanah abang",
            "gambir",
            "senen",
            "cempaka putih",
            "kemayoran",
            "kelapa gading",
            "pulo gadung",
            "matraman",
            "jatinegara",
            "duren sawit",
            "cakung",
        ],
    },
    City {
        name: "surabaya",
        rows: 205,
        base: 700_000.0,
        areas: &[
            "rungkut",
            "gubeng",
            "sukolilo",
            "mulyorejo",
            "tambaksari",
            "wonokromo",
            "wonocolo",
            "tenggilis mejoyo",
            "gunung anyar",
            "wiyung",
            "karang pilang",
            "jambangan",
            "gayungan",
            "sawahan",
            "tegalsari",
            "genteng",
            "bubutan",
            "simokerto",
            "kenjeran",
            "bulak",
            "lakarsantri",
            "sukomanunggal",
            "dukuh pakis",
        ],
    },
    City {
        name: "semarang",
        rows: 120,
        base: 500_000.0,
        areas: &[
            "tembalang",
            "banyumanik",
            "gajahmungkur",
            "candisari",
            "semarang selatan",
            "semarang tengah",
            "semarang timur",
            "semarang barat",
            "semarang utara",
            "pedurungan",
            "gayamsari",
            "genuk",
            "ngaliyan",
            "gunungpati",
            "mijen",
        ],
    },
    City {
        name: "bandung",
        rows: 190,
        base: 650_000.0,
        areas: &[
            "coblong",
            "sukajadi",
            "cidadap",
            "sukasari",
            "cicendo",
            "andir",
            "bandung wetan",
            "sumur bandung",
            "regol",
            "lengkong",
            "batununggal",
            "kiaracondong",
            "antapani",
            "arcamanik",
            "mandalajati",
            "ujung berung",
            "cibiru",
            "panyileukan",
            "cinambo",
            "gedebage",
            "rancasari",
            "buahbatu",
            "bandung kidul",
            "astanaanyar",
            "bojongloa kaler",
            "bojongloa kidul",
            "babakan ciparay",
            "bandung kulon",
            "cibeunying kaler",
        ],
    },
];

/// `(type, rows, price offset)`.
pub const TYPES: [(&str, usize, f64); 5] = [
    ("campur", 511, 100_000.0),
    ("putri", 441, 50_000.0),
    ("putra", 214, 0.0),
    ("pasutri", 25, 250_000.0),
    ("karyawan", 14, 150_000.0),
];

const NAMES: [&str; 12] = [
    "Melati",
    "Mawar",
    "Anggrek",
    "Kenanga",
    "Flamboyan",
    "Cempaka",
    "Pondok Indah",
    "Griya",
    "Wisma",
    "Puri",
    "Omah",
    "Graha",
];

/// Splits `total` proportionally to `weights` (largest remainder).
fn apportion(weights: &[usize], total: usize) -> Vec<usize> {
    let sum: usize = weights.iter().sum();
    let mut out: Vec<usize> = weights.iter().map(|w| w * total / sum).collect();
    let mut rem: Vec<(usize, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, w)| (w * total % sum, i))
        .collect();
    rem.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let short = total - out.iter().sum::<usize>();
    for &(_, i) in rem.iter().take(short) {
        out[i] += 1;
    }
    out
}

fn title(s: &str) -> String {
    s.split(' ')
        .map(|w| {
            let mut c = w.chars();
            c.next()
                .map(|f| f.to_uppercase().chain(c).collect::<String>())
                .unwrap_or_default()
        })
        .collect::<Vec<_>>()
        .join(" ")
}

struct Draft {
    record: Record,
    exact: f64,
}

/// Deterministic corpus of `rows` listings under `seed`.
pub fn generate(seed: u64, rows: usize) -> CleanDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, NOISE_SIGMA).expect("valid sigma");

    let city_rows = apportion(&CITIES.map(|c| c.rows), rows);
    let type_rows = apportion(&TYPES.map(|t| t.1), rows);
    let mut types: Vec<usize> = type_rows
        .iter()
        .enumerate()
        .flat_map(|(t, &n)| std::iter::repeat_n(t, n))
        .collect();
    types.shuffle(&mut rng);
    let mut types = types.into_iter();

    let mut drafts = Vec::with_capacity(rows);
    for (city, &n) in CITIES.iter().zip(&city_rows) {
        let offsets: Vec<f64> = city
            .areas
            .iter()
            .map(|_| f64::from(rng.random_range(-6i32..=6)) * 10_000.0)
            .collect();
        let mut areas: Vec<usize> = (0..n)
            .map(|i| {
                if i < city.areas.len() {
                    i
                } else {
                    rng.random_range(0..city.areas.len())
                }
            })
            .collect();
        areas.shuffle(&mut rng);
        for (i, a) in areas.into_iter().enumerate() {
            let t = types.next().expect("type pool sized to rows");
            let score = rng.random_range(0..=MAX_FACILITIES);
            let exact = city.base
                + offsets[a]
                + TYPES[t].2
                + PER_FACILITY * f64::from(score)
                + noise.sample(&mut rng);
            let name = format!(
                "Kost {} {} {} {}",
                NAMES[rng.random_range(0..NAMES.len())],
                i + 1,
                title(city.areas[a]),
                title(city.name)
            );
            drafts.push(Draft {
                record: Record {
                    kost_name: name,
                    kota: city.name.to_string(),
                    type_kos: TYPES[t].0.to_string(),
                    area: city.areas[a].to_string(),
                    facility_score: score,
                    harga_nominal: round_price(exact),
                },
                exact,
            });
        }
    }
    let target = (MODE_COUNT * rows + MIRROR_ROWS / 2) / MIRROR_ROWS;
    pin_mode(&mut drafts, target);
    CleanDataset::from_records(drafts.into_iter().map(|d| d.record).collect())
}

fn round_price(p: f64) -> u64 {
    ((p / PRICE_STEP).round() * PRICE_STEP).max(PRICE_STEP) as u64
}

/// Moves listings in or out of the Rp 1.000.000 bucket until it holds
/// exactly `target` rows; listings closest to the boundary move first.
fn pin_mode(drafts: &mut [Draft], target: usize) {
    let dist = |d: &Draft| (d.exact - MODE_PRICE as f64).abs();
    let mut inside: Vec<usize> = (0..drafts.len())
        .filter(|&i| drafts[i].record.harga_nominal == MODE_PRICE)
        .collect();
    if inside.len() > target {
        inside.sort_by(|&a, &b| {
            dist(&drafts[b])
                .total_cmp(&dist(&drafts[a]))
                .then(a.cmp(&b))
        });
        for &i in &inside[..inside.len() - target] {
            let step = PRICE_STEP as u64;
            let d = &mut drafts[i];
            d.record.harga_nominal = if d.exact < MODE_PRICE as f64 {
                MODE_PRICE - step
            } else {
                MODE_PRICE + step
            };
        }
    } else {
        let mut outside: Vec<usize> = (0..drafts.len())
            .filter(|&i| drafts[i].record.harga_nominal != MODE_PRICE)
            .collect();
        outside.sort_by(|&a, &b| {
            dist(&drafts[a])
                .total_cmp(&dist(&drafts[b]))
                .then(a.cmp(&b))
        });
        for &i in outside.iter().take(target - inside.len()) {
            drafts[i].record.harga_nominal = MODE_PRICE;
        }
    }
}
