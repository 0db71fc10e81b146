//! Named surface, mode and variation families, their parameter schemas, and
//! the JSON form used in manifests.
//!
//! A family is written as an object with a `family` key plus its parameters:
//!
//! ```json
//! {"family": "slice_plus", "s0": 0.5, "eps": 0.05, "mode": {"family": "harmonic", "l": 1, "m": 0}}
//! ```

use rstab_core::families::{Mode, SurfaceFamily, VariationFamily};
use rstab_core::grid::GridKind;
use rstab_core::spacetime::ModelKind;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::manifest::Diagnostics;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Surface,
    Mode,
    Variation,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamSpec {
    pub name: &'static str,
    /// `number`, `integer`, `unsigned`, `string` or `mode`.
    #[serde(rename = "type")]
    pub ty: &'static str,
    pub description: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilyEntry {
    pub category: Category,
    pub name: &'static str,
    /// Grid the family lives on; `None` for both.
    pub grid: Option<GridKind>,
    pub description: &'static str,
    pub params: Vec<ParamSpec>,
    pub example: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct Catalog {
    pub families: Vec<FamilyEntry>,
}

impl Catalog {
    pub fn names(&self, category: Category) -> Vec<&'static str> {
        self.families
            .iter()
            .filter(|f| f.category == category)
            .map(|f| f.name)
            .collect()
    }

    pub fn find(&self, category: Category, name: &str) -> Option<&FamilyEntry> {
        self.families.iter().find(|f| f.category == category && f.name == name)
    }
}

fn p(name: &'static str, ty: &'static str, description: &'static str) -> ParamSpec {
    ParamSpec { name, ty, description }
}

pub fn catalog() -> Catalog {
    use Category::*;
    let families = vec![
        FamilyEntry {
            category: Surface,
            name: "slice",
            grid: None,
            description: "level set s = s0",
            params: vec![p("s0", "number", "time of the slice")],
            example: json!({"family": "slice", "s0": 0.693}),
        },
        FamilyEntry {
            category: Surface,
            name: "slice_plus",
            grid: None,
            description: "s = s0 + eps * mode",
            params: vec![
                p("s0", "number", "base time"),
                p("eps", "number", "amplitude"),
                p("mode", "mode", "perturbation shape"),
            ],
            example: json!({"family": "slice_plus", "s0": 0.693, "eps": 0.05,
                            "mode": {"family": "harmonic", "l": 1, "m": 0}}),
        },
        FamilyEntry {
            category: Surface,
            name: "fourier",
            grid: Some(GridKind::Torus),
            description: "s = s0 + eps * sin(kx x + ky y)",
            params: vec![
                p("s0", "number", "base time, default 0"),
                p("eps", "number", "amplitude"),
                p("kx", "integer", "wave number in x"),
                p("ky", "integer", "wave number in y"),
            ],
            example: json!({"family": "fourier", "s0": 0.0, "eps": 0.1, "kx": 1, "ky": 1}),
        },
        FamilyEntry {
            category: Surface,
            name: "table",
            grid: None,
            description: "node values from a CSV file of node,u rows, one file per resolution",
            params: vec![p(
                "path",
                "string",
                "file path; {n1} and {n2} become the grid size, relative paths start at the manifest",
            )],
            example: json!({"family": "table", "path": "u_{n1}x{n2}.csv"}),
        },
        FamilyEntry {
            category: Mode,
            name: "harmonic",
            grid: Some(GridKind::Sphere),
            description: "P_l^|m|(cos θ) cos(mφ), sin(|m|φ) for m < 0",
            params: vec![p("l", "unsigned", "degree"), p("m", "integer", "order, |m| <= l")],
            example: json!({"family": "harmonic", "l": 2, "m": 0}),
        },
        FamilyEntry {
            category: Mode,
            name: "fourier",
            grid: Some(GridKind::Torus),
            description: "sin(kx x + ky y)",
            params: vec![p("kx", "integer", "wave number in x"), p("ky", "integer", "wave number in y")],
            example: json!({"family": "fourier", "kx": 1, "ky": 0}),
        },
        FamilyEntry {
            category: Variation,
            name: "const",
            grid: None,
            description: "f0 = a",
            params: vec![p("a", "number", "value")],
            example: json!({"family": "const", "a": 1.0}),
        },
        FamilyEntry {
            category: Variation,
            name: "harmonic",
            grid: Some(GridKind::Sphere),
            description: "f0 = a * harmonic(l, m)",
            params: vec![
                p("l", "unsigned", "degree"),
                p("m", "integer", "order"),
                p("a", "number", "amplitude"),
            ],
            example: json!({"family": "harmonic", "l": 2, "m": 0, "a": 1.0}),
        },
        FamilyEntry {
            category: Variation,
            name: "fourier",
            grid: Some(GridKind::Torus),
            description: "f0 = a * sin(kx x + ky y)",
            params: vec![
                p("kx", "integer", "wave number in x"),
                p("ky", "integer", "wave number in y"),
                p("a", "number", "amplitude"),
            ],
            example: json!({"family": "fourier", "kx": 1, "ky": 0, "a": 1.0}),
        },
    ];
    Catalog { families }
}

/// Closest candidate by normalized Levenshtein similarity.
pub fn nearest<'a>(word: &str, candidates: &[&'a str]) -> Option<&'a str> {
    candidates
        .iter()
        .map(|c| (strsim::normalized_levenshtein(word, c), *c))
        .filter(|(score, _)| *score > 0.3)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| c)
}

pub fn unknown(kind: &str, word: &str, candidates: &[&str]) -> String {
    match nearest(word, candidates) {
        Some(n) => format!("unknown {kind} \"{word}\" (did you mean \"{n}\"?)"),
        None => format!("unknown {kind} \"{word}\"; expected one of {}", candidates.join(", ")),
    }
}

/// Reads typed fields out of one JSON object, recording every problem.
pub struct Fields<'a> {
    map: &'a Map<String, Value>,
    path: String,
}

impl<'a> Fields<'a> {
    pub fn new(value: &'a Value, path: &str, diag: &mut Diagnostics) -> Option<Self> {
        match value.as_object() {
            Some(map) => Some(Self { map, path: path.to_string() }),
            None => {
                diag.push(format!("{path}: expected an object"));
                None
            }
        }
    }

    pub fn path(&self, key: &str) -> String {
        format!("{}.{key}", self.path)
    }

    /// `null` counts as absent.
    pub fn get(&self, key: &str) -> Option<&'a Value> {
        self.map.get(key).filter(|v| !v.is_null())
    }

    pub fn number(&self, key: &str, diag: &mut Diagnostics) -> Option<f64> {
        match self.get(key) {
            None => {
                diag.push(format!("{}: missing", self.path(key)));
                None
            }
            Some(v) => match v.as_f64().filter(|x| x.is_finite()) {
                Some(x) => Some(x),
                None => {
                    diag.push(format!("{}: expected a finite number", self.path(key)));
                    None
                }
            },
        }
    }

    pub fn number_or(&self, key: &str, default: f64, diag: &mut Diagnostics) -> Option<f64> {
        if self.get(key).is_some() {
            self.number(key, diag)
        } else {
            Some(default)
        }
    }

    pub fn integer(&self, key: &str, diag: &mut Diagnostics) -> Option<i64> {
        match self.get(key) {
            None => {
                diag.push(format!("{}: missing", self.path(key)));
                None
            }
            Some(v) => match v.as_i64() {
                Some(x) => Some(x),
                None => {
                    diag.push(format!("{}: expected an integer", self.path(key)));
                    None
                }
            },
        }
    }

    pub fn unsigned(&self, key: &str, diag: &mut Diagnostics) -> Option<usize> {
        match self.get(key) {
            None => {
                diag.push(format!("{}: missing", self.path(key)));
                None
            }
            Some(v) => match v.as_u64() {
                Some(x) => Some(x as usize),
                None => {
                    diag.push(format!("{}: expected a non-negative integer", self.path(key)));
                    None
                }
            },
        }
    }

    pub fn string(&self, key: &str, diag: &mut Diagnostics) -> Option<&'a str> {
        match self.get(key) {
            None => {
                diag.push(format!("{}: missing", self.path(key)));
                None
            }
            Some(v) => match v.as_str() {
                Some(s) => Some(s),
                None => {
                    diag.push(format!("{}: expected a string", self.path(key)));
                    None
                }
            },
        }
    }

    /// Flags keys outside `allowed`, naming the nearest allowed key.
    pub fn deny_unknown(&self, allowed: &[&str], diag: &mut Diagnostics) {
        for key in self.map.keys() {
            if !allowed.contains(&key.as_str()) {
                diag.push(format!("{}: {}", self.path, unknown("field", key, allowed)));
            }
        }
    }
}

fn family_entry<'c>(
    cat: &'c Catalog,
    category: Category,
    fields: &Fields,
    diag: &mut Diagnostics,
) -> Option<&'c FamilyEntry> {
    let name = fields.string("family", diag)?;
    match cat.find(category, name) {
        Some(entry) => {
            let mut allowed: Vec<&str> = entry.params.iter().map(|p| p.name).collect();
            allowed.push("family");
            fields.deny_unknown(&allowed, diag);
            Some(entry)
        }
        None => {
            let kind = match category {
                Category::Surface => "surface family",
                Category::Mode => "mode",
                Category::Variation => "variation family",
            };
            diag.push(format!("{}: {}", fields.path("family"), unknown(kind, name, &cat.names(category))));
            None
        }
    }
}

pub fn parse_mode(value: &Value, path: &str, diag: &mut Diagnostics) -> Option<Mode> {
    let cat = catalog();
    let f = Fields::new(value, path, diag)?;
    let entry = family_entry(&cat, Category::Mode, &f, diag)?;
    match entry.name {
        "harmonic" => {
            let (l, m) = (f.unsigned("l", diag), f.integer("m", diag));
            let (l, m) = (l?, m?);
            if m.unsigned_abs() as usize > l {
                diag.push(format!("{path}: harmonic order |m| = {} exceeds degree {l}", m.abs()));
                return None;
            }
            Some(Mode::Harmonic { l, m })
        }
        "fourier" => {
            let (kx, ky) = (f.integer("kx", diag), f.integer("ky", diag));
            Some(Mode::Fourier { kx: kx?, ky: ky? })
        }
        other => unreachable!("mode {other} has no parser"),
    }
}

pub fn parse_surface(value: &Value, path: &str, diag: &mut Diagnostics) -> Option<SurfaceFamily> {
    let cat = catalog();
    let f = Fields::new(value, path, diag)?;
    let entry = family_entry(&cat, Category::Surface, &f, diag)?;
    match entry.name {
        "slice" => Some(SurfaceFamily::Slice { s0: f.number("s0", diag)? }),
        "slice_plus" => {
            let s0 = f.number("s0", diag);
            let eps = f.number("eps", diag);
            let mode = match f.get("mode") {
                Some(m) => parse_mode(m, &f.path("mode"), diag),
                None => {
                    diag.push(format!("{}: missing", f.path("mode")));
                    None
                }
            };
            Some(SurfaceFamily::SlicePlus { s0: s0?, eps: eps?, mode: mode? })
        }
        "fourier" => {
            let s0 = f.number_or("s0", 0.0, diag);
            let eps = f.number("eps", diag);
            let (kx, ky) = (f.integer("kx", diag), f.integer("ky", diag));
            Some(SurfaceFamily::SlicePlus {
                s0: s0?,
                eps: eps?,
                mode: Mode::Fourier { kx: kx?, ky: ky? },
            })
        }
        "table" => {
            let path = f.string("path", diag)?;
            if path.is_empty() {
                diag.push(format!("{}: empty path", f.path("path")));
                return None;
            }
            Some(SurfaceFamily::Table { path: path.to_string() })
        }
        other => unreachable!("surface family {other} has no parser"),
    }
}

pub fn parse_variation(value: &Value, path: &str, diag: &mut Diagnostics) -> Option<VariationFamily> {
    let cat = catalog();
    let f = Fields::new(value, path, diag)?;
    let entry = family_entry(&cat, Category::Variation, &f, diag)?;
    match entry.name {
        "const" => Some(VariationFamily::Const { a: f.number("a", diag)? }),
        "harmonic" => {
            let (l, m, a) = (f.unsigned("l", diag), f.integer("m", diag), f.number("a", diag));
            let (l, m, a) = (l?, m?, a?);
            if m.unsigned_abs() as usize > l {
                diag.push(format!("{path}: harmonic order |m| = {} exceeds degree {l}", m.abs()));
                return None;
            }
            Some(VariationFamily::Harmonic { l, m, a })
        }
        "fourier" => {
            let (kx, ky, a) = (f.integer("kx", diag), f.integer("ky", diag), f.number("a", diag));
            Some(VariationFamily::Fourier { kx: kx?, ky: ky?, a: a? })
        }
        other => unreachable!("variation family {other} has no parser"),
    }
}

pub fn mode_json(mode: &Mode) -> Value {
    match *mode {
        Mode::Harmonic { l, m } => json!({"family": "harmonic", "l": l, "m": m}),
        Mode::Fourier { kx, ky } => json!({"family": "fourier", "kx": kx, "ky": ky}),
    }
}

pub fn surface_json(s: &SurfaceFamily) -> Value {
    match s {
        SurfaceFamily::Slice { s0 } => json!({"family": "slice", "s0": s0}),
        SurfaceFamily::SlicePlus { s0, eps, mode } => {
            json!({"family": "slice_plus", "s0": s0, "eps": eps, "mode": mode_json(mode)})
        }
        SurfaceFamily::Table { path } => json!({"family": "table", "path": path}),
    }
}

pub fn variation_json(v: &VariationFamily) -> Value {
    match *v {
        VariationFamily::Const { a } => json!({"family": "const", "a": a}),
        VariationFamily::Harmonic { l, m, a } => json!({"family": "harmonic", "l": l, "m": m, "a": a}),
        VariationFamily::Fourier { kx, ky, a } => json!({"family": "fourier", "kx": kx, "ky": ky, "a": a}),
    }
}

/// Grid a mode needs, if any.
pub fn mode_grid(mode: &Mode) -> GridKind {
    match mode {
        Mode::Harmonic { .. } => GridKind::Sphere,
        Mode::Fourier { .. } => GridKind::Torus,
    }
}

pub fn surface_grid(s: &SurfaceFamily) -> Option<GridKind> {
    match s {
        SurfaceFamily::Slice { .. } | SurfaceFamily::Table { .. } => None,
        SurfaceFamily::SlicePlus { mode, .. } => Some(mode_grid(mode)),
    }
}

pub fn variation_grid(v: &VariationFamily) -> Option<GridKind> {
    match v {
        VariationFamily::Const { .. } => None,
        VariationFamily::Harmonic { .. } => Some(GridKind::Sphere),
        VariationFamily::Fourier { .. } => Some(GridKind::Torus),
    }
}

/// Surfaces swept by the rigidity probe when a manifest does not list its own.
pub fn probe_catalog(kind: ModelKind) -> Vec<SurfaceFamily> {
    use SurfaceFamily::*;
    let ln2 = std::f64::consts::LN_2;
    let h = |l, m| Mode::Harmonic { l, m };
    match kind {
        ModelKind::DeSitter => vec![
            Slice { s0: ln2 },
            Slice { s0: 0.3 },
            Slice { s0: -0.5 },
            Slice { s0: 0.0 },
            SlicePlus { s0: ln2, eps: 0.02, mode: h(1, 0) },
            SlicePlus { s0: ln2, eps: 0.05, mode: h(1, 0) },
            SlicePlus { s0: ln2, eps: 0.1, mode: h(1, 0) },
            SlicePlus { s0: ln2, eps: 0.05, mode: h(2, 0) },
            SlicePlus { s0: ln2, eps: 0.1, mode: h(1, 1) },
            SlicePlus { s0: 0.3, eps: 0.05, mode: h(3, 0) },
            SlicePlus { s0: 0.0, eps: 0.1, mode: h(2, 0) },
            SlicePlus { s0: -0.5, eps: 0.1, mode: h(2, 0) },
        ],
        ModelKind::StaticCylinder => vec![
            Slice { s0: 0.0 },
            SlicePlus { s0: 0.0, eps: 0.1, mode: Mode::Fourier { kx: 1, ky: 1 } },
            SlicePlus { s0: 0.5, eps: 0.05, mode: Mode::Fourier { kx: 2, ky: -1 } },
        ],
        ModelKind::Custom => Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples_round_trip() {
        let cat = catalog();
        for entry in &cat.families {
            let mut diag = Diagnostics::default();
            let back = match entry.category {
                Category::Surface => parse_surface(&entry.example, "x", &mut diag).map(|s| surface_json(&s)),
                Category::Mode => parse_mode(&entry.example, "x", &mut diag).map(|m| mode_json(&m)),
                Category::Variation => {
                    parse_variation(&entry.example, "x", &mut diag).map(|v| variation_json(&v))
                }
            };
            assert!(diag.is_empty(), "{}: {diag:?}", entry.name);
            let back = back.unwrap();
            let mut diag = Diagnostics::default();
            match entry.category {
                Category::Surface => {
                    assert_eq!(
                        parse_surface(&back, "x", &mut diag),
                        parse_surface(&entry.example, "x", &mut diag)
                    )
                }
                Category::Mode => assert_eq!(parse_mode(&back, "x", &mut diag), parse_mode(&entry.example, "x", &mut diag)),
                Category::Variation => assert_eq!(
                    parse_variation(&back, "x", &mut diag),
                    parse_variation(&entry.example, "x", &mut diag)
                ),
            }
            assert!(diag.is_empty());
        }
    }

    #[test]
    fn misspelled_family_names_nearest() {
        let mut diag = Diagnostics::default();
        assert!(parse_surface(&json!({"family": "slise", "s0": 0.0}), "surface", &mut diag).is_none());
        assert!(diag.messages()[0].contains("did you mean \"slice\""), "{diag:?}");

        let mut diag = Diagnostics::default();
        parse_surface(&json!({"family": "slice", "s00": 0.0}), "surface", &mut diag);
        assert!(diag.messages().iter().any(|m| m.contains("did you mean \"s0\"")), "{diag:?}");
    }

    #[test]
    fn catalog_names() {
        let cat = catalog();
        let names = cat.names(Category::Surface);
        for n in ["slice", "slice_plus", "fourier"] {
            assert!(names.contains(&n));
        }
        assert!(probe_catalog(ModelKind::DeSitter).len() + probe_catalog(ModelKind::StaticCylinder).len() >= 12);
    }
}
