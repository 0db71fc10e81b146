//! Experiment manifests: parsing, defaults and validation.
//!
//! Parsing never stops at the first problem. Every diagnostic is collected
//! so a bad manifest can be fixed in one pass.

use std::fmt;
use std::path::{Path, PathBuf};

use rstab_core::families::{SurfaceFamily, VariationFamily};
use rstab_core::grid::{FiberGrid, GridKind, GridSpec};
use rstab_core::spacetime::{make_de_sitter, make_static_cylinder, GRWModel, ModelKind, DEFAULT_INTERVAL};
use rstab_core::surface::GraphFunction;
use rstab_core::variation::DEFAULT_TIME_STEP;
use serde::Serialize;
use serde_json::{json, Value};

use crate::catalog::{
    parse_surface, parse_variation, surface_grid, surface_json, unknown, variation_grid, variation_json, Fields,
};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics(Vec<String>);

impl Diagnostics {
    pub fn push(&mut self, msg: String) {
        self.0.push(msg);
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn messages(&self) -> &[String] {
        &self.0
    }
}

/// A manifest that failed to parse or validate.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestError {
    pub diagnostics: Vec<String>,
}

impl fmt::Display for ManifestError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid manifest:")?;
        for d in &self.diagnostics {
            writeln!(f, "  - {d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ManifestError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Identities,
    FirstVariation,
    SecondVariation,
    SupportIdentity,
    Spectrum,
    TheoremProbe,
}

pub const TASK_NAMES: [&str; 6] = [
    "identities",
    "first-variation",
    "second-variation",
    "support-identity",
    "spectrum",
    "theorem-probe",
];

impl Task {
    pub const ALL: [Task; 6] = [
        Task::Identities,
        Task::FirstVariation,
        Task::SecondVariation,
        Task::SupportIdentity,
        Task::Spectrum,
        Task::TheoremProbe,
    ];

    pub fn name(self) -> &'static str {
        TASK_NAMES[Self::ALL.iter().position(|t| *t == self).unwrap()]
    }

    pub fn parse(s: &str) -> Option<Self> {
        TASK_NAMES.iter().position(|n| *n == s).map(|i| Self::ALL[i])
    }

    pub fn needs_grid(self) -> bool {
        self != Task::Identities
    }

    pub fn needs_surface(self) -> bool {
        matches!(
            self,
            Task::FirstVariation | Task::SecondVariation | Task::SupportIdentity | Task::Spectrum
        )
    }

    /// Tasks that fit a convergence slope across resolutions.
    pub fn is_convergence_study(self) -> bool {
        matches!(self, Task::FirstVariation | Task::SecondVariation | Task::SupportIdentity)
    }

    /// Tasks evaluated once per entry of the `r` list.
    pub fn per_r(self) -> bool {
        self != Task::Identities
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub n: usize,
    pub interval: (f64, f64),
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self.kind {
            ModelKind::DeSitter => "de_sitter",
            ModelKind::StaticCylinder => "static_cylinder",
            ModelKind::Custom => "custom",
        }
    }

    pub fn build(&self) -> rstab_core::Result<GRWModel> {
        let model = match self.kind {
            ModelKind::DeSitter => make_de_sitter(self.n)?,
            _ => make_static_cylinder(self.n)?,
        };
        model.with_interval(self.interval.0, self.interval.1)
    }

    pub fn grid_kind(&self) -> GridKind {
        match self.kind {
            ModelKind::DeSitter => GridKind::Sphere,
            _ => GridKind::Torus,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub model: ModelSpec,
    pub grid_kind: GridKind,
    /// Coarsest first.
    pub resolutions: Vec<(usize, usize)>,
    pub surface: Option<SurfaceFamily>,
    /// Explicit probe list; the shipped catalog is used when absent.
    pub surfaces: Option<Vec<SurfaceFamily>>,
    pub f0: VariationFamily,
    /// Time step at the coarsest resolution; refined in proportion to `h`.
    pub h_t: f64,
    pub tasks: Vec<Task>,
    pub r: Vec<usize>,
    pub output: Option<PathBuf>,
    pub seed: u64,
}

const TOP_KEYS: [&str; 10] = [
    "model", "grid", "surface", "surfaces", "variation", "tasks", "r", "output", "seed", "description",
];
const MODEL_KINDS: [&str; 2] = ["de_sitter", "static_cylinder"];

impl Manifest {
    pub fn from_json_str(text: &str) -> Result<Self, ManifestError> {
        Self::from_value(&json_value(text)?)
    }

    /// Parses a manifest stored in `dir`. Relative table paths are taken
    /// from there rather than from the working directory.
    pub fn from_json_str_in(text: &str, dir: &Path) -> Result<Self, ManifestError> {
        let mut value = json_value(text)?;
        rebase_tables(&mut value, dir);
        Self::from_value(&value)
    }

    pub fn from_value(value: &Value) -> Result<Self, ManifestError> {
        let mut diag = Diagnostics::default();
        let parsed = parse(value, &mut diag);
        match parsed {
            Some(m) if diag.is_empty() => {
                m.check_geometry(&mut diag);
                if diag.is_empty() {
                    Ok(m)
                } else {
                    Err(ManifestError { diagnostics: diag.0 })
                }
            }
            _ => {
                if diag.is_empty() {
                    diag.push("manifest could not be read".into());
                }
                Err(ManifestError { diagnostics: diag.0 })
            }
        }
    }

    /// Sorted by node count, so the last entry is the finest.
    pub fn grid_specs(&self) -> Vec<GridSpec> {
        self.resolutions
            .iter()
            .map(|&(n1, n2)| GridSpec { kind: self.grid_kind, n1, n2 })
            .collect()
    }

    /// Checks that need actual grids: graphs spacelike and inside the
    /// interval at every resolution.
    fn check_geometry(&self, diag: &mut Diagnostics) {
        let Ok(model) = self.model.build() else {
            diag.push("model: cannot be built".into());
            return;
        };
        let mut named: Vec<(String, &SurfaceFamily)> = Vec::new();
        if let Some(s) = &self.surface {
            named.push(("surface".into(), s));
        }
        if let Some(list) = &self.surfaces {
            named.extend(list.iter().enumerate().map(|(i, s)| (format!("surfaces[{i}]"), s)));
        }
        for spec in self.grid_specs() {
            let Ok(grid) = FiberGrid::new(spec) else { continue };
            for (path, s) in &named {
                let values = match s.sample(&grid) {
                    Ok(v) => v,
                    Err(e) => {
                        diag.push(format!("{path}: {e}"));
                        return;
                    }
                };
                if let Some(bad) = values.iter().find(|u| !model.contains(**u)) {
                    diag.push(format!(
                        "{path}: reaches s = {bad:.4}, outside the interval [{}, {}]",
                        self.model.interval.0, self.model.interval.1
                    ));
                    return;
                }
                if let Err(e) = GraphFunction::new(values).check_spacelike(&model, &grid) {
                    diag.push(format!("{path}: {e} on a {}x{} grid", spec.n1, spec.n2));
                    return;
                }
            }
        }
    }

    /// Normalized form with every default filled in.
    pub fn to_json(&self) -> Value {
        json!({
            "model": {
                "kind": self.model.name(),
                "n": self.model.n,
                "interval": [self.model.interval.0, self.model.interval.1],
            },
            "grid": {
                "kind": match self.grid_kind { GridKind::Sphere => "sphere", GridKind::Torus => "torus" },
                "resolutions": self.resolutions.iter().map(|(a, b)| json!([a, b])).collect::<Vec<_>>(),
            },
            "surface": self.surface.as_ref().map(surface_json),
            "surfaces": self.surfaces.as_ref().map(|l| l.iter().map(surface_json).collect::<Vec<_>>()),
            "variation": { "f0": variation_json(&self.f0), "h_t": self.h_t },
            "tasks": self.tasks.iter().map(|t| t.name()).collect::<Vec<_>>(),
            "r": self.r,
            "seed": self.seed,
        })
    }
}

fn json_value(text: &str) -> Result<Value, ManifestError> {
    serde_json::from_str(text).map_err(|e| ManifestError {
        diagnostics: vec![format!("not valid JSON: {e}")],
    })
}

fn rebase_tables(value: &mut Value, dir: &Path) {
    let rebase = |s: &mut Value| {
        if s.get("family").and_then(Value::as_str) != Some("table") {
            return;
        }
        if let Some(Value::String(path)) = s.get_mut("path") {
            if Path::new(path.as_str()).is_relative() {
                *path = dir.join(path.as_str()).to_string_lossy().into_owned();
            }
        }
    };
    if let Some(s) = value.get_mut("surface") {
        rebase(s);
    }
    if let Some(Value::Array(list)) = value.get_mut("surfaces") {
        list.iter_mut().for_each(rebase);
    }
}

fn parse(value: &Value, diag: &mut Diagnostics) -> Option<Manifest> {
    let top = Fields::new(value, "manifest", diag)?;
    top.deny_unknown(&TOP_KEYS, diag);

    let model = match top.get("model") {
        Some(v) => parse_model(v, diag),
        None => {
            diag.push("manifest.model: missing".into());
            None
        }
    };

    let tasks = parse_tasks(top.get("tasks"), diag);
    let needs_grid = tasks.iter().any(|t| t.needs_grid());
    let needs_surface = tasks.iter().any(|t| t.needs_surface());

    let grid = top.get("grid").and_then(|g| parse_grid(g, model.as_ref(), diag));
    if needs_grid && top.get("grid").is_none() {
        diag.push("manifest.grid: missing (required by the grid tasks)".into());
    }
    let (grid_kind, resolutions) = grid.unwrap_or_else(|| {
        (model.as_ref().map(|m| m.grid_kind()).unwrap_or(GridKind::Sphere), Vec::new())
    });
    if tasks.iter().any(|t| t.is_convergence_study()) && !resolutions.is_empty() && resolutions.len() < 2 {
        diag.push("manifest.grid.resolutions: convergence studies need at least two resolutions".into());
    }

    let surface = top.get("surface").and_then(|s| parse_surface(s, "manifest.surface", diag));
    if needs_surface && top.get("surface").is_none() {
        diag.push("manifest.surface: missing (required by the listed tasks)".into());
    }
    let surfaces = match top.get("surfaces") {
        None => None,
        Some(Value::Array(items)) => {
            if items.is_empty() {
                diag.push("manifest.surfaces: empty list".into());
            }
            Some(
                items
                    .iter()
                    .enumerate()
                    .filter_map(|(i, s)| parse_surface(s, &format!("manifest.surfaces[{i}]"), diag))
                    .collect::<Vec<_>>(),
            )
        }
        Some(_) => {
            diag.push("manifest.surfaces: expected an array".into());
            None
        }
    };
    for s in surface.iter().chain(surfaces.iter().flatten()) {
        if let Some(k) = surface_grid(s) {
            if k != grid_kind {
                diag.push(format!("surface {}: its mode needs a {k:?} grid, the model uses {grid_kind:?}", s.label()));
            }
        }
    }

    let (f0, h_t) = match top.get("variation") {
        None => (Some(VariationFamily::Const { a: 1.0 }), Some(DEFAULT_TIME_STEP)),
        Some(v) => parse_variation_block(v, diag),
    };
    if let Some(k) = f0.as_ref().and_then(variation_grid) {
        if k != grid_kind {
            diag.push(format!("manifest.variation.f0: needs a {k:?} grid, the model uses {grid_kind:?}"));
        }
    }

    let r = parse_r(top.get("r"), model.as_ref(), diag);
    let output = match top.get("output") {
        None => None,
        Some(Value::String(s)) => Some(PathBuf::from(s)),
        Some(_) => {
            diag.push("manifest.output: expected a path string".into());
            None
        }
    };
    let seed = match top.get("seed") {
        None => 0,
        Some(v) => v.as_u64().unwrap_or_else(|| {
            diag.push("manifest.seed: expected a non-negative integer".into());
            0
        }),
    };
    if let Some(d) = top.get("description") {
        if !d.is_string() {
            diag.push("manifest.description: expected a string".into());
        }
    }

    Some(Manifest {
        model: model?,
        grid_kind,
        resolutions,
        surface,
        surfaces,
        f0: f0?,
        h_t: h_t?,
        tasks,
        r: r?,
        output,
        seed,
    })
}

fn parse_model(v: &Value, diag: &mut Diagnostics) -> Option<ModelSpec> {
    let f = Fields::new(v, "manifest.model", diag)?;
    f.deny_unknown(&["kind", "n", "interval"], diag);
    let kind = f.string("kind", diag).and_then(|k| match k {
        "de_sitter" => Some(ModelKind::DeSitter),
        "static_cylinder" => Some(ModelKind::StaticCylinder),
        other => {
            diag.push(format!("manifest.model.kind: {}", unknown("model", other, &MODEL_KINDS)));
            None
        }
    });
    let n = f.unsigned("n", diag);
    if let Some(n) = n {
        if n != 2 {
            diag.push(format!("manifest.model.n: only n = 2 has a grid discretization, got {n}"));
        }
    }
    let interval = match f.get("interval") {
        None => Some(DEFAULT_INTERVAL),
        Some(Value::Array(a)) if a.len() == 2 => match (a[0].as_f64(), a[1].as_f64()) {
            (Some(lo), Some(hi)) if lo < hi => Some((lo, hi)),
            _ => {
                diag.push("manifest.model.interval: expected [lo, hi] with lo < hi".into());
                None
            }
        },
        Some(_) => {
            diag.push("manifest.model.interval: expected [lo, hi]".into());
            None
        }
    };
    Some(ModelSpec { kind: kind?, n: n?, interval: interval? })
}

fn parse_grid(v: &Value, model: Option<&ModelSpec>, diag: &mut Diagnostics) -> Option<(GridKind, Vec<(usize, usize)>)> {
    let f = Fields::new(v, "manifest.grid", diag)?;
    f.deny_unknown(&["kind", "resolutions"], diag);
    let expected = model.map(|m| m.grid_kind());
    let kind = match f.get("kind") {
        None => expected,
        Some(k) => match k.as_str() {
            Some("sphere") => Some(GridKind::Sphere),
            Some("torus") => Some(GridKind::Torus),
            Some(other) => {
                diag.push(format!("manifest.grid.kind: {}", unknown("grid kind", other, &["sphere", "torus"])));
                None
            }
            None => {
                diag.push("manifest.grid.kind: expected a string".into());
                None
            }
        },
    };
    if let (Some(k), Some(e)) = (kind, expected) {
        if k != e {
            diag.push(format!("manifest.grid.kind: {k:?} does not match the model fiber ({e:?})"));
        }
    }
    let mut res = Vec::new();
    match f.get("resolutions") {
        Some(Value::Array(items)) if !items.is_empty() => {
            for (i, item) in items.iter().enumerate() {
                let pair = item.as_array().filter(|a| a.len() == 2).and_then(|a| Some((a[0].as_u64()?, a[1].as_u64()?)));
                match pair {
                    Some((a, b)) => {
                        let spec = GridSpec { kind: kind.unwrap_or(GridKind::Sphere), n1: a as usize, n2: b as usize };
                        if let Err(e) = FiberGrid::new(spec) {
                            diag.push(format!("manifest.grid.resolutions[{i}]: {e}"));
                        }
                        res.push((a as usize, b as usize));
                    }
                    None => diag.push(format!("manifest.grid.resolutions[{i}]: expected [n1, n2]")),
                }
            }
        }
        _ => diag.push("manifest.grid.resolutions: expected a non-empty list of [n1, n2]".into()),
    }
    res.sort_by_key(|(a, b)| a * b);
    res.dedup();
    Some((kind?, res))
}

fn parse_tasks(v: Option<&Value>, diag: &mut Diagnostics) -> Vec<Task> {
    let Some(v) = v else {
        diag.push("manifest.tasks: missing".into());
        return Vec::new();
    };
    let Some(items) = v.as_array() else {
        diag.push("manifest.tasks: expected a list of task names".into());
        return Vec::new();
    };
    if items.is_empty() {
        diag.push("manifest.tasks: empty task list".into());
    }
    let mut tasks = Vec::new();
    for (i, item) in items.iter().enumerate() {
        match item.as_str() {
            Some(name) => match Task::parse(name) {
                Some(t) if tasks.contains(&t) => diag.push(format!("manifest.tasks[{i}]: \"{name}\" listed twice")),
                Some(t) => tasks.push(t),
                None => diag.push(format!("manifest.tasks[{i}]: {}", unknown("task", name, &TASK_NAMES))),
            },
            None => diag.push(format!("manifest.tasks[{i}]: expected a string")),
        }
    }
    tasks
}

fn parse_variation_block(v: &Value, diag: &mut Diagnostics) -> (Option<VariationFamily>, Option<f64>) {
    let Some(f) = Fields::new(v, "manifest.variation", diag) else {
        return (None, None);
    };
    f.deny_unknown(&["f0", "h_t"], diag);
    let f0 = match f.get("f0") {
        None => Some(VariationFamily::Const { a: 1.0 }),
        Some(x) => parse_variation(x, "manifest.variation.f0", diag),
    };
    let h_t = f.number_or("h_t", DEFAULT_TIME_STEP, diag).filter(|h| {
        let ok = *h > 0.0 && *h < 0.5;
        if !ok {
            diag.push(format!("manifest.variation.h_t: must lie in (0, 0.5), got {h}"));
        }
        ok
    });
    (f0, h_t)
}

fn parse_r(v: Option<&Value>, model: Option<&ModelSpec>, diag: &mut Diagnostics) -> Option<Vec<usize>> {
    let list = match v {
        None => vec![0],
        Some(Value::Array(items)) if !items.is_empty() => {
            let mut out = Vec::new();
            for (i, item) in items.iter().enumerate() {
                match item.as_u64() {
                    Some(r) => out.push(r as usize),
                    None => diag.push(format!("manifest.r[{i}]: expected a non-negative integer")),
                }
            }
            out
        }
        Some(_) => {
            diag.push("manifest.r: expected a non-empty list of integers".into());
            return None;
        }
    };
    if let Some(m) = model {
        for r in &list {
            if *r + 1 > m.n {
                diag.push(format!("manifest.r: r = {r} exceeds n - 1 = {}", m.n - 1));
            }
        }
    }
    let mut list = list;
    list.sort_unstable();
    list.dedup();
    Some(list)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> Value {
        json!({
            "model": {"kind": "de_sitter", "n": 2},
            "grid": {"resolutions": [[16, 32], [8, 16]]},
            "surface": {"family": "slice", "s0": 0.5},
            "tasks": ["first-variation"],
        })
    }

    #[test]
    fn defaults_fill_in() {
        let m = Manifest::from_value(&base()).unwrap();
        assert_eq!(m.resolutions, vec![(8, 16), (16, 32)]);
        assert_eq!(m.r, vec![0]);
        assert_eq!(m.seed, 0);
        assert_eq!(m.f0, VariationFamily::Const { a: 1.0 });
        assert_eq!(m.grid_kind, GridKind::Sphere);
        let again = Manifest::from_value(&m.to_json()).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn empty_task_list_is_rejected() {
        let mut v = base();
        v["tasks"] = json!([]);
        let e = Manifest::from_value(&v).unwrap_err();
        assert!(e.diagnostics.iter().any(|d| d.contains("empty task list")));
    }

    #[test]
    fn problems_are_collected_together() {
        let mut v = base();
        v["tasks"] = json!(["first-variaton", "spectrum"]);
        v["r"] = json!([0, 2]);
        v["model"]["kind"] = json!("de_siter");
        let e = Manifest::from_value(&v).unwrap_err();
        let text = e.to_string();
        assert!(text.contains("did you mean \"first-variation\""), "{text}");
        assert!(text.contains("did you mean \"de_sitter\""), "{text}");
        assert!(e.diagnostics.len() >= 2);
    }

    #[test]
    fn r_is_capped_by_dimension() {
        let mut v = base();
        v["r"] = json!([2]);
        let e = Manifest::from_value(&v).unwrap_err();
        assert!(e.diagnostics.iter().any(|d| d.contains("exceeds n - 1")));
    }

    #[test]
    fn mode_must_match_fiber() {
        let mut v = base();
        v["surface"] = json!({"family": "fourier", "eps": 0.1, "kx": 1, "ky": 0});
        assert!(Manifest::from_value(&v).is_err());
    }

    #[test]
    fn timelike_surface_is_rejected() {
        let mut v = base();
        v["surface"] = json!({"family": "slice_plus", "s0": 0.0, "eps": 3.0,
                              "mode": {"family": "harmonic", "l": 3, "m": 0}});
        let e = Manifest::from_value(&v).unwrap_err();
        assert!(e.diagnostics.iter().any(|d| d.contains("spacelike") || d.contains("outside")), "{e}");
    }

    #[test]
    fn identities_need_no_grid() {
        let v = json!({"model": {"kind": "static_cylinder", "n": 2}, "tasks": ["identities"]});
        let m = Manifest::from_value(&v).unwrap();
        assert!(m.resolutions.is_empty());
    }
}
