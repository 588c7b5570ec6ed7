//! Scenario files.
//!
//! A scenario is a TOML document with the sections `[formation]`,
//! `[gains]`, `[initial]`, `[disturbance]`, `[leaders]` and `[sim]`.
//! Vertex ids in the file are 1-based. See `scenarios/` for complete
//! examples.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controller::ControlGains;
use crate::elevation::{ElevationParams, Mode};
use crate::error::ConfigError;
use crate::geometry::Vec3;
use crate::graph::FormationGraph;
use crate::scenario::{
    Disturbance, DisturbanceFrame, FrameSpec, Integrator, Scenario, ScenarioBuilder, ShapeSource,
    SimSettings,
};

/// Bundled scenario sources.
pub mod bundled {
    pub const TETRAHEDRON: &str = include_str!("../../../scenarios/tetrahedron.toml");
    pub const HEXAGON: &str = include_str!("../../../scenarios/hexagon.toml");
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    formation: FormationSection,
    gains: ControlGains,
    initial: InitialSection,
    disturbance: DisturbanceSection,
    #[serde(default)]
    leaders: LeadersSection,
    #[serde(default = "default_sim")]
    sim: SimSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FormationSection {
    dimension: u8,
    rho: f64,
    n: usize,
    n_leaders: usize,
    /// `"i j"` pairs, head first.
    edges: Vec<String>,
    distances: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    shape: Option<Vec<[f64; 3]>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialSection {
    positions: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    frames: Option<Vec<FrameSpec>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DisturbanceSection {
    frame: DisturbanceFrame,
    values: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LeadersSection {
    #[serde(default)]
    v_star: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimSection {
    #[serde(default = "default_dt")]
    dt: f64,
    #[serde(default = "default_t_end")]
    t_end: f64,
    #[serde(default = "default_integrator")]
    integrator: Integrator,
    #[serde(default = "default_stride")]
    sample_stride: usize,
}

fn default_sim() -> SimSection {
    let d = SimSettings::default();
    SimSection {
        dt: d.dt,
        t_end: d.t_end,
        integrator: d.integrator,
        sample_stride: d.sample_stride,
    }
}
fn default_dt() -> f64 {
    SimSettings::default().dt
}
fn default_t_end() -> f64 {
    SimSettings::default().t_end
}
fn default_integrator() -> Integrator {
    SimSettings::default().integrator
}
fn default_stride() -> usize {
    SimSettings::default().sample_stride
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn parse_error(text: &str, err: toml::de::Error) -> ConfigError {
    let line = err.span().map(|s| line_of(text, s.start)).unwrap_or(0);
    let message = err.message().trim().to_string();
    let field = message
        .split('`')
        .nth(1)
        .map(str::to_string)
        .or_else(|| {
            let l = text.lines().nth(line.checked_sub(1)?)?;
            let key = l.split('=').next()?.trim();
            (!key.is_empty()).then(|| key.to_string())
        })
        .unwrap_or_default();
    ConfigError::Parse {
        line,
        field,
        message,
    }
}

fn parse_edge(s: &str, n: usize) -> Result<(usize, usize), String> {
    let ids: Vec<&str> = s.split_whitespace().collect();
    let [a, b] = ids.as_slice() else {
        return Err(format!(
            "edge \"{s}\" must be two vertex ids separated by a space"
        ));
    };
    let parse = |t: &str| -> Result<usize, String> {
        let v: usize = t
            .parse()
            .map_err(|_| format!("edge \"{s}\": `{t}` is not a vertex id"))?;
        if v == 0 || v > n {
            return Err(format!("edge \"{s}\": vertex {v} is outside 1..={n}"));
        }
        Ok(v - 1)
    };
    Ok((parse(a)?, parse(b)?))
}

/// Parses and validates a scenario, reporting every violation at once.
pub fn parse_scenario(text: &str, default_name: &str) -> Result<Scenario, ConfigError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| parse_error(text, e))?;
    let mut problems = Vec::new();

    let f = &file.formation;
    let mode = match f.dimension {
        2 => Some(Mode::Planar),
        3 => Some(Mode::Spatial),
        d => {
            problems.push(format!("dimension must be 2 or 3, got {d}"));
            None
        }
    };
    let params = mode.and_then(|mode| match ElevationParams::new(mode, f.rho) {
        Ok(p) => Some(p),
        Err(e) => {
            problems.push(e.to_string());
            None
        }
    });

    let mut edges = Vec::with_capacity(f.edges.len());
    for s in &f.edges {
        match parse_edge(s, f.n) {
            Ok(e) => edges.push(e),
            Err(e) => problems.push(e),
        }
    }
    let graph = if edges.len() == f.edges.len() {
        match FormationGraph::new(f.n, f.n_leaders, edges) {
            Ok(g) => Some(g),
            Err(e) => {
                problems.push(format!("graph: {e}"));
                None
            }
        }
    } else {
        None
    };

    if let Some(specs) = &file.initial.frames {
        if specs.len() != f.n {
            problems.push(format!("expected {} frames, got {}", f.n, specs.len()));
        }
    }
    problems.extend(file.gains.violations());

    let (Some(graph), Some(params)) = (graph, params) else {
        return Err(ConfigError::Validation(problems));
    };
    if !problems.is_empty() {
        // Report cheap checks together with the structural ones.
        let partial = builder(&file, graph, params, default_name);
        if let Err(more) = partial.build() {
            for p in more {
                if !problems.contains(&p) {
                    problems.push(p);
                }
            }
        }
        return Err(ConfigError::Validation(problems));
    }
    builder(&file, graph, params, default_name)
        .build()
        .map_err(ConfigError::Validation)
}

fn builder(
    file: &ScenarioFile,
    graph: FormationGraph,
    params: ElevationParams,
    default_name: &str,
) -> ScenarioBuilder {
    let v3 = |a: &[f64; 3]| Vec3::from(*a);
    ScenarioBuilder {
        name: file
            .name
            .clone()
            .unwrap_or_else(|| default_name.to_string()),
        graph,
        params,
        gains: file.gains,
        initial: file.initial.positions.iter().map(v3).collect(),
        frame_specs: file
            .initial
            .frames
            .clone()
            .filter(|s| s.len() == file.formation.n),
        disturbance: Disturbance {
            frame: file.disturbance.frame,
            values: file.disturbance.values.iter().map(v3).collect(),
        },
        v_star: v3(&file.leaders.v_star),
        desired_distances: file.formation.distances.clone(),
        desired_shape: file
            .formation
            .shape
            .as_ref()
            .map(|s| s.iter().map(v3).collect()),
        sim: SimSettings {
            dt: file.sim.dt,
            t_end: file.sim.t_end,
            integrator: file.sim.integrator,
            sample_stride: file.sim.sample_stride,
        },
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into());
    parse_scenario(&text, &stem)
}

/// Normalized scenario text; parsing it yields an identical scenario.
pub fn echo_scenario(s: &Scenario) -> String {
    let arr = |v: &Vec3| [v.x, v.y, v.z];
    let file = ScenarioFile {
        name: Some(s.name.clone()),
        formation: FormationSection {
            dimension: s.dimension() as u8,
            rho: s.params.rho(),
            n: s.graph.n(),
            n_leaders: s.graph.n_leaders(),
            edges: s
                .graph
                .edges()
                .iter()
                .map(|(a, b)| format!("{} {}", a + 1, b + 1))
                .collect(),
            distances: s.desired_distances.clone(),
            shape: (s.shape_source == ShapeSource::Given)
                .then(|| s.desired_shape.iter().map(arr).collect()),
        },
        gains: s.gains,
        initial: InitialSection {
            positions: s.initial.iter().map(arr).collect(),
            frames: s.frame_specs.clone(),
        },
        disturbance: DisturbanceSection {
            frame: s.disturbance.frame,
            values: s.disturbance.values.iter().map(arr).collect(),
        },
        leaders: LeadersSection {
            v_star: arr(&s.v_star),
        },
        sim: SimSection {
            dt: s.sim.dt,
            t_end: s.sim.t_end,
            integrator: s.sim.integrator,
            sample_stride: s.sim.sample_stride,
        },
    };
    toml::to_string(&file).expect("scenario serializes")
}

pub fn tetrahedron() -> Scenario {
    parse_scenario(bundled::TETRAHEDRON, "tetrahedron").expect("bundled scenario is valid")
}

pub fn hexagon() -> Scenario {
    parse_scenario(bundled::HEXAGON, "hexagon").expect("bundled scenario is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_tetrahedron_matches_reference_setup() {
        let s = tetrahedron();
        assert_eq!(s.graph.n(), 4);
        assert_eq!(s.graph.n_leaders(), 2);
        assert_eq!(s.graph.m(), 6);
        assert_eq!((s.gains.kp, s.gains.ke, s.gains.alpha), (0.5, 0.1, 0.5));
        assert_eq!(s.initial[0], Vec3::new(-0.5, 0.0, 0.0));
        assert_eq!(s.initial[1], Vec3::new(0.5, 0.0, 0.0));
        assert_eq!(s.initial[2], Vec3::new(-0.1, -0.1, 0.8));
        assert_eq!(s.initial[3], Vec3::new(-0.2, 0.9, 0.5));
        for i in s.graph.followers() {
            assert_eq!(s.disturbance_global(i), Vec3::new(2.0, 2.0, 2.0));
        }
        assert_eq!(s.v_star, Vec3::zeros());
        assert_eq!(s.sim, SimSettings::default());
    }

    #[test]
    fn bundled_hexagon_matches_reference_setup() {
        let s = hexagon();
        assert_eq!(s.graph.n(), 6);
        assert_eq!(s.dimension(), 2);
        assert_eq!((s.gains.kp, s.gains.ke, s.gains.alpha), (1.0, 0.5, 0.5));
        assert_eq!(s.v_star, Vec3::new(0.1, 0.1, 0.0));
        assert_eq!(s.initial[5], Vec3::new(1.7, 0.0, 0.0));
        for i in s.graph.followers() {
            assert_eq!(s.disturbance_global(i), Vec3::new(-1.0, -1.0, 0.0));
        }
    }

    #[test]
    fn alpha_out_of_range_is_a_validation_error() {
        let text = bundled::TETRAHEDRON.replace("alpha = 0.5", "alpha = 1.5");
        match parse_scenario(&text, "x") {
            Err(ConfigError::Validation(v)) => {
                assert!(v.iter().any(|m| m.contains("alpha")), "{v:?}")
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn type_errors_report_line_and_field() {
        let text = bundled::TETRAHEDRON.replace("kp = 0.5", "kp = \"fast\"");
        let line = text.lines().position(|l| l.starts_with("kp =")).unwrap() + 1;
        match parse_scenario(&text, "x") {
            Err(ConfigError::Parse { line: l, field, .. }) => {
                assert_eq!(l, line);
                assert_eq!(field, "kp");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_field_is_a_parse_error() {
        let text = bundled::TETRAHEDRON.replace("ke = 0.1\n", "");
        match parse_scenario(&text, "x") {
            Err(ConfigError::Parse { field, .. }) => assert_eq!(field, "ke"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn bad_edges_are_all_reported() {
        let text = bundled::TETRAHEDRON
            .replacen("\"1 2\"", "\"1 9\"", 1)
            .replacen("\"1 3\"", "\"1-3\"", 1);
        match parse_scenario(&text, "x") {
            Err(ConfigError::Validation(v)) => assert_eq!(v.len(), 2, "{v:?}"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn echo_round_trips() {
        for s in [tetrahedron(), hexagon()] {
            let text = echo_scenario(&s);
            let again = parse_scenario(&text, "ignored").unwrap();
            assert_eq!(again, s);
            assert_eq!(echo_scenario(&again), text);
        }
    }

    #[test]
    fn echo_round_trips_frames_and_local_disturbances() {
        let text = bundled::TETRAHEDRON.replace("frame = \"global\"", "frame = \"local\"") + "";
        let mut s = parse_scenario(&text, "x").unwrap();
        s.frame_specs = Some(vec![
            FrameSpec {
                angle: 0.1,
                axis: [0.0, 0.0, 1.0],
                translation: [1.0, 2.0, 3.0],
            },
            FrameSpec {
                angle: 1.1,
                axis: [1.0, 1.0, 0.0],
                translation: [0.0, 0.0, 0.0],
            },
            FrameSpec {
                angle: -0.4,
                axis: [0.3, 0.0, 1.0],
                translation: [0.5, 0.0, 0.0],
            },
            FrameSpec {
                angle: 2.9,
                axis: [0.0, 1.0, 0.0],
                translation: [0.0, -1.0, 0.0],
            },
        ]);
        let text = echo_scenario(&s);
        let again = parse_scenario(&text, "x").unwrap();
        assert_eq!(again.frame_specs, s.frame_specs);
        assert_eq!(again.disturbance.frame, DisturbanceFrame::Local);
        assert_eq!(echo_scenario(&again), text);
    }
}
