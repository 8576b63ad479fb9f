//! Wall-and-target scene descriptions, sampling and rasterization.
//!
//! Coordinates are metres with the origin at the lower-left corner of the
//! physical domain; the absorbing layer is added outside it. Grid node
//! `(i, j)` is the centre of the cell `[(i - d)·dx, (i - d + 1)·dx)` where `d`
//! is the PML depth, and a node takes a shape's permittivity when its centre
//! lies inside the shape.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::fdtd::{FdtdError, GridSpec, MaterialGrid, PmlConfig, COURANT_SAFETY};

pub const WALL_EPS_BOUNDS: Interval = Interval { min: 3.0, max: 9.0 };
pub const WALL_THICKNESS_BOUNDS: Interval = Interval { min: 0.10, max: 0.20 };
pub const TARGET_EPS_BOUNDS: Interval = Interval { min: 5.0, max: 85.0 };
/// Side of the square targets, metres.
pub const TARGET_SIDE: f64 = 0.30;
/// Attempts allowed when rejecting overlapping two-target placements.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 1000;
/// Minimum gap, in cells, between a target and the wall or the absorber.
pub const CLEARANCE_CELLS: f64 = 5.0;

const EDGE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("could not place non-overlapping targets in {attempts} attempts")]
    SamplingFailed { attempts: usize },
    #[error("invalid scene: {}", join_violations(.0))]
    Invalid(Vec<SceneViolation>),
    #[error(transparent)]
    Fdtd(#[from] FdtdError),
}

fn join_violations(v: &[SceneViolation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Single,
    Two,
}

impl Mode {
    pub fn targets(self) -> usize {
        match self {
            Mode::Single => 1,
            Mode::Two => 2,
        }
    }

    pub fn label_len(self) -> usize {
        3 * self.targets() + 2
    }

    /// Numeric code used in file headers.
    pub fn code(self) -> u32 {
        self.targets() as u32
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            1 => Some(Mode::Single),
            2 => Some(Mode::Two),
            _ => None,
        }
    }

    pub fn from_label_len(len: usize) -> Option<Self> {
        match len {
            5 => Some(Mode::Single),
            8 => Some(Mode::Two),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Single => "single",
            Mode::Two => "two",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "single" | "1" => Some(Mode::Single),
            "two" | "2" => Some(Mode::Two),
            _ => None,
        }
    }
}

/// Closed interval `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub min: f64,
    pub max: f64,
}

impl Interval {
    pub fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }

    fn is_valid(&self) -> bool {
        self.min.is_finite() && self.max.is_finite() && self.min <= self.max
    }

    fn within(&self, outer: &Interval) -> bool {
        self.min >= outer.min && self.max <= outer.max
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        rng.gen_range(self.min..=self.max)
    }
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]` in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x0 >= self.x0 - EDGE_TOL
            && other.x1 <= self.x1 + EDGE_TOL
            && other.y0 >= self.y0 - EDGE_TOL
            && other.y1 <= self.y1 + EDGE_TOL
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallSpec {
    pub eps_r: f64,
    pub thickness: f64,
    /// x of the face toward the source, metres.
    pub front_face_x: f64,
}

impl WallSpec {
    pub fn back_face_x(&self) -> f64 {
        self.front_face_x + self.thickness
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetSpec {
    pub center_x: f64,
    pub center_y: f64,
    pub side: f64,
    pub eps_r: f64,
}

impl TargetSpec {
    pub fn bounds(&self) -> Rect {
        let h = self.side / 2.0;
        Rect {
            x0: self.center_x - h,
            x1: self.center_x + h,
            y0: self.center_y - h,
            y1: self.center_y + h,
        }
    }

    /// Open squares intersect.
    pub fn overlaps(&self, other: &TargetSpec) -> bool {
        let half = (self.side + other.side) / 2.0;
        (self.center_x - other.center_x).abs() < half && (self.center_y - other.center_y).abs() < half
    }
}

/// Vertical segment at `x` from `y0` to `y1`, metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceLine {
    pub x: f64,
    pub y0: f64,
    pub y1: f64,
}

/// Fixed part of the layout: domain, antennas and wall position.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneGeometry {
    pub width: f64,
    pub height: f64,
    pub source_line: SourceLine,
    pub wall_front_x: f64,
    pub receivers: Vec<(f64, f64)>,
    /// Required gap between a target and the wall back face or domain edge.
    pub min_clearance: f64,
}

impl Default for SceneGeometry {
    fn default() -> Self {
        Self {
            width: 2.0,
            height: 2.0,
            source_line: SourceLine { x: 0.10, y0: 0.3, y1: 1.7 },
            wall_front_x: 0.50,
            receivers: vec![(0.12, 1.0)],
            min_clearance: 0.05,
        }
    }
}

/// Sampling ranges for the free scene parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterRanges {
    pub wall_eps: Interval,
    pub wall_thickness: Interval,
    pub target_eps: Interval,
    /// Region that must contain every target square.
    pub target_region: Rect,
}

impl Default for ParameterRanges {
    fn default() -> Self {
        Self {
            wall_eps: WALL_EPS_BOUNDS,
            wall_thickness: WALL_THICKNESS_BOUNDS,
            target_eps: TARGET_EPS_BOUNDS,
            target_region: Rect { x0: 0.80, x1: 1.70, y0: 0.30, y1: 1.70 },
        }
    }
}

impl ParameterRanges {
    pub fn validate(&self) -> Result<(), SceneError> {
        let mut problems = Vec::new();
        for (name, iv, bounds) in [
            ("wall_eps", self.wall_eps, WALL_EPS_BOUNDS),
            ("wall_thickness", self.wall_thickness, WALL_THICKNESS_BOUNDS),
            ("target_eps", self.target_eps, TARGET_EPS_BOUNDS),
        ] {
            if !iv.is_valid() {
                problems.push(format!("{name} interval [{}, {}] is empty", iv.min, iv.max));
            } else if !iv.within(&bounds) {
                problems.push(format!(
                    "{name} interval [{}, {}] leaves [{}, {}]",
                    iv.min, iv.max, bounds.min, bounds.max
                ));
            }
        }
        let r = self.target_region;
        if !(r.x1 - r.x0 >= TARGET_SIDE - EDGE_TOL && r.y1 - r.y0 >= TARGET_SIDE - EDGE_TOL) {
            problems.push(format!(
                "target region {:?} cannot hold a {TARGET_SIDE} m target",
                r
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(SceneError::InvalidArgument(problems.join("; ")))
        }
    }

    /// Range of target-centre coordinates that keeps the square in the region.
    pub fn center_x(&self) -> Interval {
        let h = TARGET_SIDE / 2.0;
        Interval::new(self.target_region.x0 + h, self.target_region.x1 - h)
    }

    pub fn center_y(&self) -> Interval {
        let h = TARGET_SIDE / 2.0;
        Interval::new(self.target_region.y0 + h, self.target_region.y1 - h)
    }

    /// Generation range of each label entry, in [`label_vector`] order.
    pub fn label_ranges(&self, mode: Mode) -> Vec<Interval> {
        let mut out = Vec::with_capacity(mode.label_len());
        for _ in 0..mode.targets() {
            out.extend([self.center_x(), self.center_y(), self.target_eps]);
        }
        out.extend([self.wall_eps, self.wall_thickness]);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneLayout {
    pub width: f64,
    pub height: f64,
    pub wall: WallSpec,
    pub targets: Vec<TargetSpec>,
    pub source_line: SourceLine,
    pub receivers: Vec<(f64, f64)>,
    pub mode: Mode,
    pub target_region: Rect,
    pub min_clearance: f64,
}

impl SceneLayout {
    pub fn max_eps_r(&self) -> f64 {
        self.targets.iter().map(|t| t.eps_r).fold(self.wall.eps_r.max(1.0), f64::max)
    }

    pub fn domain(&self) -> Rect {
        Rect { x0: 0.0, x1: self.width, y0: 0.0, y1: self.height }
    }

    /// The same scene reflected about the horizontal midline of the domain.
    pub fn mirrored_y(&self) -> Self {
        let mut out = self.clone();
        let h = self.height;
        for t in &mut out.targets {
            t.center_y = h - t.center_y;
        }
        out.targets = canonical_order(&out.targets);
        out.source_line = SourceLine {
            x: self.source_line.x,
            y0: h - self.source_line.y1,
            y1: h - self.source_line.y0,
        };
        for r in &mut out.receivers {
            r.1 = h - r.1;
        }
        let reg = self.target_region;
        out.target_region = Rect { y0: h - reg.y1, y1: h - reg.y0, ..reg };
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SceneViolation {
    TargetCount { mode: Mode, found: usize },
    WallEps(f64),
    WallThickness(f64),
    WallOutsideDomain,
    TargetEps { index: usize, value: f64 },
    TargetSide { index: usize, value: f64 },
    TargetOutsideRegion { index: usize },
    WallClearance { index: usize, gap: f64 },
    EdgeClearance { index: usize, gap: f64 },
    Overlap,
    NotCanonical,
    SourceOutsideDomain,
    ReceiverOutsideDomain { index: usize },
    NonFinite,
}

impl fmt::Display for SceneViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use SceneViolation::*;
        match self {
            TargetCount { mode, found } => write!(
                f,
                "mode {} needs {} target(s), found {found}",
                mode.name(),
                mode.targets()
            ),
            WallEps(v) => write!(
                f,
                "wall permittivity {v} outside [{}, {}]",
                WALL_EPS_BOUNDS.min, WALL_EPS_BOUNDS.max
            ),
            WallThickness(v) => write!(
                f,
                "wall thickness {v} m outside [{}, {}] m",
                WALL_THICKNESS_BOUNDS.min, WALL_THICKNESS_BOUNDS.max
            ),
            WallOutsideDomain => write!(f, "wall extends outside the domain"),
            TargetEps { index, value } => write!(
                f,
                "target {index} permittivity {value} outside [{}, {}]",
                TARGET_EPS_BOUNDS.min, TARGET_EPS_BOUNDS.max
            ),
            TargetSide { index, value } => {
                write!(f, "target {index} side {value} m, expected {TARGET_SIDE} m")
            }
            TargetOutsideRegion { index } => write!(f, "target {index} leaves the target region"),
            WallClearance { index, gap } => {
                write!(f, "target {index} is {gap:.4} m behind the wall, below the required clearance")
            }
            EdgeClearance { index, gap } => {
                write!(f, "target {index} is {gap:.4} m from the domain edge, below the required clearance")
            }
            Overlap => write!(f, "targets overlap"),
            NotCanonical => write!(f, "targets are not in canonical order"),
            SourceOutsideDomain => write!(f, "source line leaves the domain"),
            ReceiverOutsideDomain { index } => write!(f, "receiver {index} lies outside the domain"),
            NonFinite => write!(f, "scene contains non-finite values"),
        }
    }
}

/// Checks every layout invariant and reports all violations found.
pub fn validate_scene(scene: &SceneLayout) -> Result<(), Vec<SceneViolation>> {
    use SceneViolation::*;
    let mut v = Vec::new();
    let finite = [scene.width, scene.height, scene.wall.eps_r, scene.wall.thickness, scene.wall.front_face_x]
        .into_iter()
        .chain(scene.targets.iter().flat_map(|t| [t.center_x, t.center_y, t.side, t.eps_r]))
        .chain(scene.receivers.iter().flat_map(|r| [r.0, r.1]))
        .all(f64::is_finite);
    if !finite {
        return Err(vec![NonFinite]);
    }

    if scene.targets.len() != scene.mode.targets() {
        v.push(TargetCount { mode: scene.mode, found: scene.targets.len() });
    }
    if !WALL_EPS_BOUNDS.contains(scene.wall.eps_r) {
        v.push(WallEps(scene.wall.eps_r));
    }
    if !WALL_THICKNESS_BOUNDS.contains(scene.wall.thickness) {
        v.push(WallThickness(scene.wall.thickness));
    }
    let domain = scene.domain();
    if scene.wall.front_face_x < 0.0 || scene.wall.back_face_x() > scene.width {
        v.push(WallOutsideDomain);
    }
    for (index, t) in scene.targets.iter().enumerate() {
        if !TARGET_EPS_BOUNDS.contains(t.eps_r) {
            v.push(TargetEps { index, value: t.eps_r });
        }
        if (t.side - TARGET_SIDE).abs() > EDGE_TOL {
            v.push(TargetSide { index, value: t.side });
        }
        let b = t.bounds();
        if !scene.target_region.contains_rect(&b) {
            v.push(TargetOutsideRegion { index });
        }
        let wall_gap = b.x0 - scene.wall.back_face_x();
        if wall_gap < scene.min_clearance - EDGE_TOL {
            v.push(WallClearance { index, gap: wall_gap });
        }
        let edge_gap = (b.x0).min(b.y0).min(domain.x1 - b.x1).min(domain.y1 - b.y1);
        if edge_gap < scene.min_clearance - EDGE_TOL {
            v.push(EdgeClearance { index, gap: edge_gap });
        }
    }
    if scene.targets.len() == 2 && scene.targets[0].overlaps(&scene.targets[1]) {
        v.push(Overlap);
    }
    if canonical_order(&scene.targets) != scene.targets {
        v.push(NotCanonical);
    }
    let s = scene.source_line;
    if !(domain.contains_point(s.x, s.y0) && domain.contains_point(s.x, s.y1) && s.y0 <= s.y1) {
        v.push(SourceOutsideDomain);
    }
    for (index, r) in scene.receivers.iter().enumerate() {
        if !domain.contains_point(r.0, r.1) {
            v.push(ReceiverOutsideDomain { index });
        }
    }
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

/// Targets sorted by centre x, then centre y.
pub fn canonical_order(targets: &[TargetSpec]) -> Vec<TargetSpec> {
    let mut out = targets.to_vec();
    out.sort_by(|a, b| {
        a.center_x
            .total_cmp(&b.center_x)
            .then(a.center_y.total_cmp(&b.center_y))
    });
    out
}

/// Draws a scene with every free parameter uniform over its range.
pub fn sample_scene(
    seed: u64,
    mode: Mode,
    ranges: &ParameterRanges,
    geometry: &SceneGeometry,
) -> Result<SceneLayout, SceneError> {
    ranges.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wall = WallSpec {
        eps_r: ranges.wall_eps.sample(&mut rng),
        thickness: ranges.wall_thickness.sample(&mut rng),
        front_face_x: geometry.wall_front_x,
    };
    let (cx, cy) = (ranges.center_x(), ranges.center_y());
    let draw = |rng: &mut ChaCha8Rng| TargetSpec {
        center_x: cx.sample(rng),
        center_y: cy.sample(rng),
        side: TARGET_SIDE,
        eps_r: ranges.target_eps.sample(rng),
    };

    let mut targets = None;
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let candidate: Vec<TargetSpec> = (0..mode.targets()).map(|_| draw(&mut rng)).collect();
        if candidate.len() < 2 || !candidate[0].overlaps(&candidate[1]) {
            targets = Some(candidate);
            break;
        }
    }
    let targets = targets.ok_or(SceneError::SamplingFailed { attempts: MAX_PLACEMENT_ATTEMPTS })?;

    let scene = SceneLayout {
        width: geometry.width,
        height: geometry.height,
        wall,
        targets: canonical_order(&targets),
        source_line: geometry.source_line,
        receivers: geometry.receivers.clone(),
        mode,
        target_region: ranges.target_region,
        min_clearance: geometry.min_clearance,
    };
    validate_scene(&scene).map_err(SceneError::Invalid)?;
    Ok(scene)
}

/// Regression targets: per target `(x, y, eps_r)`, then wall `(eps_r, thickness)`.
pub fn label_vector(scene: &SceneLayout) -> Vec<f64> {
    let mut out = Vec::with_capacity(3 * scene.targets.len() + 2);
    for t in canonical_order(&scene.targets) {
        out.extend([t.center_x, t.center_y, t.eps_r]);
    }
    out.extend([scene.wall.eps_r, scene.wall.thickness]);
    out
}

/// Human-readable names and units of the label entries.
pub fn label_names(mode: Mode) -> Vec<(String, &'static str)> {
    let mut out = Vec::new();
    for k in 1..=mode.targets() {
        let tag = if mode == Mode::Single { String::new() } else { format!("{k}") };
        out.push((format!("target{tag}_x"), "m"));
        out.push((format!("target{tag}_y"), "m"));
        out.push((format!("target{tag}_eps"), ""));
    }
    out.push(("wall_eps".into(), ""));
    out.push(("wall_thickness".into(), "m"));
    out
}

/// How scenes are put on a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discretization {
    /// Square cell size, metres.
    pub cell_size: f64,
    pub pml: PmlConfig,
    pub n_steps: usize,
    /// Frequency used by the resolution check, Hz.
    pub frequency: f64,
    pub min_cells_per_wavelength: f64,
}

impl Default for Discretization {
    fn default() -> Self {
        Self {
            cell_size: 1e-3,
            pml: PmlConfig::default(),
            n_steps: 4096,
            frequency: 3e9,
            min_cells_per_wavelength: 10.0,
        }
    }
}

/// A grid laid over a scene domain plus the absorbing margin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneGrid {
    pub grid: GridSpec,
    pub pml_depth: usize,
    pub frequency: f64,
    pub min_cells_per_wavelength: f64,
}

impl SceneGrid {
    pub fn for_scene(scene: &SceneLayout, disc: &Discretization) -> Result<Self, SceneError> {
        let dx = disc.cell_size;
        if !(dx > 0.0) {
            return Err(SceneError::InvalidArgument(format!("cell size must be positive, got {dx}")));
        }
        let cells = |len: f64| (len / dx).round() as usize;
        let depth = disc.pml.depth_cells;
        let nx = cells(scene.width) + 2 * depth;
        let ny = cells(scene.height) + 2 * depth;
        let dt = COURANT_SAFETY * crate::fdtd::courant_dt(dx, dx)?;
        let grid = GridSpec::new(nx, ny, dx, dx, dt, disc.n_steps)?;
        Ok(Self {
            grid,
            pml_depth: depth,
            frequency: disc.frequency,
            min_cells_per_wavelength: disc.min_cells_per_wavelength,
        })
    }

    /// Node indices whose cell centres fall in `[lo, hi)` along an axis.
    fn node_span(&self, lo: f64, hi: f64, spacing: f64, n: usize) -> std::ops::Range<usize> {
        let first = (lo / spacing - 0.5 - EDGE_TOL).ceil();
        let end = (hi / spacing - 0.5 - EDGE_TOL).ceil();
        let clamp = |k: f64| (k + self.pml_depth as f64).clamp(0.0, n as f64) as usize;
        clamp(first)..clamp(end)
    }

    pub fn x_span(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        self.node_span(lo, hi, self.grid.dx, self.grid.nx)
    }

    pub fn y_span(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        self.node_span(lo, hi, self.grid.dy, self.grid.ny)
    }

    /// Node whose cell contains the point.
    pub fn node_at(&self, x: f64, y: f64) -> (usize, usize) {
        let k = |v: f64, d: f64, n: usize| {
            let c = (v / d + EDGE_TOL).floor() + self.pml_depth as f64;
            c.clamp(0.0, (n - 1) as f64) as usize
        };
        (k(x, self.grid.dx, self.grid.nx), k(y, self.grid.dy, self.grid.ny))
    }

    /// Physical coordinate of a node centre.
    pub fn node_center(&self, i: usize, j: usize) -> (f64, f64) {
        let d = self.pml_depth as f64;
        ((i as f64 - d + 0.5) * self.grid.dx, (j as f64 - d + 0.5) * self.grid.dy)
    }

    pub fn source_cells(&self, scene: &SceneLayout) -> Vec<(usize, usize)> {
        let s = scene.source_line;
        let (i, _) = self.node_at(s.x, s.y0);
        self.y_span(s.y0, s.y1).map(|j| (i, j)).collect()
    }

    pub fn receiver_nodes(&self, scene: &SceneLayout) -> Vec<(usize, usize)> {
        scene.receivers.iter().map(|&(x, y)| self.node_at(x, y)).collect()
    }
}

/// Paints the wall and targets onto a vacuum background.
pub fn rasterize(scene: &SceneLayout, sg: &SceneGrid) -> Result<MaterialGrid, SceneError> {
    sg.grid
        .check_resolution(scene.max_eps_r(), sg.frequency, sg.min_cells_per_wavelength)?;
    let g = &sg.grid;
    let mut m = MaterialGrid::vacuum(g.nx, g.ny);
    let wall = sg.x_span(scene.wall.front_face_x, scene.wall.back_face_x());
    m.fill_eps(wall.start, wall.end, 0, g.ny, scene.wall.eps_r);

    for t in &scene.targets {
        let b = t.bounds();
        let (xs, ys) = (sg.x_span(b.x0, b.x1), sg.y_span(b.y0, b.y1));
        let gap = xs.start as f64 - wall.end as f64;
        if !scene.targets.is_empty() && gap < CLEARANCE_CELLS {
            return Err(SceneError::InvalidArgument(format!(
                "target at x={} sits {gap} cells behind the wall, need {CLEARANCE_CELLS}",
                t.center_x
            )));
        }
        m.fill_eps(xs.start, xs.end, ys.start, ys.end, t.eps_r);
    }
    Ok(m)
}
