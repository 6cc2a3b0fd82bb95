//! Worlds: the terrain under the robots, the obstacles in front of them,
//! and the per-robot placements and sensor geometry.
//!
//! A world file is a flat list of `key = value` lines (with `#` comments).
//! A `preset` key lays down a complete base world — an s-shaped line track
//! or a bar-crossing course — and every other key overrides or extends it.
//! Distances are millimeters, light values live on the raw 0–1023 scale.

use std::path::Path;

use crate::bridge::Latency;

/// Axis-aligned box, the only solid shape. `x0 < x1`, `y0 < y1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    /// Distance along the ray `(ox,oy) + t·(dx,dy)` to this box, if it
    /// hits. An origin inside the box reads zero.
    pub fn raycast(&self, ox: f64, oy: f64, dx: f64, dy: f64) -> Option<f64> {
        let mut tmin = f64::NEG_INFINITY;
        let mut tmax = f64::INFINITY;
        for (o, d, lo, hi) in [(ox, dx, self.x0, self.x1), (oy, dy, self.y0, self.y1)] {
            if d.abs() < 1e-12 {
                if o < lo || o > hi {
                    return None;
                }
            } else {
                let (t1, t2) = ((lo - o) / d, (hi - o) / d);
                tmin = tmin.max(t1.min(t2));
                tmax = tmax.min(t1.max(t2));
            }
        }
        if tmax >= tmin.max(0.0) {
            Some(tmin.max(0.0))
        } else {
            None
        }
    }

    /// Whether a disc overlaps this box.
    pub fn circle_overlap(&self, cx: f64, cy: f64, r: f64) -> bool {
        let nx = cx.clamp(self.x0, self.x1);
        let ny = cy.clamp(self.y0, self.y1);
        let (dx, dy) = (cx - nx, cy - ny);
        dx * dx + dy * dy < r * r
    }
}

/// One piece of a line track's center line.
#[derive(Clone, Copy, Debug)]
pub enum Segment {
    Straight { ax: f64, ay: f64, bx: f64, by: f64 },
    /// Circular arc around `(cx,cy)`; `start` is the angle of the first
    /// point, `sweep` is signed (positive = counterclockwise).
    Arc { cx: f64, cy: f64, radius: f64, start: f64, sweep: f64 },
}

const TAU: f64 = std::f64::consts::TAU;

impl Segment {
    pub fn start_point(&self) -> (f64, f64) {
        match self {
            Segment::Straight { ax, ay, .. } => (*ax, *ay),
            Segment::Arc { cx, cy, radius, start, .. } => {
                (cx + radius * start.cos(), cy + radius * start.sin())
            }
        }
    }

    pub fn end_point(&self) -> (f64, f64) {
        match self {
            Segment::Straight { bx, by, .. } => (*bx, *by),
            Segment::Arc { cx, cy, radius, start, sweep } => {
                let a = start + sweep;
                (cx + radius * a.cos(), cy + radius * a.sin())
            }
        }
    }

    pub fn length(&self) -> f64 {
        match self {
            Segment::Straight { ax, ay, bx, by } => (bx - ax).hypot(by - ay),
            Segment::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    /// Distance from a point to this segment.
    pub fn distance_to(&self, px: f64, py: f64) -> f64 {
        match self {
            Segment::Straight { ax, ay, bx, by } => {
                let (vx, vy) = (bx - ax, by - ay);
                let len2 = vx * vx + vy * vy;
                let t = if len2 == 0.0 {
                    0.0
                } else {
                    (((px - ax) * vx + (py - ay) * vy) / len2).clamp(0.0, 1.0)
                };
                (px - (ax + t * vx)).hypot(py - (ay + t * vy))
            }
            Segment::Arc { cx, cy, radius, start, sweep } => {
                let (vx, vy) = (px - cx, py - cy);
                let ang = vy.atan2(vx);
                let within = if *sweep >= 0.0 {
                    (ang - start).rem_euclid(TAU) <= *sweep
                } else {
                    (start - ang).rem_euclid(TAU) <= -sweep
                };
                if within {
                    (vx.hypot(vy) - radius).abs()
                } else {
                    let (sx, sy) = self.start_point();
                    let (ex, ey) = self.end_point();
                    (px - sx).hypot(py - sy).min((px - ex).hypot(py - ey))
                }
            }
        }
    }
}

/// The light field painted on the floor.
#[derive(Clone, Debug)]
pub enum Terrain {
    Empty {
        ground: f64,
    },
    /// A painted path of `line_value` on `ground_value` floor, `half_width`
    /// on either side of the center line.
    LineTrack {
        segments: Vec<Segment>,
        half_width: f64,
        line_value: f64,
        ground_value: f64,
    },
    /// `count` painted bars perpendicular to the x axis, starting at
    /// `bars_start`, each `bar_width` wide with `gap_width` floor between.
    Crossing {
        bars_start: f64,
        bar_width: f64,
        gap_width: f64,
        count: u32,
        bar_value: f64,
        gap_value: f64,
    },
}

impl Terrain {
    pub fn intensity_at(&self, x: f64, y: f64) -> f64 {
        match self {
            Terrain::Empty { ground } => *ground,
            Terrain::LineTrack { segments, half_width, line_value, ground_value } => {
                let on_line =
                    segments.iter().any(|s| s.distance_to(x, y) <= *half_width);
                if on_line {
                    *line_value
                } else {
                    *ground_value
                }
            }
            Terrain::Crossing { bars_start, bar_width, gap_width, count, bar_value, gap_value } => {
                let pitch = bar_width + gap_width;
                let off = x - bars_start;
                if off >= 0.0 && off < *count as f64 * pitch && off.rem_euclid(pitch) < *bar_width
                {
                    *bar_value
                } else {
                    *gap_value
                }
            }
        }
    }
}

/// Sensor noise parameters, worldwide.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseConfig {
    pub light_sigma: f64,
    pub light_spike_prob: f64,
    pub light_spike_mag: f64,
    pub sound_sigma: f64,
    pub obstacle_jitter: bool,
}

impl Default for NoiseConfig {
    fn default() -> NoiseConfig {
        NoiseConfig {
            light_sigma: 8.0,
            light_spike_prob: 0.05,
            light_spike_mag: 300.0,
            sound_sigma: 8.0,
            obstacle_jitter: true,
        }
    }
}

/// Where a sensor sits on the robot. `forward_mm` is along the heading,
/// `lateral_mm` is positive to the left.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MountSpec {
    pub forward_mm: f64,
    pub lateral_mm: f64,
    /// Median filter window length.
    pub window: usize,
}

impl Default for MountSpec {
    fn default() -> MountSpec {
        MountSpec { forward_mm: 60.0, lateral_mm: 0.0, window: 5 }
    }
}

/// Placement and geometry of one robot, keyed by its btname.
#[derive(Clone, Debug)]
pub struct RobotPlacement {
    pub btname: String,
    pub x: f64,
    pub y: f64,
    pub heading_rad: f64,
    pub wheel_diameter_mm: f64,
    pub track_width_mm: f64,
    pub footprint_radius_mm: f64,
    /// One spec per sensor port 1–4.
    pub mounts: [MountSpec; 4],
}

impl RobotPlacement {
    fn new(btname: &str) -> RobotPlacement {
        RobotPlacement {
            btname: btname.to_string(),
            x: 0.0,
            y: 0.0,
            heading_rad: 0.0,
            wheel_diameter_mm: 56.0,
            track_width_mm: 120.0,
            footprint_radius_mm: 90.0,
            mounts: [MountSpec::default(); 4],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckOp {
    Le,
    Lt,
    Ge,
    Gt,
    Eq,
}

impl CheckOp {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckOp::Le => "<=",
            CheckOp::Lt => "<",
            CheckOp::Ge => ">=",
            CheckOp::Gt => ">",
            CheckOp::Eq => "==",
        }
    }

    pub fn holds(self, measured: f64, limit: f64) -> bool {
        match self {
            CheckOp::Le => measured <= limit,
            CheckOp::Lt => measured < limit,
            CheckOp::Ge => measured >= limit,
            CheckOp::Gt => measured > limit,
            CheckOp::Eq => measured == limit,
        }
    }
}

/// A pass/fail condition over a run metric, e.g.
/// `check.final_distance_to_end_mm = <= 60`.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckSpec {
    pub metric: String,
    pub op: CheckOp,
    pub value: f64,
}

/// When the run counts as finished (all runs also stop at max time).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CompletionRule {
    /// Some robot's center came within `radius` of `(x,y)`.
    LineEnd { x: f64, y: f64, radius: f64 },
    /// Every robot's center passed `x`.
    AllPastX { x: f64 },
    RunToMaxTime,
}

#[derive(Clone, Debug)]
pub struct World {
    pub terrain: Terrain,
    pub obstacles: Vec<Rect>,
    pub ambient_sound: f64,
    pub noise: NoiseConfig,
    pub robots: Vec<RobotPlacement>,
    pub completion: CompletionRule,
    pub checks: Vec<CheckSpec>,
    pub seed: u64,
    pub max_time_ms: u64,
    pub tick_ms: Option<u64>,
    pub ack_timeout_ms: Option<u64>,
    pub latency: Option<Latency>,
}

impl Default for World {
    fn default() -> World {
        World {
            terrain: Terrain::Empty { ground: 600.0 },
            obstacles: Vec::new(),
            ambient_sound: 0.0,
            noise: NoiseConfig::default(),
            robots: Vec::new(),
            completion: CompletionRule::RunToMaxTime,
            checks: Vec::new(),
            seed: 42,
            max_time_ms: 60_000,
            tick_ms: None,
            ack_timeout_ms: None,
            latency: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum WorldError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Spec { line: usize, message: String },
}

fn spec_err(line: usize, message: impl Into<String>) -> WorldError {
    WorldError::Spec { line, message: message.into() }
}

impl World {
    pub fn intensity_at(&self, x: f64, y: f64) -> f64 {
        self.terrain.intensity_at(x, y)
    }

    /// Shortest hit distance from a point along a direction to any
    /// obstacle, in millimeters.
    pub fn raycast_mm(&self, ox: f64, oy: f64, dx: f64, dy: f64) -> Option<f64> {
        self.obstacles
            .iter()
            .filter_map(|r| r.raycast(ox, oy, dx, dy))
            .min_by(|a, b| a.partial_cmp(b).expect("hit distances are finite"))
    }

    pub fn touching_at(&self, x: f64, y: f64) -> bool {
        self.obstacles.iter().any(|r| r.contains(x, y))
    }

    pub fn placement(&self, btname: &str) -> Option<&RobotPlacement> {
        self.robots.iter().find(|r| r.btname == btname)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<World, WorldError> {
        let path = path.as_ref();
        let src = std::fs::read_to_string(path)
            .map_err(|e| WorldError::Io { path: path.display().to_string(), source: e })?;
        World::parse_str(&src)
    }

    pub fn parse_str(src: &str) -> Result<World, WorldError> {
        let mut pairs: Vec<(usize, String, String)> = Vec::new();
        for (idx, raw) in src.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some(eq) = line.find('=') else {
                return Err(spec_err(line_no, format!("expected key = value, found '{line}'")));
            };
            let key = line[..eq].trim().to_string();
            let value = line[eq + 1..].trim().to_string();
            if key.is_empty() || value.is_empty() {
                return Err(spec_err(line_no, "empty key or value"));
            }
            pairs.push((line_no, key, value));
        }

        let mut world = World::default();
        let presets: Vec<_> = pairs.iter().filter(|(_, k, _)| k == "preset").collect();
        if presets.len() > 1 {
            return Err(spec_err(presets[1].0, "more than one preset"));
        }
        if let Some((line, _, value)) = presets.first() {
            apply_preset(&mut world, value, *line)?;
        }
        for (line, key, value) in &pairs {
            if key == "preset" {
                continue;
            }
            apply_key(&mut world, key, value, *line)?;
        }
        validate(&world)?;
        Ok(world)
    }
}

/// The s-shaped line track: two straight legs joined by opposite 45° arcs
/// of radius 600 mm, about 1.34 m end to end.
fn s_curve_segments() -> Vec<Segment> {
    use std::f64::consts::FRAC_PI_2 as Q;
    use std::f64::consts::FRAC_PI_4 as E;
    let mut segs = Vec::new();
    segs.push(Segment::Straight { ax: 0.0, ay: 0.0, bx: 200.0, by: 0.0 });
    // Left-turning arc: center straight above the current end point.
    let left = Segment::Arc { cx: 200.0, cy: 600.0, radius: 600.0, start: -Q, sweep: E };
    let (lx, ly) = left.end_point();
    segs.push(left);
    // Right-turning arc: center on the right of the 45° heading.
    let (ncx, ncy) = (lx + 600.0 * (-E).cos(), ly + 600.0 * (-E).sin());
    let start = (ly - ncy).atan2(lx - ncx);
    let right = Segment::Arc { cx: ncx, cy: ncy, radius: 600.0, start, sweep: -E };
    let (rx, ry) = right.end_point();
    segs.push(right);
    segs.push(Segment::Straight { ax: rx, ay: ry, bx: rx + 200.0, by: ry });
    segs
}

fn apply_preset(world: &mut World, name: &str, line: usize) -> Result<(), WorldError> {
    if name == "empty" {
        world.terrain = Terrain::Empty { ground: 600.0 };
        world.completion = CompletionRule::RunToMaxTime;
        return Ok(());
    }
    if name == "linetrack-s-curve" {
        let segments = s_curve_segments();
        let (ex, ey) = segments.last().expect("s-curve has segments").end_point();
        world.terrain = Terrain::LineTrack {
            segments,
            half_width: 50.0,
            line_value: 200.0,
            ground_value: 600.0,
        };
        world.completion = CompletionRule::LineEnd { x: ex, y: ey, radius: 60.0 };
        return Ok(());
    }
    if let Some(rest) = name.strip_prefix("crossing-") {
        // crossing-<N>-bars-obstacle-at-<K>
        let parts: Vec<&str> = rest.split('-').collect();
        if parts.len() != 5 || parts[1] != "bars" || parts[2] != "obstacle" || parts[3] != "at" {
            return Err(spec_err(line, format!("unknown preset '{name}'")));
        }
        let count: u32 = parts[0]
            .parse()
            .map_err(|_| spec_err(line, format!("bad bar count in preset '{name}'")))?;
        let k: u32 = parts[4]
            .parse()
            .map_err(|_| spec_err(line, format!("bad obstacle index in preset '{name}'")))?;
        if count < 1 {
            return Err(spec_err(line, "bar count must be at least 1"));
        }
        if k < 1 || k > count {
            return Err(spec_err(
                line,
                format!("obstacle index {k} out of range 1..={count}"),
            ));
        }
        let (bars_start, bar_width, gap_width) = (400.0, 120.0, 120.0);
        let pitch = bar_width + gap_width;
        world.terrain = Terrain::Crossing {
            bars_start,
            bar_width,
            gap_width,
            count,
            bar_value: 200.0,
            gap_value: 600.0,
        };
        // The obstacle stands in the gap after bar K, 200 mm past the
        // bar's leading edge, 40 mm deep and 100 mm wide.
        let leading = bars_start + (k - 1) as f64 * pitch + 200.0;
        world.obstacles.push(Rect { x0: leading, y0: -50.0, x1: leading + 40.0, y1: 50.0 });
        // Done once everyone is 30 mm past the far edge of the last bar.
        let last_edge = bars_start + (count - 1) as f64 * pitch + bar_width;
        world.completion = CompletionRule::AllPastX { x: last_edge + 30.0 };
        return Ok(());
    }
    Err(spec_err(line, format!("unknown preset '{name}'")))
}

fn parse_f64(value: &str, line: usize, key: &str) -> Result<f64, WorldError> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| spec_err(line, format!("{key}: '{value}' is not a number")))
}

fn parse_u64(value: &str, line: usize, key: &str) -> Result<u64, WorldError> {
    value
        .parse::<u64>()
        .map_err(|_| spec_err(line, format!("{key}: '{value}' is not a non-negative integer")))
}

/// Accepts `30`, `30±20` and `30+-20`.
pub fn parse_latency(value: &str) -> Option<Latency> {
    let (base, jitter) = match value.split_once('±').or_else(|| value.split_once("+-")) {
        Some((b, j)) => (b.trim(), Some(j.trim())),
        None => (value.trim(), None),
    };
    let base_ms = base.parse::<u64>().ok()?;
    let jitter_ms = match jitter {
        Some(j) => j.parse::<u64>().ok()?,
        None => 0,
    };
    Some(Latency { base_ms, jitter_ms })
}

fn apply_key(world: &mut World, key: &str, value: &str, line: usize) -> Result<(), WorldError> {
    // Robot keys first: robot.<btname>.<field>[.<subfield>]
    if let Some(rest) = key.strip_prefix("robot.") {
        return apply_robot_key(world, rest, value, line, key);
    }
    if let Some(metric) = key.strip_prefix("check.") {
        let mut it = value.split_whitespace();
        let op = match it.next() {
            Some("<=") => CheckOp::Le,
            Some("<") => CheckOp::Lt,
            Some(">=") => CheckOp::Ge,
            Some(">") => CheckOp::Gt,
            Some("==") => CheckOp::Eq,
            other => {
                return Err(spec_err(
                    line,
                    format!("{key}: expected an operator (<=, <, >=, >, ==), found {other:?}"),
                ))
            }
        };
        let num = it.next().ok_or_else(|| spec_err(line, format!("{key}: missing limit")))?;
        let limit = parse_f64(num, line, key)?;
        if it.next().is_some() {
            return Err(spec_err(line, format!("{key}: trailing input after limit")));
        }
        world.checks.push(CheckSpec { metric: metric.to_string(), op, value: limit });
        return Ok(());
    }
    match key {
        "seed" => world.seed = parse_u64(value, line, key)?,
        "max_time_ms" => world.max_time_ms = parse_u64(value, line, key)?,
        "tick_ms" => world.tick_ms = Some(parse_u64(value, line, key)?),
        "ack_timeout_ms" => world.ack_timeout_ms = Some(parse_u64(value, line, key)?),
        "latency" => {
            world.latency = Some(parse_latency(value).ok_or_else(|| {
                spec_err(line, format!("latency: '{value}' (use MS or MS±J)"))
            })?)
        }
        "ambient.sound" => world.ambient_sound = parse_f64(value, line, key)?,
        "light.sigma" => world.noise.light_sigma = parse_f64(value, line, key)?,
        "light.spike_prob" => world.noise.light_spike_prob = parse_f64(value, line, key)?,
        "light.spike_mag" => world.noise.light_spike_mag = parse_f64(value, line, key)?,
        "sound.sigma" => world.noise.sound_sigma = parse_f64(value, line, key)?,
        "obstacle.jitter" => {
            world.noise.obstacle_jitter = match value {
                "true" => true,
                "false" => false,
                _ => return Err(spec_err(line, format!("{key}: expected true or false"))),
            }
        }
        "ground.value" => match &mut world.terrain {
            Terrain::Empty { ground } => *ground = parse_f64(value, line, key)?,
            Terrain::LineTrack { ground_value, .. } => {
                *ground_value = parse_f64(value, line, key)?
            }
            Terrain::Crossing { gap_value, .. } => *gap_value = parse_f64(value, line, key)?,
        },
        "line.value" => match &mut world.terrain {
            Terrain::LineTrack { line_value, .. } => *line_value = parse_f64(value, line, key)?,
            _ => return Err(spec_err(line, "line.value: no line track in this world")),
        },
        "line.half_width" => match &mut world.terrain {
            Terrain::LineTrack { half_width, .. } => {
                *half_width = parse_f64(value, line, key)?
            }
            _ => return Err(spec_err(line, "line.half_width: no line track in this world")),
        },
        "bars.value" => match &mut world.terrain {
            Terrain::Crossing { bar_value, .. } => *bar_value = parse_f64(value, line, key)?,
            _ => return Err(spec_err(line, "bars.value: no crossing in this world")),
        },
        "bars.width" => match &mut world.terrain {
            Terrain::Crossing { bar_width, .. } => *bar_width = parse_f64(value, line, key)?,
            _ => return Err(spec_err(line, "bars.width: no crossing in this world")),
        },
        "bars.gap" => match &mut world.terrain {
            Terrain::Crossing { gap_width, .. } => *gap_width = parse_f64(value, line, key)?,
            _ => return Err(spec_err(line, "bars.gap: no crossing in this world")),
        },
        "bars.count" => match &mut world.terrain {
            Terrain::Crossing { count, .. } => {
                *count = parse_u64(value, line, key)? as u32;
            }
            _ => return Err(spec_err(line, "bars.count: no crossing in this world")),
        },
        "final.x" => match &mut world.completion {
            CompletionRule::AllPastX { x } => *x = parse_f64(value, line, key)?,
            _ => {
                world.completion =
                    CompletionRule::AllPastX { x: parse_f64(value, line, key)? }
            }
        },
        "obstacle" => {
            let nums: Vec<f64> = value
                .split_whitespace()
                .map(|v| parse_f64(v, line, key))
                .collect::<Result<_, _>>()?;
            let &[x0, y0, x1, y1] = nums.as_slice() else {
                return Err(spec_err(line, "obstacle: expected 'x0 y0 x1 y1'"));
            };
            if x0 >= x1 || y0 >= y1 {
                return Err(spec_err(line, "obstacle: x0 < x1 and y0 < y1 required"));
            }
            world.obstacles.push(Rect { x0, y0, x1, y1 });
        }
        _ => return Err(spec_err(line, format!("unknown key '{key}'"))),
    }
    Ok(())
}

fn apply_robot_key(
    world: &mut World,
    rest: &str,
    value: &str,
    line: usize,
    key: &str,
) -> Result<(), WorldError> {
    let Some((btname, field)) = rest.split_once('.') else {
        return Err(spec_err(line, format!("{key}: expected robot.<btname>.<field>")));
    };
    if !world.robots.iter().any(|r| r.btname == btname) {
        world.robots.push(RobotPlacement::new(btname));
    }
    let robot = world
        .robots
        .iter_mut()
        .find(|r| r.btname == btname)
        .expect("placement just ensured");
    // Sensor geometry: sensorN.forward_mm / sensorN.lateral_mm / sensorN.window
    if let Some(sensor_rest) = field.strip_prefix("sensor") {
        let Some((port_str, sub)) = sensor_rest.split_once('.') else {
            return Err(spec_err(line, format!("{key}: expected sensorN.<field>")));
        };
        let port: usize = port_str
            .parse()
            .ok()
            .filter(|p| (1..=4).contains(p))
            .ok_or_else(|| spec_err(line, format!("{key}: sensor port must be 1-4")))?;
        let mount = &mut robot.mounts[port - 1];
        match sub {
            "forward_mm" => mount.forward_mm = parse_f64(value, line, key)?,
            "lateral_mm" => mount.lateral_mm = parse_f64(value, line, key)?,
            "window" => {
                let w = parse_u64(value, line, key)? as usize;
                if w < 1 {
                    return Err(spec_err(line, format!("{key}: window must be at least 1")));
                }
                mount.window = w;
            }
            other => return Err(spec_err(line, format!("{key}: unknown sensor field '{other}'"))),
        }
        return Ok(());
    }
    match field {
        "x" => robot.x = parse_f64(value, line, key)?,
        "y" => robot.y = parse_f64(value, line, key)?,
        "heading_deg" => robot.heading_rad = parse_f64(value, line, key)?.to_radians(),
        "wheel_diameter_mm" => {
            let v = parse_f64(value, line, key)?;
            if v <= 0.0 {
                return Err(spec_err(line, format!("{key}: must be positive")));
            }
            robot.wheel_diameter_mm = v;
        }
        "track_width_mm" => {
            let v = parse_f64(value, line, key)?;
            if v <= 0.0 {
                return Err(spec_err(line, format!("{key}: must be positive")));
            }
            robot.track_width_mm = v;
        }
        "footprint_radius_mm" => {
            let v = parse_f64(value, line, key)?;
            if v <= 0.0 {
                return Err(spec_err(line, format!("{key}: must be positive")));
            }
            robot.footprint_radius_mm = v;
        }
        other => return Err(spec_err(line, format!("{key}: unknown robot field '{other}'"))),
    }
    Ok(())
}

fn validate(world: &World) -> Result<(), WorldError> {
    if let Terrain::Crossing { bar_width, gap_width, count, .. } = &world.terrain {
        if *count < 1 {
            return Err(spec_err(0, "bars.count must be at least 1"));
        }
        if *bar_width <= 0.0 {
            return Err(spec_err(0, "bars.width must be positive"));
        }
        if *gap_width < 0.0 {
            return Err(spec_err(0, "bars.gap must not be negative"));
        }
    }
    if let Terrain::LineTrack { half_width, .. } = &world.terrain {
        if *half_width <= 0.0 {
            return Err(spec_err(0, "line.half_width must be positive"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rect_raycast_and_overlap() {
        let r = Rect { x0: 100.0, y0: -50.0, x1: 150.0, y1: 50.0 };
        assert_eq!(r.raycast(0.0, 0.0, 1.0, 0.0), Some(100.0));
        assert_eq!(r.raycast(120.0, 0.0, 1.0, 0.0), Some(0.0), "inside reads zero");
        assert_eq!(r.raycast(0.0, 60.0, 1.0, 0.0), None, "parallel miss");
        assert_eq!(r.raycast(200.0, 0.0, 1.0, 0.0), None, "behind the ray");
        let d = r.raycast(0.0, -120.0, (0.5f64).sqrt(), (0.5f64).sqrt()).unwrap();
        // 45° ray from (0,-120): enters at x=100 → t = 100/cos45 unless the
        // y-slab cuts first at y=-50 → t = 70/sin45.
        assert!((d - 100.0 / (0.5f64).sqrt()).abs() < 1e-9);

        assert!(r.circle_overlap(90.0, 0.0, 15.0));
        assert!(!r.circle_overlap(90.0, 0.0, 9.0));
        assert!(r.circle_overlap(95.0, 55.0, 8.0), "corner within radius");
        assert!(!r.circle_overlap(95.0, 55.0, 7.0), "corner outside radius");
    }

    #[test]
    fn straight_segment_distance() {
        let s = Segment::Straight { ax: 0.0, ay: 0.0, bx: 100.0, by: 0.0 };
        assert_eq!(s.distance_to(50.0, 30.0), 30.0);
        assert_eq!(s.distance_to(-40.0, 0.0), 40.0, "clamped to the start point");
        assert_eq!(s.distance_to(130.0, 40.0), 50.0, "clamped to the end point");
        assert_eq!(s.length(), 100.0);
    }

    #[test]
    fn arc_segment_distance() {
        use std::f64::consts::FRAC_PI_2;
        // Quarter circle radius 100 around origin from angle 0 to 90°.
        let a = Segment::Arc { cx: 0.0, cy: 0.0, radius: 100.0, start: 0.0, sweep: FRAC_PI_2 };
        assert!((a.distance_to(150.0, 0.0) - 50.0).abs() < 1e-9);
        let diag = (0.5f64).sqrt();
        assert!((a.distance_to(80.0 * diag, 80.0 * diag) - 20.0).abs() < 1e-9);
        // A point at angle -90° is outside the sweep: nearest endpoint is
        // (100, 0), distance sqrt(100² + 100²).
        assert!((a.distance_to(0.0, -100.0) - (20000.0f64).sqrt()).abs() < 1e-9);
        assert!((a.length() - 100.0 * FRAC_PI_2).abs() < 1e-12);

        // Negative sweep mirrors the positive one.
        let b = Segment::Arc {
            cx: 0.0,
            cy: 0.0,
            radius: 100.0,
            start: FRAC_PI_2,
            sweep: -FRAC_PI_2,
        };
        assert!((b.distance_to(150.0, 0.0) - 50.0).abs() < 1e-9);
        assert!((b.distance_to(0.0, -100.0) - (20000.0f64).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn s_curve_shape() {
        let segs = s_curve_segments();
        assert_eq!(segs.len(), 4);
        let total: f64 = segs.iter().map(|s| s.length()).sum();
        assert!(total > 1000.0, "track is over a meter long, got {total:.1}");
        // Segments join up.
        for w in segs.windows(2) {
            let (ex, ey) = w[0].end_point();
            let (sx, sy) = w[1].start_point();
            assert!((ex - sx).hypot(ey - sy) < 1e-9, "segments must be contiguous");
        }
        // Closed-form end point: 200 + two opposite 45° arcs of radius 600
        // + 200, which lands at x = 400 + 1200·sin45°, y = 1200·(1−cos45°)/…
        let (ex, ey) = segs.last().unwrap().end_point();
        let s45 = std::f64::consts::FRAC_PI_4.sin();
        let expected_x = 400.0 + 1200.0 * s45;
        let expected_y = 600.0 * (1.0 - std::f64::consts::FRAC_PI_4.cos()) * 2.0;
        assert!((ex - expected_x).abs() < 1e-9, "end x {ex} vs {expected_x}");
        assert!((ey - expected_y).abs() < 1e-9, "end y {ey} vs {expected_y}");
    }

    #[test]
    fn s_curve_preset_reads_dark_line_when_centered() {
        let w = World::parse_str("preset = linetrack-s-curve\n").unwrap();
        // Mounts 60 mm ahead, ±20 mm lateral, robot at the origin facing +x.
        for lat in [-20.0, 20.0] {
            let v = w.intensity_at(60.0, lat);
            assert!(v < 350.0, "centered mount must read the (dark) line, got {v}");
        }
        // Far off the path it reads bright ground.
        assert_eq!(w.intensity_at(100.0, 200.0), 600.0);
        assert_eq!(w.intensity_at(100.0, 51.0), 600.0, "just past the half width");
        assert_eq!(w.intensity_at(100.0, 49.0), 200.0, "just inside the half width");
        assert!(matches!(w.completion, CompletionRule::LineEnd { radius, .. } if radius == 60.0));
    }

    #[test]
    fn crossing_preset_geometry() {
        let w = World::parse_str("preset = crossing-6-bars-obstacle-at-2\n").unwrap();
        // Bars at [400,520), [640,760), [880,1000), ... value 200 on 600.
        assert_eq!(w.intensity_at(399.0, 0.0), 600.0);
        assert_eq!(w.intensity_at(400.0, 0.0), 200.0);
        assert_eq!(w.intensity_at(519.0, 0.0), 200.0);
        assert_eq!(w.intensity_at(520.0, 0.0), 600.0);
        assert_eq!(w.intensity_at(640.0, 123.0), 200.0, "bars span all y");
        assert_eq!(w.intensity_at(1600.0, 0.0), 200.0, "bar 6 leading edge");
        assert_eq!(w.intensity_at(1720.0, 0.0), 600.0, "past bar 6");
        // The obstacle sits in the gap after bar 2's leading edge (640):
        // x ∈ [840, 880], y ∈ [-50, 50].
        assert_eq!(w.obstacles.len(), 1);
        let o = w.obstacles[0];
        assert_eq!((o.x0, o.x1, o.y0, o.y1), (840.0, 880.0, -50.0, 50.0));
        // Finished once everyone passes 30 mm beyond bar 6's far edge.
        assert_eq!(w.completion, CompletionRule::AllPastX { x: 1750.0 });
        // An ultrasonic ray down the center line sees the obstacle.
        assert_eq!(w.raycast_mm(0.0, 0.0, 1.0, 0.0), Some(840.0));
        assert_eq!(w.raycast_mm(0.0, 60.0, 1.0, 0.0), None, "beside the obstacle");
    }

    #[test]
    fn crossing_preset_validation() {
        assert!(World::parse_str("preset = crossing-6-bars-obstacle-at-0\n").is_err());
        assert!(World::parse_str("preset = crossing-6-bars-obstacle-at-7\n").is_err());
        assert!(World::parse_str("preset = crossing-0-bars-obstacle-at-1\n").is_err());
        assert!(World::parse_str("preset = crossing-six-bars-obstacle-at-1\n").is_err());
        assert!(World::parse_str("preset = downhill\n").is_err());
        let err = World::parse_str("preset = crossing-6-bars-obstacle-at-2\nbars.width = 0\n")
            .unwrap_err();
        assert!(err.to_string().contains("bars.width"));
    }

    #[test]
    fn empty_world_has_no_hits() {
        let w = World::parse_str("").unwrap();
        assert_eq!(w.raycast_mm(0.0, 0.0, 1.0, 0.0), None);
        assert!(!w.touching_at(10.0, 10.0));
        assert_eq!(w.seed, 42);
        assert_eq!(w.max_time_ms, 60_000);
    }

    #[test]
    fn robot_keys_and_overrides() {
        let src = "preset = linetrack-s-curve\n\
                   # flip the painted value so the path reads bright\n\
                   line.value = 600\n\
                   ground.value = 200\n\
                   seed = 7\n\
                   max_time_ms = 120000\n\
                   latency = 60±40\n\
                   robot.NXT.x = 10\n\
                   robot.NXT.y = -5\n\
                   robot.NXT.heading_deg = 90\n\
                   robot.NXT.sensor1.lateral_mm = -20\n\
                   robot.NXT.sensor1.forward_mm = 60\n\
                   robot.NXT.sensor2.lateral_mm = 20\n\
                   robot.NXT.sensor2.window = 3\n\
                   check.final_distance_to_end_mm = <= 60\n\
                   check.longest_band_exit_ms = < 500\n";
        let w = World::parse_str(src).unwrap();
        assert_eq!(w.intensity_at(60.0, 20.0), 600.0, "path now reads bright");
        assert_eq!(w.seed, 7);
        assert_eq!(w.max_time_ms, 120_000);
        assert_eq!(w.latency, Some(Latency { base_ms: 60, jitter_ms: 40 }));
        let r = w.placement("NXT").unwrap();
        assert_eq!((r.x, r.y), (10.0, -5.0));
        assert!((r.heading_rad - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert_eq!(r.mounts[0].lateral_mm, -20.0);
        assert_eq!(r.mounts[1].window, 3);
        assert_eq!(r.mounts[2].window, 5, "untouched mounts keep defaults");
        assert_eq!(w.checks.len(), 2);
        assert_eq!(w.checks[0].metric, "final_distance_to_end_mm");
        assert_eq!(w.checks[0].op, CheckOp::Le);
        assert_eq!(w.checks[1].op, CheckOp::Lt);
    }

    #[test]
    fn latency_forms() {
        assert_eq!(parse_latency("30"), Some(Latency { base_ms: 30, jitter_ms: 0 }));
        assert_eq!(parse_latency("30±20"), Some(Latency { base_ms: 30, jitter_ms: 20 }));
        assert_eq!(parse_latency("30+-20"), Some(Latency { base_ms: 30, jitter_ms: 20 }));
        assert_eq!(parse_latency("fast"), None);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let err = World::parse_str("seed = 42\nnonsense\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let err = World::parse_str("mystery.key = 3\n").unwrap_err();
        assert!(err.to_string().contains("mystery.key"), "{err}");
        let err = World::parse_str("robot.NXT.sensor9.window = 5\n").unwrap_err();
        assert!(err.to_string().contains("port"), "{err}");
        let err = World::parse_str("check.x = approximately 4\n").unwrap_err();
        assert!(err.to_string().contains("operator"), "{err}");
        let err = World::parse_str("obstacle = 10 10 5 20\n").unwrap_err();
        assert!(err.to_string().contains("obstacle"), "{err}");
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let w = World::parse_str("# a comment\n\nseed = 9 # trailing comment\n").unwrap();
        assert_eq!(w.seed, 9);
    }
}
