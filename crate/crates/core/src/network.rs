//! Frequency-reuse-2 access-point grids, coverage classes and the
//! user-to-access-point assignment policy.
//!
//! A user can be served without co-channel interference whenever some
//! frequency colour has exactly one visible access point. Users for which no
//! such colour exists (four visible access points on a checkerboard) get a
//! dedicated slice of their serving access point's band instead.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::channel::{channel_gain, ChannelParams, GainScale, LinkGeometry, Position};
use crate::error::{Error, Result};
use crate::noma::{LinkBudget, QosTargets, UserSet};
use crate::optimizer::{maximize_min_rate, maximize_sum_rate, Objective, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FrequencyColor {
    F1,
    F2,
}

impl fmt::Display for FrequencyColor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrequencyColor::F1 => write!(f, "F1"),
            FrequencyColor::F2 => write!(f, "F2"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VapNode {
    pub id: usize,
    pub position: Position,
    pub frequency_color: Option<FrequencyColor>,
    pub bandwidth_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridLayout {
    pub rows: usize,
    pub cols: usize,
    pub spacing_m: f64,
}

/// How dedicated carve-outs are sized, as fractions of a VAP's band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandwidthPolicy {
    pub dedicated_fraction: f64,
    pub dedicated_cap: f64,
}

impl Default for BandwidthPolicy {
    fn default() -> Self {
        Self {
            dedicated_fraction: 0.1,
            dedicated_cap: 0.5,
        }
    }
}

/// Horizontal radius within which a user sees an access point.
pub fn cell_radius(params: &ChannelParams, vap_height: f64, user_height: f64) -> Result<f64> {
    if !(vap_height > user_height) {
        return Err(Error::domain(format!(
            "access point height {vap_height} must exceed user height {user_height}"
        )));
    }
    Ok((vap_height - user_height) * params.fov_semiangle_rad().tan())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkScene {
    pub vaps: Vec<VapNode>,
    pub users: Vec<Position>,
    pub channel_params: ChannelParams,
    pub budget: LinkBudget,
    pub gain_scale: GainScale,
    pub policy: BandwidthPolicy,
    layout: Option<GridLayout>,
}

impl NetworkScene {
    /// A `rows × cols` grid of access points at `vap_height`, row-major ids,
    /// uncoloured. Users are added separately.
    #[allow(clippy::too_many_arguments)]
    pub fn grid(
        layout: GridLayout,
        vap_height: f64,
        user_height: f64,
        bandwidth_hz: f64,
        channel_params: ChannelParams,
        budget: LinkBudget,
        gain_scale: GainScale,
        policy: BandwidthPolicy,
    ) -> Result<Self> {
        if layout.rows == 0 || layout.cols == 0 {
            return Err(Error::UnsupportedLayout(
                "grid needs at least one row and column".into(),
            ));
        }
        if !(bandwidth_hz > 0.0) {
            return Err(Error::domain("bandwidth must be positive"));
        }
        let radius = cell_radius(&channel_params, vap_height, user_height)?;
        // any five square-lattice points span 2·spacing, so spacing > radius caps visibility at four
        if !(layout.spacing_m > radius) {
            return Err(Error::UnsupportedLayout(format!(
                "spacing {} m must exceed the cell radius {radius:.4} m",
                layout.spacing_m
            )));
        }
        if !(policy.dedicated_fraction > 0.0
            && policy.dedicated_cap >= policy.dedicated_fraction
            && policy.dedicated_cap < 1.0)
        {
            return Err(Error::domain("dedicated carve-out policy out of range"));
        }
        let vaps = (0..layout.rows)
            .flat_map(|r| (0..layout.cols).map(move |c| (r, c)))
            .map(|(r, c)| VapNode {
                id: r * layout.cols + c,
                position: Position::new(
                    c as f64 * layout.spacing_m,
                    r as f64 * layout.spacing_m,
                    vap_height,
                ),
                frequency_color: None,
                bandwidth_hz,
            })
            .collect();
        Ok(Self {
            vaps,
            users: Vec::new(),
            channel_params,
            budget,
            gain_scale,
            policy,
            layout: Some(layout),
        })
    }

    /// A scene from arbitrary access-point positions. Such scenes cannot be
    /// coloured by [`color_grid`].
    pub fn from_positions(
        positions: Vec<Position>,
        bandwidth_hz: f64,
        channel_params: ChannelParams,
        budget: LinkBudget,
    ) -> Self {
        let vaps = positions
            .into_iter()
            .enumerate()
            .map(|(id, position)| VapNode {
                id,
                position,
                frequency_color: None,
                bandwidth_hz,
            })
            .collect();
        Self {
            vaps,
            users: Vec::new(),
            channel_params,
            budget,
            gain_scale: GainScale::default(),
            policy: BandwidthPolicy::default(),
            layout: None,
        }
    }

    pub fn layout(&self) -> Option<GridLayout> {
        self.layout
    }

    pub fn with_users(mut self, users: Vec<Position>) -> Self {
        self.users = users;
        self
    }

    /// Physical LOS gain between access point `vap` and `user`.
    pub fn gain(&self, vap: usize, user: &Position) -> f64 {
        LinkGeometry::new(self.vaps[vap].position, *user)
            .and_then(|g| channel_gain(&g, &self.channel_params))
            .unwrap_or(0.0)
    }

    /// Rectangle covering every grid tile: the grid hull grown by half a spacing.
    pub fn service_area(&self) -> Option<(f64, f64, f64, f64)> {
        let l = self.layout?;
        let half = l.spacing_m / 2.0;
        Some((
            -half,
            (l.cols - 1) as f64 * l.spacing_m + half,
            -half,
            (l.rows - 1) as f64 * l.spacing_m + half,
        ))
    }
}

/// Checkerboard two-colouring of a grid scene.
pub fn color_grid(mut scene: NetworkScene) -> Result<NetworkScene> {
    let Some(layout) = scene.layout else {
        return Err(Error::UnsupportedLayout(
            "frequency colouring needs a rectangular grid".into(),
        ));
    };
    for vap in &mut scene.vaps {
        let (r, c) = (vap.id / layout.cols, vap.id % layout.cols);
        vap.frequency_color = Some(if (r + c) % 2 == 0 {
            FrequencyColor::F1
        } else {
            FrequencyColor::F2
        });
    }
    Ok(scene)
}

/// Area type: the number of access points a user receives LOS signal from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AreaLabel {
    L1,
    L2,
    L3,
    L4,
}

impl AreaLabel {
    pub const ALL: [AreaLabel; 4] = [AreaLabel::L1, AreaLabel::L2, AreaLabel::L3, AreaLabel::L4];

    pub fn from_count(n: usize) -> Option<Self> {
        match n {
            1 => Some(AreaLabel::L1),
            2 => Some(AreaLabel::L2),
            3 => Some(AreaLabel::L3),
            4 => Some(AreaLabel::L4),
            _ => None,
        }
    }

    pub fn count(self) -> usize {
        self as usize + 1
    }
}

impl fmt::Display for AreaLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.count())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AreaClass {
    pub visible_vaps: Vec<usize>,
    pub label: AreaLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Coverage {
    Hole,
    Covered(AreaClass),
}

impl Coverage {
    pub fn label(&self) -> Option<AreaLabel> {
        match self {
            Coverage::Hole => None,
            Coverage::Covered(c) => Some(c.label),
        }
    }
}

/// Visible access points are those inside the receiver FOV, boundary included.
pub fn classify(user: &Position, scene: &NetworkScene) -> Coverage {
    let visible: Vec<usize> = scene
        .vaps
        .iter()
        .filter(|v| scene.gain(v.id, user) > 0.0)
        .map(|v| v.id)
        .collect();
    if visible.is_empty() {
        return Coverage::Hole;
    }
    let label = AreaLabel::from_count(visible.len()).unwrap_or_else(|| {
        panic!(
            "{} visible access points; grid construction guarantees at most four",
            visible.len()
        )
    });
    Coverage::Covered(AreaClass {
        visible_vaps: visible,
        label,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AssignStatus {
    Assigned,
    CoverageHole,
    /// An L4 user found its serving VAP's carve-out budget spent.
    CarveOutExhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserAssignment {
    pub user: usize,
    pub class: Option<AreaLabel>,
    pub vap: Option<usize>,
    pub dedicated: bool,
    pub bandwidth_hz: f64,
    pub status: AssignStatus,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VapLoad {
    /// NOMA users on the shared band, in assignment order.
    pub shared_users: Vec<usize>,
    pub dedicated_users: Vec<usize>,
    pub shared_bandwidth_hz: f64,
    pub carve_outs_hz: Vec<f64>,
}

impl VapLoad {
    pub fn connected(&self) -> usize {
        self.shared_users.len() + self.dedicated_users.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub users: Vec<UserAssignment>,
    pub per_vap: Vec<VapLoad>,
}

/// Assigns users in id order. Users with an interference-free colour go to
/// the least-loaded such access point (ties: stronger gain, then lower id);
/// the rest take a dedicated carve-out from their strongest access point.
pub fn assign_users(scene: &NetworkScene) -> Result<Assignment> {
    let colors: Vec<FrequencyColor> = scene
        .vaps
        .iter()
        .map(|v| {
            v.frequency_color
                .ok_or_else(|| Error::domain(format!("access point {} is not coloured", v.id)))
        })
        .collect::<Result<_>>()?;

    let mut per_vap = vec![VapLoad::default(); scene.vaps.len()];
    let mut carved = vec![0usize; scene.vaps.len()];
    let mut users = Vec::with_capacity(scene.users.len());

    for (uid, pos) in scene.users.iter().enumerate() {
        let Coverage::Covered(class) = classify(pos, scene) else {
            users.push(UserAssignment {
                user: uid,
                class: None,
                vap: None,
                dedicated: false,
                bandwidth_hz: 0.0,
                status: AssignStatus::CoverageHole,
            });
            continue;
        };
        let gains: Vec<(usize, f64)> = class
            .visible_vaps
            .iter()
            .map(|&v| (v, scene.gain(v, pos)))
            .collect();

        let candidates: Vec<(usize, f64)> = gains
            .iter()
            .copied()
            .filter(|(v, _)| {
                class
                    .visible_vaps
                    .iter()
                    .filter(|w| colors[**w] == colors[*v])
                    .count()
                    == 1
            })
            .collect();

        let mut record = UserAssignment {
            user: uid,
            class: Some(class.label),
            vap: None,
            dedicated: false,
            bandwidth_hz: 0.0,
            status: AssignStatus::Assigned,
        };

        if let Some(&(vap, _)) = candidates.iter().min_by(|a, b| {
            per_vap[a.0]
                .connected()
                .cmp(&per_vap[b.0].connected())
                .then(b.1.total_cmp(&a.1))
                .then(a.0.cmp(&b.0))
        }) {
            record.vap = Some(vap);
            per_vap[vap].shared_users.push(uid);
        } else {
            let &(vap, _) = gains
                .iter()
                .min_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)))
                .expect("covered users see at least one access point");
            let b = scene.vaps[vap].bandwidth_hz;
            let max_slices = (scene.policy.dedicated_cap / scene.policy.dedicated_fraction + 1e-9)
                .floor() as usize;
            record.vap = Some(vap);
            if carved[vap] < max_slices {
                carved[vap] += 1;
                record.dedicated = true;
                record.bandwidth_hz = b * scene.policy.dedicated_fraction;
                per_vap[vap].dedicated_users.push(uid);
                per_vap[vap].carve_outs_hz.push(record.bandwidth_hz);
            } else {
                record.status = AssignStatus::CarveOutExhausted;
            }
        }
        users.push(record);
    }

    for (vap, load) in per_vap.iter_mut().enumerate() {
        let carve: f64 = load.carve_outs_hz.iter().sum();
        load.shared_bandwidth_hz = scene.vaps[vap].bandwidth_hz - carve;
    }
    for u in &mut users {
        if let (Some(v), false, AssignStatus::Assigned) = (u.vap, u.dedicated, u.status) {
            u.bandwidth_hz = per_vap[v].shared_bandwidth_hz;
        }
    }
    Ok(Assignment { users, per_vap })
}

/// Per-user outcome of the cell solves.
#[derive(Debug, Clone, PartialEq)]
pub struct UserRate {
    pub user: usize,
    /// b/s/Hz on the user's band.
    pub spectral_efficiency: f64,
    pub throughput_bps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Throughput {
    /// Indexed by user id; `None` for unassigned users and users in failed cells.
    pub users: Vec<Option<UserRate>>,
    /// Cells whose solve failed, with the reason; other cells are unaffected.
    pub failed_cells: Vec<(usize, Error)>,
}

/// Solves every access point's NOMA cell and every dedicated link.
pub fn cell_throughput(
    scene: &NetworkScene,
    assignment: &Assignment,
    criterion: Objective,
    qos_target: f64,
    cfg: &SolverConfig,
) -> Throughput {
    let mut out: Vec<Option<UserRate>> = vec![None; scene.users.len()];
    let mut failed = Vec::new();
    let scale = scene.gain_scale.factor();
    let solve = |users: &UserSet| match criterion {
        Objective::Sum => maximize_sum_rate(&scene.budget, users, cfg),
        Objective::Min => maximize_min_rate(&scene.budget, users, cfg),
    };

    for (vap, load) in assignment.per_vap.iter().enumerate() {
        if !load.shared_users.is_empty() {
            let mut members: Vec<(usize, f64)> = load
                .shared_users
                .iter()
                .map(|&u| (u, scene.gain(vap, &scene.users[u]) * scale))
                .collect();
            members.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            let result = UserSet::new(
                members.iter().map(|m| m.1).collect(),
                QosTargets::uniform(qos_target, members.len()),
            )
            .and_then(|set| solve(&set));
            match result {
                Ok(res) => {
                    for ((u, _), r) in members.iter().zip(res.rates.as_slice()) {
                        out[*u] = Some(UserRate {
                            user: *u,
                            spectral_efficiency: *r,
                            throughput_bps: r * load.shared_bandwidth_hz,
                        });
                    }
                }
                Err(e) => failed.push((vap, e)),
            }
        }
        for (&u, &bw) in load.dedicated_users.iter().zip(&load.carve_outs_hz) {
            let h = scene.gain(vap, &scene.users[u]) * scale;
            match UserSet::new(vec![h], QosTargets(vec![qos_target])).and_then(|set| solve(&set)) {
                Ok(res) => {
                    let r = res.rates.as_slice()[0];
                    out[u] = Some(UserRate {
                        user: u,
                        spectral_efficiency: r,
                        throughput_bps: r * bw,
                    });
                }
                Err(e) => failed.push((vap, e)),
            }
        }
    }
    Throughput {
        users: out,
        failed_cells: failed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noma::DbConvention;

    fn budget() -> LinkBudget {
        LinkBudget::new(70.0, 0.4, 0.05, DbConvention::Amplitude).unwrap()
    }

    fn scene(rows: usize, cols: usize, spacing: f64) -> NetworkScene {
        let s = NetworkScene::grid(
            GridLayout {
                rows,
                cols,
                spacing_m: spacing,
            },
            3.0,
            0.85,
            20e6,
            ChannelParams::table_defaults(),
            budget(),
            GainScale::Normalized,
            BandwidthPolicy::default(),
        )
        .unwrap();
        color_grid(s).unwrap()
    }

    fn user(x: f64, y: f64) -> Position {
        Position::new(x, y, 0.85)
    }

    #[test]
    fn radius_values() {
        let p = ChannelParams::table_defaults();
        // 2.15 · tan 32° = 1.3434691066050541
        assert!((cell_radius(&p, 3.0, 0.85).unwrap() - 1.343_469_106_605_054).abs() < 1e-12);
        let twice = cell_radius(&p, 0.85 + 4.3, 0.85).unwrap();
        assert!((twice - 2.0 * 1.343_469_106_605_054).abs() < 1e-12);
        let narrow = ChannelParams::new(1e-4, 1.0, 1.5, 1e-6, 1.0).unwrap();
        assert!(cell_radius(&narrow, 3.0, 0.85).unwrap() < 1e-5);
        assert!(cell_radius(&p, 0.85, 0.85).is_err());
    }

    #[test]
    fn checkerboard() {
        let s = scene(2, 2, 2.5);
        let c: Vec<_> = s.vaps.iter().map(|v| v.frequency_color.unwrap()).collect();
        assert_eq!(
            c,
            vec![
                FrequencyColor::F1,
                FrequencyColor::F2,
                FrequencyColor::F2,
                FrequencyColor::F1
            ]
        );
        let row = scene(1, 5, 2.5);
        for w in row.vaps.windows(2) {
            assert_ne!(w[0].frequency_color, w[1].frequency_color);
        }
        for (rows, cols) in [(3, 4), (5, 5), (1, 1), (6, 2)] {
            let g = scene(rows, cols, 1.8);
            for a in &g.vaps {
                for b in &g.vaps {
                    if a.position.horizontal_distance(&b.position) < 1.8 + 1e-9 && a.id != b.id {
                        assert_ne!(a.frequency_color, b.frequency_color);
                    }
                }
            }
        }
        let free = NetworkScene::from_positions(
            vec![Position::new(0.0, 0.0, 3.0)],
            1.0,
            ChannelParams::table_defaults(),
            budget(),
        );
        assert!(matches!(color_grid(free), Err(Error::UnsupportedLayout(_))));
    }

    #[test]
    fn classify_examples() {
        let s = scene(2, 2, 2.5);
        assert_eq!(classify(&user(0.0, 0.0), &s).label(), Some(AreaLabel::L1));
        assert_eq!(classify(&user(1.25, 0.0), &s).label(), Some(AreaLabel::L2));
        let dense = scene(2, 2, 1.8);
        assert_eq!(
            classify(&user(0.9, 0.9), &dense).label(),
            Some(AreaLabel::L4)
        );
        assert_eq!(classify(&user(-5.0, -5.0), &dense), Coverage::Hole);
    }

    #[test]
    fn too_dense_grid_is_rejected() {
        let r = NetworkScene::grid(
            GridLayout {
                rows: 3,
                cols: 3,
                spacing_m: 1.0,
            },
            3.0,
            0.85,
            20e6,
            ChannelParams::table_defaults(),
            budget(),
            GainScale::Normalized,
            BandwidthPolicy::default(),
        );
        assert!(matches!(r, Err(Error::UnsupportedLayout(_))));
    }

    #[test]
    fn load_balancing_prefers_lighter_vap() {
        let s = scene(1, 2, 2.5);
        // three users only VAP 0 sees, one only VAP 1 sees, then an L2 user
        // slightly closer to VAP 0
        let users = vec![
            user(-0.5, 0.0),
            user(-0.3, 0.1),
            user(0.0, 0.3),
            user(2.8, 0.0),
            user(1.2, 0.0),
        ];
        let s = s.with_users(users);
        let a = assign_users(&s).unwrap();
        assert_eq!(a.users[4].class, Some(AreaLabel::L2));
        assert_eq!(a.users[4].vap, Some(1));
        assert_eq!(a.users[0].vap, Some(0));
    }

    #[test]
    fn l3_goes_to_the_odd_colour() {
        let s = scene(2, 2, 1.8).with_users(vec![user(0.7, 0.7)]);
        assert_eq!(classify(&s.users[0], &s).label(), Some(AreaLabel::L3));
        let a = assign_users(&s).unwrap();
        // visible: 0 (F1), 1 (F2), 2 (F2), so VAP 0 is the only clean choice
        assert_eq!(a.users[0].vap, Some(0));
        assert!(!a.users[0].dedicated);
    }

    #[test]
    fn l4_users_get_carve_outs_until_cap() {
        let users: Vec<Position> = (1..=7).map(|i| user(0.9 + 0.01 * i as f64, 0.9)).collect();
        let s = scene(2, 2, 1.8).with_users(users);
        let a = assign_users(&s).unwrap();
        let dedicated = a.users.iter().filter(|u| u.dedicated).count();
        let exhausted = a
            .users
            .iter()
            .filter(|u| u.status == AssignStatus::CarveOutExhausted)
            .count();
        // all seven prefer the same strongest VAP, which has room for five slices
        assert_eq!(dedicated, 5);
        assert_eq!(exhausted, 2);
        for (v, load) in a.per_vap.iter().enumerate() {
            let total: f64 = load.carve_outs_hz.iter().sum::<f64>() + load.shared_bandwidth_hz;
            assert_eq!(total, s.vaps[v].bandwidth_hz);
            assert!(load.carve_outs_hz.iter().sum::<f64>() <= 0.5 * s.vaps[v].bandwidth_hz);
        }
        assert_eq!(a.users[0].bandwidth_hz, 2e6);
    }

    #[test]
    fn throughput_composes_single_cell_solve() {
        let s = scene(1, 1, 2.5).with_users(vec![user(0.1, 0.0), user(0.5, 0.2), user(-0.9, 0.4)]);
        let a = assign_users(&s).unwrap();
        let cfg = SolverConfig::default();
        let t = cell_throughput(&s, &a, Objective::Sum, 0.6, &cfg);
        assert!(t.failed_cells.is_empty());
        let set =
            UserSet::from_unsorted(s.users.iter().map(|u| (s.gain(0, u) * 1e4, 0.6))).unwrap();
        let direct = maximize_sum_rate(&s.budget, &set, &cfg).unwrap();
        let total: f64 = t
            .users
            .iter()
            .map(|u| u.as_ref().unwrap().throughput_bps)
            .sum();
        assert!((total - direct.objective * 20e6).abs() < 1e-6 * total);
    }

    #[test]
    fn dedicated_user_gets_single_user_rate() {
        let s = scene(2, 2, 1.8).with_users(vec![user(0.9, 0.9)]);
        let a = assign_users(&s).unwrap();
        assert!(a.users[0].dedicated);
        let t = cell_throughput(&s, &a, Objective::Min, 0.6, &SolverConfig::default());
        let r = t.users[0].as_ref().unwrap();
        let h = s.gain(a.users[0].vap.unwrap(), &s.users[0]) * 1e4;
        let cap = (1.0 + s.budget.rho() * h * h).log2();
        assert!((r.spectral_efficiency - cap).abs() < 1e-12);
        assert!((r.throughput_bps - cap * 2e6).abs() < 1e-3);
    }

    #[test]
    fn uncoloured_scene_is_rejected() {
        let s = NetworkScene::from_positions(
            vec![Position::new(0.0, 0.0, 3.0)],
            1.0,
            ChannelParams::table_defaults(),
            budget(),
        )
        .with_users(vec![user(0.0, 0.0)]);
        assert!(assign_users(&s).is_err());
    }
}
