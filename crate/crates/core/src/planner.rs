//! Tree search over imagined observations and discounted-value action selection.
//!
//! Every node of the search tree holds an imagined observation. A node is expanded by one
//! proposal call (one pick, up to `K` places), and each candidate action is pushed through
//! the foresight model to produce a child. After full expansion to `d_max`, every non-root
//! node is valued `γ^(d-1) · (C - L1(o, o_g))`, and the first action of the best node is
//! executed. The loop replans after every step.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::foresight::ForesightPredictor;
use crate::observation::{height_scale, l1_distance_scaled, ChannelWeights, Observation};
use crate::proposal::{greedy_action, multimodal_propose, ProposalConfig, ProposalResult, Scorer};
use crate::simulator::{check_success, oracle_policy, rate_of_progress, PickPlaceAction, WorldState};

#[derive(Debug, Clone, PartialEq)]
pub struct SearchNode {
    pub obs: Observation,
    pub depth: usize,
    pub trajectory: Vec<PickPlaceAction>,
    /// Index of the parent in the node list; `None` for children of the root.
    pub parent: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerConfig {
    /// Number of place proposals per level; its length is `d_max`.
    pub branching: Vec<usize>,
    pub c: f64,
    pub gamma: f64,
    /// `k` here is ignored in favor of `branching`.
    pub proposal: ProposalConfig,
    pub weights: ChannelWeights,
    /// Heights are divided by this before comparing observations. `None` uses the
    /// tallest point of the goal observation.
    pub height_scale: Option<f64>,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self::uniform(3, 3)
    }
}

impl PlannerConfig {
    /// `k` proposals at every one of `d_max` levels.
    pub fn uniform(k: usize, d_max: usize) -> Self {
        Self::kmg(k, d_max, 0)
    }

    /// `m` multi-modal levels with `k` proposals, then `g` single-proposal levels.
    pub fn kmg(k: usize, m: usize, g: usize) -> Self {
        let mut branching = vec![k; m];
        branching.extend(std::iter::repeat_n(1, g));
        Self {
            branching,
            c: 1.0,
            gamma: 0.99,
            proposal: ProposalConfig::with_k(k.max(1)),
            weights: ChannelWeights::height_emphasis(),
            height_scale: None,
        }
    }

    pub fn tvf_small() -> Self {
        Self::kmg(2, 1, 0)
    }

    pub fn tvf_large() -> Self {
        Self::kmg(3, 3, 0)
    }

    /// Parses `tvf-small`, `tvf-large` and `tvf-k<K>-m<M>[-g<G>]`.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "tvf-small" => return Ok(Self::tvf_small()),
            "tvf-large" => return Ok(Self::tvf_large()),
            _ => {}
        }
        let bad = || Error::UnknownMethod(name.to_string());
        let rest = name.strip_prefix("tvf-").ok_or_else(bad)?;
        let (mut k, mut m, mut g) = (None, None, 0);
        for part in rest.split('-') {
            let (key, num) = part.split_at(1.min(part.len()));
            let n: usize = num.parse().map_err(|_| bad())?;
            match key {
                "k" => k = Some(n),
                "m" => m = Some(n),
                "g" => g = n,
                _ => return Err(bad()),
            }
        }
        let cfg = Self::kmg(k.ok_or_else(bad)?, m.ok_or_else(bad)?, g);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn d_max(&self) -> usize {
        self.branching.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.branching.is_empty() || self.branching.contains(&0) {
            return Err(Error::InvalidConfig("need d_max >= 1 and every level k >= 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidConfig(format!("gamma {} outside (0, 1)", self.gamma)));
        }
        if self.c <= 0.0 {
            return Err(Error::InvalidConfig("C must be positive".into()));
        }
        if self.height_scale.is_some_and(|s| s <= 0.0) {
            return Err(Error::InvalidConfig("height scale must be positive".into()));
        }
        self.weights.validate()?;
        for &k in &self.branching {
            ProposalConfig { k, ..self.proposal }.validate()?;
        }
        Ok(())
    }

    pub fn height_scale_for(&self, goal: &Observation) -> f64 {
        self.height_scale.unwrap_or_else(|| height_scale(goal))
    }
}

/// Breadth-first full expansion to `d_max`. Returns every non-root node, depth-major,
/// then in parent order, then in proposal order. A node whose proposal is empty stays a
/// leaf.
pub fn tree_search(
    o_t: &Observation,
    o_g: &Observation,
    f: &dyn ForesightPredictor,
    scorer: &dyn Scorer,
    cfg: &PlannerConfig,
) -> Result<Vec<SearchNode>> {
    Ok(search_with_root_proposal(o_t, o_g, f, scorer, cfg)?.0)
}

fn search_with_root_proposal(
    o_t: &Observation,
    o_g: &Observation,
    f: &dyn ForesightPredictor,
    scorer: &dyn Scorer,
    cfg: &PlannerConfig,
) -> Result<(Vec<SearchNode>, Option<ProposalResult>)> {
    cfg.validate()?;
    let calib = *o_t.calib();
    let root = SearchNode {
        obs: o_t.clone(),
        depth: 0,
        trajectory: Vec::new(),
        parent: None,
    };
    let mut nodes: Vec<SearchNode> = Vec::new();
    // `None` is the root.
    let mut frontier: Vec<Option<usize>> = vec![None];
    let mut root_proposal = None;
    for &k in &cfg.branching {
        let pcfg = ProposalConfig { k, ..cfg.proposal };
        let expanded: Vec<Result<(Option<ProposalResult>, Vec<SearchNode>)>> = frontier
            .par_iter()
            .map(|&id| {
                let node = id.map_or(&root, |i| &nodes[i]);
                let proposal = match multimodal_propose(&node.obs, o_g, scorer, &pcfg) {
                    Ok(p) => p,
                    Err(Error::EmptyProposal) => return Ok((None, Vec::new())),
                    Err(e) => return Err(e),
                };
                let children = proposal
                    .actions(&calib)?
                    .into_iter()
                    .map(|a| {
                        let mut trajectory = node.trajectory.clone();
                        trajectory.push(a);
                        SearchNode {
                            obs: f.predict(&node.obs, &a),
                            depth: node.depth + 1,
                            trajectory,
                            parent: id,
                        }
                    })
                    .collect();
                Ok((Some(proposal), children))
            })
            .collect();
        let start = nodes.len();
        for (&id, r) in frontier.iter().zip(expanded) {
            let (proposal, children) = r?;
            if id.is_none() {
                root_proposal = proposal;
            }
            nodes.extend(children);
        }
        frontier = (start..nodes.len()).map(Some).collect();
        if frontier.is_empty() {
            break;
        }
    }
    Ok((nodes, root_proposal))
}

/// `γ^(d-1) · (C - L1(obs, o_g))`.
pub fn node_value(n: &SearchNode, o_g: &Observation, cfg: &PlannerConfig) -> Result<f64> {
    if n.depth == 0 {
        return Err(Error::RootNode);
    }
    let l1 = l1_distance_scaled(&n.obs, o_g, &cfg.weights, cfg.height_scale_for(o_g))?;
    Ok(cfg.gamma.powi(n.depth as i32 - 1) * (cfg.c - l1))
}

/// Index and value of the best node. Scans in node order starting from `v_max = 0`
/// with strict `>`, so ties go to the shallower node, then the earlier one. No node
/// with a positive value is a planning failure.
pub fn best_node(values: &[f64]) -> Result<usize> {
    if values.is_empty() {
        return Err(Error::PlanningFailure("search produced no nodes".into()));
    }
    let mut v_max = 0.0;
    let mut best = None;
    for (i, &v) in values.iter().enumerate() {
        if v > v_max {
            v_max = v;
            best = Some(i);
        }
    }
    best.ok_or_else(|| Error::PlanningFailure("no node has a positive value".into()))
}

pub fn tvf_select(nodes: &[SearchNode], o_g: &Observation, cfg: &PlannerConfig) -> Result<PickPlaceAction> {
    let values = nodes
        .iter()
        .map(|n| node_value(n, o_g, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(nodes[best_node(&values)?].trajectory[0])
}

/// How each step's action is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Tvf(PlannerConfig),
    /// Pick arg-max, place arg-max.
    Greedy,
    /// The scripted expert, acting on the true world state.
    Oracle,
}

impl Method {
    /// `tvf-small`, `tvf-large`, `tvf-k<K>-m<M>[-g<G>]`, `greedy` or `oracle`.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "greedy" => Ok(Method::Greedy),
            "oracle" => Ok(Method::Oracle),
            _ => PlannerConfig::from_name(name).map(Method::Tvf),
        }
    }
}

/// What the planner looked at for one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanTrace {
    pub proposal: Option<ProposalResult>,
    pub node_values: Vec<f64>,
    pub node_depths: Vec<usize>,
    pub chosen_node: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepPlan {
    pub action: PickPlaceAction,
    pub trace: PlanTrace,
}

/// One planning step from the true world.
pub fn plan_step(
    world: &WorldState,
    goal: &WorldState,
    o_g: &Observation,
    method: &Method,
    f: &dyn ForesightPredictor,
    scorer: &dyn Scorer,
) -> Result<StepPlan> {
    let empty_trace = PlanTrace {
        proposal: None,
        node_values: Vec::new(),
        node_depths: Vec::new(),
        chosen_node: None,
    };
    match method {
        Method::Oracle => Ok(StepPlan {
            action: oracle_policy(world, goal)?,
            trace: empty_trace,
        }),
        Method::Greedy => {
            let o = world.render();
            let maps = scorer.score(&o, o_g)?;
            Ok(StepPlan {
                action: greedy_action(&maps, o.calib())?,
                trace: empty_trace,
            })
        }
        Method::Tvf(cfg) => {
            f.sync(world);
            let (nodes, proposal) = search_with_root_proposal(&world.render(), o_g, f, scorer, cfg)?;
            let values = nodes
                .iter()
                .map(|n| node_value(n, o_g, cfg))
                .collect::<Result<Vec<_>>>()?;
            let best = best_node(&values)?;
            Ok(StepPlan {
                action: nodes[best].trajectory[0],
                trace: PlanTrace {
                    proposal,
                    node_values: values,
                    node_depths: nodes.iter().map(|n| n.depth).collect(),
                    chosen_node: Some(best),
                },
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutStep {
    pub index: usize,
    pub action: PickPlaceAction,
    pub trace: PlanTrace,
    pub success: bool,
    pub progress: f64,
    pub unstable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub steps: Vec<RolloutStep>,
    pub success: bool,
    pub progress: f64,
    /// Why the rollout stopped early, if it did.
    pub failure: Option<String>,
    pub final_world: WorldState,
}

/// Plan, act, replan until the goal is reached or `max_steps` actions were taken. A
/// planning failure ends the rollout as unsuccessful with its partial progress.
pub fn run_policy(
    world: &WorldState,
    goal: &WorldState,
    method: &Method,
    f: &dyn ForesightPredictor,
    scorer: &dyn Scorer,
    max_steps: usize,
) -> Result<Rollout> {
    run_policy_with(world, goal, method, f, scorer, max_steps, |_, _| Ok(()))
}

/// [`run_policy`] calling `on_step(world_before, step)` after each executed step.
pub fn run_policy_with<F>(
    world: &WorldState,
    goal: &WorldState,
    method: &Method,
    f: &dyn ForesightPredictor,
    scorer: &dyn Scorer,
    max_steps: usize,
    mut on_step: F,
) -> Result<Rollout>
where
    F: FnMut(&WorldState, &RolloutStep) -> Result<()>,
{
    let o_g = goal.render();
    let mut world = world.clone();
    let mut steps = Vec::new();
    let mut success = check_success(&world, goal)?;
    let mut failure = None;
    while !success && steps.len() < max_steps {
        let plan = match plan_step(&world, goal, &o_g, method, f, scorer) {
            Ok(p) => p,
            Err(e @ (Error::PlanningFailure(_) | Error::EmptyProposal | Error::NoLegalMove(_))) => {
                log::info!("rollout stopped after {} steps: {e}", steps.len());
                failure = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        };
        let next = world.apply_action(&plan.action);
        success = check_success(&next, goal)?;
        let step = RolloutStep {
            index: steps.len(),
            action: plan.action,
            trace: plan.trace,
            success,
            progress: rate_of_progress(&next, goal)?,
            unstable: next.unstable,
        };
        on_step(&world, &step)?;
        steps.push(step);
        world = next;
    }
    Ok(Rollout {
        steps,
        success,
        progress: rate_of_progress(&world, goal)?,
        failure,
        final_world: world,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::foresight::{GeometricPredictor, OraclePredictor};
    use crate::proposal::{ActionValueMaps, HeuristicScorer};
    use crate::simulator::task_by_name;

    /// Scorer with a fixed place map holding `k` well-separated equal peaks.
    struct PeaksScorer {
        k: usize,
    }

    impl Scorer for PeaksScorer {
        fn score(&self, o: &Observation, _goal: &Observation) -> Result<ActionValueMaps> {
            let mut m = ActionValueMaps::for_calib(o.calib());
            m.q_pick[0] = 1.0;
            for i in 0..self.k {
                m.set_place(20 + 30 * i, 20 + 30 * i, i, 1.0 - 0.1 * i as f64);
            }
            Ok(m)
        }

        fn name(&self) -> &'static str {
            "peaks"
        }
    }

    struct Identity;

    impl ForesightPredictor for Identity {
        fn predict(&self, o: &Observation, _a: &PickPlaceAction) -> Observation {
            o.clone()
        }

        fn name(&self) -> &'static str {
            "identity"
        }
    }

    fn blank() -> Observation {
        Observation::zeros(Default::default())
    }

    #[test]
    fn node_counts_follow_geometric_series() {
        for (k, d, expected) in [(2, 1, 2), (3, 3, 39), (2, 3, 14)] {
            let cfg = PlannerConfig::uniform(k, d);
            let nodes = tree_search(&blank(), &blank(), &Identity, &PeaksScorer { k: 5 }, &cfg).unwrap();
            assert_eq!(nodes.len(), expected);
            for n in &nodes {
                assert_eq!(n.trajectory.len(), n.depth);
            }
            assert!(nodes.windows(2).all(|w| w[0].depth <= w[1].depth));
        }
    }

    #[test]
    fn degenerate_proposals_shrink_the_tree() {
        let cfg = PlannerConfig::uniform(3, 2);
        let nodes = tree_search(&blank(), &blank(), &Identity, &PeaksScorer { k: 1 }, &cfg).unwrap();
        assert_eq!(nodes.len(), 2);
        let nodes = tree_search(&blank(), &blank(), &Identity, &PeaksScorer { k: 0 }, &cfg).unwrap();
        assert!(nodes.is_empty());
    }

    #[test]
    fn kmg_schedules() {
        assert_eq!(PlannerConfig::from_name("tvf-small").unwrap().branching, vec![2]);
        assert_eq!(PlannerConfig::from_name("tvf-large").unwrap().branching, vec![3, 3, 3]);
        assert_eq!(PlannerConfig::from_name("tvf-k3-m4-g1").unwrap().branching, vec![3, 3, 3, 3, 1]);
        assert!(PlannerConfig::from_name("tvf-k3").is_err());
        assert!(Method::from_name("nope").is_err());
        let nodes = tree_search(
            &blank(),
            &blank(),
            &Identity,
            &PeaksScorer { k: 5 },
            &PlannerConfig::kmg(2, 1, 2),
        )
        .unwrap();
        assert_eq!(nodes.len(), 2 + 2 + 2);
    }

    #[test]
    fn values() {
        let goal = blank();
        let mut cfg = PlannerConfig::uniform(3, 3);
        cfg.height_scale = Some(1.0);
        let node = |depth| SearchNode {
            obs: goal.clone(),
            depth,
            trajectory: vec![PickPlaceAction::new(Default::default(), Default::default()); depth],
            parent: None,
        };
        assert_eq!(node_value(&node(1), &goal, &cfg).unwrap(), 1.0);
        assert!((node_value(&node(3), &goal, &cfg).unwrap() - 0.9801).abs() < 1e-12);
        assert!(matches!(node_value(&node(0), &goal, &cfg), Err(Error::RootNode)));

        let mut off = node(1);
        off.obs = Observation::filled(Default::default(), [0.2, 0.2, 0.2, 0.2]);
        cfg.weights = ChannelWeights::unit();
        assert!((node_value(&off, &goal, &cfg).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn selection_rules() {
        assert_eq!(best_node(&[0.5]).unwrap(), 0);
        assert_eq!(best_node(&[0.3, 0.7, 0.7, 0.1]).unwrap(), 1);
        assert!(matches!(best_node(&[]), Err(Error::PlanningFailure(_))));
        assert!(matches!(best_node(&[0.0, -0.2]), Err(Error::PlanningFailure(_))));
    }

    #[test]
    fn tower_with_oracle_foresight() {
        let tower = task_by_name("tower").unwrap();
        for seed in 0..3 {
            let (world, goal) = tower.load(seed).unwrap();
            let f = OraclePredictor::new(&world);
            let r = run_policy(&world, &goal, &Method::Tvf(PlannerConfig::uniform(3, 1)), &f, &HeuristicScorer::default(), 3)
                .unwrap();
            assert!(r.success, "seed {seed}: {:?}", r.failure);
        }
    }

    #[test]
    fn solved_world_takes_no_steps() {
        let (_, goal) = task_by_name("row").unwrap().load(0).unwrap();
        let r = run_policy(&goal, &goal, &Method::Greedy, &GeometricPredictor::default(), &HeuristicScorer::default(), 3)
            .unwrap();
        assert!(r.success);
        assert!(r.steps.is_empty());
        assert_eq!(r.progress, 1.0);
    }

    #[test]
    fn exhausted_budget_reports_progress() {
        let (world, goal) = task_by_name("row").unwrap().load(0).unwrap();
        let r = run_policy(&world, &goal, &Method::Oracle, &GeometricPredictor::default(), &HeuristicScorer::default(), 1)
            .unwrap();
        assert!(!r.success);
        assert_eq!(r.steps.len(), 1);
        assert!((r.progress - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn depth_two_oracle_search_reaches_expert_states() {
        let tower = task_by_name("tower").unwrap();
        let (world, goal) = tower.load(1).unwrap();
        let f = OraclePredictor::new(&world);
        let nodes = tree_search(&world.render(), &goal.render(), &f, &HeuristicScorer::default(), &PlannerConfig::uniform(3, 2))
            .unwrap();
        // Two expert steps from the start.
        let mut w = world.clone();
        for _ in 0..2 {
            w = w.apply_action(&oracle_policy(&w, &goal).unwrap());
        }
        let target = w.render();
        let best = nodes
            .iter()
            .filter(|n| n.depth == 2)
            .map(|n| crate::observation::l1_distance(&n.obs, &target, &ChannelWeights::unit()).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!(best < 1e-2, "{best}");
    }
}
